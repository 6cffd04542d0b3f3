//! Discrete radial operators on node-centered grids.
//!
//! The radial Laplacian `(1/r^(n-1)) (r^(n-1) f_r)_r` and divergence
//! `(1/r^(n-1)) (r^(n-1) F)_r` are written in flux form over control volumes
//! `[r_(i-1/2), r_(i+1/2)]`, so weighted sums of the divergence telescope to the
//! boundary flux.

use crate::error::{KsError, Result};
use crate::grid::{RadialGrid, ScalarField};
use crate::tridiag::TridiagonalSystem;

fn radial_weight(r: f64, n: u32) -> f64 {
    r.powi(n as i32 - 1)
}

/// Interior stencil of the radial Laplacian at node `i`: `(lower, center, upper)`.
pub fn laplacian_stencil(grid: &RadialGrid, n: u32, i: usize) -> (f64, f64, f64) {
    let r = grid.nodes();
    debug_assert!(i > 0 && i + 1 < r.len());
    let h_left = r[i] - r[i - 1];
    let h_right = r[i + 1] - r[i];
    let volume = 0.5 * (h_left + h_right) * radial_weight(r[i], n);
    let lower = radial_weight(0.5 * (r[i] + r[i - 1]), n) / h_left / volume;
    let upper = radial_weight(0.5 * (r[i] + r[i + 1]), n) / h_right / volume;
    (lower, -(lower + upper), upper)
}

/// Conservative radial Laplacian at interior nodes; boundary entries are zero
/// and left to the caller's boundary treatment.
pub fn radial_laplacian(f: &ScalarField, n: u32) -> ScalarField {
    let grid = f.grid();
    let x = f.values();
    let m = x.len();
    let mut out = vec![0.0; m];
    for i in 1..m - 1 {
        let (lo, c, up) = laplacian_stencil(grid, n, i);
        out[i] = lo * x[i - 1] + c * x[i] + up * x[i + 1];
    }
    ScalarField::from_parts(grid.clone(), out)
}

/// `(1/r^(n-1)) (r^(n-1) F)_r` with face fluxes averaged from the nodes.
///
/// Interior nodes reduce to the centered difference of `r^(n-1) F`. The two
/// boundary nodes carry half-cell values, so that
/// `sum_i r_i^(n-1) div_i w_i = r^(n-1) F |_a^b` exactly for the cell widths `w_i`.
pub fn radial_divergence(flux: &ScalarField, n: u32) -> ScalarField {
    let grid = flux.grid();
    let r = grid.nodes();
    let m = r.len();
    let g: Vec<f64> = r
        .iter()
        .zip(flux.values())
        .map(|(&ri, &fi)| radial_weight(ri, n) * fi)
        .collect();
    let mut out = vec![0.0; m];
    out[0] = (g[1] - g[0]) / (r[1] - r[0]) / radial_weight(r[0], n);
    for i in 1..m - 1 {
        out[i] = (g[i + 1] - g[i - 1]) / (r[i + 1] - r[i - 1]) / radial_weight(r[i], n);
    }
    out[m - 1] = (g[m - 1] - g[m - 2]) / (r[m - 1] - r[m - 2]) / radial_weight(r[m - 1], n);
    ScalarField::from_parts(grid.clone(), out)
}

/// Upwinded `(1/r^(n-1)) (r^(n-1) u v)_r` for the transport term `+div(u v)`,
/// whose transport velocity is `-v`. First order; for robustness runs only.
pub fn upwind_divergence(u: &ScalarField, v: &ScalarField, n: u32) -> Result<ScalarField> {
    u.ensure_same_grid(v)?;
    let grid = u.grid();
    let r = grid.nodes();
    let (uu, vv) = (u.values(), v.values());
    let m = r.len();
    let face: Vec<f64> = (0..m - 1)
        .map(|i| {
            let vf = 0.5 * (vv[i] + vv[i + 1]);
            // velocity -vf > 0 carries mass rightward from node i
            let upstream = if vf < 0.0 { uu[i] } else { uu[i + 1] };
            radial_weight(0.5 * (r[i] + r[i + 1]), n) * vf * upstream
        })
        .collect();
    let widths = grid.cell_widths();
    let mut out = vec![0.0; m];
    let g0 = radial_weight(r[0], n) * uu[0] * vv[0];
    let gm = radial_weight(r[m - 1], n) * uu[m - 1] * vv[m - 1];
    out[0] = (face[0] - g0) / widths[0] / radial_weight(r[0], n);
    for i in 1..m - 1 {
        out[i] = (face[i] - face[i - 1]) / widths[i] / radial_weight(r[i], n);
    }
    out[m - 1] = (gm - face[m - 2]) / widths[m - 1] / radial_weight(r[m - 1], n);
    Ok(ScalarField::from_parts(grid.clone(), out))
}

/// One-sided second-order weights for `f_r` at `a` (applied to nodes 0,1,2) and
/// at `b` (applied to nodes m-1, m-2, m-3).
pub fn endpoint_gradient_weights(grid: &RadialGrid) -> ([f64; 3], [f64; 3]) {
    let r = grid.nodes();
    let m = r.len();
    let (h0, h1) = (r[1] - r[0], r[2] - r[1]);
    let left = [
        -(2.0 * h0 + h1) / (h0 * (h0 + h1)),
        (h0 + h1) / (h0 * h1),
        -h0 / (h1 * (h0 + h1)),
    ];
    let (g0, g1) = (r[m - 1] - r[m - 2], r[m - 2] - r[m - 3]);
    let right = [
        (2.0 * g0 + g1) / (g0 * (g0 + g1)),
        -(g0 + g1) / (g0 * g1),
        g0 / (g1 * (g0 + g1)),
    ];
    (left, right)
}

/// `f_r`: three-point centered differences inside, one-sided second order at the ends.
pub fn gradient(f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let r = grid.nodes();
    let x = f.values();
    let m = x.len();
    let mut out = vec![0.0; m];
    let (left, right) = endpoint_gradient_weights(grid);
    out[0] = left_value(&left, x);
    for i in 1..m - 1 {
        let hl = r[i] - r[i - 1];
        let hr = r[i + 1] - r[i];
        out[i] =
            hl / (hr * (hl + hr)) * (x[i + 1] - x[i]) + hr / (hl * (hl + hr)) * (x[i] - x[i - 1]);
    }
    out[m - 1] = right_value(&right, x);
    ScalarField::from_parts(grid.clone(), out)
}

/// Endpoint values of [`gradient`] without forming the whole field.
pub fn endpoint_gradients(f: &ScalarField) -> (f64, f64) {
    let (left, right) = endpoint_gradient_weights(f.grid());
    let x = f.values();
    (left_value(&left, x), right_value(&right, x))
}

// Difference form so constants differentiate to exactly zero.
fn left_value(w: &[f64; 3], x: &[f64]) -> f64 {
    w[1] * (x[1] - x[0]) + w[2] * (x[2] - x[0])
}

fn right_value(w: &[f64; 3], x: &[f64]) -> f64 {
    let m = x.len();
    w[1] * (x[m - 2] - x[m - 1]) + w[2] * (x[m - 3] - x[m - 1])
}

/// `(I - dt * coeff * Laplacian)` with Dirichlet rows `x[0] = bc.0`, `x[m-1] = bc.1`.
///
/// Interior right-hand side entries are taken from `rhs`; its endpoint entries
/// are replaced by the boundary values.
pub fn assemble_implicit_diffusion(
    grid: &RadialGrid,
    coeff: f64,
    dt: f64,
    n: u32,
    bc: (f64, f64),
    rhs: &[f64],
) -> Result<TridiagonalSystem> {
    if !(coeff >= 0.0) {
        return Err(KsError::InvalidParams(format!(
            "diffusivity {coeff} must be >= 0"
        )));
    }
    let m = grid.len();
    if rhs.len() != m {
        return Err(KsError::LengthMismatch {
            expected: m,
            found: rhs.len(),
        });
    }
    let mut sys = TridiagonalSystem::identity(m);
    sys.rhs.copy_from_slice(rhs);
    let k = dt * coeff;
    if k > 0.0 {
        for i in 1..m - 1 {
            let (lo, c, up) = laplacian_stencil(grid, n, i);
            sys.sub[i] = -k * lo;
            sys.diag[i] = 1.0 - k * c;
            sys.sup[i] = -k * up;
        }
    }
    sys.rhs[0] = bc.0;
    sys.rhs[m - 1] = bc.1;
    Ok(sys)
}
