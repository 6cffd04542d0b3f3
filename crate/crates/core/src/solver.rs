//! IMEX time stepping for the transformed system (`eps > 0`), its `eps = 0`
//! limit, and the original `(u, c)` chemotaxis system.
//!
//! Diffusion is implicit (theta method, backward Euler by default); transport
//! and the lower-order coupling terms are explicit. The `u_r` drive of the
//! `v`-equation uses the trapezoidal average of the old and the freshly computed
//! density gradient in both the `eps > 0` and the `eps = 0` steppers, so the two
//! schemes coincide away from the boundary as `eps -> 0`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::colehopf::to_v;
use crate::error::{KsError, Result};
use crate::grid::{RadialGrid, ScalarField};
use crate::model::{compatibility_warnings, ModelParams};
use crate::operators::{
    assemble_implicit_diffusion, endpoint_gradient_weights, gradient, radial_divergence,
    radial_laplacian, upwind_divergence,
};
use crate::trajectory::{DiagnosticsSummary, SolveKind, State, StepDiagnostics, Trajectory};

/// Discretization of the explicit transport term `div(u v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transport {
    #[default]
    Centered,
    Upwind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControls {
    pub dt: f64,
    /// Fraction of the transport bound `dr_min / max|v|` a step may use.
    pub cfl_safety: f64,
    /// Implicitness of the diffusion terms; 1 is backward Euler.
    pub theta: f64,
    pub save_every: usize,
    pub tol_pos: f64,
    pub c_floor: f64,
    #[serde(default)]
    pub transport: Transport,
}

impl StepControls {
    pub const DEFAULT_TOL_POS: f64 = 1e-10;
    pub const DEFAULT_C_FLOOR: f64 = 1e-12;

    pub fn new(dt: f64) -> Self {
        StepControls {
            dt,
            cfl_safety: 0.9,
            theta: 1.0,
            save_every: 1,
            tol_pos: Self::DEFAULT_TOL_POS,
            c_floor: Self::DEFAULT_C_FLOOR,
            transport: Transport::Centered,
        }
    }

    pub fn from_params(p: &ModelParams) -> Self {
        StepControls::new(p.dt)
    }

    pub fn with_save_every(mut self, save_every: usize) -> Self {
        self.save_every = save_every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(KsError::InvalidParams(format!(
                "dt = {} must be > 0",
                self.dt
            )));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(KsError::InvalidParams(format!(
                "cfl_safety = {} must lie in (0, 1]",
                self.cfl_safety
            )));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(KsError::InvalidParams(format!(
                "theta = {} must lie in [0.5, 1]",
                self.theta
            )));
        }
        if self.save_every == 0 {
            return Err(KsError::InvalidParams("save_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// Source terms added to the right-hand sides; used by manufactured solutions.
pub trait Forcing {
    fn u_source(&self, _r: f64, _t: f64) -> f64 {
        0.0
    }

    /// Source of the second equation (`v` or `c`).
    fn second_source(&self, _r: f64, _t: f64) -> f64 {
        0.0
    }

    fn is_zero(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoForcing;

impl Forcing for NoForcing {
    fn is_zero(&self) -> bool {
        true
    }
}

fn add_source(rhs: &mut [f64], grid: &RadialGrid, dt: f64, t: f64, f: impl Fn(f64, f64) -> f64) {
    for (x, &r) in rhs.iter_mut().zip(grid.nodes()) {
        *x += dt * f(r, t);
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|x| !x.is_finite()) {
        Some(node) => Err(KsError::NonFinite { node }),
        None => Ok(()),
    }
}

fn transport_bound(grid: &RadialGrid, v: &ScalarField, safety: f64) -> f64 {
    let vmax = v.max_abs();
    if vmax == 0.0 {
        f64::INFINITY
    } else {
        safety * grid.min_spacing() / vmax
    }
}

fn cfl_number(grid: &RadialGrid, v: &ScalarField, dt: f64) -> f64 {
    dt * v.max_abs() / grid.min_spacing()
}

fn check_cfl(grid: &RadialGrid, v: &ScalarField, c: &StepControls) -> Result<()> {
    let bound = transport_bound(grid, v, c.cfl_safety);
    if c.dt > bound {
        Err(KsError::Cfl { dt: c.dt, bound })
    } else {
        Ok(())
    }
}

/// Density update shared by all three steppers: theta-implicit diffusion,
/// explicit `div(u v)`, Dirichlet `u = u_bar` at both ends.
fn advance_density<F: Forcing + ?Sized>(
    u: &ScalarField,
    v: &ScalarField,
    p: &ModelParams,
    c: &StepControls,
    t: f64,
    forcing: &F,
) -> Result<ScalarField> {
    let grid = u.grid();
    let n = p.n;
    let dt = c.dt;
    let transport = match c.transport {
        Transport::Centered => radial_divergence(&u.zip_with(v, |_, x, y| x * y)?, n),
        Transport::Upwind => upwind_divergence(u, v, n)?,
    };
    let mut rhs: Vec<f64> = u
        .values()
        .iter()
        .zip(transport.values())
        .map(|(x, d)| x + dt * d)
        .collect();
    if c.theta < 1.0 {
        let lap = radial_laplacian(u, n);
        for (x, l) in rhs.iter_mut().zip(lap.values()) {
            *x += (1.0 - c.theta) * dt * l;
        }
    }
    if !forcing.is_zero() {
        add_source(&mut rhs, grid, dt, t + dt, |r, s| forcing.u_source(r, s));
    }
    let sys = assemble_implicit_diffusion(grid, c.theta, dt, n, (p.u_bar, p.u_bar), &rhs)?;
    let next = sys.solve()?;
    check_finite(&next)?;
    let out = ScalarField::from_parts(grid.clone(), next);
    let (node, min) = out.argmin();
    if min < -c.tol_pos {
        return Err(KsError::NegativeDensity { min, node });
    }
    Ok(out)
}

fn require_same_grid(u: &ScalarField, other: &ScalarField) -> Result<()> {
    u.ensure_same_grid(other)
}

/// One IMEX step of the transformed system with `eps > 0`.
pub fn step_transformed(
    u: &ScalarField,
    v: &ScalarField,
    p: &ModelParams,
    c: &StepControls,
) -> Result<(ScalarField, ScalarField)> {
    step_transformed_forced(u, v, p, c, 0.0, &NoForcing)
}

/// [`step_transformed`] from time `t` with source terms.
pub fn step_transformed_forced<F: Forcing + ?Sized>(
    u: &ScalarField,
    v: &ScalarField,
    p: &ModelParams,
    c: &StepControls,
    t: f64,
    forcing: &F,
) -> Result<(ScalarField, ScalarField)> {
    if !(p.eps > 0.0) {
        return Err(KsError::InvalidParams(
            "step_transformed needs eps > 0; use step_limit for eps = 0".into(),
        ));
    }
    require_same_grid(u, v)?;
    let grid = u.grid();
    check_cfl(grid, v, c)?;
    let (dt, eps, n) = (c.dt, p.eps, p.n);
    let u_next = advance_density(u, v, p, c, t, forcing)?;

    let ur_old = gradient(u);
    let ur_new = gradient(&u_next);
    let v_sq_r = gradient(&v.map(|x| x * x));
    let nm1 = p.radial_power();
    let mut rhs: Vec<f64> = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let drive = 0.5 * (ur_old.values()[i] + ur_new.values()[i]);
            let vi = v.values()[i];
            vi + dt * (drive - eps * nm1 * vi / (r * r) - eps * v_sq_r.values()[i])
        })
        .collect();
    if c.theta < 1.0 {
        let lap = radial_laplacian(v, n);
        for (x, l) in rhs.iter_mut().zip(lap.values()) {
            *x += (1.0 - c.theta) * dt * eps * l;
        }
    }
    if !forcing.is_zero() {
        add_source(&mut rhs, grid, dt, t + dt, |r, s| {
            forcing.second_source(r, s)
        });
    }
    let sys = assemble_implicit_diffusion(grid, eps * c.theta, dt, n, (p.v_bar1, p.v_bar2), &rhs)?;
    let v_next = sys.solve()?;
    check_finite(&v_next)?;
    Ok((u_next, ScalarField::from_parts(grid.clone(), v_next)))
}

/// One step of the `eps = 0` system: the density as in [`step_transformed`],
/// `v_t = u_r` integrated pointwise (trapezoidal), no boundary condition on `v`.
pub fn step_limit(
    u: &ScalarField,
    v: &ScalarField,
    p: &ModelParams,
    c: &StepControls,
) -> Result<(ScalarField, ScalarField)> {
    step_limit_forced(u, v, p, c, 0.0, &NoForcing)
}

pub fn step_limit_forced<F: Forcing + ?Sized>(
    u: &ScalarField,
    v: &ScalarField,
    p: &ModelParams,
    c: &StepControls,
    t: f64,
    forcing: &F,
) -> Result<(ScalarField, ScalarField)> {
    if p.eps != 0.0 {
        return Err(KsError::InvalidParams(format!(
            "step_limit needs eps = 0, got {}",
            p.eps
        )));
    }
    require_same_grid(u, v)?;
    let grid = u.grid();
    check_cfl(grid, v, c)?;
    let dt = c.dt;
    let u_next = advance_density(u, v, p, c, t, forcing)?;
    let ur_old = gradient(u);
    let ur_new = gradient(&u_next);
    let mut next: Vec<f64> = v
        .values()
        .iter()
        .zip(ur_old.values().iter().zip(ur_new.values()))
        .map(|(vi, (g0, g1))| vi + 0.5 * dt * (g0 + g1))
        .collect();
    if !forcing.is_zero() {
        add_source(&mut next, grid, dt, t + dt, |r, s| {
            forcing.second_source(r, s)
        });
    }
    check_finite(&next)?;
    Ok((u_next, ScalarField::from_parts(grid.clone(), next)))
}

/// One IMEX step of the original system with Robin conditions
/// `c_r + v_bar1 c = 0` at `a` and `c_r + v_bar2 c = 0` at `b` (when `eps > 0`).
pub fn step_original(
    u: &ScalarField,
    cfield: &ScalarField,
    p: &ModelParams,
    c: &StepControls,
) -> Result<(ScalarField, ScalarField)> {
    step_original_forced(u, cfield, p, c, 0.0, &NoForcing)
}

pub fn step_original_forced<F: Forcing + ?Sized>(
    u: &ScalarField,
    cfield: &ScalarField,
    p: &ModelParams,
    c: &StepControls,
    t: f64,
    forcing: &F,
) -> Result<(ScalarField, ScalarField)> {
    require_same_grid(u, cfield)?;
    let grid = u.grid();
    let (node, min) = cfield.argmin();
    if min <= c.c_floor {
        return Err(KsError::Singularity { min, node });
    }
    let v = to_v(cfield)?;
    check_cfl(grid, &v, c)?;
    let u_next = advance_density(u, &v, p, c, t, forcing)?;

    let dt = c.dt;
    let mut rhs = cfield.values().to_vec();
    if !forcing.is_zero() {
        add_source(&mut rhs, grid, dt, t + dt, |r, s| {
            forcing.second_source(r, s)
        });
    }
    let c_next = if p.eps > 0.0 {
        let sys = robin_reaction_diffusion(grid, p, c, &u_next, cfield, rhs)?;
        sys.solve()?
    } else {
        rhs.iter()
            .zip(u_next.values())
            .map(|(x, ui)| x / (1.0 + dt * ui))
            .collect()
    };
    check_finite(&c_next)?;
    let c_next = ScalarField::from_parts(grid.clone(), c_next);
    let (node, min) = c_next.argmin();
    if min <= c.c_floor {
        return Err(KsError::Singularity { min, node });
    }
    Ok((u_next, c_next))
}

/// `(I - theta dt eps L + dt diag(u_next)) c' = rhs` with the second-order
/// one-sided Robin rows reduced to tridiagonal form by eliminating the third
/// stencil node against the adjacent interior row.
fn robin_reaction_diffusion(
    grid: &Arc<RadialGrid>,
    p: &ModelParams,
    c: &StepControls,
    u_next: &ScalarField,
    c_old: &ScalarField,
    mut rhs: Vec<f64>,
) -> Result<crate::tridiag::TridiagonalSystem> {
    let m = grid.len();
    let (dt, eps, n) = (c.dt, p.eps, p.n);
    if c.theta < 1.0 {
        let lap = radial_laplacian(c_old, n);
        for (i, x) in rhs.iter_mut().enumerate().take(m - 1).skip(1) {
            *x += (1.0 - c.theta) * dt * eps * lap.values()[i];
        }
    }
    let mut sys = assemble_implicit_diffusion(grid, eps * c.theta, dt, n, (0.0, 0.0), &rhs)?;
    for i in 1..m - 1 {
        sys.diag[i] += dt * u_next.values()[i];
    }
    let (w, wr) = endpoint_gradient_weights(grid);

    // row 0: (w0 + v1) c0 + w1 c1 + w2 c2 = 0, c2 eliminated with row 1
    let (l1, d1, s1, b1) = (sys.sub[1], sys.diag[1], sys.sup[1], sys.rhs[1]);
    let k = w[2] / s1;
    sys.diag[0] = w[0] + p.v_bar1 - k * l1;
    sys.sup[0] = w[1] - k * d1;
    sys.rhs[0] = -k * b1;

    // row m-1: (W0 + v2) c_{m-1} + W1 c_{m-2} + W2 c_{m-3} = 0, c_{m-3} via row m-2
    let j = m - 2;
    let (lj, dj, sj, bj) = (sys.sub[j], sys.diag[j], sys.sup[j], sys.rhs[j]);
    let k = wr[2] / lj;
    sys.diag[m - 1] = wr[0] + p.v_bar2 - k * sj;
    sys.sub[m - 1] = wr[1] - k * dj;
    sys.rhs[m - 1] = -k * bj;
    Ok(sys)
}

/// Robin residuals `c_r + v_bar c` at `a` and `b`, using the one-sided stencils.
pub fn robin_residuals(cfield: &ScalarField, p: &ModelParams) -> (f64, f64) {
    let (ga, gb) = crate::operators::endpoint_gradients(cfield);
    (
        ga + p.v_bar1 * cfield.first(),
        gb + p.v_bar2 * cfield.last(),
    )
}

/// Initial data for [`solve`].
#[derive(Debug, Clone)]
pub enum InitialData {
    /// `(u0, v0)` for the transformed or limit system.
    Transformed { u0: ScalarField, v0: ScalarField },
    /// `(u0, c0)` for the original system.
    Original { u0: ScalarField, c0: ScalarField },
}

/// Number of steps and the uniform step size that lands exactly on `T`.
pub fn step_count(t_end: f64, dt: f64) -> (usize, f64) {
    if t_end <= 0.0 {
        return (0, dt);
    }
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    (steps, t_end / steps as f64)
}

/// Integrates from `t = 0` to `p.t_end`, saving every `save_every` steps plus the final state.
pub fn solve(
    kind: SolveKind,
    init: InitialData,
    p: &ModelParams,
    c: &StepControls,
) -> Result<Trajectory> {
    solve_forced(kind, init, p, c, &NoForcing)
}

pub fn solve_forced<F: Forcing + ?Sized>(
    kind: SolveKind,
    init: InitialData,
    p: &ModelParams,
    c: &StepControls,
    forcing: &F,
) -> Result<Trajectory> {
    // T = 0 is allowed here and yields the initial state alone
    let mut check = *p;
    if check.t_end == 0.0 {
        check.t_end = 1.0;
    }
    check.validate()?;
    c.validate()?;
    match kind {
        SolveKind::Transformed if p.eps <= 0.0 => {
            return Err(KsError::InvalidParams(
                "transformed solve needs eps > 0".into(),
            ))
        }
        SolveKind::Limit if p.eps != 0.0 => {
            return Err(KsError::InvalidParams("limit solve needs eps = 0".into()))
        }
        _ => {}
    }
    let (mut u, mut second, warnings) = match (kind, init) {
        (SolveKind::Transformed | SolveKind::Limit, InitialData::Transformed { u0, v0 }) => {
            let w = compatibility_warnings(&u0, &v0, p);
            (u0, v0, w)
        }
        (SolveKind::Original, InitialData::Original { u0, c0 }) => (u0, c0, Vec::new()),
        (kind, _) => {
            return Err(KsError::InvalidParams(format!(
                "initial data does not match solve kind {kind:?}"
            )))
        }
    };
    u.ensure_same_grid(&second)?;
    let grid = u.grid().clone();
    if !grid.same_nodes(p.build_grid()?.as_ref()) {
        return Err(KsError::GridMismatch);
    }
    for w in &warnings {
        eprintln!("warning: initial data not compatible: {w}");
    }

    let (steps, dt) = step_count(p.t_end, c.dt);
    let controls = StepControls { dt, ..*c };
    let mut times = vec![0.0];
    let mut states = vec![State {
        u: u.clone(),
        second: second.clone(),
    }];
    let mut diagnostics = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = k as f64 * dt;
        let (u_next, s_next) = match kind {
            SolveKind::Transformed => {
                step_transformed_forced(&u, &second, p, &controls, t, forcing)
            }
            SolveKind::Limit => step_limit_forced(&u, &second, p, &controls, t, forcing),
            SolveKind::Original => step_original_forced(&u, &second, p, &controls, t, forcing),
        }
        .map_err(|e| e.at_time(t))?;
        let t_next = if k + 1 == steps {
            p.t_end
        } else {
            (k + 1) as f64 * dt
        };
        let cfl = match kind {
            SolveKind::Original => cfl_number(&grid, &to_v(&second)?, dt),
            _ => cfl_number(&grid, &second, dt),
        };
        diagnostics.push(StepDiagnostics {
            t: t_next,
            min_u: u_next.min(),
            min_c: (kind == SolveKind::Original).then(|| s_next.min()),
            cfl,
        });
        u = u_next;
        second = s_next;
        if (k + 1) % c.save_every == 0 || k + 1 == steps {
            times.push(t_next);
            states.push(State {
                u: u.clone(),
                second: second.clone(),
            });
        }
    }
    let summary = DiagnosticsSummary::from_steps(&diagnostics);
    let traj = Trajectory {
        params: *p,
        controls,
        kind,
        grid,
        times,
        states,
        diagnostics,
        summary,
    };
    traj.validate()?;
    Ok(traj)
}
