//! Norms, the entropy functional, the constants `F(t)` and `eps0`, boundary
//! flux integrals, layer detection and log-log rate fitting.

use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};
use crate::grid::ScalarField;
use crate::model::ModelParams;
use crate::operators::{endpoint_gradients, gradient};
use crate::trajectory::{SolveKind, Trajectory};

/// Multiplier `rho(r)` in `(int (rho f)^2 dr)^(1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum Weight {
    Unit,
    /// `r^((n-1)/2)`.
    Radial {
        n: u32,
    },
    /// `(r - a)(r - b)`, vanishing at both ends.
    Bubble,
}

fn trapezoid(f: &ScalarField, integrand: impl Fn(f64, f64) -> f64) -> f64 {
    let grid = f.grid();
    grid.nodes()
        .iter()
        .zip(f.values())
        .zip(grid.cell_widths())
        .map(|((&r, &x), w)| w * integrand(r, x))
        .sum()
}

pub fn weighted_l2(f: &ScalarField, weight: Weight) -> f64 {
    let (a, b) = (f.grid().a(), f.grid().b());
    let sq = trapezoid(f, |r, x| {
        let rho = match weight {
            Weight::Unit => 1.0,
            Weight::Radial { n } => r.powf(0.5 * (n as f64 - 1.0)),
            Weight::Bubble => (r - a) * (r - b),
        };
        (rho * x) * (rho * x)
    });
    sq.sqrt()
}

pub fn l2(f: &ScalarField) -> f64 {
    weighted_l2(f, Weight::Unit)
}

/// Node range `[first, last]` with `lo <= r <= hi` (a relative slack of 1e-12
/// keeps nodes sitting exactly on an end of the window).
pub fn interval_nodes(f: &ScalarField, lo: f64, hi: f64) -> Result<(usize, usize)> {
    let r = f.grid().nodes();
    let slack = 1e-12 * (f.grid().b() - f.grid().a());
    let first = r.iter().position(|&x| x >= lo - slack);
    let last = r.iter().rposition(|&x| x <= hi + slack);
    match (first, last) {
        (Some(i), Some(j)) if i <= j && lo < hi => Ok((i, j)),
        _ => Err(KsError::EmptyInterval { lo, hi }),
    }
}

/// `max |f|` over the nodes inside `[lo, hi]`.
pub fn sup_norm(f: &ScalarField, lo: f64, hi: f64) -> Result<f64> {
    let (i, j) = interval_nodes(f, lo, hi)?;
    Ok(f.values()[i..=j]
        .iter()
        .fold(0.0, |acc, x| acc.max(x.abs())))
}

pub const U_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyValue {
    /// Relative entropy plus `1/2 int r^(n-1) v^2`.
    pub energy: f64,
    /// `int r^(n-1) u_r^2 / u`.
    pub dissipation: f64,
    /// Nodes with `u <= U_FLOOR`, excluded from both integrals.
    pub floored_nodes: usize,
}

/// Entropy `E` and dissipation `D` of the limit system.
pub fn entropy_functional(
    u: &ScalarField,
    v: &ScalarField,
    u_bar: f64,
    n: u32,
) -> Result<EntropyValue> {
    if !(u_bar > 0.0) {
        return Err(KsError::InvalidParams(format!(
            "entropy needs u_bar > 0, got {u_bar}"
        )));
    }
    u.ensure_same_grid(v)?;
    let grid = u.grid();
    let ur = gradient(u);
    let log_bar = u_bar.ln();
    let phi = |x: f64| x * x.ln() - x;
    let mut energy = 0.0;
    let mut dissipation = 0.0;
    let mut floored = 0;
    for (i, (&r, w)) in grid.nodes().iter().zip(grid.cell_widths()).enumerate() {
        let weight = w * r.powi(n as i32 - 1);
        let (ui, vi) = (u.values()[i], v.values()[i]);
        energy += weight * 0.5 * vi * vi;
        if ui <= U_FLOOR {
            floored += 1;
            continue;
        }
        energy += weight * (phi(ui) - phi(u_bar) - log_bar * (ui - u_bar));
        dissipation += weight * ur.values()[i] * ur.values()[i] / ui;
    }
    Ok(EntropyValue {
        energy,
        dissipation,
        floored_nodes: floored,
    })
}

/// Entropy along a trajectory and the residual of `dE/dt + D = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyTrace {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub dissipation: Vec<f64>,
    /// `(E_{k+1} - E_k) / dt_k + D_{k+1}` per saved interval.
    pub residual: Vec<f64>,
    pub max_residual: f64,
    /// Largest `E_{k+1} - E_k`; positive values are entropy increases.
    pub max_increase: f64,
    pub floored_nodes: usize,
}

pub fn entropy_trace(traj: &Trajectory) -> Result<EntropyTrace> {
    let (u_bar, n) = (traj.params.u_bar, traj.params.n);
    let values = traj
        .states
        .iter()
        .map(|s| entropy_functional(&s.u, &s.second, u_bar, n))
        .collect::<Result<Vec<_>>>()?;
    let energy: Vec<f64> = values.iter().map(|e| e.energy).collect();
    let dissipation: Vec<f64> = values.iter().map(|e| e.dissipation).collect();
    let residual: Vec<f64> = (1..energy.len())
        .map(|k| {
            let dt = traj.times[k] - traj.times[k - 1];
            (energy[k] - energy[k - 1]) / dt + dissipation[k]
        })
        .collect();
    let max_increase = energy
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EntropyTrace {
        times: traj.times.clone(),
        max_residual: residual.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_increase,
        floored_nodes: values.iter().map(|e| e.floored_nodes).sum(),
        energy,
        dissipation,
        residual,
    })
}

/// `(sum_{j <= order} ||d^j f||^2)^(1/2)` with derivatives from [`gradient`].
pub fn discrete_sobolev(f: &ScalarField, order: u32) -> Result<f64> {
    if order > 2 {
        return Err(KsError::InvalidParams(format!(
            "Sobolev order {order} not supported (max 2)"
        )));
    }
    let mut total = l2(f).powi(2);
    let mut deriv = f.clone();
    for _ in 0..order {
        deriv = gradient(&deriv);
        total += l2(&deriv).powi(2);
    }
    Ok(total.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityConstants {
    pub times: Vec<f64>,
    pub f: Vec<f64>,
    pub f_integral: f64,
    pub c0: f64,
    pub eps0: f64,
}

/// `eps0 = min{(8 C0 I)^-2, (32 C0^2 T e^(C0 I) I)^-2}` with `I = int_0^T F`.
pub fn eps0_from_integral(f_integral: f64, t_end: f64, c0: f64) -> f64 {
    let first = (8.0 * c0 * f_integral).powi(-2);
    let second = (32.0 * c0 * c0 * t_end * (c0 * f_integral).exp() * f_integral).powi(-2);
    first.min(second)
}

/// `F(t) = ||u0||^2 + ||v0|| + ||v0||^2 + ||v0||^4 + v_bar1^2 + v_bar2^2 + 1`
/// in `H^2` norms along the limit trajectory, its trapezoidal integral, and `eps0`.
pub fn compute_f_and_eps0(
    traj0: &Trajectory,
    p: &ModelParams,
    c0: f64,
) -> Result<StabilityConstants> {
    if !(c0 > 0.0) {
        return Err(KsError::InvalidParams(format!("C0 = {c0} must be > 0")));
    }
    let f = traj0
        .states
        .iter()
        .map(|s| {
            let uh = discrete_sobolev(&s.u, 2)?;
            let vh = discrete_sobolev(&s.second, 2)?;
            Ok(uh * uh
                + vh
                + vh * vh
                + vh.powi(4)
                + p.v_bar1 * p.v_bar1
                + p.v_bar2 * p.v_bar2
                + 1.0)
        })
        .collect::<Result<Vec<f64>>>()?;
    let f_integral = time_trapezoid(&traj0.times, &f);
    let t_end = *traj0.times.last().unwrap_or(&0.0);
    Ok(StabilityConstants {
        times: traj0.times.clone(),
        eps0: eps0_from_integral(f_integral, t_end, c0),
        f,
        f_integral,
        c0,
    })
}

fn time_trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..values.len() {
        acc += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxIntegrals {
    pub times: Vec<f64>,
    /// `int_0^t u_r(a, tau) dtau`.
    pub at_a: Vec<f64>,
    /// `int_0^t u_r(b, tau) dtau`.
    pub at_b: Vec<f64>,
}

impl FluxIntegrals {
    pub fn max_abs_a(&self) -> f64 {
        self.at_a.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_b(&self) -> f64 {
        self.at_b.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Time integrals of the endpoint density gradients of a limit trajectory,
/// trapezoidal over the saved samples.
pub fn boundary_flux_integral(traj0: &Trajectory) -> FluxIntegrals {
    let (ga, gb): (Vec<f64>, Vec<f64>) = traj0
        .states
        .iter()
        .map(|s| endpoint_gradients(&s.u))
        .unzip();
    FluxIntegrals {
        times: traj0.times.clone(),
        at_a: cumulative_trapezoid(&traj0.times, &ga),
        at_b: cumulative_trapezoid(&traj0.times, &gb),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Layer,
    NoLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub eps: f64,
    pub delta: f64,
    pub threshold: f64,
    /// `sup |v_eps - v0|` over `[a + delta, b - delta] x [0, T]`.
    pub interior_error: f64,
    /// `sup |v_eps - v0|` over `[a, b] x [0, T]`.
    pub full_error: f64,
    pub flux_a: f64,
    pub flux_b: f64,
    pub verdict: Verdict,
}

fn ensure_pair(traj_eps: &Trajectory, traj0: &Trajectory) -> Result<()> {
    traj_eps.ensure_same_sampling(traj0)?;
    if traj_eps.variable_set() != traj0.variable_set() {
        return Err(KsError::SamplingMismatch("variable sets differ".into()));
    }
    Ok(())
}

/// `sup_t sup_[lo,hi] |second_eps - second_0|` over the saved instants.
pub fn sup_difference(
    traj_eps: &Trajectory,
    traj0: &Trajectory,
    lo: f64,
    hi: f64,
    density: bool,
) -> Result<f64> {
    ensure_pair(traj_eps, traj0)?;
    let mut worst: f64 = 0.0;
    for (s1, s0) in traj_eps.states.iter().zip(&traj0.states) {
        let diff = if density {
            s1.u.sub(&s0.u)?
        } else {
            s1.second.sub(&s0.second)?
        };
        worst = worst.max(sup_norm(&diff, lo, hi)?);
    }
    Ok(worst)
}

/// `sup_t ||(r-a)(r-b) w_r||_{L^2}` with `w = v_eps - v0`.
pub fn weighted_gradient_error(traj_eps: &Trajectory, traj0: &Trajectory) -> Result<f64> {
    ensure_pair(traj_eps, traj0)?;
    let mut worst: f64 = 0.0;
    for (s1, s0) in traj_eps.states.iter().zip(&traj0.states) {
        let w = s1.second.sub(&s0.second)?;
        worst = worst.max(weighted_l2(&gradient(&w), Weight::Bubble));
    }
    Ok(worst)
}

/// Compares an `eps > 0` trajectory with the limit one. The verdict is
/// `Layer` when the full-domain error reaches `threshold` while the interior
/// error stays below it.
pub fn detect_layer(
    traj_eps: &Trajectory,
    traj0: &Trajectory,
    delta: f64,
    threshold: f64,
) -> Result<LayerReport> {
    ensure_pair(traj_eps, traj0)?;
    let (a, b) = (traj0.grid.a(), traj0.grid.b());
    if !(delta > 0.0 && delta < 0.5 * (b - a)) {
        return Err(KsError::InvalidParams(format!(
            "delta = {delta} must lie in (0, (b-a)/2)"
        )));
    }
    if traj0.kind != SolveKind::Limit {
        return Err(KsError::InvalidParams(
            "reference trajectory must be the limit solve".into(),
        ));
    }
    let interior_error = sup_difference(traj_eps, traj0, a + delta, b - delta, false)?;
    let full_error = sup_difference(traj_eps, traj0, a, b, false)?;
    let flux = boundary_flux_integral(traj0);
    let verdict = if full_error >= threshold && interior_error < threshold {
        Verdict::Layer
    } else {
        Verdict::NoLayer
    };
    Ok(LayerReport {
        eps: traj_eps.params.eps,
        delta,
        threshold,
        interior_error,
        full_error,
        flux_a: flux.max_abs_a(),
        flux_b: flux.max_abs_b(),
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub eps_values: Vec<f64>,
    pub errors: Vec<f64>,
    /// Observed order: slope of `ln error` against `ln eps`.
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
}

/// Least-squares line through `(ln eps, ln error)`.
pub fn fit_rate(eps_values: &[f64], errors: &[f64]) -> Result<RateFit> {
    if eps_values.len() != errors.len() {
        return Err(KsError::BadFitData(format!(
            "{} eps values but {} errors",
            eps_values.len(),
            errors.len()
        )));
    }
    if eps_values.len() < 3 {
        return Err(KsError::BadFitData(format!(
            "only {} points",
            eps_values.len()
        )));
    }
    if eps_values
        .iter()
        .chain(errors)
        .any(|&x| !(x > 0.0 && x.is_finite()))
    {
        return Err(KsError::BadFitData(
            "entries must be positive and finite".into(),
        ));
    }
    if eps_values.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(KsError::BadFitData(
            "eps values must strictly decrease".into(),
        ));
    }
    let xs: Vec<f64> = eps_values.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let count = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / count;
    let my = ys.iter().sum::<f64>() / count;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    Ok(RateFit {
        eps_values: eps_values.to_vec(),
        errors: errors.to_vec(),
        slope,
        intercept,
        residual: (ss / count).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn grid(m: usize) -> Arc<crate::grid::RadialGrid> {
        GridSpec::uniform(1.0, 2.0, m).build().unwrap()
    }

    #[test]
    fn weighted_l2_examples() {
        let g = grid(201);
        let zero = ScalarField::constant(g.clone(), 0.0).unwrap();
        assert_eq!(weighted_l2(&zero, Weight::Radial { n: 2 }), 0.0);
        let one = ScalarField::constant(g, 1.0).unwrap();
        // trapezoid is exact for the linear integrand r
        assert!((weighted_l2(&one, Weight::Radial { n: 2 }) - 1.5f64.sqrt()).abs() < 1e-14);
        let h = 1.0 / 200.0;
        let bubble = weighted_l2(&one, Weight::Bubble);
        assert!((bubble - (1.0f64 / 30.0).sqrt()).abs() < h * h);
    }

    #[test]
    fn sup_norm_examples() {
        let g = grid(5); // nodes 1, 1.25, 1.5, 1.75, 2
        let c = ScalarField::constant(g.clone(), -3.0).unwrap();
        assert_eq!(sup_norm(&c, 1.0, 2.0).unwrap(), 3.0);
        let f = ScalarField::from_fn(g.clone(), |r| r - 1.0).unwrap();
        assert_eq!(sup_norm(&f, 1.0, 2.0).unwrap(), 1.0);
        // delta = 0.1 snaps to nodes 1.25 .. 1.75
        assert_eq!(interval_nodes(&f, 1.1, 1.9).unwrap(), (1, 3));
        assert_eq!(sup_norm(&f, 1.1, 1.9).unwrap(), 0.75);
        assert!(sup_norm(&f, 1.3, 1.45).is_err());
    }

    #[test]
    fn entropy_examples() {
        let g = grid(101);
        let ubar = ScalarField::constant(g.clone(), 1.0).unwrap();
        let zero = ScalarField::constant(g.clone(), 0.0).unwrap();
        let e = entropy_functional(&ubar, &zero, 1.0, 2).unwrap();
        assert_eq!((e.energy, e.dissipation), (0.0, 0.0));

        let one = ScalarField::constant(g.clone(), 1.0).unwrap();
        let e = entropy_functional(&ubar, &one, 1.0, 2).unwrap();
        assert!((e.energy - 0.75).abs() < 1e-14);
        assert_eq!(e.dissipation, 0.0);

        let two = ScalarField::constant(g.clone(), 2.0).unwrap();
        let e = entropy_functional(&two, &zero, 1.0, 2).unwrap();
        let expected = (2.0 * 2f64.ln() - 1.0) * 1.5;
        assert!((e.energy - expected).abs() < 1e-13);
        assert_eq!(e.dissipation, 0.0);

        assert!(entropy_functional(&two, &zero, 0.0, 2).is_err());
        let with_zero = ScalarField::from_fn(g, |r| if r < 1.05 { 0.0 } else { 1.0 }).unwrap();
        let e = entropy_functional(&with_zero, &zero, 1.0, 2).unwrap();
        assert_eq!(e.floored_nodes, 5);
        assert!(e.energy.is_finite() && e.dissipation.is_finite());
    }

    #[test]
    fn sobolev_examples() {
        let g = grid(401);
        let zero = ScalarField::constant(g.clone(), 0.0).unwrap();
        let one = ScalarField::constant(g.clone(), 1.0).unwrap();
        for order in 0..=2 {
            assert_eq!(discrete_sobolev(&zero, order).unwrap(), 0.0);
            assert!((discrete_sobolev(&one, order).unwrap() - 1.0).abs() < 1e-12);
        }
        let lin = ScalarField::from_fn(g, |r| r).unwrap();
        let h1 = discrete_sobolev(&lin, 1).unwrap();
        assert!((h1 * h1 - 10.0 / 3.0).abs() < 1e-5);
        assert!(discrete_sobolev(&lin, 3).is_err());
    }

    #[test]
    fn eps0_arithmetic() {
        let expected = (64.0 * 1f64.exp().powi(2)).powi(-2);
        let got = eps0_from_integral(2.0, 1.0, 1.0);
        assert!((got - expected).abs() < 1e-18);
        assert!((got - 4.47e-6).abs() < 0.01e-6);
    }

    #[test]
    fn fit_rate_examples() {
        let eps = [1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4];
        let fit = fit_rate(&eps, &eps).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12 && fit.residual < 1e-12);

        let errs: Vec<f64> = eps.iter().map(|e: &f64| 3.0 * e.powf(0.25)).collect();
        let fit = fit_rate(&eps, &errs).unwrap();
        assert!((fit.slope - 0.25).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);

        let errs: Vec<f64> = eps
            .iter()
            .map(|e: &f64| e.powf(0.25) * (1.0 + 0.1 * e.ln().sin()))
            .collect();
        let fit = fit_rate(&eps, &errs).unwrap();
        assert!((fit.slope - 0.25).abs() <= 0.1, "{}", fit.slope);

        assert!(fit_rate(&eps[..2], &eps[..2]).is_err());
        assert!(fit_rate(&[1e-3, 1e-2, 1e-1], &[1.0, 1.0, 1.0]).is_err());
        assert!(fit_rate(&eps[..3], &[1.0, 0.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn scaling_errors_moves_only_intercept(scale in 1e-3f64..1e3, p in 0.05f64..2.0, wobble in 0.0f64..0.3) {
            let eps: [f64; 4] = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
            let errs: Vec<f64> = eps.iter().enumerate().map(|(i, e)| e.powf(p) * (1.0 + wobble * (i as f64).sin())).collect();
            let scaled: Vec<f64> = errs.iter().map(|e| e * scale).collect();
            let f1 = fit_rate(&eps, &errs).unwrap();
            let f2 = fit_rate(&eps, &scaled).unwrap();
            prop_assert!((f1.slope - f2.slope).abs() < 1e-9);
            prop_assert!((f2.intercept - f1.intercept - scale.ln()).abs() < 1e-9);
        }

        #[test]
        fn weighted_norm_sandwich(n in 2u32..5, a in 0.2f64..3.0, len in 0.1f64..3.0, seed in 0u64..1000) {
            let g = GridSpec::uniform(a, a + len, 33).build().unwrap();
            let f = ScalarField::from_fn(g, |r| (r * 7.3 + seed as f64).sin() * 3.0).unwrap();
            let weighted = weighted_l2(&f, Weight::Radial { n }).powi(2);
            let plain = l2(&f).powi(2);
            let k = (n - 1) as i32;
            prop_assert!((a + len).powi(-k) * weighted <= plain * (1.0 + 1e-12));
            prop_assert!(plain <= a.powi(-k) * weighted * (1.0 + 1e-12));
        }

        #[test]
        fn interior_sup_nonincreasing_in_delta(d1 in 0.01f64..0.45, d2 in 0.01f64..0.45, seed in 0u64..1000) {
            let g = GridSpec::uniform(1.0, 2.0, 41).build().unwrap();
            let f = ScalarField::from_fn(g, |r| (r * 11.0 + seed as f64).cos()).unwrap();
            let (small, large) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            if let (Ok(s1), Ok(s2)) = (sup_norm(&f, 1.0 + small, 2.0 - small), sup_norm(&f, 1.0 + large, 2.0 - large)) {
                prop_assert!(s2 <= s1);
            }
        }
    }
}
