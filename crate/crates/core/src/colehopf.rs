//! The logarithmic transform `v = -(ln c)_r`, reconstruction of `c` from a
//! transformed trajectory, and the Robin-condition check.

use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};
use crate::grid::ScalarField;
use crate::model::ModelParams;
use crate::operators::{endpoint_gradients, gradient};
use crate::trajectory::{DiagnosticsSummary, SolveKind, State, Trajectory};

/// `v = -c_r / c` nodewise. Fails on non-positive `c`.
pub fn to_v(cfield: &ScalarField) -> Result<ScalarField> {
    let (node, min) = cfield.argmin();
    if !(min > 0.0) {
        return Err(KsError::Singularity { min, node });
    }
    let cr = gradient(cfield);
    cfield.zip_with(&cr, |_, c, g| -g / c)
}

/// Integrand of the exponent of `c` at one instant.
fn exponent_rate(state: &State, kind: SolveKind, p: &ModelParams) -> Result<Vec<f64>> {
    match kind {
        SolveKind::Limit => Ok(state.u.values().iter().map(|u| -u).collect()),
        SolveKind::Transformed => {
            let eps = p.eps;
            let nm1 = p.radial_power();
            let vr = gradient(&state.second);
            Ok(state
                .u
                .grid()
                .nodes()
                .iter()
                .enumerate()
                .map(|(i, &r)| {
                    let (u, v) = (state.u.values()[i], state.second.values()[i]);
                    -u + eps * v * v - eps * vr.values()[i] - eps * nm1 * v / r
                })
                .collect())
        }
        SolveKind::Original => Err(KsError::InvalidParams(
            "reconstruction needs a transformed or limit trajectory".into(),
        )),
    }
}

/// Rebuilds `c` on the saved instants of `traj`:
/// `c(r,t) = c0(r) exp(int_0^t [-u + eps v^2 - eps v_r - eps (n-1) v / r] dtau)`,
/// reducing to `c0 exp(-int_0^t u)` for the limit system. The time integral is
/// the cumulative trapezoidal rule over the saved samples.
///
/// The result is an original-variable trajectory carrying `(u, c)`.
pub fn reconstruct_c(c0: &ScalarField, traj: &Trajectory, p: &ModelParams) -> Result<Trajectory> {
    let (node, min) = c0.argmin();
    if !(min > 0.0) {
        return Err(KsError::Singularity { min, node });
    }
    if !c0.grid().same_nodes(&traj.grid) {
        return Err(KsError::GridMismatch);
    }
    let m = c0.len();
    let mut exponent = vec![0.0; m];
    let mut prev_rate = exponent_rate(&traj.states[0], traj.kind, p)?;
    let mut states = Vec::with_capacity(traj.states.len());
    states.push(State {
        u: traj.states[0].u.clone(),
        second: c0.clone(),
    });
    for k in 1..traj.states.len() {
        let rate = exponent_rate(&traj.states[k], traj.kind, p)?;
        let dt = traj.times[k] - traj.times[k - 1];
        for i in 0..m {
            exponent[i] += 0.5 * dt * (prev_rate[i] + rate[i]);
        }
        let c: Vec<f64> = c0
            .values()
            .iter()
            .zip(&exponent)
            .map(|(c0i, e)| c0i * e.exp())
            .collect();
        states.push(State {
            u: traj.states[k].u.clone(),
            second: ScalarField::new(traj.grid.clone(), c)?,
        });
        prev_rate = rate;
    }
    let min_c = states
        .iter()
        .map(|s| s.second.min())
        .fold(f64::INFINITY, f64::min);
    let summary = DiagnosticsSummary {
        min_c: Some(min_c),
        ..traj.summary
    };
    Ok(Trajectory {
        params: *p,
        controls: traj.controls,
        kind: SolveKind::Original,
        grid: traj.grid.clone(),
        times: traj.times.clone(),
        states,
        diagnostics: Vec::new(),
        summary,
    })
}

/// Normalized endpoint residuals of the Robin conditions along a `c` trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobinReport {
    pub times: Vec<f64>,
    pub residual_a: Vec<f64>,
    pub residual_b: Vec<f64>,
    pub max_a: f64,
    pub max_b: f64,
}

const ROBIN_GUARD: f64 = 1e-30;

/// `|c_r + v_bar c| / (|c_r| + |v_bar c| + 1e-30)` at both ends, per saved instant.
pub fn robin_residual(cfield: &ScalarField, p: &ModelParams) -> (f64, f64) {
    let (ga, gb) = endpoint_gradients(cfield);
    let rel =
        |g: f64, vb: f64, c: f64| (g + vb * c).abs() / (g.abs() + (vb * c).abs() + ROBIN_GUARD);
    (
        rel(ga, p.v_bar1, cfield.first()),
        rel(gb, p.v_bar2, cfield.last()),
    )
}

pub fn check_robin_consistency(ctraj: &Trajectory, p: &ModelParams) -> RobinReport {
    let (residual_a, residual_b): (Vec<f64>, Vec<f64>) = ctraj
        .states
        .iter()
        .map(|s| robin_residual(&s.second, p))
        .unzip();
    RobinReport {
        times: ctraj.times.clone(),
        max_a: residual_a.iter().copied().fold(0.0, f64::max),
        max_b: residual_b.iter().copied().fold(0.0, f64::max),
        residual_a,
        residual_b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::solver::StepControls;
    use crate::trajectory::Trajectory;

    fn max_err(f: &ScalarField, exact: impl Fn(f64) -> f64) -> f64 {
        f.grid()
            .nodes()
            .iter()
            .zip(f.values())
            .map(|(&r, &x)| (x - exact(r)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn to_v_examples() {
        let g = GridSpec::uniform(1.0, 2.0, 201).build().unwrap();
        let c = ScalarField::constant(g.clone(), 3.0).unwrap();
        assert!(to_v(&c).unwrap().max_abs() < 1e-12);

        let c = ScalarField::from_fn(g.clone(), |r| (-0.7 * r).exp()).unwrap();
        assert!(max_err(&to_v(&c).unwrap(), |_| 0.7) < 1e-4);

        // c = exp(-r^2) -> v = 2r, error O(dr^2)
        let errs: Vec<f64> = [101, 201, 401]
            .iter()
            .map(|&m| {
                let g = GridSpec::uniform(1.0, 2.0, m).build().unwrap();
                let c = ScalarField::from_fn(g, |r| (-r * r).exp()).unwrap();
                max_err(&to_v(&c).unwrap(), |r| 2.0 * r)
            })
            .collect();
        assert!(
            errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5,
            "{errs:?}"
        );
        assert!(errs[1] < 50.0 * (0.005f64).powi(2));

        let bad = ScalarField::from_fn(g, |r| r - 1.5).unwrap();
        assert!(to_v(&bad).is_err());
    }

    fn params(eps: f64, u_bar: f64) -> ModelParams {
        ModelParams {
            n: 2,
            eps,
            u_bar,
            v_bar1: 0.0,
            v_bar2: 0.0,
            t_end: 1.0,
            dt: 0.01,
            grid: GridSpec::uniform(1.0, 2.0, 21),
        }
    }

    fn synthetic_limit(p: &ModelParams, times: Vec<f64>) -> Trajectory {
        let g = p.build_grid().unwrap();
        let states = times
            .iter()
            .map(|_| State {
                u: ScalarField::constant(g.clone(), p.u_bar).unwrap(),
                second: ScalarField::constant(g.clone(), 0.0).unwrap(),
            })
            .collect();
        Trajectory {
            params: *p,
            controls: StepControls::new(p.dt),
            kind: SolveKind::Limit,
            grid: g,
            times,
            states,
            diagnostics: Vec::new(),
            summary: DiagnosticsSummary::from_steps(&[]),
        }
    }

    #[test]
    fn reconstruct_constant_density() {
        let p = params(0.0, 1.5);
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let traj = synthetic_limit(&p, times.clone());
        let c0 = ScalarField::from_fn(traj.grid.clone(), |r| 1.0 + r).unwrap();
        let ct = reconstruct_c(&c0, &traj, &p).unwrap();
        assert_eq!(ct.states[0].second.values(), c0.values());
        for (t, s) in times.iter().zip(&ct.states) {
            for (ci, c0i) in s.second.values().iter().zip(c0.values()) {
                assert!((ci - c0i * (-1.5 * t).exp()).abs() < 1e-14);
            }
        }
        assert!(ct.summary.min_c.unwrap() > 0.0);
    }

    #[test]
    fn robin_examples() {
        let mut p = params(0.1, 1.0);
        let g = GridSpec::uniform(1.0, 2.0, 41).build().unwrap();
        let c = ScalarField::constant(g, 2.0).unwrap();
        assert_eq!(robin_residual(&c, &p), (0.0, 0.0));

        // c = exp(-vb r) satisfies c_r + vb c = 0 at both ends
        p.v_bar1 = 0.8;
        p.v_bar2 = 0.8;
        let res: Vec<f64> = [41, 81, 161]
            .iter()
            .map(|&m| {
                let g = GridSpec::uniform(1.0, 2.0, m).build().unwrap();
                let c = ScalarField::from_fn(g, |r| (-0.8 * r).exp()).unwrap();
                let (ra, rb) = robin_residual(&c, &p);
                ra.max(rb)
            })
            .collect();
        assert!(res[0] / res[1] > 3.5 && res[1] / res[2] > 3.5, "{res:?}");
        assert!(res[0] < (1.0f64 / 40.0).powi(2));
    }
}
