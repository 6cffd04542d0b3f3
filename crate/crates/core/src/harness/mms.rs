//! Manufactured-solution convergence studies for the three steppers.
//!
//! Exact fields on `[a, b]` with `s = r - a`, `L = b - a`, `k = pi / L`:
//!
//! ```text
//! u = u_bar + sin(k s) e^{-t}
//! v = cos(t) s (L - s)
//! c = exp(-cos(t) Q(s)),   Q = L s^2 / 2 - s^3 / 3,   so that -c_r / c = v
//! ```
//!
//! `u = u_bar` and `v = 0` at both ends, hence `v_bar1 = v_bar2 = 0` and the
//! Robin conditions reduce to `c_r = 0`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::io::{write_csv_rows, write_json};
use crate::model::ModelParams;
use crate::solver::{solve_forced, Forcing, InitialData, StepControls};
use crate::trajectory::{SolveKind, Trajectory};

use super::{all_pass, CriterionOutcome, ExperimentConfig, MMS_SPACE_ORDER, MMS_TIME_ORDER};

#[derive(Debug, Clone, Copy)]
pub struct Manufactured {
    pub kind: SolveKind,
    pub n: u32,
    pub eps: f64,
    pub u_bar: f64,
    pub a: f64,
    pub b: f64,
}

impl Manufactured {
    pub fn new(kind: SolveKind, p: &ModelParams) -> Self {
        Manufactured {
            kind,
            n: p.n,
            eps: p.eps,
            u_bar: p.u_bar,
            a: p.grid.a,
            b: p.grid.b,
        }
    }

    fn len(&self) -> f64 {
        self.b - self.a
    }

    fn k(&self) -> f64 {
        PI / self.len()
    }

    fn nm1(&self) -> f64 {
        (self.n - 1) as f64
    }

    pub fn u(&self, r: f64, t: f64) -> f64 {
        self.u_bar + (self.k() * (r - self.a)).sin() * (-t).exp()
    }

    fn u_r(&self, r: f64, t: f64) -> f64 {
        self.k() * (self.k() * (r - self.a)).cos() * (-t).exp()
    }

    fn u_rr(&self, r: f64, t: f64) -> f64 {
        -self.k() * self.k() * (self.k() * (r - self.a)).sin() * (-t).exp()
    }

    pub fn v(&self, r: f64, t: f64) -> f64 {
        let s = r - self.a;
        t.cos() * s * (self.len() - s)
    }

    fn v_r(&self, r: f64, t: f64) -> f64 {
        t.cos() * (self.len() - 2.0 * (r - self.a))
    }

    fn q(&self, r: f64) -> f64 {
        let s = r - self.a;
        self.len() * s * s / 2.0 - s * s * s / 3.0
    }

    pub fn c(&self, r: f64, t: f64) -> f64 {
        (-t.cos() * self.q(r)).exp()
    }

    /// `u_t - Lap u - r^{1-n} (r^{n-1} u v)_r`.
    fn density_source(&self, r: f64, t: f64) -> f64 {
        let (u, ur) = (self.u(r, t), self.u_r(r, t));
        let (v, vr) = (self.v(r, t), self.v_r(r, t));
        let ut = -(self.k() * (r - self.a)).sin() * (-t).exp();
        let lap = self.u_rr(r, t) + self.nm1() / r * ur;
        let div = ur * v + u * vr + self.nm1() / r * u * v;
        ut - lap - div
    }

    /// Source of the `v` equation, with the `eps` terms dropped for the limit system.
    fn v_source(&self, r: f64, t: f64) -> f64 {
        let s = r - self.a;
        let (v, vr) = (self.v(r, t), self.v_r(r, t));
        let vt = -t.sin() * s * (self.len() - s);
        let drive = self.u_r(r, t);
        if self.kind == SolveKind::Limit {
            return vt - drive;
        }
        let vrr = -2.0 * t.cos();
        let operator = vrr + self.nm1() / r * vr - self.nm1() * v / (r * r);
        vt - self.eps * operator + self.eps * 2.0 * v * vr - drive
    }

    /// `c_t - eps Lap c + u c`.
    fn c_source(&self, r: f64, t: f64) -> f64 {
        let c = self.c(r, t);
        let (v, vr) = (self.v(r, t), self.v_r(r, t));
        let ct = t.sin() * self.q(r) * c;
        let cr = -v * c;
        let crr = (v * v - vr) * c;
        ct - self.eps * (crr + self.nm1() / r * cr) + self.u(r, t) * c
    }
}

impl Forcing for Manufactured {
    fn u_source(&self, r: f64, t: f64) -> f64 {
        self.density_source(r, t)
    }

    fn second_source(&self, r: f64, t: f64) -> f64 {
        match self.kind {
            SolveKind::Original => self.c_source(r, t),
            _ => self.v_source(r, t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Refinement {
    Space,
    Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmsLevel {
    pub m: usize,
    pub dt: f64,
    /// `max_t max_r |u - u_exact|` over saved samples.
    pub err_u: f64,
    /// Same for `v` (or `c` for the original system).
    pub err_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmsStudy {
    pub n: u32,
    pub kind: SolveKind,
    pub refinement: Refinement,
    pub eps: f64,
    pub levels: Vec<MmsLevel>,
    /// `log2(e_k / e_{k+1})` of the larger of the two errors.
    pub pairwise_orders: Vec<f64>,
    /// Least-squares order over all levels, per variable: `(u, second)`.
    pub fitted_order_u: f64,
    pub fitted_order_second: f64,
}

impl MmsStudy {
    pub fn observed_order(&self) -> f64 {
        self.fitted_order_u.min(self.fitted_order_second)
    }
}

pub const MMS_EPS: f64 = 0.1;
const MMS_T: f64 = 0.5;
const SPACE_BASE_M: usize = 21;
const SPACE_DT_FACTOR: f64 = 0.2;
const TIME_M: usize = 401;
const TIME_BASE_DT: f64 = 4e-3;
const MMS_SAMPLES: usize = 10;

/// Base parameters of the manufactured problem for `kind`.
pub fn mms_params(kind: SolveKind, n: u32, m: usize, dt: f64) -> ModelParams {
    ModelParams {
        n,
        eps: if kind == SolveKind::Limit {
            0.0
        } else {
            MMS_EPS
        },
        u_bar: 1.0,
        v_bar1: 0.0,
        v_bar2: 0.0,
        t_end: MMS_T,
        dt,
        grid: GridSpec::uniform(1.0, 2.0, m),
    }
}

fn max_error(
    traj: &Trajectory,
    exact_u: impl Fn(f64, f64) -> f64,
    exact_s: impl Fn(f64, f64) -> f64,
) -> (f64, f64) {
    let r = traj.grid.nodes();
    let mut eu: f64 = 0.0;
    let mut es: f64 = 0.0;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        for (i, &ri) in r.iter().enumerate() {
            eu = eu.max((s.u.values()[i] - exact_u(ri, *t)).abs());
            es = es.max((s.second.values()[i] - exact_s(ri, *t)).abs());
        }
    }
    (eu, es)
}

/// Solves the manufactured problem once and returns the sampled errors.
pub fn mms_level(kind: SolveKind, n: u32, m: usize, dt: f64) -> Result<MmsLevel> {
    let p = mms_params(kind, n, m, dt);
    let mf = Manufactured::new(kind, &p);
    let grid = p.build_grid()?;
    let u0 = ScalarField::from_fn(grid.clone(), |r| mf.u(r, 0.0))?;
    let init = match kind {
        SolveKind::Original => InitialData::Original {
            u0,
            c0: ScalarField::from_fn(grid, |r| mf.c(r, 0.0))?,
        },
        _ => InitialData::Transformed {
            u0,
            v0: ScalarField::from_fn(grid, |r| mf.v(r, 0.0))?,
        },
    };
    let (steps, _) = crate::solver::step_count(p.t_end, dt);
    let controls = StepControls::new(dt).with_save_every((steps / MMS_SAMPLES).max(1));
    let traj = solve_forced(kind, init, &p, &controls, &mf)?;
    let (err_u, err_second) = match kind {
        SolveKind::Original => max_error(&traj, |r, t| mf.u(r, t), |r, t| mf.c(r, t)),
        _ => max_error(&traj, |r, t| mf.u(r, t), |r, t| mf.v(r, t)),
    };
    Ok(MmsLevel {
        m,
        dt: traj.controls.dt,
        err_u,
        err_second,
    })
}

fn fitted_order(hs: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Refinement study with `levels` levels. In space, `m` doubles with
/// `dt = 0.2 dr^2`; in time, `dt` halves on a fixed 401-node grid.
pub fn mms_study(
    kind: SolveKind,
    n: u32,
    refinement: Refinement,
    levels: usize,
) -> Result<MmsStudy> {
    if levels < 2 {
        return Err(KsError::InvalidParams(
            "an MMS study needs at least 2 levels".into(),
        ));
    }
    let configs: Vec<(usize, f64)> = (0..levels)
        .map(|k| match refinement {
            Refinement::Space => {
                let m = (SPACE_BASE_M - 1) * (1 << k) + 1;
                let dr = 1.0 / (m - 1) as f64;
                (m, SPACE_DT_FACTOR * dr * dr)
            }
            Refinement::Time => (TIME_M, TIME_BASE_DT / (1 << k) as f64),
        })
        .collect();
    let results = configs
        .iter()
        .map(|&(m, dt)| mms_level(kind, n, m, dt))
        .collect::<Result<Vec<_>>>()?;
    let hs: Vec<f64> = match refinement {
        Refinement::Space => results.iter().map(|l| 1.0 / (l.m - 1) as f64).collect(),
        Refinement::Time => results.iter().map(|l| l.dt).collect(),
    };
    let worst: Vec<f64> = results.iter().map(|l| l.err_u.max(l.err_second)).collect();
    let pairwise_orders = worst.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let eu: Vec<f64> = results.iter().map(|l| l.err_u).collect();
    let es: Vec<f64> = results.iter().map(|l| l.err_second).collect();
    Ok(MmsStudy {
        n,
        kind,
        refinement,
        eps: mms_params(kind, n, 3, 1.0).eps,
        fitted_order_u: fitted_order(&hs, &eu),
        fitted_order_second: fitted_order(&hs, &es),
        levels: results,
        pairwise_orders,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmsReport {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub studies: Vec<MmsStudy>,
    pub criteria: Vec<CriterionOutcome>,
}

impl MmsReport {
    pub fn pass(&self) -> bool {
        all_pass(&self.criteria)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmsRow {
    pub n: u32,
    pub kind: SolveKind,
    pub refinement: Refinement,
    pub m: usize,
    pub dt: f64,
    pub err_u: f64,
    pub err_second: f64,
}

pub fn mms_rows(studies: &[MmsStudy]) -> Vec<MmsRow> {
    studies
        .iter()
        .flat_map(|s| {
            s.levels.iter().map(move |l| MmsRow {
                n: s.n,
                kind: s.kind,
                refinement: s.refinement,
                m: l.m,
                dt: l.dt,
                err_u: l.err_u,
                err_second: l.err_second,
            })
        })
        .collect()
}

pub fn run_mms(cfg: &ExperimentConfig) -> Result<MmsReport> {
    cfg.validate()?;
    let mut studies = Vec::new();
    for &n in &cfg.dims {
        studies.extend(run_mms_studies(n, cfg.levels, cfg.jobs)?);
    }
    write_csv_rows(&cfg.output.join("mms.csv"), &mms_rows(&studies))?;
    let report = MmsReport {
        config_hash: cfg.hash(),
        config: cfg.clone(),
        criteria: vec![mms_criterion(&studies)],
        studies,
    };
    write_json(&cfg.output.join("report.json"), &report)?;
    Ok(report)
}

/// All six studies (three steppers, space and time) in dimension `n`.
pub fn run_mms_studies(n: u32, levels: usize, jobs: usize) -> Result<Vec<MmsStudy>> {
    let tasks: Vec<(SolveKind, Refinement)> = [
        SolveKind::Transformed,
        SolveKind::Limit,
        SolveKind::Original,
    ]
    .into_iter()
    .flat_map(|k| [(k, Refinement::Space), (k, Refinement::Time)])
    .collect();
    super::run_jobs(jobs, &tasks, |&(kind, refinement)| {
        mms_study(kind, n, refinement, levels)
    })
}

pub fn mms_criterion(studies: &[MmsStudy]) -> CriterionOutcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in studies {
        let need = match s.refinement {
            Refinement::Space => MMS_SPACE_ORDER,
            Refinement::Time => MMS_TIME_ORDER,
        };
        let order = s.observed_order();
        pass &= order >= need;
        parts.push(format!(
            "n={} {:?}/{:?} order {:.3} (need >= {need})",
            s.n, s.kind, s.refinement, order
        ));
    }
    CriterionOutcome::new(
        1,
        "manufactured-solution convergence orders",
        pass,
        parts.join("; "),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::NoForcing;

    #[test]
    fn exact_fields_satisfy_boundary_data() {
        let p = mms_params(SolveKind::Original, 2, 11, 1e-3);
        let mf = Manufactured::new(SolveKind::Original, &p);
        for t in [0.0, 0.3, 1.0] {
            assert!((mf.u(1.0, t) - 1.0).abs() < 1e-15);
            assert!((mf.u(2.0, t) - 1.0).abs() < 1e-15);
            assert_eq!(mf.v(1.0, t), 0.0);
            assert_eq!(mf.v(2.0, t), 0.0);
        }
    }

    #[test]
    fn c_and_v_are_consistent() {
        // -c_r / c by central differences against v
        let p = mms_params(SolveKind::Original, 3, 11, 1e-3);
        let mf = Manufactured::new(SolveKind::Original, &p);
        let h = 1e-5;
        for &r in &[1.1, 1.5, 1.93] {
            let cr = (mf.c(r + h, 0.4) - mf.c(r - h, 0.4)) / (2.0 * h);
            assert!((-cr / mf.c(r, 0.4) - mf.v(r, 0.4)).abs() < 1e-8);
        }
    }

    #[test]
    fn sources_match_finite_difference_residuals() {
        // independent oracle: residuals of the PDEs by nested central differences
        let h = 1e-4;
        for kind in [
            SolveKind::Transformed,
            SolveKind::Limit,
            SolveKind::Original,
        ] {
            let p = mms_params(kind, 3, 11, 1e-3);
            let mf = Manufactured::new(kind, &p);
            let nm1 = 2.0;
            let (r, t) = (1.37, 0.21);
            let d_r = |f: &dyn Fn(f64) -> f64, x: f64| (f(x + h) - f(x - h)) / (2.0 * h);
            let d_rr =
                |f: &dyn Fn(f64) -> f64, x: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
            let ut = (mf.u(r, t + h) - mf.u(r, t - h)) / (2.0 * h);
            let u = |x: f64| mf.u(x, t);
            let flux = |x: f64| x.powf(nm1) * mf.u(x, t) * mf.v(x, t);
            let su = ut - d_rr(&u, r) - nm1 / r * d_r(&u, r) - d_r(&flux, r) / r.powf(nm1);
            assert!((su - mf.u_source(r, t)).abs() < 1e-5, "{kind:?}");

            let second = mf.second_source(r, t);
            let expected = match kind {
                SolveKind::Original => {
                    let c = |x: f64| mf.c(x, t);
                    let ct = (mf.c(r, t + h) - mf.c(r, t - h)) / (2.0 * h);
                    ct - p.eps * (d_rr(&c, r) + nm1 / r * d_r(&c, r)) + mf.u(r, t) * mf.c(r, t)
                }
                _ => {
                    let v = |x: f64| mf.v(x, t);
                    let vsq = |x: f64| mf.v(x, t).powi(2);
                    let vt = (mf.v(r, t + h) - mf.v(r, t - h)) / (2.0 * h);
                    let op = d_rr(&v, r) + nm1 / r * d_r(&v, r) - nm1 * mf.v(r, t) / (r * r);
                    vt - p.eps * op + p.eps * d_r(&vsq, r) - d_r(&u, r)
                }
            };
            assert!(
                (second - expected).abs() < 1e-5,
                "{kind:?}: {second} vs {expected}"
            );
        }
    }

    #[test]
    fn zero_source_constant_state_is_exact() {
        for kind in [SolveKind::Transformed, SolveKind::Limit] {
            let p = mms_params(kind, 2, 41, 1e-3);
            let g = p.build_grid().unwrap();
            let init = InitialData::Transformed {
                u0: ScalarField::constant(g.clone(), 1.0).unwrap(),
                v0: ScalarField::constant(g, 0.0).unwrap(),
            };
            let traj = solve_forced(kind, init, &p, &StepControls::new(1e-3), &NoForcing).unwrap();
            let (eu, ev) = max_error(&traj, |_, _| 1.0, |_, _| 0.0);
            assert!(eu <= 1e-12 && ev <= 1e-12);
        }
    }
}
