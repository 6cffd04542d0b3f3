//! Vanishing-diffusion sweeps: for each `eps`, the transformed solve is
//! compared with the limit solve started from the same data.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    boundary_flux_integral, compute_f_and_eps0, detect_layer, sup_difference,
    weighted_gradient_error, Verdict,
};
use crate::error::Result;
use crate::io::{read_json, write_csv_rows, write_json, write_plot_data};
use crate::model::{preset_fields, ModelParams, Preset};
use crate::solver::{solve, InitialData, StepControls};
use crate::trajectory::{SolveKind, Trajectory};

use super::boundary::{identity_criterion, identity_study, IdentityStudy};
use super::{
    all_pass, is_strictly_decreasing, loglog_slope, run_jobs, CriterionOutcome, ExperimentConfig,
    BOUND_SLACK, MATCHED_FLUX_MAX, MISMATCH_FLUX_MIN, PLATEAU_FRACTION, SWEEP_MIN_ORDER,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorError {
    pub alpha: f64,
    pub delta: f64,
    pub err_v_interior: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub err_u_sup: f64,
    pub err_v_full: f64,
    pub err_w_weighted: f64,
    pub interior: Vec<InteriorError>,
    pub min_u: f64,
    pub max_cfl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointOutcome {
    Ok(PointMetrics),
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsPoint {
    pub eps: f64,
    /// `eps > eps0`: outside the range covered by the convergence theorem.
    pub outside_theorem_regime: bool,
    pub outcome: PointOutcome,
}

impl EpsPoint {
    pub fn metrics(&self) -> Option<&PointMetrics> {
        match &self.outcome {
            PointOutcome::Ok(m) => Some(m),
            PointOutcome::Failed { .. } => None,
        }
    }
}

/// Stored per-`eps` result; `config_hash` guards resumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredPoint {
    config_hash: String,
    n: u32,
    point: EpsPoint,
}

/// A CSV row of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub delta: f64,
    pub err_u_sup: f64,
    pub err_v_interior: f64,
    pub err_v_full: f64,
    pub err_w_weighted: f64,
    /// Fitted order of `err_v_interior` for this `delta` family over the
    /// rows so far; empty with fewer than three.
    pub slope_so_far: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fits {
    pub err_u_sup: Option<f64>,
    pub err_v_full: Option<f64>,
    pub err_w_weighted: Option<f64>,
    /// `(alpha, order)` per interior window.
    pub err_v_interior: Vec<(f64, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionSweep {
    pub n: u32,
    pub params: ModelParams,
    pub save_every: usize,
    pub samples: usize,
    pub max_flux_a: f64,
    pub max_flux_b: f64,
    pub f_integral: f64,
    pub c0: f64,
    pub eps0: f64,
    pub points: Vec<EpsPoint>,
    pub fits: Fits,
    pub criteria: Vec<CriterionOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config_hash: String,
    pub config: ExperimentConfig,
    /// Time suprema are maxima over saved samples; the small-`eps` limit of
    /// the full-domain error is represented by the smallest swept `eps`.
    pub notes: Vec<String>,
    pub dims: Vec<DimensionSweep>,
    pub criteria: Vec<CriterionOutcome>,
}

impl SweepReport {
    pub fn pass(&self) -> bool {
        all_pass(&self.criteria)
    }
}

fn dim_dir(cfg: &ExperimentConfig, n: u32) -> PathBuf {
    cfg.output.join(format!("n{n}"))
}

fn point_path(dir: &Path, index: usize) -> PathBuf {
    dir.join("points").join(format!("eps_{index:02}.json"))
}

fn solve_pair_point(
    cfg: &ExperimentConfig,
    p_eps: &ModelParams,
    controls: &StepControls,
    init: &InitialData,
    traj0: &Trajectory,
) -> Result<PointMetrics> {
    let traj = solve(SolveKind::Transformed, init.clone(), p_eps, controls)?;
    let (a, b) = (p_eps.grid.a, p_eps.grid.b);
    let err_u_sup = sup_difference(&traj, traj0, a, b, true)?;
    let err_v_full = sup_difference(&traj, traj0, a, b, false)?;
    let err_w_weighted = weighted_gradient_error(&traj, traj0)?;
    let interior = cfg
        .alphas
        .iter()
        .map(|&alpha| {
            let delta = p_eps.eps.powf(alpha);
            let report = detect_layer(&traj, traj0, delta, cfg.threshold)?;
            Ok(InteriorError {
                alpha,
                delta,
                err_v_interior: report.interior_error,
                verdict: report.verdict,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PointMetrics {
        err_u_sup,
        err_v_full,
        err_w_weighted,
        interior,
        min_u: traj.summary.min_u,
        max_cfl: traj.summary.max_cfl,
    })
}

/// Sweep in one dimension. Completed points found on disk with a matching
/// config hash are reused.
pub fn sweep_dimension(cfg: &ExperimentConfig, n: u32) -> Result<DimensionSweep> {
    let hash = cfg.hash();
    let dir = dim_dir(cfg, n);
    let preset = cfg.preset()?;
    let p0 = cfg.params_for(n, 0.0)?;
    let grid = p0.build_grid()?;
    let (u0, v0) = preset_fields(preset, &p0, grid)?;
    let init = InitialData::Transformed { u0, v0 };
    let save_every = cfg.save_every(&p0);
    let controls = StepControls::from_params(&p0).with_save_every(save_every);
    let traj0 = solve(SolveKind::Limit, init.clone(), &p0, &controls)?;
    let flux = boundary_flux_integral(&traj0);
    let stability = compute_f_and_eps0(&traj0, &p0, cfg.c0)?;

    let indexed: Vec<(usize, f64)> = cfg.eps.iter().copied().enumerate().collect();
    let points = run_jobs(cfg.jobs, &indexed, |&(index, eps)| {
        let path = point_path(&dir, index);
        if let Ok(stored) = read_json::<StoredPoint>(&path) {
            if stored.config_hash == hash && stored.n == n && stored.point.eps == eps {
                return Ok(stored.point);
            }
        }
        let p_eps = cfg.params_for(n, eps)?;
        let outcome = match solve_pair_point(cfg, &p_eps, &controls, &init, &traj0) {
            Ok(m) => PointOutcome::Ok(m),
            Err(e) => PointOutcome::Failed {
                error: e.to_string(),
            },
        };
        let point = EpsPoint {
            eps,
            outside_theorem_regime: eps > stability.eps0,
            outcome,
        };
        write_json(
            &path,
            &StoredPoint {
                config_hash: hash.clone(),
                n,
                point: point.clone(),
            },
        )?;
        Ok(point)
    })?;

    let fits = fit_points(cfg, &points);
    let mut out = DimensionSweep {
        n,
        params: p0,
        save_every,
        samples: traj0.times.len(),
        max_flux_a: flux.max_abs_a(),
        max_flux_b: flux.max_abs_b(),
        f_integral: stability.f_integral,
        c0: stability.c0,
        eps0: stability.eps0,
        points,
        fits,
        criteria: Vec::new(),
    };
    out.criteria = sweep_criteria(&out, cfg, preset);
    write_dimension_outputs(&dir, &out, &flux.times, &flux.at_a, &flux.at_b)?;
    Ok(out)
}

fn series(points: &[EpsPoint], pick: impl Fn(&PointMetrics) -> f64) -> (Vec<f64>, Vec<f64>) {
    points
        .iter()
        .filter_map(|p| p.metrics().map(|m| (p.eps, pick(m))))
        .unzip()
}

fn fit_points(cfg: &ExperimentConfig, points: &[EpsPoint]) -> Fits {
    let fit = |pick: &dyn Fn(&PointMetrics) -> f64| {
        let (e, y) = series(points, pick);
        loglog_slope(&e, &y)
    };
    Fits {
        err_u_sup: fit(&|m| m.err_u_sup),
        err_v_full: fit(&|m| m.err_v_full),
        err_w_weighted: fit(&|m| m.err_w_weighted),
        err_v_interior: (0..cfg.alphas.len())
            .map(|k| (cfg.alphas[k], fit(&|m| m.interior[k].err_v_interior)))
            .collect(),
    }
}

pub fn sweep_rows(sweep: &DimensionSweep, alphas: &[f64]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for (k, _) in alphas.iter().enumerate() {
        let mut eps_so_far = Vec::new();
        let mut err_so_far = Vec::new();
        for p in &sweep.points {
            let Some(m) = p.metrics() else { continue };
            let ie = &m.interior[k];
            eps_so_far.push(p.eps);
            err_so_far.push(ie.err_v_interior);
            rows.push(SweepRow {
                eps: p.eps,
                delta: ie.delta,
                err_u_sup: m.err_u_sup,
                err_v_interior: ie.err_v_interior,
                err_v_full: m.err_v_full,
                err_w_weighted: m.err_w_weighted,
                slope_so_far: loglog_slope(&eps_so_far, &err_so_far),
            });
        }
    }
    rows
}

pub fn write_dimension_outputs(
    dir: &Path,
    sweep: &DimensionSweep,
    flux_times: &[f64],
    flux_a: &[f64],
    flux_b: &[f64],
) -> Result<()> {
    let alphas: Vec<f64> = sweep.fits.err_v_interior.iter().map(|(a, _)| *a).collect();
    write_csv_rows(&dir.join("sweep.csv"), &sweep_rows(sweep, &alphas))?;
    let plot = dir.join("plot");
    let (e, y) = series(&sweep.points, |m| m.err_u_sup);
    write_plot_data(&plot.join("err_u_sup.dat"), &e, &y)?;
    let (e, y) = series(&sweep.points, |m| m.err_v_full);
    write_plot_data(&plot.join("err_v_full.dat"), &e, &y)?;
    let (e, y) = series(&sweep.points, |m| m.err_w_weighted);
    write_plot_data(&plot.join("err_w_weighted.dat"), &e, &y)?;
    for (k, alpha) in alphas.iter().enumerate() {
        let (e, y) = series(&sweep.points, |m| m.interior[k].err_v_interior);
        write_plot_data(
            &plot.join(format!("err_v_interior_alpha{alpha:.2}.dat")),
            &e,
            &y,
        )?;
    }
    if !flux_times.is_empty() {
        write_plot_data(&plot.join("flux_a.dat"), flux_times, flux_a)?;
        write_plot_data(&plot.join("flux_b.dat"), flux_times, flux_b)?;
    }
    Ok(())
}

fn fmt_order(order: Option<f64>) -> String {
    order.map_or("undefined".into(), |o| format!("{o:.3}"))
}

fn sweep_criteria(
    sweep: &DimensionSweep,
    cfg: &ExperimentConfig,
    preset: Preset,
) -> Vec<CriterionOutcome> {
    let n = sweep.n;
    let failed = sweep
        .points
        .iter()
        .filter(|p| p.metrics().is_none())
        .count();
    let complete = failed == 0;
    let mut out = Vec::new();

    let (_, eu) = series(&sweep.points, |m| m.err_u_sup);
    let order_u = sweep.fits.err_u_sup;
    out.push(CriterionOutcome::new(
        4,
        "uniform convergence of u",
        complete && is_strictly_decreasing(&eu) && order_u.is_some_and(|o| o >= SWEEP_MIN_ORDER),
        format!(
            "n={n}: monotone {}, order {} (need >= {SWEEP_MIN_ORDER}), failed points {failed}",
            is_strictly_decreasing(&eu),
            fmt_order(order_u)
        ),
    ));

    let mut pass5 = complete;
    let mut parts = Vec::new();
    for (k, (alpha, order)) in sweep.fits.err_v_interior.iter().enumerate() {
        let pts: Vec<(f64, f64, f64)> = sweep
            .points
            .iter()
            .filter_map(|p| {
                p.metrics()
                    .map(|m| (p.eps, m.interior[k].delta, m.interior[k].err_v_interior))
            })
            .collect();
        let errs: Vec<f64> = pts.iter().map(|x| x.2).collect();
        let monotone = is_strictly_decreasing(&errs);
        let shape = |eps: f64, delta: f64| eps.powf(0.25) / delta.sqrt();
        let worst_violation = match pts.first() {
            Some(&(e0, d0, err0)) => {
                let kfit = err0 / shape(e0, d0);
                pts.iter()
                    .map(|&(e, d, err)| err / (kfit * shape(e, d)))
                    .fold(0.0, f64::max)
            }
            None => f64::INFINITY,
        };
        let ok = monotone && order.is_some_and(|o| o > 0.0) && worst_violation <= BOUND_SLACK;
        pass5 &= ok;
        parts.push(format!(
            "n={n} alpha={alpha}: monotone {monotone}, order {}, max bound ratio {worst_violation:.3}",
            fmt_order(*order)
        ));
    }
    out.push(CriterionOutcome::new(
        5,
        "interior convergence of v",
        pass5,
        parts.join("; "),
    ));

    let flux = sweep.max_flux_a.max(sweep.max_flux_b);
    let (_, ef) = series(&sweep.points, |m| m.err_v_full);
    match preset {
        Preset::Matched => {
            let last = ef.last().copied().unwrap_or(f64::INFINITY);
            let pass = complete && flux <= MATCHED_FLUX_MAX && last < cfg.threshold;
            out.push(CriterionOutcome::new(
                6,
                "layer dichotomy (matched data: no layer)",
                pass,
                format!(
                    "n={n}: max|I| {flux:.3e} (need <= {MATCHED_FLUX_MAX:e}), err_v_full at smallest eps {last:.3e} (need < {})",
                    cfg.threshold
                ),
            ));
        }
        Preset::MismatchLayer => {
            let floor = PLATEAU_FRACTION * flux;
            let min_full = ef.iter().copied().fold(f64::INFINITY, f64::min);
            let pass = complete && sweep.max_flux_a >= MISMATCH_FLUX_MIN && min_full >= floor;
            out.push(CriterionOutcome::new(
                6,
                "layer dichotomy (mismatched data: layer)",
                pass,
                format!(
                    "n={n}: |I_a| {:.3e} (need >= {MISMATCH_FLUX_MIN}), min err_v_full {min_full:.3e} (need >= {floor:.3e})",
                    sweep.max_flux_a
                ),
            ));
        }
        _ => {}
    }

    let order_w = sweep.fits.err_w_weighted;
    out.push(CriterionOutcome::new(
        7,
        "weighted gradient estimate",
        complete && order_w.is_some_and(|o| o >= SWEEP_MIN_ORDER),
        format!(
            "n={n}: order {} (need >= {SWEEP_MIN_ORDER})",
            fmt_order(order_w)
        ),
    ));
    out
}

/// Merges per-dimension outcomes into one line per criterion id.
pub fn merge_criteria(lists: &[&[CriterionOutcome]]) -> Vec<CriterionOutcome> {
    let mut merged: Vec<CriterionOutcome> = Vec::new();
    for list in lists {
        for c in *list {
            match merged.iter_mut().find(|m| m.id == c.id) {
                Some(m) => {
                    m.pass &= c.pass;
                    m.detail = format!("{}; {}", m.detail, c.detail);
                }
                None => merged.push(c.clone()),
            }
        }
    }
    merged.sort_by_key(|c| c.id);
    merged
}

pub const SWEEP_NOTES: [&str; 3] = [
    "suprema over (0,T) are maxima over the saved samples",
    "the eps -> 0 limit of the full-domain error is represented by the smallest swept eps",
    "eps0 uses the supplied c0; points with eps > eps0 are flagged, not skipped",
];

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let dims = cfg
        .dims
        .iter()
        .map(|&n| sweep_dimension(cfg, n))
        .collect::<Result<Vec<_>>>()?;
    let lists: Vec<&[CriterionOutcome]> = dims.iter().map(|d| d.criteria.as_slice()).collect();
    let report = SweepReport {
        config_hash: cfg.hash(),
        config: cfg.clone(),
        notes: SWEEP_NOTES.iter().map(|s| s.to_string()).collect(),
        criteria: merge_criteria(&lists),
        dims,
    };
    write_json(&cfg.output.join("report.json"), &report)?;
    Ok(report)
}

/// Layer campaign: the sweep with matched data and with mismatched data,
/// judged together, plus the boundary identity of the limit solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCampaign {
    pub config_hash: String,
    pub matched: SweepReport,
    pub mismatch: SweepReport,
    pub identity: Vec<IdentityStudy>,
    pub criteria: Vec<CriterionOutcome>,
}

impl LayerCampaign {
    pub fn pass(&self) -> bool {
        all_pass(&self.criteria)
    }
}

pub fn run_layer(cfg: &ExperimentConfig) -> Result<LayerCampaign> {
    cfg.validate()?;
    let mut matched_cfg = cfg.clone();
    matched_cfg.preset = Preset::Matched.to_string();
    matched_cfg.output = cfg.output.join("matched");
    let mut mismatch_cfg = cfg.clone();
    mismatch_cfg.preset = Preset::MismatchLayer.to_string();
    mismatch_cfg.output = cfg.output.join("mismatch");
    let matched = run_sweep(&matched_cfg)?;
    let mismatch = run_sweep(&mismatch_cfg)?;
    let sixes: Vec<CriterionOutcome> = matched
        .criteria
        .iter()
        .chain(&mismatch.criteria)
        .filter(|c| c.id == 6)
        .cloned()
        .collect();
    let identity = run_jobs(cfg.jobs, &cfg.dims, |&n| {
        let template = mismatch_cfg.params_for(n, 0.0)?;
        identity_study(&template, Preset::CompatibleFlux, n, mismatch_cfg.levels)
    })?;
    let mut criteria = merge_criteria(&[&sixes]);
    criteria.push(identity_criterion(&identity));
    let campaign = LayerCampaign {
        config_hash: cfg.hash(),
        criteria,
        matched,
        mismatch,
        identity,
    };
    write_json(&cfg.output.join("report.json"), &campaign)?;
    Ok(campaign)
}
