//! Limit-system experiments with `u_bar > 0`: the entropy identity under
//! refinement and long-time relaxation to the constant state.

use serde::{Deserialize, Serialize};

use crate::analysis::entropy_trace;
use crate::error::{KsError, Result};
use crate::grid::GridSpec;
use crate::io::{write_json, write_plot_data};
use crate::model::{preset_fields, ModelParams, Preset};
use crate::solver::{solve, InitialData, StepControls};
use crate::trajectory::SolveKind;

use super::{all_pass, CriterionOutcome, ExperimentConfig, ENTROPY_SHRINK, LONGTIME_FRACTION};

const ENTROPY_T: f64 = 0.2;
const ENTROPY_BASE_M: usize = 21;
const ENTROPY_BASE_DT: f64 = 1e-5;
const MONOTONE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyLevel {
    pub m: usize,
    pub dt: f64,
    /// `max_k |(E_{k+1} - E_k) / dt + D_{k+1}|` over all steps.
    pub tol_e: f64,
    /// Largest signed residual.
    pub max_residual: f64,
    /// Largest one-step increase of `E`.
    pub max_increase: f64,
    pub energy_start: f64,
    pub energy_end: f64,
    pub floored_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyStudy {
    pub n: u32,
    pub preset: Preset,
    pub t_end: f64,
    pub levels: Vec<EntropyLevel>,
    /// `tol_e` ratios between consecutive levels.
    pub shrink: Vec<f64>,
}

fn entropy_params(template: &ModelParams, n: u32, m: usize, dt: f64) -> ModelParams {
    ModelParams {
        n,
        eps: 0.0,
        t_end: ENTROPY_T,
        dt,
        grid: GridSpec::uniform(template.grid.a, template.grid.b, m),
        ..*template
    }
}

/// Simultaneous halving of `dr` and `dt` from `m = 21`, `dt = 1e-5`, with
/// every step saved so the residual is evaluated per step.
pub fn entropy_study(
    template: &ModelParams,
    preset: Preset,
    n: u32,
    levels: usize,
) -> Result<EntropyStudy> {
    if !(template.u_bar > 0.0) {
        return Err(KsError::InvalidParams("the entropy needs u_bar > 0".into()));
    }
    let mut out = Vec::with_capacity(levels);
    for k in 0..levels {
        let m = (ENTROPY_BASE_M - 1) * (1 << k) + 1;
        let dt = ENTROPY_BASE_DT / (1 << k) as f64;
        let p = entropy_params(template, n, m, dt);
        let (u0, v0) = preset_fields(preset, &p, p.build_grid()?)?;
        let traj = solve(
            SolveKind::Limit,
            InitialData::Transformed { u0, v0 },
            &p,
            &StepControls::new(dt),
        )?;
        let trace = entropy_trace(&traj)?;
        out.push(EntropyLevel {
            m,
            dt,
            tol_e: trace.residual.iter().fold(0.0, |a, r| a.max(r.abs())),
            max_residual: trace.max_residual,
            max_increase: trace.max_increase,
            energy_start: trace.energy[0],
            energy_end: *trace.energy.last().unwrap_or(&trace.energy[0]),
            floored_nodes: trace.floored_nodes,
        });
    }
    let shrink = out.windows(2).map(|w| w[0].tol_e / w[1].tol_e).collect();
    Ok(EntropyStudy {
        n,
        preset,
        t_end: ENTROPY_T,
        levels: out,
        shrink,
    })
}

pub fn entropy_criterion(studies: &[EntropyStudy]) -> CriterionOutcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in studies {
        let shrink_ok = s.shrink.iter().all(|&q| q >= ENTROPY_SHRINK);
        let monotone_ok = s.levels.iter().all(|l| {
            l.max_increase <= l.tol_e * l.dt && l.max_residual <= l.tol_e && l.floored_nodes == 0
        });
        pass &= shrink_ok && monotone_ok;
        let tols: Vec<String> = s
            .levels
            .iter()
            .map(|l| format!("{:.3e}", l.tol_e))
            .collect();
        let ratios: Vec<String> = s.shrink.iter().map(|q| format!("{q:.2}")).collect();
        parts.push(format!(
            "n={}: tol_E [{}], shrink [{}] (need >= {ENTROPY_SHRINK}), E non-increasing within tol_E*dt {monotone_ok}",
            s.n,
            tols.join(", "),
            ratios.join(", ")
        ));
    }
    CriterionOutcome::new(2, "entropy identity", pass, parts.join("; "))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRun {
    pub n: u32,
    pub params: ModelParams,
    pub times: Vec<f64>,
    /// `||u(t) - u_bar||_inf` per saved sample.
    pub deviation: Vec<f64>,
    pub energy: Vec<f64>,
    pub max_energy_increase: f64,
    pub final_fraction: f64,
}

/// Long-time limit run from `preset`; `cfg.params` supplies `T`, `dt`, grid.
pub fn decay_run(cfg: &ExperimentConfig, n: u32) -> Result<DecayRun> {
    let p = cfg.params_for(n, 0.0)?;
    if !(p.u_bar > 0.0) {
        return Err(KsError::InvalidParams(
            "long-time decay needs u_bar > 0".into(),
        ));
    }
    let (u0, v0) = preset_fields(cfg.preset()?, &p, p.build_grid()?)?;
    let controls = StepControls::from_params(&p).with_save_every(cfg.save_every(&p));
    let traj = solve(
        SolveKind::Limit,
        InitialData::Transformed { u0, v0 },
        &p,
        &controls,
    )?;
    let deviation: Vec<f64> = traj
        .states
        .iter()
        .map(|s| {
            s.u.values()
                .iter()
                .fold(0.0f64, |a, x| a.max((x - p.u_bar).abs()))
        })
        .collect();
    let trace = entropy_trace(&traj)?;
    let initial = deviation[0];
    let last = *deviation.last().unwrap_or(&initial);
    Ok(DecayRun {
        n,
        params: p,
        times: traj.times.clone(),
        final_fraction: if initial > 0.0 { last / initial } else { 0.0 },
        deviation,
        max_energy_increase: trace.max_increase.max(0.0),
        energy: trace.energy,
    })
}

pub fn decay_criterion(runs: &[DecayRun]) -> CriterionOutcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let tol = MONOTONE_RTOL * r.energy[0].max(f64::MIN_POSITIVE);
        let monotone = r.max_energy_increase <= tol;
        let ok = r.final_fraction <= LONGTIME_FRACTION && monotone;
        pass &= ok;
        parts.push(format!(
            "n={}: ||u(T)-u_bar|| / ||u(0)-u_bar|| = {:.3e} at T={} (need <= {LONGTIME_FRACTION}), E monotone {monotone}",
            r.n, r.final_fraction, r.params.t_end
        ));
    }
    CriterionOutcome::new(3, "long-time decay", pass, parts.join("; "))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongtimeReport {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub entropy: Vec<EntropyStudy>,
    pub decay: Vec<DecayRun>,
    pub criteria: Vec<CriterionOutcome>,
}

impl LongtimeReport {
    pub fn pass(&self) -> bool {
        all_pass(&self.criteria)
    }
}

pub fn run_longtime(cfg: &ExperimentConfig) -> Result<LongtimeReport> {
    cfg.validate()?;
    let preset = cfg.preset()?;
    let entropy = super::run_jobs(cfg.jobs, &cfg.dims, |&n| {
        let template = cfg.params_for(n, 0.0)?;
        entropy_study(&template, preset, n, cfg.levels)
    })?;
    let decay = super::run_jobs(cfg.jobs, &cfg.dims, |&n| decay_run(cfg, n))?;
    for run in &decay {
        let plot = cfg.output.join(format!("n{}", run.n)).join("plot");
        write_plot_data(&plot.join("deviation.dat"), &run.times, &run.deviation)?;
        write_plot_data(&plot.join("energy.dat"), &run.times, &run.energy)?;
    }
    let report = LongtimeReport {
        config_hash: cfg.hash(),
        config: cfg.clone(),
        criteria: vec![entropy_criterion(&entropy), decay_criterion(&decay)],
        entropy,
        decay,
    };
    write_json(&cfg.output.join("report.json"), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ExperimentKind;

    #[test]
    fn constant_preset_has_no_deviation() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Longtime);
        cfg.preset = "constant".into();
        cfg.params.v_bar1 = 0.0;
        cfg.params.v_bar2 = 0.0;
        cfg.params.t_end = 1.0;
        cfg.params.grid.m = 41;
        let run = decay_run(&cfg, 2).unwrap();
        assert!(run.deviation.iter().all(|&d| d < 1e-14));
        assert!(run.energy.iter().all(|&e| e.abs() < 1e-14));
        assert_eq!(run.final_fraction, 0.0);
    }
}
