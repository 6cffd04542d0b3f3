//! Round trip through the logarithmic transform: the original system solved
//! for `c` directly, against `c` rebuilt from the transformed solution.

use serde::{Deserialize, Serialize};

use crate::colehopf::{check_robin_consistency, reconstruct_c};
use crate::error::Result;
use crate::grid::GridSpec;
use crate::io::write_json;
use crate::model::{preset_fields, preset_original_fields, ModelParams, Preset};
use crate::solver::{solve, InitialData, StepControls};
use crate::trajectory::SolveKind;

use super::{all_pass, CriterionOutcome, ExperimentConfig, ROUNDTRIP_RATIO};

const BASE_M: usize = 51;
const DT_PER_DR: f64 = 0.1;
const SAVE_EVERY: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripLevel {
    pub m: usize,
    pub dt: f64,
    /// `max_t max_r |c_original - c_reconstructed|` over saved samples.
    pub sup_difference: f64,
    pub min_reconstructed_c: f64,
    pub max_robin_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripStudy {
    pub n: u32,
    pub eps: f64,
    pub preset: Preset,
    pub levels: Vec<RoundtripLevel>,
    pub ratios: Vec<f64>,
}

/// `m` doubles from 51 with `dt = 0.1 dr`; every fifth step is saved.
pub fn roundtrip_study(
    template: &ModelParams,
    preset: Preset,
    n: u32,
    eps: f64,
    levels: usize,
) -> Result<RoundtripStudy> {
    let mut out = Vec::with_capacity(levels);
    for k in 0..levels {
        let m = (BASE_M - 1) * (1 << k) + 1;
        let dr = (template.grid.b - template.grid.a) / (m - 1) as f64;
        let dt = DT_PER_DR * dr;
        let p = ModelParams {
            n,
            eps,
            dt,
            grid: GridSpec::uniform(template.grid.a, template.grid.b, m),
            ..*template
        };
        let grid = p.build_grid()?;
        let controls = StepControls::new(dt).with_save_every(SAVE_EVERY);
        let (u0, v0) = preset_fields(preset, &p, grid.clone())?;
        let (_, c0) = preset_original_fields(preset, &p, grid)?;
        let transformed = solve(
            SolveKind::Transformed,
            InitialData::Transformed { u0: u0.clone(), v0 },
            &p,
            &controls,
        )?;
        let original = solve(
            SolveKind::Original,
            InitialData::Original { u0, c0: c0.clone() },
            &p,
            &controls,
        )?;
        let rebuilt = reconstruct_c(&c0, &transformed, &p)?;
        original.ensure_same_sampling(&rebuilt)?;
        let mut sup: f64 = 0.0;
        for (so, sr) in original.states.iter().zip(&rebuilt.states) {
            sup = sup.max(so.second.sub(&sr.second)?.max_abs());
        }
        let robin = check_robin_consistency(&original, &p);
        out.push(RoundtripLevel {
            m,
            dt,
            sup_difference: sup,
            min_reconstructed_c: rebuilt.summary.min_c.unwrap_or(f64::NAN),
            max_robin_residual: robin.max_a.max(robin.max_b),
        });
    }
    let ratios = out
        .windows(2)
        .map(|w| w[0].sup_difference / w[1].sup_difference)
        .collect();
    Ok(RoundtripStudy {
        n,
        eps,
        preset,
        levels: out,
        ratios,
    })
}

pub fn roundtrip_criterion(studies: &[RoundtripStudy]) -> CriterionOutcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in studies {
        let ratios_ok = !s.ratios.is_empty() && s.ratios.iter().all(|&q| q >= ROUNDTRIP_RATIO);
        let positive = s.levels.iter().all(|l| l.min_reconstructed_c > 0.0);
        pass &= ratios_ok && positive;
        let diffs: Vec<String> = s
            .levels
            .iter()
            .map(|l| format!("{:.3e}", l.sup_difference))
            .collect();
        let ratios: Vec<String> = s.ratios.iter().map(|q| format!("{q:.2}")).collect();
        parts.push(format!(
            "n={}: sup|c - c_rec| [{}], ratios [{}] (need >= {ROUNDTRIP_RATIO}), reconstructed c positive {positive}",
            s.n,
            diffs.join(", "),
            ratios.join(", ")
        ));
    }
    CriterionOutcome::new(9, "transform round trip", pass, parts.join("; "))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub studies: Vec<RoundtripStudy>,
    pub criteria: Vec<CriterionOutcome>,
}

impl RoundtripReport {
    pub fn pass(&self) -> bool {
        all_pass(&self.criteria)
    }
}

/// Uses the largest `eps` of the config.
pub fn run_roundtrip(cfg: &ExperimentConfig) -> Result<RoundtripReport> {
    cfg.validate()?;
    let preset = cfg.preset()?;
    let eps = cfg.eps[0];
    let studies = super::run_jobs(cfg.jobs, &cfg.dims, |&n| {
        let template = cfg.params_for(n, eps)?;
        roundtrip_study(&template, preset, n, eps, cfg.levels)
    })?;
    let report = RoundtripReport {
        config_hash: cfg.hash(),
        config: cfg.clone(),
        criteria: vec![roundtrip_criterion(&studies)],
        studies,
    };
    write_json(&cfg.output.join("report.json"), &report)?;
    Ok(report)
}
