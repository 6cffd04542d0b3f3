//! Refinement check of `v0(a,t) - v_bar1 = int_0^t u0_r(a) dtau` (and at `b`)
//! for the limit solver, with the integral taken over saved samples.

use serde::{Deserialize, Serialize};

use crate::analysis::boundary_flux_integral;
use crate::error::Result;
use crate::grid::GridSpec;
use crate::model::{preset_fields, ModelParams, Preset};
use crate::solver::{solve, InitialData, StepControls};
use crate::trajectory::SolveKind;

use super::{loglog_slope, CriterionOutcome, BOUNDARY_ORDER};

const BASE_M: usize = 51;
const BASE_DT: f64 = 2e-3;
const SAVE_EVERY: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityLevel {
    pub m: usize,
    pub dt: f64,
    /// `max_t |v(a,t) - v_bar1 - I_a(t)|`.
    pub gap_a: f64,
    pub gap_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityStudy {
    pub n: u32,
    pub save_every: usize,
    pub levels: Vec<IdentityLevel>,
    pub order: Option<f64>,
}

/// Halves `dr` and `dt` together from `m = 51`, `dt = 2e-3`, saving every
/// tenth step, so the sampled quadrature of the flux tightens at second order.
pub fn identity_study(
    template: &ModelParams,
    preset: Preset,
    n: u32,
    levels: usize,
) -> Result<IdentityStudy> {
    let mut out = Vec::with_capacity(levels);
    for k in 0..levels {
        let m = (BASE_M - 1) * (1 << k) + 1;
        let dt = BASE_DT / (1 << k) as f64;
        let p = ModelParams {
            n,
            eps: 0.0,
            dt,
            grid: GridSpec::uniform(template.grid.a, template.grid.b, m),
            ..*template
        };
        let (u0, v0) = preset_fields(preset, &p, p.build_grid()?)?;
        let controls = StepControls::new(dt).with_save_every(SAVE_EVERY);
        let traj = solve(
            SolveKind::Limit,
            InitialData::Transformed { u0, v0 },
            &p,
            &controls,
        )?;
        let flux = boundary_flux_integral(&traj);
        let mut gap_a: f64 = 0.0;
        let mut gap_b: f64 = 0.0;
        for (k, s) in traj.states.iter().enumerate() {
            gap_a = gap_a.max((s.second.first() - p.v_bar1 - flux.at_a[k]).abs());
            gap_b = gap_b.max((s.second.last() - p.v_bar2 - flux.at_b[k]).abs());
        }
        out.push(IdentityLevel {
            m,
            dt,
            gap_a,
            gap_b,
        });
    }
    let hs: Vec<f64> = out.iter().map(|l| l.dt).collect();
    let gaps: Vec<f64> = out.iter().map(|l| l.gap_a.max(l.gap_b)).collect();
    Ok(IdentityStudy {
        n,
        save_every: SAVE_EVERY,
        order: loglog_slope(&hs, &gaps),
        levels: out,
    })
}

pub fn identity_criterion(studies: &[IdentityStudy]) -> CriterionOutcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in studies {
        let ok = s.order.is_some_and(|o| o >= BOUNDARY_ORDER);
        pass &= ok;
        let gaps: Vec<String> = s
            .levels
            .iter()
            .map(|l| format!("{:.3e}", l.gap_a.max(l.gap_b)))
            .collect();
        parts.push(format!(
            "n={}: gaps [{}], order {} (need >= {BOUNDARY_ORDER})",
            s.n,
            gaps.join(", "),
            s.order.map_or("undefined".into(), |o| format!("{o:.3}"))
        ));
    }
    CriterionOutcome::new(8, "boundary identity", pass, parts.join("; "))
}
