//! Randomized dominance checks of the Gronwall-type bound.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gronwall::{
    bound_value, check_instance, gamma0, random_instance, LemmaInputs, LemmaVerdict, Profile,
};
use crate::io::{atomic_write, write_json};

use super::{all_pass, CriterionOutcome, ExperimentConfig};

const K2_TOL: f64 = 1e-10;
const GAMMA0_TOL: f64 = 1e-12;

/// `gamma0` and the bound at `k = 2`, written out without the general-`k` code path.
pub fn k2_direct(inp: &LemmaInputs) -> (f64, f64) {
    let i1 = inp.f1.integral(inp.t_end);
    let e2 = inp.f2.integral(inp.t_end).exp();
    let g = inp.c0 * e2;
    let g0 = (1.0 / (4.0 * i1)).min(1.0 / (8.0 * inp.t_end * g * i1));
    let bound = e2
        * [3.0, 3.0 / (2.0 * inp.t_end * g), 12.0 * inp.gamma * i1]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
    (g0, bound)
}

/// The reference instance `f1 = f2 = 1`, `T = 1`, `k = 3`, `C0 = 2`.
pub fn reference_instance() -> LemmaInputs {
    LemmaInputs {
        k: 3,
        t_end: 1.0,
        c0: 2.0,
        gamma: 0.0,
        f1: Profile::Constant(1.0),
        f2: Profile::Constant(1.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct K2Check {
    pub seed: u64,
    pub gamma0: f64,
    pub gamma0_direct: f64,
    pub bound: f64,
    pub bound_direct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub config_hash: String,
    pub instances: usize,
    pub failures: usize,
    pub errors: Vec<(u64, String)>,
    pub k2: Option<K2Check>,
    pub reference_gamma0: f64,
    pub reference_expected: f64,
    pub verdicts: Vec<LemmaVerdict>,
    pub criteria: Vec<CriterionOutcome>,
}

impl LemmaReport {
    pub fn pass(&self) -> bool {
        all_pass(&self.criteria)
    }
}

/// Checks `instances` random instances seeded `seed, seed + 1, ...`.
pub fn verify_lemma(seed: u64, instances: usize, jobs: usize) -> Result<LemmaReport> {
    let seeds: Vec<u64> = (0..instances as u64)
        .map(|i| seed.wrapping_add(i))
        .collect();
    let results = super::run_jobs(jobs, &seeds, |&s| {
        let inp = random_instance(s);
        Ok((s, inp.k, check_instance(s, &inp)))
    })?;
    let mut verdicts = Vec::new();
    let mut errors = Vec::new();
    for (s, _, r) in &results {
        match r {
            Ok(v) => verdicts.push(v.clone()),
            Err(e) => errors.push((*s, e.to_string())),
        }
    }
    let failures = verdicts.iter().filter(|v| !v.pass).count() + errors.len();

    let k2 = results.iter().find(|(_, k, _)| *k == 2).map(|(s, _, _)| {
        let inp = random_instance(*s);
        let (gamma0_direct, bound_direct) = k2_direct(&inp);
        K2Check {
            seed: *s,
            gamma0: gamma0(&inp),
            gamma0_direct,
            bound: bound_value(&inp, inp.t_end).unwrap_or(f64::NAN),
            bound_direct,
        }
    });
    let reference_gamma0 = gamma0(&reference_instance());
    let reference_expected = 1.0 / (64.0 * E * E);

    let mut criteria = Vec::new();
    let k2_ok = k2.as_ref().is_some_and(|c| {
        (c.gamma0 - c.gamma0_direct).abs() <= K2_TOL && (c.bound - c.bound_direct).abs() <= K2_TOL
    });
    let ref_ok = (reference_gamma0 - reference_expected).abs() <= GAMMA0_TOL;
    criteria.push(CriterionOutcome::new(
        10,
        "Gronwall-type bound",
        failures == 0 && k2_ok && ref_ok,
        format!(
            "{instances} instances, {failures} failures; k=2 direct agreement {k2_ok}; gamma0 reference {reference_gamma0:.15e} vs {reference_expected:.15e}"
        ),
    ));
    Ok(LemmaReport {
        config_hash: String::new(),
        instances,
        failures,
        errors,
        k2,
        reference_gamma0,
        reference_expected,
        verdicts,
        criteria,
    })
}

pub fn run_lemma(cfg: &ExperimentConfig) -> Result<LemmaReport> {
    cfg.validate()?;
    let mut report = verify_lemma(cfg.seed, cfg.instances, cfg.jobs)?;
    report.config_hash = cfg.hash();
    let mut lines = String::new();
    for v in &report.verdicts {
        lines.push_str(&serde_json::to_string(v)?);
        lines.push('\n');
    }
    atomic_write(&cfg.output.join("verdicts.jsonl"), lines.as_bytes())?;
    write_json(&cfg.output.join("report.json"), &report)?;
    Ok(report)
}
