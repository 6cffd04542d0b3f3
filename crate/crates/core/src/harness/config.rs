use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{KsError, Result};
use crate::grid::GridSpec;
use crate::model::{ModelParams, Preset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Sweep,
    Mms,
    Layer,
    Lemma,
    Roundtrip,
    Longtime,
}

impl FromStr for ExperimentKind {
    type Err = KsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sweep" => Ok(Self::Sweep),
            "mms" => Ok(Self::Mms),
            "layer" => Ok(Self::Layer),
            "lemma" => Ok(Self::Lemma),
            "roundtrip" => Ok(Self::Roundtrip),
            "longtime" => Ok(Self::Longtime),
            other => Err(KsError::Config(format!(
                "unknown experiment kind `{other}`"
            ))),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Sweep => "sweep",
            Self::Mms => "mms",
            Self::Layer => "layer",
            Self::Lemma => "lemma",
            Self::Roundtrip => "roundtrip",
            Self::Longtime => "longtime",
        };
        f.write_str(s)
    }
}

fn default_eps() -> Vec<f64> {
    vec![1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4]
}

fn default_alphas() -> Vec<f64> {
    vec![0.3, 0.4]
}

fn default_dims() -> Vec<u32> {
    vec![2, 3]
}

fn default_levels() -> usize {
    4
}

fn default_threshold() -> f64 {
    1e-2
}

fn default_c0() -> f64 {
    1.0
}

fn default_samples() -> usize {
    100
}

fn default_instances() -> usize {
    200
}

fn default_jobs() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

/// Default model template: `[1, 2]`, `m = 401`, `T = 1`, `dt = 2.5e-4`,
/// mismatched boundary data `v_bar = (1, -1)`, `u_bar = 1`.
pub fn default_params() -> ModelParams {
    ModelParams {
        n: 2,
        eps: 0.0,
        u_bar: 1.0,
        v_bar1: 1.0,
        v_bar2: -1.0,
        t_end: 1.0,
        dt: 2.5e-4,
        grid: GridSpec::uniform(1.0, 2.0, 401),
    }
}

/// An experiment read from TOML. Every field except `kind` has a default.
///
/// ```toml
/// kind = "sweep"
/// preset = "mismatch-layer"
/// eps = [1e-2, 5e-3, 2.5e-3]
/// alphas = [0.3, 0.4]
/// dims = [2]
/// output = "results/sweep"
///
/// [params]
/// n = 2
/// eps = 0.0
/// u_bar = 1.0
/// v_bar1 = 1.0
/// v_bar2 = -1.0
/// t_end = 1.0
/// dt = 2.5e-4
/// grid = { a = 1.0, b = 2.0, m = 401, kind = { type = "uniform" } }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default = "default_params")]
    pub params: ModelParams,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// Interior windows `delta = eps^alpha`.
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    /// Space dimensions swept; `params.n` is overridden by each entry.
    #[serde(default = "default_dims")]
    pub dims: Vec<u32>,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Constant entering `eps0`; the theory leaves it unspecified.
    #[serde(default = "default_c0")]
    pub c0: f64,
    /// Minimum number of saved samples per run.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_instances")]
    pub instances: usize,
    /// Concurrent jobs; not part of the config hash.
    #[serde(default = "default_jobs", skip_serializing)]
    pub jobs: usize,
}

fn default_preset() -> String {
    "mismatch-layer".into()
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        let preset = match kind {
            ExperimentKind::Longtime | ExperimentKind::Roundtrip => "bump",
            _ => "mismatch-layer",
        };
        let mut params = default_params();
        if matches!(kind, ExperimentKind::Roundtrip | ExperimentKind::Longtime) {
            params.v_bar1 = 0.5;
            params.v_bar2 = -0.5;
        }
        if kind == ExperimentKind::Longtime {
            params.t_end = 20.0;
            params.dt = 5e-3;
            params.grid.m = 201;
        }
        ExperimentConfig {
            kind,
            preset: preset.into(),
            params,
            eps: default_eps(),
            alphas: default_alphas(),
            dims: default_dims(),
            levels: default_levels(),
            output: default_output().join(kind.to_string()),
            seed: 0,
            threshold: default_threshold(),
            c0: default_c0(),
            samples: default_samples(),
            instances: default_instances(),
            jobs: default_jobs(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| KsError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| KsError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| KsError::Config(e.to_string()))
    }

    pub fn preset(&self) -> Result<Preset> {
        self.preset.parse()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(KsError::Config(msg));
        self.preset()?;
        if self.eps.is_empty() {
            return bad("eps list is empty".into());
        }
        if let Some(e) = self.eps.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
            return bad(format!("eps = {e} outside (0, 1)"));
        }
        if self.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("eps list must be strictly decreasing".into());
        }
        if let Some(a) = self.alphas.iter().find(|&&a| !(a > 0.0 && a < 0.5)) {
            return bad(format!("alpha = {a} outside (0, 1/2)"));
        }
        if self.dims.is_empty() || self.dims.iter().any(|&n| n < 2) {
            return bad("dims must be a non-empty list of integers >= 2".into());
        }
        if self.levels < 2 {
            return bad(format!(
                "need at least 2 refinement levels, got {}",
                self.levels
            ));
        }
        if !(self.threshold > 0.0) {
            return bad(format!("threshold = {} must be > 0", self.threshold));
        }
        if !(self.c0 > 0.0) {
            return bad(format!("c0 = {} must be > 0", self.c0));
        }
        if self.samples == 0 || self.instances == 0 || self.jobs == 0 {
            return bad("samples, instances and jobs must be >= 1".into());
        }
        let mut probe = self.params;
        probe.eps = 0.0;
        probe.validate()
    }

    /// SHA-256 of the canonical JSON form (all fields except `jobs`).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Template parameters for dimension `n`, with `eps` set and, for the
    /// matched preset, `v_bar2 = v_bar1 (a/b)^(n-1)`.
    pub fn params_for(&self, n: u32, eps: f64) -> Result<ModelParams> {
        let mut p = self.params;
        p.n = n;
        p.eps = eps;
        if self.preset()? == Preset::Matched {
            p.v_bar2 = p.v_bar1 * (p.grid.a / p.grid.b).powi(n as i32 - 1);
        }
        Ok(p)
    }

    /// Steps between saved samples so that at least `samples` are kept.
    pub fn save_every(&self, p: &ModelParams) -> usize {
        let (steps, _) = crate::solver::step_count(p.t_end, p.dt);
        (steps / self.samples).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::new(ExperimentKind::Sweep);
        let text = cfg.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn minimal_toml_uses_defaults() {
        let cfg = ExperimentConfig::from_toml_str("kind = \"sweep\"\n").unwrap();
        assert_eq!(cfg.eps, default_eps());
        assert_eq!(cfg.params, default_params());
        assert_eq!(cfg.jobs, 1);
    }

    #[test]
    fn rejects_bad_lists() {
        let base = "kind = \"sweep\"\n";
        for extra in [
            "eps = [1e-3, 1e-2]",
            "eps = [1.5]",
            "eps = []",
            "alphas = [0.5]",
            "alphas = [0.0]",
            "dims = [1]",
            "preset = \"nope\"",
            "unknown = 3",
        ] {
            assert!(
                ExperimentConfig::from_toml_str(&format!("{base}{extra}\n")).is_err(),
                "{extra}"
            );
        }
    }

    #[test]
    fn hash_ignores_jobs() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Sweep);
        let h = cfg.hash();
        cfg.jobs = 8;
        assert_eq!(cfg.hash(), h);
        cfg.seed = 1;
        assert_ne!(cfg.hash(), h);
    }

    #[test]
    fn matched_params_zero_flux() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Sweep);
        cfg.preset = "matched".into();
        let p = cfg.params_for(3, 1e-2).unwrap();
        assert_eq!(p.v_bar2, 0.25);
        assert_eq!(p.eps, 1e-2);
    }
}
