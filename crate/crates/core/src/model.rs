//! Physical parameters of the radial model and the initial-data presets.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};
use crate::grid::{GridSpec, RadialGrid, ScalarField};

/// Parameters of the transformed system and its boundary data.
///
/// `eps` is the chemical diffusivity, `u_bar` the Dirichlet density at both
/// ends, `v_bar1`/`v_bar2` the Dirichlet values of `v` at `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: u32,
    pub eps: f64,
    pub u_bar: f64,
    pub v_bar1: f64,
    pub v_bar2: f64,
    pub t_end: f64,
    pub dt: f64,
    pub grid: GridSpec,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(KsError::InvalidParams(msg));
        if self.n < 2 {
            return bad(format!("dimension n = {} must be >= 2", self.n));
        }
        if !(self.eps >= 0.0 && self.eps < 1.0) {
            return bad(format!("eps = {} must lie in [0, 1)", self.eps));
        }
        if !(self.u_bar >= 0.0 && self.u_bar.is_finite()) {
            return bad(format!("u_bar = {} must be finite and >= 0", self.u_bar));
        }
        if !(self.v_bar1.is_finite() && self.v_bar2.is_finite()) {
            return bad("boundary values of v must be finite".into());
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("final time T = {} must be > 0", self.t_end));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("time step dt = {} must be > 0", self.dt));
        }
        if self.grid.a <= 0.0 || self.grid.b <= self.grid.a || self.grid.m < 3 {
            return Err(KsError::InvalidGrid(format!(
                "need 0 < a < b and m >= 3, got a = {}, b = {}, m = {}",
                self.grid.a, self.grid.b, self.grid.m
            )));
        }
        Ok(())
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn build_grid(&self) -> Result<Arc<RadialGrid>> {
        self.grid.build()
    }

    /// `n - 1` as a float; the exponent of the radial weight.
    pub fn radial_power(&self) -> f64 {
        (self.n - 1) as f64
    }
}

/// Named initial data satisfying the compatibility conditions
/// `u0(a) = u0(b) = u_bar`, `v0(a) = v_bar1`, `v0(b) = v_bar2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// `u0 = u_bar`, `v0 = 0`; requires `v_bar1 = v_bar2 = 0`.
    Constant,
    /// `u0 = u_bar + sin^2(pi xi)`, `v0` linear between the boundary values.
    Bump,
    /// `u0 = u_bar`, `v0` a smoothstep from `v_bar1` to `v_bar2`.
    MismatchLayer,
    /// `u0 = u_bar`, `v0 = v_bar1 (a/r)^(n-1)`: a steady state of the limit
    /// system with zero boundary flux. Requires `v_bar2 = v_bar1 (a/b)^(n-1)`.
    Matched,
    /// `u0 = u_bar`, `v0` the cubic Hermite profile with end slopes
    /// `-(n-1) v_bar / r`, so `div(r^(n-1) v0)` vanishes at both ends and the
    /// density equation starts from rest there.
    CompatibleFlux,
}

pub const PRESET_NAMES: [&str; 5] = [
    "constant",
    "bump",
    "mismatch-layer",
    "matched",
    "compatible-flux",
];

impl FromStr for Preset {
    type Err = KsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Preset::Constant),
            "bump" => Ok(Preset::Bump),
            "mismatch-layer" => Ok(Preset::MismatchLayer),
            "matched" => Ok(Preset::Matched),
            "compatible-flux" => Ok(Preset::CompatibleFlux),
            other => Err(KsError::UnknownPreset(other.to_string())),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Preset::Constant => "constant",
            Preset::Bump => "bump",
            Preset::MismatchLayer => "mismatch-layer",
            Preset::Matched => "matched",
            Preset::CompatibleFlux => "compatible-flux",
        };
        f.write_str(name)
    }
}

const BUMP_AMPLITUDE: f64 = 1.0;

/// Closed-form profiles of a preset bound to a parameter set.
#[derive(Debug, Clone, Copy)]
pub struct PresetProfile {
    preset: Preset,
    p: ModelParams,
}

impl PresetProfile {
    pub fn new(preset: Preset, p: &ModelParams) -> Result<Self> {
        let incompatible = |reason: String| {
            Err(KsError::IncompatiblePreset {
                preset: preset.to_string(),
                reason,
            })
        };
        match preset {
            Preset::Constant if p.v_bar1 != 0.0 || p.v_bar2 != 0.0 => {
                return incompatible(format!(
                    "needs v_bar1 = v_bar2 = 0, got {} and {}",
                    p.v_bar1, p.v_bar2
                ));
            }
            Preset::Matched => {
                let expected = p.v_bar1 * (p.grid.a / p.grid.b).powi(p.n as i32 - 1);
                if (expected - p.v_bar2).abs() > 1e-12 * expected.abs().max(1.0) {
                    return incompatible(format!(
                        "needs v_bar2 = v_bar1 (a/b)^(n-1) = {expected}, got {}",
                        p.v_bar2
                    ));
                }
            }
            _ => {}
        }
        Ok(PresetProfile { preset, p: *p })
    }

    /// End slopes of the compatible-flux profile in the `xi` variable.
    fn hermite_slopes(&self) -> (f64, f64) {
        let (a, b) = (self.p.grid.a, self.p.grid.b);
        let nm1 = self.p.radial_power();
        let len = b - a;
        (
            -len * nm1 * self.p.v_bar1 / a,
            -len * nm1 * self.p.v_bar2 / b,
        )
    }

    fn xi(&self, r: f64) -> f64 {
        (r - self.p.grid.a) / (self.p.grid.b - self.p.grid.a)
    }

    pub fn u0(&self, r: f64) -> f64 {
        match self.preset {
            Preset::Bump => {
                let s = (PI * self.xi(r)).sin();
                self.p.u_bar + BUMP_AMPLITUDE * s * s
            }
            _ => self.p.u_bar,
        }
    }

    pub fn v0(&self, r: f64) -> f64 {
        let (v1, v2) = (self.p.v_bar1, self.p.v_bar2);
        let x = self.xi(r);
        match self.preset {
            Preset::Constant => 0.0,
            Preset::Bump => v1 + (v2 - v1) * x,
            Preset::MismatchLayer => v1 + (v2 - v1) * x * x * (3.0 - 2.0 * x),
            Preset::Matched => v1 * (self.p.grid.a / r).powi(self.p.n as i32 - 1),
            Preset::CompatibleFlux => {
                let (m1, m2) = self.hermite_slopes();
                let (x2, x3) = (x * x, x * x * x);
                v1 * (2.0 * x3 - 3.0 * x2 + 1.0)
                    + m1 * (x3 - 2.0 * x2 + x)
                    + v2 * (3.0 * x2 - 2.0 * x3)
                    + m2 * (x3 - x2)
            }
        }
    }

    /// `int_a^r v0(s) ds` in closed form.
    pub fn v0_integral(&self, r: f64) -> f64 {
        let (a, b) = (self.p.grid.a, self.p.grid.b);
        let (v1, v2) = (self.p.v_bar1, self.p.v_bar2);
        let x = self.xi(r);
        match self.preset {
            Preset::Constant => 0.0,
            Preset::Bump => v1 * (r - a) + (v2 - v1) * (b - a) * x * x / 2.0,
            Preset::MismatchLayer => {
                v1 * (r - a) + (v2 - v1) * (b - a) * (x.powi(3) - x.powi(4) / 2.0)
            }
            Preset::Matched => {
                let k = v1 * a.powi(self.p.n as i32 - 1);
                if self.p.n == 2 {
                    k * (r / a).ln()
                } else {
                    let e = 2 - self.p.n as i32;
                    k * (r.powi(e) - a.powi(e)) / e as f64
                }
            }
            Preset::CompatibleFlux => {
                let (m1, m2) = self.hermite_slopes();
                let (x2, x3, x4) = (x * x, x.powi(3), x.powi(4));
                (b - a)
                    * (v1 * (x4 / 2.0 - x3 + x)
                        + m1 * (x4 / 4.0 - 2.0 * x3 / 3.0 + x2 / 2.0)
                        + v2 * (x3 - x4 / 2.0)
                        + m2 * (x4 / 4.0 - x3 / 3.0))
            }
        }
    }

    /// `c0 = exp(-int_a^r v0)`, so that `v0 = -c0_r / c0` and `c0(a) = 1`.
    pub fn c0(&self, r: f64) -> f64 {
        (-self.v0_integral(r)).exp()
    }
}

/// Samples a preset on the grid of `p` as transformed-variable data `(u0, v0)`.
/// Boundary nodes carry the boundary data exactly.
pub fn initial_data_presets(name: &str, p: &ModelParams) -> Result<(ScalarField, ScalarField)> {
    let preset: Preset = name.parse()?;
    let grid = p.build_grid()?;
    preset_fields(preset, p, grid)
}

pub fn preset_fields(
    preset: Preset,
    p: &ModelParams,
    grid: Arc<RadialGrid>,
) -> Result<(ScalarField, ScalarField)> {
    let profile = PresetProfile::new(preset, p)?;
    let m = grid.len();
    let mut u: Vec<f64> = grid.nodes().iter().map(|&r| profile.u0(r)).collect();
    let mut v: Vec<f64> = grid.nodes().iter().map(|&r| profile.v0(r)).collect();
    u[0] = p.u_bar;
    u[m - 1] = p.u_bar;
    v[0] = p.v_bar1;
    v[m - 1] = p.v_bar2;
    Ok((
        ScalarField::new(grid.clone(), u)?,
        ScalarField::new(grid, v)?,
    ))
}

/// Original-variable data `(u0, c0)` of a preset with `v0 = -c0_r / c0` analytically.
pub fn preset_original_fields(
    preset: Preset,
    p: &ModelParams,
    grid: Arc<RadialGrid>,
) -> Result<(ScalarField, ScalarField)> {
    let (u, _) = preset_fields(preset, p, grid.clone())?;
    let profile = PresetProfile::new(preset, p)?;
    let c = ScalarField::from_fn(grid, |r| profile.c0(r))?;
    Ok((u, c))
}

/// Compatibility violations of user-supplied data, to relative tolerance 1e-14.
/// Returns human-readable warnings; an empty list means compatible.
pub fn compatibility_warnings(u0: &ScalarField, v0: &ScalarField, p: &ModelParams) -> Vec<String> {
    let close = |x: f64, target: f64| (x - target).abs() <= 1e-14 * target.abs().max(1.0);
    let mut warnings = Vec::new();
    let checks = [
        ("u0(a)", u0.first(), p.u_bar),
        ("u0(b)", u0.last(), p.u_bar),
        ("v0(a)", v0.first(), p.v_bar1),
        ("v0(b)", v0.last(), p.v_bar2),
    ];
    for (label, got, want) in checks {
        if !close(got, want) {
            warnings.push(format!(
                "{label} = {got} differs from boundary value {want}"
            ));
        }
    }
    if u0.min() < 0.0 {
        warnings.push(format!("u0 has negative entries (min {})", u0.min()));
    }
    warnings
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(u_bar: f64, v1: f64, v2: f64) -> ModelParams {
        ModelParams {
            n: 2,
            eps: 0.01,
            u_bar,
            v_bar1: v1,
            v_bar2: v2,
            t_end: 1.0,
            dt: 1e-3,
            grid: GridSpec::uniform(1.0, 2.0, 41),
        }
    }

    #[test]
    fn constant_preset() {
        let p = params(1.0, 0.0, 0.0);
        let (u, v) = initial_data_presets("constant", &p).unwrap();
        assert!(u.values().iter().all(|&x| x == 1.0));
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bump_matches_at_endpoints() {
        let p = params(1.0, 0.0, 0.0);
        let profile = PresetProfile::new(Preset::Bump, &p).unwrap();
        // closed-form evaluation, not the node overwrite
        assert!((profile.u0(1.0) - 1.0).abs() <= 1e-14);
        assert!((profile.u0(2.0) - 1.0).abs() <= 1e-14);
        assert!(profile.u0(1.5) > 1.9);
        let (u, v) = initial_data_presets("bump", &p).unwrap();
        assert!(compatibility_warnings(&u, &v, &p).is_empty());
        assert!(u.min() >= 0.0);
    }

    #[test]
    fn mismatch_layer_interpolates() {
        let p = params(1.0, 1.0, -1.0);
        let profile = PresetProfile::new(Preset::MismatchLayer, &p).unwrap();
        assert_eq!(profile.v0(1.0), 1.0);
        assert_eq!(profile.v0(2.0), -1.0);
        let (u, v) = initial_data_presets("mismatch-layer", &p).unwrap();
        assert!(compatibility_warnings(&u, &v, &p).is_empty());
        assert!(v.values().windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn matched_requires_consistent_values() {
        let p = params(1.0, 1.0, -1.0);
        assert!(matches!(
            initial_data_presets("matched", &p),
            Err(KsError::IncompatiblePreset { .. })
        ));
        let p = params(1.0, 1.0, 0.5);
        let (u, v) = initial_data_presets("matched", &p).unwrap();
        assert!(compatibility_warnings(&u, &v, &p).is_empty());
    }

    #[test]
    fn compatible_flux_starts_at_rest_on_the_boundary() {
        for n in [2, 3] {
            let mut p = params(1.0, 1.0, -1.0);
            p.n = n;
            let prof = PresetProfile::new(Preset::CompatibleFlux, &p).unwrap();
            assert!((prof.v0(1.0) - 1.0).abs() < 1e-15);
            assert!((prof.v0(2.0) + 1.0).abs() < 1e-15);
            // (r^(n-1) v0)_r = 0 at both ends, by central differences
            let g = |r: f64| r.powi(n as i32 - 1) * prof.v0(r);
            let h = 1e-6;
            for r in [1.0, 2.0] {
                let d = (g(r + h) - g(r - h)) / (2.0 * h);
                assert!(d.abs() < 1e-6, "n={n} r={r}: {d}");
            }
            let (u, v) =
                preset_fields(Preset::CompatibleFlux, &p, p.build_grid().unwrap()).unwrap();
            assert!(compatibility_warnings(&u, &v, &p).is_empty());
        }
        assert_eq!(
            "compatible-flux".parse::<Preset>().unwrap(),
            Preset::CompatibleFlux
        );
        assert_eq!(Preset::CompatibleFlux.to_string(), "compatible-flux");
    }

    #[test]
    fn unknown_preset_rejected() {
        let p = params(1.0, 0.0, 0.0);
        assert!(matches!(
            initial_data_presets("gaussian", &p),
            Err(KsError::UnknownPreset(_))
        ));
        assert!(initial_data_presets("constant", &params(1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn c0_consistent_with_v0() {
        for preset in [
            Preset::Bump,
            Preset::MismatchLayer,
            Preset::Matched,
            Preset::CompatibleFlux,
        ] {
            let v2 = if preset == Preset::Matched { 0.5 } else { -1.0 };
            let p = params(1.0, 1.0, v2);
            let prof = PresetProfile::new(preset, &p).unwrap();
            for &r in &[1.1, 1.37, 1.8] {
                let h = 1e-5;
                let dlog = (prof.c0(r + h).ln() - prof.c0(r - h).ln()) / (2.0 * h);
                assert!((-dlog - prof.v0(r)).abs() < 1e-8, "{preset} at {r}");
            }
            assert_eq!(prof.c0(1.0), 1.0);
        }
    }

    #[test]
    fn params_validation() {
        let mut p = params(1.0, 0.0, 0.0);
        assert!(p.validate().is_ok());
        p.eps = 1.0;
        assert!(p.validate().is_err());
        p.eps = 0.0;
        p.n = 1;
        assert!(p.validate().is_err());
        p.n = 3;
        p.u_bar = -1.0;
        assert!(p.validate().is_err());
    }
}
