//! Generalized Gronwall-type ODE inequality
//!
//! ```text
//! y' <= gamma f1(t) + f2(t) y + C0 (y^2 + ... + y^k),   y(0) = 0
//! ```
//!
//! with the admissibility constant `gamma0`, the closed-form bound, and the
//! extremal (equality) solution that dominates every solution of the inequality.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};

/// A nonnegative coefficient function on `[0, T]`.
#[derive(Clone)]
pub enum Profile {
    Constant(f64),
    /// Piecewise-linear interpolation of `(times, values)`, constant outside.
    Tabulated {
        times: Vec<f64>,
        values: Vec<f64>,
    },
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Constant(c) => write!(f, "Constant({c})"),
            Profile::Tabulated { times, .. } => write!(f, "Tabulated({} knots)", times.len()),
            Profile::Function(_) => f.write_str("Function"),
        }
    }
}

const QUAD_TOL: f64 = 1e-10;

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    (fa, fm, fb): (f64, f64, f64),
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_simpson(f, a, m, (fa, flm, fm), left, 0.5 * tol, depth - 1)
            + adaptive_simpson(f, m, b, (fm, frm, fb), right, 0.5 * tol, depth - 1)
    }
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive_simpson(f, a, b, (fa, fm, fb), whole, tol, 48)
}

impl Profile {
    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(KsError::InvalidParams(
                "tabulated profile needs matching, non-empty series".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(KsError::InvalidParams(
                "tabulated times must increase".into(),
            ));
        }
        Ok(Profile::Tabulated { times, values })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Profile::Constant(c) => *c,
            Profile::Function(f) => f(t),
            Profile::Tabulated { times, values } => {
                let last = times.len() - 1;
                if t <= times[0] {
                    return values[0];
                }
                if t >= times[last] {
                    return values[last];
                }
                let j = times.partition_point(|&s| s <= t);
                let (t0, t1) = (times[j - 1], times[j]);
                let w = (t - t0) / (t1 - t0);
                values[j - 1] * (1.0 - w) + values[j] * w
            }
        }
    }

    /// `int_0^T` of the profile: exact for constant and tabulated profiles,
    /// adaptive Simpson (tolerance 1e-10) otherwise.
    pub fn integral(&self, t_end: f64) -> f64 {
        match self {
            Profile::Constant(c) => c * t_end,
            Profile::Function(f) => integrate(&|t| f(t), 0.0, t_end, QUAD_TOL),
            Profile::Tabulated { times, .. } => {
                let mut knots = vec![0.0];
                knots.extend(times.iter().copied().filter(|&s| s > 0.0 && s < t_end));
                knots.push(t_end);
                knots
                    .windows(2)
                    .map(|w| 0.5 * (w[1] - w[0]) * (self.eval(w[0]) + self.eval(w[1])))
                    .sum()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct LemmaInputs {
    pub k: u32,
    pub t_end: f64,
    pub c0: f64,
    pub gamma: f64,
    pub f1: Profile,
    pub f2: Profile,
}

impl LemmaInputs {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(KsError::InvalidParams(format!(
                "k = {} must be >= 2",
                self.k
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(KsError::InvalidParams(format!(
                "T = {} must be > 0",
                self.t_end
            )));
        }
        if !(self.c0 > 1.0) {
            return Err(KsError::InvalidParams(format!(
                "C0 = {} must exceed 1",
                self.c0
            )));
        }
        if !(self.gamma >= 0.0) {
            return Err(KsError::InvalidParams(format!(
                "gamma = {} must be >= 0",
                self.gamma
            )));
        }
        Ok(())
    }

    /// `G = C0 (e^(int f2))^(k-1)`.
    pub fn g_constant(&self) -> f64 {
        self.c0 * (self.f2.integral(self.t_end) * (self.k - 1) as f64).exp()
    }
}

/// `gamma0 = min{[4(k-1)]^-1, [8 T G (k-1)^2]^-1} / int f1`; infinite when `int f1 = 0`.
pub fn gamma0(inp: &LemmaInputs) -> f64 {
    let i1 = inp.f1.integral(inp.t_end);
    if i1 <= 0.0 {
        return f64::INFINITY;
    }
    let km1 = (inp.k - 1) as f64;
    let g = inp.g_constant();
    let first = 1.0 / (4.0 * km1 * i1);
    let second = 1.0 / (8.0 * inp.t_end * g * km1 * km1 * i1);
    first.min(second)
}

/// `e^(int f2) min{3, 3 / (2 T (k-1) G), 12 (k-1) gamma int f1}` for `t` in `[0, T]`.
pub fn bound_value(inp: &LemmaInputs, t: f64) -> Result<f64> {
    inp.validate()?;
    if !(0.0..=inp.t_end).contains(&t) {
        return Err(KsError::InvalidParams(format!(
            "t = {t} outside [0, {}]",
            inp.t_end
        )));
    }
    let g0 = gamma0(inp);
    if inp.gamma > g0 {
        return Err(KsError::GammaTooLarge {
            gamma: inp.gamma,
            gamma0: g0,
        });
    }
    let km1 = (inp.k - 1) as f64;
    let i1 = inp.f1.integral(inp.t_end);
    let i2 = inp.f2.integral(inp.t_end);
    let g = inp.g_constant();
    let branch = 3.0f64
        .min(3.0 / (2.0 * inp.t_end * km1 * g))
        .min(12.0 * km1 * inp.gamma * i1);
    Ok(i2.exp() * branch)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalSolution {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub steps: usize,
}

impl ExtremalSolution {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn last(&self) -> f64 {
        *self.values.last().unwrap_or(&0.0)
    }
}

const BLOWUP_LEVEL: f64 = 1e8;
const REFINE_TOL: f64 = 1e-8;
const MAX_STEPS: usize = 1 << 22;

fn rhs(inp: &LemmaInputs, t: f64, y: f64) -> f64 {
    let mut poly = 0.0;
    let mut power = y;
    for _ in 2..=inp.k {
        power *= y;
        poly += power;
    }
    inp.gamma * inp.f1.eval(t) + inp.f2.eval(t) * y + inp.c0 * poly
}

/// Classical RK4 with `steps` uniform steps. `Err(time)` on blow-up.
fn rk4(inp: &LemmaInputs, steps: usize) -> std::result::Result<Vec<f64>, f64> {
    let h = inp.t_end / steps as f64;
    let mut y = 0.0;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(y);
    for i in 0..steps {
        let t = i as f64 * h;
        let k1 = rhs(inp, t, y);
        let k2 = rhs(inp, t + 0.5 * h, y + 0.5 * h * k1);
        let k3 = rhs(inp, t + 0.5 * h, y + 0.5 * h * k2);
        let k4 = rhs(inp, t + h, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !y.is_finite() || y.abs() > BLOWUP_LEVEL {
            return Err(t + h);
        }
        out.push(y);
    }
    Ok(out)
}

/// Solves the equality ODE by RK4, halving the step until two successive
/// refinements agree to 1e-8 relative at the common nodes.
pub fn integrate_extremal(inp: &LemmaInputs) -> Result<ExtremalSolution> {
    inp.validate()?;
    let mut steps = 64;
    let mut coarse = rk4(inp, steps).map_err(|time| KsError::BlowUp { time })?;
    loop {
        let fine_steps = 2 * steps;
        if fine_steps > MAX_STEPS {
            return Err(KsError::NotConverged(format!(
                "no agreement to {REFINE_TOL:e} with {steps} steps"
            )));
        }
        let fine = rk4(inp, fine_steps).map_err(|time| KsError::BlowUp { time })?;
        let scale = fine.iter().fold(0.0f64, |m, y| m.max(y.abs()));
        let diff = coarse
            .iter()
            .enumerate()
            .fold(0.0f64, |m, (i, y)| m.max((y - fine[2 * i]).abs()));
        if diff <= REFINE_TOL * scale || scale == 0.0 {
            let h = inp.t_end / fine_steps as f64;
            let times = (0..=fine_steps).map(|i| i as f64 * h).collect();
            return Ok(ExtremalSolution {
                times,
                values: fine,
                steps: fine_steps,
            });
        }
        coarse = fine;
        steps = fine_steps;
    }
}

/// Outcome of one randomized dominance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaVerdict {
    pub seed: u64,
    pub k: u32,
    pub gamma: f64,
    pub gamma0: f64,
    pub y_max: f64,
    pub bound: f64,
    pub pass: bool,
}

const EQUALITY_TOL: f64 = 1e-8;

/// Integrates the extremal solution and compares it with the bound at every node.
pub fn check_instance(seed: u64, inp: &LemmaInputs) -> Result<LemmaVerdict> {
    let g0 = gamma0(inp);
    let bound = bound_value(inp, inp.t_end)?;
    let sol = integrate_extremal(inp)?;
    let y_max = sol.max();
    let pass = sol
        .values
        .iter()
        .all(|&y| y <= bound + EQUALITY_TOL * bound.max(1.0));
    Ok(LemmaVerdict {
        seed,
        k: inp.k,
        gamma: inp.gamma,
        gamma0: g0,
        y_max,
        bound,
        pass,
    })
}

fn random_profile(rng: &mut ChaCha8Rng, t_end: f64) -> Profile {
    let knots = rng.random_range(2..8usize);
    let times: Vec<f64> = (0..knots)
        .map(|i| t_end * i as f64 / (knots - 1) as f64)
        .collect();
    let values: Vec<f64> = (0..knots).map(|_| rng.random_range(0.0..2.0)).collect();
    Profile::Tabulated { times, values }
}

/// Random admissible instance: `k` in 2..=5, piecewise-linear `f1, f2 >= 0`,
/// `gamma` uniform in `(0, gamma0]`.
pub fn random_instance(seed: u64) -> LemmaInputs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(2..=5u32);
    let t_end = rng.random_range(0.25..2.0);
    let c0 = rng.random_range(1.0..4.0) + 1e-9;
    let f1 = random_profile(&mut rng, t_end);
    let f2 = random_profile(&mut rng, t_end);
    let mut inp = LemmaInputs {
        k,
        t_end,
        c0,
        gamma: 0.0,
        f1,
        f2,
    };
    let fraction: f64 = 1.0 - rng.random_range(0.0..1.0);
    let g0 = gamma0(&inp);
    inp.gamma = if g0.is_finite() {
        fraction * g0
    } else {
        fraction
    };
    inp
}
