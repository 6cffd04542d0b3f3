//! Acceptance suite: one PASS/FAIL line per criterion. Runs as a plain
//! binary so the lines reach stdout under `cargo test`.

use std::collections::BTreeMap;
use std::f64::consts::E;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use radial_ks::gronwall::{bound_value, gamma0, random_instance, LemmaInputs, Profile};
use radial_ks::harness::{
    lemma, longtime, mms, roundtrip, sweep, CriterionOutcome, ExperimentConfig, ExperimentKind,
};

struct Line {
    id: u32,
    pass: bool,
    text: String,
}

fn config(kind: ExperimentKind, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind);
    cfg.output = out.to_path_buf();
    cfg.jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    cfg
}

/// Least-squares slope of `log y` against `log x`, written out directly.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn from_outcome(c: &CriterionOutcome, extra_ok: bool, extra: String, elapsed: Duration) -> Line {
    let pass = c.pass && extra_ok;
    Line {
        id: c.id,
        pass,
        text: format!(
            "criterion {:>2} {}: {} ({}; {extra}; {:.1}s)",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail,
            elapsed.as_secs_f64()
        ),
    }
}

fn failed(id: u32, err: impl std::fmt::Display) -> Line {
    Line {
        id,
        pass: false,
        text: format!("criterion {id:>2} FAIL: {err}"),
    }
}

fn criterion_1(dir: &Path) -> Vec<Line> {
    let t = Instant::now();
    let report = match mms::run_mms(&config(ExperimentKind::Mms, dir)) {
        Ok(r) => r,
        Err(e) => return vec![failed(1, e)],
    };
    let elapsed = t.elapsed();
    // every study refits its orders from the raw errors
    let refit_ok = report.studies.iter().all(|s| {
        let h: Vec<f64> = s
            .levels
            .iter()
            .map(|l| match s.refinement {
                mms::Refinement::Space => 1.0 / (l.m - 1) as f64,
                mms::Refinement::Time => l.dt,
            })
            .collect();
        let eu: Vec<f64> = s.levels.iter().map(|l| l.err_u).collect();
        let es: Vec<f64> = s.levels.iter().map(|l| l.err_second).collect();
        (slope(&h, &eu) - s.fitted_order_u).abs() < 1e-9
            && (slope(&h, &es) - s.fitted_order_second).abs() < 1e-9
    });
    let levels_ok =
        report.studies.iter().all(|s| s.levels.len() >= 4) && report.studies.len() == 12;
    let time_ok = elapsed < Duration::from_secs(120);
    vec![from_outcome(
        &report.criteria[0],
        refit_ok && levels_ok && time_ok,
        format!("independent refit {refit_ok}, 3 steppers x 2 dims x space/time with >= 4 levels {levels_ok}, runtime < 2 min {time_ok}"),
        elapsed,
    )]
}

fn criteria_2_3(dir: &Path) -> Vec<Line> {
    let t = Instant::now();
    let report = match longtime::run_longtime(&config(ExperimentKind::Longtime, dir)) {
        Ok(r) => r,
        Err(e) => return vec![failed(2, &e), failed(3, e)],
    };
    let elapsed = t.elapsed();
    let shrink_ok = report.entropy.iter().all(|s| {
        s.levels.windows(2).all(|w| w[0].tol_e / w[1].tol_e >= 3.0)
            && s.levels
                .windows(2)
                .all(|w| w[1].m - 1 == 2 * (w[0].m - 1) && w[1].dt * 2.0 == w[0].dt)
    });
    let decay_ok = report.decay.iter().all(|r| {
        let first = r.deviation[0];
        let last = *r.deviation.last().unwrap();
        r.params.t_end == 20.0
            && last <= 0.05 * first
            && r.energy
                .windows(2)
                .all(|w| w[1] <= w[0] + 1e-12 * r.energy[0])
    });
    vec![
        from_outcome(
            &report.criteria[0],
            shrink_ok,
            format!("simultaneous halving with ratios >= 3 rechecked {shrink_ok}"),
            elapsed,
        ),
        from_outcome(
            &report.criteria[1],
            decay_ok,
            format!("deviation and monotone energy rechecked from samples {decay_ok}"),
            elapsed,
        ),
    ]
}

/// Rechecks the sweep side of the layer campaign from the stored points.
fn recheck_sweep(report: &sweep::SweepReport) -> (bool, bool, bool) {
    let mut u_ok = true;
    let mut v_ok = true;
    let mut w_ok = true;
    for d in &report.dims {
        let pts: Vec<_> = d
            .points
            .iter()
            .filter_map(|p| p.metrics().map(|m| (p.eps, m)))
            .collect();
        let eps: Vec<f64> = pts.iter().map(|(e, _)| *e).collect();
        let eu: Vec<f64> = pts.iter().map(|(_, m)| m.err_u_sup).collect();
        let ew: Vec<f64> = pts.iter().map(|(_, m)| m.err_w_weighted).collect();
        u_ok &= pts.len() == d.points.len()
            && eu.windows(2).all(|w| w[1] < w[0])
            && slope(&eps, &eu) >= 0.20;
        w_ok &= slope(&eps, &ew) >= 0.20;
        for j in 0..report.config.alphas.len() {
            let ev: Vec<f64> = pts
                .iter()
                .map(|(_, m)| m.interior[j].err_v_interior)
                .collect();
            let shape: Vec<f64> = pts
                .iter()
                .map(|(e, m)| e.powf(0.25) * m.interior[j].delta.powf(-0.5))
                .collect();
            let k = ev[0] / shape[0];
            v_ok &= ev.windows(2).all(|w| w[1] < w[0])
                && slope(&eps, &ev) > 0.0
                && ev.iter().zip(&shape).all(|(e, s)| *e <= 2.0 * k * s);
        }
    }
    (u_ok, v_ok, w_ok)
}

fn criteria_4_to_8(dir: &Path) -> Vec<Line> {
    let t = Instant::now();
    let campaign = match sweep::run_layer(&config(ExperimentKind::Layer, dir)) {
        Ok(r) => r,
        Err(e) => return (4..=8).map(|id| failed(id, &e)).collect(),
    };
    let elapsed = t.elapsed();
    let (u_ok, v_ok, w_ok) = recheck_sweep(&campaign.mismatch);
    let time_ok = elapsed < Duration::from_secs(15 * 60);

    let six_ok = campaign.matched.dims.iter().all(|d| {
        let last = d
            .points
            .last()
            .and_then(|p| p.metrics())
            .map_or(f64::INFINITY, |m| m.err_v_full);
        d.max_flux_a <= 1e-3 && d.max_flux_b <= 1e-3 && last < 1e-2
    }) && campaign.mismatch.dims.iter().all(|d| {
        let big = d.max_flux_a.max(d.max_flux_b);
        d.max_flux_a >= 0.1
            && d.points
                .iter()
                .all(|p| p.metrics().is_some_and(|m| m.err_v_full >= 0.5 * big))
    });
    let eight_ok = campaign.identity.iter().all(|s| {
        let h: Vec<f64> = s.levels.iter().map(|l| l.dt).collect();
        let g: Vec<f64> = s.levels.iter().map(|l| l.gap_a.max(l.gap_b)).collect();
        slope(&h, &g) >= 1.8
    });

    let find = |id: u32, src: &[CriterionOutcome]| src.iter().find(|c| c.id == id).cloned();
    let mut lines = Vec::new();
    for (id, ok, what) in [
        (
            4,
            u_ok && time_ok,
            format!("monotone and refit order rechecked {u_ok}, runtime < 15 min {time_ok}"),
        ),
        (
            5,
            v_ok,
            format!("monotone, positive order and 2x bound rechecked {v_ok}"),
        ),
        (7, w_ok, format!("refit order rechecked {w_ok}")),
    ] {
        match find(id, &campaign.mismatch.criteria) {
            Some(c) => lines.push(from_outcome(&c, ok, what, elapsed)),
            None => lines.push(failed(id, "criterion missing from sweep report")),
        }
    }
    for (id, ok, what) in [
        (
            6,
            six_ok,
            format!("flux sizes and err_v_full rechecked {six_ok}"),
        ),
        (8, eight_ok, format!("order refit from gaps {eight_ok}")),
    ] {
        match find(id, &campaign.criteria) {
            Some(c) => lines.push(from_outcome(&c, ok, what, elapsed)),
            None => lines.push(failed(id, "criterion missing from layer report")),
        }
    }
    lines
}

fn criterion_9(dir: &Path) -> Vec<Line> {
    let t = Instant::now();
    let report = match roundtrip::run_roundtrip(&config(ExperimentKind::Roundtrip, dir)) {
        Ok(r) => r,
        Err(e) => return vec![failed(9, e)],
    };
    let ok = report.studies.iter().all(|s| {
        s.levels.windows(2).all(|w| {
            w[0].sup_difference / w[1].sup_difference >= 1.7 && w[1].m - 1 == 2 * (w[0].m - 1)
        }) && s.levels.iter().all(|l| l.min_reconstructed_c > 0.0)
    });
    vec![from_outcome(
        &report.criteria[0],
        ok,
        format!("ratios and positivity rechecked {ok}"),
        t.elapsed(),
    )]
}

/// Integral over `[0, T]` of a profile, by its own trapezoid / closed form.
fn profile_integral(f: &Profile, t_end: f64) -> f64 {
    match f {
        Profile::Constant(c) => c * t_end,
        Profile::Tabulated { times, values } => {
            assert!(
                times[0] <= 0.0 && *times.last().unwrap() >= t_end,
                "table covers [0, T]"
            );
            times
                .windows(2)
                .zip(values.windows(2))
                .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
                .sum()
        }
        Profile::Function(_) => panic!("random instances are tabulated"),
    }
}

fn k2_oracle(inp: &LemmaInputs) -> (f64, f64) {
    let i1 = profile_integral(&inp.f1, inp.t_end);
    let i2 = profile_integral(&inp.f2, inp.t_end);
    let g = inp.c0 * i2.exp();
    let t = inp.t_end;
    let g0 = f64::min(1.0 / (4.0 * i1), 1.0 / (8.0 * t * g * i1));
    let b = i2.exp() * f64::min(3.0, f64::min(3.0 / (2.0 * t * g), 12.0 * inp.gamma * i1));
    (g0, b)
}

fn criterion_10(dir: &Path) -> Vec<Line> {
    let t = Instant::now();
    let report = match lemma::run_lemma(&config(ExperimentKind::Lemma, dir)) {
        Ok(r) => r,
        Err(e) => return vec![failed(10, e)],
    };
    let elapsed = t.elapsed();
    let count_ok = report.verdicts.len() == 200
        && report.verdicts.iter().all(|v| v.pass && v.y_max <= v.bound);

    let reference = LemmaInputs {
        k: 3,
        t_end: 1.0,
        c0: 2.0,
        gamma: 0.0,
        f1: Profile::Constant(1.0),
        f2: Profile::Constant(1.0),
    };
    let expected = 1.0 / (64.0 * E * E);
    let ref_ok = (gamma0(&reference) - expected).abs() <= 1e-12;

    let k2_seed = (0..200u64).find(|&s| random_instance(s).k == 2);
    let k2_ok = k2_seed.is_some_and(|s| {
        let inp = random_instance(s);
        let (g0, b) = k2_oracle(&inp);
        let got = bound_value(&inp, inp.t_end).unwrap_or(f64::NAN);
        (gamma0(&inp) - g0).abs() <= 1e-10 && (got - b).abs() <= 1e-10
    });
    let time_ok = elapsed < Duration::from_secs(60);
    vec![from_outcome(
        &report.criteria[0],
        count_ok && ref_ok && k2_ok && time_ok,
        format!(
            "200 verdicts dominated {count_ok}, 1/(64e^2) oracle {ref_ok}, k=2 oracle (seed {k2_seed:?}) {k2_ok}, runtime < 1 min {time_ok}"
        ),
        elapsed,
    )]
}

fn tree_bytes(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).expect("readable output dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.insert(rel, std::fs::read(&path).expect("readable output file"));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

type Runner = fn(&Path) -> Vec<Line>;

/// Moves each first-pass result aside, reruns the same config into the same
/// directory and compares bytes.
fn criterion_11(root: &Path) -> Vec<Line> {
    let t = Instant::now();
    let runs: [(&str, Runner); 5] = [
        ("mms", criterion_1),
        ("longtime", criteria_2_3),
        ("layer", criteria_4_to_8),
        ("roundtrip", criterion_9),
        ("lemma", criterion_10),
    ];
    let mut mismatches = Vec::new();
    let mut files = 0;
    for (name, run) in runs {
        let dir = root.join(name);
        let previous = root.join(format!("{name}.previous"));
        std::fs::rename(&dir, &previous).expect("move first run aside");
        run(&dir);
        let a = tree_bytes(&previous);
        let b = tree_bytes(&dir);
        files += a.len();
        if a.keys().ne(b.keys()) {
            mismatches.push(format!("{name}: file sets differ"));
            continue;
        }
        for (path, bytes) in &a {
            if b[path] != *bytes {
                mismatches.push(format!("{name}/{}", path.display()));
            }
        }
    }
    let pass = mismatches.is_empty() && files > 0;
    vec![Line {
        id: 11,
        pass,
        text: format!(
            "criterion 11 {}: determinism ({files} files compared, {} differ{}; {:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            mismatches.len(),
            if mismatches.is_empty() {
                String::new()
            } else {
                format!(": {}", mismatches.join(", "))
            },
            t.elapsed().as_secs_f64()
        ),
    }]
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters address libtest targets; answer trivially
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let tmp = tempfile::tempdir().expect("temp dir");
    let first = tmp.path();
    let mut lines = Vec::new();
    lines.extend(criterion_1(&first.join("mms")));
    lines.extend(criteria_2_3(&first.join("longtime")));
    lines.extend(criteria_4_to_8(&first.join("layer")));
    lines.extend(criterion_9(&first.join("roundtrip")));
    lines.extend(criterion_10(&first.join("lemma")));
    lines.extend(criterion_11(first));
    lines.sort_by_key(|l| l.id);
    for l in &lines {
        println!("{}", l.text);
    }
    let passed = lines.iter().filter(|l| l.pass).count();
    println!("acceptance: {passed}/{} criteria pass", lines.len());
    if passed == lines.len() && lines.len() == 11 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
