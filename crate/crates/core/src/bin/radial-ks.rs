use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use radial_ks::harness::{
    lemma, longtime, mms, report, roundtrip, sweep, CriterionOutcome, ExperimentConfig,
    ExperimentKind,
};
use radial_ks::io::write_json;
use radial_ks::model::{preset_fields, preset_original_fields};
use radial_ks::trajectory::DiagnosticsSummary;
use radial_ks::{solve, InitialData, ModelParams, SolveKind, StepControls};

/// Radial Keller-Segel solver and vanishing-diffusion experiment runner.
#[derive(Debug, Parser)]
#[command(name = "radial-ks", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single solve; writes the trajectory and a summary.
    Run(RunArgs),
    /// Epsilon sweep against the eps = 0 reference.
    Sweep(Overrides),
    /// Manufactured-solution convergence orders.
    Mms(Overrides),
    /// Matched versus mismatched boundary data and the boundary identity.
    Layer(Overrides),
    /// Randomized checks of the Gronwall-type bound.
    VerifyLemma(Overrides),
    /// Entropy identity and long-time relaxation of the limit system.
    Longtime(Overrides),
    /// Original solve against Cole-Hopf reconstruction.
    Roundtrip(Overrides),
    /// Re-render tables and plot data from a stored result directory.
    Report { dir: PathBuf },
}

#[derive(Debug, Args)]
struct Overrides {
    /// TOML experiment file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated, strictly decreasing.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<u32>>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Constant entering eps0.
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Grid nodes.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    u_bar: Option<f64>,
    #[arg(long)]
    v_bar1: Option<f64>,
    #[arg(long)]
    v_bar2: Option<f64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// transformed, limit or original.
    #[arg(long, default_value = "transformed")]
    solver: String,
    /// Space dimension.
    #[arg(long, default_value_t = 2)]
    n: u32,
    #[command(flatten)]
    overrides: Overrides,
}

impl Overrides {
    fn resolve(&self, kind: ExperimentKind) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)
                .with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::new(kind),
        };
        if cfg.kind != kind {
            bail!("config is for `{}`, not `{kind}`", cfg.kind);
        }
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(x) = &self.$field { cfg.$field = x.clone(); })* };
        }
        set!(
            output, jobs, preset, eps, alphas, dims, levels, seed, instances, samples, threshold,
            c0
        );
        let p = &mut cfg.params;
        if let Some(x) = self.t_end {
            p.t_end = x;
        }
        if let Some(x) = self.dt {
            p.dt = x;
        }
        if let Some(x) = self.m {
            p.grid.m = x;
        }
        if let Some(x) = self.u_bar {
            p.u_bar = x;
        }
        if let Some(x) = self.v_bar1 {
            p.v_bar1 = x;
        }
        if let Some(x) = self.v_bar2 {
            p.v_bar2 = x;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Serialize)]
struct RunSummary {
    solver: SolveKind,
    preset: String,
    params: ModelParams,
    samples: usize,
    final_time: f64,
    diagnostics: DiagnosticsSummary,
}

fn run_single(args: &RunArgs) -> anyhow::Result<bool> {
    let kind: SolveKind = args.solver.parse()?;
    let mut cfg = args.overrides.resolve(ExperimentKind::Sweep)?;
    if args.overrides.output.is_none() {
        cfg.output = PathBuf::from("results/run");
    }
    let eps = match kind {
        SolveKind::Limit => 0.0,
        _ => cfg.eps[0],
    };
    let p = cfg.params_for(args.n, eps)?;
    let grid = p.build_grid()?;
    let preset = cfg.preset()?;
    let init = match kind {
        SolveKind::Original => {
            let (u0, c0) = preset_original_fields(preset, &p, grid)?;
            InitialData::Original { u0, c0 }
        }
        _ => {
            let (u0, v0) = preset_fields(preset, &p, grid)?;
            InitialData::Transformed { u0, v0 }
        }
    };
    let controls = StepControls::from_params(&p).with_save_every(cfg.save_every(&p));
    let traj = solve(kind, init, &p, &controls)?;
    traj.write_dir(&cfg.output.join("trajectory"))?;
    let summary = RunSummary {
        solver: kind,
        preset: cfg.preset.clone(),
        params: p,
        samples: traj.times.len(),
        final_time: *traj.times.last().unwrap_or(&0.0),
        diagnostics: traj.summary,
    };
    write_json(&cfg.output.join("summary.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(summary.diagnostics.all_finite)
}

fn print_criteria(criteria: &[CriterionOutcome]) -> bool {
    for c in criteria {
        println!("{}", c.line());
    }
    criteria.iter().all(|c| c.pass)
}

fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    Ok(match cli.command {
        Command::Run(args) => run_single(&args)?,
        Command::Sweep(o) => {
            print_criteria(&sweep::run_sweep(&o.resolve(ExperimentKind::Sweep)?)?.criteria)
        }
        Command::Mms(o) => {
            print_criteria(&mms::run_mms(&o.resolve(ExperimentKind::Mms)?)?.criteria)
        }
        Command::Layer(o) => {
            print_criteria(&sweep::run_layer(&o.resolve(ExperimentKind::Layer)?)?.criteria)
        }
        Command::VerifyLemma(o) => {
            let report = lemma::run_lemma(&o.resolve(ExperimentKind::Lemma)?)?;
            for v in &report.verdicts {
                println!("{}", serde_json::to_string(v)?);
            }
            for (seed, err) in &report.errors {
                eprintln!("seed {seed}: {err}");
            }
            print_criteria(&report.criteria)
        }
        Command::Longtime(o) => {
            print_criteria(&longtime::run_longtime(&o.resolve(ExperimentKind::Longtime)?)?.criteria)
        }
        Command::Roundtrip(o) => print_criteria(
            &roundtrip::run_roundtrip(&o.resolve(ExperimentKind::Roundtrip)?)?.criteria,
        ),
        Command::Report { dir } => print_criteria(report::render(&dir)?.criteria()),
    })
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
