//! Command-line front end: single runs, sweeps, invariant suites and program
//! dumps.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use starisac::channel::sample_channels;
use starisac::conic::{BarrierSolver, ClarabelSolver, ConicSolver, SolverSettings};
use starisac::driver::{program_at, run_ao_with, AoOptions, HalfStep};
use starisac::harness::{
    figure_protocols, run_selftests, run_sweep, selftest, Figure, RunKey, RunRecord, RunnerOptions, Scale, Statistic,
    SuiteOutcome, SweepSpec,
};
use starisac::scenario::{derive_run_seed, sample_geometry, SystemConfig};
use starisac::subproblems::{sensing_only, Baseline};

#[derive(Parser)]
#[command(name = "starisac", version, about = "Fairness-aware secure ISAC with STAR-RIS and rate splitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one channel realization and print its run record as JSON.
    Run(RunArgs),
    /// Run a parameter sweep and write the aggregate CSV plus per-run JSONL.
    Sweep(SweepArgs),
    /// Run the invariant suites; exits nonzero iff one fails.
    Selftest(SelftestArgs),
    /// Print the canonical form of one W- or V-step program.
    DumpProgram(DumpArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Clarabel,
    /// Dense log-barrier reference; slow, meant for small programs.
    Barrier,
}

impl Backend {
    fn solver(self) -> Box<dyn ConicSolver + Sync> {
        match self {
            Backend::Clarabel => Box::new(ClarabelSolver),
            Backend::Barrier => Box::new(BarrierSolver::default()),
        }
    }
}

#[derive(Args)]
struct Realization {
    /// TOML config file or preset name (`desk`, `paper-default`).
    #[arg(long, default_value = "paper-default")]
    config: String,
    /// Run seed; defaults to the seed of run 0 under the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "rsma-star-opt")]
    baseline: Baseline,
    #[arg(long, value_enum, default_value = "clarabel")]
    solver: Backend,
}

impl Realization {
    fn config(&self) -> Result<SystemConfig> {
        let path = Path::new(&self.config);
        if path.exists() {
            SystemConfig::load(path).with_context(|| format!("loading {}", path.display()))
        } else {
            SystemConfig::preset(&self.config)
                .with_context(|| format!("{} is neither a file nor a preset", self.config))
        }
    }

    fn seed(&self, cfg: &SystemConfig) -> u64 {
        self.seed.unwrap_or_else(|| derive_run_seed(cfg.master_seed, 0))
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    realization: Realization,
    /// Stopping tolerance on the tracked objective.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep spec in TOML.
    #[arg(long, conflicts_with = "figure", required_unless_present = "figure")]
    spec: Option<PathBuf>,
    /// Built-in figure protocol.
    #[arg(long)]
    figure: Option<Figure>,
    #[arg(long, default_value = "desk", requires = "figure")]
    scale: Scale,
    /// Overrides the number of channel realizations per point.
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory; the sweep file's `out_dir`, else `results`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    master_seed: Option<u64>,
    /// Report medians instead of means.
    #[arg(long)]
    median: bool,
    /// Keep every run at the run-0 user placement.
    #[arg(long)]
    freeze_geometry: bool,
    #[arg(long, value_enum, default_value = "clarabel")]
    solver: Backend,
}

#[derive(Args)]
struct SelftestArgs {
    /// Reduced suite sizes.
    #[arg(long)]
    quick: bool,
    /// Print outcomes as JSON lines.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    realization: Realization,
    #[arg(long, default_value = "w")]
    step: HalfStep,
    /// Full iterations to run before building the program.
    #[arg(long, default_value_t = 0)]
    iterations: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(args: RunArgs) -> Result<()> {
    let r = &args.realization;
    let mut cfg = r.config()?;
    if let Some(tol) = args.tol {
        cfg.tol = tol;
    }
    if let Some(n) = args.max_iter {
        cfg.max_iters = n;
    }
    cfg.validate()?;
    let seed = r.seed(&cfg);
    let solver = r.solver.solver();
    let opts = AoOptions::default();
    let channels = sample_channels(&cfg, &sample_geometry(&cfg, seed)?, seed)?;
    let consts = sensing_only(&channels, &cfg, solver.as_ref(), &opts.settings)?;
    let trace = run_ao_with(&channels, &cfg, &consts, r.baseline, seed, solver.as_ref(), &opts)?;
    let key =
        RunKey { sweep: "run", param: "power_dbm", value: cfg.power_budget_dbm, run_index: 0, seed, config: &cfg };
    let record = RunRecord::from_trace(&key, &trace);
    eprintln!(
        "{} seed {seed}: {:?} after {} iterations, omega_hat {:.6} bit/s/Hz, feasible {}",
        r.baseline,
        record.status,
        record.iterations,
        trace.omega_hat(),
        record.feasible
    );
    emit(&(serde_json::to_string(&record)? + "\n"), args.out.as_deref())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut spec = match (&args.spec, args.figure) {
        (Some(path), _) => SweepSpec::load(path).with_context(|| format!("loading {}", path.display()))?,
        (None, Some(fig)) => figure_protocols(fig, args.scale),
        (None, None) => bail!("either --spec or --figure is required"),
    };
    if let Some(runs) = args.runs {
        spec.runs = runs;
    }
    if let Some(seed) = args.master_seed {
        spec.master_seed = seed;
    }
    if args.median {
        spec.statistic = Statistic::Median;
    }
    spec.freeze_geometry |= args.freeze_geometry;
    spec.validate()?;
    let dir = args.out.clone().or_else(|| spec.out_dir.clone()).unwrap_or_else(|| PathBuf::from("results"));
    let solver = args.solver.solver();
    let opts = RunnerOptions { jobs: args.jobs, ..Default::default() };
    let output = run_sweep(&spec, solver.as_ref(), &opts)?;
    println!(
        "{:<40} {:>8} {:<16} {:>10} {:>9} {:>7} {:>5}",
        "param", "value", "baseline", "omega", "stderr", "iters", "excl"
    );
    for row in &output.rows {
        println!(
            "{:<40} {:>8} {:<16} {:>10.4} {:>9.4} {:>7.1} {:>2}/{}",
            row.param,
            row.value,
            row.baseline.to_string(),
            row.mean_omega,
            row.stderr_omega,
            row.mean_iters,
            row.n_infeasible,
            row.n_runs
        );
    }
    for path in output.write(&dir)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn report(outcomes: &[SuiteOutcome], json: bool) -> Result<bool> {
    for o in outcomes {
        if json {
            println!("{}", serde_json::to_string(o)?);
        } else {
            let verdict = if o.passed { "PASS" } else { "FAIL" };
            println!("[{verdict}] {} ({:.1}s): {}", o.name, o.wall_time_s, o.detail);
        }
    }
    Ok(outcomes.iter().all(|o| o.passed))
}

fn selftests(args: SelftestArgs) -> Result<bool> {
    let settings = SolverSettings::default();
    let outcomes = if args.quick {
        vec![
            selftest::surrogate_suite(10, 100),
            selftest::sensing_suite(&ClarabelSolver, &settings),
            selftest::tight_expansion_suite(&ClarabelSolver, &settings, 2),
            selftest::ao_smoke_suite(&ClarabelSolver, &settings),
        ]
    } else {
        run_selftests(&ClarabelSolver, &settings)
    };
    report(&outcomes, args.json)
}

fn dump(args: DumpArgs) -> Result<()> {
    let r = &args.realization;
    let cfg = r.config()?;
    let seed = r.seed(&cfg);
    let solver = r.solver.solver();
    let opts = AoOptions::default();
    let channels = sample_channels(&cfg, &sample_geometry(&cfg, seed)?, seed)?;
    let consts = sensing_only(&channels, &cfg, solver.as_ref(), &opts.settings)?;
    let step =
        program_at(&channels, &cfg, &consts, r.baseline, seed, args.step, args.iterations, solver.as_ref(), &opts)?;
    emit(&step.program.canonicalize()?.dump(), args.out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a).map(|_| true),
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::Selftest(a) => selftests(a),
        Command::DumpProgram(a) => dump(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
