//! `epiconsensus`: run trials, sweeps and analytic tables from the shell.
//!
//! Exit codes: 0 on success, 1 for bad arguments or configuration, 2 for
//! file-system errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use epiconsensus::harness::{self, BoundsRow, ConfigReport, ExperimentSpec, TrialTemplate};
use epiconsensus::oracle::{self, BirthDeathChain};
use epiconsensus::{run_trial, Error, Population, Result, Schedule, Variant};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "epiconsensus", version, about = "Writer/eraser consensus simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one trial, or a batch of consecutive seeds.
    Simulate(SimulateArgs),
    /// Run the experiment described by a TOML file and write its artifacts.
    Sweep(SweepArgs),
    /// Closed-form bounds for one population over several strand lengths.
    Bounds(BoundsArgs),
    /// Absorption probabilities and times of the update-step chain.
    Oracle(OracleArgs),
    /// Paired basic-versus-waiting comparison on shared seeds.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
struct PopulationArgs {
    /// Number of 0-writers (and 1-erasers).
    #[arg(long)]
    w0: u32,
    /// Number of 1-writers (and 0-erasers).
    #[arg(long)]
    w1: u32,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Strand length.
    #[arg(long, short)]
    n: usize,
    #[command(flatten)]
    population: PopulationArgs,
    /// Step cap; defaults to 100 n^2.
    #[arg(long)]
    max_big_steps: Option<u64>,
    #[arg(long, default_value = "random-durations", value_parser = parse_schedule)]
    schedule: Schedule,
}

impl ModelArgs {
    fn template(&self, label: &str, variant: Variant) -> Result<TrialTemplate> {
        let population = Population::new(self.population.w0, self.population.w1)?;
        let mut t = TrialTemplate::new(label, self.n, population, variant).with_schedule(self.schedule);
        if let Some(max) = self.max_big_steps {
            t = t.with_max_big_steps(max);
        }
        t.config(0).validate()?;
        Ok(t)
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// naive, basic, waiting, self-stabilizing or active-inactive.
    #[arg(long, default_value = "basic")]
    variant: String,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    k1: Option<u32>,
    #[arg(long)]
    k2: Option<u32>,
    /// Seed of the first trial; trial k uses seed + k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    trials: u32,
    /// Write seed,decision,big_steps rows here.
    #[arg(long)]
    trials_csv: Option<PathBuf>,
    /// Write the per-step census here (single trial only).
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Experiment file.
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(flatten)]
    population: PopulationArgs,
    /// Strand lengths (repeat or comma-separate).
    #[arg(long, short, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    population: PopulationArgs,
    #[arg(long, short)]
    n: usize,
    /// Also write i,absorb_high,expected_steps rows here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 300)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Write seed,basic_steps,waiting_steps rows here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_schedule(s: &str) -> std::result::Result<Schedule, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn stdout_bytes(bytes: &[u8]) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)
        .and_then(|_| out.flush())
        .map_err(|source| Error::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    stdout_bytes(text.as_bytes())
}

fn emit_csv<T: Serialize>(rows: &[T], header: &[&str], path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => harness::write_csv(p, rows, header),
        None => stdout_bytes(&harness::csv_bytes(rows).map_err(|e| Error::Config(e.to_string()))?),
    }
}

#[derive(Serialize)]
struct BatchSummary<'a> {
    label: &'a str,
    n: usize,
    w0: u32,
    w1: u32,
    variant: &'a str,
    schedule: Schedule,
    trials: usize,
    steps: harness::Summary,
    decisions: harness::DecisionFrequencies,
    timeouts: usize,
    validity_violations: usize,
}

impl<'a> From<&'a ConfigReport> for BatchSummary<'a> {
    fn from(c: &'a ConfigReport) -> Self {
        BatchSummary {
            label: &c.label,
            n: c.n,
            w0: c.w0,
            w1: c.w1,
            variant: &c.variant,
            schedule: c.schedule,
            trials: c.trials,
            steps: c.steps,
            decisions: c.decisions,
            timeouts: c.timeouts,
            validity_violations: c.requirements.validity_violations,
        }
    }
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let variant = Variant::from_parts(&args.variant, args.epsilon, args.k1, args.k2)?;
    let template = args.model.template("simulate", variant)?;
    if args.trials == 0 {
        return Err(Error::Config("--trials must be at least 1".into()));
    }
    if args.trajectory.is_some() && args.trials != 1 {
        return Err(Error::Config("--trajectory needs a single trial".into()));
    }
    if args.trials == 1 {
        let record = args.trajectory.is_some();
        let result = run_trial(&template.config(args.seed).with_trajectory(record))?;
        if let (Some(path), Some(traj)) = (&args.trajectory, &result.trajectory) {
            harness::write_csv(path, traj, &harness::TRAJECTORY_HEADER)?;
        }
        if let Some(path) = &args.trials_csv {
            harness::write_csv(path, &[harness::TrialRow::from(&result)], &harness::TRIALS_HEADER)?;
        }
        return print_json(&serde_json::json!({
            "seed": result.seed,
            "decision": result.decision,
            "big_steps": result.big_steps,
            "events": result.events,
        }));
    }
    let seeds: Vec<u64> = (0..u64::from(args.trials)).map(|k| args.seed + k).collect();
    let results = harness::run_batch(&template, &seeds)?;
    let report = ConfigReport::from_results(&template, &results)?;
    if let Some(path) = &args.trials_csv {
        harness::write_csv(path, &report.rows, &harness::TRIALS_HEADER)?;
    }
    print_json(&BatchSummary::from(&report))
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let spec = ExperimentSpec::from_file(&args.config)?;
    let report = harness::run_experiment(&spec)?;
    let written = harness::write_artifacts(&report, &spec.outputs, &args.out_dir)?;
    let mut listing = String::new();
    for p in written {
        listing.push_str(&p.display().to_string());
        listing.push('\n');
    }
    stdout_bytes(listing.as_bytes())
}

fn bounds(args: &BoundsArgs) -> Result<()> {
    let rows = args
        .n
        .iter()
        .map(|&n| BoundsRow::compute(n, args.population.w0, args.population.w1))
        .collect::<Result<Vec<_>>>()?;
    emit_csv(&rows, &[], args.out.as_deref())
}

#[derive(Serialize)]
struct OracleRow {
    i: usize,
    absorb_high: f64,
    expected_steps: f64,
}

fn oracle_table(args: &OracleArgs) -> Result<()> {
    let (w0, w1, n) = (args.population.w0, args.population.w1, args.n);
    let chain = BirthDeathChain::for_writers(w0, w1, n)?;
    let h = oracle::absorption_probs(&chain)?;
    let t = oracle::absorption_times(&chain)?;
    let rows: Vec<OracleRow> = (0..=n)
        .map(|i| OracleRow {
            i,
            absorb_high: h.values[i],
            expected_steps: t.values[i],
        })
        .collect();
    if let Some(path) = &args.csv {
        harness::write_csv(path, &rows, &["i", "absorb_high", "expected_steps"])?;
    }
    let mut text = format!("{:>6}  {:>22}  {:>22}\n", "i", "h_i", "t_i");
    for r in &rows {
        text.push_str(&format!("{:>6}  {:>22.15e}  {:>22.15e}\n", r.i, r.absorb_high, r.expected_steps));
    }
    if w0 != w1 {
        text.push_str(&format!("exact_decision_prob = {}\n", oracle::exact_decision_prob(w0, w1, n)?));
    }
    stdout_bytes(text.as_bytes())
}

fn compare(args: &CompareArgs) -> Result<()> {
    let basic = args.model.template("basic", Variant::Basic)?;
    let waiting = basic.with_variant(Variant::Waiting);
    let cmp = harness::compare_variants(&basic, &waiting, args.trials, args.seed_base)?;
    if let Some(path) = &args.out {
        harness::write_csv(path, &cmp.rows, &harness::COMPARISON_HEADER)?;
    }
    print_json(&serde_json::json!({
        "trials": cmp.rows.len(),
        "mean_basic": cmp.mean_basic,
        "mean_waiting": cmp.mean_waiting,
        "mean_difference": cmp.mean_difference,
        "sign_test": cmp.sign_test,
    }))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Bounds(a) => bounds(a),
        Command::Oracle(a) => oracle_table(a),
        Command::Compare(a) => compare(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
