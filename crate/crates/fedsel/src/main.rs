use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fedsel::config::AppConfig;
use fedsel::error::Error;
use fedsel::experiments::{run_round, summarize, sweep, write_metrics_csv, SweepParameter};
use fedsel::plot::{emit_plot, PlotMetric};
use fedsel::population::{sample_population, write_population_csv, PopulationConfig};
use fedsel::spectrum::{evaluate_policy, train_agent, BaselineKind, PolicyRef};

/// Federated-learning participant selection and spectrum allocation simulator.
#[derive(Parser)]
#[command(name = "fedsel", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; built-in defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV (and SVG) files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override every configured seed (falls back to $FEDSEL_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap for sweep execution.
    #[arg(long)]
    jobs: Option<usize>,
    /// Also write SVG plots next to the CSVs.
    #[arg(long)]
    plots: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the aggregator capacity L_max at fixed N.
    SweepLmax(CommonArgs),
    /// Sweep the device count N at fixed L_max.
    SweepN(CommonArgs),
    /// Train the Q-learning spectrum allocator and write its learning curve.
    SpectrumTrain(CommonArgs),
    /// Train the agent, then evaluate it against the baseline allocators.
    SpectrumEval(CommonArgs),
    /// Sample a device population and write it as CSV.
    GenPopulation(CommonArgs),
    /// Solve a single selection round and print one CSV row per algorithm.
    SolveRound(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::SweepLmax(c)
            | Command::SweepN(c)
            | Command::SpectrumTrain(c)
            | Command::SpectrumEval(c)
            | Command::GenPopulation(c)
            | Command::SolveRound(c) => c,
        }
    }
}

fn effective_seed(args: &CommonArgs) -> Result<Option<u64>, Error> {
    if args.seed.is_some() {
        return Ok(args.seed);
    }
    match std::env::var("FEDSEL_SEED") {
        Ok(v) => v
            .parse::<u64>()
            .map(Some)
            .map_err(|_| Error::Config(format!("FEDSEL_SEED is not a valid u64: {v}"))),
        Err(_) => Ok(None),
    }
}

fn load_config(args: &CommonArgs) -> Result<AppConfig, Error> {
    match &args.config {
        Some(path) => AppConfig::load(path),
        None => Ok(AppConfig::default()),
    }
}

/// Overrides echoed as `#` comment lines at the top of output CSVs.
fn provenance(args: &CommonArgs, seed: Option<u64>) -> Vec<String> {
    let mut lines = Vec::new();
    if let Some(path) = &args.config {
        lines.push(format!("config: {}", path.display()));
    }
    if let Some(s) = seed {
        lines.push(format!("override seed: {s}"));
    }
    lines
}

fn create_out_file(dir: &Path, name: &str) -> Result<BufWriter<File>, Error> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn run_sweep(args: &CommonArgs, param: SweepParameter) -> Result<(), Error> {
    let mut config = load_config(args)?.experiment;
    let seed = effective_seed(args)?;
    if let Some(s) = seed {
        config.seeds = vec![s];
    }
    let rows = sweep(&config, param)?;
    let (csv_name, svg_name, metric, x_label) = match param {
        SweepParameter::LMaxBytes => (
            "sweep_lmax.csv",
            "sweep_lmax.svg",
            PlotMetric::Objective,
            "aggregator capacity L_max (bytes)",
        ),
        SweepParameter::NDevices => (
            "sweep_n.csv",
            "sweep_n.svg",
            PlotMetric::TotalSensedBytes,
            "number of devices N",
        ),
    };
    let mut w = create_out_file(&args.out, csv_name)?;
    write_metrics_csv(&rows, &provenance(args, seed), &mut w)?;
    w.flush()?;
    if args.plots {
        let summary = summarize(&rows)?;
        let mut w = create_out_file(&args.out, svg_name)?;
        emit_plot(&summary, metric, x_label, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn run_solve_round(args: &CommonArgs) -> Result<(), Error> {
    let mut config = load_config(args)?.experiment;
    let seed = effective_seed(args)?;
    if let Some(s) = seed {
        config.population.seed = s;
    }
    let rows = run_round(&config, config.population.seed)?;
    let stdout = std::io::stdout();
    write_metrics_csv(&rows, &provenance(args, seed), stdout.lock())?;
    Ok(())
}

fn run_gen_population(args: &CommonArgs) -> Result<(), Error> {
    let mut config = load_config(args)?.experiment;
    let seed = effective_seed(args)?;
    if let Some(s) = seed {
        config.population.seed = s;
    }
    let pop_config = PopulationConfig {
        ..config.population.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(pop_config.seed);
    let devices = sample_population(&pop_config, &mut rng)?;
    let mut w = create_out_file(&args.out, "population.csv")?;
    write_population_csv(&devices, &mut w)?;
    w.flush()?;
    Ok(())
}

fn run_spectrum_train(args: &CommonArgs) -> Result<(), Error> {
    let mut spectrum = load_config(args)?.spectrum;
    let seed = effective_seed(args)?;
    if let Some(s) = seed {
        spectrum.train_seed = s;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spectrum.train_seed);
    let (_, curve) = train_agent(
        &spectrum.workload,
        spectrum.buckets.clone(),
        spectrum.hyper.clone(),
        &mut rng,
    )?;
    let mut w = create_out_file(&args.out, "learning_curve.csv")?;
    for line in provenance(args, seed) {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "episode,mean_delay_s,violation_rate")?;
    for e in &curve {
        writeln!(w, "{},{},{}", e.episode, e.mean_delay_s, e.violation_rate)?;
    }
    w.flush()?;
    Ok(())
}

fn run_spectrum_eval(args: &CommonArgs) -> Result<(), Error> {
    let mut spectrum = load_config(args)?.spectrum;
    let seed = effective_seed(args)?;
    if let Some(s) = seed {
        spectrum.train_seed = s;
        spectrum.eval_seed = s.wrapping_add(1);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spectrum.train_seed);
    let (policy, _) = train_agent(
        &spectrum.workload,
        spectrum.buckets.clone(),
        spectrum.hyper.clone(),
        &mut rng,
    )?;
    let policies: Vec<(String, PolicyRef<'_>)> = vec![
        ("q_agent".into(), PolicyRef::Agent(&policy)),
        ("min_qos".into(), PolicyRef::Baseline(BaselineKind::MinQos)),
        (
            "equal_share".into(),
            PolicyRef::Baseline(BaselineKind::EqualShare),
        ),
        (
            "greedy_max".into(),
            PolicyRef::Baseline(BaselineKind::GreedyMax),
        ),
    ];
    let mut w = create_out_file(&args.out, "spectrum_eval.csv")?;
    for line in provenance(args, seed) {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "policy,mean_delay_s,violation_rate")?;
    for (name, p) in policies {
        let mut rng = ChaCha8Rng::seed_from_u64(spectrum.eval_seed);
        let stats = evaluate_policy(p, &spectrum.workload, spectrum.eval_episodes, &mut rng)?;
        writeln!(w, "{},{},{}", name, stats.mean_delay_s, stats.violation_rate)?;
    }
    w.flush()?;
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Error> {
    if let Some(jobs) = cli.command.common().jobs {
        // ignore failure: the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match &cli.command {
        Command::SweepLmax(args) => run_sweep(args, SweepParameter::LMaxBytes),
        Command::SweepN(args) => run_sweep(args, SweepParameter::NDevices),
        Command::SpectrumTrain(args) => run_spectrum_train(args),
        Command::SpectrumEval(args) => run_spectrum_eval(args),
        Command::GenPopulation(args) => run_gen_population(args),
        Command::SolveRound(args) => run_solve_round(args),
    }
}

fn main() -> ExitCode {
    // clap exits with code 2 on usage errors
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("fedsel: {err}");
            match err {
                Error::Config(_) | Error::Json(_) => ExitCode::from(3),
                Error::Io(_) => ExitCode::from(4),
                _ => ExitCode::from(1),
            }
        }
    }
}
