use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};

use phi_decoder::analysis::{self, CurvePoint, FitOptions, Residuals, FIT_PARAM_NAMES};
use phi_decoder::config::{FileConfig, QRule, RunConfig};
use phi_decoder::engine::{ClockMode, Mode, RateSet, SurvivalRecord};
use phi_decoder::field::{default_height, explicit_field, PhiField};
use phi_decoder::records::{self, CsvTable};
use phi_decoder::rules::SimRng;
use phi_decoder::runner;

#[derive(Parser)]
#[command(name = "phi-decoder", version, about = "Toric code memory under local automaton decoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run survival-time trials and write one JSON record per line.
    Simulate(SimulateArgs),
    /// Summaries of record files.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Write a decoder field for a set of anyons as CSV.
    FieldDump(FieldDumpArgs),
    /// Survival trials of the classical NEC majority automaton.
    Toom(ToomArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Static,
    Sync,
    Async,
    Explicit,
    Toom,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Static => Mode::Static,
            ModeArg::Sync => Mode::Synchronous,
            ModeArg::Async => Mode::Asynchronous,
            ModeArg::Explicit => Mode::Explicit,
            ModeArg::Toom => Mode::Toom,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ClockArg {
    Deterministic,
    Exponential,
}

#[derive(Args)]
struct RunFlags {
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Record file; trials already in it (or its part files) are skipped.
    /// Records go to stdout when neither this nor the config names one.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Suppress the configuration echo and progress on stderr.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML configuration; flags override its keys.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Lattice sizes, comma separated.
    #[arg(long = "sizes", short = 'L', value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Error probabilities, comma separated.
    #[arg(long, short, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    /// Measurement error probability, or `p` to follow the error probability.
    #[arg(long, short)]
    q: Option<QRule>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Field height; default max(4, L/2).
    #[arg(long = "height", short = 'H')]
    height: Option<usize>,
    /// Exponent of the explicit long-range field.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma_x: Option<f64>,
    #[arg(long)]
    gamma_m: Option<f64>,
    #[arg(long)]
    gamma_a: Option<f64>,
    #[arg(long)]
    gamma_base: Option<f64>,
    #[arg(long, value_enum)]
    clock: Option<ClockArg>,
    /// Trials per (L, p) cell.
    #[arg(long, short = 'n')]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Time steps after which a trial is censored.
    #[arg(long)]
    cap: Option<u64>,
    /// Check the logical state every this many time steps.
    #[arg(long)]
    verify_stride: Option<u64>,
    /// Verification runs at most k_ver * L decoding rounds.
    #[arg(long)]
    k_ver: Option<usize>,
    #[arg(long)]
    tau_max: Option<usize>,
    #[command(flatten)]
    run: RunFlags,
}

impl SimulateArgs {
    fn overrides(&self) -> FileConfig {
        let rates = [self.gamma_x, self.gamma_m, self.gamma_a, self.gamma_base]
            .iter()
            .any(Option::is_some)
            .then(|| {
                let d = RateSet::default();
                RateSet {
                    gamma_x: self.gamma_x.unwrap_or(d.gamma_x),
                    gamma_m: self.gamma_m.unwrap_or(d.gamma_m),
                    gamma_a: self.gamma_a.unwrap_or(d.gamma_a),
                    gamma_base: self.gamma_base.unwrap_or(d.gamma_base),
                }
            });
        FileConfig {
            mode: self.mode.map(Mode::from),
            sizes: self.sizes.clone(),
            p: self.p.clone(),
            q: self.q,
            kappa: self.kappa,
            height: self.height,
            alpha: self.alpha,
            rates,
            clock: self.clock.map(|c| match c {
                ClockArg::Deterministic => ClockMode::Deterministic,
                ClockArg::Exponential => ClockMode::Exponential,
            }),
            samples: self.samples,
            seed: self.seed,
            cap: self.cap,
            verify_stride: self.verify_stride,
            k_ver: self.k_ver,
            tau_max: self.tau_max,
            output: self.run.output.clone(),
        }
    }
}

#[derive(Args)]
struct ToomArgs {
    #[arg(long = "sizes", short = 'L', value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    /// Flip probabilities per cell and step, comma separated.
    #[arg(long, short, value_delimiter = ',', required = true)]
    p: Vec<f64>,
    #[arg(long, short = 'n', default_value_t = 100)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1_000_000)]
    cap: u64,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Mean survival per (L, p) cell.
    Curves(CurvesArgs),
    /// Crossings of consecutive sizes with bootstrap intervals.
    Crossings(CrossingsArgs),
    /// Weighted fit of the finite-size scaling law.
    Fit(FitArgs),
}

#[derive(Args)]
struct CurvesArgs {
    #[arg(required = true)]
    records: Vec<PathBuf>,
    /// CSV destination; stdout if absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CrossingsArgs {
    #[arg(required = true)]
    records: Vec<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(required = true)]
    records: Vec<PathBuf>,
    /// Error probabilities to fit, comma separated; all cells if absent.
    #[arg(long, value_delimiter = ',')]
    select: Option<Vec<f64>>,
    /// Fit ln T instead of T.
    #[arg(long)]
    log: bool,
    /// Parametric bootstrap replicates for the p_fit interval.
    #[arg(long, default_value_t = 0)]
    bootstrap: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Starting threshold; defaults to the lowest crossing in the data.
    #[arg(long)]
    p_start: Option<f64>,
    #[arg(long, default_value_t = 500)]
    max_iterations: usize,
    /// CSV of observed and fitted values against the scaling variable.
    #[arg(long)]
    collapse: Option<PathBuf>,
}

#[derive(Args)]
struct FieldDumpArgs {
    #[arg(long = "size", short = 'L')]
    size: usize,
    /// Anyon positions as `x:y`, comma separated.
    #[arg(long, value_delimiter = ',')]
    anyons: Vec<String>,
    /// Random anyon pattern: each site on with this probability.
    #[arg(long, conflicts_with = "anyons")]
    density: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Explicit-field exponent; the automaton field is relaxed when absent.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "height", short = 'H')]
    height: Option<usize>,
    /// Relaxation sweeps of the automaton field.
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let mut file = match &args.config {
                Some(path) => FileConfig::load(path)?,
                None => FileConfig::default(),
            };
            file = file.merge(args.overrides());
            let cfg = RunConfig::from_file_config(file)?;
            simulate(&cfg, &args.run)
        }
        Command::Toom(args) => {
            let cfg = RunConfig::from_file_config(FileConfig {
                mode: Some(Mode::Toom),
                sizes: Some(args.sizes),
                p: Some(args.p),
                samples: Some(args.samples),
                seed: Some(args.seed),
                cap: Some(args.cap),
                output: args.run.output.clone(),
                ..FileConfig::default()
            })?;
            simulate(&cfg, &args.run)
        }
        Command::Analyze(cmd) => analyze(cmd),
        Command::FieldDump(args) => field_dump(&args),
    }
}

fn simulate(cfg: &RunConfig, flags: &RunFlags) -> Result<()> {
    if !flags.quiet {
        eprint!("{}", cfg.describe());
    }
    let stop = AtomicBool::new(false);
    let total = runner::plan(cfg).len();
    let done = AtomicUsize::new(0);
    let progress = |r: &SurvivalRecord| {
        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
        if !flags.quiet {
            eprintln!(
                "[{n}] L={} p={} trial={} T={}{}",
                r.size,
                r.p,
                r.trial,
                r.failure_time,
                if r.censored { " (censored)" } else { "" }
            );
        }
    };
    match &cfg.output {
        Some(path) => {
            let summary = runner::run_batch(cfg, flags.workers, path, &stop, progress)?;
            if !flags.quiet {
                eprintln!(
                    "{} trials in {}: {} resumed, {} run",
                    summary.total,
                    path.display(),
                    summary.resumed,
                    summary.ran
                );
            }
            if summary.total != total {
                bail!("expected {total} trials, merged {}", summary.total);
            }
        }
        None => {
            let records = runner::run_in_memory(cfg, flags.workers);
            let stdout = io::stdout().lock();
            let mut out = BufWriter::new(stdout);
            records::write_header(&mut out, &records::RunHeader::new(cfg.clone()))?;
            records::write_records(&mut out, &records)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(paths: &[PathBuf]) -> Result<Vec<SurvivalRecord>> {
    let set = records::read_all(paths)?;
    if set.records.is_empty() {
        bail!("no records in {}", paths.len());
    }
    Ok(set.records)
}

fn analyze(cmd: AnalyzeCommand) -> Result<()> {
    match cmd {
        AnalyzeCommand::Curves(args) => {
            let points = analysis::estimate_curves(&load(&args.records)?)?;
            let mut table = CsvTable::new(
                sink(args.output.as_deref())?,
                &["L", "p", "mean", "stderr", "median", "n_samples", "censored_fraction"],
            )?;
            for c in &points {
                table.row(&[
                    c.size.to_string(),
                    c.p.to_string(),
                    c.mean.to_string(),
                    c.stderr.to_string(),
                    c.median.to_string(),
                    c.n_samples.to_string(),
                    c.censored_fraction.to_string(),
                ])?;
            }
            table.finish()?.flush()?;
        }
        AnalyzeCommand::Crossings(args) => {
            let records = load(&args.records)?;
            let mut table = CsvTable::new(
                sink(args.output.as_deref())?,
                &["L_small", "L_large", "L_mid", "p_cross", "ci_low", "ci_high", "bootstrap_crossing", "note"],
            )?;
            for (a, b, est) in analysis::crossing_table(&records, args.bootstrap, args.seed) {
                let mid = (a + b) as f64 / 2.0;
                match est {
                    Ok(e) => table.row(&[
                        a.to_string(),
                        b.to_string(),
                        mid.to_string(),
                        e.p_cross.to_string(),
                        e.ci_low.to_string(),
                        e.ci_high.to_string(),
                        format!("{}/{}", e.replicates_crossing, e.replicates),
                        String::new(),
                    ])?,
                    Err(err) => table.row(&[
                        a.to_string(),
                        b.to_string(),
                        mid.to_string(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        err.to_string(),
                    ])?,
                }
            }
            table.finish()?.flush()?;
        }
        AnalyzeCommand::Fit(args) => fit(&args)?,
    }
    Ok(())
}

fn fit(args: &FitArgs) -> Result<()> {
    let records = load(&args.records)?;
    let all = analysis::estimate_curves(&records)?;
    let points: Vec<CurvePoint> = match &args.select {
        Some(ps) => analysis::select_points(&all, ps),
        None => analysis::select_points(&all, &all.iter().map(|c| c.p).collect::<Vec<_>>()),
    };
    let p_start = match args.p_start {
        Some(p) => p,
        None => analysis::crossing_table(&records, 0, args.seed)
            .into_iter()
            .filter_map(|(_, _, e)| e.ok().map(|e| e.p_cross))
            .min_by(f64::total_cmp)
            .context("no crossing in the data to start the fit from; pass --p-start")?,
    };
    let opts = FitOptions {
        residuals: if args.log { Residuals::Log } else { Residuals::Linear },
        max_iterations: args.max_iterations,
        ..FitOptions::default()
    };
    let init = analysis::initial_guess(&points, p_start)?;
    let mut result = analysis::fit_scaling(&points, init, &opts)?;
    if args.bootstrap > 0 {
        let (lo, hi, ok) =
            analysis::bootstrap_p_fit(&points, &result.params, &opts, args.bootstrap, args.seed);
        log::info!("{ok} of {} bootstrap fits converged", args.bootstrap);
        result.p_fit_interval = Some((lo, hi));
    }

    let mut out = io::stdout().lock();
    writeln!(out, "# {} points, {} sizes, start p_fit = {p_start}", points.len(), analysis::sizes(&points).len())?;
    writeln!(out, "# estimates only; a crossing or fit is not proof of a threshold")?;
    writeln!(out, "parameter,value,stderr")?;
    let values = result.params.to_array();
    let errors = result.std_errors();
    for k in 0..7 {
        writeln!(out, "{},{},{}", FIT_PARAM_NAMES[k], values[k], errors[k])?;
    }
    writeln!(out, "chi2,{},", result.chi2)?;
    writeln!(out, "dof,{},", result.dof)?;
    writeln!(out, "iterations,{},", result.iterations)?;
    if let Some((lo, hi)) = result.p_fit_interval {
        writeln!(out, "p_fit_low,{lo},")?;
        writeln!(out, "p_fit_high,{hi},")?;
    }

    if let Some(path) = &args.collapse {
        let mut table = CsvTable::new(
            sink(Some(path))?,
            &["L", "p", "x", "mean", "stderr", "model"],
        )?;
        for c in &points {
            table.row(&[
                c.size.to_string(),
                c.p.to_string(),
                result.params.scaling_variable(c.size, c.p).to_string(),
                c.mean.to_string(),
                c.stderr.to_string(),
                result.params.model(c.size, c.p).to_string(),
            ])?;
        }
        table.finish()?.flush()?;
    }
    Ok(())
}

fn field_dump(args: &FieldDumpArgs) -> Result<()> {
    let l = args.size;
    if l < 2 {
        bail!("invalid value for `size`: need L >= 2");
    }
    let mut sources = vec![false; l * l];
    if let Some(density) = args.density {
        if !(0.0..=1.0).contains(&density) {
            bail!("invalid value for `density`: must lie in [0, 1]");
        }
        let mut rng = SimRng::seed_from_u64(args.seed);
        sources.iter_mut().for_each(|s| *s = rng.random_bool(density));
    }
    for a in &args.anyons {
        let (x, y) = a
            .split_once(':')
            .and_then(|(x, y)| Some((x.trim().parse::<usize>().ok()?, y.trim().parse::<usize>().ok()?)))
            .with_context(|| format!("invalid value for `anyons`: expected x:y, got {a:?}"))?;
        if x >= l || y >= l {
            bail!("invalid value for `anyons`: {a} lies outside the {l}x{l} lattice");
        }
        sources[y * l + x] = true;
    }
    let mut out = sink(args.output.as_deref())?;
    match args.alpha {
        Some(alpha) => {
            let plane = explicit_field(&sources, alpha, l);
            writeln!(out, "x,y,value")?;
            for y in 0..l {
                for x in 0..l {
                    writeln!(out, "{x},{y},{}", plane[y * l + x])?;
                }
            }
        }
        None => {
            let mut field = PhiField::new(l, args.height.unwrap_or_else(|| default_height(l)));
            for _ in 0..args.sweeps {
                field.step(&sources);
            }
            field.write_snapshot(&mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}
