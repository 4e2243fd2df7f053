use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mvrank_core::baselines::{self, DEFAULT_PERMUTATIONS};
use mvrank_core::datagen::{self, ScenarioConfig, DEFAULT_ARM_SIZE};
use mvrank_core::dataset::{parse_dataset, Method, Schema};
use mvrank_core::energy::{
    self, CalibrationCache, CalibrationParams, RankEnergyConfig, ThresholdSource,
    DEFAULT_CALIBRATION_RUNS,
};
use mvrank_core::harness::{self, ExperimentSpec};
use mvrank_core::lds::{self, SequenceKind, DEFAULT_SOBOL_SKIP};

/// Multivariate rank energy tests for multiple endpoints.
#[derive(Parser)]
#[command(name = "mvrank", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a point set as CSV.
    Lds {
        #[arg(long, default_value = "sobol")]
        kind: SequenceKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        /// Seed for the uniform kind.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Leading Sobol points to drop.
        #[arg(long)]
        skip: Option<u64>,
    },
    /// Run a two-sample global test on a dataset and print the outcome as JSON.
    Test(TestArgs),
    /// Estimate rejection thresholds by simulation and print them as JSON.
    Calibrate(CalibrateArgs),
    /// Generate scenario data or run simulation experiments.
    #[command(subcommand)]
    Simulate(SimulateCommand),
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    data: PathBuf,
    /// Endpoint declarations, e.g. `os:time-to-event,hfmse:continuous`.
    #[arg(long)]
    schema: Schema,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "rank-energy")]
    method: Method,
    #[arg(long, default_value = "sobol")]
    sequence: SequenceKind,
    /// Seed for the uniform point-set kind.
    #[arg(long, default_value_t = 0)]
    sequence_seed: u64,
    /// Calibrate the threshold instead of using the built-in table: `runs=N,seed=S`.
    #[arg(long, value_parser = parse_calibration)]
    calibrate: Option<(usize, u64)>,
    /// Calibration cache file consulted and updated with `--calibrate`.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    standardize: bool,
    /// Permutations for the Wittkowski and Finkelstein-Schoenfeld tests.
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    permutations: usize,
    /// Seed for the permutation draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    /// Significance level; repeat to get several thresholds from one simulation.
    #[arg(long, required = true)]
    alpha: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_CALIBRATION_RUNS)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "sobol")]
    kind: SequenceKind,
    #[arg(long, default_value = "calib_cache.json")]
    cache: PathBuf,
    /// Neither read nor write the cache file.
    #[arg(long)]
    no_cache: bool,
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// Write one scenario dataset as CSV.
    Gen {
        #[arg(long)]
        scenario: u8,
        #[arg(long, default_value_t = DEFAULT_ARM_SIZE)]
        m: usize,
        #[arg(long, default_value_t = DEFAULT_ARM_SIZE)]
        n: usize,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 0.3)]
        rho: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment spec and write rejection rates as CSV (plus a JSON sidecar).
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Calibration cache file consulted and updated.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
}

fn parse_calibration(s: &str) -> Result<(usize, u64), String> {
    let (mut runs, mut seed) = (None, None);
    for part in s.split(',') {
        match part.trim().split_once('=') {
            Some(("runs", v)) => runs = Some(v.parse::<usize>().map_err(|e| format!("runs: {e}"))?),
            Some(("seed", v)) => seed = Some(v.parse::<u64>().map_err(|e| format!("seed: {e}"))?),
            _ => return Err(format!("expected runs=N,seed=S, got `{part}`")),
        }
    }
    Ok((runs.unwrap_or(DEFAULT_CALIBRATION_RUNS), seed.unwrap_or(0)))
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn load_cache(path: Option<&PathBuf>) -> anyhow::Result<CalibrationCache> {
    Ok(match path {
        Some(p) => CalibrationCache::load(p)?,
        None => CalibrationCache::new(),
    })
}

fn lds(kind: SequenceKind, n: usize, d: usize, seed: u64, skip: Option<u64>) -> anyhow::Result<()> {
    let ps = match (kind, skip) {
        (SequenceKind::Sobol, Some(skip)) => lds::sobol(n, d, skip)?,
        (SequenceKind::Sobol, None) => lds::sobol(n, d, DEFAULT_SOBOL_SKIP)?,
        (_, Some(_)) => bail!("--skip applies to the sobol kind only"),
        _ => lds::generate(kind, n, d, seed)?,
    };
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    w.write_record((1..=d).map(|k| format!("u{k}")))?;
    for row in ps.points().iter_rows() {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

fn test(args: TestArgs) -> anyhow::Result<()> {
    let data = parse_dataset(&args.data, &args.schema)?;
    let outcome = if args.method == Method::RankEnergy {
        let threshold = match args.calibrate {
            None => ThresholdSource::Table,
            Some((runs, seed)) => {
                let params = CalibrationParams {
                    m: data.m(),
                    n: data.n(),
                    d: data.d(),
                    alpha: args.alpha,
                    runs,
                    kind: args.sequence,
                    seed,
                };
                let mut cache = load_cache(args.cache.as_ref())?;
                let entry = cache.get_or_calibrate(&params)?;
                if let Some(p) = &args.cache {
                    cache.save(p)?;
                }
                ThresholdSource::Entry(entry)
            }
        };
        let config = RankEnergyConfig {
            alpha: args.alpha,
            kind: args.sequence,
            sequence_seed: args.sequence_seed,
            threshold,
            standardize: args.standardize,
        };
        energy::rank_energy_test(&data, &config)?
    } else {
        baselines::baseline_test(&data, args.method, args.alpha, args.permutations, args.seed)?
    };
    print_json(&outcome)
}

fn calibrate(args: CalibrateArgs) -> anyhow::Result<()> {
    let mut cache = if args.no_cache {
        CalibrationCache::new()
    } else {
        CalibrationCache::load(&args.cache)?
    };
    let params: Vec<CalibrationParams> = args
        .alpha
        .iter()
        .map(|&alpha| CalibrationParams {
            m: args.m,
            n: args.n,
            d: args.d,
            alpha,
            runs: args.runs,
            kind: args.kind,
            seed: args.seed,
        })
        .collect();
    for p in &params {
        p.validate()?;
    }
    if params.iter().any(|p| cache.get(p).is_none()) {
        // one simulation serves every requested alpha
        let stats = energy::null_statistics(&params[0])?;
        for p in &params {
            cache.insert(energy::entry_from_null(p, &stats));
        }
    }
    let entries: Vec<_> = params
        .iter()
        .map(|p| cache.get(p).cloned().expect("cached"))
        .collect();
    if !args.no_cache {
        cache.save(&args.cache)?;
    }
    match entries.as_slice() {
        [one] => print_json(one),
        many => print_json(&many),
    }
}

fn simulate(cmd: SimulateCommand) -> anyhow::Result<()> {
    match cmd {
        SimulateCommand::Gen {
            scenario,
            m,
            n,
            r,
            rho,
            seed,
            out,
        } => {
            let cfg = ScenarioConfig {
                scenario,
                m,
                n,
                r,
                rho,
                seed,
            };
            let data = datagen::gen_scenario(&cfg)?;
            let file = std::fs::File::create(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            data.write_csv(std::io::BufWriter::new(file))?;
            print_json(&json!({
                "out": out,
                "schema": data.declared_schema().to_string(),
                "m": data.m(),
                "n": data.n(),
                "censoring_fraction": data.censoring_fraction(),
            }))
        }
        SimulateCommand::Run {
            spec,
            out,
            workers,
            cache,
        } => {
            let text = std::fs::read_to_string(&spec)
                .with_context(|| format!("reading {}", spec.display()))?;
            let spec: ExperimentSpec =
                serde_json::from_str(&text).context("parsing experiment spec")?;
            let Some(out) = out.or_else(|| spec.output.clone()) else {
                bail!("no output path: pass --out or set `output` in the spec");
            };
            let mut calib = load_cache(cache.as_ref())?;
            let records = harness::run_with_workers(&spec, workers, &mut calib)?;
            if let Some(p) = &cache {
                calib.save(p)?;
            }
            harness::emit_results(&records, Some(&spec), &out)?;
            print_json(&json!({
                "out": out,
                "sidecar": harness::sidecar_path(&out),
                "records": records.len(),
            }))
        }
    }
}

fn error_report(err: &anyhow::Error) -> serde_json::Value {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<mvrank_core::error::Error>())
        .map_or("error", |e| e.code());
    json!({
        "error": {
            "kind": kind,
            "message": err.to_string(),
            "causes": err.chain().skip(1).map(|e| e.to_string()).collect::<Vec<_>>(),
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Lds {
            kind,
            n,
            d,
            seed,
            skip,
        } => lds(kind, n, d, seed, skip),
        Command::Test(args) => test(args),
        Command::Calibrate(args) => calibrate(args),
        Command::Simulate(cmd) => simulate(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_report(&err));
            ExitCode::FAILURE
        }
    }
}
