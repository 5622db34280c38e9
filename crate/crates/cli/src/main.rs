mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rov_core::calibrate::{
    aggregate_over_limit, calibrate_gbm, calibrate_mean_reverting, read_load_csv, read_price_csv,
    AggregateOptions, Bucket, Power,
};
use rov_core::config::ScenarioConfig;
use rov_core::scenario::{compare_prepared, prepare, run_sensitivity, simulate, value_prepared, SweepSpec};
use rov_core::Error;

use manifest::{digest, now, RunManifest};

#[derive(Parser)]
#[command(name = "rov", version, about = "Real options valuation of PV-battery versus diesel investment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit demand and diesel price processes to historical data.
    Calibrate(CalibrateArgs),
    /// Simulate demand, diesel price and PV-battery cost paths.
    Simulate(RunArgs),
    /// Value the compound deferral and expansion options.
    Value(ValueArgs),
    /// Revalue under swept parameter values on a common seed.
    Sensitivity(SensitivityArgs),
}

#[derive(clap::Args)]
struct CalibrateArgs {
    /// Load CSV with a `# units: MVA|kW` header and `timestamp,power` rows.
    #[arg(long)]
    load: PathBuf,
    /// Transformer limit with unit, e.g. `35MVA`.
    #[arg(long)]
    thermal_limit: Power,
    /// Diesel price CSV with `timestamp,price` rows.
    #[arg(long)]
    prices: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "monthly")]
    bucket: Bucket,
    /// Hours per day of peak exposure used to turn energy into capacity.
    #[arg(long, default_value_t = 4.0)]
    peak_hours_per_day: f64,
    /// Years between price observations; inferred from timestamps if absent.
    #[arg(long)]
    price_dt: Option<f64>,
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON configuration; the built-in benchmark when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `run.n_paths`.
    #[arg(long)]
    paths: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(clap::Args)]
struct ValueArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Also value the deferral option without the expansion option.
    #[arg(long)]
    standalone: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(clap::Args)]
struct SensitivityArgs {
    #[command(flatten)]
    run: RunArgs,
    /// JSON file `{"sweeps": [{"parameter": "mu_d", "values": [0.03]}]}`.
    #[arg(long)]
    sweep: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::NonReverting(_) | Error::InsufficientData { .. } => 3,
            Error::Numeric(_) => 4,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn input_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    }
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        message: format!("cannot write {}: {e}", path.display()),
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| input_error(path, e))
}

struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| output_error(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> CliResult<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| output_error(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| output_error(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn finish(self, mut manifest: RunManifest) -> CliResult<()> {
        manifest.outputs = self.written;
        let path = manifest.finish(&self.dir).map_err(|e| output_error(&self.dir, e))?;
        eprintln!("wrote {}", path.display());
        Ok(())
    }
}

/// Loads, overrides and validates a configuration; returns it resolved.
fn load_config(args: &RunArgs) -> CliResult<ScenarioConfig> {
    let mut cfg = match &args.config {
        Some(p) => ScenarioConfig::from_json(&read_text(p)?).map_err(|e| Failure {
            code: 2,
            message: format!("{}: {e}", p.display()),
        })?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    if let Some(n) = args.paths {
        cfg.run.n_paths = n;
    }
    let violations = cfg.violations();
    if !violations.is_empty() {
        let mut message = String::from("invalid configuration:");
        for v in violations {
            message.push_str("\n  - ");
            message.push_str(&v);
        }
        return Err(Failure { code: 2, message });
    }
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(cfg.resolved()?)
}

fn config_digest(cfg: &ScenarioConfig) -> CliResult<String> {
    let text = serde_json::to_string(cfg).map_err(Error::from)?;
    Ok(digest(text.as_bytes()))
}

fn json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(value).map_err(Error::from)? + "\n")
}

fn cmd_calibrate(args: &CalibrateArgs) -> CliResult<()> {
    let started = now();
    let load_bytes = fs::read(&args.load).map_err(|e| input_error(&args.load, e))?;
    let price_bytes = fs::read(&args.prices).map_err(|e| input_error(&args.prices, e))?;
    let series = read_load_csv(load_bytes.as_slice()).map_err(|e| input_error(&args.load, e))?;
    let options = AggregateOptions {
        bucket: args.bucket,
        ..AggregateOptions::default()
    };
    let over = aggregate_over_limit(&series, args.thermal_limit, options)?;
    if over.excluded_days > 0 {
        eprintln!("warning: {} day(s) excluded for gaps in the load data", over.excluded_days);
    }
    let capacity = over.capacity_kw(args.peak_hours_per_day)?;
    let positive: Vec<f64> = capacity.iter().copied().filter(|c| *c > 0.0).collect();
    let dropped = capacity.len() - positive.len();
    let bucket_years = match args.bucket {
        Bucket::Daily => 1.0 / 365.25,
        Bucket::Monthly => 1.0 / 12.0,
    };
    let mut demand = calibrate_gbm(&positive, bucket_years)?;
    if dropped > 0 {
        demand
            .warnings
            .push(format!("{dropped} bucket(s) without over-limit demand left out of the fit"));
    }

    let prices = read_price_csv(price_bytes.as_slice()).map_err(|e| input_error(&args.prices, e))?;
    let price_dt = match args.price_dt {
        Some(dt) => dt,
        None => modal_spacing_years(&prices).ok_or_else(|| Failure {
            code: 2,
            message: format!("{}: need at least two price observations", args.prices.display()),
        })?,
    };
    let values: Vec<f64> = prices.iter().map(|(_, v)| *v).collect();
    let fuel = calibrate_mean_reverting(&values, price_dt)?;

    for w in demand.warnings.iter().chain(&fuel.warnings) {
        eprintln!("warning: {w}");
    }
    let mut out = Outputs::new(&args.out)?;
    out.write("demand_calibration.json", demand.to_json()? + "\n")?;
    out.write("fuel_calibration.json", fuel.to_json()? + "\n")?;

    let mut inputs = load_bytes;
    inputs.extend_from_slice(&price_bytes);
    inputs.extend_from_slice(
        format!(
            "{}|{:?}|{}|{:?}",
            args.thermal_limit.value, args.bucket, args.peak_hours_per_day, args.price_dt
        )
        .as_bytes(),
    );
    out.finish(RunManifest::new("calibrate", digest(&inputs), None, started))
}

fn modal_spacing_years(prices: &[(chrono::NaiveDateTime, f64)]) -> Option<f64> {
    let mut gaps: Vec<i64> = prices
        .windows(2)
        .map(|w| (w[1].0 - w[0].0).num_seconds())
        .collect();
    if gaps.is_empty() {
        return None;
    }
    gaps.sort_unstable();
    let mut best = (gaps[0], 0usize);
    let mut i = 0;
    while i < gaps.len() {
        let j = gaps[i..].iter().take_while(|g| **g == gaps[i]).count();
        if j > best.1 {
            best = (gaps[i], j);
        }
        i += j;
    }
    Some(best.0 as f64 / (365.25 * 86_400.0))
}

fn cmd_simulate(args: &RunArgs) -> CliResult<()> {
    let started = now();
    let cfg = load_config(args)?;
    let set = simulate(&cfg)?;
    let mut out = Outputs::new(&args.out)?;
    for (name, m) in [("demand.csv", &set.demand), ("fuel.csv", &set.fuel), ("pv_cost.csv", &set.pv_cost)] {
        let mut buf = Vec::new();
        m.write_csv(&mut buf)?;
        out.write(name, buf)?;
    }
    if set.fuel.clamp_count() > 0 {
        eprintln!("warning: {} fuel price entries clamped at the floor", set.fuel.clamp_count());
    }
    out.finish(RunManifest::new("simulate", config_digest(&cfg)?, Some(cfg.run.seed), started))
}

fn cmd_value(args: &ValueArgs) -> CliResult<()> {
    let started = now();
    let cfg = load_config(&args.run)?;
    let prep = prepare(&cfg)?;
    let valuation = value_prepared(&prep, cfg.warnings())?;
    let report = &valuation.report;
    let mut out = Outputs::new(&args.run.out)?;
    match args.format {
        Format::Json => out.write("report.json", json(report)?)?,
        Format::Csv => out.write("report.csv", report.table_csv("S1", "Benchmark"))?,
    }
    let mut stops = Vec::new();
    valuation.solution.write_stopping_csv(&mut stops)?;
    out.write("stopping_times.csv", stops)?;
    if args.standalone {
        let paired = compare_prepared(&prep, &valuation.solution)?;
        match args.format {
            Format::Json => out.write("paired.json", json(&paired)?)?,
            Format::Csv => {
                let years: Vec<usize> = paired.compound.frequency.per_year.keys().copied().collect();
                let mut text = String::from("option,value");
                for y in &years {
                    text.push_str(&format!(",year{y}_pct"));
                }
                text.push_str(",never_pct\n");
                for (name, s) in [("standalone", &paired.standalone), ("compound", &paired.compound)] {
                    text.push_str(&format!("{name},{}", s.value));
                    for y in &years {
                        text.push_str(&format!(",{:.1}", 100.0 * s.frequency.at(*y)));
                    }
                    text.push_str(&format!(",{:.1}\n", 100.0 * s.frequency.never));
                }
                out.write("paired.csv", text)?;
            }
        }
    }
    println!(
        "standard NPV {:.0}  option value {:.0}  flexible NPV {:.0}  recommendation: {}",
        report.standard_npv,
        report.option_value,
        report.flexible_npv,
        report.recommendation.as_str()
    );
    out.finish(RunManifest::new("value", config_digest(&cfg)?, Some(cfg.run.seed), started))
}

fn cmd_sensitivity(args: &SensitivityArgs) -> CliResult<()> {
    let started = now();
    let cfg = load_config(&args.run)?;
    let spec = SweepSpec::from_json(&read_text(&args.sweep)?).map_err(|e| input_error(&args.sweep, e))?;
    let result = run_sensitivity(&cfg, &spec.sweeps)?;
    let mut out = Outputs::new(&args.run.out)?;
    for p in &result.points {
        out.write(&format!("reports/{}.json", p.scenario), json(p)?)?;
    }
    out.write("summary.csv", result.table_csv())?;
    out.write("series.csv", result.series_csv())?;
    let mut digest_input = serde_json::to_vec(&cfg).map_err(Error::from)?;
    digest_input.extend(serde_json::to_vec(&spec).map_err(Error::from)?);
    out.finish(RunManifest::new("sensitivity", digest(&digest_input), Some(cfg.run.seed), started))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Value(a) => cmd_value(a),
        Command::Sensitivity(a) => cmd_sensitivity(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
