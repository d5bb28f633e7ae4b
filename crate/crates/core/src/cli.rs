//! Command-line front end. Each subcommand has a library function returning a
//! serialisable result; [`run`] parses arguments and writes to the given
//! streams.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analytic::QuadratureSpec;
use crate::bounds::{delta_s, delta_v, BoundReport};
use crate::coupling::{coupling_draws, estimate_delta, size_bias_check, CouplingBatch, DeltaEstimate, SizeBiasCheck, Variant};
use crate::error::{Error, Result};
use crate::geometry::ModelParams;
use crate::moments::MomentSet;
use crate::simulate::{run_replicates, ReplicateBatch, VolumeMethod};
use crate::stats::{sandwich_test, SandwichOptions, SandwichReport, Statistic};

/// Overrides `--parallelism` when set.
pub const THREADS_ENV: &str = "COVERAGE_STEIN_THREADS";

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance block embedded in every JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub params: Option<ModelParams>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str, params: Option<ModelParams>, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            params,
            seed,
            tool_version: TOOL_VERSION.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<T> {
    pub manifest: RunManifest,
    pub result: T,
}

/// One JSON line.
pub fn to_json_line<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::Io(e.to_string()))
}

/// `x` to five significant figures, as in `8.6211e5`.
pub fn five_significant(x: f64) -> String {
    format!("{x:.4e}")
}

/// `x > 0` rounded up to `digits` significant figures, so that a rounded
/// upper bound is still an upper bound.
pub fn round_up_significant(x: f64, digits: i32) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(x.log10().floor() as i32 - (digits - 1));
    // Values already on the grid (up to representation error) stay put.
    let units = (x / scale * (1.0 - 4.0 * f64::EPSILON)).ceil();
    units * scale
}

/// Upper bound `x` to five significant figures, rounded up.
pub fn five_significant_up(x: f64) -> String {
    five_significant(round_up_significant(x, 5))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub d: usize,
    pub delta_v: f64,
    pub delta_s: f64,
    /// Rounded up to five significant figures.
    pub delta_v_5sf: String,
    pub delta_s_5sf: String,
}

pub fn cmd_table(rho: f64, dims: &[usize], tolerance: f64) -> Result<Vec<TableRow>> {
    let spec = QuadratureSpec::new(tolerance, tolerance, QuadratureSpec::default().max_subdivisions)?;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain(format!("rho must be positive, got {rho}")));
    }
    dims.iter()
        .map(|&d| {
            if !(1..=3).contains(&d) {
                return Err(Error::UnsupportedDimension(d));
            }
            let dv = delta_v(rho, d, &spec)?;
            let ds = delta_s(rho, d, &spec)?;
            Ok(TableRow {
                d,
                delta_v: dv,
                delta_s: ds,
                delta_v_5sf: five_significant_up(dv),
                delta_s_5sf: five_significant_up(ds),
            })
        })
        .collect()
}

pub fn render_table(rho: f64, rows: &[TableRow]) -> String {
    let mut out = format!("rho = {rho}\n{:>3}  {:>12}  {:>12}\n", "d", "delta_V", "delta_S");
    for r in rows {
        out.push_str(&format!("{:>3}  {:>12}  {:>12}\n", r.d, r.delta_v_5sf, r.delta_s_5sf));
    }
    out
}

pub fn cmd_bounds(params: &ModelParams, spec: &QuadratureSpec) -> Result<BoundReport> {
    BoundReport::compute(params, spec)
}

pub fn cmd_moments(params: &ModelParams, spec: &QuadratureSpec) -> Result<MomentSet> {
    MomentSet::compute(params, spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub replicates: usize,
    pub volume_method: VolumeMethod,
    pub sandwich_v: Option<SandwichReport>,
    pub sandwich_s: Option<SandwichReport>,
    /// Why a sandwich report is missing.
    pub skipped: Vec<String>,
}

pub fn cmd_simulate(
    params: &ModelParams,
    replicates: usize,
    seed: u64,
    parallelism: usize,
    method: VolumeMethod,
    options: &SandwichOptions,
) -> Result<(ReplicateBatch, SimulateSummary)> {
    let batch = run_replicates(params, replicates, seed, method, parallelism)?;
    let mut skipped = Vec::new();
    let mut report = |which, allowed: std::result::Result<(), String>| match allowed {
        Err(why) => {
            skipped.push(why);
            Ok(None)
        }
        Ok(()) => match sandwich_test(params, &batch, which, options) {
            Ok(r) => Ok(Some(r)),
            Err(Error::Validity(v)) => {
                skipped.push(format!("{which:?}: requires {v}"));
                Ok(None)
            }
            Err(e) => Err(e),
        },
    };
    let sandwich_v = report(
        Statistic::V,
        if method.is_exact() { Ok(()) } else { Err("V: Kolmogorov distance needs an exact volume mode".into()) },
    )?;
    let sandwich_s = report(
        Statistic::S,
        if params.d <= 3 { Ok(()) } else { Err(format!("S: no packing constant for d = {}", params.d)) },
    )?;
    Ok((
        batch,
        SimulateSummary {
            replicates,
            volume_method: method,
            sandwich_v,
            sandwich_s,
            skipped,
        },
    ))
}

pub fn cmd_couple(
    params: &ModelParams,
    variant: Variant,
    draws: usize,
    seed: u64,
    method: VolumeMethod,
) -> Result<(CouplingBatch, SizeBiasCheck)> {
    let batch = coupling_draws(params, variant, draws, seed, method)?;
    let check = size_bias_check(&batch.ys(), &batch.y_primes(), |y| y, 4.0)?;
    Ok((batch, check))
}

pub fn cmd_delta(params: &ModelParams, variant: Variant, outer: usize, inner: usize, seed: u64) -> Result<DeltaEstimate> {
    estimate_delta(params, variant, outer, inner, seed)
}

#[derive(Debug, Parser)]
#[command(name = "coverage-stein", version, about = "Coverage and isolated balls on the flat torus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Asymptotic constants delta_V and delta_S per dimension.
    Table {
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
        /// Emit JSON instead of the text table.
        #[arg(long)]
        json: bool,
    },
    /// Finite-n and limiting bounds as JSON.
    Bounds {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
    },
    /// Exact means and variances as JSON.
    Moments {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
    },
    /// Replicate batch as CSV and the sandwich reports as JSON.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "replicates", short = 'R', default_value_t = 1000)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        volume: VolumeArgs,
        #[arg(long, default_value_t = 0.8)]
        lower_factor: f64,
    },
    /// Size-biased coupling draws as CSV and the identity check as JSON.
    Couple {
        #[arg(long)]
        variant: VariantArg,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        volume: VolumeArgs,
    },
    /// Nested estimate of the conditional-variance term as JSON.
    Delta {
        #[arg(long)]
        variant: VariantArg,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 400)]
        outer: usize,
        #[arg(long, default_value_t = 400)]
        inner: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(short, long)]
    pub d: usize,
    #[arg(short, long)]
    pub n: u64,
    #[arg(long)]
    pub rho: f64,
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.d, self.n, self.rho)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VolumeMode {
    Auto,
    #[value(name = "exact-1d")]
    Exact1d,
    #[value(name = "exact-2d")]
    Exact2d,
    #[value(name = "monte-carlo")]
    MonteCarlo,
}

#[derive(Debug, Args)]
pub struct VolumeArgs {
    #[arg(long, value_enum, default_value_t = VolumeMode::Auto)]
    pub volume_method: VolumeMode,
    #[arg(long, default_value_t = 1_000_000)]
    pub mc_samples: u64,
}

impl VolumeArgs {
    fn method(&self, d: usize) -> VolumeMethod {
        match self.volume_method {
            VolumeMode::Auto => match VolumeMethod::auto(d) {
                VolumeMethod::MonteCarlo { seed, .. } => VolumeMethod::MonteCarlo {
                    samples: self.mc_samples,
                    seed,
                },
                exact => exact,
            },
            VolumeMode::Exact1d => VolumeMethod::Exact1d,
            VolumeMode::Exact2d => VolumeMethod::Exact2d,
            VolumeMode::MonteCarlo => VolumeMethod::MonteCarlo {
                samples: self.mc_samples,
                seed: 0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    #[value(name = "V", alias = "v")]
    V,
    #[value(name = "W", alias = "w")]
    W,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::V => Variant::V,
            VariantArg::W => Variant::W,
        }
    }
}

/// Thread count: the environment override, then the flag, then all cores.
pub fn resolve_parallelism(flag: Option<usize>) -> Result<usize> {
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        return match raw.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(t),
            _ => Err(Error::domain(format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))),
        };
    }
    match flag {
        Some(0) => Err(Error::domain("--parallelism must be at least 1")),
        Some(t) => Ok(t),
        None => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn in_pool<T: Send>(threads: usize, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Io(e.to_string()))?
        .install(job)
}

fn write_csv_to(csv: &Option<PathBuf>, out: &mut dyn Write, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match csv {
        Some(path) => {
            let mut file = BufWriter::new(File::create(path)?);
            body(&mut file)?;
            file.flush()?;
            Ok(())
        }
        None => body(out),
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, manifest: RunManifest, result: T) -> Result<()> {
    writeln!(out, "{}", to_json_line(&Document { manifest, result })?)?;
    Ok(())
}

fn warn_invalid(params: &ModelParams, err: &mut dyn Write) -> Result<()> {
    for check in [ModelParams::require_theorem_v, ModelParams::require_theorem_s] {
        if let Err(e) = check(params) {
            writeln!(err, "warning: {e}")?;
        }
    }
    Ok(())
}

/// Executes a parsed command line.
pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Table { rho, dims, tolerance, json } => {
            let rows = cmd_table(rho, &dims, tolerance)?;
            if json {
                emit(out, RunManifest::new("table", None, None), rows)?;
            } else {
                write!(out, "{}", render_table(rho, &rows))?;
            }
        }
        Command::Bounds { model, tolerance } => {
            let params = model.params()?;
            let spec = QuadratureSpec::new(tolerance, tolerance, QuadratureSpec::default().max_subdivisions)?;
            let report = cmd_bounds(&params, &spec)?;
            warn_invalid(&params, err)?;
            emit(out, RunManifest::new("bounds", Some(params), None), report)?;
        }
        Command::Moments { model, tolerance } => {
            let params = model.params()?;
            let spec = QuadratureSpec::new(tolerance, tolerance, QuadratureSpec::default().max_subdivisions)?;
            emit(out, RunManifest::new("moments", Some(params), None), cmd_moments(&params, &spec)?)?;
        }
        Command::Simulate {
            model,
            replicates,
            seed,
            run,
            volume,
            lower_factor,
        } => {
            let params = model.params()?;
            let threads = resolve_parallelism(run.parallelism)?;
            let options = SandwichOptions {
                lower_factor,
                ..SandwichOptions::default()
            };
            let (batch, summary) = cmd_simulate(&params, replicates, seed, threads, volume.method(params.d), &options)?;
            for why in &summary.skipped {
                writeln!(err, "skipped {why}")?;
            }
            write_csv_to(&run.csv, out, |w| batch.write_csv(w))?;
            emit(out, RunManifest::new("simulate", Some(params), Some(seed)), summary)?;
        }
        Command::Couple {
            variant,
            model,
            draws,
            seed,
            run,
            volume,
        } => {
            let params = model.params()?;
            let threads = resolve_parallelism(run.parallelism)?;
            let method = volume.method(params.d);
            let (batch, check) = in_pool(threads, || cmd_couple(&params, variant.into(), draws, seed, method))?;
            write_csv_to(&run.csv, out, |w| batch.write_csv(w))?;
            emit(out, RunManifest::new("couple", Some(params), Some(seed)), check)?;
        }
        Command::Delta {
            variant,
            model,
            outer,
            inner,
            seed,
            run,
        } => {
            let params = model.params()?;
            let threads = resolve_parallelism(run.parallelism)?;
            let est = in_pool(threads, || cmd_delta(&params, variant.into(), outer, inner, seed))?;
            emit(out, RunManifest::new("delta", Some(params), Some(seed)), est)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Parses `args` (including the program name) and runs. Returns the process
/// exit code: 0 on success, 2 for usage and domain errors, 3 when a validity
/// condition fails, 4 for numerical failures.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { 2 } else {
                let _ = write!(out, "{}", e.render());
                0
            };
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
