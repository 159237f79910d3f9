mod config;

use clap::{Args, Parser, Subcommand};
use config::{apply_set, read_table, resolve, Resolved};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tkz::apps::experiments::{DeblurSpec, Experiment, InpaintSpec, SparseSpec, TensorSpec, VideoSpec};
use tkz::apps::{write_pgm, PgmFormat};
use tkz::verify::{run_suite, SuiteOptions};

#[derive(Parser)]
#[command(name = "tkz", version, about = "Regularized Kaczmarz experiments on vectors, matrices and tensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sparse vector recovery from Gaussian measurements.
    Sparse(RunArgs),
    /// Checkerboard inpainting with nuclear-norm regularization.
    Inpaint(RunArgs),
    /// Low tubal-rank tensor recovery.
    Tensor(RunArgs),
    /// Single-image deconvolution.
    Deblur(RunArgs),
    /// Deconvolution of a frame sequence.
    Video(RunArgs),
    /// Checks the t-product and thresholding identities on random tensors.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with optional `seed`, `[problem]` and `[solver]` entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory; `tkz-runs/<experiment>` by default.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override one entry, e.g. `solver.step=2` or `problem.m=100`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Random instances per identity.
    #[arg(long, default_value_t = tkz::verify::DEFAULT_INSTANCES)]
    instances: usize,
    /// Break the inverse FFT scaling to confirm the suite notices.
    #[arg(long, hide = true)]
    corrupt_fft: bool,
}

enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
    Check(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) | Failure::Check(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn record(&self) -> serde_json::Value {
        let (kind, message) = match self {
            Failure::Config(m) => ("config", m),
            Failure::Numerical(m) => ("numerical", m),
            Failure::Io(m) => ("io", m),
            Failure::Check(m) => ("check", m),
        };
        json!({ "error": kind, "message": message, "exit_code": self.code() })
    }
}

impl From<tkz::Error> for Failure {
    fn from(e: tkz::Error) -> Self {
        match e {
            e if e.is_numerical() => Failure::Numerical(e.to_string()),
            tkz::Error::Io(e) => Failure::Io(e.to_string()),
            e => Failure::Config(e.to_string()),
        }
    }
}

/// Writes to stdout, ignoring a closed pipe; the exit code still reports the run.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn io(e: impl std::fmt::Display) -> Failure {
    Failure::Io(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sparse(a) => run::<SparseSpec>("sparse", a, Experiment::Sparse),
        Command::Inpaint(a) => run::<InpaintSpec>("inpaint", a, Experiment::Inpaint),
        Command::Tensor(a) => run::<TensorSpec>("tensor", a, Experiment::Tensor),
        Command::Deblur(a) => run::<DeblurSpec>("deblur", a, Experiment::Deblur),
        Command::Video(a) => run::<VideoSpec>("video", a, Experiment::Video),
        Command::Selftest(a) => selftest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.record());
            ExitCode::from(f.code())
        }
    }
}

fn run<P>(name: &str, args: RunArgs, wrap: fn(P) -> Experiment) -> Result<(), Failure>
where
    P: DeserializeOwned + Serialize + Default + Clone,
{
    let mut table = match &args.config {
        Some(path) => read_table(path).map_err(Failure::Config)?,
        None => toml::Table::new(),
    };
    for s in &args.sets {
        apply_set(&mut table, s).map_err(Failure::Config)?;
    }
    let resolved: Resolved<P> =
        resolve(name, table, args.seed, |p: &P| wrap(p.clone()).default_solver()).map_err(Failure::Config)?;
    let out = args.out.unwrap_or_else(|| Path::new("tkz-runs").join(name));
    std::fs::create_dir_all(&out).map_err(io)?;
    let config_text = toml::to_string(&resolved).map_err(io)?;
    std::fs::write(out.join("config.toml"), config_text).map_err(io)?;

    let experiment = wrap(resolved.problem.clone());
    let outcome = experiment.run(&resolved.solver, resolved.seed)?;
    for w in &outcome.trace.warnings {
        eprintln!("warning: {w}");
    }

    let mut files = vec!["config.toml".to_string(), "trace.csv".to_string(), "manifest.json".to_string()];
    outcome.trace.write_csv(BufWriter::new(File::create(out.join("trace.csv")).map_err(io)?)).map_err(io)?;
    for (image_name, img) in &outcome.images {
        let file = format!("{image_name}.pgm");
        write_pgm(img, 255, PgmFormat::Binary, BufWriter::new(File::create(out.join(&file)).map_err(io)?))?;
        files.push(file);
    }
    let metrics: serde_json::Map<String, serde_json::Value> =
        outcome.metrics.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    let manifest = json!({
        "experiment": name,
        "seed": resolved.seed,
        "config": resolved,
        "stop_reason": outcome.trace.stop,
        "iterations": outcome.trace.iterations,
        "wall_seconds": outcome.trace.wall_seconds,
        "noise_level": outcome.trace.noise_level,
        "warnings": outcome.trace.warnings,
        "metrics": metrics,
        "files": files,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(io)?;
    std::fs::write(out.join("manifest.json"), text + "\n").map_err(io)?;
    emit(&format!("{name} seed={} {}\n", resolved.seed, outcome.summary()));
    Ok(())
}

fn selftest(args: SelftestArgs) -> Result<(), Failure> {
    let opts = SuiteOptions {
        seed: args.seed.unwrap_or(tkz::random::DEFAULT_SEED),
        instances: args.instances,
        corrupt_fft: args.corrupt_fft,
    };
    let checks = run_suite(opts)?;
    let mut table = format!("{:<6} {:<28} {:>9} {:>12}\n", "status", "identity", "instances", "max_error");
    for c in &checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        table += &format!("{status:<6} {:<28} {:>9} {:>12.3e}\n", c.name, c.instances, c.error);
    }
    emit(&table);
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("failed: {}", failed.join(", "))))
    }
}
