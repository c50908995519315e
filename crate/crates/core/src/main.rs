use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use boxverify::cli::{run_batch, validate_ce, verify, write_csv, BatchOptions, VerifyOptions};
use boxverify::optimizer::OptConfig;

/// Sampling-based verification of feed-forward ONNX networks against VNNLIB
/// properties.
#[derive(Parser)]
#[command(name = "boxverify", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify one (model, property) pair; prints holds, violated or unknown.
    Verify {
        model: PathBuf,
        spec: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        /// Where to write the counterexample when the verdict is violated.
        #[arg(long)]
        ce_out: Option<PathBuf>,
    },
    /// Run every `model,spec[,timeout]` row of a manifest and emit CSV.
    Batch {
        manifest: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        /// Instances run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// CSV destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for counterexample files of violated instances.
        #[arg(long)]
        ce_dir: Option<PathBuf>,
    },
    /// Re-check a counterexample file; prints valid or invalid.
    ValidateCe { model: PathBuf, spec: PathBuf, ce: PathBuf },
}

#[derive(Args)]
struct RunFlags {
    #[arg(long, default_value_t = boxverify::cli::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = boxverify::bounds_engine::DEFAULT_SAMPLES_PER_INPUT)]
    samples_per_input: usize,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Soft timeout in seconds, checked between pipeline stages.
    #[arg(long)]
    timeout: Option<f64>,
    /// L-BFGS-B history length.
    #[arg(long, default_value_t = OptConfig::default().memory)]
    lbfgs_memory: usize,
    #[arg(long, default_value_t = OptConfig::default().max_iterations)]
    max_iterations: usize,
    #[arg(long, default_value_t = OptConfig::default().grad_tolerance)]
    gtol: f64,
    #[arg(long, default_value_t = OptConfig::default().f_tolerance)]
    ftol: f64,
    /// Relative finite-difference step.
    #[arg(long, default_value_t = OptConfig::default().fd_step)]
    fd_step: f64,
}

impl RunFlags {
    fn options(&self) -> Result<VerifyOptions, String> {
        let optimizer = OptConfig {
            memory: self.lbfgs_memory,
            max_iterations: self.max_iterations,
            grad_tolerance: self.gtol,
            f_tolerance: self.ftol,
            fd_step: self.fd_step,
        };
        optimizer.validate().map_err(|e| e.to_string())?;
        if self.samples_per_input == 0 {
            return Err("--samples-per-input must be positive".into());
        }
        let timeout = match self.timeout {
            Some(t) if t.is_finite() && t >= 0.0 => Some(Duration::from_secs_f64(t)),
            Some(t) => return Err(format!("--timeout {t} is not a valid duration")),
            None => None,
        };
        Ok(VerifyOptions {
            seed: self.seed,
            samples_per_input: self.samples_per_input,
            optimizer,
            cache_dir: self.cache_dir.clone(),
            timeout,
            ce_out: None,
        })
    }
}

const EXIT_FILE_ERROR: u8 = 2;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(io::stderr)
        .with_target(false)
        .init();

    match Cli::parse().command {
        Command::Verify {
            model,
            spec,
            run,
            ce_out,
        } => {
            let mut opts = match run.options() {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_FILE_ERROR);
                }
            };
            opts.ce_out = ce_out;
            let record = verify(&model, &spec, &opts);
            if let Some(d) = &record.diagnostic {
                eprintln!("{}: {d}", record.verdict.token());
            }
            eprintln!("seed={} time_seconds={:.3}", record.seed, record.wall_time);
            println!("{}", record.verdict.token());
            if record.io_failure {
                ExitCode::from(EXIT_FILE_ERROR)
            } else {
                ExitCode::SUCCESS
            }
        }
        Command::Batch {
            manifest,
            run,
            jobs,
            out,
            ce_dir,
        } => {
            let verify = match run.options() {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_FILE_ERROR);
                }
            };
            let opts = BatchOptions {
                verify,
                jobs: jobs.max(1),
                ce_dir,
            };
            let report = match run_batch(&manifest, &opts) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {}: {e}", manifest.display());
                    return ExitCode::from(EXIT_FILE_ERROR);
                }
            };
            for r in &report.records {
                if let Some(d) = &r.diagnostic {
                    eprintln!("{} {}: {d}", r.model.display(), r.spec.display());
                }
            }
            let written = match &out {
                Some(path) => File::create(path).and_then(|f| write_csv(&report.records, BufWriter::new(f))),
                None => write_csv(&report.records, io::stdout().lock()),
            };
            if let Err(e) = written {
                eprintln!("error: writing CSV: {e}");
                return ExitCode::from(EXIT_FILE_ERROR);
            }
            eprintln!("{}", report.summary);
            ExitCode::SUCCESS
        }
        Command::ValidateCe { model, spec, ce } => match validate_ce(&model, &spec, &ce) {
            Ok(check) => {
                if let Some(dev) = check.max_output_deviation {
                    eprintln!("max |recorded Y - recomputed Y| = {dev:e}");
                }
                println!("{}", if check.valid { "valid" } else { "invalid" });
                let _ = io::stdout().flush();
                if check.valid {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::FAILURE
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_FILE_ERROR)
            }
        },
    }
}
