//! `nsfvfe check|run|converge|diagnose --config <path> [--levels L] [--out DIR]`.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::{check_config, converge, diagnose, run_case, build_case, base_mesh, HarnessError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "nsfvfe", version, about = "Compressible Navier-Stokes on tetrahedra: runs, studies and diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parameter windows, mesh admissibility, boundary fit, identity suite.
    Check {
        #[command(flatten)]
        common: Common,
        /// Random instances of the identity suite.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
    },
    /// One run with diagnostics, snapshots and a summary.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Refinement study against the configured reference.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Overrides `study.levels`.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Recomputes diagnostics from a stored trajectory.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// Defaults to `trajectory.snap` in the output directory.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
}

/// Worker count from `NSFVFE_THREADS`, if set.
pub fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("NSFVFE_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|e| format!("NSFVFE_THREADS=`{v}`: {e}"))?;
    if n == 0 {
        return Err("NSFVFE_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf), HarnessError> {
    let cfg = RunConfig::load(&common.config)?;
    let out = common.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    Ok((cfg, out))
}

fn execute(cmd: &Command) -> Result<i32, HarnessError> {
    match cmd {
        Command::Check { common, seeds } => {
            let (cfg, out) = load(common)?;
            let report = check_config(&cfg, *seeds)?;
            print!("{}", report.to_text());
            std::fs::create_dir_all(&out).map_err(|e| super::io_err(&out, e))?;
            let path = out.join("check.csv");
            std::fs::write(&path, report.to_csv()).map_err(|e| super::io_err(&path, e))?;
            Ok(if report.pass() { 0 } else { 1 })
        }
        Command::Run { common } => {
            let (cfg, out) = load(common)?;
            for w in cfg.validate()? {
                log::warn!("{w}");
            }
            let case = build_case(&cfg, base_mesh(&cfg)?)?;
            let report = run_case(&cfg, &case, &out)?;
            print!("{}", report.summary());
            Ok(match (&report.failure, report.pass()) {
                (Some(_), _) => 2,
                (None, true) => 0,
                (None, false) => 1,
            })
        }
        Command::Converge { common, levels } => {
            let (cfg, out) = load(common)?;
            for w in cfg.validate()? {
                log::warn!("{w}");
            }
            if cfg.reference.is_none() {
                log::warn!("no reference configured; error columns are NaN");
            }
            let report = converge(&cfg, levels.unwrap_or(cfg.levels), Some(&out))?;
            print!("{}", report.to_text());
            Ok(if report.failure.is_some() { 2 } else { 0 })
        }
        Command::Diagnose { common, trajectory } => {
            let (cfg, out) = load(common)?;
            let snap = trajectory.clone().unwrap_or_else(|| out.join("trajectory.snap"));
            let report = diagnose(&cfg, &snap, &out)?;
            if let Some((k, c, r)) = report.negative_density {
                eprintln!("NegativeDensity: step {k} cell {c} value {r:e}");
                return Ok(1);
            }
            Ok(0)
        }
    }
}

/// Runs the parsed command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Entry point for the binary: logging, threads, parsing.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return 3;
    }
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            code
        }
    }
}
