use std::path::{Path, PathBuf};
use std::process::ExitCode;

use besovlab::suite::{emit_all, run_suite, DomainConfig, ExperimentConfig, SuiteSpec, REGISTRY};
use besovlab::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "besovlab", version, about = "Numerical verification battery for spectral Besov spaces")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the suites of a JSON config and write report.csv/report.json/SVGs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0: one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// List the registered suites.
    List,
    /// Run one suite with its defaults on the unit interval (or square).
    Check {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 127)]
        n: usize,
        #[arg(long)]
        alpha: Option<f64>,
        /// 2 for the unit square with `n x n` interior points.
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("config error: {e}");
    ExitCode::from(2)
}

fn execute(cfg: &ExperimentConfig, base: &Path, out: Option<&Path>, jobs: usize) -> ExitCode {
    let (report, timing) = match run_suite(cfg, base, jobs) {
        Ok(r) => r,
        Err(e @ Error::Config(_)) => return config_error(e),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    for row in &report.rows {
        let flag = if row.pass { "PASS" } else { "FAIL" };
        println!("{flag} {:<34} {:>14.6e} {}", row.suite, row.value, row.params);
    }
    let failed = report.failures().count();
    println!("{} rows, {failed} failed, {:.1} s", report.rows.len(), timing.total);
    if let Some(dir) = out {
        match emit_all(&report, &timing, dir) {
            Ok(files) => files.iter().for_each(|f| eprintln!("wrote {}", f.display())),
            Err(e) => {
                eprintln!("error writing {}: {e}", dir.display());
                return ExitCode::from(1);
            }
        }
    }
    ExitCode::from(u8::from(failed > 0))
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::List => {
            for (name, desc) in REGISTRY {
                println!("{name:<20} {desc}");
            }
            ExitCode::SUCCESS
        }
        Cmd::Run { config, out, jobs } => {
            let (mut cfg, base) = match ExperimentConfig::from_file(&config) {
                Ok(c) => c,
                Err(e) => return config_error(e),
            };
            if let Err(e) = cfg.apply_env() {
                return config_error(e);
            }
            let Some(out) = out.or_else(|| cfg.output_dir.as_ref().map(|d| base.join(d))) else {
                return config_error("no output directory: pass --out or set output_dir");
            };
            execute(&cfg, &base, Some(&out), jobs)
        }
        Cmd::Check { suite, n, alpha, dim, out } => {
            let spec = match SuiteSpec::by_name(&suite) {
                Ok(s) => s,
                Err(e) => return config_error(e),
            };
            let domain = match dim {
                1 => DomainConfig::interval(n),
                2 => DomainConfig::square(n),
                d => return config_error(format!("--dim {d}: only 1 or 2")),
            };
            let mut cfg = ExperimentConfig::new(domain, vec![spec]);
            if let Some(a) = alpha {
                cfg.alpha = vec![a];
            }
            if let Err(e) = cfg.apply_env() {
                return config_error(e);
            }
            execute(&cfg, Path::new("."), out.as_deref(), 0)
        }
    }
}
