//! Command-line front end of the `radp` binary.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::config::{Overrides, RunConfig};
use super::{matched_gain_check, replay, run_to_dir, unmatched_gain_check};
use crate::error::{Error, Result};
use crate::pi_oracle::{collocation_grid, run_policy_iteration, OracleConfig};

#[derive(Debug, Parser)]
#[command(name = "radp", version, about = "Robust online policy iteration runs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Exploration seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Integration step in seconds.
    #[arg(long, global = true)]
    pub step: Option<f64>,
    /// Policy-iteration cap.
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full learning run with artifacts.
    Run { config: PathBuf },
    /// Model-based policy iteration only.
    Oracle { config: PathBuf },
    /// Small-gain report for the model-based value and policy.
    CheckGains { config: PathBuf },
    /// Re-run a run directory and compare its artifacts byte for byte.
    Replay { run_dir: PathBuf },
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out_dir: self.out_dir.clone(),
            step: self.step,
            max_iter: self.max_iter,
        }
    }

    fn load(&self, path: &std::path::Path) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(path)?;
        cfg.apply(&self.overrides())?;
        Ok(cfg)
    }
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = cli.load(config)?;
            let (dir, run) = run_to_dir(&cfg)?;
            println!("run_dir = {}", dir.display());
            match run.converged_at {
                Some(i) => println!("converged_at = {i}"),
                None => println!("converged_at = none"),
            }
            if let Some(c) = &run.certification {
                println!("rho = {}", c.rho.label());
                println!("d = {}", c.level.d);
            }
            Ok(())
        }
        Command::Oracle { config } => {
            let cfg = cli.load(config)?;
            let bench = cfg.benchmark()?;
            let grid = collocation_grid(&bench.region, bench.basis_v.len());
            let ocfg = OracleConfig {
                max_iter: cfg.learning.max_iter,
                ..OracleConfig::default()
            };
            let states = run_policy_iteration(
                &bench.model,
                &bench.cost,
                &bench.u0,
                &bench.basis_v,
                &bench.basis_u,
                &grid,
                &ocfg,
            )?;
            let dir = cfg.out_dir(&bench.name);
            std::fs::create_dir_all(&dir)?;
            let mut w = csv::Writer::from_path(dir.join("oracle.csv")).map_err(|e| Error::Io(std::io::Error::other(e)))?;
            let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
            w.write_record(["iteration", "collocation_residual", "projection_residual", "hjb_residual", "value_change"])
                .map_err(io)?;
            for s in &states {
                w.write_record([
                    s.iteration.to_string(),
                    s.collocation_residual.to_string(),
                    s.projection_residual.to_string(),
                    s.hjb_residual.to_string(),
                    s.value_change.to_string(),
                ])
                .map_err(io)?;
            }
            w.flush()?;
            let last = states.last().expect("at least one iteration");
            println!("iterations = {}", states.len());
            println!("value_change = {}", last.value_change);
            println!("hjb_residual = {}", last.hjb_residual);
            for (t, v) in last.next_policy.basis().terms().iter().zip(last.next_policy.weights()) {
                println!("policy[{t}] = {v}");
            }
            Ok(())
        }
        Command::CheckGains { config } => {
            let cfg = cli.load(config)?;
            let bench = cfg.benchmark()?;
            if bench.uncertainty.is_none() {
                return Err(Error::InvalidArgument(format!("{} declares no uncertainty", bench.name)));
            }
            let grid = collocation_grid(&bench.region, bench.basis_v.len());
            let ocfg = OracleConfig {
                max_iter: cfg.learning.max_iter,
                ..OracleConfig::default()
            };
            let states =
                run_policy_iteration(&bench.model, &bench.cost, &bench.u0, &bench.basis_v, &bench.basis_u, &grid, &ocfg)?;
            let last = states.last().expect("at least one iteration");
            let (rho, report, _) = if bench.model.has_z_channel() {
                unmatched_gain_check(&bench, &last.value, &last.next_policy, &cfg)?
            } else {
                matched_gain_check(&bench, &last.value, &cfg)?
            };
            let text = format!("# rho = {}\n{}", rho.label(), report.to_table());
            let dir = cfg.out_dir(&bench.name);
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("gain_report.txt"), &text)?;
            println!("rho = {}", rho.label());
            println!("holds = {}", report.holds);
            println!("margin = {}", report.margin);
            println!("relative_margin = {}", report.relative_margin);
            if report.holds {
                Ok(())
            } else {
                Err(Error::InvalidArgument("small-gain condition fails".into()))
            }
        }
        Command::Replay { run_dir } => {
            let target = replay(run_dir)?;
            println!("replay_dir = {}", target.display());
            println!("identical = true");
            Ok(())
        }
    }
}

/// Parse `args`, run, and return the process exit code. Errors are reported
/// on stderr as `error[<Category>]: <message>`.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            e.exit_code()
        }
    }
}
