use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ssis_bench::error::BenchError;
use ssis_bench::output::emit_outputs;
use ssis_bench::validate::{validate, ORACLE_REPS};
use ssis_bench::{lookup, registry, run_experiment, BenchConfig, MethodKind, Result};

#[derive(Parser)]
#[command(
    name = "ssis-bench",
    version,
    about = "Rare-event benchmarks for SIS, SSIS and ASSIS"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated experiments and write runs.csv, summary.json and a plot.
    Run {
        #[arg(long)]
        problem: String,
        #[arg(long, value_enum)]
        method: MethodKind,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// TOML overrides on top of the problem defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_svg: bool,
        /// Run even if the problem failed its oracle check.
        #[arg(long)]
        allow_quarantined: bool,
    },
    /// Print the problem registry.
    List,
    /// Check a problem's reference probability with surrogate-free SIS-aCS.
    Validate {
        #[arg(long)]
        problem: String,
        #[arg(long, default_value_t = ORACLE_REPS)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::List => {
            println!(
                "{:<18} {:>4} {:>12}  {:<6} reference",
                "name", "d", "p_ref", "status"
            );
            for p in registry() {
                let status = if p.quarantined.is_some() {
                    "quar."
                } else {
                    "ok"
                };
                println!(
                    "{:<18} {:>4} {:>12.4e}  {:<6} {}",
                    p.name, p.dim, p.p_ref, status, p.reference
                );
            }
        }
        Command::Run {
            problem,
            method,
            reps,
            seed,
            config,
            out,
            no_svg,
            allow_quarantined,
        } => {
            let problem = lookup(&problem)?;
            if let (Some(reason), false) = (problem.quarantined, allow_quarantined) {
                return Err(BenchError::Quarantined {
                    name: problem.name.clone(),
                    reason: reason.into(),
                });
            }
            let mut cfg = BenchConfig::for_problem(&problem);
            if let Some(path) = config {
                let text = std::fs::read_to_string(&path)
                    .map_err(|source| BenchError::Io { path, source })?;
                cfg = cfg.with_toml(&text)?;
            }
            let report = run_experiment(&problem, method, reps, seed, &cfg)?;
            let files = emit_outputs(&report, &out, !no_svg)?;
            let s = &report.summary;
            let show = |v: Option<f64>| v.map_or("n/a".to_owned(), |x| format!("{x:.4}"));
            println!(
                "{} {}: {} ok, {} failed; mean p̂ {:.4e} (p_ref {:.4e}); rel. bias {}; CoV {}; rel. RMSE {}; mean calls {}",
                report.problem,
                method.name(),
                s.n_ok,
                s.n_failed,
                s.mean_p_hat.unwrap_or(f64::NAN),
                report.p_ref,
                show(s.rel_bias),
                show(s.cov),
                show(s.rel_rmse),
                show(s.mean_calls),
            );
            for f in &report.failed {
                eprintln!("rep {} (seed {}) failed: {}", f.rep, f.seed, f.error);
            }
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Validate {
            problem,
            reps,
            seed,
        } => {
            let problem = lookup(&problem)?;
            let v = validate(&problem, reps, seed)?;
            println!(
                "{}: oracle {:.4e} ± {:.2e} (SE, {} runs, {} failed) vs p_ref {:.4e}: {:.2} SE, {}",
                v.problem,
                v.oracle_mean,
                v.std_error,
                v.reps,
                v.failed,
                v.p_ref,
                v.z,
                if v.passed { "ok" } else { "QUARANTINE" }
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
