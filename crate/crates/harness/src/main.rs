use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use banco_core::{NoiseKind, NoiseModel};
use banco_harness::checks::{check_magnitude, check_noise, magnitude_grid};
use banco_harness::{emit_results, emit_traces, run_experiment, ExperimentSpec, Format, RunOptions};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "banco", version, about = "Run and check parameter-free private optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write results.csv / results.json.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: one per core).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Write per-step traces of BANCO runs.
        #[arg(long)]
        trace: bool,
        /// Record zero wall time, making output byte-reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Compare the closed-form magnitude with adaptive quadrature on a grid.
    CheckMagnitude {
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Report noise moments and directional MGF estimates.
    CheckNoise {
        kind: KindArg,
        /// ε for Laplace, the per-coordinate scale for Gaussian.
        epsilon: f64,
        dim: usize,
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Laplace,
    Gaussian,
    None,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run {
            config,
            out,
            workers,
            trace,
            no_timing,
        } => {
            let spec = ExperimentSpec::load(&config)?;
            let dir = out
                .or_else(|| spec.output.clone())
                .unwrap_or_else(|| PathBuf::from("results").join(&spec.name));
            let output = run_experiment(&spec, RunOptions { workers, trace, no_timing })?;
            for path in emit_results(&output, &[Format::Csv, Format::Json], &dir)? {
                println!("wrote {}", path.display());
            }
            for path in emit_traces(&output.traces, &dir)? {
                println!("wrote {}", path.display());
            }
            for g in &output.summary.groups {
                println!(
                    "{:<28} T={:<8} runs={:<3} done={:<3} subopt={:.6e} ± {:.3e}",
                    g.optimizer, g.horizon, g.runs, g.completed, g.mean_suboptimality, g.std_suboptimality
                );
            }
            for f in &output.summary.rate_fits {
                match (&f.fit, &f.error) {
                    (Some(fit), _) => println!("{:<28} slope={:.4} r2={:.4}", f.optimizer, fit.slope, fit.r_squared),
                    (None, Some(e)) => println!("{:<28} slope unavailable: {e}", f.optimizer),
                    _ => {}
                }
            }
            println!("requests charged: {}", output.ledger.total_requests);
            if !output.all_complete() {
                eprintln!("{} run(s) truncated", output.summary.truncated_runs);
            }
            Ok(output.all_complete())
        }
        Command::CheckMagnitude { tol } => {
            let report = check_magnitude(&magnitude_grid(), tol);
            println!(
                "points={} max_rel_err={:.3e} worst=(x={}, y={}, a={}) failures={} tol={:e}",
                report.points, report.max_rel_err, report.worst.0, report.worst.1, report.worst.2, report.failures, tol
            );
            println!("{}", if report.passed() { "PASS" } else { "FAIL" });
            Ok(report.passed())
        }
        Command::CheckNoise {
            kind,
            epsilon,
            dim,
            samples,
            seed,
        } => {
            let kind = match kind {
                KindArg::Laplace => NoiseKind::Laplace,
                KindArg::Gaussian => NoiseKind::Gaussian,
                KindArg::None => NoiseKind::None,
            };
            let model = NoiseModel::derive(kind, epsilon, dim).context("noise parameters")?;
            let report = check_noise(&model, samples, seed)?;
            println!(
                "E|xi|^2 = {:.6} ± {:.2e} (expected {:.6}, sigma^2 {:.6}, rel err {:.3e}) {}",
                report.second_moment,
                report.second_moment_se,
                report.expected_second_moment,
                report.sigma_sq,
                report.rel_err,
                if report.moment_ok { "ok" } else { "FAIL" }
            );
            println!("sigma_1d^2 = {}, b = {}", model.sigma_1d_sq, model.b);
            for m in &report.mgf {
                let verdict = if !m.finite {
                    "infinite (outside MGF domain)"
                } else if m.within_bound(4.0) {
                    "ok"
                } else {
                    "FAIL"
                };
                println!(
                    "beta={:<10.4} mgf={:.6e} ± {:.2e} bound={:.6e} finite={} {}",
                    m.beta, m.mean, m.std_error, m.bound, m.finite, verdict
                );
            }
            Ok(report.passed())
        }
    }
}
