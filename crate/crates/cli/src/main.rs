//! `gdl`: architecture planning, rate experiments, verification suites, the
//! lower-bound lab and plot emission.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use gdl_core::experiments::{
    emit_plot_data, fit_rate_slope, plan_architecture, read_records_csv, run_rate_experiment,
    write_records_csv, write_records_jsonl, ExperimentConfig, PlanInputs,
};
use gdl_core::minimax_lab::{run_lower_bound_lab, LowerBoundLabConfig};
use gdl_core::verify;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "gdl",
    version,
    about = "Vanilla-GAN density estimation with ReQU networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Size generator and discriminator networks for sample size n.
    Plan {
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 3.0)]
        beta: f64,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long = "h-star", default_value_t = 2.0)]
        h_star: f64,
        #[arg(long = "h-g")]
        h_g: Option<f64>,
        #[arg(long, default_value_t = 2.0)]
        lambda: f64,
    },
    /// Train one estimator per (n, seed) cell and fit the JS rate.
    Rate {
        /// Flat key = value file; omitted keys take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `out_csv` from the config (default `rate.csv`).
        #[arg(long = "out-csv")]
        out_csv: Option<PathBuf>,
        /// Print the default config and exit.
        #[arg(long = "print-default")]
        print_default: bool,
    },
    /// Run every property suite; exits nonzero if any check fails.
    VerifyAll {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSONL destination (one suite per line); stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fisher scaling, score bound and the assembled minimax lower bound.
    LowerBoundLab {
        #[arg(long)]
        config: Option<PathBuf>,
        /// CSV of (n, bound) rows.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Summarize a rate CSV and draw a log-log chart with the rate guide line.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Summary CSV (default: the SVG path with a `.summary.csv` suffix).
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long, default_value_t = 3.0)]
        beta: f64,
        #[arg(long, default_value_t = 1)]
        d: usize,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Plan {
            n,
            beta,
            d,
            h_star,
            h_g,
            lambda,
        } => {
            let inputs = PlanInputs {
                h_g: h_g.unwrap_or(h_star),
                lambda,
                ..PlanInputs::new(n, beta, d, h_star)
            };
            let plan = plan_architecture(inputs)?;
            println!("{}", serde_json::to_string_pretty(&plan)?);
        }
        Command::Rate {
            config,
            out_csv,
            print_default,
        } => {
            if print_default {
                print!("{}", ExperimentConfig::default().to_text());
                return Ok(());
            }
            let cfg = match config {
                Some(p) => ExperimentConfig::load(&p)
                    .with_context(|| format!("reading {}", p.display()))?,
                None => ExperimentConfig::default(),
            };
            rate(&cfg, out_csv)?;
        }
        Command::VerifyAll { seed, out } => {
            if !verify_all(seed, out.as_deref())? {
                std::process::exit(1);
            }
        }
        Command::LowerBoundLab { config, csv } => {
            let cfg: LowerBoundLabConfig = match config {
                Some(p) => toml::from_str(&std::fs::read_to_string(&p)?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None => LowerBoundLabConfig::default(),
            };
            let report = run_lower_bound_lab(&cfg)?;
            if let Some(p) = csv {
                report.write_csv(&p)?;
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.pass {
                std::process::exit(1);
            }
        }
        Command::Plot {
            input,
            out,
            summary,
            beta,
            d,
        } => {
            let records = read_records_csv(&input)?;
            if records.is_empty() {
                bail!("{} holds no records", input.display());
            }
            let summary = summary.unwrap_or_else(|| out.with_extension("summary.csv"));
            emit_plot_data(&records, beta, d, &summary, &out)?;
            eprintln!("wrote {} and {}", summary.display(), out.display());
        }
    }
    Ok(())
}

fn rate(cfg: &ExperimentConfig, out_csv: Option<PathBuf>) -> Result<()> {
    let start = Instant::now();
    let outcome = run_rate_experiment(cfg)?;
    let csv = out_csv
        .or_else(|| cfg.out_csv.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("rate.csv"));
    write_records_csv(&outcome.records, &csv)?;
    if let Some(p) = &cfg.out_jsonl {
        write_records_jsonl(&outcome.records, Path::new(p))?;
    }
    for f in &outcome.failures {
        eprintln!("run n={} seed={} failed: {}", f.n, f.seed, f.reason);
    }
    eprintln!(
        "{} records -> {} ({:.1}s)",
        outcome.records.len(),
        csv.display(),
        start.elapsed().as_secs_f64()
    );
    match fit_rate_slope(&outcome.records, cfg.beta, cfg.d) {
        Ok(fit) => {
            println!("{}", serde_json::to_string_pretty(&fit)?);
            eprintln!(
                "fitted slope {:.3} (rate target {:.3}; desk-scale runs are dominated by optimization and constants)",
                fit.slope, fit.target_slope
            );
        }
        Err(e) => eprintln!("no slope fit: {e}"),
    }
    Ok(())
}

fn verify_all(seed: u64, out: Option<&Path>) -> Result<bool> {
    type Suite = fn(u64) -> gdl_core::Result<verify::SuiteReport>;
    let suites: [(&str, Suite); 7] = [
        ("divergence", verify::divergence_suite),
        ("network", verify::network_suite),
        ("density", verify::density_suite),
        ("oracle", verify::oracle_suite),
        ("concentration", |s| verify::concentration_suite(s, 10_000)),
        ("fisher", verify::fisher_suite),
        ("lower_bound", verify::lower_bound_suite),
    ];
    let mut lines = String::new();
    let mut all = true;
    for (name, run) in suites {
        let t = Instant::now();
        let report = run(seed).with_context(|| format!("suite {name}"))?;
        eprintln!(
            "{:<14} {} ({:.1}s)",
            name,
            if report.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
        for c in report.failures() {
            eprintln!(
                "    {}: observed {:.6e}, limit {:.6e}",
                c.name, c.observed, c.limit
            );
        }
        all &= report.pass;
        lines.push_str(&serde_json::to_string(&report)?);
        lines.push('\n');
    }
    match out {
        Some(p) => std::fs::write(p, lines)?,
        None => std::io::stdout().write_all(lines.as_bytes())?,
    }
    Ok(all)
}
