//! End-to-end acceptance: one PASS/FAIL line per criterion, each with its
//! runtime budget. Run with `cargo test --test acceptance -- --nocapture`.

use std::time::{Duration, Instant};

use gdl_core::experiments::{
    fit_rate_slope, run_rate_experiment, write_records_csv, ExperimentConfig, RateRecord,
};
use gdl_core::verify::{self, SuiteReport};

const SEED: u64 = 0;

struct Outcome {
    pass: bool,
    lines: Vec<String>,
}

fn report(number: usize, title: &str, elapsed: Duration, limit: Duration, o: Outcome) -> bool {
    let in_time = elapsed <= limit;
    let pass = o.pass && in_time;
    println!(
        "criterion {number} ({title}): {} [{:.1} s of {:.0} s budget]",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs_f64()
    );
    for l in &o.lines {
        println!("    {l}");
    }
    if !in_time {
        println!("    runtime budget exceeded");
    }
    pass
}

fn suite_outcome(s: &SuiteReport) -> Outcome {
    Outcome {
        pass: s.pass,
        lines: s
            .checks
            .iter()
            .map(|c| {
                format!(
                    "{} {}: observed {:.6e}, limit {:.6e}",
                    if c.pass { "ok  " } else { "FAIL" },
                    c.name,
                    c.observed,
                    c.limit
                )
            })
            .collect(),
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn csv_bytes(records: &[RateRecord], name: &str) -> Vec<u8> {
    let path =
        std::env::temp_dir().join(format!("gdl-acceptance-{}-{name}.csv", std::process::id()));
    write_records_csv(records, &path).expect("write CSV");
    let bytes = std::fs::read(&path).expect("read CSV");
    let _ = std::fs::remove_file(&path);
    bytes
}

#[test]
fn acceptance() {
    let minutes = |m: u64| Duration::from_secs(60 * m);
    type Suite = fn(u64) -> gdl_core::Result<SuiteReport>;
    let suites: [(&str, Suite, Duration); 7] = [
        ("divergence suite", verify::divergence_suite, minutes(1)),
        (
            "network perturbation suite",
            verify::network_suite,
            minutes(1),
        ),
        ("density suite", verify::density_suite, minutes(2)),
        ("oracle suite", verify::oracle_suite, minutes(2)),
        (
            "concentration",
            |s| verify::concentration_suite(s, 10_000),
            minutes(5),
        ),
        ("Fisher scaling", verify::fisher_suite, minutes(2)),
        ("lower-bound scaling", verify::lower_bound_suite, minutes(2)),
    ];
    let mut results = Vec::new();
    let mut first_reports = Vec::new();
    for (i, (title, run, limit)) in suites.into_iter().enumerate() {
        let (r, elapsed) = timed(|| run(SEED));
        let outcome = match &r {
            Ok(s) => suite_outcome(s),
            Err(e) => Outcome {
                pass: false,
                lines: vec![format!("error: {e}")],
            },
        };
        results.push(report(i + 1, title, elapsed, limit, outcome));
        first_reports.push(r.ok());
    }

    // 8: trend of the trained estimators
    let cfg = ExperimentConfig::default();
    let (rate, elapsed) = timed(|| run_rate_experiment(&cfg));
    let mut lines = Vec::new();
    let pass8 = match &rate {
        Err(e) => {
            lines.push(format!("error: {e}"));
            false
        }
        Ok(out) => {
            for f in &out.failures {
                lines.push(format!(
                    "run n={} seed={} failed: {}",
                    f.n, f.seed, f.reason
                ));
            }
            match fit_rate_slope(&out.records, cfg.beta, cfg.d) {
                Err(e) => {
                    lines.push(format!("fit error: {e}"));
                    false
                }
                Ok(fit) => {
                    for s in &fit.summary {
                        lines.push(format!(
                            "n={:>5}: median JS {:.4e} (IQR {:.3e}..{:.3e}, {} runs)",
                            s.n, s.median_js, s.q25, s.q75, s.runs
                        ));
                    }
                    let complete = out.failures.is_empty()
                        && fit.summary.len() == cfg.ns.len()
                        && fit.summary.iter().all(|s| s.runs == cfg.seeds as usize);
                    let positive = fit.summary.iter().all(|s| s.median_js > 0.0);
                    lines.push(format!(
                        "all {} cells trained: {complete}",
                        cfg.ns.len() * cfg.seeds as usize
                    ));
                    lines.push(format!("medians strictly positive: {positive}"));
                    lines.push(format!(
                        "Spearman(n, median JS) = {:.3} (need ≤ -0.8)",
                        fit.spearman
                    ));
                    lines.push(format!(
                        "fitted slope = {:.3} (need < -0.3; rate target {:.3}, r² = {:.3})",
                        fit.slope, fit.target_slope, fit.r_squared
                    ));
                    if let Some(r) = out.records.first() {
                        lines.push(format!(
                            "best-in-class JS proxy for the generator class: {:.3e}",
                            r.delta_g_proxy
                        ));
                    }
                    complete && positive && fit.spearman <= -0.8 && fit.slope < -0.3
                }
            }
        }
    };
    results.push(report(
        8,
        "rate experiment trend",
        elapsed,
        minutes(120),
        Outcome { pass: pass8, lines },
    ));

    // 9: a second, independent pass must reproduce both artifacts byte for byte
    let (pass9, elapsed) = timed(|| {
        let mut lines = Vec::new();
        let first: Option<Vec<SuiteReport>> = first_reports.into_iter().collect();
        let verify_same = match (first, verify::verify_all(SEED)) {
            (Some(a), Ok(b)) => {
                let a = serde_json::to_string(&a).expect("serialize");
                let b = serde_json::to_string(&b.suites).expect("serialize");
                a == b
            }
            _ => false,
        };
        lines.push(format!("verify-all reports identical: {verify_same}"));
        let single = ExperimentConfig {
            workers: 1,
            ..ExperimentConfig::default()
        };
        let rate_same = match (&rate, run_rate_experiment(&single)) {
            (Ok(a), Ok(b)) => {
                csv_bytes(&a.records, "a") == csv_bytes(&b.records, "b")
                    && a.failures.len() == b.failures.len()
            }
            _ => false,
        };
        lines.push(format!(
            "rate CSV identical (default pool vs one worker): {rate_same}"
        ));
        Outcome {
            pass: verify_same && rate_same,
            lines,
        }
    });
    results.push(report(9, "determinism", elapsed, minutes(125), pass9));

    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, p)| !**p)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
