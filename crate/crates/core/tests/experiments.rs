use gdl_core::experiments::{
    approximation_depth, emit_plot_data, fit_rate_slope, plan_architecture, quantile_sorted,
    read_records_csv, resolution_k, run_rate_experiment, spearman, write_records_csv,
    ExperimentConfig, PlanInputs, RateRecord,
};
use proptest::prelude::*;

fn record(n: u64, seed: u64, js: f64) -> RateRecord {
    RateRecord {
        n,
        seed,
        js_estimate: js,
        delta_g_proxy: 1e-5,
        planned_k: 2,
        selected_epoch: 0,
        wall_seconds: 0.5,
    }
}

fn tmp(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("gdl-experiments-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn plan_at_1024_samples() {
    let plan = plan_architecture(PlanInputs::new(1024, 3.0, 1, 2.0)).unwrap();
    assert_eq!(plan.k, 2);
    assert_eq!(
        (plan.gen.depth, plan.gen.width, plan.gen.nonzeros),
        (18, 132, 5292)
    );
    assert_eq!(
        (plan.disc.depth, plan.disc.width, plan.disc.nonzeros),
        (14, 108, 3390)
    );
}

#[test]
fn plan_rejects_degenerate_inputs() {
    assert!(plan_architecture(PlanInputs::new(2, 3.0, 1, 2.0)).is_err());
    assert!(plan_architecture(PlanInputs::new(1024, 2.0, 1, 2.0)).is_err());
    assert!(plan_architecture(PlanInputs::new(1024, 3.0, 0, 2.0)).is_err());
}

#[test]
fn huge_holder_norm_deepens_the_network() {
    // log₂log₂(1e300) ≈ 9.96 overtakes ⌈log₂ 9⌉ = 4
    assert_eq!(approximation_depth(4.0, 1, 1e300), 6 + 4 + 2 * 10);
    assert_eq!(approximation_depth(4.0, 1, 0.5), 18);
}

#[test]
fn resolution_matches_direct_evaluation() {
    for n in [3u64, 10, 100, 1024, 10_000, 1_000_000, 1 << 40] {
        let nf = n as f64;
        let direct = ((nf / nf.ln()).ceil().powf(1.0 / 7.0).round() as u64).max(2);
        assert_eq!(resolution_k(n, 3.0, 1), direct, "n = {n}");
    }
}

#[test]
fn plans_grow_monotonically_with_n() {
    let mut prev = plan_architecture(PlanInputs::new(16, 3.0, 2, 2.0)).unwrap();
    for e in 5..40 {
        let p = plan_architecture(PlanInputs::new(1u64 << e, 3.0, 2, 2.0)).unwrap();
        assert!(
            p.k >= prev.k && p.gen.width >= prev.gen.width && p.gen.nonzeros >= prev.gen.nonzeros
        );
        assert!(p.disc.width >= prev.disc.width && p.disc.nonzeros >= prev.disc.nonzeros);
        assert_eq!(p.gen.depth, prev.gen.depth);
        prev = p;
    }
}

#[test]
fn exact_power_law_is_recovered() {
    let records: Vec<RateRecord> = [256u64, 512, 1024, 2048]
        .iter()
        .flat_map(|&n| (0..3).map(move |s| record(n, s, 3.0 * (n as f64).powf(-0.75))))
        .collect();
    let fit = fit_rate_slope(&records, 3.0, 1).unwrap();
    assert!((fit.slope + 0.75).abs() < 1e-12);
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
    assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
    assert_eq!(fit.spearman, -1.0);
    assert!((fit.target_slope + 6.0 / 7.0).abs() < 1e-15);
}

#[test]
fn flat_data_gives_zero_slope() {
    let records: Vec<RateRecord> = [100u64, 200, 400]
        .iter()
        .map(|&n| record(n, 0, 0.01))
        .collect();
    let fit = fit_rate_slope(&records, 3.0, 1).unwrap();
    assert_eq!(fit.slope, 0.0);
}

#[test]
fn short_or_nonpositive_ladders_are_refused() {
    let one: Vec<RateRecord> = (0..4).map(|s| record(512, s, 0.01)).collect();
    assert!(fit_rate_slope(&one, 3.0, 1).is_err());
    let two = vec![record(256, 0, 0.01), record(512, 0, 0.005)];
    assert!(fit_rate_slope(&two, 3.0, 1).is_err());
    let zero = vec![
        record(256, 0, 0.01),
        record(512, 0, 0.0),
        record(1024, 0, 0.002),
    ];
    assert!(fit_rate_slope(&zero, 3.0, 1).is_err());
}

#[test]
fn config_text_round_trips_and_rejects_unknown_keys() {
    let cfg = ExperimentConfig {
        ns: vec![64, 128, 256],
        out_csv: Some("x.csv".into()),
        ..ExperimentConfig::default()
    };
    assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    let partial = ExperimentConfig::parse("epochs = 7\nseeds = 2\n").unwrap();
    assert_eq!((partial.epochs, partial.seeds), (7, 2));
    assert_eq!(partial.ns, ExperimentConfig::default().ns);
    assert!(ExperimentConfig::parse("epochz = 7\n").is_err());
    assert!(ExperimentConfig::parse("ns = [512, 256]\n").is_err());
    assert!(ExperimentConfig::parse("d = 2\n").is_err());
    assert!(ExperimentConfig::parse("target_amplitude = 0.2\n").is_err());
}

#[test]
fn csv_round_trip_drops_only_wall_time() {
    let records = vec![
        record(256, 0, 1.25e-3),
        record(256, 1, 0.1 + 0.2),
        record(512, 0, 7.0e-4),
    ];
    let path = tmp("roundtrip.csv");
    write_records_csv(&records, &path).unwrap();
    let back = read_records_csv(&path).unwrap();
    assert_eq!(back.len(), records.len());
    for (a, b) in records.iter().zip(&back) {
        assert_eq!(
            (a.n, a.seed, a.planned_k, a.selected_epoch),
            (b.n, b.seed, b.planned_k, b.selected_epoch)
        );
        assert_eq!(a.js_estimate.to_bits(), b.js_estimate.to_bits());
        assert!(b.wall_seconds.is_nan());
    }
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(!text.contains("wall"));
}

#[test]
fn plot_emits_one_row_per_rung_and_an_exact_guide() {
    let records: Vec<RateRecord> = [256u64, 1024, 4096]
        .iter()
        .flat_map(|&n| {
            (0..4).map(move |s| record(n, s, (1.0 + s as f64 * 0.1) * (n as f64).powf(-0.6)))
        })
        .collect();
    let (csv_path, svg_path) = (tmp("summary.csv"), tmp("rate.svg"));
    emit_plot_data(&records, 3.0, 1, &csv_path, &svg_path).unwrap();
    let rows = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(rows.lines().count(), 1 + 3);
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let guide = doc
        .descendants()
        .find(|n| n.attribute("class") == Some("guide"))
        .unwrap();
    let attr = |k: &str| guide.attribute(k).unwrap().parse::<f64>().unwrap();
    assert_eq!(attr("data-slope"), -6.0 / 7.0);
    let rise = (attr("data-y1") - attr("data-y0")) / (attr("data-x1") - attr("data-x0"));
    assert!((rise + 6.0 / 7.0).abs() < 1e-12);
    let median = doc
        .descendants()
        .find(|n| n.attribute("class") == Some("median"))
        .unwrap();
    assert_eq!(
        median
            .attribute("points")
            .unwrap()
            .split_whitespace()
            .count(),
        3
    );
}

#[test]
fn rate_records_do_not_depend_on_worker_count() {
    let base = ExperimentConfig {
        ns: vec![32, 64, 128],
        seeds: 2,
        epochs: 6,
        snapshot_every: 3,
        ..ExperimentConfig::default()
    };
    let one = run_rate_experiment(&ExperimentConfig {
        workers: 1,
        ..base.clone()
    })
    .unwrap();
    let three = run_rate_experiment(&ExperimentConfig { workers: 3, ..base }).unwrap();
    assert!(one.failures.is_empty() && three.failures.is_empty());
    let strip = |r: &RateRecord| {
        (
            r.n,
            r.seed,
            r.js_estimate.to_bits(),
            r.selected_epoch,
            r.planned_k,
        )
    };
    assert_eq!(
        one.records.iter().map(strip).collect::<Vec<_>>(),
        three.records.iter().map(strip).collect::<Vec<_>>()
    );
    assert!(one.records.iter().all(|r| r.js_estimate > 0.0));
}

/// Textbook Spearman for distinct values.
fn spearman_no_ties(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| v.iter().filter(|b| *b < a).count() as f64 + 1.0)
            .collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

proptest! {
    #[test]
    fn spearman_matches_textbook_formula(pairs in prop::collection::btree_map(0u32..10_000, 0u32..10_000, 3..20)) {
        let x: Vec<f64> = pairs.keys().map(|k| *k as f64).collect();
        let mut ys: Vec<u32> = pairs.values().copied().collect();
        ys.sort_unstable();
        ys.dedup();
        prop_assume!(ys.len() == x.len());
        let y: Vec<f64> = pairs.values().map(|v| *v as f64).collect();
        prop_assert!((spearman(&x, &y) - spearman_no_ties(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn quantiles_bracket_the_data(mut v in prop::collection::vec(-1e3f64..1e3, 1..40), q in 0.0f64..=1.0) {
        v.sort_by(f64::total_cmp);
        let x = quantile_sorted(&v, q);
        prop_assert!(v[0] <= x && x <= v[v.len() - 1]);
        if v.len() % 2 == 1 {
            prop_assert_eq!(quantile_sorted(&v, 0.5), v[v.len() / 2]);
        }
    }
}
