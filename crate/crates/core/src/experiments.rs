//! Architecture sizing, the end-to-end rate experiment, slope fitting and plot
//! emission.

use crate::divergence::js_values;
use crate::error::{Error, Result};
use crate::gan_core::{train, Dataset, GanModel, Optimizer, Trainable, TrainingConfig};
use crate::generator_density::{
    default_knots, identity_generator_1d, project_regular_1d, spline_generator_1d,
    GeneratorDensity, SineShift, SmoothMap,
};
use crate::par;
use crate::quadrature::{uniform_grid, QuadratureScheme};
use crate::requ_net::{kinks_1d, ReQUNetwork};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

// ---------------------------------------------------------------------------
// Architecture planning

/// `log₂ log₂ H`, taken as `−∞` when `H ≤ 1` so that it never wins a maximum.
fn log2_log2(h: f64) -> f64 {
    if h > 1.0 {
        h.log2().log2()
    } else {
        f64::NEG_INFINITY
    }
}

/// `⌈log₂(2d⌊β⌋ + d) ∨ log₂log₂ H⌉ ∨ 1`.
fn depth_term(beta: f64, d: usize, h: f64) -> u64 {
    let fb = beta.floor();
    let df = d as f64;
    let a = (2.0 * df * fb + df).log2().max(log2_log2(h)).ceil();
    (a as i64).max(1) as u64
}

/// Hidden layers of the ReQU approximant of an `H^β` function:
/// `6 + 2(⌊β⌋−2) + ⌈log₂ d⌉ + 2(⌈log₂(2d⌊β⌋+d) ∨ log₂log₂H⌉ ∨ 1)`.
pub fn approximation_depth(beta: f64, d: usize, h: f64) -> u64 {
    let fb = beta.floor() as i64;
    let log_d = (d as f64).log2().ceil() as i64;
    (6 + 2 * (fb - 2) + log_d) as u64 + 2 * depth_term(beta, d, h)
}

/// Width `4d(K+⌊β⌋)^d ∨ 12(K+2⌊β⌋+1) ∨ p`.
pub fn approximation_width(beta: f64, d: usize, k: u64, p: usize) -> u64 {
    let fb = beta.floor() as u64;
    let a = 4 * d as u64 * (k + fb).pow(d as u32);
    let b = 12 * (k + 2 * fb + 1);
    a.max(b).max(p as u64)
}

/// `C(β,d,H) = 60(⌈log₂(2d⌊β⌋+d) ∨ log₂log₂H⌉ ∨ 1) + 38 + 20d² + 144d⌊β⌋ + 8d`.
pub fn sparsity_constant(beta: f64, d: usize, h: f64) -> u64 {
    let fb = beta.floor() as u64;
    let d = d as u64;
    60 * depth_term(beta, d as usize, h) + 38 + 20 * d * d + 144 * d * fb + 8 * d
}

/// Nonzero budget `p(K+⌊β⌋)^d C(β,d,H)`.
pub fn approximation_nonzeros(beta: f64, d: usize, h: f64, k: u64, p: usize) -> u64 {
    p as u64 * (k + beta.floor() as u64).pow(d as u32) * sparsity_constant(beta, d, h)
}

/// `K = max(2, round(⌈n/ln n⌉^{1/(2β+d)}))`.
pub fn resolution_k(n: u64, beta: f64, d: usize) -> u64 {
    let nf = n as f64;
    let base = (nf / nf.ln()).ceil();
    (base.powf(1.0 / (2.0 * beta + d as f64)).round() as u64).max(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerPlan {
    pub depth: u64,
    pub width: u64,
    pub nonzeros: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanInputs {
    pub n: u64,
    pub beta: f64,
    pub d: usize,
    pub h_star: f64,
    pub h_g: f64,
    pub lambda: f64,
}

impl PlanInputs {
    pub fn new(n: u64, beta: f64, d: usize, h_star: f64) -> Self {
        Self {
            n,
            beta,
            d,
            h_star,
            h_g: h_star,
            lambda: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchPlan {
    pub k: u64,
    pub gen: LayerPlan,
    pub disc: LayerPlan,
    pub inputs: PlanInputs,
}

/// Sizes the generator (approximating `g* ∈ H^{β+1}`, `p = d` outputs) and the
/// discriminator (approximating an `H^β` ratio, one output) at sample size `n`.
pub fn plan_architecture(inputs: PlanInputs) -> Result<ArchPlan> {
    let PlanInputs {
        n, beta, d, h_star, ..
    } = inputs;
    if n < 3 || !(beta > 2.0) || d == 0 || !(h_star > 0.0) {
        return Err(Error::InvalidParam(format!(
            "need n ≥ 3, β > 2, d ≥ 1, H* > 0; got n={n}, β={beta}, d={d}, H*={h_star}"
        )));
    }
    let k = resolution_k(n, beta, d);
    let gen = LayerPlan {
        depth: approximation_depth(beta + 1.0, d, h_star),
        width: approximation_width(beta + 1.0, d, k, d),
        nonzeros: approximation_nonzeros(beta + 1.0, d, h_star, k, d),
    };
    let disc = LayerPlan {
        depth: approximation_depth(beta, d, h_star),
        width: approximation_width(beta, d, k, 1),
        nonzeros: approximation_nonzeros(beta, d, h_star, k, 1),
    };
    Ok(ArchPlan {
        k,
        gen,
        disc,
        inputs,
    })
}

// ---------------------------------------------------------------------------
// Configuration

/// Rate-experiment configuration, read from flat `key = value` lines (TOML syntax;
/// strings quoted, lists in brackets). Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    pub beta: f64,
    /// Regularity level used for audits and the generator step guard.
    pub lambda: f64,
    /// Ground truth `g*(y) = y − a·sin(2π f y)`.
    pub target_amplitude: f64,
    pub target_frequency: f64,
    pub ns: Vec<u64>,
    pub seeds: u64,
    /// Dataset seed is `data_seed_offset + seed`; the training seed is `seed`.
    pub data_seed_offset: u64,
    pub knots: usize,
    pub disc_width: usize,
    pub d_min: f64,
    pub d_max: f64,
    pub epochs: usize,
    pub disc_steps: usize,
    pub gen_lr: f64,
    pub disc_lr: f64,
    pub snapshot_every: usize,
    pub disc_init_scale: f64,
    /// Gauss–Legendre nodes per panel of the kink-aligned JS rule.
    pub quad_per_panel: usize,
    /// Worker threads; 0 uses the global pool. `GDL_WORKERS` overrides.
    pub workers: usize,
    pub out_csv: Option<String>,
    pub out_jsonl: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 1,
            beta: 3.0,
            lambda: 2.0,
            target_amplitude: 0.05,
            target_frequency: 1.0,
            ns: vec![256, 512, 1024, 2048, 4096],
            seeds: 3,
            data_seed_offset: 1000,
            knots: 6,
            disc_width: 8,
            d_min: 0.2,
            d_max: 0.8,
            epochs: 400,
            disc_steps: 5,
            gen_lr: 3.0,
            disc_lr: 2e-2,
            snapshot_every: 50,
            disc_init_scale: 0.5,
            quad_per_panel: 24,
            workers: 0,
            out_csv: None,
            out_jsonl: None,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::InvalidParam(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.d != 1 {
            return Err(Error::InvalidParam(format!(
                "the rate experiment trains scalar generators; d = {} unsupported",
                self.d
            )));
        }
        if self.ns.is_empty() || self.ns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParam(
                "n ladder must be nonempty and strictly increasing".into(),
            ));
        }
        if self.ns[0] < 3 || self.seeds == 0 || self.knots == 0 || self.disc_width == 0 {
            return Err(Error::InvalidParam(
                "need n ≥ 3, seeds ≥ 1, knots ≥ 1, disc_width ≥ 1".into(),
            ));
        }
        if !(self.beta > 2.0 && self.lambda > 1.0) {
            return Err(Error::InvalidParam("need β > 2 and Λ > 1".into()));
        }
        let wave = 2.0 * std::f64::consts::PI * self.target_amplitude * self.target_frequency;
        if !(wave < 1.0) || self.target_frequency.fract() != 0.0 {
            return Err(Error::InvalidParam(
                "target must satisfy 2πaf < 1 with integer f".into(),
            ));
        }
        Ok(())
    }

    pub fn target(&self) -> SineShift {
        SineShift {
            amplitude: self.target_amplitude,
            frequency: self.target_frequency,
        }
    }

    pub fn model(&self) -> Result<GanModel> {
        GanModel::new(
            vec![1, 3 + self.knots, 1],
            vec![1, self.disc_width, 1],
            self.d_min,
            self.d_max,
        )
    }

    pub fn training(&self, seed: u64) -> TrainingConfig {
        TrainingConfig {
            epochs: self.epochs,
            disc_steps: self.disc_steps,
            gen_lr: self.gen_lr,
            disc_lr: self.disc_lr,
            batch_size: None,
            seed,
            snapshot_every: self.snapshot_every,
            disc_init_scale: self.disc_init_scale,
            optimizer: Optimizer::Adam {
                beta1: 0.5,
                beta2: 0.999,
            },
            gen_optimizer: Optimizer::Sgd,
            gen_trainable: Trainable::OutputLayer,
            disc_trainable: Trainable::All,
            endpoint_projection: true,
            lambda_bound: Some(self.lambda),
        }
    }

    /// Worker count: `GDL_WORKERS` if set, else the config value (0 = global pool).
    pub fn effective_workers(&self) -> Option<usize> {
        std::env::var("GDL_WORKERS")
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .or(Some(self.workers))
            .filter(|&w| w > 0)
    }
}

// ---------------------------------------------------------------------------
// Rate experiment

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub n: u64,
    pub seed: u64,
    pub js_estimate: f64,
    /// JS of the best least-squares fit of `g*` in the generator class.
    pub delta_g_proxy: f64,
    /// `K` of the planned (theory-sized) architecture at this `n`.
    pub planned_k: u64,
    pub selected_epoch: usize,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub n: u64,
    pub seed: u64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateOutcome {
    pub records: Vec<RateRecord>,
    pub failures: Vec<RunFailure>,
}

/// JS between a scalar ReQU generator's density and a tabulated-on-demand target,
/// on Gauss–Legendre panels split at the images of the generator's kinks.
pub fn generator_js<T: SmoothMap>(
    gen: &ReQUNetwork,
    target: &GeneratorDensity<T>,
    lambda: f64,
    per_panel: usize,
) -> Result<f64> {
    let mut breaks = Vec::new();
    for y in kinks_1d(gen, 1024)? {
        breaks.push(gen.forward(&[y])?[0]);
    }
    let quad = QuadratureScheme::piecewise_gauss_legendre(&breaks, per_panel);
    let p = GeneratorDensity::new(gen, lambda)?.tabulate(&quad)?;
    let q = target.tabulate(&quad)?;
    Ok(js_values(&p, &q, &quad).value)
}

/// Least-squares fit of `target` by `αy + γy² + Σ c_k (y−t_k)₊²` with `g(1) = 1`
/// on a 513-point grid, projected onto the Λ-regular endpoint-fixing set.
pub fn best_fit_spline<T: SmoothMap>(
    target: &T,
    knots: &[f64],
    lambda: f64,
) -> Result<ReQUNetwork> {
    let grid = uniform_grid(1, 513);
    let cols = 1 + knots.len();
    let mut a = DMatrix::zeros(grid.len(), cols);
    let mut b = DVector::zeros(grid.len());
    for (i, y) in grid.iter().enumerate() {
        let y = y[0];
        a[(i, 0)] = y * y - y;
        for (k, t) in knots.iter().enumerate() {
            let r = (y - t).max(0.0);
            a[(i, k + 1)] = r * r - (1.0 - t) * (1.0 - t) * y;
        }
        b[i] = target.eval(&[y])[0] - y;
    }
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::InvalidParam(format!("least squares: {e}")))?;
    let clip = |v: f64| v.clamp(-1.0, 1.0);
    let coeffs: Vec<f64> = sol.iter().skip(1).map(|&c| clip(c)).collect();
    let net = spline_generator_1d(clip(sol[0]), knots, &coeffs)?;
    Ok(project_regular_1d(&net, lambda, 257)?.0)
}

fn run_cell(
    config: &ExperimentConfig,
    n: u64,
    seed: u64,
    delta_g_proxy: f64,
) -> Result<RateRecord> {
    let start = Instant::now();
    let model = config.model()?;
    let target = config.target();
    let plan = plan_architecture(PlanInputs::new(n, config.beta, config.d, 2.0))?;
    let data = Dataset::from_map(&target, n as usize, config.data_seed_offset + seed);
    let w0 = identity_generator_1d(&default_knots(config.knots)).params();
    let run = train(&model, &data, &w0, &config.training(seed))?;
    let gen = model.generator(&run.w_hat)?;
    let truth = GeneratorDensity::new(target, config.lambda)?;
    let js = generator_js(&gen, &truth, config.lambda, config.quad_per_panel)?;
    Ok(RateRecord {
        n,
        seed,
        js_estimate: js,
        delta_g_proxy,
        planned_k: plan.k,
        selected_epoch: run.selected_epoch,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Trains one estimator per `(n, seed)` cell and scores it by JS against the
/// ground truth. Cells run in parallel; each owns its seeds, so the records do not
/// depend on the worker count. Failed cells are collected, not fatal.
pub fn run_rate_experiment(config: &ExperimentConfig) -> Result<RateOutcome> {
    config.validate()?;
    let target = config.target();
    let audit = GeneratorDensity::new(target, config.lambda)?.lambda_audit(1025);
    if !audit.pass {
        return Err(Error::Regularity(format!(
            "ground truth implies Λ = {:.4} > {}",
            audit.implied_lambda, config.lambda
        )));
    }
    let truth = GeneratorDensity::new(target, config.lambda)?;
    let fit = best_fit_spline(&target, &default_knots(config.knots), config.lambda)?;
    let proxy = generator_js(&fit, &truth, config.lambda, config.quad_per_panel)?;
    let cells: Vec<(u64, u64)> = config
        .ns
        .iter()
        .flat_map(|&n| (0..config.seeds).map(move |s| (n, s)))
        .collect();
    let results = par::with_workers(config.effective_workers(), || {
        par::map_indices(cells.len(), |i| {
            run_cell(config, cells[i].0, cells[i].1, proxy)
        })
    })?;
    let mut outcome = RateOutcome {
        records: Vec::new(),
        failures: Vec::new(),
    };
    for ((n, seed), r) in cells.into_iter().zip(results) {
        match r {
            Ok(rec) => outcome.records.push(rec),
            Err(e) => outcome.failures.push(RunFailure {
                n,
                seed,
                reason: e.to_string(),
            }),
        }
    }
    Ok(outcome)
}

/// Deterministic CSV: every field except the wall-clock time.
pub fn write_records_csv(records: &[RateRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record([
        "n",
        "seed",
        "js_estimate",
        "delta_g_proxy",
        "planned_k",
        "selected_epoch",
    ])
    .map_err(|e| Error::Io(e.to_string()))?;
    for r in records {
        w.write_record([
            r.n.to_string(),
            r.seed.to_string(),
            r.js_estimate.to_string(),
            r.delta_g_proxy.to_string(),
            r.planned_k.to_string(),
            r.selected_epoch.to_string(),
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<RateRecord>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(|e| Error::Io(e.to_string()))?;
        let field = |i: usize| -> Result<&str> {
            row.get(i)
                .ok_or_else(|| Error::Io(format!("CSV row has {} fields", row.len())))
        };
        let num = |i: usize| -> Result<f64> {
            field(i)?
                .parse::<f64>()
                .map_err(|e| Error::Io(format!("CSV field {i}: {e}")))
        };
        out.push(RateRecord {
            n: num(0)? as u64,
            seed: num(1)? as u64,
            js_estimate: num(2)?,
            delta_g_proxy: num(3)?,
            planned_k: num(4)? as u64,
            selected_epoch: num(5)? as usize,
            wall_seconds: f64::NAN,
        });
    }
    Ok(out)
}

/// One JSON object per record, wall-clock time included.
pub fn write_records_jsonl(records: &[RateRecord], path: &Path) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Summaries and fitting

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub n: u64,
    pub median_js: f64,
    pub q25: f64,
    pub q75: f64,
    pub runs: usize,
}

/// Median and quartiles of the JS estimates per `n`, in increasing `n`.
pub fn summarize(records: &[RateRecord]) -> Vec<RateSummary> {
    let mut ns: Vec<u64> = records.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let mut v: Vec<f64> = records
                .iter()
                .filter(|r| r.n == n)
                .map(|r| r.js_estimate)
                .collect();
            v.sort_by(f64::total_cmp);
            RateSummary {
                n,
                median_js: quantile_sorted(&v, 0.5),
                q25: quantile_sorted(&v, 0.25),
                q75: quantile_sorted(&v, 0.75),
                runs: v.len(),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `−2β/(2β+d)`.
    pub target_slope: f64,
    pub spearman: f64,
    pub summary: Vec<RateSummary>,
}

/// Least squares of `ln(median JS)` on `ln n`.
pub fn fit_rate_slope(records: &[RateRecord], beta: f64, d: usize) -> Result<RateFit> {
    let summary = summarize(records);
    if summary.len() < 3 {
        return Err(Error::InvalidParam(format!(
            "slope fitting needs ≥ 3 distinct n, got {}",
            summary.len()
        )));
    }
    if summary.iter().any(|s| !(s.median_js > 0.0)) {
        return Err(Error::InvalidParam(
            "median JS must be positive for a log-log fit".into(),
        ));
    }
    let x: Vec<f64> = summary.iter().map(|s| (s.n as f64).ln()).collect();
    let y: Vec<f64> = summary.iter().map(|s| s.median_js.ln()).collect();
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParam("zero-variance abscissa".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    let ns: Vec<f64> = summary.iter().map(|s| s.n as f64).collect();
    let med: Vec<f64> = summary.iter().map(|s| s.median_js).collect();
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        target_slope: -2.0 * beta / (2.0 * beta + d as f64),
        spearman: spearman(&ns, &med),
        summary,
    })
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let m = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / m, ry.iter().sum::<f64>() / m);
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    sxy / (sxx * syy).sqrt()
}

// ---------------------------------------------------------------------------
// Plot emission

/// Writes `(n, median_js, q25, q75)` to `csv_path` and a log-log SVG chart with
/// interquartile bars and a guide line of slope `−2β/(2β+d)` to `svg_path`.
pub fn emit_plot_data(
    records: &[RateRecord],
    beta: f64,
    d: usize,
    csv_path: &Path,
    svg_path: &Path,
) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidParam("no records to plot".into()));
    }
    let summary = summarize(records);
    let mut w = csv::Writer::from_path(csv_path).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record(["n", "median_js", "q25", "q75"])
        .map_err(|e| Error::Io(e.to_string()))?;
    for s in &summary {
        w.write_record([
            s.n.to_string(),
            s.median_js.to_string(),
            s.q25.to_string(),
            s.q75.to_string(),
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    std::fs::write(
        svg_path,
        rate_svg(&summary, -2.0 * beta / (2.0 * beta + d as f64)),
    )?;
    Ok(())
}

/// Log-log chart in a 640×420 viewport.
pub fn rate_svg(summary: &[RateSummary], guide_slope: f64) -> String {
    let (w, h, pad) = (640.0, 420.0, 60.0);
    let lx: Vec<f64> = summary.iter().map(|s| (s.n as f64).log10()).collect();
    let positive = |v: f64| if v > 0.0 { v } else { f64::MIN_POSITIVE };
    let mut ly: Vec<f64> = summary
        .iter()
        .flat_map(|s| [s.q25, s.q75, s.median_js])
        .map(|v| positive(v).log10())
        .collect();
    let (x0, x1) = (
        lx.iter().cloned().fold(f64::INFINITY, f64::min),
        lx.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let (x0, x1) = if x1 > x0 {
        (x0 - 0.05, x1 + 0.05)
    } else {
        (x0 - 0.5, x1 + 0.5)
    };
    // the guide line is anchored at the first median
    let anchor = (lx[0], positive(summary[0].median_js).log10());
    ly.push(anchor.1 + guide_slope * (x1 - anchor.0));
    ly.push(anchor.1 + guide_slope * (x0 - anchor.0));
    let (y0, y1) = (
        ly.iter().cloned().fold(f64::INFINITY, f64::min).floor(),
        ly.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil(),
    );
    let y1 = if y1 > y0 { y1 } else { y0 + 1.0 };
    let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    let mut e = y0 as i64;
    while e as f64 <= y1 {
        let y = py(e as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y:.2}" x2="{pad}" y2="{y:.2}" stroke="black"/>"#,
            pad - 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">1e{e}</text>"#,
            pad - 8.0,
            y + 4.0
        );
        e += 1;
    }
    for (s_, &x) in summary.iter().zip(&lx) {
        let xp = px(x);
        let _ = writeln!(
            s,
            r#"<line x1="{xp:.2}" y1="{}" x2="{xp:.2}" y2="{}" stroke="black"/>"#,
            h - pad,
            h - pad + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{xp:.2}" y="{}" text-anchor="middle">{}</text>"#,
            h - pad + 20.0,
            s_.n
        );
        let _ = writeln!(
            s,
            r##"<line x1="{xp:.2}" y1="{:.2}" x2="{xp:.2}" y2="{:.2}" stroke="#1f77b4"/>"##,
            py(positive(s_.q25).log10()),
            py(positive(s_.q75).log10())
        );
    }
    let pts: Vec<String> = summary
        .iter()
        .zip(&lx)
        .map(|(s_, &x)| format!("{:.2},{:.2}", px(x), py(positive(s_.median_js).log10())))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline class="median" points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
        pts.join(" ")
    );
    for p in &pts {
        let (a, b) = p.split_once(',').expect("formatted pair");
        let _ = writeln!(s, r##"<circle cx="{a}" cy="{b}" r="3" fill="#1f77b4"/>"##);
    }
    let (gx0, gx1) = (x0, x1);
    let g = |x: f64| anchor.1 + guide_slope * (x - anchor.0);
    let _ = writeln!(
        s,
        r##"<line class="guide" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#d62728" stroke-dasharray="6 4" data-slope="{guide_slope}" data-x0="{gx0}" data-y0="{}" data-x1="{gx1}" data-y1="{}"/>"##,
        px(gx0),
        py(g(gx0)),
        px(gx1),
        py(g(gx1)),
        g(gx0),
        g(gx1)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">n (log scale)</text>"#,
        w / 2.0,
        h - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">median JS (log scale)</text>"#,
        h / 2.0,
        h / 2.0
    );
    let _ = writeln!(
        s,
        r##"<text x="{}" y="{}" text-anchor="end" fill="#d62728">guide slope {guide_slope:.4}</text>"##,
        w - pad,
        pad - 10.0
    );
    s.push_str("</svg>\n");
    s
}
