//! The vanilla GAN objective with range-restricted discriminators, its
//! population counterpart, and alternating projected-gradient training.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::generator_density::{
    project_endpoints_1d, project_regular_1d, GeneratorDensity, SmoothMap,
};
use crate::quadrature::QuadratureScheme;
use crate::requ_net::{project_sparsity, project_unit_box, Architecture, ParamVector, ReQUNetwork};

pub fn clamp(raw: f64, d_min: f64, d_max: f64) -> f64 {
    raw.max(d_min).min(d_max)
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// A discriminator `x ↦ clamp(d_min + (d_max−d_min)·logistic(f_θ(x)))`. The
/// smooth squashing keeps values in range already; the clamp only guards
/// rounding.
#[derive(Clone, Debug, PartialEq)]
pub struct ClampedDiscriminator {
    pub net: ReQUNetwork,
    pub d_min: f64,
    pub d_max: f64,
}

impl ClampedDiscriminator {
    pub fn new(net: ReQUNetwork, d_min: f64, d_max: f64) -> Result<Self> {
        check_range(d_min, d_max)?;
        if net.arch().output_dim() != 1 {
            return Err(Error::Architecture(
                "discriminator must have scalar output".into(),
            ));
        }
        Ok(Self { net, d_min, d_max })
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let f = self.net.forward(x)?[0];
        Ok(self.squash(f).0)
    }

    /// `(D, dD/df)` for raw output `f`.
    pub(crate) fn squash(&self, f: f64) -> (f64, f64) {
        let s = logistic(f);
        let span = self.d_max - self.d_min;
        (
            clamp(self.d_min + span * s, self.d_min, self.d_max),
            span * s * (1.0 - s),
        )
    }
}

pub(crate) fn check_range(d_min: f64, d_max: f64) -> Result<()> {
    if 0.0 < d_min && d_min <= d_max && d_max < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!(
            "need 0 < d_min ≤ d_max < 1, got [{d_min}, {d_max}]"
        )))
    }
}

/// Generator and discriminator classes sharing a data dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanModel {
    pub gen_arch: Vec<usize>,
    pub disc_arch: Vec<usize>,
    pub d_min: f64,
    pub d_max: f64,
    pub gen_sparsity: Option<usize>,
    pub disc_sparsity: Option<usize>,
}

impl GanModel {
    pub fn new(
        gen_arch: Vec<usize>,
        disc_arch: Vec<usize>,
        d_min: f64,
        d_max: f64,
    ) -> Result<Self> {
        check_range(d_min, d_max)?;
        let g = Architecture::new(gen_arch.clone())?;
        let d = Architecture::new(disc_arch.clone())?;
        if g.input_dim() != g.output_dim() || d.input_dim() != g.output_dim() || d.output_dim() != 1
        {
            return Err(Error::Architecture(format!(
                "generator {gen_arch:?} and discriminator {disc_arch:?} do not fit one data dimension"
            )));
        }
        Ok(Self {
            gen_arch,
            disc_arch,
            d_min,
            d_max,
            gen_sparsity: None,
            disc_sparsity: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.gen_arch[0]
    }

    pub fn gen_architecture(&self) -> Architecture {
        Architecture::new(self.gen_arch.clone()).expect("validated in new")
    }

    pub fn disc_architecture(&self) -> Architecture {
        Architecture::new(self.disc_arch.clone()).expect("validated in new")
    }

    pub fn generator(&self, w: &[f64]) -> Result<ReQUNetwork> {
        ReQUNetwork::from_params(self.gen_architecture(), self.gen_sparsity, w)
    }

    pub fn discriminator(&self, theta: &[f64]) -> Result<ClampedDiscriminator> {
        let net = ReQUNetwork::from_params(self.disc_architecture(), self.disc_sparsity, theta)?;
        ClampedDiscriminator::new(net, self.d_min, self.d_max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub real_samples: Vec<Vec<f64>>,
    pub latent_samples: Vec<Vec<f64>>,
    pub seed: u64,
}

impl Dataset {
    pub fn new(
        real_samples: Vec<Vec<f64>>,
        latent_samples: Vec<Vec<f64>>,
        seed: u64,
    ) -> Result<Self> {
        check_len(real_samples.len(), latent_samples.len())?;
        let inside = |v: &Vec<Vec<f64>>| v.iter().flatten().all(|c| (0.0..=1.0).contains(c));
        if !inside(&real_samples) || !inside(&latent_samples) {
            return Err(Error::InvalidParam(
                "samples must lie in the unit cube".into(),
            ));
        }
        Ok(Self {
            real_samples,
            latent_samples,
            seed,
        })
    }

    /// `X_i = g*(U_i)` and `Y_j` uniform, from one seeded stream.
    pub fn from_map<M: SmoothMap>(target: &M, n: usize, seed: u64) -> Self {
        let d = target.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let real = (0..n)
            .map(|_| {
                let u: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
                target
                    .eval(&u)
                    .into_iter()
                    .map(|v| v.clamp(0.0, 1.0))
                    .collect()
            })
            .collect();
        let latent = (0..n)
            .map(|_| (0..d).map(|_| rng.gen::<f64>()).collect())
            .collect();
        Self {
            real_samples: real,
            latent_samples: latent,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.real_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.real_samples.is_empty()
    }
}

/// `½ mean log D(X_i) + ½ mean log(1 − D(g(Y_j)))` from discriminator values.
pub fn loss_from_values(d_real: &[f64], d_fake: &[f64]) -> f64 {
    let a = d_real.iter().map(|d| d.ln()).sum::<f64>() / d_real.len() as f64;
    let b = d_fake.iter().map(|d| (1.0 - d).ln()).sum::<f64>() / d_fake.len() as f64;
    0.5 * a + 0.5 * b
}

/// Empirical loss of a concrete generator/discriminator pair.
pub fn empirical_loss_nets(
    gen: &ReQUNetwork,
    disc: &ClampedDiscriminator,
    data: &Dataset,
) -> Result<f64> {
    empirical_loss_samples(gen, disc, &data.real_samples, &data.latent_samples)
}

/// `½ mean log D(X_i) + ½ mean log(1 − D(g(Y_j)))` over explicit sample lists.
pub fn empirical_loss_samples(
    gen: &ReQUNetwork,
    disc: &ClampedDiscriminator,
    real: &[Vec<f64>],
    latent: &[Vec<f64>],
) -> Result<f64> {
    if real.is_empty() || latent.is_empty() {
        return Err(Error::InvalidParam("empty sample".into()));
    }
    let d = disc.net.arch().input_dim();
    let g_in = gen.arch().input_dim();
    if let Some(x) = real.iter().find(|x| x.len() != d) {
        return Err(Error::Shape {
            expected: d,
            got: x.len(),
        });
    }
    if let Some(y) = latent.iter().find(|y| y.len() != g_in) {
        return Err(Error::Shape {
            expected: g_in,
            got: y.len(),
        });
    }
    check_len(d, gen.arch().output_dim())?;
    let mut dws = disc.net.workspace();
    let mut gws = gen.workspace();
    let mut a = 0.0;
    for x in real {
        let f = disc.net.forward_ws(x, &mut dws)[0];
        a += disc.squash(f).0.ln();
    }
    let mut b = 0.0;
    for y in latent {
        gen.forward_ws(y, &mut gws);
        let f = disc.net.forward_ws(gws.output(), &mut dws)[0];
        b += (1.0 - disc.squash(f).0).ln();
    }
    Ok(0.5 * a / real.len() as f64 + 0.5 * b / latent.len() as f64)
}

pub fn empirical_loss(model: &GanModel, w: &[f64], theta: &[f64], data: &Dataset) -> Result<f64> {
    empirical_loss_nets(&model.generator(w)?, &model.discriminator(theta)?, data)
}

/// Population loss with the latent expectation integrated over `[0,1]^d` by `quad`:
/// `½ ∫ p* log D + ½ ∫ log(1 − D(g(y))) dy`.
pub fn population_loss<P>(
    model: &GanModel,
    w: &[f64],
    theta: &[f64],
    p_star: P,
    quad: &QuadratureScheme,
) -> Result<f64>
where
    P: Fn(&[f64]) -> f64 + Sync + Send,
{
    let gen = model.generator(w)?;
    let disc = model.discriminator(theta)?;
    let real = quad.tabulate(|x| p_star(x) * disc.value(x).map(f64::ln).unwrap_or(f64::NAN));
    let fake = quad.tabulate(|y| {
        gen.forward(y)
            .and_then(|g| disc.value(&g))
            .map(|d| (1.0 - d).ln())
            .unwrap_or(f64::NAN)
    });
    Ok(0.5 * quad.sum(&real) + 0.5 * quad.sum(&fake))
}

/// Population loss with the fake-data term written in data space,
/// `½ ∫ p* log D + ½ ∫ p_w log(1 − D)`, using tabulated densities on the nodes.
pub fn population_loss_tabulated(
    disc: &ClampedDiscriminator,
    p_star: &[f64],
    p_w: &[f64],
    quad: &QuadratureScheme,
) -> Result<f64> {
    let d = quad
        .nodes()
        .map(|x| disc.value(x))
        .collect::<Result<Vec<_>>>()?;
    let real: Vec<f64> = p_star.iter().zip(&d).map(|(p, d)| p * d.ln()).collect();
    let fake: Vec<f64> = p_w
        .iter()
        .zip(&d)
        .map(|(p, d)| p * (1.0 - d).ln())
        .collect();
    Ok(0.5 * quad.sum(&real) + 0.5 * quad.sum(&fake))
}

/// `D*(x) = p*(x) / (p*(x) + p_w(x))`.
pub fn optimal_discriminator_value(p_star: f64, p_w: f64) -> Result<f64> {
    let s = p_star + p_w;
    if !(s > 0.0) {
        return Err(Error::InvalidParam("p* + p_w vanishes".into()));
    }
    Ok(p_star / s)
}

pub fn optimal_discriminator<'a, P, Q>(p_star: P, p_w: Q) -> impl Fn(&[f64]) -> Result<f64> + 'a
where
    P: Fn(&[f64]) -> f64 + 'a,
    Q: Fn(&[f64]) -> f64 + 'a,
{
    move |x| optimal_discriminator_value(p_star(x), p_w(x))
}

/// `(Λ^{-d}/(Λ^d+Λ^{-d}), Λ^d/(Λ^d+Λ^{-d}))`: the range of `D*` for Λ-regular pairs.
pub fn optimal_discriminator_range(lambda: f64, d: usize) -> (f64, f64) {
    let hi = lambda.powi(d as i32);
    let lo = 1.0 / hi;
    (lo / (lo + hi), hi / (lo + hi))
}

/// `m` points `g(U_i)` with `U_i` uniform from a seeded stream.
pub fn sample_generator<M: SmoothMap>(
    g: &GeneratorDensity<M>,
    m: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    g.sample(m, &mut ChaCha8Rng::seed_from_u64(seed))
}

// ---------------------------------------------------------------------------
// Training

/// Update rule applied to the loss gradient before projection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Sgd,
    /// Adam moments with constant step size; rescales the vanishing gradients
    /// of small ReQU weights.
    Adam {
        beta1: f64,
        beta2: f64,
    },
}

struct StepRule {
    kind: Optimizer,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl StepRule {
    fn new(kind: Optimizer, len: usize) -> Self {
        Self {
            kind,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn direction(&mut self, g: &[f64]) -> Vec<f64> {
        match self.kind {
            Optimizer::Sgd => g.to_vec(),
            Optimizer::Adam { beta1, beta2 } => {
                self.t += 1;
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                g.iter()
                    .enumerate()
                    .map(|(i, &gi)| {
                        self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * gi;
                        self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * gi * gi;
                        (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-12)
                    })
                    .collect()
            }
        }
    }
}

/// Which generator parameters the optimizer moves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trainable {
    All,
    /// Only the output layer `W_N`; hidden layers stay at their initial values.
    OutputLayer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    /// Discriminator ascent steps per generator step.
    pub disc_steps: usize,
    pub gen_lr: f64,
    pub disc_lr: f64,
    /// `None` means full batch.
    pub batch_size: Option<usize>,
    pub seed: u64,
    /// Epoch spacing of the discriminator snapshots used for best-iterate selection.
    pub snapshot_every: usize,
    pub disc_init_scale: f64,
    /// Update rule of the discriminator.
    pub optimizer: Optimizer,
    /// Update rule of the generator.
    pub gen_optimizer: Optimizer,
    pub gen_trainable: Trainable,
    pub disc_trainable: Trainable,
    /// Re-impose `g(0) = 0`, `g(1) = 1` after each generator step (scalar generators).
    pub endpoint_projection: bool,
    /// Reject generator steps whose grid audit exceeds this Λ.
    pub lambda_bound: Option<f64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            disc_steps: 5,
            gen_lr: 2e-3,
            disc_lr: 2e-2,
            batch_size: None,
            seed: 0,
            snapshot_every: 50,
            disc_init_scale: 0.5,
            optimizer: Optimizer::Adam {
                beta1: 0.5,
                beta2: 0.999,
            },
            gen_optimizer: Optimizer::Adam {
                beta1: 0.5,
                beta2: 0.999,
            },
            gen_trainable: Trainable::All,
            disc_trainable: Trainable::All,
            endpoint_projection: false,
            lambda_bound: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub disc_grad_norm: f64,
    pub gen_grad_norm: f64,
    pub gen_step_rejected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRun {
    pub config: TrainingConfig,
    pub w_init: ParamVector,
    pub w_hat: ParamVector,
    /// Generator after the last epoch (before best-iterate selection).
    pub w_last: ParamVector,
    pub theta_hat: ParamVector,
    pub trace: Vec<EpochRecord>,
    /// Epoch whose generator was selected (0 = initialization).
    pub selected_epoch: usize,
    /// `max_{θ ∈ pool} L_n(ŵ, θ)`.
    pub selected_score: f64,
    /// `max_{θ ∈ pool} L_n(w₀, θ)`.
    pub init_score: f64,
    pub wall_time: f64,
}

impl TrainingRun {
    /// One JSON object per epoch, then one line holding the selected networks.
    pub fn write_jsonl(&self, model: &GanModel, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for r in &self.trace {
            writeln!(f, "{}", serde_json::to_string(r)?)?;
        }
        let summary = serde_json::json!({
            "selected_epoch": self.selected_epoch,
            "selected_score": self.selected_score,
            "init_score": self.init_score,
            "generator": model.generator(&self.w_hat)?.to_record(),
            "discriminator": model.discriminator(&self.theta_hat)?.net.to_record(),
        });
        writeln!(f, "{summary}")?;
        Ok(())
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Gradients of the empirical loss over the given index sets:
/// `(L, ∂L/∂θ, ∂L/∂w)`; the generator gradient is only formed if `want_gen`.
fn loss_and_grads(
    gen: &ReQUNetwork,
    disc: &ClampedDiscriminator,
    data: &Dataset,
    real_idx: &[usize],
    fake_idx: &[usize],
    want_gen: bool,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let mut g_theta = vec![0.0; disc.net.arch().param_count()];
    let mut g_w = vec![
        0.0;
        if want_gen {
            gen.arch().param_count()
        } else {
            0
        }
    ];
    let (nr, nf) = (real_idx.len() as f64, fake_idx.len() as f64);
    let mut dws = disc.net.workspace();
    let mut gws = gen.workspace();
    let mut loss = 0.0;
    for &i in real_idx {
        let f = disc.net.forward_ws(&data.real_samples[i], &mut dws)[0];
        let (d, dd) = disc.squash(f);
        loss += 0.5 * d.ln() / nr;
        disc.net
            .backward_ws(&mut dws, &[0.5 * dd / d / nr], &mut g_theta);
    }
    for &j in fake_idx {
        gen.forward_ws(&data.latent_samples[j], &mut gws);
        let f = disc.net.forward_ws(gws.output(), &mut dws)[0];
        let (d, dd) = disc.squash(f);
        loss += 0.5 * (1.0 - d).ln() / nf;
        let up = -0.5 * dd / (1.0 - d) / nf;
        let gx = disc.net.backward_ws(&mut dws, &[up], &mut g_theta);
        if want_gen {
            gen.backward_ws(&mut gws, gx, &mut g_w);
        }
    }
    Ok((loss, g_theta, g_w))
}

/// Random network whose first-layer kinks `{x : W_0 x = v_1}` pass through random
/// points of the cube, so no first-layer unit starts dead on `[0,1]^d`. Remaining
/// entries are uniform on `[-scale, scale]`.
pub fn kinked_init<R: Rng + ?Sized>(
    arch: &Architecture,
    scale: f64,
    rng: &mut R,
) -> Result<ReQUNetwork> {
    let mut net = ReQUNetwork::random(arch.clone(), scale, rng);
    if arch.depth_hidden() == 0 {
        return Ok(net);
    }
    let p = arch.widths();
    let mut params = net.params().values;
    let (rows, cols) = (p[1], p[0]);
    for r in 0..rows {
        let mut row: Vec<f64> = (0..cols).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let m = row.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-12);
        row.iter_mut().for_each(|v| *v /= m);
        let shift: f64 = row.iter().map(|w| w * rng.gen::<f64>()).sum();
        params[r * cols..(r + 1) * cols].copy_from_slice(&row);
        params[rows * cols + r] = shift.clamp(-1.0, 1.0);
    }
    net = ReQUNetwork::from_params(arch.clone(), None, &params)?;
    Ok(net)
}

/// Orthogonal projection of an output-row vector onto `{u : u·a = u·b = 0}`.
fn tangent_project(u: &mut [f64], a: &[f64], b: &[f64]) {
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let (aa, ab, bb) = (dot(a, a), dot(a, b), dot(b, b));
    let det = aa * bb - ab * ab;
    if det.abs() <= 1e-14 * (aa * bb).max(1e-300) {
        return;
    }
    let (ua, ub) = (dot(u, a), dot(u, b));
    let la = (bb * ua - ab * ub) / det;
    let lb = (-ab * ua + aa * ub) / det;
    for i in 0..u.len() {
        u[i] -= la * a[i] + lb * b[i];
    }
}

/// Hidden activations at the cube endpoints, spanning the normals of the endpoint constraints.
fn endpoint_normals(gen: &ReQUNetwork) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = gen.depth_hidden();
    let which = crate::requ_net::Partial::B { k: n, i: 1 };
    Ok((
        gen.partial_forward(which, &[0.0])?,
        gen.partial_forward(which, &[1.0])?,
    ))
}

fn batch<R: Rng>(n: usize, size: Option<usize>, rng: &mut R) -> Vec<usize> {
    match size {
        Some(b) if b < n => {
            let mut v = sample_indices(rng, n, b).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..n).collect(),
    }
}

/// Alternating projected gradient ascent (discriminator) / descent (generator)
/// on the empirical loss, starting from `w_init`. Returns the best pooled iterate.
pub fn train(
    model: &GanModel,
    data: &Dataset,
    w_init: &ParamVector,
    config: &TrainingConfig,
) -> Result<TrainingRun> {
    let start = Instant::now();
    if !(config.gen_lr > 0.0 && config.disc_lr > 0.0) {
        return Err(Error::InvalidParam("step sizes must be positive".into()));
    }
    if data.is_empty() {
        return Err(Error::InvalidParam("empty dataset".into()));
    }
    let gen_arch = model.gen_architecture();
    check_len(gen_arch.param_count(), w_init.len())?;
    let d = model.dim();
    if let Some(x) = data
        .real_samples
        .iter()
        .chain(&data.latent_samples)
        .find(|x| x.len() != d)
    {
        return Err(Error::Shape {
            expected: d,
            got: x.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut gen = model.generator(w_init)?;
    let theta0 = kinked_init(&model.disc_architecture(), config.disc_init_scale, &mut rng)?;
    let mut disc = ClampedDiscriminator::new(theta0, model.d_min, model.d_max)?;
    let n = data.len();
    let out_off = gen_arch.param_count() - gen_arch.widths()[gen_arch.depth_hidden()] * d;
    let all: Vec<usize> = (0..n).collect();
    let disc_arch = model.disc_architecture();
    let disc_out_off = disc_arch.param_count() - disc_arch.widths()[disc_arch.depth_hidden()];

    let mut disc_rule = StepRule::new(config.optimizer, model.disc_architecture().param_count());
    let mut gen_rule = StepRule::new(config.gen_optimizer, gen_arch.param_count());
    let mut trace = Vec::with_capacity(config.epochs);
    let mut pool: Vec<Vec<f64>> = Vec::new();
    let mut candidates: Vec<(usize, Vec<f64>)> = vec![(0, w_init.values.clone())];

    for epoch in 1..=config.epochs {
        let mut disc_norm = 0.0;
        for _ in 0..config.disc_steps {
            let ri = batch(n, config.batch_size, &mut rng);
            let fi = batch(n, config.batch_size, &mut rng);
            let (_, mut g, _) = loss_and_grads(&gen, &disc, data, &ri, &fi, false)?;
            if config.disc_trainable == Trainable::OutputLayer {
                g[..disc_out_off].iter_mut().for_each(|v| *v = 0.0);
            }
            disc_norm = norm2(&g);
            let step = disc_rule.direction(&g);
            let mut theta = disc.net.params().values;
            for (t, gi) in theta.iter_mut().zip(&step) {
                *t += config.disc_lr * gi;
            }
            project_unit_box(&mut theta);
            if let Some(s) = model.disc_sparsity {
                project_sparsity(&mut theta, s);
            }
            disc.net = model.discriminator(&theta)?.net;
        }
        let ri = batch(n, config.batch_size, &mut rng);
        let fi = batch(n, config.batch_size, &mut rng);
        let (_, _, mut gw) = loss_and_grads(&gen, &disc, data, &ri, &fi, true)?;
        if config.gen_trainable == Trainable::OutputLayer {
            gw[..out_off].iter_mut().for_each(|v| *v = 0.0);
        }
        let normals = if config.endpoint_projection {
            let (a, b) = endpoint_normals(&gen)?;
            tangent_project(&mut gw[out_off..], &a, &b);
            Some((a, b))
        } else {
            None
        };
        let gen_norm = norm2(&gw);
        if !gen_norm.is_finite() || !disc_norm.is_finite() {
            return Err(Error::Training {
                epoch,
                reason: "non-finite gradient".into(),
            });
        }
        let mut step = gen_rule.direction(&gw);
        if let Some((a, b)) = &normals {
            tangent_project(&mut step[out_off..], a, b);
        }
        let w_old = gen.params().values;
        let mut rejected = true;
        let mut lr = config.gen_lr;
        for _ in 0..6 {
            let mut w = w_old.clone();
            for (a, b) in w.iter_mut().zip(&step) {
                *a -= lr * b;
            }
            project_unit_box(&mut w);
            if let Some(s) = model.gen_sparsity {
                project_sparsity(&mut w, s);
            }
            let mut cand = model.generator(&w)?;
            if config.endpoint_projection {
                cand = match config.lambda_bound {
                    Some(l) if config.gen_trainable == Trainable::OutputLayer => {
                        project_regular_1d(&cand, l, 257)?.0
                    }
                    _ => project_endpoints_1d(&cand)?.0,
                };
            }
            let ok = match config.lambda_bound {
                Some(l) => GeneratorDensity::new(&cand, l)?.lambda_audit(257).pass,
                None => true,
            };
            if ok {
                gen = cand;
                rejected = false;
                break;
            }
            lr *= 0.5;
        }
        if rejected {
            // stale momentum would keep pushing against the regularity guard
            gen_rule = StepRule::new(config.gen_optimizer, gen_arch.param_count());
        }
        let loss = empirical_loss_nets(&gen, &disc, data)?;
        if !loss.is_finite() {
            return Err(Error::Training {
                epoch,
                reason: format!("loss became {loss}"),
            });
        }
        trace.push(EpochRecord {
            epoch,
            loss,
            disc_grad_norm: disc_norm,
            gen_grad_norm: gen_norm,
            gen_step_rejected: rejected,
        });
        if epoch % config.snapshot_every.max(1) == 0 || epoch == config.epochs {
            pool.push(disc.net.params().values);
            candidates.push((epoch, gen.params().values));
        }
    }

    // best iterate: minimize the max of L_n over the pooled discriminators
    let pool_discs = pool
        .iter()
        .map(|t| model.discriminator(t))
        .collect::<Result<Vec<_>>>()?;
    let score = |w: &[f64]| -> Result<f64> {
        let g = model.generator(w)?;
        let mut best = f64::NEG_INFINITY;
        for dsc in &pool_discs {
            let (l, _, _) = loss_and_grads(&g, dsc, data, &all, &all, false)?;
            best = best.max(l);
        }
        Ok(best)
    };
    let mut scores = Vec::with_capacity(candidates.len());
    for (_, w) in &candidates {
        scores.push(if pool_discs.is_empty() {
            0.0
        } else {
            score(w)?
        });
    }
    let mut pick = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[pick] {
            pick = i;
        }
    }
    Ok(TrainingRun {
        config: config.clone(),
        w_init: w_init.clone(),
        w_hat: ParamVector::new(candidates[pick].1.clone()),
        w_last: gen.params(),
        theta_hat: disc.net.params(),
        trace,
        selected_epoch: candidates[pick].0,
        selected_score: scores[pick],
        init_score: scores[0],
        wall_time: start.elapsed().as_secs_f64(),
    })
}
