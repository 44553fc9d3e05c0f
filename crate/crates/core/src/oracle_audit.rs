//! Explicit constants of the oracle inequality, the discriminator gap Δ(w,θ)
//! and its quadratic sandwich, the Bernstein and uniform deviation bounds, and
//! Monte-Carlo checks of the concentration and loss-Lipschitz inequalities.

use std::f64::consts::{E, LN_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::divergence::js_values;
use crate::error::{Error, Result};
use crate::gan_core::{
    check_range, empirical_loss_samples, kinked_init, ClampedDiscriminator, GanModel,
};
use crate::generator_density::{GeneratorDensity, SmoothMap};
use crate::quadrature::QuadratureScheme;
use crate::requ_net::{
    class_jacobian_constant, class_lipschitz_constant, kinks_1d, network_lipschitz_bound,
    project_unit_box, Architecture, ReQUNetwork,
};

// ---------------------------------------------------------------------------
// Constants

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsBundle {
    /// `𝗅_𝒢𝗅_X/(2−2D_max) + 𝗅_Θ/(D_min ∧ (1−D_max))`.
    pub c_eps_net: f64,
    /// Variance constant of the per-pair Bernstein bound.
    pub c_var: f64,
    /// `ln(1/D_max ∨ 1/D_min) ∨ ln(1/(1−D_max) ∨ 1/(1−D_min))`: sup of `|log D|`, `|log(1−D)|`.
    pub c_d: f64,
    /// Constant of the upper half of the quadratic sandwich of Δ.
    pub c_delta: f64,
    /// Parameter-Lipschitz constant of the generator class.
    pub l_g: f64,
    /// Parameter-Lipschitz constant of the discriminator class.
    pub l_theta: f64,
    /// Input-Lipschitz constant of the discriminators, equal to their H¹ bound.
    pub l_x: f64,
    /// Parameter-Lipschitz constant of the generated densities in sup norm.
    pub l_p: f64,
}

/// Variance constant: `(ln²(2D_min)/(½−D_min) ∨ 2ln²2) + (ln²(2−2D_max)/(D_max−½) ∨ 2ln²2)
/// + ln(e/(2D_min))/(2D_min²) + ln(e/(2−2D_max))/(2−2D_max)²`. At `D = ½` the
/// ratio is `0/0` and only the `2ln²2` branch remains.
pub fn c_var(d_min: f64, d_max: f64) -> f64 {
    let floor = 2.0 * LN_2 * LN_2;
    let lo = if (0.5 - d_min).abs() < 1e-15 {
        floor
    } else {
        ((2.0 * d_min).ln().powi(2) / (0.5 - d_min)).max(floor)
    };
    let hi = if (d_max - 0.5).abs() < 1e-15 {
        floor
    } else {
        ((2.0 - 2.0 * d_max).ln().powi(2) / (d_max - 0.5)).max(floor)
    };
    let tail = (E / (2.0 * d_min)).ln() / (2.0 * d_min * d_min)
        + (E / (2.0 - 2.0 * d_max)).ln() / (2.0 - 2.0 * d_max).powi(2);
    lo + hi + tail
}

pub fn c_d(d_min: f64, d_max: f64) -> f64 {
    let a = (1.0 / d_max).max(1.0 / d_min).ln();
    let b = (1.0 / (1.0 - d_max)).max(1.0 / (1.0 - d_min)).ln();
    a.max(b)
}

/// `1 + √( D_min/((1−D_min) ln(1/(1−D_max))) ∧ (1−D_max)/(D_max ln(1/D_min)) )`.
pub fn c_delta(d_min: f64, d_max: f64) -> f64 {
    let a = d_min / ((1.0 - d_min) * (1.0 / (1.0 - d_max)).ln());
    let b = (1.0 - d_max) / (d_max * (1.0 / d_min).ln());
    1.0 + a.min(b).sqrt()
}

/// `C²/((C−1)² D_min (1−D_max))`: the factor multiplying `‖D*−D‖²` in the upper bound of Δ.
pub fn sandwich_factor(d_min: f64, d_max: f64) -> f64 {
    let c = c_delta(d_min, d_max);
    c * c / ((c - 1.0).powi(2) * d_min * (1.0 - d_max))
}

pub fn c_eps_net(l_g: f64, l_x: f64, l_theta: f64, d_min: f64, d_max: f64) -> f64 {
    l_g * l_x / (2.0 - 2.0 * d_max) + l_theta / d_min.min(1.0 - d_max)
}

/// H¹ bound of the squashed discriminators on the cube: `D ≤ D_max` and the
/// squashing is `(D_max−D_min)/4`-Lipschitz in the raw output, whose
/// sup-norm Lipschitz constant on `[0,1]^d` is bounded layer by layer.
pub fn discriminator_h1_bound(disc_arch: &Architecture, d_min: f64, d_max: f64) -> f64 {
    let lip = network_lipschitz_bound(disc_arch, 1.0).value;
    d_max.max(0.25 * (d_max - d_min) * lip)
}

/// Every constant of the deviation bounds from the architectures and class
/// parameters. `h_d` is the H¹ bound of the discriminator class (see
/// [`discriminator_h1_bound`]), `h_g` the Hölder bound of the generator class.
#[allow(clippy::too_many_arguments)]
pub fn constants(
    d_min: f64,
    d_max: f64,
    gen_arch: &Architecture,
    disc_arch: &Architecture,
    h_d: f64,
    d: usize,
    lambda: f64,
    h_g: f64,
) -> Result<ConstantsBundle> {
    check_range(d_min, d_max)?;
    if gen_arch.depth_hidden() == 0 {
        return Err(Error::Architecture(
            "the density-Lipschitz constant needs at least one hidden generator layer".into(),
        ));
    }
    if !(h_d > 0.0 && lambda > 1.0 && h_g >= 0.0 && d >= 1) {
        return Err(Error::InvalidParam(format!(
            "need H_D > 0, Λ > 1, H_G ≥ 0, d ≥ 1; got {h_d}, {lambda}, {h_g}, {d}"
        )));
    }
    let l_g = class_lipschitz_constant(gen_arch).value;
    let l_theta = class_lipschitz_constant(disc_arch).value;
    let l_x = h_d;
    let l_p = crate::generator_density::density_lipschitz_constant(d, lambda, h_g)
        * class_jacobian_constant(gen_arch).value;
    let bundle = ConstantsBundle {
        c_eps_net: c_eps_net(l_g, l_x, l_theta, d_min, d_max),
        c_var: c_var(d_min, d_max),
        c_d: c_d(d_min, d_max),
        c_delta: c_delta(d_min, d_max),
        l_g,
        l_theta,
        l_x,
        l_p,
    };
    let all = [
        bundle.c_eps_net,
        bundle.c_var,
        bundle.c_d,
        bundle.c_delta,
        l_g,
        l_theta,
        l_x,
        l_p,
    ];
    if all.iter().any(|v| !(*v > 0.0)) || !(bundle.c_delta > 1.0) {
        return Err(Error::InvalidParam(format!(
            "degenerate constants {bundle:?}"
        )));
    }
    Ok(bundle)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleEntry {
    pub name: String,
    pub primary: f64,
    pub secondary: f64,
    pub rel_diff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleEntryReport {
    pub entries: Vec<DoubleEntry>,
    pub tolerance: f64,
    pub pass: bool,
}

fn entry(name: &str, primary: f64, secondary: f64) -> DoubleEntry {
    let scale = primary.abs().max(secondary.abs()).max(1e-300);
    DoubleEntry {
        name: name.into(),
        primary,
        secondary,
        rel_diff: if primary == secondary {
            0.0
        } else {
            (primary - secondary).abs() / scale
        },
    }
}

/// Width product `∏ (p+1)^e` by repeated multiplication.
fn width_power_product(widths: &[usize], e: u32) -> f64 {
    widths
        .iter()
        .map(|&p| (p as f64 + 1.0).powi(e as i32))
        .product()
}

/// Re-evaluates every constant of [`constants`] by a second route (direct
/// products instead of log sums, expanded logarithms, squared rather than
/// rooted comparisons) and compares the two to `tolerance` relative error.
#[allow(clippy::too_many_arguments)]
pub fn constants_double_entry(
    d_min: f64,
    d_max: f64,
    gen_arch: &Architecture,
    disc_arch: &Architecture,
    h_d: f64,
    d: usize,
    lambda: f64,
    h_g: f64,
    tolerance: f64,
) -> Result<DoubleEntryReport> {
    let b = constants(d_min, d_max, gen_arch, disc_arch, h_d, d, lambda, h_g)?;
    let class = |a: &Architecture| {
        let n = a.depth_hidden() as u32;
        (n as f64 + 1.0) * 2f64.powi(n as i32) * width_power_product(a.widths(), 1 << n)
    };
    let l_g = class(gen_arch);
    let l_theta = class(disc_arch);
    let ng = gen_arch.depth_hidden() as u32;
    let jac = ng as f64
        * (ng as f64 + 1.0)
        * 2f64.powi(ng as i32 + 1)
        * width_power_product(gen_arch.widths(), (1 << (ng + 1)) + 1);
    let df = d as f64;
    let l2 = df.powi(2)
        * df.sqrt().powi(d as i32)
        * lambda.powi(3 * d as i32)
        * (1.0 + h_g * lambda * df.sqrt());
    let l_p = l2 * jac;
    let ln2sq = LN_2 * LN_2;
    let branch = |num: f64, den: f64| {
        if den.abs() < 1e-15 {
            2.0 * ln2sq
        } else {
            (num / den).max(2.0 * ln2sq)
        }
    };
    let lo = branch((LN_2 + d_min.ln()).powi(2), 0.5 - d_min);
    let hi = branch((LN_2 + (1.0 - d_max).ln()).powi(2), d_max - 0.5);
    let tail = (1.0 - LN_2 - d_min.ln()) / (2.0 * d_min.powi(2))
        + (1.0 - LN_2 - (1.0 - d_max).ln()) / (4.0 * (1.0 - d_max).powi(2));
    let c_var2 = lo + hi + tail;
    let c_d2 = [
        -d_min.ln(),
        -d_max.ln(),
        -(1.0 - d_min).ln(),
        -(1.0 - d_max).ln(),
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);
    let ra = d_min / ((1.0 - d_min) * -(1.0 - d_max).ln());
    let rb = (1.0 - d_max) / (d_max * -d_min.ln());
    let c_delta2 = 1.0 + if ra <= rb { ra.sqrt() } else { rb.sqrt() };
    let c_eps2 = (l_g * h_d * (1.0 / (1.0 - d_max))) / 2.0
        + l_theta * (1.0 / d_min).max(1.0 / (1.0 - d_max));
    let entries = vec![
        entry("l_g", b.l_g, l_g),
        entry("l_theta", b.l_theta, l_theta),
        entry("l_x", b.l_x, h_d),
        entry("l_p", b.l_p, l_p),
        entry("c_var", b.c_var, c_var2),
        entry("c_d", b.c_d, c_d2),
        entry("c_delta", b.c_delta, c_delta2),
        entry("c_eps_net", b.c_eps_net, c_eps2),
    ];
    let pass = entries.iter().all(|e| e.rel_diff <= tolerance);
    Ok(DoubleEntryReport {
        entries,
        tolerance,
        pass,
    })
}

// ---------------------------------------------------------------------------
// The gap Δ(w,θ)

/// One-dimensional Gauss-Legendre rule whose panels end at every kink of the
/// discriminator and at the image under the generator of every generator
/// kink, so the smooth-between-kinks integrands of Δ are integrated to
/// near machine precision. In higher dimension the default tensor rule.
pub fn aligned_quadrature(
    gen: &ReQUNetwork,
    disc: &ReQUNetwork,
    per_panel: usize,
) -> Result<QuadratureScheme> {
    if gen.arch().input_dim() != 1 {
        return Ok(QuadratureScheme::default_for(gen.arch().input_dim()));
    }
    let mut breaks = kinks_1d(disc, 1024)?;
    for y in kinks_1d(gen, 1024)? {
        breaks.push(gen.forward(&[y])?[0]);
    }
    Ok(QuadratureScheme::piecewise_gauss_legendre(
        &breaks, per_panel,
    ))
}

/// Ingredients of Δ(w,θ) = JS(p_w,p*) − log 2 − L(w,θ) on one quadrature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaParts {
    pub js: f64,
    /// Population loss `L(w,θ)` with both expectations written in data space.
    pub loss: f64,
    pub delta: f64,
    /// `‖D* − D_θ‖²` in `L₂(p* + p_w)`.
    pub l2_gap: f64,
    /// `|∫p* − 1| + |∫p_w − 1|` on the rule: the quadrature slack.
    pub mass_error: f64,
    pub scheme_id: String,
}

/// Evaluates Δ from densities tabulated on the nodes of `quad`.
pub fn delta_parts_tabulated(
    disc: &ClampedDiscriminator,
    p_star: &[f64],
    p_w: &[f64],
    quad: &QuadratureScheme,
) -> Result<DeltaParts> {
    let d = quad
        .nodes()
        .map(|x| disc.value(x))
        .collect::<Result<Vec<_>>>()?;
    let js = js_values(p_w, p_star, quad).value;
    let mut loss_terms = Vec::with_capacity(d.len());
    let mut gap_terms = Vec::with_capacity(d.len());
    for ((&ps, &pw), &dv) in p_star.iter().zip(p_w).zip(&d) {
        loss_terms.push(0.5 * ps * dv.ln() + 0.5 * pw * (1.0 - dv).ln());
        let s = ps + pw;
        gap_terms.push(if s > 0.0 {
            s * (ps / s - dv).powi(2)
        } else {
            0.0
        });
    }
    let loss = quad.sum(&loss_terms);
    let mass = |v: &[f64]| (quad.sum(v) - 1.0).abs();
    Ok(DeltaParts {
        js,
        loss,
        delta: js - LN_2 - loss,
        l2_gap: quad.sum(&gap_terms),
        mass_error: mass(p_star) + mass(p_w),
        scheme_id: quad.id(),
    })
}

fn tabulate_generator(gen: &ReQUNetwork, quad: &QuadratureScheme) -> Result<Vec<f64>> {
    // Λ only drives audits, which are not used here
    GeneratorDensity::new(gen, 2.0)?.tabulate(quad)
}

pub fn delta_parts<P>(
    model: &GanModel,
    w: &[f64],
    theta: &[f64],
    p_star: P,
    quad: &QuadratureScheme,
) -> Result<DeltaParts>
where
    P: Fn(&[f64]) -> f64 + Sync + Send,
{
    let gen = model.generator(w)?;
    let disc = model.discriminator(theta)?;
    let pw = tabulate_generator(&gen, quad)?;
    let ps = quad.tabulate(p_star);
    delta_parts_tabulated(&disc, &ps, &pw, quad)
}

/// Δ(w,θ) = JS(p_w,p*) − log 2 − L(w,θ).
pub fn delta<P>(
    model: &GanModel,
    w: &[f64],
    theta: &[f64],
    p_star: P,
    quad: &QuadratureScheme,
) -> Result<f64>
where
    P: Fn(&[f64]) -> f64 + Sync + Send,
{
    Ok(delta_parts(model, w, theta, p_star, quad)?.delta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichCheck {
    pub parts: DeltaParts,
    /// `‖D*−D_θ‖²`.
    pub lower: f64,
    /// `C²/((C−1)²D_min(1−D_max)) · ‖D*−D_θ‖²`.
    pub upper: f64,
    pub factor: f64,
    /// `1e-6 + 1e-3·|Δ|`.
    pub slack: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    /// `Δ ≥ −1e-8`.
    pub nonnegative: bool,
    pub pass: bool,
}

/// Quadratic sandwich `‖D*−D‖² ≤ Δ ≤ C²/((C−1)²D_min(1−D_max))‖D*−D‖²` on the
/// kink-aligned rule (one dimension) or the default rule.
pub fn delta_d_sandwich_check<P>(
    model: &GanModel,
    w: &[f64],
    theta: &[f64],
    p_star: P,
) -> Result<SandwichCheck>
where
    P: Fn(&[f64]) -> f64 + Sync + Send,
{
    let gen = model.generator(w)?;
    let disc = model.discriminator(theta)?;
    let quad = aligned_quadrature(&gen, &disc.net, 24)?;
    let parts = delta_parts(model, w, theta, p_star, &quad)?;
    Ok(sandwich_from_parts(parts, model.d_min, model.d_max))
}

pub fn sandwich_from_parts(parts: DeltaParts, d_min: f64, d_max: f64) -> SandwichCheck {
    let factor = sandwich_factor(d_min, d_max);
    let lower = parts.l2_gap;
    let upper = factor * lower;
    let slack = 1e-6 + 1e-3 * parts.delta.abs();
    let lower_ok = lower <= parts.delta + slack;
    let upper_ok = parts.delta <= upper + slack;
    let nonnegative = parts.delta >= -1e-8;
    SandwichCheck {
        lower,
        upper,
        factor,
        slack,
        lower_ok,
        upper_ok,
        nonnegative,
        pass: lower_ok && upper_ok && nonnegative,
        parts,
    }
}

// ---------------------------------------------------------------------------
// Δ_𝒢 and Δ_𝒟 over finite grids

/// Inner maximization of `L(w,·)` used for Δ_𝒟: Adam ascent on the population
/// loss from several kinked random starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorSearch {
    pub starts: usize,
    pub steps: usize,
    pub lr: f64,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for DiscriminatorSearch {
    fn default() -> Self {
        Self {
            starts: 8,
            steps: 300,
            lr: 2e-2,
            init_scale: 0.5,
            seed: 0,
        }
    }
}

/// Population loss and its θ-gradient from node weights `a_i = ½ω_i p*(x_i)`,
/// `b_i = ½ω_i p_w(x_i)`.
fn population_loss_grad(
    disc: &ClampedDiscriminator,
    quad: &QuadratureScheme,
    a: &[f64],
    b: &[f64],
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; disc.net.arch().param_count()];
    let mut ws = disc.net.workspace();
    let mut loss = 0.0;
    for (i, x) in quad.nodes().enumerate() {
        let f = disc.net.forward_ws(x, &mut ws)[0];
        let (d, dd) = disc.squash(f);
        loss += a[i] * d.ln() + b[i] * (1.0 - d).ln();
        let up = a[i] * dd / d - b[i] * dd / (1.0 - d);
        disc.net.backward_ws(&mut ws, &[up], &mut grad);
    }
    (loss, grad)
}

/// Best discriminator found by the search and its population loss.
pub fn maximize_population_loss(
    model: &GanModel,
    p_star: &[f64],
    p_w: &[f64],
    quad: &QuadratureScheme,
    search: &DiscriminatorSearch,
) -> Result<(Vec<f64>, f64)> {
    let a: Vec<f64> = quad
        .weights()
        .iter()
        .zip(p_star)
        .map(|(w, p)| 0.5 * w * p)
        .collect();
    let b: Vec<f64> = quad
        .weights()
        .iter()
        .zip(p_w)
        .map(|(w, p)| 0.5 * w * p)
        .collect();
    let arch = model.disc_architecture();
    let runs = crate::par::map_indices(search.starts.max(1), |s| -> Result<(Vec<f64>, f64)> {
        let mut rng =
            ChaCha8Rng::seed_from_u64(search.seed.wrapping_mul(1_000_003).wrapping_add(s as u64));
        let net = kinked_init(&arch, search.init_scale, &mut rng)?;
        let mut disc = ClampedDiscriminator::new(net, model.d_min, model.d_max)?;
        let mut theta = disc.net.params().values;
        let (mut m, mut v) = (vec![0.0; theta.len()], vec![0.0; theta.len()]);
        let (b1, b2) = (0.5f64, 0.999f64);
        let mut best = (theta.clone(), f64::NEG_INFINITY);
        for t in 1..=search.steps {
            let (loss, g) = population_loss_grad(&disc, quad, &a, &b);
            if loss > best.1 {
                best = (theta.clone(), loss);
            }
            for i in 0..theta.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let mh = m[i] / (1.0 - b1.powi(t as i32));
                let vh = v[i] / (1.0 - b2.powi(t as i32));
                theta[i] += search.lr * mh / (vh.sqrt() + 1e-12);
            }
            project_unit_box(&mut theta);
            disc = model.discriminator(&theta)?;
        }
        let (loss, _) = population_loss_grad(&disc, quad, &a, &b);
        if loss > best.1 {
            best = (theta, loss);
        }
        Ok(best)
    });
    let mut best: Option<(Vec<f64>, f64)> = None;
    for r in runs {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.1 > b.1) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one start"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub generators: usize,
    pub evaluated: usize,
    /// `(grid index, reason)` of every generator left out.
    pub skipped: Vec<(usize, String)>,
    pub search: DiscriminatorSearch,
    pub scheme_id: String,
    /// Largest quadrature mass error over the evaluated generators.
    pub quadrature_slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleTerms {
    /// `min_w JS(p_w, p*)` over the grid, clipped at 0.
    pub delta_g: f64,
    /// `max_w min_θ Δ(w,θ)` with the inner minimum from the search, clipped at 0.
    pub delta_d: f64,
    pub delta_g_raw: f64,
    pub delta_d_raw: f64,
    pub grid_spec: GridSpec,
}

/// Δ_𝒢 and Δ_𝒟 over a finite generator grid. Generators whose density cannot
/// be tabulated, or whose mass on the rule is off by more than `1e-3`, are
/// skipped and listed in the grid description.
pub fn delta_terms<P>(
    model: &GanModel,
    gen_grid: &[Vec<f64>],
    search: &DiscriminatorSearch,
    p_star: P,
    quad: &QuadratureScheme,
) -> Result<OracleTerms>
where
    P: Fn(&[f64]) -> f64 + Sync + Send,
{
    if gen_grid.is_empty() {
        return Err(Error::InvalidParam("empty generator grid".into()));
    }
    let ps = quad.tabulate(p_star);
    let mut skipped = Vec::new();
    let (mut dg, mut dd) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut slack = (quad.sum(&ps) - 1.0).abs();
    let mut evaluated = 0;
    for (i, w) in gen_grid.iter().enumerate() {
        let pw = match model
            .generator(w)
            .and_then(|g| tabulate_generator(&g, quad))
        {
            Ok(v) => v,
            Err(e) => {
                skipped.push((i, e.to_string()));
                continue;
            }
        };
        let mass = (quad.sum(&pw) - 1.0).abs();
        if !(mass <= 1e-3) {
            skipped.push((
                i,
                format!("mass error {mass:.3e}: not a bijection of the cube"),
            ));
            continue;
        }
        slack = slack.max(mass);
        evaluated += 1;
        let js = js_values(&pw, &ps, quad).value;
        dg = dg.min(js);
        let (_, best_loss) = maximize_population_loss(model, &ps, &pw, quad, search)?;
        dd = dd.max(js - LN_2 - best_loss);
    }
    if evaluated == 0 {
        return Err(Error::InvalidParam("no valid generator on the grid".into()));
    }
    Ok(OracleTerms {
        delta_g: dg.max(0.0),
        delta_d: dd.max(0.0),
        delta_g_raw: dg,
        delta_d_raw: dd,
        grid_spec: GridSpec {
            generators: gen_grid.len(),
            evaluated,
            skipped,
            search: search.clone(),
            scheme_id: quad.id(),
            quadrature_slack: slack,
        },
    })
}

// ---------------------------------------------------------------------------
// Deviation bounds

/// Sample size, class dimensions and confidence level of a deviation bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochasticSetting {
    pub n: usize,
    pub d_g: usize,
    pub d_d: usize,
    /// Failure probability δ.
    pub delta: f64,
}

impl StochasticSetting {
    fn check(&self) -> Result<()> {
        if self.n == 0 || !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParam(format!(
                "need n ≥ 1 and δ ∈ (0,1), got {self:?}"
            )));
        }
        Ok(())
    }
}

/// `√(C_var(9JS + Δ)ln(2/δ)/(2n)) + 2C_D ln(2/δ)/(3n)` for a single pair.
pub fn bernstein_rhs(
    js: f64,
    gap: f64,
    n: usize,
    delta: f64,
    bundle: &ConstantsBundle,
) -> Result<f64> {
    if n == 0 || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParam(format!(
            "need n ≥ 1, δ ∈ (0,1); got {n}, {delta}"
        )));
    }
    let l = (2.0 / delta).ln();
    let nf = n as f64;
    let v = (9.0 * js.max(0.0) + gap.max(0.0)) * bundle.c_var * l / (2.0 * nf);
    Ok(v.sqrt() + 2.0 * bundle.c_d * l / (3.0 * nf))
}

/// `ε = C_var T'/(C_eps n) ∧ C_var²T'²/(𝗅_p² n²) ∧ 1`, `T' = (d_𝒢+d_𝒟)ln(2n) + ln(8/δ)`.
pub fn default_eps(setting: &StochasticSetting, bundle: &ConstantsBundle) -> Result<f64> {
    setting.check()?;
    let nf = setting.n as f64;
    let t = (setting.d_g + setting.d_d) as f64 * (2.0 * nf).ln() + (8.0 / setting.delta).ln();
    let a = bundle.c_var * t / (bundle.c_eps_net * nf);
    let b = (bundle.c_var * t).powi(2) / (bundle.l_p * nf).powi(2);
    Ok(a.min(b).min(1.0))
}

/// Uniform deviation bound over the whole parameter box:
/// `3C_eps ε + √𝗅_p ε^{1/2} + 4√(C_var JS T/(2n)) + √(C_var Δ T/(2n)) + 2(C_var+C_D)T/(3n)`
/// with `T = (d_𝒢+d_𝒟)ln(2/ε) + ln(2/δ)`.
pub fn uniform_bound_rhs(
    js: f64,
    gap: f64,
    eps: f64,
    setting: &StochasticSetting,
    bundle: &ConstantsBundle,
) -> Result<f64> {
    setting.check()?;
    if !(eps > 0.0 && eps <= 2.0) {
        return Err(Error::InvalidParam(format!(
            "ε must lie in (0,2], got {eps}"
        )));
    }
    let nf = setting.n as f64;
    let t = (setting.d_g + setting.d_d) as f64 * (2.0 / eps).ln() + (2.0 / setting.delta).ln();
    let c = bundle.c_var;
    Ok(3.0 * bundle.c_eps_net * eps
        + bundle.l_p.sqrt() * eps.sqrt()
        + 4.0 * (c * js.max(0.0) * t / (2.0 * nf)).sqrt()
        + (c * gap.max(0.0) * t / (2.0 * nf)).sqrt()
        + 2.0 * (c + bundle.c_d) * t / (3.0 * nf))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRhs {
    /// `𝗅_𝒢𝗅_X ∨ 𝗅_Θ ∨ 𝗅_p ∨ 1`.
    pub lipschitz_max: f64,
    /// `(d_𝒢+d_𝒟) ln(2·lipschitz_max·n) + ln(8/δ)`.
    pub complexity: f64,
    pub sqrt_term: f64,
    pub linear_term: f64,
    pub value: f64,
    pub caveat: String,
}

/// Structural right side of the oracle inequality with unit multiplicative constant.
pub fn oracle_rhs(
    terms: &OracleTerms,
    setting: &StochasticSetting,
    bundle: &ConstantsBundle,
) -> Result<OracleRhs> {
    setting.check()?;
    let nf = setting.n as f64;
    let lip = (bundle.l_g * bundle.l_x)
        .max(bundle.l_theta)
        .max(bundle.l_p)
        .max(1.0);
    let complexity =
        (setting.d_g + setting.d_d) as f64 * (2.0 * lip * nf).ln() + (8.0 / setting.delta).ln();
    let sqrt_term = ((terms.delta_g + terms.delta_d) * complexity / nf).sqrt();
    let linear_term = complexity / nf;
    Ok(OracleRhs {
        lipschitz_max: lip,
        complexity,
        sqrt_term,
        linear_term,
        value: sqrt_term + linear_term,
        caveat: "unit multiplicative constant; the true bound carries an unspecified factor depending on D_min and D_max"
            .into(),
    })
}

// ---------------------------------------------------------------------------
// Monte-Carlo checks

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationCheckConfig {
    pub replicates: usize,
    pub delta: f64,
    pub n: usize,
    /// Net resolution of the uniform bound reported alongside; `None` uses [`default_eps`].
    pub eps_net: Option<f64>,
    pub seed: u64,
}

impl Default for ConcentrationCheckConfig {
    fn default() -> Self {
        Self {
            replicates: 10_000,
            delta: 0.05,
            n: 500,
            eps_net: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub config: ConcentrationCheckConfig,
    pub parts: DeltaParts,
    /// Empirical (1−δ)-quantile of `|L_n − L|`.
    pub quantile: f64,
    pub mean_abs_deviation: f64,
    pub bernstein_rhs: f64,
    pub eps_net: f64,
    pub uniform_rhs: f64,
    pub pass: bool,
    pub warning: Option<String>,
}

/// Draws `R` independent datasets of `n` real samples `g*(U)` and `n` latent
/// points, and compares the empirical (1−δ)-quantile of `|L_n(w,θ) − L(w,θ)|`
/// with the per-pair Bernstein bound. Replicate `r` uses its own seeded stream.
pub fn concentration_monte_carlo<T: SmoothMap>(
    model: &GanModel,
    w: &[f64],
    theta: &[f64],
    target: &GeneratorDensity<T>,
    bundle: &ConstantsBundle,
    config: &ConcentrationCheckConfig,
) -> Result<ConcentrationReport> {
    if config.replicates < 100 || !(config.delta > 0.0 && config.delta < 1.0) || config.n == 0 {
        return Err(Error::InvalidParam(format!(
            "need R ≥ 100, δ ∈ (0,1), n ≥ 1; got {config:?}"
        )));
    }
    let gen = model.generator(w)?;
    let disc = model.discriminator(theta)?;
    let quad = aligned_quadrature(&gen, &disc.net, 24)?;
    let ps = target.tabulate(&quad)?;
    let pw = tabulate_generator(&gen, &quad)?;
    let parts = delta_parts_tabulated(&disc, &ps, &pw, &quad)?;
    let d = model.dim();
    let devs = crate::par::map_indices(config.replicates, |r| -> Result<f64> {
        let mut rng =
            ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(0x9E37_79B9).wrapping_add(r as u64));
        let real: Vec<Vec<f64>> = (0..config.n)
            .map(|_| {
                target
                    .map
                    .eval(&(0..d).map(|_| rng.gen::<f64>()).collect::<Vec<_>>())
            })
            .collect();
        let latent: Vec<Vec<f64>> = (0..config.n)
            .map(|_| (0..d).map(|_| rng.gen::<f64>()).collect())
            .collect();
        Ok((empirical_loss_samples(&gen, &disc, &real, &latent)? - parts.loss).abs())
    });
    let mut devs = devs.into_iter().collect::<Result<Vec<_>>>()?;
    devs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let r = devs.len();
    let k = (((1.0 - config.delta) * r as f64).ceil() as usize).clamp(1, r) - 1;
    let quantile = devs[k];
    let mean_abs_deviation = devs.iter().sum::<f64>() / r as f64;
    let rhs = bernstein_rhs(parts.js, parts.delta, config.n, config.delta, bundle)?;
    let setting = StochasticSetting {
        n: config.n,
        d_g: model.gen_architecture().param_count(),
        d_d: model.disc_architecture().param_count(),
        delta: config.delta,
    };
    let eps = match config.eps_net {
        Some(e) => e,
        None => default_eps(&setting, bundle)?,
    };
    let uniform_rhs = uniform_bound_rhs(parts.js, parts.delta, eps, &setting, bundle)?;
    let warning = (r as f64 * config.delta < 10.0).then(|| {
        format!(
            "R·δ = {:.1} < 10: the empirical quantile is poorly resolved",
            r as f64 * config.delta
        )
    });
    Ok(ConcentrationReport {
        config: config.clone(),
        parts,
        quantile,
        mean_abs_deviation,
        bernstein_rhs: rhs,
        eps_net: eps,
        uniform_rhs,
        pass: quantile <= rhs,
        warning,
    })
}

/// Generator and discriminator parameter pairs for the loss-Lipschitz check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamPair {
    pub w: (Vec<f64>, Vec<f64>),
    pub theta: (Vec<f64>, Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub pairs: usize,
    pub w_side_failures: usize,
    pub theta_side_failures: usize,
    /// Largest observed `|ΔL_n| / bound` on each side.
    pub w_side_max_ratio: f64,
    pub theta_side_max_ratio: f64,
    pub pass: bool,
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// `|L_n(w₁,θ) − L_n(w₂,θ)| ≤ 𝗅_𝒢𝗅_X‖w₁−w₂‖_∞/(2−2D_max)` and
/// `|L_n(w,θ₁) − L_n(w,θ₂)| ≤ 𝗅_Θ‖θ₁−θ₂‖_∞/(D_min ∧ (1−D_max))` on every pair.
/// The constants are valid for generators mapping the latent sample into the
/// cube, which is verified (points outside are an error).
pub fn loss_lipschitz_check(
    model: &GanModel,
    pairs: &[ParamPair],
    data: &crate::gan_core::Dataset,
    bundle: &ConstantsBundle,
) -> Result<LipschitzReport> {
    let in_cube = |g: &ReQUNetwork| -> Result<()> {
        for y in &data.latent_samples {
            let x = g.forward(y)?;
            if x.iter().any(|v| !(-1e-12..=1.0 + 1e-12).contains(v)) {
                return Err(Error::InvalidParam(format!(
                    "generated point {x:?} leaves the cube"
                )));
            }
        }
        Ok(())
    };
    let w_coef = bundle.l_g * bundle.l_x / (2.0 - 2.0 * model.d_max);
    let t_coef = bundle.l_theta / model.d_min.min(1.0 - model.d_max);
    let results = crate::par::map_indices(pairs.len(), |i| -> Result<(f64, f64)> {
        let p = &pairs[i];
        let (g1, g2) = (model.generator(&p.w.0)?, model.generator(&p.w.1)?);
        in_cube(&g1)?;
        in_cube(&g2)?;
        let (d1, d2) = (
            model.discriminator(&p.theta.0)?,
            model.discriminator(&p.theta.1)?,
        );
        let l11 = empirical_loss_samples(&g1, &d1, &data.real_samples, &data.latent_samples)?;
        let l21 = empirical_loss_samples(&g2, &d1, &data.real_samples, &data.latent_samples)?;
        let l12 = empirical_loss_samples(&g1, &d2, &data.real_samples, &data.latent_samples)?;
        let ratio = |obs: f64, bound: f64| {
            if bound > 0.0 {
                obs / bound
            } else if obs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        };
        Ok((
            ratio((l11 - l21).abs(), w_coef * sup_dist(&p.w.0, &p.w.1)),
            ratio((l11 - l12).abs(), t_coef * sup_dist(&p.theta.0, &p.theta.1)),
        ))
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let w_side_failures = results.iter().filter(|r| r.0 > 1.0).count();
    let theta_side_failures = results.iter().filter(|r| r.1 > 1.0).count();
    Ok(LipschitzReport {
        pairs: pairs.len(),
        w_side_failures,
        theta_side_failures,
        w_side_max_ratio: results.iter().map(|r| r.0).fold(0.0, f64::max),
        theta_side_max_ratio: results.iter().map(|r| r.1).fold(0.0, f64::max),
        pass: w_side_failures == 0 && theta_side_failures == 0,
    })
}
