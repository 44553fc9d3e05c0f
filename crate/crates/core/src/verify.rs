//! Property suites over every module, each returning per-check observations and
//! pass flags. Suites are deterministic functions of their seed; the reports carry
//! no timings so that two runs can be compared byte for byte.

use crate::divergence::{chi_sym, js, js_sqrt_metric_values, js_values, sandwich_values};
use crate::error::Result;
use crate::gan_core::{kinked_init, Dataset, GanModel};
use crate::generator_density::{
    default_knots, density_lipschitz_constant, grid_h1_distance, random_spline_generator_1d,
    random_triangular_generator_2d, GeneratorDensity, SineShift,
};
use crate::minimax_lab::{run_lower_bound_lab, LowerBoundLabConfig};
use crate::oracle_audit::{
    concentration_monte_carlo, constants, constants_double_entry, delta_d_sandwich_check,
    discriminator_h1_bound, loss_lipschitz_check, ConcentrationCheckConfig, ConstantsBundle,
    ParamPair,
};
use crate::quadrature::{uniform_grid, QuadratureScheme};
use crate::requ_net::{
    hidden_bounds, perturbation_bounds, project_unit_box, Architecture, BoundKind, Partial,
    ReQUNetwork,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

/// One observed quantity against its limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, observed: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            limit,
            pass: observed <= limit,
        }
    }

    pub fn at_least(name: &str, observed: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            limit,
            pass: observed >= limit,
        }
    }

    /// `observed` counts passing cases out of `limit` required.
    pub fn all_of(name: &str, passed: usize, total: usize) -> Self {
        Self {
            name: name.into(),
            observed: passed as f64,
            limit: total as f64,
            pass: passed == total && total > 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl SuiteReport {
    fn new(name: &str, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self {
            name: name.into(),
            checks,
            pass,
        }
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MasterReport {
    pub seed: u64,
    pub suites: Vec<SuiteReport>,
    pub pass: bool,
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

// ---------------------------------------------------------------------------

/// JS closed forms, symmetry, range, the χ² sandwich on random push-forward pairs
/// (100 in d=1, 25 in d=2) and the √JS triangle inequality.
pub fn divergence_suite(seed: u64) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let halves = QuadratureScheme::piecewise_gauss_legendre(&[0.5], 64);
    let uniform = |_: &[f64]| 1.0;
    let left = |x: &[f64]| if x[0] <= 0.5 { 2.0 } else { 0.0 };
    let right = |x: &[f64]| if x[0] > 0.5 { 2.0 } else { 0.0 };
    let worked = js(uniform, left, &halves).value;
    checks.push(Check::at_most(
        "worked pair JS error",
        (worked - 0.75 * (4.0f64 / 3.0).ln()).abs(),
        1e-6,
    ));
    let chi = chi_sym(uniform, left, &halves).value;
    checks.push(Check::at_most(
        "worked pair chi_sym error",
        (chi - 2.0 / 3.0).abs(),
        1e-6,
    ));
    let disjoint = js(left, right, &halves).value;
    checks.push(Check::at_most(
        "disjoint support JS error",
        (disjoint - LN_2).abs(),
        1e-6,
    ));

    let mut r = rng(seed, 1);
    let quad1 = QuadratureScheme::default_for(1);
    let knots = default_knots(4);
    let tab1 = |net: &ReQUNetwork| GeneratorDensity::new(net, 2.0)?.tabulate(&quad1);
    let (mut asym, mut lo, mut hi, mut self_js) =
        (0.0f64, f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    let mut sandwich1 = 0;
    for _ in 0..100 {
        let p = tab1(&random_spline_generator_1d(&knots, 0.5, 2.0, &mut r))?;
        let q = tab1(&random_spline_generator_1d(&knots, 0.5, 2.0, &mut r))?;
        let a = js_values(&p, &q, &quad1).value;
        let b = js_values(&q, &p, &quad1).value;
        asym = asym.max((a - b).abs());
        lo = lo.min(a);
        hi = hi.max(a);
        self_js = self_js.max(js_values(&p, &p, &quad1).value.abs());
        sandwich1 += sandwich_values(&p, &q, &quad1).pass as usize;
    }
    checks.push(Check::at_most("JS asymmetry", asym, 1e-12));
    checks.push(Check::at_least("JS minimum", lo, -1e-12));
    checks.push(Check::at_most("JS maximum", hi, LN_2 + 1e-9));
    checks.push(Check::at_most("JS(p,p)", self_js, 1e-12));
    checks.push(Check::all_of("sandwich pairs d=1", sandwich1, 100));

    let quad2 = QuadratureScheme::default_for(2);
    let mut sandwich2 = 0;
    for _ in 0..25 {
        let p = GeneratorDensity::new(random_triangular_generator_2d(0.6, &mut r), 2.0)?
            .tabulate(&quad2)?;
        let q = GeneratorDensity::new(random_triangular_generator_2d(0.6, &mut r), 2.0)?
            .tabulate(&quad2)?;
        sandwich2 += sandwich_values(&p, &q, &quad2).pass as usize;
    }
    checks.push(Check::all_of("sandwich pairs d=2", sandwich2, 25));

    let mut triangle = 0;
    for _ in 0..100 {
        let p = tab1(&random_spline_generator_1d(&knots, 0.5, 2.0, &mut r))?;
        let q = tab1(&random_spline_generator_1d(&knots, 0.5, 2.0, &mut r))?;
        let s = tab1(&random_spline_generator_1d(&knots, 0.5, 2.0, &mut r))?;
        triangle += js_sqrt_metric_values(&p, &q, &s, &quad1) as usize;
    }
    checks.push(Check::all_of("sqrt-JS triangle triples", triangle, 100));
    Ok(SuiteReport::new("divergence", checks))
}

// ---------------------------------------------------------------------------

/// `count` points in `[0,1]^dim`: an even grid in the first coordinate, Kronecker
/// offsets (√2, √3) in the others.
pub fn probe_points(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let alphas = [2f64.sqrt(), 3f64.sqrt(), 5f64.sqrt(), 7f64.sqrt()];
    (0..count)
        .map(|i| {
            (0..dim)
                .map(|k| {
                    if k == 0 {
                        i as f64 / (count - 1).max(1) as f64
                    } else {
                        (i as f64 * alphas[(k - 1) % alphas.len()]).fract()
                    }
                })
                .collect()
        })
        .collect()
}

fn random_arch<R: Rng>(depth: usize, r: &mut R) -> Result<Architecture> {
    Architecture::new((0..depth + 2).map(|_| r.gen_range(1..=3)).collect())
}

/// Central-difference Jacobian with step `h`.
pub fn finite_difference_jacobian(net: &ReQUNetwork, x: &[f64], h: f64) -> Result<Vec<Vec<f64>>> {
    let mut cols = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[k] += h;
        b[k] -= h;
        let (fa, fb) = (net.forward(&a)?, net.forward(&b)?);
        cols.push(
            fa.iter()
                .zip(&fb)
                .map(|(u, v)| (u - v) / (2.0 * h))
                .collect(),
        );
    }
    Ok(cols)
}

/// Parameter-perturbation bounds on 100 paired nets (N ≤ 2, widths ≤ 3), hidden
/// activation bounds on the same nets, and Jacobians against finite differences.
pub fn network_suite(seed: u64) -> Result<SuiteReport> {
    let mut r = rng(seed, 2);
    let eps = [1e-4, 1e-3, 1e-2];
    let (mut sup_ratio, mut jac_ratio, mut hidden_ratio) = (0.0f64, 0.0f64, 0.0f64);
    let mut jac_pairs = 0;
    for t in 0..100 {
        let depth = t % 3;
        let arch = random_arch(depth, &mut r)?;
        let e = eps[(t / 3) % 3];
        let a = ReQUNetwork::random(arch.clone(), 1.0, &mut r);
        let mut v = a.params().values;
        v.iter_mut().for_each(|x| *x += e * r.gen_range(-1.0..=1.0));
        project_unit_box(&mut v);
        let b = ReQUNetwork::from_params(arch.clone(), None, &v)?;
        let dist = a.params().sup_distance(&b.params());
        debug_assert!(dist <= e);
        let bounds = perturbation_bounds(&arch);
        for x in probe_points(arch.input_dim(), 65) {
            let (fa, fb) = (a.forward(&x)?, b.forward(&x)?);
            let d = fa
                .iter()
                .zip(&fb)
                .map(|(u, w)| (u - w).abs())
                .fold(0.0, f64::max);
            sup_ratio = sup_ratio.max(d / (e * bounds.sup_coeff.value));
            if depth >= 1 {
                let dj = (a.jacobian(&x)? - b.jacobian(&x)?).amax();
                jac_ratio = jac_ratio.max(dj / (e * bounds.jac_coeff.value));
            }
        }
        if depth >= 1 {
            jac_pairs += 1;
        }
        // ‖B_{k,i}(x)‖_∞ on inputs in [-1,1]^{p_{i−1}}
        let p = arch.widths();
        for k in 1..=depth {
            for i in 1..=k {
                let bound = hidden_bounds(&arch, BoundKind::HiddenSup { k, i }, 1.0)?.value;
                for x in probe_points(p[i - 1], 65) {
                    let x: Vec<f64> = x.iter().map(|u| 2.0 * u - 1.0).collect();
                    let h = a.partial_forward(Partial::B { k, i }, &x)?;
                    hidden_ratio =
                        hidden_ratio.max(h.iter().fold(0.0f64, |m, u| m.max(u.abs())) / bound);
                }
            }
        }
    }
    let mut fd_err = 0.0f64;
    let mut fd_cases = 0;
    while fd_cases < 100 {
        let arch = random_arch(1 + fd_cases % 2, &mut r)?;
        let net = ReQUNetwork::random(arch.clone(), 1.0, &mut r);
        let x: Vec<f64> = (0..arch.input_dim())
            .map(|_| r.gen_range(0.0..1.0))
            .collect();
        let tr = net.trace(&x)?;
        if tr.pre.iter().flatten().any(|z| z.abs() < 1e-3) {
            continue;
        }
        let j = net.jacobian(&x)?;
        let fd = finite_difference_jacobian(&net, &x, 1e-5)?;
        let scale = j.amax().max(1e-6);
        for (k, col) in fd.iter().enumerate() {
            for (row, v) in col.iter().enumerate() {
                fd_err = fd_err.max((j[(row, k)] - v).abs() / scale);
            }
        }
        fd_cases += 1;
    }
    Ok(SuiteReport::new(
        "network",
        vec![
            Check::at_most("sup perturbation / bound", sup_ratio, 1.0),
            Check::at_most("Jacobian perturbation / bound", jac_ratio, 1.0),
            Check::at_least("pairs with N ≥ 1", jac_pairs as f64, 60.0),
            Check::at_most("hidden activation / bound", hidden_ratio, 1.0),
            Check::at_most("Jacobian finite-difference rel. error", fd_err, 1e-5),
        ],
    ))
}

// ---------------------------------------------------------------------------

/// Normalization, inversion roundtrip, density bounds and density Lipschitzness.
pub fn density_suite(seed: u64) -> Result<SuiteReport> {
    let mut r = rng(seed, 3);
    let lambda: f64 = 2.0;
    // knots on the 257-point audit grid, so the audit sees every slope extreme
    let knots = default_knots(3);
    let quad1 = QuadratureScheme::default_for(1);
    let quad2 = QuadratureScheme::default_for(2);
    let (mut mass_err, mut roundtrip, mut bound_viol) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    let mut audited = 0;
    let mut track =
        |g: &GeneratorDensity<ReQUNetwork>, quad: &QuadratureScheme, res: usize| -> Result<()> {
            let d = g.dim();
            mass_err = mass_err.max((quad.sum(&g.tabulate(quad)?) - 1.0).abs());
            let grid = uniform_grid(d, res);
            for x in &grid {
                let y = g.invert(x)?;
                let back = g.map.forward(&y)?;
                roundtrip = roundtrip.max(
                    back.iter()
                        .zip(x)
                        .map(|(u, v)| (u - v).abs())
                        .fold(0.0, f64::max),
                );
            }
            if g.lambda_audit(if d == 1 { 257 } else { 65 }).pass {
                audited += 1;
                let (lo, hi) = (lambda.powi(-(d as i32)), lambda.powi(d as i32));
                for x in &grid {
                    let p = g.density(x)?;
                    bound_viol = bound_viol.max(lo - p).max(p - hi);
                }
            }
            Ok(())
        };
    for _ in 0..20 {
        let g = GeneratorDensity::new(
            random_spline_generator_1d(&knots, 0.5, lambda, &mut r),
            lambda,
        )?;
        track(&g, &quad1, 33)?;
    }
    for _ in 0..10 {
        let g = GeneratorDensity::new(random_triangular_generator_2d(0.5, &mut r), lambda)?;
        track(&g, &quad2, 33)?;
    }

    let y_grid = uniform_grid(1, 257);
    let x_grid = uniform_grid(1, 129);
    let mut lip_ratio = 0.0f64;
    for _ in 0..50 {
        let u = random_spline_generator_1d(&knots, 0.5, lambda, &mut r);
        let v = random_spline_generator_1d(&knots, 0.5, lambda, &mut r);
        let (gu, gv) = (
            GeneratorDensity::new(&u, lambda)?,
            GeneratorDensity::new(&v, lambda)?,
        );
        let h_g = gu
            .holder_diagnostics(2.0, 257)?
            .norm()
            .max(gv.holder_diagnostics(2.0, 257)?.norm());
        let l2 = density_lipschitz_constant(1, lambda, h_g);
        let dist = grid_h1_distance(&u, &v, &y_grid);
        let mut gap = 0.0f64;
        for x in &x_grid {
            gap = gap.max((gu.density(x)? - gv.density(x)?).abs());
        }
        if dist > 0.0 {
            lip_ratio = lip_ratio.max(gap / (l2 * dist));
        }
    }
    Ok(SuiteReport::new(
        "density",
        vec![
            Check::at_most("normalization error", mass_err, 1e-4),
            Check::at_most("inversion roundtrip", roundtrip, 1e-8),
            Check::at_least("audited generators", audited as f64, 20.0),
            Check::at_most("density bound violation", bound_viol, 0.0),
            Check::at_most("density gap / (L2 · H1 distance)", lip_ratio, 1.0),
        ],
    ))
}

// ---------------------------------------------------------------------------

/// Small fixed model shared by the oracle and concentration suites.
pub fn audit_model() -> GanModel {
    GanModel::new(vec![1, 7, 1], vec![1, 4, 1], 0.2, 0.8).expect("valid architectures")
}

pub fn audit_bundle(m: &GanModel, lambda: f64, h_g: f64) -> Result<ConstantsBundle> {
    let da = m.disc_architecture();
    let h_d = discriminator_h1_bound(&da, m.d_min, m.d_max);
    constants(
        m.d_min,
        m.d_max,
        &m.gen_architecture(),
        &da,
        h_d,
        1,
        lambda,
        h_g,
    )
}

/// Generator–discriminator sandwich on 100 random pairs, nonnegativity of the gap,
/// loss Lipschitzness on 1000 parameter pairs, and double-entry constants.
pub fn oracle_suite(seed: u64) -> Result<SuiteReport> {
    let m = audit_model();
    let target = GeneratorDensity::new(SineShift::ground_truth(), 2.0)?;
    let mut r = rng(seed, 4);
    let knots = default_knots(4);
    let (mut sandwich, mut nonneg) = (0, 0);
    let mut min_gap = f64::INFINITY;
    for _ in 0..100 {
        let w = random_spline_generator_1d(&knots, 0.4, 2.0, &mut r)
            .params()
            .values;
        let th = kinked_init(&m.disc_architecture(), 1.0, &mut r)?
            .params()
            .values;
        let c = delta_d_sandwich_check(&m, &w, &th, |x| target.density(x).unwrap_or(f64::NAN))?;
        sandwich += (c.lower_ok && c.upper_ok) as usize;
        nonneg += c.nonnegative as usize;
        min_gap = min_gap.min(c.parts.delta);
    }
    let bundle = audit_bundle(&m, 2.0, 2.0)?;
    let data = Dataset::from_map(&SineShift::ground_truth(), 64, seed);
    let pairs: Vec<ParamPair> = (0..1000)
        .map(|_| {
            Ok(ParamPair {
                w: (
                    random_spline_generator_1d(&knots, 0.5, 2.0, &mut r)
                        .params()
                        .values,
                    random_spline_generator_1d(&knots, 0.5, 2.0, &mut r)
                        .params()
                        .values,
                ),
                theta: (
                    kinked_init(&m.disc_architecture(), 1.0, &mut r)?
                        .params()
                        .values,
                    kinked_init(&m.disc_architecture(), 1.0, &mut r)?
                        .params()
                        .values,
                ),
            })
        })
        .collect::<Result<_>>()?;
    let lip = loss_lipschitz_check(&m, &pairs, &data, &bundle)?;
    let mut entries = 0;
    let mut agree = 0;
    for (g, d) in [
        (vec![1, 1, 1], vec![1, 2, 1]),
        (vec![1, 7, 1], vec![1, 4, 1]),
        (vec![1, 3, 2, 1], vec![1, 3, 3, 1]),
        (vec![2, 3, 2], vec![2, 2, 1]),
    ] {
        let (ga, da) = (Architecture::new(g)?, Architecture::new(d)?);
        for (lo, hi) in [(0.2, 0.8), (0.5, 0.5), (0.1, 0.6), (0.45, 0.95)] {
            let h = discriminator_h1_bound(&da, lo, hi);
            let rep = constants_double_entry(lo, hi, &ga, &da, h, ga.input_dim(), 1.5, 2.0, 1e-12)?;
            entries += rep.entries.len();
            agree += rep.entries.len() * rep.pass as usize;
        }
    }
    Ok(SuiteReport::new(
        "oracle",
        vec![
            Check::all_of("sandwich pairs", sandwich, 100),
            Check::all_of("gap ≥ −1e-8", nonneg, 100),
            Check::at_least("minimum gap", min_gap, -1e-8),
            Check::at_least("Lipschitz pairs", lip.pairs as f64, 1000.0),
            Check::at_most(
                "Lipschitz failures",
                (lip.w_side_failures + lip.theta_side_failures) as f64,
                0.0,
            ),
            Check::at_most("w-side ratio", lip.w_side_max_ratio, 1.0),
            Check::at_most("theta-side ratio", lip.theta_side_max_ratio, 1.0),
            Check::all_of("double-entry constants", agree, entries),
        ],
    ))
}

/// 95% quantile of `|L_n − L|` over `replicates` datasets of size 500 against the
/// Bernstein bound.
pub fn concentration_suite(seed: u64, replicates: usize) -> Result<SuiteReport> {
    let m = audit_model();
    let target = GeneratorDensity::new(SineShift::ground_truth(), 2.0)?;
    let bundle = audit_bundle(&m, 2.0, 2.0)?;
    let mut r = rng(seed, 5);
    let w = random_spline_generator_1d(&default_knots(4), 0.4, 2.0, &mut r)
        .params()
        .values;
    let th = kinked_init(&m.disc_architecture(), 1.0, &mut r)?
        .params()
        .values;
    let cfg = ConcentrationCheckConfig {
        replicates,
        delta: 0.05,
        n: 500,
        seed,
        ..Default::default()
    };
    let rep = concentration_monte_carlo(&m, &w, &th, &target, &bundle, &cfg)?;
    Ok(SuiteReport::new(
        "concentration",
        vec![
            Check::at_most("quantile of |L_n − L|", rep.quantile, rep.bernstein_rhs),
            Check::at_most(
                "resolution warning",
                rep.warning.is_some() as u8 as f64,
                0.0,
            ),
        ],
    ))
}

/// Fisher-information slope and the score inequality.
pub fn fisher_suite(seed: u64) -> Result<SuiteReport> {
    let rep = run_lower_bound_lab(&LowerBoundLabConfig {
        seed,
        ..Default::default()
    })?;
    Ok(SuiteReport::new(
        "fisher",
        vec![
            Check::at_most(
                "Fisher slope deviation",
                (rep.fisher_slope - rep.fisher_target).abs(),
                0.2,
            ),
            Check::at_most(
                "closed form vs quadrature (rel.)",
                (rep.fisher[0].1 - rep.fisher_closed_form).abs() / rep.fisher_closed_form,
                1e-6,
            ),
            Check::at_least(
                "score bound precondition",
                rep.score.precondition_ok as u8 as f64,
                1.0,
            ),
            Check::at_least(
                "min |score| over r0-ball",
                rep.score.min_abs_score,
                rep.score.threshold,
            ),
        ],
    ))
}

/// Slope of the assembled van Trees bound over the bandwidth ladder.
pub fn lower_bound_suite(seed: u64) -> Result<SuiteReport> {
    let rep = run_lower_bound_lab(&LowerBoundLabConfig {
        seed,
        ..Default::default()
    })?;
    Ok(SuiteReport::new(
        "lower_bound",
        vec![
            Check::at_most(
                "bound slope deviation",
                (rep.bound_slope - rep.bound_target).abs(),
                0.05,
            ),
            Check::at_most("prior energy radial vs MC (rel.)", rep.prior.rel_diff, 0.02),
            Check::at_least("ladder rungs", rep.rows.len() as f64, 9.0),
        ],
    ))
}

/// Every suite at its documented size.
pub fn verify_all(seed: u64) -> Result<MasterReport> {
    let suites = vec![
        divergence_suite(seed)?,
        network_suite(seed)?,
        density_suite(seed)?,
        oracle_suite(seed)?,
        concentration_suite(seed, 10_000)?,
        fisher_suite(seed)?,
        lower_bound_suite(seed)?,
    ];
    let pass = suites.iter().all(|s| s.pass);
    Ok(MasterReport { seed, suites, pass })
}
