use gdl_core::gan_core::{kinked_init, Dataset, GanModel};
use gdl_core::generator_density::{
    default_knots, random_spline_generator_1d, GeneratorDensity, SineShift,
};
use gdl_core::oracle_audit::*;
use gdl_core::quadrature::QuadratureScheme;
use gdl_core::requ_net::Architecture;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::LN_2;

fn model() -> GanModel {
    GanModel::new(vec![1, 7, 1], vec![1, 4, 1], 0.2, 0.8).unwrap()
}

fn target() -> GeneratorDensity<SineShift> {
    GeneratorDensity::new(SineShift::ground_truth(), 2.0).unwrap()
}

fn bundle(m: &GanModel) -> ConstantsBundle {
    let da = m.disc_architecture();
    let h_d = discriminator_h1_bound(&da, m.d_min, m.d_max);
    constants(
        m.d_min,
        m.d_max,
        &m.gen_architecture(),
        &da,
        h_d,
        1,
        2.0,
        2.0,
    )
    .unwrap()
}

#[test]
fn sandwich_holds_on_random_pairs() {
    let m = model();
    let t = target();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let knots = default_knots(4);
    for _ in 0..20 {
        let w = random_spline_generator_1d(&knots, 0.4, 2.0, &mut rng)
            .params()
            .values;
        let th = kinked_init(&m.disc_architecture(), 1.0, &mut rng)
            .unwrap()
            .params()
            .values;
        let r = delta_d_sandwich_check(&m, &w, &th, |x| t.density(x).unwrap()).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.parts.mass_error < 1e-9, "{r:?}");
    }
}

#[test]
fn half_discriminator_gap_equals_js() {
    // D ≡ ½ (all-zero discriminator squashes to the midpoint of [0.2, 0.8])
    let m = model();
    let quad = QuadratureScheme::piecewise_gauss_legendre(&[0.5], 32);
    let w = gdl_core::generator_density::identity_generator_1d(&default_knots(4))
        .params()
        .values;
    let th = vec![0.0; m.disc_architecture().param_count()];
    let p = delta_parts(&m, &w, &th, |x| if x[0] <= 0.5 { 2.0 } else { 0.0 }, &quad).unwrap();
    assert!((p.loss + LN_2).abs() < 1e-12);
    assert!((p.delta - 0.215761).abs() < 1e-6, "{p:?}");
}

#[test]
fn realizable_target_has_zero_generator_term() {
    let m = model();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let knots = default_knots(4);
    let star = random_spline_generator_1d(&knots, 0.3, 2.0, &mut rng);
    let other = random_spline_generator_1d(&knots, 0.3, 2.0, &mut rng);
    let gs = GeneratorDensity::new(star.clone(), 2.0).unwrap();
    let quad = QuadratureScheme::composite_gauss_legendre(1, 16, 8);
    let search = DiscriminatorSearch {
        starts: 2,
        steps: 60,
        ..Default::default()
    };
    let grid = vec![
        other.params().values,
        star.params().values,
        vec![1.0; m.gen_architecture().param_count()],
    ];
    let terms = delta_terms(&m, &grid, &search, |x| gs.density(x).unwrap(), &quad).unwrap();
    assert!(terms.delta_g < 1e-8, "{terms:?}");
    assert_eq!(terms.grid_spec.evaluated, 2);
    assert_eq!(terms.grid_spec.skipped.len(), 1);
}

#[test]
fn double_entry_constants_agree() {
    for (g, d) in [
        (vec![1, 1, 1], vec![1, 2, 1]),
        (vec![1, 3, 2, 1], vec![1, 3, 3, 1]),
        (vec![2, 3, 2], vec![2, 2, 1]),
    ] {
        let (ga, da) = (Architecture::new(g).unwrap(), Architecture::new(d).unwrap());
        for (lo, hi) in [(0.2, 0.8), (0.5, 0.5), (0.1, 0.6), (0.45, 0.95)] {
            let h = discriminator_h1_bound(&da, lo, hi);
            let r = constants_double_entry(lo, hi, &ga, &da, h, ga.input_dim(), 1.5, 2.0, 1e-12)
                .unwrap();
            assert!(r.pass, "{r:?}");
        }
    }
}

#[test]
fn oracle_rhs_example_and_monotonicity() {
    let b = ConstantsBundle {
        c_eps_net: 1.0,
        c_var: 1.0,
        c_d: 1.0,
        c_delta: 2.0,
        l_g: 256.0,
        l_theta: 2.0,
        l_x: 1.0,
        l_p: 3.0,
    };
    let terms = OracleTerms {
        delta_g: 0.004,
        delta_d: 0.006,
        delta_g_raw: 0.004,
        delta_d_raw: 0.006,
        grid_spec: GridSpec {
            generators: 1,
            evaluated: 1,
            skipped: vec![],
            search: DiscriminatorSearch::default(),
            scheme_id: String::new(),
            quadrature_slack: 0.0,
        },
    };
    let s = StochasticSetting {
        n: 4096,
        d_g: 20,
        d_d: 20,
        delta: 0.1,
    };
    let r = oracle_rhs(&terms, &s, &b).unwrap();
    let t = 40.0 * (2.0f64 * 256.0 * 4096.0).ln() + 80f64.ln();
    assert!((r.value - ((0.01 * t / 4096.0).sqrt() + t / 4096.0)).abs() < 1e-14);
    let r2 = oracle_rhs(&terms, &StochasticSetting { n: 8192, ..s }, &b).unwrap();
    assert!(r2.value < r.value);
    let r3 = oracle_rhs(&terms, &StochasticSetting { delta: 0.01, ..s }, &b).unwrap();
    assert!(r3.value > r.value);
    let zero = OracleTerms {
        delta_g: 0.0,
        delta_d: 0.0,
        ..terms
    };
    assert_eq!(oracle_rhs(&zero, &s, &b).unwrap().value, t / 4096.0);
}

#[test]
fn bernstein_is_monotone() {
    let m = model();
    let b = bundle(&m);
    let mut last = f64::INFINITY;
    for n in [10, 100, 1000, 10000] {
        let v = bernstein_rhs(0.2, 0.1, n, 0.05, &b).unwrap();
        assert!(v < last);
        last = v;
    }
    assert!(
        bernstein_rhs(0.2, 0.1, 100, 0.01, &b).unwrap()
            > bernstein_rhs(0.2, 0.1, 100, 0.05, &b).unwrap()
    );
}

#[test]
fn concentration_quantile_is_dominated() {
    let m = model();
    let b = bundle(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w = random_spline_generator_1d(&default_knots(4), 0.4, 2.0, &mut rng)
        .params()
        .values;
    let th = kinked_init(&m.disc_architecture(), 1.0, &mut rng)
        .unwrap()
        .params()
        .values;
    let cfg = ConcentrationCheckConfig {
        replicates: 1000,
        ..Default::default()
    };
    let r = concentration_monte_carlo(&m, &w, &th, &target(), &b, &cfg).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.warning.is_none());
    let again = concentration_monte_carlo(&m, &w, &th, &target(), &b, &cfg).unwrap();
    assert_eq!(r, again);
    let loose = ConcentrationCheckConfig {
        replicates: 200,
        delta: 0.999,
        ..cfg.clone()
    };
    assert!(
        concentration_monte_carlo(&m, &w, &th, &target(), &b, &loose)
            .unwrap()
            .pass
    );
    let coarse = ConcentrationCheckConfig {
        replicates: 100,
        ..cfg
    };
    assert!(
        concentration_monte_carlo(&m, &w, &th, &target(), &b, &coarse)
            .unwrap()
            .warning
            .is_some()
    );
}

#[test]
fn loss_is_lipschitz_in_parameters() {
    let m = model();
    let b = bundle(&m);
    let data = Dataset::from_map(&SineShift::ground_truth(), 64, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let knots = default_knots(4);
    let pairs: Vec<ParamPair> = (0..100)
        .map(|_| ParamPair {
            w: (
                random_spline_generator_1d(&knots, 0.5, 2.0, &mut rng)
                    .params()
                    .values,
                random_spline_generator_1d(&knots, 0.5, 2.0, &mut rng)
                    .params()
                    .values,
            ),
            theta: (
                kinked_init(&m.disc_architecture(), 1.0, &mut rng)
                    .unwrap()
                    .params()
                    .values,
                kinked_init(&m.disc_architecture(), 1.0, &mut rng)
                    .unwrap()
                    .params()
                    .values,
            ),
        })
        .collect();
    let r = loss_lipschitz_check(&m, &pairs, &data, &b).unwrap();
    assert!(r.pass, "{r:?}");
    let same = ParamPair {
        w: (pairs[0].w.0.clone(), pairs[0].w.0.clone()),
        theta: (pairs[0].theta.0.clone(), pairs[0].theta.0.clone()),
    };
    let r = loss_lipschitz_check(&m, &[same], &data, &b).unwrap();
    assert!(r.pass && r.w_side_max_ratio == 0.0);
}
