use gdl_core::generator_density::{
    default_knots, density_lipschitz_constant, grid_h1_distance, random_spline_generator_1d,
    triangular_generator_2d, GeneratorDensity, SineShift, SmoothMap,
};
use gdl_core::quadrature::{uniform_grid, QuadratureScheme};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spline(seed: u64) -> gdl_core::requ_net::ReQUNetwork {
    random_spline_generator_1d(
        &default_knots(4),
        0.4,
        2.0,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
}

/// Quadrature split where the density has kinks: at the images of the knots.
fn split_rule(net: &gdl_core::requ_net::ReQUNetwork) -> QuadratureScheme {
    let breaks: Vec<f64> = default_knots(4)
        .iter()
        .map(|t| net.eval(&[*t])[0])
        .collect();
    QuadratureScheme::piecewise_gauss_legendre(&breaks, 24)
}

#[test]
fn sine_shift_density_matches_closed_form() {
    let s = SineShift::ground_truth();
    let g = GeneratorDensity::new(s, 1.5).unwrap();
    for k in 1..20 {
        let y = k as f64 / 20.0;
        let x = s.eval(&[y]);
        let want = 1.0
            / (1.0 - 2.0 * std::f64::consts::PI * 0.05 * (2.0 * std::f64::consts::PI * y).cos());
        assert!((g.density(&x).unwrap() - want).abs() < 1e-9, "y = {y}");
    }
}

#[test]
fn triangular_density_matches_closed_form() {
    let (a1, a2, b) = (0.3, 0.2, -0.4);
    let net = triangular_generator_2d(a1, a2, b).unwrap();
    let g = GeneratorDensity::new(&net, 3.0).unwrap();
    for &(y1, y2) in &[(0.1, 0.9), (0.5, 0.5), (0.77, 0.23), (0.33, 0.66)] {
        let x = net.forward(&[y1, y2]).unwrap();
        let det = (1.0 + a1 * (1.0 - 2.0 * y1)) * (1.0 + (a2 + b * y1) * (1.0 - 2.0 * y2));
        assert!((g.density(&x).unwrap() - 1.0 / det).abs() < 1e-8);
        let y = g.invert(&x).unwrap();
        assert!((y[0] - y1).abs() < 1e-9 && (y[1] - y2).abs() < 1e-9);
    }
}

#[test]
fn triangular_density_has_unit_mass() {
    let net = triangular_generator_2d(0.25, -0.3, 0.35).unwrap();
    let g = GeneratorDensity::new(&net, 3.0).unwrap();
    let quad = QuadratureScheme::gauss_legendre(2, 32);
    let mass = quad.sum(&g.tabulate(&quad).unwrap());
    assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
}

#[test]
fn density_change_is_bounded_by_generator_distance() {
    let lambda = 2.0;
    let grid = uniform_grid(1, 129);
    let probes = uniform_grid(1, 33);
    for seed in 0..6 {
        let (a, b) = (spline(seed), spline(seed + 100));
        let (ga, gb) = (
            GeneratorDensity::new(&a, lambda).unwrap(),
            GeneratorDensity::new(&b, lambda).unwrap(),
        );
        let h1 = grid_h1_distance(&a, &b, &grid);
        // second-derivative bound of a 4-knot spline with |coefficients| ≤ 0.4
        let h_g = 2.0 * 0.4 * 6.0;
        let bound = density_lipschitz_constant(1, lambda, h_g) * h1;
        for x in &probes {
            let diff = (ga.density(x).unwrap() - gb.density(x).unwrap()).abs();
            assert!(diff <= bound, "seed {seed}, x {x:?}: {diff} > {bound}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spline_density_integrates_to_one(seed in 0u64..10_000) {
        let net = spline(seed);
        let g = GeneratorDensity::new(&net, 2.0).unwrap();
        let quad = split_rule(&net);
        let mass = quad.sum(&g.tabulate(&quad).unwrap());
        prop_assert!((mass - 1.0).abs() < 1e-9, "mass {}", mass);
    }

    #[test]
    fn density_reproduces_latent_expectations(seed in 0u64..10_000) {
        // ∫ φ(x) p(x) dx = ∫ φ(g(y)) dy for φ(x) = x² and φ(x) = cos(3x)
        let net = spline(seed);
        let g = GeneratorDensity::new(&net, 2.0).unwrap();
        let xq = split_rule(&net);
        let yq = QuadratureScheme::piecewise_gauss_legendre(&default_knots(4), 24);
        let p = g.tabulate(&xq).unwrap();
        for phi in [|x: f64| x * x, |x: f64| (3.0 * x).cos()] {
            let lhs: f64 = xq.nodes().zip(&p).zip(xq.weights()).map(|((x, p), w)| w * phi(x[0]) * p).sum();
            let rhs = yq.integrate(|y| phi(net.eval(y)[0]));
            prop_assert!((lhs - rhs).abs() < 1e-9, "{} vs {}", lhs, rhs);
        }
    }

    #[test]
    fn inversion_round_trips(seed in 0u64..10_000, y in 0.0f64..=1.0) {
        let net = spline(seed);
        let g = GeneratorDensity::new(&net, 2.0).unwrap();
        let x = net.eval(&[y]);
        prop_assert!((g.invert(&x).unwrap()[0] - y).abs() < 1e-8);
    }

    #[test]
    fn density_respects_regularity_bounds(seed in 0u64..10_000, x in 0.0f64..=1.0) {
        let g = GeneratorDensity::new(spline(seed), 2.0).unwrap();
        let p = g.density(&[x]).unwrap();
        prop_assert!((0.5 - 1e-9..=2.0 + 1e-9).contains(&p), "p = {}", p);
    }
}
