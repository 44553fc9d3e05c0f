use gdl_core::divergence::{
    chi_sym_values, js_sqrt_metric_values, js_values, kl, kl_values, sandwich_values,
};
use gdl_core::quadrature::QuadratureScheme;
use proptest::prelude::*;
use std::f64::consts::LN_2;

/// A piecewise-constant density on `cells` equal cells, from positive weights.
fn step_density(weights: &[f64]) -> impl Fn(&[f64]) -> f64 + Sync + Send + '_ {
    let total: f64 = weights.iter().sum();
    let m = weights.len();
    move |x: &[f64]| {
        let i = ((x[0] * m as f64) as usize).min(m - 1);
        weights[i] * m as f64 / total
    }
}

fn step_rule(cells: usize) -> QuadratureScheme {
    let breaks: Vec<f64> = (1..cells).map(|i| i as f64 / cells as f64).collect();
    QuadratureScheme::piecewise_gauss_legendre(&breaks, 2)
}

#[test]
fn kl_of_linear_density_against_uniform() {
    let quad = QuadratureScheme::gauss_legendre(1, 64);
    let v = kl(|x: &[f64]| 2.0 * x[0], |_: &[f64]| 1.0, &quad).value;
    assert!((v - (LN_2 - 0.5)).abs() < 1e-6, "{v}");
}

#[test]
fn disjoint_supports_reach_the_js_ceiling() {
    let quad = step_rule(2);
    let p = quad.tabulate(|x| if x[0] < 0.5 { 2.0 } else { 0.0 });
    let q = quad.tabulate(|x| if x[0] < 0.5 { 0.0 } else { 2.0 });
    assert!((js_values(&p, &q, &quad).value - LN_2).abs() < 1e-14);
    assert!((chi_sym_values(&p, &q, &quad).value - 2.0).abs() < 1e-14);
    assert_eq!(kl_values(&p, &q, &quad).value, f64::INFINITY);
}

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..3.0, 8)
}

/// Brute-force sums over the cells, independent of the quadrature path.
fn discrete(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let mut kl = 0.0;
    let mut js = 0.0;
    let mut chi = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (p, q) = (x / sa, y / sb);
        let m = 0.5 * (p + q);
        kl += p * (p / q).ln();
        js += 0.5 * p * (p / m).ln() + 0.5 * q * (q / m).ln();
        chi += (p - q) * (p - q) / (p + q);
    }
    (kl, js, chi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_densities_match_discrete_sums(a in weights(), b in weights()) {
        let quad = step_rule(8);
        let p = quad.tabulate(step_density(&a));
        let q = quad.tabulate(step_density(&b));
        let (k, j, c) = discrete(&a, &b);
        prop_assert!((kl_values(&p, &q, &quad).value - k).abs() < 1e-12);
        prop_assert!((js_values(&p, &q, &quad).value - j).abs() < 1e-12);
        prop_assert!((chi_sym_values(&p, &q, &quad).value - c).abs() < 1e-12);
    }

    #[test]
    fn js_is_symmetric_bounded_and_sandwiched(a in weights(), b in weights()) {
        let quad = step_rule(8);
        let p = quad.tabulate(step_density(&a));
        let q = quad.tabulate(step_density(&b));
        let pq = js_values(&p, &q, &quad).value;
        let qp = js_values(&q, &p, &quad).value;
        prop_assert_eq!(pq, qp);
        prop_assert!((-1e-15..=LN_2).contains(&pq));
        prop_assert!(sandwich_values(&p, &q, &quad).pass);
        prop_assert!(kl_values(&p, &q, &quad).value >= -1e-15);
    }

    #[test]
    fn root_js_obeys_the_triangle_inequality(a in weights(), b in weights(), c in weights()) {
        let quad = step_rule(8);
        let (p, q, r) = (
            quad.tabulate(step_density(&a)),
            quad.tabulate(step_density(&b)),
            quad.tabulate(step_density(&c)),
        );
        prop_assert!(js_sqrt_metric_values(&p, &q, &r, &quad));
    }

    #[test]
    fn identical_densities_have_zero_divergence(a in weights()) {
        let quad = step_rule(8);
        let p = quad.tabulate(step_density(&a));
        prop_assert_eq!(js_values(&p, &p, &quad).value, 0.0);
        prop_assert_eq!(kl_values(&p, &p, &quad).value, 0.0);
        prop_assert_eq!(chi_sym_values(&p, &p, &quad).value, 0.0);
    }
}
