//! KL, Jensen-Shannon and symmetric χ² functionals between densities on the
//! unit cube, evaluated by quadrature against Lebesgue measure.

use serde::{Deserialize, Serialize};

use crate::quadrature::QuadratureScheme;

/// Densities below this are treated as zero (`0·log 0 = 0`).
pub const ZERO_DENSITY: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceEstimate {
    pub value: f64,
    pub scheme_id: String,
    pub node_count: usize,
}

impl DivergenceEstimate {
    fn new(value: f64, quad: &QuadratureScheme) -> Self {
        Self {
            value,
            scheme_id: quad.id(),
            node_count: quad.len(),
        }
    }
}

fn kl_term(p: f64, q: f64) -> f64 {
    if p <= ZERO_DENSITY {
        0.0
    } else if q <= 0.0 {
        f64::INFINITY
    } else {
        p * (p / q).ln()
    }
}

fn js_term(p: f64, q: f64) -> f64 {
    let m = 0.5 * (p + q);
    let a = if p <= ZERO_DENSITY {
        0.0
    } else {
        p * (p / m).ln()
    };
    let b = if q <= ZERO_DENSITY {
        0.0
    } else {
        q * (q / m).ln()
    };
    0.5 * (a + b)
}

fn chi_term(p: f64, q: f64) -> f64 {
    let s = p + q;
    if s <= ZERO_DENSITY {
        0.0
    } else {
        (p - q) * (p - q) / s
    }
}

/// `KL(p‖q)` from density values at the nodes of `quad`. `+∞` when `p` has mass where `q = 0`.
pub fn kl_values(p: &[f64], q: &[f64], quad: &QuadratureScheme) -> DivergenceEstimate {
    let terms: Vec<f64> = p.iter().zip(q).map(|(&a, &b)| kl_term(a, b)).collect();
    DivergenceEstimate::new(quad.sum(&terms), quad)
}

/// `JS(p,q)` from density values at the nodes of `quad`. Symmetric term by term.
pub fn js_values(p: &[f64], q: &[f64], quad: &QuadratureScheme) -> DivergenceEstimate {
    let terms: Vec<f64> = p.iter().zip(q).map(|(&a, &b)| js_term(a, b)).collect();
    DivergenceEstimate::new(quad.sum(&terms), quad)
}

/// `∫ (p−q)²/(p+q)` from density values at the nodes of `quad`.
pub fn chi_sym_values(p: &[f64], q: &[f64], quad: &QuadratureScheme) -> DivergenceEstimate {
    let terms: Vec<f64> = p.iter().zip(q).map(|(&a, &b)| chi_term(a, b)).collect();
    DivergenceEstimate::new(quad.sum(&terms), quad)
}

pub fn kl<P, Q>(p: P, q: Q, quad: &QuadratureScheme) -> DivergenceEstimate
where
    P: Fn(&[f64]) -> f64 + Sync + Send,
    Q: Fn(&[f64]) -> f64 + Sync + Send,
{
    kl_values(&quad.tabulate(p), &quad.tabulate(q), quad)
}

pub fn js<P, Q>(p: P, q: Q, quad: &QuadratureScheme) -> DivergenceEstimate
where
    P: Fn(&[f64]) -> f64 + Sync + Send,
    Q: Fn(&[f64]) -> f64 + Sync + Send,
{
    js_values(&quad.tabulate(p), &quad.tabulate(q), quad)
}

pub fn chi_sym<P, Q>(p: P, q: Q, quad: &QuadratureScheme) -> DivergenceEstimate
where
    P: Fn(&[f64]) -> f64 + Sync + Send,
    Q: Fn(&[f64]) -> f64 + Sync + Send,
{
    chi_sym_values(&quad.tabulate(p), &quad.tabulate(q), quad)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub chi_sym: f64,
    /// `¼ χ_sym`.
    pub lhs: f64,
    pub js: f64,
    /// `(ln 2 / 2) χ_sym`.
    pub rhs: f64,
    pub pass: bool,
}

/// `¼ χ_sym(p,q) ≤ JS(p,q) ≤ (ln 2/2) χ_sym(p,q)` with slack `1e-8 + 1e-3 χ_sym`.
pub fn sandwich_values(p: &[f64], q: &[f64], quad: &QuadratureScheme) -> SandwichReport {
    let chi = chi_sym_values(p, q, quad).value;
    let js = js_values(p, q, quad).value;
    let lhs = 0.25 * chi;
    let rhs = 0.5 * std::f64::consts::LN_2 * chi;
    let tau = 1e-8 + 1e-3 * chi;
    SandwichReport {
        chi_sym: chi,
        lhs,
        js,
        rhs,
        pass: lhs - tau <= js && js <= rhs + tau,
    }
}

pub fn sandwich_check<P, Q>(p: P, q: Q, quad: &QuadratureScheme) -> SandwichReport
where
    P: Fn(&[f64]) -> f64 + Sync + Send,
    Q: Fn(&[f64]) -> f64 + Sync + Send,
{
    sandwich_values(&quad.tabulate(p), &quad.tabulate(q), quad)
}

/// `√JS(p,r) ≤ √JS(p,q) + √JS(q,r) + 1e-8` on tabulated values.
pub fn js_sqrt_metric_values(p: &[f64], q: &[f64], r: &[f64], quad: &QuadratureScheme) -> bool {
    let d = |a: &[f64], b: &[f64]| js_values(a, b, quad).value.max(0.0).sqrt();
    d(p, r) <= d(p, q) + d(q, r) + 1e-8
}

pub fn js_sqrt_metric_check<P, Q, R>(p: P, q: Q, r: R, quad: &QuadratureScheme) -> bool
where
    P: Fn(&[f64]) -> f64 + Sync + Send,
    Q: Fn(&[f64]) -> f64 + Sync + Send,
    R: Fn(&[f64]) -> f64 + Sync + Send,
{
    js_sqrt_metric_values(
        &quad.tabulate(p),
        &quad.tabulate(q),
        &quad.tabulate(r),
        quad,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn left_half(x: &[f64]) -> f64 {
        if x[0] <= 0.5 {
            2.0
        } else {
            0.0
        }
    }

    #[test]
    fn kl_examples() {
        let q = QuadratureScheme::gauss_legendre(1, 128);
        assert!(kl(|_| 1.0, |_| 1.0, &q).value.abs() < 1e-12);
        assert!(kl(|_| 1.0, left_half, &q).value.is_infinite());
        let v = kl(left_half, |_| 1.0, &q).value;
        assert!((v - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn js_and_chi_examples() {
        let q = QuadratureScheme::gauss_legendre(1, 128);
        let right = |x: &[f64]| 2.0 - left_half(x);
        assert!((js(left_half, right, &q).value - std::f64::consts::LN_2).abs() < 1e-9);
        assert!((js(|_| 1.0, left_half, &q).value - 0.75 * (4.0f64 / 3.0).ln()).abs() < 1e-6);
        assert!((chi_sym(|_| 1.0, left_half, &q).value - 2.0 / 3.0).abs() < 1e-6);
        assert!((chi_sym(left_half, right, &q).value - 2.0).abs() < 1e-9);
        let s = sandwich_check(|_| 1.0, left_half, &q);
        assert!(s.pass && (s.lhs - 1.0 / 6.0).abs() < 1e-6 && (s.rhs - 0.231049).abs() < 1e-5);
    }
}
