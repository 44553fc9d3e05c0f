use gdl_core::requ_net::{
    hidden_bounds, perturbation_bounds, project_sparsity, project_unit_box, Architecture,
    BoundKind, Partial, ReQUNetwork,
};
use gdl_core::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arch(w: &[usize]) -> Architecture {
    Architecture::new(w.to_vec()).unwrap()
}

fn random_net(widths: &[usize], seed: u64) -> ReQUNetwork {
    ReQUNetwork::random(arch(widths), 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn widths() -> impl Strategy<Value = Vec<usize>> {
    (
        1usize..=3,
        prop::collection::vec(1usize..=4, 0..=3),
        1usize..=2,
    )
        .prop_map(|(i, h, o)| {
            let mut w = vec![i];
            w.extend(h);
            w.push(o);
            w
        })
}

fn point(dim: usize, seed: u64) -> Vec<f64> {
    (0..dim)
        .map(|k| ((seed as f64 + 1.0) * 0.618_033_98 * (k as f64 + 1.0)).fract())
        .collect()
}

#[test]
fn identity_square_net_has_jacobian_one_at_half() {
    let net = ReQUNetwork::from_params(arch(&[1, 1, 1]), None, &[1.0, 0.0, 1.0]).unwrap();
    let j = net.jacobian(&[0.5]).unwrap();
    assert_eq!(j[(0, 0)], 1.0);
}

#[test]
fn linear_net_jacobian_is_its_weight() {
    let net = ReQUNetwork::from_params(arch(&[2, 2]), None, &[0.1, -0.2, 0.3, 0.4]).unwrap();
    let j = net.jacobian(&[0.7, 0.2]).unwrap();
    assert_eq!(j.as_slice(), &[0.1, 0.3, -0.2, 0.4]);
}

#[test]
fn partial_forward_boundary_cases() {
    let net = ReQUNetwork::from_params(arch(&[1, 1, 1]), None, &[1.0, 0.0, 1.0]).unwrap();
    assert_eq!(
        net.partial_forward(Partial::B { k: 0, i: 1 }, &[0.3])
            .unwrap(),
        vec![0.3]
    );
    assert_eq!(
        net.partial_forward(Partial::A { j: 1, k: 3 }, &[0.3])
            .unwrap(),
        vec![0.3]
    );
    assert_eq!(
        net.partial_forward(Partial::B { k: 1, i: 1 }, &[0.5])
            .unwrap(),
        vec![0.25]
    );
}

#[test]
fn perturbation_bounds_dominate_observed_changes() {
    let w = [2, 3, 2, 1];
    let b = perturbation_bounds(&arch(&w));
    let eps = 1e-3;
    for seed in 0..20 {
        let net = random_net(&w, seed);
        let mut p = net.params().values;
        for (i, v) in p.iter_mut().enumerate() {
            let s = if (i + seed as usize).is_multiple_of(2) {
                eps
            } else {
                -eps
            };
            *v = (*v + s).clamp(-1.0, 1.0);
        }
        let other = ReQUNetwork::from_params(net.arch().clone(), None, &p).unwrap();
        for k in 0..16 {
            let x = point(2, k);
            let (f, g) = (net.forward(&x).unwrap()[0], other.forward(&x).unwrap()[0]);
            assert!((f - g).abs() <= b.sup_coeff.value * eps);
            let (jf, jg) = (net.jacobian(&x).unwrap(), other.jacobian(&x).unwrap());
            assert!((jf - jg).amax() <= b.jac_coeff.value * eps);
        }
    }
}

#[test]
fn hidden_activations_stay_below_their_bound() {
    let w = [2, 4, 3, 1];
    let a = arch(&w);
    for (k, i) in [(1, 1), (2, 1), (2, 2)] {
        let bound = hidden_bounds(&a, BoundKind::HiddenSup { k, i }, 1.0)
            .unwrap()
            .value;
        for seed in 0..20 {
            let net = random_net(&w, seed);
            for s in 0..8 {
                // inputs of width p_{i-1} with sup norm at most 1
                let x: Vec<f64> = point(w[i - 1], s)
                    .into_iter()
                    .map(|v| 2.0 * v - 1.0)
                    .collect();
                let out = net.partial_forward(Partial::B { k, i }, &x).unwrap();
                assert!(out.iter().all(|v| v.abs() <= bound), "k={k} i={i}");
            }
        }
    }
}

#[test]
fn jacobian_is_continuous_across_a_kink() {
    // the single unit switches on at x = 0.5; ReQU is C¹ so both one-sided slopes vanish
    let net = ReQUNetwork::from_params(arch(&[1, 1, 1]), None, &[1.0, 0.5, 1.0]).unwrap();
    let left = net.jacobian(&[0.5 - 1e-7]).unwrap()[(0, 0)];
    let right = net.jacobian(&[0.5 + 1e-7]).unwrap()[(0, 0)];
    assert!((left - right).abs() < 1e-6, "{left} vs {right}");
}

#[test]
fn wrong_input_width_is_rejected() {
    let net = random_net(&[2, 3, 1], 1);
    assert!(matches!(net.forward(&[0.5]), Err(Error::Shape { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn params_round_trip_bit_identical(w in widths(), seed in 0u64..1000) {
        let net = random_net(&w, seed);
        let p = net.params();
        let back = ReQUNetwork::from_params(net.arch().clone(), None, &p.values).unwrap();
        prop_assert_eq!(&back, &net);
        let json = ReQUNetwork::from_json(&net.to_json()).unwrap();
        prop_assert_eq!(json.params().values, p.values);
    }

    #[test]
    fn splitting_at_any_layer_reproduces_forward(w in widths(), seed in 0u64..1000) {
        let net = random_net(&w, seed);
        let n = net.depth_hidden();
        let x = point(w[0], seed);
        let full = net.forward(&x).unwrap();
        for k in 0..=n {
            let inner = net.partial_forward(Partial::B { k, i: 1 }, &x).unwrap();
            let outer = net.partial_forward(Partial::A { j: n, k: k + 1 }, &inner).unwrap();
            let err = full.iter().zip(&outer).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            prop_assert!(err == 0.0, "k = {}: {}", k, err);
        }
    }

    #[test]
    fn input_jacobian_matches_central_differences(w in widths(), seed in 0u64..1000) {
        let net = random_net(&w, seed);
        let x: Vec<f64> = point(w[0], seed).into_iter().map(|v| 0.05 + 0.9 * v).collect();
        let j = net.jacobian(&x).unwrap();
        let h = 1e-6;
        for c in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[c] += h;
            xm[c] -= h;
            let (fp, fm) = (net.forward(&xp).unwrap(), net.forward(&xm).unwrap());
            for r in 0..fp.len() {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                prop_assert!((fd - j[(r, c)]).abs() <= 1e-6 * (1.0 + fd.abs()), "({},{}) {} vs {}", r, c, fd, j[(r, c)]);
            }
        }
    }

    #[test]
    fn parameter_gradient_matches_central_differences(w in widths(), seed in 0u64..1000) {
        let net = random_net(&w, seed);
        let x = point(w[0], seed + 7);
        let up: Vec<f64> = (0..net.arch().output_dim()).map(|i| 1.0 - 0.3 * i as f64).collect();
        let g = net.grad_params(&x, &up).unwrap();
        let p = net.params().values;
        let h = 1e-6;
        let objective = |v: &[f64]| {
            let shifted = ReQUNetwork::from_params(net.arch().clone(), None, v).unwrap();
            shifted.forward(&x).unwrap().iter().zip(&up).map(|(a, b)| a * b).sum::<f64>()
        };
        for i in 0..p.len() {
            if p[i].abs() > 1.0 - 2.0 * h {
                continue;
            }
            let (mut pp, mut pm) = (p.clone(), p.clone());
            pp[i] += h;
            pm[i] -= h;
            let fd = (objective(&pp) - objective(&pm)) / (2.0 * h);
            prop_assert!((fd - g.values[i]).abs() <= 1e-6 * (1.0 + fd.abs()), "param {}: {} vs {}", i, fd, g.values[i]);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient(w in widths(), seed in 0u64..1000) {
        let net = random_net(&w, seed);
        let x = point(w[0], seed);
        let up = vec![0.0; net.arch().output_dim()];
        prop_assert!(net.grad_params(&x, &up).unwrap().values.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn sparsity_projection_never_adds_nonzeros(
        mut v in prop::collection::vec(-2.0f64..2.0, 1..40),
        budget in 0usize..40,
    ) {
        let before = v.iter().filter(|x| **x != 0.0).count();
        project_unit_box(&mut v);
        project_sparsity(&mut v, budget);
        let after = v.iter().filter(|x| **x != 0.0).count();
        prop_assert!(after <= before.min(budget));
        prop_assert!(v.iter().all(|x| (-1.0..=1.0).contains(x)));
    }
}
