//! Quadrature rules on `[0,1]^d` representing Lebesgue measure.

use gauss_quad::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum QuadKind {
    GaussLegendre {
        per_axis: usize,
    },
    /// `panels` equal sub-intervals per axis, `per_panel` Gauss-Legendre nodes each.
    CompositeGaussLegendre {
        panels: usize,
        per_panel: usize,
    },
    Midpoint {
        per_axis: usize,
    },
    MonteCarlo {
        count: usize,
        seed: u64,
    },
    /// One-dimensional panels between the given breakpoints, `per_panel` nodes each.
    PiecewiseGaussLegendre {
        breaks: Vec<f64>,
        per_panel: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureScheme {
    pub kind: QuadKind,
    pub dim: usize,
    /// Flat `len × dim` node coordinates.
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Gauss-Legendre nodes and weights mapped to `[a, b]`.
pub fn gauss_legendre_interval(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.5 * (a + b)], vec![b - a]);
    }
    let rule = GaussLegendre::new(n).expect("degree ≥ 2");
    let half = 0.5 * (b - a);
    let mut pairs = rule.into_node_weight_pairs();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    pairs
        .into_iter()
        .map(|(x, w)| (a + half * (x + 1.0), half * w))
        .unzip()
}

fn tensor(dim: usize, axis_nodes: &[f64], axis_weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = axis_nodes.len();
    let total = m.pow(dim as u32);
    let mut nodes = Vec::with_capacity(total * dim);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        let mut w = 1.0;
        for &i in &idx {
            nodes.push(axis_nodes[i]);
            w *= axis_weights[i];
        }
        weights.push(w);
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < m {
                break;
            }
            *slot = 0;
        }
    }
    (nodes, weights)
}

impl QuadratureScheme {
    pub fn gauss_legendre(dim: usize, per_axis: usize) -> Self {
        let (x, w) = gauss_legendre_interval(per_axis, 0.0, 1.0);
        let (nodes, weights) = tensor(dim, &x, &w);
        Self {
            kind: QuadKind::GaussLegendre { per_axis },
            dim,
            nodes,
            weights,
        }
    }

    pub fn composite_gauss_legendre(dim: usize, panels: usize, per_panel: usize) -> Self {
        let mut x = Vec::new();
        let mut w = Vec::new();
        for k in 0..panels {
            let a = k as f64 / panels as f64;
            let b = (k + 1) as f64 / panels as f64;
            let (px, pw) = gauss_legendre_interval(per_panel, a, b);
            x.extend(px);
            w.extend(pw);
        }
        let (nodes, weights) = tensor(dim, &x, &w);
        Self {
            kind: QuadKind::CompositeGaussLegendre { panels, per_panel },
            dim,
            nodes,
            weights,
        }
    }

    pub fn midpoint(dim: usize, per_axis: usize) -> Self {
        let h = 1.0 / per_axis as f64;
        let x: Vec<f64> = (0..per_axis).map(|i| (i as f64 + 0.5) * h).collect();
        let w = vec![h; per_axis];
        let (nodes, weights) = tensor(dim, &x, &w);
        Self {
            kind: QuadKind::Midpoint { per_axis },
            dim,
            nodes,
            weights,
        }
    }

    pub fn monte_carlo(dim: usize, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes: Vec<f64> = (0..count * dim).map(|_| rng.gen::<f64>()).collect();
        Self {
            kind: QuadKind::MonteCarlo { count, seed },
            dim,
            nodes,
            weights: vec![1.0 / count as f64; count],
        }
    }

    /// Gauss-Legendre on `[0,1]` with panel boundaries at `0`, `1` and every
    /// interior breakpoint, so integrands that are smooth between breakpoints
    /// (e.g. piecewise polynomials with known kinks) are integrated to full accuracy.
    pub fn piecewise_gauss_legendre(breaks: &[f64], per_panel: usize) -> Self {
        let mut b: Vec<f64> = breaks
            .iter()
            .copied()
            .filter(|t| t.is_finite() && *t > 0.0 && *t < 1.0)
            .collect();
        b.push(0.0);
        b.push(1.0);
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for pair in b.windows(2) {
            let (px, pw) = gauss_legendre_interval(per_panel, pair[0], pair[1]);
            nodes.extend(px);
            weights.extend(pw);
        }
        Self {
            kind: QuadKind::PiecewiseGaussLegendre {
                breaks: b,
                per_panel,
            },
            dim: 1,
            nodes,
            weights,
        }
    }

    /// Gauss-Legendre with 128 nodes (d = 1) or 64 per axis (d = 2); Monte Carlo
    /// with 2·10⁵ points beyond.
    pub fn default_for(dim: usize) -> Self {
        match dim {
            1 => Self::gauss_legendre(1, 128),
            2 => Self::gauss_legendre(2, 64),
            _ => Self::monte_carlo(dim, 200_000, 0),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.chunks(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn id(&self) -> String {
        match &self.kind {
            QuadKind::GaussLegendre { per_axis } => format!("gl{per_axis}^{}", self.dim),
            QuadKind::CompositeGaussLegendre { panels, per_panel } => {
                format!("cgl{panels}x{per_panel}^{}", self.dim)
            }
            QuadKind::Midpoint { per_axis } => format!("mid{per_axis}^{}", self.dim),
            QuadKind::MonteCarlo { count, seed } => format!("mc{count}s{seed}^{}", self.dim),
            QuadKind::PiecewiseGaussLegendre { breaks, per_panel } => {
                format!("pgl{}x{per_panel}^1", breaks.len() - 1)
            }
        }
    }

    /// Evaluate `f` at every node (in node order).
    pub fn tabulate<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        crate::par::map_indices(self.len(), |i| f(self.node(i)))
    }

    /// Weighted sum of already-tabulated values, summed sequentially for
    /// reproducibility.
    pub fn sum(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        self.sum(&self.tabulate(f))
    }
}

/// Uniform grid with `res` points per axis, endpoints included.
pub fn uniform_grid(dim: usize, res: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..res)
        .map(|i| i as f64 / (res - 1).max(1) as f64)
        .collect();
    let (nodes, _) = tensor(dim, &axis, &vec![1.0; res]);
    nodes.chunks(dim).map(|c| c.to_vec()).collect()
}
