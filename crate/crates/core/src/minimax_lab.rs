//! Bump-perturbed families of cube bijections used for minimax lower bounds:
//! exact log-densities and scores, Fisher information by quadrature, prior
//! energies, the van Trees bound and its assembly into a density-risk bound.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre_interval, QuadratureScheme};

/// Smallest eigenvalue of `I + h^{β−1}Σθ_j∇²φ` accepted on the diagnostic grid.
pub const VALIDITY_THRESHOLD: f64 = 0.1;

/// `φ(x) = c·exp(−1/(1−‖x‖²))` on the open unit ball, zero outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpFunction {
    pub scale: f64,
    pub dim: usize,
    /// Grid estimate of the Hölder-type bound `max(sup|φ|, sup‖∇φ‖, sup‖∇²φ‖, Lip ∇²φ)`.
    pub h_phi: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BumpValue {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: DMatrix<f64>,
}

/// Radial profile `(φ, φ_r/r, φ_rr)` of the unscaled bump at radius `r < 1`.
fn radial(r2: f64) -> (f64, f64, f64) {
    let s = 1.0 - r2;
    let p = (-1.0 / s).exp();
    // ∇φ = −2xφ/s², so φ_r/r = −2φ/s²
    let g = -2.0 * p / (s * s);
    // ∂_j∂_i φ = g δ_ij + x_i x_j (4/s⁴ − 8/s³) φ
    let q = p * (4.0 / s.powi(4) - 8.0 / s.powi(3));
    (p, g, q)
}

impl BumpFunction {
    /// The bump with `c = e`, so `φ(0) = 1` and `∇²φ(0) = −2I`.
    pub fn standard(dim: usize) -> Self {
        let mut b = Self {
            scale: std::f64::consts::E,
            dim,
            h_phi: 0.0,
        };
        b.h_phi = b.holder_bound(4001);
        b
    }

    pub fn eval(&self, x: &[f64]) -> BumpValue {
        let d = self.dim;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 >= 1.0 {
            return BumpValue {
                value: 0.0,
                gradient: vec![0.0; d],
                hessian: DMatrix::zeros(d, d),
            };
        }
        let (p, g, q) = radial(r2);
        let c = self.scale;
        BumpValue {
            value: c * p,
            gradient: x.iter().map(|xi| c * g * xi).collect(),
            hessian: DMatrix::from_fn(d, d, |i, j| {
                c * (if i == j { g } else { 0.0 } + q * x[i] * x[j])
            }),
        }
    }

    /// Radial symmetry reduces every sup to the ray along the first axis, where
    /// the Hessian is `diag(φ_rr, φ_r/r, …)`; the Lipschitz constant of the
    /// Hessian is taken from difference quotients between neighbouring points.
    fn holder_bound(&self, res: usize) -> f64 {
        let c = self.scale;
        let mut best: f64 = 0.0;
        let mut prev: Option<(f64, f64, f64)> = None;
        for k in 0..res {
            let r = k as f64 / (res - 1) as f64;
            let (p, g, q) = if r < 1.0 {
                radial(r * r)
            } else {
                (0.0, 0.0, 0.0)
            };
            let rr = g + q * r * r;
            let (gd, rd) = (c * g, c * rr);
            best = best
                .max(c * p)
                .max((c * g * r).abs())
                .max(gd.abs())
                .max(rd.abs());
            if let Some((r0, g0, rr0)) = prev {
                let lip = ((gd - g0).abs().max((rd - rr0).abs())) / (r - r0);
                best = best.max(lip);
            }
            prev = Some((r, gd, rd));
        }
        best
    }
}

/// Axis-aligned lattice in `[1/3, 2/3]^d` with spacing `2.2h > 2h`.
pub fn packing_centers(h: f64, d: usize) -> Result<Vec<Vec<f64>>> {
    if !(h > 0.0 && h < 1.0 / 12.0) || d == 0 {
        return Err(Error::EmptyPacking(format!(
            "h = {h} must lie in (0, 1/12)"
        )));
    }
    let spacing = 2.2 * h;
    let per_axis = ((1.0 / 3.0) / spacing).floor() as usize + 1;
    let axis: Vec<f64> = (0..per_axis)
        .map(|i| 1.0 / 3.0 + i as f64 * spacing)
        .collect();
    let total = per_axis.pow(d as u32);
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        out.push(idx.iter().map(|&i| axis[i]).collect());
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < per_axis {
                break;
            }
            *slot = 0;
        }
    }
    Ok(out)
}

/// `g_θ⁻¹(x) = x + h^β Σ_j θ_j ∇φ((x−x_j)/h)`, whose push-forward density is
/// `det(I + h^{β−1} Σ_j θ_j ∇²φ((x−x_j)/h))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbedFamily {
    pub h: f64,
    pub beta: f64,
    pub centers: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub bump: BumpFunction,
    pub lambda: f64,
}

impl PerturbedFamily {
    pub fn new(
        h: f64,
        beta: f64,
        centers: Vec<Vec<f64>>,
        theta: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::EmptyPacking("no centers".into()));
        }
        let d = centers[0].len();
        if !(h > 0.0 && beta > 2.0 && lambda >= 1.0) || d == 0 {
            return Err(Error::InvalidParam(format!(
                "need h > 0, β > 2, Λ ≥ 1; got {h}, {beta}, {lambda}"
            )));
        }
        crate::error::check_len(centers.len(), theta.len())?;
        if let Some(c) = centers.iter().find(|c| c.len() != d) {
            return Err(Error::Shape {
                expected: d,
                got: c.len(),
            });
        }
        let norm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm > h * (1.0 + 1e-12) {
            return Err(Error::InvalidParam(format!("‖θ‖ = {norm} exceeds h = {h}")));
        }
        for i in 0..centers.len() {
            for j in 0..i {
                let dist = centers[i]
                    .iter()
                    .zip(&centers[j])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if dist <= 2.0 * h {
                    return Err(Error::InvalidParam(format!(
                        "centers {j} and {i} are {dist} ≤ 2h apart"
                    )));
                }
            }
        }
        Ok(Self {
            h,
            beta,
            centers,
            theta,
            bump: BumpFunction::standard(d),
            lambda,
        })
    }

    /// Single-center family with the given perturbation.
    pub fn single(h: f64, beta: f64, center: Vec<f64>, theta: f64) -> Result<Self> {
        Self::new(h, beta, vec![center], vec![theta], 1.0)
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn local(&self, x: &[f64], j: usize) -> Vec<f64> {
        x.iter()
            .zip(&self.centers[j])
            .map(|(a, c)| (a - c) / self.h)
            .collect()
    }

    pub fn inverse_map(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        let f = self.h.powf(self.beta);
        for j in 0..self.centers.len() {
            if self.theta[j] == 0.0 {
                continue;
            }
            let b = self.bump.eval(&self.local(x, j));
            for (o, g) in out.iter_mut().zip(&b.gradient) {
                *o += f * self.theta[j] * g;
            }
        }
        out
    }

    /// `A_θ(x) = I + h^{β−1} Σ_j θ_j ∇²φ((x−x_j)/h)`.
    pub fn a_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let f = self.h.powf(self.beta - 1.0);
        let mut a = DMatrix::identity(d, d);
        for j in 0..self.centers.len() {
            if self.theta[j] != 0.0 {
                a += self.bump.eval(&self.local(x, j)).hessian * (f * self.theta[j]);
            }
        }
        a
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let a = self.a_matrix(x);
        let det = a.clone().determinant();
        let min_eig = a.symmetric_eigenvalues().min();
        if !(min_eig > 0.0) {
            return Err(Error::FamilyInvalid(format!(
                "A_θ not positive definite at {x:?} (λ_min = {min_eig})"
            )));
        }
        Ok(det.ln())
    }

    /// `∂ log p_θ(x)/∂θ_j = h^{β−1} Tr(A_θ(x)⁻¹ ∇²φ((x−x_j)/h))`.
    pub fn score(&self, x: &[f64], j: usize) -> Result<f64> {
        if j >= self.centers.len() {
            return Err(Error::Index(format!(
                "center {j} of {}",
                self.centers.len()
            )));
        }
        let b = self.bump.eval(&self.local(x, j));
        if b.value == 0.0 {
            return Ok(0.0);
        }
        let inv = self
            .a_matrix(x)
            .try_inverse()
            .ok_or_else(|| Error::FamilyInvalid(format!("A_θ singular at {x:?}")))?;
        Ok(self.h.powf(self.beta - 1.0) * (inv * b.hessian).trace())
    }

    /// Per-ball tensor Gauss-Legendre rule on `x_j + [−h,h]^d`.
    fn ball_rule(&self, j: usize, per_axis: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let d = self.dim();
        let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
            .map(|k| {
                gauss_legendre_interval(
                    per_axis,
                    self.centers[j][k] - self.h,
                    self.centers[j][k] + self.h,
                )
            })
            .collect();
        let total = per_axis.pow(d as u32);
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            nodes.push((0..d).map(|k| axes[k].0[idx[k]]).collect());
            weights.push((0..d).map(|k| axes[k].1[idx[k]]).product());
            for slot in idx.iter_mut().rev() {
                *slot += 1;
                if *slot < per_axis {
                    break;
                }
                *slot = 0;
            }
        }
        (nodes, weights)
    }

    /// Smallest eigenvalue of `A_θ` over the per-ball rules; the family is
    /// valid when it is at least [`VALIDITY_THRESHOLD`].
    pub fn min_eigenvalue(&self, per_axis: usize) -> f64 {
        let mut m: f64 = 1.0;
        for j in 0..self.centers.len() {
            let (nodes, _) = self.ball_rule(j, per_axis);
            for x in nodes {
                m = m.min(self.a_matrix(&x).symmetric_eigenvalues().min());
            }
        }
        m
    }

    pub fn check_valid(&self, per_axis: usize) -> Result<()> {
        let m = self.min_eigenvalue(per_axis);
        if m >= VALIDITY_THRESHOLD {
            Ok(())
        } else {
            Err(Error::FamilyInvalid(format!(
                "λ_min(A_θ) = {m:.3e} < {VALIDITY_THRESHOLD}"
            )))
        }
    }

    /// Range `[σ_min^d, σ_max^d]`-style bounds of the density over the ball rules:
    /// returns `(min p, max p)`; outside the balls `p = 1`.
    pub fn density_range(&self, per_axis: usize) -> (f64, f64) {
        let (mut lo, mut hi) = (1.0f64, 1.0f64);
        for j in 0..self.centers.len() {
            let (nodes, _) = self.ball_rule(j, per_axis);
            for x in nodes {
                let p = self.a_matrix(&x).determinant();
                lo = lo.min(p);
                hi = hi.max(p);
            }
        }
        (lo, hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FisherEstimate {
    /// `I_j(θ) = ∫ score_j² p_θ`.
    pub per_index: Vec<f64>,
    pub total: f64,
    pub quadrature_id: String,
}

/// Fisher information of every coordinate, integrated over the ball of its
/// bump (the score vanishes outside) with `per_axis` nodes per axis.
pub fn fisher_information(fam: &PerturbedFamily, per_axis: usize) -> Result<FisherEstimate> {
    fam.check_valid(per_axis)?;
    let per_index = crate::par::map_indices(fam.centers.len(), |j| -> Result<f64> {
        let (nodes, weights) = fam.ball_rule(j, per_axis);
        let mut acc = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            let s = fam.score(x, j)?;
            if s != 0.0 {
                acc += w * s * s * fam.log_density(x)?.exp();
            }
        }
        Ok(acc)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(FisherEstimate {
        total: per_index.iter().sum(),
        per_index,
        quadrature_id: format!("ballgl{per_axis}^{}", fam.dim()),
    })
}

/// `∫(φ'')²` over `[−1,1]` for the standard one-dimensional bump, so that at
/// `θ = 0` a single-center family has `I = h^{2β−1}∫(φ'')²`.
pub fn bump_second_derivative_energy(per_panel: usize) -> f64 {
    let b = BumpFunction::standard(1);
    let (x, w) = gauss_legendre_interval(per_panel, -1.0, 1.0);
    x.iter()
        .zip(&w)
        .map(|(u, wi)| wi * b.eval(&[*u]).hessian[(0, 0)].powi(2))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorEnergy {
    pub dim: usize,
    /// `∫‖∇λ₀‖²/λ₀` for `λ₀` the normalized bump on the unit ball of ℝ^dim, by radial quadrature.
    pub radial: f64,
    /// Same quantity by Monte Carlo over the ball.
    pub monte_carlo: f64,
    pub mc_points: usize,
    /// `|radial − monte_carlo| / radial`.
    pub rel_diff: f64,
}

/// Energy of the unit-ball bump prior. With `λ₀ ∝ φ`, `‖∇φ‖²/φ = 4r²φ/(1−r²)⁴`,
/// so the energy is a ratio of two radial integrals with weight `r^{dim−1}`.
pub fn prior_energy(dim: usize, mc_points: usize, seed: u64) -> Result<PriorEnergy> {
    if dim == 0 {
        return Err(Error::InvalidParam(
            "prior dimension must be positive".into(),
        ));
    }
    let integrand = |r: f64| {
        let s = 1.0 - r * r;
        let p = (-1.0 / s).exp();
        (4.0 * r * r * p / s.powi(4), p)
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..64 {
        let (x, w) = gauss_legendre_interval(16, k as f64 / 64.0, (k + 1) as f64 / 64.0);
        for (r, wi) in x.iter().zip(&w) {
            let (a, b) = integrand(*r);
            let jac = r.powi(dim as i32 - 1);
            num += wi * a * jac;
            den += wi * b * jac;
        }
    }
    let radial = num / den;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mn, mut md) = (0.0, 0.0);
    for _ in 0..mc_points {
        // uniform in the ball: Gaussian direction, radius U^{1/dim}
        let g: Vec<f64> = (0..dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let r = rng.gen::<f64>().powf(1.0 / dim as f64);
        let x: Vec<f64> = g.iter().map(|v| v / norm * r).collect();
        let (a, b) = integrand(x.iter().map(|v| v * v).sum::<f64>().sqrt());
        mn += a;
        md += b;
    }
    let monte_carlo = if md > 0.0 { mn / md } else { f64::NAN };
    Ok(PriorEnergy {
        dim,
        radial,
        monte_carlo,
        mc_points,
        rel_diff: (radial - monte_carlo).abs() / radial,
    })
}

/// `M² / (n·Σ_j E_λ I_j + 𝓙(λ))`.
pub fn van_trees_rhs(m: f64, n: f64, fisher_total: f64, prior_energy: f64) -> Result<f64> {
    let den = n * fisher_total + prior_energy;
    if !(den > 0.0) || !(m > 0.0) {
        return Err(Error::InvalidParam(format!(
            "degenerate van Trees denominator {den}"
        )));
    }
    Ok(m * m / den)
}

/// `h(n) = (1/(n Λ^d d²))^{1/(2β+d)}`.
pub fn bandwidth(n: f64, beta: f64, d: usize, lambda: f64) -> f64 {
    let df = d as f64;
    (1.0 / (n * lambda.powf(df) * df * df)).powf(1.0 / (2.0 * beta + df))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreCheck {
    pub h: f64,
    /// `h/(2(H_φ ∨ 1))`.
    pub r0: f64,
    /// Largest eigenvalue of `∇²φ` over the rescaled ball `‖u‖ ≤ r₀/h` (must be ≤ −½).
    pub max_hessian_eig: f64,
    pub precondition_ok: bool,
    pub min_abs_score: f64,
    /// `h^{β−1} d / 2`.
    pub threshold: f64,
    pub points: usize,
    pub pass: bool,
}

fn ball_grid(d: usize, radius: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..per_axis)
        .map(|i| -radius + 2.0 * radius * i as f64 / (per_axis - 1).max(1) as f64)
        .collect();
    let total = per_axis.pow(d as u32);
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let p: Vec<f64> = idx.iter().map(|&i| axis[i]).collect();
        if p.iter().map(|v| v * v).sum::<f64>() <= radius * radius * (1.0 + 1e-12) {
            out.push(p);
        }
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < per_axis {
                break;
            }
            *slot = 0;
        }
    }
    out
}

/// `|∂ log p_θ/∂θ_j| ≥ h^{β−1}d/2` on a grid over every `𝓑(x_j, r₀)`. When the
/// bump's Hessian is not `⪯ −½I` on the rescaled ball the precondition flag is
/// cleared instead of asserting.
pub fn score_lower_bound_check(fam: &PerturbedFamily, per_axis: usize) -> Result<ScoreCheck> {
    let d = fam.dim();
    let r0 = fam.h / (2.0 * fam.bump.h_phi.max(1.0));
    let local = ball_grid(d, r0 / fam.h, per_axis);
    let max_eig = local
        .iter()
        .map(|u| fam.bump.eval(u).hessian.symmetric_eigenvalues().max())
        .fold(f64::NEG_INFINITY, f64::max);
    let threshold = fam.h.powf(fam.beta - 1.0) * d as f64 / 2.0;
    let mut min_abs = f64::INFINITY;
    let mut points = 0;
    for (j, c) in fam.centers.iter().enumerate() {
        for u in &local {
            let x: Vec<f64> = c.iter().zip(u).map(|(ci, ui)| ci + fam.h * ui).collect();
            min_abs = min_abs.min(fam.score(&x, j)?.abs());
            points += 1;
        }
    }
    let precondition_ok = max_eig <= -0.5;
    Ok(ScoreCheck {
        h: fam.h,
        r0,
        max_hessian_eig: max_eig,
        precondition_ok,
        min_abs_score: min_abs,
        threshold,
        points,
        pass: precondition_ok && min_abs >= threshold,
    })
}

// ---------------------------------------------------------------------------
// Assembled lower bound

/// Prior-averaged Fisher information `E_λ I(θ)` of one bump in dimension 1,
/// with `θ = h·u` and `u` drawn from the normalized bump on `[−1,1]`.
pub fn prior_averaged_fisher_1d(h: f64, beta: f64, nodes: usize, per_axis: usize) -> Result<f64> {
    let (u, w) = gauss_legendre_interval(nodes, -1.0, 1.0);
    let prior: Vec<f64> = u.iter().map(|t| (-1.0 / (1.0 - t * t)).exp()).collect();
    let z: f64 = prior.iter().zip(&w).map(|(p, wi)| p * wi).sum();
    let mut acc = 0.0;
    for ((t, wi), p) in u.iter().zip(&w).zip(&prior) {
        let fam = PerturbedFamily::single(h, beta, vec![0.5], h * t)?;
        acc += wi * p / z * fisher_information(&fam, per_axis)?.total;
    }
    Ok(acc)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub n: f64,
    pub h: f64,
    /// Continuum packing count `((1/3)/(2.2h))^d`.
    pub m: f64,
    /// Prior-averaged Fisher information per coordinate.
    pub fisher_mean: f64,
    /// `M·J₁/h²` for the product of one-dimensional bump priors of radius `h`.
    pub prior_energy: f64,
    pub van_trees: f64,
    /// `van_trees · h^{2β−2+d}/Λ^{2d}`.
    pub bound: f64,
}

/// The van Trees bound on `E‖θ̂−θ‖²` converted to a squared-density-distance
/// bound for each `n`, with `h = bandwidth(n)`. The lattice constant is kept as
/// a real-valued count so the bound varies smoothly with `h` even where fewer
/// than two integer lattice points fit; the family computations use dimension 1.
pub fn assembled_lower_bound(ns: &[f64], beta: f64, lambda: f64, j1: f64) -> Result<Vec<BoundRow>> {
    let d = 1usize;
    ns.iter()
        .map(|&n| {
            let h = bandwidth(n, beta, d, lambda);
            let m = ((1.0 / 3.0) / (2.2 * h)).powi(d as i32);
            let fisher_mean = prior_averaged_fisher_1d(h, beta, 24, 64)?;
            let prior_energy = m * j1 / (h * h);
            let van_trees = van_trees_rhs(m, n, m * fisher_mean, prior_energy)?;
            let bound = van_trees * h.powf(2.0 * beta - 2.0 + d as f64) / lambda.powi(2 * d as i32);
            Ok(BoundRow {
                n,
                h,
                m,
                fisher_mean,
                prior_energy,
                van_trees,
                bound,
            })
        })
        .collect()
}

/// Least-squares slope of `log y` on `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidParam("need at least two (x, y) pairs".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParam("zero-variance abscissa".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowerBoundLabConfig {
    pub beta: f64,
    pub lambda: f64,
    pub fisher_h: Vec<f64>,
    pub score_h: f64,
    pub log2_n: Vec<u32>,
    pub prior_mc_points: usize,
    pub seed: u64,
}

impl Default for LowerBoundLabConfig {
    fn default() -> Self {
        Self {
            beta: 3.0,
            // large enough that every ladder bandwidth keeps the family valid under the full prior
            lambda: 8.0,
            fisher_h: vec![0.04, 0.02, 0.01],
            score_h: 0.02,
            log2_n: (8..=16).collect(),
            prior_mc_points: 100_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub config: LowerBoundLabConfig,
    /// `(h, I₁)` at `θ = 0`, single center, `d = 1`.
    pub fisher: Vec<(f64, f64)>,
    pub fisher_slope: f64,
    pub fisher_target: f64,
    pub fisher_pass: bool,
    /// Closed-form `h^{2β−1}∫(φ'')²` at the first bandwidth.
    pub fisher_closed_form: f64,
    pub score: ScoreCheck,
    pub prior: PriorEnergy,
    pub rows: Vec<BoundRow>,
    pub bound_slope: f64,
    pub bound_target: f64,
    pub bound_pass: bool,
    pub pass: bool,
}

/// Fisher scaling, the score inequality on the packing at `score_h`, the
/// prior energy cross-check, and the assembled bound over the `n` ladder
/// (all for `d = 1`).
pub fn run_lower_bound_lab(config: &LowerBoundLabConfig) -> Result<LowerBoundReport> {
    let beta = config.beta;
    let mut fisher = Vec::new();
    for &h in &config.fisher_h {
        let fam = PerturbedFamily::single(h, beta, vec![0.5], 0.0)?;
        fisher.push((h, fisher_information(&fam, 64)?.total));
    }
    let hs: Vec<f64> = fisher.iter().map(|f| f.0).collect();
    let is: Vec<f64> = fisher.iter().map(|f| f.1).collect();
    let fisher_slope = log_log_slope(&hs, &is)?;
    let fisher_target = 2.0 * beta + 1.0 - 2.0;
    let fisher_closed_form = hs[0].powf(2.0 * beta - 1.0) * bump_second_derivative_energy(256);

    let centers = packing_centers(config.score_h, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let raw: Vec<f64> = centers.iter().map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let theta: Vec<f64> = raw
        .iter()
        .map(|v| 0.5 * config.score_h * v / norm)
        .collect();
    let fam = PerturbedFamily::new(config.score_h, beta, centers, theta, config.lambda)?;
    fam.check_valid(64)?;
    let score = score_lower_bound_check(&fam, 201)?;

    let prior = prior_energy(1, config.prior_mc_points, config.seed)?;
    let ns: Vec<f64> = config.log2_n.iter().map(|k| 2f64.powi(*k as i32)).collect();
    let rows = assembled_lower_bound(&ns, beta, config.lambda, prior.radial)?;
    let bound_slope = log_log_slope(&ns, &rows.iter().map(|r| r.bound).collect::<Vec<_>>())?;
    let bound_target = -2.0 * beta / (2.0 * beta + 1.0);
    let fisher_pass = (fisher_slope - fisher_target).abs() <= 0.2;
    let bound_pass = (bound_slope - bound_target).abs() <= 0.05;
    Ok(LowerBoundReport {
        config: config.clone(),
        fisher,
        fisher_slope,
        fisher_target,
        fisher_pass,
        fisher_closed_form,
        pass: fisher_pass && bound_pass && score.pass,
        score,
        prior,
        rows,
        bound_slope,
        bound_target,
        bound_pass,
    })
}

impl LowerBoundReport {
    /// `n,h,m,fisher_mean,prior_energy,van_trees,bound` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "n,h,m,fisher_mean,prior_energy,van_trees,bound")?;
        for r in &self.rows {
            writeln!(
                f,
                "{},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.n, r.h, r.m, r.fisher_mean, r.prior_energy, r.van_trees, r.bound
            )?;
        }
        Ok(())
    }
}

/// Quadrature over `[0,1]^d` combining per-ball rules with the unit weight outside:
/// `∫ f p_θ` where `f` is supported anywhere, used to check normalization.
pub fn family_mass(fam: &PerturbedFamily, quad: &QuadratureScheme) -> Result<f64> {
    let vals = quad
        .nodes()
        .map(|x| fam.log_density(x).map(f64::exp))
        .collect::<Result<Vec<_>>>()?;
    Ok(quad.sum(&vals))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_examples() {
        let b = BumpFunction::standard(2);
        let v = b.eval(&[0.0, 0.0]);
        assert!((v.value - 1.0).abs() < 1e-15);
        assert!(v.gradient.iter().all(|g| *g == 0.0));
        assert!((v.hessian[(0, 0)] + 2.0).abs() < 1e-14 && (v.hessian[(1, 1)] + 2.0).abs() < 1e-14);
        let out = b.eval(&[1.2, 0.0]);
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn packing_examples() {
        let c = packing_centers(0.05, 1).unwrap();
        assert!((c[1][0] - c[0][0] - 0.11).abs() < 1e-12);
        assert!(c
            .iter()
            .all(|x| x[0] >= 1.0 / 3.0 - 1e-15 && x[0] <= 2.0 / 3.0 + 1e-15));
        assert!(c.len() >= (1.0 / (12.0 * 0.05)) as usize);
        assert!(packing_centers(0.2, 1).is_err());
    }

    #[test]
    fn bandwidth_examples() {
        assert!((bandwidth(1024.0, 3.0, 1, 1.5) - (1.0f64 / 1536.0).powf(1.0 / 7.0)).abs() < 1e-15);
        assert!((bandwidth(1024.0, 3.0, 1, 1.5) - 0.3506).abs() < 1e-4);
        assert_eq!(bandwidth(1.0, 3.0, 1, 1.0), 1.0);
    }
}
