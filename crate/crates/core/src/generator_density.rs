//! Push-forward densities `p(x) = |det ∇g(g⁻¹(x))|⁻¹` of uniform noise through
//! invertible maps of the unit cube, plus regularity diagnostics.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::quadrature::{uniform_grid, QuadratureScheme};
use crate::requ_net::{Architecture, Partial, ReQUNetwork};

/// A C¹ map of `ℝ^d` with an analytic Jacobian.
pub trait SmoothMap: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[f64]) -> Vec<f64>;
    fn jacobian(&self, y: &[f64]) -> DMatrix<f64>;
}

impl SmoothMap for ReQUNetwork {
    fn dim(&self) -> usize {
        self.arch().input_dim()
    }
    fn eval(&self, y: &[f64]) -> Vec<f64> {
        self.forward(y)
            .expect("input width checked when the density was built")
    }
    fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        ReQUNetwork::jacobian(self, y).expect("input width checked when the density was built")
    }
}

impl<M: SmoothMap + ?Sized> SmoothMap for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, y: &[f64]) -> Vec<f64> {
        (**self).eval(y)
    }
    fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        (**self).jacobian(y)
    }
}

/// `g(y) = y − a·sin(2π f y)` on `[0,1]`; a bijection when `2π a f < 1` and `f` is an integer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineShift {
    pub amplitude: f64,
    pub frequency: f64,
}

impl SineShift {
    pub fn ground_truth() -> Self {
        Self {
            amplitude: 0.05,
            frequency: 1.0,
        }
    }
}

impl SmoothMap for SineShift {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, y: &[f64]) -> Vec<f64> {
        let w = 2.0 * std::f64::consts::PI * self.frequency;
        vec![y[0] - self.amplitude * (w * y[0]).sin()]
    }
    fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        let w = 2.0 * std::f64::consts::PI * self.frequency;
        DMatrix::from_element(1, 1, 1.0 - self.amplitude * w * (w * y[0]).cos())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub damping: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100,
            damping: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub order: f64,
    /// Largest sup-norm over derivatives of order `< order` (C⁰ for order 1, C¹ for order 2).
    pub c_s_norm: f64,
    /// Grid maximum of `|D^s g_i(x) − D^s g_i(y)| / min(1, ‖x−y‖)`.
    pub holder_quotient: f64,
    pub grid_resolution: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl HolderEstimate {
    pub fn norm(&self) -> f64 {
        self.c_s_norm.max(self.holder_quotient)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaAudit {
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Smallest Λ for which the grid satisfies `Λ⁻² I ⪯ ∇gᵀ∇g ⪯ Λ² I`.
    pub implied_lambda: f64,
    pub range_ok: bool,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct GeneratorDensity<M: SmoothMap> {
    pub map: M,
    pub lambda_bound: f64,
    pub inversion: InversionConfig,
}

fn project_cube(y: &mut [f64]) {
    for v in y.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl<M: SmoothMap> GeneratorDensity<M> {
    pub fn new(map: M, lambda_bound: f64) -> Result<Self> {
        if !(lambda_bound > 1.0) {
            return Err(Error::InvalidParam(format!(
                "Λ must exceed 1, got {lambda_bound}"
            )));
        }
        Ok(Self {
            map,
            lambda_bound,
            inversion: InversionConfig::default(),
        })
    }

    pub fn with_inversion(mut self, inversion: InversionConfig) -> Self {
        self.inversion = inversion;
        self
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    fn residual(&self, y: &[f64], x: &[f64]) -> Vec<f64> {
        self.map.eval(y).iter().zip(x).map(|(g, x)| g - x).collect()
    }

    /// Damped Newton from `y₀ = x` with iterates projected onto the cube; in one
    /// dimension a bisection on `[0,1]` takes over if Newton stalls.
    pub fn invert(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        let cfg = &self.inversion;
        let mut y = x.to_vec();
        project_cube(&mut y);
        let mut r = self.residual(&y, x);
        let mut res = sup_norm(&r);
        for _ in 0..cfg.max_iterations {
            if res <= cfg.tolerance {
                return Ok(y);
            }
            let j = self.map.jacobian(&y);
            if j.determinant().abs() < 1e-12 {
                if self.dim() == 1 {
                    break;
                }
                return Err(Error::Regularity(format!("singular Jacobian at {y:?}")));
            }
            let step = match j.lu().solve(&nalgebra::DVector::from_vec(r.clone())) {
                Some(s) => s,
                None => return Err(Error::Regularity(format!("singular Jacobian at {y:?}"))),
            };
            for (yi, si) in y.iter_mut().zip(step.iter()) {
                *yi -= cfg.damping * si;
            }
            project_cube(&mut y);
            r = self.residual(&y, x);
            res = sup_norm(&r);
        }
        if res <= cfg.tolerance {
            return Ok(y);
        }
        if self.dim() == 1 {
            return self.bisect(x[0]);
        }
        Err(Error::Inversion { residual: res })
    }

    fn bisect(&self, x: f64) -> Result<Vec<f64>> {
        let f = |y: f64| self.map.eval(&[y])[0] - x;
        let (mut lo, mut hi) = (0.0, 1.0);
        let (flo, fhi) = (f(lo), f(hi));
        if flo.signum() == fhi.signum() && flo != 0.0 && fhi != 0.0 {
            let residual = flo.abs().min(fhi.abs());
            return Err(Error::Inversion { residual });
        }
        let increasing = fhi >= flo;
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) < 0.0) == increasing {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut y = 0.5 * (lo + hi);
        // polish; the bracket keeps Newton honest
        for _ in 0..5 {
            let fy = f(y);
            if fy.abs() <= self.inversion.tolerance {
                break;
            }
            let d = self.map.jacobian(&[y])[(0, 0)];
            if d == 0.0 {
                break;
            }
            y = (y - fy / d).clamp(lo, hi);
        }
        let residual = f(y).abs();
        if residual <= self.inversion.tolerance {
            Ok(vec![y])
        } else {
            Err(Error::Inversion { residual })
        }
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        let y = self.invert(x)?;
        let det = self.map.jacobian(&y).determinant().abs();
        if det < 1e-12 {
            return Err(Error::Regularity(format!("|det ∇g| = {det:.3e} at {y:?}")));
        }
        Ok(1.0 / det)
    }

    /// Push-forward of a non-uniform latent density `φ`.
    pub fn density_general<F: Fn(&[f64]) -> f64>(&self, latent: F, x: &[f64]) -> Result<f64> {
        let y = self.invert(x)?;
        let det = self.map.jacobian(&y).determinant().abs();
        if det < 1e-12 {
            return Err(Error::Regularity(format!("|det ∇g| = {det:.3e} at {y:?}")));
        }
        Ok(latent(&y) / det)
    }

    /// Density at every quadrature node.
    pub fn tabulate(&self, quad: &QuadratureScheme) -> Result<Vec<f64>> {
        check_len(self.dim(), quad.dim)?;
        crate::par::map_indices(quad.len(), |i| self.density(quad.node(i)))
            .into_iter()
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..m)
            .map(|_| {
                let y: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
                self.map.eval(&y)
            })
            .collect()
    }

    /// Grid estimate of the Hölder norm of order 1 or 2 plus the singular-value range of ∇g.
    pub fn holder_diagnostics(&self, order: f64, grid_res: usize) -> Result<HolderEstimate> {
        if grid_res < 2 {
            return Err(Error::InvalidParam(
                "grid resolution must be at least 2".into(),
            ));
        }
        if order != 1.0 && order != 2.0 {
            return Err(Error::InvalidParam(format!(
                "order {order} unsupported (1 or 2)"
            )));
        }
        let grid = uniform_grid(self.dim(), grid_res);
        let vals: Vec<Vec<f64>> = grid.iter().map(|x| self.map.eval(x)).collect();
        let jacs: Vec<DMatrix<f64>> = grid.iter().map(|x| self.map.jacobian(x)).collect();
        let (mut smin, mut smax) = (f64::INFINITY, 0.0f64);
        for j in &jacs {
            let sv = j.clone().singular_values();
            smin = smin.min(sv.min());
            smax = smax.max(sv.max());
        }
        let sup_g = vals.iter().map(|v| sup_norm(v)).fold(0.0, f64::max);
        let sup_jac = jacs.iter().map(|j| j.amax()).fold(0.0, f64::max);
        let features: Vec<Vec<f64>> = if order == 1.0 {
            vals
        } else {
            jacs.iter().map(|j| j.as_slice().to_vec()).collect()
        };
        let mut quotient = 0.0f64;
        for a in 0..grid.len() {
            for b in a + 1..grid.len() {
                let dist: f64 = grid[a]
                    .iter()
                    .zip(&grid[b])
                    .map(|(u, v)| (u - v) * (u - v))
                    .sum::<f64>()
                    .sqrt();
                let diff = features[a]
                    .iter()
                    .zip(&features[b])
                    .map(|(u, v)| (u - v).abs())
                    .fold(0.0, f64::max);
                quotient = quotient.max(diff / dist.min(1.0));
            }
        }
        let c_s_norm = if order == 1.0 {
            sup_g
        } else {
            sup_g.max(sup_jac)
        };
        Ok(HolderEstimate {
            order,
            c_s_norm,
            holder_quotient: quotient,
            grid_resolution: grid_res,
            sigma_min: smin,
            sigma_max: smax,
        })
    }

    /// Λ-regularity and range audit on a uniform grid.
    pub fn lambda_audit(&self, grid_res: usize) -> LambdaAudit {
        let grid = uniform_grid(self.dim(), grid_res.max(2));
        let (mut smin, mut smax) = (f64::INFINITY, 0.0f64);
        let mut range_ok = true;
        for x in &grid {
            let sv = self.map.jacobian(x).singular_values();
            smin = smin.min(sv.min());
            smax = smax.max(sv.max());
            range_ok &= self
                .map
                .eval(x)
                .iter()
                .all(|&g| (-1e-12..=1.0 + 1e-12).contains(&g));
        }
        let implied_lambda = smax.max(1.0 / smin);
        LambdaAudit {
            sigma_min: smin,
            sigma_max: smax,
            implied_lambda,
            range_ok,
            pass: range_ok && implied_lambda <= self.lambda_bound,
        }
    }
}

/// `(Λ^{-d}, Λ^d)`.
pub fn density_bounds(lambda: f64, d: usize) -> Result<(f64, f64)> {
    if !(lambda > 1.0) {
        return Err(Error::InvalidParam(format!(
            "Λ must exceed 1, got {lambda}"
        )));
    }
    let m = lambda.powi(d as i32);
    Ok((1.0 / m, m))
}

/// `d^{2+d/2} Λ^{3d} (1 + H Λ √d)`: sup-norm density change per unit H¹ change of the generator.
pub fn density_lipschitz_constant(d: usize, lambda: f64, h_g: f64) -> f64 {
    let df = d as f64;
    df.powf(2.0 + df / 2.0) * lambda.powf(3.0 * df) * (1.0 + h_g * lambda * df.sqrt())
}

/// Sup over a grid of `max(|g_u − g_v|, |∇g_u − ∇g_v|)` (entrywise): the H¹ distance
/// as used in the density-Lipschitz argument.
pub fn grid_h1_distance<A: SmoothMap, B: SmoothMap>(a: &A, b: &B, grid: &[Vec<f64>]) -> f64 {
    grid.iter()
        .map(|x| {
            let dv = a
                .eval(x)
                .iter()
                .zip(b.eval(x))
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max);
            let dj = (a.jacobian(x) - b.jacobian(x)).amax();
            dv.max(dj)
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Exact cube bijections realized as ReQU networks.

/// Hidden units `σ(y+1)`, `σ(1−y)`, `σ(y)`, `σ(y−t_k)` with output
/// `g(y) = α y + γ y² + Σ c_k (y−t_k)₊²`, `α` chosen so that `g(1) = 1`.
pub fn spline_generator_1d(gamma: f64, knots: &[f64], coeffs: &[f64]) -> Result<ReQUNetwork> {
    check_len(knots.len(), coeffs.len())?;
    let m = 3 + knots.len();
    let alpha = 1.0
        - gamma
        - knots
            .iter()
            .zip(coeffs)
            .map(|(t, c)| c * (1.0 - t) * (1.0 - t))
            .sum::<f64>();
    let mut w0 = vec![1.0, -1.0, 1.0];
    w0.extend(std::iter::repeat_n(1.0, knots.len()));
    let mut v1 = vec![-1.0, -1.0, 0.0];
    v1.extend_from_slice(knots);
    let mut w1 = vec![alpha / 4.0, -alpha / 4.0, gamma];
    w1.extend_from_slice(coeffs);
    ReQUNetwork::new(
        Architecture::new(vec![1, m, 1])?,
        vec![w0, w1],
        vec![v1],
        None,
    )
}

/// Identity on `[0,1]` through the two-unit gadget `((y+1)² − (1−y)²)/4`, padded
/// with inactive knot units.
pub fn identity_generator_1d(knots: &[f64]) -> ReQUNetwork {
    spline_generator_1d(0.0, knots, &vec![0.0; knots.len()]).expect("identity fits the box")
}

/// Equally spaced interior knots `k/(K+1)`.
pub fn default_knots(count: usize) -> Vec<f64> {
    (1..=count).map(|k| k as f64 / (count + 1) as f64).collect()
}

/// Random monotone spline generator with implied Λ at most `lambda`.
pub fn random_spline_generator_1d<R: Rng + ?Sized>(
    knots: &[f64],
    strength: f64,
    lambda: f64,
    rng: &mut R,
) -> ReQUNetwork {
    loop {
        let gamma = rng.gen_range(-strength..=strength);
        let coeffs: Vec<f64> = knots
            .iter()
            .map(|_| rng.gen_range(-strength..=strength))
            .collect();
        let Ok(net) = spline_generator_1d(gamma, knots, &coeffs) else {
            continue;
        };
        let g = GeneratorDensity::new(&net, lambda).expect("Λ > 1");
        if g.lambda_audit(257).pass {
            return net;
        }
    }
}

/// Triangular bijection of the square with two hidden layers:
/// `g₁ = y₁ + a₁ y₁(1−y₁)`, `g₂ = y₂ + (a₂ + b y₁) y₂(1−y₂)`.
/// Needs `|a₁| < 1` and `|a₂| + |b| < 1`.
pub fn triangular_generator_2d(a1: f64, a2: f64, b: f64) -> Result<ReQUNetwork> {
    if a1.abs() >= 1.0 || a2.abs() + b.abs() >= 1.0 {
        return Err(Error::InvalidParam(
            "coefficients break monotonicity".into(),
        ));
    }
    // layer 1: σ(y1+1), σ(1−y1), y1², σ(y2+1), σ(1−y2), y2²
    let w0 = vec![
        1.0, 0.0, //
        -1.0, 0.0, //
        1.0, 0.0, //
        0.0, 1.0, //
        0.0, -1.0, //
        0.0, 1.0,
    ];
    let v1 = vec![-1.0, -1.0, 0.0, -1.0, -1.0, 0.0];
    // linear forms over layer-1 outputs
    let y1 = [0.25, -0.25, 0.0, 0.0, 0.0, 0.0];
    let q1 = [0.25, -0.25, -1.0, 0.0, 0.0, 0.0];
    let y2 = [0.0, 0.0, 0.0, 0.25, -0.25, 0.0];
    let q2 = [0.0, 0.0, 0.0, 0.25, -0.25, -1.0];
    let neg = |r: &[f64; 6]| r.map(|v| -v);
    let add = |a: &[f64; 6], b: &[f64; 6]| {
        let mut o = [0.0; 6];
        for i in 0..6 {
            o[i] = a[i] + b[i];
        }
        o
    };
    let rows: Vec<[f64; 6]> = vec![
        y1,
        neg(&y1),
        q1,
        neg(&q1),
        y2,
        neg(&y2),
        q2,
        neg(&q2),
        add(&q2, &y1),
        add(&q2, &neg(&y1)),
        add(&y1, &neg(&q2)),
    ];
    let w1: Vec<f64> = rows.iter().flatten().copied().collect();
    let v2 = vec![
        -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, 0.0, 0.0, 0.0,
    ];
    let q = 0.25;
    let w2 = vec![
        q,
        -q,
        a1 * q,
        -a1 * q,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0, //
        0.0,
        0.0,
        0.0,
        0.0,
        q,
        -q,
        a2 * q,
        -a2 * q,
        b * q,
        -b * q,
        -b * q,
    ];
    ReQUNetwork::new(
        Architecture::new(vec![2, 6, 11, 2])?,
        vec![w0, w1, w2],
        vec![v1, v2],
        None,
    )
}

pub fn random_triangular_generator_2d<R: Rng + ?Sized>(strength: f64, rng: &mut R) -> ReQUNetwork {
    let s = strength.clamp(0.0, 0.9);
    let a1 = rng.gen_range(-s..=s);
    let a2 = rng.gen_range(-s / 2.0..=s / 2.0);
    let b = rng.gen_range(-s / 2.0..=s / 2.0);
    triangular_generator_2d(a1, a2, b).expect("coefficients inside the monotone range")
}

/// Project the output row of a one-dimensional network onto
/// `{c : g(0) = 0, g(1) = 1} ∩ [-1,1]^p` by alternating projections. Returns the
/// endpoint residual after projection.
pub fn project_endpoints_1d(net: &ReQUNetwork) -> Result<(ReQUNetwork, f64)> {
    let arch = net.arch().clone();
    if arch.input_dim() != 1 || arch.output_dim() != 1 {
        return Err(Error::InvalidParam(
            "endpoint projection needs a scalar map".into(),
        ));
    }
    let n = arch.depth_hidden();
    let h0 = net.partial_forward(Partial::B { k: n, i: 1 }, &[0.0])?;
    let h1 = net.partial_forward(Partial::B { k: n, i: 1 }, &[1.0])?;
    let mut params = net.params().values;
    let off = params.len() - h0.len();
    let mut c = params[off..].to_vec();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let g00 = dot(&h0, &h0);
    let g01 = dot(&h0, &h1);
    let g11 = dot(&h1, &h1);
    let det = g00 * g11 - g01 * g01;
    if det.abs() < 1e-14 * (g00 * g11).max(1e-300) {
        return Err(Error::Regularity(
            "endpoint activations are collinear".into(),
        ));
    }
    let mut residual = f64::INFINITY;
    for _ in 0..200 {
        let r0 = dot(&c, &h0);
        let r1 = dot(&c, &h1) - 1.0;
        // (H Hᵀ)⁻¹ r
        let l0 = (g11 * r0 - g01 * r1) / det;
        let l1 = (-g01 * r0 + g00 * r1) / det;
        for i in 0..c.len() {
            c[i] -= l0 * h0[i] + l1 * h1[i];
        }
        let inside = c.iter().all(|v| (-1.0..=1.0).contains(v));
        for v in c.iter_mut() {
            *v = v.clamp(-1.0, 1.0);
        }
        residual = dot(&c, &h0).abs().max((dot(&c, &h1) - 1.0).abs());
        if inside && residual < 1e-14 {
            break;
        }
    }
    params[off..].copy_from_slice(&c);
    Ok((
        ReQUNetwork::from_params(arch, net.sparsity_budget(), &params)?,
        residual,
    ))
}

/// Alternating projections of the output row of a scalar network onto
/// `{g(0) = 0, g(1) = 1} ∩ {Λ⁻¹ ≤ g' ≤ Λ on a uniform grid} ∩ [-1,1]^p`.
/// `g'` is linear in the output row, so every set is convex. Returns the
/// corrected network and whether all constraints hold to `1e-12`.
pub fn project_regular_1d(
    net: &ReQUNetwork,
    lambda: f64,
    grid_res: usize,
) -> Result<(ReQUNetwork, bool)> {
    let arch = net.arch().clone();
    if arch.input_dim() != 1 || arch.output_dim() != 1 || arch.depth_hidden() == 0 {
        return Err(Error::InvalidParam(
            "regular projection needs a scalar network with hidden layers".into(),
        ));
    }
    let n = arch.depth_hidden();
    let width = arch.widths()[n];
    // features network: same hidden layers, identity readout
    let mut widths = arch.widths().to_vec();
    widths[n + 1] = width;
    let mut eye = vec![0.0; width * width];
    (0..width).for_each(|i| eye[i * width + i] = 1.0);
    let weights: Vec<Vec<f64>> = (0..n)
        .map(|i| net.weight(i).to_vec())
        .chain(std::iter::once(eye))
        .collect();
    let shifts: Vec<Vec<f64>> = (1..=n).map(|i| net.shift(i).to_vec()).collect();
    let features = ReQUNetwork::new(Architecture::new(widths)?, weights, shifts, None)?;
    let rows: Vec<Vec<f64>> = (0..grid_res.max(2))
        .map(|k| {
            let y = k as f64 / (grid_res.max(2) - 1) as f64;
            ReQUNetwork::jacobian(&features, &[y]).map(|j| j.column(0).iter().copied().collect())
        })
        .collect::<Result<_>>()?;
    let (lo, hi) = (1.0 / lambda * (1.0 + 1e-9), lambda * (1.0 - 1e-9));
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut cur = net.clone();
    for _ in 0..500 {
        let (fixed, res) = project_endpoints_1d(&cur)?;
        cur = fixed;
        let mut params = cur.params().values;
        let off = params.len() - width;
        let mut c = params[off..].to_vec();
        let mut feasible = res < 1e-12;
        for a in &rows {
            let s = dot(a, &c);
            let norm = dot(a, a);
            if norm == 0.0 {
                continue;
            }
            let target = if s < lo / (1.0 + 1e-9) {
                lo
            } else if s > hi / (1.0 - 1e-9) {
                hi
            } else {
                continue;
            };
            feasible = false;
            let step = (target - s) / norm;
            c.iter_mut().zip(a).for_each(|(ci, ai)| *ci += step * ai);
        }
        if feasible {
            return Ok((cur, true));
        }
        c.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
        params[off..].copy_from_slice(&c);
        cur = ReQUNetwork::from_params(arch.clone(), net.sparsity_budget(), &params)?;
    }
    Ok((cur, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> ReQUNetwork {
        ReQUNetwork::from_params(Architecture::new(vec![1, 1]).unwrap(), None, &[0.5]).unwrap()
    }

    #[test]
    fn linear_inverse_and_density() {
        let g = GeneratorDensity::new(half(), 2.0).unwrap();
        assert!((g.invert(&[0.2]).unwrap()[0] - 0.4).abs() < 1e-12);
        assert!((g.density(&[0.3]).unwrap() - 2.0).abs() < 1e-12);
        let v = g.density_general(|y| 2.0 * y[0], &[0.3]).unwrap();
        assert!((v - 2.4).abs() < 1e-12);
    }

    #[test]
    fn sine_shift_example() {
        let g = GeneratorDensity::new(SineShift::ground_truth(), 1.5).unwrap();
        assert!((g.invert(&[0.2]).unwrap()[0] - 0.25).abs() < 1e-9);
        assert!((g.density(&[0.2]).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn outside_image_fails() {
        let g = GeneratorDensity::new(half(), 2.0).unwrap();
        assert!(matches!(g.invert(&[0.8]), Err(Error::Inversion { .. })));
    }

    #[test]
    fn gadgets_are_exact() {
        let id = identity_generator_1d(&default_knots(3));
        for &y in &[0.0, 0.3, 1.0] {
            assert!((id.forward(&[y]).unwrap()[0] - y).abs() < 1e-15);
        }
        let t = triangular_generator_2d(0.3, 0.2, -0.4).unwrap();
        let (y1, y2): (f64, f64) = (0.3, 0.8);
        let out = t.forward(&[y1, y2]).unwrap();
        let g1 = y1 + 0.3 * y1 * (1.0 - y1);
        let g2 = y2 + (0.2 - 0.4 * y1) * y2 * (1.0 - y2);
        assert!((out[0] - g1).abs() < 1e-14 && (out[1] - g2).abs() < 1e-14);
    }

    #[test]
    fn endpoint_projection_restores_bijection() {
        let mut p = spline_generator_1d(0.2, &[0.5], &[0.3])
            .unwrap()
            .params()
            .values;
        let last = p.len() - 1;
        p[last] += 0.05;
        let net =
            ReQUNetwork::from_params(Architecture::new(vec![1, 4, 1]).unwrap(), None, &p).unwrap();
        let (fixed, res) = project_endpoints_1d(&net).unwrap();
        assert!(res < 1e-14);
        assert!(fixed.forward(&[0.0]).unwrap()[0].abs() < 1e-14);
        assert!((fixed.forward(&[1.0]).unwrap()[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn regular_projection_restores_slope_bounds() {
        // γ = -0.9 makes g' = α + 2γy dip well below 1/2 near y = 1
        let net = spline_generator_1d(-0.9, &[0.5], &[0.0]).unwrap();
        assert!(
            !GeneratorDensity::new(&net, 1.5)
                .unwrap()
                .lambda_audit(257)
                .pass
        );
        let (fixed, ok) = project_regular_1d(&net, 1.5, 257).unwrap();
        assert!(ok);
        let audit = GeneratorDensity::new(&fixed, 1.5)
            .unwrap()
            .lambda_audit(257);
        assert!(audit.pass, "{audit:?}");
    }

    #[test]
    fn lipschitz_constant_examples() {
        assert!((density_lipschitz_constant(1, 2.0, 1.0) - 24.0).abs() < 1e-12);
        assert!((density_lipschitz_constant(1, 1.0 + 1e-12, 0.0) - 1.0).abs() < 1e-9);
        let (lo, hi) = density_bounds(1.5, 2).unwrap();
        assert!((lo - 1.0 / 2.25).abs() < 1e-15 && (hi - 2.25).abs() < 1e-15);
        assert!(density_bounds(1.0, 1).is_err());
    }
}
