//! Feed-forward networks with shifted ReQU activations `σ(t) = (t ∨ 0)²`.
//!
//! A network with `N` hidden layers and widths `(p_0, …, p_{N+1})` computes
//!
//! ```text
//! f(x) = W_N σ(W_{N-1} σ( … σ(W_0 x − v_1) … ) − v_N)
//! ```
//!
//! with `W_i ∈ [-1,1]^{p_{i+1}×p_i}` and `v_i ∈ [-1,1]^{p_i}`. The output layer is
//! affine without a shift. Parameters are flattened layer by layer: `W_0` (row
//! major), `v_1`, `W_1`, `v_2`, …, `v_N`, `W_N`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[inline]
pub fn requ(t: f64) -> f64 {
    if t > 0.0 {
        t * t
    } else {
        0.0
    }
}

/// Derivative of [`requ`]; zero at the kink.
#[inline]
pub fn requ_prime(t: f64) -> f64 {
    if t > 0.0 {
        2.0 * t
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    widths: Vec<usize>,
}

impl Architecture {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Architecture(format!(
                "need at least input and output widths, got {}",
                widths.len()
            )));
        }
        if widths.contains(&0) {
            return Err(Error::Architecture("widths must be positive".into()));
        }
        Ok(Self { widths })
    }

    /// Number of hidden layers `N`.
    pub fn depth_hidden(&self) -> usize {
        self.widths.len() - 2
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        let w: usize = self.widths.windows(2).map(|p| p[0] * p[1]).sum();
        let v: usize = self.widths[1..self.widths.len() - 1].iter().sum();
        w + v
    }
}

/// Flat parameter vector, the point `w` (or `θ`) of the parameter cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_distance(&self, other: &ParamVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

/// Clip every coordinate into `[-1, 1]`.
pub fn project_unit_box(values: &mut [f64]) {
    for v in values.iter_mut() {
        *v = v.clamp(-1.0, 1.0);
    }
}

/// Keep the `budget` largest-magnitude entries, zero the rest. Ties resolve
/// toward lower indices so the projection is deterministic.
pub fn project_sparsity(values: &mut [f64], budget: usize) {
    let nnz = values.iter().filter(|v| **v != 0.0).count();
    if nnz <= budget {
        return;
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .abs()
            .partial_cmp(&values[a].abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    for &i in &order[budget..] {
        values[i] = 0.0;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReQUNetwork {
    arch: Architecture,
    /// `weights[i]` is `W_i`, row-major `p_{i+1} × p_i`.
    weights: Vec<Vec<f64>>,
    /// `shifts[i-1]` is `v_i`, length `p_i`.
    shifts: Vec<Vec<f64>>,
    sparsity: Option<usize>,
}

/// Intermediate values of one forward pass, kept for differentiation.
#[derive(Clone, Debug)]
pub struct Trace {
    /// `acts[0] = x`, `acts[ℓ] = σ(z_ℓ)` for hidden layers.
    pub acts: Vec<Vec<f64>>,
    /// Shifted pre-activations `z_ℓ = W_{ℓ-1} acts[ℓ-1] − v_ℓ`, `ℓ = 1..=N`.
    pub pre: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

/// Which partial composition to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Partial {
    /// `B_{k,i} = σ_{v_k} ∘ W_{k-1} ∘ … ∘ σ_{v_i} ∘ W_{i-1}`; `B_{i-1,i}` is the identity.
    B { k: usize, i: usize },
    /// `A_{j,k} = W_j ∘ σ_{v_j} ∘ … ∘ σ_{v_k} ∘ W_{k-1}`; `A_{N,N+2}` is the identity.
    A { j: usize, k: usize },
}

fn matvec(m: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        out.push(row.iter().zip(x).map(|(a, b)| a * b).sum());
    }
}

impl ReQUNetwork {
    pub fn new(
        arch: Architecture,
        weights: Vec<Vec<f64>>,
        shifts: Vec<Vec<f64>>,
        sparsity: Option<usize>,
    ) -> Result<Self> {
        let n = arch.depth_hidden();
        let p = arch.widths();
        check_len(n + 1, weights.len())?;
        check_len(n, shifts.len())?;
        for (i, w) in weights.iter().enumerate() {
            check_len(p[i + 1] * p[i], w.len())?;
        }
        for (i, v) in shifts.iter().enumerate() {
            check_len(p[i + 1], v.len())?;
        }
        let net = Self {
            arch,
            weights,
            shifts,
            sparsity,
        };
        for (index, &value) in net.params().values.iter().enumerate() {
            if !(-1.0..=1.0).contains(&value) {
                return Err(Error::OutOfRange { index, value });
            }
        }
        if let Some(budget) = sparsity {
            let nonzeros = net.nonzeros();
            if nonzeros > budget {
                return Err(Error::Sparsity { budget, nonzeros });
            }
        }
        Ok(net)
    }

    pub fn zeros(arch: Architecture) -> Self {
        let p = arch.widths().to_vec();
        let n = arch.depth_hidden();
        Self {
            weights: (0..=n).map(|i| vec![0.0; p[i + 1] * p[i]]).collect(),
            shifts: (1..=n).map(|i| vec![0.0; p[i]]).collect(),
            arch,
            sparsity: None,
        }
    }

    /// Entries i.i.d. uniform on `[-scale, scale]`, `scale ≤ 1`.
    pub fn random<R: Rng + ?Sized>(arch: Architecture, scale: f64, rng: &mut R) -> Self {
        let scale = scale.clamp(0.0, 1.0);
        let count = arch.param_count();
        let values: Vec<f64> = (0..count).map(|_| rng.gen_range(-scale..=scale)).collect();
        Self::from_params(arch, None, &values).expect("random parameters lie in the unit box")
    }

    pub fn from_params(
        arch: Architecture,
        sparsity: Option<usize>,
        values: &[f64],
    ) -> Result<Self> {
        check_len(arch.param_count(), values.len())?;
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(-1.0..=1.0).contains(*v))
        {
            return Err(Error::OutOfRange { index, value });
        }
        let p = arch.widths().to_vec();
        let n = arch.depth_hidden();
        let mut weights = Vec::with_capacity(n + 1);
        let mut shifts = Vec::with_capacity(n);
        let mut at = 0;
        for i in 0..=n {
            let len = p[i + 1] * p[i];
            weights.push(values[at..at + len].to_vec());
            at += len;
            if i < n {
                shifts.push(values[at..at + p[i + 1]].to_vec());
                at += p[i + 1];
            }
        }
        Self::new(arch, weights, shifts, sparsity)
    }

    pub fn params(&self) -> ParamVector {
        let mut out = Vec::with_capacity(self.arch.param_count());
        let n = self.depth_hidden();
        for i in 0..=n {
            out.extend_from_slice(&self.weights[i]);
            if i < n {
                out.extend_from_slice(&self.shifts[i]);
            }
        }
        ParamVector::new(out)
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn depth_hidden(&self) -> usize {
        self.arch.depth_hidden()
    }

    pub fn weight(&self, i: usize) -> &[f64] {
        &self.weights[i]
    }

    /// Shift vector `v_i`, `1 ≤ i ≤ N`.
    pub fn shift(&self, i: usize) -> &[f64] {
        &self.shifts[i - 1]
    }

    pub fn sparsity_budget(&self) -> Option<usize> {
        self.sparsity
    }

    pub fn nonzeros(&self) -> usize {
        self.weights
            .iter()
            .chain(&self.shifts)
            .flatten()
            .filter(|v| **v != 0.0)
            .count()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(x)?.output)
    }

    pub fn trace(&self, x: &[f64]) -> Result<Trace> {
        check_len(self.arch.input_dim(), x.len())?;
        let p = self.arch.widths();
        let n = self.depth_hidden();
        let mut acts = Vec::with_capacity(n + 1);
        let mut pre = Vec::with_capacity(n);
        acts.push(x.to_vec());
        let mut z = Vec::new();
        for l in 1..=n {
            matvec(&self.weights[l - 1], p[l], p[l - 1], &acts[l - 1], &mut z);
            for (zi, vi) in z.iter_mut().zip(&self.shifts[l - 1]) {
                *zi -= vi;
            }
            acts.push(z.iter().map(|&t| requ(t)).collect());
            pre.push(std::mem::take(&mut z));
        }
        let mut output = Vec::new();
        matvec(&self.weights[n], p[n + 1], p[n], &acts[n], &mut output);
        Ok(Trace { acts, pre, output })
    }

    /// `∇f(x) = W_N D_N W_{N-1} ⋯ D_1 W_0` with `D_ℓ = diag σ'(z_ℓ)`.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let t = self.trace(x)?;
        let p = self.arch.widths();
        let n = self.depth_hidden();
        let mut m = DMatrix::from_row_slice(p[1], p[0], &self.weights[0]);
        for l in 1..=n {
            for (r, &z) in t.pre[l - 1].iter().enumerate() {
                let s = requ_prime(z);
                m.row_mut(r).scale_mut(s);
            }
            let w = DMatrix::from_row_slice(p[l + 1], p[l], &self.weights[l]);
            m = w * m;
        }
        Ok(m)
    }

    /// Reverse pass for `upstreamᵀ f(x)`: returns (parameter gradient, input gradient).
    pub fn backward(&self, trace: &Trace, upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len(self.arch.output_dim(), upstream.len())?;
        let p = self.arch.widths();
        let n = self.depth_hidden();
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); 2 * n + 1];
        // slot 2i holds W_i, slot 2i+1 holds v_{i+1}
        let mut delta = upstream.to_vec();
        for l in (0..=n).rev() {
            // delta is the gradient w.r.t. the output of W_l
            let (rows, cols) = (p[l + 1], p[l]);
            let input = &trace.acts[l];
            let mut gw = vec![0.0; rows * cols];
            for r in 0..rows {
                if delta[r] != 0.0 {
                    for c in 0..cols {
                        gw[r * cols + c] = delta[r] * input[c];
                    }
                }
            }
            grads[2 * l] = gw;
            let w = &self.weights[l];
            let mut back = vec![0.0; cols];
            for r in 0..rows {
                let d = delta[r];
                if d != 0.0 {
                    for c in 0..cols {
                        back[c] += w[r * cols + c] * d;
                    }
                }
            }
            if l == 0 {
                delta = back;
            } else {
                let z = &trace.pre[l - 1];
                let gz: Vec<f64> = back
                    .iter()
                    .zip(z)
                    .map(|(b, &zi)| b * requ_prime(zi))
                    .collect();
                grads[2 * l - 1] = gz.iter().map(|g| -g).collect();
                delta = gz;
            }
        }
        Ok((grads.concat(), delta))
    }

    pub fn grad_params(&self, x: &[f64], upstream: &[f64]) -> Result<ParamVector> {
        let t = self.trace(x)?;
        Ok(ParamVector::new(self.backward(&t, upstream)?.0))
    }

    /// Vector-Jacobian product `upstreamᵀ ∇f(x)`.
    pub fn input_grad(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        let t = self.trace(x)?;
        Ok(self.backward(&t, upstream)?.1)
    }

    pub fn partial_forward(&self, which: Partial, x: &[f64]) -> Result<Vec<f64>> {
        let p = self.arch.widths();
        let n = self.depth_hidden();
        let mut z = Vec::new();
        match which {
            Partial::B { k, i } => {
                if i == 0 || k > n || k + 1 < i {
                    return Err(Error::Index(format!(
                        "B_{{{k},{i}}} needs 1 ≤ i ≤ k+1, k ≤ {n}"
                    )));
                }
                check_len(p[i - 1], x.len())?;
                let mut h = x.to_vec();
                for l in i..=k {
                    matvec(&self.weights[l - 1], p[l], p[l - 1], &h, &mut z);
                    h = z
                        .iter()
                        .zip(&self.shifts[l - 1])
                        .map(|(a, v)| requ(a - v))
                        .collect();
                }
                Ok(h)
            }
            Partial::A { j, k } => {
                if j == n && k == n + 2 {
                    check_len(p[n + 1], x.len())?;
                    return Ok(x.to_vec());
                }
                if k == 0 || j > n || k > j + 1 {
                    return Err(Error::Index(format!(
                        "A_{{{j},{k}}} needs 1 ≤ k ≤ j+1, j ≤ {n}"
                    )));
                }
                check_len(p[k - 1], x.len())?;
                let mut h = Vec::new();
                matvec(&self.weights[k - 1], p[k], p[k - 1], x, &mut h);
                for l in k..=j {
                    let act: Vec<f64> = h
                        .iter()
                        .zip(&self.shifts[l - 1])
                        .map(|(a, v)| requ(a - v))
                        .collect();
                    matvec(&self.weights[l], p[l + 1], p[l], &act, &mut h);
                }
                Ok(h)
            }
        }
    }

    pub fn to_record(&self) -> NetworkRecord {
        NetworkRecord {
            arch: self.arch.widths().to_vec(),
            weights: self.weights.clone(),
            shifts: self.shifts.clone(),
            sparsity: self.sparsity,
        }
    }

    pub fn from_record(rec: NetworkRecord) -> Result<Self> {
        Self::new(
            Architecture::new(rec.arch)?,
            rec.weights,
            rec.shifts,
            rec.sparsity,
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("plain data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_record(serde_json::from_str(s)?)
    }
}

/// Reusable buffers for allocation-free forward and reverse passes.
#[derive(Clone, Debug)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    out: Vec<f64>,
    delta: Vec<f64>,
    back: Vec<f64>,
}

impl Workspace {
    pub fn output(&self) -> &[f64] {
        &self.out
    }
}

impl ReQUNetwork {
    pub fn workspace(&self) -> Workspace {
        let p = self.arch.widths();
        let n = self.depth_hidden();
        let widest = *p.iter().max().expect("nonempty");
        Workspace {
            acts: (0..=n).map(|l| vec![0.0; p[l]]).collect(),
            pre: (1..=n).map(|l| vec![0.0; p[l]]).collect(),
            out: vec![0.0; p[n + 1]],
            delta: Vec::with_capacity(widest),
            back: Vec::with_capacity(widest),
        }
    }

    /// Forward pass into `ws`; the input length must equal `p_0` (unchecked beyond a debug assertion).
    pub fn forward_ws<'a>(&self, x: &[f64], ws: &'a mut Workspace) -> &'a [f64] {
        debug_assert_eq!(x.len(), self.arch.input_dim());
        let p = self.arch.widths();
        let n = self.depth_hidden();
        ws.acts[0].copy_from_slice(x);
        for l in 1..=n {
            let (cols, rows) = (p[l - 1], p[l]);
            let w = &self.weights[l - 1];
            let v = &self.shifts[l - 1];
            let (before, after) = ws.acts.split_at_mut(l);
            let input = &before[l - 1];
            let act = &mut after[0];
            let pre = &mut ws.pre[l - 1];
            for r in 0..rows {
                let row = &w[r * cols..(r + 1) * cols];
                let z = row
                    .iter()
                    .zip(input.iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    - v[r];
                pre[r] = z;
                act[r] = requ(z);
            }
        }
        let (cols, rows) = (p[n], p[n + 1]);
        let w = &self.weights[n];
        for r in 0..rows {
            let row = &w[r * cols..(r + 1) * cols];
            ws.out[r] = row.iter().zip(ws.acts[n].iter()).map(|(a, b)| a * b).sum();
        }
        &ws.out
    }

    /// Reverse pass after [`forward_ws`](Self::forward_ws): adds `upstreamᵀ ∂f/∂params`
    /// into `grad` (flat layout) and returns `upstreamᵀ ∇_x f`.
    pub fn backward_ws<'a>(
        &self,
        ws: &'a mut Workspace,
        upstream: &[f64],
        grad: &mut [f64],
    ) -> &'a [f64] {
        let p = self.arch.widths();
        let n = self.depth_hidden();
        let mut offsets = Vec::with_capacity(2 * n + 2);
        let mut acc = 0;
        for i in 0..=n {
            offsets.push(acc);
            acc += p[i + 1] * p[i];
            if i < n {
                offsets.push(acc);
                acc += p[i + 1];
            }
        }
        ws.delta.clear();
        ws.delta.extend_from_slice(upstream);
        for l in (0..=n).rev() {
            let (rows, cols) = (p[l + 1], p[l]);
            let input = &ws.acts[l];
            let gw = &mut grad[offsets[2 * l]..offsets[2 * l] + rows * cols];
            let w = &self.weights[l];
            ws.back.clear();
            ws.back.resize(cols, 0.0);
            for r in 0..rows {
                let d = ws.delta[r];
                if d != 0.0 {
                    let wr = &w[r * cols..(r + 1) * cols];
                    let gr = &mut gw[r * cols..(r + 1) * cols];
                    for c in 0..cols {
                        gr[c] += d * input[c];
                        ws.back[c] += wr[c] * d;
                    }
                }
            }
            if l > 0 {
                let z = &ws.pre[l - 1];
                let gv = &mut grad[offsets[2 * l - 1]..offsets[2 * l - 1] + cols];
                for c in 0..cols {
                    let g = ws.back[c] * requ_prime(z[c]);
                    ws.back[c] = g;
                    gv[c] -= g;
                }
            }
            std::mem::swap(&mut ws.delta, &mut ws.back);
        }
        &ws.delta
    }
}

/// Serialized form `{arch, weights, shifts, sparsity}`. `serde_json` prints the
/// shortest decimal that round-trips, so reloading is bit-exact.
/// Points of `[0,1]` where some hidden pre-activation of a scalar-input network
/// changes sign, located by scanning `grid_res` intervals and bisecting each
/// sign change to machine precision. Between consecutive kinks the network is a
/// polynomial.
pub fn kinks_1d(net: &ReQUNetwork, grid_res: usize) -> Result<Vec<f64>> {
    if net.arch().input_dim() != 1 {
        return Err(Error::InvalidParam(
            "kink search needs a scalar input".into(),
        ));
    }
    let res = grid_res.max(1);
    let pre_at = |x: f64| -> Result<Vec<f64>> { Ok(net.trace(&[x])?.pre.concat()) };
    let mut kinks = Vec::new();
    let mut left = pre_at(0.0)?;
    for s in 1..=res {
        let (a, b) = ((s - 1) as f64 / res as f64, s as f64 / res as f64);
        let right = pre_at(b)?;
        for u in 0..left.len() {
            let (za, zb) = (left[u], right[u]);
            if za == 0.0 && s == 1 {
                continue;
            }
            if zb == 0.0 {
                kinks.push(b);
                continue;
            }
            if (za < 0.0) != (zb < 0.0) && za != 0.0 {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let zm = pre_at(mid)?[u];
                    if (zm < 0.0) == (za < 0.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                kinks.push(0.5 * (lo + hi));
            }
        }
        left = right;
    }
    kinks.retain(|t| *t > 0.0 && *t < 1.0);
    kinks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    kinks.dedup_by(|x, y| (*x - *y).abs() < 1e-13);
    Ok(kinks)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub arch: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub shifts: Vec<Vec<f64>>,
    pub sparsity: Option<usize>,
}

/// A constant that may be astronomically large: its natural log plus the linear
/// value when representable (`+∞` and `saturated = true` otherwise).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    pub log: f64,
    pub value: f64,
    pub saturated: bool,
}

impl LogValue {
    pub fn from_log(log: f64) -> Self {
        let value = log.exp();
        Self {
            log,
            value,
            saturated: value.is_infinite(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationBounds {
    /// `(N+1) 2^N ∏ (p_ℓ+1)^{2^N}`: sup-norm change per unit parameter change.
    pub sup_coeff: LogValue,
    /// `N(N+1) 2^{N+1} ∏ (p_ℓ+1)^{2^{N+1}+1}`: Jacobian change per unit parameter change.
    pub jac_coeff: LogValue,
}

fn ln_widths_plus_one(p: &[usize]) -> f64 {
    p.iter().map(|&w| (w as f64 + 1.0).ln()).sum()
}

/// Coefficients bounding `‖f¹−f²‖_∞` and `‖∇f¹−∇f²‖_∞` on the unit cube when all
/// parameters differ by at most ε. The product runs over `p_0..p_N` (the output
/// width does not enter).
pub fn perturbation_bounds(arch: &Architecture) -> PerturbationBounds {
    let n = arch.depth_hidden() as f64;
    let p = &arch.widths()[..arch.widths().len() - 1];
    let s = ln_widths_plus_one(p);
    let two_n = 2f64.powf(n);
    let sup = (n + 1.0).ln() + n * std::f64::consts::LN_2 + two_n * s;
    let jac = if arch.depth_hidden() == 0 {
        f64::NEG_INFINITY
    } else {
        n.ln() + (n + 1.0).ln() + (n + 1.0) * std::f64::consts::LN_2 + (2.0 * two_n + 1.0) * s
    };
    PerturbationBounds {
        sup_coeff: LogValue::from_log(sup),
        jac_coeff: LogValue::from_log(jac),
    }
}

/// Selects the hidden-activation sup bound or the partial-composition Lipschitz bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    /// `‖B_{k,i}(x)‖_∞ ≤ ∏_{ℓ=1}^{k−i+1}(p_{k−ℓ}+1)^{2^ℓ}(K∨1)^{2^{k−i+1}}`, `1 ≤ i ≤ k ≤ N`.
    HiddenSup { k: usize, i: usize },
    /// `Lip_∞(A_{j,k}) ≤ 2^{j−k+1}∏_{ℓ=0}^{j−k+1}(p_{j−ℓ}+1)^{2^ℓ}(K∨1)^{2^{j−k+1}}`, `1 ≤ k ≤ j+1`, `j ≤ N`.
    Lipschitz { j: usize, k: usize },
}

/// Bounds for inputs with `‖x‖_∞ ≤ big_k`.
pub fn hidden_bounds(arch: &Architecture, kind: BoundKind, big_k: f64) -> Result<LogValue> {
    let p = arch.widths();
    let n = arch.depth_hidden();
    let lk = big_k.max(1.0).ln();
    match kind {
        BoundKind::HiddenSup { k, i } => {
            if i < 1 || i > k || k > n {
                return Err(Error::Index(format!(
                    "need 1 ≤ i ≤ k ≤ {n}, got k={k}, i={i}"
                )));
            }
            let m = k - i + 1;
            let mut log = 2f64.powi(m as i32) * lk;
            for l in 1..=m {
                log += 2f64.powi(l as i32) * (p[k - l] as f64 + 1.0).ln();
            }
            Ok(LogValue::from_log(log))
        }
        BoundKind::Lipschitz { j, k } => {
            if k < 1 || j > n || k > j + 1 {
                return Err(Error::Index(format!(
                    "need 1 ≤ k ≤ j+1, j ≤ {n}, got j={j}, k={k}"
                )));
            }
            let m = j + 1 - k;
            let mut log = m as f64 * std::f64::consts::LN_2 + 2f64.powi(m as i32) * lk;
            for l in 0..=m {
                log += 2f64.powi(l as i32) * (p[j - l] as f64 + 1.0).ln();
            }
            Ok(LogValue::from_log(log))
        }
    }
}

/// Sup-norm Lipschitz bound of the whole network on `‖x‖_∞ ≤ big_k`.
pub fn network_lipschitz_bound(arch: &Architecture, big_k: f64) -> LogValue {
    hidden_bounds(
        arch,
        BoundKind::Lipschitz {
            j: arch.depth_hidden(),
            k: 1,
        },
        big_k,
    )
    .expect("A_{N,1} is always a valid composition")
}

/// `(N+1) 2^N ∏_{p ∈ 𝒜} (p+1)^{2^N}` over all widths including the output: the
/// parameter-Lipschitz constant used for generator and discriminator classes.
pub fn class_lipschitz_constant(arch: &Architecture) -> LogValue {
    let n = arch.depth_hidden() as f64;
    let s = ln_widths_plus_one(arch.widths());
    LogValue::from_log((n + 1.0).ln() + n * std::f64::consts::LN_2 + 2f64.powf(n) * s)
}

/// Jacobian-perturbation coefficient with the product over all widths, as used for
/// the end-to-end density constant.
pub fn class_jacobian_constant(arch: &Architecture) -> LogValue {
    let n = arch.depth_hidden() as f64;
    if arch.depth_hidden() == 0 {
        return LogValue::from_log(f64::NEG_INFINITY);
    }
    let s = ln_widths_plus_one(arch.widths());
    LogValue::from_log(
        n.ln()
            + (n + 1.0).ln()
            + (n + 1.0) * std::f64::consts::LN_2
            + (2f64.powf(n + 1.0) + 1.0) * s,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(widths: Vec<usize>, params: &[f64]) -> ReQUNetwork {
        ReQUNetwork::from_params(Architecture::new(widths).unwrap(), None, params).unwrap()
    }

    #[test]
    fn affine_and_square_examples() {
        assert_eq!(net(vec![1, 1], &[0.5]).forward(&[0.4]).unwrap(), vec![0.2]);
        assert_eq!(
            net(vec![1, 1, 1], &[1.0, 0.0, 1.0])
                .forward(&[0.5])
                .unwrap(),
            vec![0.25]
        );
        let two = net(vec![1, 2, 1], &[1.0, -1.0, 0.0, 0.0, 1.0, 1.0]);
        assert!((two.forward(&[0.3]).unwrap()[0] - 0.09).abs() < 1e-15);
    }

    #[test]
    fn param_layout_is_layer_by_layer() {
        // W_0 (2x1), v_1 (2), W_1 (1x2)
        let n = net(vec![1, 2, 1], &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        assert_eq!(n.weight(0), &[0.1, 0.2]);
        assert_eq!(n.shift(1), &[0.3, 0.4]);
        assert_eq!(n.weight(1), &[0.5, 0.6]);
    }

    #[test]
    fn out_of_range_rejected() {
        let arch = Architecture::new(vec![1, 1]).unwrap();
        assert!(matches!(
            ReQUNetwork::from_params(arch, None, &[1.5]),
            Err(Error::OutOfRange { index: 0, .. })
        ));
    }

    #[test]
    fn shift_is_subtracted() {
        // σ(x − v) with v = 0.5 at x = 0.3 is zero, at x = 0.9 is 0.16
        let n = net(vec![1, 1, 1], &[1.0, 0.5, 1.0]);
        assert_eq!(n.forward(&[0.3]).unwrap()[0], 0.0);
        assert!((n.forward(&[0.9]).unwrap()[0] - 0.16).abs() < 1e-15);
    }

    #[test]
    fn closed_form_coefficients() {
        let a = Architecture::new(vec![1, 1, 1]).unwrap();
        let b = perturbation_bounds(&a);
        assert!((b.sup_coeff.value - 64.0).abs() < 1e-9);
        assert!((b.jac_coeff.value - 8192.0).abs() < 1e-6);
        let lin = perturbation_bounds(&Architecture::new(vec![2, 3]).unwrap());
        assert_eq!(lin.jac_coeff.value, 0.0);
        assert!((lin.sup_coeff.value - 3.0).abs() < 1e-12);
        assert!((class_lipschitz_constant(&a).value - 256.0).abs() < 1e-9);
    }

    #[test]
    fn huge_coefficients_saturate() {
        let a = Architecture::new(vec![3; 14]).unwrap();
        let b = perturbation_bounds(&a);
        assert!(b.sup_coeff.saturated && b.sup_coeff.log.is_finite());
    }

    #[test]
    fn hidden_bound_examples() {
        let a = Architecture::new(vec![1, 1, 1]).unwrap();
        let b = hidden_bounds(&a, BoundKind::HiddenSup { k: 1, i: 1 }, 1.0).unwrap();
        assert!((b.value - 4.0).abs() < 1e-12);
        let half = hidden_bounds(&a, BoundKind::HiddenSup { k: 1, i: 1 }, 0.5).unwrap();
        assert_eq!(half.value, b.value);
        assert!(hidden_bounds(&a, BoundKind::HiddenSup { k: 2, i: 1 }, 1.0).is_err());
    }

    #[test]
    fn workspace_passes_match_allocating_ones() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = ReQUNetwork::random(Architecture::new(vec![2, 3, 4, 2]).unwrap(), 1.0, &mut rng);
        let x = [0.3, 0.8];
        let up = [0.7, -1.1];
        let mut ws = n.workspace();
        assert_eq!(n.forward_ws(&x, &mut ws), n.forward(&x).unwrap().as_slice());
        let mut g = vec![0.0; n.arch().param_count()];
        let gx = n.backward_ws(&mut ws, &up, &mut g).to_vec();
        let (pg, xg) = n.backward(&n.trace(&x).unwrap(), &up).unwrap();
        assert_eq!(g, pg);
        assert_eq!(gx, xg);
    }

    #[test]
    fn sparsity_projection_keeps_largest() {
        let mut v = vec![0.1, -0.9, 0.5, 0.0, -0.5];
        project_sparsity(&mut v, 2);
        assert_eq!(v, vec![0.0, -0.9, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn kinks_are_located_in_both_layers() {
        // z = x − 0.3 and x − 0.7 in layer one; layer two sees σ(x−0.3) − 0.01,
        // which crosses zero at x = 0.4
        let n = net(vec![1, 2, 1, 1], &[1.0, 1.0, 0.3, 0.7, 1.0, 0.0, 0.01, 1.0]);
        let k = kinks_1d(&n, 64).unwrap();
        assert_eq!(k.len(), 3, "{k:?}");
        for (got, want) in k.iter().zip([0.3, 0.4, 0.7]) {
            assert!((got - want).abs() < 1e-12, "{k:?}");
        }
    }
}
