//! Spectral calculus for the transversal oscillator `H_z = -Δ_z/2 + |z|²/2 - d/2`.
//!
//! The eigenfunctions are the normalized Hermite functions, with integer
//! eigenvalues `|k| = k_1 + ... + k_d`. Two Gauss-Hermite node sets are kept:
//!
//! * the *transform* rule (nodes of `e^{-z²}`) on which the Gram matrix of the
//!   truncated basis is exact, used by [`to_coefficients`] / [`to_node_values`];
//! * the *product* rule (nodes of `e^{-2z²}`), exact for projections of products
//!   of four basis functions, used by the cubic nonlinearity and the quartic
//!   overlap tensor.

use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest truncation for which the full quartic tensor is stored.
pub const DENSE_QUARTIC_LIMIT: usize = 48;

/// Evaluates `h_0(z), ..., h_{out.len()-1}(z)` with the normalized three-term recurrence.
pub fn hermite_functions(z: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * z * z).exp();
    if out.len() > 1 {
        out[1] = 2f64.sqrt() * z * out[0];
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = z * (2.0 / (kf + 1.0)).sqrt() * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

/// Single Hermite function `h_k(z)`.
pub fn hermite_function(k: usize, z: f64) -> f64 {
    let mut buf = vec![0.0; k + 1];
    hermite_functions(z, &mut buf);
    buf[k]
}

/// Gauss-Hermite rule for the weight `e^{-z²}`.
///
/// Returns ascending nodes together with the *function* weights
/// `W_j = w_j e^{z_j²}`, so that `Σ_j W_j f(z_j) ≈ ∫ f(z) dz`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one node");
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    let mut h = vec![0.0; n + 1];
    for z in nodes.iter_mut() {
        // Newton polish on h_n, using h_n' = sqrt(2n) h_{n-1} - z h_n.
        for _ in 0..8 {
            hermite_functions(*z, &mut h);
            let deriv = (2.0 * n as f64).sqrt() * h[n - 1] - *z * h[n];
            let step = h[n] / deriv;
            *z -= step;
            if step.abs() <= 1e-16 * z.abs().max(1.0) {
                break;
            }
        }
    }
    // enforce exact symmetry
    for j in 0..n / 2 {
        let m = 0.5 * (nodes[n - 1 - j] - nodes[j]);
        nodes[j] = -m;
        nodes[n - 1 - j] = m;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let weights = nodes
        .iter()
        .map(|&z| {
            hermite_functions(z, &mut h[..n]);
            1.0 / h[..n].iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    (nodes, weights)
}

/// Quartic overlaps `γ[p,q,r,m] = ∫ h_p h_q h_r h_m dz` for `d = 1`.
#[derive(Debug)]
pub struct QuarticOverlap {
    n: usize,
    dense: Option<Vec<f64>>,
    /// Shell `p` holds `γ[p, q, r, p + r - q]` at `[r * n + q]`, zero when out of range.
    shells: Vec<OnceLock<Vec<f64>>>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl QuarticOverlap {
    fn new(n: usize, product_values: &[f64], product_weights: &[f64]) -> Self {
        let mut q = QuarticOverlap {
            n,
            dense: None,
            shells: (0..n).map(|_| OnceLock::new()).collect(),
            values: product_values.to_vec(),
            weights: product_weights.to_vec(),
        };
        if n <= DENSE_QUARTIC_LIMIT {
            q.dense = Some(q.build_dense());
        }
        q
    }

    fn quadrature(&self, p: usize, q: usize, r: usize, m: usize) -> f64 {
        if (p + q + r + m) % 2 == 1 {
            return 0.0;
        }
        let n = self.n;
        self.weights
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let row = &self.values[j * n..(j + 1) * n];
                w * row[p] * row[q] * row[r] * row[m]
            })
            .sum()
    }

    fn build_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut dense = vec![0.0; n * n * n * n];
        for p in 0..n {
            for q in p..n {
                for r in q..n {
                    for m in r..n {
                        let g = self.quadrature(p, q, r, m);
                        if g == 0.0 {
                            continue;
                        }
                        for [a, b, c, e] in permutations([p, q, r, m]) {
                            dense[((a * n + b) * n + c) * n + e] = g;
                        }
                    }
                }
            }
        }
        dense
    }

    /// Truncation size.
    pub fn num_modes(&self) -> usize {
        self.n
    }

    /// Whether the full tensor is materialized.
    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    pub fn get(&self, p: usize, q: usize, r: usize, m: usize) -> f64 {
        let n = self.n;
        match &self.dense {
            Some(d) => d[((p * n + q) * n + r) * n + m],
            None => self.quadrature(p, q, r, m),
        }
    }

    /// Resonant shell for first index `p`, built on first use.
    pub fn shell(&self, p: usize) -> &[f64] {
        self.shells[p].get_or_init(|| {
            let n = self.n;
            let mut s = vec![0.0; n * n];
            for r in 0..n {
                for q in 0..n {
                    let m = (p + r) as isize - q as isize;
                    if (0..n as isize).contains(&m) {
                        s[r * n + q] = self.get(p, q, r, m as usize);
                    }
                }
            }
            s
        })
    }
}

fn permutations(v: [usize; 4]) -> impl Iterator<Item = [usize; 4]> {
    const P: [[usize; 4]; 24] = [
        [0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3], [0, 2, 3, 1], [0, 3, 1, 2], [0, 3, 2, 1],
        [1, 0, 2, 3], [1, 0, 3, 2], [1, 2, 0, 3], [1, 2, 3, 0], [1, 3, 0, 2], [1, 3, 2, 0],
        [2, 0, 1, 3], [2, 0, 3, 1], [2, 1, 0, 3], [2, 1, 3, 0], [2, 3, 0, 1], [2, 3, 1, 0],
        [3, 0, 1, 2], [3, 0, 2, 1], [3, 1, 0, 2], [3, 1, 2, 0], [3, 2, 0, 1], [3, 2, 1, 0],
    ];
    P.into_iter().map(move |p| [v[p[0]], v[p[1]], v[p[2]], v[p[3]]])
}

/// One node set: values `h_k(z_j)` (row `j`) and the projection matrix
/// `W_j h_k(z_j)` (row `k`).
#[derive(Debug, Clone)]
struct NodeRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    eval: Vec<f64>,
    project: Vec<f64>,
}

impl NodeRule {
    fn new(nodes: Vec<f64>, weights: Vec<f64>, num_modes: usize) -> Self {
        let nq = nodes.len();
        let mut eval = vec![0.0; nq * num_modes];
        for (j, &z) in nodes.iter().enumerate() {
            hermite_functions(z, &mut eval[j * num_modes..(j + 1) * num_modes]);
        }
        let mut project = vec![0.0; num_modes * nq];
        for k in 0..num_modes {
            for j in 0..nq {
                project[k * nq + j] = weights[j] * eval[j * num_modes + k];
            }
        }
        NodeRule { nodes, weights, eval, project }
    }
}

/// Truncated Hermite eigenbasis of `H_z` with quadrature data.
#[derive(Debug)]
pub struct HermiteBasis {
    dim_d: usize,
    num_modes: usize,
    transform: NodeRule,
    product: NodeRule,
    levels: Vec<u32>,
    quartic: Option<QuarticOverlap>,
}

/// Builds the basis for `dim_d ∈ {1, 2}` with `num_modes` modes per axis.
pub fn build_basis(dim_d: usize, num_modes: usize, num_quad: usize) -> Result<HermiteBasis> {
    HermiteBasis::new(dim_d, num_modes, num_quad)
}

impl HermiteBasis {
    pub fn new(dim_d: usize, num_modes: usize, num_quad: usize) -> Result<Self> {
        if !(1..=2).contains(&dim_d) {
            return Err(Error::InvalidDimension(dim_d));
        }
        if num_modes == 0 {
            return Err(Error::InvalidGrid("num_modes must be positive".into()));
        }
        let need = 2 * num_modes + 1;
        if num_quad < need {
            return Err(Error::InsufficientQuadrature { need, got: num_quad });
        }
        let (nodes, weights) = gauss_hermite(num_quad);
        let product_nodes: Vec<f64> = nodes.iter().map(|s| s / 2f64.sqrt()).collect();
        let product_weights: Vec<f64> = weights.iter().map(|w| w / 2f64.sqrt()).collect();
        let transform = NodeRule::new(nodes, weights, num_modes);
        let product = NodeRule::new(product_nodes, product_weights, num_modes);

        let levels = (0..num_modes.pow(dim_d as u32))
            .map(|idx| multi_index(idx, num_modes, dim_d).iter().sum::<usize>() as u32)
            .collect();
        let quartic = (dim_d == 1).then(|| QuarticOverlap::new(num_modes, &product.eval, &product.weights));
        Ok(HermiteBasis { dim_d, num_modes, transform, product, levels, quartic })
    }

    pub fn dim_d(&self) -> usize {
        self.dim_d
    }

    /// Modes per axis.
    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    /// Quadrature nodes per axis.
    pub fn num_quad(&self) -> usize {
        self.transform.nodes.len()
    }

    /// Number of coefficients per column, `num_modes^d`.
    pub fn num_coefficients(&self) -> usize {
        self.levels.len()
    }

    /// Number of node values per column, `num_quad^d`.
    pub fn num_node_values(&self) -> usize {
        self.num_quad().pow(self.dim_d as u32)
    }

    /// Transform-rule nodes along one axis.
    pub fn nodes(&self) -> &[f64] {
        &self.transform.nodes
    }

    /// Transform-rule function weights along one axis.
    pub fn weights(&self) -> &[f64] {
        &self.transform.weights
    }

    /// `basis_values[j * num_modes + k] = h_k(z_j)` on the transform nodes.
    pub fn basis_values(&self) -> &[f64] {
        &self.transform.eval
    }

    pub fn product_nodes(&self) -> &[f64] {
        &self.product.nodes
    }

    pub fn product_weights(&self) -> &[f64] {
        &self.product.weights
    }

    /// Eigenvalue `|k|` for each flattened multi-index.
    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    /// Largest eigenvalue present in the truncation.
    pub fn max_level(&self) -> u32 {
        (self.dim_d * (self.num_modes - 1)) as u32
    }

    /// Quartic overlap tensor (only for `d = 1`).
    pub fn quartic(&self) -> Option<&QuarticOverlap> {
        self.quartic.as_ref()
    }

    /// Multi-index of a flattened coefficient index (row-major over axes).
    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        multi_index(idx, self.num_modes, self.dim_d)
    }

    /// Multiplies coefficient `k` by `e^{-iθ|k|}` in place.
    pub fn propagate_in_place(&self, theta: f64, coeffs: &mut [Complex64]) {
        let th = theta.rem_euclid(TAU);
        let mut phases = Vec::with_capacity(self.max_level() as usize + 1);
        for l in 0..=self.max_level() {
            phases.push(Complex64::from_polar(1.0, -(th * l as f64).rem_euclid(TAU)));
        }
        for (c, &l) in coeffs.iter_mut().zip(&self.levels) {
            *c *= phases[l as usize];
        }
    }

    pub(crate) fn eval_transform(&self, coeffs: &[Complex64], out: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        apply_tensor(&self.transform.eval, self.num_quad(), self.num_modes, self.dim_d, coeffs, out, scratch);
    }

    pub(crate) fn project_transform(&self, values: &[Complex64], out: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        apply_tensor(&self.transform.project, self.num_modes, self.num_quad(), self.dim_d, values, out, scratch);
    }

    /// Evaluates coefficients on the product nodes.
    pub(crate) fn eval_product(&self, coeffs: &[Complex64], out: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        apply_tensor(&self.product.eval, self.num_quad(), self.num_modes, self.dim_d, coeffs, out, scratch);
    }

    /// Projects product-node values onto the basis; exact for quartic products.
    pub(crate) fn project_product(&self, values: &[Complex64], out: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        apply_tensor(&self.product.project, self.num_modes, self.num_quad(), self.dim_d, values, out, scratch);
    }

    fn check_len(&self, got: usize, expected: usize) -> Result<()> {
        if got != expected {
            return Err(Error::LengthMismatch { expected, got });
        }
        Ok(())
    }
}

fn multi_index(mut idx: usize, n: usize, d: usize) -> Vec<usize> {
    let mut k = vec![0; d];
    for a in (0..d).rev() {
        k[a] = idx % n;
        idx /= n;
    }
    k
}

/// Applies the `rows × cols` matrix along every axis of a `cols^dim` tensor.
fn apply_tensor(
    mat: &[f64],
    rows: usize,
    cols: usize,
    dim: usize,
    input: &[Complex64],
    out: &mut [Complex64],
    scratch: &mut Vec<Complex64>,
) {
    match dim {
        1 => {
            for (r, o) in out.iter_mut().enumerate() {
                let row = &mat[r * cols..(r + 1) * cols];
                let (mut re, mut im) = (0.0, 0.0);
                for (m, c) in row.iter().zip(input) {
                    re += m * c.re;
                    im += m * c.im;
                }
                *o = Complex64::new(re, im);
            }
        }
        2 => {
            // tmp[r1, c2] = Σ_{c1} M[r1, c1] in[c1, c2]
            scratch.clear();
            scratch.resize(rows * cols, Complex64::new(0.0, 0.0));
            for r1 in 0..rows {
                let row = &mat[r1 * cols..(r1 + 1) * cols];
                let t = &mut scratch[r1 * cols..(r1 + 1) * cols];
                for (c1, m) in row.iter().enumerate() {
                    if *m == 0.0 {
                        continue;
                    }
                    for (tv, iv) in t.iter_mut().zip(&input[c1 * cols..(c1 + 1) * cols]) {
                        *tv += iv * m;
                    }
                }
            }
            // out[r1, r2] = Σ_{c2} M[r2, c2] tmp[r1, c2]
            for r1 in 0..rows {
                let t = &scratch[r1 * cols..(r1 + 1) * cols];
                for r2 in 0..rows {
                    let row = &mat[r2 * cols..(r2 + 1) * cols];
                    let (mut re, mut im) = (0.0, 0.0);
                    for (m, c) in row.iter().zip(t) {
                        re += m * c.re;
                        im += m * c.im;
                    }
                    out[r1 * rows + r2] = Complex64::new(re, im);
                }
            }
        }
        _ => unreachable!("dimension validated at construction"),
    }
}

/// Hermite coefficients from values on the transform nodes.
pub fn to_coefficients(node_values: &[Complex64], basis: &HermiteBasis) -> Result<Vec<Complex64>> {
    basis.check_len(node_values.len(), basis.num_node_values())?;
    let mut out = vec![Complex64::new(0.0, 0.0); basis.num_coefficients()];
    basis.project_transform(node_values, &mut out, &mut Vec::new());
    Ok(out)
}

/// Values on the transform nodes from Hermite coefficients.
pub fn to_node_values(coeffs: &[Complex64], basis: &HermiteBasis) -> Result<Vec<Complex64>> {
    basis.check_len(coeffs.len(), basis.num_coefficients())?;
    let mut out = vec![Complex64::new(0.0, 0.0); basis.num_node_values()];
    basis.eval_transform(coeffs, &mut out, &mut Vec::new());
    Ok(out)
}

/// Weighted L² norm of node values under the transform rule.
pub fn node_norm(node_values: &[Complex64], basis: &HermiteBasis) -> Result<f64> {
    basis.check_len(node_values.len(), basis.num_node_values())?;
    let nq = basis.num_quad();
    let w = basis.weights();
    let sum: f64 = node_values
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let wt: f64 = multi_index(idx, nq, basis.dim_d()).iter().map(|&j| w[j]).product();
            wt * v.norm_sqr()
        })
        .sum();
    Ok(sum.sqrt())
}

/// Applies `e^{-iθ H_z}`.
pub fn propagate(theta: f64, coeffs: &[Complex64], basis: &HermiteBasis) -> Result<Vec<Complex64>> {
    basis.check_len(coeffs.len(), basis.num_coefficients())?;
    if !theta.is_finite() {
        return Err(Error::InvalidParams(format!("non-finite propagation angle {theta}")));
    }
    let mut out = coeffs.to_vec();
    basis.propagate_in_place(theta, &mut out);
    Ok(out)
}

/// Diagonal weights `(1 + |k|)^{m/2}` of `Λ_z^m`.
pub fn lambda_weights(m: i32, basis: &HermiteBasis) -> Result<Vec<f64>> {
    if m < 0 {
        return Err(Error::NegativeOrder(m));
    }
    let e = m as f64 / 2.0;
    Ok(basis.levels().iter().map(|&l| (1.0 + l as f64).powf(e)).collect())
}
