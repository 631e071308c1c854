//! Small dense linear algebra kit.
//!
//! Vectors are plain `Vec<f64>` / `&[f64]`; matrices are row-major [`Mat`].
//! Randomness flows through [`RngStream`], a cloneable value type keyed by
//! `(seed, stream_id)` so that every trial of an experiment owns an
//! independent, reproducible stream.

use std::ops::{Index, IndexMut};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const DEFAULT_POWER_TOL: f64 = 1e-10;
pub const DEFAULT_POWER_MAX_ITER: usize = 10_000;
pub const DEFAULT_ASCENT_STEPS: usize = 200;
const ASCENT_INITIAL_STEP: f64 = 0.1;
const ASCENT_MIN_STEP: f64 = 1e-12;

/// SplitMix64 finalizer. A bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a list of words into one stream identifier.
pub fn mix_words(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &w| mix64(acc ^ mix64(w)))
}

/// Deterministic random stream.
///
/// Backed by the ChaCha8 block function, which is counter based: the key is
/// derived from `seed`, the stream word from `stream_id`, and draws advance a
/// block counter. Normals come from `rand_distr`'s ziggurat sampler.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(mix64(seed));
        inner.set_stream(mix64(stream_id ^ 0xD1B5_4A32_D192_ED03));
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream under the same seed, keyed by this stream's id and `tag`.
    /// Independent of how far `self` has advanced.
    pub fn derive(&self, tag: u64) -> RngStream {
        RngStream::new(self.seed, mix_words(&[self.stream_id, tag]))
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// `dim` i.i.d. standard normal draws.
pub fn gaussian_vector(rng: &mut RngStream, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::InvalidDimension("gaussian vector of length 0".into()));
    }
    Ok((0..dim).map(|_| rng.standard_normal()).collect())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Unit vector along `x`, or `None` for the zero vector.
pub fn normalized(x: &[f64]) -> Option<Vec<f64>> {
    let n = norm(x);
    if n == 0.0 || !n.is_finite() {
        None
    } else {
        Some(scale(1.0 / n, x))
    }
}

pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Flip `v` so that its largest-magnitude entry is positive.
fn canonical_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::InvalidDimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if !all_finite(&data) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidDimension("ragged rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    /// `scale * u vᵀ`
    pub fn outer(scale: f64, u: &[f64], v: &[f64]) -> Self {
        let mut data = Vec::with_capacity(u.len() * v.len());
        for &a in u {
            data.extend(v.iter().map(|&b| scale * a * b));
        }
        Self {
            rows: u.len(),
            cols: v.len(),
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "mul_vec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "tr_mul_vec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            axpy(xi, self.row(i), &mut out);
        }
        out
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a != 0.0 {
                    axpy(a, other.row(k), out_row);
                }
            }
        }
        out
    }

    /// `selfᵀ self`
    pub fn gram(&self) -> Mat {
        let mut g = Mat::zeros(self.cols, self.cols);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..self.cols {
                let ra = r[a];
                if ra == 0.0 {
                    continue;
                }
                let g_row = &mut g.data[a * self.cols..(a + 1) * self.cols];
                for b in a..self.cols {
                    g_row[b] += ra * r[b];
                }
            }
        }
        for a in 0..self.cols {
            for b in 0..a {
                g.data[a * self.cols + b] = g.data[b * self.cols + a];
            }
        }
        g
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Symmetric up to `1e-10 * max|m|`.
    pub fn is_symmetric(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        let tol = 1e-10 * self.max_abs();
        for i in 0..self.rows {
            for j in 0..i {
                if (self[(i, j)] - self[(j, i)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Sub-matrix on the given columns (all rows kept).
    pub fn select_columns(&self, cols: &[usize]) -> Mat {
        let mut out = Mat::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            let src = self.row(i);
            let dst = out.row_mut(i);
            for (d, &c) in dst.iter_mut().zip(cols) {
                *d = src[c];
            }
        }
        out
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: sub(&self.data, &other.data),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: scale(alpha, &self.data),
        }
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenpair of largest magnitude of a symmetric matrix by plain power
/// iteration (no shift).
///
/// Stops once `‖m v − λ v‖ ≤ tol · max(1, |λ|)` with `λ` the Rayleigh
/// quotient. When the two extreme eigenvalues have equal magnitude and
/// opposite sign the Rayleigh quotient oscillates and the call ends in
/// [`Error::NonConvergence`]. The returned vector has its largest entry
/// positive.
pub fn power_iteration_magnitude(
    m: &Mat,
    tol: f64,
    max_iter: usize,
    rng: &mut RngStream,
) -> Result<(f64, Vec<f64>)> {
    if !m.is_square() || m.rows() == 0 {
        return Err(Error::InvalidInput(format!(
            "power iteration needs a non-empty square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_symmetric() {
        return Err(Error::InvalidInput("matrix is not symmetric".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let start = gaussian_vector(rng, m.rows())?;
    power_iterate(|v| m.mul_vec(v), start, &[], tol, max_iter)
}

/// Power iteration on an implicit symmetric operator, restricted to the
/// orthogonal complement of `deflate` (orthonormal vectors).
fn power_iterate(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    start: Vec<f64>,
    deflate: &[Vec<f64>],
    tol: f64,
    max_iter: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut v = start;
    project_out(&mut v, deflate);
    let mut v = normalized(&v).ok_or(Error::UndefinedDirection)?;
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..=max_iter {
        let mut w = apply(&v);
        project_out(&mut w, deflate);
        lambda = dot(&v, &w);
        residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - lambda * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= tol * lambda.abs().max(1.0) {
            canonical_sign(&mut v);
            return Ok((lambda, v));
        }
        match normalized(&w) {
            Some(next) => v = next,
            None => break,
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
        eigenvalue: lambda,
        eigenvector: v,
    })
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        axpy(-c, b, v);
    }
}

/// Truncated SVD by deflated power iteration on the smaller Gram matrix.
#[derive(Clone, Debug)]
pub struct PartialSvd {
    /// Non-increasing.
    pub singular_values: Vec<f64>,
    /// `rows × rank`, orthonormal columns.
    pub left: Mat,
    /// `cols × rank`, orthonormal columns.
    pub right: Mat,
}

impl PartialSvd {
    /// `Σ σᵢ uᵢ vᵢᵀ` over the first `k` components, with optional weights
    /// replacing the singular values.
    pub fn reconstruct_weighted(&self, weights: &[f64]) -> Mat {
        let mut out = Mat::zeros(self.left.rows(), self.right.rows());
        for (k, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let u = self.left.column(k);
            let v = self.right.column(k);
            for (i, &ui) in u.iter().enumerate() {
                axpy(w * ui, &v, out.row_mut(i));
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Mat {
        self.reconstruct_weighted(&self.singular_values)
    }
}

pub fn deflated_svd(
    m: &Mat,
    rank: usize,
    tol: f64,
    max_iter: usize,
    rng: &mut RngStream,
) -> Result<PartialSvd> {
    if rank > m.rows().min(m.cols()) {
        return Err(Error::InvalidDimension(format!(
            "rank {rank} exceeds min({}, {})",
            m.rows(),
            m.cols()
        )));
    }
    if m.rows() < m.cols() {
        let t = deflated_svd(&m.transpose(), rank, tol, max_iter, rng)?;
        return Ok(PartialSvd {
            singular_values: t.singular_values,
            left: t.right,
            right: t.left,
        });
    }

    let gram = m.gram();
    let mut rights: Vec<Vec<f64>> = Vec::with_capacity(rank);
    let mut lefts: Vec<Vec<f64>> = Vec::with_capacity(rank);
    let mut sigmas = Vec::with_capacity(rank);
    for k in 0..rank {
        let start = gaussian_vector(rng, m.cols())?;
        let (lambda, v) = power_iterate(|x| gram.mul_vec(x), start, &rights, tol, max_iter)
            .map_err(|_| Error::SvdNonConvergence { component: k })?;
        let sigma = lambda.max(0.0).sqrt();
        let mut u = if sigma > 0.0 {
            scale(1.0 / sigma, &m.mul_vec(&v))
        } else {
            gaussian_vector(rng, m.rows())?
        };
        project_out(&mut u, &lefts);
        let u = normalized(&u).ok_or(Error::SvdNonConvergence { component: k })?;
        sigmas.push(sigma);
        rights.push(v);
        lefts.push(u);
    }

    let mut order: Vec<usize> = (0..rank).collect();
    order.sort_by(|&a, &b| sigmas[b].total_cmp(&sigmas[a]));
    let mut left = Mat::zeros(m.rows(), rank);
    let mut right = Mat::zeros(m.cols(), rank);
    let mut singular_values = Vec::with_capacity(rank);
    for (dst, &src) in order.iter().enumerate() {
        left.set_column(dst, &lefts[src]);
        right.set_column(dst, &rights[src]);
        singular_values.push(sigmas[src]);
    }
    Ok(PartialSvd {
        singular_values,
        left,
        right,
    })
}

/// Spectral norm `‖m‖₂` via power iteration on `mᵀm`.
///
/// If the iteration stalls the Rayleigh quotient of the last iterate is used,
/// which is still a lower bound on the norm.
pub fn spectral_norm(m: &Mat, tol: f64, max_iter: usize, rng: &mut RngStream) -> Result<f64> {
    let g = m.gram();
    match power_iteration_magnitude(&g, tol, max_iter, rng) {
        Ok((lambda, _)) => Ok(lambda.max(0.0).sqrt()),
        Err(Error::NonConvergence { eigenvalue, .. }) => Ok(eigenvalue.max(0.0).sqrt()),
        Err(e) => Err(e),
    }
}

/// `(Σᵢ |aᵢᵀx|^q)^{1/q}`
pub fn q_norm_of_image(m: &Mat, x: &[f64], q: f64) -> f64 {
    (0..m.rows())
        .map(|i| dot(m.row(i), x).abs().powf(q))
        .sum::<f64>()
        .powf(1.0 / q)
}

/// Certified lower bound on the induced norm `‖m‖_{2→q}`.
///
/// Starts from every coordinate axis and then from `probes` random
/// directions drawn sequentially from `rng`; each start is refined by
/// projected gradient ascent on the sphere (step 0.1, halved whenever a step
/// fails to improve). The value returned is attained at an explicit unit
/// vector, so it never exceeds the true norm.
pub fn opnorm_2q_lower(
    m: &Mat,
    q: f64,
    probes: usize,
    ascent_steps: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if probes == 0 {
        return Err(Error::InvalidInput("probes must be at least 1".into()));
    }
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::InvalidDimension("empty matrix".into()));
    }
    if !(q >= 2.0) {
        return Err(Error::InvalidInput(format!("q = {q} must be at least 2")));
    }
    let dim = m.cols();
    let mut best = 0.0f64;
    for j in 0..dim {
        let mut axis = vec![0.0; dim];
        axis[j] = 1.0;
        best = best.max(ascend_q_norm(m, q, axis, ascent_steps));
    }
    for _ in 0..probes {
        let start = gaussian_vector(rng, dim)?;
        let start = normalized(&start).ok_or(Error::UndefinedDirection)?;
        best = best.max(ascend_q_norm(m, q, start, ascent_steps));
    }
    Ok(best)
}

fn ascend_q_norm(m: &Mat, q: f64, mut x: Vec<f64>, steps: usize) -> f64 {
    let mut value = q_norm_of_image(m, &x, q);
    let mut step = ASCENT_INITIAL_STEP;
    for _ in 0..steps {
        let mut grad = vec![0.0; x.len()];
        for i in 0..m.rows() {
            let t = dot(m.row(i), &x);
            let w = t.abs().powf(q - 2.0) * t;
            axpy(w, m.row(i), &mut grad);
        }
        let radial = dot(&grad, &x);
        axpy(-radial, &x, &mut grad);
        let Some(direction) = normalized(&grad) else {
            break;
        };
        let mut candidate = x.clone();
        axpy(step, &direction, &mut candidate);
        let Some(candidate) = normalized(&candidate) else {
            break;
        };
        let candidate_value = q_norm_of_image(m, &candidate, q);
        if candidate_value > value {
            x = candidate;
            value = candidate_value;
        } else {
            step *= 0.5;
            if step < ASCENT_MIN_STEP {
                break;
            }
        }
    }
    value
}
