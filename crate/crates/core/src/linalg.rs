//! Shared dense linear algebra on top of `ndarray` / LAPACK: complex matrix
//! exponentials, rank-revealing kernels and ranges, subspace distances, and
//! real-linear (z, z̄) maps on C^n.

use ndarray::{concatenate, s, Array1, Array2, Axis};
use ndarray_linalg::{Eig, Eigh, SVD, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = Array2<C64>;
pub type CVec = Array1<C64>;
pub type RMat = Array2<f64>;
pub type RVec = Array1<f64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cmat_from_real(m: &RMat) -> CMat {
    m.mapv(|x| C64::new(x, 0.0))
}

pub fn re_mat(m: &CMat) -> RMat {
    m.mapv(|z| z.re)
}

pub fn im_mat(m: &CMat) -> RMat {
    m.mapv(|z| z.im)
}

pub fn conj_mat(m: &CMat) -> CMat {
    m.mapv(|z| z.conj())
}

pub fn adjoint(m: &CMat) -> CMat {
    conj_mat(m).t().to_owned()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_real(m: &RMat) -> f64 {
    m.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub fn ceye(n: usize) -> CMat {
    Array2::eye(n).mapv(|x: f64| C64::new(x, 0.0))
}

/// Matrix of the standard symplectic form, σ(X, Y) = (JX)·Y with the
/// coordinate order (x_1..x_n, ξ_1..ξ_n): J = [[0, I], [-I, 0]].
pub fn symplectic_j(n: usize) -> RMat {
    let mut j = Array2::zeros((2 * n, 2 * n));
    for i in 0..n {
        j[[i, n + i]] = 1.0;
        j[[n + i, i]] = -1.0;
    }
    j
}

pub fn symplectic_j_c(n: usize) -> CMat {
    cmat_from_real(&symplectic_j(n))
}

/// σ((x,ξ),(y,η)) = ξ·y − x·η, extended bilinearly to C^{2n}.
pub fn sigma(x: &CVec, y: &CVec) -> C64 {
    let n = x.len() / 2;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        acc += x[n + i] * y[i] - x[i] * y[n + i];
    }
    acc
}

/// One-norm (max column sum of moduli).
pub fn one_norm(a: &CMat) -> f64 {
    let mut best = 0.0f64;
    for col in a.columns() {
        let s: f64 = col.iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

/// Complex matrix exponential by Padé(13) with scaling and squaring.
pub fn expm(a: &CMat) -> CMat {
    const THETA13: f64 = 5.371920351148152;
    let norm = one_norm(a);
    if norm == 0.0 {
        return ceye(a.nrows());
    }
    let scale_pow = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a1 = a.mapv(|z| z / C64::new(2f64.powi(scale_pow), 0.0));
    let mut e = pade13(&a1);
    for _ in 0..scale_pow {
        e = e.dot(&e);
    }
    e
}

fn pade13(a: &CMat) -> CMat {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let n = a.nrows();
    let id = ceye(n);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let w1 = a6.mapv(|z| z * B[13]) + a4.mapv(|z| z * B[11]) + a2.mapv(|z| z * B[9]);
    let w = a6.dot(&w1)
        + a6.mapv(|z| z * B[7])
        + a4.mapv(|z| z * B[5])
        + a2.mapv(|z| z * B[3])
        + id.mapv(|z| z * B[1]);
    let u = a.dot(&w);
    let z1 = a6.mapv(|z| z * B[12]) + a4.mapv(|z| z * B[10]) + a2.mapv(|z| z * B[8]);
    let v = a6.dot(&z1)
        + a6.mapv(|z| z * B[6])
        + a4.mapv(|z| z * B[4])
        + a2.mapv(|z| z * B[2])
        + id.mapv(|z| z * B[0]);
    let vm_u = &v - &u;
    let vp_u = &v + &u;
    solve_matrix(&vm_u, &vp_u).expect("pade13: denominator singular")
}

/// Solve A X = B for X.
pub fn solve_matrix(a: &CMat, b: &CMat) -> Result<CMat> {
    let ainv = inv(a)?;
    Ok(ainv.dot(b))
}

pub fn inv(a: &CMat) -> Result<CMat> {
    use ndarray_linalg::Inverse;
    a.inv()
        .map_err(|e| Error::Linalg(format!("matrix inverse failed: {e}")))
}

/// Eigen-decomposition of a general complex matrix.
pub fn eig(a: &CMat) -> Result<(CVec, CMat)> {
    a.eig()
        .map_err(|e| Error::Linalg(format!("eigendecomposition failed: {e}")))
}

/// Eigenvalues/vectors of a real symmetric matrix, ascending.
pub fn eigh_real(a: &RMat) -> Result<(RVec, RMat)> {
    a.eigh(UPLO::Lower)
        .map_err(|e| Error::Linalg(format!("symmetric eigendecomposition failed: {e}")))
}

/// Eigenvalues/vectors of a Hermitian complex matrix, ascending.
pub fn eigh_complex(a: &CMat) -> Result<(RVec, CMat)> {
    a.eigh(UPLO::Lower)
        .map_err(|e| Error::Linalg(format!("Hermitian eigendecomposition failed: {e}")))
}

/// Orthonormal basis of the (right) null space of a real matrix, using SVD
/// with a relative singular-value threshold.
pub fn kernel_basis_real(m: &RMat, rel_tol: f64) -> Result<RMat> {
    let cols = m.ncols();
    let (_, sv, vt) = m
        .svd(false, true)
        .map_err(|e| Error::Linalg(format!("SVD failed: {e}")))?;
    let vt = vt.expect("requested V^T");
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let thresh = rel_tol * smax.max(f64::MIN_POSITIVE);
    let mut keep: Vec<usize> = Vec::new();
    for j in 0..cols {
        let s = if j < sv.len() { sv[j] } else { 0.0 };
        if s <= thresh {
            keep.push(j);
        }
    }
    let mut basis = Array2::zeros((cols, keep.len()));
    for (outc, &j) in keep.iter().enumerate() {
        basis.slice_mut(s![.., outc]).assign(&vt.slice(s![j, ..]));
    }
    Ok(basis)
}

/// Orthonormal basis of the range of a complex matrix (left singular vectors
/// with singular value above a relative threshold).
pub fn orthonormal_range(m: &CMat, rel_tol: f64) -> Result<CMat> {
    let (u, sv, _) = m
        .svd(true, false)
        .map_err(|e| Error::Linalg(format!("SVD failed: {e}")))?;
    let u = u.expect("requested U");
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let thresh = rel_tol * smax.max(f64::MIN_POSITIVE);
    let keep: Vec<usize> = (0..sv.len()).filter(|&j| sv[j] > thresh).collect();
    let mut basis = Array2::zeros((m.nrows(), keep.len()));
    for (outc, &j) in keep.iter().enumerate() {
        basis.slice_mut(s![.., outc]).assign(&u.slice(s![.., j]));
    }
    Ok(basis)
}

/// Spectral-norm distance between the orthogonal projectors onto the column
/// spans of `a` and `b`; ~0 for equal spans, 1 for spans differing in some
/// direction. Dimensions may differ.
pub fn subspace_distance(a: &RMat, b: &RMat) -> Result<f64> {
    let qa = orthonormal_cols_real(a)?;
    let qb = orthonormal_cols_real(b)?;
    let pa = qa.dot(&qa.t());
    let pb = qb.dot(&qb.t());
    let d = &pa - &pb;
    let (_, sv, _) = d
        .svd(false, false)
        .map_err(|e| Error::Linalg(format!("SVD failed: {e}")))?;
    Ok(sv.iter().cloned().fold(0.0f64, f64::max))
}

pub fn orthonormal_cols_real(a: &RMat) -> Result<RMat> {
    if a.ncols() == 0 {
        return Ok(a.clone());
    }
    let (u, sv, _) = a
        .svd(true, false)
        .map_err(|e| Error::Linalg(format!("SVD failed: {e}")))?;
    let u = u.expect("requested U");
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let thresh = 1e-12 * smax.max(f64::MIN_POSITIVE);
    let keep: Vec<usize> = (0..sv.len()).filter(|&j| sv[j] > thresh).collect();
    let mut basis = Array2::zeros((a.nrows(), keep.len()));
    for (outc, &j) in keep.iter().enumerate() {
        basis.slice_mut(s![.., outc]).assign(&u.slice(s![.., j]));
    }
    Ok(basis)
}

/// Condition number (σ_max/σ_min) of a real matrix; +∞ when rank-deficient.
pub fn condition_real(m: &RMat) -> Result<f64> {
    let (_, sv, _) = m
        .svd(false, false)
        .map_err(|e| Error::Linalg(format!("SVD failed: {e}")))?;
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin <= 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(smax / smin)
    }
}

/// A real-linear map C^n -> C^m, z ↦ P z + Q z̄.
#[derive(Debug, Clone)]
pub struct RealLinearMap {
    pub p: CMat,
    pub q: CMat,
}

impl RealLinearMap {
    pub fn new(p: CMat, q: CMat) -> Self {
        assert_eq!(p.dim(), q.dim());
        RealLinearMap { p, q }
    }

    pub fn identity(n: usize) -> Self {
        RealLinearMap {
            p: ceye(n),
            q: Array2::zeros((n, n)),
        }
    }

    pub fn apply(&self, z: &CVec) -> CVec {
        let zc = z.mapv(|w| w.conj());
        self.p.dot(z) + self.q.dot(&zc)
    }

    /// self ∘ other.
    pub fn compose(&self, other: &RealLinearMap) -> RealLinearMap {
        let p = self.p.dot(&other.p) + self.q.dot(&conj_mat(&other.q));
        let q = self.p.dot(&other.q) + self.q.dot(&conj_mat(&other.p));
        RealLinearMap { p, q }
    }

    /// Matrix on (Re z, Im z) coordinates.
    pub fn to_real(&self) -> RMat {
        let (pr, pi) = (re_mat(&self.p), im_mat(&self.p));
        let (qr, qi) = (re_mat(&self.q), im_mat(&self.q));
        let top = concatenate![Axis(1), &pr + &qr, &qi - &pi];
        let bot = concatenate![Axis(1), &pi + &qi, &pr - &qr];
        concatenate![Axis(0), top, bot]
    }

    pub fn from_real(m: &RMat) -> RealLinearMap {
        let n2 = m.nrows();
        assert_eq!(n2 % 2, 0);
        assert_eq!(m.ncols(), n2);
        let n = n2 / 2;
        let m11 = m.slice(s![..n, ..n]).to_owned();
        let m12 = m.slice(s![..n, n..]).to_owned();
        let m21 = m.slice(s![n.., ..n]).to_owned();
        let m22 = m.slice(s![n.., n..]).to_owned();
        let mut p = Array2::zeros((n, n));
        let mut q = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                p[[i, j]] = C64::new(
                    0.5 * (m11[[i, j]] + m22[[i, j]]),
                    0.5 * (m21[[i, j]] - m12[[i, j]]),
                );
                q[[i, j]] = C64::new(
                    0.5 * (m11[[i, j]] - m22[[i, j]]),
                    0.5 * (m21[[i, j]] + m12[[i, j]]),
                );
            }
        }
        RealLinearMap { p, q }
    }

    pub fn condition(&self) -> Result<f64> {
        condition_real(&self.to_real())
    }

    pub fn inverse(&self) -> Result<RealLinearMap> {
        use ndarray_linalg::Inverse;
        let m = self.to_real();
        let mi = m
            .inv()
            .map_err(|e| Error::Linalg(format!("real-linear map not invertible: {e}")))?;
        Ok(RealLinearMap::from_real(&mi))
    }
}

/// Pairwise (cascade) summation for reproducible reductions.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Seeded sample generators shared by the property suites.
pub mod samples {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn real_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> RMat {
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
    }

    pub fn real_symmetric<R: Rng>(rng: &mut R, m: usize) -> RMat {
        let a = real_matrix(rng, m, m);
        0.5 * (&a + &a.t())
    }

    pub fn complex_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
        Array2::from_shape_fn((rows, cols), |_| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    pub fn complex_symmetric<R: Rng>(rng: &mut R, m: usize) -> CMat {
        let a = complex_matrix(rng, m, m);
        let at = a.t().to_owned();
        (a + at).mapv(|z| 0.5 * z)
    }

    pub fn complex_vector<R: Rng>(rng: &mut R, m: usize) -> CVec {
        Array1::from_shape_fn(m, |_| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    pub fn real_vector<R: Rng>(rng: &mut R, m: usize) -> RVec {
        Array1::from_shape_fn(m, |_| rng.gen_range(-1.0..1.0))
    }
}
