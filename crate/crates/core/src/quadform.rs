//! Complex quadratic forms on phase space: evaluation, Hamilton maps,
//! singular spaces, ellipticity along the singular space, and the k0 index.
//!
//! Conventions. Phase-space coordinates are ordered (x_1..x_n, ξ_1..ξ_n) and
//! the symplectic form is σ((x,ξ),(y,η)) = ξ·y − x·η, so its matrix is
//! J = [[0, I], [-I, 0]] and the Hamilton map of q(X) = ½⟨AX, X⟩ is F = ½ J A.

use ndarray::{concatenate, s, Array2, Axis};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, RMat};

/// Relative singular-value threshold used for kernel extraction when the
/// caller does not supply one.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// |q| above this value on the unit sphere of S counts as nonvanishing.
pub const ELLIPTICITY_THRESHOLD: f64 = 1e-8;

/// A complex-valued quadratic form q(X) = ½⟨AX, X⟩ on R^{2n}, stored by its
/// symmetric coefficient matrix A (coordinates (x, ξ)).
#[derive(Debug, Clone)]
pub struct QuadraticSymbol {
    n: usize,
    a: CMat,
}

impl QuadraticSymbol {
    /// Build from a coefficient matrix. The stored matrix is symmetrized from
    /// the upper triangle, so the symmetry invariant holds by construction;
    /// inputs further than 1e-10 from symmetric are rejected.
    pub fn new(n: usize, a: CMat) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("phase-space half-dimension must be >= 1".into()));
        }
        if a.nrows() != 2 * n || a.ncols() != 2 * n {
            return Err(Error::DimensionMismatch(format!(
                "coefficient matrix must be {0}x{0}, got {1}x{2}",
                2 * n,
                a.nrows(),
                a.ncols()
            )));
        }
        let asym = linalg::max_abs(&(&a - &a.t()));
        let scale = linalg::max_abs(&a).max(1.0);
        if asym > 1e-10 * scale {
            return Err(Error::Validation(format!(
                "coefficient matrix is not symmetric (asymmetry {asym:e})"
            )));
        }
        let mut sym = a.clone();
        for i in 0..2 * n {
            for j in 0..i {
                sym[[i, j]] = a[[j, i]];
            }
        }
        Ok(QuadraticSymbol { n, a: sym })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coefficients(&self) -> &CMat {
        &self.a
    }

    /// Schrödinger symbol |ξ|² + ½⟨V''(0)x, x⟩ for a complex symmetric V''(0).
    pub fn schrodinger(vpp: &CMat) -> Result<Self> {
        let n = vpp.nrows();
        if vpp.ncols() != n || n == 0 {
            return Err(Error::DimensionMismatch("V''(0) must be square and nonempty".into()));
        }
        let mut a = Array2::zeros((2 * n, 2 * n));
        a.slice_mut(s![..n, ..n]).assign(vpp);
        for i in 0..n {
            a[[n + i, n + i]] = C64::new(2.0, 0.0);
        }
        QuadraticSymbol::new(n, a)
    }

    /// The normal form q(z, ζ) = Mz·ζ as a quadratic symbol on C^{2n}:
    /// A = [[0, M^T], [M, 0]].
    pub fn normal_form(m: &CMat) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n || n == 0 {
            return Err(Error::DimensionMismatch("M must be square and nonempty".into()));
        }
        let mut a = Array2::zeros((2 * n, 2 * n));
        a.slice_mut(s![..n, n..]).assign(&m.t());
        a.slice_mut(s![n.., ..n]).assign(m);
        QuadraticSymbol::new(n, a)
    }

    /// Symmetric bilinear polarization q(X, Y) = ½⟨AX, Y⟩.
    pub fn polarized(&self, x: &CVec, y: &CVec) -> Result<C64> {
        if x.len() != 2 * self.n || y.len() != 2 * self.n {
            return Err(Error::DimensionMismatch(format!(
                "vectors must have length {}",
                2 * self.n
            )));
        }
        Ok(0.5 * self.a.dot(x).dot(y))
    }
}

/// Evaluate q(X) = ½⟨AX, X⟩ (bilinear extension, no conjugation).
pub fn eval_quadratic(q: &QuadraticSymbol, x: &CVec) -> Result<C64> {
    q.polarized(x, x)
}

/// The Hamilton map F of q, with σ(X, FY) = q(X, Y), plus cached real and
/// imaginary parts and the spectrum of F.
#[derive(Debug, Clone)]
pub struct HamiltonMap {
    pub f: CMat,
    pub re_f: RMat,
    pub im_f: RMat,
    pub eigenvalues: CVec,
}

impl HamiltonMap {
    pub fn half_dim(&self) -> usize {
        self.f.nrows() / 2
    }
}

/// Compute the Hamilton map F = ½ J A and verify σ(X, FY) = q(X, Y) on the
/// standard basis to 1e-12 (relative).
pub fn hamilton_map(q: &QuadraticSymbol) -> Result<HamiltonMap> {
    let n = q.n;
    let j = linalg::symplectic_j_c(n);
    let f = j.dot(q.coefficients()).mapv(|z| 0.5 * z);

    let scale = linalg::max_abs(&f).max(1.0);
    let dim = 2 * n;
    for i in 0..dim {
        for k in 0..dim {
            let ei = basis_vec(dim, i);
            let ek = basis_vec(dim, k);
            let lhs = linalg::sigma(&ei, &f.dot(&ek));
            let rhs = q.polarized(&ei, &ek)?;
            if (lhs - rhs).norm() > 1e-12 * scale {
                return Err(Error::Linalg(format!(
                    "Hamilton map self-check failed at basis pair ({i},{k}): {:e}",
                    (lhs - rhs).norm()
                )));
            }
        }
    }

    let (eigenvalues, _) = linalg::eig(&f)?;
    Ok(HamiltonMap {
        re_f: linalg::re_mat(&f),
        im_f: linalg::im_mat(&f),
        eigenvalues,
        f,
    })
}

fn basis_vec(dim: usize, i: usize) -> CVec {
    let mut e = ndarray::Array1::zeros(dim);
    e[i] = C64::new(1.0, 0.0);
    e
}

/// The singular space S = ⋂_{j=0}^{2n-1} ker[(Re F)(Im F)^j] ∩ R^{2n}.
#[derive(Debug, Clone)]
pub struct SingularSpaceResult {
    /// Orthonormal real basis of S (2n × d).
    pub basis: RMat,
    pub d: usize,
    /// dim ⋂_{j<=k} ker[(Re F)(Im F)^j] for k = 0..2n-1.
    pub per_step_dims: Vec<usize>,
    pub rank_tolerance: f64,
}

/// Kernel-chain blocks (Re F)(Im F)^j for j = 0..2n-1, each normalized to
/// unit max-entry so a single relative SVD threshold treats them equally.
/// Blocks that vanish identically impose no constraint and are skipped.
fn kernel_chain_blocks(f: &HamiltonMap) -> Vec<RMat> {
    let dim = f.re_f.nrows();
    let mut blocks = Vec::new();
    let mut power = Array2::eye(dim);
    for _ in 0..dim {
        let blk: RMat = f.re_f.dot(&power);
        let norm = linalg::max_abs_real(&blk);
        if norm > 0.0 {
            blocks.push(blk.mapv(|x| x / norm));
        } else {
            blocks.push(Array2::zeros((dim, dim)));
        }
        power = f.im_f.dot(&power);
    }
    blocks
}

fn stacked_kernel(blocks: &[RMat], rank_tol: f64) -> Result<RMat> {
    let dim = blocks[0].ncols();
    let nonzero: Vec<&RMat> = blocks
        .iter()
        .filter(|b| linalg::max_abs_real(b) > 0.0)
        .collect();
    if nonzero.is_empty() {
        return Ok(Array2::eye(dim));
    }
    let views: Vec<_> = nonzero.iter().map(|b| b.view()).collect();
    let stack = concatenate(Axis(0), &views)
        .map_err(|e| Error::Linalg(format!("stacking kernel blocks failed: {e}")))?;
    linalg::kernel_basis_real(&stack, rank_tol)
}

pub fn singular_space(f: &HamiltonMap, rank_tolerance: f64) -> Result<SingularSpaceResult> {
    if rank_tolerance <= 0.0 {
        return Err(Error::Validation("rank_tolerance must be positive".into()));
    }
    let dim = f.re_f.nrows();
    let blocks = kernel_chain_blocks(f);
    let mut per_step_dims = Vec::with_capacity(dim);
    let mut basis = Array2::eye(dim);
    for k in 0..dim {
        basis = stacked_kernel(&blocks[..=k], rank_tolerance)?;
        per_step_dims.push(basis.ncols());
    }
    Ok(SingularSpaceResult {
        d: basis.ncols(),
        basis,
        per_step_dims,
        rank_tolerance,
    })
}

/// Smallest k0 with ⋂_{j=0}^{k0} ker[(Re F)(Im F)^j] ∩ R^{2n} = {0}.
/// Errors when the full intersection (the singular space) is nonzero.
pub fn k0_index(f: &HamiltonMap, rank_tolerance: f64) -> Result<usize> {
    let result = singular_space(f, rank_tolerance)?;
    if result.d > 0 {
        return Err(Error::NontrivialSingularSpace { dim: result.d });
    }
    for (k, &dim_k) in result.per_step_dims.iter().enumerate() {
        if dim_k == 0 {
            return Ok(k);
        }
    }
    unreachable!("final per-step dimension equals d = 0");
}

#[derive(Debug, Clone, Serialize)]
pub struct EllipticityReport {
    pub elliptic_on_s: bool,
    /// Unit vector in S with |q| at most the threshold; present iff not elliptic.
    pub witness: Option<Vec<f64>>,
    /// Smallest |q| found on the unit sphere of S (+∞ when S = {0}).
    pub min_abs_q_on_sphere: f64,
}

/// Minimize |q| over the unit sphere of S. Uses the exact eigenvalue ranges
/// when the restricted form is purely real or purely imaginary, and seeded
/// multistart projected-gradient refinement otherwise.
pub fn is_elliptic_on_singular_space(
    q: &QuadraticSymbol,
    s: &SingularSpaceResult,
    samples: usize,
) -> Result<EllipticityReport> {
    if s.d == 0 {
        return Ok(EllipticityReport {
            elliptic_on_s: true,
            witness: None,
            min_abs_q_on_sphere: f64::INFINITY,
        });
    }
    if samples == 0 {
        return Err(Error::Validation("samples must be positive".into()));
    }
    let b = linalg::cmat_from_real(&s.basis);
    let restricted = b.t().dot(q.coefficients()).dot(&b).mapv(|z| 0.5 * z);
    let r = linalg::re_mat(&restricted);
    let im = linalg::im_mat(&restricted);
    let r = 0.5 * (&r + &r.t());
    let im = 0.5 * (&im + &im.t());

    let (min_abs, argmin) = min_abs_on_sphere(&r, &im, samples)?;
    let elliptic = min_abs > ELLIPTICITY_THRESHOLD;
    let witness = if elliptic {
        None
    } else {
        let w = s.basis.dot(&argmin);
        Some(w.to_vec())
    };
    Ok(EllipticityReport {
        elliptic_on_s: elliptic,
        witness,
        min_abs_q_on_sphere: min_abs,
    })
}

/// Minimize |c^T R c + i c^T I c| over real unit vectors c.
fn min_abs_on_sphere(r: &RMat, im: &RMat, samples: usize) -> Result<(f64, ndarray::Array1<f64>)> {
    let d = r.nrows();
    let scale = linalg::max_abs_real(r).max(linalg::max_abs_real(im));
    if scale == 0.0 {
        return Ok((0.0, first_unit(d)));
    }
    let r_zero = linalg::max_abs_real(r) <= 1e-14 * scale;
    let i_zero = linalg::max_abs_real(im) <= 1e-14 * scale;
    if r_zero || i_zero {
        let m = if r_zero { im } else { r };
        let (eigs, vecs) = linalg::eigh_real(m)?;
        let lo = eigs[0];
        let hi = eigs[d - 1];
        if lo <= 0.0 && hi >= 0.0 {
            // the range of c^T M c on the sphere straddles 0; build a crossing vector
            let vlo = vecs.column(0).to_owned();
            let vhi = vecs.column(d - 1).to_owned();
            let witness = if lo == 0.0 {
                vlo
            } else if hi == 0.0 {
                vhi
            } else {
                let t2 = -lo / hi;
                let t = t2.sqrt().atan();
                t.cos() * &vlo + t.sin() * &vhi
            };
            return Ok((0.0, witness));
        }
        let (val, idx) = if lo > 0.0 { (lo, 0) } else { (hi.abs(), d - 1) };
        return Ok((val, vecs.column(idx).to_owned()));
    }

    // mixed case: deterministic multistart + projected gradient descent
    let mut rng = linalg::samples::rng(0xD0B1_ECAA);
    let mut starts: Vec<ndarray::Array1<f64>> = Vec::new();
    let (_, vr) = linalg::eigh_real(r)?;
    let (_, vi) = linalg::eigh_real(im)?;
    for k in 0..d {
        starts.push(vr.column(k).to_owned());
        starts.push(vi.column(k).to_owned());
    }
    for _ in 0..samples {
        let v = linalg::samples::real_vector(&mut rng, d);
        let norm = v.dot(&v).sqrt();
        if norm > 1e-12 {
            starts.push(v / norm);
        }
    }

    let objective = |c: &ndarray::Array1<f64>| -> f64 {
        let qr = c.dot(&r.dot(c));
        let qi = c.dot(&im.dot(c));
        qr * qr + qi * qi
    };
    let mut best_val = f64::INFINITY;
    let mut best_c = first_unit(d);
    for c0 in starts {
        let mut cvec = c0;
        let mut val = objective(&cvec);
        let mut step = 0.5;
        for _ in 0..200 {
            let qr = cvec.dot(&r.dot(&cvec));
            let qi = cvec.dot(&im.dot(&cvec));
            let grad = 4.0 * (qr * r.dot(&cvec) + qi * im.dot(&cvec));
            // project onto the tangent space of the sphere
            let radial = grad.dot(&cvec);
            let tangent = &grad - &(radial * &cvec);
            let tnorm = tangent.dot(&tangent).sqrt();
            if tnorm < 1e-15 {
                break;
            }
            let mut advanced = false;
            while step > 1e-12 {
                let trial = &cvec - &(step * &tangent);
                let tn = trial.dot(&trial).sqrt();
                let trial = trial / tn;
                let tv = objective(&trial);
                if tv < val {
                    cvec = trial;
                    val = tv;
                    step *= 1.5;
                    advanced = true;
                    break;
                }
                step *= 0.5;
            }
            if !advanced {
                break;
            }
        }
        if val < best_val {
            best_val = val;
            best_c = cvec;
        }
    }
    Ok((best_val.sqrt(), best_c))
}

fn first_unit(d: usize) -> ndarray::Array1<f64> {
    let mut e = ndarray::Array1::zeros(d);
    e[0] = 1.0;
    e
}

/// True iff Re A is positive semidefinite (min eigenvalue >= -1e-10 relative).
pub fn real_part_nonneg(q: &QuadraticSymbol) -> Result<bool> {
    let ra = linalg::re_mat(q.coefficients());
    let ra = 0.5 * (&ra + &ra.t());
    let (eigs, _) = linalg::eigh_real(&ra)?;
    let scale = linalg::max_abs_real(&ra).max(1.0);
    Ok(eigs[0] >= -1e-10 * scale)
}

/// JSON schema { "n": int, "A_re": [[..]], "A_im": [[..]] }.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadraticSymbolJson {
    pub n: usize,
    #[serde(rename = "A_re")]
    pub a_re: Vec<Vec<f64>>,
    #[serde(rename = "A_im")]
    pub a_im: Vec<Vec<f64>>,
}

impl QuadraticSymbol {
    pub fn to_json(&self) -> QuadraticSymbolJson {
        let dim = 2 * self.n;
        let mut a_re = vec![vec![0.0; dim]; dim];
        let mut a_im = vec![vec![0.0; dim]; dim];
        for i in 0..dim {
            for j in 0..dim {
                a_re[i][j] = self.a[[i, j]].re;
                a_im[i][j] = self.a[[i, j]].im;
            }
        }
        QuadraticSymbolJson { n: self.n, a_re, a_im }
    }

    pub fn from_json(json: &QuadraticSymbolJson) -> Result<Self> {
        let dim = 2 * json.n;
        if json.a_re.len() != dim || json.a_im.len() != dim {
            return Err(Error::Validation("A_re/A_im must have 2n rows".into()));
        }
        let mut a = Array2::zeros((dim, dim));
        for i in 0..dim {
            if json.a_re[i].len() != dim || json.a_im[i].len() != dim {
                return Err(Error::Validation("A_re/A_im must have 2n columns".into()));
            }
            for j in 0..dim {
                a[[i, j]] = C64::new(json.a_re[i][j], json.a_im[i][j]);
            }
        }
        QuadraticSymbol::new(json.n, a)
    }
}
