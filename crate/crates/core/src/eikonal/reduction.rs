//! Reduction of a quadratic symbol to the FBI-side normal form 𝔮(z,ζ) = Mz·ζ.
//!
//! Two pure cases are automated: trivial singular space (the adapted phase
//! built from the stable subspaces of F) and purely imaginary symbols of the
//! shape iε Σ λ_j(x_j² + ξ_j²) (the standard phase). A user-supplied real
//! symplectic splitting that separates a general symbol into those two blocks
//! is verified and then reduced blockwise.

use ndarray::{s, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat};
use crate::quadform::{self, hamilton_map, HamiltonMap, QuadraticSymbol};
use crate::symplectic::{
    adapted_kappa, kappa_from_phase, phase_from_kappa, stable_subspaces, standard_phase,
    weight_from_phase, CanonicalMap, FBIPhase, WeightForm,
};

/// A symbol together with the canonical data putting it in normal form.
#[derive(Debug, Clone)]
pub struct FbiReduction {
    pub kappa: CanonicalMap,
    pub phase: FBIPhase,
    /// Weight Φ₀ of the phase; Λ_{Φ₀} = κ(R^{2n}).
    pub weight: WeightForm,
    /// 𝔮(z,ζ) = Mz·ζ.
    pub m: CMat,
    /// The transported symbol 𝔮 = q ∘ κ⁻¹.
    pub q_fbi: QuadraticSymbol,
    pub f_fbi: HamiltonMap,
    /// λ_j values when the purely imaginary block is present.
    pub lambdas: Vec<f64>,
    pub epsilon: Option<i8>,
}

/// Transport a quadratic symbol through a complex canonical map:
/// (q ∘ κ⁻¹)(Z) = ½⟨(K⁻ᵀ A K⁻¹) Z, Z⟩.
pub fn transform_symbol(q: &QuadraticSymbol, kappa: &CanonicalMap) -> Result<QuadraticSymbol> {
    let kinv = linalg::inv(&kappa.k)?;
    let a_fbi = kinv.t().dot(q.coefficients()).dot(&kinv);
    QuadraticSymbol::new(q.n(), a_fbi)
}

/// Detect the shape q = iε Σ λ_j (x_j² + ξ_j²), i.e. A = 2iε diag(λ; λ).
pub fn purely_imaginary_shape(q: &QuadraticSymbol, tol: f64) -> Option<(Vec<f64>, i8)> {
    let n = q.n();
    let a = q.coefficients();
    let scale = linalg::max_abs(a).max(f64::MIN_POSITIVE);
    let re = linalg::re_mat(a);
    if linalg::max_abs_real(&re) > tol * scale {
        return None;
    }
    let im = linalg::im_mat(a);
    for i in 0..2 * n {
        for j in 0..2 * n {
            if i != j && im[[i, j]].abs() > tol * scale {
                return None;
            }
        }
    }
    let eps = if im[[0, 0]] > 0.0 { 1i8 } else { -1i8 };
    let mut lambdas = Vec::with_capacity(n);
    for i in 0..n {
        let dx = im[[i, i]];
        let dxi = im[[n + i, n + i]];
        if (dx - dxi).abs() > tol * scale {
            return None;
        }
        let lam = 0.5 * dx * eps as f64;
        if lam <= tol * scale {
            return None;
        }
        lambdas.push(lam);
    }
    Some((lambdas, eps))
}

fn reduce_trivial_singular_space(q: &QuadraticSymbol) -> Result<FbiReduction> {
    let f = hamilton_map(q)?;
    let stable = stable_subspaces(&f)?;
    let kappa = adapted_kappa(&stable.plus, &stable.minus)?;
    let phase = phase_from_kappa(&kappa)?;
    let weight = weight_from_phase(&phase)?;
    finish_reduction(q, kappa, phase, weight, Vec::new(), None)
}

fn reduce_purely_imaginary(
    q: &QuadraticSymbol,
    lambdas: Vec<f64>,
    epsilon: i8,
) -> Result<FbiReduction> {
    let n = q.n();
    let phase = standard_phase(n);
    let kappa = kappa_from_phase(&phase)?;
    let weight = weight_from_phase(&phase)?;
    finish_reduction(q, kappa, phase, weight, lambdas, Some(epsilon))
}

fn finish_reduction(
    q: &QuadraticSymbol,
    kappa: CanonicalMap,
    phase: FBIPhase,
    weight: WeightForm,
    lambdas: Vec<f64>,
    epsilon: Option<i8>,
) -> Result<FbiReduction> {
    let n = q.n();
    let q_fbi = transform_symbol(q, &kappa)?;
    let f_fbi = hamilton_map(&q_fbi)?;
    // F_fbi must be block-diagonal ½ diag(M, −Mᵀ) for the normal form
    let scale = linalg::max_abs(&f_fbi.f).max(1.0);
    let off1 = linalg::max_abs(&f_fbi.f.slice(s![..n, n..]).to_owned());
    let off2 = linalg::max_abs(&f_fbi.f.slice(s![n.., ..n]).to_owned());
    if off1 > 1e-8 * scale || off2 > 1e-8 * scale {
        return Err(Error::Linalg(format!(
            "transported Hamilton map is not block-diagonal (off-blocks {off1:e}, {off2:e})"
        )));
    }
    let m = f_fbi.f.slice(s![..n, ..n]).to_owned().mapv(|z| 2.0 * z);
    let lower = f_fbi.f.slice(s![n.., n..]).to_owned().mapv(|z| -2.0 * z);
    if linalg::max_abs(&(&m - &lower.t())) > 1e-8 * scale {
        return Err(Error::Linalg(
            "transported Hamilton map is not of normal form".into(),
        ));
    }
    if let Some(eps) = epsilon {
        // the purely imaginary block must come out as M = −2ε diag(λ)
        for (j, &lam) in lambdas.iter().enumerate() {
            let expected = C64::new(-2.0 * eps as f64 * lam, 0.0);
            let col = m.ncols() - lambdas.len() + j;
            if (m[[col, col]] - expected).norm() > 1e-8 * scale {
                return Err(Error::Linalg(format!(
                    "normal form mismatch in the purely imaginary block at j = {j}"
                )));
            }
        }
    }
    Ok(FbiReduction {
        kappa,
        phase,
        weight,
        m,
        q_fbi,
        f_fbi,
        lambdas,
        epsilon,
    })
}

/// Reduce a symbol in one of the two pure cases: trivial singular space, or
/// purely imaginary of the shape iε Σ λ_j(x_j² + ξ_j²).
pub fn fbi_normal_form(q: &QuadraticSymbol, rank_tol: f64) -> Result<FbiReduction> {
    let f = hamilton_map(q)?;
    let sing = quadform::singular_space(&f, rank_tol)?;
    if sing.d == 0 {
        return reduce_trivial_singular_space(q);
    }
    if let Some((lambdas, epsilon)) = purely_imaginary_shape(q, 1e-10) {
        return reduce_purely_imaginary(q, lambdas, epsilon);
    }
    Err(Error::UnsupportedReduction(format!(
        "singular space has dimension {} and the symbol is not of the purely imaginary normal shape; supply a symplectic splitting",
        sing.d
    )))
}

/// Report of a verified user-supplied symplectic splitting
/// q ∘ κ_R⁻¹ = q₁(x',ξ') ⊕ q₂(x'',ξ'') with q₁ trivial-S and q₂ of the
/// purely imaginary shape.
#[derive(Debug, Clone)]
pub struct SplitReport {
    pub n1: usize,
    pub q1: Option<QuadraticSymbol>,
    pub lambdas: Vec<f64>,
    pub epsilon: Option<i8>,
    /// max cross-block coefficient between the two groups.
    pub cross_residual: f64,
}

fn real_canonical_check(kappa_r: &RMat, n: usize, tol: f64) -> Result<()> {
    if kappa_r.nrows() != 2 * n || kappa_r.ncols() != 2 * n {
        return Err(Error::DimensionMismatch("κ_R must be 2n x 2n".into()));
    }
    let j = linalg::symplectic_j(n);
    let resid = kappa_r.t().dot(&j).dot(kappa_r) - &j;
    let r = linalg::max_abs_real(&resid);
    if r > tol {
        return Err(Error::Validation(format!(
            "κ_R is not a real canonical transformation (residual {r:e})"
        )));
    }
    Ok(())
}

/// Group the coordinates of C^{2n} as (x', ξ') = indices (0..n1, n..n+n1)
/// and (x'', ξ'') = the rest, and extract the sub-blocks of A.
fn group_indices(n: usize, n1: usize) -> (Vec<usize>, Vec<usize>) {
    let mut g1 = Vec::new();
    let mut g2 = Vec::new();
    for i in 0..n {
        if i < n1 {
            g1.push(i);
        } else {
            g2.push(i);
        }
    }
    for i in 0..n {
        if i < n1 {
            g1.push(n + i);
        } else {
            g2.push(n + i);
        }
    }
    (g1, g2)
}

fn extract_block(a: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| a[[rows[i], cols[j]]])
}

/// Verify that κ_R symplectically splits q into a trivial-S block of half
/// dimension n1 and a purely imaginary λ-shape block.
pub fn verify_split(
    q: &QuadraticSymbol,
    kappa_r: &RMat,
    n1: usize,
    rank_tol: f64,
) -> Result<SplitReport> {
    let n = q.n();
    if n1 > n {
        return Err(Error::Validation("n1 must be at most n".into()));
    }
    real_canonical_check(kappa_r, n, 1e-8)?;
    let kappa = CanonicalMap::new(linalg::cmat_from_real(kappa_r))?;
    let q_split = transform_symbol(q, &kappa)?;
    let a = q_split.coefficients();
    let scale = linalg::max_abs(a).max(f64::MIN_POSITIVE);
    let (g1, g2) = group_indices(n, n1);
    let cross = if g1.is_empty() || g2.is_empty() {
        0.0
    } else {
        linalg::max_abs(&extract_block(a, &g1, &g2))
    };
    if cross > 1e-8 * scale {
        return Err(Error::Validation(format!(
            "splitting leaves cross terms of size {cross:e} between the blocks"
        )));
    }
    let q1 = if n1 > 0 {
        let a1 = extract_block(a, &g1, &g1);
        let q1 = QuadraticSymbol::new(n1, a1)?;
        let f1 = hamilton_map(&q1)?;
        let s1 = quadform::singular_space(&f1, rank_tol)?;
        if s1.d != 0 {
            return Err(Error::Validation(format!(
                "q1 block has nontrivial singular space (dimension {})",
                s1.d
            )));
        }
        Some(q1)
    } else {
        None
    };
    let (lambdas, epsilon) = if n1 < n {
        let a2 = extract_block(a, &g2, &g2);
        let q2 = QuadraticSymbol::new(n - n1, a2)?;
        let Some((l, e)) = purely_imaginary_shape(&q2, 1e-8) else {
            return Err(Error::Validation(
                "q2 block is not of the purely imaginary shape iε Σ λ_j(x_j²+ξ_j²)".into(),
            ));
        };
        (l, Some(e))
    } else {
        (Vec::new(), None)
    };
    Ok(SplitReport {
        n1,
        q1,
        lambdas,
        epsilon,
        cross_residual: cross,
    })
}

/// Full reduction through a verified user-supplied splitting:
/// κ = (κ_{φ1} × κ_{φ2}) ∘ κ_R.
pub fn fbi_normal_form_split(
    q: &QuadraticSymbol,
    kappa_r: &RMat,
    n1: usize,
    rank_tol: f64,
) -> Result<FbiReduction> {
    let n = q.n();
    let report = verify_split(q, kappa_r, n1, rank_tol)?;
    if n1 == 0 || n1 == n {
        // a pure case in disguise: reduce the transported symbol directly
        let kappa_rc = CanonicalMap::new(linalg::cmat_from_real(kappa_r))?;
        let q_split = transform_symbol(q, &kappa_rc)?;
        let red = fbi_normal_form(&q_split, rank_tol)?;
        let kappa_total = CanonicalMap::new(red.kappa.k.dot(&kappa_rc.k))?;
        let phase = phase_from_kappa(&kappa_total)?;
        let weight = weight_from_phase(&phase)?;
        return finish_reduction(q, kappa_total, phase, weight, red.lambdas, red.epsilon);
    }
    let q1 = report.q1.as_ref().expect("n1 > 0");
    let red1 = reduce_trivial_singular_space(q1)?;
    let n2 = n - n1;
    let phase2 = standard_phase(n2);
    let k2 = kappa_from_phase(&phase2)?;
    let k_block = CanonicalMap::block_combine(&red1.kappa, &k2);
    let kappa_rc = CanonicalMap::new(linalg::cmat_from_real(kappa_r))?;
    let kappa_total = CanonicalMap::new(k_block.k.dot(&kappa_rc.k))?;
    let phase = phase_from_kappa(&kappa_total)?;
    let weight = weight_from_phase(&phase)?;
    finish_reduction(q, kappa_total, phase, weight, report.lambdas, report.epsilon)
}
