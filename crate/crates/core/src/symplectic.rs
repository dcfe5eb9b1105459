//! Complex symplectic linear algebra: canonical maps on C^{2n}, FBI phases
//! φ(z, y), the strictly plurisubharmonic weights they induce, stable
//! subspaces of Hamilton maps, and conversions among all of these.
//!
//! An FBI phase is φ(z,y) = ½⟨Czz z, z⟩ + ⟨Czy y, z⟩ + ½⟨Cyy y, y⟩ with
//! det Czy ≠ 0 and Im Cyy > 0. Its canonical map sends
//! (y, −φ'_y(z,y)) ↦ (z, φ'_z(z,y)), and its weight is
//! Φ₀(z) = max_y (−Im φ(z,y)).

use ndarray::{s, Array1, Array2};
use ndarray_linalg::Determinant;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, RMat, RealLinearMap};
use crate::quadform::HamiltonMap;

const I: C64 = C64::new(0.0, 1.0);

/// Default relative tolerance for symplectic residuals and block solves.
pub const DEFAULT_TOL: f64 = 1e-8;

/// A complex linear map on C^{2n} in (z, ζ) coordinates.
#[derive(Debug, Clone)]
pub struct CanonicalMap {
    pub k: CMat,
}

impl CanonicalMap {
    pub fn new(k: CMat) -> Result<Self> {
        if k.nrows() != k.ncols() || k.nrows() % 2 != 0 || k.nrows() == 0 {
            return Err(Error::DimensionMismatch(
                "canonical map must be a square 2n x 2n matrix".into(),
            ));
        }
        Ok(CanonicalMap { k })
    }

    pub fn half_dim(&self) -> usize {
        self.k.nrows() / 2
    }

    pub fn block(&self, row: usize, col: usize) -> CMat {
        let n = self.half_dim();
        self.k
            .slice(s![row * n..(row + 1) * n, col * n..(col + 1) * n])
            .to_owned()
    }

    pub fn apply(&self, v: &CVec) -> CVec {
        self.k.dot(v)
    }

    pub fn inverse(&self) -> Result<CanonicalMap> {
        CanonicalMap::new(linalg::inv(&self.k)?)
    }

    /// Combine block maps acting on (z', ζ') and (z'', ζ'') into one map on
    /// the concatenated coordinates (z', z'', ζ', ζ'').
    pub fn block_combine(k1: &CanonicalMap, k2: &CanonicalMap) -> CanonicalMap {
        let n1 = k1.half_dim();
        let n2 = k2.half_dim();
        let n = n1 + n2;
        let mut k = Array2::zeros((2 * n, 2 * n));
        let put = |k: &mut CMat, src: &CMat, nk: usize, roff: usize, coff: usize| {
            for br in 0..2 {
                for bc in 0..2 {
                    for i in 0..nk {
                        for j in 0..nk {
                            let row = if br == 0 { roff + i } else { n + roff + i };
                            let col = if bc == 0 { coff + j } else { n + coff + j };
                            k[[row, col]] = src[[br * nk + i, bc * nk + j]];
                        }
                    }
                }
            }
        };
        put(&mut k, &k1.k, n1, 0, 0);
        put(&mut k, &k2.k, n2, n1, n1);
        CanonicalMap { k }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CanonicalCheck {
    pub residual: f64,
    pub pass: bool,
}

/// ‖KᵀJK − J‖_max and pass/fail at 1e-8.
pub fn is_canonical(k: &CanonicalMap) -> CanonicalCheck {
    let n = k.half_dim();
    let j = linalg::symplectic_j_c(n);
    let resid = k.k.t().dot(&j).dot(&k.k) - &j;
    let residual = linalg::max_abs(&resid);
    CanonicalCheck {
        residual,
        pass: residual < DEFAULT_TOL,
    }
}

/// FBI phase φ(z,y) = ½⟨Czz z,z⟩ + ⟨Czy y,z⟩ + ½⟨Cyy y,y⟩ with the metaplectic
/// normalization constant c_φ = 2^{-n/2} π^{-3n/4} (det Im Cyy)^{-1/4} |det Czy|.
#[derive(Debug, Clone)]
pub struct FBIPhase {
    pub czz: CMat,
    pub czy: CMat,
    pub cyy: CMat,
    pub c_phi: f64,
}

impl FBIPhase {
    pub fn new(czz: CMat, czy: CMat, cyy: CMat) -> Result<Self> {
        let n = czy.nrows();
        for (name, m) in [("Czz", &czz), ("Czy", &czy), ("Cyy", &cyy)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch(format!("{name} must be {n}x{n}")));
            }
        }
        for (name, m) in [("Czz", &czz), ("Cyy", &cyy)] {
            let asym = linalg::max_abs(&(m - &m.t()));
            if asym > 1e-10 * linalg::max_abs(m).max(1.0) {
                return Err(Error::Validation(format!("{name} must be symmetric")));
            }
        }
        let det_czy = czy
            .det()
            .map_err(|e| Error::Linalg(format!("det Czy failed: {e}")))?;
        if det_czy.norm() <= 1e-12 {
            return Err(Error::SingularBlock { det: det_czy.norm() });
        }
        let im_cyy = linalg::im_mat(&cyy);
        let im_cyy = 0.5 * (&im_cyy + &im_cyy.t());
        let (eigs, _) = linalg::eigh_real(&im_cyy)?;
        if eigs[0] <= 0.0 {
            return Err(Error::NotPositive { min_eig: eigs[0] });
        }
        let det_im_cyy: f64 = eigs.iter().product();
        let nf = n as f64;
        let c_phi = 2f64.powf(-nf / 2.0)
            * std::f64::consts::PI.powf(-3.0 * nf / 4.0)
            * det_im_cyy.powf(-0.25)
            * det_czy.norm();
        Ok(FBIPhase { czz, czy, cyy, c_phi })
    }

    pub fn n(&self) -> usize {
        self.czy.nrows()
    }

    /// φ(z, y) for complex z and real (or complex) y.
    pub fn eval(&self, z: &CVec, y: &CVec) -> C64 {
        let zz = 0.5 * self.czz.dot(z).dot(z);
        let zy = self.czy.dot(y).dot(z);
        let yy = 0.5 * self.cyy.dot(y).dot(y);
        zz + zy + yy
    }

    /// The maximizing real y*(z) of y ↦ −Im φ(z, y).
    pub fn critical_y(&self, z: &CVec) -> Result<Array1<f64>> {
        let g = linalg::im_mat(&self.cyy);
        let g = 0.5 * (&g + &g.t());
        let ell: Array1<f64> = self.czy.t().dot(z).mapv(|w| w.im);
        let ginv = real_inverse(&g)?;
        Ok(-ginv.dot(&ell))
    }
}

fn real_inverse(m: &RMat) -> Result<RMat> {
    use ndarray_linalg::Inverse;
    m.inv()
        .map_err(|e| Error::Linalg(format!("real inverse failed: {e}")))
}

/// The standard FBI phase φ(z,y) = (i/2)z² − i√2 z·y + (i/2)y² in dimension n.
pub fn standard_phase(n: usize) -> FBIPhase {
    let czz = linalg::ceye(n).mapv(|z| z * I);
    let czy = linalg::ceye(n).mapv(|z| z * (-I * 2f64.sqrt()));
    let cyy = linalg::ceye(n).mapv(|z| z * I);
    FBIPhase::new(czz, czy, cyy).expect("standard phase is a valid FBI phase")
}

/// The canonical map generated by φ: (y, −φ'_y) ↦ (z, φ'_z). Solving the
/// implicit relations gives, in (y, η) ↦ (z, ζ) block form,
///   K11 = −(Czyᵀ)⁻¹ Cyy, K12 = −(Czyᵀ)⁻¹,
///   K21 = Czy − Czz (Czyᵀ)⁻¹ Cyy, K22 = −Czz (Czyᵀ)⁻¹.
pub fn kappa_from_phase(phi: &FBIPhase) -> Result<CanonicalMap> {
    let n = phi.n();
    let czy_t = phi.czy.t().to_owned();
    let det = czy_t
        .det()
        .map_err(|e| Error::Linalg(format!("det Czyᵀ failed: {e}")))?;
    if det.norm() <= 1e-12 {
        return Err(Error::SingularBlock { det: det.norm() });
    }
    let czy_t_inv = linalg::inv(&czy_t)?;
    let k11 = -czy_t_inv.dot(&phi.cyy);
    let k12 = czy_t_inv.mapv(|z| -z);
    let k21 = &phi.czy - &phi.czz.dot(&czy_t_inv).dot(&phi.cyy);
    let k22 = -phi.czz.dot(&czy_t_inv);
    let mut k = Array2::zeros((2 * n, 2 * n));
    k.slice_mut(s![..n, ..n]).assign(&k11);
    k.slice_mut(s![..n, n..]).assign(&k12);
    k.slice_mut(s![n.., ..n]).assign(&k21);
    k.slice_mut(s![n.., n..]).assign(&k22);
    let map = CanonicalMap::new(k)?;
    let check = is_canonical(&map);
    if !check.pass {
        return Err(Error::Linalg(format!(
            "phase-generated map failed the symplectic check (residual {:e})",
            check.residual
        )));
    }
    Ok(map)
}

/// Recover the unique FBI phase generating a canonical map K ((y,η) ↦ (z,ζ)).
/// The transversality block is K12 = ∂z/∂η: the phase parametrizes the graph
/// of K by (z, y), which requires η ↦ z to be invertible at fixed y. Raises
/// `NotGenerating` when K12 is singular or the block equations are
/// inconsistent, and `NotPositive` when the recovered Im Cyy is not positive
/// definite.
pub fn phase_from_kappa(k: &CanonicalMap) -> Result<FBIPhase> {
    let n = k.half_dim();
    let k11 = k.block(0, 0);
    let k12 = k.block(0, 1);
    let k21 = k.block(1, 0);
    let k22 = k.block(1, 1);

    let det = k12
        .det()
        .map_err(|e| Error::Linalg(format!("det K12 failed: {e}")))?;
    let scale = linalg::max_abs(&k.k).max(1.0);
    if det.norm() <= 1e-12 * scale.powi(n as i32) {
        return Err(Error::NotGenerating(format!(
            "transversality block K12 is singular (|det| = {:e})",
            det.norm()
        )));
    }
    let k12_inv = linalg::inv(&k12)?;

    let cyy = k12_inv.dot(&k11);
    let czz = k22.dot(&k12_inv);
    let czy = k12_inv.t().mapv(|z| -z);

    for (name, m) in [("Cyy", &cyy), ("Czz", &czz)] {
        let asym = linalg::max_abs(&(m - &m.t()));
        if asym > DEFAULT_TOL * linalg::max_abs(m).max(1.0) {
            return Err(Error::NotGenerating(format!(
                "recovered {name} is not symmetric (asymmetry {asym:e}); K is not canonical"
            )));
        }
    }
    // generating-function consistency: K21 = Czy + K22 K12⁻¹ K11
    let k21_expected = &czy + &k22.dot(&k12_inv).dot(&k11);
    let mismatch = linalg::max_abs(&(&k21 - &k21_expected));
    if mismatch > DEFAULT_TOL * scale {
        return Err(Error::NotGenerating(format!(
            "block equations inconsistent (K21 mismatch {mismatch:e}); K is not canonical"
        )));
    }

    let cyy = symmetrize(&cyy);
    let czz = symmetrize(&czz);
    let im_cyy = linalg::im_mat(&cyy);
    let im_cyy_s = 0.5 * (&im_cyy + &im_cyy.t());
    let (eigs, _) = linalg::eigh_real(&im_cyy_s)?;
    if eigs[0] <= 0.0 {
        return Err(Error::NotPositive { min_eig: eigs[0] });
    }

    let phi = FBIPhase::new(czz, czy, cyy)?;
    let roundtrip = kappa_from_phase(&phi)?;
    let resid = linalg::max_abs(&(&roundtrip.k - &k.k));
    if resid > DEFAULT_TOL * scale {
        return Err(Error::Linalg(format!(
            "phase recovery round-trip residual {resid:e}"
        )));
    }
    Ok(phi)
}

fn symmetrize(m: &CMat) -> CMat {
    let mt = m.t().to_owned();
    (m + &mt).mapv(|z| 0.5 * z)
}

/// A real quadratic form on C^n, Φ(z) = Re(½⟨az, z⟩) + ½⟨bz, z⟩_Herm, split
/// into its pluriharmonic part a (complex symmetric) and Levi part b
/// (Hermitian); Φ is strictly plurisubharmonic iff b ≻ 0.
#[derive(Debug, Clone)]
pub struct WeightForm {
    pub a: CMat,
    pub b: CMat,
}

impl WeightForm {
    pub fn new(a: CMat, b: CMat) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || b.ncols() != n {
            return Err(Error::DimensionMismatch("a and b must be square of equal size".into()));
        }
        let asym = linalg::max_abs(&(&a - &a.t()));
        if asym > 1e-8 * linalg::max_abs(&a).max(1.0) {
            return Err(Error::Validation(format!(
                "pluriharmonic part must be symmetric (asymmetry {asym:e})"
            )));
        }
        let herm = linalg::max_abs(&(&b - &linalg::adjoint(&b)));
        if herm > 1e-8 * linalg::max_abs(&b).max(1.0) {
            return Err(Error::Validation(format!(
                "Levi part must be Hermitian (defect {herm:e})"
            )));
        }
        let at = a.t().to_owned();
        let badj = linalg::adjoint(&b);
        Ok(WeightForm {
            a: (&a + &at).mapv(|z| 0.5 * z),
            b: (&b + &badj).mapv(|z| 0.5 * z),
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Weight of the standard phase: Φ(z) = |z|²/2.
    pub fn standard(n: usize) -> WeightForm {
        WeightForm {
            a: Array2::zeros((n, n)),
            b: linalg::ceye(n),
        }
    }

    pub fn eval(&self, z: &CVec) -> f64 {
        let zc = z.mapv(|w| w.conj());
        let plh = 0.5 * self.a.dot(z).dot(z);
        let levi = 0.5 * self.b.dot(z).dot(&zc);
        plh.re + levi.re
    }

    /// ∂_z Φ(z) = ½(az + bᵀ z̄).
    pub fn d_z(&self, z: &CVec) -> CVec {
        let zc = z.mapv(|w| w.conj());
        (self.a.dot(z) + self.b.t().dot(&zc)).mapv(|w| 0.5 * w)
    }

    /// The fiber of the graph Λ_Φ over z: ζ(z) = (2/i)∂_zΦ(z) = (1/i)(az + bᵀz̄).
    pub fn fiber(&self, z: &CVec) -> CVec {
        self.d_z(z).mapv(|w| 2.0 * w / I)
    }

    /// Smallest eigenvalue of the Levi part.
    pub fn levi_min_eig(&self) -> Result<f64> {
        let (eigs, _) = linalg::eigh_complex(&self.b)?;
        Ok(eigs[0])
    }

    pub fn is_strictly_psh(&self) -> Result<bool> {
        Ok(self.levi_min_eig()? > 0.0)
    }

    /// The real symmetric matrix H on (Re z, Im z) with Φ(z) = wᵀHw, so the
    /// minimum of Φ on the unit sphere is the smallest eigenvalue of H.
    pub fn to_real_matrix(&self) -> RMat {
        let n = self.n();
        let ar = linalg::re_mat(&self.a);
        let ai = linalg::im_mat(&self.a);
        let br = linalg::re_mat(&self.b);
        let bi = linalg::im_mat(&self.b);
        let h11 = 0.5 * (&ar + &br);
        let h22 = 0.5 * (&br - &ar);
        let h12 = (-0.5) * (&ai + &bi);
        let mut h = Array2::zeros((2 * n, 2 * n));
        h.slice_mut(s![..n, ..n]).assign(&h11);
        h.slice_mut(s![..n, n..]).assign(&h12);
        h.slice_mut(s![n.., ..n]).assign(&h12.t());
        h.slice_mut(s![n.., n..]).assign(&h22);
        h
    }

    pub fn from_real_matrix(h: &RMat) -> Result<WeightForm> {
        let dim = h.nrows();
        if dim % 2 != 0 || h.ncols() != dim {
            return Err(Error::DimensionMismatch("H must be square 2n x 2n".into()));
        }
        let sym = linalg::max_abs_real(&(h - &h.t()));
        if sym > 1e-8 * linalg::max_abs_real(h).max(1.0) {
            return Err(Error::Validation("H must be symmetric".into()));
        }
        let n = dim / 2;
        let h11 = h.slice(s![..n, ..n]).to_owned();
        let h12 = h.slice(s![..n, n..]).to_owned();
        let h22 = h.slice(s![n.., n..]).to_owned();
        let ar = &h11 - &h22;
        let br = &h11 + &h22;
        let ai = -(&h12 + &h12.t());
        let bi = -(&h12 - &h12.t());
        let a = Array2::from_shape_fn((n, n), |(i, j)| C64::new(ar[[i, j]], ai[[i, j]]));
        let b = Array2::from_shape_fn((n, n), |(i, j)| C64::new(br[[i, j]], bi[[i, j]]));
        WeightForm::new(a, b)
    }

    /// Pullback by a complex-linear substitution, (Φ ∘ E)(z) = Φ(Ez):
    /// a ↦ Eᵀ a E, b ↦ Eᴴ b E.
    pub fn pullback(&self, e: &CMat) -> Result<WeightForm> {
        let a = e.t().dot(&self.a).dot(e);
        let b = linalg::adjoint(e).dot(&self.b).dot(e);
        WeightForm::new(a, b)
    }

    /// Direct sum on C^{n1} × C^{n2}.
    pub fn block_diag(w1: &WeightForm, w2: &WeightForm) -> WeightForm {
        let n1 = w1.n();
        let n2 = w2.n();
        let n = n1 + n2;
        let mut a = Array2::zeros((n, n));
        let mut b = Array2::zeros((n, n));
        a.slice_mut(s![..n1, ..n1]).assign(&w1.a);
        a.slice_mut(s![n1.., n1..]).assign(&w2.a);
        b.slice_mut(s![..n1, ..n1]).assign(&w1.b);
        b.slice_mut(s![n1.., n1..]).assign(&w2.b);
        WeightForm { a, b }
    }

    /// The graph map z ↦ (z, (1/i)(az + bᵀz̄)) as a real-linear map C^n → C^{2n}.
    pub fn graph_map(&self) -> RealLinearMap {
        let n = self.n();
        let mut p = Array2::zeros((2 * n, n));
        let mut q = Array2::zeros((2 * n, n));
        let a_over_i = self.a.mapv(|z| z / I);
        let bt_over_i = self.b.t().mapv(|z| z / I);
        for i in 0..n {
            p[[i, i]] = C64::new(1.0, 0.0);
        }
        p.slice_mut(s![n.., ..]).assign(&a_over_i);
        q.slice_mut(s![n.., ..]).assign(&bt_over_i);
        RealLinearMap::new(p, q)
    }
}

/// The phase-space image Λ_Φ of a strictly plurisubharmonic weight, together
/// with the verified I-Lagrangian / R-symplectic structure.
#[derive(Debug, Clone)]
pub struct WeightPlane {
    /// Real-linear graph map C^n → C^{2n}.
    pub graph: RealLinearMap,
    /// Images of the real basis (e_1..e_n, i·e_1..i·e_n) as columns.
    pub basis: CMat,
    /// max |Im σ| over basis pairs.
    pub i_lagrangian_residual: f64,
    /// smallest singular value of [Re σ(b_i, b_j)] (nondegeneracy of Re σ).
    pub r_symplectic_min_sv: f64,
}

/// The graph Λ_Φ = {(z, (2/i)∂_zΦ(z))} of a strictly plurisubharmonic weight;
/// checks that the image is I-Lagrangian and R-symplectic.
pub fn plane_of_weight(phi: &WeightForm) -> Result<WeightPlane> {
    let min_eig = phi.levi_min_eig()?;
    if min_eig <= 0.0 {
        return Err(Error::NotStrictlyPsh { min_eig });
    }
    let n = phi.n();
    let graph = phi.graph_map();
    let mut basis = Array2::zeros((2 * n, 2 * n));
    for j in 0..n {
        let mut e = Array1::zeros(n);
        e[j] = C64::new(1.0, 0.0);
        basis.slice_mut(s![.., j]).assign(&graph.apply(&e));
        let mut ie = Array1::zeros(n);
        ie[j] = I;
        basis.slice_mut(s![.., n + j]).assign(&graph.apply(&ie));
    }
    let mut im_res = 0.0f64;
    let mut re_gram = Array2::zeros((2 * n, 2 * n));
    for i in 0..2 * n {
        for j in 0..2 * n {
            let s = linalg::sigma(&basis.column(i).to_owned(), &basis.column(j).to_owned());
            im_res = im_res.max(s.im.abs());
            re_gram[[i, j]] = s.re;
        }
    }
    let scale = linalg::max_abs(&basis).max(1.0);
    if im_res > 1e-10 * scale * scale {
        return Err(Error::Linalg(format!(
            "graph of weight is not I-Lagrangian (residual {im_res:e})"
        )));
    }
    use ndarray_linalg::SVD;
    let (_, sv, _) = re_gram
        .svd(false, false)
        .map_err(|e| Error::Linalg(format!("SVD failed: {e}")))?;
    let min_sv = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_sv <= 1e-10 * scale * scale {
        return Err(Error::Linalg(format!(
            "graph of weight is not R-symplectic (min singular value {min_sv:e})"
        )));
    }
    Ok(WeightPlane {
        graph,
        basis,
        i_lagrangian_residual: im_res,
        r_symplectic_min_sv: min_sv,
    })
}

/// Φ₀(z) = max_y(−Im φ(z,y)) in closed form. Writing G = Im Cyy ≻ 0, the
/// maximizer is y*(z) = −G⁻¹ Im(Czyᵀ z) and
///   a = i·Czz − ½ Czy G⁻¹ Czyᵀ,  b = ½ C̄zy G⁻¹ Czyᵀ.
pub fn weight_from_phase(phi: &FBIPhase) -> Result<WeightForm> {
    let g = linalg::im_mat(&phi.cyy);
    let g = 0.5 * (&g + &g.t());
    let ginv = linalg::cmat_from_real(&real_inverse(&g)?);
    let czy_t = phi.czy.t().to_owned();
    let a = phi.czz.mapv(|z| z * I) - phi.czy.dot(&ginv).dot(&czy_t).mapv(|z| 0.5 * z);
    let b = linalg::conj_mat(&phi.czy)
        .dot(&ginv)
        .dot(&czy_t)
        .mapv(|z| 0.5 * z);
    let w = WeightForm::new(a, b)?;
    let min_eig = w.levi_min_eig()?;
    if min_eig <= 0.0 {
        return Err(Error::NotStrictlyPsh { min_eig });
    }
    Ok(w)
}

/// A C-Lagrangian subspace of C^{2n} of dimension n.
#[derive(Debug, Clone)]
pub struct LagrangianPlane {
    pub basis: CMat,
}

impl LagrangianPlane {
    pub fn new(basis: CMat) -> Result<Self> {
        let two_n = basis.nrows();
        let d = basis.ncols();
        if two_n % 2 != 0 || d != two_n / 2 {
            return Err(Error::DimensionMismatch(
                "Lagrangian plane must have n columns in C^{2n}".into(),
            ));
        }
        let scale = linalg::max_abs(&basis).max(1.0);
        for i in 0..d {
            for j in 0..d {
                let s = linalg::sigma(&basis.column(i).to_owned(), &basis.column(j).to_owned());
                if s.norm() > 1e-10 * scale * scale {
                    return Err(Error::Validation(format!(
                        "basis is not σ-isotropic: σ(b_{i}, b_{j}) = {s}"
                    )));
                }
            }
        }
        Ok(LagrangianPlane { basis })
    }

    /// Gram matrix of the Hermitian form Z ↦ (1/i)σ(Z, Z̄) on the plane.
    pub fn hermitian_gram(&self) -> CMat {
        let d = self.basis.ncols();
        Array2::from_shape_fn((d, d), |(j, k)| {
            let vj = self.basis.column(j).to_owned();
            let vk = self.basis.column(k).to_owned().mapv(|w| w.conj());
            linalg::sigma(&vj, &vk) / I
        })
    }

    pub fn positivity(&self) -> Result<Positivity> {
        let gram = self.hermitian_gram();
        let (eigs, _) = linalg::eigh_complex(&gram)?;
        let scale = eigs.iter().map(|e| e.abs()).fold(1e-300, f64::max);
        if eigs.iter().all(|&e| e > 1e-10 * scale) {
            Ok(Positivity::StrictlyPositive)
        } else if eigs.iter().all(|&e| e < -1e-10 * scale) {
            Ok(Positivity::StrictlyNegative)
        } else {
            Ok(Positivity::Indefinite)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Positivity {
    StrictlyPositive,
    StrictlyNegative,
    Indefinite,
}

#[derive(Debug, Clone)]
pub struct StableSubspaces {
    pub plus: LagrangianPlane,
    pub minus: LagrangianPlane,
    pub positivity_plus: Positivity,
    pub positivity_minus: Positivity,
}

/// Stable outgoing/incoming subspaces of a Hamilton map with no real
/// eigenvalues: Λ± is the sum of generalized eigenspaces over ±Im λ > 0,
/// computed as the range of the product of (F − λI) over the opposite
/// half-spectrum.
pub fn stable_subspaces(f: &HamiltonMap) -> Result<StableSubspaces> {
    let dim = f.f.nrows();
    let n = dim / 2;
    let scale = f
        .eigenvalues
        .iter()
        .map(|l| l.norm())
        .fold(1.0f64, f64::max);
    for l in f.eigenvalues.iter() {
        if l.im.abs() < 1e-8 * scale {
            return Err(Error::RealEigenvalue { eig: *l, tol: 1e-8 * scale });
        }
    }
    let product_over = |keep_im_negative: bool| -> CMat {
        let mut p = linalg::ceye(dim);
        for l in f.eigenvalues.iter() {
            let pick = if keep_im_negative { l.im < 0.0 } else { l.im > 0.0 };
            if pick {
                let factor = &f.f - &linalg::ceye(dim).mapv(|z| z * *l);
                // normalize factors so the product stays O(1)
                let nrm = linalg::max_abs(&factor).max(f64::MIN_POSITIVE);
                p = p.dot(&factor.mapv(|z| z / nrm));
            }
        }
        p
    };
    let plus_basis = linalg::orthonormal_range(&product_over(true), 1e-8)?;
    let minus_basis = linalg::orthonormal_range(&product_over(false), 1e-8)?;
    if plus_basis.ncols() != n || minus_basis.ncols() != n {
        return Err(Error::Linalg(format!(
            "stable subspace extraction found dimensions ({}, {}), expected ({n}, {n})",
            plus_basis.ncols(),
            minus_basis.ncols()
        )));
    }
    let plus = LagrangianPlane::new(plus_basis)?;
    let minus = LagrangianPlane::new(minus_basis)?;
    let positivity_plus = plus.positivity()?;
    let positivity_minus = minus.positivity()?;
    Ok(StableSubspaces {
        plus,
        minus,
        positivity_plus,
        positivity_minus,
    })
}

/// Build the canonical map that sends Λ⁺ to the base {(z, 0)} and Λ⁻ to the
/// fiber {(0, ζ)}: orthonormalize a basis {v_j} of Λ⁺ with respect to the
/// positive Hermitian form (1/i)σ(·, ·̄) (phase-fixed for determinism), pick
/// the dual basis {w_k} of Λ⁻ with σ(v_j, w_k) = −δ_jk, and invert [V | W].
pub fn adapted_kappa(plus: &LagrangianPlane, minus: &LagrangianPlane) -> Result<CanonicalMap> {
    let two_n = plus.basis.nrows();
    let n = two_n / 2;
    if minus.basis.nrows() != two_n || plus.basis.ncols() != n || minus.basis.ncols() != n {
        return Err(Error::DimensionMismatch(
            "adapted map needs complementary Lagrangian planes of dimension n".into(),
        ));
    }
    let herm = |v: &CVec, w: &CVec| -> C64 {
        let wc = w.mapv(|z| z.conj());
        linalg::sigma(v, &wc) / I
    };
    // modified Gram-Schmidt in the (1/i)σ(·, ·̄) form
    let mut cols: Vec<CVec> = (0..n).map(|j| plus.basis.column(j).to_owned()).collect();
    for j in 0..n {
        for i in 0..j {
            let uj = cols[j].clone();
            let coef = herm(&uj, &cols[i]);
            cols[j] = &cols[j] - &cols[i].mapv(|z| z * coef);
        }
        let nrm = herm(&cols[j], &cols[j]);
        if nrm.re <= 0.0 || nrm.im.abs() > 1e-8 * nrm.re.abs().max(1e-300) {
            return Err(Error::Validation(format!(
                "plus subspace is not strictly positive (B(u,u) = {nrm})"
            )));
        }
        cols[j] = cols[j].mapv(|z| z / nrm.re.sqrt());
        // deterministic phase: make the first entry of maximal modulus real positive
        let mut best = 0usize;
        for (idx, z) in cols[j].iter().enumerate() {
            if z.norm() > cols[j][best].norm() * (1.0 + 1e-12) {
                best = idx;
            }
        }
        let pivot = cols[j][best];
        if pivot.norm() > 0.0 {
            let phase = pivot.conj() / pivot.norm();
            cols[j] = cols[j].mapv(|z| z * phase);
        }
    }
    let mut v = Array2::zeros((two_n, n));
    for (j, col) in cols.iter().enumerate() {
        v.slice_mut(s![.., j]).assign(col);
    }
    // pairings P_jk = σ(v_j, w0_k); W = −W0 P⁻¹
    let pair = Array2::from_shape_fn((n, n), |(j, k)| {
        linalg::sigma(&v.column(j).to_owned(), &minus.basis.column(k).to_owned())
    });
    let pair_inv = linalg::inv(&pair)
        .map_err(|_| Error::Validation("Λ⁺ and Λ⁻ do not pair nondegenerately".into()))?;
    let w = minus.basis.dot(&pair_inv).mapv(|z| -z);
    let mut vw = Array2::zeros((two_n, two_n));
    vw.slice_mut(s![.., ..n]).assign(&v);
    vw.slice_mut(s![.., n..]).assign(&w);
    let k = linalg::inv(&vw)?;
    let map = CanonicalMap::new(k)?;
    let check = is_canonical(&map);
    if !check.pass {
        return Err(Error::Linalg(format!(
            "adapted map failed the symplectic check (residual {:e})",
            check.residual
        )));
    }
    Ok(map)
}

/// JSON schemas (separate real/imaginary parts).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FBIPhaseJson {
    pub n: usize,
    pub czz_re: Vec<Vec<f64>>,
    pub czz_im: Vec<Vec<f64>>,
    pub czy_re: Vec<Vec<f64>>,
    pub czy_im: Vec<Vec<f64>>,
    pub cyy_re: Vec<Vec<f64>>,
    pub cyy_im: Vec<Vec<f64>>,
    pub c_phi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightFormJson {
    pub n: usize,
    pub a_re: Vec<Vec<f64>>,
    pub a_im: Vec<Vec<f64>>,
    pub b_re: Vec<Vec<f64>>,
    pub b_im: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CanonicalMapJson {
    pub n: usize,
    pub k_re: Vec<Vec<f64>>,
    pub k_im: Vec<Vec<f64>>,
}

fn mat_to_parts(m: &CMat) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let re = m.rows().into_iter().map(|r| r.iter().map(|z| z.re).collect()).collect();
    let im = m.rows().into_iter().map(|r| r.iter().map(|z| z.im).collect()).collect();
    (re, im)
}

fn mat_from_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<CMat> {
    let rows = re.len();
    if rows == 0 || im.len() != rows {
        return Err(Error::Validation("empty or mismatched matrix parts".into()));
    }
    let cols = re[0].len();
    let mut m = Array2::zeros((rows, cols));
    for i in 0..rows {
        if re[i].len() != cols || im[i].len() != cols {
            return Err(Error::Validation("ragged matrix parts".into()));
        }
        for j in 0..cols {
            m[[i, j]] = C64::new(re[i][j], im[i][j]);
        }
    }
    Ok(m)
}

impl FBIPhase {
    pub fn to_json(&self) -> FBIPhaseJson {
        let (czz_re, czz_im) = mat_to_parts(&self.czz);
        let (czy_re, czy_im) = mat_to_parts(&self.czy);
        let (cyy_re, cyy_im) = mat_to_parts(&self.cyy);
        FBIPhaseJson {
            n: self.n(),
            czz_re,
            czz_im,
            czy_re,
            czy_im,
            cyy_re,
            cyy_im,
            c_phi: self.c_phi,
        }
    }

    pub fn from_json(j: &FBIPhaseJson) -> Result<FBIPhase> {
        FBIPhase::new(
            mat_from_parts(&j.czz_re, &j.czz_im)?,
            mat_from_parts(&j.czy_re, &j.czy_im)?,
            mat_from_parts(&j.cyy_re, &j.cyy_im)?,
        )
    }
}

impl WeightForm {
    pub fn to_json(&self) -> WeightFormJson {
        let (a_re, a_im) = mat_to_parts(&self.a);
        let (b_re, b_im) = mat_to_parts(&self.b);
        WeightFormJson {
            n: self.n(),
            a_re,
            a_im,
            b_re,
            b_im,
        }
    }

    pub fn from_json(j: &WeightFormJson) -> Result<WeightForm> {
        WeightForm::new(
            mat_from_parts(&j.a_re, &j.a_im)?,
            mat_from_parts(&j.b_re, &j.b_im)?,
        )
    }
}

impl CanonicalMap {
    pub fn to_json(&self) -> CanonicalMapJson {
        let (k_re, k_im) = mat_to_parts(&self.k);
        CanonicalMapJson {
            n: self.half_dim(),
            k_re,
            k_im,
        }
    }

    pub fn from_json(j: &CanonicalMapJson) -> Result<CanonicalMap> {
        CanonicalMap::new(mat_from_parts(&j.k_re, &j.k_im)?)
    }
}

/// Seeded generators of valid FBI phases and strictly psh weights.
pub mod samples {
    use super::*;
    use crate::linalg::samples as base;
    use rand::Rng;

    /// Random valid FBI phase: symmetric Czz, well-conditioned Czy, and
    /// Cyy with positive-definite imaginary part.
    pub fn fbi_phase<R: Rng>(rng: &mut R, n: usize) -> FBIPhase {
        let czz = base::complex_symmetric(rng, n);
        let czy = loop {
            let m = base::complex_matrix(rng, n, n);
            let d = m.det().map(|z| z.norm()).unwrap_or(0.0);
            if d > 0.2 {
                break m;
            }
        };
        let re_cyy = base::real_symmetric(rng, n);
        let r = base::real_matrix(rng, n, n);
        let im_cyy = r.dot(&r.t()) + 0.3 * Array2::<f64>::eye(n);
        let cyy = Array2::from_shape_fn((n, n), |(i, j)| C64::new(re_cyy[[i, j]], im_cyy[[i, j]]));
        FBIPhase::new(czz, czy, cyy).expect("sampled phase is valid")
    }

    /// Random strictly plurisubharmonic weight.
    pub fn strictly_psh_weight<R: Rng>(rng: &mut R, n: usize) -> WeightForm {
        let a = base::complex_symmetric(rng, n);
        let m = base::complex_matrix(rng, n, n);
        let b = linalg::adjoint(&m).dot(&m) + linalg::ceye(n).mapv(|z| z * 0.3);
        WeightForm::new(a, b).expect("sampled weight is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::samples as base;
    use crate::quadform::{hamilton_map, QuadraticSymbol};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn cvec(entries: &[(f64, f64)]) -> CVec {
        entries.iter().map(|&(re, im)| C64::new(re, im)).collect()
    }

    fn oscillator_f() -> HamiltonMap {
        let a = linalg::cmat_from_real(&array![[2.0, 0.0], [0.0, 2.0]]);
        hamilton_map(&QuadraticSymbol::new(1, a).unwrap()).unwrap()
    }

    fn xi2_plus_ix2_f() -> HamiltonMap {
        let a = array![
            [C64::new(0.0, 2.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(2.0, 0.0)]
        ];
        hamilton_map(&QuadraticSymbol::new(1, a).unwrap()).unwrap()
    }

    #[test]
    fn identity_is_canonical() {
        let k = CanonicalMap::new(linalg::ceye(2)).unwrap();
        let chk = is_canonical(&k);
        assert_eq!(chk.residual, 0.0);
        assert!(chk.pass);
    }

    #[test]
    fn dilation_is_not_canonical() {
        let k = CanonicalMap::new(linalg::ceye(2).mapv(|z| z * 2.0)).unwrap();
        let chk = is_canonical(&k);
        assert!(!chk.pass);
        assert_abs_diff_eq!(chk.residual, 3.0, epsilon = 1e-12); // |4σ - σ|
    }

    #[test]
    fn standard_phase_fields_and_normalization() {
        let phi = standard_phase(1);
        assert!((phi.czz[[0, 0]] - I).norm() < 1e-15);
        assert!((phi.czy[[0, 0]] + I * 2f64.sqrt()).norm() < 1e-15);
        assert!((phi.cyy[[0, 0]] - I).norm() < 1e-15);
        // c_φ = 2^{-1/2} π^{-3/4} · 1 · √2 = π^{-3/4}
        assert_abs_diff_eq!(phi.c_phi, std::f64::consts::PI.powf(-0.75), epsilon = 1e-14);
    }

    #[test]
    fn standard_phase_kappa_matches_paper() {
        let phi = standard_phase(1);
        let k = kappa_from_phase(&phi).unwrap();
        let inv_sqrt2 = 1.0 / 2f64.sqrt();
        // κ(x,ξ) = (1/√2)(x − iξ, ξ − ix)
        assert!((k.k[[0, 0]] - C64::new(inv_sqrt2, 0.0)).norm() < 1e-12);
        assert!((k.k[[0, 1]] - C64::new(0.0, -inv_sqrt2)).norm() < 1e-12);
        assert!((k.k[[1, 0]] - C64::new(0.0, -inv_sqrt2)).norm() < 1e-12);
        assert!((k.k[[1, 1]] - C64::new(inv_sqrt2, 0.0)).norm() < 1e-12);
        assert!(is_canonical(&k).pass);
        // κ(1,0) = (1/√2, −i/√2)
        let img = k.apply(&cvec(&[(1.0, 0.0), (0.0, 0.0)]));
        assert!((img[0] - C64::new(inv_sqrt2, 0.0)).norm() < 1e-12);
        assert!((img[1] - C64::new(0.0, -inv_sqrt2)).norm() < 1e-12);
    }

    #[test]
    fn degenerate_czy_is_rejected() {
        let czz = linalg::ceye(1).mapv(|z| z * I);
        let czy = Array2::zeros((1, 1));
        let cyy = linalg::ceye(1).mapv(|z| z * I);
        match FBIPhase::new(czz, czy, cyy) {
            Err(Error::SingularBlock { .. }) => {}
            other => panic!("expected SingularBlock, got {other:?}"),
        }
    }

    #[test]
    fn phase_from_kappa_recovers_standard_phase() {
        let phi = standard_phase(2);
        let k = kappa_from_phase(&phi).unwrap();
        let rec = phase_from_kappa(&k).unwrap();
        assert!(linalg::max_abs(&(&rec.czz - &phi.czz)) < 1e-10);
        assert!(linalg::max_abs(&(&rec.czy - &phi.czy)) < 1e-10);
        assert!(linalg::max_abs(&(&rec.cyy - &phi.cyy)) < 1e-10);
    }

    #[test]
    fn phase_from_kappa_rejects_identity() {
        // The identity is generated by no FBI phase: the transversality
        // block K12 vanishes, so the block equations have no solution with
        // Im Cyy > 0.
        let k = CanonicalMap::new(linalg::ceye(4)).unwrap();
        let res = phase_from_kappa(&k);
        assert!(
            matches!(res, Err(Error::NotGenerating(_)) | Err(Error::NotPositive { .. })),
            "expected NotGenerating/NotPositive, got {res:?}"
        );
    }

    #[test]
    fn phase_from_kappa_flags_nonpositive_im_cyy() {
        // φ = zy has Cyy = 0: the generated map is canonical with invertible
        // K12 but the recovered Im Cyy is not positive definite.
        let k = CanonicalMap::new(array![
            [C64::new(0.0, 0.0), C64::new(-1.0, 0.0)],
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
        ])
        .unwrap();
        match phase_from_kappa(&k) {
            Err(Error::NotPositive { .. }) => {}
            other => panic!("expected NotPositive, got {other:?}"),
        }
    }

    #[test]
    fn phase_kappa_round_trip_random() {
        let mut rng = base::rng(41);
        for n in 1..=3usize {
            for _ in 0..(50 / 3 + 1) {
                let phi = samples::fbi_phase(&mut rng, n);
                let k = kappa_from_phase(&phi).unwrap();
                assert!(is_canonical(&k).pass);
                let rec = phase_from_kappa(&k).unwrap();
                let scale = linalg::max_abs(&phi.czy).max(1.0);
                assert!(linalg::max_abs(&(&rec.czz - &phi.czz)) < 1e-8 * scale);
                assert!(linalg::max_abs(&(&rec.czy - &phi.czy)) < 1e-8 * scale);
                assert!(linalg::max_abs(&(&rec.cyy - &phi.cyy)) < 1e-8 * scale);
            }
        }
    }

    #[test]
    fn weight_of_standard_phase_is_half_norm_squared() {
        for n in [1usize, 2] {
            let w = weight_from_phase(&standard_phase(n)).unwrap();
            assert!(linalg::max_abs(&w.a) < 1e-12);
            assert!(linalg::max_abs(&(&w.b - &linalg::ceye(n))) < 1e-12);
        }
    }

    #[test]
    fn weight_of_bargmann_phase_matches_grid_maximization() {
        // φ(z,y) = i(z−y)²/2 gives Φ₀(z) = (Im z)²/2
        let czz = linalg::ceye(1).mapv(|z| z * I);
        let czy = linalg::ceye(1).mapv(|z| z * (-I));
        let cyy = linalg::ceye(1).mapv(|z| z * I);
        let phi = FBIPhase::new(czz, czy, cyy).unwrap();
        let w = weight_from_phase(&phi).unwrap();
        let mut rng = base::rng(6);
        for _ in 0..20 {
            let z = base::complex_vector(&mut rng, 1);
            let expected = 0.5 * z[0].im * z[0].im;
            assert_abs_diff_eq!(w.eval(&z), expected, epsilon = 1e-12);
            // explicit maximization over a y-grid
            let mut best = f64::NEG_INFINITY;
            for k in 0..4000 {
                let y = -20.0 + 0.01 * k as f64;
                let val = -phi.eval(&z, &cvec(&[(y, 0.0)])).im;
                best = best.max(val);
            }
            assert_abs_diff_eq!(w.eval(&z), best, epsilon = 1e-3);
        }
    }

    #[test]
    fn weights_of_random_phases_are_strictly_psh() {
        let mut rng = base::rng(42);
        for n in 1..=3usize {
            for _ in 0..10 {
                let phi = samples::fbi_phase(&mut rng, n);
                let w = weight_from_phase(&phi).unwrap();
                assert!(w.levi_min_eig().unwrap() > 0.0);
                // closed form agrees with direct evaluation at the critical point
                let z = base::complex_vector(&mut rng, n);
                let ystar = phi.critical_y(&z).unwrap();
                let yc: CVec = ystar.iter().map(|&v| C64::new(v, 0.0)).collect();
                assert_abs_diff_eq!(w.eval(&z), -phi.eval(&z, &yc).im, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn plane_of_standard_weight_is_conjugate_graph() {
        let w = WeightForm::standard(1);
        let plane = plane_of_weight(&w).unwrap();
        // graph {(z, z̄/i)}: e₁ ↦ (1, −i), i·e₁ ↦ (i, −1)
        assert!((plane.basis[[0, 0]] - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((plane.basis[[1, 0]] - C64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((plane.basis[[0, 1]] - C64::new(0.0, 1.0)).norm() < 1e-14);
        assert!((plane.basis[[1, 1]] - C64::new(-1.0, 0.0)).norm() < 1e-14);
        assert!(plane.i_lagrangian_residual < 1e-12);
        assert!(plane.r_symplectic_min_sv > 0.5);
    }

    #[test]
    fn plane_of_weight_scaled_levi() {
        let w = WeightForm::new(Array2::zeros((1, 1)), linalg::ceye(1).mapv(|z| z * 2.0)).unwrap();
        let plane = plane_of_weight(&w).unwrap();
        // ζ = 2z̄/i
        assert!((plane.basis[[1, 0]] - C64::new(0.0, -2.0)).norm() < 1e-14);
    }

    #[test]
    fn plane_of_weight_rejects_nonpsh() {
        let b = array![[C64::new(-1.0, 0.0)]];
        let w = WeightForm { a: Array2::zeros((1, 1)), b };
        match plane_of_weight(&w) {
            Err(Error::NotStrictlyPsh { .. }) => {}
            other => panic!("expected NotStrictlyPsh, got {other:?}"),
        }
    }

    #[test]
    fn plane_of_random_weights_i_lagrangian_r_symplectic() {
        let mut rng = base::rng(43);
        for n in 1..=3usize {
            for _ in 0..10 {
                let w = samples::strictly_psh_weight(&mut rng, n);
                let plane = plane_of_weight(&w).unwrap();
                assert!(plane.i_lagrangian_residual < 1e-10 * linalg::max_abs(&plane.basis).powi(2));
                assert!(plane.r_symplectic_min_sv > 0.0);
            }
        }
    }

    #[test]
    fn stable_subspaces_oscillator() {
        let st = stable_subspaces(&oscillator_f()).unwrap();
        // Λ⁺ = span{(1, i)}
        let expected = cvec(&[(1.0, 0.0), (0.0, 1.0)]);
        let b = st.plus.basis.column(0).to_owned();
        // proportionality in C
        let ratio = b[0] / expected[0];
        assert!((b[1] - expected[1] * ratio).norm() < 1e-10);
        assert_eq!(st.positivity_plus, Positivity::StrictlyPositive);
        assert_eq!(st.positivity_minus, Positivity::StrictlyNegative);
    }

    #[test]
    fn stable_subspaces_xi2_plus_ix2() {
        let f = xi2_plus_ix2_f();
        let st = stable_subspaces(&f).unwrap();
        let mu = C64::new(-1.0, 1.0) / 2f64.sqrt();
        let v = st.plus.basis.column(0).to_owned();
        let resid = &f.f.dot(&v) - &v.mapv(|z| z * mu);
        assert!(resid.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);
        assert_eq!(st.positivity_plus, Positivity::StrictlyPositive);
    }

    #[test]
    fn stable_subspaces_real_spectrum_errors() {
        // q = xξ has F = diag(1/2, −1/2)
        let a = linalg::cmat_from_real(&array![[0.0, 1.0], [1.0, 0.0]]);
        let f = hamilton_map(&QuadraticSymbol::new(1, a).unwrap()).unwrap();
        match stable_subspaces(&f) {
            Err(Error::RealEigenvalue { .. }) => {}
            other => panic!("expected RealEigenvalue, got {other:?}"),
        }
    }

    #[test]
    fn q_vanishes_on_stable_subspaces() {
        let mut rng = base::rng(44);
        let mut tested = 0;
        for n in 1..=3usize {
            for _ in 0..20 {
                let a = base::complex_symmetric(&mut rng, 2 * n);
                let q = QuadraticSymbol::new(n, a).unwrap();
                let f = hamilton_map(&q).unwrap();
                if let Ok(st) = stable_subspaces(&f) {
                    for plane in [&st.plus, &st.minus] {
                        for j in 0..n {
                            let v = plane.basis.column(j).to_owned();
                            let qv = crate::quadform::eval_quadratic(&q, &v).unwrap();
                            assert!(qv.norm() < 1e-8, "q(v) = {qv}");
                        }
                    }
                    tested += 1;
                }
            }
        }
        assert!(tested > 5);
    }

    #[test]
    fn adapted_kappa_oscillator_reproduces_standard_map() {
        let st = stable_subspaces(&oscillator_f()).unwrap();
        let k = adapted_kappa(&st.plus, &st.minus).unwrap();
        let std_k = kappa_from_phase(&standard_phase(1)).unwrap();
        assert!(linalg::max_abs(&(&k.k - &std_k.k)) < 1e-10);
    }

    #[test]
    fn adapted_kappa_maps_plus_to_base_and_is_canonical() {
        for f in [oscillator_f(), xi2_plus_ix2_f()] {
            let st = stable_subspaces(&f).unwrap();
            let k = adapted_kappa(&st.plus, &st.minus).unwrap();
            assert!(is_canonical(&k).pass);
            let img_plus = k.apply(&st.plus.basis.column(0).to_owned());
            assert!(img_plus[1].norm() < 1e-10, "Λ⁺ must map into the base");
            let img_minus = k.apply(&st.minus.basis.column(0).to_owned());
            assert!(img_minus[0].norm() < 1e-10, "Λ⁻ must map into the fiber");
        }
    }

    #[test]
    fn adapted_phase_xi2_plus_ix2_matches_hand_computation() {
        // Analytic values for q = ξ² + ix²: Cyy = μ = (−1+i)/√2, Levi part
        // b = 2, and the real Hessian of Φ₀ has eigenvalues 1 ± 1/√2.
        let st = stable_subspaces(&xi2_plus_ix2_f()).unwrap();
        let k = adapted_kappa(&st.plus, &st.minus).unwrap();
        let phi = phase_from_kappa(&k).unwrap();
        let mu = C64::new(-1.0, 1.0) / 2f64.sqrt();
        assert!((phi.cyy[[0, 0]] - mu).norm() < 1e-10);
        let w = weight_from_phase(&phi).unwrap();
        assert!((w.b[[0, 0]] - C64::new(2.0, 0.0)).norm() < 1e-10);
        assert!((w.a[[0, 0]].norm() - 2f64.sqrt()).abs() < 1e-10);
        let (eigs, _) = linalg::eigh_real(&w.to_real_matrix()).unwrap();
        assert_abs_diff_eq!(eigs[0], 1.0 - 1.0 / 2f64.sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(eigs[1], 1.0 + 1.0 / 2f64.sqrt(), epsilon = 1e-10);
        assert!(eigs[0] > 0.0, "Φ₀ is strictly convex");
    }

    #[test]
    fn strictly_convex_weight_from_positive_plus_subspace() {
        // When Λ⁺ is strictly positive and the adapted phase exists, the
        // recovered weight is strictly convex as a real form.
        let mut rng = base::rng(45);
        let mut tested = 0;
        for _ in 0..30 {
            let vpp = {
                let m = base::complex_symmetric(&mut rng, 2);
                &m + &(linalg::ceye(2).mapv(|z| z * C64::new(3.0, 0.4)))
            };
            let q = QuadraticSymbol::schrodinger(&vpp).unwrap();
            let f = hamilton_map(&q).unwrap();
            let Ok(st) = stable_subspaces(&f) else { continue };
            if st.positivity_plus != Positivity::StrictlyPositive {
                continue;
            }
            let Ok(k) = adapted_kappa(&st.plus, &st.minus) else { continue };
            let Ok(phi) = phase_from_kappa(&k) else { continue };
            let w = weight_from_phase(&phi).unwrap();
            let (eigs, _) = linalg::eigh_real(&w.to_real_matrix()).unwrap();
            assert!(eigs[0] > 0.0, "strictly convex, got min eig {}", eigs[0]);
            tested += 1;
        }
        assert!(tested > 3);
    }

    #[test]
    fn weight_real_matrix_roundtrip() {
        let mut rng = base::rng(46);
        for n in 1..=3usize {
            for _ in 0..10 {
                let w = samples::strictly_psh_weight(&mut rng, n);
                let h = w.to_real_matrix();
                let w2 = WeightForm::from_real_matrix(&h).unwrap();
                assert!(linalg::max_abs(&(&w.a - &w2.a)) < 1e-12);
                assert!(linalg::max_abs(&(&w.b - &w2.b)) < 1e-12);
                // evaluation agreement
                let z = base::complex_vector(&mut rng, n);
                let mut wv = ndarray::Array1::zeros(2 * n);
                for i in 0..n {
                    wv[i] = z[i].re;
                    wv[n + i] = z[i].im;
                }
                assert_abs_diff_eq!(w.eval(&z), wv.dot(&h.dot(&wv)), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn weight_json_roundtrip() {
        let mut rng = base::rng(47);
        let w = samples::strictly_psh_weight(&mut rng, 2);
        let j = serde_json::to_string(&w.to_json()).unwrap();
        let back: WeightFormJson = serde_json::from_str(&j).unwrap();
        let w2 = WeightForm::from_json(&back).unwrap();
        assert!(linalg::max_abs(&(&w.a - &w2.a)) < 1e-15);
    }
}
