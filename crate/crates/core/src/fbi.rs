//! Discretized FBI transforms and Bargmann-space functionals: grid functions
//! on R^n, complex grids on C^n, the oscillatory-Gaussian transform itself,
//! weighted norms and localized/tail masses, polarization of weights, the
//! kernel comparability check, and L^p reconstruction experiments.
//!
//! All integrals use the trapezoid rule on uniform grids, which is spectrally
//! accurate for the Gaussian-envelope integrands arising here. Reductions use
//! pairwise summation so results do not depend on thread count.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::quadform::HamiltonMap;
use crate::symplectic::{weight_from_phase, FBIPhase, WeightForm};

const I: C64 = C64::new(0.0, 1.0);

/// Relative boundary-mass threshold for truncation checks.
pub const BOUNDARY_REL: f64 = 1e-12;

/// A sampled complex-valued function on the uniform grid [−l, l]^n
/// (n ∈ {1, 2}), tied to a semiclassical parameter h.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub n: usize,
    pub l: f64,
    pub points: usize,
    pub values: Vec<C64>,
    pub h: f64,
}

impl GridFunction {
    pub fn from_fn(
        n: usize,
        l: f64,
        points: usize,
        h: f64,
        f: impl Fn(&[f64]) -> C64,
    ) -> Result<GridFunction> {
        if !(1..=2).contains(&n) {
            return Err(Error::Validation("grid dimension must be 1 or 2".into()));
        }
        if points < 2 || l <= 0.0 || h <= 0.0 || h > 1.0 {
            return Err(Error::Validation(
                "need points >= 2, l > 0, 0 < h <= 1".into(),
            ));
        }
        let total = points.pow(n as u32);
        let mut values = Vec::with_capacity(total);
        let mut coords = vec![0.0; n];
        for flat in 0..total {
            Self::coords_of(flat, n, points, l, &mut coords);
            values.push(f(&coords));
        }
        Ok(GridFunction {
            n,
            l,
            points,
            values,
            h,
        })
    }

    pub fn axis_step(&self) -> f64 {
        2.0 * self.l / (self.points - 1) as f64
    }

    fn coords_of(flat: usize, n: usize, points: usize, l: f64, out: &mut [f64]) {
        let dx = 2.0 * l / (points - 1) as f64;
        let mut rest = flat;
        for k in (0..n).rev() {
            let idx = rest % points;
            rest /= points;
            out[k] = -l + idx as f64 * dx;
        }
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        Self::coords_of(flat, self.n, self.points, self.l, &mut out);
        out
    }

    /// Trapezoid weight of a node (product over axes, including dx^n).
    pub fn quad_weight(&self, flat: usize) -> f64 {
        let dx = self.axis_step();
        let mut w = 1.0;
        let mut rest = flat;
        for _ in 0..self.n {
            let idx = rest % self.points;
            rest /= self.points;
            w *= if idx == 0 || idx == self.points - 1 {
                0.5 * dx
            } else {
                dx
            };
        }
        w
    }

    fn is_boundary(&self, flat: usize) -> bool {
        let mut rest = flat;
        for _ in 0..self.n {
            let idx = rest % self.points;
            rest /= self.points;
            if idx == 0 || idx == self.points - 1 {
                return true;
            }
        }
        false
    }

    /// max |u| over boundary nodes relative to the peak.
    pub fn boundary_ratio(&self) -> f64 {
        let peak = self.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for flat in 0..self.values.len() {
            if self.is_boundary(flat) {
                worst = worst.max(self.values[flat].norm());
            }
        }
        worst / peak
    }

    pub fn scale(&self, c: C64) -> GridFunction {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= c;
        }
        out
    }

    /// CSV rows (node coordinates, re, im).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for flat in 0..self.values.len() {
            let node = self.node(flat);
            for x in &node {
                out.push_str(&format!("{x:.17e},"));
            }
            out.push_str(&format!(
                "{:.17e},{:.17e}\n",
                self.values[flat].re, self.values[flat].im
            ));
        }
        out
    }

    pub fn header(&self) -> GridFunctionHeader {
        GridFunctionHeader {
            n: self.n,
            l: self.l,
            points: self.points,
            h: self.h,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFunctionHeader {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "N")]
    pub points: usize,
    pub h: f64,
}

/// Grid L^p norm (trapezoid for finite p, max for p = ∞).
pub fn lp_norm(u: &GridFunction, p: f64) -> Result<f64> {
    if p.is_nan() {
        return Err(Error::Validation("p must be in [1, ∞]".into()));
    }
    if p.is_infinite() {
        return Ok(u.values.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    if p < 1.0 {
        return Err(Error::Validation("p must be in [1, ∞]".into()));
    }
    let terms: Vec<f64> = (0..u.values.len())
        .map(|flat| u.quad_weight(flat) * u.values[flat].norm().powf(p))
        .collect();
    Ok(linalg::pairwise_sum(&terms).powf(1.0 / p))
}

/// Uniform grid on the polydisc box {|Re z_k| ≤ radius, |Im z_k| ≤ radius}
/// in C^n, with `points` nodes per real axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexGrid {
    pub n: usize,
    pub radius: f64,
    pub points: usize,
}

impl ComplexGrid {
    pub fn new(n: usize, radius: f64, points: usize) -> Result<Self> {
        if !(1..=2).contains(&n) {
            return Err(Error::Validation("complex grid dimension must be 1 or 2".into()));
        }
        if points < 2 || radius <= 0.0 {
            return Err(Error::Validation("need points >= 2 and radius > 0".into()));
        }
        Ok(ComplexGrid { n, radius, points })
    }

    pub fn axis_step(&self) -> f64 {
        2.0 * self.radius / (self.points - 1) as f64
    }

    pub fn total(&self) -> usize {
        self.points.pow(2 * self.n as u32)
    }

    /// Node: digits (re_1, im_1, .., re_n, im_n) in row-major order.
    pub fn z(&self, flat: usize) -> CVec {
        let dx = self.axis_step();
        let mut digits = vec![0usize; 2 * self.n];
        let mut rest = flat;
        for k in (0..2 * self.n).rev() {
            digits[k] = rest % self.points;
            rest /= self.points;
        }
        (0..self.n)
            .map(|k| {
                C64::new(
                    -self.radius + digits[2 * k] as f64 * dx,
                    -self.radius + digits[2 * k + 1] as f64 * dx,
                )
            })
            .collect()
    }

    pub fn quad_weight(&self, flat: usize) -> f64 {
        let dx = self.axis_step();
        let mut w = 1.0;
        let mut rest = flat;
        for _ in 0..2 * self.n {
            let idx = rest % self.points;
            rest /= self.points;
            w *= if idx == 0 || idx == self.points - 1 {
                0.5 * dx
            } else {
                dx
            };
        }
        w
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        let mut rest = flat;
        for _ in 0..2 * self.n {
            let idx = rest % self.points;
            rest /= self.points;
            if idx == 0 || idx == self.points - 1 {
                return true;
            }
        }
        false
    }
}

/// Default box radius max(3, 8√h·√max(1, ln(1/h))): wide enough that
/// Gaussian-class integrands fall below 1e-12 at the boundary.
pub fn default_box_radius(h: f64) -> f64 {
    let logfac = (1.0 / h).ln().max(1.0).sqrt();
    (8.0 * h.sqrt() * logfac).max(3.0)
}

/// Sampled FBI transform T_φ u on a complex grid.
///
/// Samples are stored against the phase's own weight, as
/// T_φu(z)·e^{−Φ₀(z)/h}: the weighted integrand is bounded by ‖u‖, so the
/// quadrature is free of the e^{Φ₀/h}-scale cancellation that makes raw
/// samples of T_φu unrepresentable. `value` rescales back when the raw
/// sample is needed.
#[derive(Debug, Clone)]
pub struct FBIField {
    pub grid: ComplexGrid,
    /// samples of T_φu(z) e^{−Φ₀(z)/h}.
    pub weighted: Vec<C64>,
    pub phase: FBIPhase,
    /// Φ₀, the weight of `phase`.
    pub weight0: WeightForm,
    pub h: f64,
    /// boundary/peak ratio of the input when it exceeded the truncation
    /// threshold; non-fatal.
    pub truncation: Option<f64>,
}

impl FBIField {
    /// Raw sample T_φu(z) at a node (may overflow for points far out in the
    /// box at very small h; prefer the weighted samples for functionals).
    pub fn value(&self, flat: usize) -> C64 {
        let z = self.grid.z(flat);
        self.weighted[flat] * (self.weight0.eval(&z) / self.h).exp()
    }

    /// CSV rows (Re z, Im z per axis, |T| e^{−Φ/h}).
    pub fn to_weighted_csv(&self, phi: &WeightForm) -> String {
        let mut out = String::new();
        for flat in 0..self.weighted.len() {
            let z = self.grid.z(flat);
            for zk in z.iter() {
                out.push_str(&format!("{:.17e},{:.17e},", zk.re, zk.im));
            }
            let w = self.weighted[flat].norm()
                * ((self.weight0.eval(&z) - phi.eval(&z)) / self.h).exp();
            out.push_str(&format!("{w:.17e}\n"));
        }
        out
    }
}

/// T_φu(z) = c_φ h^{−3n/4} ∫ e^{iφ(z,y)/h} u(y) dy by trapezoid quadrature
/// at每 z node (parallel over nodes). Records a truncation warning when the
/// input does not decay to 1e-12 of its peak at the grid boundary.
pub fn fbi_transform(u: &GridFunction, phi: &FBIPhase, zgrid: &ComplexGrid) -> Result<FBIField> {
    let n = u.n;
    if phi.n() != n || zgrid.n != n {
        return Err(Error::DimensionMismatch(
            "state, phase and z-grid dimensions must agree".into(),
        ));
    }
    let h = u.h;
    let boundary = u.boundary_ratio();
    let truncation = if boundary > BOUNDARY_REL {
        Some(boundary)
    } else {
        None
    };

    // per-y data: quadrature weight × u(y), the quadratic phase part
    // ½⟨Cyy y, y⟩, and the y vector itself
    let y_count = u.values.len();
    let mut y_nodes: Vec<CVec> = Vec::with_capacity(y_count);
    let mut wu: Vec<C64> = Vec::with_capacity(y_count);
    let mut yy_phase: Vec<C64> = Vec::with_capacity(y_count);
    for flat in 0..y_count {
        let node = u.node(flat);
        let y: CVec = node.iter().map(|&x| C64::new(x, 0.0)).collect();
        let cyy_y = phi.cyy.dot(&y);
        yy_phase.push(0.5 * cyy_y.dot(&y));
        wu.push(u.values[flat] * u.quad_weight(flat));
        y_nodes.push(y);
    }

    let weight0 = weight_from_phase(phi)?;
    let prefactor = C64::new(phi.c_phi * h.powf(-3.0 * n as f64 / 4.0), 0.0);
    let i_over_h = I / h;
    let weighted: Vec<C64> = (0..zgrid.total())
        .into_par_iter()
        .map(|flat| {
            let z = zgrid.z(flat);
            let zz = 0.5 * phi.czz.dot(&z).dot(&z);
            // ⟨Czy y, z⟩ = (Czyᵀ z)·y
            let vz = phi.czy.t().dot(&z);
            // subtract Φ₀(z)/h in the exponent: −Im φ(z,y) ≤ Φ₀(z) keeps
            // every term at modulus ≤ 1
            let phi0_over_h = C64::new(weight0.eval(&z) / h, 0.0);
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..y_count {
                let cross = vz.dot(&y_nodes[k]);
                let exponent = i_over_h * (zz + cross + yy_phase[k]) - phi0_over_h;
                acc += exponent.exp() * wu[k];
            }
            prefactor * acc
        })
        .collect();

    Ok(FBIField {
        grid: zgrid.clone(),
        weighted,
        phase: phi.clone(),
        weight0,
        h,
        truncation,
    })
}

/// Weighted modulus |T(z)| e^{−Φ(z)/h} per node, computed from the stored
/// Φ₀-weighted samples as |T̃(z)| e^{(Φ₀(z) − Φ(z))/h}.
fn weighted_values(t: &FBIField, phi: &WeightForm) -> Result<Vec<f64>> {
    if phi.n() != t.grid.n {
        return Err(Error::DimensionMismatch(
            "weight and field dimensions must agree".into(),
        ));
    }
    Ok((0..t.weighted.len())
        .map(|flat| {
            let z = t.grid.z(flat);
            t.weighted[flat].norm() * ((t.weight0.eval(&z) - phi.eval(&z)) / t.h).exp()
        })
        .collect())
}

/// ‖T‖ in L²(C^n, e^{−2Φ/h} L(dz)) by 2n-dimensional trapezoid rule.
/// Errors when the integrand carries more than 1e-12 of its maximum on the
/// grid boundary.
pub fn bargmann_norm(t: &FBIField, phi: &WeightForm) -> Result<f64> {
    let w = weighted_values(t, phi)?;
    let peak = w.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        let mut boundary_max = 0.0f64;
        for flat in 0..w.len() {
            if t.grid.is_boundary(flat) {
                boundary_max = boundary_max.max(w[flat]);
            }
        }
        if boundary_max > BOUNDARY_REL * peak {
            return Err(Error::BoundaryMass {
                boundary: boundary_max / peak,
                threshold: BOUNDARY_REL,
            });
        }
    }
    let terms: Vec<f64> = (0..w.len())
        .map(|flat| t.grid.quad_weight(flat) * w[flat] * w[flat])
        .collect();
    Ok(linalg::pairwise_sum(&terms).sqrt())
}

/// ∫_{|z|<δ} (|T| e^{−Φ/h})^p L(dz) for p ∈ {1, 2}, ball indicator applied
/// nodewise.
pub fn local_mass(t: &FBIField, phi: &WeightForm, delta: f64, p: u8) -> Result<f64> {
    if !(p == 1 || p == 2) {
        return Err(Error::Validation("local mass supports p ∈ {1, 2}".into()));
    }
    if delta < 0.0 {
        return Err(Error::Validation("δ must be nonnegative".into()));
    }
    let w = weighted_values(t, phi)?;
    let terms: Vec<f64> = (0..w.len())
        .map(|flat| {
            let z = t.grid.z(flat);
            let r2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
            if r2 < delta * delta {
                t.grid.quad_weight(flat) * w[flat].powi(p as i32)
            } else {
                0.0
            }
        })
        .collect();
    Ok(linalg::pairwise_sum(&terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailNorm {
    L1,
    LInf,
}

/// L^p norm of |T(z)| e^{−Φ₀(z)/h} over {|z| ≥ δ} ∩ box, p ∈ {1, ∞}.
pub fn tail_mass(t: &FBIField, phi0: &WeightForm, delta: f64, p: TailNorm) -> Result<f64> {
    if delta < 0.0 {
        return Err(Error::Validation("δ must be nonnegative".into()));
    }
    let w = weighted_values(t, phi0)?;
    match p {
        TailNorm::L1 => {
            let terms: Vec<f64> = (0..w.len())
                .map(|flat| {
                    let z = t.grid.z(flat);
                    let r2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
                    if r2 >= delta * delta {
                        t.grid.quad_weight(flat) * w[flat]
                    } else {
                        0.0
                    }
                })
                .collect();
            Ok(linalg::pairwise_sum(&terms))
        }
        TailNorm::LInf => {
            let mut worst = 0.0f64;
            for flat in 0..w.len() {
                let z = t.grid.z(flat);
                let r2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
                if r2 >= delta * delta {
                    worst = worst.max(w[flat]);
                }
            }
            Ok(worst)
        }
    }
}

/// The holomorphic polarization Ψ₀(z, w) of a weight: the unique holomorphic
/// quadratic form on C^{2n} with Ψ₀(z, z̄) = Φ₀(z).
#[derive(Debug, Clone)]
pub struct Polarization {
    /// coefficient matrix of Ψ₀ on (z, w): Ψ₀ = ½⟨Psi (z,w), (z,w)⟩.
    pub psi: CMat,
}

impl Polarization {
    pub fn n(&self) -> usize {
        self.psi.nrows() / 2
    }

    pub fn eval(&self, z: &CVec, w: &CVec) -> C64 {
        let n = self.n();
        let mut v = ndarray::Array1::zeros(2 * n);
        for i in 0..n {
            v[i] = z[i];
            v[n + i] = w[i];
        }
        0.5 * self.psi.dot(&v).dot(&v)
    }
}

/// Replace z̄ by an independent holomorphic variable w in
/// Φ(z) = ¼ zᵀaz + ¼ z̄ᵀā z̄ + ½ z̄ᵀbz, giving
/// Ψ₀(z,w) = ¼ zᵀaz + ¼ wᵀā w + ½ wᵀbz, and verify Ψ₀(z, z̄) = Φ(z).
pub fn polarization(phi: &WeightForm) -> Result<Polarization> {
    if phi.levi_min_eig()? <= 0.0 {
        return Err(Error::NotStrictlyPsh {
            min_eig: phi.levi_min_eig()?,
        });
    }
    let n = phi.n();
    let mut psi = Array2::zeros((2 * n, 2 * n));
    let half_a = phi.a.mapv(|v| 0.5 * v);
    let half_a_conj = linalg::conj_mat(&phi.a).mapv(|v| 0.5 * v);
    let half_b = phi.b.mapv(|v| 0.5 * v);
    for i in 0..n {
        for j in 0..n {
            psi[[i, j]] = half_a[[i, j]];
            psi[[n + i, n + j]] = half_a_conj[[i, j]];
            psi[[n + i, j]] = half_b[[i, j]];
            psi[[i, n + j]] = half_b[[j, i]];
        }
    }
    let pol = Polarization { psi };
    let mut rng = linalg::samples::rng(0x90_1A_71_2E);
    for _ in 0..100 {
        let z = linalg::samples::complex_vector(&mut rng, n);
        let zc = z.mapv(|v| v.conj());
        let lhs = pol.eval(&z, &zc);
        let rhs = phi.eval(&z);
        if (lhs - C64::new(rhs, 0.0)).norm() > 1e-12 * (1.0 + rhs.abs()) {
            return Err(Error::Linalg(format!(
                "polarization identity failed: Ψ(z, z̄) − Φ(z) = {:e}",
                (lhs - C64::new(rhs, 0.0)).norm()
            )));
        }
    }
    Ok(pol)
}

/// Check the kernel-exponent comparability 2ReΨ₀(z,w̄) − Φ₀(z) − Φ₀(w) ≍
/// −|z−w|²: returns (c1, c2) with E ≤ −c1|z−w|² and E ≥ −c2|z−w|², both
/// positive, or `NotComparable` when E is not negative semidefinite with
/// kernel exactly {z = w}.
pub fn fundamental_estimate_check(phi: &WeightForm) -> Result<(f64, f64)> {
    let pol = polarization(phi)?;
    let n = phi.n();
    let dim = 4 * n; // real dimension of (z, w) space

    // E as a function of the real coordinates (Re z, Im z, Re w, Im w)
    let eval_e = |v: &ndarray::Array1<f64>| -> f64 {
        let z: CVec = (0..n).map(|k| C64::new(v[k], v[n + k])).collect();
        let w: CVec = (0..n).map(|k| C64::new(v[2 * n + k], v[3 * n + k])).collect();
        let wc = w.mapv(|c| c.conj());
        2.0 * pol.eval(&z, &wc).re - phi.eval(&z) - phi.eval(&w)
    };
    // real symmetric matrix of E by polarization of the quadratic form
    let mut he = Array2::zeros((dim, dim));
    let basis = |k: usize| {
        let mut e = ndarray::Array1::zeros(dim);
        e[k] = 1.0;
        e
    };
    let diag: Vec<f64> = (0..dim).map(|k| eval_e(&basis(k))).collect();
    for i in 0..dim {
        he[[i, i]] = diag[i];
        for j in 0..i {
            let mut v = basis(i);
            v[j] = 1.0;
            let val = 0.5 * (eval_e(&v) - diag[i] - diag[j]);
            he[[i, j]] = val;
            he[[j, i]] = val;
        }
    }
    // G = matrix of |z − w|²
    let mut g = Array2::zeros((dim, dim));
    for k in 0..2 * n {
        g[[k, k]] = 1.0;
        g[[2 * n + k, 2 * n + k]] = 1.0;
        g[[k, 2 * n + k]] = -1.0;
        g[[2 * n + k, k]] = -1.0;
    }
    // kernel of G is the diagonal {z = w}; E must vanish there
    let scale = linalg::max_abs_real(&he).max(f64::MIN_POSITIVE);
    let mut diag_basis = Array2::zeros((dim, 2 * n));
    for k in 0..2 * n {
        diag_basis[[k, k]] = 1.0 / 2f64.sqrt();
        diag_basis[[2 * n + k, k]] = 1.0 / 2f64.sqrt();
    }
    let on_kernel = linalg::max_abs_real(&he.dot(&diag_basis));
    if on_kernel > 1e-8 * scale {
        return Err(Error::NotComparable(format!(
            "E does not vanish on the diagonal (residual {on_kernel:e})"
        )));
    }
    // anti-diagonal complement: d = (z − w)/√2
    let mut anti = Array2::zeros((dim, 2 * n));
    for k in 0..2 * n {
        anti[[k, k]] = 1.0 / 2f64.sqrt();
        anti[[2 * n + k, k]] = -1.0 / 2f64.sqrt();
    }
    let a = anti.t().dot(&he.mapv(|x| -x)).dot(&anti);
    let gp = anti.t().dot(&g).dot(&anti);
    // generalized symmetric eigenvalues of (A, Gp); Gp = 2·I here
    use ndarray_linalg::Inverse;
    let gp_inv = gp
        .inv()
        .map_err(|e| Error::Linalg(format!("restricted metric inversion failed: {e}")))?;
    let pencil = gp_inv.dot(&a);
    let sym_pencil = 0.5 * (&pencil + &pencil.t());
    let (eigs, _) = linalg::eigh_real(&sym_pencil)?;
    let c1 = eigs[0];
    let c2 = eigs[eigs.len() - 1];
    if c1 <= 0.0 {
        return Err(Error::NotComparable(format!(
            "E is not negative definite transversally to the diagonal (c1 = {c1:e})"
        )));
    }
    Ok((c1, c2))
}

/// Both sides of the reconstruction bound ‖u‖_p ≤ C h^{n/2p − 3n/4}
/// ∫_{|z|<δ} |T_φu| e^{−Φ₀/h} L(dz): returns (lhs, rhs) with
/// rhs = h^{n/2p−3n/4}·local_mass(T, Φ₀, δ, 1); h^{n/2p} reads as 1 at p = ∞.
pub fn reconstruct_lp_bound(
    u: &GridFunction,
    phi: &FBIPhase,
    zgrid: &ComplexGrid,
    delta: f64,
    p: f64,
) -> Result<(f64, f64)> {
    let lhs = lp_norm(u, p)?;
    let t = fbi_transform(u, phi, zgrid)?;
    let phi0 = weight_from_phase(phi)?;
    let mass = local_mass(&t, &phi0, delta, 1)?;
    let nf = u.n as f64;
    let exponent = if p.is_infinite() {
        -3.0 * nf / 4.0
    } else {
        nf / (2.0 * p) - 3.0 * nf / 4.0
    };
    Ok((lhs, u.h.powf(exponent) * mass))
}

/// L²_{Ξ_t} mass of T_φu on {|z| < δ} along a complex-time grid, with
/// Ξ_t = exp(2tF)-evolution of the phase weight.
pub fn dynamical_mass(
    u: &GridFunction,
    phi: &FBIPhase,
    f_fbi: &HamiltonMap,
    zgrid: &ComplexGrid,
    delta: f64,
    tgrid: &[C64],
) -> Result<Vec<f64>> {
    let t = fbi_transform(u, phi, zgrid)?;
    let phi0 = weight_from_phase(phi)?;
    let mut out = Vec::with_capacity(tgrid.len());
    for &time in tgrid {
        let xi = crate::eikonal::evolve_weight(&phi0, f_fbi, time)?;
        out.push(local_mass(&t, &xi, delta, 2)?);
    }
    Ok(out)
}
