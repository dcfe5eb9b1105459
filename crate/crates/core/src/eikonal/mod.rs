//! Complex-time Hamiltonian dynamics for quadratic symbols: flows as matrix
//! exponentials, evolution of plurisubharmonic weights (graph transform and
//! normal-form pullback), eikonal residuals, good-time searches, weight-gap
//! decay exponents, and a fixed-step integrator for polynomial symbols.
//!
//! Time is complex throughout. The quadratic flow of q with Hamilton map F is
//! exp(2tF) (the linear Hamilton field of q(X) = ½⟨AX,X⟩ is JAX = 2FX), and a
//! weight Φ evolves by transporting its graph Λ_Φ = {(z, (2/i)∂_zΦ)} with the
//! flow and reading the result back as a graph over the new base.

use ndarray::{s, Array2};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, RealLinearMap};
use crate::quadform::{eval_quadratic, HamiltonMap, QuadraticSymbol};
use crate::symplectic::{CanonicalMap, WeightForm};

const I: C64 = C64::new(0.0, 1.0);

pub type ComplexTime = C64;

/// Condition-number threshold beyond which the graph re-projection is
/// treated as a caustic.
pub const CAUSTIC_COND: f64 = 1e12;

/// Trajectory-norm bound for the nonlinear flow integrator.
pub const FLOW_NORM_BOUND: f64 = 1e6;

/// The linear complex-time flow exp(2tF) of a quadratic symbol.
pub fn quadratic_flow(f: &HamiltonMap, t: ComplexTime) -> CanonicalMap {
    let two_t_f = f.f.mapv(|z| z * (2.0 * t));
    CanonicalMap::new(linalg::expm(&two_t_f)).expect("flow matrix is square")
}

/// Transport the graph Λ_Φ under a canonical map and re-express the image as
/// a graph over the new base variable.
pub fn graph_transform(phi: &WeightForm, k: &CanonicalMap) -> Result<WeightForm> {
    let n = phi.n();
    if k.half_dim() != n {
        return Err(Error::DimensionMismatch(
            "canonical map and weight have different dimensions".into(),
        ));
    }
    let g = phi.graph_map();
    let p_full = k.k.dot(&g.p);
    let q_full = k.k.dot(&g.q);
    let base = RealLinearMap::new(
        p_full.slice(s![..n, ..]).to_owned(),
        q_full.slice(s![..n, ..]).to_owned(),
    );
    let fiber = RealLinearMap::new(
        p_full.slice(s![n.., ..]).to_owned(),
        q_full.slice(s![n.., ..]).to_owned(),
    );
    let cond = base.condition()?;
    if !cond.is_finite() || cond > CAUSTIC_COND {
        return Err(Error::Caustic { cond });
    }
    let base_inv = base.inverse()?;
    let fiber_over_base = fiber.compose(&base_inv);
    let a_new = fiber_over_base.p.mapv(|z| z * I);
    let b_new = fiber_over_base.q.mapv(|z| z * I).t().to_owned();
    WeightForm::new(a_new, b_new)
}

/// Ξ_t with Λ_{Ξ_t} = exp(2tF)(Λ_Φ0).
pub fn evolve_weight(phi0: &WeightForm, f: &HamiltonMap, t: ComplexTime) -> Result<WeightForm> {
    graph_transform(phi0, &quadratic_flow(f, t))
}

/// Normal-form pullback: for 𝔮(z,ζ) = Mz·ζ the eikonal solution is
/// Ξ_t(z) = Φ0(e^{−tM} z).
pub fn evolve_weight_pullback(phi0: &WeightForm, m: &CMat, t: ComplexTime) -> Result<WeightForm> {
    if m.nrows() != phi0.n() || m.ncols() != phi0.n() {
        return Err(Error::DimensionMismatch(
            "normal-form matrix must be n x n".into(),
        ));
    }
    let e = linalg::expm(&m.mapv(|z| z * (-t)));
    phi0.pullback(&e)
}

/// Deterministic sample of unit vectors in C^n: the real and imaginary
/// coordinate axes plus seeded random points.
pub fn unit_sphere_sample(n: usize, random_points: usize) -> Vec<CVec> {
    let mut out = Vec::new();
    for j in 0..n {
        let mut e = ndarray::Array1::zeros(n);
        e[j] = C64::new(1.0, 0.0);
        out.push(e);
        let mut ie = ndarray::Array1::zeros(n);
        ie[j] = I;
        out.push(ie);
    }
    let mut rng = linalg::samples::rng(0x5EED_5A3E);
    while out.len() < 2 * n + random_points {
        let v = linalg::samples::complex_vector(&mut rng, n);
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            out.push(v.mapv(|z| z / norm));
        }
    }
    out
}

/// Directional residual of the quadratic complex-time eikonal equation
/// 2∂_tΞ_t(z) + i𝔮(z, (2/i)∂_zΞ_t(z)) = 0, contracted with the step
/// direction dt: for the exact solution,
/// [Ξ_{t+dt}(z) − Ξ_{t−dt}(z)]/2 + Re(i 𝔮(z, ζ) dt) = O(|dt|³).
/// Returns the maximum over a unit-sphere sample of that combination
/// divided by |dt|; ∂_zΞ_t is taken from the averaged midpoint weight.
pub fn eikonal_residual(
    phi_minus: &WeightForm,
    phi_plus: &WeightForm,
    q_fbi: &QuadraticSymbol,
    dt: ComplexTime,
) -> Result<f64> {
    let n = phi_minus.n();
    if phi_plus.n() != n || q_fbi.n() != n {
        return Err(Error::DimensionMismatch(
            "weights and symbol must share the dimension n".into(),
        ));
    }
    if dt.norm() == 0.0 {
        return Err(Error::Validation("dt must be nonzero".into()));
    }
    let mid = WeightForm::new(
        (&phi_minus.a + &phi_plus.a).mapv(|z| 0.5 * z),
        (&phi_minus.b + &phi_plus.b).mapv(|z| 0.5 * z),
    )?;
    let mut worst = 0.0f64;
    for z in unit_sphere_sample(n, 32) {
        let zeta = mid.fiber(&z);
        let mut phase_point = ndarray::Array1::zeros(2 * n);
        phase_point.slice_mut(s![..n]).assign(&z);
        phase_point.slice_mut(s![n..]).assign(&zeta);
        let qv = eval_quadratic(q_fbi, &phase_point)?;
        let time_diff = 0.5 * (phi_plus.eval(&z) - phi_minus.eval(&z));
        let resid = (time_diff + (I * qv * dt).re).abs() / dt.norm();
        worst = worst.max(resid);
    }
    Ok(worst)
}

/// How a weight evolves in complex time: under the full linear flow of an
/// FBI-side Hamilton map, or by the normal-form pullback through e^{−tM}.
#[derive(Debug, Clone)]
pub enum WeightEvolution<'a> {
    Flow(&'a HamiltonMap),
    Pullback(&'a CMat),
}

impl WeightEvolution<'_> {
    pub fn at(&self, phi0: &WeightForm, t: ComplexTime) -> Result<WeightForm> {
        match self {
            WeightEvolution::Flow(f) => evolve_weight(phi0, f, t),
            WeightEvolution::Pullback(m) => evolve_weight_pullback(phi0, m, t),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GoodTimeResult {
    pub t0_re: f64,
    pub t0_im: f64,
    pub epsilon: i8,
    pub rho: f64,
    pub s: f64,
    /// Certified constant: Φ₀(z) − Ξ_{t0}(z) ≥ c|z|².
    pub c: f64,
    /// Smallest eigenvalue of the real 2n×2n form of Φ₀ − Ξ_{t0} (= c).
    pub min_eig_gap: f64,
}

impl GoodTimeResult {
    pub fn t0(&self) -> ComplexTime {
        C64::new(self.t0_re, self.t0_im)
    }
}

/// Search configuration for [`find_good_time`]. Grids default to
/// {0} ∪ geometric(1e-4, T0/2) in both ρ and s, both signs of ε, and a
/// certification floor of 1e-12 relative to ‖Φ₀‖.
#[derive(Debug, Clone)]
pub struct GoodTimeSearch {
    pub t0_max: f64,
    pub rho_values: Option<Vec<f64>>,
    pub s_values: Option<Vec<f64>>,
    pub epsilon: Option<i8>,
    pub c_floor_rel: f64,
    pub grid_points: usize,
}

impl GoodTimeSearch {
    pub fn new(t0_max: f64) -> Self {
        GoodTimeSearch {
            t0_max,
            rho_values: None,
            s_values: None,
            epsilon: None,
            c_floor_rel: 1e-12,
            grid_points: 12,
        }
    }

    fn grid(&self, explicit: &Option<Vec<f64>>) -> Vec<f64> {
        if let Some(v) = explicit {
            return v.clone();
        }
        let mut out = vec![0.0];
        let lo: f64 = 1e-4;
        let hi: f64 = (self.t0_max / 2.0).max(lo * 1.001);
        let m = self.grid_points.max(2);
        for k in 0..m {
            let frac = k as f64 / (m - 1) as f64;
            out.push(lo * (hi / lo).powf(frac));
        }
        out
    }
}

/// Search the two-parameter family t = −ερ − is for a time certifying
/// Φ₀ − Ξ_t ≥ c|z|². Candidates are scanned in order of increasing |t| and
/// the first one whose gap form has minimum eigenvalue above the floor wins.
pub fn find_good_time(
    phi0: &WeightForm,
    evolution: &WeightEvolution,
    search: &GoodTimeSearch,
) -> Result<GoodTimeResult> {
    let h0 = phi0.to_real_matrix();
    let scale = linalg::max_abs_real(&h0).max(f64::MIN_POSITIVE);
    let c_floor = search.c_floor_rel * scale;

    let epsilons: Vec<i8> = match search.epsilon {
        Some(e) => vec![e],
        None => vec![1, -1],
    };
    let rhos = search.grid(&search.rho_values);
    let ss = search.grid(&search.s_values);

    #[derive(Clone, Copy)]
    struct Candidate {
        eps: i8,
        rho: f64,
        s: f64,
        modulus: f64,
    }
    let mut candidates = Vec::new();
    for &eps in &epsilons {
        for &rho in &rhos {
            for &s in &ss {
                if rho == 0.0 && s == 0.0 {
                    continue;
                }
                let modulus = (rho * rho + s * s).sqrt();
                if modulus >= search.t0_max {
                    continue;
                }
                candidates.push(Candidate { eps, rho, s, modulus });
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.modulus
            .total_cmp(&b.modulus)
            .then(a.eps.cmp(&b.eps))
            .then(a.rho.total_cmp(&b.rho))
            .then(a.s.total_cmp(&b.s))
    });

    let mut best_gap = f64::NEG_INFINITY;
    let total = candidates.len();
    for cand in candidates {
        let t0 = C64::new(-(cand.eps as f64) * cand.rho, -cand.s);
        let xi = match evolution.at(phi0, t0) {
            Ok(w) => w,
            Err(Error::Caustic { .. }) => continue,
            Err(e) => return Err(e),
        };
        let gap = &h0 - &xi.to_real_matrix();
        let (eigs, _) = linalg::eigh_real(&gap)?;
        let min_eig = eigs[0];
        best_gap = best_gap.max(min_eig);
        if min_eig >= c_floor {
            return Ok(GoodTimeResult {
                t0_re: t0.re,
                t0_im: t0.im,
                epsilon: cand.eps,
                rho: cand.rho,
                s: cand.s,
                c: min_eig,
                min_eig_gap: min_eig,
            });
        }
    }
    Err(Error::NoGoodTime {
        candidates: total,
        best_gap,
    })
}

/// Re-evaluate the certificate Φ₀(z) − Ξ_{t0}(z) ≥ c|z|² on random unit
/// vectors; returns the smallest observed gap.
pub fn revalidate_certificate(
    phi0: &WeightForm,
    evolution: &WeightEvolution,
    result: &GoodTimeResult,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let xi = evolution.at(phi0, result.t0())?;
    let mut rng = linalg::samples::rng(seed);
    let n = phi0.n();
    let mut worst = f64::INFINITY;
    let mut produced = 0;
    while produced < samples {
        let v = linalg::samples::complex_vector(&mut rng, n);
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        let z = v.mapv(|w| w / norm);
        worst = worst.min(phi0.eval(&z) - xi.eval(&z));
        produced += 1;
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub r2: f64,
    /// (s, min eigenvalue of Φ₀ − Ξ_{−is}) pairs entering the fit.
    pub points: Vec<(f64, f64)>,
}

/// Least-squares slope of log(min-eig gap of Φ₀ − Ξ_{−is}) against log s.
/// For trivial singular space the expected slope is 2k₀+1.
pub fn decay_exponent_fit(
    phi0: &WeightForm,
    evolution: &WeightEvolution,
    s_grid: &[f64],
) -> Result<DecayFit> {
    if s_grid.len() < 2 {
        return Err(Error::InsufficientData(
            "need at least two s values for a slope".into(),
        ));
    }
    let h0 = phi0.to_real_matrix();
    let mut points = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        if s <= 0.0 {
            return Err(Error::Validation("s values must be positive".into()));
        }
        let xi = evolution.at(phi0, C64::new(0.0, -s))?;
        let gap = &h0 - &xi.to_real_matrix();
        let (eigs, _) = linalg::eigh_real(&gap)?;
        if eigs[0] <= 0.0 {
            return Err(Error::Validation(format!(
                "gap is not positive at s = {s} (min eig {:e}); hypotheses violated",
                eigs[0]
            )));
        }
        points.push((s, eigs[0]));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(s, g)| (s.ln(), g.ln())).collect();
    let (slope, r2) = least_squares_slope(&logs);
    Ok(DecayFit { slope, r2, points })
}

/// Least-squares slope and R² on (x, y) pairs.
pub fn least_squares_slope(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    // essentially-constant y data fits its own mean perfectly
    let r2 = if syy <= 1e-12 * n * (1.0 + my * my) {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    (slope, r2)
}

/// A holomorphic polynomial f(z, ζ) on C^{2n} given by monomials
/// (multi-index over the 2n variables, coefficient).
#[derive(Debug, Clone)]
pub struct SymbolSpec {
    pub n: usize,
    pub monomials: Vec<(Vec<u32>, C64)>,
}

impl SymbolSpec {
    pub fn new(n: usize, monomials: Vec<(Vec<u32>, C64)>) -> Result<Self> {
        for (alpha, coeff) in &monomials {
            if alpha.len() != 2 * n {
                return Err(Error::DimensionMismatch(
                    "multi-index length must be 2n".into(),
                ));
            }
            if !coeff.re.is_finite() || !coeff.im.is_finite() {
                return Err(Error::Validation("coefficients must be finite".into()));
            }
        }
        Ok(SymbolSpec { n, monomials })
    }

    /// The quadratic symbol q(X) = ½⟨AX,X⟩ as a SymbolSpec.
    pub fn from_quadratic(q: &QuadraticSymbol) -> Self {
        let n = q.n();
        let dim = 2 * n;
        let mut monomials = Vec::new();
        let a = q.coefficients();
        for i in 0..dim {
            for j in i..dim {
                let coeff = if i == j { 0.5 * a[[i, j]] } else { a[[i, j]] };
                if coeff.norm() > 0.0 {
                    let mut alpha = vec![0u32; dim];
                    alpha[i] += 1;
                    alpha[j] += 1;
                    monomials.push((alpha, coeff));
                }
            }
        }
        SymbolSpec { n, monomials }
    }

    pub fn eval(&self, zvec: &CVec) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (alpha, coeff) in &self.monomials {
            let mut term = *coeff;
            for (k, &p) in alpha.iter().enumerate() {
                for _ in 0..p {
                    term *= zvec[k];
                }
            }
            acc += term;
        }
        acc
    }

    /// ∂f/∂Z_var as a new polynomial.
    pub fn derivative(&self, var: usize) -> SymbolSpec {
        let mut monomials = Vec::new();
        for (alpha, coeff) in &self.monomials {
            if alpha[var] > 0 {
                let mut beta = alpha.clone();
                beta[var] -= 1;
                monomials.push((beta, *coeff * alpha[var] as f64));
            }
        }
        SymbolSpec {
            n: self.n,
            monomials,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub endpoint: CVec,
    pub jacobian: CMat,
    /// ‖Jacᵀ J Jac − J‖_max.
    pub symplectic_residual: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegOrder {
    ImagThenReal,
    RealThenImag,
}

/// Integrate the complex-time Hamilton flow of a polynomial symbol with the
/// classical fixed-step RK4 scheme, one leg per time axis (the two legs
/// commute for holomorphic symbols). Propagates the variational equation for
/// the Jacobian alongside the trajectory.
pub fn integrate_complex_flow(
    f: &SymbolSpec,
    z0: &CVec,
    t: ComplexTime,
    steps: usize,
) -> Result<FlowResult> {
    integrate_complex_flow_ordered(f, z0, t, steps, LegOrder::ImagThenReal)
}

pub fn integrate_complex_flow_ordered(
    f: &SymbolSpec,
    z0: &CVec,
    t: ComplexTime,
    steps: usize,
    order: LegOrder,
) -> Result<FlowResult> {
    let n = f.n;
    if z0.len() != 2 * n {
        return Err(Error::DimensionMismatch("initial point must have length 2n".into()));
    }
    if steps == 0 {
        return Err(Error::Validation("steps must be >= 1".into()));
    }
    // Hamilton field X = (∂_ζ f, −∂_z f) and its Jacobian, built symbolically.
    let dim = 2 * n;
    let first: Vec<SymbolSpec> = (0..dim).map(|v| f.derivative(v)).collect();
    let field_components: Vec<SymbolSpec> = (0..dim)
        .map(|i| {
            if i < n {
                first[n + i].clone()
            } else {
                let d = first[i - n].clone();
                SymbolSpec {
                    n: d.n,
                    monomials: d.monomials.into_iter().map(|(a, c)| (a, -c)).collect(),
                }
            }
        })
        .collect();
    let field_jacobian: Vec<Vec<SymbolSpec>> = field_components
        .iter()
        .map(|comp| (0..dim).map(|v| comp.derivative(v)).collect())
        .collect();

    let eval_field = |z: &CVec, factor: C64| -> CVec {
        field_components
            .iter()
            .map(|comp| comp.eval(z) * factor)
            .collect()
    };
    let eval_jac = |z: &CVec, factor: C64| -> CMat {
        Array2::from_shape_fn((dim, dim), |(i, j)| field_jacobian[i][j].eval(z) * factor)
    };

    let mut state = z0.clone();
    let mut jac = linalg::ceye(dim);
    let legs: [(C64, f64); 2] = match order {
        LegOrder::ImagThenReal => [(I * t.im, t.im.abs()), (C64::new(t.re, 0.0), t.re.abs())],
        LegOrder::RealThenImag => [(C64::new(t.re, 0.0), t.re.abs()), (I * t.im, t.im.abs())],
    };
    for (leg_factor, leg_len) in legs {
        if leg_len == 0.0 {
            continue;
        }
        let h = 1.0 / steps as f64;
        for _ in 0..steps {
            // RK4 for (Z, Jac) with RHS (factor·X(Z), factor·DX(Z)·Jac)
            let k1 = eval_field(&state, leg_factor);
            let m1 = eval_jac(&state, leg_factor).dot(&jac);
            let s2 = &state + &k1.mapv(|z| z * (0.5 * h));
            let k2 = eval_field(&s2, leg_factor);
            let m2 = eval_jac(&s2, leg_factor).dot(&(&jac + &m1.mapv(|z| z * (0.5 * h))));
            let s3 = &state + &k2.mapv(|z| z * (0.5 * h));
            let k3 = eval_field(&s3, leg_factor);
            let m3 = eval_jac(&s3, leg_factor).dot(&(&jac + &m2.mapv(|z| z * (0.5 * h))));
            let s4 = &state + &k3.mapv(|z| z * h);
            let k4 = eval_field(&s4, leg_factor);
            let m4 = eval_jac(&s4, leg_factor).dot(&(&jac + &m3.mapv(|z| z * h)));
            state = &state
                + &(k1 + k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4).mapv(|z| z * (h / 6.0));
            jac = &jac
                + &(m1 + m2.mapv(|z| z * 2.0) + m3.mapv(|z| z * 2.0) + m4).mapv(|z| z * (h / 6.0));
            let norm = state.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if !norm.is_finite() || norm > FLOW_NORM_BOUND {
                return Err(Error::StepOverflow {
                    norm,
                    bound: FLOW_NORM_BOUND,
                });
            }
        }
    }
    let j = linalg::symplectic_j_c(n);
    let resid = jac.t().dot(&j).dot(&jac) - &j;
    Ok(FlowResult {
        endpoint: state,
        symplectic_residual: linalg::max_abs(&resid),
        jacobian: jac,
        steps,
    })
}

pub mod reduction;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::samples as base;
    use crate::quadform::hamilton_map;
    use crate::symplectic::samples as symp_samples;
    use crate::symplectic::is_canonical;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn oscillator_q() -> QuadraticSymbol {
        QuadraticSymbol::new(1, linalg::cmat_from_real(&array![[2.0, 0.0], [0.0, 2.0]])).unwrap()
    }

    fn normal_form_q(m: C64) -> QuadraticSymbol {
        QuadraticSymbol::normal_form(&array![[m]]).unwrap()
    }

    #[test]
    fn flow_at_zero_is_identity() {
        let f = hamilton_map(&oscillator_q()).unwrap();
        let k = quadratic_flow(&f, C64::new(0.0, 0.0));
        assert!(linalg::max_abs(&(&k.k - &linalg::ceye(2))) < 1e-15);
    }

    #[test]
    fn oscillator_flow_is_rotation_by_2t() {
        let f = hamilton_map(&oscillator_q()).unwrap();
        for t in [0.3, -0.9, 1.7] {
            let k = quadratic_flow(&f, C64::new(t, 0.0));
            assert_abs_diff_eq!(k.k[[0, 0]].re, (2.0 * t).cos(), epsilon = 1e-12);
            assert_abs_diff_eq!(k.k[[0, 1]].re, (2.0 * t).sin(), epsilon = 1e-12);
            assert!(is_canonical(&k).pass);
        }
    }

    #[test]
    fn flow_matches_ode_integration() {
        // ξ² + ix² at imaginary time, against a straight-line RK4 oracle
        let a = array![
            [C64::new(0.0, 2.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(2.0, 0.0)]
        ];
        let q = QuadraticSymbol::new(1, a).unwrap();
        let f = hamilton_map(&q).unwrap();
        let t = C64::new(0.0, -0.4);
        let k = quadratic_flow(&f, t);
        // oracle: M'(u) = (2tF) M(u) on u ∈ [0,1]
        let gen = f.f.mapv(|z| z * (2.0 * t));
        let mut m = linalg::ceye(2);
        let steps = 4000;
        let h = 1.0 / steps as f64;
        for _ in 0..steps {
            let k1 = gen.dot(&m);
            let k2 = gen.dot(&(&m + &k1.mapv(|z| z * (0.5 * h))));
            let k3 = gen.dot(&(&m + &k2.mapv(|z| z * (0.5 * h))));
            let k4 = gen.dot(&(&m + &k3.mapv(|z| z * h)));
            m = &m + &(k1 + k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4).mapv(|z| z * (h / 6.0));
        }
        assert!(linalg::max_abs(&(&k.k - &m)) < 1e-8);
    }

    #[test]
    fn flow_composition_random() {
        let mut rng = base::rng(51);
        for _ in 0..100 {
            let n = 1 + (rand::Rng::gen_range(&mut rng, 0..3usize));
            let a = base::complex_symmetric(&mut rng, 2 * n);
            let q = QuadraticSymbol::new(n, a).unwrap();
            let f = hamilton_map(&q).unwrap();
            let t1 = C64::new(
                rand::Rng::gen_range(&mut rng, -0.5..0.5),
                rand::Rng::gen_range(&mut rng, -0.5..0.5),
            );
            let t2 = C64::new(
                rand::Rng::gen_range(&mut rng, -0.5..0.5),
                rand::Rng::gen_range(&mut rng, -0.5..0.5),
            );
            let lhs = quadratic_flow(&f, t1 + t2);
            let rhs = quadratic_flow(&f, t1).k.dot(&quadratic_flow(&f, t2).k);
            assert!(linalg::max_abs(&(&lhs.k - &rhs)) < 1e-10);
        }
    }

    #[test]
    fn evolve_weight_at_zero_is_exact() {
        let mut rng = base::rng(52);
        for n in 1..=3usize {
            let phi0 = symp_samples::strictly_psh_weight(&mut rng, n);
            let a = base::complex_symmetric(&mut rng, 2 * n);
            let q = QuadraticSymbol::new(n, a).unwrap();
            let f = hamilton_map(&q).unwrap();
            let xi = evolve_weight(&phi0, &f, C64::new(0.0, 0.0)).unwrap();
            assert_eq!(linalg::max_abs(&(&xi.a - &phi0.a)), 0.0);
            assert_eq!(linalg::max_abs(&(&xi.b - &phi0.b)), 0.0);
        }
    }

    #[test]
    fn normal_form_weight_evolution_closed_form() {
        // 𝔮 = −2ελ zζ with Φ0 = |z|²/2 gives Ξ_t = ½ e^{4Re(t)ελ} |z|²
        for eps in [1.0f64, -1.0] {
            let lambda = 0.8;
            let m = C64::new(-2.0 * eps * lambda, 0.0);
            let q = normal_form_q(m);
            let f = hamilton_map(&q).unwrap();
            let phi0 = WeightForm::standard(1);
            for t in [C64::new(0.2, 0.0), C64::new(-0.1, 0.3), C64::new(0.05, -0.4)] {
                let xi = evolve_weight(&phi0, &f, t).unwrap();
                let expected = (4.0 * t.re * eps * lambda).exp();
                assert!(linalg::max_abs(&xi.a) < 1e-12);
                assert_abs_diff_eq!(xi.b[[0, 0]].re, expected, epsilon = 1e-12 * expected.max(1.0));
            }
        }
    }

    #[test]
    fn pullback_matches_paper_good_time_form() {
        // M = −2ελ, t = −ρε: Ξ_t = ½ e^{−4ρλ}|z|²  (ε² = 1)
        let (eps, lambda, rho) = (1.0f64, 1.0f64, 0.1f64);
        let m = array![[C64::new(-2.0 * eps * lambda, 0.0)]];
        let phi0 = WeightForm::standard(1);
        let xi = evolve_weight_pullback(&phi0, &m, C64::new(-rho * eps, 0.0)).unwrap();
        assert_abs_diff_eq!(xi.b[[0, 0]].re, (-4.0 * rho * lambda).exp(), epsilon = 1e-14);
        let id = evolve_weight_pullback(&phi0, &Array2::zeros((1, 1)), C64::new(0.3, 0.1)).unwrap();
        assert!(linalg::max_abs(&(&id.b - &phi0.b)) < 1e-15);
    }

    #[test]
    fn graph_transform_agrees_with_pullback_random() {
        let mut rng = base::rng(53);
        for _ in 0..50 {
            let n = 1 + rand::Rng::gen_range(&mut rng, 0..3usize);
            let m = base::complex_matrix(&mut rng, n, n);
            let q = QuadraticSymbol::normal_form(&m).unwrap();
            let f = hamilton_map(&q).unwrap();
            let phi0 = symp_samples::strictly_psh_weight(&mut rng, n);
            let t = C64::new(
                rand::Rng::gen_range(&mut rng, -0.3..0.3),
                rand::Rng::gen_range(&mut rng, -0.3..0.3),
            );
            let by_graph = evolve_weight(&phi0, &f, t).unwrap();
            let by_pullback = evolve_weight_pullback(&phi0, &m, t).unwrap();
            assert!(linalg::max_abs(&(&by_graph.a - &by_pullback.a)) < 1e-10);
            assert!(linalg::max_abs(&(&by_graph.b - &by_pullback.b)) < 1e-10);
        }
    }

    #[test]
    fn psh_persists_for_small_times() {
        let mut rng = base::rng(54);
        for _ in 0..30 {
            let n = 1 + rand::Rng::gen_range(&mut rng, 0..3usize);
            let phi0 = symp_samples::strictly_psh_weight(&mut rng, n);
            let a = base::complex_symmetric(&mut rng, 2 * n);
            let q = QuadraticSymbol::new(n, a).unwrap();
            let f = hamilton_map(&q).unwrap();
            let angle: f64 = rand::Rng::gen_range(&mut rng, 0.0..std::f64::consts::TAU);
            let t = C64::new(0.1 * angle.cos(), 0.1 * angle.sin());
            let xi = evolve_weight(&phi0, &f, t).unwrap();
            assert!(xi.levi_min_eig().unwrap() > 0.0);
        }
    }

    #[test]
    fn caustic_detected_for_rotated_graph() {
        // Hamilton map J on the FBI side rotates the graph of |z|²/2 onto a
        // vertical plane at t = π/8.
        let q = QuadraticSymbol::new(1, linalg::cmat_from_real(&array![[2.0, 0.0], [0.0, 2.0]]))
            .unwrap();
        let f = hamilton_map(&q).unwrap();
        let phi0 = WeightForm::standard(1);
        match evolve_weight(&phi0, &f, C64::new(std::f64::consts::FRAC_PI_8, 0.0)) {
            Err(Error::Caustic { .. }) => {}
            other => panic!("expected Caustic, got {other:?}"),
        }
    }

    #[test]
    fn eikonal_residual_zero_symbol() {
        let phi0 = WeightForm::standard(1);
        let q = QuadraticSymbol::new(1, Array2::zeros((2, 2))).unwrap();
        let r = eikonal_residual(&phi0, &phi0, &q, C64::new(1e-4, 0.0)).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn eikonal_residual_small_for_true_solutions() {
        let mut rng = base::rng(55);
        for _ in 0..20 {
            let n = 1 + rand::Rng::gen_range(&mut rng, 0..2usize);
            let m = base::complex_matrix(&mut rng, n, n);
            let q = QuadraticSymbol::normal_form(&m).unwrap();
            let phi0 = symp_samples::strictly_psh_weight(&mut rng, n);
            let angle: f64 = rand::Rng::gen_range(&mut rng, 0.0..std::f64::consts::TAU);
            let t = C64::new(0.1 * angle.cos(), 0.1 * angle.sin());
            for dt in [C64::new(1e-4, 0.0), C64::new(0.0, 1e-4)] {
                let minus = evolve_weight_pullback(&phi0, &m, t - dt).unwrap();
                let plus = evolve_weight_pullback(&phi0, &m, t + dt).unwrap();
                let r = eikonal_residual(&minus, &plus, &q, dt).unwrap();
                assert!(r < 1e-6, "residual {r:e} at t = {t}, dt = {dt}");
            }
        }
    }

    #[test]
    fn eikonal_residual_detects_wrong_pair() {
        let phi0 = WeightForm::standard(1);
        let q = normal_form_q(C64::new(1.0, 0.0));
        let f = hamilton_map(&q).unwrap();
        let t = C64::new(0.1, 0.0);
        let xi = evolve_weight(&phi0, &f, t).unwrap();
        let r = eikonal_residual(&xi.clone(), &xi, &q, C64::new(1e-4, 0.0)).unwrap();
        assert!(r > 1e-3, "wrong pair should leave an O(|q|) residual, got {r:e}");
    }

    #[test]
    fn good_time_purely_imaginary_closed_form() {
        // ε = +1, λ = 1, no z' block, ρ pinned to 0.1: c = ½(1 − e^{−0.4})
        let phi0 = WeightForm::standard(1);
        let m = array![[C64::new(-2.0, 0.0)]];
        let mut search = GoodTimeSearch::new(1.0);
        search.rho_values = Some(vec![0.1]);
        search.epsilon = Some(1);
        let res = find_good_time(&phi0, &WeightEvolution::Pullback(&m), &search).unwrap();
        let expected = 0.5 * (1.0 - (-0.4f64).exp());
        assert_abs_diff_eq!(res.c, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(res.t0_re, -0.1, epsilon = 1e-15);
        assert_eq!(res.s, 0.0);
        assert!(res.c <= res.min_eig_gap);
        // certificate on 1000 random unit vectors
        let worst =
            revalidate_certificate(&phi0, &WeightEvolution::Pullback(&m), &res, 1000, 99).unwrap();
        assert!(worst >= 0.99 * res.c, "worst {worst} vs c {}", res.c);
    }

    #[test]
    fn good_time_elliptic_oscillator_picks_imaginary_time() {
        // oscillator on the FBI side: M = 2i; only pure-imaginary times
        // certify, with c = ½(1 − e^{−4s}) ≈ 2s
        let phi0 = WeightForm::standard(1);
        let m = array![[C64::new(0.0, 2.0)]];
        for s in [1e-3, 1e-2] {
            let mut search = GoodTimeSearch::new(1.0);
            search.s_values = Some(vec![s]);
            let res = find_good_time(&phi0, &WeightEvolution::Pullback(&m), &search).unwrap();
            assert_eq!(res.rho, 0.0, "elliptic case certifies at ρ = 0");
            let expected = 0.5 * (1.0 - (-4.0 * s).exp());
            assert_abs_diff_eq!(res.c, expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn no_good_time_for_x_squared() {
        // q = x² transported by the standard phase; the ξ-direction gap
        // stays nonpositive at every candidate time.
        let q = QuadraticSymbol::new(1, linalg::cmat_from_real(&array![[2.0, 0.0], [0.0, 0.0]]))
            .unwrap();
        let f = hamilton_map(&q).unwrap();
        let kappa = crate::symplectic::kappa_from_phase(&crate::symplectic::standard_phase(1)).unwrap();
        let a_fbi = {
            let kinv = linalg::inv(&kappa.k).unwrap();
            kinv.t().dot(q.coefficients()).dot(&kinv)
        };
        let q_fbi = QuadraticSymbol::new(1, a_fbi).unwrap();
        let f_fbi = hamilton_map(&q_fbi).unwrap();
        assert!(linalg::max_abs(&(&f_fbi.f - &kappa.k.dot(&f.f).dot(&linalg::inv(&kappa.k).unwrap()))) < 1e-12);
        let phi0 = WeightForm::standard(1);
        let search = GoodTimeSearch::new(0.5);
        match find_good_time(&phi0, &WeightEvolution::Flow(&f_fbi), &search) {
            Err(Error::NoGoodTime { candidates, .. }) => assert!(candidates > 100),
            other => panic!("expected NoGoodTime, got {other:?}"),
        }
    }

    #[test]
    fn integrate_zero_symbol() {
        let f = SymbolSpec::new(1, vec![]).unwrap();
        let z0: CVec = array![C64::new(1.0, 2.0), C64::new(-0.5, 0.25)];
        let res = integrate_complex_flow(&f, &z0, C64::new(0.3, -0.2), 10).unwrap();
        assert!(res
            .endpoint
            .iter()
            .zip(z0.iter())
            .all(|(a, b)| (a - b).norm() < 1e-15));
        assert!(linalg::max_abs(&(&res.jacobian - &linalg::ceye(2))) < 1e-15);
        assert!(res.symplectic_residual < 1e-15);
    }

    #[test]
    fn integrate_quadratic_matches_matrix_exponential() {
        let mut rng = base::rng(56);
        for _ in 0..5 {
            let n = 1 + rand::Rng::gen_range(&mut rng, 0..2usize);
            let a = base::complex_symmetric(&mut rng, 2 * n);
            let q = QuadraticSymbol::new(n, a).unwrap();
            let f = hamilton_map(&q).unwrap();
            let spec = SymbolSpec::from_quadratic(&q);
            let z0 = base::complex_vector(&mut rng, 2 * n);
            let t = C64::new(0.4, -0.3);
            let res = integrate_complex_flow(&spec, &z0, t, 200).unwrap();
            let expected = quadratic_flow(&f, t);
            let endpoint_expected = expected.k.dot(&z0);
            let err = res
                .endpoint
                .iter()
                .zip(endpoint_expected.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-8, "endpoint error {err:e}");
            assert!(linalg::max_abs(&(&res.jacobian - &expected.k)) < 1e-8);
        }
    }

    #[test]
    fn integration_orders_commute_for_cubic_perturbation() {
        // f = zζ + z³ (n = 1)
        let spec = SymbolSpec::new(
            1,
            vec![
                (vec![1, 1], C64::new(1.0, 0.0)),
                (vec![3, 0], C64::new(1.0, 0.0)),
            ],
        )
        .unwrap();
        let z0: CVec = array![C64::new(0.3, -0.1), C64::new(0.2, 0.4)];
        let t = C64::new(0.1, 0.07);
        let a = integrate_complex_flow_ordered(&spec, &z0, t, 400, LegOrder::ImagThenReal).unwrap();
        let b = integrate_complex_flow_ordered(&spec, &z0, t, 400, LegOrder::RealThenImag).unwrap();
        let err = a
            .endpoint
            .iter()
            .zip(b.endpoint.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-7, "leg orders disagree by {err:e}");
    }

    #[test]
    fn symplectic_residual_improves_at_fourth_order() {
        let spec = SymbolSpec::new(
            1,
            vec![
                (vec![1, 1], C64::new(1.0, 0.0)),
                (vec![3, 0], C64::new(0.7, 0.2)),
            ],
        )
        .unwrap();
        let z0: CVec = array![C64::new(0.4, 0.2), C64::new(-0.3, 0.1)];
        let t = C64::new(0.5, 0.0);
        let r10 = integrate_complex_flow(&spec, &z0, t, 10)
            .unwrap()
            .symplectic_residual;
        let r20 = integrate_complex_flow(&spec, &z0, t, 20)
            .unwrap()
            .symplectic_residual;
        let r40 = integrate_complex_flow(&spec, &z0, t, 40)
            .unwrap()
            .symplectic_residual;
        let order1 = (r10 / r20).log2();
        let order2 = (r20 / r40).log2();
        assert!(order1 >= 3.5, "observed order {order1}");
        assert!(order2 >= 3.5, "observed order {order2}");
    }

    #[test]
    fn step_overflow_on_blowup() {
        // ż = z² blows up in finite time from z0 = 1
        let spec = SymbolSpec::new(1, vec![(vec![2, 1], C64::new(1.0, 0.0))]).unwrap();
        let z0: CVec = array![C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        match integrate_complex_flow(&spec, &z0, C64::new(30.0, 0.0), 20000) {
            Err(Error::StepOverflow { .. }) => {}
            other => panic!("expected StepOverflow, got {other:?}"),
        }
    }
}
