//! Model operators and eigenfunctions: Hermite states of the semiclassical
//! harmonic oscillator, dense finite-difference Schrödinger operators with
//! complex polynomial potentials (n = 1), low-lying eigenpair extraction by
//! shifted inverse iteration, and L^p scaling fits over h-scans.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Factorize, Solve};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::eikonal::least_squares_slope;
use crate::error::{Error, Result};
use crate::fbi::{lp_norm, GridFunction};
use crate::linalg::{self, CMat, CVec};

/// Dense-solve budget for discretized operators.
pub const MAX_DENSE_N: usize = 4096;

/// Physicists' Hermite polynomial H_m(x) by the three-term recurrence.
fn hermite_poly(m: usize, x: f64) -> f64 {
    let mut h0 = 1.0;
    if m == 0 {
        return h0;
    }
    let mut h1 = 2.0 * x;
    for k in 1..m {
        let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product::<f64>().max(1.0)
}

/// L²-normalized Hermite eigenfunction of −h²Δ + |x|² for a multi-index α,
/// u_α(x) = ∏_k (πh)^{-1/4}(2^{α_k} α_k!)^{-1/2} H_{α_k}(x_k/√h) e^{-x_k²/2h},
/// together with its eigenvalue (2|α| + n)h. Errors when the grid truncates
/// the state above 1e-12 of its peak.
pub fn hermite_state(
    alpha: &[usize],
    h: f64,
    l: f64,
    points: usize,
) -> Result<(GridFunction, f64)> {
    let n = alpha.len();
    if !(1..=2).contains(&n) {
        return Err(Error::Validation("multi-index length must be 1 or 2".into()));
    }
    let sqrt_h = h.sqrt();
    let norm_1d: Vec<f64> = alpha
        .iter()
        .map(|&m| {
            (std::f64::consts::PI * h).powf(-0.25)
                / (2f64.powi(m as i32) * factorial(m)).sqrt()
        })
        .collect();
    let u = GridFunction::from_fn(n, l, points, h, |x| {
        let mut v = 1.0;
        for k in 0..n {
            let t = x[k] / sqrt_h;
            v *= norm_1d[k] * hermite_poly(alpha[k], t) * (-0.5 * t * t).exp();
        }
        C64::new(v, 0.0)
    })?;
    let boundary = u.boundary_ratio();
    if boundary > 1e-12 {
        return Err(Error::SupportTruncated {
            boundary,
            peak: 1.0,
        });
    }
    let abs_alpha: usize = alpha.iter().sum();
    Ok((u, (2.0 * abs_alpha as f64 + n as f64) * h))
}

/// A polynomial potential V(x) = Σ c_k x^k with complex coefficients
/// (ascending powers), plus an optional subprincipal polynomial p₁.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    pub coeffs: Vec<C64>,
    pub subprincipal: Option<Vec<C64>>,
}

impl PotentialSpec {
    pub fn new(coeffs: Vec<C64>) -> Self {
        PotentialSpec {
            coeffs,
            subprincipal: None,
        }
    }

    /// V = x².
    pub fn oscillator() -> Self {
        PotentialSpec::new(vec![
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
        ])
    }

    /// V = c·x².
    pub fn quadratic(c: C64) -> Self {
        PotentialSpec::new(vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0), c])
    }

    pub fn eval(&self, x: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    fn eval_poly(coeffs: &[C64], x: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for &c in coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Grid report: sign of Re V and its boundary growth.
    pub fn validate_on_grid(&self, l: f64, points: usize) -> PotentialReport {
        let dx = 2.0 * l / (points - 1) as f64;
        let mut min_re = f64::INFINITY;
        for j in 0..points {
            let x = -l + j as f64 * dx;
            min_re = min_re.min(self.eval(x).re);
        }
        let edge = self.eval(l).re.min(self.eval(-l).re);
        let origin = self.eval(0.0).re;
        PotentialReport {
            re_nonneg: min_re >= -1e-12,
            min_re,
            boundary_re: edge,
            confining: edge > origin.max(0.0) + 1.0,
        }
    }

    pub fn to_json(&self) -> PotentialSpecJson {
        PotentialSpecJson {
            coeffs_re: self.coeffs.iter().map(|c| c.re).collect(),
            coeffs_im: self.coeffs.iter().map(|c| c.im).collect(),
        }
    }

    pub fn from_json(j: &PotentialSpecJson) -> Result<Self> {
        if j.coeffs_re.len() != j.coeffs_im.len() {
            return Err(Error::Validation(
                "coeffs_re and coeffs_im must have equal length".into(),
            ));
        }
        Ok(PotentialSpec::new(
            j.coeffs_re
                .iter()
                .zip(j.coeffs_im.iter())
                .map(|(&re, &im)| C64::new(re, im))
                .collect(),
        ))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PotentialReport {
    pub re_nonneg: bool,
    pub min_re: f64,
    pub boundary_re: f64,
    pub confining: bool,
}

/// JSON schema { "coeffs_re": [...], "coeffs_im": [...] }, ascending powers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialSpecJson {
    pub coeffs_re: Vec<f64>,
    pub coeffs_im: Vec<f64>,
}

/// Dense N×N matrix of P = −h²Δ + V(x) + h·p₁(x) on the uniform grid over
/// [−l, l]: 4th-order central-difference Laplacian with Dirichlet truncation
/// (off-grid values read as zero), diagonal potential.
pub fn discretize_schrodinger(
    v: &PotentialSpec,
    h: f64,
    l: f64,
    points: usize,
) -> Result<CMat> {
    if points < 5 {
        return Err(Error::Validation("need at least 5 grid points".into()));
    }
    if points > MAX_DENSE_N {
        return Err(Error::Validation(format!(
            "dense solve budget is N <= {MAX_DENSE_N}"
        )));
    }
    if h <= 0.0 || l <= 0.0 {
        return Err(Error::Validation("h and l must be positive".into()));
    }
    let dx = 2.0 * l / (points - 1) as f64;
    let scale = h * h / (12.0 * dx * dx);
    let mut p = Array2::zeros((points, points));
    for j in 0..points {
        // −h²·(−f_{j−2} + 16f_{j−1} − 30f_j + 16f_{j+1} − f_{j+2})/(12dx²)
        p[[j, j]] += C64::new(30.0 * scale, 0.0);
        for (off, coeff) in [(1isize, -16.0), (2, 1.0)] {
            for sgn in [-1isize, 1] {
                let k = j as isize + sgn * off;
                if k >= 0 && (k as usize) < points {
                    p[[j, k as usize]] += C64::new(coeff * scale, 0.0);
                }
            }
        }
        let x = -l + j as f64 * dx;
        let mut pot = v.eval(x);
        if let Some(p1) = &v.subprincipal {
            pot += PotentialSpec::eval_poly(p1, x) * h;
        }
        p[[j, j]] += pot;
    }
    Ok(p)
}

/// Eigenpair of a discretized operator with eigenvalue, grid-normalized
/// eigenfunction, and matrix residual.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalue: C64,
    pub eigenfunction: GridFunction,
    pub residual: f64,
    pub h: f64,
}

/// Eigenpair of minimal |λ| by inverse iteration at shift 0 (dense LU),
/// with a full dense eigensolve as fallback. The eigenfunction is normalized
/// in the grid L² norm and its phase is fixed by making the largest-modulus
/// sample real positive; the matrix residual ‖Pu − λu‖₂/‖u‖₂ must reach
/// 1e-8.
pub fn lowlying_eigenpair(pmat: &CMat, h: f64, l: f64) -> Result<EigenResult> {
    let n = pmat.nrows();
    if pmat.ncols() != n || n < 2 {
        return Err(Error::Validation("operator matrix must be square".into()));
    }
    let max_iter = 500;
    let mut best: Option<(C64, CVec, f64)> = None;
    if let Ok(lu) = pmat.factorize() {
        let dx = 2.0 * l / (n - 1) as f64;
        let mut b: CVec = Array1::from_shape_fn(n, |j| {
            let x = -l + j as f64 * dx;
            C64::new((-x * x / (2.0 * h)).exp(), 0.0)
        });
        normalize(&mut b);
        let mut iterations = 0;
        loop {
            iterations += 1;
            let w = lu
                .solve(&b)
                .map_err(|e| Error::Linalg(format!("inverse-iteration solve failed: {e}")))?;
            b = w;
            normalize(&mut b);
            let pb = pmat.dot(&b);
            let lambda = b.mapv(|z| z.conj()).dot(&pb);
            let resid = (&pb - &b.mapv(|z| z * lambda))
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>()
                .sqrt();
            if resid < 1e-11 * (1.0 + lambda.norm()) || iterations >= max_iter {
                best = Some((lambda, b, resid));
                break;
            }
        }
    }
    let good = match &best {
        Some((_, _, resid)) => *resid < 1e-8,
        None => false,
    };
    let (lambda, vec, residual) = if good {
        best.unwrap()
    } else {
        // fallback: full dense eigensolve, minimal |λ|
        let (eigs, vecs) = linalg::eig(pmat)?;
        let mut idx = 0;
        for k in 1..eigs.len() {
            if eigs[k].norm() < eigs[idx].norm() {
                idx = k;
            }
        }
        let mut v = vecs.column(idx).to_owned();
        normalize(&mut v);
        let pb = pmat.dot(&v);
        let lambda = eigs[idx];
        let resid = (&pb - &v.mapv(|z| z * lambda))
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        if resid >= 1e-8 {
            return Err(Error::NoConvergence {
                iterations: max_iter,
                residual: resid,
            });
        }
        (lambda, v, resid)
    };

    // grid L² normalization and deterministic phase
    let mut u = GridFunction {
        n: 1,
        l,
        points: n,
        values: vec.to_vec(),
        h,
    };
    let norm = lp_norm(&u, 2.0)?;
    if norm == 0.0 {
        return Err(Error::Linalg("eigenvector vanished".into()));
    }
    let mut pivot = 0usize;
    for (k, z) in u.values.iter().enumerate() {
        if z.norm() > u.values[pivot].norm() {
            pivot = k;
        }
    }
    let piv = u.values[pivot];
    let phase = piv.conj() / piv.norm();
    for z in &mut u.values {
        *z = *z * phase / norm;
    }
    Ok(EigenResult {
        eigenvalue: lambda,
        eigenfunction: u,
        residual,
        h,
    })
}

fn normalize(v: &mut CVec) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        for z in v.iter_mut() {
            *z /= norm;
        }
    }
}

/// JSON record for an eigenpair; the eigenfunction itself goes to a CSV
/// sidecar (see [`GridFunction::to_csv`]).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenResultJson {
    pub eigenvalue_re: f64,
    pub eigenvalue_im: f64,
    pub residual: f64,
    pub h: f64,
    pub grid: crate::fbi::GridFunctionHeader,
    pub eigenfunction_csv: String,
}

impl EigenResult {
    pub fn to_json(&self, csv_name: &str) -> EigenResultJson {
        EigenResultJson {
            eigenvalue_re: self.eigenvalue.re,
            eigenvalue_im: self.eigenvalue.im,
            residual: self.residual,
            h: self.h,
            grid: self.eigenfunction.header(),
            eigenfunction_csv: csv_name.to_string(),
        }
    }
}

/// Least-squares slope of log ‖u‖_p against log h, with R². Requires at
/// least 4 states spanning at least one decade in h.
pub fn lp_scaling_fit(states: &[(f64, GridFunction)], p: f64) -> Result<(f64, f64)> {
    if states.len() < 4 {
        return Err(Error::InsufficientData(
            "need at least 4 h values for a scaling fit".into(),
        ));
    }
    let hmax = states.iter().map(|s| s.0).fold(0.0f64, f64::max);
    let hmin = states.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    if hmax / hmin < 10.0 * (1.0 - 1e-9) {
        return Err(Error::InsufficientData(format!(
            "h values must span at least one decade (got ratio {})",
            hmax / hmin
        )));
    }
    let mut pts = Vec::with_capacity(states.len());
    for (h, u) in states {
        pts.push((h.ln(), lp_norm(u, p)?.ln()));
    }
    Ok(least_squares_slope(&pts))
}

/// Default Dirichlet box radius max(6√h·scale, 4).
pub fn default_operator_box(h: f64, scale: f64) -> f64 {
    (6.0 * h.sqrt() * scale).max(4.0)
}
