//! Best approximation and the approximation coefficients `δ`, `η`, `μ` of a
//! family of subcomplexes, measured against a fine reference complex.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use serde::Serialize;

use super::rates::{fit_slope, nonincreasing_with_coarse_slack, SlopeFit};
use crate::complex::{Degree, HilbertComplex};
use crate::derham::ProlongationMorphism;
use crate::error::{Error, Result};
use crate::linalg;
use crate::mixed::SolutionOperators;

/// `E(w) = min_c ‖w - I c‖_W` over the columns of `inject`, by the normal
/// equations in the Gram inner product of degree `k`.
pub fn best_approx_error(fine: &HilbertComplex, k: Degree, inject: &CsrMatrix<f64>, w: &DVector<f64>) -> Result<f64> {
    fine.check_degree(k)?;
    let m = fine.gram(k);
    if inject.nrows() != m.nrows() || w.len() != m.nrows() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: if w.len() != m.nrows() { w.len() } else { inject.nrows() },
        });
    }
    if inject.ncols() == 0 {
        return Ok(fine.w_norm(k, w));
    }
    let normal = linalg::to_dense(&(&(&inject.transpose() * m) * inject));
    let chol = normal.cholesky().ok_or(Error::RankDeficient)?;
    let c = chol.solve(&linalg::spmv_t(inject, &linalg::spmv(m, w)));
    let d = w - linalg::spmv(inject, &c);
    Ok(fine.w_norm(k, &d))
}

/// One measured operator norm.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Measured {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoefficientLevel {
    pub h: f64,
    /// `‖(I - π_h) K‖`
    pub delta: Measured,
    /// `max_j {‖(I - π_h) d K‖, ‖(I - π_h) d* K‖}` over the degrees present.
    pub eta: Measured,
    /// `‖(I - π_h) P_H‖`
    pub mu: Measured,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoefficientReport {
    pub degree: Degree,
    pub levels: Vec<CoefficientLevel>,
    pub delta_order: Option<SlopeFit>,
    pub eta_order: Option<SlopeFit>,
    pub mu_order: Option<SlopeFit>,
    /// Per coefficient: `(non-increasing, single inversion at the coarsest level)`.
    pub monotone: [(bool, bool); 3],
}

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 20_000;

/// `‖T‖` for a dense `T: W^a → W^b` by power iteration on `T*T`, where
/// `T* = M_a⁻¹ Tᵀ M_b`.
fn operator_norm(t: &DMatrix<f64>, m_a: &DMatrix<f64>, m_b: &DMatrix<f64>) -> Result<Measured> {
    let n = t.ncols();
    if n == 0 || t.nrows() == 0 {
        return Ok(Measured {
            value: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let chol = m_a.clone().cholesky().ok_or(Error::Factorization {
        condition_estimate: f64::INFINITY,
    })?;
    let a = chol.solve(&(t.transpose() * m_b * t));
    let start = DVector::from_fn(n, |i, _| 1.0 + ((i * 7919) % 13) as f64 / 13.0);
    let est = linalg::power_iteration(|x| &a * x, |x, y| x.dot(&(m_a * y)), start, POWER_TOL, POWER_MAX_ITER);
    Ok(Measured {
        value: est.value.max(0.0).sqrt(),
        iterations: est.iterations,
        converged: est.converged,
    })
}

/// Dense solution operator columns: for each unit `f ∈ W^k`, `(σ, u)`.
fn solution_columns(c: &HilbertComplex, k: Degree) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let ops = SolutionOperators::new(c, k)?;
    let n = c.dim(k);
    let ns = if c.contains(k - 1) { c.dim(k - 1) } else { 0 };
    let mut sigma = DMatrix::zeros(ns, n);
    let mut u = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        let s = ops.solve(&e)?;
        if ns > 0 {
            sigma.set_column(j, &s.sigma);
        }
        u.set_column(j, &s.u);
    }
    Ok((sigma, u))
}

/// Measures `δ`, `η`, `μ` at degree `k` for each coarse level, given as
/// `(h, morphism into the fine complex)`.
pub fn measure_coefficients(
    fine: &HilbertComplex,
    levels: &[(f64, ProlongationMorphism)],
    k: Degree,
) -> Result<CoefficientReport> {
    fine.check_degree(k)?;
    let gram = |d: Degree| linalg::to_dense(fine.gram(d));
    let has = |d: Degree| fine.contains(d);

    // operators on the fine complex: (source degree, target degree, matrix)
    let (sig_k, u_k) = solution_columns(fine, k)?;
    let mut eta_ops: Vec<(Degree, Degree, DMatrix<f64>)> = Vec::new();
    if has(k + 1) {
        eta_ops.push((k, k + 1, linalg::spmm(fine.diff(k), &u_k)));
    }
    if has(k - 1) {
        eta_ops.push((k, k - 1, sig_k));
        let (_, u_km1) = solution_columns(fine, k - 1)?;
        eta_ops.push((k - 1, k, linalg::spmm(fine.diff(k - 1), &u_km1)));
    }
    if has(k + 1) {
        let (sig_kp1, _) = solution_columns(fine, k + 1)?;
        eta_ops.push((k + 1, k, sig_kp1));
    }
    let h_basis = fine.harmonic_basis(k)?;
    let p_h = h_basis * (h_basis.transpose() * gram(k));

    let grams: Vec<(Degree, DMatrix<f64>)> = (k - 1..=k + 1).filter(|&d| has(d)).map(|d| (d, gram(d))).collect();
    let g = |d: Degree| &grams.iter().find(|(e, _)| *e == d).expect("degree present").1;

    let mut out = Vec::with_capacity(levels.len());
    for (h, morph) in levels {
        let defect = |d: Degree| -> DMatrix<f64> {
            let ip = linalg::to_dense(&(morph.inject(d) * morph.project(d)));
            DMatrix::identity(ip.nrows(), ip.ncols()) - ip
        };
        let e_k = defect(k);
        let delta = operator_norm(&(&e_k * &u_k), g(k), g(k))?;
        let mu = operator_norm(&(&e_k * &p_h), g(k), g(k))?;
        let mut eta = Measured {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
        for (src, dst, t) in &eta_ops {
            let m = operator_norm(&(defect(*dst) * t), g(*src), g(*dst))?;
            if m.value > eta.value {
                eta = Measured {
                    converged: eta.converged && m.converged,
                    ..m
                };
            } else {
                eta.converged &= m.converged;
            }
        }
        out.push(CoefficientLevel { h: *h, delta, eta, mu });
    }
    let hs: Vec<f64> = out.iter().map(|l| l.h).collect();
    let series = |f: fn(&CoefficientLevel) -> f64| out.iter().map(f).collect::<Vec<f64>>();
    let (d, e, m) = (series(|l| l.delta.value), series(|l| l.eta.value), series(|l| l.mu.value));
    Ok(CoefficientReport {
        degree: k,
        delta_order: fit_slope(&hs, &d),
        eta_order: fit_slope(&hs, &e),
        mu_order: fit_slope(&hs, &m),
        monotone: [
            nonincreasing_with_coarse_slack(&d),
            nonincreasing_with_coarse_slack(&e),
            nonincreasing_with_coarse_slack(&m),
        ],
        levels: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derham::{refine_uniform, unit_interval_mesh, whitney_complex, Flavor};

    #[test]
    fn best_approximation_of_member_and_orthogonal_vectors() {
        let mesh = unit_interval_mesh(4).unwrap();
        let (fine, m) = refine_uniform(&mesh, Flavor::Natural).unwrap();
        let wf = whitney_complex(&fine, Flavor::Natural).unwrap();
        let c = wf.complex();
        let i = m.inject(0);
        let member = linalg::spmv(i, &DVector::from_fn(5, |j, _| (j as f64).cos()));
        assert!(best_approx_error(c, 0, i, &member).unwrap() < 1e-12);

        // W-orthogonal to the coarse image: solve for a vector in ker(iᵀ M)
        let a = linalg::to_dense(&(&i.transpose() * c.gram(0)));
        let z = linalg::null_space(&a);
        let w = z.column(0).into_owned();
        let e = best_approx_error(c, 0, i, &w).unwrap();
        assert!((e - c.w_norm(0, &w)).abs() < 1e-12);
    }

    #[test]
    fn operator_norm_matches_generalized_eigenvalue() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let ma = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let mb = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let got = operator_norm(&t, &ma, &mb).unwrap();
        let (vals, _) = linalg::gen_sym_eigen(&(t.transpose() * &mb * &t), &ma).unwrap();
        assert!((got.value - vals[1].sqrt()).abs() < 1e-10);
    }
}
