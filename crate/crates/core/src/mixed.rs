//! Linear mixed Hodge-Laplacian problem and its solution operators.
//!
//! Unknowns are ordered `(σ, u, p)` with `σ ∈ W^{k-1}`, `u ∈ W^k` and `p`
//! given by coefficients in the W-orthonormal harmonic basis `H`. With
//! `A = M^{k-1}`, `C = M^k D^{k-1}`, `S = (D^k)ᵀ M^{k+1} D^k`, `E = M^k H`,
//! the stored matrix reproduces the bilinear form row by row:
//!
//! ```text
//! τ: [ A  -Cᵀ   0 ]   ⟨σ,τ⟩ - ⟨u,dτ⟩
//! v: [ C   S    E ]   ⟨dσ,v⟩ + ⟨du,dv⟩ + ⟨p,v⟩
//! q: [ 0  -Eᵀ   0 ]   -⟨u,q⟩
//! ```
//!
//! Right-hand sides are load vectors `b_i = ⟨f, φ_i⟩`. Flipping the sign of the
//! τ and q rows gives the symmetric indefinite form used by MINRES.

use nalgebra::{Cholesky, DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

use crate::complex::{Degree, HilbertComplex};
use crate::error::{Error, Result};
use crate::linalg::{self, SparseLu};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LinearSolver {
    /// Sparse LU on the stored saddle matrix.
    Direct,
    /// MINRES on the symmetric form.
    Minres { tol: f64, max_iter: usize },
}

impl Default for LinearSolver {
    fn default() -> Self {
        LinearSolver::Direct
    }
}

impl LinearSolver {
    pub fn minres() -> Self {
        LinearSolver::Minres {
            tol: 1e-12,
            max_iter: 20_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub degree: Degree,
    pub n_sigma: usize,
    pub n_u: usize,
    pub n_p: usize,
    pub matrix: CsrMatrix<f64>,
    pub harmonic: DMatrix<f64>,
    /// `blockdiag(V-Gram of W^{k-1}, V-Gram of W^k, I)`.
    pub product_gram: CsrMatrix<f64>,
}

impl SaddleSystem {
    pub fn size(&self) -> usize {
        self.n_sigma + self.n_u + self.n_p
    }

    /// Embeds a load vector on `W^k` as `[0; b; 0]`.
    pub fn rhs(&self, load: &DVector<f64>) -> DVector<f64> {
        let mut r = DVector::zeros(self.size());
        r.rows_mut(self.n_sigma, self.n_u).copy_from(load);
        r
    }

    pub fn split(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        (
            x.rows(0, self.n_sigma).into_owned(),
            x.rows(self.n_sigma, self.n_u).into_owned(),
            x.rows(self.n_sigma + self.n_u, self.n_p).into_owned(),
        )
    }

    pub fn join(&self, sigma: &DVector<f64>, u: &DVector<f64>, pc: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(self.size());
        x.rows_mut(0, self.n_sigma).copy_from(sigma);
        x.rows_mut(self.n_sigma, self.n_u).copy_from(u);
        x.rows_mut(self.n_sigma + self.n_u, self.n_p).copy_from(pc);
        x
    }

    /// `B(x; y) = yᵀ (stored matrix) x`.
    pub fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        y.dot(&linalg::spmv(&self.matrix, x))
    }

    fn row_sign(&self, i: usize) -> f64 {
        if i < self.n_sigma || i >= self.n_sigma + self.n_u {
            -1.0
        } else {
            1.0
        }
    }

    /// Symmetric form `diag(-I, I, -I) · matrix`.
    pub fn symmetric_matrix(&self) -> CsrMatrix<f64> {
        let trips = self
            .matrix
            .triplet_iter()
            .map(|(i, j, v)| (i, j, self.row_sign(i) * v));
        linalg::csr_from_triplets(self.size(), self.size(), trips)
    }

    /// Inf-sup constant of the form in the `V × V × W` product norm: smallest
    /// singular value of `L⁻¹ B L⁻ᵀ` with `L Lᵀ` the product Gram.
    pub fn inf_sup_constant(&self) -> Result<f64> {
        let n = self.size();
        if n == 0 {
            return Ok(f64::INFINITY);
        }
        let g = linalg::to_dense(&self.product_gram);
        let chol = Cholesky::new(g).ok_or(Error::Factorization {
            condition_estimate: f64::INFINITY,
        })?;
        let l = chol.l();
        let b = linalg::to_dense(&self.matrix);
        let fail = || Error::Factorization {
            condition_estimate: f64::INFINITY,
        };
        let x = l.solve_lower_triangular(&b).ok_or_else(fail)?;
        let y = l.solve_lower_triangular(&x.transpose()).ok_or_else(fail)?;
        let sv = linalg::singular_values(&y);
        Ok(sv[sv.len() - 1])
    }
}

pub fn assemble_mixed(c: &HilbertComplex, k: Degree) -> Result<SaddleSystem> {
    c.check_degree(k)?;
    let h = c.harmonic_basis(k)?.clone();
    let m = c.gram(k);
    let a = c.gram(k - 1);
    let dprev = c.diff(k - 1);
    let cm = m * dprev;
    let s = {
        let d = c.diff(k);
        &(&d.transpose() * c.gram(k + 1)) * d
    };
    let e = linalg::spmm(m, &h);
    let (ns, nu, np) = (c.dim(k - 1), c.dim(k), h.ncols());
    let mut trips = Vec::with_capacity(a.nnz() + 2 * cm.nnz() + s.nnz() + 2 * nu * np);
    trips.extend(a.triplet_iter().map(|(i, j, v)| (i, j, *v)));
    for (i, j, v) in cm.triplet_iter() {
        // C in the v rows, -Cᵀ in the τ rows
        trips.push((ns + i, j, *v));
        trips.push((j, ns + i, -*v));
    }
    trips.extend(s.triplet_iter().map(|(i, j, v)| (ns + i, ns + j, *v)));
    for i in 0..nu {
        for j in 0..np {
            let v = e[(i, j)];
            if v != 0.0 {
                trips.push((ns + i, ns + nu + j, v));
                trips.push((ns + nu + j, ns + i, -v));
            }
        }
    }
    let n = ns + nu + np;
    let matrix = linalg::csr_from_triplets(n, n, trips);
    let gs = c.graph_gram(k - 1);
    let gu = c.graph_gram(k);
    let mut pg = Vec::new();
    pg.extend(gs.triplet_iter().map(|(i, j, v)| (i, j, *v)));
    pg.extend(gu.triplet_iter().map(|(i, j, v)| (ns + i, ns + j, *v)));
    pg.extend((0..np).map(|j| (ns + nu + j, ns + nu + j, 1.0)));
    Ok(SaddleSystem {
        degree: k,
        n_sigma: ns,
        n_u: nu,
        n_p: np,
        matrix,
        harmonic: h,
        product_gram: linalg::csr_from_triplets(n, n, pg),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MixedSolution {
    pub degree: Degree,
    pub sigma: DVector<f64>,
    pub u: DVector<f64>,
    /// Assembled `p = H p_coeffs`.
    pub p: DVector<f64>,
    pub p_coeffs: DVector<f64>,
    /// Max normalized residual over all basis test functions.
    pub residual_norm: f64,
    /// Max normalized residual per equation (τ, v, q).
    pub residuals: [f64; 3],
    /// `(‖σ‖_V + ‖u‖_V + ‖p‖) / ‖f‖`, zero when `f = 0`.
    pub stability_ratio: f64,
}

impl MixedSolution {
    /// `u + p`.
    pub fn bold_u(&self) -> DVector<f64> {
        &self.u + &self.p
    }
}

/// Factorized solution operators `K`, `**K**` and `**L**` for one degree.
pub struct SolutionOperators<'a> {
    pub complex: &'a HilbertComplex,
    pub system: SaddleSystem,
    solver: LinearSolver,
    lu: Option<SparseLu>,
    symmetric: Option<CsrMatrix<f64>>,
}

impl<'a> SolutionOperators<'a> {
    pub fn new(c: &'a HilbertComplex, k: Degree) -> Result<Self> {
        Self::with_solver(c, k, LinearSolver::Direct)
    }

    pub fn with_solver(c: &'a HilbertComplex, k: Degree, solver: LinearSolver) -> Result<Self> {
        let system = assemble_mixed(c, k)?;
        let (lu, symmetric) = match solver {
            LinearSolver::Direct => (Some(SparseLu::new(&system.matrix)?), None),
            LinearSolver::Minres { .. } => (None, Some(system.symmetric_matrix())),
        };
        Ok(Self {
            complex: c,
            system,
            solver,
            lu,
            symmetric,
        })
    }

    pub fn degree(&self) -> Degree {
        self.system.degree
    }

    pub fn harmonic(&self) -> &DMatrix<f64> {
        &self.system.harmonic
    }

    fn solve_raw(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let x = match (&self.lu, self.solver) {
            (Some(lu), _) => lu.solve(rhs),
            (None, LinearSolver::Minres { tol, max_iter }) => {
                let sym = self.symmetric.as_ref().expect("symmetric form built for MINRES");
                let signed = DVector::from_fn(rhs.len(), |i, _| self.system.row_sign(i) * rhs[i]);
                let out = linalg::minres(|x| linalg::spmv(sym, x), &signed, tol, max_iter);
                if !out.converged {
                    return Err(Error::NoConvergence {
                        what: "MINRES",
                        estimate: out.relative_residual,
                        iterations: out.iterations,
                    });
                }
                out.x
            }
            (None, LinearSolver::Direct) => unreachable!(),
        };
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Factorization {
                condition_estimate: self.lu.as_ref().map_or(f64::INFINITY, SparseLu::condition_estimate),
            });
        }
        Ok(x)
    }

    /// Solves the mixed problem for the load vector `b_i = ⟨f, φ_i⟩`.
    pub fn solve_load(&self, load: &DVector<f64>) -> Result<MixedSolution> {
        self.check_len(load.len())?;
        let x = self.solve_raw(&self.system.rhs(load))?;
        Ok(self.package(&x, load, None))
    }

    /// Solves the mixed problem for `f` given by coefficients in `W^k`.
    pub fn solve(&self, f: &DVector<f64>) -> Result<MixedSolution> {
        self.check_len(f.len())?;
        self.solve_load(&self.load_of(f))
    }

    pub fn load_of(&self, f: &DVector<f64>) -> DVector<f64> {
        linalg::spmv(self.complex.gram(self.degree()), f)
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.system.n_u {
            return Err(Error::DimensionMismatch {
                expected: self.system.n_u,
                found: n,
            });
        }
        Ok(())
    }

    /// Dual norm `‖f‖ = sqrt(bᵀ M⁻¹ b)` of a load vector.
    pub fn load_norm(&self, load: &DVector<f64>) -> f64 {
        let k = self.degree();
        match self.complex.gram_solve(k, load) {
            Ok(f) => load.dot(&f).max(0.0).sqrt(),
            Err(_) => f64::NAN,
        }
    }

    /// Builds a solution record from a raw `(σ, u, p)` vector, measuring the
    /// residual of `B(x; ·) = ⟨b, ·⟩ - ⟨extra, ·⟩` over basis test functions.
    pub(crate) fn package(&self, x: &DVector<f64>, load: &DVector<f64>, extra: Option<&DVector<f64>>) -> MixedSolution {
        let sys = &self.system;
        let (sigma, u, pc) = sys.split(x);
        let p = if sys.n_p == 0 {
            DVector::zeros(sys.n_u)
        } else {
            &sys.harmonic * &pc
        };
        let mut r = linalg::spmv(&sys.matrix, x) - sys.rhs(load);
        if let Some(e) = extra {
            let mut rows = r.rows_mut(sys.n_sigma, sys.n_u);
            rows += e;
        }
        let k = self.degree();
        let c = self.complex;
        let f_norm = self.load_norm(load);
        let size = c.v_norm(k - 1, &sigma) + c.v_norm(k, &u) + c.w_norm(k, &p);
        let scale = size + f_norm;
        let gs = c.graph_gram(k - 1);
        let gu = c.graph_gram(k);
        let diag = |g: &CsrMatrix<f64>, i: usize| {
            g.get_entry(i, i).map_or(0.0, |e| e.into_value()).max(0.0).sqrt()
        };
        let mut residuals = [0.0f64; 3];
        for i in 0..sys.size() {
            let (block, norm) = if i < sys.n_sigma {
                (0, diag(&gs, i))
            } else if i < sys.n_sigma + sys.n_u {
                (1, diag(&gu, i - sys.n_sigma))
            } else {
                (2, 1.0)
            };
            let denom = if scale > 0.0 { scale * norm } else { 1.0 };
            residuals[block] = residuals[block].max(r[i].abs() / denom);
        }
        MixedSolution {
            degree: k,
            sigma,
            u,
            p,
            p_coeffs: pc,
            residual_norm: residuals.iter().copied().fold(0.0, f64::max),
            residuals,
            stability_ratio: if f_norm > 0.0 { size / f_norm } else { 0.0 },
        }
    }

    /// `K f = u` for coefficient data `f`.
    pub fn apply_k(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.solve(f)?.u)
    }

    /// `**K** f = u + P_H f` for coefficient data `f`.
    pub fn apply_bold_k(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.solve(f)?.bold_u())
    }

    /// `**K**` applied to a load vector.
    pub fn apply_bold_k_load(&self, load: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.solve_load(load)?.bold_u())
    }

    /// `**L** x = D_{k-1} D*_k x + D*_{k+1} D_k x + P_H x`.
    pub fn apply_bold_l(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let c = self.complex;
        let k = self.degree();
        let dd_star = c.apply_diff(k - 1, &c.apply_adjoint(k, x)?);
        let dx = c.apply_diff(k, x);
        let d_star_d = c.gram_solve(k, &linalg::spmv_t(c.diff(k), &linalg::spmv(c.gram(k + 1), &dx)))?;
        let ph = self.project_harmonic(x);
        Ok(dd_star + d_star_d + ph)
    }

    pub fn project_harmonic(&self, x: &DVector<f64>) -> DVector<f64> {
        let h = &self.system.harmonic;
        if h.ncols() == 0 {
            return DVector::zeros(x.len());
        }
        h * (h.transpose() * self.load_of(x))
    }

    /// `‖w‖²_{V∩V*} = ‖d* w‖² + ‖d w‖² + ‖P_H w‖²`.
    pub fn vv_norm_sq(&self, w: &DVector<f64>) -> Result<f64> {
        let c = self.complex;
        let k = self.degree();
        let mw = self.load_of(w);
        let dtmw = linalg::spmv_t(c.diff(k - 1), &mw);
        let star = dtmw.dot(&c.gram_solve(k - 1, &dtmw)?);
        let dw = c.apply_diff(k, w);
        let d = c.w_inner(k + 1, &dw, &dw);
        let h = &self.system.harmonic;
        let ph = if h.ncols() == 0 {
            0.0
        } else {
            (h.transpose() * &mw).norm_squared()
        };
        Ok((star + d + ph).max(0.0))
    }

    pub fn vv_norm(&self, w: &DVector<f64>) -> Result<f64> {
        Ok(self.vv_norm_sq(w)?.sqrt())
    }

    /// Dense matrix of the `V∩V*` inner product (the unmixed system matrix).
    pub fn unmixed_matrix(&self) -> Result<DMatrix<f64>> {
        let c = self.complex;
        let k = self.degree();
        let m = c.gram(k);
        let d = c.diff(k);
        let s = linalg::to_dense(&(&(&d.transpose() * c.gram(k + 1)) * d));
        let md = linalg::to_dense(&(m * c.diff(k - 1)));
        let mut star = DMatrix::zeros(c.dim(k - 1), c.dim(k));
        for j in 0..md.nrows() {
            let row = md.row(j).transpose();
            star.set_column(j, &c.gram_solve(k - 1, &row)?);
        }
        let dstar = &md * star;
        let mh = linalg::spmm(m, &self.system.harmonic);
        Ok(s + dstar + &mh * mh.transpose())
    }

    /// Solves the SPD unmixed problem `⟨**u**, v⟩_{V∩V*} = ⟨f, v⟩`.
    pub fn unmixed_solve(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(f.len())?;
        let a = self.unmixed_matrix()?;
        let chol = Cholesky::new(a).ok_or(Error::Factorization {
            condition_estimate: f64::INFINITY,
        })?;
        Ok(chol.solve(&self.load_of(f)))
    }

    /// `‖**K**‖` in the W-norm by power iteration on the W-self-adjoint,
    /// positive operator `**K**` (tol 1e-8, at most 10000 iterations).
    pub fn operator_norm_k(&self) -> Result<linalg::PowerEstimate> {
        let c = self.complex;
        let k = self.degree();
        let n = c.dim(k);
        let start = DVector::from_fn(n, |i, _| 1.0 + ((i * 7919) % 13) as f64 / 13.0);
        let failure = std::cell::Cell::new(None);
        let est = linalg::power_iteration(
            |x| match self.apply_bold_k(x) {
                Ok(y) => y,
                Err(e) => {
                    failure.set(Some(e));
                    DVector::zeros(n)
                }
            },
            |x, y| c.w_inner(k, x, y),
            start,
            1e-8,
            10_000,
        );
        if let Some(e) = failure.take() {
            return Err(e);
        }
        if !est.converged {
            return Err(Error::NoConvergence {
                what: "power iteration for the norm of K",
                estimate: est.value,
                iterations: est.iterations,
            });
        }
        Ok(est)
    }
}

pub fn solve_mixed_linear(c: &HilbertComplex, k: Degree, f: &DVector<f64>) -> Result<MixedSolution> {
    SolutionOperators::new(c, k)?.solve(f)
}

pub fn inf_sup_constant(sys: &SaddleSystem) -> Result<f64> {
    sys.inf_sup_constant()
}
