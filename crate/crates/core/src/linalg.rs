//! Dense and sparse linear-algebra helpers shared by every module.
//!
//! Subspace computations (kernels, ranges, ranks) go through a singular value
//! decomposition with the scale-invariant rank tolerance [`RANK_TOL`] times the
//! largest singular value. Sparse direct solves are delegated to `faer`.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Relative singular-value cutoff for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

pub fn csr_from_triplets(
    nrows: usize,
    ncols: usize,
    triplets: impl IntoIterator<Item = (usize, usize, f64)>,
) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(nrows, ncols);
    for (i, j, v) in triplets {
        coo.push(i, j, v);
    }
    CsrMatrix::from(&coo)
}

pub fn csr_from_dense(a: &DMatrix<f64>) -> CsrMatrix<f64> {
    let mut trips = Vec::new();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let v = a[(i, j)];
            if v != 0.0 {
                trips.push((i, j, v));
            }
        }
    }
    csr_from_triplets(a.nrows(), a.ncols(), trips)
}

pub fn to_dense(a: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplet_iter() {
        d[(i, j)] += *v;
    }
    d
}

pub fn identity_csr(n: usize) -> CsrMatrix<f64> {
    csr_from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)))
}

/// `A x` for a CSR matrix.
pub fn spmv(a: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(a.ncols(), x.len());
    let mut y = DVector::zeros(a.nrows());
    for (i, row) in a.row_iter().enumerate() {
        let mut acc = 0.0;
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            acc += v * x[j];
        }
        y[i] = acc;
    }
    y
}

/// `Aᵀ x` for a CSR matrix.
pub fn spmv_t(a: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(a.nrows(), x.len());
    let mut y = DVector::zeros(a.ncols());
    for (i, row) in a.row_iter().enumerate() {
        let xi = x[i];
        if xi == 0.0 {
            continue;
        }
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            y[j] += v * xi;
        }
    }
    y
}

/// Sparse times dense.
pub fn spmm(a: &CsrMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    for (i, row) in a.row_iter().enumerate() {
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            for c in 0..b.ncols() {
                out[(i, c)] += v * b[(j, c)];
            }
        }
    }
    out
}

pub fn max_abs(a: &CsrMatrix<f64>) -> f64 {
    a.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn frobenius(a: &CsrMatrix<f64>) -> f64 {
    a.values().iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn is_integer_valued(a: &CsrMatrix<f64>) -> bool {
    a.values().iter().all(|v| v.fract() == 0.0 && v.abs() < 1e15)
}

/// `xᵀ M y`.
pub fn w_inner(m: &CsrMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    x.dot(&spmv(m, y))
}

pub fn w_norm(m: &CsrMatrix<f64>, x: &DVector<f64>) -> f64 {
    w_inner(m, x, x).max(0.0).sqrt()
}

fn sorted_svd(a: DMatrix<f64>, u: bool, v: bool) -> (Vec<f64>, Option<DMatrix<f64>>, Option<DMatrix<f64>>) {
    let svd = SVD::new(a, u, v);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv = order.iter().map(|&i| svd.singular_values[i]).collect();
    let uu = svd.u.map(|m| DMatrix::from_fn(m.nrows(), order.len(), |r, c| m[(r, order[c])]));
    let vt = svd
        .v_t
        .map(|m| DMatrix::from_fn(order.len(), m.ncols(), |r, c| m[(order[r], c)]));
    (sv, uu, vt)
}

fn cutoff(sv: &[f64]) -> f64 {
    RANK_TOL * sv.first().copied().unwrap_or(0.0)
}

/// Singular values of `a` in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    sorted_svd(a.clone(), false, false).0
}

pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    let sv = singular_values(a);
    let tol = cutoff(&sv);
    sv.iter().filter(|&&s| s > tol && s > 0.0).count()
}

/// Orthonormal (Euclidean) basis of `ker a`, one vector per column.
pub fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m == 0 {
        return DMatrix::identity(n, n);
    }
    let padded = if m < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let (sv, _, vt) = sorted_svd(padded, false, true);
    let vt = vt.expect("requested V");
    let tol = cutoff(&sv);
    let idx: Vec<usize> = (0..sv.len()).filter(|&i| !(sv[i] > tol && sv[i] > 0.0)).collect();
    DMatrix::from_fn(n, idx.len(), |r, c| vt[(idx[c], r)])
}

/// Orthonormal (Euclidean) basis of `range a`, one vector per column.
pub fn range_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return DMatrix::zeros(m, 0);
    }
    let (sv, u, _) = sorted_svd(a.clone(), true, false);
    let u = u.expect("requested U");
    let tol = cutoff(&sv);
    let idx: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > tol && sv[i] > 0.0).collect();
    DMatrix::from_fn(m, idx.len(), |r, c| u[(r, idx[c])])
}

/// Modified Gram–Schmidt in the inner product `⟨x, y⟩ = xᵀ M y`, with one
/// reorthogonalization pass. Columns that collapse below the rank tolerance
/// are dropped.
pub fn orthonormalize(basis: &DMatrix<f64>, gram: &CsrMatrix<f64>) -> DMatrix<f64> {
    let n = basis.nrows();
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(basis.ncols());
    let scale = (0..basis.ncols())
        .map(|j| w_norm(gram, &basis.column(j).into_owned()))
        .fold(0.0_f64, f64::max);
    for j in 0..basis.ncols() {
        let mut v = basis.column(j).into_owned();
        for _ in 0..2 {
            for q in &out {
                let c = w_inner(gram, q, &v);
                v.axpy(-c, q, 1.0);
            }
        }
        let nv = w_norm(gram, &v);
        if nv > RANK_TOL * scale && nv > 0.0 {
            out.push(v / nv);
        }
    }
    let mut m = DMatrix::zeros(n, out.len());
    for (j, v) in out.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sym_eigen(a: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let sym = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    sym_eigen(a.clone()).0.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Generalized symmetric-definite eigenproblem `A x = λ B x`, ascending.
/// Eigenvectors are `B`-orthonormal.
pub fn gen_sym_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
    }
    let chol = Cholesky::new(b.clone()).ok_or(Error::Factorization {
        condition_estimate: f64::INFINITY,
    })?;
    let l = chol.l();
    let linv_a = l
        .solve_lower_triangular(a)
        .ok_or(Error::Factorization { condition_estimate: f64::INFINITY })?;
    let c = l
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or(Error::Factorization { condition_estimate: f64::INFINITY })?;
    let (vals, q) = sym_eigen(c);
    let vecs = l
        .transpose()
        .solve_upper_triangular(&q)
        .ok_or(Error::Factorization { condition_estimate: f64::INFINITY })?;
    Ok((vals, vecs))
}

/// Largest principal angle between `span(a)` and `span(b)` in the inner
/// product `gram`. Returns π/2 when the dimensions differ.
pub fn largest_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>, gram: &CsrMatrix<f64>) -> f64 {
    let qa = orthonormalize(a, gram);
    let qb = orthonormalize(b, gram);
    if qa.ncols() != qb.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if qa.ncols() == 0 {
        return 0.0;
    }
    // sin θ_max = ‖(I - P_a) Q_b‖, which stays accurate for tiny angles
    let resid = &qb - &qa * (qa.transpose() * spmm(gram, &qb));
    let rgr = resid.transpose() * spmm(gram, &resid);
    let s2 = sym_eigen(rgr).0.iter().copied().fold(0.0, f64::max);
    s2.sqrt().min(1.0).asin()
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in `[-1, 1)`.
pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

fn to_faer(a: &CsrMatrix<f64>) -> Result<SparseColMat<usize, f64>> {
    let trips: Vec<Triplet<usize, usize, f64>> =
        a.triplet_iter().map(|(i, j, v)| Triplet::new(i, j, *v)).collect();
    SparseColMat::try_new_from_triplets(a.nrows(), a.ncols(), &trips).map_err(|_| Error::Factorization {
        condition_estimate: f64::NAN,
    })
}

fn faer_solve<S: Solve<f64>>(solver: &S, b: &DVector<f64>) -> DVector<f64> {
    let rhs = faer::Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
    let x = solver.solve(&rhs);
    DVector::from_fn(b.len(), |i, _| x[(i, 0)])
}

fn norm1(a: &CsrMatrix<f64>) -> f64 {
    let mut cols = vec![0.0; a.ncols()];
    for (_, j, v) in a.triplet_iter() {
        cols[j] += v.abs();
    }
    cols.into_iter().fold(0.0, f64::max)
}

/// Sparse LU with partial pivoting; used for the indefinite saddle systems.
pub struct SparseLu {
    n: usize,
    norm1: f64,
    lu: Option<Lu<usize, f64>>,
}

impl SparseLu {
    pub fn new(a: &CsrMatrix<f64>) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols(), "LU needs a square matrix");
        let n = a.nrows();
        if n == 0 {
            return Ok(Self { n, norm1: 0.0, lu: None });
        }
        let lu = to_faer(a)?.sp_lu().map_err(|_| Error::Factorization {
            condition_estimate: f64::INFINITY,
        })?;
        let this = Self {
            n,
            norm1: norm1(a),
            lu: Some(lu),
        };
        let probe = this.solve(&DVector::from_element(n, 1.0));
        if !probe.iter().all(|v| v.is_finite()) {
            return Err(Error::Factorization {
                condition_estimate: f64::INFINITY,
            });
        }
        Ok(this)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match &self.lu {
            Some(lu) => faer_solve(lu, b),
            None => DVector::zeros(0),
        }
    }

    /// Crude 1-norm condition estimate from a few solves against fixed vectors.
    pub fn condition_estimate(&self) -> f64 {
        if self.n == 0 {
            return 1.0;
        }
        let mut rng = seeded_rng(0x5eed);
        let mut inv = 0.0_f64;
        for _ in 0..3 {
            let b = random_vector(&mut rng, self.n);
            let x = self.solve(&b);
            inv = inv.max(x.lp_norm(1) / b.lp_norm(1));
        }
        self.norm1 * inv
    }
}

/// Sparse Cholesky for SPD matrices.
pub struct SparseCholesky {
    n: usize,
    llt: Option<Llt<usize, f64>>,
}

impl SparseCholesky {
    pub fn new(a: &CsrMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Ok(Self { n, llt: None });
        }
        let llt = to_faer(a)?
            .sp_cholesky(faer::Side::Lower)
            .map_err(|_| Error::Factorization {
                condition_estimate: f64::INFINITY,
            })?;
        Ok(Self { n, llt: Some(llt) })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match &self.llt {
            Some(llt) => faer_solve(llt, b),
            None => DVector::zeros(0),
        }
    }
}

/// Matrices up to this dimension are handled with dense decompositions.
pub const DENSE_LIMIT: usize = 1500;

/// Extreme eigenvalues `(λmin, λmax)` of a symmetric matrix. Large matrices
/// are treated with a sparse Cholesky factorization plus inverse/forward power
/// iteration; a failed factorization falls back to the dense route.
pub fn extreme_eigenvalues(a: &CsrMatrix<f64>) -> (f64, f64) {
    let n = a.nrows();
    if n == 0 {
        return (f64::INFINITY, 0.0);
    }
    if n > DENSE_LIMIT {
        if let Ok(chol) = SparseCholesky::new(a) {
            let start = DVector::from_fn(n, |i, _| 1.0 + (i % 7) as f64 * 0.1);
            let inv = power_iteration(|x| chol.solve(x), |x, y| x.dot(y), start.clone(), 1e-8, 2000);
            let fwd = power_iteration(|x| spmv(a, x), |x, y| x.dot(y), start, 1e-8, 2000);
            if inv.value > 0.0 && inv.value.is_finite() {
                return (1.0 / inv.value, fwd.value);
            }
        }
    }
    let (vals, _) = sym_eigen(to_dense(a));
    (vals[0], vals[n - 1])
}

#[derive(Clone, Debug)]
pub struct MinresOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Unpreconditioned MINRES for symmetric (possibly indefinite) operators.
pub fn minres(
    apply: impl Fn(&DVector<f64>) -> DVector<f64>,
    b: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> MinresOutcome {
    let n = b.len();
    let mut x = DVector::zeros(n);
    let beta1 = b.norm();
    if beta1 == 0.0 {
        return MinresOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut r1 = b.clone();
    let mut r2 = b.clone();
    let mut y = b.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = DVector::zeros(n);
    let mut w2 = DVector::zeros(n);
    let mut iterations = 0;
    for itn in 1..=max_iter {
        iterations = itn;
        let v = &y / beta;
        y = apply(&v);
        if itn >= 2 {
            y.axpy(-beta / oldb, &r1, 1.0);
        }
        let alfa = v.dot(&y);
        y.axpy(-alfa / beta, &r2, 1.0);
        r1 = std::mem::replace(&mut r2, y.clone());
        oldb = beta;
        beta = y.norm();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let w1 = std::mem::replace(&mut w2, w.clone());
        w = (&v - &w1 * oldeps - &w2 * delta) / gamma;
        x.axpy(phi, &w, 1.0);
        if phibar / beta1 < tol || beta == 0.0 {
            break;
        }
    }
    let res = (b - apply(&x)).norm() / beta1;
    MinresOutcome {
        x,
        iterations,
        relative_residual: res,
        converged: res <= tol * 10.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration for the dominant eigenvalue of an operator that is
/// self-adjoint and positive semidefinite in the supplied inner product.
pub fn power_iteration(
    apply: impl Fn(&DVector<f64>) -> DVector<f64>,
    inner: impl Fn(&DVector<f64>, &DVector<f64>) -> f64,
    start: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> PowerEstimate {
    let n0 = inner(&start, &start).sqrt();
    if start.is_empty() || n0 == 0.0 {
        return PowerEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut x = start / n0;
    let mut prev = f64::NAN;
    for it in 1..=max_iter {
        let y = apply(&x);
        let lambda = inner(&x, &y);
        let ny = inner(&y, &y).max(0.0).sqrt();
        if ny == 0.0 {
            return PowerEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        x = y / ny;
        if (lambda - prev).abs() <= tol * lambda.abs() {
            return PowerEstimate {
                value: lambda,
                iterations: it,
                converged: true,
            };
        }
        prev = lambda;
    }
    PowerEstimate {
        value: prev,
        iterations: max_iter,
        converged: false,
    }
}
