//! Finite-dimensional Hilbert complexes.
//!
//! A complex is a chain of coefficient spaces `W^k`, `k_min ≤ k ≤ k_max`, each
//! carrying an SPD Gram matrix `M^k`, linked by differentials `D^k`. The
//! domain-complex (graph) inner product is `M^k + (D^k)ᵀ M^{k+1} D^k`. Degrees
//! just outside the range are zero spaces with zero maps.

pub mod io;

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, SparseCholesky, DENSE_LIMIT, RANK_TOL};

pub type Degree = i32;

pub struct HilbertComplex {
    k_min: Degree,
    k_max: Degree,
    // indexed by k - k_min + 1, padded with zero spaces at both ends
    gram: Vec<CsrMatrix<f64>>,
    // D^k for k = k_min-1 ..= k_max, indexed by k - k_min + 1
    diff: Vec<CsrMatrix<f64>>,
    labels: Option<Vec<String>>,
    harmonic: Vec<OnceLock<DMatrix<f64>>>,
    coboundary: Vec<OnceLock<DMatrix<f64>>>,
    gram_chol: Vec<OnceLock<std::result::Result<SparseCholesky, f64>>>,
}

impl Clone for HilbertComplex {
    fn clone(&self) -> Self {
        let n = self.gram.len();
        Self {
            k_min: self.k_min,
            k_max: self.k_max,
            gram: self.gram.clone(),
            diff: self.diff.clone(),
            labels: self.labels.clone(),
            harmonic: self.harmonic.clone(),
            coboundary: self.coboundary.clone(),
            gram_chol: (0..n).map(|_| OnceLock::new()).collect(),
        }
    }
}

impl fmt::Debug for HilbertComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HilbertComplex")
            .field("degrees", &(self.k_min..=self.k_max))
            .field("dims", &self.dims())
            .field("labels", &self.labels)
            .finish()
    }
}

impl HilbertComplex {
    /// Builds a complex from Grams `M^{k_min}..M^{k_max}` and differentials
    /// `D^{k_min}..D^{k_max-1}`. Only shapes are checked here; see
    /// [`HilbertComplex::validate`] for the algebraic invariants.
    pub fn new(
        k_min: Degree,
        gram: Vec<CsrMatrix<f64>>,
        diff: Vec<CsrMatrix<f64>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if gram.is_empty() {
            return Err(Error::ShapeMismatch {
                degree: k_min,
                detail: "a complex needs at least one space".into(),
            });
        }
        let k_max = k_min + gram.len() as Degree - 1;
        if diff.len() + 1 != gram.len() {
            return Err(Error::ShapeMismatch {
                degree: k_max,
                detail: format!("{} spaces need {} differentials, got {}", gram.len(), gram.len() - 1, diff.len()),
            });
        }
        if let Some(l) = &labels {
            if l.len() != gram.len() {
                return Err(Error::ShapeMismatch {
                    degree: k_min,
                    detail: format!("{} labels for {} spaces", l.len(), gram.len()),
                });
            }
        }
        for (i, m) in gram.iter().enumerate() {
            if m.nrows() != m.ncols() {
                return Err(Error::ShapeMismatch {
                    degree: k_min + i as Degree,
                    detail: format!("Gram matrix is {}x{}", m.nrows(), m.ncols()),
                });
            }
        }
        for (i, d) in diff.iter().enumerate() {
            let (src, dst) = (gram[i].nrows(), gram[i + 1].nrows());
            if d.ncols() != src || d.nrows() != dst {
                return Err(Error::ShapeMismatch {
                    degree: k_min + i as Degree,
                    detail: format!("differential is {}x{}, expected {}x{}", d.nrows(), d.ncols(), dst, src),
                });
            }
        }
        let first = gram[0].nrows();
        let last = gram[gram.len() - 1].nrows();
        let mut g = Vec::with_capacity(gram.len() + 2);
        g.push(CsrMatrix::zeros(0, 0));
        g.extend(gram);
        g.push(CsrMatrix::zeros(0, 0));
        let mut d = Vec::with_capacity(diff.len() + 2);
        d.push(CsrMatrix::zeros(first, 0));
        d.extend(diff);
        d.push(CsrMatrix::zeros(0, last));
        let n = g.len();
        Ok(Self {
            k_min,
            k_max,
            gram: g,
            diff: d,
            labels,
            harmonic: (0..n).map(|_| OnceLock::new()).collect(),
            coboundary: (0..n).map(|_| OnceLock::new()).collect(),
            gram_chol: (0..n).map(|_| OnceLock::new()).collect(),
        })
    }

    /// Convenience constructor from dense matrices.
    pub fn from_dense(k_min: Degree, gram: &[DMatrix<f64>], diff: &[DMatrix<f64>]) -> Result<Self> {
        Self::new(
            k_min,
            gram.iter().map(linalg::csr_from_dense).collect(),
            diff.iter().map(linalg::csr_from_dense).collect(),
            None,
        )
    }

    pub fn k_min(&self) -> Degree {
        self.k_min
    }

    pub fn k_max(&self) -> Degree {
        self.k_max
    }

    pub fn degrees(&self) -> std::ops::RangeInclusive<Degree> {
        self.k_min..=self.k_max
    }

    pub fn contains(&self, k: Degree) -> bool {
        (self.k_min..=self.k_max).contains(&k)
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn check_degree(&self, k: Degree) -> Result<()> {
        if self.contains(k) {
            Ok(())
        } else {
            Err(Error::DegreeOutOfRange {
                degree: k,
                min: self.k_min,
                max: self.k_max,
            })
        }
    }

    fn slot(&self, k: Degree) -> usize {
        assert!(
            k >= self.k_min - 1 && k <= self.k_max + 1,
            "degree {k} outside padded range of {:?}",
            self.degrees()
        );
        (k - self.k_min + 1) as usize
    }

    /// `dim W^k` (zero outside the degree range).
    pub fn dim(&self, k: Degree) -> usize {
        if k < self.k_min || k > self.k_max {
            0
        } else {
            self.gram[self.slot(k)].nrows()
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        self.degrees().map(|k| self.dim(k)).collect()
    }

    /// `M^k`; a 0x0 matrix one step outside the range.
    pub fn gram(&self, k: Degree) -> &CsrMatrix<f64> {
        &self.gram[self.slot(k)]
    }

    /// `D^k : W^k → W^{k+1}`, defined for `k_min-1 ≤ k ≤ k_max`.
    pub fn diff(&self, k: Degree) -> &CsrMatrix<f64> {
        assert!(k >= self.k_min - 1 && k <= self.k_max, "no differential at degree {k}");
        &self.diff[self.slot(k)]
    }

    /// Graph Gram matrix `M^k + (D^k)ᵀ M^{k+1} D^k` of the domain complex.
    pub fn graph_gram(&self, k: Degree) -> CsrMatrix<f64> {
        let d = self.diff(k);
        if d.nnz() == 0 {
            return self.gram(k).clone();
        }
        let dt = d.transpose();
        let s = &(&dt * self.gram(k + 1)) * d;
        self.gram(k) + &s
    }

    pub fn w_inner(&self, k: Degree, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        linalg::w_inner(self.gram(k), x, y)
    }

    pub fn w_norm(&self, k: Degree, x: &DVector<f64>) -> f64 {
        linalg::w_norm(self.gram(k), x)
    }

    /// `‖x‖_V² = ‖x‖_W² + ‖D x‖_W²`.
    pub fn v_norm(&self, k: Degree, x: &DVector<f64>) -> f64 {
        let dx = self.apply_diff(k, x);
        (self.w_inner(k, x, x) + self.w_inner(k + 1, &dx, &dx)).max(0.0).sqrt()
    }

    pub fn apply_diff(&self, k: Degree, x: &DVector<f64>) -> DVector<f64> {
        linalg::spmv(self.diff(k), x)
    }

    fn gram_factor(&self, k: Degree) -> Result<&SparseCholesky> {
        let slot = self.slot(k);
        let cell = self.gram_chol[slot].get_or_init(|| SparseCholesky::new(&self.gram[slot]).map_err(|_| f64::NAN));
        cell.as_ref().map_err(|&e| Error::NonSpdGram { degree: k, eigenvalue: e })
    }

    /// `(M^k)^{-1} b` through a cached sparse Cholesky factorization.
    pub fn gram_solve(&self, k: Degree, b: &DVector<f64>) -> Result<DVector<f64>> {
        if self.dim(k) == 0 {
            return Ok(DVector::zeros(0));
        }
        Ok(self.gram_factor(k)?.solve(b))
    }

    /// `D*_k v = (M^{k-1})^{-1} (D^{k-1})ᵀ M^k v`, the W-adjoint of `D^{k-1}`.
    pub fn apply_adjoint(&self, k: Degree, v: &DVector<f64>) -> Result<DVector<f64>> {
        let rhs = linalg::spmv_t(self.diff(k - 1), &linalg::spmv(self.gram(k), v));
        self.gram_solve(k - 1, &rhs)
    }

    /// Dense matrix of `D*_k`. Requires both `k-1` and `k` in range.
    pub fn adjoint_differential(&self, k: Degree) -> Result<DMatrix<f64>> {
        self.check_degree(k)?;
        self.check_degree(k - 1)?;
        let n = self.dim(k);
        let mut out = DMatrix::zeros(self.dim(k - 1), n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            out.set_column(j, &self.apply_adjoint(k, &e)?);
        }
        Ok(out)
    }

    pub fn dual(&self) -> Result<DualComplexView<'_>> {
        let adjoints = ((self.k_min + 1)..=self.k_max)
            .map(|k| self.adjoint_differential(k))
            .collect::<Result<Vec<_>>>()?;
        Ok(DualComplexView { complex: self, adjoints })
    }

    /// Checks the cochain property, Gram symmetry and positivity.
    pub fn validate(&self) -> Result<ValidationReport> {
        let mut checks = Vec::new();
        for k in self.k_min..self.k_max {
            let d0 = self.diff(k);
            let d1 = self.diff(k + 1);
            if d1.nrows() == 0 || d0.ncols() == 0 {
                continue;
            }
            let prod = d1 * d0;
            let violation = linalg::max_abs(&prod);
            let exact = linalg::is_integer_valued(d0) && linalg::is_integer_valued(d1);
            let allowed = if exact {
                0.0
            } else {
                1e-13 * linalg::frobenius(d0) * linalg::frobenius(d1)
            };
            checks.push(Check {
                name: "cochain",
                degree: k,
                passed: violation <= allowed,
                violation,
                tolerance: allowed,
            });
        }
        for k in self.degrees() {
            let m = self.gram(k);
            if m.nrows() == 0 {
                continue;
            }
            let asym = linalg::max_abs(&(m - &m.transpose()));
            let tol = 1e-13 * linalg::max_abs(m);
            checks.push(Check {
                name: "gram_symmetric",
                degree: k,
                passed: asym <= tol,
                violation: asym,
                tolerance: tol,
            });
            let (lmin, _) = linalg::extreme_eigenvalues(m);
            if !(lmin > 0.0) {
                return Err(Error::NonSpdGram { degree: k, eigenvalue: lmin });
            }
            checks.push(Check {
                name: "gram_positive",
                degree: k,
                passed: true,
                violation: lmin,
                tolerance: 0.0,
            });
        }
        let passed = checks.iter().all(|c| c.passed);
        Ok(ValidationReport {
            dims: self.dims(),
            checks,
            passed,
        })
    }

    /// `dim ker D^k` by dense rank computation.
    pub fn kernel_dim(&self, k: Degree) -> usize {
        let d = self.diff(k);
        d.ncols() - linalg::numerical_rank(&linalg::to_dense(d))
    }

    /// `rank D^k`.
    pub fn diff_rank(&self, k: Degree) -> usize {
        linalg::numerical_rank(&linalg::to_dense(self.diff(k)))
    }

    /// W-orthonormal basis of `H^k = ker D^k ∩ (range D^{k-1})^⊥`, one vector per column.
    pub fn harmonic_basis(&self, k: Degree) -> Result<&DMatrix<f64>> {
        self.check_degree(k)?;
        let slot = self.slot(k);
        if let Some(h) = self.harmonic[slot].get() {
            return Ok(h);
        }
        let h = self.compute_harmonic(k);
        Ok(self.harmonic[slot].get_or_init(|| h))
    }

    fn compute_harmonic(&self, k: Degree) -> DMatrix<f64> {
        let n = self.dim(k);
        let d = self.diff(k);
        let dprev = self.diff(k - 1);
        let m = self.gram(k);
        let no_coboundary = dprev.nnz() == 0;
        if n > DENSE_LIMIT && no_coboundary {
            if d.nnz() == 0 {
                return linalg::orthonormalize(&DMatrix::identity(n, n), m);
            }
            if injective_certificate(d) {
                return DMatrix::zeros(n, 0);
            }
        }
        let z = linalg::null_space(&linalg::to_dense(d));
        if z.ncols() == 0 {
            return DMatrix::zeros(n, 0);
        }
        let h = if no_coboundary {
            z
        } else {
            // c ↦ (D^{k-1})ᵀ M Z c must vanish
            let constraint = linalg::spmm(&dprev.transpose(), &linalg::spmm(m, &z));
            let c = linalg::null_space(&constraint);
            z * c
        };
        linalg::orthonormalize(&h, m)
    }

    /// W-orthonormal basis of `B^k = range D^{k-1}`.
    pub fn coboundary_basis(&self, k: Degree) -> Result<&DMatrix<f64>> {
        self.check_degree(k)?;
        let slot = self.slot(k);
        if let Some(b) = self.coboundary[slot].get() {
            return Ok(b);
        }
        let r = linalg::range_space(&linalg::to_dense(self.diff(k - 1)));
        let b = linalg::orthonormalize(&r, self.gram(k));
        Ok(self.coboundary[slot].get_or_init(|| b))
    }

    /// `P_H v = H Hᵀ M v`.
    pub fn project_harmonic(&self, k: Degree, v: &DVector<f64>) -> Result<DVector<f64>> {
        let h = self.harmonic_basis(k)?;
        Ok(project(h, self.gram(k), v))
    }

    pub fn project_coboundary(&self, k: Degree, v: &DVector<f64>) -> Result<DVector<f64>> {
        let b = self.coboundary_basis(k)?;
        Ok(project(b, self.gram(k), v))
    }

    /// `(dim B^k, dim H^k, dim Z^{k⊥})`.
    pub fn decomposition_dims(&self, k: Degree) -> Result<(usize, usize, usize)> {
        let b = self.coboundary_basis(k)?.ncols();
        let h = self.harmonic_basis(k)?.ncols();
        let z = self.dim(k) - self.kernel_dim(k);
        Ok((b, h, z))
    }

    pub fn hodge_decompose(&self, k: Degree, v: &DVector<f64>) -> Result<HodgeDecomposition> {
        self.check_degree(k)?;
        if v.len() != self.dim(k) {
            return Err(Error::DimensionMismatch {
                expected: self.dim(k),
                found: v.len(),
            });
        }
        let projectors = Projectors {
            gram: self.gram(k).clone(),
            harmonic: self.harmonic_basis(k)?.clone(),
            coboundary: self.coboundary_basis(k)?.clone(),
        };
        let b = projectors.apply_coboundary(v);
        let h = projectors.apply_harmonic(v);
        let z = v - &b - &h;
        Ok(HodgeDecomposition {
            degree: k,
            coboundary_part: b,
            harmonic_part: h,
            perp_part: z,
            projectors,
        })
    }

    /// `c_P = sup_{v ∈ Z^{k⊥}} ‖v‖_V / ‖D^k v‖_W`, with a maximizing witness.
    pub fn poincare_constant(&self, k: Degree) -> Result<PoincareData> {
        self.check_degree(k)?;
        let d = self.diff(k);
        // Z^{k⊥} = M^{-1} range((D^k)ᵀ)
        let r = linalg::range_space(&linalg::to_dense(&d.transpose()));
        if r.ncols() == 0 {
            return Err(Error::EmptyPerpSpace { degree: k });
        }
        let mut q = DMatrix::zeros(r.nrows(), r.ncols());
        for j in 0..r.ncols() {
            q.set_column(j, &self.gram_solve(k, &r.column(j).into_owned())?);
        }
        let q = linalg::orthonormalize(&q, self.gram(k));
        let dq = linalg::spmm(d, &q);
        let a = dq.transpose() * linalg::spmm(self.gram(k + 1), &dq);
        let b = q.transpose() * linalg::spmm(&self.graph_gram(k), &q);
        let (vals, vecs) = linalg::gen_sym_eigen(&a, &b)?;
        let lmin = vals[0];
        let witness = &q * vecs.column(0);
        Ok(PoincareData {
            degree: k,
            constant: (1.0 / lmin).sqrt(),
            witness,
        })
    }

    /// `dim H^k` for every degree.
    pub fn betti_numbers(&self) -> Result<Vec<usize>> {
        self.degrees().map(|k| Ok(self.harmonic_basis(k)?.ncols())).collect()
    }

    /// Same complex with every Gram matrix multiplied by `s`.
    pub fn scaled_grams(&self, s: f64) -> Self {
        let gram = self.degrees().map(|k| self.gram(k) * s).collect();
        let diff = (self.k_min..self.k_max).map(|k| self.diff(k).clone()).collect();
        Self::new(self.k_min, gram, diff, self.labels.clone()).expect("shapes unchanged")
    }

    /// Same differentials with replacement Gram matrices.
    pub fn with_grams(&self, gram: Vec<CsrMatrix<f64>>) -> Result<Self> {
        let diff = (self.k_min..self.k_max).map(|k| self.diff(k).clone()).collect();
        Self::new(self.k_min, gram, diff, self.labels.clone())
    }
}

/// Proves `D` injective without a dense SVD: `DᵀD` factorizes and its
/// extreme eigenvalues are separated by less than the rank tolerance squared.
fn injective_certificate(d: &CsrMatrix<f64>) -> bool {
    if d.nrows() < d.ncols() {
        return false;
    }
    let dtd = &d.transpose() * d;
    let Ok(chol) = SparseCholesky::new(&dtd) else {
        return false;
    };
    let n = dtd.nrows();
    let start = DVector::from_fn(n, |i, _| 1.0 + (i % 5) as f64 * 0.2);
    let inv = linalg::power_iteration(|x| chol.solve(x), |x, y| x.dot(y), start.clone(), 1e-6, 5000);
    let fwd = linalg::power_iteration(|x| linalg::spmv(&dtd, x), |x, y| x.dot(y), start, 1e-6, 5000);
    let lmin = 1.0 / inv.value;
    inv.value.is_finite() && inv.value > 0.0 && lmin > RANK_TOL * RANK_TOL * fwd.value
}

fn project(basis: &DMatrix<f64>, gram: &CsrMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    if basis.ncols() == 0 {
        return DVector::zeros(v.len());
    }
    basis * (basis.transpose() * linalg::spmv(gram, v))
}

/// W-orthogonal projectors onto `B^k` and `H^k`, applied from stored bases.
#[derive(Clone, Debug)]
pub struct Projectors {
    gram: CsrMatrix<f64>,
    harmonic: DMatrix<f64>,
    coboundary: DMatrix<f64>,
}

impl Projectors {
    pub fn apply_harmonic(&self, v: &DVector<f64>) -> DVector<f64> {
        project(&self.harmonic, &self.gram, v)
    }

    pub fn apply_coboundary(&self, v: &DVector<f64>) -> DVector<f64> {
        project(&self.coboundary, &self.gram, v)
    }

    pub fn dense_harmonic(&self) -> DMatrix<f64> {
        &self.harmonic * self.harmonic.transpose() * linalg::to_dense(&self.gram)
    }

    pub fn dense_coboundary(&self) -> DMatrix<f64> {
        &self.coboundary * self.coboundary.transpose() * linalg::to_dense(&self.gram)
    }
}

#[derive(Clone, Debug)]
pub struct HodgeDecomposition {
    pub degree: Degree,
    pub coboundary_part: DVector<f64>,
    pub harmonic_part: DVector<f64>,
    pub perp_part: DVector<f64>,
    pub projectors: Projectors,
}

impl HodgeDecomposition {
    pub fn harmonic_basis(&self) -> &DMatrix<f64> {
        &self.projectors.harmonic
    }

    pub fn coboundary_basis(&self) -> &DMatrix<f64> {
        &self.projectors.coboundary
    }

    pub fn reconstruct(&self) -> DVector<f64> {
        &self.coboundary_part + &self.harmonic_part + &self.perp_part
    }
}

#[derive(Clone, Debug)]
pub struct PoincareData {
    pub degree: Degree,
    pub constant: f64,
    pub witness: DVector<f64>,
}

/// The adjoint differentials `D*_k` of a complex, for `k_min < k ≤ k_max`.
pub struct DualComplexView<'a> {
    pub complex: &'a HilbertComplex,
    adjoints: Vec<DMatrix<f64>>,
}

impl DualComplexView<'_> {
    pub fn adjoint(&self, k: Degree) -> Option<&DMatrix<f64>> {
        let i = k - self.complex.k_min() - 1;
        if i < 0 {
            return None;
        }
        self.adjoints.get(i as usize)
    }

    /// Largest relative violation of `⟨D u, v⟩ = ⟨u, D* v⟩` over basis pairs.
    pub fn adjoint_identity_violation(&self, k: Degree) -> f64 {
        let Some(ds) = self.adjoint(k) else { return 0.0 };
        let c = self.complex;
        let d = linalg::to_dense(c.diff(k - 1));
        let lhs = d.transpose() * linalg::to_dense(c.gram(k));
        let rhs = linalg::to_dense(c.gram(k - 1)) * ds;
        let scale = lhs.amax().max(rhs.amax()).max(f64::MIN_POSITIVE);
        (lhs - rhs).amax() / scale
    }

    /// `max |D*_k D*_{k+1}|` relative to the factor norms.
    pub fn composition_violation(&self, k: Degree) -> f64 {
        match (self.adjoint(k), self.adjoint(k + 1)) {
            (Some(a), Some(b)) => {
                let scale = (a.norm() * b.norm()).max(f64::MIN_POSITIVE);
                (a * b).amax() / scale
            }
            _ => 0.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub degree: Degree,
    pub passed: bool,
    pub violation: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub dims: Vec<usize>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dimensions: {:?}", self.dims)?;
        for c in &self.checks {
            let status = if c.passed { "ok  " } else { "FAIL" };
            if c.name == "gram_positive" {
                writeln!(f, "{status} {:<15} k={:<2} min eigenvalue {:.3e}", c.name, c.degree, c.violation)?;
            } else {
                writeln!(
                    f,
                    "{status} {:<15} k={:<2} violation {:.3e} (tol {:.1e})",
                    c.name, c.degree, c.violation, c.tolerance
                )?;
            }
        }
        write!(f, "overall: {}", if self.passed { "pass" } else { "fail" })
    }
}
