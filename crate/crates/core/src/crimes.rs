//! Variational crimes: a discrete complex `V_h` joined to a reference complex
//! `V_ref` by a cochain injection `i_h` that need not be unitary.
//!
//! The reference complex stands in for the continuous one. Crimes are
//! synthesized by perturbing the discrete inner products while keeping every
//! differential (and hence the morphism property) intact.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex::{Degree, HilbertComplex};
use crate::derham::ProlongationMorphism;
use crate::error::{Error, Result};
use crate::linalg;
use crate::mixed::{MixedSolution, SolutionOperators};
use crate::semilinear::{
    solve_hammerstein_load, GalerkinField, HammersteinOptions, LumpedField, Nonlinearity, SemilinearSolution,
};

/// Tolerance for `D_ref i_h = i_h D_h`.
pub const MORPHISM_TOL: f64 = 1e-13;

pub struct CrimeSetup {
    /// `V_h` with the perturbed inner products.
    pub discrete: HilbertComplex,
    /// `V_h` with its original inner products.
    pub unperturbed: HilbertComplex,
    /// `V_h` with the pulled-back inner products `⟨i_h u, i_h v⟩_ref`.
    pub pullback: HilbertComplex,
    pub reference: HilbertComplex,
    pub morphism: ProlongationMorphism,
    pub epsilon: f64,
    pub seed: u64,
    j: Vec<DMatrix<f64>>,
    crime_magnitude: Vec<f64>,
}

impl CrimeSetup {
    fn idx(&self, k: Degree) -> usize {
        (k - self.discrete.k_min()) as usize
    }

    pub fn inject(&self, k: Degree) -> &CsrMatrix<f64> {
        &self.morphism.inject[self.idx(k)]
    }

    pub fn project(&self, k: Degree) -> &CsrMatrix<f64> {
        &self.morphism.project[self.idx(k)]
    }

    /// `J_h = i_h* i_h` as a matrix on coefficient vectors.
    pub fn j(&self, k: Degree) -> &DMatrix<f64> {
        &self.j[self.idx(k)]
    }

    /// `‖I - J_h‖` in the discrete W-norm of degree `k`.
    pub fn crime_magnitude(&self, k: Degree) -> f64 {
        self.crime_magnitude[self.idx(k)]
    }

    /// Largest `‖I - J_h‖` over the degrees a degree-`k` mixed problem touches.
    pub fn crime_magnitude_near(&self, k: Degree) -> f64 {
        (k - 1..=k + 1)
            .filter(|&d| self.discrete.contains(d))
            .map(|d| self.crime_magnitude(d))
            .fold(0.0, f64::max)
    }

    /// `i_h x`.
    pub fn lift(&self, k: Degree, x: &DVector<f64>) -> DVector<f64> {
        linalg::spmv(self.inject(k), x)
    }

    /// `i_h* g = M_h⁻¹ i_hᵀ M_ref g`.
    pub fn adjoint(&self, k: Degree, g: &DVector<f64>) -> Result<DVector<f64>> {
        let load = linalg::spmv_t(self.inject(k), &linalg::spmv(self.reference.gram(k), g));
        self.discrete.gram_solve(k, &load)
    }

    /// Max relative defect of `⟨J_h u, v⟩_h = ⟨i_h u, i_h v⟩_ref` over basis pairs.
    pub fn j_consistency(&self, k: Degree) -> f64 {
        let m = linalg::to_dense(self.discrete.gram(k));
        let g = linalg::to_dense(self.pullback.gram(k));
        let lhs = &m * self.j(k);
        let scale = g.amax().max(f64::MIN_POSITIVE);
        (lhs - &g).amax() / scale
    }

    /// `max |D_ref i_h - i_h D_h|` over all degrees.
    pub fn morphism_defect(&self) -> f64 {
        self.morphism.check(&self.discrete, &self.reference).commutes_inject
    }
}

/// Deterministic symmetric matrix with spectral norm one.
fn unit_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let mut rng = linalg::seeded_rng(seed);
    let r = DMatrix::from_fn(n, n, |_, _| linalg::random_vector(&mut rng, 1)[0]);
    let s = (&r + r.transpose()) * 0.5;
    let (vals, _) = linalg::sym_eigen(s.clone());
    let norm = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if norm == 0.0 {
        DMatrix::identity(n, n)
    } else {
        s / norm
    }
}

fn pulled_back_gram(i: &CsrMatrix<f64>, m_ref: &CsrMatrix<f64>) -> CsrMatrix<f64> {
    let g = &(&i.transpose() * m_ref) * i;
    let gt = g.transpose();
    let sum = &g + &gt;
    sum * 0.5
}

/// Builds a crime setup from a true subcomplex inclusion. Each discrete Gram
/// `M = L Lᵀ` is replaced by `L (I + εS) Lᵀ` with a seeded symmetric `S` of
/// unit norm, which stays symmetric and is SPD while `ε < 1`.
pub fn synth_crime(
    vh: &HilbertComplex,
    vref: &HilbertComplex,
    morphism: &ProlongationMorphism,
    epsilon: f64,
    seed: u64,
) -> Result<CrimeSetup> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::Config(format!("crime epsilon must be finite and nonnegative, got {epsilon}")));
    }
    if vh.k_min() != vref.k_min() || vh.k_max() != vref.k_max() {
        return Err(Error::ShapeMismatch {
            degree: vh.k_min(),
            detail: "discrete and reference complexes span different degrees".into(),
        });
    }
    let nd = vh.degrees().count();
    if morphism.inject.len() != nd || morphism.project.len() != nd {
        return Err(Error::ShapeMismatch {
            degree: vh.k_min(),
            detail: format!("morphism has {} degrees, complex has {nd}", morphism.inject.len()),
        });
    }
    for (idx, k) in vh.degrees().enumerate() {
        let i = &morphism.inject[idx];
        if i.nrows() != vref.dim(k) || i.ncols() != vh.dim(k) {
            return Err(Error::ShapeMismatch {
                degree: k,
                detail: format!("injection is {}x{}, expected {}x{}", i.nrows(), i.ncols(), vref.dim(k), vh.dim(k)),
            });
        }
    }
    let defect = morphism.check(vh, vref).commutes_inject;
    if defect > MORPHISM_TOL {
        return Err(Error::Config(format!("injection is not a cochain morphism (defect {defect:e})")));
    }

    let mut perturbed = Vec::with_capacity(nd);
    for k in vh.degrees() {
        let m = linalg::to_dense(vh.gram(k));
        let n = m.nrows();
        if epsilon == 0.0 || n == 0 {
            perturbed.push(vh.gram(k).clone());
            continue;
        }
        let s = unit_symmetric(n, seed.wrapping_add((k - vh.k_min()) as u64));
        let core = DMatrix::identity(n, n) + s * epsilon;
        let lmin = linalg::min_eigenvalue(&core);
        if lmin <= 0.0 {
            return Err(Error::CrimeNotSpd {
                degree: k,
                eigenvalue: lmin,
            });
        }
        let l = m
            .clone()
            .cholesky()
            .ok_or(Error::NonSpdGram {
                degree: k,
                eigenvalue: linalg::min_eigenvalue(&m),
            })?
            .unpack();
        let me = &l * core * l.transpose();
        let me = (&me + me.transpose()) * 0.5;
        perturbed.push(linalg::csr_from_dense(&me));
    }
    let discrete = vh.with_grams(perturbed)?;
    let pull: Vec<_> = vh
        .degrees()
        .enumerate()
        .map(|(idx, k)| pulled_back_gram(&morphism.inject[idx], vref.gram(k)))
        .collect();
    let pullback = vh.with_grams(pull)?;

    let mut j = Vec::with_capacity(nd);
    let mut magnitude = Vec::with_capacity(nd);
    for k in vh.degrees() {
        let me = linalg::to_dense(discrete.gram(k));
        let g = linalg::to_dense(pullback.gram(k));
        let jk = me
            .clone()
            .cholesky()
            .ok_or(Error::CrimeNotSpd {
                degree: k,
                eigenvalue: linalg::min_eigenvalue(&me),
            })?
            .solve(&g);
        // J is self-adjoint in ⟨·,·⟩_h, so its spectrum gives the operator norm
        let (vals, _) = linalg::gen_sym_eigen(&g, &me)?;
        if let Some(lmin) = vals.iter().copied().reduce(f64::min) {
            if lmin <= 0.0 {
                return Err(Error::RankDeficient);
            }
        }
        magnitude.push(vals.iter().fold(0.0_f64, |a, l| a.max((1.0 - l).abs())));
        j.push(jk);
    }

    Ok(CrimeSetup {
        discrete,
        unperturbed: vh.clone(),
        pullback,
        reference: vref.clone(),
        morphism: morphism.clone(),
        epsilon,
        seed,
        j,
        crime_magnitude: magnitude,
    })
}

/// `H′_h = {z ∈ Z_h : i_h z ⊥ i_h B_h}` and the modified complement of `Z_h`.
#[derive(Clone, Debug)]
pub struct ModifiedHarmonicSpace {
    pub degree: Degree,
    /// Orthonormal in the pulled-back inner product.
    pub basis: DMatrix<f64>,
    /// Basis of `{v : ⟨i_h v, i_h z⟩_ref = 0 for all z ∈ Z_h}`.
    pub perp_basis: DMatrix<f64>,
}

pub fn modified_harmonic(setup: &CrimeSetup, k: Degree) -> Result<ModifiedHarmonicSpace> {
    let c = &setup.pullback;
    c.check_degree(k)?;
    let basis = c.harmonic_basis(k)?.clone();
    let n = c.dim(k);
    let dt = linalg::to_dense(c.diff(k)).transpose();
    let range = linalg::range_space(&dt);
    let mut perp = DMatrix::zeros(n, range.ncols());
    for j in 0..range.ncols() {
        perp.set_column(j, &c.gram_solve(k, &range.column(j).into_owned())?);
    }
    Ok(ModifiedHarmonicSpace {
        degree: k,
        basis,
        perp_basis: linalg::orthonormalize(&perp, c.gram(k)),
    })
}

impl ModifiedHarmonicSpace {
    /// `max |⟨J_h z, b⟩_h|` over the basis of `H′_h` and unit vectors of `B_h`.
    pub fn j_orthogonality_violation(&self, setup: &CrimeSetup) -> Result<f64> {
        let k = self.degree;
        let c = &setup.pullback;
        if !c.contains(k - 1) || self.basis.ncols() == 0 {
            return Ok(0.0);
        }
        let b = linalg::range_space(&linalg::to_dense(c.diff(k - 1)));
        let b = linalg::orthonormalize(&b, c.gram(k));
        let pair = self.basis.transpose() * linalg::spmm(c.gram(k), &b);
        Ok(pair.amax())
    }
}

/// Discrete semilinear data for the generalized problem. `None` in
/// [`solve_generalized`] stands for `F_h = 0`.
pub struct DiscreteNonlinearity<'a> {
    pub f: &'a Nonlinearity,
    pub field: &'a dyn GalerkinField,
    pub opts: HammersteinOptions,
}

/// Solves the crimed problem on `V_h` with its perturbed inner products and
/// data `f_h ∈ W_h^k`.
pub fn solve_generalized(
    setup: &CrimeSetup,
    k: Degree,
    f_h: &DVector<f64>,
    nonlinear: Option<&DiscreteNonlinearity<'_>>,
) -> Result<SemilinearSolution> {
    let ops = SolutionOperators::new(&setup.discrete, k)?;
    if f_h.len() != setup.discrete.dim(k) {
        return Err(Error::DimensionMismatch {
            expected: setup.discrete.dim(k),
            found: f_h.len(),
        });
    }
    let load = ops.load_of(f_h);
    solve_with(&ops, &load, nonlinear)
}

fn solve_with(
    ops: &SolutionOperators<'_>,
    load: &DVector<f64>,
    nonlinear: Option<&DiscreteNonlinearity<'_>>,
) -> Result<SemilinearSolution> {
    match nonlinear {
        Some(n) if !n.f.is_zero() => Ok(solve_hammerstein_load(ops, n.field, n.f, load, &n.opts)?.0),
        _ => {
            let field = LumpedField::new(ops.complex, ops.degree())?;
            let zero = Nonlinearity::zero();
            Ok(solve_hammerstein_load(ops, &field, &zero, load, &HammersteinOptions::default())?.0)
        }
    }
}

/// Solves the modified problem: every pairing is `⟨i_h ·, i_h ·⟩_ref` (that
/// is, weighted by `J_h`) and the data is `⟨f_ref, i_h v⟩_ref`, so `p′ ∈ H′_h`.
pub fn solve_modified(setup: &CrimeSetup, k: Degree, f_ref: &DVector<f64>) -> Result<MixedSolution> {
    let ops = SolutionOperators::new(&setup.pullback, k)?;
    ops.solve_load(&modified_load(setup, k, f_ref)?)
}

fn modified_load(setup: &CrimeSetup, k: Degree, f_ref: &DVector<f64>) -> Result<DVector<f64>> {
    setup.reference.check_degree(k)?;
    if f_ref.len() != setup.reference.dim(k) {
        return Err(Error::DimensionMismatch {
            expected: setup.reference.dim(k),
            found: f_ref.len(),
        });
    }
    Ok(linalg::spmv_t(setup.inject(k), &linalg::spmv(setup.reference.gram(k), f_ref)))
}

/// The mixed problem posed on the subcomplex `i_h V_h ⊂ V_ref` directly, in
/// reference-orthonormal coordinates, and mapped back to `V_h` through `π_h`.
/// This never forms `J_h`; it is the independent route for [`solve_modified`].
pub fn solve_subcomplex_direct(setup: &CrimeSetup, k: Degree, f_ref: &DVector<f64>) -> Result<MixedSolution> {
    let r = &setup.reference;
    r.check_degree(k)?;
    let lo = (k - 1).max(r.k_min());
    let hi = (k + 1).min(r.k_max());
    let q: Vec<DMatrix<f64>> = (lo..=hi)
        .map(|d| linalg::orthonormalize(&linalg::to_dense(setup.inject(d)), r.gram(d)))
        .collect();
    let qi = |d: Degree| &q[(d - lo) as usize];
    let grams = (lo..=hi).map(|d| linalg::identity_csr(qi(d).ncols())).collect();
    let diffs = (lo..hi)
        .map(|d| {
            let dq = linalg::spmm(r.diff(d), qi(d));
            linalg::csr_from_dense(&(qi(d + 1).transpose() * linalg::spmm(r.gram(d + 1), &dq)))
        })
        .collect();
    let sub = HilbertComplex::new(lo, grams, diffs, None)?;
    let ops = SolutionOperators::new(&sub, k)?;
    let load = qi(k).transpose() * linalg::spmv(r.gram(k), f_ref);
    let s = ops.solve_load(&load)?;
    let back = |d: Degree, x: &DVector<f64>| -> DVector<f64> {
        if !r.contains(d) {
            return DVector::zeros(0);
        }
        linalg::spmv(setup.project(d), &(qi(d) * x))
    };
    Ok(MixedSolution {
        degree: k,
        sigma: back(k - 1, &s.sigma),
        u: back(k, &s.u),
        p: back(k, &s.p),
        p_coeffs: s.p_coeffs,
        residual_norm: s.residual_norm,
        residuals: s.residuals,
        stability_ratio: s.stability_ratio,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataMode {
    /// `f_h = i_h* f` (exact adjoint).
    Adjoint,
    /// `f_h = π_h f` (canonical projection).
    Interpolation,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectedData {
    pub f_h: DVector<f64>,
    /// `‖π_h f - i_h* f‖_h`
    pub discrepancy: f64,
}

pub fn project_data(setup: &CrimeSetup, k: Degree, f_ref: &DVector<f64>, mode: DataMode) -> Result<ProjectedData> {
    setup.reference.check_degree(k)?;
    let adj = setup.adjoint(k, f_ref)?;
    let interp = linalg::spmv(setup.project(k), f_ref);
    let discrepancy = setup.discrete.w_norm(k, &(&interp - &adj));
    Ok(ProjectedData {
        f_h: match mode {
            DataMode::Adjoint => adj,
            DataMode::Interpolation => interp,
        },
        discrepancy,
    })
}

/// Left side and ingredients of the crime estimate
/// `gap ≤ C (‖f_h - i_h* f‖_h + ‖I - J_h‖ ‖f‖)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GapReport {
    pub epsilon: f64,
    /// `‖σ_h - σ′_h‖_{V_h} + ‖u_h - u′_h‖_{V_h} + ‖p_h - p′_h‖_h`
    pub gap: f64,
    pub bound_f_term: f64,
    pub bound_j_term: f64,
    /// `gap / (bound_f_term + bound_j_term)`; 0 when both sides vanish.
    pub ratio: f64,
}

/// Semilinear data for [`crime_gap`]: the reference nonlinearity, its field on
/// the reference complex, and the rule that builds `F_h`.
pub struct CrimeNonlinearity<'a> {
    pub f: &'a Nonlinearity,
    pub reference_field: &'a dyn GalerkinField,
    pub choice: DataMode,
    pub opts: HammersteinOptions,
}

/// `F_h` built from a reference-complex nonlinearity through `i_h`:
/// `i_h* F i_h` (adjoint) or `Π_h F i_h` (interpolation).
pub struct CrimeField<'a> {
    setup: &'a CrimeSetup,
    degree: Degree,
    reference: &'a dyn GalerkinField,
    choice: DataMode,
    /// Inner products in which `Π_h F i_h` is paired with test functions.
    pairing: &'a HilbertComplex,
}

impl<'a> CrimeField<'a> {
    pub fn new(setup: &'a CrimeSetup, k: Degree, reference: &'a dyn GalerkinField, choice: DataMode) -> Result<Self> {
        Self::with_pairing(setup, k, reference, choice, &setup.discrete)
    }

    fn with_pairing(
        setup: &'a CrimeSetup,
        k: Degree,
        reference: &'a dyn GalerkinField,
        choice: DataMode,
        pairing: &'a HilbertComplex,
    ) -> Result<Self> {
        if reference.degree() != k || reference.dim() != setup.reference.dim(k) {
            return Err(Error::DimensionMismatch {
                expected: setup.reference.dim(k),
                found: reference.dim(),
            });
        }
        Ok(Self {
            setup,
            degree: k,
            reference,
            choice,
            pairing,
        })
    }

    /// `M_h π_h M_ref⁻¹ g` for a reference load `g`.
    fn projected_load(&self, g: &DVector<f64>) -> Result<DVector<f64>> {
        let k = self.degree;
        let riesz = self.setup.reference.gram_solve(k, g)?;
        Ok(linalg::spmv(self.pairing.gram(k), &linalg::spmv(self.setup.project(k), &riesz)))
    }
}

impl GalerkinField for CrimeField<'_> {
    fn degree(&self) -> Degree {
        self.degree
    }

    fn dim(&self) -> usize {
        self.setup.discrete.dim(self.degree)
    }

    fn pointwise_load(&self, f: &Nonlinearity, u: &DVector<f64>) -> Result<DVector<f64>> {
        let k = self.degree;
        let g = self.reference.pointwise_load(f, &self.setup.lift(k, u))?;
        match self.choice {
            DataMode::Adjoint => Ok(linalg::spmv_t(self.setup.inject(k), &g)),
            DataMode::Interpolation => self.projected_load(&g),
        }
    }

    fn pointwise_jacobian(&self, f: &Nonlinearity, u: &DVector<f64>) -> Result<CsrMatrix<f64>> {
        let k = self.degree;
        let i = self.setup.inject(k);
        let jr = self.reference.pointwise_jacobian(f, &self.setup.lift(k, u))?;
        let ji = &jr * i;
        match self.choice {
            DataMode::Adjoint => Ok(&i.transpose() * &ji),
            DataMode::Interpolation => {
                let ji = linalg::to_dense(&ji);
                let mut out = DMatrix::zeros(self.dim(), ji.ncols());
                for c in 0..ji.ncols() {
                    out.set_column(c, &self.projected_load(&ji.column(c).into_owned())?);
                }
                Ok(linalg::csr_from_dense(&out))
            }
        }
    }
}

fn mixed_distance(c: &HilbertComplex, k: Degree, a: &MixedSolution, b: &MixedSolution) -> f64 {
    let ds = if c.contains(k - 1) {
        c.v_norm(k - 1, &(&a.sigma - &b.sigma))
    } else {
        0.0
    };
    ds + c.v_norm(k, &(&a.u - &b.u)) + c.w_norm(k, &(&a.p - &b.p))
}

/// Compares the generalized solve with data `f_h` against the modified solve
/// with reference data `f_ref`.
pub fn crime_gap(
    setup: &CrimeSetup,
    k: Degree,
    f_ref: &DVector<f64>,
    f_h: &DVector<f64>,
    nonlinear: Option<&CrimeNonlinearity<'_>>,
) -> Result<GapReport> {
    let (generalized, modified) = match nonlinear {
        Some(n) if !n.f.is_zero() => {
            let field_h = CrimeField::new(setup, k, n.reference_field, n.choice)?;
            let disc = DiscreteNonlinearity {
                f: n.f,
                field: &field_h,
                opts: n.opts,
            };
            let g = solve_generalized(setup, k, f_h, Some(&disc))?;
            let field_m = CrimeField::with_pairing(setup, k, n.reference_field, DataMode::Adjoint, &setup.pullback)?;
            let ops = SolutionOperators::new(&setup.pullback, k)?;
            let (m, _) = solve_hammerstein_load(&ops, &field_m, n.f, &modified_load(setup, k, f_ref)?, &n.opts)?;
            (g.mixed, m.mixed)
        }
        _ => (solve_generalized(setup, k, f_h, None)?.mixed, solve_modified(setup, k, f_ref)?),
    };
    let gap = mixed_distance(&setup.discrete, k, &generalized, &modified);
    let bound_f_term = setup.discrete.w_norm(k, &(f_h - setup.adjoint(k, f_ref)?));
    let bound_j_term = setup.crime_magnitude_near(k) * setup.reference.w_norm(k, f_ref);
    let denom = bound_f_term + bound_j_term;
    let ratio = if denom > 0.0 {
        gap / denom
    } else if gap == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(GapReport {
        epsilon: setup.epsilon,
        gap,
        bound_f_term,
        bound_j_term,
        ratio,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CrimeSweep {
    pub rows: Vec<GapReport>,
    /// Least-squares slope of `log gap` against `log ε` over rows with `ε > 0`.
    pub exponent: Option<f64>,
}

/// Runs [`crime_gap`] for each `ε` with data `f_h` chosen by `mode`. Sweep
/// points are evaluated in parallel and reported in input order.
#[allow(clippy::too_many_arguments)]
pub fn crime_sweep(
    vh: &HilbertComplex,
    vref: &HilbertComplex,
    morphism: &ProlongationMorphism,
    k: Degree,
    f_ref: &DVector<f64>,
    epsilons: &[f64],
    seed: u64,
    mode: DataMode,
    nonlinear: Option<&CrimeNonlinearity<'_>>,
) -> Result<CrimeSweep> {
    let rows = epsilons
        .par_iter()
        .map(|&eps| {
            let setup = synth_crime(vh, vref, morphism, eps, seed)?;
            let f_h = project_data(&setup, k, f_ref, mode)?.f_h;
            crime_gap(&setup, k, f_ref, &f_h, nonlinear)
        })
        .collect::<Result<Vec<_>>>()?;
    let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.epsilon > 0.0).map(|r| (r.epsilon, r.gap)).unzip();
    Ok(CrimeSweep {
        exponent: crate::lab::fit_slope(&x, &y).map(|f| f.slope),
        rows,
    })
}

/// V-orthogonal projection `P_{V_h}` onto `i_h V_h^k ⊂ V_ref^k`, returned as
/// a reference vector.
pub fn project_onto_image(setup: &CrimeSetup, k: Degree, x: &DVector<f64>) -> Result<DVector<f64>> {
    let r = &setup.reference;
    let i = setup.inject(k);
    let gv = r.graph_gram(k);
    let normal = linalg::to_dense(&(&(&i.transpose() * &gv) * i));
    let rhs = linalg::spmv_t(i, &linalg::spmv(&gv, x));
    let c = normal
        .cholesky()
        .ok_or(Error::RankDeficient)?
        .solve(&rhs);
    Ok(linalg::spmv(i, &c))
}

/// Error of the crimed semilinear solve against the reference solution,
/// split into the terms of the semilinear crime estimate.
#[derive(Clone, Debug, Serialize)]
pub struct SemilinearCrimeReport {
    pub choice: DataMode,
    pub epsilon: f64,
    pub discrete: SemilinearSolution,
    pub reference: SemilinearSolution,
    /// `‖σ - i_h σ_h‖_V + ‖u - i_h u_h‖_V + ‖p - i_h p_h‖` on the reference complex.
    pub total_error: f64,
    /// The three summands of `total_error`.
    pub errors: [f64; 3],
    /// `‖v - P_{V_h} v‖_V` for `v = σ, u, p`.
    pub best_approximation: [f64; 3],
    /// `‖f_h - i_h* f‖_h`
    pub data_term: f64,
    /// `‖I - J_h‖ ‖f‖`
    pub inner_product_term: f64,
    /// `‖F_h(u_h) - i_h* F(i_h u_h)‖_h` in the discrete dual norm.
    pub nonlinear_term: f64,
}

pub fn semilinear_crime_solve(
    setup: &CrimeSetup,
    k: Degree,
    f_ref: &DVector<f64>,
    nl: &Nonlinearity,
    reference_field: &dyn GalerkinField,
    choice: DataMode,
    opts: &HammersteinOptions,
) -> Result<SemilinearCrimeReport> {
    let r = &setup.reference;
    let ref_ops = SolutionOperators::new(r, k)?;
    let (reference, _) = solve_hammerstein_load(&ref_ops, reference_field, nl, &ref_ops.load_of(f_ref), opts)?;

    let f_h = project_data(setup, k, f_ref, choice)?.f_h;
    let field_h = CrimeField::new(setup, k, reference_field, choice)?;
    let disc = DiscreteNonlinearity {
        f: nl,
        field: &field_h,
        opts: *opts,
    };
    let discrete = solve_generalized(setup, k, &f_h, Some(&disc))?;

    let (d, rm) = (&discrete.mixed, &reference.mixed);
    let es = if r.contains(k - 1) {
        r.v_norm(k - 1, &(&rm.sigma - setup.lift(k - 1, &d.sigma)))
    } else {
        0.0
    };
    let eu = r.v_norm(k, &(&rm.u - setup.lift(k, &d.u)));
    let ep = r.w_norm(k, &(&rm.p - setup.lift(k, &d.p)));
    let best = |deg: Degree, v: &DVector<f64>| -> Result<f64> {
        if !r.contains(deg) {
            return Ok(0.0);
        }
        Ok(r.v_norm(deg, &(v - project_onto_image(setup, deg, v)?)))
    };
    let best_approximation = [best(k - 1, &rm.sigma)?, best(k, &rm.u)?, best(k, &rm.p)?];

    let data_term = setup.discrete.w_norm(k, &(&f_h - setup.adjoint(k, f_ref)?));
    let inner_product_term = setup.crime_magnitude_near(k) * r.w_norm(k, f_ref);
    let nonlinear_term = if nl.is_zero() {
        0.0
    } else {
        let uh = d.bold_u();
        let optimal = CrimeField::new(setup, k, reference_field, DataMode::Adjoint)?;
        let a = crate::semilinear::evaluate_f(nl, &field_h, &uh)?;
        let b = crate::semilinear::evaluate_f(nl, &optimal, &uh)?;
        let diff = a - b;
        let riesz = setup.discrete.gram_solve(k, &diff)?;
        diff.dot(&riesz).max(0.0).sqrt()
    };
    Ok(SemilinearCrimeReport {
        choice,
        epsilon: setup.epsilon,
        discrete,
        reference,
        total_error: es + eu + ep,
        errors: [es, eu, ep],
        best_approximation,
        data_term,
        inner_product_term,
        nonlinear_term,
    })
}
