//! Monotone nonlinearities `F` and their Galerkin evaluation.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use serde::Serialize;

use crate::complex::{Degree, HilbertComplex};
use crate::error::{Error, Result};
use crate::linalg;

/// `(u, x) ↦ value` for pointwise nonlinearities.
pub type PointwiseFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
/// Position-dependent coefficient `a_j(x)`.
pub type CoefficientFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Coefficient-space load map `u ↦ (⟨F u, φ_i⟩)_i`.
pub type LoadMap = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
/// Jacobian of a [`LoadMap`].
pub type JacobianMap = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Field(CoefficientFn),
}

impl Coefficient {
    pub fn at(&self, x: &[f64]) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Field(f) => f(x),
        }
    }
}

#[derive(Clone)]
pub enum NonlinearityKind {
    Zero,
    /// `u^m` with `m` odd.
    OddPower { m: u32 },
    /// `Σ_j a_j(x) u^j`.
    Polynomial { coefficients: Vec<Coefficient> },
    /// `scale · sinh(u)`.
    Exponential { scale: f64 },
    /// Pointwise `g(u, x)` with optional derivative (central differences otherwise).
    Custom {
        name: String,
        value: PointwiseFn,
        derivative: Option<PointwiseFn>,
    },
    /// Map given directly on coefficient vectors together with its own Galerkin
    /// pairing; used on abstract complexes.
    CoefficientMap {
        name: String,
        load: LoadMap,
        jacobian: Option<JacobianMap>,
    },
}

impl fmt::Debug for NonlinearityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NonlinearityKind::Zero => write!(f, "Zero"),
            NonlinearityKind::OddPower { m } => write!(f, "OddPower({m})"),
            NonlinearityKind::Polynomial { coefficients } => write!(f, "Polynomial(degree {})", coefficients.len().saturating_sub(1)),
            NonlinearityKind::Exponential { scale } => write!(f, "Exponential({scale})"),
            NonlinearityKind::Custom { name, .. } => write!(f, "Custom({name})"),
            NonlinearityKind::CoefficientMap { name, .. } => write!(f, "CoefficientMap({name})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Lipschitz {
    /// `‖F u - F v‖ ≤ C ‖u - v‖` everywhere.
    Global { constant: f64 },
    /// Same bound for `‖u‖_V, ‖v‖_V ≤ radius`.
    Local { constant: f64, radius: f64 },
}

/// Growth admissibility of `u^m` on a domain of dimension `n`: any `m` for
/// `n ≤ 2`, otherwise `m ≤ (n + 2)/(n - 2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Admissibility {
    pub dimension: usize,
    pub exponent: u32,
    pub critical_exponent: Option<f64>,
    pub admissible: bool,
}

pub fn admissibility(m: u32, n: usize) -> Admissibility {
    let critical = if n > 2 {
        Some((n as f64 + 2.0) / (n as f64 - 2.0))
    } else {
        None
    };
    Admissibility {
        dimension: n,
        exponent: m,
        critical_exponent: critical,
        admissible: critical.is_none_or(|c| m as f64 <= c),
    }
}

#[derive(Clone, Debug)]
pub struct Nonlinearity {
    pub kind: NonlinearityKind,
    pub lipschitz: Option<Lipschitz>,
    /// Order interval `[lo, hi]` applied pointwise before evaluation.
    pub clamp: Option<(f64, f64)>,
    pub quadrature_order: usize,
    /// Set by [`local_lipschitz_guard`]: the ball outside which the Lipschitz
    /// record no longer applies, as `(center, radius, V-Gram)`.
    pub guard: Option<Arc<(DVector<f64>, f64, CsrMatrix<f64>)>>,
}

impl Nonlinearity {
    pub fn new(kind: NonlinearityKind) -> Self {
        let quadrature_order = match &kind {
            NonlinearityKind::OddPower { m } => 2 * *m as usize + 1,
            NonlinearityKind::Polynomial { coefficients } => 2 * coefficients.len().max(1) + 1,
            _ => 5,
        };
        Self {
            kind,
            lipschitz: None,
            clamp: None,
            quadrature_order,
            guard: None,
        }
    }

    pub fn zero() -> Self {
        Self::new(NonlinearityKind::Zero)
    }

    pub fn odd_power(m: u32) -> Self {
        assert!(m % 2 == 1, "odd_power needs an odd exponent");
        Self::new(NonlinearityKind::OddPower { m })
    }

    pub fn polynomial(coefficients: Vec<Coefficient>) -> Self {
        Self::new(NonlinearityKind::Polynomial { coefficients })
    }

    pub fn custom(name: &str, value: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(NonlinearityKind::Custom {
            name: name.into(),
            value: Arc::new(value),
            derivative: None,
        })
    }

    pub fn with_clamp(mut self, lo: f64, hi: f64) -> Self {
        assert!(lo <= hi);
        self.clamp = Some((lo, hi));
        self
    }

    pub fn with_quadrature_order(mut self, order: usize) -> Self {
        self.quadrature_order = order.max(1);
        self
    }

    pub fn with_lipschitz(mut self, l: Lipschitz) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NonlinearityKind::Zero)
    }

    /// Kinds whose monotonicity is known analytically.
    pub fn declared_monotone(&self) -> bool {
        match &self.kind {
            NonlinearityKind::Zero | NonlinearityKind::OddPower { .. } => true,
            NonlinearityKind::Exponential { scale } => *scale >= 0.0,
            _ => false,
        }
    }

    fn clamped(&self, u: f64) -> (f64, bool) {
        match self.clamp {
            Some((lo, hi)) => (u.clamp(lo, hi), u < lo || u > hi),
            None => (u, false),
        }
    }

    /// Pointwise value `F(u)(x)` after clamping.
    pub fn value(&self, u: f64, x: &[f64]) -> f64 {
        let (u, _) = self.clamped(u);
        match &self.kind {
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::OddPower { m } => u.powi(*m as i32),
            NonlinearityKind::Polynomial { coefficients } => {
                let mut acc = 0.0;
                for c in coefficients.iter().rev() {
                    acc = acc * u + c.at(x);
                }
                acc
            }
            NonlinearityKind::Exponential { scale } => scale * u.sinh(),
            NonlinearityKind::Custom { value, .. } => value(u, x),
            NonlinearityKind::CoefficientMap { .. } => {
                panic!("coefficient-space nonlinearities have no pointwise value")
            }
        }
    }

    /// Pointwise derivative `∂F/∂u`, zero where the clamp is active.
    pub fn derivative(&self, u: f64, x: &[f64]) -> f64 {
        let (uc, outside) = self.clamped(u);
        if outside {
            return 0.0;
        }
        let u = uc;
        match &self.kind {
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::OddPower { m } => *m as f64 * u.powi(*m as i32 - 1),
            NonlinearityKind::Polynomial { coefficients } => {
                let mut acc = 0.0;
                for (j, c) in coefficients.iter().enumerate().skip(1).rev() {
                    acc = acc * u + j as f64 * c.at(x);
                }
                acc
            }
            NonlinearityKind::Exponential { scale } => scale * u.cosh(),
            NonlinearityKind::Custom { value, derivative, .. } => match derivative {
                Some(d) => d(u, x),
                None => {
                    let h = 1e-6 * u.abs().max(1.0);
                    (value(u + h, x) - value(u - h, x)) / (2.0 * h)
                }
            },
            NonlinearityKind::CoefficientMap { .. } => {
                panic!("coefficient-space nonlinearities have no pointwise derivative")
            }
        }
    }

    /// Whether `u` lies outside the guard ball (always false without a guard).
    pub fn outside_guard(&self, u: &DVector<f64>) -> bool {
        match &self.guard {
            Some(g) => {
                let (center, radius, vgram) = &**g;
                if center.len() != u.len() {
                    return false;
                }
                linalg::w_norm(vgram, &(u - center)) > *radius
            }
            None => false,
        }
    }
}

/// A space on which nonlinearities can be paired with basis functions.
pub trait GalerkinField: Sync {
    fn degree(&self) -> Degree;
    fn dim(&self) -> usize;
    /// `(⟨g(u), φ_i⟩)_i` for a pointwise nonlinearity.
    fn pointwise_load(&self, f: &Nonlinearity, u: &DVector<f64>) -> Result<DVector<f64>>;
    /// `(⟨g'(u) φ_j, φ_i⟩)_{ij}`.
    fn pointwise_jacobian(&self, f: &Nonlinearity, u: &DVector<f64>) -> Result<CsrMatrix<f64>>;
}

/// `⟨F(u), φ_i⟩` for every basis function of the field.
pub fn evaluate_f(f: &Nonlinearity, field: &dyn GalerkinField, u: &DVector<f64>) -> Result<DVector<f64>> {
    if u.len() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            found: u.len(),
        });
    }
    match &f.kind {
        NonlinearityKind::Zero => Ok(DVector::zeros(u.len())),
        NonlinearityKind::CoefficientMap { load, .. } => Ok(load(u)),
        _ => field.pointwise_load(f, u),
    }
}

/// Jacobian of [`evaluate_f`]; coefficient maps without an analytic Jacobian
/// are differentiated by central differences.
pub fn evaluate_jacobian(f: &Nonlinearity, field: &dyn GalerkinField, u: &DVector<f64>) -> Result<CsrMatrix<f64>> {
    match &f.kind {
        NonlinearityKind::Zero => Ok(CsrMatrix::zeros(u.len(), u.len())),
        NonlinearityKind::CoefficientMap { load, jacobian, .. } => {
            let j = match jacobian {
                Some(j) => j(u),
                None => {
                    let n = u.len();
                    let mut j = DMatrix::zeros(n, n);
                    for c in 0..n {
                        let h = 1e-6 * u[c].abs().max(1.0);
                        let mut up = u.clone();
                        let mut dn = u.clone();
                        up[c] += h;
                        dn[c] -= h;
                        j.set_column(c, &((load(&up) - load(&dn)) / (2.0 * h)));
                    }
                    j
                }
            };
            Ok(linalg::csr_from_dense(&j))
        }
        _ => field.pointwise_jacobian(f, u),
    }
}

/// Abstract-complex pairing: coefficients are treated as nodal values and
/// paired through the row sums of the Gram matrix (mass lumping). On a
/// one-dimensional space with unit Gram this is exactly `F(u)`.
pub struct LumpedField<'a> {
    complex: &'a HilbertComplex,
    degree: Degree,
    weights: DVector<f64>,
}

impl<'a> LumpedField<'a> {
    pub fn new(complex: &'a HilbertComplex, degree: Degree) -> Result<Self> {
        complex.check_degree(degree)?;
        let m = complex.gram(degree);
        let weights = linalg::spmv(m, &DVector::from_element(m.nrows(), 1.0));
        Ok(Self {
            complex,
            degree,
            weights,
        })
    }

    pub fn complex(&self) -> &HilbertComplex {
        self.complex
    }
}

impl GalerkinField for LumpedField<'_> {
    fn degree(&self) -> Degree {
        self.degree
    }

    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn pointwise_load(&self, f: &Nonlinearity, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::from_fn(u.len(), |i, _| self.weights[i] * f.value(u[i], &[])))
    }

    fn pointwise_jacobian(&self, f: &Nonlinearity, u: &DVector<f64>) -> Result<CsrMatrix<f64>> {
        let n = u.len();
        Ok(linalg::csr_from_triplets(
            n,
            n,
            (0..n).map(|i| (i, i, self.weights[i] * f.derivative(u[i], &[]))),
        ))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotoneReport {
    pub samples: usize,
    /// `min ⟨F u - F v, u - v⟩ / ‖u - v‖²` over the samples.
    pub min_ratio: f64,
    pub passed: bool,
    /// Pair achieving the minimum.
    #[serde(skip)]
    pub witness: Option<(DVector<f64>, DVector<f64>)>,
}

/// Sampled monotonicity check with seeded random pairs of amplitude `scale`.
pub fn check_monotone(
    f: &Nonlinearity,
    field: &dyn GalerkinField,
    c: &HilbertComplex,
    samples: usize,
    seed: u64,
    scale: f64,
) -> Result<MonotoneReport> {
    let k = field.degree();
    let mut rng = linalg::seeded_rng(seed);
    let mut min_ratio = f64::INFINITY;
    let mut witness = None;
    for _ in 0..samples {
        let u = linalg::random_vector(&mut rng, field.dim()) * scale;
        let v = linalg::random_vector(&mut rng, field.dim()) * scale;
        let du = &u - &v;
        let dist2 = c.w_inner(k, &du, &du);
        if dist2 == 0.0 {
            continue;
        }
        let pairing = (evaluate_f(f, field, &u)? - evaluate_f(f, field, &v)?).dot(&du);
        let ratio = pairing / dist2;
        if ratio < min_ratio {
            min_ratio = ratio;
            witness = Some((u, v));
        }
    }
    Ok(MonotoneReport {
        samples,
        min_ratio,
        passed: min_ratio >= -1e-12,
        witness,
    })
}

/// Largest relative jump of `t ↦ ⟨F(u + t v), w⟩` over a uniform sampling of
/// `[0, 1]`, compared with its total variation; small values indicate
/// continuity along the segment.
pub fn hemicontinuity_probe(
    f: &Nonlinearity,
    field: &dyn GalerkinField,
    u: &DVector<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
    steps: usize,
) -> Result<f64> {
    let vals = (0..=steps)
        .map(|i| {
            let t = i as f64 / steps as f64;
            Ok(evaluate_f(f, field, &(u + v * t))?.dot(w))
        })
        .collect::<Result<Vec<f64>>>()?;
    let jumps: Vec<f64> = vals.windows(2).map(|p| (p[1] - p[0]).abs()).collect();
    let total: f64 = jumps.iter().sum();
    let max = jumps.iter().copied().fold(0.0, f64::max);
    Ok(if total > 0.0 { max / total } else { 0.0 })
}

/// Attaches an order-interval clamp and a local-Lipschitz guard ball.
///
/// Without an explicit interval the clamp is `±(‖u_center‖_∞ + radius)`.
/// Evaluations outside the ball of V-radius `radius` around `u_center` are
/// recorded as warnings by the solver, never treated as failures.
pub fn local_lipschitz_guard(
    f: &Nonlinearity,
    u_center: &DVector<f64>,
    radius: f64,
    interval: Option<(f64, f64)>,
    v_gram: &CsrMatrix<f64>,
) -> Nonlinearity {
    let bound = u_center.amax() + radius;
    let (lo, hi) = interval.unwrap_or((-bound, bound));
    let mut g = f.clone().with_clamp(lo, hi);
    let constant = match &f.kind {
        NonlinearityKind::OddPower { m } => *m as f64 * lo.abs().max(hi.abs()).powi(*m as i32 - 1),
        NonlinearityKind::Polynomial { coefficients } => {
            let s = lo.abs().max(hi.abs());
            coefficients
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, c)| j as f64 * c.at(&[]).abs() * s.powi(j as i32 - 1))
                .sum()
        }
        _ => f64::NAN,
    };
    g.lipschitz = Some(Lipschitz::Local { constant, radius });
    g.guard = Some(Arc::new((u_center.clone(), radius, v_gram.clone())));
    g
}
