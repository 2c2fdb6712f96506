//! Solver for `**u** + **K** F **u** = **K** f` and its mixed form.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::nonlinearity::{evaluate_f, evaluate_jacobian, GalerkinField, Nonlinearity};
use super::{HammersteinState, TraceRow};
use crate::error::{Error, Result};
use crate::linalg::{self, SparseLu};
use crate::mixed::{MixedSolution, SolutionOperators};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// `**u** ← **u** - α r` with Armijo backtracking on `‖r‖_W`.
    #[default]
    DampedFixedPoint,
    /// Newton on `r(**u**) = 0`, steps computed from the linearized mixed system.
    Newton,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HammersteinOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub strategy: Strategy,
    /// Backtracking gives up below this step length.
    pub min_damping: f64,
    pub armijo: f64,
    /// Test `⟨F u - F v, u - v⟩ ≥ -tol ‖u - v‖²_{V∩V*}` on every trial step.
    pub check_monotone: bool,
}

impl Default for HammersteinOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
            strategy: Strategy::DampedFixedPoint,
            min_damping: 1e-12,
            armijo: 1e-4,
            check_monotone: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SemilinearSolution {
    /// `(σ, u, p)`; its residuals are those of the semilinear mixed system.
    pub mixed: MixedSolution,
    pub bold_u: DVector<f64>,
    /// `‖**u** + **K** F **u** - **K** f‖_W` at the returned iterate.
    pub hammerstein_residual: f64,
    pub warnings: Vec<String>,
    /// Set when the nonlinearity is clamped to an order interval: the result
    /// is only meaningful if the discrete solution stays inside it.
    pub assumes_pointwise_control: bool,
}

struct Problem<'a, 'b> {
    ops: &'a SolutionOperators<'b>,
    field: &'a dyn GalerkinField,
    nl: &'a Nonlinearity,
    load: &'a DVector<f64>,
}

impl Problem<'_, '_> {
    /// `(r, F u)` with `r = u - **K**(b - F u)`.
    fn residual(&self, u: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let fu = evaluate_f(self.nl, self.field, u)?;
        let ku = self.ops.apply_bold_k_load(&(self.load - &fu))?;
        Ok((u - ku, fu))
    }

    fn w_norm(&self, x: &DVector<f64>) -> f64 {
        self.ops.complex.w_norm(self.ops.degree(), x)
    }

    /// Solves `(I + **K** J) d = -r` through the linearized mixed system.
    fn newton_direction(&self, u: &DVector<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
        let sys = &self.ops.system;
        let jac = evaluate_jacobian(self.nl, self.field, u)?;
        let h = &sys.harmonic;
        let (ns, nu) = (sys.n_sigma, sys.n_u);
        let mut trips: Vec<(usize, usize, f64)> = sys.matrix.triplet_iter().map(|(i, j, v)| (i, j, *v)).collect();
        trips.extend(jac.triplet_iter().map(|(i, j, v)| (ns + i, ns + j, *v)));
        if h.ncols() > 0 {
            let jh = linalg::spmm(&jac, h);
            for i in 0..nu {
                for j in 0..h.ncols() {
                    if jh[(i, j)] != 0.0 {
                        trips.push((ns + i, ns + nu + j, jh[(i, j)]));
                    }
                }
            }
        }
        let n = sys.size();
        let lu = SparseLu::new(&linalg::csr_from_triplets(n, n, trips))?;
        let g = -self.ops.load_of(&self.ops.apply_bold_l(r)?);
        let x = lu.solve(&sys.rhs(&g));
        let (_, du, dp) = sys.split(&x);
        Ok(if h.ncols() > 0 { du + h * dp } else { du })
    }
}

fn fail(reason: &'static str, res: f64, it: usize, u: &DVector<f64>, damping: f64, history: &[TraceRow]) -> Error {
    Error::Hammerstein {
        reason,
        residual: res,
        iterations: it,
        state: Box::new(HammersteinState {
            iterate: u.clone(),
            residual: res,
            iterations: it,
            damping,
            converged: false,
            history: history.to_vec(),
        }),
    }
}

/// Solves the semilinear problem for a load vector `b_i = ⟨f, φ_i⟩`.
pub fn solve_hammerstein_load(
    ops: &SolutionOperators<'_>,
    field: &dyn GalerkinField,
    nl: &Nonlinearity,
    load: &DVector<f64>,
    opts: &HammersteinOptions,
) -> Result<(SemilinearSolution, HammersteinState)> {
    assert!(opts.tol > 0.0, "tolerance must be positive");
    let prob = Problem { ops, field, nl, load };
    let mut warnings = Vec::new();
    let mut u = ops.apply_bold_k_load(load)?;
    let (mut r, mut fu) = prob.residual(&u)?;
    let mut res = prob.w_norm(&r);
    let mut history = vec![TraceRow {
        iteration: 0,
        residual: res,
        damping: 0.0,
    }];
    let mut damping = 0.0;
    let mut it = 0;
    while res > opts.tol {
        if it == opts.max_iter {
            return Err(fail("maximum iterations reached", res, it, &u, damping, &history));
        }
        it += 1;
        let dir = match opts.strategy {
            Strategy::DampedFixedPoint => -&r,
            Strategy::Newton => prob.newton_direction(&u, &r)?,
        };
        let mut alpha = 1.0;
        loop {
            let trial = &u + &dir * alpha;
            let (rt, ft) = prob.residual(&trial)?;
            let rest = prob.w_norm(&rt);
            if opts.check_monotone && !nl.is_zero() {
                let step = &trial - &u;
                let pairing = (&ft - &fu).dot(&step);
                let vv = ops.vv_norm_sq(&step)?;
                if pairing < -1e-10 * vv {
                    return Err(Error::NonMonotone { violation: -pairing / vv });
                }
            }
            if rest.is_finite() && rest <= (1.0 - opts.armijo * alpha) * res {
                u = trial;
                r = rt;
                fu = ft;
                res = rest;
                damping = alpha;
                break;
            }
            alpha *= 0.5;
            if alpha < opts.min_damping {
                return Err(fail("line search stagnated", res, it, &u, damping, &history));
            }
        }
        if nl.outside_guard(&u) && warnings.is_empty() {
            warnings.push(format!(
                "iterate left the local Lipschitz ball at iteration {it}; clamp keeps F bounded"
            ));
        }
        history.push(TraceRow {
            iteration: it,
            residual: res,
            damping,
        });
    }
    // recover (σ, u, p) from the linear problem with data f - F(**u**)
    let lin = ops.solve_load(&(load - &fu))?;
    let x = ops.system.join(&lin.sigma, &lin.u, &lin.p_coeffs);
    let f_final = evaluate_f(nl, field, &lin.bold_u())?;
    let mixed = ops.package(&x, load, Some(&f_final));
    let state = HammersteinState {
        iterate: u.clone(),
        residual: res,
        iterations: it,
        damping,
        converged: true,
        history,
    };
    let sol = SemilinearSolution {
        mixed,
        bold_u: u,
        hammerstein_residual: res,
        warnings,
        assumes_pointwise_control: nl.clamp.is_some(),
    };
    Ok((sol, state))
}

/// Solves the semilinear problem for data `f` given by coefficients in `W^k`.
pub fn solve_hammerstein(
    ops: &SolutionOperators<'_>,
    field: &dyn GalerkinField,
    nl: &Nonlinearity,
    f: &DVector<f64>,
    opts: &HammersteinOptions,
) -> Result<(SemilinearSolution, HammersteinState)> {
    solve_hammerstein_load(ops, field, nl, &ops.load_of(f), opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeNorm {
    /// `‖**u** - **u**′‖_{V∩V*}`
    Intersection,
    /// `‖σ - σ′‖_V + ‖u - u′‖_V + ‖p - p′‖`
    Mixed,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LipschitzProbe {
    pub ratio: f64,
    /// `‖**K**‖` as a map `W → V∩V*` for the intersection norm; `None` for the
    /// mixed norm, whose constant is only measured.
    pub bound: Option<f64>,
    pub violation: bool,
}

/// `‖**K**‖` as a map `W → V∩V*`. Since `⟨**K** g, v⟩_{V∩V*} = ⟨g, v⟩`, this
/// equals `sqrt(‖**K**‖_{W→W})`.
pub fn bold_k_norm_into_intersection(ops: &SolutionOperators<'_>) -> Result<f64> {
    Ok(ops.operator_norm_k()?.value.sqrt())
}

/// Measures the Lipschitz ratio of the data-to-solution map between `f` and
/// `f2`. Pass `bound` to reuse a precomputed `‖**K**‖`.
#[allow(clippy::too_many_arguments)]
pub fn solution_map_lipschitz_probe(
    ops: &SolutionOperators<'_>,
    field: &dyn GalerkinField,
    nl: &Nonlinearity,
    f: &DVector<f64>,
    f2: &DVector<f64>,
    norm: ProbeNorm,
    opts: &HammersteinOptions,
    bound: Option<f64>,
) -> Result<LipschitzProbe> {
    let c = ops.complex;
    let k = ops.degree();
    let df = c.w_norm(k, &(f - f2));
    let bound = match norm {
        ProbeNorm::Intersection => Some(match bound {
            Some(b) => b,
            None => bold_k_norm_into_intersection(ops)?,
        }),
        ProbeNorm::Mixed => None,
    };
    if df == 0.0 {
        return Ok(LipschitzProbe {
            ratio: 0.0,
            bound,
            violation: false,
        });
    }
    let (a, _) = solve_hammerstein(ops, field, nl, f, opts)?;
    let (b, _) = solve_hammerstein(ops, field, nl, f2, opts)?;
    let num = match norm {
        ProbeNorm::Intersection => ops.vv_norm(&(&a.bold_u - &b.bold_u))?,
        ProbeNorm::Mixed => {
            c.v_norm(k - 1, &(&a.mixed.sigma - &b.mixed.sigma))
                + c.v_norm(k, &(&a.mixed.u - &b.mixed.u))
                + c.w_norm(k, &(&a.mixed.p - &b.mixed.p))
        }
    };
    let ratio = num / df;
    Ok(LipschitzProbe {
        ratio,
        bound,
        violation: bound.is_some_and(|b| ratio > b * (1.0 + 1e-8)),
    })
}
