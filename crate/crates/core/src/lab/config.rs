//! Study configuration files (JSON).
//!
//! ```json
//! {
//!   "name": "interval_linear",
//!   "problem": "interval_linear",
//!   "mesh": { "family": "interval", "levels": [8, 16, 32, 64] },
//!   "rates": [ { "norm": "v", "expected": 1.0 }, { "norm": "w", "expected": 2.0 } ]
//! }
//! ```
//!
//! Unknown keys are rejected. Every section except `name` and `mesh` is
//! optional; see the field docs for defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::complex::Degree;
use crate::crimes::DataMode;
use crate::derham::{Case, Flavor};
use crate::error::{Error, Result};
use crate::mixed::LinearSolver;
use crate::semilinear::{HammersteinOptions, Nonlinearity, Strategy};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub name: String,
    /// Manufactured case (`interval_linear`, `interval_cubic`, `square_linear`,
    /// `square_cubic`); required by `study` and `solve`.
    #[serde(default)]
    pub problem: Option<String>,
    #[serde(default)]
    pub degree: Degree,
    pub mesh: MeshSpec,
    #[serde(default = "default_flavor")]
    pub flavor: Flavor,
    /// Overrides the case's own nonlinearity.
    #[serde(default)]
    pub nonlinearity: Option<NonlinearitySpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    /// Norms whose rates are fitted and reported; all of them by default.
    #[serde(default = "RateNorm::all")]
    pub norms: Vec<RateNorm>,
    #[serde(default)]
    pub rates: Vec<RateAssertion>,
    #[serde(default)]
    pub crime: Option<CrimeSpec>,
    #[serde(default)]
    pub coefficients: Option<CoefficientSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub outputs: OutputSpec,
}

fn default_flavor() -> Flavor {
    Flavor::Essential
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshFamily {
    /// `[0, 1]` with `n` elements.
    Interval,
    /// `[0, 1]²` with `2n²` triangles.
    Square,
    /// Regular `n`-gon on the unit circle.
    Cycle,
    /// `n` vertices on an ellipse; refinement snaps new vertices to the curve.
    Ellipse,
}

impl MeshFamily {
    pub fn dim(self) -> usize {
        match self {
            MeshFamily::Square => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub family: MeshFamily,
    /// Resolutions `n`, strictly increasing.
    pub levels: Vec<usize>,
    /// Semi-axes `[a, b]` for the ellipse family.
    #[serde(default)]
    pub ellipse: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    Zero,
    OddPower {
        m: u32,
        #[serde(default)]
        clamp: Option<[f64; 2]>,
    },
    /// `scale · sinh(u)`.
    Exponential {
        scale: f64,
        #[serde(default)]
        clamp: Option<[f64; 2]>,
    },
    /// `Σ_j a_j u^j` with constant coefficients.
    Polynomial {
        coefficients: Vec<f64>,
        #[serde(default)]
        clamp: Option<[f64; 2]>,
    },
}

impl NonlinearitySpec {
    pub fn build(&self) -> Result<Nonlinearity> {
        use crate::semilinear::{Coefficient, NonlinearityKind};
        let (nl, clamp) = match self {
            NonlinearitySpec::Zero => (Nonlinearity::zero(), None),
            NonlinearitySpec::OddPower { m, clamp } => {
                if m % 2 == 0 {
                    return Err(Error::Config(format!("odd_power needs an odd exponent, got {m}")));
                }
                (Nonlinearity::odd_power(*m), *clamp)
            }
            NonlinearitySpec::Exponential { scale, clamp } => {
                if *scale < 0.0 {
                    return Err(Error::Config("exponential scale must be nonnegative".into()));
                }
                (Nonlinearity::new(NonlinearityKind::Exponential { scale: *scale }), *clamp)
            }
            NonlinearitySpec::Polynomial { coefficients, clamp } => (
                Nonlinearity::polynomial(coefficients.iter().map(|&c| Coefficient::Constant(c)).collect()),
                *clamp,
            ),
        };
        Ok(match clamp {
            Some([lo, hi]) if lo <= hi => nl.with_clamp(lo, hi),
            Some([lo, hi]) => return Err(Error::Config(format!("clamp interval [{lo}, {hi}] is empty"))),
            None => nl,
        })
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default)]
    pub linear: LinearSolver,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_strategy() -> Strategy {
    Strategy::Newton
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    500
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            linear: LinearSolver::Direct,
            strategy: default_strategy(),
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

impl SolverSpec {
    pub fn hammerstein(&self) -> HammersteinOptions {
        HammersteinOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            strategy: self.strategy,
            ..HammersteinOptions::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateNorm {
    /// `‖u - u_h‖_W`
    W,
    /// `‖u - u_h‖_V`
    V,
    /// `‖σ - σ_h‖_V`
    SigmaV,
    /// `‖p - p_h‖_W`
    P,
}

impl RateNorm {
    pub fn all() -> Vec<RateNorm> {
        vec![RateNorm::W, RateNorm::V, RateNorm::SigmaV, RateNorm::P]
    }

    pub fn column(self) -> &'static str {
        match self {
            RateNorm::W => "err_W",
            RateNorm::V => "err_V",
            RateNorm::SigmaV => "err_sigma_V",
            RateNorm::P => "err_p",
        }
    }
}

fn default_rate_tolerance() -> f64 {
    0.15
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateAssertion {
    pub norm: RateNorm,
    pub expected: f64,
    #[serde(default = "default_rate_tolerance")]
    pub tolerance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrimeData {
    /// L² projection of the case's source on the reference complex.
    Source,
    /// Seeded uniform random coefficients in `[-1, 1)`.
    Random,
}

fn default_refinements() -> usize {
    2
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrimeSpec {
    /// Resolution of the discrete complex; must be one of the mesh levels.
    pub level: usize,
    /// Uniform refinements from the discrete mesh to the reference mesh.
    #[serde(default = "default_refinements")]
    pub reference_refinements: usize,
    pub epsilons: Vec<f64>,
    /// Rule for `f_h`.
    #[serde(default = "default_data_mode")]
    pub data: DataMode,
    #[serde(default = "default_crime_data")]
    pub vector: CrimeData,
    #[serde(default)]
    pub expected_exponent: Option<f64>,
    #[serde(default = "default_rate_tolerance")]
    pub tolerance: f64,
}

fn default_data_mode() -> DataMode {
    DataMode::Adjoint
}

fn default_crime_data() -> CrimeData {
    CrimeData::Source
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientName {
    Delta,
    Eta,
    Mu,
}

impl CoefficientName {
    pub fn name(self) -> &'static str {
        match self {
            CoefficientName::Delta => "delta",
            CoefficientName::Eta => "eta",
            CoefficientName::Mu => "mu",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderAssertion {
    pub coefficient: CoefficientName,
    pub order: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    /// Uniform refinements from the finest level to the reference complex.
    #[serde(default = "default_refinements")]
    pub reference_refinements: usize,
    #[serde(default)]
    pub expected: Vec<OrderAssertion>,
}

/// Output file names, relative to the output directory. Defaults derive from
/// the study name.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub csv: Option<String>,
    #[serde(default)]
    pub trace: Option<String>,
    #[serde(default)]
    pub manifest: Option<String>,
    #[serde(default)]
    pub crime_csv: Option<String>,
    #[serde(default)]
    pub projection_csv: Option<String>,
    #[serde(default)]
    pub coefficients_csv: Option<String>,
    /// Also write a gnuplot script next to the study CSV.
    #[serde(default)]
    pub gnuplot: bool,
}

impl OutputSpec {
    fn or(name: &Option<String>, default: String) -> String {
        name.clone().unwrap_or(default)
    }
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: StudyConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Checks everything that does not need a solve.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("`name` must not be empty".into()));
        }
        let levels = &self.mesh.levels;
        if levels.is_empty() {
            return Err(Error::Config("`mesh.levels` must list at least one resolution".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("`mesh.levels` must be strictly increasing, got {levels:?}")));
        }
        let min_n = match self.mesh.family {
            MeshFamily::Cycle | MeshFamily::Ellipse => 3,
            _ => 1,
        };
        if levels[0] < min_n {
            return Err(Error::Config(format!("{:?} meshes need n >= {min_n}", self.mesh.family)));
        }
        match (self.mesh.family, self.mesh.ellipse) {
            (MeshFamily::Ellipse, None) => {
                return Err(Error::Config("the ellipse family needs `mesh.ellipse: [a, b]`".into()))
            }
            (MeshFamily::Ellipse, Some([a, b])) if !(a > 0.0 && b > 0.0) => {
                return Err(Error::Config("ellipse semi-axes must be positive".into()))
            }
            (MeshFamily::Ellipse, _) => {}
            (_, Some(_)) => return Err(Error::Config("`mesh.ellipse` only applies to the ellipse family".into())),
            _ => {}
        }
        let top = self.mesh.family.dim() as Degree;
        if !(0..=top).contains(&self.degree) {
            return Err(Error::Config(format!("degree {} outside 0..={top} for this mesh family", self.degree)));
        }
        if let Some(p) = &self.problem {
            let case = Case::from_name(p).map_err(|_| {
                Error::Config(format!(
                    "unknown problem `{p}`; expected one of {}",
                    Case::ALL.map(Case::name).join(", ")
                ))
            })?;
            if case.dim() != self.mesh.family.dim() || matches!(self.mesh.family, MeshFamily::Cycle | MeshFamily::Ellipse) {
                return Err(Error::Config(format!("problem `{p}` does not live on {:?} meshes", self.mesh.family)));
            }
            if self.degree != 0 {
                return Err(Error::Config("manufactured problems are posed on 0-forms; set `degree: 0`".into()));
            }
            if self.flavor != Flavor::Essential {
                return Err(Error::Config("manufactured problems need `flavor: essential`".into()));
            }
        }
        if let Some(n) = &self.nonlinearity {
            n.build()?;
        }
        if !(self.solver.tol > 0.0) {
            return Err(Error::Config("`solver.tol` must be positive".into()));
        }
        for r in &self.rates {
            if !(r.tolerance >= 0.0) {
                return Err(Error::Config("rate tolerances must be nonnegative".into()));
            }
        }
        if let Some(c) = &self.crime {
            if !levels.contains(&c.level) {
                return Err(Error::Config(format!("`crime.level` {} is not one of the mesh levels", c.level)));
            }
            if c.epsilons.is_empty() || c.epsilons.iter().any(|e| !(*e >= 0.0 && *e < 1.0)) {
                return Err(Error::Config("`crime.epsilons` must be a nonempty list in [0, 1)".into()));
            }
            if c.reference_refinements == 0 {
                return Err(Error::Config("`crime.reference_refinements` must be at least 1".into()));
            }
            if c.vector == CrimeData::Source && self.problem.is_none() {
                return Err(Error::Config("`crime.vector: source` needs a `problem`".into()));
            }
        }
        if let Some(c) = &self.coefficients {
            if levels.windows(2).any(|w| w[1] != 2 * w[0]) {
                return Err(Error::Config("coefficient studies need each level to double the previous one".into()));
            }
            if c.reference_refinements == 0 {
                return Err(Error::Config("`coefficients.reference_refinements` must be at least 1".into()));
            }
        }
        Ok(())
    }

    /// The study's nonlinearity: the explicit override, else the case's own.
    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        match (&self.nonlinearity, &self.problem) {
            (Some(n), _) => n.build(),
            (None, Some(p)) => Ok(Case::from_name(p)?.nonlinearity()),
            (None, None) => Ok(Nonlinearity::zero()),
        }
    }

    pub fn csv_name(&self) -> String {
        OutputSpec::or(&self.outputs.csv, format!("{}.csv", self.name))
    }

    pub fn trace_name(&self) -> String {
        OutputSpec::or(&self.outputs.trace, format!("{}_trace.csv", self.name))
    }

    pub fn manifest_name(&self) -> String {
        OutputSpec::or(&self.outputs.manifest, format!("{}_manifest.json", self.name))
    }

    pub fn crime_csv_name(&self) -> String {
        OutputSpec::or(&self.outputs.crime_csv, format!("{}_crime.csv", self.name))
    }

    pub fn projection_csv_name(&self) -> String {
        OutputSpec::or(&self.outputs.projection_csv, format!("{}_projection.csv", self.name))
    }

    pub fn coefficients_csv_name(&self) -> String {
        OutputSpec::or(&self.outputs.coefficients_csv, format!("{}_coefficients.csv", self.name))
    }
}
