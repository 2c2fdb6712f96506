//! Refinement, crime and coefficient studies with CSV/JSON artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::coefficients::{best_approx_error, measure_coefficients, CoefficientReport};
use super::config::{CoefficientName, CrimeData, RateNorm, StudyConfig};
use super::family::{family_mesh, hierarchy};
use super::rates::{fit_rate, RateCheck, RateFit};
use crate::crimes::{crime_sweep, project_data, synth_crime, CrimeNonlinearity, DataMode, GapReport};
use crate::derham::manufactured::LOAD_ORDER;
use crate::derham::{manufactured_problem, whitney_complex, Case, ScalarField};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mixed::SolutionOperators;
use crate::semilinear::{solve_hammerstein_load, SemilinearSolution, TraceRow};

/// One row of the study CSV.
#[derive(Clone, Debug, Serialize)]
pub struct LevelResult {
    pub level: usize,
    pub h: f64,
    pub dofs: usize,
    pub err_w: f64,
    pub err_v: f64,
    pub err_sigma_v: f64,
    pub err_p: f64,
    pub iters: usize,
    pub residual: f64,
    pub trace: Vec<TraceRow>,
    pub warnings: Vec<String>,
}

impl LevelResult {
    pub fn error(&self, norm: RateNorm) -> f64 {
        match norm {
            RateNorm::W => self.err_w,
            RateNorm::V => self.err_v,
            RateNorm::SigmaV => self.err_sigma_v,
            RateNorm::P => self.err_p,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    pub name: String,
    /// Successful levels in increasing resolution.
    pub levels: Vec<LevelResult>,
    pub fits: Vec<RateFit>,
    pub checks: Vec<RateCheck>,
    /// First failing level and its error, if any.
    pub failure: Option<(usize, String)>,
    pub passed: bool,
}

fn case_of(cfg: &StudyConfig) -> Result<Case> {
    let name = cfg
        .problem
        .as_deref()
        .ok_or_else(|| Error::Config("this command needs a `problem`".into()))?;
    Case::from_name(name)
}

/// Solves the configured problem at resolution `n` and measures its errors.
pub fn solve_level(cfg: &StudyConfig, n: usize) -> Result<(LevelResult, SemilinearSolution)> {
    let case = case_of(cfg)?;
    let mesh = family_mesh(&cfg.mesh, n)?;
    let w = whitney_complex(&mesh, cfg.flavor)?;
    let problem = manufactured_problem(case.name(), &w)?;
    let nl = cfg.nonlinearity()?;
    let ops = SolutionOperators::with_solver(w.complex(), 0, cfg.solver.linear)?;
    let field = ScalarField::new(&w, 0)?;
    let (sol, state) = solve_hammerstein_load(&ops, &field, &nl, &problem.load, &cfg.solver.hammerstein())?;
    let errs = problem.errors(&w, &sol.mixed.u);
    let c = w.complex();
    let row = LevelResult {
        level: n,
        h: mesh.h(),
        dofs: c.dim(0),
        err_w: errs.l2,
        err_v: errs.v(),
        // σ lives in the zero space below 0-forms; the exact p is zero
        err_sigma_v: 0.0,
        err_p: c.w_norm(0, &sol.mixed.p),
        iters: state.iterations,
        residual: sol.mixed.residual_norm,
        trace: state.history,
        warnings: sol.warnings.clone(),
    };
    Ok((row, sol))
}

/// Runs every level (concurrently) and fits rates. Levels after the first
/// failure are dropped and the failure is recorded.
pub fn run_study(cfg: &StudyConfig) -> Result<RateReport> {
    cfg.validate()?;
    case_of(cfg)?;
    if cfg.mesh.levels.len() < 3 {
        return Err(Error::Config("rate fitting needs at least 3 mesh levels".into()));
    }
    let results: Vec<Result<LevelResult>> = cfg
        .mesh
        .levels
        .par_iter()
        .map(|&n| solve_level(cfg, n).map(|(r, _)| r))
        .collect();
    let mut levels = Vec::new();
    let mut failure = None;
    for (n, r) in cfg.mesh.levels.iter().zip(results) {
        match r {
            Ok(row) => levels.push(row),
            Err(e) => {
                failure = Some((*n, e.to_string()));
                break;
            }
        }
    }
    let h: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let fits: Vec<RateFit> = cfg
        .norms
        .iter()
        .map(|&norm| {
            let e: Vec<f64> = levels.iter().map(|l| l.error(norm)).collect();
            fit_rate(norm.column(), &h, &e)
        })
        .collect();
    let checks: Vec<RateCheck> = cfg
        .rates
        .iter()
        .map(|a| {
            let e: Vec<f64> = levels.iter().map(|l| l.error(a.norm)).collect();
            let fit = fit_rate(a.norm.column(), &h, &e);
            RateCheck::new(a.norm.column(), a.expected, a.tolerance, fit.finest.map(|f| f.slope))
        })
        .collect();
    let passed = failure.is_none() && checks.iter().all(|c| c.passed);
    Ok(RateReport {
        name: cfg.name.clone(),
        levels,
        fits,
        checks,
        failure,
        passed,
    })
}

/// Fixed-format float for CSV output.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.12e}")
}

pub const STUDY_COLUMNS: [&str; 9] = ["level", "h", "dofs", "err_W", "err_V", "err_sigma_V", "err_p", "iters", "residual"];

pub fn study_csv(report: &RateReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(STUDY_COLUMNS)?;
    for l in &report.levels {
        w.write_record([
            l.level.to_string(),
            fmt_f64(l.h),
            l.dofs.to_string(),
            fmt_f64(l.err_w),
            fmt_f64(l.err_v),
            fmt_f64(l.err_sigma_v),
            fmt_f64(l.err_p),
            l.iters.to_string(),
            fmt_f64(l.residual),
        ])?;
    }
    finish(w)
}

pub fn trace_csv(report: &RateReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["level", "iteration", "residual", "damping"])?;
    for l in &report.levels {
        for t in &l.trace {
            w.write_record([l.level.to_string(), t.iteration.to_string(), fmt_f64(t.residual), fmt_f64(t.damping)])?;
        }
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// Log-log gnuplot script for the study CSV.
pub fn gnuplot_script(csv_name: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set logscale xy");
    let _ = writeln!(s, "set xlabel 'h'");
    let _ = writeln!(s, "set ylabel 'error'");
    let _ = writeln!(s, "set key left top");
    let _ = writeln!(
        s,
        "plot '{csv_name}' every ::1 using 2:4 with linespoints title 'W', \\\n     '{csv_name}' every ::1 using 2:5 with linespoints title 'V'"
    );
    s
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionRow {
    pub epsilon: f64,
    pub h: f64,
    /// `‖π_h f - i_h* f‖_h`
    pub discrepancy: f64,
    /// `‖I - J_h‖ ‖f‖`
    pub j_term: f64,
    /// `E(f)` on the reference complex.
    pub best_approx: f64,
    /// `discrepancy / (j_term + best_approx)`
    pub constant: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrimeStudyReport {
    pub name: String,
    pub h: f64,
    pub rows: Vec<GapReport>,
    pub exponent: Option<f64>,
    pub projection: Vec<ProjectionRow>,
    /// `max C / min C` over the projection rows with `ε > 0`.
    pub constant_spread: f64,
    pub checks: Vec<RateCheck>,
    pub passed: bool,
}

/// Tolerance for gaps at `ε = 0` with adjoint data.
pub const UNPERTURBED_GAP_TOL: f64 = 1e-9;
/// Largest accepted `max C / min C` within one sweep.
pub const MAX_CONSTANT_SPREAD: f64 = 2.0;

pub fn run_crime_study(cfg: &StudyConfig) -> Result<CrimeStudyReport> {
    cfg.validate()?;
    let spec = cfg
        .crime
        .as_ref()
        .ok_or_else(|| Error::Config("`crime` section missing".into()))?;
    let k = cfg.degree;
    let hier = hierarchy(&cfg.mesh, cfg.flavor, spec.level, spec.reference_refinements)?;
    let coarse = &hier.complexes[0];
    let fine = hier.finest();
    let morph = &hier.to_finest[0];
    let (vh, vref) = (coarse.complex(), fine.complex());
    let f_ref = match spec.vector {
        CrimeData::Source => {
            if k != 0 {
                return Err(Error::Config("`crime.vector: source` needs degree 0".into()));
            }
            let case = case_of(cfg)?;
            let load = ScalarField::new(fine, 0)?.load_of_function(|x| case.source(x), LOAD_ORDER);
            vref.gram_solve(0, &load)?
        }
        CrimeData::Random => {
            let mut rng = linalg::seeded_rng(cfg.seed);
            linalg::random_vector(&mut rng, vref.dim(k))
        }
    };
    let nl = cfg.nonlinearity()?;
    let field = if nl.is_zero() { None } else { Some(ScalarField::new(fine, k)?) };
    let cn = field.as_ref().map(|f| CrimeNonlinearity {
        f: &nl,
        reference_field: f,
        choice: spec.data,
        opts: cfg.solver.hammerstein(),
    });
    let sweep = crime_sweep(vh, vref, morph, k, &f_ref, &spec.epsilons, cfg.seed, spec.data, cn.as_ref())?;
    let h = coarse.mesh.h();

    let best = best_approx_error(vref, k, morph.inject(k), &f_ref)?;
    let f_norm = vref.w_norm(k, &f_ref);
    let projection = spec
        .epsilons
        .par_iter()
        .map(|&eps| {
            let setup = synth_crime(vh, vref, morph, eps, cfg.seed)?;
            let pd = project_data(&setup, k, &f_ref, DataMode::Interpolation)?;
            let j_term = setup.crime_magnitude(k) * f_norm;
            Ok(ProjectionRow {
                epsilon: eps,
                h,
                discrepancy: pd.discrepancy,
                j_term,
                best_approx: best,
                constant: pd.discrepancy / (j_term + best),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // at ε = 0 the J term vanishes and C measures a different ratio
    let cs: Vec<f64> = projection
        .iter()
        .filter(|p| p.epsilon > 0.0)
        .map(|p| p.constant)
        .filter(|c| c.is_finite() && *c > 0.0)
        .collect();
    let constant_spread = match (cs.iter().copied().reduce(f64::max), cs.iter().copied().reduce(f64::min)) {
        (Some(a), Some(b)) => a / b,
        _ => 1.0,
    };

    let mut checks = Vec::new();
    if let Some(expected) = spec.expected_exponent {
        checks.push(RateCheck::new("gap_exponent", expected, spec.tolerance, sweep.exponent));
    }
    if spec.data == DataMode::Adjoint {
        for r in sweep.rows.iter().filter(|r| r.epsilon == 0.0) {
            checks.push(RateCheck {
                norm: "gap_at_zero".into(),
                expected: 0.0,
                tolerance: UNPERTURBED_GAP_TOL,
                measured: Some(r.gap),
                passed: r.gap <= UNPERTURBED_GAP_TOL,
            });
        }
    }
    if cs.len() >= 2 {
        checks.push(RateCheck {
            norm: "constant_spread".into(),
            expected: 1.0,
            tolerance: MAX_CONSTANT_SPREAD - 1.0,
            measured: Some(constant_spread),
            passed: constant_spread <= MAX_CONSTANT_SPREAD,
        });
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(CrimeStudyReport {
        name: cfg.name.clone(),
        h,
        rows: sweep.rows,
        exponent: sweep.exponent,
        projection,
        constant_spread,
        checks,
        passed,
    })
}

pub fn crime_csv(report: &CrimeStudyReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epsilon", "h", "gap", "bound_f_term", "bound_J_term", "ratio"])?;
    for r in &report.rows {
        w.write_record([
            fmt_f64(r.epsilon),
            fmt_f64(report.h),
            fmt_f64(r.gap),
            fmt_f64(r.bound_f_term),
            fmt_f64(r.bound_j_term),
            fmt_f64(r.ratio),
        ])?;
    }
    finish(w)
}

pub fn projection_csv(report: &CrimeStudyReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epsilon", "h", "discrepancy", "j_term", "best_approx", "constant"])?;
    for r in &report.projection {
        w.write_record([
            fmt_f64(r.epsilon),
            fmt_f64(r.h),
            fmt_f64(r.discrepancy),
            fmt_f64(r.j_term),
            fmt_f64(r.best_approx),
            fmt_f64(r.constant),
        ])?;
    }
    finish(w)
}

#[derive(Clone, Debug, Serialize)]
pub struct CoefficientStudyReport {
    pub name: String,
    pub report: CoefficientReport,
    pub checks: Vec<RateCheck>,
    pub passed: bool,
}

pub fn run_coefficient_study(cfg: &StudyConfig) -> Result<CoefficientStudyReport> {
    cfg.validate()?;
    let spec = cfg
        .coefficients
        .as_ref()
        .ok_or_else(|| Error::Config("`coefficients` section missing".into()))?;
    let levels = &cfg.mesh.levels;
    let hier = hierarchy(&cfg.mesh, cfg.flavor, levels[0], levels.len() - 1 + spec.reference_refinements)?;
    let family: Vec<_> = (0..levels.len())
        .map(|l| (hier.complexes[l].mesh.h(), hier.to_finest[l].clone()))
        .collect();
    let report = measure_coefficients(hier.finest().complex(), &family, cfg.degree)?;
    let checks = spec
        .expected
        .iter()
        .map(|a| {
            let fit = match a.coefficient {
                CoefficientName::Delta => report.delta_order,
                CoefficientName::Eta => report.eta_order,
                CoefficientName::Mu => report.mu_order,
            };
            RateCheck::new(a.coefficient.name(), a.order, a.tolerance, fit.map(|f| f.slope))
        })
        .collect::<Vec<_>>();
    let passed = checks.iter().all(|c| c.passed);
    Ok(CoefficientStudyReport {
        name: cfg.name.clone(),
        report,
        checks,
        passed,
    })
}

pub fn coefficients_csv(report: &CoefficientReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["level", "h", "delta", "eta", "mu", "converged"])?;
    for (i, l) in report.levels.iter().enumerate() {
        let conv = l.delta.converged && l.eta.converged && l.mu.converged;
        w.write_record([
            i.to_string(),
            fmt_f64(l.h),
            fmt_f64(l.delta.value),
            fmt_f64(l.eta.value),
            fmt_f64(l.mu.value),
            conv.to_string(),
        ])?;
    }
    finish(w)
}

/// Run manifest written next to the CSV outputs.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub name: String,
    pub command: String,
    pub config_sha256: String,
    pub version: String,
    pub seed: u64,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
    pub passed: bool,
    pub failure: Option<String>,
}

/// SHA-256 of the canonical JSON form of a configuration.
pub fn config_hash(cfg: &StudyConfig) -> Result<String> {
    let text = serde_json::to_string(cfg)?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

/// Writes `files` (name, contents) into `dir` and a manifest describing them.
pub fn write_artifacts(
    cfg: &StudyConfig,
    dir: &Path,
    command: &str,
    files: &[(String, String)],
    passed: bool,
    failure: Option<String>,
    started: Instant,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        written.push(path);
    }
    let manifest = Manifest {
        name: cfg.name.clone(),
        command: command.to_string(),
        config_sha256: config_hash(cfg)?,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        outputs: files.iter().map(|(n, _)| n.clone()).collect(),
        passed,
        failure,
    };
    let path = dir.join(cfg.manifest_name());
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    written.push(path);
    Ok(written)
}

/// The study CSV, trace CSV and optional gnuplot script for a report.
pub fn study_files(cfg: &StudyConfig, report: &RateReport) -> Result<Vec<(String, String)>> {
    let mut files = vec![(cfg.csv_name(), study_csv(report)?), (cfg.trace_name(), trace_csv(report)?)];
    if cfg.outputs.gnuplot {
        let name = cfg.csv_name();
        let script = name.strip_suffix(".csv").unwrap_or(&name).to_string() + ".gp";
        files.push((script, gnuplot_script(&name)));
    }
    Ok(files)
}

/// Discrete solution of the configured problem at its finest level.
#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub level: LevelResult,
    pub sigma: DVector<f64>,
    pub u: DVector<f64>,
    pub p: DVector<f64>,
    pub hammerstein_residual: f64,
}

pub fn run_solve(cfg: &StudyConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let n = *cfg.mesh.levels.last().expect("validated nonempty");
    let (level, sol) = solve_level(cfg, n)?;
    Ok(SolveReport {
        level,
        sigma: sol.mixed.sigma,
        u: sol.mixed.u,
        p: sol.mixed.p,
        hammerstein_residual: sol.hammerstein_residual,
    })
}
