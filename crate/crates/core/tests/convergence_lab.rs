mod common;

use common::*;
use hodgelab::derham::{Flavor, ScalarField};
use hodgelab::lab::rates::nonincreasing_with_coarse_slack;
use hodgelab::lab::study::STUDY_COLUMNS;
use hodgelab::lab::{
    best_approx_error, crime_csv, fit_slope, hierarchy, measure_coefficients, projection_csv, run_coefficient_study,
    run_crime_study, run_study, study_csv, study_files, MeshFamily, MeshSpec, StudyConfig,
};
use hodgelab::linalg::to_dense;
use hodgelab::{Degree, Error, HilbertComplex};
use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use proptest::prelude::*;

fn spec(family: MeshFamily) -> MeshSpec {
    MeshSpec {
        family,
        levels: vec![4],
        ellipse: None,
    }
}

fn config(name: &str) -> StudyConfig {
    StudyConfig::load(fixture(name)).unwrap()
}

#[test]
fn best_approximation_of_members_is_zero() {
    let h = hierarchy(&spec(MeshFamily::Square), Flavor::Natural, 2, 1).unwrap();
    let fine = h.finest().complex();
    let mut r = rng(1);
    for k in 0..=2 {
        let i = h.to_finest[0].inject(k);
        let w = hodgelab::linalg::spmv(i, &random_vec(&mut r, i.ncols()));
        assert!(best_approx_error(fine, k, i, &w).unwrap() <= 1e-12 * fine.w_norm(k, &w));
    }
}

#[test]
fn best_approximation_of_orthogonal_vectors_is_the_norm() {
    let h = hierarchy(&spec(MeshFamily::Cycle), Flavor::Natural, 5, 1).unwrap();
    let fine = h.finest().complex();
    for k in 0..=1 {
        let i = to_dense(h.to_finest[0].inject(k));
        let m = gram(fine, k);
        let z = svd_null_space(&(i.transpose() * &m), fine.dim(k));
        let w = z.column(0).into_owned();
        let e = best_approx_error(fine, k, h.to_finest[0].inject(k), &w).unwrap();
        assert!((e - fine.w_norm(k, &w)).abs() < 1e-12);
    }
}

#[test]
fn best_approximation_rejects_dependent_columns() {
    let h = hierarchy(&spec(MeshFamily::Interval), Flavor::Natural, 4, 1).unwrap();
    let i = to_dense(h.to_finest[0].inject(0));
    let doubled = DMatrix::from_columns(&[i.column(0).into_owned(), i.column(0).into_owned()]);
    let w = DVector::from_element(i.nrows(), 1.0);
    let r = best_approx_error(h.finest().complex(), 0, &CsrMatrix::from(&doubled), &w);
    assert!(matches!(r, Err(Error::RankDeficient)));
}

#[test]
fn best_approximation_of_a_smooth_function_decays_at_second_order() {
    // sin(πx) samples on a fixed fine mesh, approximated from coarser levels;
    // the W-norm distance to piecewise linears drops by 4 per halving of h
    let h = hierarchy(&spec(MeshFamily::Interval), Flavor::Natural, 4, 5).unwrap();
    let fine = h.finest();
    let w = DVector::from_fn(fine.complex().dim(0), |j, _| {
        (std::f64::consts::PI * fine.mesh.vertices()[j][0]).sin()
    });
    let e: Vec<f64> = (0..4)
        .map(|l| best_approx_error(fine.complex(), 0, h.to_finest[l].inject(0), &w).unwrap())
        .collect();
    for p in e.windows(2) {
        let ratio = p[0] / p[1];
        assert!((ratio / 4.0 - 1.0).abs() <= 0.15, "{ratio}");
    }
}

/// `‖T‖` from the dense pencil `(Tᵀ M_b T, M_a)`.
fn dense_operator_norm(t: &DMatrix<f64>, m_a: &DMatrix<f64>, m_b: &DMatrix<f64>) -> f64 {
    let li = m_a.clone().cholesky().unwrap().l().try_inverse().unwrap();
    let a = &li * (t.transpose() * m_b * t) * li.transpose();
    ((&a + a.transpose()) * 0.5).symmetric_eigen().eigenvalues.max().max(0.0).sqrt()
}

/// Columns `u(e_j)` of the solution operator from the dense saddle oracle.
fn dense_k(c: &HilbertComplex, k: Degree) -> DMatrix<f64> {
    let m = gram(c, k);
    let cols: Vec<DVector<f64>> = (0..c.dim(k)).map(|j| dense_saddle_solve(c, k, &m.column(j).into_owned()).u).collect();
    DMatrix::from_columns(&cols)
}

#[test]
fn delta_and_mu_match_dense_operator_norms() {
    for (family, flavor, n, k) in [
        (MeshFamily::Interval, Flavor::Essential, 4, 0),
        (MeshFamily::Interval, Flavor::Natural, 4, 0),
        (MeshFamily::Cycle, Flavor::Natural, 4, 1),
    ] {
        let h = hierarchy(&spec(family), flavor, n, 2).unwrap();
        let fine = h.finest().complex();
        let levels: Vec<_> = (0..2).map(|l| (h.complexes[l].mesh.h(), h.to_finest[l].clone())).collect();
        let rep = measure_coefficients(fine, &levels, k).unwrap();
        let m = gram(fine, k);
        let kk = dense_k(fine, k);
        let hb = dense_harmonic(fine, k);
        let p_h = &hb * hb.transpose() * &m;
        for (l, (_, morph)) in levels.iter().enumerate() {
            let pi = to_dense(morph.inject(k)) * to_dense(morph.project(k));
            let e = DMatrix::identity(fine.dim(k), fine.dim(k)) - pi;
            let delta = dense_operator_norm(&(&e * &kk), &m, &m);
            let mu = dense_operator_norm(&(&e * &p_h), &m, &m);
            assert!((rep.levels[l].delta.value - delta).abs() <= 1e-6 * delta.max(1e-12), "{family:?}");
            assert!((rep.levels[l].mu.value - mu).abs() <= 1e-6 * mu.max(1e-9), "{family:?}");
            assert!(rep.levels[l].delta.converged);
        }
    }
}

#[test]
fn mu_vanishes_without_harmonic_forms() {
    let h = hierarchy(&spec(MeshFamily::Interval), Flavor::Essential, 4, 2).unwrap();
    let levels: Vec<_> = (0..2).map(|l| (h.complexes[l].mesh.h(), h.to_finest[l].clone())).collect();
    let rep = measure_coefficients(h.finest().complex(), &levels, 0).unwrap();
    assert!(rep.levels.iter().all(|l| l.mu.value == 0.0));
    assert!(rep.mu_order.is_none());
}

#[test]
fn eta_decays_at_first_order_on_the_interval_family() {
    let rep = run_coefficient_study(&config("coeffs_interval.json")).unwrap();
    let order = rep.report.eta_order.unwrap().slope;
    assert!((order - 1.0).abs() <= 0.2, "{order}");
    assert!(rep.passed);
    for (ok, _) in rep.report.monotone {
        assert!(ok);
    }
}

#[test]
fn rejected_configurations_name_the_problem() {
    let base = std::fs::read_to_string(fixture("study_interval_linear.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&base).unwrap();
    let cases: Vec<(Box<dyn Fn(&mut serde_json::Value)>, &str)> = vec![
        (Box::new(|v| v["mesh"]["levels"] = serde_json::json!([8, 8, 16])), "strictly increasing"),
        (Box::new(|v| v["mesh"]["family"] = serde_json::json!("ellipse")), "ellipse"),
        (Box::new(|v| v["problem"] = serde_json::json!("disk_linear")), "unknown problem"),
        (Box::new(|v| v["nonlinearity"] = serde_json::json!({"kind": "odd_power", "m": 2})), "odd exponent"),
        (Box::new(|v| v["flavor"] = serde_json::json!("natural")), "essential"),
        (Box::new(|v| v["levelz"] = serde_json::json!(1)), "unknown field"),
        (Box::new(|v| v["solver"] = serde_json::json!({"tol": 0.0})), "tol"),
    ];
    for (edit, needle) in cases {
        let mut c = v.clone();
        edit(&mut c);
        let err = StudyConfig::from_json(&c.to_string()).unwrap_err().to_string();
        assert!(err.contains(needle), "{needle}: {err}");
    }
    v["mesh"]["levels"] = serde_json::json!([8, 16]);
    let cfg = StudyConfig::from_json(&v.to_string()).unwrap();
    assert!(run_study(&cfg).unwrap_err().to_string().contains("at least 3"));
}

#[test]
fn linear_interval_study_reproduces_rates_and_schema() {
    let cfg = config("study_interval_linear.json");
    let rep = run_study(&cfg).unwrap();
    assert!(rep.passed);
    let csv = study_csv(&rep).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), STUDY_COLUMNS.join(","));
    assert_eq!(lines.count(), 4);
    // p vanishes identically for essential 0-forms, so its fit is absent
    for fit in rep.fits.iter().filter(|f| f.norm == "err_W" || f.norm == "err_V") {
        let f = fit.finest.unwrap();
        assert!(f.slope.is_finite() && f.points == 3);
    }
    for l in &rep.levels {
        assert!(l.err_w > 0.0 && l.err_v > 0.0);
    }
}

#[test]
fn study_artifacts_are_deterministic() {
    let cfg = config("study_interval_cubic.json");
    let a = study_files(&cfg, &run_study(&cfg).unwrap()).unwrap();
    let b = study_files(&cfg, &run_study(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    let c = config("crime_interval.json");
    let (x, y) = (run_crime_study(&c).unwrap(), run_crime_study(&c).unwrap());
    assert_eq!(crime_csv(&x).unwrap(), crime_csv(&y).unwrap());
    assert_eq!(projection_csv(&x).unwrap(), projection_csv(&y).unwrap());
}

#[test]
fn crime_study_reports_first_order_gap() {
    let rep = run_crime_study(&config("crime_interval.json")).unwrap();
    let e = rep.exponent.unwrap();
    assert!((e - 1.0).abs() <= 0.15, "{e}");
    let zero = rep.rows.iter().find(|r| r.epsilon == 0.0).unwrap();
    assert!(zero.gap <= 1e-9);
    assert!(rep.passed);
}

#[test]
fn projection_bound_constants_are_positive_and_finite() {
    let rep = run_crime_study(&config("crime_interval.json")).unwrap();
    for r in rep.projection.iter().filter(|r| r.epsilon > 0.0) {
        assert!(r.constant.is_finite() && r.constant > 0.0);
        assert!(r.discrepancy <= r.constant * (r.j_term + r.best_approx) * (1.0 + 1e-12));
    }
    assert!(rep.constant_spread >= 1.0);
}

#[test]
fn scalar_field_load_converges_for_smooth_data() {
    // quadrature sanity for the study's source vectors: ∫ sin(πx) dx = 2/π
    let h = hierarchy(&spec(MeshFamily::Interval), Flavor::Natural, 8, 0).unwrap();
    let f = ScalarField::new(h.finest(), 0).unwrap();
    let load = f.load_of_function(|x| (std::f64::consts::PI * x[0]).sin(), 8);
    assert!((load.sum() - 2.0 / std::f64::consts::PI).abs() < 1e-12);
}

proptest! {
    #[test]
    fn slope_fit_recovers_power_laws(q in -1.0f64..4.0, c in 0.01f64..100.0, h0 in 0.05f64..1.0, n in 2usize..7) {
        let h: Vec<f64> = (0..n).map(|i| h0 / 2f64.powi(i as i32)).collect();
        let e: Vec<f64> = h.iter().map(|h| c * h.powf(q)).collect();
        let fit = fit_slope(&h, &e).unwrap();
        prop_assert!((fit.slope - q).abs() <= 1e-10);
        prop_assert!(fit.stderr <= 1e-8);
    }

    #[test]
    fn monotonicity_flags(v in prop::collection::vec(0.0f64..1.0, 2..6)) {
        let mut sorted = v.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        prop_assert_eq!(nonincreasing_with_coarse_slack(&sorted), (true, false));
        let mut bumped = sorted.clone();
        bumped[1] = bumped[0] + 1.0;
        let (ok, coarse) = nonincreasing_with_coarse_slack(&bumped);
        prop_assert!(coarse);
        prop_assert_eq!(ok, bumped.windows(2).skip(1).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }
}
