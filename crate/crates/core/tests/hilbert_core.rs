mod common;

use common::*;
use hodgelab::derham::{cycle_mesh, triangulated_square_mesh, unit_interval_mesh, whitney_complex, Flavor};
use hodgelab::linalg::{csr_from_dense, to_dense};
use hodgelab::{Error, HilbertComplex};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn interval(n: usize) -> HilbertComplex {
    whitney_complex(&unit_interval_mesh(n).unwrap(), Flavor::Natural).unwrap().into_complex()
}

fn cycle(n: usize) -> HilbertComplex {
    whitney_complex(&cycle_mesh(n).unwrap(), Flavor::Natural).unwrap().into_complex()
}

fn square(n: usize) -> HilbertComplex {
    whitney_complex(&triangulated_square_mesh(n).unwrap(), Flavor::Natural)
        .unwrap()
        .into_complex()
}

fn rebuild(c: &HilbertComplex, gram: Vec<DMatrix<f64>>, diff: Vec<DMatrix<f64>>) -> hodgelab::Result<HilbertComplex> {
    HilbertComplex::from_dense(c.k_min(), &gram, &diff)
}

fn parts(c: &HilbertComplex) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let g = c.degrees().map(|k| gram(c, k)).collect();
    let d = (c.k_min()..c.k_max()).map(|k| diff(c, k)).collect();
    (g, d)
}

#[test]
fn interval_complex_is_exact() {
    let c = interval(4);
    let r = c.validate().unwrap();
    assert!(r.passed);
    assert!(r.checks.iter().filter(|x| x.name == "cochain").all(|x| x.violation == 0.0));
}

#[test]
fn flipped_incidence_sign_breaks_cochain_property() {
    let c = square(2);
    let (g, mut d) = parts(&c);
    assert!(c.validate().unwrap().passed);
    let (i, j) = (0..d[0].nrows())
        .flat_map(|i| (0..d[0].ncols()).map(move |j| (i, j)))
        .find(|&(i, j)| d[0][(i, j)] != 0.0)
        .unwrap();
    d[0][(i, j)] = -d[0][(i, j)];
    let bad = rebuild(&c, g, d).unwrap().validate().unwrap();
    assert!(!bad.passed);
    let failed: Vec<_> = bad.checks.iter().filter(|x| !x.passed).collect();
    assert_eq!(failed.len(), 1);
    assert_eq!((failed[0].name, failed[0].degree), ("cochain", 0));
    assert!(bad.to_string().ends_with("overall: fail"));
}

#[test]
fn singular_gram_is_rejected() {
    let c = interval(4);
    let (mut g, d) = parts(&c);
    g[0].column_mut(2).fill(0.0);
    g[0].row_mut(2).fill(0.0);
    let bad = rebuild(&c, g, d).unwrap();
    assert!(matches!(bad.validate(), Err(Error::NonSpdGram { degree: 0, .. })));
}

#[test]
fn zero_differential_has_zero_adjoint() {
    let c = HilbertComplex::from_dense(
        0,
        &[DMatrix::identity(2, 2), DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0])],
        &[DMatrix::zeros(2, 2)],
    )
    .unwrap();
    assert_eq!(c.adjoint_differential(1).unwrap(), DMatrix::zeros(2, 2));
}

#[test]
fn identity_grams_give_transpose_adjoint() {
    let d = DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 0.5, 3.0, 0.0, 1.0]);
    let c = HilbertComplex::from_dense(0, &[DMatrix::identity(2, 2), DMatrix::identity(3, 3)], &[d.clone()]).unwrap();
    assert!((c.adjoint_differential(1).unwrap() - d.transpose()).amax() < 1e-14);
}

#[test]
fn interval_adjoint_matches_basis_pair_oracle() {
    let c = interval(6);
    let ds = c.adjoint_differential(1).unwrap();
    let (m0, m1, d) = (gram(&c, 0), gram(&c, 1), diff(&c, 0));
    // ⟨D e_i, e_j⟩_1 = ⟨e_i, D* e_j⟩_0 for every basis pair
    let mut worst = 0.0f64;
    for i in 0..c.dim(0) {
        for j in 0..c.dim(1) {
            let ei = DVector::from_fn(c.dim(0), |r, _| (r == i) as u8 as f64);
            let ej = DVector::from_fn(c.dim(1), |r, _| (r == j) as u8 as f64);
            let lhs = (&d * &ei).dot(&(&m1 * &ej));
            let rhs = ei.dot(&(&m0 * (&ds * &ej)));
            worst = worst.max((lhs - rhs).abs());
        }
    }
    assert!(worst < 1e-12, "{worst}");
    assert!(c.dual().unwrap().adjoint_identity_violation(1) < 1e-12);
}

#[test]
fn harmonic_dimensions_match_svd_oracle() {
    for (c, expected) in [(interval(4), vec![1, 0]), (cycle(4), vec![1, 1])] {
        for k in c.degrees() {
            let h = c.harmonic_basis(k).unwrap();
            assert_eq!(h.ncols(), expected[k as usize]);
            assert_eq!(dense_harmonic(&c, k).ncols(), expected[k as usize]);
        }
    }
}

#[test]
fn decomposition_of_zero_and_of_harmonic_vectors() {
    let c = cycle(4);
    let z = c.hodge_decompose(1, &DVector::zeros(4)).unwrap();
    assert_eq!(z.reconstruct().norm(), 0.0);
    assert_eq!(z.harmonic_part.norm() + z.coboundary_part.norm() + z.perp_part.norm(), 0.0);
    let h = c.harmonic_basis(1).unwrap().column(0) * 3.0;
    let d = c.hodge_decompose(1, &h).unwrap();
    assert!(d.coboundary_part.norm() < 1e-12);
    assert!(d.perp_part.norm() < 1e-12);
    assert!((&d.harmonic_part - &h).norm() < 1e-12);
}

#[test]
fn cycle_components_match_dense_projectors() {
    let c = cycle(8);
    let mut r = rng(3);
    for k in c.degrees() {
        let m = gram(&c, k);
        let ph = projector(&dense_harmonic(&c, k), &m);
        let range = diff(&c, k - 1);
        let pb = if range.ncols() == 0 {
            DMatrix::zeros(m.nrows(), m.nrows())
        } else {
            // column span of D^{k-1} via its left singular vectors
            let svd = range.clone().svd(true, false);
            let u = svd.u.unwrap();
            let keep: Vec<_> = (0..svd.singular_values.len())
                .filter(|&i| svd.singular_values[i] > 1e-10)
                .map(|i| u.column(i).into_owned())
                .collect();
            projector(&DMatrix::from_columns(&keep), &m)
        };
        for _ in 0..5 {
            let v = random_vec(&mut r, c.dim(k));
            let d = c.hodge_decompose(k, &v).unwrap();
            assert!(rel_diff(&d.reconstruct(), &v) < 1e-12);
            assert!((&d.harmonic_part - &ph * &v).norm() <= 1e-10 * v.norm());
            assert!((&d.coboundary_part - &pb * &v).norm() <= 1e-10 * v.norm());
            let w = |a: &DVector<f64>, b: &DVector<f64>| a.dot(&(&m * b)).abs();
            let v2 = w(&v, &v);
            assert!(w(&d.harmonic_part, &d.coboundary_part) <= 1e-10 * v2);
            assert!(w(&d.harmonic_part, &d.perp_part) <= 1e-10 * v2);
            assert!(w(&d.coboundary_part, &d.perp_part) <= 1e-10 * v2);
        }
    }
}

/// `c_P = sqrt(1 + 1/s²)` for identity Grams, with `s` the smallest nonzero
/// singular value of `D`.
fn identity_gram_poincare_oracle(d: &DMatrix<f64>) -> f64 {
    let s = d
        .singular_values()
        .iter()
        .copied()
        .filter(|&s| s > 1e-10)
        .fold(f64::INFINITY, f64::min);
    (1.0 + 1.0 / (s * s)).sqrt()
}

#[test]
fn poincare_constant_of_unit_singular_value() {
    let d = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let mk = |d: DMatrix<f64>| {
        HilbertComplex::from_dense(0, &[DMatrix::identity(3, 3), DMatrix::identity(2, 2)], &[d]).unwrap()
    };
    let c1 = mk(d.clone()).poincare_constant(0).unwrap().constant;
    assert!((c1 - 2f64.sqrt()).abs() < 1e-12);
    let c2 = mk(&d * 2.0).poincare_constant(0).unwrap().constant;
    assert!((c2 - identity_gram_poincare_oracle(&(&d * 2.0))).abs() < 1e-12);
    assert!((c2 - 1.25f64.sqrt()).abs() < 1e-12);
    assert!(c2 < c1);
}

#[test]
fn poincare_constant_matches_singular_value_oracle() {
    let mut r = rng(11);
    let mut d = DMatrix::from_fn(3, 5, |_, _| random_vec(&mut r, 1)[0]);
    // rank 2
    let row = d.row(0) + d.row(1);
    d.set_row(2, &row);
    let c = HilbertComplex::from_dense(0, &[DMatrix::identity(5, 5), DMatrix::identity(3, 3)], &[d.clone()]).unwrap();
    let got = c.poincare_constant(0).unwrap();
    assert!((got.constant - identity_gram_poincare_oracle(&d)).abs() < 1e-10 * got.constant);
    let w = &got.witness;
    let ratio = (w.norm_squared() + (&d * w).norm_squared()).sqrt() / (&d * w).norm();
    assert!((ratio - got.constant).abs() < 1e-8 * got.constant);
}

#[test]
fn interval_poincare_constant_is_stable_under_refinement() {
    let a = interval(16).poincare_constant(0).unwrap().constant;
    let b = interval(32).poincare_constant(0).unwrap().constant;
    assert!(a.is_finite() && b.is_finite());
    assert!((a - b).abs() / b < 0.05, "{a} vs {b}");
}

#[test]
fn empty_perp_space_is_reported() {
    let c = interval(4);
    assert!(matches!(c.poincare_constant(1), Err(Error::EmptyPerpSpace { degree: 1 })));
}

#[test]
fn betti_numbers_match_rank_oracle() {
    for (c, expected) in [(interval(5), vec![1, 0]), (cycle(6), vec![1, 1]), (square(3), vec![1, 0, 0])] {
        assert_eq!(rank_betti(&c), expected);
        assert_eq!(c.betti_numbers().unwrap(), expected);
    }
}

#[test]
fn adjoints_compose_to_zero() {
    let c = square(3);
    let dual = c.dual().unwrap();
    assert!(dual.composition_violation(1) < 1e-12);
    for k in 1..=2 {
        assert!(dual.adjoint_identity_violation(k) < 1e-12);
    }
}

#[test]
fn matrix_roundtrip_keeps_sparsity_pattern_values() {
    let c = square(2);
    let d = c.diff(1);
    assert_eq!(to_dense(&csr_from_dense(&to_dense(d))), to_dense(d));
}

fn whitney(kind: u8, n: usize) -> HilbertComplex {
    match kind {
        0 => interval(n),
        1 => cycle(n + 2),
        _ => square(n.min(4)),
    }
}

/// Random SPD matrix `I + A Aᵀ / n` of size `n`.
fn random_spd(seed: u64, n: usize) -> DMatrix<f64> {
    let mut r = rng(seed);
    let a = DMatrix::from_fn(n, n, |_, _| random_vec(&mut r, 1)[0]);
    DMatrix::identity(n, n) + &a * a.transpose() / n as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hodge_parts_are_orthogonal_and_complete(kind in 0u8..3, n in 1usize..7, seed in any::<u64>()) {
        let c = whitney(kind, n);
        let mut r = rng(seed);
        for k in c.degrees() {
            let v = random_vec(&mut r, c.dim(k));
            let d = c.hodge_decompose(k, &v).unwrap();
            let m = gram(&c, k);
            let v2 = v.dot(&(&m * &v));
            prop_assert!(rel_diff(&d.reconstruct(), &v) < 1e-10);
            prop_assert!(d.harmonic_part.dot(&(&m * &d.coboundary_part)).abs() <= 1e-10 * v2);
            prop_assert!(d.harmonic_part.dot(&(&m * &d.perp_part)).abs() <= 1e-10 * v2);
            prop_assert!(d.coboundary_part.dot(&(&m * &d.perp_part)).abs() <= 1e-10 * v2);
            // idempotence
            let again = c.hodge_decompose(k, &d.harmonic_part).unwrap();
            prop_assert!((&again.harmonic_part - &d.harmonic_part).norm() <= 1e-10 * v.norm());
            // the harmonic part is a cocycle
            prop_assert!(c.apply_diff(k, &d.harmonic_part).norm() <= 1e-10 * v.norm().max(1.0));
        }
    }

    #[test]
    fn betti_numbers_do_not_depend_on_the_grams(kind in 0u8..3, n in 1usize..6, seed in any::<u64>()) {
        let c = whitney(kind, n);
        let (_, d) = parts(&c);
        let g: Vec<_> = c.degrees().enumerate().map(|(i, k)| random_spd(seed ^ i as u64, c.dim(k))).collect();
        let twisted = HilbertComplex::from_dense(c.k_min(), &g, &d).unwrap();
        prop_assert!(twisted.validate().unwrap().passed);
        prop_assert_eq!(twisted.betti_numbers().unwrap(), rank_betti(&c));
        for k in twisted.degrees() {
            let h = twisted.harmonic_basis(k).unwrap();
            let gk = gram(&twisted, k);
            let eye = DMatrix::<f64>::identity(h.ncols(), h.ncols());
            prop_assert!((h.transpose() * &gk * h - eye).amax() < 1e-10);
        }
    }

    #[test]
    fn adjoint_identity_holds_for_random_grams(n in 2usize..8, seed in any::<u64>()) {
        let c = interval(n);
        let (_, d) = parts(&c);
        let g = vec![random_spd(seed, n + 1), random_spd(seed.wrapping_add(1), n)];
        let t = HilbertComplex::from_dense(0, &g, &d).unwrap();
        prop_assert!(t.dual().unwrap().adjoint_identity_violation(1) < 1e-11);
    }
}
