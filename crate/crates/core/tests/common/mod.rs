//! Dense oracles shared by the integration tests. Everything here works on
//! dense nalgebra matrices and deliberately avoids the library's own solvers.
#![allow(dead_code)]

use std::path::PathBuf;

use hodgelab::complex::io::read_complex;
use hodgelab::linalg::to_dense;
use hodgelab::{Degree, HilbertComplex};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// The complexes shipped under `fixtures/`, with their expected Betti numbers.
pub fn shipped_complexes() -> Vec<(&'static str, HilbertComplex, Vec<usize>)> {
    [
        ("interval_8.json", vec![1, 0]),
        ("cycle_8.json", vec![1, 1]),
        ("square_4.json", vec![1, 0, 0]),
    ]
    .into_iter()
    .map(|(name, betti)| (name, read_complex(fixture(name)).unwrap(), betti))
    .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

pub fn rel_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

pub fn gram(c: &HilbertComplex, k: Degree) -> DMatrix<f64> {
    to_dense(c.gram(k))
}

pub fn diff(c: &HilbertComplex, k: Degree) -> DMatrix<f64> {
    to_dense(c.diff(k))
}

/// Rank of an integer matrix by elimination modulo the prime 2^31 - 1.
pub fn exact_rank(a: &DMatrix<f64>) -> usize {
    const P: i64 = 2_147_483_647;
    let (m, n) = a.shape();
    let mut rows: Vec<Vec<i64>> = (0..m)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let v = a[(i, j)];
                    assert_eq!(v, v.round(), "rank oracle needs integer entries");
                    (v as i64).rem_euclid(P)
                })
                .collect()
        })
        .collect();
    let inv = |x: i64| {
        let (mut r, mut b, mut e) = (1i64, x, P - 2);
        while e > 0 {
            if e & 1 == 1 {
                r = r * b % P;
            }
            b = b * b % P;
            e >>= 1;
        }
        r
    };
    let mut rank = 0;
    for col in 0..n {
        let Some(piv) = (rank..m).find(|&r| rows[r][col] != 0) else { continue };
        rows.swap(rank, piv);
        let s = inv(rows[rank][col]);
        let pivot_row: Vec<i64> = rows[rank].iter().map(|v| v * s % P).collect();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[col] != 0 {
                let f = row[col];
                for (x, p) in row.iter_mut().zip(&pivot_row) {
                    *x = (*x - f * p).rem_euclid(P);
                }
            }
        }
        rows[rank] = pivot_row;
        rank += 1;
    }
    rank
}

/// `b_k = dim V^k - rank D^k - rank D^{k-1}` with exact ranks.
pub fn rank_betti(c: &HilbertComplex) -> Vec<usize> {
    c.degrees()
        .map(|k| c.dim(k) - exact_rank(&diff(c, k)) - exact_rank(&diff(c, k - 1)))
        .collect()
}

/// Orthonormal null space of `a` from a full SVD.
pub fn svd_null_space(a: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    // pad to square so the SVD returns a full right basis
    let mut sq = DMatrix::zeros(a.nrows().max(n), n);
    sq.rows_mut(0, a.nrows()).copy_from(a);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.unwrap();
    let smax = svd.singular_values.max();
    let tol = 1e-10 * smax.max(1.0);
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&i| svd.singular_values[i] <= tol)
        .map(|i| vt.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// `x (xᵀ M x)^{-1/2}`, an M-orthonormal basis of the same span.
pub fn m_orthonormal(x: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    if x.ncols() == 0 {
        return x.clone();
    }
    let g = x.transpose() * m * x;
    let e = g.symmetric_eigen();
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|l| 1.0 / l.sqrt()));
    x * (&e.eigenvectors * d * e.eigenvectors.transpose())
}

/// M-orthonormal basis of `ker D^k ∩ (range D^{k-1})^⊥` from the stacked
/// system `[D^k; (D^{k-1})ᵀ M]`.
pub fn dense_harmonic(c: &HilbertComplex, k: Degree) -> DMatrix<f64> {
    let n = c.dim(k);
    let m = gram(c, k);
    let d = diff(c, k);
    let dp = diff(c, k - 1);
    let mut stacked = DMatrix::zeros(d.nrows() + dp.ncols(), n);
    stacked.rows_mut(0, d.nrows()).copy_from(&d);
    stacked.rows_mut(d.nrows(), dp.ncols()).copy_from(&(dp.transpose() * &m));
    m_orthonormal(&svd_null_space(&stacked, n), &m)
}

/// M-orthogonal projector onto the column span of `b`.
pub fn projector(b: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if b.ncols() == 0 {
        return DMatrix::zeros(n, n);
    }
    let g = b.transpose() * m * b;
    b * g.try_inverse().unwrap() * b.transpose() * m
}

pub struct DenseMixed {
    pub sigma: DVector<f64>,
    pub u: DVector<f64>,
    pub p: DVector<f64>,
}

/// Solves the three-field system by a dense LU of the block matrix written
/// out from the bilinear form.
pub fn dense_saddle_solve(c: &HilbertComplex, k: Degree, load: &DVector<f64>) -> DenseMixed {
    let ms = gram(c, k - 1);
    let m = gram(c, k);
    let m1 = gram(c, k + 1);
    let dp = diff(c, k - 1);
    let d = diff(c, k);
    let h = dense_harmonic(c, k);
    let (ns, nu, np) = (ms.nrows(), m.nrows(), h.ncols());
    let n = ns + nu + np;
    let mh = &m * &h;
    let mut a = DMatrix::zeros(n, n);
    // ⟨σ, τ⟩ - ⟨u, dτ⟩
    a.view_mut((0, 0), (ns, ns)).copy_from(&ms);
    a.view_mut((0, ns), (ns, nu)).copy_from(&(-(dp.transpose() * &m)));
    // ⟨dσ, v⟩ + ⟨du, dv⟩ + ⟨p, v⟩
    a.view_mut((ns, 0), (nu, ns)).copy_from(&(&m * &dp));
    a.view_mut((ns, ns), (nu, nu)).copy_from(&(d.transpose() * &m1 * &d));
    a.view_mut((ns, ns + nu), (nu, np)).copy_from(&mh);
    // ⟨u, q⟩
    a.view_mut((ns + nu, ns), (np, nu)).copy_from(&mh.transpose());
    let mut rhs = DVector::zeros(n);
    rhs.rows_mut(ns, nu).copy_from(load);
    let x = a.lu().solve(&rhs).expect("saddle oracle matrix is singular");
    DenseMixed {
        sigma: x.rows(0, ns).into_owned(),
        u: x.rows(ns, nu).into_owned(),
        p: &h * x.rows(ns + nu, np),
    }
}

/// Matrix of the `V∩V*` inner product:
/// `DᵀM₊D + M D₋ M₋⁻¹ D₋ᵀ M + M H Hᵀ M`.
pub fn dense_unmixed(c: &HilbertComplex, k: Degree) -> DMatrix<f64> {
    let m = gram(c, k);
    let d = diff(c, k);
    let dp = diff(c, k - 1);
    let mut a = d.transpose() * gram(c, k + 1) * &d;
    if dp.ncols() > 0 {
        let ms_inv = gram(c, k - 1).try_inverse().unwrap();
        a += &m * &dp * ms_inv * dp.transpose() * &m;
    }
    let mh = &m * dense_harmonic(c, k);
    a + &mh * mh.transpose()
}

/// Newton on `A u + F(u) = b` with a dense Jacobian `A + J_F(u)`. Returns
/// the root and the worst relative mismatch between the supplied Jacobian and
/// central finite differences at the starting point.
pub fn dense_newton(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    fload: impl Fn(&DVector<f64>) -> DVector<f64>,
    jac: impl Fn(&DVector<f64>) -> DMatrix<f64>,
) -> (DVector<f64>, f64) {
    let n = b.len();
    let residual = |u: &DVector<f64>| a * u + fload(u) - b;
    let mut u = a.clone().lu().solve(b).unwrap();

    let j0 = a + jac(&u);
    let mut fd_err = 0.0f64;
    let step = 1e-6;
    for j in 0..n {
        let mut up = u.clone();
        let mut dn = u.clone();
        up[j] += step;
        dn[j] -= step;
        let col = (residual(&up) - residual(&dn)) / (2.0 * step);
        fd_err = fd_err.max((col - j0.column(j)).norm() / j0.column(j).norm().max(1e-300));
    }

    for _ in 0..100 {
        let r = residual(&u);
        if r.norm() <= 1e-14 * b.norm().max(1.0) {
            break;
        }
        let du = (a + jac(&u)).lu().solve(&r).unwrap();
        u -= du;
    }
    (u, fd_err)
}

/// Row sums of the Gram matrix, the pairing weights of the lumped field.
pub fn lumped_weights(c: &HilbertComplex, k: Degree) -> DVector<f64> {
    let m = gram(c, k);
    DVector::from_fn(m.nrows(), |i, _| m.row(i).sum())
}
