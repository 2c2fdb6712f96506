//! Gauss rules on the unit interval and on simplices.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[0, 1]` (weights sum to 1).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess, then Newton on P_n
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            } else {
                for j in 2..=n {
                    let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    (idx.iter().map(|&i| x[i]).collect(), idx.iter().map(|&i| w[i]).collect())
}

/// A quadrature point in barycentric coordinates with its weight as a
/// fraction of the simplex volume.
#[derive(Clone, Debug)]
pub struct QuadPoint {
    pub bary: Vec<f64>,
    pub weight: f64,
}

/// Rule on the `d`-simplex exact for polynomials of degree `order`
/// (collapsed tensor Gauss rule for triangles).
pub fn simplex_rule(d: usize, order: usize) -> Vec<QuadPoint> {
    match d {
        0 => vec![QuadPoint {
            bary: vec![1.0],
            weight: 1.0,
        }],
        1 => {
            let (x, w) = gauss_legendre(order / 2 + 1);
            x.iter()
                .zip(&w)
                .map(|(&t, &wt)| QuadPoint {
                    bary: vec![1.0 - t, t],
                    weight: wt,
                })
                .collect()
        }
        2 => {
            // the Duffy factor adds one degree in the collapsed direction
            let n = (order + 1) / 2 + 1;
            let (x, w) = gauss_legendre(n);
            let mut pts = Vec::with_capacity(n * n);
            for (&u, &wu) in x.iter().zip(&w) {
                for (&v, &wv) in x.iter().zip(&w) {
                    let (s, t) = (u, v * (1.0 - u));
                    pts.push(QuadPoint {
                        bary: vec![1.0 - s - t, s, t],
                        weight: 2.0 * wu * wv * (1.0 - u),
                    });
                }
            }
            pts
        }
        _ => panic!("no quadrature rule for dimension {d}"),
    }
}
