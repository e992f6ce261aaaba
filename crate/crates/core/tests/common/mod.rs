#![allow(dead_code)]

use latrel::mathcore::{Matrix, RandomSource};
use latrel::network::{Activation, Mlp};

/// The case-study limit state written out by hand.
pub fn case_study_reference(x: &[f64]) -> f64 {
    let squares: f64 = x.iter().map(|v| v * v).sum();
    160.5 - (x[0] * x[0] + 4.0) * (x[1] - 1.0) / 20.0 + (5.0 * x[0]).cos() - squares
}

/// Worst relative error of backprop against central differences with step
/// `h`, each error measured as `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(net: &Mlp, x: &Matrix, y: &Matrix, h: f64) -> f64 {
    let (_, analytic) = net.mse_gradient(x, y).unwrap();
    let base = net.params();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        let mut p = base.clone();
        p[k] = base[k] + h;
        probe.set_params(&p).unwrap();
        let up = probe.mean_squared_error(x, y).unwrap();
        p[k] = base[k] - h;
        probe.set_params(&p).unwrap();
        let down = probe.mean_squared_error(x, y).unwrap();
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[k].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[k] - numeric).abs() / scale);
    }
    worst
}

/// A random sigmoid network with every width at most 5, plus a small batch.
pub fn random_small_problem(rng: &mut RandomSource) -> (Mlp, Matrix, Matrix) {
    let depth = 1 + rng.index(3);
    let dims: Vec<usize> = (0..=depth).map(|_| 1 + rng.index(5)).collect();
    let acts = vec![Activation::Sigmoid; depth];
    let net = Mlp::glorot(&dims, &acts, rng).unwrap();
    let rows = 2 + rng.index(4);
    let x = Matrix::from_vec(
        rows,
        dims[0],
        (0..rows * dims[0]).map(|_| rng.uniform()).collect(),
    )
    .unwrap();
    let out = dims[depth];
    let y = Matrix::from_vec(rows, out, (0..rows * out).map(|_| rng.uniform()).collect()).unwrap();
    (net, x, y)
}

/// GP predictive mean and variance in standardized units via an explicit
/// Gauss–Jordan inverse of the noisy kernel matrix.
pub fn dense_gp_prediction(
    points: &Matrix,
    targets: &[f64],
    signal: f64,
    length: f64,
    noise: f64,
    q: &[f64],
) -> (f64, f64) {
    let n = points.rows();
    let k = |a: &[f64], b: &[f64]| {
        let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
        signal * signal * (-d2 / (2.0 * length * length)).exp()
    };
    let mut a = vec![vec![0.0; 2 * n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = k(points.row(i), points.row(j)) + if i == j { noise * noise } else { 0.0 };
        }
        a[i][n + i] = 1.0;
    }
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&r, &s| a[r][c].abs().total_cmp(&a[s][c].abs()))
            .unwrap();
        a.swap(c, piv);
        let d = a[c][c];
        for v in a[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                let pivot_row = a[c].clone();
                for (v, p) in a[r].iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
    }
    let inv: Vec<Vec<f64>> = a.iter().map(|row| row[n..].to_vec()).collect();
    let kq: Vec<f64> = (0..n).map(|i| k(points.row(i), q)).collect();
    let mut mean = 0.0;
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            mean += kq[i] * inv[i][j] * targets[j];
            quad += kq[i] * inv[i][j] * kq[j];
        }
    }
    (mean, signal * signal - quad)
}
