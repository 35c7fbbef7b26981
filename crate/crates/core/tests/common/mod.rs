//! Independent reference implementations used by the integration tests.
//! Everything here is written directly from the defining formulas, with no
//! prefix sums or precomputed Gram matrices.
#![allow(dead_code)]

use rkhs_sn::kernels::{eval_kernel, KernelSpec};
use rkhs_sn::series::Series;

/// `(T(k) / sqrt(V(k)))_{k=1..N-1}` by direct summation; `None` where
/// `V(k) = 0`.
pub fn cusum_ratios(z: &[f64]) -> Vec<Option<f64>> {
    let n = z.len();
    let nf = n as f64;
    let total: f64 = z.iter().sum();
    let sum = |a: usize, b: usize| -> f64 { z[a - 1..b].iter().sum() };
    (1..n)
        .map(|k| {
            let t = (sum(1, k) - k as f64 / nf * total) / nf.sqrt();
            let mut v = 0.0;
            for s in 1..=k {
                v += (sum(1, s) - s as f64 / k as f64 * sum(1, k)).powi(2);
            }
            for s in k + 1..=n {
                v += (sum(s, n) - (n - s + 1) as f64 / (n - k) as f64 * sum(k + 1, n)).powi(2);
            }
            v /= nf * nf;
            (v > 0.0).then(|| t / v.sqrt())
        })
        .collect()
}

/// Supremum of the self-normalized bridge ratio on the grid `k / L` with both
/// integrals written as left-endpoint Riemann sums over the path `B(j / L)`.
pub fn g_double_integral(incr: &[f64]) -> f64 {
    let l = incr.len();
    let lf = l as f64;
    let b: Vec<f64> = std::iter::once(0.0)
        .chain(incr.iter().scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        }))
        .collect();
    let mut best = f64::NEG_INFINITY;
    for k in 1..l {
        let r = k as f64 / lf;
        let mut first = 0.0;
        let mut second = 0.0;
        for (j, bj) in b.iter().enumerate().take(l) {
            let s = j as f64 / lf;
            if j < k {
                first += (bj - s / r * b[k]).powi(2);
            } else {
                second += ((b[l] - bj) - (1.0 - s) / (1.0 - r) * (b[l] - b[k])).powi(2);
            }
        }
        let den = ((first + second) / lf).sqrt();
        if den > 0.0 {
            best = best.max((b[k] - r * b[l]) / den);
        }
    }
    best
}

pub fn k(spec: &KernelSpec, x: &[f64], y: &[f64]) -> f64 {
    eval_kernel(spec, x, y).unwrap()
}

/// `<K(a, .) - mu_hat, K(b, .) - mu_hat>` expanded into its four kernel
/// terms, `mu_hat` the empirical embedding of all rows of `pts`.
pub fn centered_inner(spec: &KernelSpec, pts: &Series, a: usize, b: usize) -> f64 {
    let n = pts.len();
    let nf = n as f64;
    let mut row_a = 0.0;
    let mut row_b = 0.0;
    let mut grand = 0.0;
    for c in 0..n {
        row_a += k(spec, pts.row(a), pts.row(c));
        row_b += k(spec, pts.row(c), pts.row(b));
        for d in 0..n {
            grand += k(spec, pts.row(c), pts.row(d));
        }
    }
    k(spec, pts.row(a), pts.row(b)) - row_a / nf - row_b / nf + grand / (nf * nf)
}

/// Rows `(X_k, ..., X_{k+2m})`, written out element by element.
pub fn windows(x: &Series, m: usize) -> Series {
    let n = x.len();
    let rows: Vec<Vec<f64>> = (0..n - 2 * m)
        .map(|k| (k..=k + 2 * m).flat_map(|t| x.row(t).to_vec()).collect())
        .collect();
    Series::from_rows(&rows, x.geometry()).unwrap()
}

/// Independence projection `F_j` built from the four-term expansions.
#[allow(clippy::too_many_arguments)]
pub fn indep_projection(
    x: &Series,
    y: &Series,
    k1: &KernelSpec,
    l1: &KernelSpec,
    k_lag: &KernelSpec,
    l_lag: &KernelSpec,
    m: usize,
    eta: f64,
) -> Vec<f64> {
    let n = x.len();
    let xb = x.slice(m..n - m);
    let yb = y.slice(m..n - m);
    let xl = windows(x, m);
    let yl = windows(y, m);
    let np = n - 2 * m;
    let m1 = (np as f64 * eta).floor() as usize;
    let inner = |i: usize, j: usize| {
        centered_inner(k1, &xb, i, j) * centered_inner(l_lag, &yl, i, j)
            + centered_inner(l1, &yb, i, j) * centered_inner(k_lag, &xl, i, j)
    };
    (m1..np)
        .map(|j| (0..m1).map(|i| inner(i, j)).sum::<f64>() / m1 as f64)
        .collect()
}

/// Goodness-of-fit projection against a point-mass null at `c`.
pub fn gof_point_mass_projection(spec: &KernelSpec, y: &Series, c: &[f64], eta: f64) -> Vec<f64> {
    let n = y.len();
    let m1 = (n as f64 * eta).floor() as usize;
    (m1..n)
        .map(|i| {
            let yi = y.row(i);
            let mut acc = 0.0;
            for j in 0..m1 {
                let yj = y.row(j);
                acc += k(spec, yj, yi) - k(spec, yj, c) - k(spec, yi, c) + k(spec, c, c);
            }
            acc / m1 as f64
        })
        .collect()
}

/// Change-point projection: head-block mean minus tail-block mean.
pub fn cp_projection(spec: &KernelSpec, y: &Series, eta: f64) -> Vec<f64> {
    let n = y.len();
    let m1 = (n as f64 * eta).floor() as usize;
    (m1..n - m1)
        .map(|t| {
            let mut head = 0.0;
            let mut tail = 0.0;
            for i in 0..m1 {
                head += k(spec, y.row(i), y.row(t));
                tail += k(spec, y.row(n - m1 + i), y.row(t));
            }
            (head - tail) / m1 as f64
        })
        .collect()
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_q(lambda))
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = 2.0 * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Literal fixed-b p-value: every empirical CDF is evaluated by counting on
/// the pooled set of sample points, and the distance to `F0` checks
/// `F(x)` and `F(x-)` at each sample point.
pub fn fixedb_literal(y: &[f64], f0: &dyn Fn(f64) -> f64, b: f64, n_prime: usize) -> f64 {
    let n = y.len();
    let ecdf = |a: usize, bb: usize, x: f64| -> f64 {
        y[a - 1..bb].iter().filter(|&&v| v <= x).count() as f64 / (bb - a + 1) as f64
    };
    let ecdf_left = |a: usize, bb: usize, x: f64| -> f64 {
        y[a - 1..bb].iter().filter(|&&v| v < x).count() as f64 / (bb - a + 1) as f64
    };
    let step_dist = |a1: usize, b1: usize, a2: usize, b2: usize| -> f64 {
        y.iter()
            .map(|&x| (ecdf(a1, b1, x) - ecdf(a2, b2, x)).abs())
            .fold(0.0, f64::max)
    };
    let d0 = y
        .iter()
        .map(|&x| (ecdf(1, n, x) - f0(x)).abs().max((ecdf_left(1, n, x) - f0(x)).abs()))
        .fold(0.0, f64::max);
    let l = (n as f64 * b).floor() as usize;
    let big_n = n - l + 1;
    let mut hits = 0;
    for t in 1..=big_n {
        if (l as f64).sqrt() * step_dist(t, t + l - 1, 1, n) >= (n as f64).sqrt() * d0 {
            hits += 1;
        }
    }
    let pval_nl = hits as f64 / big_n as f64;
    let lp = ((n_prime as f64 * b).ceil() as usize).max(2);
    let np_big = n_prime - lp + 1;
    let mut count = 0;
    for t in 1..=n - n_prime + 1 {
        let rhs = (n_prime as f64).sqrt() * step_dist(t, t + n_prime - 1, 1, n);
        let mut h = 0;
        for j in t..=t + np_big - 1 {
            if (lp as f64).sqrt() * step_dist(j, j + lp - 1, t, t + n_prime - 1) >= rhs {
                h += 1;
            }
        }
        if (h as f64 / np_big as f64) < pval_nl {
            count += 1;
        }
    }
    count as f64 / (n - n_prime + 1) as f64
}
