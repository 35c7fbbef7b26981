//! Fixed-b subsampling goodness-of-fit test for univariate series, used as
//! a benchmark.
//!
//! A first-level p-value compares rolling-block empirical CDFs of length
//! `l = floor(n b)` with the full-sample Kolmogorov distance to `F0`; its
//! non-pivotal distribution is then approximated by repeating the
//! construction on every window of length `n'`.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::series::{check_alpha, Series, SplitEcho, TestOutcome};

/// `sup_x |F_a(x) - F_b(x)|` for the empirical CDFs of two sorted samples.
/// Both are constant between pooled jump points, so checking every pooled
/// point is exact.
pub fn sup_distance_steps(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    best
}

/// `sup_x |F(x) - F0(x)|` for a sorted sample against a continuous CDF,
/// checking both one-sided limits at each jump.
pub fn sup_distance_continuous(sorted: &[f64], f0: &dyn Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut best: f64 = 0.0;
    let mut k = 0;
    while k < sorted.len() {
        let x = sorted[k];
        let below = k as f64 / n;
        while k < sorted.len() && sorted[k] == x {
            k += 1;
        }
        let at = k as f64 / n;
        let f = f0(x);
        best = best.max((at - f).abs()).max((below - f).abs());
    }
    best
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// First-level subsampling p-value of `y` against reference sample `full`
/// (sorted) and distance `d_ref`, with block length `l`.
fn subsample_pvalue(y: &[f64], full_sorted: &[f64], l: usize, threshold: f64) -> f64 {
    let windows = y.len() - l + 1;
    let sl = (l as f64).sqrt();
    let hits = (0..windows)
        .filter(|&t| sl * sup_distance_steps(&sorted(&y[t..t + l]), full_sorted) >= threshold)
        .count();
    hits as f64 / windows as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedBConfig {
    pub b: f64,
    pub n_prime: usize,
}

impl Default for FixedBConfig {
    fn default() -> Self {
        Self { b: 0.05, n_prime: 30 }
    }
}

/// Block lengths `(l, l')` for sample size `n`.
pub fn block_lengths(n: usize, cfg: FixedBConfig) -> (usize, usize) {
    let l = (n as f64 * cfg.b).floor() as usize;
    let lp = ((cfg.n_prime as f64 * cfg.b).ceil() as usize).max(2);
    (l, lp)
}

/// Components of the fixed-b p-value.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedBResult {
    /// `sqrt(n) ||F_{1:n} - F0||`.
    pub statistic: f64,
    /// First-level p-value `pval*_{n,l}`.
    pub first_level: f64,
    /// `h*_{n',t}` for `t = 1..n-n'+1`.
    pub second_level: Vec<f64>,
    /// Calibrated p-value `pval*`.
    pub pvalue: f64,
}

pub fn fixedb_gof(data: &Series, f0: &(dyn Fn(f64) -> f64 + Sync), cfg: FixedBConfig) -> Result<FixedBResult> {
    if data.dim() != 1 {
        return Err(Error::invalid("fixed-b test needs univariate data"));
    }
    if !(cfg.b > 0.0 && cfg.b < 1.0) {
        return Err(Error::invalid(format!("b = {} outside (0, 1)", cfg.b)));
    }
    let y = data.values();
    let n = y.len();
    if cfg.n_prime < 2 || cfg.n_prime > n {
        return Err(Error::invalid(format!(
            "second-level length n' = {} must lie in [2, n = {n}]",
            cfg.n_prime
        )));
    }
    let (l, lp) = block_lengths(n, cfg);
    if l == 0 {
        return Err(Error::invalid(format!("block length floor(n b) = 0 for n = {n}, b = {}", cfg.b)));
    }
    let full = sorted(y);
    let statistic = (n as f64).sqrt() * sup_distance_continuous(&full, &|x| f0(x));
    let first_level = subsample_pvalue(y, &full, l, statistic);
    let np = cfg.n_prime;
    let snp = (np as f64).sqrt();
    let second_level: Vec<f64> = (0..n - np + 1)
        .into_par_iter()
        .map(|t| {
            let window = &y[t..t + np];
            let ws = sorted(window);
            let threshold = snp * sup_distance_steps(&ws, &full);
            subsample_pvalue(window, &ws, lp, threshold)
        })
        .collect();
    let below = second_level.iter().filter(|&&h| h < first_level).count();
    let pvalue = below as f64 / second_level.len() as f64;
    Ok(FixedBResult {
        statistic,
        first_level,
        second_level,
        pvalue,
    })
}

pub fn fixedb_gof_pvalue(data: &Series, f0: &(dyn Fn(f64) -> f64 + Sync), cfg: FixedBConfig) -> Result<f64> {
    Ok(fixedb_gof(data, f0, cfg)?.pvalue)
}

/// Verdict in the common format; rejects when `pval* <= alpha`, so the
/// reported critical value is `alpha` on the p-value scale.
pub fn fixedb_gof_test(
    data: &Series,
    f0: &(dyn Fn(f64) -> f64 + Sync),
    cfg: FixedBConfig,
    alpha: f64,
) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    let r = fixedb_gof(data, f0, cfg)?;
    let (l, lp) = block_lengths(data.len(), cfg);
    let mut metadata = std::collections::BTreeMap::new();
    metadata.insert("method".into(), "fixedb".into());
    metadata.insert("b".into(), cfg.b.to_string());
    metadata.insert("n_prime".into(), cfg.n_prime.to_string());
    metadata.insert("l".into(), l.to_string());
    metadata.insert("l_prime".into(), lp.to_string());
    metadata.insert("first_level_pvalue".into(), r.first_level.to_string());
    Ok(TestOutcome {
        statistic: r.statistic,
        scaled_statistic: r.statistic,
        alpha,
        critical_value: alpha,
        p_value: r.pvalue,
        reject: r.pvalue <= alpha,
        split: SplitEcho {
            eta: 0.0,
            m1: 0,
            held_out: data.len(),
        },
        location: None,
        metadata,
    })
}

/// CDF of `N(mean, variance)`.
pub fn normal_cdf(mean: f64, variance: f64) -> Result<impl Fn(f64) -> f64 + Sync> {
    let dist = Normal::new(mean, variance.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(move |x| dist.cdf(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::ar1;

    #[test]
    fn block_lengths_example() {
        assert_eq!(block_lengths(200, FixedBConfig { b: 0.05, n_prime: 30 }), (10, 2));
        assert_eq!(block_lengths(200, FixedBConfig { b: 0.25, n_prime: 30 }), (50, 8));
    }

    #[test]
    fn step_distance_by_brute_force() {
        let a = sorted(&[0.3, -1.0, 2.0, 0.3, 5.0]);
        let b = sorted(&[0.3, 1.0, 4.0]);
        let cdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
        let mut grid: Vec<f64> = (-300..700).map(|i| i as f64 / 100.0 + 0.005).collect();
        grid.extend(a.iter().chain(&b));
        let brute = grid.iter().map(|&x| (cdf(&a, x) - cdf(&b, x)).abs()).fold(0.0, f64::max);
        assert!((sup_distance_steps(&a, &b) - brute).abs() < 1e-15);
        assert_eq!(sup_distance_steps(&a, &a), 0.0);
    }

    #[test]
    fn continuous_distance_uses_left_limits() {
        // single point at 0 against a uniform(-1, 1) CDF: F jumps 0 -> 1
        // where F0 = 1/2
        let f0 = |x: f64| ((x + 1.0) / 2.0).clamp(0.0, 1.0);
        assert!((sup_distance_continuous(&[0.0], &f0) - 0.5).abs() < 1e-15);
        assert!((sup_distance_continuous(&[0.0, 0.0], &f0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pvalue_is_a_fraction() {
        let f0 = normal_cdf(0.0, 1.0).unwrap();
        for seed in 0..10 {
            let y = ar1(120, 0.3, seed).unwrap();
            let r = fixedb_gof(&y, &f0, FixedBConfig { b: 0.15, n_prime: 30 }).unwrap();
            assert!((0.0..=1.0).contains(&r.pvalue));
            assert!((0.0..=1.0).contains(&r.first_level));
            assert_eq!(r.second_level.len(), 91);
        }
    }

    #[test]
    fn argument_errors() {
        let f0 = normal_cdf(0.0, 1.0).unwrap();
        let y = ar1(20, 0.0, 1).unwrap();
        assert!(fixedb_gof_pvalue(&y, &f0, FixedBConfig { b: 0.01, n_prime: 10 }).is_err());
        assert!(fixedb_gof_pvalue(&y, &f0, FixedBConfig { b: 0.2, n_prime: 21 }).is_err());
        assert!(fixedb_gof_pvalue(&y, &f0, FixedBConfig { b: 1.2, n_prime: 10 }).is_err());
    }
}
