//! HSIC-type test of independence between two series over a lag window.
//!
//! For lag `m` the statistic works with the pairs
//! `E_k = (K(X_k, .) - mu) (x) (L(Y^lag_k, .) - nu)` stacked with
//! `(L(Y_k, .) - nu') (x) (K(X^lag_k, .) - mu')`, where `X^lag_k` is the
//! window `(X_{k-m}, ..., X_{k+m})`. Inner products of such elements reduce
//! to products of double-centered Gram entries, so nothing beyond four
//! `n' x n'` matrices is ever formed.

use crate::error::{Error, Result};
use crate::gof::kernel_metadata;
use crate::kernels::{median_heuristic, symmetric_gram, GramMatrix, KernelFamily, KernelSpec};
use crate::limitdist::{decide, Law, QuantileTable};
use crate::selfnorm::{sn_mean_stat, Origin, ProjectedSequence};
use crate::series::{check_alpha, Series, SplitConfig, SplitEcho, SplitScheme, TestOutcome};

pub const DEFAULT_ETA: f64 = 0.2;
pub const DEFAULT_LAG: usize = 0;

/// Rows `(X_{t-half}, ..., X_{t+half})` for `t = pad..n-pad` (zero-based).
pub fn window_embed(series: &Series, half: usize, pad: usize) -> Result<Series> {
    let n = series.len();
    if half > pad || 2 * pad >= n {
        return Err(Error::LagTooLarge { lag: pad, n });
    }
    let p = series.dim();
    let width = (2 * half + 1) * p;
    let rows = n - 2 * pad;
    let mut values = Vec::with_capacity(rows * width);
    for t in pad..n - pad {
        values.extend_from_slice(&series.values()[(t - half) * p..(t + half + 1) * p]);
    }
    Series::new(values, rows, width, series.geometry())
}

/// Lag embedding: row `k` is `(X_k, ..., X_{k+2m})`.
pub fn lag_embed(series: &Series, m: usize) -> Result<Series> {
    window_embed(series, m, m)
}

/// Double-centered Gram matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CenteredGram {
    values: Vec<f64>,
    n: usize,
}

impl CenteredGram {
    /// Centers a symmetric Gram matrix by its row, column and grand means.
    pub fn from_gram(gram: GramMatrix) -> Result<Self> {
        let (mut values, rows, cols) = gram.into_parts();
        if rows != cols {
            return Err(Error::DimensionMismatch { left: rows, right: cols });
        }
        let n = rows;
        if n < 2 {
            return Err(Error::invalid("centered Gram needs at least two points"));
        }
        let nf = n as f64;
        // symmetric input: column means equal row means
        let means: Vec<f64> = values.chunks_exact(n).map(|r| r.iter().sum::<f64>() / nf).collect();
        let grand = means.iter().sum::<f64>() / nf;
        for (i, r) in values.chunks_exact_mut(n).enumerate() {
            for (j, v) in r.iter_mut().enumerate() {
                *v = *v - (means[i] + means[j]) + grand;
            }
        }
        Ok(Self { values, n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n + b]
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.values[a * self.n..(a + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn centered_gram(kernel: &KernelSpec, points: &Series) -> Result<CenteredGram> {
    CenteredGram::from_gram(symmetric_gram(kernel, points)?)
}

/// The four kernels of the statistic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndepKernels {
    /// `K_1` on single observations of `X`.
    pub k1: KernelSpec,
    /// `L_1` on single observations of `Y`.
    pub l1: KernelSpec,
    /// `K_{2m+1}` on lag windows of `X`.
    pub k_lag: KernelSpec,
    /// `L_{2m+1}` on lag windows of `Y`.
    pub l_lag: KernelSpec,
}

impl IndepKernels {
    /// Median-heuristic bandwidths, each on the point set its kernel sees:
    /// the full series for `K_1`, `L_1` and the lag windows for the others.
    pub fn median_heuristic(fx: KernelFamily, fy: KernelFamily, x: &Series, y: &Series, m: usize) -> Result<Self> {
        let xl = lag_embed(x, m)?;
        let yl = lag_embed(y, m)?;
        let mk = |f: KernelFamily, s: &Series| -> Result<KernelSpec> {
            KernelSpec::new(f, median_heuristic(s)?, s.geometry())
        };
        Ok(Self {
            k1: mk(fx, x)?,
            l1: mk(fy, y)?,
            k_lag: mk(fx, &xl)?,
            l_lag: mk(fy, &yl)?,
        })
    }

    /// Same kernel on both series and all window sizes.
    pub fn uniform(kernel: KernelSpec) -> Self {
        Self {
            k1: kernel,
            l1: kernel,
            k_lag: kernel,
            l_lag: kernel,
        }
    }

    /// Roles of `X` and `Y` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            k1: self.l1,
            l1: self.k1,
            k_lag: self.l_lag,
            l_lag: self.k_lag,
        }
    }
}

/// Centered Grams over the `n' = n - 2m` usable time points.
#[derive(Clone, Debug)]
pub struct IndependenceGrams {
    pub x: CenteredGram,
    pub y_lag: CenteredGram,
    pub y: CenteredGram,
    pub x_lag: CenteredGram,
}

impl IndependenceGrams {
    pub fn build(x: &Series, y: &Series, kernels: &IndepKernels, m: usize) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        let n = x.len();
        if 2 * m >= n {
            return Err(Error::LagTooLarge { lag: m, n });
        }
        let xb = x.slice(m..n - m);
        let yb = y.slice(m..n - m);
        let xl = lag_embed(x, m)?;
        let yl = lag_embed(y, m)?;
        let (cx, cy) = rayon::join(
            || -> Result<_> {
                let cx = centered_gram(&kernels.k1, &xb)?;
                let cxl = if m == 0 && kernels.k_lag == kernels.k1 {
                    cx.clone()
                } else {
                    centered_gram(&kernels.k_lag, &xl)?
                };
                Ok((cx, cxl))
            },
            || -> Result<_> {
                let cy = centered_gram(&kernels.l1, &yb)?;
                let cyl = if m == 0 && kernels.l_lag == kernels.l1 {
                    cy.clone()
                } else {
                    centered_gram(&kernels.l_lag, &yl)?
                };
                Ok((cy, cyl))
            },
        );
        let (x, x_lag) = cx?;
        let (y, y_lag) = cy?;
        Ok(Self { x, y_lag, y, x_lag })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// `<E_i, E_j>` from the centered Grams (zero-based indices).
pub fn e_inner_oracle(i: usize, j: usize, grams: &IndependenceGrams) -> f64 {
    grams.x.get(i, j) * grams.y_lag.get(i, j) + grams.y.get(i, j) * grams.x_lag.get(i, j)
}

fn project(n_prime: usize, split: SplitConfig, inner: impl Fn(usize, usize) -> f64) -> Result<ProjectedSequence> {
    let blocks = split.blocks(n_prime, SplitScheme::TwoWay)?;
    let m1 = blocks.m1() as f64;
    let f = blocks
        .test
        .map(|j| blocks.train.clone().map(|i| inner(i, j)).sum::<f64>() / m1)
        .collect();
    ProjectedSequence::new(f, Origin::Independence)
}

pub fn indep_projected_sequence(
    x: &Series,
    y: &Series,
    kernels: &IndepKernels,
    m: usize,
    split: SplitConfig,
) -> Result<ProjectedSequence> {
    let grams = IndependenceGrams::build(x, y, kernels, m)?;
    project(grams.len(), split, |i, j| e_inner_oracle(i, j, &grams))
}

fn outcome(seq: ProjectedSequence, n_prime: usize, split: SplitConfig, alpha: f64, table: &QuantileTable) -> Result<TestOutcome> {
    let held_out = seq.len();
    let sn = sn_mean_stat(&seq)?;
    let (critical_value, p_value, reject) = decide(table, Law::U, sn.scaled, alpha)?;
    let mut metadata = std::collections::BTreeMap::new();
    metadata.insert("table".into(), table.provenance());
    metadata.insert("n_prime".into(), n_prime.to_string());
    Ok(TestOutcome {
        statistic: sn.u,
        scaled_statistic: sn.scaled,
        alpha,
        critical_value,
        p_value,
        reject,
        split: SplitEcho {
            eta: split.eta,
            m1: n_prime - held_out,
            held_out,
        },
        location: None,
        metadata,
    })
}

pub fn indep_test(
    x: &Series,
    y: &Series,
    kernels: &IndepKernels,
    m: usize,
    split: SplitConfig,
    alpha: f64,
    table: &QuantileTable,
) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    let seq = indep_projected_sequence(x, y, kernels, m, split)?;
    let n_prime = x.len() - 2 * m;
    let mut out = outcome(seq, n_prime, split, alpha, table)?;
    out.metadata.insert("lag".into(), m.to_string());
    for (role, k) in [("x", kernels.k1), ("y", kernels.l1), ("x_lag", kernels.k_lag), ("y_lag", kernels.l_lag)] {
        for (key, v) in kernel_metadata(&k) {
            out.metadata.insert(format!("{key}_{role}"), v);
        }
    }
    Ok(out)
}

/// Projection for `(X_{t-s}, ..., X_{t+s})` independent of
/// `(Y_{t-m}, ..., Y_{t+m})`, with windows centred on common `t` and
/// `n' = n - 2 max(s, m)`. Uses the single tensor block
/// `(K(X^s_t, .) - mu) (x) (L(Y^m_t, .) - nu)`.
pub fn windowed_projected_sequence(
    x: &Series,
    y: &Series,
    kx: &KernelSpec,
    ly: &KernelSpec,
    s: usize,
    m: usize,
    split: SplitConfig,
) -> Result<ProjectedSequence> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let pad = s.max(m);
    let xw = window_embed(x, s, pad)?;
    let yw = window_embed(y, m, pad)?;
    let (cx, cy) = rayon::join(|| centered_gram(kx, &xw), || centered_gram(ly, &yw));
    let (cx, cy) = (cx?, cy?);
    project(cx.len(), split, |i, j| cx.get(i, j) * cy.get(i, j))
}

/// Median-heuristic kernels for [`windowed_projected_sequence`].
pub fn windowed_kernels(fx: KernelFamily, fy: KernelFamily, x: &Series, y: &Series, s: usize, m: usize) -> Result<(KernelSpec, KernelSpec)> {
    let pad = s.max(m);
    let xw = window_embed(x, s, pad)?;
    let yw = window_embed(y, m, pad)?;
    Ok((
        KernelSpec::new(fx, median_heuristic(&xw)?, xw.geometry())?,
        KernelSpec::new(fy, median_heuristic(&yw)?, yw.geometry())?,
    ))
}

#[allow(clippy::too_many_arguments)]
pub fn windowed_test(
    x: &Series,
    y: &Series,
    kx: &KernelSpec,
    ly: &KernelSpec,
    s: usize,
    m: usize,
    split: SplitConfig,
    alpha: f64,
    table: &QuantileTable,
) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    let seq = windowed_projected_sequence(x, y, kx, ly, s, m, split)?;
    let n_prime = x.len() - 2 * s.max(m);
    let mut out = outcome(seq, n_prime, split, alpha, table)?;
    out.metadata.insert("lag".into(), m.to_string());
    out.metadata.insert("lag_x".into(), s.to_string());
    for (role, k) in [("x", kx), ("y", ly)] {
        for (key, v) in kernel_metadata(k) {
            out.metadata.insert(format!("{key}_{role}"), v);
        }
    }
    Ok(out)
}
