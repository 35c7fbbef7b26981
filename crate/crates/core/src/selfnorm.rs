//! Self-normalized statistics of a univariate projected sequence.
//!
//! [`sn_mean_stat`] studentizes the sample mean by the recursive partial-sum
//! normalizer; [`cusum_stat`] is the self-normalized CUSUM for a single mean
//! change. Both run in linear time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative size below which an expanded `V(k)` counts as exactly zero.
const ZERO_NORMALIZER_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Gof,
    Changepoint,
    Independence,
}

/// Univariate sequence obtained by projecting held-out embedded points.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedSequence {
    pub z: Vec<f64>,
    pub origin: Origin,
}

impl ProjectedSequence {
    pub fn new(z: Vec<f64>, origin: Origin) -> Result<Self> {
        if z.len() < 2 {
            return Err(Error::invalid(format!(
                "projected sequence needs length >= 2, got {}",
                z.len()
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("projected sequence has non-finite entries"));
        }
        Ok(Self { z, origin })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    fn is_constant(&self) -> bool {
        self.z.iter().all(|&v| v == self.z[0])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnMeanResult {
    /// Sample mean.
    pub t: f64,
    /// Self-normalizer.
    pub w: f64,
    /// `t / w`.
    pub u: f64,
    /// `sqrt(m) * u`, the quantity compared against the limit law.
    pub scaled: f64,
}

pub fn sn_mean_stat(seq: &ProjectedSequence) -> Result<SnMeanResult> {
    let z = &seq.z;
    let m = z.len();
    if m < 2 {
        return Err(Error::invalid("sn_mean_stat needs at least two values"));
    }
    if seq.is_constant() {
        return Err(Error::DegenerateNormalizer);
    }
    let mf = m as f64;
    let t = z.iter().sum::<f64>() / mf;
    // partial sums of Z_j - T equal S_t - t T
    let mut partial = 0.0;
    let mut ss = 0.0;
    for &v in z {
        partial += v - t;
        ss += partial * partial;
    }
    let w = (ss / (mf * mf)).sqrt();
    if !(w > 0.0) {
        return Err(Error::DegenerateNormalizer);
    }
    let u = t / w;
    Ok(SnMeanResult {
        t,
        w,
        u,
        scaled: mf.sqrt() * u,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CusumResult {
    /// Largest finite ratio `T(k) / sqrt(V(k))`.
    pub g: f64,
    /// Smallest `k` (1-based, within `1..N-1`) attaining `g`.
    pub khat: usize,
    /// Ratio for `k = 1..N-1`; `None` where `V(k) = 0`.
    pub ratios: Vec<Option<f64>>,
}

/// Running tables for `sum_{t<=k} (S_t - (t/k) S_k)^2` where `S` are the
/// partial sums of `x`, expanded as
/// `sum S_t^2 - (2 S_k / k) sum t S_t + (S_k / k)^2 sum t^2`.
///
/// Returns `(partial_sums, quadratic, leading)` indexed by `k = 1..len`
/// at position `k - 1`; `leading` is `sum_{t<=k} S_t^2`, the scale used to
/// decide when the quadratic is numerically zero.
pub(crate) fn bridge_sums(x: impl Iterator<Item = f64>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (lower, _) = x.size_hint();
    let mut partial = Vec::with_capacity(lower);
    let mut quad = Vec::with_capacity(lower);
    let mut lead = Vec::with_capacity(lower);
    let (mut s, mut s2, mut ts) = (0.0, 0.0, 0.0);
    for (i, v) in x.enumerate() {
        let k = (i + 1) as f64;
        s += v;
        s2 += s * s;
        ts += k * s;
        let t2 = k * (k + 1.0) * (2.0 * k + 1.0) / 6.0;
        let q = s2 - 2.0 * s / k * ts + (s / k) * (s / k) * t2;
        partial.push(s);
        quad.push(q.max(0.0));
        lead.push(s2);
    }
    (partial, quad, lead)
}

pub fn cusum_stat(seq: &ProjectedSequence) -> Result<CusumResult> {
    let z = &seq.z;
    let n = z.len();
    if n < 3 {
        return Err(Error::invalid(format!(
            "cusum_stat needs N >= 3, got {n}"
        )));
    }
    if seq.is_constant() {
        return Err(Error::AllNormalizersZero);
    }
    let nf = n as f64;
    let mean = z.iter().sum::<f64>() / nf;
    // every quantity below is invariant to shifting Z, so work with centered values
    let (head_s, head_q, head_lead) = bridge_sums(z.iter().map(|v| v - mean));
    let (_, tail_q, tail_lead) = bridge_sums(z.iter().rev().map(|v| v - mean));

    let mut ratios = Vec::with_capacity(n - 1);
    let mut best: Option<(f64, usize)> = None;
    for k in 1..n {
        let a = head_q[k - 1];
        let b = tail_q[n - k - 1];
        let scale = head_lead[k - 1] + tail_lead[n - k - 1];
        let v = (a + b) / (nf * nf);
        if !(a + b > ZERO_NORMALIZER_RTOL * scale) {
            ratios.push(None);
            continue;
        }
        let t = head_s[k - 1] / nf.sqrt();
        let r = t / v.sqrt();
        ratios.push(Some(r));
        if best.is_none_or(|(g, _)| r > g) {
            best = Some((r, k));
        }
    }
    let (g, khat) = best.ok_or(Error::AllNormalizersZero)?;
    Ok(CusumResult { g, khat, ratios })
}
