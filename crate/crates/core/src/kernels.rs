//! Kernel evaluation, Gram matrices and the median-heuristic bandwidth.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{Geometry, Series};

/// Work size (entries x dimension) above which Gram rows are filled in parallel.
const PAR_THRESHOLD: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KernelFamily {
    /// `exp(-sigma |x-y|_2^2)`
    Gaussian,
    /// `exp(-sigma |x-y|_1)`
    Laplacian,
    /// `(1 + sigma |x-y|_2^2)^-1`
    Student,
    /// `(sigma^2 + |x-y|_2^2)^-c`
    InverseMultiquadric { c: f64 },
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Laplacian => "laplacian",
            KernelFamily::Student => "student",
            KernelFamily::InverseMultiquadric { .. } => "inverse_multiquadric",
        }
    }

    /// Name accepted by [`KernelFamily::parse`], including the IMQ exponent.
    pub fn label(&self) -> String {
        match self {
            KernelFamily::InverseMultiquadric { c } => format!("imq:{c}"),
            other => other.name().to_string(),
        }
    }

    /// Parses `gaussian`, `laplacian`, `student`, `imq` or `imq:<c>`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "rbf" => Ok(KernelFamily::Gaussian),
            "laplacian" => Ok(KernelFamily::Laplacian),
            "student" => Ok(KernelFamily::Student),
            "imq" | "inverse_multiquadric" => Ok(KernelFamily::InverseMultiquadric { c: 1.0 }),
            other => match other.strip_prefix("imq:") {
                Some(c) => {
                    let c: f64 = c
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad IMQ exponent {c:?}")))?;
                    Ok(KernelFamily::InverseMultiquadric { c })
                }
                None => Err(Error::UnsupportedKernel(other.to_string())),
            },
        }
    }
}

impl TryFrom<String> for KernelFamily {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        KernelFamily::parse(&s)
    }
}

impl From<KernelFamily> for String {
    fn from(f: KernelFamily) -> String {
        f.label()
    }
}

/// A fully specified kernel: family, bandwidth and input geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub sigma: f64,
    pub geometry: Geometry,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, sigma: f64, geometry: Geometry) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("bandwidth sigma = {sigma} must be > 0")));
        }
        if let KernelFamily::InverseMultiquadric { c } = family {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::invalid(format!("IMQ exponent c = {c} must be > 0")));
            }
        }
        Ok(Self {
            family,
            sigma,
            geometry,
        })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, sigma, Geometry::Euclidean)
    }

    /// Kernel with bandwidth chosen by [`median_heuristic`] on `points`,
    /// inheriting the geometry of `points`.
    pub fn with_median_heuristic(family: KernelFamily, points: &Series) -> Result<Self> {
        let sigma = median_heuristic(points)?;
        Self::new(family, sigma, points.geometry())
    }

    /// Kernel value from a squared distance (and L1 distance for the
    /// Laplacian family).
    #[inline]
    fn eval_sq_l1(&self, sq: f64, l1: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => (-self.sigma * sq).exp(),
            KernelFamily::Laplacian => (-self.sigma * l1).exp(),
            KernelFamily::Student => 1.0 / (1.0 + self.sigma * sq),
            KernelFamily::InverseMultiquadric { c } => (self.sigma * self.sigma + sq).powf(-c),
        }
    }

    /// Kernel value for a precomputed metric distance `d`.
    pub fn eval_distance(&self, d: f64) -> f64 {
        self.eval_sq_l1(d * d, d)
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let (sq, l1) = match self.family {
            KernelFamily::Laplacian => (0.0, l1_distance(self.geometry, x, y)),
            _ => (sq_distance(self.geometry, x, y), 0.0),
        };
        self.eval_sq_l1(sq, l1)
    }

    /// Value at zero distance.
    pub fn diagonal(&self) -> f64 {
        self.eval_sq_l1(0.0, 0.0)
    }
}

/// Squared distance under `geometry`; the functional grid averages over
/// the `d` grid points.
#[inline]
pub fn sq_distance(geometry: Geometry, x: &[f64], y: &[f64]) -> f64 {
    let s: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    match geometry {
        Geometry::FunctionalGrid => s / x.len() as f64,
        _ => s,
    }
}

#[inline]
fn l1_distance(geometry: Geometry, x: &[f64], y: &[f64]) -> f64 {
    let s: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
    match geometry {
        Geometry::FunctionalGrid => s / x.len() as f64,
        _ => s,
    }
}

pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if spec.geometry == Geometry::PrecomputedDistance {
        return Err(Error::invalid(
            "precomputed-distance kernels take distances, use eval_distance",
        ));
    }
    Ok(spec.eval_unchecked(x, y))
}

/// Dense row-major matrix of kernel evaluations.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
    pub spec: KernelSpec,
}

impl GramMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mean of each column.
    pub fn column_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for row in self.values.chunks_exact(self.cols) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        let r = self.rows as f64;
        sums.into_iter().map(|s| s / r).collect()
    }

    pub(crate) fn into_parts(self) -> (Vec<f64>, usize, usize) {
        (self.values, self.rows, self.cols)
    }
}

fn check_geometry(spec: &KernelSpec, points: &Series) -> Result<()> {
    if spec.geometry != points.geometry() {
        return Err(Error::invalid(format!(
            "kernel geometry {:?} does not match data geometry {:?}",
            spec.geometry,
            points.geometry()
        )));
    }
    Ok(())
}

/// Gram matrix between all rows of `a` and all rows of `b`.
pub fn gram(spec: &KernelSpec, a: &Series, b: &Series) -> Result<GramMatrix> {
    gram_block(spec, a, 0..a.len(), b, 0..b.len())
}

/// Gram block between rows `ra` of `a` and rows `rb` of `b`.
pub fn gram_block(
    spec: &KernelSpec,
    a: &Series,
    ra: Range<usize>,
    b: &Series,
    rb: Range<usize>,
) -> Result<GramMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    check_geometry(spec, a)?;
    check_geometry(spec, b)?;
    if ra.end > a.len() || rb.end > b.len() {
        return Err(Error::invalid("gram block range out of bounds"));
    }
    let (rows, cols) = (ra.len(), rb.len());
    let mut values = vec![0.0; rows * cols];
    if cols > 0 {
        let fill = |(i, out): (usize, &mut [f64])| {
            let x = a.row(ra.start + i);
            for (j, o) in out.iter_mut().enumerate() {
                *o = spec.eval_unchecked(x, b.row(rb.start + j));
            }
        };
        if rows * cols * a.dim() >= PAR_THRESHOLD {
            values.par_chunks_mut(cols).enumerate().for_each(fill);
        } else {
            values.chunks_mut(cols).enumerate().for_each(fill);
        }
    }
    Ok(GramMatrix {
        values,
        rows,
        cols,
        spec: *spec,
    })
}

/// Symmetric Gram matrix of `points` against itself; evaluates each
/// unordered pair once.
pub fn symmetric_gram(spec: &KernelSpec, points: &Series) -> Result<GramMatrix> {
    check_geometry(spec, points)?;
    let n = points.len();
    let mut values = vec![0.0; n * n];
    let diag = spec.diagonal();
    let fill = |(i, out): (usize, &mut [f64])| {
        let x = points.row(i);
        out[i] = diag;
        for j in i + 1..n {
            out[j] = spec.eval_unchecked(x, points.row(j));
        }
    };
    if n * n * points.dim() >= 2 * PAR_THRESHOLD {
        values.par_chunks_mut(n).enumerate().for_each(fill);
    } else {
        values.chunks_mut(n).enumerate().for_each(fill);
    }
    for i in 0..n {
        for j in 0..i {
            values[i * n + j] = values[j * n + i];
        }
    }
    Ok(GramMatrix {
        values,
        rows: n,
        cols: n,
        spec: *spec,
    })
}

/// Gram matrix from a row-major matrix of precomputed metric distances.
pub fn gram_from_distances(
    spec: &KernelSpec,
    distances: &[f64],
    rows: usize,
    cols: usize,
) -> Result<GramMatrix> {
    if distances.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            left: distances.len(),
            right: rows * cols,
        });
    }
    if let Some(d) = distances.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Error::invalid(format!("invalid distance {d}")));
    }
    Ok(GramMatrix {
        values: distances.iter().map(|&d| spec.eval_distance(d)).collect(),
        rows,
        cols,
        spec: *spec,
    })
}

/// Median of `1 / (2 dist^2)` over all pairs of distinct indices, with
/// zero-distance pairs counted as `+inf`.
///
/// The ordered-pair multiset holds every unordered value twice, so its median
/// equals the unordered-pair median computed here.
pub fn median_heuristic(points: &Series) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::invalid("median heuristic needs at least two points"));
    }
    let geometry = points.geometry();
    let mut vals = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let x = points.row(i);
        for j in i + 1..n {
            let d2 = sq_distance(geometry, x, points.row(j));
            vals.push(d2);
        }
    }
    median_heuristic_from_sq_dists(vals)
}

/// [`median_heuristic`] from the unordered-pair squared distances.
pub fn median_heuristic_from_sq_dists(mut vals: Vec<f64>) -> Result<f64> {
    if vals.is_empty() {
        return Err(Error::invalid("median heuristic needs at least one pair"));
    }
    for v in vals.iter_mut() {
        *v = if *v > 0.0 { 0.5 / *v } else { f64::INFINITY };
    }
    let m = vals.len();
    let mid = m / 2;
    let (lo, upper, _) = vals.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    let median = if m % 2 == 1 {
        upper
    } else {
        let lower = lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    };
    if median.is_finite() {
        Ok(median)
    } else {
        Err(Error::AllPointsIdentical)
    }
}
