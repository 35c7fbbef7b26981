//! Data containers shared by every test: the time-major [`Series`], sample
//! splitting, the [`TestOutcome`] verdict, and CSV ingestion.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the coordinates of one observation are compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    /// Plain Euclidean coordinates.
    Euclidean,
    /// Column `j` samples a curve at grid point `j/d`; squared distances are
    /// averaged over the grid instead of summed.
    FunctionalGrid,
    /// Points are indices into a user-supplied distance matrix. Only
    /// meaningful for kernels, never for a [`Series`].
    PrecomputedDistance,
}

/// An `n x p` multivariate time series stored row-major (row = time).
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    values: Vec<f64>,
    n: usize,
    p: usize,
    geometry: Geometry,
}

impl Series {
    pub fn new(values: Vec<f64>, n: usize, p: usize, geometry: Geometry) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::EmptyInput);
        }
        if values.len() != n * p {
            return Err(Error::DimensionMismatch {
                left: values.len(),
                right: n * p,
            });
        }
        if geometry == Geometry::PrecomputedDistance {
            return Err(Error::invalid(
                "a series cannot carry precomputed-distance geometry",
            ));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: idx / p,
                col: idx % p,
            });
        }
        Ok(Self {
            values,
            n,
            p,
            geometry,
        })
    }

    /// Univariate Euclidean series.
    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(values, n, 1, Geometry::Euclidean)
    }

    pub fn from_rows(rows: &[Vec<f64>], geometry: Geometry) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let p = rows[0].len();
        let mut values = Vec::with_capacity(n * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::RaggedRows {
                    row: i,
                    expected: p,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(values, n, p, geometry)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.p..(t + 1) * self.p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.p)
    }

    /// Contiguous time slice `range` as a new series.
    pub fn slice(&self, range: Range<usize>) -> Series {
        Series {
            values: self.values[range.start * self.p..range.end * self.p].to_vec(),
            n: range.len(),
            p: self.p,
            geometry: self.geometry,
        }
    }

    /// Applies `f` to every entry. Fails if the result is not finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Series> {
        Series::new(
            self.values.iter().map(|&v| f(v)).collect(),
            self.n,
            self.p,
            self.geometry,
        )
    }

    /// Time-reversed copy.
    pub fn reversed(&self) -> Series {
        let mut values = Vec::with_capacity(self.values.len());
        for row in self.values.chunks_exact(self.p).rev() {
            values.extend_from_slice(row);
        }
        Series {
            values,
            n: self.n,
            p: self.p,
            geometry: self.geometry,
        }
    }

    /// Writes the series as headerless CSV with 17 significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 24);
        for row in self.rows() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{v:.16e}").expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }
}

/// Parses CSV text (rows = time) into a [`Series`].
pub fn parse_series(text: &str, has_header: bool, geometry: Geometry) -> Result<Series> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .enumerate()
        .filter(|(_, l)| !l.is_empty());
    if has_header {
        lines.next();
    }
    let mut values = Vec::new();
    let mut p = None;
    let mut n = 0;
    for (lineno, line) in lines {
        let mut count = 0;
        for (col, cell) in line.split(',').enumerate() {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: lineno,
                col,
                cell: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row: lineno, col });
            }
            values.push(v);
            count += 1;
        }
        match p {
            None => p = Some(count),
            Some(expected) if expected != count => {
                return Err(Error::RaggedRows {
                    row: lineno,
                    expected,
                    found: count,
                })
            }
            _ => {}
        }
        n += 1;
    }
    let p = p.ok_or(Error::EmptyInput)?;
    Series::new(values, n, p, geometry)
}

pub fn load_series(path: impl AsRef<Path>, has_header: bool, geometry: Geometry) -> Result<Series> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_series(&text, has_header, geometry)
}

pub fn write_series(path: impl AsRef<Path>, series: &Series) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, series.to_csv_string()).map_err(|e| Error::io(path, e))
}

/// Block layout of a sample split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitScheme {
    /// `[1..m1]` estimates the direction, `[m1+1..n]` is projected.
    TwoWay,
    /// Head and tail blocks of length `m1` anchor the direction; the middle
    /// block of length `n - 2 m1` is projected.
    ThreeWay,
}

/// Sample-splitting ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub eta: f64,
}

impl SplitConfig {
    pub fn new(eta: f64) -> Self {
        Self { eta }
    }

    pub fn blocks(&self, n: usize, scheme: SplitScheme) -> Result<SplitBlocks> {
        split_indices(n, self.eta, scheme)
    }
}

/// Zero-based, half-open index ranges produced by [`split_indices`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitBlocks {
    pub train: Range<usize>,
    pub test: Range<usize>,
    /// Tail anchor block, present for [`SplitScheme::ThreeWay`].
    pub tail: Option<Range<usize>>,
}

impl SplitBlocks {
    pub fn m1(&self) -> usize {
        self.train.len()
    }
}

/// Splits `1..n` with `m1 = floor(n * eta)`.
pub fn split_indices(n: usize, eta: f64, scheme: SplitScheme) -> Result<SplitBlocks> {
    let upper = match scheme {
        SplitScheme::TwoWay => 1.0,
        SplitScheme::ThreeWay => 0.5,
    };
    if !(eta > 0.0 && eta < upper) {
        return Err(Error::invalid(format!(
            "eta = {eta} outside (0, {upper}) for {scheme:?} split"
        )));
    }
    if n < 4 {
        return Err(Error::SplitTooSmall { n, eta });
    }
    let m1 = (n as f64 * eta).floor() as usize;
    let held_out = match scheme {
        SplitScheme::TwoWay => n.saturating_sub(m1),
        SplitScheme::ThreeWay => n.saturating_sub(2 * m1),
    };
    if m1 == 0 || held_out < 2 {
        return Err(Error::SplitTooSmall { n, eta });
    }
    Ok(match scheme {
        SplitScheme::TwoWay => SplitBlocks {
            train: 0..m1,
            test: m1..n,
            tail: None,
        },
        SplitScheme::ThreeWay => SplitBlocks {
            train: 0..m1,
            test: m1..n - m1,
            tail: Some(n - m1..n),
        },
    })
}

/// Split sizes echoed back in a verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitEcho {
    pub eta: f64,
    pub m1: usize,
    pub held_out: usize,
}

/// Verdict of one test run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub scaled_statistic: f64,
    pub alpha: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub split: SplitEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<usize>,
    pub metadata: BTreeMap<String, String>,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha = {alpha} outside (0, 1)")))
    }
}
