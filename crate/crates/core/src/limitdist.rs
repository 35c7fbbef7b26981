//! Monte Carlo tables for the pivotal limit laws.
//!
//! `U = B(1) / sqrt(int_0^1 (B(s) - s B(1))^2 ds)` calibrates the
//! goodness-of-fit and independence statistics; `G`, the supremum over
//! `r` of the self-normalized Brownian-bridge ratio, calibrates the change
//! point statistic. Paths are simulated on the grid `j / L` from Gaussian
//! increments of variance `1 / L`.
//!
//! Tables are cached on disk as `<law>_L<L>_R<R>_S<seed>.qt`:
//!
//! ```text
//! law,L,R,seed,version,checksum
//! U,2000,200000,7,rkhs-sn-qt-1,<sha256 hex of the sample lines>
//! -9.8765432109876543e0
//! ...
//! ```
//!
//! One sorted sample per line, 17 significant digits, `\n` line endings.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::selfnorm::bridge_sums;

pub const TABLE_VERSION: &str = "rkhs-sn-qt-1";
const HEADER: &str = "law,L,R,seed,version,checksum";

/// Environment variable naming the default cache directory.
pub const CACHE_DIR_ENV: &str = "RKHS_SN_CACHE_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Law {
    U,
    G,
}

impl Law {
    /// Default `(L, R)` used when a test needs a table and none is given.
    pub fn default_params(self) -> (usize, usize) {
        match self {
            Law::U => (2000, 200_000),
            Law::G => (1000, 50_000),
        }
    }
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Law::U => "U",
            Law::G => "G",
        })
    }
}

impl FromStr for Law {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "U" | "u" => Ok(Law::U),
            "G" | "g" => Ok(Law::G),
            other => Err(Error::invalid(format!("unknown law {other:?}"))),
        }
    }
}

/// Sorted Monte Carlo sample of a limit law plus its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileTable {
    pub law: Law,
    samples: Vec<f64>,
    pub grid_steps: usize,
    pub reps: usize,
    pub seed: u64,
    pub version: String,
}

impl QuantileTable {
    pub fn from_samples(law: Law, mut samples: Vec<f64>, grid_steps: usize, seed: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("table samples must be finite"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self {
            law,
            reps: samples.len(),
            samples,
            grid_steps,
            seed,
            version: TABLE_VERSION.to_string(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn file_name(&self) -> String {
        table_file_name(self.law, self.grid_steps, self.reps, self.seed)
    }

    pub fn provenance(&self) -> String {
        format!(
            "{}(L={},R={},seed={},{})",
            self.law, self.grid_steps, self.reps, self.seed, self.version
        )
    }

    pub fn quantile(&self, prob: f64) -> Result<f64> {
        quantile(self, prob)
    }

    pub fn pvalue(&self, observed: f64) -> f64 {
        pvalue(self, observed)
    }
}

pub fn table_file_name(law: Law, grid_steps: usize, reps: usize, seed: u64) -> String {
    format!("{law}_L{grid_steps}_R{reps}_S{seed}.qt")
}

fn check_grid(grid_steps: usize) -> Result<()> {
    if grid_steps < 2 {
        return Err(Error::invalid(format!(
            "grid needs at least 2 steps, got {grid_steps}"
        )));
    }
    Ok(())
}

fn simulate<F>(law: Law, grid_steps: usize, reps: usize, seed: u64, replicate: F) -> Result<QuantileTable>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_grid(grid_steps)?;
    if reps == 0 {
        return Err(Error::invalid("need at least one replication"));
    }
    let scale = (grid_steps as f64).sqrt().recip();
    let samples: Vec<f64> = (0..reps)
        .into_par_iter()
        .map_init(
            || vec![0.0; grid_steps],
            |incr, r| {
                let mut rng = substream(seed, r as u64);
                for v in incr.iter_mut() {
                    *v = scale * rng.sample::<f64, _>(StandardNormal);
                }
                replicate(incr)
            },
        )
        .collect();
    QuantileTable::from_samples(law, samples, grid_steps, seed)
}

/// One draw of `U` from Brownian increments on an `L`-step grid.
pub fn u_from_increments(incr: &[f64]) -> f64 {
    let l = incr.len() as f64;
    let b1: f64 = incr.iter().sum();
    let mut b = 0.0;
    let mut ss = 0.0;
    for (j, v) in incr.iter().enumerate() {
        b += v;
        let dev = b - (j + 1) as f64 / l * b1;
        ss += dev * dev;
    }
    b1 / (ss / l).sqrt()
}

/// One draw of `G` from Brownian increments on an `L`-step grid, evaluated
/// at `r = k / L` for `k = 1..L-1`.
///
/// Both inner integrals come from running sums of `B^2`, `s B` and `s^2`:
/// the head integral over `[0, r]` from the path itself and the tail
/// integral over `[r, 1]` from the time-reversed path `B(1) - B(1 - u)`.
/// Grid points with a zero denominator are skipped; a path on which every
/// denominator vanishes (only possible for `L = 2`) yields `0`.
pub fn g_from_increments(incr: &[f64]) -> f64 {
    let l = incr.len();
    let lf = l as f64;
    let (head_b, head_q, head_lead) = bridge_sums(incr.iter().copied());
    let (_, tail_q, tail_lead) = bridge_sums(incr.iter().rev().copied());
    let b1 = head_b[l - 1];
    let mut best = f64::NEG_INFINITY;
    for k in 1..l {
        let a = head_q[k - 1];
        let b = tail_q[l - k - 1];
        if !(a + b > 1e-12 * (head_lead[k - 1] + tail_lead[l - k - 1])) {
            continue;
        }
        let num = head_b[k - 1] - k as f64 / lf * b1;
        let ratio = num / ((a + b) / lf).sqrt();
        best = best.max(ratio);
    }
    if best.is_finite() {
        best
    } else {
        0.0
    }
}

pub fn simulate_u(grid_steps: usize, reps: usize, seed: u64) -> Result<QuantileTable> {
    simulate(Law::U, grid_steps, reps, seed, u_from_increments)
}

pub fn simulate_g(grid_steps: usize, reps: usize, seed: u64) -> Result<QuantileTable> {
    simulate(Law::G, grid_steps, reps, seed, g_from_increments)
}

pub fn simulate_law(law: Law, grid_steps: usize, reps: usize, seed: u64) -> Result<QuantileTable> {
    match law {
        Law::U => simulate_u(grid_steps, reps, seed),
        Law::G => simulate_g(grid_steps, reps, seed),
    }
}

/// Empirical quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7).
pub fn quantile(table: &QuantileTable, prob: f64) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::invalid(format!("probability {prob} outside (0, 1)")));
    }
    Ok(type7_quantile(&table.samples, prob))
}

pub(crate) fn type7_quantile(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Critical value, p-value and one-sided decision for a scaled statistic.
pub(crate) fn decide(table: &QuantileTable, expected: Law, scaled: f64, alpha: f64) -> Result<(f64, f64, bool)> {
    if table.law != expected {
        return Err(Error::invalid(format!(
            "test needs a {expected} table, got {}",
            table.law
        )));
    }
    crate::series::check_alpha(alpha)?;
    let critical = quantile(table, 1.0 - alpha)?;
    Ok((critical, pvalue(table, scaled), scaled > critical))
}

/// Upper-tail p-value `(1 + #{samples >= observed}) / (R + 1)`.
pub fn pvalue(table: &QuantileTable, observed: f64) -> f64 {
    let below = table.samples.partition_point(|&s| s < observed);
    let at_or_above = table.samples.len() - below;
    (1 + at_or_above) as f64 / (table.samples.len() + 1) as f64
}

fn body_text(samples: &[f64]) -> String {
    let mut body = String::with_capacity(samples.len() * 24);
    for s in samples {
        writeln!(body, "{s:.16e}").expect("writing to a String cannot fail");
    }
    body
}

fn checksum(body: &str) -> String {
    let digest = Sha256::digest(body.as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut acc, b| {
        write!(acc, "{b:02x}").expect("writing to a String cannot fail");
        acc
    })
}

/// Serializes a table to the cache text format.
pub fn table_to_string(table: &QuantileTable) -> String {
    let body = body_text(&table.samples);
    format!(
        "{HEADER}\n{},{},{},{},{},{}\n{body}",
        table.law,
        table.grid_steps,
        table.reps,
        table.seed,
        table.version,
        checksum(&body)
    )
}

/// Parses the cache text format, verifying version and checksum.
pub fn table_from_str(text: &str, origin: &str) -> Result<QuantileTable> {
    let malformed = |what: &str| Error::MalformedTable(format!("{origin}: {what}"));
    let mut parts = text.splitn(3, '\n');
    let header = parts.next().unwrap_or_default();
    if header != HEADER {
        return Err(malformed("missing header line"));
    }
    let meta = parts.next().ok_or_else(|| Error::ChecksumMismatch(origin.into()))?;
    let body = parts.next().unwrap_or_default();
    let fields: Vec<&str> = meta.split(',').collect();
    if fields.len() != 6 {
        return Err(Error::ChecksumMismatch(origin.into()));
    }
    if fields[4] != TABLE_VERSION {
        return Err(Error::VersionMismatch {
            found: fields[4].to_string(),
            expected: TABLE_VERSION.to_string(),
        });
    }
    if checksum(body) != fields[5] {
        return Err(Error::ChecksumMismatch(origin.into()));
    }
    let law: Law = fields[0].parse()?;
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| malformed("bad integer field"));
    let grid_steps = parse_usize(fields[1])?;
    let reps = parse_usize(fields[2])?;
    let seed: u64 = fields[3].parse().map_err(|_| malformed("bad seed"))?;
    let samples = body
        .lines()
        .map(|l| l.parse::<f64>().map_err(|_| malformed("bad sample")))
        .collect::<Result<Vec<f64>>>()?;
    if samples.len() != reps {
        return Err(malformed("sample count does not match R"));
    }
    let table = QuantileTable::from_samples(law, samples, grid_steps, seed)?;
    Ok(table)
}

/// Writes `table` into `dir` under its canonical file name.
pub fn cache_store(table: &QuantileTable, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(table.file_name());
    write_table(table, &path)?;
    Ok(path)
}

pub fn cache_load(dir: impl AsRef<Path>, law: Law, grid_steps: usize, reps: usize, seed: u64) -> Result<QuantileTable> {
    let path = dir.as_ref().join(table_file_name(law, grid_steps, reps, seed));
    if !path.exists() {
        return Err(Error::NotFound(path.display().to_string()));
    }
    let table = read_table(&path)?;
    if table.law != law || table.grid_steps != grid_steps || table.reps != reps || table.seed != seed {
        return Err(Error::NotFound(format!(
            "{} holds {}",
            path.display(),
            table.provenance()
        )));
    }
    Ok(table)
}

pub fn write_table(table: &QuantileTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, table_to_string(table)).map_err(|e| Error::io(path, e))
}

pub fn read_table(path: impl AsRef<Path>) -> Result<QuantileTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    table_from_str(&text, &path.display().to_string())
}

/// Loads the table from `dir` if cached, otherwise simulates and stores it.
/// The flag is `true` when the table was simulated.
pub fn load_or_simulate(
    dir: impl AsRef<Path>,
    law: Law,
    grid_steps: usize,
    reps: usize,
    seed: u64,
) -> Result<(QuantileTable, bool)> {
    match cache_load(&dir, law, grid_steps, reps, seed) {
        Ok(t) => Ok((t, false)),
        Err(Error::NotFound(_)) => {
            let t = simulate_law(law, grid_steps, reps, seed)?;
            cache_store(&t, &dir)?;
            Ok((t, true))
        }
        Err(e) => Err(e),
    }
}

/// Cache directory from the environment, or `.rkhs-sn-cache` in the
/// working directory.
pub fn default_cache_dir() -> PathBuf {
    std::env::var_os(CACHE_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".rkhs-sn-cache"))
}
