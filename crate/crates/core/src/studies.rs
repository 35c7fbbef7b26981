//! Monte Carlo driver for size tables and size-adjusted power curves.
//!
//! A study is a pure function of its JSON spec: replication `r` of every
//! grid cell draws its data with seed `derive_seed(seed, r)`, so cells share
//! random numbers and reruns produce byte-identical CSV. Wall-clock timings
//! are written to a separate file for that reason.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{fixedb_gof, normal_cdf, FixedBConfig};
use crate::changepoint::cp_test;
use crate::dgp::{Dgp, Sample};
use crate::embedding::{gaussian_null_embedding, MeanEmbedding};
use crate::error::{Error, Result};
use crate::gof::{gof_test, GofProblem};
use crate::independence::{indep_test, IndepKernels};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::limitdist::{default_cache_dir, load_or_simulate, type7_quantile, Law, QuantileTable};
use crate::rng::derive_seed;
use crate::series::{Series, SplitConfig};

/// Index mixed into the seed to obtain the independent null replications
/// used for size adjustment.
const NULL_SEED_INDEX: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "null", rename_all = "snake_case")]
pub enum NullSpec {
    /// `N(0, 1 / (1 - kappa^2))` with `kappa` taken from the process.
    Ar1Marginal,
    Gaussian { variance: f64 },
}

impl NullSpec {
    fn variance(&self, dgp: &Dgp) -> Result<f64> {
        match *self {
            NullSpec::Gaussian { variance } => Ok(variance),
            NullSpec::Ar1Marginal => match *dgp {
                Dgp::Ar1 { kappa } | Dgp::GofMixture { kappa, .. } | Dgp::CpMixture { kappa, .. } => {
                    Ok(1.0 / (1.0 - kappa * kappa))
                }
                _ => Err(Error::invalid("ar1_marginal null needs an AR(1)-based process")),
            },
        }
    }
}

fn default_family() -> KernelFamily {
    KernelFamily::Gaussian
}

fn default_null() -> NullSpec {
    NullSpec::Ar1Marginal
}

/// Test applied in every replication. Bandwidths always come from the
/// median heuristic on the replication's data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum TestSpec {
    Gof {
        eta: f64,
        #[serde(default = "default_family")]
        kernel: KernelFamily,
        #[serde(default = "default_null")]
        null: NullSpec,
    },
    Fixedb {
        b: f64,
        #[serde(default = "default_n_prime")]
        n_prime: usize,
        #[serde(default = "default_null")]
        null: NullSpec,
    },
    Cpt {
        eta: f64,
        #[serde(default = "default_family")]
        kernel: KernelFamily,
    },
    Indep {
        eta: f64,
        #[serde(default)]
        lag: usize,
        #[serde(default = "default_family")]
        kernel: KernelFamily,
    },
}

fn default_n_prime() -> usize {
    30
}

impl TestSpec {
    fn name(&self) -> &'static str {
        match self {
            TestSpec::Gof { .. } => "gof",
            TestSpec::Fixedb { .. } => "fixedb",
            TestSpec::Cpt { .. } => "cpt",
            TestSpec::Indep { .. } => "indep",
        }
    }

    fn law(&self) -> Option<Law> {
        match self {
            TestSpec::Gof { .. } | TestSpec::Indep { .. } => Some(Law::U),
            TestSpec::Cpt { .. } => Some(Law::G),
            TestSpec::Fixedb { .. } => None,
        }
    }

    fn kernel_name(&self) -> &'static str {
        match self {
            TestSpec::Gof { kernel, .. } | TestSpec::Cpt { kernel, .. } | TestSpec::Indep { kernel, .. } => {
                kernel.name()
            }
            TestSpec::Fixedb { .. } => "",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Size,
    Power,
}

/// Parameter grid; every listed axis overrides the corresponding field of
/// the test or process. Cells are the Cartesian product.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default)]
    pub kappa: Vec<f64>,
    #[serde(default)]
    pub eta: Vec<f64>,
    #[serde(default)]
    pub lag: Vec<usize>,
    #[serde(default)]
    pub b: Vec<f64>,
    #[serde(default)]
    pub kernel: Vec<KernelFamily>,
    #[serde(default)]
    pub q: Vec<f64>,
    /// Alternative strengths; the power axis of a power study.
    #[serde(default)]
    pub lambda: Vec<f64>,
}

/// Limit-law table parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableParams {
    pub grid_steps: usize,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub name: String,
    pub kind: StudyKind,
    pub test: TestSpec,
    pub dgp: Dgp,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub grid: Grid,
    /// Overrides the default `(L, R)` of the limit-law tables.
    #[serde(default)]
    pub table: Option<TableParams>,
}

fn default_alphas() -> Vec<f64> {
    vec![0.05]
}

impl StudySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("study spec: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::invalid("study needs at least one replication"));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::invalid("alphas must be non-empty and inside (0, 1)"));
        }
        if self.kind == StudyKind::Power {
            if self.grid.lambda.is_empty() {
                return Err(Error::invalid("power study needs a lambda grid"));
            }
            self.dgp.lambda().ok_or_else(|| Error::invalid("power study needs a process with lambda"))?;
        }
        for cell in self.cells()? {
            for &l in &self.grid.lambda {
                cell.dgp.with_lambda(l)?;
            }
        }
        Ok(())
    }

    /// Grid cells (excluding the lambda axis for power studies).
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let axis_f = |v: &Vec<f64>| -> Vec<Option<f64>> {
            if v.is_empty() {
                vec![None]
            } else {
                v.iter().copied().map(Some).collect()
            }
        };
        let lags: Vec<Option<usize>> = if self.grid.lag.is_empty() {
            vec![None]
        } else {
            self.grid.lag.iter().copied().map(Some).collect()
        };
        let kernels: Vec<Option<KernelFamily>> = if self.grid.kernel.is_empty() {
            vec![None]
        } else {
            self.grid.kernel.iter().copied().map(Some).collect()
        };
        let lambdas = if self.kind == StudyKind::Size { axis_f(&self.grid.lambda) } else { vec![None] };
        let mut cells = Vec::new();
        for &kappa in &axis_f(&self.grid.kappa) {
            for &q in &axis_f(&self.grid.q) {
                for &eta in &axis_f(&self.grid.eta) {
                    for &lag in &lags {
                        for &b in &axis_f(&self.grid.b) {
                            for &kernel in &kernels {
                                for &lambda in &lambdas {
                                    cells.push(self.cell(kappa, q, eta, lag, b, kernel, lambda)?);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(cells)
    }

    #[allow(clippy::too_many_arguments)]
    fn cell(
        &self,
        kappa: Option<f64>,
        q: Option<f64>,
        eta: Option<f64>,
        lag: Option<usize>,
        b: Option<f64>,
        kernel: Option<KernelFamily>,
        lambda: Option<f64>,
    ) -> Result<Cell> {
        let mut dgp = self.dgp;
        if let Some(k) = kappa {
            dgp = dgp.with_kappa(k)?;
        }
        if let Some(v) = q {
            match &mut dgp {
                Dgp::Far1Pair { q, .. } => *q = v,
                _ => return Err(Error::invalid("q grid needs the far1_pair process")),
            }
        }
        if let Some(l) = lambda {
            dgp = dgp.with_lambda(l)?;
        }
        let mut test = self.test;
        match &mut test {
            TestSpec::Gof { eta: e, kernel: k, .. } | TestSpec::Cpt { eta: e, kernel: k } => {
                if let Some(v) = eta {
                    *e = v;
                }
                if let Some(v) = kernel {
                    *k = v;
                }
                if lag.is_some() || b.is_some() {
                    return Err(Error::invalid("lag/b grid does not apply to this test"));
                }
            }
            TestSpec::Indep { eta: e, lag: l, kernel: k } => {
                if let Some(v) = eta {
                    *e = v;
                }
                if let Some(v) = lag {
                    *l = v;
                }
                if let Some(v) = kernel {
                    *k = v;
                }
                if b.is_some() {
                    return Err(Error::invalid("b grid does not apply to the independence test"));
                }
            }
            TestSpec::Fixedb { b: bb, .. } => {
                if let Some(v) = b {
                    *bb = v;
                }
                if eta.is_some() || lag.is_some() || kernel.is_some() {
                    return Err(Error::invalid("eta/lag/kernel grid does not apply to the fixed-b test"));
                }
            }
        }
        Ok(Cell { test, dgp })
    }

    fn table_params(&self, law: Law) -> TableParams {
        self.table.unwrap_or_else(|| {
            let (grid_steps, reps) = law.default_params();
            TableParams {
                grid_steps,
                reps,
                seed: 1,
            }
        })
    }
}

/// One grid cell: a fully specified test and process.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub test: TestSpec,
    pub dgp: Dgp,
}

/// Source of limit-law tables for a study.
pub struct Tables {
    pub u: Option<QuantileTable>,
    pub g: Option<QuantileTable>,
}

impl Tables {
    /// Loads (or simulates and caches) whatever tables the study needs.
    pub fn for_spec(spec: &StudySpec, cache_dir: Option<&Path>) -> Result<Self> {
        let dir = cache_dir.map(Path::to_path_buf).unwrap_or_else(default_cache_dir);
        let mut tables = Tables { u: None, g: None };
        for cell in spec.cells()? {
            if let Some(law) = cell.test.law() {
                let slot = match law {
                    Law::U => &mut tables.u,
                    Law::G => &mut tables.g,
                };
                if slot.is_none() {
                    let p = spec.table_params(law);
                    *slot = Some(load_or_simulate(&dir, law, p.grid_steps, p.reps, p.seed)?.0);
                }
            }
        }
        Ok(tables)
    }

    fn get(&self, law: Law) -> Result<&QuantileTable> {
        match law {
            Law::U => self.u.as_ref(),
            Law::G => self.g.as_ref(),
        }
        .ok_or_else(|| Error::invalid(format!("no {law} table loaded")))
    }
}

/// Result of one replication.
#[derive(Clone, Debug, PartialEq)]
pub struct Replication {
    /// Statistic on the "larger rejects" scale (`1 - pval*` for fixed-b);
    /// `None` when the statistic was degenerate.
    pub value: Option<f64>,
    /// Rejection at each nominal level (false when degenerate).
    pub reject: Vec<bool>,
}

fn one_series(sample: Sample) -> Result<Series> {
    match sample {
        Sample::One(s) => Ok(s),
        Sample::Pair(..) => Err(Error::invalid("test needs a single series")),
    }
}

/// Runs `cell` once on data drawn with `seed`.
pub fn replicate(cell: &Cell, n: usize, seed: u64, alphas: &[f64], tables: &Tables) -> Result<Replication> {
    let sample = cell.dgp.generate(n, seed)?;
    let outcome: Result<(f64, Vec<bool>)> = (|| match cell.test {
        TestSpec::Gof { eta, kernel, null } => {
            let data = one_series(sample)?;
            let k = KernelSpec::with_median_heuristic(kernel, &data)?;
            let variance = null.variance(&cell.dgp)?;
            let emb: MeanEmbedding = gaussian_null_embedding(&k, variance, data.dim())?;
            let table = tables.get(Law::U)?;
            let problem = GofProblem {
                data,
                null_embedding: emb,
                kernel: k,
                split: SplitConfig::new(eta),
                alpha: alphas[0],
            };
            let out = gof_test(&problem, table)?;
            let rej = alphas.iter().map(|&a| Ok(out.scaled_statistic > table.quantile(1.0 - a)?)).collect::<Result<_>>()?;
            Ok((out.scaled_statistic, rej))
        }
        TestSpec::Fixedb { b, n_prime, null } => {
            let data = one_series(sample)?;
            let f0 = normal_cdf(0.0, null.variance(&cell.dgp)?)?;
            let r = fixedb_gof(&data, &f0, FixedBConfig { b, n_prime })?;
            Ok((1.0 - r.pvalue, alphas.iter().map(|&a| r.pvalue <= a).collect()))
        }
        TestSpec::Cpt { eta, kernel } => {
            let data = one_series(sample)?;
            let k = KernelSpec::with_median_heuristic(kernel, &data)?;
            let table = tables.get(Law::G)?;
            let out = cp_test(&data, &k, SplitConfig::new(eta), alphas[0], table)?;
            let rej = alphas.iter().map(|&a| Ok(out.statistic > table.quantile(1.0 - a)?)).collect::<Result<_>>()?;
            Ok((out.statistic, rej))
        }
        TestSpec::Indep { eta, lag, kernel } => {
            let (x, y) = match sample {
                Sample::Pair(x, y) => (x, y),
                Sample::One(_) => return Err(Error::invalid("independence test needs a pair of series")),
            };
            let kernels = IndepKernels::median_heuristic(kernel, kernel, &x, &y, lag)?;
            let table = tables.get(Law::U)?;
            let out = indep_test(&x, &y, &kernels, lag, SplitConfig::new(eta), alphas[0], table)?;
            let rej = alphas.iter().map(|&a| Ok(out.scaled_statistic > table.quantile(1.0 - a)?)).collect::<Result<_>>()?;
            Ok((out.scaled_statistic, rej))
        }
    })();
    match outcome {
        Ok((value, reject)) => Ok(Replication {
            value: Some(value),
            reject,
        }),
        Err(e) if e.is_degenerate() => Ok(Replication {
            value: None,
            reject: vec![false; alphas.len()],
        }),
        Err(e) => Err(e),
    }
}

fn run_cell(cell: &Cell, spec: &StudySpec, base_seed: u64, tables: &Tables) -> Result<(Vec<Replication>, f64)> {
    let start = Instant::now();
    let reps = (0..spec.reps)
        .into_par_iter()
        .map(|r| replicate(cell, spec.n, derive_seed(base_seed, r as u64), &spec.alphas, tables))
        .collect::<Result<Vec<_>>>()?;
    Ok((reps, start.elapsed().as_secs_f64() / spec.reps as f64))
}

/// Rate and binomial standard error.
pub fn rate_and_se(hits: usize, reps: usize) -> (f64, f64) {
    let p = hits as f64 / reps as f64;
    (p, (p * (1.0 - p) / reps as f64).sqrt())
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn cell_columns(cell: &Cell) -> [String; 7] {
    let (eta, lag, b) = match cell.test {
        TestSpec::Gof { eta, .. } | TestSpec::Cpt { eta, .. } => (Some(eta), None, None),
        TestSpec::Indep { eta, lag, .. } => (Some(eta), Some(lag), None),
        TestSpec::Fixedb { b, .. } => (None, None, Some(b)),
    };
    let kappa = match cell.dgp {
        Dgp::Ar1 { kappa } | Dgp::GofMixture { kappa, .. } | Dgp::CpMixture { kappa, .. } => Some(kappa),
        _ => None,
    };
    let q = match cell.dgp {
        Dgp::Far1Pair { q, .. } => Some(q),
        _ => None,
    };
    let dgp = serde_json::to_value(cell.dgp).ok().and_then(|v| v.get("dgp").and_then(|d| d.as_str().map(str::to_string)));
    [
        dgp.unwrap_or_default(),
        cell.test.kernel_name().to_string(),
        fmt_opt(kappa),
        fmt_opt(q),
        fmt_opt(eta),
        fmt_opt(lag),
        fmt_opt(b),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct SizeRow {
    pub cell: Cell,
    pub alpha: f64,
    pub rejections: usize,
    pub reps: usize,
    pub rate: f64,
    pub se: f64,
    pub degenerate: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SizeTable {
    pub name: String,
    pub rows: Vec<SizeRow>,
    /// Mean wall time per replication for each cell, in seconds.
    pub seconds_per_rep: Vec<(Cell, f64)>,
}

impl SizeTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("study,test,dgp,kernel,kappa,q,eta,lag,b,lambda,alpha,reps,rejections,rate,se,degenerate\n");
        for r in &self.rows {
            let c = cell_columns(&r.cell);
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{:.6},{:.6},{}",
                self.name,
                r.cell.test.name(),
                c[0],
                c[1],
                c[2],
                c[3],
                c[4],
                c[5],
                c[6],
                fmt_opt(r.cell.dgp.lambda()),
                r.alpha,
                r.reps,
                r.rejections,
                r.rate,
                r.se,
                r.degenerate
            )
            .expect("writing to a String cannot fail");
        }
        s
    }
}

pub fn run_size_study(spec: &StudySpec, tables: &Tables) -> Result<SizeTable> {
    spec.validate()?;
    if spec.kind != StudyKind::Size {
        return Err(Error::invalid("spec is not a size study"));
    }
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for cell in spec.cells()? {
        let (reps, secs) = run_cell(&cell, spec, spec.seed, tables)?;
        let degenerate = reps.iter().filter(|r| r.value.is_none()).count();
        for (ai, &alpha) in spec.alphas.iter().enumerate() {
            let hits = reps.iter().filter(|r| r.reject[ai]).count();
            let (rate, se) = rate_and_se(hits, spec.reps);
            rows.push(SizeRow {
                cell,
                alpha,
                rejections: hits,
                reps: spec.reps,
                rate,
                se,
                degenerate,
            });
        }
        timings.push((cell, secs));
    }
    Ok(SizeTable {
        name: spec.name.clone(),
        rows,
        seconds_per_rep: timings,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerPoint {
    pub cell: Cell,
    pub alpha: f64,
    pub lambda: f64,
    pub power: f64,
    pub se: f64,
    /// Empirical `(1 - alpha)` quantile of the null statistics.
    pub null_critical: f64,
    pub degenerate: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerCurve {
    pub name: String,
    pub points: Vec<PowerPoint>,
    pub seconds_per_rep: Vec<(Cell, f64)>,
}

/// Description of the size adjustment, echoed into study metadata.
pub const SIZE_ADJUSTMENT_NOTE: &str = "critical value = type-7 empirical (1 - alpha) quantile of the statistic over \
     `reps` replications of the same process at lambda = 0 with seeds derive_seed(derive_seed(seed, 2^64 - 1), r); \
     power = share of alternative replications whose statistic exceeds it; degenerate statistics never reject";

pub fn run_power_study(spec: &StudySpec, tables: &Tables) -> Result<PowerCurve> {
    spec.validate()?;
    if spec.kind != StudyKind::Power {
        return Err(Error::invalid("spec is not a power study"));
    }
    let null_seed = derive_seed(spec.seed, NULL_SEED_INDEX);
    let mut points = Vec::new();
    let mut timings = Vec::new();
    for cell in spec.cells()? {
        let null_cell = Cell {
            test: cell.test,
            dgp: cell.dgp.with_lambda(0.0)?,
        };
        let (null_reps, _) = run_cell(&null_cell, spec, null_seed, tables)?;
        let mut null_values: Vec<f64> = null_reps.iter().map(|r| r.value.unwrap_or(f64::NEG_INFINITY)).collect();
        null_values.sort_by(f64::total_cmp);
        for &lambda in &spec.grid.lambda {
            let alt = Cell {
                test: cell.test,
                dgp: cell.dgp.with_lambda(lambda)?,
            };
            let (reps, secs) = run_cell(&alt, spec, spec.seed, tables)?;
            let degenerate = reps.iter().filter(|r| r.value.is_none()).count();
            for &alpha in &spec.alphas {
                let crit = type7_quantile(&null_values, 1.0 - alpha);
                let hits = reps.iter().filter(|r| r.value.is_some_and(|v| v > crit)).count();
                let (power, se) = rate_and_se(hits, spec.reps);
                points.push(PowerPoint {
                    cell: alt,
                    alpha,
                    lambda,
                    power,
                    se,
                    null_critical: crit,
                    degenerate,
                });
            }
            timings.push((alt, secs));
        }
    }
    Ok(PowerCurve {
        name: spec.name.clone(),
        points,
        seconds_per_rep: timings,
    })
}

impl PowerCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("study,test,dgp,kernel,kappa,q,eta,lag,b,alpha,lambda,power,se,null_critical,degenerate\n");
        for p in &self.points {
            let c = cell_columns(&p.cell);
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6e},{}",
                self.name,
                p.cell.test.name(),
                c[0],
                c[1],
                c[2],
                c[3],
                c[4],
                c[5],
                c[6],
                p.alpha,
                p.lambda,
                p.power,
                p.se,
                p.null_critical,
                p.degenerate
            )
            .expect("writing to a String cannot fail");
        }
        s
    }
}

fn timing_csv(timings: &[(Cell, f64)]) -> String {
    let mut s = String::from("test,dgp,kernel,kappa,q,eta,lag,b,lambda,seconds_per_rep\n");
    for (cell, secs) in timings {
        let c = cell_columns(cell);
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{:.6e}",
            cell.test.name(),
            c[0],
            c[1],
            c[2],
            c[3],
            c[4],
            c[5],
            c[6],
            fmt_opt(cell.dgp.lambda()),
            secs
        )
        .expect("writing to a String cannot fail");
    }
    s
}

/// Files written by [`run_study`].
#[derive(Clone, Debug)]
pub struct StudyFiles {
    pub results: PathBuf,
    pub timing: PathBuf,
    pub metadata: PathBuf,
}

/// Runs a study and writes `<name>.csv`, `<name>_timing.csv` and
/// `<name>_meta.json` into `out_dir`.
pub fn run_study(spec: &StudySpec, out_dir: &Path, cache_dir: Option<&Path>) -> Result<StudyFiles> {
    spec.validate()?;
    let tables = Tables::for_spec(spec, cache_dir)?;
    let (csv, timings) = match spec.kind {
        StudyKind::Size => {
            let t = run_size_study(spec, &tables)?;
            (t.to_csv(), t.seconds_per_rep)
        }
        StudyKind::Power => {
            let c = run_power_study(spec, &tables)?;
            (c.to_csv(), c.seconds_per_rep)
        }
    };
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let files = StudyFiles {
        results: out_dir.join(format!("{}.csv", spec.name)),
        timing: out_dir.join(format!("{}_timing.csv", spec.name)),
        metadata: out_dir.join(format!("{}_meta.json", spec.name)),
    };
    let mut meta = BTreeMap::new();
    meta.insert("spec", serde_json::to_value(spec).expect("spec serializes"));
    for (law, t) in [("table_u", &tables.u), ("table_g", &tables.g)] {
        if let Some(t) = t {
            meta.insert(law, serde_json::Value::String(t.provenance()));
        }
    }
    if spec.kind == StudyKind::Power {
        meta.insert("size_adjustment", serde_json::Value::String(SIZE_ADJUSTMENT_NOTE.into()));
    }
    let meta = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    for (path, body) in [(&files.results, csv), (&files.timing, timing_csv(&timings)), (&files.metadata, meta)] {
        std::fs::write(path, body).map_err(|e| Error::io(path, e))?;
    }
    Ok(files)
}
