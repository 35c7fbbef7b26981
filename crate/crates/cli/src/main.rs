mod args;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};

use args::{Bandwidth, Cli, Command, Common, CptArgs, GofArgs, IndepArgs, QuantilesArgs, SimulateArgs, StudyArgs};
use rkhs_sn::baseline::{fixedb_gof_test, FixedBConfig};
use rkhs_sn::changepoint::cp_test;
use rkhs_sn::dgp::{Dgp, Sample};
use rkhs_sn::embedding::NullDistribution;
use rkhs_sn::gof::{gof_test, GofProblem};
use rkhs_sn::independence::{indep_test, windowed_kernels, windowed_test, IndepKernels};
use rkhs_sn::kernels::{KernelFamily, KernelSpec};
use rkhs_sn::limitdist::{
    default_cache_dir, load_or_simulate, read_table, table_file_name, Law, QuantileTable,
};
use rkhs_sn::series::{load_series, write_series, Geometry, Series, SplitConfig, TestOutcome};
use rkhs_sn::studies::{run_study, StudySpec};
use rkhs_sn::Error;

const SCHEMA_VERSION: u32 = 1;
const TABLE_SEED: u64 = 1;

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_DEGENERATE: u8 = 4;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let Some(err) = e.downcast_ref::<Error>() else {
        return EXIT_USAGE;
    };
    if err.is_degenerate() {
        return EXIT_DEGENERATE;
    }
    match err {
        Error::InvalidArgument(_)
        | Error::SplitTooSmall { .. }
        | Error::LagTooLarge { .. }
        | Error::UnsupportedKernel(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!(Error::InvalidArgument("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let ctx = Ctx {
        cache_dir: cli.cache_dir.clone().unwrap_or_else(default_cache_dir),
        geometry: if cli.functional {
            Geometry::FunctionalGrid
        } else {
            Geometry::Euclidean
        },
        header: cli.header,
        seed: cli.seed,
    };
    match &cli.command {
        Command::Gof(a) => {
            let out = gof(&ctx, a)?;
            report(cli, "gof", &a.data.display().to_string(), &out)
        }
        Command::Cpt(a) => {
            let out = cpt(&ctx, a)?;
            report(cli, "cpt", &a.data.display().to_string(), &out)
        }
        Command::Indep(a) => {
            let out = indep(&ctx, a)?;
            let input = format!("{};{}", a.x.display(), a.y.display());
            report(cli, "indep", &input, &out)
        }
        Command::Simulate(a) => print_json(&simulate(&ctx, a)?),
        Command::Quantiles(a) => print_json(&quantiles(&ctx, a)?),
        Command::Study(a) => print_json(&study(&ctx, a)?),
    }
}

struct Ctx {
    cache_dir: PathBuf,
    geometry: Geometry,
    header: bool,
    seed: u64,
}

impl Ctx {
    fn load(&self, path: &Path) -> anyhow::Result<Series> {
        Ok(load_series(path, self.header, self.geometry)?)
    }

    /// The explicit table file, or the cached default table for `law`,
    /// simulated on first use.
    fn table(&self, common: &Common, law: Law) -> anyhow::Result<QuantileTable> {
        if let Some(path) = &common.table {
            let t = read_table(path)?;
            if t.law != law {
                bail!(Error::InvalidArgument(format!(
                    "{} holds a {} table, this test needs {law}",
                    path.display(),
                    t.law
                )));
            }
            return Ok(t);
        }
        let (l, r) = law.default_params();
        let file = self.cache_dir.join(table_file_name(law, l, r, TABLE_SEED));
        if !file.exists() {
            eprintln!(
                "note: no cached {law} table in {}; simulating {r} paths of {l} steps ({:.1e} normal draws), this runs once",
                self.cache_dir.display(),
                (l * r) as f64
            );
        }
        Ok(load_or_simulate(&self.cache_dir, law, l, r, TABLE_SEED)?.0)
    }
}

fn kernel_spec(family: &str, bw: &Bandwidth, data: &Series) -> anyhow::Result<KernelSpec> {
    let family = KernelFamily::parse(family)?;
    Ok(match bw.sigma {
        Some(s) => KernelSpec::new(family, s, data.geometry())?,
        None => KernelSpec::with_median_heuristic(family, data)?,
    })
}

/// Parses the `--null` argument. Returns the law and whether a Monte Carlo
/// embedding was requested explicitly.
fn parse_null(s: &str) -> anyhow::Result<(NullDistribution, bool)> {
    let bad = || Error::InvalidArgument(format!("cannot parse null {s:?}"));
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = s.split(':').collect();
    let (law, mc) = match parts.as_slice() {
        ["gaussian" | "normal", v] => (NullDistribution::Normal { variance: num(v)? }, false),
        ["pointmass", v] => {
            let center = v.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
            (NullDistribution::PointMass { center }, false)
        }
        ["mc", rest @ ..] => {
            let law = match rest {
                ["normal" | "gaussian", v] => NullDistribution::Normal { variance: num(v)? },
                ["exp"] => NullDistribution::Exponential { rate: 1.0 },
                ["exp", r] => NullDistribution::Exponential { rate: num(r)? },
                ["t", df] => NullDistribution::StudentT { df: num(df)? },
                ["uniform", a, b] => NullDistribution::Uniform {
                    low: num(a)?,
                    high: num(b)?,
                },
                _ => return Err(bad().into()),
            };
            (law, true)
        }
        _ => return Err(bad().into()),
    };
    law.validate()?;
    Ok((law, mc))
}

fn gof(ctx: &Ctx, a: &GofArgs) -> anyhow::Result<TestOutcome> {
    let data = ctx.load(&a.data)?;
    let (null, force_mc) = parse_null(&a.null)?;
    if a.fixedb {
        let cdf = null
            .cdf()
            .ok_or_else(|| Error::InvalidArgument("fixed-b test needs a continuous null".into()))?;
        let cfg = FixedBConfig { b: a.b, n_prime: a.n_prime };
        return Ok(fixedb_gof_test(&data, &cdf, cfg, a.common.alpha)?);
    }
    let kernel = kernel_spec(&a.kernel, &a.bandwidth, &data)?;
    let table = ctx.table(&a.common, Law::U)?;
    let null_embedding = null.embedding(&kernel, data.dim(), force_mc, a.mc_reps, ctx.seed)?;
    let problem = GofProblem {
        data,
        null_embedding,
        kernel,
        split: SplitConfig::new(a.eta),
        alpha: a.common.alpha,
    };
    let mut out = gof_test(&problem, &table)?;
    out.metadata.insert("null".into(), a.null.clone());
    Ok(out)
}

fn cpt(ctx: &Ctx, a: &CptArgs) -> anyhow::Result<TestOutcome> {
    let data = ctx.load(&a.data)?;
    let kernel = kernel_spec(&a.kernel, &a.bandwidth, &data)?;
    if !(a.eta > 0.0 && a.eta < 0.5) {
        bail!(Error::InvalidArgument(format!("change-point eta = {} outside (0, 1/2)", a.eta)));
    }
    let table = ctx.table(&a.common, Law::G)?;
    Ok(cp_test(&data, &kernel, SplitConfig::new(a.eta), a.common.alpha, &table)?)
}

fn indep(ctx: &Ctx, a: &IndepArgs) -> anyhow::Result<TestOutcome> {
    let x = ctx.load(&a.x)?;
    let y = ctx.load(&a.y)?;
    let fx = KernelFamily::parse(&a.kernel_x)?;
    let fy = KernelFamily::parse(&a.kernel_y)?;
    let split = SplitConfig::new(a.eta);
    match a.lag_x {
        Some(s) => {
            let (kx, ly) = windowed_kernels(fx, fy, &x, &y, s, a.lag)?;
            let table = ctx.table(&a.common, Law::U)?;
            Ok(windowed_test(&x, &y, &kx, &ly, s, a.lag, split, a.common.alpha, &table)?)
        }
        None => {
            let kernels = IndepKernels::median_heuristic(fx, fy, &x, &y, a.lag)?;
            let table = ctx.table(&a.common, Law::U)?;
            Ok(indep_test(&x, &y, &kernels, a.lag, split, a.common.alpha, &table)?)
        }
    }
}

fn simulate(ctx: &Ctx, a: &SimulateArgs) -> anyhow::Result<Value> {
    let mut spec = serde_json::Map::new();
    spec.insert("dgp".into(), json!(a.dgp));
    for (key, v) in [("kappa", a.kappa), ("lambda", a.lambda), ("q", a.q)] {
        if let Some(v) = v {
            spec.insert(key.into(), json!(v));
        }
    }
    if let Some(d) = a.d {
        spec.insert("d".into(), json!(d));
    }
    if let Some(inn) = &a.innovation {
        spec.insert("innovation".into(), json!(inn.to_ascii_lowercase()));
    }
    let dgp: Dgp = serde_json::from_value(Value::Object(spec.clone()))
        .map_err(|e| Error::InvalidArgument(format!("bad process parameters: {e}")))?;
    let mut files = vec![a.out.display().to_string()];
    match dgp.generate(a.n, ctx.seed)? {
        Sample::One(s) => {
            if a.out_y.is_some() {
                bail!(Error::InvalidArgument(format!("{} produces a single series", a.dgp)));
            }
            write_series(&a.out, &s)?;
        }
        Sample::Pair(x, y) => {
            let out_y = a
                .out_y
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument(format!("{} produces a pair; pass --out-y", a.dgp)))?;
            write_series(&a.out, &x)?;
            write_series(out_y, &y)?;
            files.push(out_y.display().to_string());
        }
    }
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "process": Value::Object(spec),
        "n": a.n,
        "seed": ctx.seed,
        "files": files,
    }))
}

fn quantiles(ctx: &Ctx, a: &QuantilesArgs) -> anyhow::Result<Value> {
    let law: Law = a.law.parse()?;
    let (dl, dr) = law.default_params();
    let (l, r) = (a.grid_steps.unwrap_or(dl), a.reps.unwrap_or(dr));
    let (table, simulated) = load_or_simulate(&ctx.cache_dir, law, l, r, ctx.seed)?;
    let mut q = serde_json::Map::new();
    for p in [0.90, 0.95, 0.99] {
        q.insert(format!("{p:.2}"), json!(table.quantile(p)?));
    }
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "command": "quantiles",
        "law": law.to_string(),
        "L": l,
        "R": r,
        "seed": ctx.seed,
        "simulated": simulated,
        "file": ctx.cache_dir.join(table.file_name()).display().to_string(),
        "quantiles": Value::Object(q),
    }))
}

fn study(ctx: &Ctx, a: &StudyArgs) -> anyhow::Result<Value> {
    let text = std::fs::read_to_string(&a.spec).map_err(|e| Error::Io {
        path: a.spec.clone(),
        source: e,
    })?;
    let spec = StudySpec::from_json(&text)?;
    let files = run_study(&spec, &a.out, Some(&ctx.cache_dir))?;
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "command": "study",
        "name": spec.name,
        "results": files.results.display().to_string(),
        "timing": files.timing.display().to_string(),
        "metadata": files.metadata.display().to_string(),
    }))
}

#[derive(Serialize)]
struct Report<'a> {
    schema_version: u32,
    command: &'a str,
    #[serde(flatten)]
    outcome: &'a TestOutcome,
}

fn report(cli: &Cli, command: &str, input: &str, out: &TestOutcome) -> anyhow::Result<()> {
    print_json(&Report {
        schema_version: SCHEMA_VERSION,
        command,
        outcome: out,
    })?;
    if let Some(path) = &cli.log {
        append_log(path, command, input, out).with_context(|| format!("writing log {}", path.display()))?;
    }
    Ok(())
}

const LOG_HEADER: &str = "command,input,statistic,scaled_statistic,alpha,critical_value,p_value,reject,location";

fn append_log(path: &Path, command: &str, input: &str, out: &TestOutcome) -> anyhow::Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{LOG_HEADER}")?;
    }
    let input = if input.contains([',', '"']) {
        format!("\"{}\"", input.replace('"', "\"\""))
    } else {
        input.to_string()
    };
    writeln!(
        f,
        "{command},{input},{:.17e},{:.17e},{},{:.17e},{:.17e},{},{}",
        out.statistic,
        out.scaled_statistic,
        out.alpha,
        out.critical_value,
        out.p_value,
        out.reject,
        out.location.map(|l| l.to_string()).unwrap_or_default()
    )?;
    Ok(())
}

/// Prints to stdout; a closed pipe (e.g. `| head`) is not an error.
fn print_json<T: Serialize>(v: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}
