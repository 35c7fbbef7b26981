//! Seeded simulators for the data-generating processes used in the
//! simulation studies.
//!
//! Each simulator draws from fixed substreams of its seed: stream 0 carries
//! the base path, stream 1 the contaminating innovations and stream 2 the
//! mixing indicators, so changing `lambda` never changes the base path.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::series::{Geometry, Series};

const BASE: u64 = 0;
const CONTAMINATION: u64 = 1;
const INDICATOR: u64 = 2;
/// Burn-in start of the functional recursions (`t = -50`).
const FAR_BURN_IN: usize = 50;

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("AR coefficient {kappa} needs |kappa| < 1")))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::invalid(format!("lambda = {lambda} outside [0, 1]")))
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("series length must be positive"));
    }
    Ok(())
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn ar1_path(n: usize, kappa: f64, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, BASE);
    let mut y = normal(&mut rng) / (1.0 - kappa * kappa).sqrt();
    (0..n)
        .map(|_| {
            y = kappa * y + normal(&mut rng);
            y
        })
        .collect()
}

fn centered_exponentials(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, CONTAMINATION);
    (0..n).map(|_| rng.sample::<f64, _>(Exp1) - 1.0).collect()
}

fn indicators(n: usize, lambda: f64, seed: u64) -> Vec<bool> {
    let mut rng = substream(seed, INDICATOR);
    (0..n).map(|_| rng.random::<f64>() < lambda).collect()
}

/// Stationary Gaussian AR(1) with unit innovation variance.
pub fn ar1(n: usize, kappa: f64, seed: u64) -> Result<Series> {
    check_n(n)?;
    check_kappa(kappa)?;
    Series::univariate(ar1_path(n, kappa, seed))
}

/// `X_t = (1 - d_t) Y_t + d_t e_t` with `Y` AR(1), `e_t ~ Exp(1) - 1` and
/// `d_t ~ Bernoulli(lambda)`.
pub fn gof_power_mixture(n: usize, kappa: f64, lambda: f64, seed: u64) -> Result<Series> {
    check_n(n)?;
    check_kappa(kappa)?;
    check_lambda(lambda)?;
    let y = ar1_path(n, kappa, seed);
    let e = centered_exponentials(n, seed);
    let d = indicators(n, lambda, seed);
    let x = (0..n).map(|t| if d[t] { e[t] } else { y[t] }).collect();
    Series::univariate(x)
}

/// As [`gof_power_mixture`] but contamination only after `floor(n / 2)`.
pub fn cp_mixture(n: usize, kappa: f64, lambda: f64, seed: u64) -> Result<Series> {
    check_n(n)?;
    check_kappa(kappa)?;
    check_lambda(lambda)?;
    let y = ar1_path(n, kappa, seed);
    let e = centered_exponentials(n, seed);
    let d = indicators(n, lambda, seed);
    let half = n / 2;
    let x = (0..n).map(|t| if t >= half && d[t] { e[t] } else { y[t] }).collect();
    Series::univariate(x)
}

/// Pair `(X, Y)` of iid standard normal series with
/// `Y = lambda X + sqrt(1 - lambda^2) e`.
pub fn gaussian_pair(n: usize, lambda: f64, seed: u64) -> Result<(Series, Series)> {
    check_n(n)?;
    check_lambda(lambda)?;
    let mut rx = substream(seed, BASE);
    let mut re = substream(seed, CONTAMINATION);
    let x: Vec<f64> = (0..n).map(|_| normal(&mut rx)).collect();
    let c = (1.0 - lambda * lambda).sqrt();
    let y = x.iter().map(|&v| lambda * v + c * normal(&mut re)).collect();
    Ok((Series::univariate(x)?, Series::univariate(y)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Innovation {
    Gaussian,
    T2,
}

impl Innovation {
    fn draw(self, rng: &mut ChaCha8Rng, t2: &StudentT<f64>) -> f64 {
        match self {
            Innovation::Gaussian => normal(rng),
            Innovation::T2 => rng.sample(t2),
        }
    }
}

fn check_grid(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::invalid(format!("grid size d = {d} must be at least 2")));
    }
    Ok(())
}

/// Discretized Brownian motion: cumulative sums of `d` innovations over
/// `sqrt(d)`.
fn brownian(d: usize, innovation: Innovation, rng: &mut ChaCha8Rng, t2: &StudentT<f64>) -> Vec<f64> {
    let scale = (d as f64).sqrt().recip();
    let mut acc = 0.0;
    (0..d)
        .map(|_| {
            acc += innovation.draw(rng, t2);
            acc * scale
        })
        .collect()
}

/// `q Phi x` with `Phi_ij = min(i, j) / d^2` (1-based), in `O(d)`.
fn apply_min_operator(q: f64, x: &[f64], out: &mut [f64]) {
    let d = x.len();
    let scale = q / (d * d) as f64;
    let mut suffix: f64 = x.iter().sum();
    let mut weighted = 0.0;
    for (i0, (o, &xi)) in out.iter_mut().zip(x).enumerate() {
        let i = (i0 + 1) as f64;
        weighted += i * xi;
        suffix -= xi;
        *o = scale * (weighted + i * suffix);
    }
}

/// Dense `Phi` for inspection and tests.
pub fn far1_operator(d: usize) -> Vec<f64> {
    let d2 = (d * d) as f64;
    (1..=d)
        .flat_map(|i| (1..=d).map(move |j| i.min(j) as f64 / d2))
        .collect()
}

fn functional(rows: Vec<f64>, n: usize, d: usize) -> Result<Series> {
    Series::new(rows, n, d, Geometry::FunctionalGrid)
}

fn t2() -> StudentT<f64> {
    StudentT::new(2.0).expect("two degrees of freedom is valid")
}

/// Functional AR(1) on a `d`-point grid started at `t = -50` from a
/// Gaussian Brownian path. With `T2` the innovations after the start are
/// Student-t with two degrees of freedom.
pub fn far1(n: usize, d: usize, innovation: Innovation, seed: u64) -> Result<Series> {
    check_n(n)?;
    check_grid(d)?;
    let mut rng = substream(seed, BASE);
    let t2 = t2();
    let mut x = brownian(d, Innovation::Gaussian, &mut rng, &t2);
    let mut next = vec![0.0; d];
    let mut out = Vec::with_capacity(n * d);
    for step in 0..FAR_BURN_IN + n {
        apply_min_operator(1.0, &x, &mut next);
        let w = brownian(d, innovation, &mut rng, &t2);
        for (a, b) in next.iter_mut().zip(&w) {
            *a += b;
        }
        std::mem::swap(&mut x, &mut next);
        if step >= FAR_BURN_IN {
            out.extend_from_slice(&x);
        }
    }
    functional(out, n, d)
}

/// Gaussian [`far1`] with `lambda` added to every grid value of curves
/// `floor(n / 2) + 1, ..., n`.
pub fn far1_mean_shift(n: usize, d: usize, lambda: f64, seed: u64) -> Result<Series> {
    let base = far1(n, d, Innovation::Gaussian, seed)?;
    if lambda == 0.0 {
        return Ok(base);
    }
    let start = (n / 2) * d;
    let mut v = base.values().to_vec();
    v[start..].iter_mut().for_each(|x| *x += lambda);
    functional(v, n, d)
}

/// Two functional AR(1) series with operator `q min(t, u)` and innovations
/// `B1` and `lambda B1 + sqrt(1 - lambda^2) B2`. Uses the grid `i / d`,
/// `i = 1..d`, with weight `1 / d`, so `q = 1` reproduces [`far1`]'s operator.
pub fn far1_pair(n: usize, d: usize, q: f64, lambda: f64, seed: u64) -> Result<(Series, Series)> {
    check_n(n)?;
    check_grid(d)?;
    check_lambda(lambda)?;
    if !(q >= 0.0 && q.is_finite()) {
        return Err(Error::invalid(format!("dependence parameter q = {q} must be >= 0")));
    }
    let mut r1 = substream(seed, BASE);
    let mut r2 = substream(seed, CONTAMINATION);
    let t2 = t2();
    let c = (1.0 - lambda * lambda).sqrt();
    let mut draw = || {
        let b1 = brownian(d, Innovation::Gaussian, &mut r1, &t2);
        let b2 = brownian(d, Innovation::Gaussian, &mut r2, &t2);
        let w2: Vec<f64> = b1.iter().zip(&b2).map(|(a, b)| lambda * a + c * b).collect();
        (b1, w2)
    };
    let (mut x, mut y) = draw();
    let mut nx = vec![0.0; d];
    let mut ny = vec![0.0; d];
    let mut ox = Vec::with_capacity(n * d);
    let mut oy = Vec::with_capacity(n * d);
    for step in 0..FAR_BURN_IN + n {
        apply_min_operator(q, &x, &mut nx);
        apply_min_operator(q, &y, &mut ny);
        let (w1, w2) = draw();
        nx.iter_mut().zip(&w1).for_each(|(a, b)| *a += b);
        ny.iter_mut().zip(&w2).for_each(|(a, b)| *a += b);
        std::mem::swap(&mut x, &mut nx);
        std::mem::swap(&mut y, &mut ny);
        if step >= FAR_BURN_IN {
            ox.extend_from_slice(&x);
            oy.extend_from_slice(&y);
        }
    }
    Ok((functional(ox, n, d)?, functional(oy, n, d)?))
}

/// Declarative description of a simulator, used by the study driver and
/// the command line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dgp", rename_all = "snake_case")]
pub enum Dgp {
    Ar1 { kappa: f64 },
    GofMixture { kappa: f64, lambda: f64 },
    CpMixture { kappa: f64, lambda: f64 },
    GaussianPair { lambda: f64 },
    Far1 { d: usize, innovation: Innovation },
    Far1MeanShift { d: usize, lambda: f64 },
    Far1Pair { d: usize, q: f64, lambda: f64 },
}

/// Output of a simulator: one series or a pair.
#[derive(Clone, Debug, PartialEq)]
pub enum Sample {
    One(Series),
    Pair(Series, Series),
}

impl Dgp {
    pub fn generate(&self, n: usize, seed: u64) -> Result<Sample> {
        Ok(match *self {
            Dgp::Ar1 { kappa } => Sample::One(ar1(n, kappa, seed)?),
            Dgp::GofMixture { kappa, lambda } => Sample::One(gof_power_mixture(n, kappa, lambda, seed)?),
            Dgp::CpMixture { kappa, lambda } => Sample::One(cp_mixture(n, kappa, lambda, seed)?),
            Dgp::GaussianPair { lambda } => {
                let (x, y) = gaussian_pair(n, lambda, seed)?;
                Sample::Pair(x, y)
            }
            Dgp::Far1 { d, innovation } => Sample::One(far1(n, d, innovation, seed)?),
            Dgp::Far1MeanShift { d, lambda } => Sample::One(far1_mean_shift(n, d, lambda, seed)?),
            Dgp::Far1Pair { d, q, lambda } => {
                let (x, y) = far1_pair(n, d, q, lambda, seed)?;
                Sample::Pair(x, y)
            }
        })
    }

    /// Alternative strength, if the process has one.
    pub fn lambda(&self) -> Option<f64> {
        match *self {
            Dgp::GofMixture { lambda, .. }
            | Dgp::CpMixture { lambda, .. }
            | Dgp::GaussianPair { lambda }
            | Dgp::Far1MeanShift { lambda, .. }
            | Dgp::Far1Pair { lambda, .. } => Some(lambda),
            Dgp::Ar1 { .. } | Dgp::Far1 { .. } => None,
        }
    }

    /// Same process with the alternative strength replaced.
    pub fn with_lambda(&self, value: f64) -> Result<Self> {
        let mut out = *self;
        match &mut out {
            Dgp::GofMixture { lambda, .. }
            | Dgp::CpMixture { lambda, .. }
            | Dgp::GaussianPair { lambda }
            | Dgp::Far1MeanShift { lambda, .. }
            | Dgp::Far1Pair { lambda, .. } => *lambda = value,
            Dgp::Ar1 { .. } | Dgp::Far1 { .. } => {
                return Err(Error::invalid("process has no lambda parameter"));
            }
        }
        Ok(out)
    }

    /// Same process with the AR coefficient replaced.
    pub fn with_kappa(&self, value: f64) -> Result<Self> {
        let mut out = *self;
        match &mut out {
            Dgp::Ar1 { kappa } | Dgp::GofMixture { kappa, .. } | Dgp::CpMixture { kappa, .. } => *kappa = value,
            _ => return Err(Error::invalid("process has no kappa parameter")),
        }
        Ok(out)
    }
}
