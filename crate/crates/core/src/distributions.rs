//! Base distributions for interarrival and job-size draws, parameterized by
//! mean and squared coefficient of variation (SCV).
//!
//! | family      | constraint on scv       | construction                          |
//! |-------------|-------------------------|---------------------------------------|
//! | Exponential | scv = 1                 | rate 1/mean                           |
//! | Erlang      | 1/scv a positive integer| k = 1/scv stages of mean mean/k       |
//! | Lognormal   | any scv > 0             | σ² = ln(1+scv), μ = ln(mean) − σ²/2   |
//!
//! Equilibrium (stationary-excess) draws are exact for Exponential and Erlang
//! and go through a cached numeric inversion for Lognormal.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution as _, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Exponential,
    Erlang,
    Lognormal,
}

impl Family {
    pub fn short_name(self) -> &'static str {
        match self {
            Family::Exponential => "EXP",
            Family::Erlang => "ER",
            Family::Lognormal => "LN",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct DistributionSpec {
    family: Family,
    mean: f64,
    scv: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    family: Family,
    mean: f64,
    scv: f64,
}

impl TryFrom<RawSpec> for DistributionSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        DistributionSpec::new(raw.family, raw.mean, raw.scv)
    }
}

impl From<DistributionSpec> for RawSpec {
    fn from(spec: DistributionSpec) -> Self {
        RawSpec {
            family: spec.family,
            mean: spec.mean,
            scv: spec.scv,
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(mean={}, scv={})", self.family.short_name(), self.mean, self.scv)
    }
}

impl DistributionSpec {
    pub fn new(family: Family, mean: f64, scv: f64) -> Result<Self> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(Error::InvalidDistribution(format!("mean must be positive, got {mean}")));
        }
        if !(scv.is_finite() && scv > 0.0) {
            return Err(Error::InvalidDistribution(format!("scv must be positive, got {scv}")));
        }
        match family {
            Family::Exponential if scv != 1.0 => {
                return Err(Error::InvalidDistribution(format!(
                    "exponential requires scv = 1, got {scv}"
                )))
            }
            Family::Erlang if erlang_shape(scv).is_none() => {
                return Err(Error::InvalidDistribution(format!(
                    "erlang requires 1/scv to be a positive integer, got scv = {scv}"
                )))
            }
            _ => {}
        }
        Ok(DistributionSpec { family, mean, scv })
    }

    pub fn exponential(mean: f64) -> Result<Self> {
        Self::new(Family::Exponential, mean, 1.0)
    }

    pub fn erlang(mean: f64, scv: f64) -> Result<Self> {
        Self::new(Family::Erlang, mean, scv)
    }

    pub fn lognormal(mean: f64, scv: f64) -> Result<Self> {
        Self::new(Family::Lognormal, mean, scv)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn scv(&self) -> f64 {
        self.scv
    }

    /// Mean of the stationary-excess distribution, E[T²] / (2 E[T]).
    pub fn equilibrium_mean(&self) -> f64 {
        (self.scv + 1.0) * self.mean / 2.0
    }

    /// Parameters (μ, σ) of the underlying normal for the lognormal family.
    pub fn lognormal_params(&self) -> (f64, f64) {
        let var = (1.0 + self.scv).ln();
        (self.mean.ln() - 0.5 * var, var.sqrt())
    }

    fn erlang_k(&self) -> u32 {
        erlang_shape(self.scv).unwrap_or(1)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self.family {
            Family::Exponential => -(-t / self.mean).exp_m1(),
            Family::Erlang => {
                let k = self.erlang_k();
                erlang_cdf(k, k as f64 / self.mean, t)
            }
            Family::Lognormal => {
                let (mu, sigma) = self.lognormal_params();
                0.5 * libm::erfc(-(t.ln() - mu) / (sigma * std::f64::consts::SQRT_2))
            }
        }
    }

    /// 1 − F(t), computed without cancellation in the upper tail.
    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match self.family {
            Family::Exponential => (-t / self.mean).exp(),
            Family::Erlang => {
                let k = self.erlang_k();
                erlang_survival(k, k as f64 / self.mean, t)
            }
            Family::Lognormal => {
                let (mu, sigma) = self.lognormal_params();
                0.5 * libm::erfc((t.ln() - mu) / (sigma * std::f64::consts::SQRT_2))
            }
        }
    }

    /// Draws one value directly from the spec. Use a [`Sampler`] for repeated
    /// draws or equilibrium draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Sampler::new(*self).sample(rng)
    }

    pub fn sampler(&self) -> Sampler {
        Sampler::new(*self)
    }
}

fn erlang_shape(scv: f64) -> Option<u32> {
    let k = (1.0 / scv).round();
    ((1.0 / scv - k).abs() < 1e-9 && k >= 1.0 && k < u32::MAX as f64).then_some(k as u32)
}

fn erlang_survival(k: u32, rate: f64, t: f64) -> f64 {
    let x = rate * t;
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..k {
        term *= x / n as f64;
        sum += term;
    }
    (-x).exp() * sum
}

fn erlang_cdf(k: u32, rate: f64, t: f64) -> f64 {
    if k == 1 {
        return -(-rate * t).exp_m1();
    }
    1.0 - erlang_survival(k, rate, t)
}

/// A validated spec together with everything needed to draw from it and from
/// its equilibrium distribution. Immutable once built; share it freely.
#[derive(Debug, Clone)]
pub struct Sampler {
    spec: DistributionSpec,
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Exponential(Exp<f64>),
    Erlang { k: u32, stage: Exp<f64> },
    Lognormal { dist: LogNormal<f64>, equilibrium: EquilibriumTable },
}

impl Sampler {
    pub fn new(spec: DistributionSpec) -> Self {
        let kind = match spec.family {
            Family::Exponential => SamplerKind::Exponential(Exp::new(1.0 / spec.mean).expect("positive rate")),
            Family::Erlang => {
                let k = spec.erlang_k();
                SamplerKind::Erlang {
                    k,
                    stage: Exp::new(k as f64 / spec.mean).expect("positive rate"),
                }
            }
            Family::Lognormal => {
                let (mu, sigma) = spec.lognormal_params();
                SamplerKind::Lognormal {
                    dist: LogNormal::new(mu, sigma).expect("finite lognormal params"),
                    equilibrium: EquilibriumTable::new(spec),
                }
            }
        };
        Sampler { spec, kind }
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            SamplerKind::Exponential(exp) => exp.sample(rng),
            SamplerKind::Erlang { k, stage } => (0..*k).map(|_| stage.sample(rng)).sum(),
            SamplerKind::Lognormal { dist, .. } => dist.sample(rng),
        }
    }

    /// Draws from F_e(t) = (1/E[T]) ∫₀ᵗ (1 − F(s)) ds.
    pub fn sample_equilibrium<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            // memoryless
            SamplerKind::Exponential(exp) => exp.sample(rng),
            // The stationary excess of Erlang(k) is an equal-weight mixture of
            // Erlang(1..=k) with the same stage rate.
            SamplerKind::Erlang { k, stage } => {
                let stages = rng.random_range(1..=*k);
                (0..stages).map(|_| stage.sample(rng)).sum()
            }
            SamplerKind::Lognormal { equilibrium, .. } => equilibrium.sample(rng),
        }
    }

    pub fn equilibrium_cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            SamplerKind::Exponential(_) => self.spec.cdf(t),
            SamplerKind::Erlang { k, .. } => {
                let rate = *k as f64 / self.spec.mean;
                (1..=*k).map(|j| erlang_cdf(j, rate, t)).sum::<f64>() / *k as f64
            }
            SamplerKind::Lognormal { equilibrium, .. } => equilibrium.cdf(t),
        }
    }
}

const EQ_GRID_POINTS: usize = 4096;
const EQ_TAIL: f64 = 1e-15;
const EQ_QUAD_TOL: f64 = 1e-14;

/// F_e tabulated on a geometric grid by quadrature of the survival function,
/// inverted per draw by Newton–bisection inside the bracketing cell.
#[derive(Debug, Clone)]
pub(crate) struct EquilibriumTable {
    spec: DistributionSpec,
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl EquilibriumTable {
    pub(crate) fn new(spec: DistributionSpec) -> Self {
        let mut upper = spec.mean;
        while spec.survival(upper) > EQ_TAIL {
            upper *= 2.0;
        }
        let lower = spec.mean * 1e-8;
        let ratio = (upper / lower).powf(1.0 / (EQ_GRID_POINTS - 2) as f64);
        let mut grid = Vec::with_capacity(EQ_GRID_POINTS);
        grid.push(0.0);
        let mut t = lower;
        for _ in 1..EQ_GRID_POINTS {
            grid.push(t);
            t *= ratio;
        }
        let survival = |s: f64| spec.survival(s);
        let mut values = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        values.push(0.0);
        for w in grid.windows(2) {
            acc += numeric::integrate(&survival, w[0], w[1], EQ_QUAD_TOL);
            values.push(acc / spec.mean);
        }
        EquilibriumTable { spec, grid, values }
    }

    pub(crate) fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let i = self.grid.partition_point(|&g| g <= t) - 1;
        let survival = |s: f64| self.spec.survival(s);
        let tail = numeric::integrate(&survival, self.grid[i], t, EQ_QUAD_TOL);
        (self.values[i] + tail / self.spec.mean).min(1.0)
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let last = self.values.len() - 1;
        if u >= self.values[last] {
            return self.grid[last];
        }
        let i = self.values.partition_point(|&v| v <= u) - 1;
        let (lo, hi) = (self.grid[i], self.grid[i + 1]);
        let base = self.values[i];
        let mean = self.spec.mean;
        let survival = |s: f64| self.spec.survival(s);
        numeric::newton_bisect(
            |t| base + numeric::integrate(&survival, lo, t, EQ_QUAD_TOL) / mean - u,
            |t| self.spec.survival(t) / mean,
            lo,
            hi,
            1e-13 * hi.max(1e-300),
        )
    }
}
