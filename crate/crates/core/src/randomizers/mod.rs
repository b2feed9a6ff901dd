//! Local differential privacy randomizers.

mod baselines;
mod minkowski;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::geometry::{sample_uniform, DomainSpec, Vector};

pub use baselines::{planar_radius, BaselineKind, BaselineParams};
pub use minkowski::{
    minkowski_debias, minkowski_density, minkowski_mse_analytic, minkowski_radius_formula,
    minkowski_sample, minkowski_search_radius, search_objective, MinkowskiParams, RadiusMode,
    SearchObjective,
};

/// Mechanism identifiers as used on the command line and in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mechanism {
    Minkowski,
    Laplace,
    PlanarLaplace,
    SquareWave,
    Staircase,
}

impl Mechanism {
    pub const ALL: [Mechanism; 5] = [
        Mechanism::Minkowski,
        Mechanism::Laplace,
        Mechanism::PlanarLaplace,
        Mechanism::SquareWave,
        Mechanism::Staircase,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Mechanism::Minkowski => "minkowski",
            Mechanism::Laplace => "laplace",
            Mechanism::PlanarLaplace => "planar_laplace",
            Mechanism::SquareWave => "square_wave",
            Mechanism::Staircase => "staircase",
        }
    }

    fn baseline(self) -> Option<BaselineKind> {
        match self {
            Mechanism::Minkowski => None,
            Mechanism::Laplace => Some(BaselineKind::Laplace),
            Mechanism::PlanarLaplace => Some(BaselineKind::PlanarLaplace),
            Mechanism::SquareWave => Some(BaselineKind::SquareWave),
            Mechanism::Staircase => Some(BaselineKind::Staircase),
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Mechanism {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| invalid(format!("unknown mechanism `{s}`")))
    }
}

/// Mechanism output `y` together with its unbiased estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SanitizedReport {
    pub raw: Vector,
    pub debiased: Vector,
    pub mechanism: Mechanism,
}

/// A fully configured randomizer of any supported mechanism.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalRandomizer {
    Minkowski(MinkowskiParams),
    Baseline(BaselineParams),
}

impl LocalRandomizer {
    /// Builds `mechanism` with default parameters (searched radius for Minkowski).
    pub fn build(mechanism: Mechanism, domain: DomainSpec, epsilon: f64) -> Result<Self> {
        match mechanism.baseline() {
            None => Ok(Self::Minkowski(MinkowskiParams::new(
                epsilon,
                domain,
                RadiusMode::Searched,
            )?)),
            Some(kind) => Ok(Self::Baseline(BaselineParams::new(kind, epsilon, domain)?)),
        }
    }

    pub fn mechanism(&self) -> Mechanism {
        match self {
            Self::Minkowski(_) => Mechanism::Minkowski,
            Self::Baseline(p) => match p.mechanism {
                BaselineKind::Laplace => Mechanism::Laplace,
                BaselineKind::PlanarLaplace => Mechanism::PlanarLaplace,
                BaselineKind::SquareWave => Mechanism::SquareWave,
                BaselineKind::Staircase => Mechanism::Staircase,
            },
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            Self::Minkowski(p) => p.epsilon,
            Self::Baseline(p) => p.epsilon,
        }
    }

    pub fn domain(&self) -> &DomainSpec {
        match self {
            Self::Minkowski(p) => &p.domain,
            Self::Baseline(p) => &p.domain,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: &Vector, rng: &mut R) -> Result<SanitizedReport> {
        let (raw, debiased) = match self {
            Self::Minkowski(p) => {
                let y = minkowski_sample(x, p, rng)?;
                let est = minkowski_debias(&y, p);
                (y, est)
            }
            Self::Baseline(p) => baselines::sample(x, p, rng)?,
        };
        Ok(SanitizedReport { raw, debiased, mechanism: self.mechanism() })
    }

    /// Recomputes the unbiased estimate from a raw output using public parameters only.
    pub fn debias(&self, raw: &Vector) -> Result<Vector> {
        if raw.dim() != self.domain().dim {
            return Err(invalid("report dimension mismatch"));
        }
        Ok(match self {
            Self::Minkowski(p) => minkowski_debias(raw, p),
            Self::Baseline(p) => baselines::debias(raw, p),
        })
    }
}

/// Convenience wrapper over [`LocalRandomizer::sample`] for baselines.
pub fn baseline_sample<R: Rng + ?Sized>(
    x: &Vector,
    params: &BaselineParams,
    rng: &mut R,
) -> Result<SanitizedReport> {
    LocalRandomizer::Baseline(params.clone()).sample(x, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorMetric {
    /// `||x~ - x||_2`.
    #[default]
    L2,
    /// `||x~ - x||_2^2`.
    SquaredL2,
}

/// Mean error of `randomizer` over `trials` inputs drawn uniformly from its domain.
pub fn single_report_error_with<R: Rng + ?Sized>(
    randomizer: &LocalRandomizer,
    trials: usize,
    metric: ErrorMetric,
    rng: &mut R,
) -> Result<f64> {
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let region = randomizer.domain().region();
    let mut total = 0.0;
    for _ in 0..trials {
        let x = sample_uniform(&region, rng);
        let est = randomizer.sample(&x, rng)?.debiased;
        let sq: f64 = est
            .as_slice()
            .iter()
            .zip(x.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        total += match metric {
            ErrorMetric::L2 => sq.sqrt(),
            ErrorMetric::SquaredL2 => sq,
        };
    }
    Ok(total / trials as f64)
}

/// Mean l2 error of `mechanism` at budget `epsilon` with default parameters.
pub fn single_report_error<R: Rng + ?Sized>(
    mechanism: Mechanism,
    domain: &DomainSpec,
    epsilon: f64,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    let randomizer = LocalRandomizer::build(mechanism, *domain, epsilon)?;
    single_report_error_with(&randomizer, trials, ErrorMetric::L2, rng)
}
