//! Privacy amplification by shuffling: the closed-form central budget, its
//! inversion, and effective-population policies.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Smallest local budget considered by [`invert_amplify`].
pub const EPSILON_FLOOR: f64 = 1e-6;

/// Complete privacy configuration of one group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    pub epsilon_local: f64,
    pub epsilon_central: f64,
    pub delta: f64,
    pub population: u64,
}

impl PrivacyParams {
    /// Resolves the local budget for a central target; fails on infeasible populations.
    pub fn from_central(epsilon_central: f64, delta: f64, population: u64) -> Result<(Self, InversionStatus)> {
        let inv = invert_amplify(epsilon_central, delta, population)?;
        Ok((
            Self { epsilon_local: inv.epsilon, epsilon_central, delta, population },
            inv.status,
        ))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// `16 e^eps ln(2 / delta)`: the least population for which the bound holds.
pub fn min_population(epsilon: f64, delta: f64) -> f64 {
    16.0 * epsilon.exp() * (2.0 / delta).ln()
}

/// Largest local budget admissible for `population`: `ln(n' / (16 ln(2 / delta)))`.
pub fn max_local_epsilon(delta: f64, population: u64) -> f64 {
    (population as f64 / (16.0 * (2.0 / delta).ln())).ln()
}

fn closed_form(epsilon: f64, delta: f64, n: f64) -> f64 {
    let e = epsilon.exp();
    let shrink = epsilon.exp_m1() / (e + 1.0);
    (shrink * ((64.0 * e * (4.0 / delta).ln() / n).sqrt() + 8.0 * e / n)).ln_1p()
}

/// Central budget of `population` shuffled `epsilon`-LDP reports:
/// `ln(1 + (e^eps - 1)/(e^eps + 1) * (sqrt(64 e^eps ln(4/delta) / n') + 8 e^eps / n'))`.
pub fn amplify_closed_form(epsilon: f64, delta: f64, population: u64) -> Result<f64> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(invalid("epsilon must be positive and finite"));
    }
    check_delta(delta)?;
    let min = min_population(epsilon, delta);
    if (population as f64) < min {
        return Err(Error::AmplificationInfeasible { population, min_population: min });
    }
    Ok(closed_form(epsilon, delta, population as f64))
}

/// Where the inverted local budget landed relative to the feasible band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InversionStatus {
    Exact,
    /// The target lies below what any admissible budget yields; the floor budget is returned.
    Floor,
    /// The target exceeds the bound at the feasibility ceiling; the ceiling budget is returned.
    Ceiling,
}

impl InversionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            InversionStatus::Exact => "exact",
            InversionStatus::Floor => "floor",
            InversionStatus::Ceiling => "ceiling",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub epsilon: f64,
    pub status: InversionStatus,
}

/// Local budget whose amplified value equals `epsilon_central`.
///
/// Bisection over `[EPSILON_FLOOR, max_local_epsilon]`. Targets outside the
/// achievable range clamp to an end of the interval with a status flag.
pub fn invert_amplify(epsilon_central: f64, delta: f64, population: u64) -> Result<Inversion> {
    if !(epsilon_central > 0.0) || epsilon_central.is_nan() {
        return Err(invalid("central epsilon must be positive"));
    }
    check_delta(delta)?;
    let ceiling = max_local_epsilon(delta, population);
    if !(ceiling > EPSILON_FLOOR) {
        return Err(Error::AmplificationInfeasible {
            population,
            min_population: min_population(EPSILON_FLOOR, delta),
        });
    }
    let n = population as f64;
    if epsilon_central <= closed_form(EPSILON_FLOOR, delta, n) {
        return Ok(Inversion { epsilon: EPSILON_FLOOR, status: InversionStatus::Floor });
    }
    if epsilon_central >= closed_form(ceiling, delta, n) {
        return Ok(Inversion { epsilon: ceiling, status: InversionStatus::Ceiling });
    }
    let (mut lo, mut hi) = (EPSILON_FLOOR, ceiling);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if closed_form(mid, delta, n) < epsilon_central {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(Inversion { epsilon: 0.5 * (lo + hi), status: InversionStatus::Exact })
}

/// How many members of a group count toward amplification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PopulationPolicy {
    Full,
    MinusOne,
    Fraction(f64),
}

impl fmt::Display for PopulationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PopulationPolicy::Full => f.write_str("full"),
            PopulationPolicy::MinusOne => f.write_str("minus-one"),
            PopulationPolicy::Fraction(x) => write!(f, "fraction={x}"),
        }
    }
}

impl FromStr for PopulationPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(PopulationPolicy::Full),
            "minus-one" => Ok(PopulationPolicy::MinusOne),
            _ => {
                let frac = s
                    .strip_prefix("fraction=")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown population policy `{s}`")))?;
                if frac > 0.0 && frac <= 1.0 {
                    Ok(PopulationPolicy::Fraction(frac))
                } else {
                    Err(Error::Config(format!("fraction must lie in (0, 1], got {frac}")))
                }
            }
        }
    }
}

pub fn effective_population(group_size: u64, policy: PopulationPolicy) -> Result<u64> {
    if group_size == 0 {
        return Err(invalid("group size must be positive"));
    }
    let n = match policy {
        PopulationPolicy::Full => group_size,
        PopulationPolicy::MinusOne => group_size - 1,
        PopulationPolicy::Fraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(invalid("fraction must lie in (0, 1]"));
            }
            (group_size as f64 * f).floor() as u64
        }
    };
    if n == 0 {
        return Err(invalid(format!("group of {group_size} leaves no amplification population")));
    }
    Ok(n)
}

/// `0.01 / group_size`.
pub fn delta_default(group_size: u64) -> f64 {
    0.01 / group_size as f64
}
