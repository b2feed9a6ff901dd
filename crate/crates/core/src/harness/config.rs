//! Experiment configuration from `key=value` pairs.
//!
//! Pairs come from a config file followed by command-line flags; later pairs
//! override earlier ones.

use std::fmt;
use std::path::PathBuf;

use crate::amplification::PopulationPolicy;
use crate::error::{Error, Result};
use crate::randomizers::Mechanism;
use crate::tasks::TaskId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    SingleReport,
    Crowdsourcing,
    Social,
    Incentive,
    Rates,
    ProtocolDemo,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::SingleReport => "single_report",
            Scenario::Crowdsourcing => "crowdsourcing",
            Scenario::Social => "social",
            Scenario::Incentive => "incentive",
            Scenario::Rates => "rates",
            Scenario::ProtocolDemo => "protocol_demo",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Whether the swept budgets are local or central.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrivacyKind {
    /// Each value is the local budget.
    Ldp,
    /// Each value is a central target; local budgets come from amplification.
    Pic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub mechanisms: Vec<Mechanism>,
    pub privacy: PrivacyKind,
    /// Swept budgets; `inf` means no perturbation.
    pub epsilons: Vec<f64>,
    pub delta: Option<f64>,
    pub policy: Option<PopulationPolicy>,
    /// Population sizes (a grid for `rates`).
    pub n: Vec<usize>,
    pub groups: Vec<usize>,
    pub dim: usize,
    pub tau: f64,
    /// Coordinate bound `c` of synthetic gradients.
    pub clip: f64,
    /// Monte Carlo trials, or repeated seeds for task scenarios.
    pub trials: usize,
    pub seed: u64,
    pub dataset: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub task: Option<TaskId>,
}

/// Recognized keys; each mirrors a command-line flag.
pub const KEYS: [&str; 16] = [
    "mechanism", "eps", "eps-central", "delta", "policy", "n", "groups", "dim", "tau", "clip",
    "trials", "seed", "dataset", "out", "task", "scenario",
];

fn bad(key: &str, value: &str) -> Error {
    Error::Config(format!("invalid value `{value}` for `{key}`"))
}

fn parse_list<T>(key: &str, value: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    let items = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(s).ok_or_else(|| bad(key, value)))
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(bad(key, value));
    }
    Ok(items)
}

fn parse_eps(s: &str) -> Option<f64> {
    match s {
        "inf" | "infinity" => Some(f64::INFINITY),
        _ => s.parse::<f64>().ok().filter(|e| *e > 0.0 && !e.is_nan()),
    }
}

/// Parses `key=value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            reason: "expected key=value".into(),
        })?;
        let k = k.trim().replace('_', "-");
        if !KEYS.contains(&k.as_str()) {
            return Err(Error::Parse { line: i + 1, reason: format!("unknown key `{k}`") });
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Scenario defaults before any overrides.
    pub fn defaults(scenario: Scenario) -> Self {
        let base = Self {
            scenario,
            mechanisms: vec![Mechanism::Minkowski],
            privacy: PrivacyKind::Ldp,
            epsilons: vec![1.0],
            delta: None,
            policy: None,
            n: vec![10_000],
            groups: vec![],
            dim: 2,
            tau: 0.4,
            clip: 1.0,
            trials: 10,
            seed: 0,
            dataset: vec![],
            out: None,
            task: None,
        };
        match scenario {
            Scenario::SingleReport => Self {
                mechanisms: Mechanism::ALL.to_vec(),
                epsilons: vec![1.0, 2.0, 5.0, 10.0],
                trials: 10_000,
                ..base
            },
            Scenario::Crowdsourcing => Self {
                mechanisms: Mechanism::ALL.to_vec(),
                epsilons: vec![1.0, 2.0, 3.0],
                groups: vec![713, 532],
                ..base
            },
            Scenario::Social => Self { tau: 0.2, epsilons: vec![1.0, 2.0, 3.0], ..base },
            Scenario::Incentive => Self { n: vec![1_000], dim: 6, ..base },
            Scenario::Rates => Self {
                privacy: PrivacyKind::Pic,
                delta: Some(1e-6),
                n: (10..=17).map(|k| 1usize << k).collect(),
                trials: 0,
                ..base
            },
            Scenario::ProtocolDemo => Self { groups: vec![50, 50], trials: 1, epsilons: vec![4.0], ..base },
        }
    }

    /// Applies `pairs` in order over the scenario defaults.
    pub fn from_pairs(scenario: Scenario, pairs: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::defaults(scenario);
        let mut local: Option<Vec<f64>> = None;
        let mut central: Option<Vec<f64>> = None;
        for (key, value) in pairs {
            let v = value.as_str();
            match key.as_str() {
                "mechanism" => {
                    cfg.mechanisms = if v == "all" {
                        Mechanism::ALL.to_vec()
                    } else {
                        parse_list(key, v, |s| s.parse().ok())?
                    }
                }
                "eps" => local = Some(parse_list(key, v, parse_eps)?),
                "eps-central" => central = Some(parse_list(key, v, parse_eps)?),
                "delta" => {
                    let d: f64 = v.parse().map_err(|_| bad(key, v))?;
                    if !(d > 0.0 && d < 1.0) {
                        return Err(bad(key, v));
                    }
                    cfg.delta = Some(d);
                }
                "policy" => cfg.policy = Some(v.parse()?),
                "n" => cfg.n = parse_list(key, v, |s| s.parse().ok().filter(|&n: &usize| n > 0))?,
                "groups" => cfg.groups = parse_list(key, v, |s| s.parse().ok().filter(|&n: &usize| n > 0))?,
                "dim" => cfg.dim = v.parse().ok().filter(|&d: &usize| d > 0).ok_or_else(|| bad(key, v))?,
                "tau" => cfg.tau = v.parse().ok().filter(|&t: &f64| t > 0.0 && t.is_finite()).ok_or_else(|| bad(key, v))?,
                "clip" => cfg.clip = v.parse().ok().filter(|&c: &f64| c > 0.0 && c.is_finite()).ok_or_else(|| bad(key, v))?,
                "trials" => cfg.trials = v.parse().map_err(|_| bad(key, v))?,
                "seed" => cfg.seed = v.parse().map_err(|_| bad(key, v))?,
                "dataset" => cfg.dataset = v.split(',').map(|s| PathBuf::from(s.trim())).collect(),
                "out" => cfg.out = Some(PathBuf::from(v)),
                "task" => cfg.task = Some(v.parse().map_err(|_| bad(key, v))?),
                "scenario" => {}
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }
        match (local, central) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("set exactly one of `eps` and `eps-central`".into()))
            }
            (Some(e), None) => {
                cfg.privacy = PrivacyKind::Ldp;
                cfg.epsilons = e;
            }
            (None, Some(e)) => {
                cfg.privacy = PrivacyKind::Pic;
                cfg.epsilons = e;
            }
            (None, None) => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 && self.scenario != Scenario::Rates {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.mechanisms.is_empty() || self.epsilons.is_empty() {
            return Err(Error::Config("need at least one mechanism and one budget".into()));
        }
        if self.scenario == Scenario::Crowdsourcing && self.groups.len() != 2 {
            return Err(Error::Config("crowdsourcing needs exactly two group sizes".into()));
        }
        if self.mechanisms.contains(&Mechanism::PlanarLaplace)
            && self.dim != 2
            && matches!(self.scenario, Scenario::SingleReport | Scenario::Incentive)
        {
            return Err(Error::Config("planar_laplace needs dim=2".into()));
        }
        Ok(())
    }

    /// Policy from the config or the scenario's default.
    pub fn effective_policy(&self) -> PopulationPolicy {
        if let Some(p) = self.policy {
            return p;
        }
        match self.scenario {
            Scenario::Crowdsourcing => PopulationPolicy::MinusOne,
            Scenario::Social if (self.tau - 0.1).abs() < 1e-12 => PopulationPolicy::Fraction(0.98),
            Scenario::Social => PopulationPolicy::Fraction(0.90),
            _ => PopulationPolicy::Full,
        }
    }
}
