//! Scenario drivers, metric rows and reference rate curves.
//!
//! Every sweep point is an independent job with its own rng streams derived
//! from the base seed; jobs run in parallel and are collected in order, so
//! output is identical across thread counts. Noise streams do not depend on
//! the privacy mode, which pairs LDP and PIC runs on common random numbers.

use std::collections::BTreeSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::amplification::{delta_default, effective_population, invert_amplify, InversionStatus, PopulationPolicy};
use crate::envelope::{KeyEntropy, KeyRng};
use crate::error::{invalid, Error, Result};
use crate::geometry::{normalize_locations, sample_uniform, BoundingBox, DomainSpec, Shape, Vector};
use crate::protocol::{run_round, server_setup, user_prepare, user_retrieve, RoundOptions, UserState};
use crate::randomizers::{LocalRandomizer, Mechanism};
use crate::tasks::{
    build_task, max_matching_within_radius, min_weight_full_matching, radius_nn_grid, BipartiteInstance,
    ShapleyTask, TaskId, TaskOptions, TaskOutput,
};

use super::config::{ExperimentConfig, PrivacyKind, Scenario};
use super::data::{load_locations_csv, synth_locations, LocationDistribution};

/// Fixed CSV column order.
pub const CSV_HEADER: [&str; 10] =
    ["scenario", "mechanism", "privacy_mode", "eps", "eps_local", "metric", "value", "stddev", "trials", "seed"];

/// Metric name of rows flagging a budget that amplification cannot support.
pub const INFEASIBLE_METRIC: &str = "amplification_infeasible";

/// One reported quantity; `value` is always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub scenario: String,
    pub mechanism: String,
    pub privacy_mode: String,
    /// Local budget in LDP mode, central target in PIC mode.
    pub eps: f64,
    /// Resolved local budget; `None` when it could not be resolved.
    pub eps_local: Option<f64>,
    pub metric: String,
    pub value: f64,
    pub stddev: Option<f64>,
    pub trials: usize,
    pub seed: u64,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

pub fn write_rows<W: Write>(writer: W, rows: &[MetricRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(CSV_HEADER)?;
    for r in rows {
        if !r.value.is_finite() {
            return Err(invalid(format!("metric `{}` has non-finite value", r.metric)));
        }
        csv.write_record([
            r.scenario.clone(),
            r.mechanism.clone(),
            r.privacy_mode.clone(),
            r.eps.to_string(),
            fmt_opt(r.eps_local),
            r.metric.clone(),
            r.value.to_string(),
            fmt_opt(r.stddev),
            r.trials.to_string(),
            r.seed.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn has_infeasible(rows: &[MetricRow]) -> bool {
    rows.iter().any(|r| r.metric == INFEASIBLE_METRIC)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the stream addressed by `parts` under `base`.
pub fn job_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix(base), |h, &p| splitmix(h ^ splitmix(p)))
}

const STREAM_DATA: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_SHAPLEY: u64 = 3;
const STREAM_PROTOCOL: u64 = 4;

fn rng_for(base: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(job_seed(base, parts))
}

/// Local budget for one group, or the population amplification would need.
#[derive(Debug, Clone, PartialEq)]
pub enum Budget {
    Local { epsilon: f64, mode: String },
    Infeasible { min_population: f64 },
}

/// Resolves the local budget of a group of `group_size` users.
///
/// In PIC mode the local budget is the larger of the target and the inverted
/// amplification bound: an `eps`-LDP report is already `eps`-DP centrally, so
/// the target itself is always admissible. An infinite budget means clear data.
pub fn resolve_budget(
    privacy: PrivacyKind,
    eps: f64,
    delta: Option<f64>,
    group_size: usize,
    policy: PopulationPolicy,
) -> Result<Budget> {
    if privacy == PrivacyKind::Ldp {
        return Ok(Budget::Local { epsilon: eps, mode: "ldp".into() });
    }
    if eps.is_infinite() {
        return Ok(Budget::Local { epsilon: eps, mode: "pic".into() });
    }
    let population = effective_population(group_size as u64, policy)?;
    let delta = delta.unwrap_or_else(|| delta_default(group_size as u64));
    match invert_amplify(eps, delta, population) {
        Ok(inv) => {
            let mode = match inv.status {
                InversionStatus::Exact => "pic".to_string(),
                s => format!("pic:{}", s.as_str()),
            };
            Ok(Budget::Local { epsilon: inv.epsilon.max(eps), mode })
        }
        Err(Error::AmplificationInfeasible { min_population, .. }) => Ok(Budget::Infeasible { min_population }),
        Err(e) => Err(e),
    }
}

/// A randomizer, or the identity at an infinite budget.
enum Sanitizer {
    Clear,
    Noisy(LocalRandomizer),
}

impl Sanitizer {
    fn new(mechanism: Mechanism, domain: DomainSpec, epsilon: f64) -> Result<Self> {
        if epsilon.is_infinite() {
            Ok(Sanitizer::Clear)
        } else {
            Ok(Sanitizer::Noisy(LocalRandomizer::build(mechanism, domain, epsilon)?))
        }
    }

    fn estimate<R: Rng + ?Sized>(&self, x: &Vector, rng: &mut R) -> Result<Vector> {
        match self {
            Sanitizer::Clear => Ok(x.clone()),
            Sanitizer::Noisy(r) => Ok(r.sample(x, rng)?.debiased),
        }
    }

    fn estimate_all<R: Rng + ?Sized>(&self, xs: &[Vector], rng: &mut R) -> Result<Vec<Vector>> {
        xs.iter().map(|x| self.estimate(x, rng)).collect()
    }
}

/// Sample mean and standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(invalid("slope needs at least two paired points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(invalid("log-log slope needs positive finite values"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("x values must not all be equal"));
    }
    Ok(sxy / sxx)
}

/// Common fields of the rows of one sweep point.
#[derive(Debug, Clone)]
struct RowStamp {
    scenario: Scenario,
    mechanism: Mechanism,
    mode: String,
    eps: f64,
    eps_local: Option<f64>,
    trials: usize,
    seed: u64,
}

impl RowStamp {
    fn row(&self, metric: impl Into<String>, value: f64, stddev: Option<f64>) -> MetricRow {
        MetricRow {
            scenario: self.scenario.label().into(),
            mechanism: self.mechanism.id().into(),
            privacy_mode: self.mode.clone(),
            eps: self.eps,
            eps_local: self.eps_local,
            metric: metric.into(),
            value,
            stddev,
            trials: self.trials,
            seed: self.seed,
        }
    }

    fn summary(&self, metric: &str, values: &[f64]) -> MetricRow {
        let (mean, std) = mean_std(values);
        self.row(metric, mean, Some(std))
    }
}

fn privacy_label(privacy: PrivacyKind) -> &'static str {
    match privacy {
        PrivacyKind::Ldp => "ldp",
        PrivacyKind::Pic => "pic",
    }
}

/// A sweep point whose group budgets all resolved.
struct Point {
    stamp: RowStamp,
    mech_index: u64,
    eps_index: u64,
    locals: Vec<f64>,
}

/// Expands the mechanism x budget grid; infeasible points become flagged rows.
fn sweep(cfg: &ExperimentConfig, group_sizes: &[usize]) -> Result<(Vec<Point>, Vec<MetricRow>)> {
    let policy = cfg.effective_policy();
    let mut points = Vec::new();
    let mut flagged = Vec::new();
    for (ei, &eps) in cfg.epsilons.iter().enumerate() {
        let mut locals = Vec::with_capacity(group_sizes.len());
        let mut mode = privacy_label(cfg.privacy).to_string();
        let mut infeasible = None;
        for &size in group_sizes {
            match resolve_budget(cfg.privacy, eps, cfg.delta, size, policy)? {
                Budget::Local { epsilon, mode: m } => {
                    if m.len() > mode.len() {
                        mode = m;
                    }
                    locals.push(epsilon);
                }
                Budget::Infeasible { min_population } => {
                    infeasible = Some(infeasible.map_or(min_population, |v: f64| v.max(min_population)));
                }
            }
        }
        for (mi, &mechanism) in cfg.mechanisms.iter().enumerate() {
            let stamp = RowStamp {
                scenario: cfg.scenario,
                mechanism,
                mode: mode.clone(),
                eps,
                eps_local: locals.first().copied(),
                trials: cfg.trials,
                seed: cfg.seed,
            };
            match infeasible {
                Some(min) => flagged.push(RowStamp { eps_local: None, ..stamp }.row(INFEASIBLE_METRIC, min, None)),
                None => points.push(Point { stamp, mech_index: mi as u64, eps_index: ei as u64, locals: locals.clone() }),
            }
        }
    }
    Ok((points, flagged))
}

/// Runs `job` over every point in parallel and flattens the rows in sweep order.
fn run_points<F>(points: &[Point], mut flagged: Vec<MetricRow>, job: F) -> Result<Vec<MetricRow>>
where
    F: Fn(&Point) -> Result<Vec<MetricRow>> + Sync + Send,
{
    let rows: Vec<Vec<MetricRow>> = points.par_iter().map(job).collect::<Result<_>>()?;
    let mut out: Vec<MetricRow> = rows.into_iter().flatten().collect();
    out.append(&mut flagged);
    Ok(out)
}

/// Mean l2 error of one debiased report over inputs uniform in `[-1, 1]^d`.
pub fn run_single_report(cfg: &ExperimentConfig) -> Result<Vec<MetricRow>> {
    let domain = DomainSpec::unit_cube(cfg.dim);
    let population = *cfg.n.first().ok_or_else(|| Error::Config("population size required".into()))?;
    let (points, flagged) = sweep(cfg, &[population])?;
    run_points(&points, flagged, |p| {
        let sanitizer = Sanitizer::new(p.stamp.mechanism, domain, p.locals[0])?;
        let mut rng = rng_for(cfg.seed, &[STREAM_NOISE, p.mech_index, p.eps_index]);
        let region = domain.region();
        let errors = (0..cfg.trials)
            .map(|_| {
                let x = sample_uniform(&region, &mut rng);
                Ok(sanitizer.estimate(&x, &mut rng)?.distance(&x))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(vec![p.stamp.summary("mean_l2_error", &errors)])
    })
}

/// Loads `cfg.dataset` (normalized by the union bounding box) or draws
/// uniform groups in `[0, 5]^2`, returned in `[-1, 1]^2` units.
fn location_groups(cfg: &ExperimentConfig, sizes: &[usize], trial: u64) -> Result<Vec<Vec<Vector>>> {
    if !cfg.dataset.is_empty() {
        let groups = cfg.dataset.iter().map(|p| load_locations_csv(p)).collect::<Result<Vec<_>>>()?;
        let all: Vec<&Vector> = groups.iter().flatten().collect();
        if all.is_empty() {
            return Err(Error::Config("dataset holds no locations".into()));
        }
        let lo: Vec<f64> = (0..2).map(|i| all.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min)).collect();
        let hi: Vec<f64> = (0..2).map(|i| all.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
        // a square box keeps distances isotropic
        let side = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
        let bbox = BoundingBox::new(lo.clone(), lo.iter().map(|l| l + side).collect())?;
        return groups.iter().map(|g| Ok(normalize_locations(g, &bbox)?.0)).collect();
    }
    let bbox = BoundingBox::square(2, 0.0, 5.0)?;
    let mut rng = rng_for(cfg.seed, &[STREAM_DATA, trial]);
    sizes
        .iter()
        .map(|&n| Ok(normalize_locations(&synth_locations(n, &bbox, LocationDistribution::Uniform, &mut rng)?, &bbox)?.0))
        .collect()
}

fn group_sizes(cfg: &ExperimentConfig, expected: usize) -> Result<Vec<usize>> {
    if cfg.dataset.is_empty() {
        return Ok(if expected == 1 { vec![cfg.n[0]] } else { cfg.groups.clone() });
    }
    if cfg.dataset.len() != expected {
        return Err(Error::Config(format!("{} needs {expected} dataset file(s)", cfg.scenario)));
    }
    cfg.dataset.iter().map(|p| Ok(load_locations_csv(p)?.len())).collect()
}

/// Travel cost of the min-weight matching and success ratio of the maximum
/// matching within `tau`, both computed on sanitized locations and scored on
/// true ones.
pub fn run_crowdsourcing(cfg: &ExperimentConfig) -> Result<Vec<MetricRow>> {
    let sizes = group_sizes(cfg, 2)?;
    let domain = DomainSpec::unit_cube(2);
    let (points, flagged) = sweep(cfg, &sizes)?;
    run_points(&points, flagged, |p| {
        let mut cost = Vec::with_capacity(cfg.trials);
        let mut success = Vec::with_capacity(cfg.trials);
        for trial in 0..cfg.trials as u64 {
            let truth = location_groups(cfg, &sizes, trial)?;
            let mut rng = rng_for(cfg.seed, &[STREAM_NOISE, p.mech_index, p.eps_index, trial]);
            let est = truth
                .iter()
                .zip(&p.locals)
                .map(|(g, &eps)| {
                    let s = Sanitizer::new(p.stamp.mechanism, domain, eps)?;
                    Ok(s.estimate_all(g, &mut rng)?.iter().map(|v| v.clamped(1.0)).collect())
                })
                .collect::<Result<Vec<Vec<Vector>>>>()?;
            let (a, b) = (&truth[0], &truth[1]);
            let full = min_weight_full_matching(&BipartiteInstance::new(est[0].clone(), est[1].clone(), None)?)?;
            cost.push(full.pairs.iter().map(|&(i, j)| a[i].distance(&b[j])).sum());
            let within = max_matching_within_radius(&BipartiteInstance::new(
                est[0].clone(),
                est[1].clone(),
                Some(cfg.tau),
            )?)?;
            let hits = within.pairs.iter().filter(|&&(i, j)| a[i].distance(&b[j]) <= cfg.tau).count();
            success.push(hits as f64 / a.len().min(b.len()) as f64);
        }
        let mut rows = vec![p.stamp.summary("travel_cost", &cost), p.stamp.summary("success_ratio", &success)];
        for (g, &eps) in p.locals.iter().enumerate() {
            if eps.is_finite() {
                rows.push(p.stamp.row(format!("eps_local_g{g}"), eps, None));
            }
        }
        Ok(rows)
    })
}

fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Precision, recall and F1 of radius-`tau` neighbourhoods computed on
/// sanitized locations against those on true locations.
pub fn run_social(cfg: &ExperimentConfig) -> Result<Vec<MetricRow>> {
    let sizes = group_sizes(cfg, 1)?;
    let domain = DomainSpec::unit_cube(2);
    let (points, flagged) = sweep(cfg, &sizes)?;
    run_points(&points, flagged, |p| {
        let (mut precision, mut recall, mut f1) = (Vec::new(), Vec::new(), Vec::new());
        for trial in 0..cfg.trials as u64 {
            let truth = location_groups(cfg, &sizes, trial)?.remove(0);
            let mut rng = rng_for(cfg.seed, &[STREAM_NOISE, p.mech_index, p.eps_index, trial]);
            let est = Sanitizer::new(p.stamp.mechanism, domain, p.locals[0])?.estimate_all(&truth, &mut rng)?;
            let actual = radius_nn_grid(&truth, cfg.tau)?.neighbors;
            let found = radius_nn_grid(&est, cfg.tau)?.neighbors;
            let hits: usize = actual.iter().zip(&found).map(|(a, f)| intersection_size(a, f)).sum();
            let n_found: usize = found.iter().map(Vec::len).sum();
            let n_actual: usize = actual.iter().map(Vec::len).sum();
            let pr = if n_found == 0 { 0.0 } else { hits as f64 / n_found as f64 };
            let rc = if n_actual == 0 { 0.0 } else { hits as f64 / n_actual as f64 };
            precision.push(pr);
            recall.push(rc);
            f1.push(if pr + rc == 0.0 { 0.0 } else { 2.0 * pr * rc / (pr + rc) });
        }
        Ok(vec![
            p.stamp.summary("precision", &precision),
            p.stamp.summary("recall", &recall),
            p.stamp.summary("f1", &f1),
        ])
    })
}

/// Synthetic per-user gradients in `[-c, c]^d` sharing a common direction,
/// plus a validation gradient near that direction.
pub fn synth_gradients<R: Rng + ?Sized>(n: usize, d: usize, c: f64, rng: &mut R) -> Result<(Vec<Vector>, Vector)> {
    let unit = Normal::new(0.0, 1.0).map_err(|e| invalid(e.to_string()))?;
    let mut base: Vec<f64> = (0..d).map(|_| unit.sample(rng)).collect();
    let norm = base.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    base.iter_mut().for_each(|v| *v *= 0.5 * c / norm);
    let noisy = |sd: f64, rng: &mut R| -> Vector {
        Vector::new(base.iter().map(|b| (b + sd * c * unit.sample(rng)).clamp(-c, c)).collect())
            .expect("finite coordinates")
    };
    let grads = (0..n).map(|_| noisy(0.3, rng)).collect();
    let val = noisy(0.1, rng);
    if val.norm_squared() == 0.0 {
        return Err(invalid("validation gradient vanished"));
    }
    Ok((grads, val))
}

/// Gradient and Shapley l2 errors of sanitized gradients against clear ones.
pub fn run_incentive(cfg: &ExperimentConfig) -> Result<Vec<MetricRow>> {
    let n = cfg.n[0];
    let domain = DomainSpec::new(Shape::Cube, cfg.dim, cfg.clip)?;
    let (points, flagged) = sweep(cfg, &[n])?;
    run_points(&points, flagged, |p| {
        let (mut grad_err, mut shap_err) = (Vec::new(), Vec::new());
        for trial in 0..cfg.trials as u64 {
            let mut data_rng = rng_for(cfg.seed, &[STREAM_DATA, trial]);
            let (grads, grad_val) = synth_gradients(n, cfg.dim, cfg.clip, &mut data_rng)?;
            let mut rng = rng_for(cfg.seed, &[STREAM_NOISE, p.mech_index, p.eps_index, trial]);
            let est = Sanitizer::new(p.stamp.mechanism, domain, p.locals[0])?.estimate_all(&grads, &mut rng)?;
            grad_err.push(grads.iter().zip(&est).map(|(g, e)| g.distance(e)).sum::<f64>() / n as f64);
            // same seed on both sides: Monte Carlo uses matched permutations
            let task = ShapleyTask {
                grad_val,
                monte_carlo_samples: TaskOptions::default().monte_carlo_samples,
                seed: job_seed(cfg.seed, &[STREAM_SHAPLEY, trial]),
            };
            let clear = task.values(&grads)?.values;
            let noisy = task.values(&est)?.values;
            shap_err.push(clear.iter().zip(&noisy).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64);
        }
        Ok(vec![
            p.stamp.summary("gradient_l2_error", &grad_err),
            p.stamp.summary("shapley_l2_error", &shap_err),
        ])
    })
}

/// Population above which the explicit upper curve holds:
/// `n > max(16 ln(1/delta), 2^(d+7) ln(1/delta) / (e^eps_c - 1)^2)`.
pub fn rate_threshold(d: usize, epsilon_c: f64, delta: f64) -> f64 {
    let l = (1.0 / delta).ln();
    (16.0 * l).max(2f64.powi(d as i32 + 7) * l / epsilon_c.exp_m1().powi(2))
}

/// Explicit upper curve `36 (256 ln(1/delta) / (n (e^eps_c - 1)^2))^(2/(d+2))`.
pub fn rate_upper_bound(d: usize, epsilon_c: f64, delta: f64, n: usize) -> f64 {
    let inner = 256.0 * (1.0 / delta).ln() / (n as f64 * epsilon_c.exp_m1().powi(2));
    36.0 * inner.powf(2.0 / (d as f64 + 2.0))
}

fn rate_row(metric: String, eps: f64, value: f64) -> MetricRow {
    MetricRow {
        scenario: Scenario::Rates.label().into(),
        mechanism: Mechanism::Minkowski.id().into(),
        privacy_mode: "pic".into(),
        eps,
        eps_local: None,
        metric,
        value,
        stddev: None,
        trials: 0,
        seed: 0,
    }
}

/// Upper curve and the unscaled lower shape `n^(-2/(d+2))` over `n_grid`;
/// infeasible sizes yield a flagged row carrying the threshold.
pub fn theoretical_rates(d: usize, epsilon_c: f64, delta: f64, n_grid: &[usize]) -> Result<Vec<MetricRow>> {
    if d == 0 || !(epsilon_c > 0.0 && epsilon_c.is_finite()) || !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("rates need d >= 1, finite eps_c > 0 and delta in (0, 1)"));
    }
    let threshold = rate_threshold(d, epsilon_c, delta);
    let mut rows = Vec::new();
    for &n in n_grid {
        if (n as f64) <= threshold {
            rows.push(rate_row(format!("infeasible[n={n}]"), epsilon_c, threshold));
            continue;
        }
        rows.push(rate_row(format!("upper_bound[n={n}]"), epsilon_c, rate_upper_bound(d, epsilon_c, delta, n)));
        rows.push(rate_row(
            format!("lower_bound_shape[n={n}]"),
            epsilon_c,
            (n as f64).powf(-2.0 / (d as f64 + 2.0)),
        ));
    }
    Ok(rows)
}

/// Rate curves for every central budget, plus (with `trials > 0`) the
/// empirical squared error of PIC Minkowski on the unit ball per population.
pub fn run_rates(cfg: &ExperimentConfig) -> Result<Vec<MetricRow>> {
    let delta = cfg.delta.unwrap_or(1e-6);
    let domain = DomainSpec::unit_ball(cfg.dim);
    let policy = cfg.policy.unwrap_or(PopulationPolicy::Full);
    let mut rows = Vec::new();
    for (ei, &eps) in cfg.epsilons.iter().enumerate() {
        rows.extend(theoretical_rates(cfg.dim, eps, delta, &cfg.n)?);
        if cfg.trials == 0 {
            continue;
        }
        let results: Vec<MetricRow> = cfg
            .n
            .par_iter()
            .map(|&n| {
                let stamp = |mode: String, local: Option<f64>| RowStamp {
                    scenario: Scenario::Rates,
                    mechanism: Mechanism::Minkowski,
                    mode,
                    eps,
                    eps_local: local,
                    trials: cfg.trials,
                    seed: cfg.seed,
                };
                match resolve_budget(PrivacyKind::Pic, eps, Some(delta), n, policy)? {
                    Budget::Infeasible { min_population } => {
                        Ok(stamp("pic".into(), None).row(INFEASIBLE_METRIC, min_population, None))
                    }
                    Budget::Local { epsilon, mode } => {
                        let s = Sanitizer::new(Mechanism::Minkowski, domain, epsilon)?;
                        let mut rng = rng_for(cfg.seed, &[STREAM_NOISE, ei as u64, n as u64]);
                        let region = domain.region();
                        let errs = (0..cfg.trials)
                            .map(|_| {
                                let x = sample_uniform(&region, &mut rng);
                                Ok(s.estimate(&x, &mut rng)?.distance(&x).powi(2))
                            })
                            .collect::<Result<Vec<f64>>>()?;
                        let (mean, std) = mean_std(&errs);
                        let se = std / (cfg.trials as f64).sqrt();
                        Ok(stamp(mode, Some(epsilon)).row(format!("empirical_sq_error[n={n}]"), mean, Some(se)))
                    }
                }
            })
            .collect::<Result<_>>()?;
        let (xs, ys): (Vec<f64>, Vec<f64>) = cfg
            .n
            .iter()
            .zip(&results)
            .filter(|(_, r)| r.metric != INFEASIBLE_METRIC)
            .map(|(&n, r)| (n as f64, r.value))
            .unzip();
        rows.extend(results);
        if xs.len() >= 2 {
            rows.push(rate_row("loglog_slope_empirical".into(), eps, loglog_slope(&xs, &ys)?));
        }
    }
    Ok(rows)
}

/// Outcome of [`run_protocol_demo`].
#[derive(Debug, Clone)]
pub struct ProtocolDemo {
    pub rows: Vec<MetricRow>,
    pub transcript: String,
}

/// One full round over synthetic users with the first configured mechanism
/// and budget; task defaults to identity.
pub fn run_protocol_demo(cfg: &ExperimentConfig) -> Result<ProtocolDemo> {
    let task_id = cfg.task.unwrap_or(TaskId::Identity);
    let sizes = match task_id.group_count() {
        Some(1) => vec![cfg.groups.iter().sum()],
        _ => cfg.groups.clone(),
    };
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::Config("protocol demo needs non-empty groups".into()));
    }
    let mechanism = cfg.mechanisms[0];
    let eps = cfg.epsilons[0];
    if eps.is_infinite() {
        return Err(Error::Config("the protocol needs a finite budget".into()));
    }
    let policy = cfg.effective_policy();
    let shapley = task_id == TaskId::ShapleyIncentive;
    let dim = if shapley { cfg.dim } else { 2 };
    let domain = DomainSpec::unit_cube(dim);
    let stamp = |mode: String, local: Option<f64>| RowStamp {
        scenario: Scenario::ProtocolDemo,
        mechanism,
        mode,
        eps,
        eps_local: local,
        trials: 1,
        seed: cfg.seed,
    };

    let mut randomizers = Vec::new();
    let mut mode = privacy_label(cfg.privacy).to_string();
    for &size in &sizes {
        match resolve_budget(cfg.privacy, eps, cfg.delta, size, policy)? {
            Budget::Local { epsilon, mode: m } => {
                if m.len() > mode.len() {
                    mode = m;
                }
                randomizers.push(LocalRandomizer::build(mechanism, domain, epsilon)?);
            }
            Budget::Infeasible { min_population } => {
                return Ok(ProtocolDemo {
                    rows: vec![stamp(mode, None).row(INFEASIBLE_METRIC, min_population, None)],
                    transcript: String::new(),
                });
            }
        }
    }

    let mut rng = KeyRng::new(KeyEntropy::Deterministic(job_seed(cfg.seed, &[STREAM_PROTOCOL])));
    let mut data_rng = rng_for(cfg.seed, &[STREAM_DATA]);
    let names: Vec<String> = (0..sizes.len()).map(|g| format!("g{g}")).collect();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let (params, server_keys) = server_setup(&name_refs, &randomizers, task_id, &mut rng)?;
    let opts = TaskOptions {
        tau: Some(cfg.tau),
        clip: Some(1.0),
        grad_val: Some(Vector::new(vec![1.0; dim])?),
        seed: cfg.seed,
        ..TaskOptions::default()
    };
    let task = build_task(task_id, &opts)?;

    let region = domain.region();
    let mut users: Vec<UserState> = sizes
        .iter()
        .enumerate()
        .flat_map(|(g, &n)| (0..n).map(move |_| g))
        .map(|g| UserState::new(g, sample_uniform(&region, &mut data_rng)))
        .collect();
    let mut envelopes = vec![Vec::new(); sizes.len()];
    for u in users.iter_mut() {
        envelopes[u.group_index].push(user_prepare(u, &params, &mut rng)?);
    }
    let corrupted = vec![BTreeSet::new(); sizes.len()];
    let (bulletin, transcript) =
        run_round(&envelopes, &params, &server_keys, task.as_ref(), &corrupted, RoundOptions::default(), &mut rng)?;

    let mut delivered = 0usize;
    for u in users.iter_mut() {
        let out = user_retrieve(&bulletin, u)?;
        // identity outputs must echo the submitted report
        let ok = match (&out, task_id) {
            (TaskOutput::Report(v), TaskId::Identity) => Some(v) == u.submitted.as_ref(),
            _ => true,
        };
        delivered += usize::from(ok);
    }
    let local = randomizers.first().map(LocalRandomizer::epsilon);
    let s = stamp(mode, local);
    Ok(ProtocolDemo {
        rows: vec![
            s.row("delivered_fraction", delivered as f64 / users.len() as f64, None),
            s.row("bulletin_entries", bulletin.entry_count() as f64, None),
        ],
        transcript: transcript.export(),
    })
}

/// Dispatches on `cfg.scenario`.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<MetricRow>> {
    cfg.validate()?;
    match cfg.scenario {
        Scenario::SingleReport => run_single_report(cfg),
        Scenario::Crowdsourcing => run_crowdsourcing(cfg),
        Scenario::Social => run_social(cfg),
        Scenario::Incentive => run_incentive(cfg),
        Scenario::Rates => run_rates(cfg),
        Scenario::ProtocolDemo => Ok(run_protocol_demo(cfg)?.rows),
    }
}
