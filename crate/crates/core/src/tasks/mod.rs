//! Server-side permutation-equivariant tasks.
//!
//! Every task maps per-group lists of anonymous submissions to one output per
//! submission, in the same order.

mod matching;
mod neighbors;
mod shapley;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::envelope::{put_u16_len, put_u32_len, put_vector, Reader};
use crate::error::{invalid, Error, Result};
use crate::geometry::Vector;

pub use matching::{
    hopcroft_karp, max_matching_min_cost, max_matching_within_radius, min_weight_full_matching, BipartiteInstance,
    Matching,
};
pub use neighbors::{radius_nn, radius_nn_grid, NeighborSet};
pub use shapley::{
    cosine_utility, gradient_aggregate, shapley_exact, shapley_monte_carlo, ShapleyMethod,
    ShapleyVector, EXACT_LIMIT,
};

/// Task identifiers as used on the command line and in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskId {
    MinWeightMatching,
    MaxMatching,
    RadiusNn,
    ShapleyIncentive,
    Identity,
}

impl TaskId {
    pub const ALL: [TaskId; 5] = [
        TaskId::MinWeightMatching,
        TaskId::MaxMatching,
        TaskId::RadiusNn,
        TaskId::ShapleyIncentive,
        TaskId::Identity,
    ];

    pub fn id(self) -> &'static str {
        match self {
            TaskId::MinWeightMatching => "min_weight_matching",
            TaskId::MaxMatching => "max_matching",
            TaskId::RadiusNn => "radius_nn",
            TaskId::ShapleyIncentive => "shapley_incentive",
            TaskId::Identity => "identity",
        }
    }

    /// Number of groups the task consumes, if fixed.
    pub fn group_count(self) -> Option<usize> {
        match self {
            TaskId::MinWeightMatching | TaskId::MaxMatching => Some(2),
            TaskId::RadiusNn | TaskId::ShapleyIncentive => Some(1),
            TaskId::Identity => None,
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskId::ALL
            .into_iter()
            .find(|t| t.id() == s)
            .ok_or_else(|| invalid(format!("unknown task `{s}`")))
    }
}

/// One anonymous entry of the server's list.
#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    pub public_key: Vec<u8>,
    /// Mechanism output exactly as submitted.
    pub raw: Vector,
    /// Unbiased estimate derived from `raw` with the group's public parameters.
    pub estimate: Vector,
}

/// Personalized result delivered to one anonymous position.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskOutput {
    Report(Vector),
    /// Partner public keys with their noisy estimates.
    Partners(Vec<(Vec<u8>, Vector)>),
    Scalar(f64),
}

const TAG_REPORT: u8 = 0x01;
const TAG_PARTNERS: u8 = 0x02;
const TAG_SCALAR: u8 = 0x03;

impl TaskOutput {
    /// `0x01 || tag || body`, big-endian.
    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = vec![crate::envelope::FORMAT_VERSION];
        match self {
            TaskOutput::Report(v) => {
                out.push(TAG_REPORT);
                put_vector(&mut out, v)?;
            }
            TaskOutput::Partners(list) => {
                out.push(TAG_PARTNERS);
                put_u32_len(&mut out, list.len(), "partner count")?;
                for (pk, v) in list {
                    put_u16_len(&mut out, pk.len(), "public key length")?;
                    out.extend_from_slice(pk);
                    put_vector(&mut out, v)?;
                }
            }
            TaskOutput::Scalar(x) => {
                if !x.is_finite() {
                    return Err(invalid("scalar output must be finite"));
                }
                out.push(TAG_SCALAR);
                out.extend_from_slice(&x.to_be_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.version()?;
        let out = match r.u8()? {
            TAG_REPORT => TaskOutput::Report(r.vector()?),
            TAG_PARTNERS => {
                let count = r.u32()? as usize;
                let mut list = Vec::with_capacity(count.min(1024));
                for _ in 0..count {
                    let len = r.u16()? as usize;
                    let pk = r.take(len)?.to_vec();
                    list.push((pk, r.vector()?));
                }
                TaskOutput::Partners(list)
            }
            TAG_SCALAR => TaskOutput::Scalar(r.f64()?),
            _ => return Err(Error::Decode { position: 1, reason: "unknown output tag" }),
        };
        r.finish()?;
        Ok(out)
    }
}

/// A permutation-equivariant computation over per-group submission lists.
pub trait Task: Send + Sync {
    fn id(&self) -> TaskId;

    /// Returns `outputs[g][k]` for submission `k` of group `g`.
    fn compute(&self, groups: &[Vec<Submission>]) -> Result<Vec<Vec<TaskOutput>>>;
}

/// Tunables shared by all task constructors.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskOptions {
    /// Serving or query radius.
    pub tau: Option<f64>,
    /// Coordinate bound applied to estimates before spatial tasks.
    pub clip: Option<f64>,
    pub grad_val: Option<Vector>,
    pub monte_carlo_samples: usize,
    pub seed: u64,
}

impl Default for TaskOptions {
    fn default() -> Self {
        Self { tau: None, clip: None, grad_val: None, monte_carlo_samples: 2000, seed: 0 }
    }
}

pub fn build_task(id: TaskId, opts: &TaskOptions) -> Result<Box<dyn Task>> {
    let tau = || opts.tau.ok_or_else(|| Error::Config(format!("task `{id}` needs tau")));
    Ok(match id {
        TaskId::Identity => Box::new(IdentityTask),
        TaskId::MinWeightMatching => Box::new(MinWeightMatchingTask { clip: opts.clip }),
        TaskId::MaxMatching => Box::new(MaxMatchingTask { tau: tau()?, clip: opts.clip }),
        TaskId::RadiusNn => Box::new(RadiusNnTask { tau: tau()?, clip: opts.clip }),
        TaskId::ShapleyIncentive => Box::new(ShapleyTask {
            grad_val: opts
                .grad_val
                .clone()
                .ok_or_else(|| Error::Config("shapley task needs a validation gradient".into()))?,
            monte_carlo_samples: opts.monte_carlo_samples,
            seed: opts.seed,
        }),
    })
}

fn expect_groups(id: TaskId, groups: &[Vec<Submission>]) -> Result<()> {
    match id.group_count() {
        Some(n) if n != groups.len() => Err(Error::Config(format!(
            "task `{id}` needs {n} group(s), got {}",
            groups.len()
        ))),
        _ => Ok(()),
    }
}

fn estimates(group: &[Submission], clip: Option<f64>) -> Vec<Vector> {
    group
        .iter()
        .map(|s| match clip {
            Some(b) => s.estimate.clamped(b),
            None => s.estimate.clone(),
        })
        .collect()
}

fn partner_list(group: &[Submission], points: &[Vector], idx: impl IntoIterator<Item = usize>) -> TaskOutput {
    TaskOutput::Partners(
        idx.into_iter()
            .map(|j| (group[j].public_key.clone(), points[j].clone()))
            .collect(),
    )
}

/// Returns each submitter its own raw report.
#[derive(Debug, Clone, Copy)]
pub struct IdentityTask;

impl Task for IdentityTask {
    fn id(&self) -> TaskId {
        TaskId::Identity
    }

    fn compute(&self, groups: &[Vec<Submission>]) -> Result<Vec<Vec<TaskOutput>>> {
        Ok(groups
            .iter()
            .map(|g| g.iter().map(|s| TaskOutput::Report(s.raw.clone())).collect())
            .collect())
    }
}

/// Runs `f` on every group sorted by public key and returns outputs in input
/// order. Lowest-index tie-breaking then refers to key order, so clipped
/// estimates that coincide on the boundary cannot make outputs depend on the
/// shuffle.
fn in_key_order<F>(groups: &[Vec<Submission>], f: F) -> Result<Vec<Vec<TaskOutput>>>
where
    F: FnOnce(&[Vec<Submission>]) -> Result<Vec<Vec<TaskOutput>>>,
{
    let orders: Vec<Vec<usize>> = groups
        .iter()
        .map(|g| {
            let mut idx: Vec<usize> = (0..g.len()).collect();
            idx.sort_by(|&i, &j| g[i].public_key.cmp(&g[j].public_key));
            idx
        })
        .collect();
    let sorted: Vec<Vec<Submission>> = groups
        .iter()
        .zip(&orders)
        .map(|(g, o)| o.iter().map(|&i| g[i].clone()).collect())
        .collect();
    let outputs = f(&sorted)?;
    Ok(outputs
        .into_iter()
        .zip(&orders)
        .map(|(out, o)| {
            let mut slots: Vec<Option<TaskOutput>> = vec![None; o.len()];
            for (k, v) in out.into_iter().enumerate() {
                slots[o[k]] = Some(v);
            }
            slots.into_iter().map(|v| v.expect("one output per submission")).collect()
        })
        .collect())
}

fn matching_outputs(groups: &[Vec<Submission>], a: &[Vector], b: &[Vector], m: &Matching) -> Vec<Vec<TaskOutput>> {
    let out_a = m
        .partner_of_a(a.len())
        .into_iter()
        .map(|p| partner_list(&groups[1], b, p))
        .collect();
    let out_b = m
        .partner_of_b(b.len())
        .into_iter()
        .map(|p| partner_list(&groups[0], a, p))
        .collect();
    vec![out_a, out_b]
}

#[derive(Debug, Clone, Copy)]
pub struct MinWeightMatchingTask {
    pub clip: Option<f64>,
}

impl Task for MinWeightMatchingTask {
    fn id(&self) -> TaskId {
        TaskId::MinWeightMatching
    }

    fn compute(&self, groups: &[Vec<Submission>]) -> Result<Vec<Vec<TaskOutput>>> {
        expect_groups(self.id(), groups)?;
        in_key_order(groups, |groups| {
            let a = estimates(&groups[0], self.clip);
            let b = estimates(&groups[1], self.clip);
            let inst = BipartiteInstance::new(a.clone(), b.clone(), None)?;
            let m = min_weight_full_matching(&inst)?;
            Ok(matching_outputs(groups, &a, &b, &m))
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MaxMatchingTask {
    pub tau: f64,
    pub clip: Option<f64>,
}

impl Task for MaxMatchingTask {
    fn id(&self) -> TaskId {
        TaskId::MaxMatching
    }

    fn compute(&self, groups: &[Vec<Submission>]) -> Result<Vec<Vec<TaskOutput>>> {
        expect_groups(self.id(), groups)?;
        in_key_order(groups, |groups| {
            let a = estimates(&groups[0], self.clip);
            let b = estimates(&groups[1], self.clip);
            let inst = BipartiteInstance::new(a.clone(), b.clone(), Some(self.tau))?;
            let m = max_matching_min_cost(&inst)?;
            Ok(matching_outputs(groups, &a, &b, &m))
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RadiusNnTask {
    pub tau: f64,
    pub clip: Option<f64>,
}

impl Task for RadiusNnTask {
    fn id(&self) -> TaskId {
        TaskId::RadiusNn
    }

    fn compute(&self, groups: &[Vec<Submission>]) -> Result<Vec<Vec<TaskOutput>>> {
        expect_groups(self.id(), groups)?;
        let pts = estimates(&groups[0], self.clip);
        let sets = radius_nn_grid(&pts, self.tau)?;
        Ok(vec![sets
            .neighbors
            .into_iter()
            .map(|n| partner_list(&groups[0], &pts, n))
            .collect()])
    }
}

/// Shapley value of each submitted gradient; exact up to [`SHAPLEY_EXACT_MAX`] players.
#[derive(Debug, Clone)]
pub struct ShapleyTask {
    pub grad_val: Vector,
    pub monte_carlo_samples: usize,
    pub seed: u64,
}

/// Player count up to which incentives use exact enumeration.
pub const SHAPLEY_EXACT_MAX: usize = 12;

impl ShapleyTask {
    pub fn values(&self, grads: &[Vector]) -> Result<ShapleyVector> {
        if grads.len() <= SHAPLEY_EXACT_MAX {
            shapley_exact(grads, &self.grad_val)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            shapley_monte_carlo(grads, &self.grad_val, self.monte_carlo_samples, &mut rng)
        }
    }
}

impl Task for ShapleyTask {
    fn id(&self) -> TaskId {
        TaskId::ShapleyIncentive
    }

    fn compute(&self, groups: &[Vec<Submission>]) -> Result<Vec<Vec<TaskOutput>>> {
        expect_groups(self.id(), groups)?;
        let grads = estimates(&groups[0], None);
        let s = self.values(&grads)?;
        Ok(vec![s.values.into_iter().map(TaskOutput::Scalar).collect()])
    }
}
