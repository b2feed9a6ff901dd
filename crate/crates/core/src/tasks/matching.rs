//! Minimum-weight full matching and maximum matching within a serving radius.

use std::collections::VecDeque;

use crate::error::{invalid, Error, Result};
use crate::geometry::Vector;

const NONE: usize = usize::MAX;

/// Two sides of a bipartite assignment problem in a shared space.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteInstance {
    pub side_a: Vec<Vector>,
    pub side_b: Vec<Vector>,
    pub radius: Option<f64>,
}

impl BipartiteInstance {
    pub fn new(side_a: Vec<Vector>, side_b: Vec<Vector>, radius: Option<f64>) -> Result<Self> {
        let dim = side_a.first().or(side_b.first()).map(Vector::dim);
        if let Some(d) = dim {
            if side_a.iter().chain(&side_b).any(|v| v.dim() != d) {
                return Err(invalid("all points must share one dimension"));
            }
        }
        if let Some(r) = radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(invalid("radius must be positive and finite"));
            }
        }
        Ok(Self { side_a, side_b, radius })
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        self.side_a[i].distance(&self.side_b[j])
    }
}

/// Matched pairs `(index in A, index in B)` sorted by the A index.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    /// Sum of Euclidean distances over the instance's points.
    pub total_cost: f64,
}

impl Matching {
    fn from_pairs(instance: &BipartiteInstance, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        let total_cost = pairs.iter().map(|&(i, j)| instance.distance(i, j)).sum();
        Self { pairs, total_cost }
    }

    /// Partner in B of each A index.
    pub fn partner_of_a(&self, n_a: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n_a];
        for &(i, j) in &self.pairs {
            out[i] = Some(j);
        }
        out
    }

    /// Partner in A of each B index.
    pub fn partner_of_b(&self, n_b: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n_b];
        for &(i, j) in &self.pairs {
            out[j] = Some(i);
        }
        out
    }
}

/// Rectangular linear assignment with `rows <= cols` by shortest augmenting
/// paths with dual potentials. Returns the column assigned to each row.
fn solve_lsap(cost: &[f64], rows: usize, cols: usize) -> Result<Vec<usize>> {
    debug_assert!(rows <= cols);
    let mut u = vec![0.0; rows];
    let mut v = vec![0.0; cols];
    let mut col4row = vec![NONE; rows];
    let mut row4col = vec![NONE; cols];
    let mut shortest = vec![0.0; cols];
    let mut path = vec![NONE; cols];
    let mut in_rows = vec![false; rows];
    let mut in_cols = vec![false; cols];
    let mut remaining: Vec<usize> = Vec::with_capacity(cols);

    for cur in 0..rows {
        shortest.fill(f64::INFINITY);
        path.fill(NONE);
        in_rows.fill(false);
        in_cols.fill(false);
        remaining.clear();
        remaining.extend(0..cols);

        let mut min_val = 0.0;
        let mut i = cur;
        let sink = loop {
            in_rows[i] = true;
            let mut best = NONE;
            let mut lowest = f64::INFINITY;
            // ascending scan with strict < keeps the lowest column on ties
            for (k, &j) in remaining.iter().enumerate() {
                let r = min_val + cost[i * cols + j] - u[i] - v[j];
                if r < shortest[j] {
                    path[j] = i;
                    shortest[j] = r;
                }
                if shortest[j] < lowest {
                    lowest = shortest[j];
                    best = k;
                }
            }
            if best == NONE || !lowest.is_finite() {
                return Err(Error::InvalidInput("assignment infeasible".into()));
            }
            min_val = lowest;
            let j = remaining.remove(best);
            in_cols[j] = true;
            if row4col[j] == NONE {
                break j;
            }
            i = row4col[j];
        };

        u[cur] += min_val;
        for r in 0..rows {
            if in_rows[r] && r != cur {
                u[r] += min_val - shortest[col4row[r]];
            }
        }
        for c in 0..cols {
            if in_cols[c] {
                v[c] -= min_val - shortest[c];
            }
        }

        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = r;
            std::mem::swap(&mut col4row[r], &mut j);
            if r == cur {
                break;
            }
        }
    }
    Ok(col4row)
}

/// Matches every element of the smaller side so that the summed Euclidean
/// distance is minimal.
pub fn min_weight_full_matching(instance: &BipartiteInstance) -> Result<Matching> {
    let (na, nb) = (instance.side_a.len(), instance.side_b.len());
    if na == 0 || nb == 0 {
        return Err(invalid("both sides must be non-empty"));
    }
    let pairs = if na <= nb {
        let cost: Vec<f64> = (0..na)
            .flat_map(|i| (0..nb).map(move |j| (i, j)))
            .map(|(i, j)| instance.distance(i, j))
            .collect();
        solve_lsap(&cost, na, nb)?.into_iter().enumerate().collect()
    } else {
        let cost: Vec<f64> = (0..nb)
            .flat_map(|j| (0..na).map(move |i| (i, j)))
            .map(|(i, j)| instance.distance(i, j))
            .collect();
        solve_lsap(&cost, nb, na)?
            .into_iter()
            .enumerate()
            .map(|(j, i)| (i, j))
            .collect()
    };
    Ok(Matching::from_pairs(instance, pairs))
}

/// Maximum-cardinality matching over edges with distance `<= radius`, by
/// Hopcroft-Karp with ascending adjacency lists.
pub fn max_matching_within_radius(instance: &BipartiteInstance) -> Result<Matching> {
    let tau = instance
        .radius
        .ok_or_else(|| invalid("max matching needs a serving radius"))?;
    let (na, nb) = (instance.side_a.len(), instance.side_b.len());
    let adj: Vec<Vec<usize>> = (0..na)
        .map(|i| (0..nb).filter(|&j| instance.distance(i, j) <= tau).collect())
        .collect();
    let pairs = hopcroft_karp(&adj, nb);
    Ok(Matching::from_pairs(instance, pairs))
}

/// The maximum-cardinality matching within `radius` of least total distance.
///
/// Unlike [`max_matching_within_radius`] the result does not depend on input
/// order whenever that matching is unique, which holds for points in general
/// position. Solved as an assignment where every non-edge costs more than any
/// set of edges, so cardinality is maximized first.
pub fn max_matching_min_cost(instance: &BipartiteInstance) -> Result<Matching> {
    let tau = instance
        .radius
        .ok_or_else(|| invalid("max matching needs a serving radius"))?;
    let (na, nb) = (instance.side_a.len(), instance.side_b.len());
    if na == 0 || nb == 0 {
        return Ok(Matching { pairs: Vec::new(), total_cost: 0.0 });
    }
    let penalty = na.min(nb) as f64 * tau + 1.0;
    let cost = |i: usize, j: usize| {
        let d = instance.distance(i, j);
        if d <= tau {
            d
        } else {
            penalty
        }
    };
    let pairs: Vec<(usize, usize)> = if na <= nb {
        let c: Vec<f64> = (0..na).flat_map(|i| (0..nb).map(move |j| (i, j))).map(|(i, j)| cost(i, j)).collect();
        solve_lsap(&c, na, nb)?.into_iter().enumerate().collect()
    } else {
        let c: Vec<f64> = (0..nb).flat_map(|j| (0..na).map(move |i| (i, j))).map(|(i, j)| cost(i, j)).collect();
        solve_lsap(&c, nb, na)?.into_iter().enumerate().map(|(j, i)| (i, j)).collect()
    };
    let within = pairs.into_iter().filter(|&(i, j)| instance.distance(i, j) <= tau).collect();
    Ok(Matching::from_pairs(instance, within))
}

/// Maximum matching of a bipartite graph given as A-side adjacency lists.
pub fn hopcroft_karp(adj: &[Vec<usize>], nb: usize) -> Vec<(usize, usize)> {
    let na = adj.len();
    let mut match_a = vec![NONE; na];
    let mut match_b = vec![NONE; nb];
    let mut dist = vec![0usize; na];
    let mut queue = VecDeque::new();

    loop {
        // BFS layers from free A vertices
        queue.clear();
        let mut found = false;
        for a in 0..na {
            if match_a[a] == NONE {
                dist[a] = 0;
                queue.push_back(a);
            } else {
                dist[a] = NONE;
            }
        }
        while let Some(a) = queue.pop_front() {
            for &b in &adj[a] {
                let next = match_b[b];
                if next == NONE {
                    found = true;
                } else if dist[next] == NONE {
                    dist[next] = dist[a] + 1;
                    queue.push_back(next);
                }
            }
        }
        if !found {
            break;
        }
        let mut cursor = vec![0usize; na];
        for a in 0..na {
            if match_a[a] == NONE {
                augment(a, adj, &mut match_a, &mut match_b, &mut dist, &mut cursor);
            }
        }
    }
    match_a
        .iter()
        .enumerate()
        .filter(|(_, &b)| b != NONE)
        .map(|(a, &b)| (a, b))
        .collect()
}

/// Iterative layered DFS from free vertex `root`.
fn augment(
    root: usize,
    adj: &[Vec<usize>],
    match_a: &mut [usize],
    match_b: &mut [usize],
    dist: &mut [usize],
    cursor: &mut [usize],
) -> bool {
    let mut stack = vec![root];
    while let Some(&a) = stack.last() {
        if cursor[a] == adj[a].len() {
            dist[a] = NONE;
            stack.pop();
            continue;
        }
        let b = adj[a][cursor[a]];
        let next = match_b[b];
        if next == NONE {
            // flip the alternating path on the stack
            let mut b = b;
            while let Some(a) = stack.pop() {
                let prev = match_a[a];
                match_a[a] = b;
                match_b[b] = a;
                b = prev;
            }
            return true;
        }
        if dist[next] != NONE && dist[next] == dist[a] + 1 {
            stack.push(next);
        } else {
            cursor[a] += 1;
        }
    }
    false
}
