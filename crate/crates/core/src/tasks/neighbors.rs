//! Radius nearest-neighbour search.

use std::collections::HashMap;

use crate::error::{invalid, Result};
use crate::geometry::Vector;

/// Ascending neighbour indices within `tau` for each query point (self excluded).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborSet {
    pub neighbors: Vec<Vec<usize>>,
}

fn check(points: &[Vector], tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid("tau must be positive and finite"));
    }
    if let Some(first) = points.first() {
        if points.iter().any(|p| p.dim() != first.dim()) {
            return Err(invalid("all points must share one dimension"));
        }
    }
    Ok(())
}

/// Exact pairwise reference: `{j != i : ||p_i - p_j|| <= tau}`.
pub fn radius_nn(points: &[Vector], tau: f64) -> Result<NeighborSet> {
    check(points, tau)?;
    let neighbors = (0..points.len())
        .map(|i| {
            (0..points.len())
                .filter(|&j| j != i && points[i].distance(&points[j]) <= tau)
                .collect()
        })
        .collect();
    Ok(NeighborSet { neighbors })
}

/// Same result as [`radius_nn`] using a uniform grid with cell side `tau`.
pub fn radius_nn_grid(points: &[Vector], tau: f64) -> Result<NeighborSet> {
    check(points, tau)?;
    let Some(first) = points.first() else {
        return Ok(NeighborSet { neighbors: Vec::new() });
    };
    let d = first.dim();
    let cell = |p: &Vector| -> Vec<i64> { p.as_slice().iter().map(|c| (c / tau).floor() as i64).collect() };
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(d as u32))
        .map(|mut k| {
            (0..d)
                .map(|_| {
                    let o = (k % 3) as i64 - 1;
                    k /= 3;
                    o
                })
                .collect()
        })
        .collect();
    let neighbors = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let home = cell(p);
            let mut out: Vec<usize> = offsets
                .iter()
                .filter_map(|off| {
                    let key: Vec<i64> = home.iter().zip(off).map(|(h, o)| h + o).collect();
                    grid.get(&key)
                })
                .flatten()
                .copied()
                .filter(|&j| j != i && p.distance(&points[j]) <= tau)
                .collect();
            out.sort_unstable();
            out
        })
        .collect();
    Ok(NeighborSet { neighbors })
}
