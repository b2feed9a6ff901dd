//! Location datasets: CSV ingestion and synthetic generators.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::geometry::{BoundingBox, Vector};

/// Shape of a synthetic location sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocationDistribution {
    Uniform,
    /// `k` Gaussian clusters with per-axis standard deviation `spread`, truncated to the box.
    Clusters { k: usize, spread: f64 },
}

/// Reads `id,x,y` rows in source coordinates.
pub fn load_locations_csv(path: &Path) -> Result<Vec<Vector>> {
    read_locations(std::fs::File::open(path)?)
}

/// [`load_locations_csv`] over any reader.
pub fn read_locations<R: Read>(reader: R) -> Result<Vec<Vector>> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = csv.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["id", "x", "y"] {
        return Err(Error::Parse { line: 1, reason: "expected header `id,x,y`".into() });
    }
    let mut out = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let coord = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { line, reason: format!("column {} is not a finite number", i + 1) })
        };
        out.push(Vector::from_raw(vec![coord(1)?, coord(2)?]));
    }
    Ok(out)
}

/// Writes `id,x,y` rows with ids starting at 0.
pub fn write_locations_csv<W: Write>(writer: W, points: &[Vector]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["id", "x", "y"])?;
    for (i, p) in points.iter().enumerate() {
        if p.dim() != 2 {
            return Err(invalid("location CSV holds two-dimensional points only"));
        }
        csv.write_record([i.to_string(), p[0].to_string(), p[1].to_string()])?;
    }
    csv.flush()?;
    Ok(())
}

/// `n` points inside `bbox`.
pub fn synth_locations<R: Rng + ?Sized>(
    n: usize,
    bbox: &BoundingBox,
    distribution: LocationDistribution,
    rng: &mut R,
) -> Result<Vec<Vector>> {
    if n == 0 {
        return Err(invalid("need at least one location"));
    }
    let d = bbox.dim();
    let uniform = |rng: &mut R| -> Vec<f64> {
        (0..d).map(|i| rng.gen_range(bbox.min[i]..=bbox.max[i])).collect()
    };
    match distribution {
        LocationDistribution::Uniform => Ok((0..n).map(|_| Vector::from_raw(uniform(rng))).collect()),
        LocationDistribution::Clusters { k, spread } => {
            if k == 0 || !(spread > 0.0 && spread.is_finite()) {
                return Err(invalid("clusters need k >= 1 and a positive spread"));
            }
            let centers: Vec<Vec<f64>> = (0..k).map(|_| uniform(rng)).collect();
            let noise = Normal::new(0.0, spread).map_err(|e| invalid(e.to_string()))?;
            Ok((0..n)
                .map(|_| {
                    let c = &centers[rng.gen_range(0..k)];
                    // resample each coordinate until it lands in the box
                    let coords = (0..d)
                        .map(|i| loop {
                            let v = c[i] + noise.sample(rng);
                            if v >= bbox.min[i] && v <= bbox.max[i] {
                                break v;
                            }
                        })
                        .collect();
                    Vector::from_raw(coords)
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::normalize_locations;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn load_and_normalize() {
        let pts = read_locations("id,x,y\n1,2.5,2.5\n2,0,5\n".as_bytes()).unwrap();
        let bbox = BoundingBox::square(2, 0.0, 5.0).unwrap();
        let (norm, scale) = normalize_locations(&pts, &bbox).unwrap();
        assert_eq!(norm[0].as_slice(), &[0.0, 0.0]);
        assert_eq!(norm[1].as_slice(), &[-1.0, 1.0]);
        assert_eq!(scale, 0.4);
    }

    #[test]
    fn empty_and_malformed() {
        assert!(read_locations("id,x,y\n".as_bytes()).unwrap().is_empty());
        let err = read_locations("id,x,y\n1,0,0\n2,abc,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        assert!(matches!(read_locations("a,b\n1,2\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_locations("id,x,y\n1,2\n".as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn uniform_in_box() {
        let bbox = BoundingBox::square(2, 0.0, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = synth_locations(713, &bbox, LocationDistribution::Uniform, &mut rng).unwrap();
        assert_eq!(pts.len(), 713);
        assert!(pts.iter().all(|p| p.as_slice().iter().all(|v| (0.0..=5.0).contains(v))));
    }

    #[test]
    fn cluster_spread() {
        // single interior cluster: sample std per axis matches the spread
        let bbox = BoundingBox::square(2, 0.0, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = synth_locations(20_000, &bbox, LocationDistribution::Clusters { k: 1, spread: 0.1 }, &mut rng)
            .unwrap();
        for axis in 0..2 {
            let mean = pts.iter().map(|p| p[axis]).sum::<f64>() / pts.len() as f64;
            let var = pts.iter().map(|p| (p[axis] - mean).powi(2)).sum::<f64>() / (pts.len() - 1) as f64;
            assert!((var.sqrt() - 0.1).abs() < 0.003, "{}", var.sqrt());
        }
        let pts = synth_locations(500, &bbox, LocationDistribution::Clusters { k: 3, spread: 0.1 }, &mut rng).unwrap();
        assert!(pts.iter().all(|p| p.as_slice().iter().all(|v| (0.0..=100.0).contains(v))));
    }

    #[test]
    fn deterministic_csv() {
        let bbox = BoundingBox::square(2, 0.0, 5.0).unwrap();
        let render = || {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let pts = synth_locations(50, &bbox, LocationDistribution::Uniform, &mut rng).unwrap();
            let mut buf = Vec::new();
            write_locations_csv(&mut buf, &pts).unwrap();
            buf
        };
        let a = render();
        assert_eq!(a, render());
        let back = read_locations(a.as_slice()).unwrap();
        assert_eq!(back.len(), 50);
    }
}
