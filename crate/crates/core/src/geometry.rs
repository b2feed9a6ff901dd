//! Bounded domains, norms, volumes and exact uniform samplers over balls and
//! cubes.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Index;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};

/// Above this magnitude of `d * ln r` volumes are only available in log space.
const LOG_VOLUME_LIMIT: f64 = 300.0;

/// A finite point in `R^d`.
#[derive(Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("vector must have at least one coordinate"));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(invalid(format!("coordinate {i} is not finite")));
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "zero-dimensional vector");
        Self(vec![0.0; dim])
    }

    /// Internal constructor for values produced by arithmetic on finite inputs.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty());
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self, p: Norm) -> f64 {
        norm(self.as_slice(), p)
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn distance(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Vector {
        Vector(self.0.iter().map(|c| c * factor).collect())
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Coordinate-wise truncation into `[-bound, bound]`.
    pub fn clamped(&self, bound: f64) -> Vector {
        Vector(self.0.iter().map(|c| c.clamp(-bound, bound)).collect())
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L2,
    LInf,
}

pub fn norm(v: &[f64], p: Norm) -> f64 {
    match p {
        Norm::L2 => v.iter().map(|c| c * c).sum::<f64>().sqrt(),
        Norm::LInf => v.iter().fold(0.0, |m, c| m.max(c.abs())),
    }
}

/// Shape of a domain, region or cap: an l2 ball or an l-infinity cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Ball,
    Cube,
}

impl Shape {
    pub fn norm(self) -> Norm {
        match self {
            Shape::Ball => Norm::L2,
            Shape::Cube => Norm::LInf,
        }
    }

    /// Volume of the shape with the given dimension and radius (half side for cubes).
    pub fn volume(self, d: usize, r: f64) -> Result<f64> {
        match self {
            Shape::Ball => ball_volume(d, r),
            Shape::Cube => cube_volume(d, r),
        }
    }

    pub fn log_volume(self, d: usize, r: f64) -> f64 {
        match self {
            Shape::Ball => log_ball_volume(d, r),
            Shape::Cube => log_cube_volume(d, r),
        }
    }

    /// `E ||u - c||^2` for `u` uniform on the shape of radius `r` centred at `c`.
    pub fn mean_square_radius(self, d: usize, r: f64) -> f64 {
        let d = d as f64;
        match self {
            Shape::Ball => r * r * d / (d + 2.0),
            Shape::Cube => r * r * d / 3.0,
        }
    }
}

/// A bounded input domain centred at the origin: the ball or cube of radius `scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub shape: Shape,
    pub dim: usize,
    pub scale: f64,
}

impl DomainSpec {
    pub fn new(shape: Shape, dim: usize, scale: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("domain dimension must be positive"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("domain scale must be positive and finite"));
        }
        Ok(Self { shape, dim, scale })
    }

    /// `[-1, 1]^d`.
    pub fn unit_cube(dim: usize) -> Self {
        Self { shape: Shape::Cube, dim, scale: 1.0 }
    }

    /// The l2 unit ball in `R^d`.
    pub fn unit_ball(dim: usize) -> Self {
        Self { shape: Shape::Ball, dim, scale: 1.0 }
    }

    pub fn contains(&self, x: &Vector) -> bool {
        x.dim() == self.dim && x.norm(self.shape.norm()) <= self.scale * (1.0 + 1e-12)
    }

    pub fn region(&self) -> Region {
        Region {
            shape: self.shape,
            center: Vector::zeros(self.dim),
            radius: self.scale,
        }
    }

    /// Largest squared l2 norm attained in the domain.
    pub fn max_norm_squared(&self) -> f64 {
        match self.shape {
            Shape::Ball => self.scale * self.scale,
            Shape::Cube => self.dim as f64 * self.scale * self.scale,
        }
    }

    /// A point on the boundary with maximal l2 norm.
    pub fn extreme_point(&self) -> Vector {
        match self.shape {
            Shape::Ball => {
                let mut c = vec![0.0; self.dim];
                c[0] = self.scale;
                Vector(c)
            }
            Shape::Cube => Vector(vec![self.scale; self.dim]),
        }
    }
}

/// A ball or cube with explicit centre and radius.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub shape: Shape,
    pub center: Vector,
    pub radius: f64,
}

impl Region {
    pub fn new(shape: Shape, center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("region radius must be positive and finite"));
        }
        Ok(Self { shape, center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn contains(&self, y: &Vector) -> bool {
        let diff: Vec<f64> = y
            .as_slice()
            .iter()
            .zip(self.center.as_slice())
            .map(|(a, b)| a - b)
            .collect();
        norm(&diff, self.shape.norm()) <= self.radius
    }
}

fn unit_ball_log_volume(d: usize) -> f64 {
    // ln(pi^{d/2} / Gamma(d/2 + 1)) with Gamma at integers or half-integers
    let half_d = d as f64 / 2.0;
    let mut log_gamma = if d.is_multiple_of(2) { 0.0 } else { 0.5 * PI.ln() };
    let mut z = if d.is_multiple_of(2) { 1.0 } else { 0.5 };
    while z < half_d + 1.0 - 1e-9 {
        log_gamma += z.ln();
        z += 1.0;
    }
    half_d * PI.ln() - log_gamma
}

fn check_volume_args(d: usize, r: f64) {
    assert!(d >= 1, "dimension must be positive");
    assert!(r > 0.0 && r.is_finite(), "radius must be positive and finite");
}

pub fn log_ball_volume(d: usize, r: f64) -> f64 {
    check_volume_args(d, r);
    unit_ball_log_volume(d) + d as f64 * r.ln()
}

pub fn log_cube_volume(d: usize, r: f64) -> f64 {
    check_volume_args(d, r);
    d as f64 * (2.0 * r).ln()
}

/// Volume of the l2 ball of radius `r` in `R^d`.
pub fn ball_volume(d: usize, r: f64) -> Result<f64> {
    check_volume_args(d, r);
    if d as f64 * r.ln().abs() > LOG_VOLUME_LIMIT {
        return Err(Error::Range(format!(
            "ball volume for d={d}, r={r} needs log space"
        )));
    }
    // V_d = V_{d-2} * 2 pi / d
    let mut v = if d.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if d.is_multiple_of(2) { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    let out = v * r.powi(d as i32);
    if out.is_finite() && out > 0.0 {
        Ok(out)
    } else {
        Err(Error::Range(format!("ball volume for d={d}, r={r}")))
    }
}

/// Volume `(2r)^d` of the l-infinity ball (cube of half side `r`).
pub fn cube_volume(d: usize, r: f64) -> Result<f64> {
    check_volume_args(d, r);
    if d as f64 * (2.0 * r).ln().abs() > LOG_VOLUME_LIMIT {
        return Err(Error::Range(format!(
            "cube volume for d={d}, r={r} needs log space"
        )));
    }
    let out = (2.0 * r).powi(d as i32);
    if out.is_finite() && out > 0.0 {
        Ok(out)
    } else {
        Err(Error::Range(format!("cube volume for d={d}, r={r}")))
    }
}

/// Draws a point uniformly from `region`.
///
/// Balls use an isotropic Gaussian direction with radius `R * U^{1/d}`; cubes
/// draw each coordinate independently.
pub fn sample_uniform<R: Rng + ?Sized>(region: &Region, rng: &mut R) -> Vector {
    let d = region.dim();
    let c = region.center.as_slice();
    match region.shape {
        Shape::Ball => {
            let mut dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let mut len = norm(&dir, Norm::L2);
            while len == 0.0 {
                dir = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                len = norm(&dir, Norm::L2);
            }
            let u: f64 = rng.gen();
            let rad = region.radius * u.powf(1.0 / d as f64);
            Vector(
                dir.iter()
                    .zip(c)
                    .map(|(g, ci)| ci + g / len * rad)
                    .collect(),
            )
        }
        Shape::Cube => Vector(
            c.iter()
                .map(|ci| ci + rng.gen_range(-region.radius..=region.radius))
                .collect(),
        ),
    }
}

/// Axis-aligned source box for location normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl BoundingBox {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.is_empty() || min.len() != max.len() {
            return Err(invalid("bounding box corners must share a positive dimension"));
        }
        if let Some(i) = (0..min.len()).find(|&i| !(max[i] > min[i])) {
            return Err(invalid(format!("degenerate bounding box on axis {i}")));
        }
        Ok(Self { min, max })
    }

    /// The square `[lo, hi]^d`.
    pub fn square(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Factor by which radii measured in source units scale into `[-1, 1]` units.
    pub fn radius_scale(&self) -> f64 {
        2.0 / (self.max[0] - self.min[0])
    }

    pub fn normalize(&self, p: &Vector) -> Vector {
        Vector(
            p.as_slice()
                .iter()
                .enumerate()
                .map(|(i, v)| 2.0 * (v - self.min[i]) / (self.max[i] - self.min[i]) - 1.0)
                .collect(),
        )
    }
}

/// Maps each axis of `source_box` affinely onto `[-1, 1]`.
///
/// Returns the mapped points and the factor for scaling radii (taken from the
/// first axis).
pub fn normalize_locations(
    points: &[Vector],
    source_box: &BoundingBox,
) -> Result<(Vec<Vector>, f64)> {
    if let Some(p) = points.iter().find(|p| p.dim() != source_box.dim()) {
        return Err(invalid(format!(
            "point of dimension {} does not match box dimension {}",
            p.dim(),
            source_box.dim()
        )));
    }
    let mapped = points.iter().map(|p| source_box.normalize(p)).collect();
    Ok((mapped, source_box.radius_scale()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn norms() {
        assert_eq!(v(&[3.0, 4.0]).norm(Norm::L2), 5.0);
        assert_eq!(v(&[0.0, 0.0]).norm(Norm::L2), 0.0);
        assert_eq!(v(&[1.0, -2.0]).norm(Norm::LInf), 2.0);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Vector::new(vec![]).is_err());
    }

    #[test]
    fn volumes() {
        assert!((ball_volume(1, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((ball_volume(2, 1.0).unwrap() - PI).abs() < 1e-15);
        // 4/3 pi 2^3 at 40 digits
        assert!((ball_volume(3, 2.0).unwrap() - 33.510_321_638_291_13).abs() < 1e-12);
        assert_eq!(cube_volume(2, 1.0).unwrap(), 4.0);
        assert_eq!(cube_volume(3, 0.5).unwrap(), 1.0);
        assert!((cube_volume(6, 1.2).unwrap() - 191.102_976).abs() < 1e-10);
    }

    #[test]
    fn log_volumes_agree() {
        for d in 1..12 {
            for &r in &[0.1, 0.7, 1.0, 3.5] {
                let direct = ball_volume(d, r).unwrap().ln();
                assert!((direct - log_ball_volume(d, r)).abs() < 1e-12);
                let direct = cube_volume(d, r).unwrap().ln();
                assert!((direct - log_cube_volume(d, r)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn extreme_volume_is_range_error() {
        assert!(matches!(ball_volume(400, 10.0), Err(Error::Range(_))));
        assert!(matches!(cube_volume(2000, 0.01), Err(Error::Range(_))));
        assert!(log_ball_volume(400, 10.0).is_finite());
    }

    #[test]
    fn cube_sample_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let region = Region::new(Shape::Cube, v(&[5.0, 5.0]), 0.1).unwrap();
        for _ in 0..1000 {
            let p = sample_uniform(&region, &mut rng);
            assert!(p.as_slice().iter().all(|c| (4.9..=5.1).contains(c)));
        }
    }

    #[test]
    fn ball_inner_disk_mass() {
        // P(||p|| <= 0.5) = 0.5^2 for the unit disk
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let region = DomainSpec::unit_ball(2).region();
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| sample_uniform(&region, &mut rng).norm(Norm::L2) <= 0.5)
            .count();
        let p = hits as f64 / n as f64;
        assert!((p - 0.25).abs() < 0.002, "{p}");
    }

    #[test]
    fn ball_shell_mass_high_dim() {
        // Mass of the radius-0.9 ball inside the unit ball is 0.9^d.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for d in [3usize, 5, 8] {
            let region = DomainSpec::unit_ball(d).region();
            let n = 200_000;
            let hits = (0..n)
                .filter(|_| sample_uniform(&region, &mut rng).norm(Norm::L2) <= 0.9)
                .count();
            let p = 0.9f64.powi(d as i32);
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((hits as f64 / n as f64 - p).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn normalization_examples() {
        let bx = BoundingBox::square(2, 0.0, 5.0).unwrap();
        let (pts, scale) = normalize_locations(&[v(&[2.5, 2.5])], &bx).unwrap();
        assert_eq!(pts[0], v(&[0.0, 0.0]));
        assert!((1.0 * scale - 0.4).abs() < 1e-15);

        let bx = BoundingBox::square(2, 0.0, 10.0).unwrap();
        let (pts, _) = normalize_locations(&[v(&[10.0, 0.0])], &bx).unwrap();
        assert_eq!(pts[0], v(&[1.0, -1.0]));
    }

    #[test]
    fn degenerate_box_rejected() {
        assert!(BoundingBox::new(vec![0.0, 1.0], vec![5.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn ball_samples_stay_inside(seed in any::<u64>(), d in 1usize..10, r in 0.01f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let center = Vector::new((0..d).map(|i| i as f64 * 0.3).collect()).unwrap();
            let region = Region::new(Shape::Ball, center.clone(), r).unwrap();
            for _ in 0..50 {
                let p = sample_uniform(&region, &mut rng);
                prop_assert!(p.distance(&center) <= r * (1.0 + 1e-12));
            }
        }

        #[test]
        fn ball_volume_scales_as_power(d in 1usize..30, r in 0.05f64..4.0) {
            let ratio = ball_volume(d, r).unwrap() / ball_volume(d, 1.0).unwrap();
            let expect = r.powi(d as i32);
            prop_assert!((ratio / expect - 1.0).abs() < 1e-12);
        }

        #[test]
        fn normalization_preserves_midpoints(
            a in prop::collection::vec(-100.0f64..100.0, 2),
            b in prop::collection::vec(-100.0f64..100.0, 2),
        ) {
            let bx = BoundingBox::new(vec![-100.0, -50.0], vec![100.0, 150.0]).unwrap();
            let pa = Vector::new(a.clone()).unwrap();
            let pb = Vector::new(b.clone()).unwrap();
            let mid = Vector::new(a.iter().zip(&b).map(|(x, y)| (x + y) / 2.0).collect()).unwrap();
            let (m, _) = normalize_locations(&[pa, pb, mid], &bx).unwrap();
            for i in 0..2 {
                prop_assert!(((m[0][i] + m[1][i]) / 2.0 - m[2][i]).abs() < 1e-12);
            }
        }
    }
}
