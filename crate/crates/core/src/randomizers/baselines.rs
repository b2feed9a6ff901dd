//! Baseline local randomizers: vector Laplace, planar Laplace, and the
//! per-dimension SquareWave and Staircase mechanisms.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::error::{invalid, Error, Result};
use crate::geometry::{DomainSpec, Shape, Vector};

const PLANAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    Laplace,
    PlanarLaplace,
    SquareWave,
    Staircase,
}

/// Immutable configuration of one baseline randomizer.
///
/// `sensitivity` is the l1 replacement sensitivity used by Laplace; the other
/// mechanisms derive their scale from `domain`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineParams {
    pub mechanism: BaselineKind,
    pub epsilon: f64,
    pub domain: DomainSpec,
    pub sensitivity: f64,
}

impl BaselineParams {
    /// Defaults: Laplace sensitivity is the l1 diameter `2 d s` of the cube of half side `s`.
    pub fn new(mechanism: BaselineKind, epsilon: f64, domain: DomainSpec) -> Result<Self> {
        if !(epsilon > 0.0) || epsilon.is_nan() {
            return Err(invalid("epsilon must be positive"));
        }
        if mechanism == BaselineKind::PlanarLaplace && domain.dim != 2 {
            return Err(Error::Unsupported(format!(
                "planar Laplace needs dimension 2, got {}",
                domain.dim
            )));
        }
        Ok(Self {
            mechanism,
            epsilon,
            domain,
            sensitivity: 2.0 * domain.dim as f64 * domain.scale,
        })
    }

    pub fn with_sensitivity(mut self, sensitivity: f64) -> Result<Self> {
        if !(sensitivity > 0.0 && sensitivity.is_finite()) {
            return Err(invalid("sensitivity must be positive and finite"));
        }
        self.sensitivity = sensitivity;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    /// Per-dimension budget for the coordinate-wise mechanisms.
    pub fn per_dim_epsilon(&self) -> f64 {
        self.epsilon / self.dim() as f64
    }

    /// Geo-indistinguishability parameter: `eps` divided by the l2 diameter of the domain.
    pub fn geo_epsilon(&self) -> f64 {
        let diameter = match self.domain.shape {
            Shape::Ball => 2.0 * self.domain.scale,
            Shape::Cube => 2.0 * SQRT_2 * self.domain.scale,
        };
        self.epsilon / diameter
    }
}

/// Output `(raw, debiased)` of a baseline on input `x`.
pub(crate) fn sample<R: Rng + ?Sized>(
    x: &Vector,
    params: &BaselineParams,
    rng: &mut R,
) -> Result<(Vector, Vector)> {
    if x.dim() != params.dim() {
        return Err(invalid("input dimension mismatch"));
    }
    let s = params.domain.scale;
    match params.mechanism {
        BaselineKind::Laplace => {
            let b = params.sensitivity / params.epsilon;
            let out: Vec<f64> = x.as_slice().iter().map(|c| c + laplace(b, rng)).collect();
            let v = Vector::from_raw(out);
            Ok((v.clone(), v))
        }
        BaselineKind::PlanarLaplace => {
            let eg = params.geo_epsilon();
            let theta = rng.gen_range(0.0..2.0 * PI);
            let radius = planar_radius(eg, rng.gen());
            let v = Vector::from_raw(vec![x[0] + radius * theta.cos(), x[1] + radius * theta.sin()]);
            Ok((v.clone(), v))
        }
        BaselineKind::SquareWave => {
            let sw = SquareWave::new(params.per_dim_epsilon());
            let mut raw = Vec::with_capacity(x.dim());
            let mut est = Vec::with_capacity(x.dim());
            for &c in x.as_slice() {
                let v = ((c + s) / (2.0 * s)).clamp(0.0, 1.0);
                let t = sw.sample(v, rng);
                raw.push(t);
                est.push(2.0 * s * sw.debias(t) - s);
            }
            Ok((Vector::from_raw(raw), Vector::from_raw(est)))
        }
        BaselineKind::Staircase => {
            let st = Staircase::new(params.per_dim_epsilon(), 2.0 * s);
            let out: Vec<f64> = x.as_slice().iter().map(|c| c + st.noise(rng)).collect();
            let v = Vector::from_raw(out);
            Ok((v.clone(), v))
        }
    }
}

/// Unbiased estimate from a raw output; the identity for additive mechanisms.
pub(crate) fn debias(raw: &Vector, params: &BaselineParams) -> Vector {
    match params.mechanism {
        BaselineKind::SquareWave => {
            let s = params.domain.scale;
            let sw = SquareWave::new(params.per_dim_epsilon());
            Vector::from_raw(raw.as_slice().iter().map(|&t| 2.0 * s * sw.debias(t) - s).collect())
        }
        _ => raw.clone(),
    }
}

fn laplace<R: Rng + ?Sized>(b: f64, rng: &mut R) -> f64 {
    let mut u: f64 = rng.gen::<f64>() - 0.5;
    while u == -0.5 {
        u = rng.gen::<f64>() - 0.5;
    }
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Inverts `C(r) = 1 - (1 + a r) e^{-a r}` by bisection.
pub fn planar_radius(a: f64, u: f64) -> f64 {
    let cdf = |r: f64| 1.0 - (1.0 + a * r) * (-a * r).exp();
    let mut hi = 1.0 / a;
    while cdf(hi) < u && hi < f64::MAX / 4.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > PLANAR_TOL {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// SquareWave on `[0, 1]` with output range `[-b, 1 + b]`.
#[derive(Debug, Clone, Copy)]
struct SquareWave {
    b: f64,
    /// Output density within `b` of the input.
    p: f64,
    /// Output density elsewhere; `p / q = e^eps`.
    q: f64,
}

impl SquareWave {
    fn new(eps: f64) -> Self {
        let em = (-eps).exp();
        // b = (eps e^eps - e^eps + 1) / (2 e^eps (e^eps - 1 - eps))
        let b = if eps < 1e-5 {
            // series limit as eps -> 0
            0.5 - eps / 3.0
        } else {
            (eps - 1.0 + em) / (2.0 * (eps.exp_m1() - eps))
        };
        let denom = 2.0 * b + em;
        Self { b, p: 1.0 / denom, q: em / denom }
    }

    fn sample<R: Rng + ?Sized>(&self, v: f64, rng: &mut R) -> f64 {
        let b = self.b;
        if b == 0.0 {
            return v;
        }
        if rng.gen::<f64>() < 2.0 * b * self.p {
            v + rng.gen_range(-b..=b)
        } else {
            let u: f64 = rng.gen();
            if u < v {
                -b + u
            } else {
                v + b + (u - v)
            }
        }
    }

    fn debias(&self, t: f64) -> f64 {
        let b = self.b;
        if b == 0.0 {
            return t;
        }
        (t - self.q * (1.0 + 2.0 * b) / 2.0) / (2.0 * b * (self.p - self.q))
    }
}

/// Additive Staircase noise with sensitivity `delta` and the MSE-optimal `gamma`.
#[derive(Debug, Clone, Copy)]
struct Staircase {
    delta: f64,
    b: f64,
    gamma: f64,
}

impl Staircase {
    fn new(eps: f64, delta: f64) -> Self {
        let b = (-eps).exp();
        let gamma = -b / (1.0 - b)
            + (b - 2.0 * b * b + 2.0 * b.powi(4) - b.powi(5)).cbrt()
                / (2f64.cbrt() * (1.0 - b).powi(2));
        Self { delta, b, gamma }
    }

    fn noise<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (b, g) = (self.b, self.gamma);
        if b == 0.0 {
            return 0.0;
        }
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let geo = Geometric::new(1.0 - b).expect("geometric parameter in (0, 1]");
        let k = geo.sample(rng) as f64;
        let u: f64 = rng.gen();
        let p_outer = (1.0 - g) * b / (g + (1.0 - g) * b);
        let mag = if rng.gen::<f64>() < p_outer {
            k + g + (1.0 - g) * u
        } else {
            k + g * u
        };
        sign * mag * self.delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn planar_radius_inverts_cdf() {
        for &a in &[0.1, 0.35, 2.0] {
            for &u in &[0.01, 0.5, 0.99, 0.999_999] {
                let r = planar_radius(a, u);
                let c = 1.0 - (1.0 + a * r) * (-a * r).exp();
                assert!((c - u).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn planar_rejects_other_dims() {
        let r = BaselineParams::new(BaselineKind::PlanarLaplace, 1.0, DomainSpec::unit_cube(3));
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn square_wave_debias_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &eps in &[0.5, 1.0, 3.0] {
            let sw = SquareWave::new(eps);
            for &v in &[0.0, 0.3, 1.0] {
                let n = 200_000;
                let mean: f64 = (0..n).map(|_| sw.debias(sw.sample(v, &mut rng))).sum::<f64>() / n as f64;
                assert!((mean - v).abs() < 0.03, "eps={eps} v={v} mean={mean}");
            }
        }
    }

    #[test]
    fn square_wave_density_ratio() {
        // output density is p inside the wave and q elsewhere, ratio e^eps
        for &eps in &[0.2, 1.0, 4.0] {
            let sw = SquareWave::new(eps);
            assert!((sw.p / sw.q / eps.exp() - 1.0).abs() < 1e-12);
            // total mass: 2b p + (1) q = 1
            assert!((2.0 * sw.b * sw.p + sw.q - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn staircase_noise_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let st = Staircase::new(1.0, 2.0);
        let n = 400_000;
        let mean: f64 = (0..n).map(|_| st.noise(&mut rng)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "{mean}");
    }

    #[test]
    fn large_epsilon_is_noiseless() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Vector::new(vec![0.25, -0.75]).unwrap();
        for kind in [
            BaselineKind::Laplace,
            BaselineKind::PlanarLaplace,
            BaselineKind::SquareWave,
            BaselineKind::Staircase,
        ] {
            let p = BaselineParams::new(kind, 1e4, DomainSpec::unit_cube(2)).unwrap();
            let (_, est) = sample(&x, &p, &mut rng).unwrap();
            assert!(est.distance(&x) < 1e-2, "{kind:?}: {est:?}");
        }
    }
}
