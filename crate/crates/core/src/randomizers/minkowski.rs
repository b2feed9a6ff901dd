//! Minkowski Response: report a uniform point from a radius-`r` cap around the
//! input with boosted probability, otherwise a uniform point from the
//! `r`-expanded domain.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::geometry::{sample_uniform, DomainSpec, Region, Shape, Vector};

/// Golden-section bracket on `r` in domain-normalized units.
const SEARCH_LO: f64 = 1e-4;
const SEARCH_HI: f64 = 1e3;
const SEARCH_REL_TOL: f64 = 1e-6;
const SEARCH_GRID: usize = 240;

/// `ln(e^x - 1)` without overflow for large `x`.
pub(crate) fn ln_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// Radius `r = 1 / ((e^eps - 1)^{1/(d+2)} - 1)` in unit-domain coordinates.
///
/// Requires `eps > ln 2`; below that the expression is non-positive.
pub fn minkowski_radius_formula(epsilon: f64, d: usize) -> Result<f64> {
    if d == 0 {
        return Err(invalid("dimension must be positive"));
    }
    if !(epsilon > 0.0) || epsilon.is_nan() {
        return Err(invalid("epsilon must be positive"));
    }
    let log_base = ln_expm1(epsilon);
    if !(log_base > 0.0) {
        return Err(Error::InfeasibleRadius { epsilon });
    }
    Ok(1.0 / (log_base / (d + 2) as f64).exp_m1())
}

/// Objective minimized by the radius search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchObjective {
    /// Closed-form upper bound on the worst-case MSE over the domain.
    #[default]
    UpperBound,
    /// Exact analytic MSE maximized over the centre and an extreme boundary point.
    WorstCase,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RadiusMode {
    /// The closed-form radius (requires `eps > ln 2`).
    Formula,
    /// Numerically optimized radius.
    #[default]
    Searched,
    /// A caller-provided radius.
    Fixed(f64),
}

/// Immutable configuration of one Minkowski Response randomizer.
///
/// `radius` is in domain units; the cap always has the domain's shape.
#[derive(Debug, Clone, PartialEq)]
pub struct MinkowskiParams {
    pub epsilon: f64,
    pub domain: DomainSpec,
    pub cap_shape: Shape,
    pub radius: f64,
    pub radius_mode: RadiusMode,
    beta: f64,
}

impl MinkowskiParams {
    pub fn new(epsilon: f64, domain: DomainSpec, mode: RadiusMode) -> Result<Self> {
        Self::with_objective(epsilon, domain, mode, SearchObjective::default())
    }

    pub fn with_objective(
        epsilon: f64,
        domain: DomainSpec,
        mode: RadiusMode,
        objective: SearchObjective,
    ) -> Result<Self> {
        if !(epsilon > 0.0) || epsilon.is_nan() {
            return Err(invalid("epsilon must be positive"));
        }
        let radius = match mode {
            RadiusMode::Formula => minkowski_radius_formula(epsilon, domain.dim)? * domain.scale,
            RadiusMode::Searched => minkowski_search_radius(epsilon, &domain, objective)?,
            RadiusMode::Fixed(r) => r,
        };
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("radius must be positive and finite"));
        }
        Ok(Self {
            epsilon,
            domain,
            cap_shape: domain.shape,
            radius,
            radius_mode: mode,
            beta: cap_probability(epsilon, &domain, radius),
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    /// Probability `beta` of reporting from the cap.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Radius of the output support `Y_r`.
    pub fn support_radius(&self) -> f64 {
        self.domain.scale + self.radius
    }

    pub fn support(&self) -> Region {
        Region {
            shape: self.cap_shape,
            center: Vector::zeros(self.dim()),
            radius: self.support_radius(),
        }
    }

    pub fn cap(&self, x: &Vector) -> Region {
        Region {
            shape: self.cap_shape,
            center: x.clone(),
            radius: self.radius,
        }
    }

    /// `ln(V(Y_r) + V(B_r)(e^eps - 1))`, the log normalizer of the density.
    fn log_normalizer(&self) -> f64 {
        let d = self.dim();
        let log_vy = self.cap_shape.log_volume(d, self.support_radius());
        let log_ratio = d as f64 * (self.radius / self.support_radius()).ln();
        log_vy + softplus(log_ratio + ln_expm1(self.epsilon))
    }

    fn check_input(&self, x: &Vector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(invalid(format!(
                "input dimension {} does not match {}",
                x.dim(),
                self.dim()
            )));
        }
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain);
        }
        Ok(())
    }
}

fn softplus(a: f64) -> f64 {
    if a > 0.0 {
        a + (-a).exp().ln_1p()
    } else {
        a.exp().ln_1p()
    }
}

/// `beta = rho (e^eps - 1) / (1 + rho (e^eps - 1))` with `rho = (r / (s + r))^d`.
fn cap_probability(epsilon: f64, domain: &DomainSpec, radius: f64) -> f64 {
    let log_rho = domain.dim as f64 * (radius / (domain.scale + radius)).ln();
    let a = log_rho + ln_expm1(epsilon);
    1.0 / (1.0 + (-a).exp())
}

pub fn minkowski_sample<R: Rng + ?Sized>(
    x: &Vector,
    params: &MinkowskiParams,
    rng: &mut R,
) -> Result<Vector> {
    params.check_input(x)?;
    let region = if rng.gen::<f64>() < params.beta {
        params.cap(x)
    } else {
        params.support()
    };
    Ok(sample_uniform(&region, rng))
}

/// Output density of `y` given input `x`.
pub fn minkowski_density(x: &Vector, y: &Vector, params: &MinkowskiParams) -> Result<f64> {
    params.check_input(x)?;
    if y.dim() != params.dim() {
        return Err(invalid("output dimension mismatch"));
    }
    if !params.support().contains(y) {
        return Ok(0.0);
    }
    let log_z = params.log_normalizer();
    if params.cap(x).contains(y) {
        Ok((params.epsilon - log_z).exp())
    } else {
        Ok((-log_z).exp())
    }
}

/// Unbiased estimate `y / beta`.
pub fn minkowski_debias(y: &Vector, params: &MinkowskiParams) -> Vector {
    y.scaled(1.0 / params.beta)
}

/// Exact `E ||debias(y) - x||^2` at input `x`.
pub fn minkowski_mse_analytic(x: &Vector, params: &MinkowskiParams) -> Result<f64> {
    params.check_input(x)?;
    Ok(mse_at(x.norm_squared(), params.beta, params))
}

fn mse_at(x_norm_sq: f64, beta: f64, params: &MinkowskiParams) -> f64 {
    let d = params.dim();
    let shape = params.cap_shape;
    let cap_term = x_norm_sq + shape.mean_square_radius(d, params.radius);
    let support_term = shape.mean_square_radius(d, params.support_radius());
    (beta * cap_term + (1.0 - beta) * support_term) / (beta * beta) - x_norm_sq
}

/// Value of `objective` at radius `radius` (domain units).
pub fn search_objective(
    epsilon: f64,
    domain: &DomainSpec,
    radius: f64,
    objective: SearchObjective,
) -> f64 {
    let beta = cap_probability(epsilon, domain, radius);
    let s = domain.scale;
    let r = radius / s;
    let d = domain.dim as f64;
    match objective {
        SearchObjective::UpperBound => {
            let normalized = match domain.shape {
                Shape::Ball => (beta * r * r + (1.0 - beta) * (1.0 + (1.0 + r).powi(2))) / (beta * beta),
                Shape::Cube => {
                    d / (3.0 * beta * beta)
                        * (beta * r * r + (1.0 - beta) * ((1.0 + r).powi(2) + 3.0 * (1.0 - beta)))
                }
            };
            normalized * s * s
        }
        SearchObjective::WorstCase => {
            let params = MinkowskiParams {
                epsilon,
                domain: *domain,
                cap_shape: domain.shape,
                radius,
                radius_mode: RadiusMode::Fixed(radius),
                beta,
            };
            mse_at(0.0, beta, &params).max(mse_at(domain.max_norm_squared(), beta, &params))
        }
    }
}

/// Radius minimizing `objective`.
///
/// A coarse log-spaced grid over `[1e-4, 1e3]` (unit-domain units) brackets the
/// minimum; golden-section search on `ln r` then refines it to relative
/// tolerance `1e-6`.
pub fn minkowski_search_radius(
    epsilon: f64,
    domain: &DomainSpec,
    objective: SearchObjective,
) -> Result<f64> {
    if !(epsilon > 0.0) || epsilon.is_nan() {
        return Err(invalid("epsilon must be positive"));
    }
    let f = |log_r: f64| {
        let v = search_objective(epsilon, domain, log_r.exp() * domain.scale, objective);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let (lo, hi) = (SEARCH_LO.ln(), SEARCH_HI.ln());
    let step = (hi - lo) / SEARCH_GRID as f64;
    let best = (0..=SEARCH_GRID)
        .map(|i| (i, f(lo + step * i as f64)))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let mut a = lo + step * best.0.saturating_sub(1) as f64;
    let mut b = (lo + step * (best.0 + 1) as f64).min(hi);

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut e = a + inv_phi * (b - a);
    let (mut fc, mut fe) = (f(c), f(e));
    while b - a > SEARCH_REL_TOL {
        if fc <= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            fe = f(e);
        }
    }
    Ok(((a + b) / 2.0).exp() * domain.scale)
}
