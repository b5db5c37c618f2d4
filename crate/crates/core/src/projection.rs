//! Projection onto the annulus `{ r <= ||u - x|| <= gamma * r }` around a training point.
//!
//! Two metrics are supported:
//!
//! - Euclidean, solved in closed form by radial rescaling of `z - x`.
//! - Diagonal Mahalanobis, `||v||_S^2 = sum_j sigma_j v_j^2`. The KKT conditions give
//!   `u = x + (I + tau * S)^{-1} (z - x)` for a scalar multiplier, which is located by a grid
//!   search over the admissible interval and then refined by bisection onto the active
//!   boundary.
//!
//! Functions with a `_displacement` suffix work on `h = z - x` in place; that is the form the
//! trainers use.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::nd::l2_norm;
use crate::rng::unit_direction;

/// Default number of grid points per multiplier interval.
pub const DEFAULT_GRID_POINTS: usize = 256;
/// The tau grid stops this (relative) distance short of the pole at `-1 / max sigma`.
pub const POLE_MARGIN: f64 = 1e-9;
/// Smallest admissible influence weight.
pub const SIGMA_FLOOR: f64 = 1e-6;

const BISECTION_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanAnnulus {
    center: Vec<f64>,
    radius: f64,
    gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MahalanobisAnnulus {
    center: Vec<f64>,
    radius: f64,
    gamma: f64,
    sigma: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveConstraint {
    None,
    Inner,
    Outer,
}

/// KKT multiplier of the active constraint.
///
/// `Tau` belongs to the inner constraint (`tau <= 0`), `Nu = 1 / tau` to the outer one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Multiplier {
    Tau(f64),
    Nu(f64),
}

impl Multiplier {
    /// The multiplier in `tau` form, so that `(u - z) + tau * S (u - x) = 0`.
    pub fn tau(self) -> f64 {
        match self {
            Multiplier::Tau(t) => t,
            Multiplier::Nu(nu) => 1.0 / nu,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub point: Vec<f64>,
    pub active: ActiveConstraint,
    pub multiplier: Option<Multiplier>,
}

fn check_radii(radius: f64, gamma: f64) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidConfig(format!("radius must be > 0, got {radius}")));
    }
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(Error::InvalidConfig(format!("gamma must be >= 1, got {gamma}")));
    }
    Ok(())
}

impl EuclideanAnnulus {
    pub fn new(center: Vec<f64>, radius: f64, gamma: f64) -> Result<Self> {
        check_radii(radius, gamma)?;
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("annulus center"));
        }
        Ok(Self {
            center,
            radius,
            gamma,
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        let d: Vec<f64> = u.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let n = l2_norm(&d);
        n >= self.radius - tol && n <= self.gamma * self.radius + tol
    }
}

impl MahalanobisAnnulus {
    pub fn new(center: Vec<f64>, radius: f64, gamma: f64, sigma: Vec<f64>) -> Result<Self> {
        check_radii(radius, gamma)?;
        if sigma.len() != center.len() {
            return Err(Error::ShapeMismatch {
                context: "MahalanobisAnnulus sigma",
                expected: center.len(),
                found: sigma.len(),
            });
        }
        if sigma.iter().any(|&s| !(s >= SIGMA_FLOOR && s.is_finite())) {
            return Err(Error::InvalidConfig(format!(
                "sigma weights must be finite and >= {SIGMA_FLOOR}"
            )));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("annulus center"));
        }
        Ok(Self {
            center,
            radius,
            gamma,
            sigma,
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        let d: Vec<f64> = u.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let n = mahalanobis_norm(&d, &self.sigma);
        n >= self.radius - tol && n <= self.gamma * self.radius + tol
    }
}

/// `sqrt(sum_j sigma_j v_j^2)`.
pub fn mahalanobis_norm(v: &[f64], sigma: &[f64]) -> f64 {
    v.iter()
        .zip(sigma)
        .map(|(x, s)| s * x * x)
        .sum::<f64>()
        .sqrt()
}

fn check_point(z: &[f64], center: &[f64]) -> Result<()> {
    if z.len() != center.len() {
        return Err(Error::ShapeMismatch {
            context: "projection input",
            expected: center.len(),
            found: z.len(),
        });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("projection input"));
    }
    Ok(())
}

/// Euclidean projection of `z` onto the annulus.
///
/// `u = x + alpha (z - x)` with `alpha = r / beta` when `beta < r`, `gamma r / beta` when
/// `beta > gamma r`, and 1 otherwise (`beta = ||z - x||`). When `z == x` the direction is
/// drawn from `rng`.
pub fn project_euclidean<R: Rng + ?Sized>(
    z: &[f64],
    ann: &EuclideanAnnulus,
    rng: &mut R,
) -> Result<ProjectionResult> {
    check_point(z, &ann.center)?;
    let mut h: Vec<f64> = z.iter().zip(&ann.center).map(|(a, b)| a - b).collect();
    let (active, multiplier) = project_displacement(&mut h, ann.radius, ann.gamma, rng);
    let point = if active == ActiveConstraint::None {
        z.to_vec()
    } else {
        ann.center.iter().zip(&h).map(|(c, v)| c + v).collect()
    };
    Ok(ProjectionResult {
        point,
        active,
        multiplier,
    })
}

/// Rescales `h` in place so that `r <= ||h|| <= gamma r`.
///
/// A zero `h` is replaced by a random unit direction scaled to `r`.
pub fn project_displacement<R: Rng + ?Sized>(
    h: &mut [f64],
    radius: f64,
    gamma: f64,
    rng: &mut R,
) -> (ActiveConstraint, Option<Multiplier>) {
    let norm = l2_norm(h);
    if !(norm > 0.0) {
        let dir = unit_direction(h.len(), rng);
        for (v, u) in h.iter_mut().zip(dir) {
            *v = u * radius;
        }
        return (ActiveConstraint::Inner, None);
    }
    let outer = gamma * radius;
    if norm < radius {
        let alpha = radius / norm;
        h.iter_mut().for_each(|v| *v *= alpha);
        (ActiveConstraint::Inner, Some(Multiplier::Tau(1.0 / alpha - 1.0)))
    } else if norm > outer {
        let alpha = outer / norm;
        h.iter_mut().for_each(|v| *v *= alpha);
        (ActiveConstraint::Outer, Some(Multiplier::Nu(alpha / (1.0 - alpha))))
    } else {
        (ActiveConstraint::None, None)
    }
}

/// Diagonal-Mahalanobis projection of `z` onto the annulus.
pub fn project_mahalanobis<R: Rng + ?Sized>(
    z: &[f64],
    ann: &MahalanobisAnnulus,
    grid_points: usize,
    rng: &mut R,
) -> Result<ProjectionResult> {
    check_point(z, &ann.center)?;
    let mut h: Vec<f64> = z.iter().zip(&ann.center).map(|(a, b)| a - b).collect();
    let (active, multiplier) =
        project_displacement_mahalanobis(&mut h, &ann.sigma, ann.radius, ann.gamma, grid_points, rng);
    let point = if active == ActiveConstraint::None {
        z.to_vec()
    } else {
        ann.center.iter().zip(&h).map(|(c, v)| c + v).collect()
    };
    Ok(ProjectionResult {
        point,
        active,
        multiplier,
    })
}

/// In-place Mahalanobis projection of the displacement `h`.
///
/// `sigma` must have the length of `h` with every entry `>= SIGMA_FLOOR` (callers enforce
/// this). With all weights equal the problem is isotropic and the Euclidean closed form is
/// used at radius `r / sqrt(sigma)`.
pub fn project_displacement_mahalanobis<R: Rng + ?Sized>(
    h: &mut [f64],
    sigma: &[f64],
    radius: f64,
    gamma: f64,
    grid_points: usize,
    rng: &mut R,
) -> (ActiveConstraint, Option<Multiplier>) {
    debug_assert_eq!(h.len(), sigma.len());
    let grid_points = grid_points.max(2);

    if let Some(&c) = sigma.first() {
        if sigma.iter().all(|&s| s == c) {
            let (active, mult) = project_displacement(h, radius / c.sqrt(), gamma, rng);
            let mult = mult.map(|m| match m {
                Multiplier::Tau(t) => Multiplier::Tau(t / c),
                Multiplier::Nu(nu) => Multiplier::Nu(nu * c),
            });
            return (active, mult);
        }
    }

    let norm = mahalanobis_norm(h, sigma);
    if !(norm > 0.0) {
        let dir = unit_direction(h.len(), rng);
        let scale = radius / mahalanobis_norm(&dir, sigma);
        for (v, u) in h.iter_mut().zip(dir) {
            *v = u * scale;
        }
        return (ActiveConstraint::Inner, None);
    }
    let outer = gamma * radius;
    if norm >= radius && norm <= outer {
        return (ActiveConstraint::None, None);
    }

    let delta = h.to_vec();
    let smax = sigma.iter().cloned().fold(f64::MIN, f64::max);

    let found = if norm < radius {
        inner_multiplier(&delta, sigma, radius, smax, grid_points).map(|tau| {
            for ((v, &d), &s) in h.iter_mut().zip(&delta).zip(sigma) {
                *v = d / (1.0 + tau * s);
            }
            (ActiveConstraint::Inner, Multiplier::Tau(tau))
        })
    } else {
        let alpha = outer / norm;
        let nu_max = alpha / (1.0 - alpha) * smax;
        outer_multiplier(&delta, sigma, outer, nu_max, grid_points).map(|nu| {
            for ((v, &d), &s) in h.iter_mut().zip(&delta).zip(sigma) {
                *v = d * nu / (nu + s);
            }
            (ActiveConstraint::Outer, Multiplier::Nu(nu))
        })
    };

    match found {
        Some((active, m)) => (active, Some(m)),
        None => {
            // no admissible multiplier on the grid: radial rescale onto the violated boundary
            let (target, active) = if norm < radius {
                (radius, ActiveConstraint::Inner)
            } else {
                (outer, ActiveConstraint::Outer)
            };
            let s = target / norm;
            h.iter_mut().for_each(|v| *v *= s);
            (active, None)
        }
    }
}

/// `sum_j sigma_j delta_j^2 / (1 + tau sigma_j)^2`, the squared Sigma-norm of the candidate.
fn inner_constraint(delta: &[f64], sigma: &[f64], tau: f64) -> f64 {
    delta
        .iter()
        .zip(sigma)
        .map(|(&d, &s)| {
            let q = 1.0 + tau * s;
            s * d * d / (q * q)
        })
        .sum()
}

/// `sum_j delta_j^2 tau^2 sigma_j^2 / (1 + tau sigma_j)^2`, the squared distance to `z`.
fn inner_objective(delta: &[f64], sigma: &[f64], tau: f64) -> f64 {
    delta
        .iter()
        .zip(sigma)
        .map(|(&d, &s)| {
            let t = tau * s / (1.0 + tau * s);
            d * d * t * t
        })
        .sum()
}

fn outer_constraint(delta: &[f64], sigma: &[f64], nu: f64) -> f64 {
    delta
        .iter()
        .zip(sigma)
        .map(|(&d, &s)| {
            let t = nu / (nu + s);
            s * d * d * t * t
        })
        .sum()
}

fn outer_objective(delta: &[f64], sigma: &[f64], nu: f64) -> f64 {
    delta
        .iter()
        .zip(sigma)
        .map(|(&d, &s)| {
            let t = s / (nu + s);
            d * d * t * t
        })
        .sum()
}

/// Grid points for `tau` in `[-(1 - POLE_MARGIN) / smax, 0]`, increasing, geometrically
/// dense near the pole.
fn tau_grid(smax: f64, n: usize) -> impl Iterator<Item = f64> {
    let lo = POLE_MARGIN.log10();
    (0..n).map(move |k| {
        let frac = k as f64 / (n - 1) as f64;
        let eps = 10f64.powf(lo * (1.0 - frac));
        if k + 1 == n {
            0.0
        } else {
            -(1.0 - eps) / smax
        }
    })
}

fn inner_multiplier(delta: &[f64], sigma: &[f64], radius: f64, smax: f64, n: usize) -> Option<f64> {
    let r2 = radius * radius;
    let grid: Vec<f64> = tau_grid(smax, n).collect();
    let mut best: Option<(usize, f64)> = None;
    for (k, &tau) in grid.iter().enumerate() {
        if inner_constraint(delta, sigma, tau) >= r2 {
            let obj = inner_objective(delta, sigma, tau);
            // later grid points have smaller |tau|; `<=` breaks ties toward them
            if best.is_none_or(|(_, b)| obj <= b) {
                best = Some((k, obj));
            }
        }
    }
    let (k, obj) = best?;
    let mut lo = grid[k];
    if let Some(&hi0) = grid.get(k + 1) {
        if inner_constraint(delta, sigma, hi0) < r2 {
            let mut hi = hi0;
            for _ in 0..BISECTION_ITERS {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                if inner_constraint(delta, sigma, mid) >= r2 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
    }
    if inner_objective(delta, sigma, lo) <= obj {
        Some(lo)
    } else {
        Some(grid[k])
    }
}

fn outer_multiplier(delta: &[f64], sigma: &[f64], outer: f64, nu_max: f64, n: usize) -> Option<f64> {
    if !nu_max.is_finite() {
        return None;
    }
    let r2 = outer * outer;
    let grid: Vec<f64> = (0..n).map(|k| nu_max * k as f64 / (n - 1) as f64).collect();
    let mut best: Option<(usize, f64)> = None;
    for (k, &nu) in grid.iter().enumerate() {
        if outer_constraint(delta, sigma, nu) <= r2 {
            let obj = outer_objective(delta, sigma, nu);
            // strict: ties stay with the smaller multiplier
            if best.is_none_or(|(_, b)| obj < b) {
                best = Some((k, obj));
            }
        }
    }
    let (k, obj) = best?;
    let mut lo = grid[k];
    if let Some(&hi0) = grid.get(k + 1) {
        if outer_constraint(delta, sigma, hi0) > r2 {
            let mut hi = hi0;
            for _ in 0..BISECTION_ITERS {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                if outer_constraint(delta, sigma, mid) <= r2 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
    }
    if outer_objective(delta, sigma, lo) <= obj {
        Some(lo)
    } else {
        Some(grid[k])
    }
}

/// Draws a point uniformly from the volume of the Euclidean annulus.
///
/// The radius is sampled by inverting `F(rho) = (rho^d - r^d) / ((gamma r)^d - r^d)`, written
/// as `rho = gamma r (u + (1 - u) gamma^-d)^(1/d)` to stay finite in high dimension.
pub fn sample_uniform_annulus<R: Rng + ?Sized>(ann: &EuclideanAnnulus, rng: &mut R) -> Vec<f64> {
    let mut h = vec![0.0; ann.center.len()];
    sample_uniform_displacement(&mut h, ann.radius, ann.gamma, rng);
    ann.center.iter().zip(h).map(|(c, v)| c + v).collect()
}

/// Fills `h` with a displacement uniformly distributed in the annulus around the origin.
pub fn sample_uniform_displacement<R: Rng + ?Sized>(h: &mut [f64], radius: f64, gamma: f64, rng: &mut R) {
    let d = h.len() as f64;
    let dir = unit_direction(h.len(), rng);
    let u: f64 = Uniform::new(0.0, 1.0).expect("valid range").sample(rng);
    let rho = gamma * radius * (u + (1.0 - u) * gamma.powf(-d)).powf(1.0 / d);
    let rho = rho.clamp(radius, gamma * radius);
    for (v, w) in h.iter_mut().zip(dir) {
        *v = w * rho;
    }
}
