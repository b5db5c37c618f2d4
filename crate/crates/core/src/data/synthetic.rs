use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::nd::{Label, Tensor2};
use crate::rng::{stream_rng, streams, unit_direction};

pub const SINE_N: usize = 1000;
pub const NOISY_SINE_N: usize = 1024;
pub const NOISY_SINE_DIM: usize = 10;

/// Parameterization of the 2-D sine manifold `(t, amplitude * sin t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineWave {
    pub t_min: f64,
    pub t_max: f64,
    pub amplitude: f64,
}

impl Default for SineWave {
    fn default() -> Self {
        Self {
            t_min: 0.0,
            t_max: 4.0 * PI,
            amplitude: 1.0,
        }
    }
}

impl SineWave {
    fn sample_t<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Uniform::new(self.t_min, self.t_max)
            .expect("t_min < t_max")
            .sample(rng)
    }

    /// Points `(t, a sin t + offset_i)` where `offset_i` alternates `+v, -v`.
    fn rows(&self, n: usize, displacement: f64, seed: u64) -> Vec<[f64; 2]> {
        let mut rng = stream_rng(seed, streams::DATA);
        (0..n)
            .map(|i| {
                let t = self.sample_t(&mut rng);
                let off = if i % 2 == 0 { displacement } else { -displacement };
                [t, self.amplitude * t.sin() + off]
            })
            .collect()
    }

    pub fn positives(&self, n: usize, seed: u64) -> Result<Dataset> {
        check_n(n)?;
        let rows = self.rows(n, 0.0, seed);
        Dataset::new(Tensor2::from_rows(&rows)?, vec![Label::Positive; n])
    }

    pub fn displaced(&self, n: usize, displacement: f64, seed: u64) -> Result<Dataset> {
        check_n(n)?;
        check_displacement(displacement)?;
        let rows = self.rows(n, displacement, seed);
        Dataset::new(Tensor2::from_rows(&rows)?, vec![Label::Negative; n])
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidConfig("generator needs n >= 1".into()));
    }
    Ok(())
}

fn check_displacement(v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::InvalidConfig(format!("displacement must be >= 0, got {v}")));
    }
    Ok(())
}

/// `n` points `(t, sin t)` with `t ~ U[0, 4 pi]`, all labeled positive.
pub fn gen_sine2d(n: usize, seed: u64) -> Result<Dataset> {
    SineWave::default().positives(n, seed)
}

/// Sine wave shifted vertically by `+v` (even rows) and `-v` (odd rows), labeled negative.
pub fn gen_sine_displaced(n: usize, displacement: f64, seed: u64) -> Result<Dataset> {
    SineWave::default().displaced(n, displacement, seed)
}

fn noisy_sine(n: usize, displacement: f64, seed: u64, label: Label) -> Result<Dataset> {
    check_n(n)?;
    check_displacement(displacement)?;
    let head = SineWave::default().rows(n, displacement, seed);
    // noise coordinates come from their own stream so the first two columns
    // match the 2-D generator for the same seed
    let mut rng = stream_rng(seed, streams::DATA + 100);
    let mut data = Vec::with_capacity(n * NOISY_SINE_DIM);
    for h in head {
        data.extend_from_slice(&h);
        data.extend((2..NOISY_SINE_DIM).map(|_| rng.sample::<f64, _>(StandardNormal)));
    }
    Dataset::new(Tensor2::from_vec(n, NOISY_SINE_DIM, data)?, vec![label; n])
}

/// 10-D data: coordinates 1-2 on the sine wave, 3-10 i.i.d. standard normal; positive.
pub fn gen_noisy_sine10d(n: usize, seed: u64) -> Result<Dataset> {
    noisy_sine(n, 0.0, seed, Label::Positive)
}

/// Companion negatives: coordinate 2 displaced by `±v`, noise coordinates as above.
pub fn gen_noisy_sine10d_displaced(n: usize, displacement: f64, seed: u64) -> Result<Dataset> {
    noisy_sine(n, displacement, seed, Label::Negative)
}

/// Uniform samples from the volume of the unit ball in `R^d`, positive.
pub fn gen_ball(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    check_n(n)?;
    if d == 0 {
        return Err(Error::InvalidConfig("ball dimension must be >= 1".into()));
    }
    let mut rng = stream_rng(seed, streams::DATA);
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let dir = unit_direction(d, &mut rng);
        let u: f64 = rng.random();
        let rho = u.powf(1.0 / d as f64);
        data.extend(dir.into_iter().map(|v| v * rho));
    }
    Dataset::new(Tensor2::from_vec(n, d, data)?, vec![Label::Positive; n])
}

/// Uniform samples on the sphere of radius `rho` in `R^d`, negative.
pub fn gen_sphere_surface(n: usize, d: usize, rho: f64, seed: u64) -> Result<Dataset> {
    check_n(n)?;
    if d == 0 {
        return Err(Error::InvalidConfig("sphere dimension must be >= 1".into()));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidConfig(format!("sphere radius must be > 0, got {rho}")));
    }
    let mut rng = stream_rng(seed, streams::DATA);
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        data.extend(unit_direction(d, &mut rng).into_iter().map(|v| v * rho));
    }
    Dataset::new(Tensor2::from_vec(n, d, data)?, vec![Label::Negative; n])
}

/// Declarative description of a synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Sine2d { n: usize },
    SineDisplaced { n: usize, displacement: f64 },
    NoisySine10d { n: usize },
    NoisySine10dDisplaced { n: usize, displacement: f64 },
    Ball { n: usize, dim: usize },
    SphereSurface { n: usize, dim: usize, radius: f64 },
}

impl GeneratorSpec {
    pub fn generate(&self, seed: u64) -> Result<Dataset> {
        match *self {
            GeneratorSpec::Sine2d { n } => gen_sine2d(n, seed),
            GeneratorSpec::SineDisplaced { n, displacement } => gen_sine_displaced(n, displacement, seed),
            GeneratorSpec::NoisySine10d { n } => gen_noisy_sine10d(n, seed),
            GeneratorSpec::NoisySine10dDisplaced { n, displacement } => {
                gen_noisy_sine10d_displaced(n, displacement, seed)
            }
            GeneratorSpec::Ball { n, dim } => gen_ball(n, dim, seed),
            GeneratorSpec::SphereSurface { n, dim, radius } => gen_sphere_surface(n, dim, radius, seed),
        }
    }
}
