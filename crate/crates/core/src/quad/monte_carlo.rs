use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::Estimate;
use crate::error::{Error, Result};

pub const DEFAULT_MC_SAMPLES: u64 = 1_000_000;
const CHUNK: u64 = 4096;
const SIGMA_MULTIPLIER: f64 = 3.0;

/// Importance densities for [`integrate_mc`].
#[derive(Clone, Debug, PartialEq)]
pub enum Sampler {
    /// Uniform on the unit cube [0, 1)^dim.
    UnitCube { dim: usize },
    /// Independent normals with standard deviation `scale`.
    Gaussian { dim: usize, scale: f64 },
    /// Product over 3-vectors of the density (π²γ³)⁻¹(1+|x|²/γ²)⁻², γ = `scale`.
    Cauchy3 { vectors: usize, scale: f64 },
    /// Uniform in a ball of the given radius in ℝ³.
    Ball3 { radius: f64 },
    /// Concatenation of independent blocks.
    Product(Vec<Sampler>),
}

impl Sampler {
    pub fn dim(&self) -> usize {
        match self {
            Sampler::UnitCube { dim } | Sampler::Gaussian { dim, .. } => *dim,
            Sampler::Cauchy3 { vectors, .. } => 3 * vectors,
            Sampler::Ball3 { .. } => 3,
            Sampler::Product(parts) => parts.iter().map(Sampler::dim).sum(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Sampler::Gaussian { scale, .. } | Sampler::Cauchy3 { scale, .. } if !(*scale > 0.0) => {
                Err(Error::Config(format!("sampler scale must be positive, got {scale}")))
            }
            Sampler::Ball3 { radius } if !(*radius > 0.0) => {
                Err(Error::Config(format!("ball radius must be positive, got {radius}")))
            }
            Sampler::Product(parts) => parts.iter().try_for_each(Sampler::validate),
            _ => Ok(()),
        }
    }

    /// Draw one point into `out` and return its density.
    fn draw<R: Rng>(&self, rng: &mut R, out: &mut [f64]) -> f64 {
        match self {
            Sampler::UnitCube { .. } => {
                out.iter_mut().for_each(|x| *x = rng.random::<f64>());
                1.0
            }
            Sampler::Gaussian { scale, .. } => {
                let mut q = 0.0;
                for x in out.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    q += z * z;
                    *x = scale * z;
                }
                let d = out.len() as f64;
                (-0.5 * q).exp() / (2.0 * PI * scale * scale).powf(0.5 * d)
            }
            Sampler::Cauchy3 { scale, .. } => {
                let mut density = 1.0;
                for v in out.chunks_exact_mut(3) {
                    let w: f64 = rng.sample::<f64, _>(StandardNormal).abs();
                    let mut r2 = 0.0;
                    for x in v.iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *x = scale * z / w;
                        r2 += *x * *x;
                    }
                    density *= cauchy3_density(r2, *scale);
                }
                density
            }
            Sampler::Ball3 { radius } => {
                loop {
                    let mut r2 = 0.0;
                    for x in out.iter_mut() {
                        *x = radius * (2.0 * rng.random::<f64>() - 1.0);
                        r2 += *x * *x;
                    }
                    if r2 <= radius * radius {
                        break;
                    }
                }
                3.0 / (4.0 * PI * radius.powi(3))
            }
            Sampler::Product(parts) => {
                let mut density = 1.0;
                let mut offset = 0;
                for p in parts {
                    let d = p.dim();
                    density *= p.draw(rng, &mut out[offset..offset + d]);
                    offset += d;
                }
                density
            }
        }
    }
}

/// Density of the 3D Cauchy-type sampler at squared radius `r2`.
pub(crate) fn cauchy3_density(r2: f64, scale: f64) -> f64 {
    let u = 1.0 + r2 / (scale * scale);
    1.0 / (PI * PI * scale.powi(3) * u * u)
}

#[derive(Clone, Copy)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    const EMPTY: Moments = Moments {
        count: 0.0,
        mean: 0.0,
        m2: 0.0,
    };

    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.count == 0.0 {
            return o;
        }
        let count = self.count + o.count;
        let d = o.mean - self.mean;
        Moments {
            count,
            mean: self.mean + d * o.count / count,
            m2: self.m2 + o.m2 + d * d * self.count * o.count / count,
        }
    }
}

/// Importance-sampled Monte-Carlo estimate of ∫ f over ℝ^dim.
///
/// Chunk `c` of the sample stream uses ChaCha8 stream `c` of `seed`, and the
/// chunk statistics are reduced in order, so the result is bit-identical for
/// any thread count. The error is three standard errors.
pub fn integrate_mc<F>(f: F, dim: usize, sampler: &Sampler, samples: u64, seed: u64) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let out = integrate_mc_many(|x, v| v[0] = f(x), 1, dim, sampler, samples, seed)?;
    Ok(out[0])
}

/// Several integrands sharing the same sample points (common random numbers).
///
/// `f(x, values)` fills one value per integrand.
pub fn integrate_mc_many<F>(
    f: F,
    outputs: usize,
    dim: usize,
    sampler: &Sampler,
    samples: u64,
    seed: u64,
) -> Result<Vec<Estimate>>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    sampler.validate()?;
    if sampler.dim() != dim {
        return Err(Error::Config(format!(
            "sampler dimension {} does not match integrand dimension {dim}",
            sampler.dim()
        )));
    }
    if samples < 2 {
        return Err(Error::Config("Monte-Carlo needs at least two samples".into()));
    }
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<Result<Vec<Moments>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let n = CHUNK.min(samples - c * CHUNK);
            let mut x = vec![0.0; dim];
            let mut vals = vec![0.0; outputs];
            let mut acc = vec![Moments::EMPTY; outputs];
            for _ in 0..n {
                let density = sampler.draw(&mut rng, &mut x);
                f(&x, &mut vals);
                for (a, v) in acc.iter_mut().zip(&vals) {
                    let w = v / density;
                    if !w.is_finite() {
                        return Err(Error::NonFiniteSample { point: x.clone() });
                    }
                    a.push(w);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![Moments::EMPTY; outputs];
    for p in partial {
        for (t, m) in total.iter_mut().zip(p?) {
            *t = t.merge(m);
        }
    }
    total
        .into_iter()
        .map(|m| {
            let var = m.m2 / (m.count - 1.0);
            let stderr = (var / m.count).sqrt();
            if !stderr.is_finite() {
                return Err(Error::Domain(
                    "Monte-Carlo variance overflow; increase the sample count".into(),
                ));
            }
            Ok(Estimate::monte_carlo(
                m.mean,
                SIGMA_MULTIPLIER * stderr,
                samples,
                SIGMA_MULTIPLIER,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_sampler_integrates_density_exactly() {
        for s in [
            Sampler::Gaussian { dim: 3, scale: 0.7 },
            Sampler::Cauchy3 { vectors: 2, scale: 1.3 },
            Sampler::Ball3 { radius: 2.0 },
        ] {
            let d = s.dim();
            let s2 = s.clone();
            // f equal to the density itself: every weight is 1.
            let e = integrate_mc(
                move |x| match &s2 {
                    Sampler::Gaussian { scale, .. } => {
                        let q: f64 = x.iter().map(|v| v * v).sum();
                        (-0.5 * q / (scale * scale)).exp() / (2.0 * PI * scale * scale).powf(1.5)
                    }
                    Sampler::Cauchy3 { scale, .. } => x
                        .chunks(3)
                        .map(|v| cauchy3_density(v.iter().map(|a| a * a).sum(), *scale))
                        .product(),
                    Sampler::Ball3 { radius } => 3.0 / (4.0 * PI * radius.powi(3)),
                    _ => unreachable!(),
                },
                d,
                &s,
                10_000,
                1,
            )
            .unwrap();
            assert!((e.value - 1.0).abs() < 1e-9, "{s:?}: {e:?}");
            assert!(e.error < 1e-9);
        }
    }

    #[test]
    fn gaussian_integral_within_three_sigma() {
        let s = Sampler::Cauchy3 { vectors: 1, scale: 1.0 };
        let e = integrate_mc(|x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp(), 3, &s, 200_000, 7)
            .unwrap();
        let want = PI.powf(1.5);
        assert!((e.value - want).abs() <= e.error, "{e:?}");
        assert_eq!(e.sigma_multiplier, Some(3.0));
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let s = Sampler::Gaussian { dim: 2, scale: 1.0 };
        let f = |x: &[f64]| (x[0] * x[1]).cos();
        let a = integrate_mc(f, 2, &s, 50_000, 42).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| integrate_mc(f, 2, &s, 50_000, 42).unwrap());
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.error.to_bits(), b.error.to_bits());
    }

    #[test]
    fn non_finite_sample_reports_point() {
        let s = Sampler::UnitCube { dim: 1 };
        match integrate_mc(|x| if x[0] > 0.5 { f64::INFINITY } else { 1.0 }, 1, &s, 1000, 0) {
            Err(Error::NonFiniteSample { point }) => assert!(point[0] > 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let s = Sampler::UnitCube { dim: 2 };
        assert!(matches!(integrate_mc(|_| 1.0, 3, &s, 100, 0), Err(Error::Config(_))));
    }
}
