//! Gaussian test states with closed-form transforms.
//!
//! Fourier transforms use the unitary convention
//! `ĝ(σ) = (2π)^{-3/2} ∫ e^{-iσ·x} g(x) dx`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::norm_sq;
use crate::quad::{integrate_mc, integrate_semi_infinite, Estimate, InnerErrors, QuadSpec, Sampler};

/// A state that is radial about a centre, given by its position and momentum
/// profiles as functions of the distance to the centre and of |σ|.
pub trait IsotropicState: Sync {
    fn center(&self) -> [f64; 3];
    /// Position-space value at distance `r` from the centre.
    fn radial(&self, r: f64) -> f64;
    /// Momentum-space modulus profile; the full transform carries the phase e^{-iσ·c}.
    fn fourier_radial(&self, k: f64) -> f64;
    /// Per-component momentum scale used by importance samplers.
    fn momentum_scale(&self) -> f64 {
        1.0
    }
}

/// Isotropic Gaussian `A (πa)^{-3/4} exp(-|x-c|²/(2a))`, unit norm for `A = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialTestFunction {
    pub width: f64,
    pub center: [f64; 3],
    pub amplitude: f64,
}

impl RadialTestFunction {
    pub fn new(width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::Config(format!("Gaussian width must be positive, got {width}")));
        }
        Ok(Self {
            width,
            center: [0.0; 3],
            amplitude: 1.0,
        })
    }

    pub fn with_center(self, center: [f64; 3]) -> Self {
        Self { center, ..self }
    }

    pub fn with_amplitude(self, amplitude: f64) -> Self {
        Self { amplitude, ..self }
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let d = [x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]];
        self.radial(norm_sq(&d).sqrt())
    }

    pub fn value_at_center(&self) -> f64 {
        self.amplitude * (PI * self.width).powf(-0.75)
    }

    pub fn fourier_eval(&self, sigma: [f64; 3]) -> Complex64 {
        let phase = -(sigma[0] * self.center[0] + sigma[1] * self.center[1] + sigma[2] * self.center[2]);
        Complex64::from_polar(self.fourier_radial(norm_sq(&sigma).sqrt()), phase)
    }

    /// Exact squared L² norm.
    pub fn norm_sq(&self) -> f64 {
        self.amplitude * self.amplitude
    }

    /// Standard deviation of each momentum component under |ĝ|², 1/√(2a).
    pub fn momentum_width(&self) -> f64 {
        (2.0 * self.width).sqrt().recip()
    }

    /// Squared L² norm by radial quadrature in position space.
    pub fn position_norm_sq(&self, spec: &QuadSpec) -> Result<Estimate> {
        integrate_semi_infinite(|r| 4.0 * PI * r * r * self.radial(r).powi(2), spec)
    }

    /// Squared L² norm by radial quadrature in momentum space.
    pub fn momentum_norm_sq(&self, spec: &QuadSpec) -> Result<Estimate> {
        integrate_semi_infinite(|k| 4.0 * PI * k * k * self.fourier_radial(k).powi(2), spec)
    }
}

impl IsotropicState for RadialTestFunction {
    fn center(&self) -> [f64; 3] {
        self.center
    }

    fn radial(&self, r: f64) -> f64 {
        self.value_at_center() * (-r * r / (2.0 * self.width)).exp()
    }

    fn fourier_radial(&self, k: f64) -> f64 {
        self.amplitude * (self.width / PI).powf(0.75) * (-self.width * k * k / 2.0).exp()
    }

    fn momentum_scale(&self) -> f64 {
        self.width.sqrt().recip()
    }
}

/// Real linear combination of Gaussians sharing one centre.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Superposition {
    terms: Vec<RadialTestFunction>,
}

impl Superposition {
    pub fn new(terms: Vec<RadialTestFunction>) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(Error::Config("superposition needs at least one term".into()));
        };
        if terms.iter().any(|t| t.center != first.center) {
            return Err(Error::Config("superposition terms must share a centre".into()));
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[RadialTestFunction] {
        &self.terms
    }
}

impl IsotropicState for Superposition {
    fn center(&self) -> [f64; 3] {
        self.terms[0].center
    }

    fn radial(&self, r: f64) -> f64 {
        self.terms.iter().map(|t| t.radial(r)).sum()
    }

    fn fourier_radial(&self, k: f64) -> f64 {
        self.terms.iter().map(|t| t.fourier_radial(k)).sum()
    }

    fn momentum_scale(&self) -> f64 {
        self.terms.iter().map(|t| t.momentum_scale()).fold(0.0, f64::max)
    }
}

/// Product state in the n-boson sector: one Gaussian per x-particle and the
/// same Gaussian for every boson, hence symmetric under boson exchange.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductState {
    pub particles: Vec<RadialTestFunction>,
    pub boson: RadialTestFunction,
    pub sector: usize,
}

impl ProductState {
    pub fn new(particles: Vec<RadialTestFunction>, boson: RadialTestFunction, sector: usize) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::Config("product state needs at least one x-particle".into()));
        }
        Ok(Self {
            particles,
            boson,
            sector,
        })
    }

    /// All factors equal to a centred normalized Gaussian of width `a`.
    pub fn uniform(particles: usize, sector: usize, a: f64) -> Result<Self> {
        let g = RadialTestFunction::new(a)?;
        Self::new(vec![g; particles], g, sector)
    }

    pub fn particle_count(&self) -> usize {
        self.particles.len()
    }

    pub fn fourier_eval(&self, p: &[[f64; 3]], k: &[[f64; 3]]) -> Result<Complex64> {
        if p.len() != self.particles.len() || k.len() != self.sector {
            return Err(Error::Config(format!(
                "state has {} particles and {} bosons, got {} and {} momenta",
                self.particles.len(),
                self.sector,
                p.len(),
                k.len()
            )));
        }
        let mut v = Complex64::new(1.0, 0.0);
        for (g, pm) in self.particles.iter().zip(p) {
            v *= g.fourier_eval(*pm);
        }
        for ki in k {
            v *= self.boson.fourier_eval(*ki);
        }
        Ok(v)
    }

    pub fn norm_sq(&self) -> f64 {
        self.particles.iter().map(|g| g.norm_sq()).product::<f64>() * self.boson.norm_sq().powi(self.sector as i32)
    }

    /// ∫ g(L(P,K)) |ψ̂(P,K)|² by nested one-dimensional quadrature.
    ///
    /// Under |ψ̂|² each |p_μ|²/(2m) and the total |K|² are Gamma distributed,
    /// so L − n is a sum of independent Gamma variables.
    pub fn momentum_expectation<G: Fn(f64) -> f64 + Sync>(&self, m: f64, g: G, spec: &QuadSpec) -> Result<Estimate> {
        let mut vars: Vec<(f64, f64)> = Vec::new();
        let mut add = |shape: f64, scale: f64| {
            if let Some(v) = vars.iter_mut().find(|v| v.1 == scale) {
                v.0 += shape;
            } else {
                vars.push((shape, scale));
            }
        };
        for p in &self.particles {
            add(1.5, 1.0 / (2.0 * m * p.width));
        }
        if self.sector > 0 {
            add(1.5 * self.sector as f64, 1.0 / self.boson.width);
        }
        let e = nested_gamma(&vars, self.sector as f64, &g, spec)?;
        Ok(e * self.norm_sq())
    }

    /// Monte-Carlo estimate of the same expectation, sampling |ψ̂|² exactly.
    pub fn momentum_expectation_mc<G: Fn(f64) -> f64 + Sync>(
        &self,
        m: f64,
        g: G,
        samples: u64,
        seed: u64,
    ) -> Result<Estimate> {
        let mut blocks = Vec::new();
        for p in &self.particles {
            blocks.push(Sampler::Gaussian {
                dim: 3,
                scale: p.momentum_width(),
            });
        }
        for _ in 0..self.sector {
            blocks.push(Sampler::Gaussian {
                dim: 3,
                scale: self.boson.momentum_width(),
            });
        }
        let sampler = Sampler::Product(blocks);
        let dim = sampler.dim();
        let mp = self.particles.len();
        let n = self.sector as f64;
        let widths: Vec<f64> = self.particles.iter().map(|p| p.width).collect();
        let aw = self.boson.width;
        let norm = self.norm_sq();
        // f/p = g(L)·‖ψ‖² because the sampler density is |ψ̂|²/‖ψ‖².
        let f = |x: &[f64]| {
            let mut l = n;
            let mut logq = 0.0;
            for (mu, v) in x.chunks(3).enumerate() {
                let s2: f64 = v.iter().map(|a| a * a).sum();
                if mu < mp {
                    l += s2 / (2.0 * m);
                    logq += gaussian_log_density(s2, widths[mu]);
                } else {
                    l += s2;
                    logq += gaussian_log_density(s2, aw);
                }
            }
            g(l) * norm * logq.exp()
        };
        integrate_mc(f, dim, &sampler, samples, seed)
    }
}

// log of |ĝ|²/‖g‖² for a centred Gaussian of width a at |σ|² = s2.
fn gaussian_log_density(s2: f64, a: f64) -> f64 {
    1.5 * (a / PI).ln() - a * s2
}

fn nested_gamma<G: Fn(f64) -> f64>(vars: &[(f64, f64)], offset: f64, g: &G, spec: &QuadSpec) -> Result<Estimate> {
    let Some(&(shape, scale)) = vars.first() else {
        return Ok(Estimate::closed_form(g(offset)));
    };
    let rest = &vars[1..];
    let norm = 2.0 / gamma_half_integer((2.0 * shape).round() as u32);
    let inner = InnerErrors::new();
    // x = scale·u², density 2u^{2k-1}e^{-u²}/Γ(k) in u.
    let outer = integrate_semi_infinite(
        |u| {
            let w = norm * u.powf(2.0 * shape - 1.0) * (-u * u).exp();
            if w == 0.0 {
                return 0.0;
            }
            let x = scale * u * u;
            let v = if rest.is_empty() {
                g(offset + x)
            } else {
                inner.take(nested_gamma(rest, offset + x, g, spec), w)
            };
            w * v
        },
        spec,
    );
    inner.finish(outer)
}

/// Γ(j/2) for positive integer j.
pub fn gamma_half_integer(j: u32) -> f64 {
    assert!(j > 0, "Γ(0) is undefined");
    let mut k = if j % 2 == 0 { 2 } else { 1 };
    let mut v = if j % 2 == 0 { 1.0 } else { PI.sqrt() };
    while k < j {
        v *= k as f64 / 2.0;
        k += 2;
    }
    v
}

/// ‖(1+L)^s ψ‖ for a product state.
pub fn sobolev_norm(state: &ProductState, m: f64, s: f64, spec: &QuadSpec) -> Result<Estimate> {
    if !(-1.0..=2.0).contains(&s) {
        return Err(Error::Domain(format!("Sobolev exponent must lie in [-1, 2], got {s}")));
    }
    state
        .momentum_expectation(m, |l| (1.0 + l).powf(2.0 * s), spec)
        .map(Estimate::sqrt)
}

/// Monte-Carlo counterpart of [`sobolev_norm`].
pub fn sobolev_norm_mc(state: &ProductState, m: f64, s: f64, samples: u64, seed: u64) -> Result<Estimate> {
    if !(-1.0..=2.0).contains(&s) {
        return Err(Error::Domain(format!("Sobolev exponent must lie in [-1, 2], got {s}")));
    }
    state
        .momentum_expectation_mc(m, |l| (1.0 + l).powf(2.0 * s), samples, seed)
        .map(Estimate::sqrt)
}

/// ‖(1 + L^{1/2}) ψ‖.
pub fn graph_norm_half(state: &ProductState, m: f64, spec: &QuadSpec) -> Result<Estimate> {
    state
        .momentum_expectation(m, |l| (1.0 + l.sqrt()).powi(2), spec)
        .map(Estimate::sqrt)
}

/// ‖(1 + |K|²)^{1/2} ψ‖, closed form: |K|² has mean 3n/(2a_b).
pub fn boson_weight_norm(state: &ProductState) -> f64 {
    (state.norm_sq() * (1.0 + 1.5 * state.sector as f64 / state.boson.width)).sqrt()
}
