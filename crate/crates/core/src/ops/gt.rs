//! Truncated resolvent series G_T ≈ Σ_{k≤K} (−L⁻¹(T + c₀))^k G for one
//! particle in the vacuum sector, probed at (s, r) with the direction of the
//! separation averaged out.
//!
//! In the one-boson sector the state Gψ has transform −(2π)^{-3/2} ψ̂(σ)/L(σ,ρ).
//! T acts fibrewise at fixed σ:
//! `(T f)(σ,ρ) = t_d(σ,ρ) f(σ,ρ) − (2π)^{-3} ∫ f(σ, ξ − σ/(2m+1)) / D(σ,ρ,ξ) dξ`.
//! Orders 0 and 1 are deterministic. Order 2 splits into a deterministic
//! diagonal part and Monte-Carlo parts sharing one sample set across the r-grid.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::rprobe::{angular_sqrt, apply_rd_probe, apply_rod_probe, l_symbol, sinc_transform, DiagonalKernel};
use super::{alpha, distance, KernelConstants};
use crate::error::{Error, Result};
use crate::model::{c2, ModelParams};
use crate::quad::{
    cauchy3_density, integrate_mc_many, integrate_semi_infinite, sinc, Estimate, InnerErrors, QuadSpec, Sampler,
    DEFAULT_MC_SAMPLES,
};
use crate::testfn::IsotropicState;

use super::g::apply_g_probe;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SeriesOrder {
    K0,
    K1,
    K2,
}

impl SeriesOrder {
    pub fn from_index(k: u32) -> Result<Self> {
        match k {
            0 => Ok(Self::K0),
            1 => Ok(Self::K1),
            2 => Ok(Self::K2),
            _ => Err(Error::Config(format!("series order must be 0, 1 or 2, got {k}"))),
        }
    }

    pub fn index(self) -> u32 {
        self as u32
    }
}

type V3 = [f64; 3];

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Particle and boson momenta from (σ, ρ).
fn momenta(m: f64, sigma: V3, rho: V3) -> (V3, V3) {
    let rmf = 2.0 * m / (2.0 * m + 1.0);
    let q = 1.0 / (2.0 * m + 1.0);
    let p = std::array::from_fn(|i| rmf * sigma[i] - rho[i]);
    let k = std::array::from_fn(|i| q * sigma[i] + rho[i]);
    (p, k)
}

struct Fiber {
    m: f64,
    kc: KernelConstants,
    pd: f64,
    c0: f64,
}

impl Fiber {
    fn new(params: &ModelParams) -> Self {
        let kc = KernelConstants::new(params.m);
        Self {
            m: params.m,
            pd: kc.rmf.powf(1.5) / (4.0 * PI),
            kc,
            c0: params.c0,
        }
    }

    fn l(&self, sigma: V3, rho: V3) -> f64 {
        1.0 + dot(sigma, sigma) / (2.0 * self.m + 1.0) + self.kc.c2 * dot(rho, rho)
    }

    fn td(&self, sigma: V3, rho: V3) -> f64 {
        let (p, k) = momenta(self.m, sigma, rho);
        self.pd * (2.0 + dot(p, p) / (2.0 * self.m + 1.0) + dot(k, k)).sqrt()
    }

    /// Denominator of the off-diagonal kernel in the one-boson sector.
    fn d(&self, sigma: V3, rho: V3, xi: V3) -> f64 {
        let (p, k) = momenta(self.m, sigma, rho);
        let pm: V3 = std::array::from_fn(|i| p[i] - xi[i]);
        2.0 + dot(pm, pm) / (2.0 * self.m) + dot(k, k) + dot(xi, xi)
    }

    /// Relative momentum after emitting ξ and absorbing the old boson.
    fn shifted(&self, sigma: V3, xi: V3) -> V3 {
        let q = 1.0 / (2.0 * self.m + 1.0);
        std::array::from_fn(|i| xi[i] - q * sigma[i])
    }

    /// The three Monte-Carlo parts of X²(1/L) at one sample, X = L⁻¹(T + c₀):
    /// (t_d+c₀)L⁻² T_od L⁻¹, L⁻¹ T_od (t_d+c₀)L⁻², L⁻¹ T_od L⁻¹ T_od L⁻¹.
    /// Returned without the −(2π)^{-3} factors and the sampling densities.
    fn second_order(&self, sigma: V3, rho: V3, xi1: V3, xi2: V3) -> (f64, f64, f64) {
        let l = self.l(sigma, rho);
        let r1 = self.shifted(sigma, xi1);
        let l1 = self.l(sigma, r1);
        let d1 = self.d(sigma, rho, xi1);
        let ii = (self.td(sigma, rho) + self.c0) / (l * l) / (l1 * d1);
        let iii = (self.td(sigma, r1) + self.c0) / (l1 * l1) / (l * d1);
        let r2 = self.shifted(sigma, xi2);
        let iv = 1.0 / (l * d1 * l1 * self.l(sigma, r2) * self.d(sigma, r1, xi2));
        (ii, iii, iv)
    }
}

/// −c₀ L⁻¹ G ψ at (s, r).
fn c0_term<S: IsotropicState + ?Sized>(params: &ModelParams, psi: &S, s: V3, r: f64, spec: &QuadSpec) -> Result<Estimate> {
    let m = params.m;
    let c2 = c2(m);
    let offset = distance(s, psi.center());
    let e = integrate_semi_infinite(
        |sig| {
            let lam = alpha(m, sig) / c2.sqrt();
            sig * sig * psi.fourier_radial(sig) * sinc(sig * offset) * (-lam * r).exp() / lam
        },
        spec,
    )?;
    Ok(e * (params.c0 * (2.0 * PI).powf(-4.5) * PI * PI / (c2 * c2) * 4.0 * PI))
}

/// Diagonal part of the second-order term, ∫dc (t_d + c₀)² / L³.
fn second_order_diagonal<S: IsotropicState + ?Sized>(
    params: &ModelParams,
    psi: &S,
    s: V3,
    r: f64,
    spec: &QuadSpec,
) -> Result<Estimate> {
    let m = params.m;
    let fiber = Fiber::new(params);
    let kc = &fiber.kc;
    let (pd, c0) = (fiber.pd, fiber.c0);
    let offset = distance(s, psi.center());
    let inner_errors = InnerErrors::new();
    let outer = integrate_semi_infinite(
        |sig| {
            let w = sig * sig * psi.fourier_radial(sig) * sinc(sig * offset);
            if w == 0.0 {
                return 0.0;
            }
            let inner = sinc_transform(
                |rho| {
                    let a = 2.0 + kc.kappa * rho * rho + kc.b1 * sig * sig;
                    let c = angular_sqrt(a, kc.b2 * rho * sig);
                    let l = l_symbol(m, kc, sig, rho);
                    (2.0 * pd * pd * a + 2.0 * c0 * pd * c + 2.0 * c0 * c0) / (l * l * l)
                },
                r,
                spec,
            );
            w * inner_errors.take(inner, w)
        },
        spec,
    );
    let e = inner_errors.finish(outer)?;
    Ok(e * (-(2.0 * PI).powf(-4.5) * 4.0 * PI * 2.0 * PI))
}

/// Off-diagonal parts of the second-order term for every r in `rs`, sharing samples.
fn second_order_mc<S: IsotropicState + ?Sized>(
    params: &ModelParams,
    psi: &S,
    s: V3,
    rs: &[f64],
    samples: u64,
    seed: u64,
) -> Result<Vec<Estimate>> {
    let fiber = Fiber::new(params);
    let offset = distance(s, psi.center());
    let t = -(2.0 * PI).powi(-3);
    let sampler = Sampler::Product(vec![
        Sampler::Gaussian {
            dim: 3,
            scale: psi.momentum_scale(),
        },
        Sampler::Cauchy3 { vectors: 3, scale: 1.0 },
    ]);
    let f = |x: &[f64], out: &mut [f64]| {
        let sigma = [x[0], x[1], x[2]];
        let rho = [x[3], x[4], x[5]];
        let xi1 = [x[6], x[7], x[8]];
        let xi2 = [x[9], x[10], x[11]];
        let sn = dot(sigma, sigma).sqrt();
        let rn = dot(rho, rho).sqrt();
        let (ii, iii, iv) = fiber.second_order(sigma, rho, xi1, xi2);
        // Terms not depending on ξ₂ are multiplied by its density so that the
        // sampler divides them by their own densities only.
        let w = t * (ii + iii) * cauchy3_density(dot(xi2, xi2), 1.0) + t * t * iv;
        let base = psi.fourier_radial(sn) * sinc(sn * offset) * w;
        for (o, &r) in out.iter_mut().zip(rs) {
            *o = base * sinc(rn * r);
        }
    };
    let pref = -(2.0 * PI).powf(-4.5);
    Ok(integrate_mc_many(f, rs.len(), 12, &sampler, samples, seed)?
        .into_iter()
        .map(|e| e * pref)
        .collect())
}

fn validate_grid(rs: &[f64]) -> Result<()> {
    if let Some(r) = rs.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::Domain(format!("separation must be positive, got {r}")));
    }
    Ok(())
}

/// Probe of the truncated series at (s, r) for each r in `rs`.
///
/// Order 2 uses `mc_samples` Monte-Carlo samples seeded from `spec.seed`.
pub fn gt_probe_series<S: IsotropicState + ?Sized>(
    params: &ModelParams,
    psi: &S,
    s: V3,
    rs: &[f64],
    order: SeriesOrder,
    spec: &QuadSpec,
    mc_samples: u64,
) -> Result<Vec<Estimate>> {
    params.require_single_vacuum("the G_T probe")?;
    validate_grid(rs)?;
    let deterministic = |r: f64| -> Result<Estimate> {
        let wrap = |e: Error| Error::Probe { r, source: Box::new(e) };
        let mut v = apply_g_probe(params, psi, s, [r, 0.0, 0.0], spec).map_err(wrap)?;
        if order >= SeriesOrder::K1 {
            v = v
                + apply_rd_probe(params, psi, s, r, DiagonalKernel::Exact, spec)?
                + apply_rod_probe(params, psi, s, r, spec)?
                + c0_term(params, psi, s, r, spec).map_err(wrap)?;
        }
        if order >= SeriesOrder::K2 {
            v = v + second_order_diagonal(params, psi, s, r, spec).map_err(wrap)?;
        }
        Ok(v)
    };
    use rayon::prelude::*;
    let mut out: Vec<Estimate> = rs.par_iter().map(|&r| deterministic(r)).collect::<Result<_>>()?;
    if order == SeriesOrder::K2 {
        let mc = second_order_mc(params, psi, s, rs, mc_samples, spec.seed)?;
        for (o, e) in out.iter_mut().zip(mc) {
            *o = *o + e;
        }
    }
    Ok(out)
}

/// Single-point probe of the truncated series.
pub fn gt_probe<S: IsotropicState + ?Sized>(
    params: &ModelParams,
    psi: &S,
    s: V3,
    r: f64,
    order: SeriesOrder,
    spec: &QuadSpec,
) -> Result<Estimate> {
    Ok(gt_probe_series(params, psi, s, &[r], order, spec, DEFAULT_MC_SAMPLES)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::rprobe::{tau_exact, DiagonalKernel};
    use crate::testfn::RadialTestFunction;

    #[test]
    fn fiber_kernel_matches_tau() {
        let p = ModelParams::with_mass(0.7).unwrap();
        let f = Fiber::new(&p);
        let sigma = [0.3, -0.4, 1.1];
        let rho = [0.2, 0.9, -0.5];
        let xi = [-0.6, 0.1, 0.4];
        let direct = 1.0 / (f.l(sigma, rho) * f.l(sigma, f.shifted(sigma, xi)) * f.d(sigma, rho, xi));
        let tau = tau_exact(0.7, sigma, rho, xi);
        assert!((direct / tau - 1.0).abs() < 1e-13);
    }

    #[test]
    fn zeroth_order_is_g() {
        let p = ModelParams::with_mass(0.5).unwrap();
        let g = RadialTestFunction::new(1.0).unwrap();
        let spec = QuadSpec::default();
        let a = gt_probe(&p, &g, [0.0; 3], 0.05, SeriesOrder::K0, &spec).unwrap();
        let b = apply_g_probe(&p, &g, [0.0; 3], [0.0, 0.05, 0.0], &spec).unwrap();
        assert!((a.value - b.value).abs() <= 1e-12 * b.value.abs());
    }

    #[test]
    fn first_order_adds_r_and_c0_terms() {
        let p = ModelParams::with_mass(0.5).unwrap();
        let g = RadialTestFunction::new(1.0).unwrap();
        let spec = QuadSpec::default();
        let r = 0.1;
        let k1 = gt_probe(&p, &g, [0.0; 3], r, SeriesOrder::K1, &spec).unwrap();
        let parts = apply_g_probe(&p, &g, [0.0; 3], [r, 0.0, 0.0], &spec).unwrap().value
            + apply_rd_probe(&p, &g, [0.0; 3], r, DiagonalKernel::Exact, &spec).unwrap().value
            + apply_rod_probe(&p, &g, [0.0; 3], r, &spec).unwrap().value;
        let c0 = k1.value - parts;
        // −c₀L⁻¹Gψ is positive for ψ ≥ 0 and linear in c₀.
        assert!(c0 > 0.0);
        let p2 = ModelParams { c0: 2.0, ..p };
        let k1b = gt_probe(&p2, &g, [0.0; 3], r, SeriesOrder::K1, &spec).unwrap();
        assert!(((k1b.value - parts) / c0 - 2.0).abs() < 1e-8);
    }

    #[test]
    fn c0_term_matches_position_quadrature_at_zero_separation_limit() {
        // −L⁻¹Gψ(c, r→0) = (2π)^{-9/2}(π²/c₂²) 4π ∫σ² ψ̂/λ dσ: finite, bounded by r-independent value.
        let p = ModelParams::with_mass(0.5).unwrap();
        let g = RadialTestFunction::new(1.0).unwrap();
        let spec = QuadSpec::default();
        let a = c0_term(&p, &g, [0.0; 3], 1e-6, &spec).unwrap().value;
        let b = c0_term(&p, &g, [0.0; 3], 1e-3, &spec).unwrap().value;
        assert!(a > b && (a - b) / a < 2e-3);
    }

    #[test]
    fn second_order_is_finite_and_deterministic() {
        let p = ModelParams::with_mass(0.5).unwrap();
        let g = RadialTestFunction::new(1.0).unwrap();
        let spec = QuadSpec::with_tol(1e-6, 1e-12);
        let rs = [1e-3, 1e-2, 1e-1];
        let a = gt_probe_series(&p, &g, [0.0; 3], &rs, SeriesOrder::K2, &spec, 50_000).unwrap();
        let b = gt_probe_series(&p, &g, [0.0; 3], &rs, SeriesOrder::K2, &spec, 50_000).unwrap();
        let k1 = gt_probe_series(&p, &g, [0.0; 3], &rs, SeriesOrder::K1, &spec, 0).unwrap();
        for i in 0..3 {
            assert_eq!(a[i].value.to_bits(), b[i].value.to_bits());
            assert!(a[i].value.is_finite() && a[i].error.is_finite());
            // The second-order correction stays bounded as r → 0.
            assert!((a[i].value - k1[i].value).abs() < 1e-3, "{:?} {:?}", a[i], k1[i]);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = ModelParams::with_mass(0.5).unwrap();
        let g = RadialTestFunction::new(1.0).unwrap();
        let spec = QuadSpec::default();
        assert!(gt_probe(&p, &g, [0.0; 3], 0.0, SeriesOrder::K1, &spec).is_err());
        assert!(SeriesOrder::from_index(3).is_err());
        let p1 = ModelParams::new(0.5, 1, 1, 0.0, 1.0).unwrap();
        assert!(gt_probe(&p1, &g, [0.0; 3], 0.1, SeriesOrder::K0, &spec).is_err());
    }
}
