//! Probes of R = −L⁻¹ T G ψ for one particle in the vacuum sector.
//!
//! Both pieces are evaluated at the centre-of-mass point `s`, averaged over
//! the direction of the separation `d`, as a σ-quadrature of an inner
//! oscillatory ρ-quadrature:
//!
//! * diagonal: `(2π)^{-9/2}(1/4π) rmf^{3/2} · 8π² ∫σ² ψ̂ sinc(σ|s−c|) ∫ρ² sinc(ρd) C(σ,ρ)/L² dρ dσ`
//!   with `C = ∫_{-1}^{1} √(2 + κρ² + b₁σ² + b₂ρσc) dc`;
//! * off-diagonal: `−(2π)^{-15/2}(4π)² ∫σ² ψ̂ sinc(σ|s−c|) ∫ρ² sinc(ρd) J(σ,ρ)/L dρ dσ`
//!   with `J` the arctan convolution, i.e. the kernel τ₀ in which (σ−ξ)² is
//!   replaced by σ²+ξ².

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{distance, KernelConstants};
use crate::error::{Error, Result};
use crate::model::{arctan_convolution, c2, ModelParams};
use crate::quad::{
    integrate_mc_many, integrate_oscillatory, integrate_semi_infinite, sinc, Estimate, InnerErrors, QuadSpec,
    Sampler,
};
use crate::testfn::IsotropicState;

/// Kernel used for the angular integral of the diagonal piece.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalKernel {
    Exact,
    /// √(…) replaced by its large-ρ asymptote √κ |ρ|.
    Asymptotic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RPiece {
    Diagonal,
    OffDiagonal,
    Total,
}

pub(super) fn l_symbol(m: f64, kc: &KernelConstants, sigma: f64, rho: f64) -> f64 {
    1.0 + sigma * sigma / (2.0 * m + 1.0) + kc.c2 * rho * rho
}

/// ∫_{-1}^{1} √(A + B c) dc without cancellation for small B.
pub(super) fn angular_sqrt(a: f64, b: f64) -> f64 {
    let p = (a + b).max(0.0);
    let q = (a - b).max(0.0);
    (2.0 / 3.0) * (6.0 * a * a + 2.0 * b * b) / (p.powf(1.5) + q.powf(1.5))
}

fn diag_c(kc: &KernelConstants, kernel: DiagonalKernel, sigma: f64, rho: f64) -> f64 {
    match kernel {
        DiagonalKernel::Exact => {
            let a = 2.0 + kc.kappa * rho * rho + kc.b1 * sigma * sigma;
            angular_sqrt(a, kc.b2 * rho * sigma)
        }
        DiagonalKernel::Asymptotic => 2.0 * kc.kappa.sqrt() * rho,
    }
}

/// Monte-Carlo value of the integral whose closed form is [`arctan_convolution`].
pub fn arctan_convolution_mc(m: f64, beta: f64, gamma: f64, rho: f64, samples: u64, seed: u64) -> Result<Estimate> {
    arctan_convolution(m, beta, gamma, rho)?;
    let c = c2(m);
    let shift = rho / (2.0 * m + 1.0);
    let f = |x: &[f64], out: &mut [f64]| {
        let a = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let b = x[0] * x[0] + x[1] * x[1] + (x[2] + shift).powi(2);
        out[0] = 1.0 / ((beta + c * a) * (gamma + c * b));
    };
    let scale = (beta.min(gamma) / c).sqrt();
    let e = integrate_mc_many(f, 1, 3, &Sampler::Cauchy3 { vectors: 1, scale }, samples, seed)?;
    Ok(e[0])
}

fn od_j(m: f64, sigma: f64, rho: f64) -> f64 {
    let kc = KernelConstants::new(m);
    let beta = 1.0 + sigma * sigma / (2.0 * m);
    let gamma = 2.0 + sigma * sigma / (2.0 * m + 1.0) + kc.kappa * rho * rho;
    arctan_convolution(m, beta, gamma, rho).unwrap_or(f64::NAN)
}

/// ∫₀^∞ ρ² sinc(ρd) h(ρ) dρ.
pub(super) fn sinc_transform<H: Fn(f64) -> f64>(h: H, d: f64, spec: &QuadSpec) -> Result<Estimate> {
    if d == 0.0 {
        return integrate_semi_infinite(|rho| rho * rho * h(rho), spec);
    }
    integrate_oscillatory(|rho| rho * h(rho), d, spec).map(|e| e * d.recip())
}

/// Inner ρ-integral of one piece at fixed |σ|, without prefactors.
fn inner(m: f64, piece: RPiece, kernel: DiagonalKernel, sigma: f64, d: f64, spec: &QuadSpec) -> Result<Estimate> {
    let kc = KernelConstants::new(m);
    match piece {
        RPiece::Diagonal => sinc_transform(
            |rho| {
                let l = l_symbol(m, &kc, sigma, rho);
                diag_c(&kc, kernel, sigma, rho) / (l * l)
            },
            d,
            spec,
        ),
        RPiece::OffDiagonal => sinc_transform(|rho| od_j(m, sigma, rho) / l_symbol(m, &kc, sigma, rho), d, spec),
        RPiece::Total => Err(Error::Config("inner integral is per piece".into())),
    }
}

fn piece_prefactor(m: f64, piece: RPiece) -> f64 {
    let rmf = KernelConstants::new(m).rmf;
    match piece {
        RPiece::Diagonal => (2.0 * PI).powf(-4.5) / (4.0 * PI) * rmf.powf(1.5) * 8.0 * PI * PI,
        RPiece::OffDiagonal => -(2.0 * PI).powf(-7.5) * 16.0 * PI * PI,
        RPiece::Total => f64::NAN,
    }
}

fn probe<S: IsotropicState + ?Sized>(
    params: &ModelParams,
    psi: &S,
    s: [f64; 3],
    r: f64,
    piece: RPiece,
    kernel: DiagonalKernel,
    spec: &QuadSpec,
) -> Result<Estimate> {
    params.require_single_vacuum("the R probe")?;
    if !(r > 0.0) {
        return Err(Error::Domain(format!("separation must be positive, got {r}")));
    }
    let m = params.m;
    let offset = distance(s, psi.center());
    let inner_errors = InnerErrors::new();
    let outer = integrate_semi_infinite(
        |sig| {
            let w = sig * sig * psi.fourier_radial(sig) * sinc(sig * offset);
            if w == 0.0 {
                return 0.0;
            }
            w * inner_errors.take(inner(m, piece, kernel, sig, r, spec), w)
        },
        spec,
    );
    let e = inner_errors.finish(outer).map_err(|e| Error::Probe {
        r,
        source: Box::new(e),
    })?;
    Ok(e * piece_prefactor(m, piece))
}

/// Direction-averaged (R_d ψ)(s, r).
pub fn apply_rd_probe<S: IsotropicState + ?Sized>(
    params: &ModelParams,
    psi: &S,
    s: [f64; 3],
    r: f64,
    kernel: DiagonalKernel,
    spec: &QuadSpec,
) -> Result<Estimate> {
    probe(params, psi, s, r, RPiece::Diagonal, kernel, spec)
}

/// Direction-averaged (R_od ψ)(s, r) with the simplified kernel τ₀.
pub fn apply_rod_probe<S: IsotropicState + ?Sized>(
    params: &ModelParams,
    psi: &S,
    s: [f64; 3],
    r: f64,
    spec: &QuadSpec,
) -> Result<Estimate> {
    probe(params, psi, s, r, RPiece::OffDiagonal, DiagonalKernel::Exact, spec)
}

/// Fourier multiplier M_r(σ) of the direction-averaged R probe:
/// `(Rψ)(c, r) = (2π)^{-3/2} ∫ ψ̂(σ) M_r(|σ|) d³σ` for ψ centred at c.
///
/// M_r is real; as r → 0 it behaves like −γ_m log r plus a finite σ-dependent part.
pub fn r_multiplier(m: f64, sigma: f64, r: f64, piece: RPiece, spec: &QuadSpec) -> Result<Estimate> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("separation must be positive, got {r}")));
    }
    let one = |p: RPiece| -> Result<Estimate> {
        let e = inner(m, p, DiagonalKernel::Exact, sigma, r, spec)?;
        Ok(e * (piece_prefactor(m, p) * (2.0 * PI).powf(1.5) / (4.0 * PI)))
    };
    match piece {
        RPiece::Total => Ok(one(RPiece::Diagonal)? + one(RPiece::OffDiagonal)?),
        p => one(p),
    }
}

/// Exact kernel τ(σ, ρ, ξ) of the off-diagonal piece.
pub fn tau_exact(m: f64, sigma: [f64; 3], rho: [f64; 3], xi: [f64; 3]) -> f64 {
    let s = 2.0 * m + 1.0;
    let c2 = s / (2.0 * m);
    let n2 = |v: [f64; 3]| v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let sm = [sigma[0] - xi[0], sigma[1] - xi[1], sigma[2] - xi[2]];
    let sh = [rho[0] + xi[0] / s, rho[1] + xi[1] / s, rho[2] + xi[2] / s];
    let l = 1.0 + n2(sigma) / s + c2 * n2(rho);
    let mid = 1.0 + n2(sm) / (2.0 * m) + n2(xi);
    let last = 2.0 + n2(xi) + n2(sm) / s + c2 * n2(sh);
    1.0 / (l * mid * last)
}

/// Simplified kernel τ₀: (σ−ξ)² replaced by σ²+ξ².
pub fn tau_simplified(m: f64, sigma: [f64; 3], rho: [f64; 3], xi: [f64; 3]) -> f64 {
    let s = 2.0 * m + 1.0;
    let c2 = s / (2.0 * m);
    let n2 = |v: [f64; 3]| v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let sh = [rho[0] + xi[0] / s, rho[1] + xi[1] / s, rho[2] + xi[2] / s];
    let sm2 = n2(sigma) + n2(xi);
    let l = 1.0 + n2(sigma) / s + c2 * n2(rho);
    let mid = 1.0 + sm2 / (2.0 * m) + n2(xi);
    let last = 2.0 + n2(xi) + sm2 / s + c2 * n2(sh);
    1.0 / (l * mid * last)
}

/// Envelope |σ|^ε (1+c₂ρ²)^{-1/2-ε/2} (1+ξ²)^{-3/2} (2+ξ²+ρ²)^{-1} of |τ − τ₀|.
fn tau_envelope(m: f64, eps: f64, sigma: [f64; 3], rho: [f64; 3], xi: [f64; 3]) -> f64 {
    let c2 = (2.0 * m + 1.0) / (2.0 * m);
    let n2 = |v: [f64; 3]| v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let (s2, r2, x2) = (n2(sigma), n2(rho), n2(xi));
    s2.powf(eps / 2.0) * (1.0 + c2 * r2).powf(-0.5 - eps / 2.0) * (1.0 + x2).powf(-1.5) / (2.0 + x2 + r2)
}

/// Monte-Carlo comparison of ∫|τ − τ₀| dρ dξ with the envelope bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauCheck {
    pub epsilon: f64,
    pub sigma_values: Vec<f64>,
    /// sup over a deterministic grid of |τ − τ₀| / envelope.
    pub fitted_constant: f64,
    pub difference_integrals: Vec<Estimate>,
    pub bound_integrals: Vec<Estimate>,
    /// (1+σ²)^{-ε/2} ∫|τ − τ₀|, which must stay bounded.
    pub weighted: Vec<f64>,
    pub within_bound: bool,
}

fn grid_directions() -> Vec<[f64; 3]> {
    let h = 1.0 / 3f64.sqrt();
    let q = 1.0 / 2f64.sqrt();
    vec![
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
        [h, h, h],
        [-h, h, -h],
        [q, 0.0, q],
        [0.0, -q, q],
    ]
}

pub fn tau_difference_check(m: f64, epsilon: f64, sigma_values: &[f64], samples: u64, seed: u64) -> Result<TauCheck> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    let mags: Vec<f64> = (0..17).map(|i| 10f64.powf(-2.0 + 5.0 * i as f64 / 16.0)).collect();
    let dirs = grid_directions();
    let scale = |v: [f64; 3], k: f64| [v[0] * k, v[1] * k, v[2] * k];
    let mut fitted: f64 = 0.0;
    for &sm in &mags {
        let sigma = [0.0, 0.0, sm];
        for &rm in &mags {
            for &xm in &mags {
                for rd in &dirs {
                    for xd in &dirs {
                        let (rho, xi) = (scale(*rd, rm), scale(*xd, xm));
                        let diff = (tau_exact(m, sigma, rho, xi) - tau_simplified(m, sigma, rho, xi)).abs();
                        fitted = fitted.max(diff / tau_envelope(m, epsilon, sigma, rho, xi));
                    }
                }
            }
        }
    }
    let sampler = Sampler::Cauchy3 { vectors: 2, scale: 1.0 };
    let mut diffs = Vec::new();
    let mut bounds = Vec::new();
    let mut weighted = Vec::new();
    let mut ok = true;
    for (i, &sm) in sigma_values.iter().enumerate() {
        let sigma = [0.0, 0.0, sm];
        let f = |x: &[f64], out: &mut [f64]| {
            let rho = [x[0], x[1], x[2]];
            let xi = [x[3], x[4], x[5]];
            out[0] = (tau_exact(m, sigma, rho, xi) - tau_simplified(m, sigma, rho, xi)).abs();
            out[1] = fitted * tau_envelope(m, epsilon, sigma, rho, xi);
        };
        let r = integrate_mc_many(f, 2, 6, &sampler, samples, seed.wrapping_add(i as u64))?;
        ok &= r[0].value <= r[1].value + r[0].error + r[1].error;
        weighted.push((1.0 + sm * sm).powf(-epsilon / 2.0) * r[0].value);
        diffs.push(r[0]);
        bounds.push(r[1]);
    }
    Ok(TauCheck {
        epsilon,
        sigma_values: sigma_values.to_vec(),
        fitted_constant: fitted,
        difference_integrals: diffs,
        bound_integrals: bounds,
        weighted,
        within_bound: ok,
    })
}
