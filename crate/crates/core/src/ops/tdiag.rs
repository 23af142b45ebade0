use std::f64::consts::PI;

use num_complex::Complex64;

use super::distance;
use crate::error::{Error, Result};
use crate::model::{norm_sq, reduced_mass_factor, ModelParams};
use crate::quad::{integrate_semi_infinite, sinc, Estimate, QuadSpec};
use crate::testfn::{IsotropicState, ProductState};

/// Fourier multiplier of the diagonal part of T,
/// `(1/4π)(2m/(2m+1))^{3/2} Σ_μ √(n+1 + p_μ²/(2m+1) + |P̂_μ|²/(2m) + |K|²)`.
pub fn td_multiplier(params: &ModelParams, p: &[[f64; 3]], k: &[[f64; 3]]) -> Result<f64> {
    if p.len() != params.particles || k.len() != params.sector {
        return Err(Error::Config(format!(
            "expected {} x-momenta and {} boson momenta, got {} and {}",
            params.particles,
            params.sector,
            p.len(),
            k.len()
        )));
    }
    let m = params.m;
    let n = params.sector as f64;
    let k2: f64 = k.iter().map(norm_sq).sum();
    let p2: Vec<f64> = p.iter().map(norm_sq).collect();
    let p2_total: f64 = p2.iter().sum();
    let sum: f64 = p2
        .iter()
        .map(|&pm| (n + 1.0 + pm / (2.0 * m + 1.0) + (p2_total - pm) / (2.0 * m) + k2).sqrt())
        .sum();
    Ok(reduced_mass_factor(m).powf(1.5) / (4.0 * PI) * sum)
}

/// (T_d ψ)^(P, K).
pub fn apply_td(params: &ModelParams, psi: &ProductState, p: &[[f64; 3]], k: &[[f64; 3]]) -> Result<Complex64> {
    if psi.particle_count() != params.particles || psi.sector != params.sector {
        return Err(Error::Config("state does not live in the parameter sector".into()));
    }
    Ok(td_multiplier(params, p, k)? * psi.fourier_eval(p, k)?)
}

/// (T_d ψ)(s) in position space for M = 1, n = 0.
pub fn td_position_value<S: IsotropicState + ?Sized>(
    params: &ModelParams,
    psi: &S,
    s: [f64; 3],
    spec: &QuadSpec,
) -> Result<Estimate> {
    params.require_single_vacuum("the position-space T_d value")?;
    let m = params.m;
    let pref = reduced_mass_factor(m).powf(1.5) / (4.0 * PI);
    let offset = distance(s, psi.center());
    let e = integrate_semi_infinite(
        |sig| {
            let mult = (1.0 + sig * sig / (2.0 * m + 1.0)).sqrt();
            4.0 * PI * sig * sig * sinc(sig * offset) * mult * psi.fourier_radial(sig)
        },
        spec,
    )?;
    Ok(e * (pref * (2.0 * PI).powf(-1.5)))
}
