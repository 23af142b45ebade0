use std::f64::consts::PI;

use super::{alpha, distance};
use crate::error::{Error, Result};
use crate::model::{c2, ModelParams};
use crate::quad::{integrate_semi_infinite, sinc, Estimate, QuadSpec};
use crate::testfn::IsotropicState;

/// (Gψ)(s, d) for one particle in the vacuum sector, G = −L⁻¹a*(δ).
///
/// `(Gψ)(s,d) = −(2π)^{-3/2}/(c₂|d|) ∫₀^∞ σ² sinc(σ|s−c|) e^{−|d|α(σ)/√c₂} ψ̂(σ) dσ`
/// where c is the centre of ψ.
pub fn apply_g_probe<S: IsotropicState + ?Sized>(
    params: &ModelParams,
    psi: &S,
    s: [f64; 3],
    r: [f64; 3],
    spec: &QuadSpec,
) -> Result<Estimate> {
    params.require_single_vacuum("the G probe")?;
    let d = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if !(d > 0.0) {
        return Err(Error::Domain("separation must be non-zero".into()));
    }
    let m = params.m;
    let c2 = c2(m);
    let sc = c2.sqrt();
    let offset = distance(s, psi.center());
    let e = integrate_semi_infinite(
        |sig| sig * sig * sinc(sig * offset) * (-d * alpha(m, sig) / sc).exp() * psi.fourier_radial(sig),
        spec,
    )?;
    Ok(e * (-(2.0 * PI).powf(-1.5) / (c2 * d)))
}

/// ‖Gψ‖² = (2π)^{-3} ∫ |ψ̂(σ)|² π²/(c₂^{3/2} α(σ)) d³σ.
pub fn g_norm_sq<S: IsotropicState + ?Sized>(m: f64, psi: &S, spec: &QuadSpec) -> Result<Estimate> {
    let c2 = c2(m);
    let e = integrate_semi_infinite(
        |sig| 4.0 * PI * sig * sig * psi.fourier_radial(sig).powi(2) / alpha(m, sig),
        spec,
    )?;
    Ok(e * ((2.0 * PI).powi(-3) * PI * PI / c2.powf(1.5)))
}
