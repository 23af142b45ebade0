//! Adjoint identity for G on product test functions φ(s, d) = g(s) f(d).
//!
//! For every φ in the domain of L, ⟨Gψ, Lφ⟩ = −⟨ψ, a(δ)φ⟩ with
//! ⟨ψ, a(δ)φ⟩ = ∫ ψ(s) φ(s, 0) ds. When φ vanishes on the collision plane
//! d = 0 the pairing itself must vanish.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::alpha;
use crate::error::{Error, Result};
use crate::model::{c2, ModelParams};
use crate::quad::{integrate_semi_infinite, sinc, Estimate, InnerErrors, QuadSpec};
use crate::testfn::IsotropicState;

/// Behaviour of f(d) at the collision plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionProfile {
    /// f = |d| e^{−d²/2w}
    Linear,
    /// f = |d|² e^{−d²/2w}
    Quadratic,
    /// f = e^{−d²/2w}, non-zero on the plane.
    Control,
}

/// φ(s, d) = exp(−|s−c|²/2w_s) f(|d|) with c the centre of ψ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionTestState {
    pub profile: CollisionProfile,
    pub width_s: f64,
    pub width_d: f64,
}

impl CollisionTestState {
    pub fn new(profile: CollisionProfile, width_s: f64, width_d: f64) -> Result<Self> {
        if !(width_s > 0.0 && width_d > 0.0 && width_s.is_finite() && width_d.is_finite()) {
            return Err(Error::Config(format!(
                "collision test widths must be positive, got {width_s} and {width_d}"
            )));
        }
        Ok(Self {
            profile,
            width_s,
            width_d,
        })
    }

    fn g(&self, s: f64) -> f64 {
        (-s * s / (2.0 * self.width_s)).exp()
    }

    fn lap_g(&self, s: f64) -> f64 {
        let w = self.width_s;
        (s * s / (w * w) - 3.0 / w) * self.g(s)
    }

    pub fn f(&self, d: f64) -> f64 {
        let e = (-d * d / (2.0 * self.width_d)).exp();
        match self.profile {
            CollisionProfile::Control => e,
            CollisionProfile::Linear => d * e,
            CollisionProfile::Quadratic => d * d * e,
        }
    }

    /// Radial Laplacian of f.
    fn lap_f(&self, d: f64) -> f64 {
        let w = self.width_d;
        let e = (-d * d / (2.0 * w)).exp();
        let d2 = d * d;
        match self.profile {
            CollisionProfile::Control => (d2 / (w * w) - 3.0 / w) * e,
            CollisionProfile::Linear => (2.0 / d - 5.0 * d / w + d * d2 / (w * w)) * e,
            CollisionProfile::Quadratic => (6.0 - 7.0 * d2 / w + d2 * d2 / (w * w)) * e,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GKerResult {
    /// ⟨Gψ, Lφ⟩
    pub residual: Estimate,
    /// ⟨ψ, a(δ)φ⟩
    pub trace: Estimate,
}

impl GKerResult {
    /// residual + trace, zero for every φ.
    pub fn identity_defect(&self) -> Estimate {
        self.residual + self.trace
    }
}

pub fn g_ker_residual<S: IsotropicState + ?Sized>(
    params: &ModelParams,
    psi: &S,
    phi: &CollisionTestState,
    spec: &QuadSpec,
) -> Result<GKerResult> {
    params.require_single_vacuum("the adjoint identity")?;
    let m = params.m;
    let c2 = c2(m);
    let sc = c2.sqrt();
    // Lφ = [−Δg/(2m+1) + g] f − c₂ g Δf
    let g1 = |s: f64| -phi.lap_g(s) / (2.0 * m + 1.0) + phi.g(s);
    let f2 = |d: f64| -c2 * phi.lap_f(d);
    let inner_errors = InnerErrors::new();
    let outer = integrate_semi_infinite(
        |sig| {
            let w = sig * sig * psi.fourier_radial(sig);
            if w == 0.0 {
                return 0.0;
            }
            let lam = alpha(m, sig) / sc;
            let s_int = |g: &dyn Fn(f64) -> f64| integrate_semi_infinite(|s| s * s * sinc(sig * s) * g(s), spec);
            let d_int = |f: &dyn Fn(f64) -> f64| integrate_semi_infinite(|d| d * (-d * lam).exp() * f(d), spec);
            let a = inner_errors.take(s_int(&g1), w) * inner_errors.take(d_int(&|d| phi.f(d)), w);
            let b = inner_errors.take(s_int(&|s| phi.g(s)), w) * inner_errors.take(d_int(&f2), w);
            w * (a + b)
        },
        spec,
    );
    let residual = inner_errors.finish(outer)? * (-(2.0 * PI).powf(-1.5) * 16.0 * PI * PI / c2);
    let f0 = phi.f(0.0);
    let trace = if f0 == 0.0 {
        Estimate::closed_form(0.0)
    } else {
        integrate_semi_infinite(|s| 4.0 * PI * s * s * psi.radial(s) * phi.g(s), spec)? * f0
    };
    Ok(GKerResult { residual, trace })
}
