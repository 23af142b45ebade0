//! Operators of the model applied to Gaussian test states.
//!
//! Probes of the singular maps work in centre-of-mass coordinates for one
//! particle and one boson: `s = (2m x + y)/(2m+1)`, `d = y − x`, conjugate to
//! `σ = p + k` and `ρ = (2m k − p)/(2m+1)`. In these variables
//! `L = 1 + σ²/(2m+1) + c₂ρ²`. Averages over the direction of `d` turn
//! `e^{iρ·d}` into `sinc(|ρ||d|)`.

mod g;
mod gker;
mod gt;
mod rprobe;
mod tdiag;
mod toff;

use serde::{Deserialize, Serialize};

use crate::model::{c2, reduced_mass_factor};

pub use g::{apply_g_probe, g_norm_sq};
pub use gker::{g_ker_residual, CollisionProfile, CollisionTestState, GKerResult};
pub use gt::{gt_probe, gt_probe_series, SeriesOrder};
pub use rprobe::{
    apply_rd_probe, apply_rod_probe, arctan_convolution_mc, r_multiplier, tau_difference_check, tau_exact, tau_simplified, DiagonalKernel, RPiece,
    TauCheck,
};
pub use tdiag::{apply_td, td_multiplier, td_position_value};
pub use toff::{
    apply_tod, apply_tod_mc, tod_matrix_element, tod_norm, tod_symmetry, ComplexEstimate, TodSymmetry,
};

/// Constants of the relative-motion kinematics at mass m.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    pub b1: f64,
    pub b2: f64,
    pub c2: f64,
    pub rmf: f64,
    /// (2m+2)/(2m+1), the ρ² coefficient of the diagonal kernel.
    pub kappa: f64,
}

impl KernelConstants {
    pub fn new(m: f64) -> Self {
        let s = 2.0 * m + 1.0;
        Self {
            b1: (4.0 * m * m + 2.0 * m + 1.0) / (s * s * s),
            b2: 2.0 / (s * s),
            c2: c2(m),
            rmf: reduced_mass_factor(m),
            kappa: (2.0 * m + 2.0) / s,
        }
    }
}

/// α(σ) = √(1 + σ²/(2m+1)), the decay rate of Gψ in |d|·√c₂ units.
pub(crate) fn alpha(m: f64, sigma: f64) -> f64 {
    (1.0 + sigma * sigma / (2.0 * m + 1.0)).sqrt()
}

pub(crate) fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}
