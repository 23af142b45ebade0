//! Numerical integration with explicit error estimates.
//!
//! Deterministic integrals use a globally adaptive 21-point Gauss–Kronrod rule;
//! semi-infinite ranges are mapped onto finite ones first. Oscillatory
//! half-line integrals are summed panel by panel and accelerated with the
//! Wynn epsilon algorithm. Monte-Carlo integration draws from counter-based
//! ChaCha streams so results do not depend on thread scheduling.

mod kronrod;
mod monte_carlo;
mod oscillatory;

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

pub use kronrod::{integrate, integrate_semi_infinite};
pub use monte_carlo::{integrate_mc, integrate_mc_many, Sampler, DEFAULT_MC_SAMPLES};
pub(crate) use monte_carlo::cauchy3_density;
pub use oscillatory::{integrate_oscillatory, log_expansion_integral, wynn_epsilon};

/// How a number was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Adaptive,
    MonteCarlo,
    ClosedForm,
}

impl Method {
    fn combine(self, other: Method) -> Method {
        use Method::*;
        match (self, other) {
            (MonteCarlo, _) | (_, MonteCarlo) => MonteCarlo,
            (Adaptive, _) | (_, Adaptive) => Adaptive,
            _ => ClosedForm,
        }
    }
}

/// A value with an estimated absolute error.
///
/// Monte-Carlo estimates quote `sigma_multiplier` standard errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: u64,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_multiplier: Option<f64>,
}

impl Estimate {
    pub fn closed_form(value: f64) -> Self {
        Self {
            value,
            error: 0.0,
            evaluations: 0,
            method: Method::ClosedForm,
            sigma_multiplier: None,
        }
    }

    pub fn adaptive(value: f64, error: f64, evaluations: u64) -> Self {
        Self {
            value,
            error,
            evaluations,
            method: Method::Adaptive,
            sigma_multiplier: None,
        }
    }

    pub fn monte_carlo(value: f64, error: f64, evaluations: u64, k: f64) -> Self {
        Self {
            value,
            error,
            evaluations,
            method: Method::MonteCarlo,
            sigma_multiplier: Some(k),
        }
    }

    /// Whether `other` lies within the combined error bars, widened by `slack`.
    pub fn agrees_with(&self, other: &Estimate, slack: f64) -> bool {
        (self.value - other.value).abs() <= slack * (self.error + other.error)
    }

    pub fn relative_error(&self) -> f64 {
        if self.value == 0.0 {
            if self.error == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.error / self.value.abs()
        }
    }

    /// Square root with first-order error propagation.
    pub fn sqrt(self) -> Self {
        let v = self.value.max(0.0).sqrt();
        let e = if v > 0.0 {
            self.error / (2.0 * v)
        } else {
            self.error.sqrt()
        };
        Self {
            value: v,
            error: e,
            ..self
        }
    }

    fn merged_sigma(&self, other: &Estimate) -> Option<f64> {
        match (self.sigma_multiplier, other.sigma_multiplier) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }
}

impl Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
            evaluations: self.evaluations + rhs.evaluations,
            method: self.method.combine(rhs.method),
            sigma_multiplier: self.merged_sigma(&rhs),
        }
    }
}

impl Sub for Estimate {
    type Output = Estimate;
    fn sub(self, rhs: Estimate) -> Estimate {
        self + (-rhs)
    }
}

impl Neg for Estimate {
    type Output = Estimate;
    fn neg(self) -> Estimate {
        Estimate {
            value: -self.value,
            ..self
        }
    }
}

impl Mul<f64> for Estimate {
    type Output = Estimate;
    fn mul(self, k: f64) -> Estimate {
        Estimate {
            value: self.value * k,
            error: self.error * k.abs(),
            ..self
        }
    }
}

/// Change of variables used for [0, ∞).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mapping {
    /// t = u/(1−u) on u ∈ [0, 1).
    Rational,
    /// [0, 1] directly, then t = e^v on the tail with v mapped rationally.
    /// Suited to slowly decaying algebraic tails.
    Exponential,
    /// Doubling intervals [2^j − 1, 2^{j+1} − 1] until the contributions vanish.
    None,
}

/// Tolerances and options for the integrators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
    pub mapping: Mapping,
    pub seed: u64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_depth: 56,
            mapping: Mapping::Rational,
            seed: 0x1bc_1ab,
        }
    }
}

impl QuadSpec {
    pub fn with_tol(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn with_mapping(self, mapping: Mapping) -> Self {
        Self { mapping, ..self }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(crate::Error::Config(format!(
                "quad.rel_tol and quad.abs_tol must be positive, got {} and {}",
                self.rel_tol, self.abs_tol
            )));
        }
        if self.max_depth == 0 || self.max_depth > 60 {
            return Err(crate::Error::Config(format!(
                "quad.max_depth must lie in 1..=60, got {}",
                self.max_depth
            )));
        }
        Ok(())
    }
}

/// sin(x)/x with the removable point at 0.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_arithmetic() {
        let a = Estimate::adaptive(1.0, 0.1, 10);
        let b = Estimate::monte_carlo(2.0, 0.2, 100, 3.0);
        let c = a + b;
        assert_eq!(c.value, 3.0);
        assert!((c.error - 0.3).abs() < 1e-15);
        assert_eq!(c.method, Method::MonteCarlo);
        assert_eq!(c.sigma_multiplier, Some(3.0));
        let d = a * -2.0;
        assert_eq!(d.value, -2.0);
        assert_eq!(d.error, 0.2);
        assert!(a.agrees_with(&Estimate::closed_form(1.05), 1.0));
        assert!(!a.agrees_with(&Estimate::closed_form(1.2), 1.0));
    }

    #[test]
    fn sinc_is_smooth_through_switch() {
        let x = 1e-4;
        assert!((sinc(x * (1.0 - 1e-9)) - x.sin() / x).abs() < 1e-15);
        assert_eq!(sinc(0.0), 1.0);
    }

    #[test]
    fn spec_validation() {
        assert!(QuadSpec::default().validate().is_ok());
        assert!(QuadSpec::with_tol(0.0, 1e-12).validate().is_err());
    }
}

/// Bookkeeping for integrals nested inside integrand closures.
///
/// Inner results that failed only to meet their tolerance contribute their
/// best estimate; their relative error is folded into the outer error. Any
/// other inner failure is reported by [`InnerErrors::finish`].
pub(crate) struct InnerErrors {
    state: std::sync::Mutex<InnerState>,
}

struct InnerState {
    hard: Option<crate::Error>,
    max_rel: f64,
    max_mag: f64,
}

impl InnerErrors {
    pub(crate) fn new() -> Self {
        Self {
            state: std::sync::Mutex::new(InnerState {
                hard: None,
                max_rel: 0.0,
                max_mag: 0.0,
            }),
        }
    }

    /// The value to use for an inner result entering the outer integrand with
    /// factor `weight`.
    pub(crate) fn take(&self, r: crate::Result<Estimate>, weight: f64) -> f64 {
        let (value, error) = match r {
            Ok(e) => (e.value, e.error),
            Err(crate::Error::NonConvergence { value, error, .. }) => (value, error),
            Err(e) => {
                let mut s = self.state.lock().expect("poisoned");
                if s.hard.is_none() {
                    s.hard = Some(e);
                }
                return 0.0;
            }
        };
        let mag = (value * weight).abs();
        if mag > 0.0 {
            let mut s = self.state.lock().expect("poisoned");
            s.max_mag = s.max_mag.max(mag);
            if mag >= 1e-3 * s.max_mag {
                s.max_rel = s.max_rel.max(error / value.abs());
            }
        }
        value
    }

    pub(crate) fn finish(self, outer: crate::Result<Estimate>) -> crate::Result<Estimate> {
        let s = self.state.into_inner().expect("poisoned");
        if let Some(e) = s.hard {
            return Err(e);
        }
        let mut e = outer?;
        e.error += s.max_rel * e.value.abs();
        Ok(e)
    }
}
