use std::f64::consts::PI;

use super::{integrate, Estimate, QuadSpec};
use crate::error::{Error, Result};

const MIN_PANELS: usize = 8;
const MAX_PANELS: usize = 4000;
const WYNN_WINDOW: usize = 40;

/// ∫₀^∞ f(t) sin(ωt) dt.
///
/// The half-line is cut at the zeros kπ/ω of the oscillator; panel integrals
/// are summed and the partial sums are accelerated with the Wynn epsilon
/// algorithm. For ω = 0 the result is exactly 0.
pub fn integrate_oscillatory<F: Fn(f64) -> f64>(
    f: F,
    omega: f64,
    spec: &QuadSpec,
) -> Result<Estimate> {
    if omega == 0.0 {
        return Ok(Estimate::closed_form(0.0));
    }
    if !omega.is_finite() {
        return Err(Error::Domain(format!("frequency must be finite, got {omega}")));
    }
    if omega < 0.0 {
        return integrate_oscillatory(f, -omega, spec).map(|e| -e);
    }
    let width = PI / omega;
    let panel_spec = QuadSpec {
        abs_tol: spec.abs_tol * 0.1,
        ..*spec
    };
    let mut partial = Vec::with_capacity(64);
    let mut running = 0.0;
    let mut panel_error = 0.0;
    let mut evaluations = 0;
    let mut last_extrapolated: Option<f64> = None;
    let mut calm = 0;
    for k in 0..MAX_PANELS {
        let lo = k as f64 * width;
        let hi = lo + width;
        let p = match integrate(|t| f(t) * (omega * t).sin(), lo, hi, &panel_spec) {
            Ok(p) => p,
            Err(Error::NonConvergence {
                value,
                error,
                evaluations,
            }) => Estimate::adaptive(value, error, evaluations),
            Err(e) => return Err(e),
        };
        running += p.value;
        panel_error += p.error;
        evaluations += p.evaluations;
        partial.push(running);
        if partial.len() < MIN_PANELS {
            continue;
        }
        let window = &partial[partial.len().saturating_sub(WYNN_WINDOW)..];
        let (ext, ext_err) = wynn_epsilon(window);
        let tol = spec.abs_tol.max(spec.rel_tol * ext.abs());
        let change = last_extrapolated.map_or(f64::INFINITY, |prev| (ext - prev).abs());
        last_extrapolated = Some(ext);
        if change.max(ext_err) <= tol && p.value.abs() <= 1e3 * tol.max(ext.abs()) {
            calm += 1;
            if calm >= 2 {
                let error = change.max(ext_err) + panel_error;
                return Ok(Estimate::adaptive(ext, error, evaluations));
            }
        } else {
            calm = 0;
        }
    }
    let value = last_extrapolated.unwrap_or(running);
    Err(Error::NonConvergence {
        value,
        error: panel_error + (value - running).abs(),
        evaluations,
    })
}

/// Wynn epsilon extrapolation of a sequence of partial sums.
///
/// Returns the deepest even-column entry and the difference to the previous
/// even-column entry as an error indicator.
pub fn wynn_epsilon(s: &[f64]) -> (f64, f64) {
    let n = s.len();
    if n == 0 {
        return (0.0, f64::INFINITY);
    }
    if n < 3 {
        let last = s[n - 1];
        let err = if n == 2 { (s[1] - s[0]).abs() } else { f64::INFINITY };
        return (last, err);
    }
    // prev2 = column k−1, prev = column k; each column shrinks by one.
    let mut prev2 = vec![0.0; n + 1];
    let mut prev: Vec<f64> = s.to_vec();
    let mut best = s[n - 1];
    let mut best_err = (s[n - 1] - s[n - 2]).abs();
    let mut k = 0;
    while prev.len() > 1 {
        let mut next = Vec::with_capacity(prev.len() - 1);
        let mut broke = false;
        for i in 0..prev.len() - 1 {
            let d = prev[i + 1] - prev[i];
            if d == 0.0 || !d.is_finite() {
                broke = true;
                break;
            }
            next.push(prev2[i + 1] + 1.0 / d);
        }
        if broke || next.is_empty() {
            break;
        }
        k += 1;
        if k % 2 == 0 {
            let cand = next[next.len() - 1];
            if !cand.is_finite() {
                break;
            }
            let err = if next.len() >= 2 {
                (cand - next[next.len() - 2]).abs()
            } else {
                (cand - best).abs()
            };
            best_err = err;
            best = cand;
        }
        prev2 = prev;
        prev = next;
    }
    (best, best_err)
}

/// 4π ∫₀^∞ sin(t) t²/(λ²+t²)² dt, which behaves as −4π log λ + O(1) for small λ.
pub fn log_expansion_integral(lambda: f64, spec: &QuadSpec) -> Result<Estimate> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let l2 = lambda * lambda;
    Ok(integrate_oscillatory(|t| t * t / (l2 + t * t).powi(2), 1.0, spec)? * (4.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_integral() {
        let e = integrate_oscillatory(|t| 1.0 / t, 1.0, &QuadSpec::default()).unwrap();
        assert!((e.value - PI / 2.0).abs() < 1e-8, "{e:?}");
    }

    #[test]
    fn zero_frequency_is_zero() {
        let e = integrate_oscillatory(|t: f64| (-t).exp(), 0.0, &QuadSpec::default()).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn damped_sine_matches_closed_form() {
        // ∫ e^{-t} sin(ωt) dt = ω/(1+ω²)
        for omega in [0.01, 0.3, 1.0, 7.0, -2.0] {
            let e = integrate_oscillatory(|t: f64| (-t).exp(), omega, &QuadSpec::default()).unwrap();
            let want = omega / (1.0 + omega * omega);
            assert!((e.value - want).abs() < 1e-9, "omega {omega}: {e:?}");
        }
    }

    #[test]
    fn log_expansion_slope() {
        let spec = QuadSpec::with_tol(1e-10, 1e-13);
        let a = log_expansion_integral(1e-2, &spec).unwrap();
        let b = log_expansion_integral(1e-3, &spec).unwrap();
        let slope = (a.value - b.value) / 10f64.ln();
        assert!((slope / (-4.0 * PI) - 1.0).abs() < 0.01, "{slope}");
        assert!(log_expansion_integral(0.0, &spec).is_err());
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // log 2 = 1 − 1/2 + 1/3 − ...
        let mut s = Vec::new();
        let mut acc = 0.0;
        for k in 1..=20 {
            acc += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            s.push(acc);
        }
        let (v, _) = wynn_epsilon(&s);
        assert!((v - 2f64.ln()).abs() < 1e-12, "{v}");
    }
}
