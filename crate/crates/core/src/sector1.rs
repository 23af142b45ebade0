//! One particle coupled to at most one boson, at total momentum zero.
//!
//! The bare cutoff model has the bound-state condition E + I_Λ(1 − E) = 0 with
//! `I_Λ(a) = (2π)^{-3} ∫_{|k|≤Λ} dk / (c₂k² + a)`. Subtracting the linear
//! counterterm mΛ/(π²(2m+1)) leaves a finite limit, and the renormalized
//! condition reads E = √(1−E)/(4π c₂^{3/2}).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asym::{extract_a, ProbeGrid};
use crate::error::{Error, Result};
use crate::model::{c2, linear_counterterm, ModelParams};
use crate::quad::{integrate, Estimate, QuadSpec};
use crate::testfn::RadialTestFunction;

/// Label attached to the fitted √Λ term in reports.
pub const SQRT_DRIFT_NOTE: &str =
    "the +sqrt(Lambda) drift is an artifact of truncating to at most one boson, not a property of the full model";

const BISECTION_TOL: f64 = 1e-3;
const ROOT_TOL: f64 = 1e-12;
const MAX_NEWTON: u32 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Bare cutoff equation or the closed-form renormalized equation.
    Transcendental,
    /// Renormalized equation with the finite part obtained by quadrature.
    SubtractedQuadrature,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberSpectralResult {
    pub energy: f64,
    pub route: Route,
    pub iterations: u32,
    pub bracket: (f64, f64),
    /// |defining function| at the returned energy.
    pub residual: f64,
}

/// I_Λ(a) in closed form.
pub fn coupling_integral(m: f64, lambda_cut: f64, a: f64) -> f64 {
    let c2 = c2(m);
    (lambda_cut / c2 - (a.sqrt() / c2.powf(1.5)) * (lambda_cut * (c2 / a).sqrt()).atan()) / (2.0 * PI * PI)
}

/// dI_Λ/da in closed form.
fn coupling_integral_da(m: f64, lambda_cut: f64, a: f64) -> f64 {
    let c2 = c2(m);
    let x = lambda_cut * (c2 / a).sqrt();
    -(x.atan() / (2.0 * a.sqrt() * c2.powf(1.5)) - lambda_cut / (2.0 * a * c2 * (1.0 + x * x))) / (2.0 * PI * PI)
}

/// I_Λ(a) by radial quadrature.
pub fn coupling_integral_quad(m: f64, lambda_cut: f64, a: f64, spec: &QuadSpec) -> Result<Estimate> {
    let c2 = c2(m);
    Ok(integrate(|k| k * k / (c2 * k * k + a), 0.0, lambda_cut, spec)? * (1.0 / (2.0 * PI * PI)))
}

/// I_Λ(a) − mΛ/(π²(2m+1)) by quadrature of the subtracted integrand.
pub fn subtracted_integral_quad(m: f64, lambda_cut: f64, a: f64, spec: &QuadSpec) -> Result<Estimate> {
    let c2 = c2(m);
    Ok(integrate(|k| 1.0 / (c2 * k * k + a), 0.0, lambda_cut, spec)? * (-a / (2.0 * PI * PI * c2)))
}

/// Bisection down to `BISECTION_TOL`, then safeguarded Newton.
fn bracketed_root<F, D>(f: F, df: D, lo: f64, hi: f64) -> Result<(f64, u32, f64)>
where
    F: Fn(f64) -> Result<f64>,
    D: Fn(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = (lo, hi);
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(Error::Root(format!(
            "no sign change on [{lo:e}, {hi:e}]: f = {flo:e}, {fhi:e}"
        )));
    }
    let rising = flo < 0.0;
    let mut it = 0;
    while hi - lo > BISECTION_TOL * (1.0 + lo.abs().max(hi.abs())) {
        let mid = 0.5 * (lo + hi);
        if (f(mid)? < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
        it += 1;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_NEWTON {
        let fx = f(x)?;
        if fx.abs() < ROOT_TOL {
            return Ok((x, it, fx.abs()));
        }
        if (fx < 0.0) == rising {
            lo = x;
        } else {
            hi = x;
        }
        let step = x - fx / df(x)?;
        x = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        it += 1;
        if hi - lo < 4.0 * f64::EPSILON * x.abs().max(1.0) {
            return Ok((x, it, f(x)?.abs()));
        }
    }
    let fx = f(x)?;
    Err(Error::Root(format!("no convergence after {it} steps at E = {x:e}, residual {fx:e}")))
}

/// Ground state of the bare cutoff model.
pub fn bare_fiber_energy(m: f64, lambda_cut: f64) -> Result<FiberSpectralResult> {
    ModelParams::with_mass(m)?;
    if !(lambda_cut > 0.0 && lambda_cut.is_finite()) {
        return Err(Error::Domain(format!("cutoff must be positive, got {lambda_cut}")));
    }
    let lo = -2.0 * linear_counterterm(m, lambda_cut);
    let f = |e: f64| Ok(e + coupling_integral(m, lambda_cut, 1.0 - e));
    let df = |e: f64| Ok(1.0 - coupling_integral_da(m, lambda_cut, 1.0 - e));
    let (energy, iterations, residual) = bracketed_root(f, df, lo, 0.0)?;
    Ok(FiberSpectralResult {
        energy,
        route: Route::Transcendental,
        iterations,
        bracket: (lo, 0.0),
        residual,
    })
}

/// Finite part lim_Λ [I_Λ(a) − mΛ/(π²(2m+1))] from cutoffs 10³ and 10⁴ with
/// Richardson extrapolation in 1/Λ.
pub fn finite_part_quad(m: f64, a: f64, spec: &QuadSpec) -> Result<Estimate> {
    let (l1, l2) = (1e3, 1e4);
    let f1 = subtracted_integral_quad(m, l1, a, spec)?;
    let f2 = subtracted_integral_quad(m, l2, a, spec)?;
    let v = (l2 * f2.value - l1 * f1.value) / (l2 - l1);
    let e = (l2 * f2.error + l1 * f1.error) / (l2 - l1);
    // Remaining O(Λ⁻³) tail.
    let tail = a * a / (6.0 * PI * PI * c2(m).powi(3) * l1.powi(3));
    Ok(Estimate::adaptive(v, e + tail, f1.evaluations + f2.evaluations))
}

/// lim_Λ [I_Λ(a) − mΛ/(π²(2m+1))] = −√a/(4π c₂^{3/2}).
pub fn finite_part_closed(m: f64, a: f64) -> f64 {
    -a.sqrt() / (4.0 * PI * c2(m).powf(1.5))
}

/// Renormalized fiber eigenvalue, root of E + F(1 − E) = 0 with F the finite part.
pub fn renormalized_fiber_energy(m: f64, route: Route, spec: &QuadSpec) -> Result<FiberSpectralResult> {
    ModelParams::with_mass(m)?;
    let c2 = c2(m);
    let (lo, hi) = (0.0, 1.0);
    let (energy, iterations, residual) = match route {
        Route::Transcendental => bracketed_root(
            |e| Ok(e + finite_part_closed(m, 1.0 - e)),
            |e| Ok(1.0 + 1.0 / (8.0 * PI * c2.powf(1.5) * (1.0 - e).max(f64::MIN_POSITIVE).sqrt())),
            lo,
            hi,
        )?,
        Route::SubtractedQuadrature => {
            let f = |e: f64| {
                let a = 1.0 - e;
                if a == 0.0 {
                    return Ok(e);
                }
                Ok(e + finite_part_quad(m, a, spec)?.value)
            };
            // dF/da = −(1/2π²c₂) ∫₀^∞ c₂k²/(c₂k²+a)² dk
            let df = |e: f64| {
                let a = (1.0 - e).max(f64::MIN_POSITIVE);
                let d = crate::quad::integrate_semi_infinite(|k| k * k / (c2 * k * k + a).powi(2), spec)?;
                Ok(1.0 + d.value / (2.0 * PI * PI))
            };
            bracketed_root(f, df, lo, hi)?
        }
    };
    Ok(FiberSpectralResult {
        energy,
        route,
        iterations,
        bracket: (lo, hi),
        residual,
    })
}

/// Both renormalized routes; a consistency error if they differ by more than 10⁻⁶.
pub fn renormalized_fiber_energy_checked(m: f64, spec: &QuadSpec) -> Result<(FiberSpectralResult, FiberSpectralResult)> {
    let t = renormalized_fiber_energy(m, Route::Transcendental, spec)?;
    let q = renormalized_fiber_energy(m, Route::SubtractedQuadrature, spec)?;
    if (t.energy - q.energy).abs() > 1e-6 {
        return Err(Error::Consistency(format!(
            "renormalized energies disagree: {} vs {}",
            t.energy, q.energy
        )));
    }
    Ok((t, q))
}

/// Fit E_bare(Λ) ≈ slope·Λ + coeff_sqrt·√Λ + intercept.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceFit {
    pub slope_linear: f64,
    pub coeff_sqrt: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub condition: f64,
}

pub fn divergence_fit(m: f64, lambda_grid: &[f64]) -> Result<DivergenceFit> {
    let n = lambda_grid.len();
    if n < 6 {
        return Err(Error::Config(format!("divergence fit needs at least 6 cutoffs, got {n}")));
    }
    let (lo, hi) = lambda_grid
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), x| (l.min(*x), h.max(*x)));
    if !(lo > 0.0 && hi / lo >= 100.0) {
        return Err(Error::Config("divergence fit cutoffs must be positive and span two decades".into()));
    }
    let energies = lambda_grid
        .par_iter()
        .map(|&l| bare_fiber_energy(m, l).map(|r| r.energy))
        .collect::<Result<Vec<_>>>()?;
    let mut a = DMatrix::<f64>::zeros(n, 3);
    let b = DVector::from_vec(energies);
    for (i, &l) in lambda_grid.iter().enumerate() {
        a[(i, 0)] = l;
        a[(i, 1)] = l.sqrt();
        a[(i, 2)] = 1.0;
    }
    let scale: Vec<f64> = (0..3).map(|c| a.column(c).norm().recip()).collect();
    let mut s = a.clone();
    for (c, k) in scale.iter().enumerate() {
        s.column_mut(c).scale_mut(*k);
    }
    let svd = s.svd(true, true);
    let condition = svd.singular_values.max() / svd.singular_values.min();
    if !(condition <= crate::asym::MAX_CONDITION) {
        return Err(Error::Fit(format!("divergence fit condition {condition:e}")));
    }
    let y = svd.solve(&b, 0.0).map_err(|e| Error::Fit(e.to_string()))?;
    let coef: Vec<f64> = (0..3).map(|c| y[c] * scale[c]).collect();
    let residual = ((&a * DVector::from_vec(coef.clone()) - &b).norm_squared() / n as f64).sqrt();
    Ok(DivergenceFit {
        slope_linear: coef[0],
        coeff_sqrt: coef[1],
        intercept: coef[2],
        residual,
        condition,
    })
}

/// Predicted √Λ coefficient √c/(4π c₂^{3/2}) with c = m/(π²(2m+1)).
pub fn predicted_sqrt_coefficient(m: f64) -> f64 {
    (m / (PI * PI * (2.0 * m + 1.0))).sqrt() / (4.0 * PI * c2(m).powf(1.5))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountertermReport {
    pub a: f64,
    pub lambdas: Vec<f64>,
    /// I_Λ(a) − mΛ/(π²(2m+1)) per cutoff, by quadrature.
    pub finite_parts: Vec<Estimate>,
    pub expected_limit: f64,
    /// max − min over cutoffs ≥ `tail_from`.
    pub spread_tail: f64,
    /// max − min over all cutoffs.
    pub spread_all: f64,
    pub tail_from: f64,
    /// Largest |finite part − expected limit| · Λ, bounded if the remainder is O(1/Λ).
    pub max_scaled_deviation: f64,
}

impl CountertermReport {
    pub fn converged(&self, tol: f64) -> bool {
        self.spread_tail < tol
    }
}

pub fn counterterm_cancellation_check(m: f64, a_fixed: f64, lambda_grid: &[f64], spec: &QuadSpec) -> Result<CountertermReport> {
    ModelParams::with_mass(m)?;
    if !(a_fixed > 0.0) {
        return Err(Error::Domain(format!("a must be positive, got {a_fixed}")));
    }
    if lambda_grid.is_empty() || lambda_grid.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::Config("cutoffs must be positive".into()));
    }
    let finite_parts = lambda_grid
        .par_iter()
        .map(|&l| subtracted_integral_quad(m, l, a_fixed, spec))
        .collect::<Result<Vec<_>>>()?;
    let tail_from = 1e3;
    let spread = |pred: &dyn Fn(f64) -> bool| {
        let v: Vec<f64> = lambda_grid
            .iter()
            .zip(&finite_parts)
            .filter(|(l, _)| pred(**l))
            .map(|(_, e)| e.value)
            .collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
        }
    };
    let expected_limit = finite_part_closed(m, a_fixed);
    let max_scaled_deviation = lambda_grid
        .iter()
        .zip(&finite_parts)
        .map(|(l, e)| (e.value - expected_limit).abs() * l)
        .fold(0.0, f64::max);
    Ok(CountertermReport {
        a: a_fixed,
        lambdas: lambda_grid.to_vec(),
        spread_tail: spread(&|l| l >= tail_from),
        spread_all: spread(&|_| true),
        finite_parts,
        expected_limit,
        tail_from,
        max_scaled_deviation,
    })
}

/// Finite part of the Gψ probe per unit ψ(0) for a wide Gaussian, against
/// the closed form 1/(4π c₂^{3/2}) of the same subtraction at E = 0.
pub fn finite_part_cross_check(m: f64, width: f64, spec: &QuadSpec) -> Result<(Estimate, f64)> {
    let params = ModelParams::with_mass(m)?;
    let psi = RadialTestFunction::new(width)?;
    let a = extract_a(&params, &psi, [0.0; 3], &ProbeGrid::default(), spec)?;
    Ok((a * psi.value_at_center().recip(), -finite_part_closed(m, 1.0)))
}

/// CSV rows Λ, E_bare, E_bare + cΛ, finite part at a = 1.
pub fn sweep_csv(m: f64, lambdas: &[f64]) -> Result<String> {
    use std::fmt::Write as _;
    let mut s = String::from("lambda,e_bare,e_bare_plus_counterterm,finite_part\n");
    for &l in lambdas {
        let e = bare_fiber_energy(m, l)?.energy;
        let fp = -(1.0 / (2.0 * PI * PI * c2(m).powf(1.5))) * (l * c2(m).sqrt()).atan();
        let _ = writeln!(s, "{l:.16e},{e:.16e},{:.16e},{fp:.16e}", e + linear_counterterm(m, l));
    }
    Ok(s)
}
