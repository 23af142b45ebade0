//! Bounding integrals for G, the Schur-test constants of T_od and the
//! a(δ)L⁻¹ estimate, with their dependence on the boson number n.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::quad::{integrate, integrate_mc, integrate_semi_infinite, Estimate, Mapping, QuadSpec, Sampler};
use crate::testfn::{IsotropicState, RadialTestFunction};

pub const MAX_SECTOR: usize = 8;
const GRID_POINTS: usize = 17;

fn check_mass(m: f64) -> Result<()> {
    ModelParams::with_mass(m).map(|_| ())
}

fn tail_spec(spec: &QuadSpec) -> QuadSpec {
    spec.with_mapping(Mapping::Exponential)
}

/// ∫_{ℝ³} |η|^{-b} (1+η²)^{-a} dη.
///
/// Split at |η| = 1; each half becomes a finite integral after a power
/// substitution that absorbs the endpoint behaviour.
pub fn eta_integral(a: f64, b: f64, spec: &QuadSpec) -> Result<Estimate> {
    let inner = 3.0 - b;
    let outer = 2.0 * a + b - 3.0;
    if !(inner > 0.0 && outer > 0.0) {
        return Err(Error::Domain(format!("η-integral diverges for a = {a}, b = {b}")));
    }
    let near = integrate(|u| (1.0 + u.powf(2.0 / inner)).powf(-a), 0.0, 1.0, spec)? * (1.0 / inner);
    let far = integrate(|w| (1.0 + w.powf(2.0 / outer)).powf(-a), 0.0, 1.0, spec)? * (1.0 / outer);
    Ok((near + far) * (4.0 * PI))
}

/// sup of `f` over a 17-point log grid on [lo, hi], refined by golden-section
/// search in log t between the neighbours of the best grid point.
fn grid_sup<F>(f: F, lo: f64, hi: f64) -> Result<(f64, Estimate)>
where
    F: Fn(f64) -> Result<Estimate> + Sync,
{
    let grid: Vec<(f64, Estimate)> = (0..GRID_POINTS)
        .into_par_iter()
        .map(|i| {
            let t = lo * (hi / lo).powf(i as f64 / (GRID_POINTS - 1) as f64);
            Ok((t, f(t)?))
        })
        .collect::<Result<_>>()?;
    let (i, mut best) = grid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.value.total_cmp(&b.1 .1.value))
        .map(|(i, p)| (i, *p))
        .expect("non-empty grid");
    let (mut a, mut b) = (grid[i.saturating_sub(1)].0.ln(), grid[(i + 1).min(GRID_POINTS - 1)].0.ln());
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1.exp())?;
    let mut f2 = f(x2.exp())?;
    while b - a > 1e-9 {
        if f1.value > f2.value {
            (b, x2, f2) = (x2, x1, f1);
            x1 = b - g * (b - a);
            f1 = f(x1.exp())?;
        } else {
            (a, x1, f1) = (x1, x2, f2);
            x2 = a + g * (b - a);
            f2 = f(x2.exp())?;
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v.value > best.1.value {
            best = (x.exp(), v);
        }
    }
    Ok(best)
}

/// Power law value ≈ C (n+1)^p fitted in log–log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSweep {
    pub n_values: Vec<usize>,
    pub values: Vec<Estimate>,
    pub fitted_exponent: f64,
    pub prefactor: f64,
    /// RMS residual of the log–log fit.
    pub fit_residual: f64,
}

impl BoundSweep {
    pub fn new(n_values: Vec<usize>, values: Vec<Estimate>) -> Result<Self> {
        if n_values.len() != values.len() || n_values.len() < 2 {
            return Err(Error::Fit("sweep needs at least two matching points".into()));
        }
        if n_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Fit("sweep sector indices must be ascending".into()));
        }
        if values.iter().any(|v| !(v.value > 0.0)) {
            return Err(Error::Fit("sweep values must be positive".into()));
        }
        let x: Vec<f64> = n_values.iter().map(|n| ((n + 1) as f64).ln()).collect();
        let y: Vec<f64> = values.iter().map(|v| v.value.ln()).collect();
        let k = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let p = sxy / sxx;
        let c = my - p * mx;
        let res = (x.iter().zip(&y).map(|(a, b)| (b - c - p * a).powi(2)).sum::<f64>() / k).sqrt();
        Ok(Self {
            n_values,
            values,
            fitted_exponent: p,
            prefactor: c.exp(),
            fit_residual: res,
        })
    }

    /// `n,value,error` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,value,error\n");
        for (n, v) in self.n_values.iter().zip(&self.values) {
            out.push_str(&format!("{n},{:.16e},{:.16e}\n", v.value, v.error));
        }
        out
    }
}

/// (2π)^{-3} [∫ (k²+n+1)^{-(2−2s)} dk + sup_t t ∫ (t+k²+n+1)^{-(2−2s)} dk],
/// the constant bounding ‖L^s Gψ⁽ⁿ⁾‖² / ‖ψ⁽ⁿ⁾‖². Independent of m.
pub fn gbound_constant(m: f64, n: usize, s: f64, spec: &QuadSpec) -> Result<Estimate> {
    check_mass(m)?;
    if !(0.0..0.25).contains(&s) {
        return Err(Error::Domain(format!("s must lie in [0, 1/4), got {s}")));
    }
    let big_n = (n + 1) as f64;
    let e = 2.0 - 2.0 * s;
    // k → √(N+t) η turns both terms into η-integrals.
    let first = eta_integral(e, 0.0, spec)? * big_n.powf(1.5 - e);
    let j = eta_integral(e, 2.0, spec)?;
    let (_, sup) = grid_sup(|t| Ok(j * (t * (t + big_n).powf(0.5 - e))), 1e-2 * big_n, 1e4 * big_n)?;
    Ok((first + sup) * (2.0 * PI).powi(-3))
}

pub fn gbound_sweep(m: f64, s: f64, n_values: &[usize], spec: &QuadSpec) -> Result<BoundSweep> {
    let values = n_values
        .par_iter()
        .map(|&n| gbound_constant(m, n, s, spec))
        .collect::<Result<Vec<_>>>()?;
    BoundSweep::new(n_values.to_vec(), values)
}

/// (Gφ)⁽ʲ⁾(p, K) for φ⁽⁰⁾ = ψ, built recursively from
/// (Gφ)⁽ʲ⁾(p, K) = −(2π)^{-3/2} j^{-1/2} Σᵢ φ⁽ʲ⁻¹⁾(p + kᵢ, K̂ᵢ) / L_j(p, K).
fn g_iterate<S: IsotropicState + ?Sized>(m: f64, psi: &S, p: [f64; 3], ks: &[[f64; 3]]) -> f64 {
    let j = ks.len();
    if j == 0 {
        return psi.fourier_radial((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt());
    }
    let l = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / (2.0 * m)
        + ks.iter().map(|k| k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sum::<f64>()
        + j as f64;
    let mut rest = Vec::with_capacity(j - 1);
    let mut sum = 0.0;
    for i in 0..j {
        rest.clear();
        rest.extend(ks.iter().enumerate().filter(|(q, _)| *q != i).map(|(_, k)| *k));
        let pi = [p[0] + ks[i][0], p[1] + ks[i][1], p[2] + ks[i][2]];
        sum += g_iterate(m, psi, pi, &rest);
    }
    -(2.0 * PI).powf(-1.5) / (j as f64).sqrt() * sum / l
}

/// ‖Gʲψ‖ for j = 0..=j_max, ψ a centred Gaussian in the vacuum sector.
pub fn g_neumann_decay(m: f64, psi: &RadialTestFunction, j_max: usize, samples: u64, seed: u64) -> Result<Vec<Estimate>> {
    check_mass(m)?;
    if j_max > 3 {
        return Err(Error::Domain(format!("j_max must be at most 3, got {j_max}")));
    }
    if psi.center != [0.0; 3] {
        return Err(Error::Domain("the Neumann-series estimate needs a centred state".into()));
    }
    let mut out = vec![Estimate::closed_form(psi.norm_sq().sqrt())];
    for j in 1..=j_max {
        let sampler = Sampler::Product(vec![
            Sampler::Gaussian {
                dim: 3,
                scale: psi.momentum_scale(),
            },
            Sampler::Cauchy3 { vectors: j, scale: 1.0 },
        ]);
        let f = |x: &[f64]| {
            let ks: Vec<[f64; 3]> = x[3..].chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
            let mut p = [x[0], x[1], x[2]];
            for k in &ks {
                for d in 0..3 {
                    p[d] -= k[d];
                }
            }
            g_iterate(m, psi, p, &ks).powi(2)
        };
        let norm_sq = integrate_mc(f, 3 * (j + 1), &sampler, samples, seed.wrapping_add(j as u64))?;
        if !(norm_sq.value > 0.0 && norm_sq.error < norm_sq.value) {
            return Err(Error::NonConvergence {
                value: norm_sq.value,
                error: norm_sq.error,
                evaluations: norm_sq.evaluations,
            });
        }
        out.push(norm_sq.sqrt());
    }
    Ok(out)
}

/// Schur-test surrogates for the sum over i in T_od, per pair (μ, ν).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchurConstants {
    pub n: usize,
    pub epsilon: f64,
    /// sup_K Σᵢ(1+kᵢ²) ∫ κ^{3/2−ε} (1+ξ²)^{−1−ε} dξ over the grid.
    pub lambda: Estimate,
    /// sup_K Σᵢ(1/n+kᵢ²)^{1+ε} ∫ κ^{1/2+ε} (1+η²)^{−1} dη / (1+K²) over the grid.
    pub lambda_prime: Estimate,
    /// n-independent bound ∫ (1+η²)^{−(3/2−ε)} η^{−2(1+ε)} dη for `lambda`.
    pub lambda_bound: Estimate,
    /// n-independent integral ∫ (1+η²)^{−(1/2+ε)} η^{−2} dη entering `lambda_prime`.
    pub lambda_prime_bound: Estimate,
    pub particles: usize,
}

impl SchurConstants {
    /// M² √(ΛΛ′), summing the pair constants over μ, ν.
    pub fn operator_bound(&self) -> f64 {
        (self.particles * self.particles) as f64 * (self.lambda.value * self.lambda_prime.value).sqrt()
    }
}

pub fn schur_constants(m: f64, particles: usize, n: usize, epsilon: f64, spec: &QuadSpec) -> Result<SchurConstants> {
    check_mass(m)?;
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    if !(1..=MAX_SECTOR).contains(&n) {
        return Err(Error::Domain(format!("sector must lie in 1..={MAX_SECTOR}, got {n}")));
    }
    if particles == 0 {
        return Err(Error::Config("at least one particle is required".into()));
    }
    let nf = n as f64;
    let ts = tail_spec(spec);
    // Λ: Σᵢ(1+kᵢ²) = n + K², so the sup runs over t = K².
    let lam = |t: f64| -> Result<Estimate> {
        let i = integrate_semi_infinite(
            |x| 4.0 * PI * x * x * (nf + 1.0 + t + x * x).powf(-(1.5 - epsilon)) * (1.0 + x * x).powf(-1.0 - epsilon),
            &ts,
        )?;
        Ok(i * (nf + t))
    };
    let (_, lambda) = grid_sup(lam, 1e-2 * (nf + 1.0), 1e6 * (nf + 1.0))?;
    // Λ′: j coordinates with kᵢ² = X, the others zero.
    let j_int = |t: f64| {
        integrate_semi_infinite(
            |e| 4.0 * PI * e * e * (nf + 1.0 + t + e * e).powf(-(0.5 + epsilon)) / (1.0 + e * e),
            &ts,
        )
    };
    let mut lambda_prime = Estimate::closed_form(0.0);
    for j in 1..=n {
        let jf = j as f64;
        let w = |x: f64| -> Result<Estimate> {
            let k2 = jf * x;
            let sum = jf * (1.0 / nf + x).powf(1.0 + epsilon) + (nf - jf) * nf.powf(-1.0 - epsilon);
            Ok(j_int(k2)? * (sum / (1.0 + k2)))
        };
        let (_, v) = grid_sup(w, 1e-3, 1e6)?;
        if v.value > lambda_prime.value {
            lambda_prime = v;
        }
    }
    Ok(SchurConstants {
        n,
        epsilon,
        lambda,
        lambda_prime,
        lambda_bound: eta_integral(1.5 - epsilon, 2.0 + 2.0 * epsilon, spec)?,
        lambda_prime_bound: eta_integral(0.5 + epsilon, 2.0, spec)?,
        particles,
    })
}

/// The a(δ)L⁻¹ bound in sector n at exponent s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SBound {
    pub n: usize,
    pub s: f64,
    /// I(s) = ∫_{ℝ³} (1+k²)^{−(3/2+2s)} dk by quadrature.
    pub integral: Estimate,
    /// π^{3/2} Γ(2s) / Γ(3/2+2s).
    pub integral_closed: f64,
    /// (n+1)^{1/4+s} √I(s).
    pub value: Estimate,
    /// (n+1)^{1/4+s} / √s.
    pub envelope: f64,
}

pub fn sbound_integrals(m: f64, n: usize, s: f64, spec: &QuadSpec) -> Result<SBound> {
    check_mass(m)?;
    if !(s > 0.0 && s <= 0.5) {
        return Err(Error::Domain(format!("s must lie in (0, 1/2], got {s}")));
    }
    let integral = eta_integral(1.5 + 2.0 * s, 0.0, spec)?;
    let nn = (n + 1) as f64;
    let pw = nn.powf(0.25 + s);
    Ok(SBound {
        n,
        s,
        integral,
        integral_closed: PI.powf(1.5) * gamma(2.0 * s) / gamma(1.5 + 2.0 * s),
        value: integral.sqrt() * pw,
        envelope: pw / s.sqrt(),
    })
}

/// The s minimizing the envelope, 1/log(n+1)², clamped to (0, 1/2].
pub fn log_envelope_s(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("the log envelope needs n ≥ 1".into()));
    }
    Ok((1.0 / ((n + 1) as f64).ln().powi(2)).min(0.5))
}

/// value(n)·(n+1)^{-1/4} / (1 + log(n+1)) at s = 1/log(n+1)².
pub fn log_envelope_ratios(m: f64, n_values: &[usize], spec: &QuadSpec) -> Result<Vec<f64>> {
    n_values
        .iter()
        .map(|&n| {
            let b = sbound_integrals(m, n, log_envelope_s(n)?, spec)?;
            let nn = (n + 1) as f64;
            Ok(b.value.value * nn.powf(-0.25) / (1.0 + nn.ln()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::beta::beta;

    fn spec() -> QuadSpec {
        QuadSpec::with_tol(1e-10, 1e-14)
    }

    #[test]
    fn eta_integral_oracles() {
        let a = eta_integral(1.5, 2.0, &spec()).unwrap();
        assert!((a.value - 4.0 * PI).abs() < 1e-8, "{a:?}");
        let b = eta_integral(1.0, 2.0, &spec()).unwrap();
        assert!((b.value - 2.0 * PI * PI).abs() < 1e-8, "{b:?}");
        let c = eta_integral(2.0, 0.0, &spec()).unwrap();
        assert!((c.value - PI * PI).abs() < 1e-8);
        // ∫ η^{-2-2ε}(1+η²)^{-(3/2-ε)} = 4π/(1−2ε)
        for eps in [0.1, 0.3] {
            let d = eta_integral(1.5 - eps, 2.0 + 2.0 * eps, &spec()).unwrap();
            assert!((d.value / (4.0 * PI / (1.0 - 2.0 * eps)) - 1.0).abs() < 1e-8);
        }
        assert!(eta_integral(0.5, 2.0, &spec()).is_err());
    }

    #[test]
    fn gbound_closed_form() {
        // first = 2π (n+1)^{2s−1/2} B(3/2, 1/2−2s);
        // sup_t t(t+N)^{2s−3/2} · 2π B(1/2, 3/2−2s) at t* = N/(1/2−2s).
        for (n, s) in [(0usize, 0.0), (3, 0.1), (8, 0.2)] {
            let nn = (n + 1) as f64;
            let first = 2.0 * PI * nn.powf(2.0 * s - 0.5) * beta(1.5, 0.5 - 2.0 * s);
            let ts = nn / (0.5 - 2.0 * s);
            let second = ts * (ts + nn).powf(2.0 * s - 1.5) * 2.0 * PI * beta(0.5, 1.5 - 2.0 * s);
            let want = (first + second) / (2.0 * PI).powi(3);
            let got = gbound_constant(0.5, n, s, &spec()).unwrap();
            assert!((got.value / want - 1.0).abs() < 1e-6, "n={n} s={s}: {got:?} vs {want}");
        }
        // s = 0, n = 0 first term is π².
        assert!((2.0 * PI * beta(1.5, 0.5) - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn gbound_scaling_and_monotonicity() {
        let sweep = gbound_sweep(0.5, 0.1, &(0..=8).collect::<Vec<_>>(), &spec()).unwrap();
        assert!((sweep.fitted_exponent / -0.3 - 1.0).abs() < 0.02, "{sweep:?}");
        assert!(sweep.values.windows(2).all(|w| w[1].value < w[0].value));
        let other = gbound_constant(3.0, 2, 0.1, &spec()).unwrap();
        assert_eq!(other.value, sweep.values[2].value);
    }

    #[test]
    fn gbound_grows_like_inverse_distance_to_quarter() {
        assert!(gbound_constant(0.5, 0, 0.25, &spec()).is_err());
        assert!(gbound_constant(0.5, 0, -0.1, &spec()).is_err());
        let v: Vec<f64> = [1e-2, 1e-3]
            .iter()
            .map(|d| gbound_constant(0.5, 0, 0.25 - d, &spec()).unwrap().value * d)
            .collect();
        assert!((v[0] / v[1] - 1.0).abs() < 0.05, "{v:?}");
    }

    #[test]
    fn neumann_decay_first_iterate_matches_closed_norm() {
        let psi = RadialTestFunction::new(1.0).unwrap();
        let norms = g_neumann_decay(0.5, &psi, 2, 4_000_000, 5).unwrap();
        assert_eq!(norms[0].value, 1.0);
        let closed = crate::ops::g_norm_sq(0.5, &psi, &QuadSpec::default()).unwrap().sqrt();
        assert!((norms[1].value - closed.value).abs() <= norms[1].error + closed.error, "{:?} vs {closed:?}", norms[1]);
        let r1 = norms[1].value / norms[0].value;
        let r2 = norms[2].value / norms[1].value;
        assert!(r2 <= r1 * 2f64.powf(-0.25) * 2.0, "{r1} {r2}");
        assert!(g_neumann_decay(0.5, &psi, 4, 1000, 1).is_err());
    }

    #[test]
    fn neumann_decay_is_reproducible() {
        let psi = RadialTestFunction::new(0.8).unwrap();
        let a = g_neumann_decay(1.0, &psi, 3, 20_000, 9).unwrap();
        let b = g_neumann_decay(1.0, &psi, 3, 20_000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn schur_constants_are_uniform_in_n() {
        let vals: Vec<SchurConstants> =
            (4..=8).map(|n| schur_constants(0.5, 1, n, 0.1, &spec()).unwrap()).collect();
        for get in [|c: &SchurConstants| c.lambda.value, |c: &SchurConstants| c.lambda_prime.value] {
            let v: Vec<f64> = vals.iter().map(get).collect();
            let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(l, h), x| (l.min(*x), h.max(*x)));
            assert!(hi / lo - 1.0 < 0.2, "{v:?}");
        }
        for c in &vals {
            assert!(c.lambda.value <= c.lambda_bound.value * (1.0 + 1e-8));
        }
    }

    #[test]
    fn schur_lambda_prime_grows_as_epsilon_vanishes() {
        let v: Vec<f64> = [1e-1, 1e-2]
            .iter()
            .map(|e| schur_constants(0.5, 1, 2, *e, &spec()).unwrap().lambda_prime_bound.value * e)
            .collect();
        // ∫(1+η²)^{-(1/2+ε)}η^{-2}dη ≈ 2π/ε
        assert!((v[1] / (2.0 * PI) - 1.0).abs() < 0.05, "{v:?}");
        assert!(schur_constants(0.5, 1, 2, 0.0, &spec()).is_err());
        assert!(schur_constants(0.5, 1, 9, 0.1, &spec()).is_err());
    }

    #[test]
    fn sbound_integral_closed_form() {
        for s in [1e-3, 1e-2, 0.1, 0.25, 0.5] {
            let b = sbound_integrals(0.5, 0, s, &spec()).unwrap();
            assert!((b.integral.value / b.integral_closed - 1.0).abs() < 1e-8, "{b:?}");
        }
        let q = sbound_integrals(0.5, 0, 0.25, &spec()).unwrap();
        assert!((q.integral.value - PI * PI).abs() < 1e-8);
        assert!(sbound_integrals(0.5, 0, 0.0, &spec()).is_err());
        assert!(sbound_integrals(0.5, 0, 0.6, &spec()).is_err());
    }

    #[test]
    fn sbound_envelope_and_small_s() {
        let sq: Vec<f64> = [1e-1, 1e-2, 1e-3]
            .iter()
            .map(|s| sbound_integrals(0.5, 3, *s, &spec()).unwrap().value.value * s.sqrt())
            .collect();
        assert!(sq.iter().all(|v| *v < 10.0), "{sq:?}");
        let c = (0..=8)
            .map(|n| {
                let b = sbound_integrals(0.5, n, 0.1, &spec()).unwrap();
                b.value.value / b.envelope
            })
            .fold(0.0, f64::max);
        for n in 0..=8 {
            let b = sbound_integrals(0.5, n, 0.1, &spec()).unwrap();
            assert!(b.value.value <= c * b.envelope * (1.0 + 1e-12));
        }
    }

    #[test]
    fn log_envelope_is_flat() {
        let r = log_envelope_ratios(0.5, &(3..=8).collect::<Vec<_>>(), &spec()).unwrap();
        let (lo, hi) = r.iter().fold((f64::INFINITY, 0.0f64), |(l, h), x| (l.min(*x), h.max(*x)));
        assert!(hi / lo - 1.0 < 0.1, "{r:?}");
    }
}
