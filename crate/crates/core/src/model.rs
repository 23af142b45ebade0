//! Model parameters, the free symbol and closed-form constants.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the model: x-particle mass, particle count, boson sector,
/// UV cutoff and resolvent shift.
///
/// Bosons have mass 1/2 and rest energy 1 throughout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub m: f64,
    pub particles: usize,
    pub sector: usize,
    pub lambda_cut: f64,
    pub c0: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            m: 0.5,
            particles: 1,
            sector: 0,
            lambda_cut: 0.0,
            c0: 1.0,
        }
    }
}

impl ModelParams {
    pub fn new(m: f64, particles: usize, sector: usize, lambda_cut: f64, c0: f64) -> Result<Self> {
        let p = Self {
            m,
            particles,
            sector,
            lambda_cut,
            c0,
        };
        p.validate()?;
        Ok(p)
    }

    /// Single particle, vacuum sector, no cutoff, unit shift.
    pub fn with_mass(m: f64) -> Result<Self> {
        Self::new(m, 1, 0, 0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(Error::Config(format!("model.m must be positive, got {}", self.m)));
        }
        if self.particles == 0 {
            return Err(Error::Config("model.particles must be at least 1".into()));
        }
        if !(self.lambda_cut.is_finite() && self.lambda_cut >= 0.0) {
            return Err(Error::Config(format!(
                "model.lambda_cut must be non-negative, got {}",
                self.lambda_cut
            )));
        }
        if !(self.c0.is_finite() && self.c0 > 0.0) {
            return Err(Error::Config(format!("model.c0 must be positive, got {}", self.c0)));
        }
        Ok(())
    }

    /// 2m/(2m+1).
    pub fn reduced_mass_factor(&self) -> f64 {
        reduced_mass_factor(self.m)
    }

    /// (2m+1)/(2m).
    pub fn c2(&self) -> f64 {
        c2(self.m)
    }

    pub(crate) fn require_single_vacuum(&self, what: &str) -> Result<()> {
        if self.particles != 1 || self.sector != 0 {
            return Err(Error::Config(format!(
                "{what} is implemented for one particle in the vacuum sector (M=1, n=0), got M={}, n={}",
                self.particles, self.sector
            )));
        }
        Ok(())
    }
}

pub fn reduced_mass_factor(m: f64) -> f64 {
    2.0 * m / (2.0 * m + 1.0)
}

pub fn c2(m: f64) -> f64 {
    (2.0 * m + 1.0) / (2.0 * m)
}

pub(crate) fn norm_sq(v: &[f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

/// L(P, K) = |P|²/(2m) + |K|² + n, with one 3-vector per particle and per boson.
pub fn free_symbol(params: &ModelParams, p: &[[f64; 3]], k: &[[f64; 3]]) -> Result<f64> {
    if p.len() != params.particles {
        return Err(Error::Config(format!(
            "expected {} x-momenta, got {}",
            params.particles,
            p.len()
        )));
    }
    if k.len() != params.sector {
        return Err(Error::Config(format!(
            "expected {} boson momenta, got {}",
            params.sector,
            k.len()
        )));
    }
    Ok(free_symbol_unchecked(params.m, p, k))
}

pub(crate) fn free_symbol_unchecked(m: f64, p: &[[f64; 3]], k: &[[f64; 3]]) -> f64 {
    let kin_x: f64 = p.iter().map(norm_sq).sum::<f64>() / (2.0 * m);
    let kin_b: f64 = k.iter().map(norm_sq).sum();
    kin_x + kin_b + k.len() as f64
}

/// Coefficient of the logarithmic singularity of the dressed map.
///
/// The bracket `w/(2m+1) − (2m+1)·atan(1/w)`, `w = 2√(m(m+1))`, cancels to
/// O(1/m²) for large m; it is summed as an alternating series in `x = 1/w`
/// whenever that series converges quickly.
pub fn gamma_m(m: f64) -> f64 {
    let rmf = reduced_mass_factor(m);
    (2.0 * PI).powi(-3) * rmf * rmf * rmf * gamma_bracket(m)
}

fn gamma_bracket(m: f64) -> f64 {
    let w = 2.0 * (m * (m + 1.0)).sqrt();
    let x = 1.0 / w;
    if x < 0.75 {
        // x − (1+x²)·atan(x) = x·Σ_{k≥1} (−1)^k 2x^{2k}/(4k²−1)
        let x2 = x * x;
        let mut pow = 1.0;
        let mut sum = 0.0;
        for k in 1..400 {
            pow *= -x2;
            let kf = k as f64;
            let term = 2.0 * pow / (4.0 * kf * kf - 1.0);
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        sum / (1.0 + x2).sqrt()
    } else {
        let s = 2.0 * m + 1.0;
        w / s - s * x.atan()
    }
}

/// Linear cutoff counterterm mΛ/(π²(2m+1)).
pub fn linear_counterterm(m: f64, lambda_cut: f64) -> f64 {
    m * lambda_cut / (PI * PI * (2.0 * m + 1.0))
}

/// Coefficient of the 1/|x−y| divergence of Gψ, m/(2π(2m+1)).
pub fn b_coefficient(m: f64) -> f64 {
    m / (2.0 * PI * (2.0 * m + 1.0))
}

/// f_m(r) = (b/r + γ_m log r)/M.
pub fn singular_profile(m: f64, particles: usize, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("separation must be positive, got {r}")));
    }
    if particles == 0 {
        return Err(Error::Domain("particle count must be positive".into()));
    }
    Ok((b_coefficient(m) / r + gamma_m(m) * r.ln()) / particles as f64)
}

/// Closed form of ∫d³ξ [(β + c₂ξ²)(γ + c₂(ξ + ρ/(2m+1))²)]⁻¹ as a function of |ρ|.
pub fn arctan_convolution(m: f64, beta: f64, gamma: f64, rho: f64) -> Result<f64> {
    if !(beta > 0.0 && gamma > 0.0) {
        return Err(Error::Domain(format!(
            "beta and gamma must be positive, got {beta}, {gamma}"
        )));
    }
    if !(rho >= 0.0) {
        return Err(Error::Domain(format!("rho must be non-negative, got {rho}")));
    }
    let s = 2.0 * m + 1.0;
    let rmf = reduced_mass_factor(m);
    let denom = (2.0 * m * s).sqrt() * (beta.sqrt() + gamma.sqrt());
    let z = rho / denom;
    Ok(2.0 * PI * PI * rmf * rmf * s / denom * atan_over_x(z))
}

/// atan(x)/x with the removable point at 0.
pub(crate) fn atan_over_x(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 3.0 + x2 * x2 / 5.0
    } else {
        x.atan() / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // 40-digit evaluations of the closed form.
    const GAMMA_ORACLE: [(f64, f64); 10] = [
        (0.01, -3.6555746305009602e-8),
        (0.1, -1.1746466887254094e-5),
        (0.5, -9.1298121103124108e-5),
        (1.0, -9.162026267701505e-5),
        (2.0, -5.5717661796978736e-5),
        (10.0, -5.2681525985190433e-6),
        (100.0, -6.5536321429415429e-8),
        (1000.0, -6.7022976687140436e-10),
        (1e4, -6.7173901631380897e-12),
        (1e6, -6.7190528759347434e-16),
    ];

    #[test]
    fn gamma_matches_high_precision_values() {
        for (m, want) in GAMMA_ORACLE {
            let got = gamma_m(m);
            assert!(
                ((got - want) / want).abs() < 1e-12,
                "m={m}: got {got:e}, want {want:e}"
            );
        }
    }

    #[test]
    fn gamma_vanishes_at_large_mass() {
        assert!(gamma_m(1e6).abs() < 1e-12);
        for m in [10.0, 1e2, 1e3, 1e4] {
            assert!((gamma_m(m) * m * m).abs() < 1e-3);
        }
        // γ·m² → −(2π)⁻³/6
        let lim = -(2.0 * PI).powi(-3) / 6.0;
        assert!((gamma_m(1e6) * 1e12 / lim - 1.0).abs() < 1e-5);
    }

    #[test]
    fn gamma_branches_agree_at_switch() {
        // x = 0.75 ⇔ m(m+1) = 4/9
        let m_switch = (-1.0 + (1.0f64 + 16.0 / 9.0).sqrt()) / 2.0;
        let lo = gamma_m(m_switch * (1.0 - 1e-12));
        let hi = gamma_m(m_switch * (1.0 + 1e-12));
        assert!(((lo - hi) / lo).abs() < 1e-10);
    }

    #[test]
    fn free_symbol_examples() {
        let p3 = ModelParams::new(0.5, 1, 3, 0.0, 1.0).unwrap();
        let v = free_symbol(&p3, &[[0.0; 3]], &[[0.0; 3]; 3]).unwrap();
        assert_eq!(v, 3.0);
        let p0 = ModelParams::with_mass(0.5).unwrap();
        assert_eq!(free_symbol(&p0, &[[1.0, 0.0, 0.0]], &[]).unwrap(), 1.0);
        let p1 = ModelParams::new(1.0, 1, 1, 0.0, 1.0).unwrap();
        let v = free_symbol(&p1, &[[1.0, 1.0, 1.0]], &[[2.0, 0.0, 0.0]]).unwrap();
        assert!((v - 6.5).abs() < 1e-15);
        assert!(matches!(
            free_symbol(&p1, &[[0.0; 3]], &[]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(-1.0, 1, 0, 0.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 0, 0, 0.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 1, 0, -1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 1, 0, 0.0, 0.0).is_err());
        let p = ModelParams::with_mass(0.7).unwrap();
        assert!((p.reduced_mass_factor() * p.c2() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn counterterm_examples() {
        assert_eq!(linear_counterterm(0.5, 0.0), 0.0);
        assert!((linear_counterterm(0.5, 100.0) - 2.5330295910584444).abs() < 1e-12);
        assert!((linear_counterterm(1.0, 3.0 * PI * PI) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn b_coefficient_examples() {
        assert!((b_coefficient(0.5) - 1.0 / (8.0 * PI)).abs() < 1e-16);
        assert!((b_coefficient(1e6) - 1.0 / (4.0 * PI)).abs() < 1e-6);
        let m = 2.0;
        assert!((b_coefficient(m) * 2.0 * PI * (2.0 * m + 1.0) / m - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_profile_examples() {
        let b = b_coefficient(0.5);
        assert!((singular_profile(0.5, 1, 1.0).unwrap() - b).abs() < 1e-16);
        assert!((singular_profile(0.5, 2, 1.0).unwrap() - b / 2.0).abs() < 1e-16);
        let e = std::f64::consts::E;
        let want = b / e + gamma_m(0.5);
        assert!((singular_profile(0.5, 1, e).unwrap() - want).abs() < 1e-15);
        assert!(matches!(singular_profile(0.5, 1, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn arctan_convolution_examples() {
        let v = arctan_convolution(0.5, 1.0, 2.0, 1.0).unwrap();
        assert!((v - 2.812).abs() < 3e-3, "{v}");
        let a = arctan_convolution(0.5, 1.0, 2.0, 1e-6).unwrap();
        let b = arctan_convolution(0.5, 1.0, 2.0, 1e-8).unwrap();
        assert!(((a - b) / b).abs() < 1e-6);
        assert_eq!(
            arctan_convolution(0.7, 1.0, 2.0, 0.3).unwrap(),
            arctan_convolution(0.7, 2.0, 1.0, 0.3).unwrap()
        );
        assert!(arctan_convolution(0.5, 0.0, 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn counterterm_is_linear(m in 0.01f64..100.0, lam in 0.0f64..1e6, a in 0.001f64..1e3) {
            let lhs = linear_counterterm(m, a * lam);
            let rhs = a * linear_counterterm(m, lam);
            prop_assert!((lhs - rhs).abs() <= 1e-13 * rhs.abs().max(1e-300));
        }

        #[test]
        fn free_symbol_at_least_sector(
            m in 0.01f64..100.0,
            p in prop::array::uniform3(-50.0f64..50.0),
            k in prop::collection::vec(prop::array::uniform3(-50.0f64..50.0), 0..4),
        ) {
            let params = ModelParams::new(m, 1, k.len(), 0.0, 1.0).unwrap();
            let v = free_symbol(&params, &[p], &k).unwrap();
            prop_assert!(v >= k.len() as f64);
        }

        #[test]
        fn gamma_negative_and_finite(m in 1e-3f64..1e6) {
            let g = gamma_m(m);
            prop_assert!(g.is_finite() && g < 0.0);
        }
    }
}
