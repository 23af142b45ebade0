//! Off-diagonal part of T.
//!
//! `(T_od ψ)^(P,K) = −(2π)^{-3} Σ_{μ,ν} [ Σ_i ∫ ψ̂(P − e_μξ + e_νk_i, K̂_i, ξ)/D_μ dξ
//!                                       + (1−δ_μν) ∫ ψ̂(P − e_μξ + e_νξ, K)/D_μ dξ ]`
//! with `D_μ = n + 1 + |P − e_μξ|²/(2m) + |K|² + |ξ|²`.
//!
//! On product Gaussians every ξ-integral becomes Gaussian after writing
//! `1/D = ∫₀^∞ e^{−uD} du`; only the u-integrals are done numerically.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{AffineForm, GaussianIntegral};
use crate::model::{norm_sq, ModelParams};
use crate::quad::{integrate_mc_many, integrate_semi_infinite, Estimate, InnerErrors, QuadSpec, Sampler};
use crate::testfn::ProductState;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexEstimate {
    pub re: Estimate,
    pub im: Estimate,
}

impl ComplexEstimate {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value, self.im.value)
    }

    pub fn error(&self) -> f64 {
        self.re.error.hypot(self.im.error)
    }

    fn conj(self) -> Self {
        Self {
            re: self.re,
            im: -self.im,
        }
    }

    fn zero() -> Self {
        Self {
            re: Estimate::closed_form(0.0),
            im: Estimate::closed_form(0.0),
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Sym {
    P(usize),
    K(usize),
    Xi,
}

type Combo = Vec<(Sym, f64)>;

struct Term {
    mu: usize,
    x_args: Vec<Combo>,
    b_args: Vec<Combo>,
}

fn tod_terms(particles: usize, n: usize) -> Vec<Term> {
    let mut terms = Vec::new();
    for mu in 0..particles {
        for nu in 0..particles {
            for i in 0..n {
                let x_args = (0..particles)
                    .map(|l| {
                        let mut c = vec![(Sym::P(l), 1.0)];
                        if l == mu {
                            c.push((Sym::Xi, -1.0));
                        }
                        if l == nu {
                            c.push((Sym::K(i), 1.0));
                        }
                        c
                    })
                    .collect();
                let mut b_args: Vec<Combo> = (0..n).filter(|&j| j != i).map(|j| vec![(Sym::K(j), 1.0)]).collect();
                b_args.push(vec![(Sym::Xi, 1.0)]);
                terms.push(Term { mu, x_args, b_args });
            }
            if mu != nu {
                let x_args = (0..particles)
                    .map(|l| {
                        let mut c = vec![(Sym::P(l), 1.0)];
                        if l == mu {
                            c.push((Sym::Xi, -1.0));
                        }
                        if l == nu {
                            c.push((Sym::Xi, 1.0));
                        }
                        c
                    })
                    .collect();
                let b_args = (0..n).map(|j| vec![(Sym::K(j), 1.0)]).collect();
                terms.push(Term { mu, x_args, b_args });
            }
        }
    }
    terms
}

fn realize(combo: &Combo, slots: usize, map: &dyn Fn(Sym) -> AffineForm) -> AffineForm {
    combo
        .iter()
        .fold(AffineForm::zero(slots), |acc, (s, c)| acc.plus(&map(*s), *c))
}

fn add_state(g: &mut GaussianIntegral, psi: &ProductState, term: &Term, slots: usize, map: &dyn Fn(Sym) -> AffineForm, conj: bool) {
    for (f, c) in psi.particles.iter().zip(&term.x_args) {
        g.add_transform(&realize(c, slots, map), f, conj);
    }
    for c in &term.b_args {
        g.add_transform(&realize(c, slots, map), &psi.boson, conj);
    }
}

// Multiply by e^{−u D_μ}.
fn add_resolvent(g: &mut GaussianIntegral, m: f64, particles: usize, n: usize, mu: usize, u: f64, slots: usize, map: &dyn Fn(Sym) -> AffineForm) {
    for l in 0..particles {
        let mut c = vec![(Sym::P(l), 1.0)];
        if l == mu {
            c.push((Sym::Xi, -1.0));
        }
        g.add_quadratic(&realize(&c, slots, map), u / (2.0 * m));
    }
    for i in 0..n {
        g.add_quadratic(&map(Sym::K(i)), u);
    }
    g.add_quadratic(&map(Sym::Xi), u);
    g.add_constant(-u * (n as f64 + 1.0));
}

fn check_state(params: &ModelParams, psi: &ProductState) -> Result<()> {
    if psi.particle_count() != params.particles || psi.sector != params.sector {
        return Err(Error::Config(format!(
            "state has M={}, n={} but parameters have M={}, n={}",
            psi.particle_count(),
            psi.sector,
            params.particles,
            params.sector
        )));
    }
    Ok(())
}

fn integrate_complex<F: Fn(f64) -> Complex64>(f: F, spec: &QuadSpec) -> Result<ComplexEstimate> {
    let re = integrate_semi_infinite(|u| f(u).re, spec)?;
    let im = integrate_semi_infinite(|u| f(u).im, spec)?;
    Ok(ComplexEstimate { re, im })
}

fn scale(e: ComplexEstimate, k: f64) -> ComplexEstimate {
    ComplexEstimate {
        re: e.re * k,
        im: e.im * k,
    }
}

const PREFACTOR: f64 = -1.0 / (8.0 * PI * PI * PI);

/// (T_od ψ)^(P, K) at one momentum configuration.
pub fn apply_tod(
    params: &ModelParams,
    psi: &ProductState,
    p: &[[f64; 3]],
    k: &[[f64; 3]],
    spec: &QuadSpec,
) -> Result<ComplexEstimate> {
    check_state(params, psi)?;
    if p.len() != params.particles || k.len() != params.sector {
        return Err(Error::Config("momentum dimensions do not match the sector".into()));
    }
    let (mp, n, m) = (params.particles, params.sector, params.m);
    let terms = tod_terms(mp, n);
    if terms.is_empty() {
        return Ok(ComplexEstimate::zero());
    }
    let map = |s: Sym| match s {
        Sym::P(l) => AffineForm::constant(1, p[l]),
        Sym::K(i) => AffineForm::constant(1, k[i]),
        Sym::Xi => AffineForm::slot(1, 0),
    };
    let f = |u: f64| {
        terms
            .iter()
            .map(|t| {
                let mut g = GaussianIntegral::new(1);
                add_state(&mut g, psi, t, 1, &map, false);
                add_resolvent(&mut g, m, mp, n, t.mu, u, 1, &map);
                g.value().unwrap_or_default()
            })
            .sum::<Complex64>()
    };
    Ok(scale(integrate_complex(f, spec)?, PREFACTOR))
}

/// Monte-Carlo evaluation of (T_od ψ)^(P, K) with Cauchy sampling in ξ.
pub fn apply_tod_mc(
    params: &ModelParams,
    psi: &ProductState,
    p: &[[f64; 3]],
    k: &[[f64; 3]],
    samples: u64,
    seed: u64,
) -> Result<ComplexEstimate> {
    check_state(params, psi)?;
    if p.len() != params.particles || k.len() != params.sector {
        return Err(Error::Config("momentum dimensions do not match the sector".into()));
    }
    let (mp, n, m) = (params.particles, params.sector, params.m);
    let terms = tod_terms(mp, n);
    if terms.is_empty() {
        return Ok(ComplexEstimate::zero());
    }
    let k2: f64 = k.iter().map(norm_sq).sum();
    let eval = |c: &Combo, xi: [f64; 3]| -> [f64; 3] {
        let mut v = [0.0; 3];
        for (s, w) in c {
            let src = match s {
                Sym::P(l) => p[*l],
                Sym::K(i) => k[*i],
                Sym::Xi => xi,
            };
            for d in 0..3 {
                v[d] += w * src[d];
            }
        }
        v
    };
    let f = |x: &[f64], out: &mut [f64]| {
        let xi = [x[0], x[1], x[2]];
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &terms {
            let mut v = Complex64::new(1.0, 0.0);
            for (g, c) in psi.particles.iter().zip(&t.x_args) {
                v *= g.fourier_eval(eval(c, xi));
            }
            for c in &t.b_args {
                v *= psi.boson.fourier_eval(eval(c, xi));
            }
            let mut d = n as f64 + 1.0 + k2 + norm_sq(&xi);
            for (l, pl) in p.iter().enumerate() {
                let q = if l == t.mu {
                    [pl[0] - xi[0], pl[1] - xi[1], pl[2] - xi[2]]
                } else {
                    *pl
                };
                d += norm_sq(&q) / (2.0 * m);
            }
            acc += v / d;
        }
        out[0] = PREFACTOR * acc.re;
        out[1] = PREFACTOR * acc.im;
    };
    let sampler = Sampler::Cauchy3 { vectors: 1, scale: 1.0 };
    let r = integrate_mc_many(f, 2, 3, &sampler, samples, seed)?;
    Ok(ComplexEstimate { re: r[0], im: r[1] })
}

/// ⟨φ, T_od ψ⟩.
pub fn tod_matrix_element(params: &ModelParams, phi: &ProductState, psi: &ProductState, spec: &QuadSpec) -> Result<ComplexEstimate> {
    check_state(params, phi)?;
    check_state(params, psi)?;
    let (mp, n, m) = (params.particles, params.sector, params.m);
    let terms = tod_terms(mp, n);
    if terms.is_empty() {
        return Ok(ComplexEstimate::zero());
    }
    let slots = mp + n + 1;
    let map = move |s: Sym| match s {
        Sym::P(l) => AffineForm::slot(slots, l),
        Sym::K(i) => AffineForm::slot(slots, mp + i),
        Sym::Xi => AffineForm::slot(slots, mp + n),
    };
    let f = |u: f64| {
        terms
            .iter()
            .map(|t| {
                let mut g = GaussianIntegral::new(slots);
                for (l, f) in phi.particles.iter().enumerate() {
                    g.add_transform(&map(Sym::P(l)), f, true);
                }
                for i in 0..n {
                    g.add_transform(&map(Sym::K(i)), &phi.boson, true);
                }
                add_state(&mut g, psi, t, slots, &map, false);
                add_resolvent(&mut g, m, mp, n, t.mu, u, slots, &map);
                g.value().unwrap_or_default()
            })
            .sum::<Complex64>()
    };
    Ok(scale(integrate_complex(f, spec)?, PREFACTOR))
}

/// ‖T_od ψ‖ from the double Laplace representation of |T_od ψ|².
pub fn tod_norm(params: &ModelParams, psi: &ProductState, spec: &QuadSpec) -> Result<Estimate> {
    check_state(params, psi)?;
    let (mp, n, m) = (params.particles, params.sector, params.m);
    let terms = tod_terms(mp, n);
    if terms.is_empty() {
        return Ok(Estimate::closed_form(0.0));
    }
    let slots = mp + n + 2;
    let base = move |s: Sym, xi_slot: usize| match s {
        Sym::P(l) => AffineForm::slot(slots, l),
        Sym::K(i) => AffineForm::slot(slots, mp + i),
        Sym::Xi => AffineForm::slot(slots, xi_slot),
    };
    let map1 = move |s: Sym| base(s, mp + n);
    let map2 = move |s: Sym| base(s, mp + n + 1);
    // u = w², u' = w'² removes the (u+u')^{-3/2} behaviour at the origin.
    let pair_sum = |u1: f64, u2: f64| -> f64 {
        let mut acc = 0.0;
        for (a, t1) in terms.iter().enumerate() {
            for (b, t2) in terms.iter().enumerate().skip(a) {
                let mut g = GaussianIntegral::new(slots);
                add_state(&mut g, psi, t1, slots, &map1, true);
                add_state(&mut g, psi, t2, slots, &map2, false);
                add_resolvent(&mut g, m, mp, n, t1.mu, u1, slots, &map1);
                add_resolvent(&mut g, m, mp, n, t2.mu, u2, slots, &map2);
                let v = g.value().unwrap_or_default().re;
                if a == b {
                    acc += v;
                } else {
                    // the (b, a) pair is the complex conjugate at swapped (u1, u2)
                    let mut h = GaussianIntegral::new(slots);
                    add_state(&mut h, psi, t2, slots, &map1, true);
                    add_state(&mut h, psi, t1, slots, &map2, false);
                    add_resolvent(&mut h, m, mp, n, t2.mu, u1, slots, &map1);
                    add_resolvent(&mut h, m, mp, n, t1.mu, u2, slots, &map2);
                    acc += v + h.value().unwrap_or_default().re;
                }
            }
        }
        acc
    };
    let inner = InnerErrors::new();
    let outer = integrate_semi_infinite(
        |w1| {
            let e = integrate_semi_infinite(|w2| 4.0 * w1 * w2 * pair_sum(w1 * w1, w2 * w2), spec);
            inner.take(e, 1.0)
        },
        spec,
    );
    let sq = inner.finish(outer)? * (PREFACTOR * PREFACTOR);
    Ok(sq.sqrt())
}

/// ⟨φ, T_od ψ⟩ against ⟨T_od φ, ψ⟩.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TodSymmetry {
    pub lhs: ComplexEstimate,
    pub rhs: ComplexEstimate,
    pub residual: f64,
    pub combined_error: f64,
}

impl TodSymmetry {
    pub fn relative_residual(&self) -> f64 {
        self.residual / self.lhs.value().norm()
    }
}

pub fn tod_symmetry(params: &ModelParams, phi: &ProductState, psi: &ProductState, spec: &QuadSpec) -> Result<TodSymmetry> {
    let lhs = tod_matrix_element(params, phi, psi, spec)?;
    let rhs = tod_matrix_element(params, psi, phi, spec)?.conj();
    Ok(TodSymmetry {
        lhs,
        rhs,
        residual: (lhs.value() - rhs.value()).norm(),
        combined_error: lhs.error() + rhs.error(),
    })
}
