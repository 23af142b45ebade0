//! Closed-form Gaussian integrals over several 3-vector slots.
//!
//! `∫ exp(−qᵀAq + Σ_j b_j·q_j + c) d³q₁…d³q_k = (π^k/det A)^{3/2} exp(¼ Σ_ij (A⁻¹)_ij b_i·b_j + c)`
//! with A acting identically on each Cartesian component and complex b.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::testfn::RadialTestFunction;

/// Σ_j coeffs[j]·q_j + offset.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct AffineForm {
    pub coeffs: Vec<f64>,
    pub offset: [f64; 3],
}

impl AffineForm {
    pub fn zero(slots: usize) -> Self {
        Self {
            coeffs: vec![0.0; slots],
            offset: [0.0; 3],
        }
    }

    pub fn slot(slots: usize, j: usize) -> Self {
        let mut f = Self::zero(slots);
        f.coeffs[j] = 1.0;
        f
    }

    pub fn constant(slots: usize, v: [f64; 3]) -> Self {
        Self {
            coeffs: vec![0.0; slots],
            offset: v,
        }
    }

    pub fn plus(&self, other: &AffineForm, k: f64) -> AffineForm {
        AffineForm {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + k * b).collect(),
            offset: [
                self.offset[0] + k * other.offset[0],
                self.offset[1] + k * other.offset[1],
                self.offset[2] + k * other.offset[2],
            ],
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct GaussianIntegral {
    a: DMatrix<f64>,
    b: Vec<[Complex64; 3]>,
    c: Complex64,
    prefactor: Complex64,
}

impl GaussianIntegral {
    pub fn new(slots: usize) -> Self {
        Self {
            a: DMatrix::zeros(slots, slots),
            b: vec![[Complex64::new(0.0, 0.0); 3]; slots],
            c: Complex64::new(0.0, 0.0),
            prefactor: Complex64::new(1.0, 0.0),
        }
    }

    /// Multiply the integrand by exp(−w|ℓ|²).
    pub fn add_quadratic(&mut self, form: &AffineForm, w: f64) {
        let n = form.coeffs.len();
        for i in 0..n {
            let ci = form.coeffs[i];
            if ci == 0.0 {
                continue;
            }
            for j in 0..n {
                self.a[(i, j)] += w * ci * form.coeffs[j];
            }
            for d in 0..3 {
                self.b[i][d] -= 2.0 * w * ci * form.offset[d];
            }
        }
        let o = &form.offset;
        self.c -= w * (o[0] * o[0] + o[1] * o[1] + o[2] * o[2]);
    }

    /// Multiply the integrand by exp(v·ℓ).
    pub fn add_linear(&mut self, form: &AffineForm, v: [Complex64; 3]) {
        for (i, ci) in form.coeffs.iter().enumerate() {
            if *ci == 0.0 {
                continue;
            }
            for d in 0..3 {
                self.b[i][d] += *ci * v[d];
            }
        }
        for d in 0..3 {
            self.c += v[d] * form.offset[d];
        }
    }

    pub fn add_constant(&mut self, c: f64) {
        self.c += c;
    }

    /// Multiply by the transform ĝ(ℓ), or its conjugate.
    pub fn add_transform(&mut self, form: &AffineForm, g: &RadialTestFunction, conjugate: bool) {
        self.prefactor *= g.amplitude * (g.width / PI).powf(0.75);
        self.add_quadratic(form, 0.5 * g.width);
        let s = if conjugate { 1.0 } else { -1.0 };
        let v = g.center.map(|x| Complex64::new(0.0, s * x));
        self.add_linear(form, v);
    }

    /// The integral, or `None` if the quadratic form is not positive definite.
    pub fn value(&self) -> Option<Complex64> {
        let k = self.a.nrows();
        let chol = self.a.clone().cholesky()?;
        let l = chol.l();
        let det: f64 = (0..k).map(|i| l[(i, i)] * l[(i, i)]).product();
        let inv = chol.inverse();
        let mut quad = Complex64::new(0.0, 0.0);
        for i in 0..k {
            for j in 0..k {
                let aij = inv[(i, j)];
                if aij == 0.0 {
                    continue;
                }
                for d in 0..3 {
                    quad += aij * self.b[i][d] * self.b[j][d];
                }
            }
        }
        let norm = (PI.powi(k as i32) / det).powf(1.5);
        Some(self.prefactor * norm * (0.25 * quad + self.c).exp())
    }
}
