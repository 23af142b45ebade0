//! Sampling of probes on geometric r-grids and least-squares extraction of
//! the singular coefficients in `a/r + b log r + c + d r`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{b_coefficient, ModelParams};
use crate::ops::{apply_g_probe, apply_rd_probe, apply_rod_probe, DiagonalKernel, RPiece};
use crate::quad::{Estimate, QuadSpec};
use crate::testfn::IsotropicState;

pub const MAX_CONDITION: f64 = 1e10;

/// Geometric grid of separations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self {
            r_min: 1e-4,
            r_max: 1e-1,
            points: 12,
        }
    }
}

impl ProbeGrid {
    pub fn new(r_min: f64, r_max: f64, points: usize) -> Result<Self> {
        let g = Self { r_min, r_max, points };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_min < self.r_max && self.r_max.is_finite()) {
            return Err(Error::Config(format!(
                "probe grid needs 0 < r_min < r_max, got {} and {}",
                self.r_min, self.r_max
            )));
        }
        if self.points < 6 {
            return Err(Error::Config(format!("probe grid needs at least 6 points, got {}", self.points)));
        }
        Ok(())
    }

    /// Grid values in descending order.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        let ratio = (self.r_min / self.r_max).ln();
        (0..n)
            .map(|i| match i {
                0 => self.r_max,
                i if i == n - 1 => self.r_min,
                i => self.r_max * (ratio * i as f64 / (n - 1) as f64).exp(),
            })
            .collect()
    }
}

/// Probe samples on a strictly decreasing grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSeries {
    pub r_values: Vec<f64>,
    pub samples: Vec<Estimate>,
    pub meta: BTreeMap<String, String>,
}

impl ProbeSeries {
    pub fn new(r_values: Vec<f64>, samples: Vec<Estimate>) -> Result<Self> {
        if r_values.len() != samples.len() {
            return Err(Error::Config(format!(
                "{} separations but {} samples",
                r_values.len(),
                samples.len()
            )));
        }
        if r_values.iter().any(|r| !(*r > 0.0)) || r_values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("separations must be positive and strictly decreasing".into()));
        }
        Ok(Self {
            r_values,
            samples,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_owned(), value.to_string());
        self
    }

    pub fn len(&self) -> usize {
        self.r_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_values.is_empty()
    }

    /// The series without its `k` largest separations.
    pub fn drop_largest(&self, k: usize) -> Self {
        Self {
            r_values: self.r_values[k.min(self.len())..].to_vec(),
            samples: self.samples[k.min(self.len())..].to_vec(),
            meta: self.meta.clone(),
        }
    }

    /// CSV with columns r, value, error.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,value,error\n");
        for (r, e) in self.r_values.iter().zip(&self.samples) {
            let _ = writeln!(s, "{r:.16e},{:.16e},{:.16e}", e.value, e.error);
        }
        s
    }
}

/// Evaluate `probe` on the grid in parallel.
pub fn collect_probe<F>(probe: F, grid: &ProbeGrid) -> Result<ProbeSeries>
where
    F: Fn(f64) -> Result<Estimate> + Sync,
{
    grid.validate()?;
    let r_values = grid.values();
    let samples = r_values
        .par_iter()
        .map(|&r| {
            probe(r).map_err(|e| match e {
                Error::Probe { .. } => e,
                e => Error::Probe { r, source: Box::new(e) },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ProbeSeries::new(r_values, samples)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis {
    pub inv_r: bool,
    pub log: bool,
    pub constant: bool,
    pub linear: bool,
}

impl Basis {
    pub const FULL: Basis = Basis {
        inv_r: true,
        log: true,
        constant: true,
        linear: true,
    };
    /// {1/r, 1, r}
    pub const POLE: Basis = Basis {
        inv_r: true,
        log: false,
        constant: true,
        linear: true,
    };
    /// {log r, 1, r}
    pub const LOG: Basis = Basis {
        inv_r: false,
        log: true,
        constant: true,
        linear: true,
    };

    fn mask(&self) -> [bool; 4] {
        [self.inv_r, self.log, self.constant, self.linear]
    }

    pub fn len(&self) -> usize {
        self.mask().iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn eval(r: f64) -> [f64; 4] {
        [1.0 / r, r.ln(), 1.0, r]
    }
}

/// Weighted least-squares fit; coefficients outside the basis are zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularFit {
    pub coeff_inv_r: f64,
    pub coeff_log: f64,
    pub coeff_const: f64,
    pub coeff_linear: f64,
    /// Statistical and truncation error per coefficient.
    pub uncertainty: [f64; 4],
    /// Unweighted root-mean-square residual.
    pub residual_rms: f64,
    pub chi2_reduced: f64,
    /// Condition number of the column-equilibrated weighted design matrix.
    pub condition: f64,
    pub basis: Basis,
    pub points: usize,
}

impl SingularFit {
    pub fn coefficients(&self) -> [f64; 4] {
        [self.coeff_inv_r, self.coeff_log, self.coeff_const, self.coeff_linear]
    }

    pub fn inv_r(&self) -> Estimate {
        Estimate::adaptive(self.coeff_inv_r, self.uncertainty[0], self.points as u64)
    }

    pub fn log(&self) -> Estimate {
        Estimate::adaptive(self.coeff_log, self.uncertainty[1], self.points as u64)
    }

    pub fn constant(&self) -> Estimate {
        Estimate::adaptive(self.coeff_const, self.uncertainty[2], self.points as u64)
    }

    pub fn linear(&self) -> Estimate {
        Estimate::adaptive(self.coeff_linear, self.uncertainty[3], self.points as u64)
    }

    pub fn predict(&self, r: f64) -> f64 {
        Basis::eval(r).iter().zip(self.coefficients()).map(|(b, c)| b * c).sum()
    }
}

struct RawFit {
    coeffs: [f64; 4],
    stat: [f64; 4],
    chi2_reduced: f64,
    condition: f64,
}

fn solve(series: &ProbeSeries, basis: Basis) -> Result<RawFit> {
    let nb = basis.len();
    let n = series.len();
    let cols: Vec<usize> = (0..4).filter(|&j| basis.mask()[j]).collect();
    let raw: Vec<f64> = series
        .samples
        .iter()
        .map(|e| e.error.max(f64::EPSILON * e.value.abs()))
        .collect();
    let top = raw.iter().cloned().fold(0.0, f64::max);
    let floor = if top > 0.0 { top * 1e-12 } else { 1.0 };
    let sigma: Vec<f64> = raw.iter().map(|s| s.max(floor)).collect();
    let mut a = DMatrix::<f64>::zeros(n, nb);
    let mut b = DVector::<f64>::zeros(n);
    for i in 0..n {
        let row = Basis::eval(series.r_values[i]);
        for (c, &j) in cols.iter().enumerate() {
            a[(i, c)] = row[j] / sigma[i];
        }
        b[i] = series.samples[i].value / sigma[i];
    }
    if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
        return Err(Error::Fit("non-finite sample or weight".into()));
    }
    let scale: Vec<f64> = (0..nb).map(|c| a.column(c).norm().recip()).collect();
    if scale.iter().any(|s| !s.is_finite()) {
        return Err(Error::Fit("degenerate design column".into()));
    }
    for (c, s) in scale.iter().enumerate() {
        a.column_mut(c).scale_mut(*s);
    }
    let svd = a.clone().svd(true, true);
    let condition = svd.singular_values.max() / svd.singular_values.min();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Fit(format!("design matrix condition {condition:e} exceeds {MAX_CONDITION:e}")));
    }
    let y = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Fit(format!("least-squares solve failed: {e}")))?;
    let chi2_reduced = (&a * &y - &b).norm_squared() / (n - nb) as f64;
    let v = svd.v_t.as_ref().expect("requested").transpose();
    let mut coeffs = [0.0; 4];
    let mut stat = [0.0; 4];
    for (c, &j) in cols.iter().enumerate() {
        coeffs[j] = y[c] * scale[c];
        let var: f64 = (0..nb).map(|k| (v[(c, k)] / svd.singular_values[k]).powi(2)).sum();
        stat[j] = scale[c] * (var * chi2_reduced).sqrt();
    }
    Ok(RawFit {
        coeffs,
        stat,
        chi2_reduced,
        condition,
    })
}

/// Weighted least squares with weights 1/error².
///
/// The quoted uncertainty combines the statistical error, scaled by √χ²_red,
/// with the coefficient shift caused by dropping the largest quarter of the
/// grid, which measures the truncation of the expansion.
pub fn fit_singular(series: &ProbeSeries, basis: Basis) -> Result<SingularFit> {
    let nb = basis.len();
    let n = series.len();
    if nb == 0 {
        return Err(Error::Fit("empty basis".into()));
    }
    if n < nb + 2 {
        return Err(Error::Fit(format!("{n} points cannot fit {nb} basis functions")));
    }
    let full = solve(series, basis)?;
    let k = (n / 4).max(1);
    let shift = if n - k >= nb + 2 {
        let sub = solve(&series.drop_largest(k), basis)?;
        std::array::from_fn(|j| (full.coeffs[j] - sub.coeffs[j]).abs())
    } else {
        [0.0; 4]
    };
    let c = full.coeffs;
    let mut fit = SingularFit {
        coeff_inv_r: c[0],
        coeff_log: c[1],
        coeff_const: c[2],
        coeff_linear: c[3],
        uncertainty: std::array::from_fn(|j| full.stat[j].hypot(shift[j])),
        residual_rms: 0.0,
        chi2_reduced: full.chi2_reduced,
        condition: full.condition,
        basis,
        points: n,
    };
    let ss: f64 = series
        .r_values
        .iter()
        .zip(&series.samples)
        .map(|(r, e)| (e.value - fit.predict(*r)).powi(2))
        .sum();
    fit.residual_rms = (ss / n as f64).sqrt();
    Ok(fit)
}

/// Series of the Gψ probe at s + r ẑ.
pub fn g_series<S: IsotropicState + ?Sized>(
    params: &ModelParams,
    psi: &S,
    s: [f64; 3],
    grid: &ProbeGrid,
    spec: &QuadSpec,
) -> Result<ProbeSeries> {
    Ok(collect_probe(|r| apply_g_probe(params, psi, s, [0.0, 0.0, r], spec), grid)?.with_meta("probe", "G"))
}

/// Boundary value (BGψ)(s): the 1/r coefficient of the Gψ probe in units of
/// the leading singularity −b_m ψ(s)/r.
pub fn extract_b<S: IsotropicState + ?Sized>(
    params: &ModelParams,
    psi: &S,
    s: [f64; 3],
    grid: &ProbeGrid,
    spec: &QuadSpec,
) -> Result<Estimate> {
    let fit = fit_singular(&g_series(params, psi, s, grid, spec)?, Basis::POLE)?;
    Ok(fit.inv_r() * (-1.0 / b_coefficient(params.m)))
}

/// Finite part of the Gψ probe after removing the 1/r term.
pub fn extract_a<S: IsotropicState + ?Sized>(
    params: &ModelParams,
    psi: &S,
    s: [f64; 3],
    grid: &ProbeGrid,
    spec: &QuadSpec,
) -> Result<Estimate> {
    let fit = fit_singular(&g_series(params, psi, s, grid, spec)?, Basis::POLE)?;
    Ok(fit.constant())
}

/// Series of the R probe for one piece (or their sum).
pub fn r_series<S: IsotropicState + ?Sized>(
    params: &ModelParams,
    psi: &S,
    s: [f64; 3],
    piece: RPiece,
    grid: &ProbeGrid,
    spec: &QuadSpec,
) -> Result<ProbeSeries> {
    let series = collect_probe(
        |r| match piece {
            RPiece::Diagonal => apply_rd_probe(params, psi, s, r, DiagonalKernel::Exact, spec),
            RPiece::OffDiagonal => apply_rod_probe(params, psi, s, r, spec),
            RPiece::Total => Ok(apply_rd_probe(params, psi, s, r, DiagonalKernel::Exact, spec)?
                + apply_rod_probe(params, psi, s, r, spec)?),
        },
        grid,
    )?;
    Ok(series.with_meta("probe", format!("R_{piece:?}")))
}

/// Fitted log r coefficient of the R probe, basis {log r, 1, r}.
pub fn extract_log_coefficient<S: IsotropicState + ?Sized>(
    params: &ModelParams,
    psi: &S,
    s: [f64; 3],
    piece: RPiece,
    grid: &ProbeGrid,
    spec: &QuadSpec,
) -> Result<Estimate> {
    Ok(fit_singular(&r_series(params, psi, s, piece, grid, spec)?, Basis::LOG)?.log())
}
