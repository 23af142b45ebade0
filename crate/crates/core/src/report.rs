//! Machine-readable run reports, CSV output and baseline comparison.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};
use crate::quad::{Estimate, Method};

pub const SCHEMA_VERSION: u64 = 1;

/// Relative tolerance stored with results unless a check asks for another.
pub const DEFAULT_FIELD_TOLERANCE: f64 = 1e-2;

/// One reported number with its error bar and provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub name: String,
    pub value: f64,
    pub error: f64,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_multiplier: Option<f64>,
    /// Relative tolerance used when this field is compared against a baseline.
    pub tolerance: f64,
}

impl ResultEntry {
    pub fn new(name: impl Into<String>, e: Estimate) -> Self {
        Self {
            name: name.into(),
            value: e.value,
            error: e.error,
            method: e.method,
            sigma_multiplier: e.sigma_multiplier,
            tolerance: DEFAULT_FIELD_TOLERANCE,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Tolerance {
    /// |observed − expected| ≤ tol·|expected|.
    Relative(f64),
    /// |observed − expected| ≤ tol.
    Absolute(f64),
    /// |observed − expected| ≤ k·(observed error + expected error).
    ErrorBars(f64),
    /// |observed| < expected.
    Below,
    /// |observed| > expected.
    Above,
}

/// A pass/fail comparison against an expected value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub criterion: u8,
    pub observed: f64,
    pub observed_error: f64,
    pub expected: f64,
    pub expected_error: f64,
    pub tolerance: Tolerance,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, criterion: u8, observed: Estimate, expected: Estimate, tolerance: Tolerance) -> Self {
        let d = (observed.value - expected.value).abs();
        let passed = match tolerance {
            Tolerance::Relative(t) => d <= t * expected.value.abs(),
            Tolerance::Absolute(t) => d <= t,
            Tolerance::ErrorBars(k) => d <= k * (observed.error + expected.error),
            Tolerance::Below => observed.value.abs() < expected.value,
            Tolerance::Above => observed.value.abs() > expected.value,
        };
        Self {
            name: name.into(),
            criterion,
            observed: observed.value,
            observed_error: observed.error,
            expected: expected.value,
            expected_error: expected.error,
            tolerance,
            passed: passed && observed.value.is_finite(),
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// One summary line.
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2} {}: observed {:.6e} ± {:.1e}, expected {:.6e} ({})",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion,
            self.name,
            self.observed,
            self.observed_error,
            self.expected,
            match self.tolerance {
                Tolerance::Relative(t) => format!("rel {t:e}"),
                Tolerance::Absolute(t) => format!("abs {t:e}"),
                Tolerance::ErrorBars(k) => format!("{k}× error bars"),
                Tolerance::Below => "upper bound".to_string(),
                Tolerance::Above => "lower bound".to_string(),
            }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentBlock {
    pub experiment: Experiment,
    pub results: Vec<ResultEntry>,
    pub checks: Vec<Check>,
    /// CSV files written by this experiment, relative to the output directory.
    pub files: Vec<String>,
}

impl ExperimentBlock {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            results: Vec::new(),
            checks: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn result(&mut self, name: impl Into<String>, e: Estimate) -> &mut ResultEntry {
        self.results.push(ResultEntry::new(name, e));
        self.results.last_mut().expect("just pushed")
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u64,
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub inputs: ExperimentConfig,
    pub experiments: Vec<ExperimentBlock>,
    pub passed: bool,
}

impl Report {
    pub fn new(inputs: ExperimentConfig, experiments: Vec<ExperimentBlock>) -> Self {
        let passed = experiments.iter().all(ExperimentBlock::passed);
        Self {
            schema_version: SCHEMA_VERSION,
            tool: "ibc-lab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: inputs.seed,
            inputs,
            experiments,
            passed,
        }
    }

    pub fn checks(&self) -> impl Iterator<Item = &Check> {
        self.experiments.iter().flat_map(|b| b.checks.iter())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Parses a report, rejecting other schema versions before anything else.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let found = raw
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Config("report has no schema_version".into()))?;
        if found != SCHEMA_VERSION {
            return Err(Error::Schema {
                found,
                expected: SCHEMA_VERSION,
            });
        }
        Ok(serde_json::from_value(raw)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    fn fields(&self) -> BTreeMap<String, &ResultEntry> {
        self.experiments
            .iter()
            .flat_map(|b| b.results.iter().map(move |r| (format!("{}.{}", b.experiment, r.name), r)))
            .collect()
    }
}

/// A field that moved beyond its tolerance, or disappeared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDiff {
    pub field: String,
    pub baseline: f64,
    pub current: Option<f64>,
    pub allowed: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiffSummary {
    pub compared: usize,
    pub regressions: Vec<FieldDiff>,
    /// Checks that pass in the baseline but fail now.
    pub failed_checks: Vec<String>,
}

impl DiffSummary {
    pub fn is_clean(&self) -> bool {
        self.regressions.is_empty() && self.failed_checks.is_empty()
    }

    pub fn lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .regressions
            .iter()
            .map(|d| match d.current {
                Some(c) => format!(
                    "REGRESSION {}: {:.6e} vs baseline {:.6e} (allowed {:.1e})",
                    d.field, c, d.baseline, d.allowed
                ),
                None => format!("MISSING {}: baseline {:.6e}", d.field, d.baseline),
            })
            .collect();
        out.extend(self.failed_checks.iter().map(|c| format!("CHECK FAILS {c}")));
        out
    }
}

/// Compares every baseline field against the report. A field passes if it lies
/// within the baseline's relative tolerance, or within the combined error bars
/// when either side is a Monte-Carlo estimate.
pub fn verify(report: &Report, baseline: &Report) -> DiffSummary {
    let current = report.fields();
    let mut out = DiffSummary::default();
    for (key, b) in baseline.fields() {
        out.compared += 1;
        let Some(c) = current.get(&key) else {
            out.regressions.push(FieldDiff {
                field: key,
                baseline: b.value,
                current: None,
                allowed: 0.0,
            });
            continue;
        };
        let mut allowed = b.tolerance * b.value.abs();
        if b.method == Method::MonteCarlo || c.method == Method::MonteCarlo {
            allowed = allowed.max(c.error.hypot(b.error));
        }
        if !((c.value - b.value).abs() <= allowed) {
            out.regressions.push(FieldDiff {
                field: key,
                baseline: b.value,
                current: Some(c.value),
                allowed,
            });
        }
    }
    let now: BTreeMap<&str, bool> = report.checks().map(|c| (c.name.as_str(), c.passed)).collect();
    for c in baseline.checks().filter(|c| c.passed) {
        if now.get(c.name.as_str()) != Some(&true) {
            out.failed_checks.push(c.name.clone());
        }
    }
    out
}

/// Writes `body` to `dir/name` and returns `name`.
pub fn write_csv(dir: &Path, name: &str, body: &str) -> Result<String> {
    debug_assert!(!body.contains('\r'));
    std::fs::write(dir.join(name), body)?;
    Ok(name.to_string())
}

/// Formats rows with the CSV dialect: `{:.16e}` floats, comma separated, LF endings.
pub fn csv_table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut b = ExperimentBlock::new(Experiment::Constants);
        b.result("gamma_m", Estimate::closed_form(-9.1298e-5));
        b.result("mc_value", Estimate::monte_carlo(2.812, 0.003, 1000, 3.0));
        b.check(Check::new(
            "gamma_m(0.5)",
            2,
            Estimate::closed_form(-9.1298e-5),
            Estimate::closed_form(-9.13e-5),
            Tolerance::Relative(1e-3),
        ));
        Report::new(ExperimentConfig::default(), vec![b])
    }

    fn set(r: &mut Report, name: &str, v: f64) {
        r.experiments[0].results.iter_mut().find(|e| e.name == name).unwrap().value = v;
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        let text = r.to_json().unwrap();
        assert!(text.contains("\"schema_version\": 1"));
        assert!(text.contains("\"method\": \"closed_form\""));
        assert_eq!(Report::from_json(&text).unwrap(), r);
        assert!(r.passed);
    }

    #[test]
    fn schema_mismatch_is_explicit() {
        let text = sample().to_json().unwrap().replace("\"schema_version\": 1", "\"schema_version\": 99");
        assert!(matches!(
            Report::from_json(&text),
            Err(Error::Schema { found: 99, expected: 1 })
        ));
        assert!(Report::from_json("{}").is_err());
    }

    #[test]
    fn verify_flags_regressions() {
        let base = sample();
        assert!(verify(&base, &base).is_clean());
        assert_eq!(verify(&base, &base).compared, 2);

        let mut moved = base.clone();
        set(&mut moved, "gamma_m", -9.1298e-5 * 1.1);
        let d = verify(&moved, &base);
        assert_eq!(d.regressions.len(), 1);
        assert_eq!(d.regressions[0].field, "constants.gamma_m");

        let mut mc = base.clone();
        set(&mut mc, "mc_value", 2.812 + 0.004);
        assert!(verify(&mc, &base).is_clean());
        set(&mut mc, "mc_value", 2.812 + 0.04);
        assert!(!verify(&mc, &base).is_clean());

        let mut gone = base.clone();
        gone.experiments[0].results.pop();
        assert_eq!(verify(&gone, &base).regressions[0].current, None);

        let mut failing = base.clone();
        failing.experiments[0].checks[0].passed = false;
        assert_eq!(verify(&failing, &base).failed_checks, vec!["gamma_m(0.5)".to_string()]);
    }

    #[test]
    fn check_tolerances() {
        let e = Estimate::closed_form;
        assert!(Check::new("a", 1, e(1.005), e(1.0), Tolerance::Relative(0.01)).passed);
        assert!(!Check::new("a", 1, e(1.02), e(1.0), Tolerance::Relative(0.01)).passed);
        assert!(Check::new("a", 1, e(-1e-13), e(1e-12), Tolerance::Below).passed);
        assert!(!Check::new("a", 1, e(f64::NAN), e(1.0), Tolerance::Absolute(1.0)).passed);
        let mc = Estimate::monte_carlo(1.1, 0.2, 10, 3.0);
        assert!(Check::new("a", 1, mc, e(1.0), Tolerance::ErrorBars(1.0)).passed);
        assert!(Check::new("a", 1, e(1.0), e(1.0), Tolerance::Absolute(0.0)).line().starts_with("[PASS]"));
    }

    #[test]
    fn csv_dialect() {
        let s = csv_table(&["x", "y"], &[vec![1.0, -0.5], vec![1e-300, 3.0]]);
        assert_eq!(
            s,
            "x,y\n1.0000000000000000e0,-5.0000000000000000e-1\n1.0000000000000000e-300,3.0000000000000000e0\n"
        );
        for line in s.lines().skip(1) {
            for cell in line.split(',') {
                let v: f64 = cell.parse().unwrap();
                assert_eq!(format!("{v:.16e}"), cell);
            }
        }
    }
}
