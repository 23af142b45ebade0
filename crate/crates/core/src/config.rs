//! Experiment configuration in flat `section.key = value` form.
//!
//! ```text
//! # comments start with '#'
//! experiment = probe_g
//! seed = 7
//! model.m = 0.5
//! probe.widths = 0.5, 1, 2
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::asym::ProbeGrid;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::quad::{Mapping, QuadSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Constants,
    ProbeG,
    ProbeR,
    Sector1,
    Bounds,
    All,
}

impl Experiment {
    pub const INDIVIDUAL: [Experiment; 5] = [
        Experiment::Constants,
        Experiment::ProbeG,
        Experiment::ProbeR,
        Experiment::Sector1,
        Experiment::Bounds,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Experiment::Constants => "constants",
            Experiment::ProbeG => "probe_g",
            Experiment::ProbeR => "probe_r",
            Experiment::Sector1 => "sector1",
            Experiment::Bounds => "bounds",
            Experiment::All => "all",
        }
    }

    /// The single experiments this tag expands to.
    pub fn expand(self) -> Vec<Experiment> {
        match self {
            Experiment::All => Self::INDIVIDUAL.to_vec(),
            e => vec![e],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::INDIVIDUAL
            .iter()
            .chain(std::iter::once(&Experiment::All))
            .find(|e| e.tag() == s)
            .copied()
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown experiment '{s}', expected one of constants, probe_g, probe_r, sector1, bounds, all"
                ))
            })
    }
}

/// Probe and sweep parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub probe: ProbeGrid,
    /// Gaussian widths for the boundary-value checks.
    pub widths: Vec<f64>,
    /// Gaussian width of the state in the R and G_T probes.
    pub probe_width: f64,
    /// Cutoffs of the bare fiber-energy sweep.
    pub lambdas: Vec<f64>,
    /// Masses for the counterterm fits.
    pub masses: Vec<f64>,
    /// Sectors of the n-scaling sweeps.
    pub sectors: Vec<usize>,
    pub bound_s: f64,
    pub epsilon: f64,
    pub mc_samples: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            probe: ProbeGrid::default(),
            widths: vec![0.5, 1.0, 2.0],
            probe_width: 1.0,
            lambdas: vec![1e2, 2e2, 5e2, 1e3, 2e3, 5e3, 1e4, 2e4, 5e4, 1e5],
            masses: vec![0.5, 1.0],
            sectors: (0..=8).collect(),
            bound_s: 0.1,
            epsilon: 0.1,
            mc_samples: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub model: ModelParams,
    pub quad: QuadSpec,
    pub grid: GridConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::All,
            model: ModelParams::default(),
            quad: QuadSpec::default(),
            grid: GridConfig::default(),
            output_dir: PathBuf::from("out"),
            seed: QuadSpec::default().seed,
        }
    }
}

const KEYS: &[&str] = &[
    "experiment",
    "seed",
    "output_dir",
    "model.m",
    "model.particles",
    "model.sector",
    "model.lambda_cut",
    "model.c0",
    "quad.rel_tol",
    "quad.abs_tol",
    "quad.max_depth",
    "quad.mapping",
    "probe.r_min",
    "probe.r_max",
    "probe.points",
    "probe.widths",
    "probe.width",
    "sweep.lambdas",
    "sweep.masses",
    "bounds.sectors",
    "bounds.s",
    "bounds.epsilon",
    "mc.samples",
];

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    let items: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("{key}: empty list")));
    }
    Ok(items)
}

fn parse_mapping(v: &str) -> Result<Mapping> {
    match v {
        "rational" => Ok(Mapping::Rational),
        "exponential" => Ok(Mapping::Exponential),
        "none" => Ok(Mapping::None),
        _ => Err(Error::Config(format!(
            "quad.mapping: expected rational, exponential or none, got '{v}'"
        ))),
    }
}

/// Raw `key → value` pairs; rejects malformed lines, unknown and repeated keys.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{line}'", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(Error::Config(format!("line {}: unknown key '{k}'", i + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{k}'", i + 1)));
        }
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (k, v) in parse_pairs(text)? {
            let k = k.as_str();
            if v.is_empty() {
                return Err(Error::Config(format!("{k}: missing value")));
            }
            match k {
                "experiment" => c.experiment = v.parse()?,
                "seed" => c.seed = parse(k, &v)?,
                "output_dir" => c.output_dir = PathBuf::from(v),
                "model.m" => c.model.m = parse(k, &v)?,
                "model.particles" => c.model.particles = parse(k, &v)?,
                "model.sector" => c.model.sector = parse(k, &v)?,
                "model.lambda_cut" => c.model.lambda_cut = parse(k, &v)?,
                "model.c0" => c.model.c0 = parse(k, &v)?,
                "quad.rel_tol" => c.quad.rel_tol = parse(k, &v)?,
                "quad.abs_tol" => c.quad.abs_tol = parse(k, &v)?,
                "quad.max_depth" => c.quad.max_depth = parse(k, &v)?,
                "quad.mapping" => c.quad.mapping = parse_mapping(&v)?,
                "probe.r_min" => c.grid.probe.r_min = parse(k, &v)?,
                "probe.r_max" => c.grid.probe.r_max = parse(k, &v)?,
                "probe.points" => c.grid.probe.points = parse(k, &v)?,
                "probe.widths" => c.grid.widths = parse_list(k, &v)?,
                "probe.width" => c.grid.probe_width = parse(k, &v)?,
                "sweep.lambdas" => c.grid.lambdas = parse_list(k, &v)?,
                "sweep.masses" => c.grid.masses = parse_list(k, &v)?,
                "bounds.sectors" => c.grid.sectors = parse_list(k, &v)?,
                "bounds.s" => c.grid.bound_s = parse(k, &v)?,
                "bounds.epsilon" => c.grid.epsilon = parse(k, &v)?,
                "mc.samples" => c.grid.mc_samples = parse(k, &v)?,
                _ => unreachable!("key list and match arms disagree on {k}"),
            }
        }
        c.quad.seed = c.seed;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.quad.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.quad.validate()?;
        self.grid.probe.validate().map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("probe: {m}")),
            other => Error::Config(format!("probe: {other}")),
        })?;
        let g = &self.grid;
        let positive = |key: &str, v: &[f64]| -> Result<()> {
            if v.is_empty() {
                return Err(Error::Config(format!("{key}: missing grid values")));
            }
            match v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                Some(x) => Err(Error::Config(format!("{key}: values must be positive, got {x}"))),
                None => Ok(()),
            }
        };
        positive("probe.widths", &g.widths)?;
        positive("probe.width", &[g.probe_width])?;
        positive("sweep.lambdas", &g.lambdas)?;
        positive("sweep.masses", &g.masses)?;
        if g.lambdas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sweep.lambdas: values must be ascending".into()));
        }
        if g.sectors.len() < 2 {
            return Err(Error::Config("bounds.sectors: missing grid values (need at least two)".into()));
        }
        if g.sectors.windows(2).any(|w| w[1] <= w[0]) || *g.sectors.last().unwrap() > crate::boundslab::MAX_SECTOR {
            return Err(Error::Config(format!(
                "bounds.sectors: values must be ascending and at most {}",
                crate::boundslab::MAX_SECTOR
            )));
        }
        if !(0.0..0.25).contains(&g.bound_s) {
            return Err(Error::Config(format!("bounds.s must lie in [0, 1/4), got {}", g.bound_s)));
        }
        if !(g.epsilon > 0.0 && g.epsilon < 0.5) {
            return Err(Error::Config(format!("bounds.epsilon must lie in (0, 1/2), got {}", g.epsilon)));
        }
        if g.mc_samples < 1000 {
            return Err(Error::Config(format!("mc.samples must be at least 1000, got {}", g.mc_samples)));
        }
        Ok(())
    }

    /// Canonical text form; parses back to an equal configuration.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(", ");
        let mapping = match self.quad.mapping {
            Mapping::Rational => "rational",
            Mapping::Exponential => "exponential",
            Mapping::None => "none",
        };
        let g = &self.grid;
        let m = &self.model;
        let q = &self.quad;
        [
            format!("experiment = {}", self.experiment),
            format!("seed = {}", self.seed),
            format!("output_dir = {}", self.output_dir.display()),
            format!("model.m = {:e}", m.m),
            format!("model.particles = {}", m.particles),
            format!("model.sector = {}", m.sector),
            format!("model.lambda_cut = {:e}", m.lambda_cut),
            format!("model.c0 = {:e}", m.c0),
            format!("quad.rel_tol = {:e}", q.rel_tol),
            format!("quad.abs_tol = {:e}", q.abs_tol),
            format!("quad.max_depth = {}", q.max_depth),
            format!("quad.mapping = {mapping}"),
            format!("probe.r_min = {:e}", g.probe.r_min),
            format!("probe.r_max = {:e}", g.probe.r_max),
            format!("probe.points = {}", g.probe.points),
            format!("probe.widths = {}", list(&g.widths)),
            format!("probe.width = {:e}", g.probe_width),
            format!("sweep.lambdas = {}", list(&g.lambdas)),
            format!("sweep.masses = {}", list(&g.masses)),
            format!(
                "bounds.sectors = {}",
                g.sectors.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
            ),
            format!("bounds.s = {:e}", g.bound_s),
            format!("bounds.epsilon = {:e}", g.epsilon),
            format!("mc.samples = {}", g.mc_samples),
        ]
        .join("\n")
            + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn parses_sections_and_comments() {
        let c = ExperimentConfig::parse(
            "# run\nexperiment = sector1\nseed = 9  # inline\nmodel.m = 1.5\n\nsweep.masses = 0.5, 1\nquad.mapping = exponential\n",
        )
        .unwrap();
        assert_eq!(c.experiment, Experiment::Sector1);
        assert_eq!(c.seed, 9);
        assert_eq!(c.quad.seed, 9);
        assert_eq!(c.model.m, 1.5);
        assert_eq!(c.grid.masses, vec![0.5, 1.0]);
        assert_eq!(c.quad.mapping, Mapping::Exponential);
    }

    #[test]
    fn rejects_bad_input() {
        for (text, needle) in [
            ("model.mass = 1", "unknown key 'model.mass'"),
            ("seed = 1\nseed = 2", "duplicate key"),
            ("model.m", "expected 'key = value'"),
            ("model.m = -1", "model.m"),
            ("seed = x", "seed"),
            ("sweep.lambdas = ", "sweep.lambdas"),
            ("sweep.lambdas = ,", "sweep.lambdas"),
            ("probe.widths = 1, -2", "probe.widths"),
            ("probe.points = 2", "probe"),
            ("experiment = everything", "unknown experiment"),
            ("bounds.sectors = 3", "bounds.sectors"),
            ("bounds.s = 0.3", "bounds.s"),
            ("quad.rel_tol = 0", "quad.rel_tol"),
        ] {
            match ExperimentConfig::parse(text) {
                Err(Error::Config(msg)) => assert!(msg.contains(needle), "{text}: {msg}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn experiment_tags_round_trip() {
        for e in Experiment::INDIVIDUAL.iter().chain([Experiment::All].iter()) {
            assert_eq!(e.tag().parse::<Experiment>().unwrap(), *e);
        }
        assert_eq!(Experiment::All.expand().len(), 5);
        assert_eq!(Experiment::Bounds.expand(), vec![Experiment::Bounds]);
    }

    proptest! {
        #[test]
        fn text_form_round_trips(
            m in 0.01f64..100.0,
            seed in any::<u64>(),
            widths in prop::collection::vec(0.1f64..5.0, 1..4),
            points in 6usize..30,
        ) {
            let mut c = ExperimentConfig::default().with_seed(seed);
            c.model.m = m;
            c.grid.widths = widths;
            c.grid.probe.points = points;
            let back = ExperimentConfig::parse(&c.to_text()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
