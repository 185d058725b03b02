//! Run configuration: a versioned JSON document, optionally patched by flags.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fluxlattice::model::{AtomSpec, LatticeSpec, ModelKind};
use fluxlattice::scattering::WavepacketSpec;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// An angle in radians. Parses plain numbers as well as literals such as
/// `"pi"`, `"-0.5pi"`, `"3pi/4"` or `"pi/8"`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Phase(pub f64);

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let text: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || format!("cannot read {s:?} as a phase");
        let (num, den) = match text.split_once('/') {
            Some((n, d)) => (n, d.parse::<f64>().map_err(|_| bad())?),
            None => (text.as_str(), 1.0),
        };
        let value = match num.strip_suffix("pi") {
            Some("") | Some("+") => PI,
            Some("-") => -PI,
            Some(coef) => coef.parse::<f64>().map_err(|_| bad())? * PI,
            None => num.parse::<f64>().map_err(|_| bad())?,
        };
        let value = value / den;
        if value.is_finite() {
            Ok(Phase(value))
        } else {
            Err(bad())
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Phase {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Phase {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(x) => Ok(Phase(x)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Band,
    Decay,
    Emission,
    #[serde(rename = "selfenergy")]
    SelfEnergy,
    Scatter,
    Wavepacket,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Band => "band",
            Experiment::Decay => "decay",
            Experiment::Emission => "emission",
            Experiment::SelfEnergy => "selfenergy",
            Experiment::Scatter => "scatter",
            Experiment::Wavepacket => "wavepacket",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Exact,
    #[default]
    Effective,
}

impl From<ModelChoice> for ModelKind {
    fn from(m: ModelChoice) -> Self {
        match m {
            ModelChoice::Exact => ModelKind::Exact,
            ModelChoice::Effective => ModelKind::Effective,
        }
    }
}

/// Either `beta` (the effective model is built directly) or the sawtooth
/// pair `lambda`, `delta_ab`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    #[serde(default = "one")]
    pub j: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_ab: Option<f64>,
    #[serde(default)]
    pub phi: Phase,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default = "default_sites")]
    pub m_total: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_min: Option<i64>,
}

fn one() -> f64 {
    1.0
}

fn default_sites() -> usize {
    200
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self { j: 1.0, beta: Some(1.0), lambda: None, delta_ab: None, phi: Phase(0.0), kappa: 0.0, m_total: 200, m_min: None }
    }
}

impl LatticeConfig {
    pub fn to_spec(&self) -> Result<LatticeSpec, CliError> {
        let mut spec = match (self.beta, self.lambda, self.delta_ab) {
            (Some(beta), None, None) => LatticeSpec::with_beta(self.j, beta, self.phi.0, self.m_total),
            (None, Some(lambda), Some(delta_ab)) => LatticeSpec::sawtooth(self.j, lambda, delta_ab, self.phi.0, self.m_total),
            _ => {
                return Err(CliError::Config(
                    "lattice needs either `beta` or both `lambda` and `delta_ab`".into(),
                ))
            }
        };
        spec = spec.with_kappa(self.kappa);
        if let Some(m_min) = self.m_min {
            spec.m_min = m_min;
        }
        spec.validate().map_err(|e| CliError::Config(format!("lattice: {e}")))?;
        Ok(spec)
    }
}

/// One atom, or `count` identical copies. Omitting `separation` gives a
/// single coupling point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub delta: f64,
    pub g: f64,
    #[serde(default)]
    pub site_left: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation: Option<usize>,
    #[serde(default)]
    pub phi_extra: Phase,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "one_atom")]
    pub count: usize,
}

fn one_atom() -> usize {
    1
}

impl Default for AtomConfig {
    fn default() -> Self {
        Self { delta: 2.0, g: 0.2, site_left: 0, separation: Some(2), phi_extra: Phase(0.0), gamma: 0.0, count: 1 }
    }
}

impl AtomConfig {
    pub fn to_spec(&self) -> AtomSpec {
        let atom = match self.separation {
            Some(n) => AtomSpec::giant(self.delta, self.g, self.site_left, n),
            None => AtomSpec::small(self.delta, self.g, self.site_left),
        };
        atom.with_phi_extra(self.phi_extra.0).with_gamma(self.gamma)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavepacketConfig {
    pub m0: i64,
    pub w: f64,
    pub k0: Phase,
}

impl Default for WavepacketConfig {
    fn default() -> Self {
        Self { m0: -20, w: 5.0, k0: Phase(-PI / 2.0) }
    }
}

impl From<WavepacketConfig> for WavepacketSpec {
    fn from(c: WavepacketConfig) -> Self {
        WavepacketSpec::new(c.m0, c.w, c.k0.0)
    }
}

/// Experiment-specific knobs; each experiment reads the ones it needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_points: Option<usize>,
    /// Fraction of the bandwidth kept clear of each band edge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavepacket: Option<WavepacketConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Svg]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, formats: all_formats() }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub experiment: Experiment,
    #[serde(default)]
    pub model: ModelChoice,
    #[serde(default)]
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub atoms: Vec<AtomConfig>,
    #[serde(default)]
    pub settings: Settings,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    /// Defaults used when no config file is given.
    pub fn default_for(experiment: Experiment) -> Self {
        let atoms = match experiment {
            Experiment::Band => Vec::new(),
            _ => vec![AtomConfig::default()],
        };
        Self {
            schema_version: SCHEMA_VERSION,
            experiment,
            model: ModelChoice::Effective,
            lattice: LatticeConfig::default(),
            atoms,
            settings: Settings::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn lattice_spec(&self) -> Result<LatticeSpec, CliError> {
        self.lattice.to_spec()
    }

    /// Expanded atom list, checked against the lattice.
    pub fn atom_specs(&self) -> Result<Vec<AtomSpec>, CliError> {
        let lattice = self.lattice_spec()?;
        let mut atoms = Vec::new();
        for (i, a) in self.atoms.iter().enumerate() {
            if a.count == 0 {
                return Err(CliError::Config(format!("atom {i}: count must be at least 1")));
            }
            let spec = a.to_spec();
            spec.validate(&lattice).map_err(|e| CliError::Config(format!("atom {i}: {e}")))?;
            atoms.extend(std::iter::repeat_n(spec, a.count));
        }
        Ok(atoms)
    }

    /// Checks everything that can be checked before any numerics run.
    pub fn validate(&self) -> Result<(), CliError> {
        let lattice = self.lattice_spec()?;
        let atoms = self.atom_specs()?;
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(CliError::Config(format!("{name} must be positive, got {x}"))),
            _ => Ok(()),
        };
        positive("t_final", self.settings.t_final)?;
        positive("dt", self.settings.dt)?;
        positive("measure_time", self.settings.measure_time)?;
        positive("eta", self.settings.eta)?;
        if let Some(m) = self.settings.omega_margin {
            if !(0.0..0.5).contains(&m) {
                return Err(CliError::Config(format!("omega_margin must lie in [0, 0.5), got {m}")));
            }
        }
        for (name, n) in [("k_points", self.settings.k_points), ("omega_points", self.settings.omega_points)] {
            if n == Some(0) {
                return Err(CliError::Config(format!("{name} must be at least 1")));
            }
        }
        let needs_atom = !matches!(self.experiment, Experiment::Band);
        if needs_atom && atoms.is_empty() {
            return Err(CliError::Config(format!("{} needs at least one atom", self.experiment.name())));
        }
        if matches!(self.experiment, Experiment::Emission | Experiment::Decay | Experiment::Wavepacket) {
            return Ok(());
        }
        // the band, self-energy and scattering experiments use the reduced chain only
        if self.model == ModelChoice::Exact {
            return Err(CliError::Config(format!("{} is defined for the effective model only", self.experiment.name())));
        }
        lattice.beta().map_err(|e| CliError::Config(format!("lattice: {e}")))?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
