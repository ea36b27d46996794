//! TOML run configuration.
//!
//! Every section is a flat table of `key = value` pairs. Unknown keys are
//! rejected; optional keys get their defaults written into the echoed
//! effective configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use driftfront::discretize::build_grid;
use driftfront::freeboundary::{ClassifyThresholds, RunOptions};
use driftfront::model::{validate, validate_initial, KernelFamily, NonlinearityFamily, Profile, Species};
use driftfront::thresholds::ThresholdOptions;
use driftfront::{CoefficientField, Error as CoreError, Grid, InitialData, KernelSpec, ModelParams, NonlinearitySpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: cannot read: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{}: {key}: {message}", Location(.path, *.line))]
    Invalid { path: PathBuf, line: Option<usize>, key: String, message: String },
}

struct Location<'a>(&'a Path, Option<usize>);

impl fmt::Display for Location<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.1 {
            Some(line) => write!(f, "{}:{line}", self.0.display()),
            None => write!(f, "{}", self.0.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub d1: f64,
    pub d2: f64,
    pub p: f64,
    pub q: f64,
    /// Base of the loss rate `a(x) = a + a_amplitude cos(a_wavenumber x)`.
    pub a: f64,
    #[serde(default)]
    pub a_amplitude: f64,
    #[serde(default)]
    pub a_wavenumber: f64,
    pub b: f64,
    #[serde(default)]
    pub b_amplitude: f64,
    #[serde(default)]
    pub b_wavenumber: f64,
    #[serde(default = "quartic")]
    pub kernel_u: KernelFamily,
    #[serde(default = "one")]
    pub kernel_u_radius: f64,
    #[serde(default = "half")]
    pub kernel_u_width: f64,
    #[serde(default = "quartic")]
    pub kernel_v: KernelFamily,
    #[serde(default = "one")]
    pub kernel_v_radius: f64,
    #[serde(default = "half")]
    pub kernel_v_width: f64,
    #[serde(default = "monod")]
    pub h_family: NonlinearityFamily,
    pub h_slope: f64,
    #[serde(default = "one")]
    pub h_saturation: f64,
    #[serde(default = "monod")]
    pub g_family: NonlinearityFamily,
    pub g_slope: f64,
    #[serde(default = "one")]
    pub g_saturation: f64,
    pub mu: f64,
    pub rho: f64,
    pub h0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileFamily {
    CosineBump,
    ConstantPlateau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default = "cosine")]
    pub u_profile: ProfileFamily,
    #[serde(default = "one")]
    pub u_level: f64,
    #[serde(default = "cosine")]
    pub v_profile: ProfileFamily,
    #[serde(default = "one")]
    pub v_level: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self { u_profile: cosine(), u_level: 1.0, v_profile: cosine(), v_level: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dx: f64,
    #[serde(default = "window_factor")]
    pub window_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "horizon")]
    pub horizon: f64,
    #[serde(default = "one")]
    pub sample_every: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "yes")]
    pub stop_on_classification: bool,
    #[serde(default = "vanish_density")]
    pub vanish_density: f64,
    #[serde(default = "vanish_speed")]
    pub vanish_speed: f64,
    #[serde(default = "spread_safety")]
    pub spread_safety: f64,
    /// Defaults to `20 h0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spread_length: Option<f64>,
    #[serde(default = "half")]
    pub spread_fraction: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            horizon: horizon(),
            sample_every: 1.0,
            dt: None,
            stop_on_classification: true,
            vanish_density: vanish_density(),
            vanish_speed: vanish_speed(),
            spread_safety: spread_safety(),
            spread_length: None,
            spread_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    #[serde(default = "tol_rel")]
    pub tol_rel: f64,
    #[serde(default = "mu_start")]
    pub mu_start: f64,
    #[serde(default = "mu_cap")]
    pub mu_cap: f64,
    #[serde(default = "mu_floor")]
    pub mu_floor: f64,
    #[serde(default = "growth")]
    pub growth: f64,
    #[serde(default = "max_doublings")]
    pub max_doublings: usize,
    #[serde(default = "sections")]
    pub sections: usize,
    #[serde(default = "reprobe_points")]
    pub reprobe_points: usize,
    /// Columns of the `--table` mode.
    #[serde(default = "table_mu")]
    pub table_mu: Vec<f64>,
    /// Rows of the `--table` mode.
    #[serde(default = "table_h0")]
    pub table_h0: Vec<f64>,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        Self {
            tol_rel: tol_rel(),
            mu_start: mu_start(),
            mu_cap: mu_cap(),
            mu_floor: mu_floor(),
            growth: growth(),
            max_doublings: max_doublings(),
            sections: sections(),
            reprobe_points: reprobe_points(),
            table_mu: table_mu(),
            table_h0: table_h0(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadySection {
    /// Half-length of the fixed interval for the spatial relaxation; omitted
    /// means homogeneous states only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_length: Option<f64>,
    #[serde(default = "t_relax")]
    pub t_relax: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_max: Option<f64>,
}

impl Default for SteadySection {
    fn default() -> Self {
        Self { half_length: None, t_relax: t_relax(), u_max: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "directory")]
    pub directory: PathBuf,
    /// Full-field CSV matrices at every sample of `simulate`.
    #[serde(default)]
    pub snapshots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: directory(), snapshots: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub initial: InitialSection,
    pub grid: GridSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub threshold: ThresholdSection,
    #[serde(default)]
    pub steady: SteadySection,
    #[serde(default)]
    pub output: OutputSection,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn yes() -> bool {
    true
}
fn quartic() -> KernelFamily {
    KernelFamily::QuarticBump
}
fn monod() -> NonlinearityFamily {
    NonlinearityFamily::Monod
}
fn cosine() -> ProfileFamily {
    ProfileFamily::CosineBump
}
fn window_factor() -> f64 {
    16.0
}
fn horizon() -> f64 {
    200.0
}
fn vanish_density() -> f64 {
    1e-7
}
fn vanish_speed() -> f64 {
    1e-9
}
fn spread_safety() -> f64 {
    1.25
}
fn tol_rel() -> f64 {
    0.05
}
fn mu_start() -> f64 {
    1e-3
}
fn mu_cap() -> f64 {
    1e6
}
fn mu_floor() -> f64 {
    1e-9
}
fn growth() -> f64 {
    4.0
}
fn max_doublings() -> usize {
    2
}
fn sections() -> usize {
    3
}
fn reprobe_points() -> usize {
    5
}
fn table_mu() -> Vec<f64> {
    vec![0.01, 0.1, 1.0, 10.0]
}
fn table_h0() -> Vec<f64> {
    vec![0.2, 0.5, 1.0]
}
fn t_relax() -> f64 {
    2000.0
}
fn directory() -> PathBuf {
    PathBuf::from("runs")
}

/// 1-based line of `key` inside `[section]`, or of the section header when the
/// key is absent.
pub fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map(|p| p + 1).unwrap_or(0) + 1;
    (line, column)
}

/// Config key blamed for a failed model check.
fn key_for_check(name: &str) -> (&'static str, &'static str) {
    let table: [(&str, &str); 13] = [
        ("dispersal of u", "d1"),
        ("dispersal of v", "d2"),
        ("drift of u", "p"),
        ("drift of v", "q"),
        ("J1", "kernel_u_radius"),
        ("J2", "kernel_v_radius"),
        ("H ", "h_slope"),
        ("G ", "g_slope"),
        ("coefficient a", "a"),
        ("coefficient b", "b"),
        ("expansion rate", "mu"),
        ("flux weight", "rho"),
        ("initial half-width", "h0"),
    ];
    let key = table.iter().find(|(prefix, _)| name.starts_with(prefix)).map(|(_, k)| *k).unwrap_or("");
    let key = match (key, name) {
        ("kernel_u_radius", n) if n.ends_with("width") => "kernel_u_width",
        ("kernel_v_radius", n) if n.ends_with("width") => "kernel_v_width",
        ("h_slope", n) if n.ends_with("saturation") => "h_saturation",
        ("g_slope", n) if n.ends_with("saturation") => "g_saturation",
        (k, _) => k,
    };
    ("model", key)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::parse(&text, path)
    }

    /// Parses, fills defaults and validates. `path` only labels errors.
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map(|s| line_column(text, s.start)).unwrap_or((1, 1));
            ConfigError::Parse { path: path.into(), line, column, message: e.message().trim().to_string() }
        })?;
        cfg.run.spread_length.get_or_insert(20.0 * cfg.model.h0);
        cfg.check(text, path)?;
        Ok(cfg)
    }

    fn check(&self, text: &str, path: &Path) -> Result<(), ConfigError> {
        let invalid = |section: &str, key: &str, message: String| ConfigError::Invalid {
            path: path.into(),
            line: locate(text, section, key),
            key: if key.is_empty() { section.to_string() } else { format!("{section}.{key}") },
            message,
        };
        let report = validate(&self.params());
        if let Some(bad) = report.failures().next() {
            let (section, key) = key_for_check(&bad.name);
            return Err(invalid(section, key, format!("{}: {}", bad.name, bad.detail)));
        }
        let report = validate_initial(&self.initial());
        if let Some(bad) = report.failures().next() {
            let key = if bad.name.starts_with("u0") { "u_level" } else { "v_level" };
            return Err(invalid("initial", key, format!("{}: {}", bad.name, bad.detail)));
        }
        let grid = self.grid().map_err(|e| {
            let key = match &e {
                CoreError::GridTooCoarse { .. } => "dx",
                CoreError::InvalidGrid(m) if m.contains("window") => "window_factor",
                CoreError::InvalidGrid(m) if m.contains("h0") => "h0",
                _ => "dx",
            };
            let section = if key == "h0" { "model" } else { "grid" };
            invalid(section, key, e.to_string())
        })?;
        let radius = self.model.kernel_u_radius.max(self.model.kernel_v_radius);
        if radius >= grid.half_width() {
            return Err(invalid(
                "grid",
                "window_factor",
                format!("kernel support radius {radius} does not fit in the window half-width {}", grid.half_width()),
            ));
        }
        let r = &self.run;
        let positive = [
            ("horizon", r.horizon),
            ("sample_every", r.sample_every),
            ("vanish_density", r.vanish_density),
            ("vanish_speed", r.vanish_speed),
            ("spread_safety", r.spread_safety),
            ("spread_fraction", r.spread_fraction),
            ("spread_length", r.spread_length.unwrap_or(1.0)),
            ("dt", r.dt.unwrap_or(1.0)),
        ];
        if let Some((key, value)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(invalid("run", key, format!("must be positive and finite (got {value})")));
        }
        let t = &self.threshold;
        if !(t.tol_rel > 0.0 && t.tol_rel < 1.0) {
            return Err(invalid("threshold", "tol_rel", format!("must lie in (0, 1) (got {})", t.tol_rel)));
        }
        if !(t.growth > 1.0) {
            return Err(invalid("threshold", "growth", format!("must exceed 1 (got {})", t.growth)));
        }
        if !(t.mu_floor > 0.0 && t.mu_floor <= t.mu_start && t.mu_start < t.mu_cap) {
            return Err(invalid(
                "threshold",
                "mu_start",
                format!("need 0 < mu_floor <= mu_start < mu_cap (got {}, {}, {})", t.mu_floor, t.mu_start, t.mu_cap),
            ));
        }
        if t.sections == 0 || t.reprobe_points == 0 {
            return Err(invalid("threshold", if t.sections == 0 { "sections" } else { "reprobe_points" }, "must be at least 1".into()));
        }
        if let Some(bad) = t.table_mu.iter().find(|&&m| !(m >= 0.0 && m.is_finite())) {
            return Err(invalid("threshold", "table_mu", format!("entries must be nonnegative (got {bad})")));
        }
        if let Some(bad) = t.table_h0.iter().find(|&&h| !(h > 0.0 && h.is_finite())) {
            return Err(invalid("threshold", "table_h0", format!("entries must be positive (got {bad})")));
        }
        let s = &self.steady;
        if !(s.t_relax > 0.0) {
            return Err(invalid("steady", "t_relax", format!("must be positive (got {})", s.t_relax)));
        }
        if let Some(z) = s.half_length {
            if !(z > 0.0) {
                return Err(invalid("steady", "half_length", format!("must be positive (got {z})")));
            }
        }
        if let Some(u) = s.u_max {
            if !(u > 0.0) {
                return Err(invalid("steady", "u_max", format!("must be positive (got {u})")));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> ModelParams {
        let m = &self.model;
        let kernel = |family, width, radius| KernelSpec::new(family, width, radius);
        let source = |family, slope, saturation| match family {
            NonlinearityFamily::Linear => NonlinearitySpec::linear(slope),
            NonlinearityFamily::Monod => NonlinearitySpec::monod(slope, saturation),
        };
        ModelParams {
            species: [
                Species {
                    dispersal: m.d1,
                    drift: m.p,
                    decay: CoefficientField::cosine(m.a, m.a_amplitude, m.a_wavenumber),
                    kernel: kernel(m.kernel_u, m.kernel_u_width, m.kernel_u_radius),
                    source: source(m.h_family, m.h_slope, m.h_saturation),
                },
                Species {
                    dispersal: m.d2,
                    drift: m.q,
                    decay: CoefficientField::cosine(m.b, m.b_amplitude, m.b_wavenumber),
                    kernel: kernel(m.kernel_v, m.kernel_v_width, m.kernel_v_radius),
                    source: source(m.g_family, m.g_slope, m.g_saturation),
                },
            ],
            expansion_rate: m.mu,
            flux_weight: m.rho,
            initial_half_width: m.h0,
        }
    }

    pub fn grid(&self) -> Result<Grid, CoreError> {
        build_grid(self.model.h0, self.grid.dx, self.grid.window_factor)
    }

    pub fn initial(&self) -> InitialData {
        let profile = |family, level| match family {
            ProfileFamily::CosineBump => Profile::CosineBump { amplitude: level },
            ProfileFamily::ConstantPlateau => Profile::ConstantPlateau { level },
        };
        InitialData { u: profile(self.initial.u_profile, self.initial.u_level), v: profile(self.initial.v_profile, self.initial.v_level) }
    }

    /// Classification cutoffs for an initial half-width `h0`.
    pub fn classify_thresholds(&self, h0: f64) -> ClassifyThresholds<f64> {
        let r = &self.run;
        ClassifyThresholds {
            vanish_density: r.vanish_density,
            vanish_speed: r.vanish_speed,
            spread_safety: r.spread_safety,
            spread_length: r.spread_length.unwrap_or(20.0 * h0),
            spread_fraction: r.spread_fraction,
        }
    }

    pub fn run_options(&self, h0: f64) -> RunOptions<f64> {
        let mut options = RunOptions::new(self.run.horizon, h0);
        options.sample_every = self.run.sample_every;
        options.dt = self.run.dt;
        options.stop_on_classification = self.run.stop_on_classification;
        options.snapshots = self.output.snapshots;
        options.context.thresholds = self.classify_thresholds(h0);
        options
    }

    pub fn threshold_options(&self, h0: f64) -> ThresholdOptions<f64> {
        let t = &self.threshold;
        let mut options = ThresholdOptions::new(h0);
        options.horizon = self.run.horizon;
        options.tol_rel = t.tol_rel;
        options.mu_start = t.mu_start;
        options.mu_cap = t.mu_cap;
        options.mu_floor = t.mu_floor;
        options.growth = t.growth;
        options.max_doublings = t.max_doublings;
        options.sections = t.sections;
        options.reprobe_points = t.reprobe_points;
        options.thresholds = self.classify_thresholds(h0);
        options.dt = self.run.dt;
        options
    }

    /// The effective configuration with every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Returns a copy with one key replaced. `key` is either `section.key` or
    /// a bare key that occurs in exactly one section.
    pub fn with_value(&self, key: &str, value: f64) -> Result<Self, String> {
        let mut doc: toml::Table = toml::from_str(&self.to_toml()).map_err(|e| e.to_string())?;
        let (section, name) = match key.split_once('.') {
            Some((s, k)) => (s.to_string(), k.to_string()),
            None => {
                let owners: Vec<String> = sections_owning(key);
                match owners.as_slice() {
                    [one] => (one.clone(), key.to_string()),
                    [] => return Err(format!("unknown parameter '{key}'")),
                    _ => return Err(format!("parameter '{key}' is ambiguous; use one of {}", owners.join(", "))),
                }
            }
        };
        let table = doc
            .entry(section.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| format!("'{section}' is not a section"))?;
        let integer = matches!(table.get(&name), Some(toml::Value::Integer(_))) || INTEGER_KEYS.contains(&name.as_str());
        let new = if integer {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(format!("{section}.{name} needs a nonnegative integer (got {value})"));
            }
            toml::Value::Integer(value as i64)
        } else {
            toml::Value::Float(value)
        };
        table.insert(name.clone(), new);
        let text = toml::to_string(&doc).map_err(|e| e.to_string())?;
        let mut cfg = Self::parse(&text, Path::new(&format!("<{section}.{name} = {value}>"))).map_err(|e| e.to_string())?;
        if section == "model" && name == "h0" && self.run.spread_length == Some(20.0 * self.model.h0) {
            cfg.run.spread_length = Some(20.0 * cfg.model.h0);
        }
        Ok(cfg)
    }
}

const INTEGER_KEYS: [&str; 3] = ["max_doublings", "sections", "reprobe_points"];

fn sections_owning(key: &str) -> Vec<String> {
    let probe = RunConfig::example();
    let doc: toml::Table = toml::from_str(&probe.to_toml()).expect("example serializes");
    let optional = [("run", "dt"), ("steady", "half_length"), ("steady", "u_max")];
    let mut owners: Vec<String> = doc
        .iter()
        .filter(|(_, v)| v.as_table().is_some_and(|t| t.contains_key(key)))
        .map(|(s, _)| s.clone())
        .collect();
    for (s, k) in optional {
        if k == key && !owners.iter().any(|o| o == s) {
            owners.push(s.to_string());
        }
    }
    owners
}

impl RunConfig {
    /// A complete configuration with the reference parameters.
    pub fn example() -> Self {
        let text = "[model]\nd1 = 1.0\nd2 = 1.0\np = 0.2\nq = 0.2\na = 1.0\nb = 1.0\nh_slope = 2.0\ng_slope = 2.0\n\
                    mu = 1.0\nrho = 0.5\nh0 = 1.0\n\n[grid]\ndx = 0.05\n";
        Self::parse(text, Path::new("<example>")).expect("example configuration is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[model]\nd1 = 1.0\nd2 = 1.0\np = 0.2\nq = 0.2\na = 1.0\nb = 1.0\nh_slope = 2.0\n\
                           g_slope = 2.0\nmu = 1.0\nrho = 0.5\nh0 = 1.0\n\n[grid]\ndx = 0.05\n";

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::parse(text, Path::new("test.toml"))
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.grid.window_factor, 16.0);
        assert_eq!(cfg.run.spread_length, Some(20.0));
        assert_eq!(cfg.params(), ModelParams::reference());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = parse(MINIMAL).unwrap();
        let again = parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        let mut odd = cfg.clone();
        odd.run.dt = Some(0.001);
        odd.model.a_amplitude = 0.1234567890123;
        odd.model.a_wavenumber = 3.0;
        odd.steady.half_length = Some(2.5);
        assert_eq!(parse(&odd.to_toml()).unwrap(), odd);
    }

    #[test]
    fn unknown_key_is_named_with_its_line() {
        let text = MINIMAL.replace("rho = 0.5", "mu_rho = 0.5");
        let err = parse(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mu_rho"), "{msg}");
        assert!(msg.starts_with("test.toml:11:"), "{msg}");
    }

    #[test]
    fn missing_key_is_reported() {
        let text = MINIMAL.replace("h0 = 1.0\n", "");
        let msg = parse(&text).unwrap_err().to_string();
        assert!(msg.contains("h0"), "{msg}");
    }

    #[test]
    fn type_mismatch_is_located() {
        let text = MINIMAL.replace("d2 = 1.0", "d2 = \"fast\"");
        match parse(&text).unwrap_err() {
            ConfigError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn negative_spacing_points_at_dx() {
        let text = MINIMAL.replace("dx = 0.05", "dx = -0.05");
        match parse(&text).unwrap_err() {
            ConfigError::Invalid { line, key, message, .. } => {
                assert_eq!(line, Some(15));
                assert_eq!(key, "grid.dx");
                assert!(message.contains("spacing"), "{message}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn model_check_points_at_its_key() {
        let text = MINIMAL.replace("a = 1.0", "a = -1.0");
        match parse(&text).unwrap_err() {
            ConfigError::Invalid { line, key, .. } => {
                assert_eq!(key, "model.a");
                assert_eq!(line, Some(6));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn with_value_replaces_one_key() {
        let cfg = parse(MINIMAL).unwrap();
        let d = cfg.with_value("d1", 10.0).unwrap();
        assert_eq!(d.model.d1, 10.0);
        assert_eq!(d.model.d2, 1.0);
        assert_eq!(cfg.with_value("threshold.sections", 5.0).unwrap().threshold.sections, 5);
        assert!(cfg.with_value("nope", 1.0).is_err());
        assert_eq!(cfg.with_value("h0", 2.0).unwrap().run.spread_length, Some(40.0));
        assert_eq!(cfg.with_value("dt", 0.01).unwrap().run.dt, Some(0.01));
    }
}
