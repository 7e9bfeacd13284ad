//! Scenario configuration (TOML, schema version 1) and the bundled presets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use selfheal_core::channel::{CountRates, DetectionModel, DEFAULT_FIBER_WAIST, DEFAULT_PUMP_WAIST};
use selfheal_core::field::TransverseGrid;
use selfheal_core::jones::{MubLabel, DEFAULT_Q};
use selfheal_core::modes::ModeSpec;
use selfheal_core::propagation::{ChannelSpec, ObstacleSpec};
use selfheal_core::security::{KeyRateVariant, PhotonStatistics, QberWeighting, SecurityParams};

use crate::units::{Length, WaveNumber};
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub const PRESETS: &[(&str, &str)] = &[
    ("paper-free-space", include_str!("../presets/paper-free-space.toml")),
    ("paper-R1-BG", include_str!("../presets/paper-R1-BG.toml")),
    ("paper-R1-LG", include_str!("../presets/paper-R1-LG.toml")),
    ("paper-R2-BG", include_str!("../presets/paper-R2-BG.toml")),
    ("paper-R2-LG", include_str!("../presets/paper-R2-LG.toml")),
    ("paper-scenarios", include_str!("../presets/paper-scenarios.toml")),
    ("paper-table3", include_str!("../presets/paper-table3.toml")),
    ("paper-selfheal-scan", include_str!("../presets/paper-selfheal-scan.toml")),
];

pub fn preset(name: &str) -> Result<&'static str, CliError> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| {
            let known: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            CliError::Config(format!("unknown preset {name:?}; available: {}", known.join(", ")))
        })
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default)]
    pub grid: GridConfig,
    /// Named mode families used by scenarios and scans.
    #[serde(default)]
    pub sources: BTreeMap<String, SourceConfig>,
    #[serde(default)]
    pub spdc: SpdcSection,
    #[serde(default)]
    pub detection: DetectionSection,
    #[serde(default)]
    pub security: SecuritySection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub scenarios: Vec<ScenarioConfig>,
    pub scan: Option<ScanSection>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Samples per side.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Full side length.
    #[serde(default = "default_extent")]
    pub extent: Length,
}

fn default_n() -> usize {
    1024
}

fn default_extent() -> Length {
    Length(10e-3)
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: default_n(),
            extent: default_extent(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    BesselGauss,
    LaguerreGauss,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub family: Family,
    /// Radial wavenumber, Bessel-Gauss only.
    pub k_r: Option<WaveNumber>,
    /// Gaussian envelope (BG) or beam waist (LG).
    pub w0: Length,
    pub wavelength: Length,
    /// q-plate charge of encoder and decoder; the OAM set is ±2q.
    #[serde(default = "default_q")]
    pub q: f64,
}

fn default_q() -> f64 {
    DEFAULT_Q
}

impl SourceConfig {
    pub fn spec(&self, name: &str) -> Result<ModeSpec, CliError> {
        let spec = match (self.family, self.k_r) {
            (Family::BesselGauss, Some(k)) => ModeSpec::bessel_gauss(0, k.0, self.w0.0, self.wavelength.0),
            (Family::BesselGauss, None) => {
                return Err(CliError::Config(format!("sources.{name}.k_r is required for bessel_gauss")))
            }
            (Family::LaguerreGauss, None) => ModeSpec::laguerre_gauss(0, self.w0.0, self.wavelength.0),
            (Family::LaguerreGauss, Some(_)) => {
                return Err(CliError::Config(format!("sources.{name}.k_r only applies to bessel_gauss")))
            }
        };
        spec.validate()
            .map_err(|e| CliError::Config(format!("sources.{name}: {e}")))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpdcSection {
    #[serde(default = "default_pump")]
    pub pump_waist: Length,
    #[serde(default = "default_stats")]
    pub photon_statistics: PhotonStatistics,
}

fn default_pump() -> Length {
    Length(DEFAULT_PUMP_WAIST)
}

fn default_stats() -> PhotonStatistics {
    PhotonStatistics::Poisson { mu: 1e-3, q_mu: 1e-4 }
}

impl Default for SpdcSection {
    fn default() -> Self {
        Self {
            pump_waist: default_pump(),
            photon_statistics: default_stats(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionKind {
    Ideal,
    HologramCascade,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    #[serde(default = "default_detection_kind")]
    pub model: DetectionKind,
    /// Fiber mode waist referred to the hologram plane.
    #[serde(default = "default_fiber")]
    pub fiber_waist: Length,
    /// Decoder position from the channel input; defaults to the last obstacle.
    pub decoder_z: Option<Length>,
    /// Probability added to every detection cell.
    #[serde(default)]
    pub noise_floor: f64,
}

fn default_detection_kind() -> DetectionKind {
    DetectionKind::HologramCascade
}

fn default_fiber() -> Length {
    Length(DEFAULT_FIBER_WAIST)
}

impl Default for DetectionSection {
    fn default() -> Self {
        Self {
            model: default_detection_kind(),
            fiber_waist: default_fiber(),
            decoder_z: None,
            noise_floor: 0.0,
        }
    }
}

impl DetectionSection {
    pub fn model(&self) -> DetectionModel {
        match self.model {
            DetectionKind::Ideal => DetectionModel::Ideal,
            DetectionKind::HologramCascade => DetectionModel::HologramCascade {
                fiber_waist: self.fiber_waist.0,
                decoder_z: self.decoder_z.map(|z| z.0),
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DirectEntry {
    pub name: String,
    pub qber: f64,
    pub qber_uncertainty: Option<f64>,
    /// Multi-photon fraction; falls back to `spdc.photon_statistics`.
    pub delta: Option<f64>,
    /// Measured normalized counts, echoed into the report.
    pub normalized_counts: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SecuritySection {
    #[serde(default = "default_dimension")]
    pub dimension: u32,
    #[serde(default = "default_f_ec")]
    pub f_ec: f64,
    #[serde(default)]
    pub variant: KeyRateVariant,
    #[serde(default)]
    pub weighting: QberWeighting,
    /// Error rates entered by hand instead of simulated.
    #[serde(default)]
    pub direct: Vec<DirectEntry>,
}

fn default_dimension() -> u32 {
    4
}

fn default_f_ec() -> f64 {
    1.2
}

impl Default for SecuritySection {
    fn default() -> Self {
        Self {
            dimension: default_dimension(),
            f_ec: default_f_ec(),
            variant: KeyRateVariant::default(),
            weighting: QberWeighting::default(),
            direct: Vec::new(),
        }
    }
}

impl SecuritySection {
    pub fn params(&self) -> SecurityParams {
        SecurityParams {
            dimension: self.dimension,
            f_ec: self.f_ec,
            variant: self.variant,
            weighting: self.weighting,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Json,
    Csv,
    Heatmap,
    Counts,
    Pgm,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    /// Heralded pairs per scenario for the count simulation; 0 disables it.
    #[serde(default = "default_events")]
    pub events: f64,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputKind>,
    /// Distances from the channel input for intensity snapshots.
    #[serde(default)]
    pub snapshot_stations: Vec<Length>,
    /// Largest tolerated fraction of signal power near the grid edge.
    #[serde(default = "default_guard")]
    pub boundary_guard: f64,
}

fn default_events() -> f64 {
    1e6
}

fn default_outputs() -> Vec<OutputKind> {
    vec![OutputKind::Json, OutputKind::Csv, OutputKind::Heatmap, OutputKind::Counts]
}

fn default_guard() -> f64 {
    1e-3
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            events: default_events(),
            outputs: default_outputs(),
            snapshot_stations: Vec::new(),
            boundary_guard: default_guard(),
        }
    }
}

impl RunSection {
    pub fn wants(&self, kind: OutputKind) -> bool {
        self.outputs.contains(&kind)
    }

    pub fn rates(&self) -> CountRates {
        CountRates::events(self.events)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleConfig {
    pub radius: Length,
    /// Distance from the channel input.
    #[serde(default = "zero")]
    pub z: Length,
    #[serde(default = "zero")]
    pub offset_x: Length,
    #[serde(default = "zero")]
    pub offset_y: Length,
}

fn zero() -> Length {
    Length(0.0)
}

impl ObstacleConfig {
    pub fn spec(&self) -> ObstacleSpec {
        ObstacleSpec {
            radius: self.radius.0,
            offset_x: self.offset_x.0,
            offset_y: self.offset_y.0,
            z: self.z.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Key into `sources`.
    pub source: String,
    /// Distance L from the last obstacle (or the input) to the receiver.
    pub distance: Length,
    #[serde(default)]
    pub obstacles: Vec<ObstacleConfig>,
    /// Scenario whose Ψ₀₀ counts normalize this one.
    pub reference: Option<String>,
}

impl ScenarioConfig {
    pub fn channel(&self) -> ChannelSpec {
        let obstacles: Vec<ObstacleSpec> = self.obstacles.iter().map(ObstacleConfig::spec).collect();
        let last = obstacles.last().map_or(0.0, |o| o.z);
        ChannelSpec {
            length: last + self.distance.0,
            obstacles,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub label: MubLabel,
    /// Keys into `sources`.
    pub sources: Vec<String>,
    pub obstacle: ObstacleConfig,
    /// Distances behind the obstacle.
    #[serde(default)]
    pub stations: Vec<Length>,
    /// Distances behind the obstacle in units of the shadow length of the
    /// first Bessel-Gauss source.
    #[serde(default)]
    pub stations_zmin: Vec<f64>,
    /// Radius of the comparison window; defaults to the obstacle radius.
    pub window: Option<Length>,
    /// Write intensity snapshots at every station.
    #[serde(default)]
    pub snapshots: bool,
}

/// Parses and checks a config document. Errors carry the offending field.
pub fn parse(text: &str) -> Result<Config, CliError> {
    let config: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

impl Config {
    pub fn grid(&self) -> Result<TransverseGrid, CliError> {
        TransverseGrid::new(self.grid.n, self.grid.extent.0).map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    pub fn source(&self, name: &str) -> Result<(ModeSpec, f64), CliError> {
        let s = self
            .sources
            .get(name)
            .ok_or_else(|| CliError::Config(format!("unknown source {name:?}")))?;
        Ok((s.spec(name)?, s.q))
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let grid = self.grid()?;
        for name in self.sources.keys() {
            self.source(name)?;
        }
        let mut names = std::collections::BTreeSet::new();
        for (i, sc) in self.scenarios.iter().enumerate() {
            let at = format!("scenarios[{i}] ({})", sc.name);
            if !names.insert(sc.name.as_str()) {
                return bad(format!("{at}: duplicate scenario name"));
            }
            if sc.name.is_empty() || sc.name.contains(['/', '\\']) {
                return bad(format!("{at}: name must be non-empty and free of path separators"));
            }
            self.source(&sc.source).map_err(|e| CliError::Config(format!("{at}.source: {e}")))?;
            sc.channel()
                .validate(&grid)
                .map_err(|e| CliError::Config(format!("{at}: {e}")))?;
        }
        for sc in &self.scenarios {
            if let Some(r) = &sc.reference {
                if !names.contains(r.as_str()) {
                    return bad(format!("scenario {}: reference {r:?} is not a scenario", sc.name));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.detection.noise_floor) {
            return bad(format!("detection.noise_floor = {} is not a probability", self.detection.noise_floor));
        }
        if !(self.run.events >= 0.0) || !self.run.events.is_finite() {
            return bad(format!("run.events = {} must be a non-negative count", self.run.events));
        }
        if !(self.run.boundary_guard > 0.0) {
            return bad(format!("run.boundary_guard = {} must be positive", self.run.boundary_guard));
        }
        if let Some(scan) = &self.scan {
            if scan.sources.is_empty() {
                return bad("scan.sources is empty".into());
            }
            for s in &scan.sources {
                self.source(s).map_err(|e| CliError::Config(format!("scan.sources: {e}")))?;
            }
            scan.obstacle
                .spec()
                .validate(&grid)
                .map_err(|e| CliError::Config(format!("scan.obstacle: {e}")))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for (name, text) in PRESETS {
            parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn units_and_defaults() {
        let c = parse(
            r#"
            schema_version = 1
            [grid]
            n = 256
            extent = "8 mm"
            [sources.bg]
            family = "bessel_gauss"
            k_r = "18 rad/mm"
            w0 = "1.253 mm"
            wavelength = "810 nm"
            [[scenarios]]
            name = "x"
            source = "bg"
            distance = "30 cm"
            obstacles = [{ radius = "600 um" }]
            "#,
        )
        .unwrap();
        assert_eq!(c.grid.extent.0, 8e-3);
        let (spec, q) = c.source("bg").unwrap();
        assert_eq!(spec.k_r(), Some(18e3));
        assert_eq!(q, 0.5);
        let ch = c.scenarios[0].channel();
        assert!((ch.length - 0.30).abs() < 1e-15);
        assert!((ch.obstacles[0].radius - 600e-6).abs() < 1e-18);
        assert_eq!(c.run.events, 1e6);
        assert!(matches!(c.detection.model(), DetectionModel::HologramCascade { .. }));
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        let err = parse("schema_version = 1\ncolour = 3\n").unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
        assert!(parse("schema_version = 2\n").is_err());
    }

    #[test]
    fn missing_wavelength_names_the_field() {
        let err = parse(
            r#"
            schema_version = 1
            [sources.bg]
            family = "bessel_gauss"
            k_r = 18000
            w0 = "1 mm"
            "#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("wavelength"), "{err}");
    }
}
