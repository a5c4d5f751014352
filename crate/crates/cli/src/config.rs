//! Run configuration: a JSON document with optional fields, overridable
//! from the command line.
//!
//! Units at this boundary: detunings in kHz, times in µs, Rabi
//! frequencies in MHz (Ω/2π).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use geopulse::analysis::{MapGrid, DEFAULT_ETA_POINTS, DEFAULT_SWEEP_POINTS};
use geopulse::awg_export::{RfSpec, WaveformFormat};
use geopulse::gate_algebra::{Gate, QubitState};
use geopulse::optimizer::{OptimizeSettings, DEFAULT_GRID_POINTS};
use geopulse::presets::Preset;
use geopulse::pulse_model::{ConstraintSet, CONSTRAINT_TOLERANCE};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GateChoice {
    One(Gate),
    All,
}

impl GateChoice {
    pub fn gates(self) -> Vec<Gate> {
        match self {
            GateChoice::One(g) => vec![g],
            GateChoice::All => Gate::ALL.to_vec(),
        }
    }
}

impl Default for GateChoice {
    fn default() -> Self {
        GateChoice::One(Gate::SigmaX)
    }
}

impl FromStr for GateChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(GateChoice::All);
        }
        s.parse::<Gate>()
            .map(GateChoice::One)
            .map_err(|e| e.to_string())
    }
}

impl TryFrom<String> for GateChoice {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<GateChoice> for String {
    fn from(g: GateChoice) -> String {
        g.to_string()
    }
}

impl fmt::Display for GateChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateChoice::One(g) => write!(f, "{g}"),
            GateChoice::All => f.write_str("all"),
        }
    }
}

/// Where the eight gate-pair coefficients come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum CoeffSource {
    Preset(Preset),
    /// JSON file holding either a bare array or an object with `coeffs`
    /// (such as an optimization report). Relative paths resolve against
    /// the config file's directory.
    File(PathBuf),
    Inline(Vec<f64>),
}

impl Default for CoeffSource {
    fn default() -> Self {
        CoeffSource::Preset(Preset::Op1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub theta0: f64,
    pub phi0: f64,
}

impl Default for InitialState {
    fn default() -> Self {
        Self {
            theta0: std::f64::consts::FRAC_PI_2,
            phi0: 0.0,
        }
    }
}

impl InitialState {
    pub fn state(&self) -> QubitState {
        QubitState::from_angles(self.theta0, self.phi0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateBlock {
    pub detuning_khz: f64,
    /// RK4 steps per pulse pair; raised automatically when too coarse.
    pub steps_per_pair: usize,
}

impl Default for SimulateBlock {
    fn default() -> Self {
        Self {
            detuning_khz: 0.0,
            steps_per_pair: geopulse::dynamics::DEFAULT_STEPS_PER_PAIR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepBlock {
    pub max_khz: f64,
    pub points: usize,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            max_khz: 1000.0,
            points: 401,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatmapBlock {
    pub eta_max: f64,
    pub eta_points: usize,
    pub delta_max_khz: f64,
    pub delta_points: usize,
}

impl Default for HeatmapBlock {
    fn default() -> Self {
        let g = MapGrid::default();
        Self {
            eta_max: g.eta_max,
            eta_points: DEFAULT_ETA_POINTS,
            delta_max_khz: g.delta_max_khz,
            delta_points: DEFAULT_SWEEP_POINTS,
        }
    }
}

impl HeatmapBlock {
    pub fn grid(&self) -> MapGrid {
        MapGrid {
            eta_max: self.eta_max,
            eta_points: self.eta_points,
            delta_max_khz: self.delta_max_khz,
            delta_points: self.delta_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerBlock {
    /// Half-width of the uniform detuning grid.
    pub band_khz: f64,
    pub grid_points: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub restarts: usize,
    pub initial_step: f64,
    pub restart_spread: f64,
    pub goal_infidelity: f64,
    /// Soft cap on the gate pair's peak single-tone Rabi frequency.
    pub rabi_cap_mhz: Option<f64>,
    /// Six free coefficients a₁..a₆; defaults to the warm start for the gate.
    pub init: Option<Vec<f64>>,
}

impl Default for OptimizerBlock {
    fn default() -> Self {
        let s = OptimizeSettings::default();
        Self {
            band_khz: 410.0,
            grid_points: DEFAULT_GRID_POINTS,
            max_iterations: s.max_iterations,
            tolerance: s.tolerance,
            restarts: s.restarts,
            initial_step: s.initial_step,
            restart_spread: s.restart_spread,
            goal_infidelity: s.goal_infidelity,
            rabi_cap_mhz: None,
            init: None,
        }
    }
}

impl OptimizerBlock {
    pub fn settings(&self, seed: u64) -> OptimizeSettings {
        OptimizeSettings {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            restarts: self.restarts,
            seed,
            initial_step: self.initial_step,
            restart_spread: self.restart_spread,
            goal_infidelity: self.goal_infidelity,
        }
    }
}

/// Hardware constants have no defaults; the block is required for
/// `export-awg`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportBlock {
    pub f1_mhz: f64,
    pub f0_mhz: f64,
    pub qubit_splitting_mhz: f64,
    pub conversion: f64,
    /// Samples per µs.
    pub sample_rate: f64,
    #[serde(default = "default_format")]
    pub format: WaveformFormat,
    /// Write the two tones as separate channels instead of their sum.
    #[serde(default)]
    pub split: bool,
}

fn default_format() -> WaveformFormat {
    WaveformFormat::Csv
}

impl ExportBlock {
    pub fn rf_spec(&self) -> RfSpec {
        RfSpec {
            f1_mhz: self.f1_mhz,
            f0_mhz: self.f0_mhz,
            qubit_splitting_mhz: self.qubit_splitting_mhz,
            conversion: self.conversion,
            sample_rate: self.sample_rate,
        }
    }
}

fn default_t1() -> f64 {
    geopulse::presets::PRESET_T1_US
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub gate: GateChoice,
    #[serde(default)]
    pub coefficients: CoeffSource,
    #[serde(default = "default_t1")]
    pub t1_us: f64,
    /// Defaults to 2·t1.
    #[serde(default)]
    pub t2_us: Option<f64>,
    #[serde(default)]
    pub initial: InitialState,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub simulate: SimulateBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub compare: SweepBlock,
    #[serde(default)]
    pub heatmap: HeatmapBlock,
    #[serde(default)]
    pub optimizer: OptimizerBlock,
    #[serde(default)]
    pub export: Option<ExportBlock>,
    /// Directory that relative coefficient files resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

impl RunConfig {
    /// Parses a config document; `origin` names it in diagnostics.
    pub fn from_json(text: &str, origin: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            let full = e.to_string();
            let suffix = format!(" at line {} column {}", e.line(), e.column());
            CliError::Config {
                origin: origin.to_string(),
                line: e.line(),
                column: e.column(),
                message: full.strip_suffix(&suffix).unwrap_or(&full).to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text, &path.display().to_string())?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn t2(&self) -> f64 {
        self.t2_us.unwrap_or(2.0 * self.t1_us)
    }

    /// Label used in CSV series names and reports.
    pub fn coeff_label(&self) -> String {
        match &self.coefficients {
            CoeffSource::Preset(p) => p.name().to_string(),
            CoeffSource::File(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "file".into()),
            CoeffSource::Inline(_) => "inline".into(),
        }
    }

    pub fn coeffs(&self) -> Result<Vec<f64>, CliError> {
        match &self.coefficients {
            CoeffSource::Preset(p) => Ok(p.coeffs().to_vec()),
            CoeffSource::Inline(c) => Ok(c.clone()),
            CoeffSource::File(p) => {
                let path = match &self.base_dir {
                    Some(base) if p.is_relative() => base.join(p),
                    _ => p.clone(),
                };
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    CliError::Invalid(format!("coefficient file {}: {e}", path.display()))
                })?;
                #[derive(Deserialize)]
                #[serde(untagged)]
                enum CoeffFile {
                    Bare(Vec<f64>),
                    Report { coeffs: Vec<f64> },
                }
                match serde_json::from_str::<CoeffFile>(&text) {
                    Ok(CoeffFile::Bare(c)) | Ok(CoeffFile::Report { coeffs: c }) => Ok(c),
                    Err(e) => Err(CliError::Config {
                        origin: path.display().to_string(),
                        line: e.line(),
                        column: e.column(),
                        message: "expected an array of coefficients or an object with `coeffs`"
                            .into(),
                    }),
                }
            }
        }
    }

    /// Range and consistency checks that the schema alone cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Invalid(m));
        if !(self.t1_us.is_finite() && self.t1_us > 0.0) {
            return bad(format!("t1_us must be positive, got {}", self.t1_us));
        }
        if !(self.t2().is_finite() && self.t2() > self.t1_us) {
            return bad(format!(
                "t2_us = {} must exceed t1_us = {}",
                self.t2(),
                self.t1_us
            ));
        }
        for (name, n) in [
            ("sweep.points", self.sweep.points),
            ("compare.points", self.compare.points),
            ("heatmap.eta_points", self.heatmap.eta_points),
            ("heatmap.delta_points", self.heatmap.delta_points),
            ("optimizer.grid_points", self.optimizer.grid_points),
        ] {
            if n < 3 || n.is_multiple_of(2) {
                return bad(format!("{name} must be odd and at least 3, got {n}"));
            }
        }
        if self.simulate.steps_per_pair == 0 {
            return bad("simulate.steps_per_pair must be at least 1".into());
        }
        if let Some(init) = &self.optimizer.init {
            if init.len() != 6 {
                return bad(format!(
                    "optimizer.init needs 6 free coefficients, got {}",
                    init.len()
                ));
            }
        }
        let coeffs = self.coeffs()?;
        ConstraintSet::gate_pair()
            .check(&coeffs, CONSTRAINT_TOLERANCE)
            .map_err(|e| {
                CliError::Invalid(format!("coefficients ({}): {e}", self.coeff_label()))
            })?;
        Ok(())
    }
}
