//! Job configuration: a versioned TOML document, optionally overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pseudomode::bathmodel::SpectralModel;
use pseudomode::scattering::ScatterSetup;
use pseudomode::Tolerances;

use crate::failure::Failure;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Jeff,
    Kernel,
    Fit,
    Invert,
    Tile,
    Eta,
    Transmit,
    ReproduceFig2,
    ReproduceFig3,
    ReproduceFig4,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Jeff => "jeff",
            Command::Kernel => "kernel",
            Command::Fit => "fit",
            Command::Invert => "invert",
            Command::Tile => "tile",
            Command::Eta => "eta",
            Command::Transmit => "transmit",
            Command::ReproduceFig2 => "reproduce-fig2",
            Command::ReproduceFig3 => "reproduce-fig3",
            Command::ReproduceFig4 => "reproduce-fig4",
        }
    }

    /// Library module blamed in diagnostics.
    pub fn module(self) -> &'static str {
        match self {
            Command::Jeff | Command::Kernel => "forward",
            Command::Fit | Command::ReproduceFig2 => "pronyfit",
            Command::Invert => "inversion",
            Command::Tile | Command::Eta | Command::ReproduceFig3 | Command::ReproduceFig4 => "manymode",
            Command::Transmit => "scattering",
        }
    }
}

/// Uniform grid `{min, max, count}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Grid {
    pub fn validate(&self, name: &str) -> Result<(), Failure> {
        if self.count < 2 || !(self.max > self.min) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Failure::config(format!("{name} grid needs count >= 2 and max > min")));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        pseudomode::pronyfit::linspace(self.min, self.max, self.count)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    /// Tabulated `omega,J_11,...` CSV.
    pub model_csv: Option<PathBuf>,
    /// Pseudomode bath JSON.
    pub bath: Option<PathBuf>,
    /// Exponential fit CSV as written by `fit`.
    pub fit_table: Option<PathBuf>,
    /// Scattering setup JSON.
    pub setup: Option<PathBuf>,
    /// Reference setup for `transmit` comparisons.
    pub reference: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub modes: usize,
    pub strategy: String,
    pub dense_windows: bool,
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection { modes: 6, strategy: "prony".into(), dense_windows: false }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TileSection {
    /// Registered tiling name: `lorentzian` or `squared-lorentzian`.
    pub variant: String,
    pub n: usize,
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
}

impl Default for TileSection {
    fn default() -> Self {
        TileSection { variant: "lorentzian".into(), n: 100, omega_min: None, omega_max: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EtaSection {
    pub which: u8,
    pub r: Vec<f64>,
    /// Series cutoff for the comparison column.
    pub cutoff: usize,
}

impl Default for EtaSection {
    fn default() -> Self {
        EtaSection { which: 1, r: vec![0.0], cutoff: 100_000 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvertSection {
    /// Positivity search used when the default choice gives a negative rate; `"none"` disables it.
    pub search: String,
    pub budget: usize,
}

impl Default for InvertSection {
    fn default() -> Self {
        InvertSection { search: "nelder-mead".into(), budget: 4000 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FigureSection {
    pub modes: usize,
    pub n: Option<usize>,
    pub points: usize,
}

impl Default for FigureSection {
    fn default() -> Self {
        FigureSection { modes: 6, n: None, points: 601 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub version: u32,
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub model: Option<SpectralModel>,
    pub bath: Option<pseudomode::bathmodel::PseudomodeBath>,
    pub setup: Option<ScatterSetup>,
    #[serde(default)]
    pub inputs: Inputs,
    pub omega: Option<Grid>,
    pub time: Option<Grid>,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub tile: TileSection,
    #[serde(default)]
    pub eta: EtaSection,
    #[serde(default)]
    pub invert: InvertSection,
    #[serde(default)]
    pub figure: FigureSection,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl Default for JobConfig {
    fn default() -> Self {
        JobConfig {
            version: CONFIG_VERSION,
            command: None,
            seed: None,
            threads: None,
            output: None,
            model: None,
            bath: None,
            setup: None,
            inputs: Inputs::default(),
            omega: None,
            time: None,
            fit: FitSection::default(),
            tile: TileSection::default(),
            eta: EtaSection::default(),
            invert: InvertSection::default(),
            figure: FigureSection::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl JobConfig {
    /// Parses a config file; relative input paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: JobConfig =
            toml::from_str(&text).map_err(|e| Failure::config(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.inputs.model_csv,
            &mut cfg.inputs.bath,
            &mut cfg.inputs.fit_table,
            &mut cfg.inputs.setup,
            &mut cfg.inputs.reference,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(o) = cfg.output.as_mut() {
            if o.is_relative() {
                *o = base.join(&*o);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if self.version != CONFIG_VERSION {
            return Err(Failure::config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.command.is_none() {
            return Err(Failure::config("no command given (use a subcommand or set `command`)"));
        }
        if let Some(g) = &self.omega {
            g.validate("omega")?;
        }
        if let Some(g) = &self.time {
            g.validate("time")?;
        }
        for p in [
            &self.inputs.model_csv,
            &self.inputs.bath,
            &self.inputs.fit_table,
            &self.inputs.setup,
            &self.inputs.reference,
        ]
        .into_iter()
        .flatten()
        {
            if !p.is_file() {
                return Err(Failure::config(format!("input file {} does not exist", p.display())));
            }
        }
        if self.model.is_some() && self.inputs.model_csv.is_some() {
            return Err(Failure::config("give either `model` or `inputs.model_csv`, not both"));
        }
        if self.threads == Some(0) {
            return Err(Failure::config("threads must be positive"));
        }
        Ok(())
    }
}
