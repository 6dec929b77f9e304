//! Study configuration read from TOML.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::convergence::LimitPair;
use crate::eikonal::InitialPhase;
use crate::field::{GridSpec, InitialAmplitude};
use crate::{Error, Result};

/// Named initial data with default phase, amplitude and horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    PolarizedBaseline,
    TwoMode,
    Tilted,
    FocusingPhase,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::PolarizedBaseline, Scenario::TwoMode, Scenario::Tilted, Scenario::FocusingPhase];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::PolarizedBaseline => "polarized_baseline",
            Scenario::TwoMode => "two_mode",
            Scenario::Tilted => "tilted",
            Scenario::FocusingPhase => "focusing_phase",
        }
    }

    pub fn phase(&self) -> InitialPhase {
        match self {
            Scenario::Tilted => InitialPhase::Linear { b: vec![0.5] },
            Scenario::FocusingPhase => InitialPhase::Quadratic { c: -0.5 },
            _ => InitialPhase::Zero,
        }
    }

    pub fn amplitude(&self) -> InitialAmplitude {
        match self {
            Scenario::TwoMode => InitialAmplitude::TwoMode { width: 1.0, w0: 1.0, w2: 0.5 },
            _ => InitialAmplitude::polarized_gaussian(),
        }
    }

    pub fn t_final(&self) -> f64 {
        match self {
            Scenario::FocusingPhase => 0.3,
            _ => 0.5,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown scenario `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
            OutputFormat::Svg => "svg",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "svg" => Ok(OutputFormat::Svg),
            _ => Err(Error::InvalidParams(format!("unknown format `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// ε values for the ε-sweeps, largest first.
    pub eps: Vec<f64>,
    /// α values for the α-sweeps, largest first.
    pub alpha: Vec<f64>,
    /// α held fixed while ε varies.
    pub fixed_alpha: f64,
    /// ε held fixed while α varies.
    pub fixed_eps: f64,
    pub t_final: f64,
    /// Fraction of the step cap actually used.
    pub dt_safety: f64,
    /// Number of record intervals on `[0, t_final]`.
    pub num_records: usize,
    pub jacobian_floor: f64,
    /// Working regularity `m`; errors are measured in `B^{m-2}`.
    pub regularity: u32,
    /// Rerun the smallest cell of each pair on a refined grid.
    pub guard: bool,
    pub pairs: Vec<LimitPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<OutputFormat>,
    /// Record wall-clock seconds per cell; off gives byte-identical reruns.
    pub timing: bool,
}

/// Fully resolved study configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub scenario: Scenario,
    pub grid: GridSpec,
    pub phase: InitialPhase,
    pub amplitude: InitialAmplitude,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dim_n: Option<usize>,
    dim_d: Option<usize>,
    nx: Option<usize>,
    half_width: Option<f64>,
    num_modes: Option<usize>,
    num_quad: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    eps: Option<Vec<f64>>,
    alpha: Option<Vec<f64>>,
    fixed_alpha: Option<f64>,
    fixed_eps: Option<f64>,
    t_final: Option<f64>,
    dt_safety: Option<f64>,
    num_records: Option<usize>,
    jacobian_floor: Option<f64>,
    regularity: Option<u32>,
    guard: Option<bool>,
    pairs: Option<Vec<LimitPair>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    formats: Option<Vec<OutputFormat>>,
    timing: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<Scenario>,
    grid: Option<RawGrid>,
    phase: Option<InitialPhase>,
    amplitude: Option<InitialAmplitude>,
    sweep: Option<RawSweep>,
    output: Option<RawOutput>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig::for_scenario(Scenario::PolarizedBaseline)
    }
}

fn invalid(key: &str, msg: impl Into<String>) -> Error {
    Error::Validation { key: key.to_string(), msg: msg.into() }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

impl StudyConfig {
    pub fn for_scenario(scenario: Scenario) -> Self {
        StudyConfig {
            scenario,
            grid: GridSpec::default(),
            phase: scenario.phase(),
            amplitude: scenario.amplitude(),
            sweep: SweepConfig {
                eps: vec![0.5, 0.4, 0.3, 0.22],
                alpha: vec![0.4, 0.28, 0.2, 0.14],
                fixed_alpha: 0.2,
                fixed_eps: 0.35,
                t_final: scenario.t_final(),
                dt_safety: 0.9,
                num_records: 40,
                jacobian_floor: crate::eikonal::DEFAULT_JACOBIAN_FLOOR,
                regularity: 4,
                guard: true,
                pairs: LimitPair::STUDY.to_vec(),
            },
            output: OutputConfig {
                dir: PathBuf::from("out"),
                formats: vec![OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg],
                timing: true,
            },
        }
    }

    /// Parses and validates; missing keys take the scenario defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            msg: e.message().to_string(),
        })?;
        let mut cfg = StudyConfig::for_scenario(raw.scenario.unwrap_or(Scenario::PolarizedBaseline));
        if let Some(g) = raw.grid {
            let d = &mut cfg.grid;
            d.dim_n = g.dim_n.unwrap_or(d.dim_n);
            d.dim_d = g.dim_d.unwrap_or(d.dim_d);
            d.nx = g.nx.unwrap_or(d.nx);
            d.half_width = g.half_width.unwrap_or(d.half_width);
            d.num_modes = g.num_modes.unwrap_or(d.num_modes);
            d.num_quad = g.num_quad.unwrap_or(d.num_quad);
        }
        if let Some(p) = raw.phase {
            cfg.phase = p;
        }
        if let Some(a) = raw.amplitude {
            cfg.amplitude = a;
        }
        if let Some(s) = raw.sweep {
            let d = &mut cfg.sweep;
            d.eps = s.eps.unwrap_or(std::mem::take(&mut d.eps));
            d.alpha = s.alpha.unwrap_or(std::mem::take(&mut d.alpha));
            d.fixed_alpha = s.fixed_alpha.unwrap_or(d.fixed_alpha);
            d.fixed_eps = s.fixed_eps.unwrap_or(d.fixed_eps);
            d.t_final = s.t_final.unwrap_or(d.t_final);
            d.dt_safety = s.dt_safety.unwrap_or(d.dt_safety);
            d.num_records = s.num_records.unwrap_or(d.num_records);
            d.jacobian_floor = s.jacobian_floor.unwrap_or(d.jacobian_floor);
            d.regularity = s.regularity.unwrap_or(d.regularity);
            d.guard = s.guard.unwrap_or(d.guard);
            d.pairs = s.pairs.unwrap_or(std::mem::take(&mut d.pairs));
        }
        if let Some(o) = raw.output {
            let d = &mut cfg.output;
            d.dir = o.dir.unwrap_or(std::mem::take(&mut d.dir));
            d.formats = o.formats.unwrap_or(std::mem::take(&mut d.formats));
            d.timing = o.timing.unwrap_or(d.timing);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        StudyConfig::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Every key written out, so that parsing the result gives the same config.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidParams(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !(1..=2).contains(&g.dim_n) {
            return Err(invalid("grid.dim_n", format!("{} not in {{1, 2}}", g.dim_n)));
        }
        if !(1..=2).contains(&g.dim_d) || g.dim_n + g.dim_d > 3 {
            return Err(invalid("grid.dim_d", format!("{} with n = {} exceeds n + d <= 3", g.dim_d, g.dim_n)));
        }
        if g.nx < 16 || !g.nx.is_power_of_two() {
            return Err(invalid("grid.nx", format!("{} must be a power of two >= 16", g.nx)));
        }
        if !(g.half_width > 0.0 && g.half_width.is_finite()) {
            return Err(invalid("grid.half_width", format!("{} must be positive", g.half_width)));
        }
        if g.num_modes == 0 {
            return Err(invalid("grid.num_modes", "must be positive"));
        }
        if g.num_quad < 2 * g.num_modes + 1 {
            return Err(invalid("grid.num_quad", format!("{} < 2 num_modes + 1 = {}", g.num_quad, 2 * g.num_modes + 1)));
        }
        self.phase.validate(g.dim_n).map_err(|e| invalid("phase", e.to_string()))?;
        match &self.amplitude {
            InitialAmplitude::PolarizedGaussian { width, .. } | InitialAmplitude::TwoMode { width, .. } if !(*width > 0.0) => {
                return Err(invalid("amplitude.width", format!("{width} must be positive")));
            }
            InitialAmplitude::TwoMode { w0, w2, .. } if *w0 == 0.0 && *w2 == 0.0 => {
                return Err(invalid("amplitude.w0", "w0 and w2 are both zero"));
            }
            InitialAmplitude::TwoMode { .. } if g.num_modes < 3 => {
                return Err(invalid("grid.num_modes", "two_mode needs at least 3 modes"));
            }
            InitialAmplitude::Custom { data } if data.len() != g.ncols() * g.ncoef() => {
                return Err(invalid("amplitude.data", format!("{} values, grid needs {}", data.len(), g.ncols() * g.ncoef())));
            }
            _ => {}
        }
        let s = &self.sweep;
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if s.eps.is_empty() || !s.eps.iter().all(|&v| unit(v)) {
            return Err(invalid("sweep.eps", "needs at least one value in (0, 1]"));
        }
        if s.alpha.is_empty() || !s.alpha.iter().all(|&v| unit(v)) {
            return Err(invalid("sweep.alpha", "needs at least one value in (0, 1]"));
        }
        if !unit(s.fixed_alpha) {
            return Err(invalid("sweep.fixed_alpha", format!("{} not in (0, 1]", s.fixed_alpha)));
        }
        if !unit(s.fixed_eps) {
            return Err(invalid("sweep.fixed_eps", format!("{} not in (0, 1]", s.fixed_eps)));
        }
        if !(s.t_final > 0.0 && s.t_final.is_finite()) {
            return Err(invalid("sweep.t_final", format!("{} must be positive", s.t_final)));
        }
        if !unit(s.dt_safety) {
            return Err(invalid("sweep.dt_safety", format!("{} not in (0, 1]", s.dt_safety)));
        }
        if s.num_records == 0 {
            return Err(invalid("sweep.num_records", "must be at least 1"));
        }
        if !(s.jacobian_floor > 0.0 && s.jacobian_floor < 1.0) {
            return Err(invalid("sweep.jacobian_floor", format!("{} not in (0, 1)", s.jacobian_floor)));
        }
        if s.regularity < 2 {
            return Err(invalid("sweep.regularity", format!("{} must be at least 2", s.regularity)));
        }
        if s.pairs.is_empty() {
            return Err(invalid("sweep.pairs", "must name at least one pair"));
        }
        if self.output.formats.is_empty() {
            return Err(invalid("output.formats", "must name at least one format"));
        }
        Ok(())
    }

    /// Restricts every ε-sweep to `eps` and fixes ε for the α-sweeps.
    pub fn with_eps(mut self, eps: f64) -> Self {
        self.sweep.eps = vec![eps];
        self.sweep.fixed_eps = eps;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.sweep.alpha = vec![alpha];
        self.sweep.fixed_alpha = alpha;
        self
    }
}
