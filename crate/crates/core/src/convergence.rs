//! Parameter sweeps, error curves, log-log rate fits and report output.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{OutputFormat, StudyConfig};
use crate::dynamics::{
    dt_cap, from_envelope, gpe_to_envelope, max_grad_over_run, solve_envelope, solve_gpe, Equation, SolverParams, Trajectory,
    CAUSTIC_MARGIN,
};
use crate::eikonal::{EikonalPhase, PhaseProvider};
use crate::field::{bm_error, sample_initial, GridSpec};
use crate::transverse::HermiteBasis;
use crate::{Error, Result};

/// Two models whose distance is measured along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LimitPair {
    /// `env_full` vs `env_averaged`, ε swept at fixed α.
    #[serde(rename = "eq17")]
    Averaging,
    /// `env_oscillatory` vs `env_limit`, ε swept at α = 0.
    #[serde(rename = "eq18")]
    AveragingNoDispersion,
    /// `env_full` vs `env_oscillatory`, α swept at fixed ε.
    #[serde(rename = "eq19")]
    Semiclassical,
    /// `env_averaged` vs `env_limit`, α swept.
    #[serde(rename = "eq20")]
    SemiclassicalAveraged,
    /// `env_full` vs `env_limit` along α = ε².
    #[serde(rename = "eq21")]
    Global,
    /// Two independent `env_limit` solves; the error must vanish.
    #[serde(rename = "debug")]
    Identity,
}

impl LimitPair {
    pub const STUDY: [LimitPair; 5] = [
        LimitPair::Averaging,
        LimitPair::AveragingNoDispersion,
        LimitPair::Semiclassical,
        LimitPair::SemiclassicalAveraged,
        LimitPair::Global,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            LimitPair::Averaging => "eq17",
            LimitPair::AveragingNoDispersion => "eq18",
            LimitPair::Semiclassical => "eq19",
            LimitPair::SemiclassicalAveraged => "eq20",
            LimitPair::Global => "eq21",
            LimitPair::Identity => "debug",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        LimitPair::STUDY
            .into_iter()
            .chain([LimitPair::Identity])
            .find(|p| p.tag() == tag)
            .ok_or_else(|| Error::InvalidParams(format!("unknown pair `{tag}`")))
    }

    /// True when ε is the swept parameter.
    pub fn sweeps_eps(&self) -> bool {
        !matches!(self, LimitPair::Semiclassical | LimitPair::SemiclassicalAveraged)
    }

    /// Expected exponent of the error in the swept parameter.
    pub fn nominal_rate(&self) -> f64 {
        match self {
            LimitPair::Semiclassical | LimitPair::SemiclassicalAveraged => 1.0,
            _ => 2.0,
        }
    }

    pub fn models(&self) -> (Equation, Equation) {
        match self {
            LimitPair::Averaging => (Equation::EnvFull, Equation::EnvAveraged),
            LimitPair::AveragingNoDispersion => (Equation::EnvOscillatory, Equation::EnvLimit),
            LimitPair::Semiclassical => (Equation::EnvFull, Equation::EnvOscillatory),
            LimitPair::SemiclassicalAveraged => (Equation::EnvAveraged, Equation::EnvLimit),
            LimitPair::Global => (Equation::EnvFull, Equation::EnvLimit),
            LimitPair::Identity => (Equation::EnvLimit, Equation::EnvLimit),
        }
    }

    /// Swept values taken from the config.
    pub fn sweep<'a>(&self, cfg: &'a StudyConfig) -> &'a [f64] {
        if self.sweeps_eps() {
            &cfg.sweep.eps
        } else {
            &cfg.sweep.alpha
        }
    }

    /// `(ε, α)` of the cell at sweep value `x`; 0 marks a parameter absent from both models.
    pub fn cell(&self, x: f64, cfg: &StudyConfig) -> (f64, f64) {
        match self {
            LimitPair::Averaging => (x, cfg.sweep.fixed_alpha),
            LimitPair::AveragingNoDispersion | LimitPair::Identity => (x, 0.0),
            LimitPair::Semiclassical => (cfg.sweep.fixed_eps, x),
            LimitPair::SemiclassicalAveraged => (0.0, x),
            LimitPair::Global => (x, x * x),
        }
    }

    fn runs(&self, eps: f64, alpha: f64, refined: bool) -> (RunKey, RunKey) {
        let (a, b) = self.models();
        let replica = u8::from(*self == LimitPair::Identity);
        (RunKey::new(a, eps, alpha, 0, refined), RunKey::new(b, eps, alpha, replica, refined))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct RunKey {
    equation: Equation,
    eps_bits: u64,
    alpha_bits: u64,
    replica: u8,
    refined: bool,
}

impl RunKey {
    fn new(equation: Equation, eps: f64, alpha: f64, replica: u8, refined: bool) -> Self {
        let eps = if equation.is_oscillatory() { eps } else { 0.0 };
        let alpha = if equation.is_dispersive() { alpha } else { 0.0 };
        RunKey { equation, eps_bits: eps.to_bits(), alpha_bits: alpha.to_bits(), replica, refined }
    }

    fn eps(&self) -> f64 {
        f64::from_bits(self.eps_bits)
    }

    fn alpha(&self) -> f64 {
        f64::from_bits(self.alpha_bits)
    }
}

struct RunOutput {
    traj: Trajectory,
    seconds: f64,
}

type RunResult = std::result::Result<RunOutput, Arc<Error>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub pair: LimitPair,
    pub eps: f64,
    pub alpha: f64,
    /// Max over records of the `B^{m-2}` distance.
    pub error: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slope {
    pub value: f64,
    pub stderr: f64,
}

/// Rerun of a cell with `nx` doubled and `dt` at most halved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardResult {
    pub pair: LimitPair,
    pub eps: f64,
    pub alpha: f64,
    pub error: f64,
    pub refined_error: f64,
    pub relative_change: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub cell: String,
    pub message: String,
    pub numerical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub scenario: String,
    pub grid: GridSpec,
    pub regularity: u32,
    pub epsilon_list: Vec<f64>,
    pub alpha_list: Vec<f64>,
    pub cells: Vec<CellResult>,
    pub slopes: BTreeMap<LimitPair, Slope>,
    pub guards: Vec<GuardResult>,
    pub failures: Vec<CellFailure>,
    /// Pairs reported without a slope, with the reason.
    pub warnings: Vec<String>,
    pub complete: bool,
}

/// Relative change above which a guard fails.
pub const GUARD_TOLERANCE: f64 = 0.1;

/// Ordinary least squares of `ln y` on `ln x`; returns the slope and its standard error.
pub fn fit_rate(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { expected: xs.len(), got: ys.len() });
    }
    if xs.len() < 3 {
        return Err(Error::TooFewPoints { need: 3, got: xs.len() });
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::NonPositive(format!("log-log fit needs positive data, got {v}")));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParams("log-log fit needs distinct x values".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok((slope, (rss / (n - 2.0) / sxx).sqrt()))
}

struct Study<'a> {
    cfg: &'a StudyConfig,
    basis: HermiteBasis,
}

impl<'a> Study<'a> {
    fn new(cfg: &'a StudyConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Study { cfg, basis: cfg.grid.build_basis()? })
    }

    /// Number of steps per record interval for `key` on `grid`.
    fn substeps(&self, key: &RunKey, grid: &GridSpec, max_grad: f64) -> usize {
        let s = &self.cfg.sweep;
        let params = SolverParams::new(key.equation, key.eps(), key.alpha(), s.t_final, 1.0);
        let tau = s.t_final / s.num_records as f64;
        let cap = dt_cap(&params, grid, max_grad) * s.dt_safety;
        ((tau / cap) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    fn run(&self, key: &RunKey) -> Result<RunOutput> {
        let start = Instant::now();
        let s = &self.cfg.sweep;
        let base = self.cfg.grid;
        let grid = if key.refined { base.refined() } else { base };
        let mut phase = EikonalPhase::new(grid, self.cfg.phase.clone(), s.jacobian_floor)?;
        let tc = phase.caustic_time();
        if s.t_final >= tc - CAUSTIC_MARGIN {
            return Err(Error::CausticReached { t: tc });
        }
        let g = max_grad_over_run(&mut phase, 0.0, s.t_final)?;
        let mut k = self.substeps(key, &grid, g);
        if key.refined {
            k = k.max(2 * self.substeps(key, &base, g));
        }
        let dt = s.t_final / (s.num_records * k) as f64;
        let params = SolverParams::new(key.equation, key.eps(), key.alpha(), s.t_final, dt).with_record_every(k);
        let a0 = sample_initial(&self.cfg.amplitude, &grid, &self.basis)?;
        let traj = if key.equation == Equation::GpeFull {
            let p0 = phase.phase_at(0.0)?;
            let psi0 = from_envelope(&a0, 0.0, &p0, key.eps(), key.alpha(), &self.basis)?;
            solve_gpe(&psi0, &params, &self.basis)?
        } else {
            solve_envelope(&a0, &params, &mut phase, &self.basis)?
        };
        let seconds = if self.cfg.output.timing { start.elapsed().as_secs_f64() } else { 0.0 };
        Ok(RunOutput { traj, seconds })
    }

    fn run_all(&self, keys: BTreeSet<RunKey>) -> Result<BTreeMap<RunKey, RunResult>> {
        let keys: Vec<RunKey> = keys.into_iter().collect();
        let exec = || keys.par_iter().map(|k| (*k, self.run(k).map_err(Arc::new))).collect::<Vec<_>>();
        let results = match worker_threads() {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?
                .install(exec),
            None => exec(),
        };
        Ok(results.into_iter().collect())
    }

    fn distance(&self, a: &RunOutput, b: &RunOutput) -> Result<f64> {
        let m = self.cfg.sweep.regularity - 2;
        if a.traj.snapshots.len() != b.traj.snapshots.len() {
            return Err(Error::LengthMismatch { expected: a.traj.snapshots.len(), got: b.traj.snapshots.len() });
        }
        let mut worst = 0.0f64;
        for (fa, fb) in a.traj.snapshots.iter().zip(&b.traj.snapshots) {
            worst = worst.max(bm_error(fa, fb, m, &self.basis)?);
        }
        Ok(worst)
    }

    fn cell_error(&self, runs: &BTreeMap<RunKey, RunResult>, pair: LimitPair, eps: f64, alpha: f64, refined: bool) -> Result<(f64, f64)> {
        let (ka, kb) = pair.runs(eps, alpha, refined);
        let label = cell_label(pair, eps, alpha, refined);
        let tag = |e: Arc<Error>| Error::Cell { cell: label.clone(), source: e };
        let a = runs[&ka].as_ref().map_err(|e| tag(e.clone()))?;
        let b = runs[&kb].as_ref().map_err(|e| tag(e.clone()))?;
        let err = self.distance(a, b).map_err(|e| tag(Arc::new(e)))?;
        Ok((err, a.seconds + b.seconds))
    }
}

fn cell_label(pair: LimitPair, eps: f64, alpha: f64, refined: bool) -> String {
    let r = if refined { " refined" } else { "" };
    format!("{} eps={eps} alpha={alpha}{r}", pair.tag())
}

/// Worker count from `CONDRED_THREADS`, if set to a positive integer.
pub fn worker_threads() -> Option<usize> {
    std::env::var("CONDRED_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

fn smallest_index(values: &[f64]) -> usize {
    (0..values.len()).fold(0, |best, i| if values[i] < values[best] { i } else { best })
}

/// Runs every cell of the configured pairs, the refinement guards and the rate fits.
pub fn run_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    let study = Study::new(cfg)?;
    let pairs = &cfg.sweep.pairs;
    let mut keys = BTreeSet::new();
    for p in pairs {
        for &x in p.sweep(cfg) {
            let (eps, alpha) = p.cell(x, cfg);
            let (a, b) = p.runs(eps, alpha, false);
            keys.extend([a, b]);
        }
        if cfg.sweep.guard && *p != LimitPair::Identity {
            let xs = p.sweep(cfg);
            let (eps, alpha) = p.cell(xs[smallest_index(xs)], cfg);
            let (a, b) = p.runs(eps, alpha, true);
            keys.extend([a, b]);
        }
    }
    let runs = study.run_all(keys)?;

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    let mut warnings = Vec::new();
    let mut slopes = BTreeMap::new();
    let mut guards = Vec::new();
    let mut complete = true;
    for &p in pairs {
        let xs = p.sweep(cfg);
        let mut fit_x = Vec::new();
        let mut fit_y = Vec::new();
        let mut base_errors = vec![None; xs.len()];
        for (i, &x) in xs.iter().enumerate() {
            let (eps, alpha) = p.cell(x, cfg);
            match study.cell_error(&runs, p, eps, alpha, false) {
                Ok((error, seconds)) => {
                    cells.push(CellResult { pair: p, eps, alpha, error, seconds });
                    fit_x.push(x);
                    fit_y.push(error);
                    base_errors[i] = Some(error);
                }
                Err(e) => {
                    complete = false;
                    failures.push(failure(&e));
                }
            }
        }
        if fit_x.len() < 3 {
            warnings.push(format!("{}: {} sweep point(s), no slope fitted", p.tag(), fit_x.len()));
        } else {
            match fit_rate(&fit_x, &fit_y) {
                Ok((value, stderr)) => {
                    slopes.insert(p, Slope { value, stderr });
                }
                Err(e) => warnings.push(format!("{}: no slope fitted: {e}", p.tag())),
            }
        }
        if cfg.sweep.guard && p != LimitPair::Identity {
            let i = smallest_index(xs);
            let (eps, alpha) = p.cell(xs[i], cfg);
            if let Some(error) = base_errors[i] {
                match study.cell_error(&runs, p, eps, alpha, true) {
                    Ok((refined_error, _)) => {
                        let relative_change = (refined_error - error).abs() / error;
                        let passed = relative_change < GUARD_TOLERANCE;
                        guards.push(GuardResult { pair: p, eps, alpha, error, refined_error, relative_change, passed });
                    }
                    Err(e) => {
                        complete = false;
                        failures.push(failure(&e));
                    }
                }
            }
        }
    }
    Ok(ConvergenceReport {
        scenario: cfg.scenario.name().to_string(),
        grid: cfg.grid,
        regularity: cfg.sweep.regularity,
        epsilon_list: cfg.sweep.eps.clone(),
        alpha_list: cfg.sweep.alpha.clone(),
        cells,
        slopes,
        guards,
        failures,
        warnings,
        complete,
    })
}

fn failure(e: &Error) -> CellFailure {
    let cell = match e {
        Error::Cell { cell, .. } => cell.clone(),
        _ => String::new(),
    };
    let message = match e {
        Error::Cell { source, .. } => source.to_string(),
        _ => e.to_string(),
    };
    CellFailure { cell, message, numerical: e.is_numerical() }
}

/// All five models run at one `(ε, α)` on the study's record times.
#[derive(Debug, Clone)]
pub struct CellSolution {
    pub eps: f64,
    pub alpha: f64,
    /// In [`Equation::ALL`] order; the `gpe_full` entry holds `Ψ`, the others `A`.
    pub runs: Vec<Trajectory>,
    /// `gpe_full` mapped to the envelope unknown.
    pub gpe_envelope: Trajectory,
    /// Max over records of `‖A_gpe - A_env_full‖_{B^2} / ‖A_env_full‖_{B^2}`.
    pub gpe_gap: f64,
}

/// Runs `gpe_full` and the four envelope models at one cell.
pub fn solve_cell(cfg: &StudyConfig, eps: f64, alpha: f64) -> Result<CellSolution> {
    let study = Study::new(cfg)?;
    let keys: Vec<RunKey> = Equation::ALL.iter().map(|&e| RunKey::new(e, eps, alpha, 0, false)).collect();
    let mut runs = study.run_all(keys.iter().copied().collect())?;
    let mut out = Vec::with_capacity(keys.len());
    for k in &keys {
        let r = runs.remove(k).expect("every key was run");
        let r = r.map_err(|e| Error::Cell { cell: format!("{} eps={eps} alpha={alpha}", k.equation), source: e })?;
        out.push(r.traj);
    }
    let gpe = &out[0];
    let mut phase = EikonalPhase::new(cfg.grid, cfg.phase.clone(), cfg.sweep.jacobian_floor)?;
    let gpe_envelope = gpe_to_envelope(gpe, &mut phase, eps, alpha, &study.basis)?;
    let full = out.iter().find(|t| t.equation == Equation::EnvFull).expect("env_full is in the list");
    let mut gpe_gap = 0.0f64;
    for (a, b) in gpe_envelope.snapshots.iter().zip(&full.snapshots) {
        gpe_gap = gpe_gap.max(bm_error(a, b, 2, &study.basis)? / crate::field::bm_norm(b, 2, &study.basis)?);
    }
    Ok(CellSolution { eps, alpha, runs: out, gpe_envelope, gpe_gap })
}

/// Errors of one pair over `sweep`, with the other parameter held at `fixed`
/// (ignored by pairs without a fixed partner).
///
/// The first failing cell is returned as [`Error::Cell`].
pub fn error_curve(pair: LimitPair, fixed: f64, sweep: &[f64], cfg: &StudyConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut cfg = cfg.clone();
    if pair.sweeps_eps() {
        cfg.sweep.eps = sweep.to_vec();
    } else {
        cfg.sweep.alpha = sweep.to_vec();
    }
    match pair {
        LimitPair::Averaging => cfg.sweep.fixed_alpha = fixed,
        LimitPair::Semiclassical => cfg.sweep.fixed_eps = fixed,
        _ => {}
    }
    cfg.sweep.pairs = vec![pair];
    let study = Study::new(&cfg)?;
    let mut keys = BTreeSet::new();
    for &x in sweep {
        let (eps, alpha) = pair.cell(x, &cfg);
        let (a, b) = pair.runs(eps, alpha, false);
        keys.extend([a, b]);
    }
    let runs = study.run_all(keys)?;
    let mut errors = Vec::with_capacity(sweep.len());
    for &x in sweep {
        let (eps, alpha) = pair.cell(x, &cfg);
        errors.push(study.cell_error(&runs, pair, eps, alpha, false)?.0);
    }
    Ok((sweep.to_vec(), errors))
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pair,eps,alpha,error_bm2,seconds\n");
        for c in &self.cells {
            let _ = writeln!(out, "{},{},{},{},{}", c.pair.tag(), c.eps, c.alpha, c.error, c.seconds);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ConvergenceReport::from_json(&std::fs::read_to_string(path)?)
    }

    /// Cells of one pair in sweep order, as `(swept value, error)`.
    pub fn curve(&self, pair: LimitPair) -> Vec<(f64, f64)> {
        self.cells
            .iter()
            .filter(|c| c.pair == pair)
            .map(|c| (if pair.sweeps_eps() { c.eps } else { c.alpha }, c.error))
            .collect()
    }

    pub fn to_svg(&self) -> String {
        render_svg(self)
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Csv => Ok(self.to_csv()),
            OutputFormat::Json => self.to_json(),
            OutputFormat::Svg => Ok(self.to_svg()),
        }
    }
}

/// Writes the report in one format to `path`.
pub fn emit(report: &ConvergenceReport, format: OutputFormat, path: &Path) -> Result<()> {
    std::fs::write(path, report.render(format)?)?;
    Ok(())
}

/// Writes `<stem>.<ext>` in `dir` for every format and returns the paths.
pub fn emit_all(report: &ConvergenceReport, formats: &[OutputFormat], dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for f in formats {
        let path = dir.join(format!("{stem}.{}", f.extension()));
        emit(report, *f, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f"];

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

const LEFT: f64 = 90.0;
const RIGHT: f64 = 640.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 540.0;

impl Axes {
    fn px(&self, lx: f64) -> f64 {
        LEFT + (lx - self.x0) / (self.x1 - self.x0) * (RIGHT - LEFT)
    }

    fn py(&self, ly: f64) -> f64 {
        BOTTOM - (ly - self.y0) / (self.y1 - self.y0) * (BOTTOM - TOP)
    }
}

fn render_svg(report: &ConvergenceReport) -> String {
    let mut pairs: Vec<LimitPair> = report.cells.iter().map(|c| c.pair).collect();
    pairs.dedup();
    let pts: Vec<(f64, f64)> = report
        .cells
        .iter()
        .filter(|c| c.error > 0.0)
        .map(|c| {
            let x = if c.pair.sweeps_eps() { c.eps } else { c.alpha };
            (x.log10(), c.error.log10())
        })
        .collect();
    let (mut ax, mut bx, mut ay, mut by) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &pts {
        ax = ax.min(*x);
        bx = bx.max(*x);
        ay = ay.min(*y);
        by = by.max(*y);
    }
    if pts.is_empty() {
        (ax, bx, ay, by) = (-1.0, 0.0, -6.0, 0.0);
    }
    let axes = Axes { x0: ax - 0.05, x1: bx.max(ax + 0.1) + 0.05, y0: ay - 0.2, y1: by.max(ay + 0.5) + 0.2 };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="600" viewBox="0 0 800 600" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<defs><clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{}" height="{}"/></clipPath></defs>"#, RIGHT - LEFT, BOTTOM - TOP);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="800" height="600" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{} (B^{} error, log10 axes)</text>"#, (LEFT + RIGHT) / 2.0, report.scenario, report.regularity.saturating_sub(2));
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#, RIGHT - LEFT, BOTTOM - TOP);

    let tick = |lo: f64, hi: f64| -> Vec<f64> {
        let step = if hi - lo > 3.0 { 1.0 } else if hi - lo > 0.6 { 0.5 } else { 0.1 };
        let mut v = Vec::new();
        let mut t = (lo / step).ceil() * step;
        while t <= hi + 1e-9 {
            v.push(t);
            t += step;
        }
        v
    };
    for t in tick(axes.x0, axes.x1) {
        let x = axes.px(t);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{BOTTOM}" x2="{x:.2}" y2="{}" stroke="black"/>"#, BOTTOM + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{:.3}</text>"#, BOTTOM + 20.0, 10f64.powf(t));
    }
    for t in tick(axes.y0, axes.y1) {
        let y = axes.py(t);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{t:.1}</text>"#, LEFT - 8.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">swept parameter (eps or alpha)</text>"#, (LEFT + RIGHT) / 2.0, BOTTOM + 45.0);
    let _ = writeln!(s, r#"<text x="24" y="{}" text-anchor="middle" transform="rotate(-90 24 {})">max-in-time error</text>"#, (TOP + BOTTOM) / 2.0, (TOP + BOTTOM) / 2.0);

    let _ = writeln!(s, r#"<g clip-path="url(#plot)">"#);
    for (rate, dash) in [(1.0, "6 4"), (2.0, "2 4")] {
        let (x0, y0) = (axes.x0, axes.y0 + 0.1);
        let x1 = axes.x1;
        let y1 = y0 + rate * (x1 - x0);
        let _ = writeln!(
            s,
            r#"<line class="guide" data-slope="{rate}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="{dash}"/>"#,
            axes.px(x0),
            axes.py(y0),
            axes.px(x1),
            axes.py(y1)
        );
    }
    for (i, p) in pairs.iter().enumerate() {
        let coords: Vec<String> = report
            .curve(*p)
            .into_iter()
            .filter(|(_, e)| *e > 0.0)
            .map(|(x, e)| format!("{:.2},{:.2}", axes.px(x.log10()), axes.py(e.log10())))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="curve" data-pair="{}" points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            p.tag(),
            coords.join(" "),
            COLORS[i % COLORS.len()]
        );
    }
    let _ = writeln!(s, "</g>");

    let mut y = TOP + 10.0;
    for (i, p) in pairs.iter().enumerate() {
        let slope = match report.slopes.get(p) {
            Some(sl) => format!("slope {:.2} ± {:.2}", sl.value, sl.stderr),
            None => "no slope".to_string(),
        };
        let _ = writeln!(s, r#"<line x1="655" y1="{y}" x2="680" y2="{y}" stroke="{}" stroke-width="2"/>"#, COLORS[i % COLORS.len()]);
        let _ = writeln!(s, r#"<text x="686" y="{}">{}</text>"#, y + 4.0, p.tag());
        let _ = writeln!(s, r#"<text x="686" y="{}" font-size="10">{slope}</text>"#, y + 17.0);
        y += 36.0;
    }
    let _ = writeln!(s, r#"<line x1="655" y1="{y}" x2="680" y2="{y}" stroke="gray" stroke-dasharray="6 4"/>"#);
    let _ = writeln!(s, r#"<text x="686" y="{}">slope 1</text>"#, y + 4.0);
    y += 20.0;
    let _ = writeln!(s, r#"<line x1="655" y1="{y}" x2="680" y2="{y}" stroke="gray" stroke-dasharray="2 4"/>"#);
    let _ = writeln!(s, r#"<text x="686" y="{}">slope 2</text>"#, y + 4.0);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_power_laws() {
        let xs = [0.5, 0.4, 0.3, 0.22];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let (s, e) = fit_rate(&xs, &ys).unwrap();
        assert!((s - 2.0).abs() < 1e-12 && e < 1e-12, "{s} {e}");
        let ys: Vec<f64> = xs.iter().map(|x| 0.7 * x).collect();
        let (s, _) = fit_rate(&xs, &ys).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs = [0.5, 0.4, 0.3, 0.22];
        for _ in 0..200 {
            let ys: Vec<f64> = xs.iter().map(|x| x * x * (1.0 + rng.random_range(-0.05..0.05))).collect();
            let (s, _) = fit_rate(&xs, &ys).unwrap();
            assert!((1.8..=2.2).contains(&s), "{s}");
        }
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(matches!(fit_rate(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::TooFewPoints { .. })));
        assert!(matches!(fit_rate(&[1.0, 2.0, 3.0], &[1.0, 0.0, 3.0]), Err(Error::NonPositive(_))));
        assert!(matches!(fit_rate(&[1.0, 2.0, 3.0], &[1.0, -2.0, 3.0]), Err(Error::NonPositive(_))));
    }

    proptest! {
        #[test]
        fn fit_recovers_any_power(p in -3.0f64..3.0, c in 0.01f64..100.0) {
            let xs = [0.9f64, 0.5, 0.31, 0.2, 0.13];
            let ys: Vec<f64> = xs.iter().map(|x| c * x.powf(p)).collect();
            let (s, e) = fit_rate(&xs, &ys).unwrap();
            prop_assert!((s - p).abs() < 1e-10);
            prop_assert!(e < 1e-8);
        }
    }

    #[test]
    fn tags_round_trip() {
        for p in LimitPair::STUDY.into_iter().chain([LimitPair::Identity]) {
            assert_eq!(LimitPair::from_tag(p.tag()).unwrap(), p);
            assert_eq!(serde_json::to_string(&p).unwrap(), format!("\"{}\"", p.tag()));
        }
    }

    #[test]
    fn runs_share_limit_solves() {
        let (_, a) = LimitPair::AveragingNoDispersion.runs(0.3, 0.0, false);
        let (_, b) = LimitPair::Global.runs(0.4, 0.16, false);
        assert_eq!(a, b);
        let (a, b) = LimitPair::Identity.runs(0.3, 0.0, false);
        assert_ne!(a, b);
    }
}
