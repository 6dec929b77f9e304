//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{OutputFormat, StudyConfig};
use crate::convergence::{emit_all, run_study, solve_cell, ConvergenceReport};
use crate::dynamics::Equation;
use crate::eikonal::{caustic_time, phase_on_grid_lenient, PhaseField};
use crate::field::write_snapshot;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "condred", version, about = "Reduced models of a strongly confined condensate")]
pub struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every model at one (eps, alpha) and write final snapshots.
    Solve(CommonArgs),
    /// Run the convergence study and write the report.
    Sweep(CommonArgs),
    /// Write the phase on the grid at the study horizon.
    Eikonal(CommonArgs),
    /// Re-render a JSON report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML study configuration; defaults apply without it.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "X")]
    pub eps: Option<f64>,
    #[arg(long, value_name = "X")]
    pub alpha: Option<f64>,
    /// Output directory, overriding the config.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Report formats, overriding the config; repeatable.
    #[arg(long, value_name = "csv|json|svg")]
    pub format: Vec<OutputFormat>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report written by `sweep`.
    pub input: PathBuf,
    /// Formats to write; csv and svg when absent.
    #[arg(long, value_name = "csv|json|svg")]
    pub format: Vec<OutputFormat>,
    /// Output directory; the input's directory when absent.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl clap::ValueEnum for OutputFormat {
    fn value_variants<'a>() -> &'a [Self] {
        &[OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.extension()))
    }
}

impl CommonArgs {
    /// Loads the config and applies the command-line overrides.
    pub fn resolve(&self) -> Result<StudyConfig> {
        let mut cfg = match &self.config {
            Some(p) => StudyConfig::load(p)?,
            None => StudyConfig::default(),
        };
        if let Some(e) = self.eps {
            cfg = cfg.with_eps(e);
        }
        if let Some(a) = self.alpha {
            cfg = cfg.with_alpha(a);
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        if !self.format.is_empty() {
            cfg.output.formats = self.format.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

/// Runs a parsed command; `Ok` carries the exit code.
pub fn execute(cli: &Cli) -> Result<i32> {
    let say = |msg: &str| {
        if !cli.quiet {
            println!("{msg}");
        }
    };
    match &cli.command {
        Command::Solve(a) => {
            let cfg = a.resolve()?;
            let paths = solve_command(&cfg)?;
            for p in paths {
                say(&format!("wrote {}", p.display()));
            }
            Ok(EXIT_OK)
        }
        Command::Sweep(a) => {
            let cfg = a.resolve()?;
            let report = run_study(&cfg)?;
            let dir = &cfg.output.dir;
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("study.toml"), cfg.to_toml_string()?)?;
            let paths = emit_all(&report, &cfg.output.formats, dir, "study")?;
            say(&summary(&report));
            for p in paths {
                say(&format!("wrote {}", p.display()));
            }
            if report.complete {
                return Ok(EXIT_OK);
            }
            for f in &report.failures {
                eprintln!("error: cell {} failed: {}", f.cell, f.message);
            }
            Ok(if report.failures.iter().any(|f| f.numerical) { EXIT_NUMERICAL } else { EXIT_USAGE })
        }
        Command::Eikonal(a) => {
            let cfg = a.resolve()?;
            let path = eikonal_command(&cfg)?;
            say(&format!("wrote {}", path.display()));
            Ok(EXIT_OK)
        }
        Command::Report(a) => {
            let report = ConvergenceReport::load(&a.input)?;
            let dir = match &a.out {
                Some(d) => d.clone(),
                None => a.input.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            let formats = if a.format.is_empty() { vec![OutputFormat::Csv, OutputFormat::Svg] } else { a.format.clone() };
            let stem = a.input.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
            for p in emit_all(&report, &formats, &dir, stem)? {
                say(&format!("wrote {}", p.display()));
            }
            Ok(EXIT_OK)
        }
    }
}

/// One line per pair with its slope, or the reason there is none.
pub fn summary(report: &ConvergenceReport) -> String {
    let mut s = format!("scenario {}: {} cells", report.scenario, report.cells.len());
    for (p, sl) in &report.slopes {
        let _ = write!(s, "\n  {}: slope {:.3} ± {:.3}", p.tag(), sl.value, sl.stderr);
    }
    for w in &report.warnings {
        let _ = write!(s, "\n  {w}");
    }
    for g in &report.guards {
        let verdict = if g.passed { "ok" } else { "FAILED" };
        let _ = write!(s, "\n  guard {}: relative change {:.3e} {verdict}", g.pair.tag(), g.relative_change);
    }
    s
}

#[derive(Serialize)]
struct RunSummary {
    equation: Equation,
    dt: f64,
    steps: usize,
    initial_mass: f64,
    max_mass_drift: f64,
    snapshot: String,
}

#[derive(Serialize)]
struct SolveSummary {
    scenario: String,
    eps: f64,
    alpha: f64,
    t_final: f64,
    runs: Vec<RunSummary>,
    gpe_envelope_gap_b2: f64,
}

/// Runs `solve` and writes one snapshot per model plus `solve.json`.
pub fn solve_command(cfg: &StudyConfig) -> Result<Vec<PathBuf>> {
    let (eps, alpha) = (cfg.sweep.fixed_eps, cfg.sweep.fixed_alpha);
    let cell = solve_cell(cfg, eps, alpha)?;
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let mut runs = Vec::new();
    for t in &cell.runs {
        let stem = t.equation.name();
        write_snapshot(t.last(), dir, stem)?;
        paths.push(dir.join(format!("{stem}.csv")));
        runs.push(RunSummary {
            equation: t.equation,
            dt: t.dt,
            steps: t.steps,
            initial_mass: t.initial_mass,
            max_mass_drift: t.max_mass_drift,
            snapshot: format!("{stem}.csv"),
        });
    }
    let summary = SolveSummary {
        scenario: cfg.scenario.name().to_string(),
        eps,
        alpha,
        t_final: cfg.sweep.t_final,
        runs,
        gpe_envelope_gap_b2: cell.gpe_gap,
    };
    let path = dir.join("solve.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")?;
    paths.push(path);
    Ok(paths)
}

/// Phase at `t_final` as `x.., s, ds_dx.., lap_s, y..` rows (`y` the launch point).
pub fn eikonal_command(cfg: &StudyConfig) -> Result<PathBuf> {
    let t = cfg.sweep.t_final;
    let tc = caustic_time(&cfg.phase, &cfg.grid, cfg.sweep.jacobian_floor);
    if t >= tc {
        return Err(Error::CausticReached { t: tc });
    }
    let field = phase_on_grid_lenient(t, &cfg.grid, &cfg.phase, cfg.sweep.jacobian_floor, None)?;
    std::fs::create_dir_all(&cfg.output.dir)?;
    let path = cfg.output.dir.join("phase.csv");
    std::fs::write(&path, phase_csv(&field, cfg))?;
    Ok(path)
}

fn phase_csv(field: &PhaseField, cfg: &StudyConfig) -> String {
    let n = field.dim_n;
    let names = |p: &str| -> Vec<String> { (0..n).map(|a| if n == 1 { p.to_string() } else { format!("{p}{a}") }).collect() };
    let mut head = names("x");
    head.push("s".into());
    head.extend(names("ds_dx"));
    head.push("lap_s".into());
    head.extend(names("y"));
    let mut out = head.join(",");
    out.push('\n');
    for col in 0..field.len() {
        let mut row: Vec<String> = cfg.grid.point(col).iter().map(|v| v.to_string()).collect();
        row.push(field.s_values[col].to_string());
        row.extend(field.grad(col).iter().map(|v| v.to_string()));
        row.push(field.lap_s[col].to_string());
        row.extend(field.launch_points[col * n..(col + 1) * n].iter().map(|v| v.to_string()));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Entry point of the `condred` binary.
pub fn main() -> i32 {
    let code = main_with_args(std::env::args_os());
    let _ = std::io::stdout().flush();
    code
}
