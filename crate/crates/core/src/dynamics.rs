//! Time integration: Strang splitting for the rescaled GPE, RK4 method of lines
//! for the four envelope equations, the change of unknown between the two, and
//! a Lagrangian solver along rays for the `α = 0` equations.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis, Zip};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eikonal::{jacobian, laplacian_along_ray, hamilton_flow, InitialPhase, PhaseField, PhaseProvider, DEFAULT_JACOBIAN_FLOOR};
use crate::error::{Error, Result};
use crate::field::{Field, GridSpec, SpectralX};
use crate::nonlinearity::{Nonlinearity, Workspace};
use crate::transverse::HermiteBasis;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Distance kept from the caustic time.
pub const CAUSTIC_MARGIN: f64 = 0.05;
/// Number of samples of `max |∇S|` over the run used by the step cap.
const GRAD_SAMPLES: usize = 17;

/// The evolution equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    /// The rescaled GPE for `Ψ`.
    GpeFull,
    /// Envelope `A^{ε,α}` with filtered nonlinearity and dispersion.
    EnvFull,
    /// Envelope `A^{0,α}` with averaged nonlinearity and dispersion.
    EnvAveraged,
    /// Envelope `A^{ε,0}`: filtered nonlinearity, no dispersion.
    EnvOscillatory,
    /// Limit `A`: averaged nonlinearity, no dispersion.
    EnvLimit,
}

impl Equation {
    pub const ALL: [Equation; 5] =
        [Equation::GpeFull, Equation::EnvFull, Equation::EnvAveraged, Equation::EnvOscillatory, Equation::EnvLimit];

    pub fn name(&self) -> &'static str {
        match self {
            Equation::GpeFull => "gpe_full",
            Equation::EnvFull => "env_full",
            Equation::EnvAveraged => "env_averaged",
            Equation::EnvOscillatory => "env_oscillatory",
            Equation::EnvLimit => "env_limit",
        }
    }

    /// Carries the fast `t/ε²` oscillation.
    pub fn is_oscillatory(&self) -> bool {
        matches!(self, Equation::GpeFull | Equation::EnvFull | Equation::EnvOscillatory)
    }

    /// Has the `α` dispersion term.
    pub fn is_dispersive(&self) -> bool {
        matches!(self, Equation::GpeFull | Equation::EnvFull | Equation::EnvAveraged)
    }

    pub fn is_envelope(&self) -> bool {
        *self != Equation::GpeFull
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Equation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Equation::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown equation `{s}`")))
    }
}

/// Parameters of a single solver run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub equation: Equation,
    pub epsilon: f64,
    pub alpha: f64,
    pub t_final: f64,
    pub dt: f64,
    pub record_every: usize,
    /// Multiplies the cubic term; 1 is the physical model.
    pub nonlinear_strength: f64,
}

impl SolverParams {
    pub fn new(equation: Equation, epsilon: f64, alpha: f64, t_final: f64, dt: f64) -> Self {
        SolverParams { equation, epsilon, alpha, t_final, dt, record_every: 1, nonlinear_strength: 1.0 }
    }

    pub fn with_record_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }

    pub fn with_nonlinear_strength(mut self, s: f64) -> Self {
        self.nonlinear_strength = s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.equation.is_oscillatory() && !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad(format!("{}: epsilon = {} must lie in (0, 1]", self.equation, self.epsilon));
        }
        if self.equation.is_dispersive() {
            if !(self.alpha > 0.0 && self.alpha <= 1.0) {
                return bad(format!("{}: alpha = {} must lie in (0, 1]", self.equation, self.alpha));
            }
        } else if self.alpha != 0.0 {
            return bad(format!("{} runs with alpha = 0, got {}", self.equation, self.alpha));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final = {} must be non-negative", self.t_final));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if !self.nonlinear_strength.is_finite() {
            return bad("nonlinear_strength must be finite".into());
        }
        self.num_steps().map(|_| ())
    }

    /// `t_final / dt`, which must be an integer.
    pub fn num_steps(&self) -> Result<usize> {
        let k = (self.t_final / self.dt).round();
        if (k * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(1.0) {
            return Err(Error::InvalidParams(format!("t_final = {} is not a multiple of dt = {}", self.t_final, self.dt)));
        }
        Ok(k as usize)
    }
}

/// Largest admissible step.
///
/// `ε²/20` for oscillatory equations, `2.5/(α ξ²/2)` and
/// `2.5/(α ξ²/2 + ξ max|∇S|)` for the RK4 dispersion, `Δx/(2 max|∇S|)` for advection.
pub fn dt_cap(params: &SolverParams, grid: &GridSpec, max_grad_s: f64) -> f64 {
    let mut cap = f64::INFINITY;
    let eq = params.equation;
    if eq.is_oscillatory() {
        cap = cap.min(params.epsilon * params.epsilon / 20.0);
    }
    if eq.is_envelope() {
        let xi = grid.xi_max();
        if eq.is_dispersive() {
            let disp = params.alpha * xi * xi / 2.0;
            cap = cap.min(2.5 / disp).min(2.5 / (disp + xi * max_grad_s));
        }
        if max_grad_s > 0.0 {
            cap = cap.min(grid.dx() / (2.0 * max_grad_s));
        }
    }
    cap
}

/// `β = ε^d α^{-n/2}`.
pub fn scaling_beta(epsilon: f64, alpha: f64, n: usize, d: usize) -> Result<f64> {
    if !(epsilon > 0.0) || !(alpha > 0.0) {
        return Err(Error::NonPositive(format!("epsilon = {epsilon}, alpha = {alpha}")));
    }
    Ok(epsilon.powi(d as i32) * alpha.powf(-(n as f64) / 2.0))
}

/// `α = ε^{2d/n} β^{-2/n}`.
pub fn alpha_from_beta(epsilon: f64, beta: f64, n: usize, d: usize) -> Result<f64> {
    if !(epsilon > 0.0) || !(beta > 0.0) {
        return Err(Error::NonPositive(format!("epsilon = {epsilon}, beta = {beta}")));
    }
    let n = n as f64;
    Ok(epsilon.powf(2.0 * d as f64 / n) * beta.powf(-2.0 / n))
}

/// Recorded states of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub equation: Equation,
    pub dt: f64,
    pub steps: usize,
    pub snapshots: Vec<Field>,
    pub initial_mass: f64,
    /// Largest `|mass(t) - mass(0)|` over all steps.
    pub max_mass_drift: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|f| f.time).collect()
    }

    pub fn last(&self) -> &Field {
        self.snapshots.last().expect("trajectory holds the initial state")
    }

    pub fn at_time(&self, t: f64) -> Option<&Field> {
        self.snapshots.iter().find(|f| (f.time - t).abs() <= 1e-9 * t.abs().max(1.0))
    }
}

fn check_time(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
        return Err(Error::TimeMismatch(a, b));
    }
    Ok(())
}

fn check_decay(f: &Field) -> Result<()> {
    f.check_boundary_decay()?;
    f.check_spectral_decay()
}

struct Recorder {
    every: usize,
    steps: usize,
    snapshots: Vec<Field>,
    initial_mass: f64,
    drift: f64,
}

impl Recorder {
    fn new(params: &SolverParams, steps: usize, initial: &Field) -> Result<Self> {
        check_decay(initial)?;
        Ok(Recorder { every: params.record_every, steps, snapshots: vec![initial.clone()], initial_mass: initial.mass(), drift: 0.0 })
    }

    fn after_step(&mut self, k: usize, grid: GridSpec, data: &Array2<Complex64>, time: f64) -> Result<()> {
        let mass = data.iter().map(|c| c.norm_sqr()).sum::<f64>() * grid.cell_volume();
        self.drift = self.drift.max((mass - self.initial_mass).abs());
        if k.is_multiple_of(self.every) || k == self.steps {
            let f = Field { grid, data: data.clone(), time };
            check_decay(&f)?;
            self.snapshots.push(f);
        }
        Ok(())
    }

    fn finish(self, equation: Equation, dt: f64) -> Trajectory {
        Trajectory { equation, dt, steps: self.steps, snapshots: self.snapshots, initial_mass: self.initial_mass, max_mass_drift: self.drift }
    }
}

/// Strang splitting for `i∂_tΨ = H_z Ψ/ε² - (α/2)ΔΨ + |x|²Ψ/(2α) + |Ψ|²Ψ`.
///
/// Half steps of the linear flow (diagonal in Fourier-x and Hermite-z) around a
/// full step of the pointwise potential and cubic flow.
pub fn solve_gpe(psi0: &Field, params: &SolverParams, basis: &HermiteBasis) -> Result<Trajectory> {
    if params.equation != Equation::GpeFull {
        return Err(Error::InvalidParams(format!("solve_gpe cannot run {}", params.equation)));
    }
    params.validate()?;
    let grid = psi0.grid;
    grid.check_basis(basis)?;
    let cap = dt_cap(params, &grid, 0.0);
    if params.dt > cap * (1.0 + 1e-12) {
        return Err(Error::DtCap { dt: params.dt, cap });
    }
    let steps = params.num_steps()?;
    let stepper = GpeStepper::new(&grid, params, basis);
    let mut rec = Recorder::new(params, steps, psi0)?;
    let mut data = psi0.data.clone();
    for k in 1..=steps {
        stepper.step(&mut data, basis);
        rec.after_step(k, grid, &data, psi0.time + k as f64 * params.dt)?;
    }
    Ok(rec.finish(params.equation, params.dt))
}

struct GpeStepper {
    spectral: SpectralX,
    /// `exp(-i (dt/2) α|ξ|²/2) / N` per Fourier index.
    half_kinetic: Vec<Complex64>,
    /// `exp(-i (dt/2) l/ε²)` per level.
    half_z: Vec<Complex64>,
    /// `exp(-i dt |x|²/(2α))` per grid column.
    potential: Vec<Complex64>,
    cubic_dt: f64,
}

impl GpeStepper {
    fn new(grid: &GridSpec, params: &SolverParams, basis: &HermiteBasis) -> Self {
        let spectral = SpectralX::new(grid);
        let h = params.dt / 2.0;
        let n = grid.ncols();
        let half_kinetic = (0..n)
            .map(|c| {
                let k = spectral.wavevector(c);
                Complex64::from_polar(1.0 / n as f64, -h * params.alpha * (k[0] * k[0] + k[1] * k[1]) / 2.0)
            })
            .collect();
        let half_z = crate::nonlinearity::level_phases(h / (params.epsilon * params.epsilon), basis);
        let potential = (0..n)
            .map(|c| {
                let r2: f64 = grid.point(c).iter().map(|x| x * x).sum();
                Complex64::from_polar(1.0, -params.dt * r2 / (2.0 * params.alpha))
            })
            .collect();
        GpeStepper { spectral, half_kinetic, half_z, potential, cubic_dt: params.dt * params.nonlinear_strength }
    }

    fn half_linear(&self, data: &mut Array2<Complex64>, basis: &HermiteBasis) {
        let levels = basis.levels();
        data.axis_iter_mut(Axis(1)).into_par_iter().enumerate().for_each_init(
            || vec![ZERO; self.half_kinetic.len()],
            |buf, (j, mut col)| {
                for (b, v) in buf.iter_mut().zip(col.iter()) {
                    *b = *v;
                }
                self.spectral.transform(buf, false);
                for (b, m) in buf.iter_mut().zip(&self.half_kinetic) {
                    *b *= m;
                }
                self.spectral.transform(buf, true);
                let z = self.half_z[levels[j] as usize];
                for (v, b) in col.iter_mut().zip(buf.iter()) {
                    *v = b * z;
                }
            },
        );
    }

    fn pointwise(&self, data: &mut Array2<Complex64>, basis: &HermiteBasis) {
        let nc = basis.num_coefficients();
        let nv = basis.num_node_values();
        let tau = self.cubic_dt;
        data.axis_iter_mut(Axis(0)).into_par_iter().zip(&self.potential).for_each_init(
            || (vec![ZERO; nc], vec![ZERO; nv], vec![ZERO; nc], Vec::new()),
            |(coeffs, nodes, delta, scratch), (mut row, pot)| {
                for (c, v) in coeffs.iter_mut().zip(row.iter()) {
                    *c = *v;
                }
                if tau != 0.0 && coeffs.iter().any(|c| *c != ZERO) {
                    basis.eval_product(coeffs, nodes, scratch);
                    for u in nodes.iter_mut() {
                        // exp(-iτ|u|²) - 1 without cancellation
                        let phi = -tau * u.norm_sqr();
                        let half = (0.5 * phi).sin();
                        *u *= Complex64::new(-2.0 * half * half, phi.sin());
                    }
                    basis.project_product(nodes, delta, scratch);
                    for (c, d) in coeffs.iter_mut().zip(delta.iter()) {
                        *c += d;
                    }
                }
                for (v, c) in row.iter_mut().zip(coeffs.iter()) {
                    *v = c * pot;
                }
            },
        );
    }

    fn step(&self, data: &mut Array2<Complex64>, basis: &HermiteBasis) {
        self.half_linear(data, basis);
        self.pointwise(data, basis);
        self.half_linear(data, basis);
    }
}

/// `A = e^{itH_z/ε²} e^{-iS(t,x)/α} Ψ`.
pub fn to_envelope(psi: &Field, t: f64, phase: &PhaseField, epsilon: f64, alpha: f64, basis: &HermiteBasis) -> Result<Field> {
    change_unknown(psi, t, phase, epsilon, alpha, basis, -1.0)
}

/// `Ψ = e^{iS(t,x)/α} e^{-itH_z/ε²} A`, the inverse of [`to_envelope`].
pub fn from_envelope(a: &Field, t: f64, phase: &PhaseField, epsilon: f64, alpha: f64, basis: &HermiteBasis) -> Result<Field> {
    change_unknown(a, t, phase, epsilon, alpha, basis, 1.0)
}

fn change_unknown(f: &Field, t: f64, phase: &PhaseField, epsilon: f64, alpha: f64, basis: &HermiteBasis, sign: f64) -> Result<Field> {
    if !(alpha > 0.0) || !(epsilon > 0.0) {
        return Err(Error::NonPositive(format!("epsilon = {epsilon}, alpha = {alpha}")));
    }
    check_time(f.time, t)?;
    check_time(phase.time, t)?;
    f.grid.check_basis(basis)?;
    if phase.len() != f.grid.ncols() {
        return Err(Error::GridMismatch);
    }
    let mut out = f.clone();
    let x_phase: Vec<Complex64> = phase.s_values.iter().map(|s| Complex64::from_polar(1.0, sign * s / alpha)).collect();
    let z_phase = crate::nonlinearity::level_phases(sign * t / (epsilon * epsilon), basis);
    let levels = basis.levels();
    Zip::from(out.data.rows_mut()).and(&x_phase).par_for_each(|mut row, xp| {
        for (v, &l) in row.iter_mut().zip(levels) {
            *v *= xp * z_phase[l as usize];
        }
    });
    Ok(out)
}

/// Converts a GPE trajectory to the envelope unknown at every record.
pub fn gpe_to_envelope(traj: &Trajectory, phase: &mut dyn PhaseProvider, epsilon: f64, alpha: f64, basis: &HermiteBasis) -> Result<Trajectory> {
    let snapshots = traj
        .snapshots
        .iter()
        .map(|psi| {
            let p = phase.phase_at(psi.time)?;
            to_envelope(psi, psi.time, &p, epsilon, alpha, basis)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory { snapshots, ..traj.clone() })
}

/// Spectral pieces of the envelope right-hand side.
struct EnvelopeOperator<'a> {
    basis: &'a HermiteBasis,
    grid: GridSpec,
    spectral: SpectralX,
    /// `i k_a / N` with the Nyquist mode removed, per axis and Fourier index.
    grad_symbols: Vec<Vec<Complex64>>,
    /// `-|k|² / N`.
    lap_symbol: Vec<f64>,
    params: SolverParams,
}

impl<'a> EnvelopeOperator<'a> {
    fn new(grid: GridSpec, params: SolverParams, basis: &'a HermiteBasis) -> Self {
        let spectral = SpectralX::new(&grid);
        let n = grid.ncols();
        let scale = 1.0 / n as f64;
        let grad_symbols = (0..grid.dim_n)
            .map(|a| (0..n).map(|c| spectral.derivative_symbol(c, a, 1) * scale).collect())
            .collect();
        let lap_symbol = (0..n)
            .map(|c| {
                let k = spectral.wavevector(c);
                -(k[0] * k[0] + k[1] * k[1]) * scale
            })
            .collect();
        EnvelopeOperator { basis, grid, spectral, grad_symbols, lap_symbol, params }
    }

    fn nonlinearity(&self, t: f64) -> Nonlinearity {
        if self.params.equation.is_oscillatory() {
            Nonlinearity::Filtered(t / (self.params.epsilon * self.params.epsilon))
        } else {
            Nonlinearity::averaged(self.basis)
        }
    }

    /// `out = -∇S·∇A - ½ΔS A + i(α/2)ΔA - i s N(t, A)`.
    fn eval(&self, t: f64, a: &Array2<Complex64>, phase: &PhaseField, out: &mut Array2<Complex64>, nl: &mut Array2<Complex64>) -> Result<()> {
        let n = self.grid.ncols();
        let dim = self.grid.dim_n;
        let half_alpha = 0.5 * self.params.alpha;
        out.axis_iter_mut(Axis(1)).into_par_iter().zip(a.axis_iter(Axis(1))).for_each_init(
            || (vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]),
            |(col, hat, tmp), (mut o, input)| {
                for (c, v) in col.iter_mut().zip(input.iter()) {
                    *c = *v;
                }
                if col.iter().all(|c| *c == ZERO) {
                    o.fill(ZERO);
                    return;
                }
                hat.copy_from_slice(col);
                self.spectral.transform(hat, false);
                for (j, v) in o.iter_mut().enumerate() {
                    *v = col[j] * (-0.5 * phase.lap_s[j]);
                }
                for (axis, sym) in self.grad_symbols.iter().enumerate() {
                    for ((t, h), s) in tmp.iter_mut().zip(hat.iter()).zip(sym) {
                        *t = h * s;
                    }
                    self.spectral.transform(tmp, true);
                    for (j, v) in o.iter_mut().enumerate() {
                        *v -= tmp[j] * phase.grad_s[j * dim + axis];
                    }
                }
                if half_alpha != 0.0 {
                    for ((t, h), s) in tmp.iter_mut().zip(hat.iter()).zip(&self.lap_symbol) {
                        *t = h * s;
                    }
                    self.spectral.transform(tmp, true);
                    for (v, t) in o.iter_mut().zip(tmp.iter()) {
                        *v += I * half_alpha * t;
                    }
                }
            },
        );
        let s = self.params.nonlinear_strength;
        if s != 0.0 {
            self.nonlinearity(t).apply(a, nl, self.basis)?;
            let f = -I * s;
            Zip::from(&mut *out).and(&*nl).par_for_each(|o, v| *o += f * v);
        }
        Ok(())
    }
}

/// `max |∇S|` over samples of `[t0, t0 + t_final]`.
pub fn max_grad_over_run(phase: &mut dyn PhaseProvider, t0: f64, t_final: f64) -> Result<f64> {
    let mut g = 0.0f64;
    for k in 0..GRAD_SAMPLES {
        let t = t0 + t_final * k as f64 / (GRAD_SAMPLES - 1) as f64;
        g = g.max(phase.phase_at(t)?.max_grad());
    }
    Ok(g)
}

/// Checks the run horizon against the caustic time and the step against [`dt_cap`].
pub fn check_envelope_run(a0: &Field, params: &SolverParams, phase: &mut dyn PhaseProvider) -> Result<f64> {
    let tc = phase.caustic_time();
    if a0.time + params.t_final >= tc - CAUSTIC_MARGIN {
        return Err(Error::CausticReached { t: tc });
    }
    let g = max_grad_over_run(phase, a0.time, params.t_final)?;
    let cap = dt_cap(params, &a0.grid, g);
    if params.dt > cap * (1.0 + 1e-12) {
        return Err(Error::DtCap { dt: params.dt, cap });
    }
    Ok(cap)
}

/// Classical RK4 for the envelope equations with spectral x-derivatives.
pub fn solve_envelope(a0: &Field, params: &SolverParams, phase: &mut dyn PhaseProvider, basis: &HermiteBasis) -> Result<Trajectory> {
    if !params.equation.is_envelope() {
        return Err(Error::InvalidParams("solve_envelope needs an envelope equation".into()));
    }
    params.validate()?;
    let grid = a0.grid;
    grid.check_basis(basis)?;
    check_envelope_run(a0, params, phase)?;
    let steps = params.num_steps()?;
    let op = EnvelopeOperator::new(grid, *params, basis);
    let mut rec = Recorder::new(params, steps, a0)?;
    let shape = a0.data.dim();
    let mut a = a0.data.clone();
    let (mut k1, mut k2, mut k3, mut k4) = (Array2::zeros(shape), Array2::zeros(shape), Array2::zeros(shape), Array2::zeros(shape));
    let mut stage = Array2::zeros(shape);
    let mut nl = Array2::zeros(shape);
    let dt = params.dt;
    for k in 0..steps {
        let t = a0.time + k as f64 * dt;
        let (p0, ph, p1) = (phase.phase_at(t)?, phase.phase_at(t + 0.5 * dt)?, phase.phase_at(t + dt)?);
        op.eval(t, &a, &p0, &mut k1, &mut nl)?;
        axpy(&mut stage, &a, 0.5 * dt, &k1);
        op.eval(t + 0.5 * dt, &stage, &ph, &mut k2, &mut nl)?;
        axpy(&mut stage, &a, 0.5 * dt, &k2);
        op.eval(t + 0.5 * dt, &stage, &ph, &mut k3, &mut nl)?;
        axpy(&mut stage, &a, dt, &k3);
        op.eval(t + dt, &stage, &p1, &mut k4, &mut nl)?;
        let h = dt / 6.0;
        Zip::from(&mut a).and(&k1).and(&k2).and(&k3).and(&k4).par_for_each(|v, a1, a2, a3, a4| {
            *v += (a1 + 2.0 * a2 + 2.0 * a3 + a4) * h;
        });
        rec.after_step(k + 1, grid, &a, a0.time + (k + 1) as f64 * dt)?;
    }
    Ok(rec.finish(params.equation, dt))
}

fn axpy(out: &mut Array2<Complex64>, base: &Array2<Complex64>, h: f64, dir: &Array2<Complex64>) {
    Zip::from(out).and(base).and(dir).par_for_each(|o, b, d| *o = b + d * h);
}

/// Amplitudes transported along rays launched from the grid points.
#[derive(Debug, Clone)]
pub struct RaySolution {
    pub time: f64,
    pub dim_n: usize,
    /// Flattened `nrays × n`.
    pub launch_points: Vec<f64>,
    pub endpoints: Vec<f64>,
    pub jacobians: Vec<f64>,
    /// `nrays × ncoef`.
    pub amplitudes: Array2<Complex64>,
}

/// Integrates `dA/dt = -½ΔS(t, x(t,y)) A - i s N(t, A)` along every ray by RK4.
pub fn solve_rays(a0: &Field, params: &SolverParams, s0: &InitialPhase, basis: &HermiteBasis) -> Result<RaySolution> {
    if !matches!(params.equation, Equation::EnvOscillatory | Equation::EnvLimit) {
        return Err(Error::InvalidParams(format!("rays need an alpha = 0 equation, got {}", params.equation)));
    }
    params.validate()?;
    let grid = a0.grid;
    grid.check_basis(basis)?;
    s0.validate(grid.dim_n)?;
    let steps = params.num_steps()?;
    let n = grid.dim_n;
    let nc = basis.num_coefficients();
    let dt = params.dt;
    let t0 = a0.time;
    let t_end = t0 + steps as f64 * dt;
    let eps2 = params.epsilon * params.epsilon;
    let oscillatory = params.equation.is_oscillatory();
    let strength = params.nonlinear_strength;
    let nonlinearity = |t: f64| if oscillatory { Nonlinearity::Filtered(t / eps2) } else { Nonlinearity::averaged(basis) };

    let rays: Vec<Result<(Vec<f64>, f64, Vec<Complex64>)>> = (0..grid.ncols())
        .into_par_iter()
        .map_init(
            || Workspace::new(basis),
            |ws, col| {
                let y = grid.point(col);
                let mut a: Vec<Complex64> = a0.data.row(col).to_vec();
                let mut nl = vec![ZERO; nc];
                let mut rhs = |t: f64, v: &[Complex64], out: &mut [Complex64], ws: &mut Workspace| -> Result<()> {
                    let lap = laplacian_along_ray(t, &y, s0);
                    if strength != 0.0 {
                        nonlinearity(t).column(v, &mut nl, basis, ws)?;
                    }
                    for ((o, v), w) in out.iter_mut().zip(v).zip(&nl) {
                        *o = -0.5 * lap * v - I * strength * w;
                    }
                    Ok(())
                };
                let (mut k1, mut k2, mut k3, mut k4, mut st) =
                    (vec![ZERO; nc], vec![ZERO; nc], vec![ZERO; nc], vec![ZERO; nc], vec![ZERO; nc]);
                for k in 0..steps {
                    let t = t0 + k as f64 * dt;
                    if jacobian(t + dt, &y, s0) <= DEFAULT_JACOBIAN_FLOOR {
                        return Err(Error::CausticReached { t: t + dt });
                    }
                    rhs(t, &a, &mut k1, ws)?;
                    lin(&mut st, &a, 0.5 * dt, &k1);
                    rhs(t + 0.5 * dt, &st, &mut k2, ws)?;
                    lin(&mut st, &a, 0.5 * dt, &k2);
                    rhs(t + 0.5 * dt, &st, &mut k3, ws)?;
                    lin(&mut st, &a, dt, &k3);
                    rhs(t + dt, &st, &mut k4, ws)?;
                    for i in 0..nc {
                        a[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
                    }
                }
                let (x, _) = hamilton_flow(t_end, &y, s0);
                Ok((x, jacobian(t_end, &y, s0), a))
            },
        )
        .collect();
    let mut sol = RaySolution {
        time: t_end,
        dim_n: n,
        launch_points: grid.points(),
        endpoints: Vec::with_capacity(grid.ncols() * n),
        jacobians: Vec::with_capacity(grid.ncols()),
        amplitudes: Array2::zeros((grid.ncols(), nc)),
    };
    for (col, r) in rays.into_iter().enumerate() {
        let (x, j, a) = r?;
        sol.endpoints.extend(x);
        sol.jacobians.push(j);
        for (dst, v) in sol.amplitudes.row_mut(col).iter_mut().zip(a) {
            *dst = v;
        }
    }
    Ok(sol)
}

fn lin(out: &mut [Complex64], base: &[Complex64], h: f64, dir: &[Complex64]) {
    for ((o, b), d) in out.iter_mut().zip(base).zip(dir) {
        *o = b + d * h;
    }
}

/// Relative L² distance between ray amplitudes and a grid field interpolated at
/// the ray endpoints, weighting each ray by its Jacobian.
pub fn ray_field_distance(rays: &RaySolution, field: &Field) -> Result<f64> {
    check_time(rays.time, field.time)?;
    let values = field.interpolate(&rays.endpoints);
    let (mut num, mut den) = (0.0, 0.0);
    for (r, j) in rays.jacobians.iter().enumerate() {
        for (a, v) in rays.amplitudes.row(r).iter().zip(values.row(r)) {
            num += j * (a - v).norm_sqr();
            den += j * a.norm_sqr();
        }
    }
    if den == 0.0 {
        return Ok(num.sqrt());
    }
    Ok((num / den).sqrt())
}
