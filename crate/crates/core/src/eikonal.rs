//! The eikonal equation `∂_t S + |∇S|²/2 + |x|²/2 = 0` solved by its explicit
//! characteristics: ray map, Jacobian, action, Newton inversion of the ray map
//! and caustic detection.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GridSpec;

pub const DEFAULT_JACOBIAN_FLOOR: f64 = 0.1;
pub const MAX_NEWTON_ITERATIONS: usize = 50;
/// Action integration steps per unit time.
pub const ACTION_STEPS_PER_UNIT: usize = 64;

type V2 = [f64; 2];
type M2 = [[f64; 2]; 2];

/// Subquadratic initial phase `S₀` on ℝⁿ.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialPhase {
    #[default]
    Zero,
    /// `S₀ = b·x`; missing components of `b` are zero.
    Linear { b: Vec<f64> },
    /// `S₀ = c |x|²/2`.
    Quadratic { c: f64 },
    /// `S₀ = a exp(-|x|²/(2w²))`.
    GaussianBump { amplitude: f64, width: f64 },
}

fn pad(y: &[f64]) -> V2 {
    let mut v = [0.0; 2];
    v[..y.len()].copy_from_slice(y);
    v
}

fn dot(a: &V2, b: &V2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl InitialPhase {
    pub fn validate(&self, dim_n: usize) -> Result<()> {
        match self {
            InitialPhase::Linear { b } if b.len() > dim_n => {
                Err(Error::CatalogMismatch(format!("linear phase has {} components for n = {dim_n}", b.len())))
            }
            InitialPhase::GaussianBump { width, .. } if !(*width > 0.0) => {
                Err(Error::CatalogMismatch("gaussian bump width must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let p = pad(x);
        match self {
            InitialPhase::Zero => 0.0,
            InitialPhase::Linear { b } => b.iter().zip(&p).map(|(b, x)| b * x).sum(),
            InitialPhase::Quadratic { c } => 0.5 * c * dot(&p, &p),
            InitialPhase::GaussianBump { amplitude, width } => amplitude * (-dot(&p, &p) / (2.0 * width * width)).exp(),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.grad2(&pad(x))[..x.len()].to_vec()
    }

    /// Row-major `n × n` Hessian.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let h = self.hess2(&pad(x));
        let n = x.len();
        (0..n * n).map(|i| h[i / n][i % n]).collect()
    }

    fn grad2(&self, p: &V2) -> V2 {
        match self {
            InitialPhase::Zero => [0.0; 2],
            InitialPhase::Linear { b } => pad(b),
            InitialPhase::Quadratic { c } => [c * p[0], c * p[1]],
            InitialPhase::GaussianBump { amplitude, width } => {
                let w2 = width * width;
                let s = amplitude * (-dot(p, p) / (2.0 * w2)).exp();
                [-s * p[0] / w2, -s * p[1] / w2]
            }
        }
    }

    fn hess2(&self, p: &V2) -> M2 {
        match self {
            InitialPhase::Zero | InitialPhase::Linear { .. } => [[0.0; 2]; 2],
            InitialPhase::Quadratic { c } => [[*c, 0.0], [0.0, *c]],
            InitialPhase::GaussianBump { amplitude, width } => {
                let w2 = width * width;
                let s = amplitude * (-dot(p, p) / (2.0 * w2)).exp();
                let mut h = [[0.0; 2]; 2];
                for (i, row) in h.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = s * (p[i] * p[j] / (w2 * w2) - if i == j { 1.0 / w2 } else { 0.0 });
                    }
                }
                h
            }
        }
    }
}

/// Position and momentum of the ray launched from `y` at time `t` (padded to 2 components).
fn flow2(t: f64, y: &V2, s0: &InitialPhase) -> (V2, V2) {
    let (s, c) = t.sin_cos();
    let g = s0.grad2(y);
    ([y[0] * c + g[0] * s, y[1] * c + g[1] * s], [-y[0] * s + g[0] * c, -y[1] * s + g[1] * c])
}

/// `∂x/∂y = I cos t + ∇²S₀ sin t` and `∂ξ/∂y = -I sin t + ∇²S₀ cos t`, restricted to n axes.
fn ray_derivatives(t: f64, y: &V2, s0: &InitialPhase, n: usize) -> (M2, M2) {
    let (s, c) = t.sin_cos();
    let h = s0.hess2(y);
    let mut dx = [[0.0; 2]; 2];
    let mut dxi = [[0.0; 2]; 2];
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            dx[i][j] = id * c + h[i][j] * s;
            dxi[i][j] = -id * s + h[i][j] * c;
        }
    }
    if n == 1 {
        dx[1][1] = 1.0;
    }
    (dx, dxi)
}

fn det(m: &M2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn solve2(m: &M2, r: &V2) -> V2 {
    let d = det(m);
    [(m[1][1] * r[0] - m[0][1] * r[1]) / d, (m[0][0] * r[1] - m[1][0] * r[0]) / d]
}

/// Ray `x(t, y)` and momentum `ξ(t, y)` of Hamilton's equations for `|ξ|²/2 + |x|²/2`.
pub fn hamilton_flow(t: f64, y: &[f64], s0: &InitialPhase) -> (Vec<f64>, Vec<f64>) {
    let (x, xi) = flow2(t, &pad(y), s0);
    (x[..y.len()].to_vec(), xi[..y.len()].to_vec())
}

/// `ΔS(t, x(t, y))` from the ray derivatives at the launch point.
pub fn laplacian_along_ray(t: f64, y: &[f64], s0: &InitialPhase) -> f64 {
    let (dx, dxi) = ray_derivatives(t, &pad(y), s0, y.len());
    lap_from(&dx, &dxi, y.len())
}

/// `J_t(y) = det(I cos t + ∇²S₀(y) sin t)`.
pub fn jacobian(t: f64, y: &[f64], s0: &InitialPhase) -> f64 {
    det(&ray_derivatives(t, &pad(y), s0, y.len()).0)
}

/// Action `z(t, y)` by RK4 on `∂_t z = |ξ|²/2 - |x|²/2`, `z(0, y) = S₀(y)`.
pub fn action_along_ray(t: f64, y: &[f64], s0: &InitialPhase, steps: usize) -> f64 {
    let p = pad(y);
    let rate = |tau: f64| {
        let (x, xi) = flow2(tau, &p, s0);
        0.5 * (dot(&xi, &xi) - dot(&x, &x))
    };
    let steps = steps.max(1);
    let h = t / steps as f64;
    let mut z = s0.value(y);
    for k in 0..steps {
        let t0 = k as f64 * h;
        let (k1, k2, k4) = (rate(t0), rate(t0 + 0.5 * h), rate(t0 + h));
        z += h / 6.0 * (k1 + 4.0 * k2 + k4);
    }
    z
}

/// Closed-form action along the ray from `y`.
pub fn action_closed_form(t: f64, y: &[f64], s0: &InitialPhase) -> f64 {
    let p = pad(y);
    let g = s0.grad2(&p);
    let (s2, c2) = (2.0 * t).sin_cos();
    s0.value(y) + (dot(&g, &g) - dot(&p, &p)) * s2 / 4.0 + dot(&p, &g) * (c2 - 1.0) / 2.0
}

fn invert2(t: f64, x: &V2, s0: &InitialPhase, n: usize, guess: &V2, tol: f64, floor: f64) -> Result<V2> {
    let mut y = *guess;
    let scale = 1.0 + dot(x, x).sqrt();
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let (xf, _) = flow2(t, &y, s0);
        let r = [xf[0] - x[0], if n > 1 { xf[1] - x[1] } else { 0.0 }];
        let norm = dot(&r, &r).sqrt();
        if norm <= 8.0 * f64::EPSILON * scale && norm >= residual {
            return Ok(y);
        }
        let converged = norm < tol;
        residual = norm;
        let (dx, _) = ray_derivatives(t, &y, s0, n);
        let d = det(&dx);
        if d.abs() < floor {
            return Err(Error::SingularJacobian { det: d });
        }
        let step = solve2(&dx, &r);
        y[0] -= step[0];
        y[1] -= step[1];
        if converged {
            return Ok(y);
        }
    }
    let (xf, _) = flow2(t, &y, s0);
    let r = [xf[0] - x[0], xf[1] - x[1]];
    let norm = dot(&r, &r).sqrt();
    if norm < tol {
        return Ok(y);
    }
    Err(Error::NoConvergence { iterations: MAX_NEWTON_ITERATIONS, residual: norm })
}

/// Launch point `y` with `x(t, y) = x`, by Newton's method from `guess`.
pub fn invert_ray_map(t: f64, x: &[f64], s0: &InitialPhase, guess: &[f64], tol: f64) -> Result<Vec<f64>> {
    invert_ray_map_with_floor(t, x, s0, guess, tol, DEFAULT_JACOBIAN_FLOOR)
}

pub fn invert_ray_map_with_floor(t: f64, x: &[f64], s0: &InitialPhase, guess: &[f64], tol: f64, floor: f64) -> Result<Vec<f64>> {
    if x.len() != guess.len() || x.is_empty() || x.len() > 2 {
        return Err(Error::LengthMismatch { expected: x.len(), got: guess.len() });
    }
    let y = invert2(t, &pad(x), s0, x.len(), &pad(guess), tol, floor)?;
    Ok(y[..x.len()].to_vec())
}

/// `S`, `∇S` and `ΔS` on the grid at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseField {
    pub time: f64,
    pub dim_n: usize,
    pub s_values: Vec<f64>,
    /// Flattened `ncols × dim_n`.
    pub grad_s: Vec<f64>,
    pub lap_s: Vec<f64>,
    pub min_jacobian: f64,
    pub caustic_flag: bool,
    /// Ray launch points `y(t, x)`, flattened like `grad_s`.
    pub launch_points: Vec<f64>,
}

impl PhaseField {
    pub fn len(&self) -> usize {
        self.s_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_values.is_empty()
    }

    pub fn grad(&self, col: usize) -> &[f64] {
        &self.grad_s[col * self.dim_n..(col + 1) * self.dim_n]
    }

    pub fn max_grad(&self) -> f64 {
        (0..self.len()).map(|c| self.grad(c).iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max)
    }

    /// `max |∇S(x)| / (1 + |x|)` over the grid.
    pub fn subquadratic_constant(&self, grid: &GridSpec) -> f64 {
        (0..self.len())
            .map(|c| {
                let g = self.grad(c).iter().map(|v| v * v).sum::<f64>().sqrt();
                let r = grid.point(c).iter().map(|v| v * v).sum::<f64>().sqrt();
                g / (1.0 + r)
            })
            .fold(0.0, f64::max)
    }
}

/// Tolerance of the grid inversions.
pub const INVERSION_TOL: f64 = 1e-12;

/// Phase on the grid at time `t`; a caustic is flagged instead of reported.
///
/// `guesses` (flattened launch points) seeds Newton; the cold start is `y = x`.
pub fn phase_on_grid_lenient(t: f64, grid: &GridSpec, s0: &InitialPhase, floor: f64, guesses: Option<&[f64]>) -> Result<PhaseField> {
    grid.validate()?;
    s0.validate(grid.dim_n)?;
    let n = grid.dim_n;
    let ncols = grid.ncols();
    if let Some(g) = guesses {
        if g.len() != ncols * n {
            return Err(Error::LengthMismatch { expected: ncols * n, got: g.len() });
        }
    }
    let solved: Vec<Option<(V2, f64, f64, V2, f64)>> = (0..ncols)
        .into_par_iter()
        .map(|col| {
            let x = pad(&grid.point(col));
            if t == 0.0 {
                let (dx, dxi) = ray_derivatives(0.0, &x, s0, n);
                let lap = lap_from(&dx, &dxi, n);
                return Some((x, s0.value(&x[..n]), 1.0, s0.grad2(&x), lap));
            }
            let guess = guesses.map(|g| pad(&g[col * n..(col + 1) * n])).unwrap_or(x);
            let y = invert2(t, &x, s0, n, &guess, INVERSION_TOL * (1.0 + dot(&x, &x).sqrt()), floor)
                .or_else(|_| invert2(t, &x, s0, n, &x, INVERSION_TOL * (1.0 + dot(&x, &x).sqrt()), floor))
                .ok()?;
            let (_, xi) = flow2(t, &y, s0);
            let (dx, dxi) = ray_derivatives(t, &y, s0, n);
            Some((y, action_closed_form(t, &y[..n], s0), det(&dx), xi, lap_from(&dx, &dxi, n)))
        })
        .collect();
    let mut field = PhaseField {
        time: t,
        dim_n: n,
        s_values: vec![f64::NAN; ncols],
        grad_s: vec![f64::NAN; ncols * n],
        lap_s: vec![f64::NAN; ncols],
        min_jacobian: f64::INFINITY,
        caustic_flag: false,
        launch_points: vec![f64::NAN; ncols * n],
    };
    for (col, entry) in solved.into_iter().enumerate() {
        match entry {
            Some((y, s, j, xi, lap)) => {
                field.s_values[col] = s;
                field.lap_s[col] = lap;
                field.min_jacobian = field.min_jacobian.min(j);
                field.grad_s[col * n..(col + 1) * n].copy_from_slice(&xi[..n]);
                field.launch_points[col * n..(col + 1) * n].copy_from_slice(&y[..n]);
            }
            None => field.caustic_flag = true,
        }
    }
    if field.min_jacobian <= floor {
        field.caustic_flag = true;
    }
    Ok(field)
}

fn lap_from(dx: &M2, dxi: &M2, n: usize) -> f64 {
    if n == 1 {
        return dxi[0][0] / dx[0][0];
    }
    let d = det(dx);
    let inv = [[dx[1][1] / d, -dx[0][1] / d], [-dx[1][0] / d, dx[0][0] / d]];
    (0..2).map(|i| (0..2).map(|k| dxi[i][k] * inv[k][i]).sum::<f64>()).sum()
}

/// `S(t, ·)`, `∇S(t, ·)` and `ΔS(t, ·)` on the grid, erroring at a caustic.
pub fn phase_on_grid(t: f64, grid: &GridSpec, s0: &InitialPhase) -> Result<PhaseField> {
    strict(phase_on_grid_lenient(t, grid, s0, DEFAULT_JACOBIAN_FLOOR, None)?)
}

fn strict(field: PhaseField) -> Result<PhaseField> {
    if field.caustic_flag {
        return Err(Error::CausticReached { t: field.time });
    }
    Ok(field)
}

fn min_jacobian_over(t: f64, points: &[V2], s0: &InitialPhase, n: usize) -> f64 {
    points.iter().map(|y| det(&ray_derivatives(t, y, s0, n).0)).fold(f64::INFINITY, f64::min)
}

/// First time at which `min_y J_t(y)` over the grid drops to `floor`, or `+∞` if none before π.
pub fn caustic_time(s0: &InitialPhase, grid: &GridSpec, jacobian_floor: f64) -> f64 {
    let n = grid.dim_n;
    let points: Vec<V2> = (0..grid.ncols()).map(|c| pad(&grid.point(c))).collect();
    let hit = |t: f64| min_jacobian_over(t, &points, s0, n) <= jacobian_floor;
    let scan = 0.01;
    let mut lo = 0.0;
    let mut hi = None;
    let mut k = 1;
    while (k as f64) * scan <= std::f64::consts::PI {
        let t = k as f64 * scan;
        if hit(t) {
            hi = Some(t);
            break;
        }
        lo = t;
        k += 1;
    }
    match hi {
        Some(hi) => bisect(hit, lo, hi),
        None if hit(std::f64::consts::PI) => bisect(hit, lo, std::f64::consts::PI),
        None => f64::INFINITY,
    }
}

fn bisect(hit: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        if hit(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Time-indexed source of phase fields for the envelope solvers.
pub trait PhaseProvider {
    fn phase_at(&mut self, t: f64) -> Result<Arc<PhaseField>>;

    /// Time at which the phase ceases to be smooth.
    fn caustic_time(&self) -> f64 {
        f64::INFINITY
    }
}

/// Phase from the characteristic flow, with Newton continuation between calls.
#[derive(Debug, Clone)]
pub struct EikonalPhase {
    grid: GridSpec,
    s0: InitialPhase,
    floor: f64,
    cache: Vec<Arc<PhaseField>>,
}

const PHASE_CACHE: usize = 6;

impl EikonalPhase {
    pub fn new(grid: GridSpec, s0: InitialPhase, floor: f64) -> Result<Self> {
        grid.validate()?;
        s0.validate(grid.dim_n)?;
        if !(floor > 0.0 && floor < 1.0) {
            return Err(Error::InvalidParams(format!("jacobian floor {floor} must lie in (0, 1)")));
        }
        Ok(EikonalPhase { grid, s0, floor, cache: Vec::new() })
    }

    pub fn initial_phase(&self) -> &InitialPhase {
        &self.s0
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }
}

impl PhaseProvider for EikonalPhase {
    fn phase_at(&mut self, t: f64) -> Result<Arc<PhaseField>> {
        if let Some(p) = self.cache.iter().find(|p| p.time == t) {
            return Ok(p.clone());
        }
        let guess = self
            .cache
            .iter()
            .min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs()))
            .map(|p| p.launch_points.clone());
        let field = strict(phase_on_grid_lenient(t, &self.grid, &self.s0, self.floor, guess.as_deref())?)?;
        let field = Arc::new(field);
        if self.cache.len() == PHASE_CACHE {
            self.cache.remove(0);
        }
        self.cache.push(field.clone());
        Ok(field)
    }

    fn caustic_time(&self) -> f64 {
        caustic_time(&self.s0, &self.grid, self.floor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn catalog() -> Vec<InitialPhase> {
        catalog_n(2)
    }

    fn catalog_n(n: usize) -> Vec<InitialPhase> {
        vec![
            InitialPhase::Zero,
            InitialPhase::Linear { b: [0.5, -0.3][..n].to_vec() },
            InitialPhase::Quadratic { c: -0.5 },
            InitialPhase::Quadratic { c: 0.7 },
            InitialPhase::GaussianBump { amplitude: 0.4, width: 1.3 },
        ]
    }

    fn grid(n: usize, nx: usize) -> GridSpec {
        GridSpec::new(n, 1, nx, 12.0, 4, 9).unwrap()
    }

    /// RK4 on Hamilton's equations `x' = ξ`, `ξ' = -x`.
    fn rk4_flow(t: f64, y: &[f64], s0: &InitialPhase, steps: usize) -> (Vec<f64>, Vec<f64>) {
        let mut x = y.to_vec();
        let mut xi = s0.gradient(y);
        let h = t / steps as f64;
        for _ in 0..steps {
            let k1 = (xi.clone(), x.iter().map(|v| -v).collect::<Vec<_>>());
            let add = |a: &[f64], b: &[f64], s: f64| a.iter().zip(b).map(|(a, b)| a + s * b).collect::<Vec<_>>();
            let (x2, xi2) = (add(&x, &k1.0, h / 2.0), add(&xi, &k1.1, h / 2.0));
            let k2 = (xi2.clone(), x2.iter().map(|v| -v).collect::<Vec<_>>());
            let (x3, xi3) = (add(&x, &k2.0, h / 2.0), add(&xi, &k2.1, h / 2.0));
            let k3 = (xi3.clone(), x3.iter().map(|v| -v).collect::<Vec<_>>());
            let (x4, xi4) = (add(&x, &k3.0, h), add(&xi, &k3.1, h));
            let k4 = (xi4.clone(), x4.iter().map(|v| -v).collect::<Vec<_>>());
            for i in 0..x.len() {
                x[i] += h / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
                xi[i] += h / 6.0 * (k1.1[i] + 2.0 * k2.1[i] + 2.0 * k3.1[i] + k4.1[i]);
            }
        }
        (x, xi)
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let h = 1e-5;
        for s0 in catalog() {
            for p in [[0.3, -0.7], [1.4, 0.2], [-2.0, 1.1]] {
                let g = s0.gradient(&p);
                let hs = s0.hessian(&p);
                for i in 0..2 {
                    let (mut a, mut b) = (p, p);
                    a[i] += h;
                    b[i] -= h;
                    assert_abs_diff_eq!(g[i], (s0.value(&a) - s0.value(&b)) / (2.0 * h), epsilon = 1e-6);
                    let (ga, gb) = (s0.gradient(&a), s0.gradient(&b));
                    for j in 0..2 {
                        assert_abs_diff_eq!(hs[j * 2 + i], (ga[j] - gb[j]) / (2.0 * h), epsilon = 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn flow_examples() {
        let (x, xi) = hamilton_flow(FRAC_PI_2, &[1.0], &InitialPhase::Zero);
        assert_abs_diff_eq!(x[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(xi[0], -1.0, epsilon = 1e-15);
        for t in [0.3, 1.2, 2.5] {
            let (x, xi) = hamilton_flow(t, &[0.0], &InitialPhase::Linear { b: vec![2.0] });
            assert_abs_diff_eq!(x[0], 2.0 * t.sin(), epsilon = 1e-15);
            assert_abs_diff_eq!(xi[0], 2.0 * t.cos(), epsilon = 1e-15);
        }
        for s0 in catalog() {
            let y = [0.8, -0.4];
            let (x, xi) = hamilton_flow(1.1, &y, &s0);
            let (xr, xir) = rk4_flow(1.1, &y, &s0, 2000);
            for i in 0..2 {
                assert_abs_diff_eq!(x[i], xr[i], epsilon = 1e-10);
                assert_abs_diff_eq!(xi[i], xir[i], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn jacobian_examples() {
        for t in [0.2, 0.9, 1.4] {
            assert_abs_diff_eq!(jacobian(t, &[0.3], &InitialPhase::Zero), t.cos(), epsilon = 1e-15);
            assert_abs_diff_eq!(jacobian(t, &[0.3, 1.0], &InitialPhase::Zero), t.cos().powi(2), epsilon = 1e-15);
            let c = -0.6;
            assert_abs_diff_eq!(jacobian(t, &[2.0], &InitialPhase::Quadratic { c }), t.cos() + c * t.sin(), epsilon = 1e-15);
        }
        for s0 in catalog() {
            assert_eq!(jacobian(0.0, &[0.4, -1.0], &s0), 1.0);
        }
    }

    #[test]
    fn action_examples() {
        // S = -x² tan t / 2 evaluated at x = cos t
        let t = FRAC_PI_4;
        let x = t.cos();
        let z = action_along_ray(t, &[1.0], &InitialPhase::Zero, 64);
        assert_abs_diff_eq!(z, -0.5 * x * x * t.tan(), epsilon = 1e-10);
        for s0 in catalog() {
            assert_eq!(action_along_ray(0.0, &[0.7], &s0, 10), s0.value(&[0.7]));
            assert_eq!(action_closed_form(0.0, &[0.7], &s0), s0.value(&[0.7]));
        }
        // Riccati solution of the quadratic phase
        let c: f64 = 0.4;
        for (t, y) in [(0.5, 1.3), (1.0, -0.6), (1.9, 2.0)] {
            let s0 = InitialPhase::Quadratic { c };
            let (xt, _) = hamilton_flow(t, &[y], &s0);
            let riccati = 0.5 * (c.atan() - t).tan() * xt[0] * xt[0];
            let steps = (ACTION_STEPS_PER_UNIT as f64 * t).ceil() as usize;
            assert_abs_diff_eq!(action_along_ray(t, &[y], &s0, steps), riccati, epsilon = 1e-8);
            assert_abs_diff_eq!(action_closed_form(t, &[y], &s0), riccati, epsilon = 1e-12);
        }
    }

    #[test]
    fn closed_form_action_matches_rk4_on_catalog() {
        for s0 in catalog() {
            for y in [[0.5, 0.5], [-2.0, 1.0]] {
                let t = 1.3;
                let rk = action_along_ray(t, &y, &s0, (ACTION_STEPS_PER_UNIT as f64 * t) as usize);
                assert_abs_diff_eq!(rk, action_closed_form(t, &y, &s0), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn inversion_examples() {
        let t = 0.7;
        let y = invert_ray_map(t, &[1.5], &InitialPhase::Zero, &[-3.0], 1e-12).unwrap();
        assert_abs_diff_eq!(y[0], 1.5 / t.cos(), epsilon = 1e-13);
        let y = invert_ray_map(t, &[1.5, -0.5], &InitialPhase::Linear { b: vec![0.4] }, &[0.0, 0.0], 1e-12).unwrap();
        assert_abs_diff_eq!(y[0], (1.5 - 0.4 * t.sin()) / t.cos(), epsilon = 1e-13);
        assert_abs_diff_eq!(y[1], -0.5 / t.cos(), epsilon = 1e-13);
        let bump = InitialPhase::GaussianBump { amplitude: 0.5, width: 1.0 };
        for x in [-3.0, -0.4, 0.0, 1.1, 4.0] {
            let y = invert_ray_map(t, &[x], &bump, &[x], 1e-12).unwrap();
            assert!((hamilton_flow(t, &y, &bump).0[0] - x).abs() < 1e-12);
        }
    }

    #[test]
    fn inversion_errors() {
        // J = cos t = 0.05 below the default floor
        let t = (0.05f64).acos();
        assert!(matches!(invert_ray_map(t, &[1.0], &InitialPhase::Zero, &[1.0], 1e-12), Err(Error::SingularJacobian { .. })));
        assert!(invert_ray_map(t, &[1.0], &InitialPhase::Zero, &[1.0, 0.0], 1e-12).is_err());
    }

    #[test]
    fn phase_of_zero_data_is_closed_form() {
        let g = grid(1, 256);
        for t in [0.2, FRAC_PI_4, 0.5, 1.0] {
            let p = phase_on_grid(t, &g, &InitialPhase::Zero).unwrap();
            assert!(!p.caustic_flag);
            assert_abs_diff_eq!(p.min_jacobian, t.cos(), epsilon = 1e-14);
            for c in 0..g.ncols() {
                let x = g.point(c)[0];
                assert_abs_diff_eq!(p.s_values[c], -0.5 * x * x * t.tan(), epsilon = 1e-10);
                assert_abs_diff_eq!(p.grad_s[c], -x * t.tan(), epsilon = 1e-10);
                assert_abs_diff_eq!(p.lap_s[c], -t.tan(), epsilon = 1e-12);
            }
        }
        let g = GridSpec::new(1, 1, 256, 8.0, 4, 9).unwrap();
        let p = phase_on_grid(FRAC_PI_4, &g, &InitialPhase::Zero).unwrap();
        let c = g.nx / 2 + 16;
        assert_eq!(g.point(c)[0], 1.0);
        assert_abs_diff_eq!(p.s_values[c], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.grad_s[c], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.lap_s[c], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn phase_at_time_zero_is_initial_phase() {
        for n in [1, 2] {
            let g = grid(n, 16);
            for s0 in catalog_n(n) {
                let p = phase_on_grid(0.0, &g, &s0).unwrap();
                for c in 0..g.ncols() {
                    assert_eq!(p.s_values[c], s0.value(&g.point(c)));
                }
            }
        }
    }

    fn eikonal_residual(s0: &InitialPhase, g: &GridSpec, t: f64) -> f64 {
        let h = 1e-3;
        let at = |s: f64| phase_on_grid(s, g, s0).unwrap();
        let (m2, m1, p1, p2) = (at(t - 2.0 * h), at(t - h), at(t + h), at(t + 2.0 * h));
        let p = at(t);
        (0..g.ncols())
            .map(|c| {
                let dt = (m2.s_values[c] - 8.0 * m1.s_values[c] + 8.0 * p1.s_values[c] - p2.s_values[c]) / (12.0 * h);
                let grad2: f64 = p.grad(c).iter().map(|v| v * v).sum();
                let x2: f64 = g.point(c).iter().map(|v| v * v).sum();
                (dt + 0.5 * grad2 + 0.5 * x2).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn eikonal_residual_is_small_for_catalog() {
        for (n, nx) in [(1, 128), (2, 32)] {
            let g = grid(n, nx);
            for s0 in catalog_n(n) {
                let tc = caustic_time(&s0, &g, DEFAULT_JACOBIAN_FLOOR);
                for t in [0.1, 0.5f64.min(tc - 0.1)] {
                    let r = eikonal_residual(&s0, &g, t);
                    assert!(r < 1e-6, "{s0:?} n = {n} t = {t}: residual {r:e}");
                }
            }
        }
        assert!(eikonal_residual(&InitialPhase::Zero, &grid(1, 256), 0.5) < 1e-8);
    }

    #[test]
    fn gradient_matches_finite_differences_of_s() {
        let g = grid(1, 512);
        let s0 = InitialPhase::GaussianBump { amplitude: 0.6, width: 1.0 };
        let p = phase_on_grid(0.6, &g, &s0).unwrap();
        let dx = g.dx();
        for c in 1..g.ncols() - 1 {
            let fd = (p.s_values[c + 1] - p.s_values[c - 1]) / (2.0 * dx);
            let fd2 = (p.s_values[c + 1] - 2.0 * p.s_values[c] + p.s_values[c - 1]) / (dx * dx);
            assert!((fd - p.grad_s[c]).abs() < 5.0 * dx * dx, "col {c}");
            assert!((fd2 - p.lap_s[c]).abs() < 5.0 * dx * dx, "col {c}");
        }
        let k = p.subquadratic_constant(&g);
        assert!(k.is_finite() && k < 2.0);
    }

    #[test]
    fn laplacian_in_two_dimensions() {
        let g = grid(2, 32);
        let s0 = InitialPhase::GaussianBump { amplitude: 0.5, width: 1.5 };
        let t = 0.4;
        let p = phase_on_grid(t, &g, &s0).unwrap();
        let h = 1e-4;
        for c in [100, 300, 528, 700] {
            let x = g.point(c);
            let grad_at = |dx: f64, dy: f64| {
                let q = [x[0] + dx, x[1] + dy];
                let y = invert_ray_map(t, &q, &s0, &q, 1e-13).unwrap();
                hamilton_flow(t, &y, &s0).1
            };
            let lap = (grad_at(h, 0.0)[0] - grad_at(-h, 0.0)[0] + grad_at(0.0, h)[1] - grad_at(0.0, -h)[1]) / (2.0 * h);
            assert_abs_diff_eq!(p.lap_s[c], lap, epsilon = 1e-7);
        }
    }

    #[test]
    fn caustic_time_examples() {
        let g = grid(1, 64);
        assert_abs_diff_eq!(caustic_time(&InitialPhase::Zero, &g, 0.1), 0.1f64.acos(), epsilon = 1e-6);
        assert_abs_diff_eq!(caustic_time(&InitialPhase::Zero, &g, 0.1), 1.4706289, epsilon = 1e-6);
        // cos t + sin t = √2 sin(t + π/4)
        let root = 3.0 * FRAC_PI_4 - (0.1 / 2f64.sqrt()).asin();
        assert_abs_diff_eq!(caustic_time(&InitialPhase::Quadratic { c: 1.0 }, &g, 0.1), root, epsilon = 1e-6);
        let root = (0.1 / 2f64.sqrt()).acos() - FRAC_PI_4;
        let tc = caustic_time(&InitialPhase::Quadratic { c: -1.0 }, &g, 0.1);
        assert_abs_diff_eq!(tc, root, epsilon = 1e-6);
        assert!(tc < FRAC_PI_4);
        assert!(caustic_time(&InitialPhase::Linear { b: vec![1.0] }, &g, 0.1) < PI);
    }

    #[test]
    fn phase_past_caustic_is_reported() {
        let g = grid(1, 32);
        assert!(matches!(phase_on_grid(1.5, &g, &InitialPhase::Zero), Err(Error::CausticReached { .. })));
        let p = phase_on_grid_lenient(1.5, &g, &InitialPhase::Zero, 0.1, None).unwrap();
        assert!(p.caustic_flag);
        let mut provider = EikonalPhase::new(g, InitialPhase::Zero, 0.1).unwrap();
        assert!(matches!(provider.phase_at(1.5), Err(Error::CausticReached { .. })));
    }

    #[test]
    fn provider_matches_direct_evaluation() {
        let g = grid(1, 64);
        let s0 = InitialPhase::GaussianBump { amplitude: 0.3, width: 1.0 };
        let mut provider = EikonalPhase::new(g, s0.clone(), 0.1).unwrap();
        for k in 0..20 {
            let t = 0.05 * k as f64;
            let a = provider.phase_at(t).unwrap();
            let b = phase_on_grid(t, &g, &s0).unwrap();
            for c in 0..g.ncols() {
                assert_abs_diff_eq!(a.s_values[c], b.s_values[c], epsilon = 1e-12);
            }
        }
        assert!(EikonalPhase::new(g, s0, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn inverse_and_forward_compose(x in -6.0f64..6.0, x2 in -6.0f64..6.0, t in 0.0f64..0.8, a in -0.5f64..0.5) {
            let s0 = InitialPhase::GaussianBump { amplitude: a, width: 1.2 };
            let y = invert_ray_map(t, &[x, x2], &s0, &[x, x2], 1e-12).unwrap();
            let (xf, _) = hamilton_flow(t, &y, &s0);
            prop_assert!(((xf[0] - x).powi(2) + (xf[1] - x2).powi(2)).sqrt() < 1e-12);
        }

        #[test]
        fn jacobian_is_one_at_time_zero(y in -5.0f64..5.0, c in -2.0f64..2.0, a in -1.0f64..1.0) {
            prop_assert_eq!(jacobian(0.0, &[y], &InitialPhase::Quadratic { c }), 1.0);
            prop_assert_eq!(jacobian(0.0, &[y, -y], &InitialPhase::GaussianBump { amplitude: a, width: 0.8 }), 1.0);
        }

        #[test]
        fn flow_conserves_energy(y in -4.0f64..4.0, c in -2.0f64..2.0, t in 0.0f64..3.0) {
            let s0 = InitialPhase::Quadratic { c };
            let (x, xi) = hamilton_flow(t, &[y], &s0);
            let e0 = y * y + (c * y).powi(2);
            prop_assert!((x[0] * x[0] + xi[0] * xi[0] - e0).abs() < 1e-10 * (1.0 + e0));
        }
    }
}
