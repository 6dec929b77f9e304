//! Grids, fields in the mixed (physical `x` × Hermite `z`) representation,
//! spectral `x`-differentiation on the periodic box and the `B^m` norms.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transverse::{lambda_weights, HermiteBasis};

/// Edge-to-peak amplitude ratio above which the periodic box is deemed too small.
pub const BOUNDARY_DECAY_LIMIT: f64 = 1e-8;
/// Largest admissible mass fraction in the top quarter of Hermite modes.
pub const SPECTRAL_DECAY_LIMIT: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Discretization of the periodic box `[-L, L)^n` times the Hermite truncation in `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim_n: usize,
    pub dim_d: usize,
    pub nx: usize,
    pub half_width: f64,
    pub num_modes: usize,
    pub num_quad: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { dim_n: 1, dim_d: 1, nx: 256, half_width: 12.0, num_modes: 32, num_quad: 96 }
    }
}

impl GridSpec {
    pub fn new(dim_n: usize, dim_d: usize, nx: usize, half_width: f64, num_modes: usize, num_quad: usize) -> Result<Self> {
        let g = GridSpec { dim_n, dim_d, nx, half_width, num_modes, num_quad };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGrid(m));
        if !(1..=2).contains(&self.dim_n) || !(1..=2).contains(&self.dim_d) || self.dim_n + self.dim_d > 3 {
            return bad(format!("dimensions n = {}, d = {} not in {{1, 2}} with n + d <= 3", self.dim_n, self.dim_d));
        }
        if self.nx < 16 || !self.nx.is_power_of_two() {
            return bad(format!("nx = {} must be a power of two >= 16", self.nx));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return bad(format!("half_width = {} must be positive", self.half_width));
        }
        if self.num_modes == 0 {
            return bad("num_modes must be positive".into());
        }
        if self.num_quad < 2 * self.num_modes + 1 {
            return Err(Error::InsufficientQuadrature { need: 2 * self.num_modes + 1, got: self.num_quad });
        }
        Ok(())
    }

    /// Number of x-grid points (columns).
    pub fn ncols(&self) -> usize {
        self.nx.pow(self.dim_n as u32)
    }

    /// Number of Hermite coefficients per column.
    pub fn ncoef(&self) -> usize {
        self.num_modes.pow(self.dim_d as u32)
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.nx as f64
    }

    /// Volume element `Δx^n`.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim_n as i32)
    }

    /// Coordinates along one axis: `x_j = -L + j Δx`.
    pub fn axis(&self) -> Vec<f64> {
        (0..self.nx).map(|j| -self.half_width + j as f64 * self.dx()).collect()
    }

    /// Coordinates of column `col` (row-major over axes).
    pub fn point(&self, col: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dim_n];
        let mut idx = col;
        for a in (0..self.dim_n).rev() {
            p[a] = -self.half_width + (idx % self.nx) as f64 * self.dx();
            idx /= self.nx;
        }
        p
    }

    /// All column coordinates, flattened `ncols × dim_n`.
    pub fn points(&self) -> Vec<f64> {
        (0..self.ncols()).flat_map(|c| self.point(c)).collect()
    }

    /// Largest resolved wavenumber magnitude `|ξ|`.
    pub fn xi_max(&self) -> f64 {
        (self.dim_n as f64).sqrt() * PI / self.dx()
    }

    /// Same box, twice the points per axis.
    pub fn refined(&self) -> GridSpec {
        GridSpec { nx: 2 * self.nx, ..*self }
    }

    pub fn build_basis(&self) -> Result<HermiteBasis> {
        HermiteBasis::new(self.dim_d, self.num_modes, self.num_quad)
    }

    pub fn check_basis(&self, basis: &HermiteBasis) -> Result<()> {
        if basis.dim_d() != self.dim_d || basis.num_modes() != self.num_modes || basis.num_quad() != self.num_quad {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Complex amplitudes indexed by x-column (rows) and Hermite coefficient (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: GridSpec,
    pub data: Array2<Complex64>,
    pub time: f64,
}

impl Field {
    pub fn zeros(grid: GridSpec, time: f64) -> Self {
        Field { data: Array2::zeros((grid.ncols(), grid.ncoef())), grid, time }
    }

    pub fn from_data(grid: GridSpec, data: Array2<Complex64>, time: f64) -> Result<Self> {
        let expected = (grid.ncols(), grid.ncoef());
        if data.dim() != expected {
            return Err(Error::LengthMismatch { expected: expected.0 * expected.1, got: data.len() });
        }
        Ok(Field { grid, data, time })
    }

    /// `∫|u|² dx dz` from the coefficients (Parseval in `z`, rectangle rule in `x`).
    pub fn mass(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    /// `∫|u|² dx dz` evaluated on the transform nodes.
    pub fn mass_on_nodes(&self, basis: &HermiteBasis) -> Result<f64> {
        self.grid.check_basis(basis)?;
        let mut sum = 0.0;
        for col in self.data.rows() {
            let coeffs: Vec<Complex64> = col.to_vec();
            let nodes = crate::transverse::to_node_values(&coeffs, basis)?;
            sum += crate::transverse::node_norm(&nodes, basis)?.powi(2);
        }
        Ok(sum * self.grid.cell_volume())
    }

    pub fn l2_norm(&self) -> f64 {
        self.mass().sqrt()
    }

    /// Mass carried by coefficients other than the transversal ground state.
    pub fn off_ground_mass(&self) -> f64 {
        self.data.slice(ndarray::s![.., 1..]).iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Largest column amplitude on the outermost x-layer over the largest overall.
    pub fn boundary_ratio(&self) -> f64 {
        let g = &self.grid;
        let col_norm: Vec<f64> = self.data.rows().into_iter().map(|r| r.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()).collect();
        let peak = col_norm.iter().cloned().fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let mut edge = 0.0f64;
        for (col, v) in col_norm.iter().enumerate() {
            let mut idx = col;
            let mut on_edge = false;
            for _ in 0..g.dim_n {
                let i = idx % g.nx;
                on_edge |= i == 0 || i == g.nx - 1;
                idx /= g.nx;
            }
            if on_edge {
                edge = edge.max(*v);
            }
        }
        edge / peak
    }

    pub fn check_boundary_decay(&self) -> Result<()> {
        let ratio = self.boundary_ratio();
        if ratio > BOUNDARY_DECAY_LIMIT {
            return Err(Error::BoundaryDecay { ratio, limit: BOUNDARY_DECAY_LIMIT });
        }
        Ok(())
    }

    /// Mass fraction in modes whose index on some axis lies in the top quarter.
    pub fn top_quarter_fraction(&self) -> f64 {
        let g = &self.grid;
        let cutoff = g.num_modes - g.num_modes / 4;
        let total: f64 = self.data.iter().map(|c| c.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let mut top = 0.0;
        for k in 0..g.ncoef() {
            let mut idx = k;
            let mut high = false;
            for _ in 0..g.dim_d {
                high |= idx % g.num_modes >= cutoff;
                idx /= g.num_modes;
            }
            if high {
                top += self.data.column(k).iter().map(|c| c.norm_sqr()).sum::<f64>();
            }
        }
        top / total
    }

    pub fn check_spectral_decay(&self) -> Result<()> {
        let fraction = self.top_quarter_fraction();
        if fraction > SPECTRAL_DECAY_LIMIT {
            return Err(Error::SpectralDecay { fraction, limit: SPECTRAL_DECAY_LIMIT });
        }
        Ok(())
    }

    /// Multiplies each column by the scalar `phase[col]`.
    pub fn scale_columns(&mut self, factors: &[Complex64]) {
        for (mut row, f) in self.data.rows_mut().into_iter().zip(factors) {
            row.mapv_inplace(|c| c * f);
        }
    }

    /// Trigonometric interpolation of every coefficient at arbitrary points
    /// (flattened `npoints × dim_n`). Points are taken modulo the box.
    pub fn interpolate(&self, points: &[f64]) -> Array2<Complex64> {
        let g = &self.grid;
        let n = g.dim_n;
        let npts = points.len() / n;
        let spectral = SpectralX::new(g);
        let mut hat = self.data.clone();
        spectral.forward_all(&mut hat);
        let scale = 1.0 / g.ncols() as f64;
        let mut out = Array2::zeros((npts, g.ncoef()));
        let ks = &spectral.wavenumbers;
        let basis_1d = |x: f64| -> Vec<Complex64> {
            let s = x + g.half_width;
            (0..g.nx)
                .map(|j| {
                    if j == g.nx / 2 {
                        Complex64::new((ks[j] * s).cos(), 0.0)
                    } else {
                        Complex64::from_polar(1.0, ks[j] * s)
                    }
                })
                .collect()
        };
        for p in 0..npts {
            let e: Vec<Vec<Complex64>> = (0..n).map(|a| basis_1d(points[p * n + a])).collect();
            let mut row = out.row_mut(p);
            for col in 0..g.ncols() {
                let w = if n == 1 { e[0][col] } else { e[0][col / g.nx] * e[1][col % g.nx] } * scale;
                for (o, h) in row.iter_mut().zip(hat.row(col)) {
                    *o += h * w;
                }
            }
        }
        out
    }

    fn check_compatible(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if (self.time - other.time).abs() > 1e-9 * self.time.abs().max(1.0) {
            return Err(Error::TimeMismatch(self.time, other.time));
        }
        Ok(())
    }
}

/// FFT machinery along the x-axes of a grid.
pub struct SpectralX {
    grid: GridSpec,
    /// Angular wavenumbers in FFT order.
    pub wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl SpectralX {
    pub fn new(grid: &GridSpec) -> Self {
        let nx = grid.nx;
        let mut planner = FftPlanner::new();
        let dk = PI / grid.half_width;
        let wavenumbers = (0..nx)
            .map(|j| if j < nx / 2 { j as f64 } else { j as f64 - nx as f64 } * dk)
            .collect();
        SpectralX { grid: *grid, wavenumbers, forward: planner.plan_fft_forward(nx), inverse: planner.plan_fft_inverse(nx) }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Unnormalized n-dimensional transform of one x-sampled function (length `ncols`).
    pub fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let nx = self.grid.nx;
        let plan = if inverse { &self.inverse } else { &self.forward };
        match self.grid.dim_n {
            1 => plan.process(buf),
            _ => {
                // rows (axis 1) are contiguous
                plan.process(buf);
                let mut line = vec![ZERO; nx];
                for i1 in 0..nx {
                    for i0 in 0..nx {
                        line[i0] = buf[i0 * nx + i1];
                    }
                    plan.process(&mut line);
                    for i0 in 0..nx {
                        buf[i0 * nx + i1] = line[i0];
                    }
                }
            }
        }
    }

    /// Wavenumber vector of flattened frequency index `col`.
    pub fn wavevector(&self, col: usize) -> [f64; 2] {
        let nx = self.grid.nx;
        match self.grid.dim_n {
            1 => [self.wavenumbers[col], 0.0],
            _ => [self.wavenumbers[col / nx], self.wavenumbers[col % nx]],
        }
    }

    /// Frequency index along `axis` of flattened index `col`.
    pub fn axis_index(&self, col: usize, axis: usize) -> usize {
        let nx = self.grid.nx;
        match (self.grid.dim_n, axis) {
            (1, _) => col,
            (_, 0) => col / nx,
            _ => col % nx,
        }
    }

    /// Forward transform of every coefficient column of `data`.
    pub fn forward_all(&self, data: &mut Array2<Complex64>) {
        self.map_modes(data, false);
    }

    fn map_modes(&self, data: &mut Array2<Complex64>, inverse: bool) {
        let mut buf = vec![ZERO; data.nrows()];
        for mut col in data.axis_iter_mut(Axis(1)) {
            for (b, v) in buf.iter_mut().zip(col.iter()) {
                *b = *v;
            }
            self.transform(&mut buf, inverse);
            for (v, b) in col.iter_mut().zip(&buf) {
                *v = *b;
            }
        }
    }

    /// Multiplier `(i k)^order` along `axis`, with the Nyquist mode removed for odd orders.
    pub fn derivative_symbol(&self, col: usize, axis: usize, order: u32) -> Complex64 {
        let j = self.axis_index(col, axis);
        if order % 2 == 1 && j == self.grid.nx / 2 {
            return ZERO;
        }
        Complex64::new(0.0, self.wavenumbers[j]).powu(order)
    }

    /// Spectral derivative without the decay check.
    pub fn derivative(&self, field: &Field, axis: usize, order: u32) -> Field {
        if order == 0 {
            return field.clone();
        }
        let mut out = field.clone();
        let n = field.grid.ncols();
        let mut buf = vec![ZERO; n];
        let scale = 1.0 / n as f64;
        for mut col in out.data.axis_iter_mut(Axis(1)) {
            for (b, v) in buf.iter_mut().zip(col.iter()) {
                *b = *v;
            }
            self.transform(&mut buf, false);
            for (c, b) in buf.iter_mut().enumerate() {
                *b *= self.derivative_symbol(c, axis, order) * scale;
            }
            self.transform(&mut buf, true);
            for (v, b) in col.iter_mut().zip(&buf) {
                *v = *b;
            }
        }
        out
    }
}

/// Spectral derivative of the given order along an x-axis.
///
/// Refuses fields that do not decay at the box edge, where periodic
/// differentiation would be spurious.
pub fn derivative_x(field: &Field, axis: usize, order: u32) -> Result<Field> {
    if axis >= field.grid.dim_n {
        return Err(Error::InvalidParams(format!("axis {axis} out of range for n = {}", field.grid.dim_n)));
    }
    if order == 0 {
        return Ok(field.clone());
    }
    field.check_boundary_decay()?;
    Ok(SpectralX::new(&field.grid).derivative(field, axis, order))
}

/// Squared `B^m` norm without decay checks.
pub(crate) fn bm_norm_sqr_unchecked(field: &Field, m: u32, basis: &HermiteBasis, spectral: &SpectralX) -> f64 {
    let g = &field.grid;
    let vol = g.cell_volume();
    if m == 0 {
        return field.mass();
    }
    // Σ_{|κ|≤m} ‖∂^κ u‖² through Parseval, one transform per coefficient.
    let n = g.ncols();
    let symbol: Vec<f64> = (0..n)
        .map(|c| {
            let mut s = 0.0;
            match g.dim_n {
                1 => {
                    for a in 0..=m {
                        s += spectral.derivative_symbol(c, 0, a).norm_sqr();
                    }
                }
                _ => {
                    for a in 0..=m {
                        for b in 0..=(m - a) {
                            s += spectral.derivative_symbol(c, 0, a).norm_sqr() * spectral.derivative_symbol(c, 1, b).norm_sqr();
                        }
                    }
                }
            }
            s
        })
        .collect();
    let mut buf = vec![ZERO; n];
    let mut deriv = 0.0;
    for col in field.data.axis_iter(Axis(1)) {
        for (b, v) in buf.iter_mut().zip(col.iter()) {
            *b = *v;
        }
        spectral.transform(&mut buf, false);
        deriv += buf.iter().zip(&symbol).map(|(b, s)| b.norm_sqr() * s).sum::<f64>();
    }
    deriv *= vol / n as f64;

    let lam = lambda_weights(2 * m as i32, basis).expect("non-negative order");
    let mut weight_x = 0.0;
    let mut weight_z = 0.0;
    for (c, row) in field.data.rows().into_iter().enumerate() {
        let r2: f64 = g.point(c).iter().map(|x| x * x).sum();
        let xm = r2.powi(m as i32);
        for (v, l) in row.iter().zip(&lam) {
            let a = v.norm_sqr();
            weight_x += xm * a;
            weight_z += l * a;
        }
    }
    deriv + (weight_x + weight_z) * vol
}

/// `‖u‖_{B^m}`: derivative, `|x|^m` and `Λ_z^m` contributions; `m = 0` is the plain L² norm.
pub fn bm_norm(field: &Field, m: u32, basis: &HermiteBasis) -> Result<f64> {
    field.grid.check_basis(basis)?;
    if m == 0 {
        return Ok(field.l2_norm());
    }
    field.check_boundary_decay()?;
    Ok(bm_norm_sqr_unchecked(field, m, basis, &SpectralX::new(&field.grid)).sqrt())
}

/// `‖f1 - f2‖_{B^m}` for fields on the same grid at the same time.
pub fn bm_error(f1: &Field, f2: &Field, m: u32, basis: &HermiteBasis) -> Result<f64> {
    f1.check_compatible(f2)?;
    f1.grid.check_basis(basis)?;
    f1.check_boundary_decay()?;
    f2.check_boundary_decay()?;
    let diff = Field { grid: f1.grid, data: &f1.data - &f2.data, time: f1.time };
    Ok(bm_norm_sqr_unchecked(&diff, m, basis, &SpectralX::new(&f1.grid)).sqrt())
}

/// Initial amplitude catalog `A_0(x, z)` in the mixed representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialAmplitude {
    /// `a_0(x) ω_0(z)` with a unit-mass Gaussian `a_0` of the given width,
    /// centered at `center` on the first x-axis.
    PolarizedGaussian { width: f64, center: f64 },
    /// Gaussian `a_0(x)` times `(w0 h_0 + w2 h_2)/sqrt(w0² + w2²)` along the first z-axis.
    TwoMode { width: f64, w0: f64, w2: f64 },
    /// Explicit coefficients, row-major `ncols × ncoef`.
    Custom { data: Vec<[f64; 2]> },
}

impl InitialAmplitude {
    pub fn polarized_gaussian() -> Self {
        InitialAmplitude::PolarizedGaussian { width: 1.0, center: 0.0 }
    }

    fn gaussian(width: f64, center: f64, x: &[f64]) -> f64 {
        let n = x.len() as i32;
        let r2: f64 = x.iter().enumerate().map(|(a, v)| if a == 0 { (v - center).powi(2) } else { v * v }).sum();
        (PI * width * width).powf(-0.25 * n as f64) * (-r2 / (2.0 * width * width)).exp()
    }
}

/// Samples the initial amplitude on the grid at time 0.
pub fn sample_initial(amp: &InitialAmplitude, grid: &GridSpec, basis: &HermiteBasis) -> Result<Field> {
    grid.validate()?;
    grid.check_basis(basis)?;
    let mut field = Field::zeros(*grid, 0.0);
    match amp {
        InitialAmplitude::PolarizedGaussian { width, center } => {
            if *width <= 0.0 {
                return Err(Error::CatalogMismatch("gaussian width must be positive".into()));
            }
            for col in 0..grid.ncols() {
                field.data[[col, 0]] = Complex64::new(InitialAmplitude::gaussian(*width, *center, &grid.point(col)), 0.0);
            }
        }
        InitialAmplitude::TwoMode { width, w0, w2 } => {
            if grid.num_modes < 3 {
                return Err(Error::CatalogMismatch("two_mode needs at least 3 Hermite modes".into()));
            }
            let norm = (w0 * w0 + w2 * w2).sqrt();
            if norm == 0.0 || *width <= 0.0 {
                return Err(Error::CatalogMismatch("two_mode needs non-zero weights and positive width".into()));
            }
            // mode 2 on the first transversal axis
            let k2 = 2 * grid.num_modes.pow(grid.dim_d as u32 - 1);
            for col in 0..grid.ncols() {
                let a = InitialAmplitude::gaussian(*width, 0.0, &grid.point(col));
                field.data[[col, 0]] = Complex64::new(a * w0 / norm, 0.0);
                field.data[[col, k2]] = Complex64::new(a * w2 / norm, 0.0);
            }
        }
        InitialAmplitude::Custom { data } => {
            let expected = grid.ncols() * grid.ncoef();
            if data.len() != expected {
                return Err(Error::CatalogMismatch(format!("custom data has {} values, grid needs {expected}", data.len())));
            }
            for (v, d) in field.data.iter_mut().zip(data) {
                *v = Complex64::new(d[0], d[1]);
            }
        }
    }
    Ok(field)
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotSidecar {
    grid: GridSpec,
    time: f64,
}

/// Writes `<stem>.csv` (columns `x, mode_index, re, im`; `x0, x1, ...` when n = 2)
/// and the `<stem>.json` sidecar with the grid and time.
pub fn write_snapshot(field: &Field, dir: &Path, stem: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let g = &field.grid;
    let mut csv = String::new();
    if g.dim_n == 1 {
        csv.push_str("x,mode_index,re,im\n");
    } else {
        csv.push_str("x0,x1,mode_index,re,im\n");
    }
    for (col, row) in field.data.rows().into_iter().enumerate() {
        let p = g.point(col);
        let coords = p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        for (k, v) in row.iter().enumerate() {
            let _ = writeln!(csv, "{coords},{k},{:e},{:e}", v.re, v.im);
        }
    }
    fs::write(dir.join(format!("{stem}.csv")), csv)?;
    let sidecar = SnapshotSidecar { grid: *g, time: field.time };
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

/// Reads a snapshot written by [`write_snapshot`].
pub fn read_snapshot(dir: &Path, stem: &str) -> Result<Field> {
    let sidecar: SnapshotSidecar = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
    let g = sidecar.grid;
    g.validate()?;
    let text = fs::read_to_string(dir.join(format!("{stem}.csv")))?;
    let mut field = Field::zeros(g, sidecar.time);
    let mut count = 0;
    for (i, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })
        };
        if cols.len() != g.dim_n + 3 {
            return Err(Error::Parse { line: i + 1, msg: format!("expected {} columns", g.dim_n + 3) });
        }
        let (col, k) = (count / g.ncoef(), count % g.ncoef());
        if col >= g.ncols() {
            return Err(Error::Parse { line: i + 1, msg: "too many rows".into() });
        }
        field.data[[col, k]] = Complex64::new(parse(cols[g.dim_n + 1])?, parse(cols[g.dim_n + 2])?);
        count += 1;
    }
    if count != g.ncols() * g.ncoef() {
        return Err(Error::LengthMismatch { expected: g.ncols() * g.ncoef(), got: count });
    }
    Ok(field)
}
