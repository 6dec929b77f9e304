//! The cubic nonlinearity, its filtered form `F(θ, Φ) = e^{iθH}(|e^{-iθH}Φ|² e^{-iθH}Φ)`
//! and the θ-average `F_av`, by trapezoid quadrature and by resonant mode sums.

use std::f64::consts::TAU;

use ndarray::{Array2, ArrayView1, ArrayViewMut1, Axis};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::transverse::HermiteBasis;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Pointwise `|u|² u`.
pub fn cubic(values: &[Complex64]) -> Vec<Complex64> {
    values.iter().map(|u| u * u.norm_sqr()).collect()
}

/// Smallest trapezoid size that averages `F(θ, ·)` exactly on the truncated space.
pub fn min_num_theta(basis: &HermiteBasis) -> usize {
    (3 * basis.num_modes() + 1).max(2 * basis.max_level() as usize + 1)
}

pub fn default_num_theta(basis: &HermiteBasis) -> usize {
    (3 * basis.num_modes() + 4).max(2 * basis.max_level() as usize + 2)
}

/// Per-thread scratch buffers for column evaluations.
pub(crate) struct Workspace {
    shifted: Vec<Complex64>,
    nodes: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Workspace {
    pub(crate) fn new(basis: &HermiteBasis) -> Self {
        Workspace {
            shifted: vec![ZERO; basis.num_coefficients()],
            nodes: vec![ZERO; basis.num_node_values()],
            scratch: Vec::new(),
        }
    }
}

/// `e^{-iθl}` for every level `l`.
pub(crate) fn level_phases(theta: f64, basis: &HermiteBasis) -> Vec<Complex64> {
    let th = theta.rem_euclid(TAU);
    (0..=basis.max_level()).map(|l| Complex64::from_polar(1.0, -(th * l as f64).rem_euclid(TAU))).collect()
}

/// Cubic term of the coefficients `coeffs`, projected back onto the basis.
pub(crate) fn cubic_column(coeffs: &[Complex64], out: &mut [Complex64], basis: &HermiteBasis, ws: &mut Workspace) {
    basis.eval_product(coeffs, &mut ws.nodes, &mut ws.scratch);
    for u in ws.nodes.iter_mut() {
        *u *= u.norm_sqr();
    }
    basis.project_product(&ws.nodes, out, &mut ws.scratch);
}

/// `F(θ, ·)` on one column with precomputed level phases.
pub(crate) fn filtered_column(phases: &[Complex64], coeffs: &[Complex64], out: &mut [Complex64], basis: &HermiteBasis, ws: &mut Workspace) {
    let levels = basis.levels();
    for ((s, c), &l) in ws.shifted.iter_mut().zip(coeffs).zip(levels) {
        *s = c * phases[l as usize];
    }
    let shifted = std::mem::take(&mut ws.shifted);
    cubic_column(&shifted, out, basis, ws);
    ws.shifted = shifted;
    for (o, &l) in out.iter_mut().zip(levels) {
        *o *= phases[l as usize].conj();
    }
}

/// Resonant sum `Σ_{p-q+r=m} c_p c̄_q c_r γ[p,q,r,m]` on one column (`d = 1`).
pub(crate) fn resonance_column(coeffs: &[Complex64], out: &mut [Complex64], basis: &HermiteBasis) {
    let quartic = basis.quartic().expect("resonance path needs d = 1");
    let n = basis.num_modes();
    out.fill(ZERO);
    for (p, cp) in coeffs.iter().enumerate() {
        if *cp == ZERO {
            continue;
        }
        let shell = quartic.shell(p);
        for (r, cr) in coeffs.iter().enumerate() {
            if *cr == ZERO {
                continue;
            }
            let cpr = cp * cr;
            let row = &shell[r * n..(r + 1) * n];
            let qmin = (p + r + 1).saturating_sub(n);
            for q in qmin..=(p + r).min(n - 1) {
                let g = row[q];
                if g != 0.0 {
                    out[p + r - q] += cpr * coeffs[q].conj() * g;
                }
            }
        }
    }
}

/// Which nonlinear field to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    /// `F(θ, ·)`.
    Filtered(f64),
    /// `F_av` by resonant sums (`d = 1` only).
    AveragedResonance,
    /// `F_av` by the trapezoid rule in θ with the given number of samples and offset.
    AveragedQuadrature { num_theta: usize, offset: f64 },
}

impl Nonlinearity {
    /// Averaged field with the fastest exact algorithm for the basis.
    pub fn averaged(basis: &HermiteBasis) -> Self {
        if basis.dim_d() == 1 {
            Nonlinearity::AveragedResonance
        } else {
            Nonlinearity::AveragedQuadrature { num_theta: default_num_theta(basis), offset: 0.0 }
        }
    }

    fn check(&self, basis: &HermiteBasis) -> Result<()> {
        match *self {
            Nonlinearity::Filtered(theta) if !theta.is_finite() => {
                Err(Error::InvalidParams(format!("non-finite filter angle {theta}")))
            }
            Nonlinearity::AveragedResonance if basis.dim_d() != 1 => Err(Error::UnsupportedDimension(basis.dim_d())),
            Nonlinearity::AveragedQuadrature { num_theta, .. } if num_theta < min_num_theta(basis) => {
                Err(Error::InsufficientThetaSamples { need: min_num_theta(basis), got: num_theta })
            }
            _ => Ok(()),
        }
    }

    /// Evaluates the field on every row of `data` (rows are x-columns) into `out`.
    pub(crate) fn apply(&self, data: &Array2<Complex64>, out: &mut Array2<Complex64>, basis: &HermiteBasis) -> Result<()> {
        self.check(basis)?;
        if data.ncols() != basis.num_coefficients() || out.dim() != data.dim() {
            return Err(Error::LengthMismatch { expected: basis.num_coefficients(), got: data.ncols() });
        }
        let thetas = self.theta_phases(basis);
        let resonance = matches!(self, Nonlinearity::AveragedResonance);
        out.axis_iter_mut(Axis(0)).into_par_iter().zip(data.axis_iter(Axis(0))).for_each_init(
            || (Workspace::new(basis), vec![ZERO; basis.num_coefficients()], vec![ZERO; basis.num_coefficients()]),
            |(ws, input, acc), (mut o, d)| {
                copy_row(&d, input);
                eval_column(&thetas, resonance, input, acc, basis, ws);
                write_row(acc, &mut o);
            },
        );
        Ok(())
    }

    /// Evaluates the field on a single column of coefficients.
    pub(crate) fn column(&self, coeffs: &[Complex64], out: &mut [Complex64], basis: &HermiteBasis, ws: &mut Workspace) -> Result<()> {
        self.check(basis)?;
        let thetas = self.theta_phases(basis);
        eval_column(&thetas, matches!(self, Nonlinearity::AveragedResonance), coeffs, out, basis, ws);
        Ok(())
    }

    fn theta_phases(&self, basis: &HermiteBasis) -> Vec<Vec<Complex64>> {
        match *self {
            Nonlinearity::Filtered(theta) => vec![level_phases(theta, basis)],
            Nonlinearity::AveragedQuadrature { num_theta, offset } => (0..num_theta)
                .map(|j| level_phases(offset + TAU * j as f64 / num_theta as f64, basis))
                .collect(),
            Nonlinearity::AveragedResonance => Vec::new(),
        }
    }

    /// Evaluates the field on a whole [`Field`].
    pub fn eval(&self, field: &Field, basis: &HermiteBasis) -> Result<Field> {
        field.grid.check_basis(basis)?;
        let mut out = Field::zeros(field.grid, field.time);
        self.apply(&field.data, &mut out.data, basis)?;
        Ok(out)
    }
}

fn eval_column(
    thetas: &[Vec<Complex64>],
    resonance: bool,
    input: &[Complex64],
    acc: &mut [Complex64],
    basis: &HermiteBasis,
    ws: &mut Workspace,
) {
    if resonance {
        resonance_column(input, acc, basis);
    } else if thetas.len() == 1 {
        filtered_column(&thetas[0], input, acc, basis, ws);
    } else {
        let mut sum = vec![ZERO; acc.len()];
        for ph in thetas {
            filtered_column(ph, input, acc, basis, ws);
            for (s, a) in sum.iter_mut().zip(acc.iter()) {
                *s += a;
            }
        }
        let w = 1.0 / thetas.len() as f64;
        for (a, s) in acc.iter_mut().zip(&sum) {
            *a = s * w;
        }
    }
}

fn copy_row(src: &ArrayView1<Complex64>, dst: &mut [Complex64]) {
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        *d = *s;
    }
}

fn write_row(src: &[Complex64], dst: &mut ArrayViewMut1<Complex64>) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = *s;
    }
}

/// `F(θ, Φ)` applied column by column.
pub fn filtered(theta: f64, field: &Field, basis: &HermiteBasis) -> Result<Field> {
    Nonlinearity::Filtered(theta).eval(field, basis)
}

/// `F_av(Φ)` by the `num_theta`-point trapezoid rule on `[0, 2π)`.
pub fn averaged_quadrature(field: &Field, basis: &HermiteBasis, num_theta: usize) -> Result<Field> {
    averaged_quadrature_offset(field, basis, num_theta, 0.0)
}

/// Trapezoid average over the shifted nodes `offset + 2πj/num_theta`.
pub fn averaged_quadrature_offset(field: &Field, basis: &HermiteBasis, num_theta: usize, offset: f64) -> Result<Field> {
    Nonlinearity::AveragedQuadrature { num_theta, offset }.eval(field, basis)
}

/// `F_av(Φ)` by resonant mode sums (`d = 1`).
pub fn averaged_resonance(field: &Field, basis: &HermiteBasis) -> Result<Field> {
    Nonlinearity::AveragedResonance.eval(field, basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn setup(nx: usize, modes: usize) -> (GridSpec, HermiteBasis) {
        let g = GridSpec::new(1, 1, nx, 6.0, modes, 3 * modes).unwrap();
        let b = g.build_basis().unwrap();
        (g, b)
    }

    fn random_field(g: &GridSpec, seed: u64, active: usize) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Field::zeros(*g, 0.0);
        for ((_, k), v) in f.data.indexed_iter_mut() {
            if k < active {
                *v = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        f
    }

    fn max_diff(a: &Field, b: &Field) -> f64 {
        a.data.iter().zip(b.data.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn cubic_examples() {
        assert_eq!(cubic(&[c(0.0, 0.0), c(2.0, 0.0), c(0.0, 1.0)]), vec![c(0.0, 0.0), c(8.0, 0.0), c(0.0, 1.0)]);
    }

    #[test]
    fn polarized_input_gives_ground_state_coefficient() {
        let (g, b) = setup(16, 12);
        let mut f = Field::zeros(g, 0.0);
        for col in 0..g.ncols() {
            f.data[[col, 0]] = c(0.3 + 0.1 * col as f64, -0.2);
        }
        let gamma = (2.0 * PI).powf(-0.5);
        for theta in [0.0, 0.4, 2.0, -3.1] {
            let out = filtered(theta, &f, &b).unwrap();
            for col in 0..g.ncols() {
                let phi = f.data[[col, 0]];
                let expected = phi * phi.norm_sqr() * gamma;
                assert_abs_diff_eq!((out.data[[col, 0]] - expected).norm(), 0.0, epsilon = 1e-13);
                // mode 2 carries γ[0,0,0,2] e^{2iθ} |φ|²φ
                let m2 = phi * phi.norm_sqr() * b.quartic().unwrap().get(0, 0, 0, 2) * Complex64::from_polar(1.0, 2.0 * theta);
                assert_abs_diff_eq!((out.data[[col, 2]] - m2).norm(), 0.0, epsilon = 1e-13);
            }
        }
        for avg in [averaged_resonance(&f, &b).unwrap(), averaged_quadrature(&f, &b, default_num_theta(&b)).unwrap()] {
            for col in 0..g.ncols() {
                let phi = f.data[[col, 0]];
                assert_abs_diff_eq!((avg.data[[col, 0]] - phi * phi.norm_sqr() * gamma).norm(), 0.0, epsilon = 1e-13);
                for k in 1..12 {
                    assert!(avg.data[[col, k]].norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn single_mode_resonance() {
        let (g, b) = setup(16, 8);
        for k in 0..8 {
            let mut f = Field::zeros(g, 0.0);
            f.data[[3, k]] = c(0.7, 0.4);
            let out = averaged_resonance(&f, &b).unwrap();
            let ck = f.data[[3, k]];
            let expected = ck * ck.norm_sqr() * b.quartic().unwrap().get(k, k, k, k);
            assert_abs_diff_eq!((out.data[[3, k]] - expected).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn resonance_on_modes_zero_and_two_by_brute_force() {
        let (g, b) = setup(16, 8);
        let q = b.quartic().unwrap();
        let f = {
            let mut f = Field::zeros(g, 0.0);
            for col in 0..g.ncols() {
                f.data[[col, 0]] = c(0.5, 0.1 * col as f64);
                f.data[[col, 2]] = c(-0.3, 0.2);
            }
            f
        };
        let out = averaged_resonance(&f, &b).unwrap();
        for col in [0, 7] {
            let cf = |k: usize| f.data[[col, k]];
            for m in 0..8 {
                let mut expected = c(0.0, 0.0);
                for p in [0, 2] {
                    for qq in [0, 2] {
                        for r in [0, 2] {
                            if p + r == qq + m {
                                expected += cf(p) * cf(qq).conj() * cf(r) * q.get(p, qq, r, m);
                            }
                        }
                    }
                }
                assert_abs_diff_eq!((out.data[[col, m]] - expected).norm(), 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let (g, b) = setup(16, 6);
        let z = Field::zeros(g, 0.0);
        assert_eq!(filtered(0.3, &z, &b).unwrap(), z);
        assert_eq!(averaged_resonance(&z, &b).unwrap(), z);
        assert_eq!(averaged_quadrature(&z, &b, min_num_theta(&b)).unwrap(), z);
    }

    #[test]
    fn errors() {
        let (g, b) = setup(16, 6);
        let f = random_field(&g, 1, 6);
        assert!(matches!(
            averaged_quadrature(&f, &b, min_num_theta(&b) - 1),
            Err(Error::InsufficientThetaSamples { .. })
        ));
        let g2 = GridSpec::new(1, 2, 16, 6.0, 4, 9).unwrap();
        let b2 = g2.build_basis().unwrap();
        assert!(matches!(averaged_resonance(&Field::zeros(g2, 0.0), &b2), Err(Error::UnsupportedDimension(2))));
        assert!(matches!(filtered(0.1, &f, &b2), Err(Error::GridMismatch)));
        assert!(filtered(f64::NAN, &f, &b).is_err());
    }

    #[test]
    fn quadrature_matches_resonance_on_random_fields() {
        let (g, b) = setup(16, 10);
        for seed in 0..10 {
            let f = random_field(&g, seed, 10);
            let a = averaged_quadrature(&f, &b, min_num_theta(&b)).unwrap();
            let r = averaged_resonance(&f, &b).unwrap();
            assert!(max_diff(&a, &r) < 1e-12, "seed {seed}: {:e}", max_diff(&a, &r));
        }
    }

    #[test]
    fn quadrature_in_two_dimensions_is_phase_independent() {
        let g = GridSpec::new(1, 2, 16, 6.0, 4, 9).unwrap();
        let b = g.build_basis().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut f = Field::zeros(g, 0.0);
        f.data.mapv_inplace(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let m = default_num_theta(&b);
        let a = averaged_quadrature(&f, &b, m).unwrap();
        let s = averaged_quadrature_offset(&f, &b, m, 0.37).unwrap();
        assert!(max_diff(&a, &s) < 1e-12);
        assert_eq!(Nonlinearity::averaged(&b), Nonlinearity::AveragedQuadrature { num_theta: m, offset: 0.0 });
        // polarized data: F_av = (2π)^{-1} |φ|²φ ω_0 for d = 2
        let mut p = Field::zeros(g, 0.0);
        p.data[[4, 0]] = c(0.8, -0.1);
        let out = averaged_quadrature(&p, &b, m).unwrap();
        let phi = p.data[[4, 0]];
        assert_abs_diff_eq!((out.data[[4, 0]] - phi * phi.norm_sqr() / (2.0 * PI)).norm(), 0.0, epsilon = 1e-13);
        assert!(out.data.row(4).iter().skip(1).all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn locality_in_x() {
        let (g, b) = setup(16, 6);
        let f = random_field(&g, 9, 6);
        let mut h = f.clone();
        h.data[[5, 1]] += c(0.3, 0.0);
        for nl in [Nonlinearity::Filtered(0.8), Nonlinearity::AveragedResonance] {
            let (a, bb) = (nl.eval(&f, &b).unwrap(), nl.eval(&h, &b).unwrap());
            for col in 0..g.ncols() {
                let changed = a.data.row(col) != bb.data.row(col);
                assert_eq!(changed, col == 5);
            }
        }
    }

    fn gauge(field: &Field, phase: &[f64]) -> Field {
        let mut g = field.clone();
        let f: Vec<Complex64> = phase.iter().map(|s| Complex64::from_polar(1.0, *s)).collect();
        g.scale_columns(&f);
        g
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn filtered_is_two_pi_periodic(seed in 0u64..1000, theta in -10.0f64..10.0) {
            let (g, b) = setup(16, 8);
            let f = random_field(&g, seed, 8);
            let a = filtered(theta, &f, &b).unwrap();
            let p = filtered(theta + 2.0 * PI, &f, &b).unwrap();
            prop_assert!(max_diff(&a, &p) < 1e-13);
        }

        #[test]
        fn gauge_invariance(seed in 0u64..1000, theta in -4.0f64..4.0, alpha in 0.05f64..1.0) {
            let (g, b) = setup(16, 8);
            let f = random_field(&g, seed, 8);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            let s: Vec<f64> = (0..g.ncols()).map(|_| rng.random_range(-3.0..3.0) / alpha).collect();
            for nl in [Nonlinearity::Filtered(theta), Nonlinearity::AveragedResonance, Nonlinearity::AveragedQuadrature { num_theta: min_num_theta(&b), offset: 0.0 }] {
                let lhs = nl.eval(&gauge(&f, &s), &b).unwrap();
                let rhs = gauge(&nl.eval(&f, &b).unwrap(), &s);
                prop_assert!(max_diff(&lhs, &rhs) < 1e-13);
            }
        }

        #[test]
        fn trapezoid_average_ignores_phase_offset(seed in 0u64..1000, offset in 0.0f64..6.3) {
            let (g, b) = setup(16, 8);
            let f = random_field(&g, seed, 8);
            let m = default_num_theta(&b);
            let a = averaged_quadrature_offset(&f, &b, m, offset).unwrap();
            let r = averaged_resonance(&f, &b).unwrap();
            prop_assert!(max_diff(&a, &r) < 1e-12);
        }
    }
}
