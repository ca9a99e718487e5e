//! The transition measures `μ_t`: symbol exponents, densities by discrete
//! Fourier inversion, absolute moments and `L¹` norms of density gradients.
//!
//! The characteristic function of `μ_t` is `e^{-ψ_t(ξ)}` with
//! `ψ_t(ξ) = ½ ∫₀ᵗ ‖Q^{1/2} e^{σAᵀ} ξ‖^{2s} dσ`. For `s = 1` this reduces to
//! `½⟨Q_t ξ, ξ⟩` with the Gaussian covariance `Q_t`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::grid::{write_csv, Grid, MAX_DIM};
use crate::linalg::{gram_covariance, mat_exp, SemigroupSpec};
use crate::quadrature::{self, GaussLegendre};
use crate::spectral::{fft_nd, frequency_axes, nyquist_face, signed_bin};

const SYMBOL_REL_TOL: f64 = 1e-12;

/// `ψ_t(ξ)` by adaptive Gauss–Legendre quadrature in `σ`.
pub fn symbol_exponent(spec: &SemigroupSpec, t: f64, xi: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("symbol time must be positive, got {t}")));
    }
    if xi.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: xi.len(),
        });
    }
    let xi = DVector::from_column_slice(xi);
    if xi.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let at = spec.drift().transpose();
    let qs = spec.diffusion_sqrt();
    let power = spec.stability();
    let integrand = |sigma: f64| -> f64 {
        let e = mat_exp(&at, sigma).expect("flow exponent checked below");
        (qs * (e * &xi)).norm_squared().powf(power)
    };
    // surface the overflow guard as an error instead of a panic
    mat_exp(spec.drift(), t)?;
    Ok(0.5 * quadrature::adaptive(integrand, 0.0, t, SYMBOL_REL_TOL))
}

/// Fast evaluation of `ψ_t` on many frequencies for a fixed `(spec, t)`.
#[derive(Debug, Clone)]
pub(crate) enum SymbolEvaluator {
    /// `A = 0`: `ψ = t/2 · ⟨Qξ, ξ⟩^s`.
    Driftless { q: DMatrix<f64>, t: f64, s: f64 },
    /// `s = 1`: `ψ = ½⟨Q_t ξ, ξ⟩`.
    Gaussian { qt: DMatrix<f64> },
    /// Composite Gauss–Legendre in `σ` with precomputed `Q^{1/2} e^{σAᵀ}`.
    General {
        maps: Vec<DMatrix<f64>>,
        weights: Vec<f64>,
        s: f64,
    },
}

impl SymbolEvaluator {
    pub(crate) fn new(spec: &SemigroupSpec, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(invalid(format!("time must be positive, got {t}")));
        }
        if spec.has_zero_drift() {
            return Ok(Self::Driftless {
                q: spec.diffusion().clone(),
                t,
                s: spec.stability(),
            });
        }
        if spec.is_gaussian() {
            return Ok(Self::Gaussian {
                qt: gram_covariance(spec.drift(), spec.diffusion(), t)?,
            });
        }
        mat_exp(spec.drift(), t)?;
        let a_norm = spec.drift().norm();
        let panels = ((8.0 * t * a_norm).ceil() as usize).max(4);
        let rule = GaussLegendre::standard();
        let at = spec.drift().transpose();
        let mut maps = Vec::with_capacity(panels * rule.nodes.len());
        let mut weights = Vec::with_capacity(panels * rule.nodes.len());
        for p in 0..panels {
            let lo = t * p as f64 / panels as f64;
            let hi = t * (p + 1) as f64 / panels as f64;
            for (sigma, w) in rule.mapped(lo, hi) {
                maps.push(spec.diffusion_sqrt() * mat_exp(&at, sigma)?);
                weights.push(0.5 * w);
            }
        }
        Ok(Self::General {
            maps,
            weights,
            s: spec.stability(),
        })
    }

    pub(crate) fn eval(&self, xi: &[f64]) -> f64 {
        match self {
            Self::Driftless { q, t, s } => 0.5 * t * quad_form(q, xi).powf(*s),
            Self::Gaussian { qt } => 0.5 * quad_form(qt, xi),
            Self::General { maps, weights, s } => {
                let n = xi.len();
                let mut acc = 0.0;
                for (m, w) in maps.iter().zip(weights) {
                    let mut sq = 0.0;
                    for i in 0..n {
                        let mut v = 0.0;
                        for j in 0..n {
                            v += m[(i, j)] * xi[j];
                        }
                        sq += v * v;
                    }
                    acc += w * sq.powf(*s);
                }
                acc
            }
        }
    }
}

fn quad_form(m: &DMatrix<f64>, xi: &[f64]) -> f64 {
    let n = xi.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += xi[i] * m[(i, j)] * xi[j];
        }
    }
    acc.max(0.0)
}

/// `e^{-ψ_t}` on the dual lattice of `grid`, in FFT coefficient order.
pub fn characteristic_table(spec: &SemigroupSpec, t: f64, grid: &Grid) -> Result<Vec<f64>> {
    check_dim(spec, grid)?;
    let sym = SymbolEvaluator::new(spec, t)?;
    Ok(crate::spectral::lattice_table(grid, |xi| (-sym.eval(xi)).exp()))
}

fn check_dim(spec: &SemigroupSpec, grid: &Grid) -> Result<()> {
    if spec.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: grid.dim(),
        });
    }
    Ok(())
}

/// Thresholds for the density diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityOptions {
    /// Allowed `|mass - 1|` of the box Riemann sum.
    pub mass_tolerance: f64,
    /// Largest accepted estimate of the mass lying outside the box.
    pub tail_tolerance: f64,
    /// Largest accepted value of the characteristic function on the Nyquist faces.
    pub alias_limit: f64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self {
            mass_tolerance: 1e-6,
            tail_tolerance: 1e-2,
            alias_limit: 1e-12,
        }
    }
}

/// Samples of the density `g_t` of `μ_t` on a grid, with diagnostics.
#[derive(Debug, Clone)]
pub struct DensityTable {
    grid: Grid,
    values: Vec<f64>,
    /// Riemann mass on the box.
    pub mass: f64,
    /// Power-law estimate of the mass outside the box, from the boundary values.
    pub tail_mass: f64,
    /// Smallest sample before negative ringing was clamped to zero.
    pub min_value: f64,
    /// `max |g(y) - g(-y)|` over the nodes.
    pub symmetry_residual: f64,
    stability: f64,
}

impl DensityTable {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn stability(&self) -> f64 {
        self.stability
    }
    pub fn at_origin(&self) -> f64 {
        self.values[self.grid.origin_index()]
    }
    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_csv(&self, metadata: &[String]) -> String {
        write_csv(&self.grid, &self.values, "density", metadata)
    }

    /// Two-column `(coordinate, value)` slice through the origin along `axis`.
    pub fn slice_through_origin(&self, axis: usize) -> Vec<(f64, f64)> {
        let mut idx: Vec<usize> = (0..self.grid.dim()).map(|a| self.grid.points(a) / 2).collect();
        (0..self.grid.points(axis))
            .map(|j| {
                idx[axis] = j;
                (self.grid.coordinate(axis, j), self.values[self.grid.ravel(&idx)])
            })
            .collect()
    }

    pub fn slice_csv(&self, axis: usize, metadata: &[String]) -> String {
        let mut out = String::new();
        for m in metadata {
            out.push_str(&format!("# {m}\n"));
        }
        out.push_str(&format!("x{axis},density\n"));
        for (x, v) in self.slice_through_origin(axis) {
            out.push_str(&format!("{},{}\n", crate::grid::fmt17(x), crate::grid::fmt17(v)));
        }
        out
    }
}

/// Density of `μ_t` on `grid` with default diagnostics thresholds.
pub fn density_of(spec: &SemigroupSpec, t: f64, grid: &Grid) -> Result<DensityTable> {
    density_with(spec, t, grid, &DensityOptions::default())
}

/// Density of `μ_t` by discrete Fourier inversion of `e^{-ψ_t}` on the dual
/// lattice. The inversion is exact for the periodization of `g_t` up to the
/// frequency truncation, which is controlled by the Nyquist check.
pub fn density_with(
    spec: &SemigroupSpec,
    t: f64,
    grid: &Grid,
    opts: &DensityOptions,
) -> Result<DensityTable> {
    let table = characteristic_table(spec, t, grid)?;
    check_alias(grid, &table, opts)?;
    let values = invert(grid, &table, None);
    finish_density(grid, values, spec.stability(), opts)
}

fn check_alias(grid: &Grid, table: &[f64], opts: &DensityOptions) -> Result<()> {
    let edge = nyquist_face(grid)
        .into_iter()
        .map(|i| table[i])
        .fold(0.0, f64::max);
    if edge > opts.alias_limit {
        return Err(Error::AliasRisk {
            value: edge,
            limit: opts.alias_limit,
        });
    }
    Ok(())
}

/// Inverse transform of a characteristic-function table back to the grid
/// nodes, optionally multiplied by `-iξ_axis` (spatial derivative).
fn invert(grid: &Grid, table: &[f64], derivative_axis: Option<usize>) -> Vec<f64> {
    let axes = frequency_axes(grid);
    let dim = grid.dim();
    let mut coeffs: Vec<Complex64> = table
        .par_iter()
        .enumerate()
        .map(|(i, &phi)| {
            let idx = grid.unravel(i);
            let mut parity = 0isize;
            for a in 0..dim {
                parity += signed_bin(idx[a], grid.points(a));
            }
            let sign = if parity.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            match derivative_axis {
                None => Complex64::new(sign * phi, 0.0),
                Some(ax) => {
                    if idx[ax] == grid.points(ax) / 2 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        Complex64::new(0.0, -sign * phi * axes[ax][idx[ax]])
                    }
                }
            }
        })
        .collect();
    fft_nd(&mut coeffs, grid.shape(), false);
    let box_volume: f64 = (0..dim).map(|a| 2.0 * grid.half_width(a)).product();
    coeffs.iter().map(|c| c.re / box_volume).collect()
}

fn unit_sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI,
    }
}

fn finish_density(grid: &Grid, mut values: Vec<f64>, stability: f64, opts: &DensityOptions) -> Result<DensityTable> {
    let cell = grid.cell_volume();
    let mass: f64 = values.iter().sum::<f64>() * cell;
    let min_value = values.iter().copied().fold(f64::INFINITY, f64::min);
    let symmetry_residual = symmetry_residual(grid, &values);

    // Periodization folds the two sides of the box onto its boundary, so
    // half the boundary value approximates g at distance R. The tail is then
    // extrapolated with the power law |y|^{-N-2s}.
    let dim = grid.dim();
    let edge = (0..values.len())
        .filter(|&i| {
            let idx = grid.unravel(i);
            (0..dim).any(|a| idx[a] == 0)
        })
        .map(|i| values[i].max(0.0))
        .fold(0.0, f64::max)
        * 0.5;
    let r = grid.half_widths().iter().copied().fold(f64::INFINITY, f64::min);
    let tail_mass = edge * unit_sphere_area(dim) * r.powi(dim as i32) / (2.0 * stability);

    if (mass - 1.0).abs() > opts.mass_tolerance {
        return Err(Error::TailTruncation {
            mass,
            tail_mass,
            tolerance: opts.mass_tolerance,
        });
    }
    if tail_mass > opts.tail_tolerance {
        return Err(Error::TailTruncation {
            mass,
            tail_mass,
            tolerance: opts.tail_tolerance,
        });
    }
    for v in values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(DensityTable {
        grid: grid.clone(),
        values,
        mass,
        tail_mass,
        min_value,
        symmetry_residual,
        stability,
    })
}

/// `max |v(x) - v(-x)|` over the nodes (the mirror of index `j` is `n - j`).
pub fn symmetry_residual(grid: &Grid, values: &[f64]) -> f64 {
    let dim = grid.dim();
    (0..values.len())
        .map(|i| {
            let idx = grid.unravel(i);
            let mut mirror = [0usize; MAX_DIM];
            for a in 0..dim {
                let n = grid.points(a);
                mirror[a] = (n - idx[a]) % n;
            }
            (values[i] - values[grid.ravel(&mirror[..dim])]).abs()
        })
        .fold(0.0, f64::max)
}

/// Absolute moment of a density table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub value: f64,
    /// Set when `γ ≥ 2s`: the moment of the untruncated density is infinite
    /// and `value` only reflects the box.
    pub tail_divergent: bool,
}

/// Riemann sum of `‖y‖^γ g(y)` over the box.
pub fn absolute_moment(d: &DensityTable, gamma: f64) -> Result<MomentEstimate> {
    if !(gamma > 0.0) {
        return Err(invalid(format!("moment order must be positive, got {gamma}")));
    }
    let grid = &d.grid;
    let dim = grid.dim();
    let value: f64 = d
        .values
        .par_iter()
        .enumerate()
        .map(|(i, &g)| {
            let mut x = [0.0; MAX_DIM];
            grid.node_into(i, &mut x);
            let r2: f64 = x[..dim].iter().map(|v| v * v).sum();
            r2.powf(0.5 * gamma) * g
        })
        .sum::<f64>()
        * grid.cell_volume();
    Ok(MomentEstimate {
        value,
        tail_divergent: d.stability < 1.0 && gamma >= 2.0 * d.stability,
    })
}

/// `‖∂g_t/∂x_axis‖_{L¹}`, with the derivative taken spectrally.
pub fn fomin_l1_norm(spec: &SemigroupSpec, t: f64, axis: usize, grid: &Grid) -> Result<f64> {
    fomin_l1_norm_with(spec, t, axis, grid, &DensityOptions::default())
}

pub fn fomin_l1_norm_with(
    spec: &SemigroupSpec,
    t: f64,
    axis: usize,
    grid: &Grid,
    opts: &DensityOptions,
) -> Result<f64> {
    if axis >= spec.dim() {
        return Err(invalid(format!("axis {axis} out of range for dimension {}", spec.dim())));
    }
    let table = characteristic_table(spec, t, grid)?;
    check_alias(grid, &table, opts)?;
    // run the mass and tail diagnostics on the density itself
    finish_density(grid, invert(grid, &table, None), spec.stability(), opts)?;
    let deriv = invert(grid, &table, Some(axis));
    Ok(deriv.iter().map(|v| v.abs()).sum::<f64>() * grid.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_density;
    use std::f64::consts::PI;

    #[test]
    fn symbol_driftless_closed_forms() {
        let half = SemigroupSpec::isotropic(2, 0.5).unwrap();
        let v = symbol_exponent(&half, 1.5, &[3.0, 4.0]).unwrap();
        assert!((v - 1.5 * 5.0 / 2.0).abs() < 1e-12);
        let gauss = SemigroupSpec::isotropic(2, 1.0).unwrap();
        let v = symbol_exponent(&gauss, 1.5, &[3.0, 4.0]).unwrap();
        assert!((v - 1.5 * 25.0 / 2.0).abs() < 1e-12);
        assert_eq!(symbol_exponent(&gauss, 1.0, &[0.0, 0.0]).unwrap(), 0.0);
        assert!(symbol_exponent(&gauss, 0.0, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn gaussian_symbol_matches_covariance() {
        let spec = SemigroupSpec::from_rows(2, &[-0.5, 1.0, -0.3, 0.2], &[2.0, 0.3, 0.3, 1.0], 1.0).unwrap();
        let qt = gram_covariance(spec.drift(), spec.diffusion(), 0.8).unwrap();
        for xi in [[1.0, 0.0], [0.3, -2.0], [5.0, 5.0]] {
            let got = symbol_exponent(&spec, 0.8, &xi).unwrap();
            let want = 0.5 * quad_form(&qt, &xi);
            assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn fast_evaluator_agrees_with_adaptive() {
        let spec = SemigroupSpec::from_rows(2, &[-0.4, 1.3, -0.9, 0.1], &[1.0, 0.2, 0.2, 0.5], 0.7).unwrap();
        for &t in &[0.01, 0.5, 2.0] {
            let fast = SymbolEvaluator::new(&spec, t).unwrap();
            for xi in [[1.0, 2.0], [-7.0, 0.5], [40.0, -30.0]] {
                let want = symbol_exponent(&spec, t, &xi).unwrap();
                let got = fast.eval(&xi);
                assert!(((got - want) / want).abs() < 1e-10, "t={t} {got} vs {want}");
            }
        }
    }

    #[test]
    fn cauchy_density_at_origin() {
        let spec = SemigroupSpec::scalar(0.0, 1.0, 0.5).unwrap();
        let grid = Grid::cube(1, 64.0, 4096).unwrap();
        let d = density_of(&spec, 1.0, &grid).unwrap();
        assert!((d.at_origin() - 1.0 / (PI * 0.5)).abs() < 1e-4);
        assert!((d.mass - 1.0).abs() < 1e-6);
        assert!(d.symmetry_residual < 1e-10);
    }

    #[test]
    fn standard_normal_density_at_origin() {
        let spec = SemigroupSpec::scalar(0.0, 1.0, 1.0).unwrap();
        let grid = Grid::cube(1, 16.0, 512).unwrap();
        let d = density_of(&spec, 1.0, &grid).unwrap();
        assert!((d.at_origin() - (2.0 * PI).powf(-0.5)).abs() < 1e-8);
    }

    #[test]
    fn gaussian_density_matches_closed_form_with_drift() {
        let spec = SemigroupSpec::from_rows(2, &[-1.0, 0.5, -0.5, -0.2], &[1.0, 0.3, 0.3, 0.6], 1.0).unwrap();
        let grid = Grid::cube(2, 8.0, 128).unwrap();
        let d = density_of(&spec, 0.7, &grid).unwrap();
        let qt = gram_covariance(spec.drift(), spec.diffusion(), 0.7).unwrap();
        let err = (0..grid.len())
            .map(|i| (d.values()[i] - gaussian_density(&qt, &grid.node(i)).unwrap()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn undersized_box_is_reported() {
        let spec = SemigroupSpec::scalar(0.0, 1.0, 1.0).unwrap();
        let grid = Grid::cube(1, 2.0, 256).unwrap();
        assert!(matches!(density_of(&spec, 1.0, &grid), Err(Error::TailTruncation { .. })));
        let cauchy = SemigroupSpec::scalar(0.0, 1.0, 0.5).unwrap();
        let small = Grid::cube(1, 8.0, 1024).unwrap();
        assert!(matches!(density_of(&cauchy, 1.0, &small), Err(Error::TailTruncation { .. })));
    }

    #[test]
    fn coarse_grid_is_alias_risk() {
        let spec = SemigroupSpec::scalar(0.0, 1.0, 0.5).unwrap();
        let grid = Grid::cube(1, 64.0, 256).unwrap();
        assert!(matches!(density_of(&spec, 1.0, &grid), Err(Error::AliasRisk { .. })));
    }

    #[test]
    fn moments_of_closed_form_laws() {
        let gauss = SemigroupSpec::scalar(0.0, 1.0, 1.0).unwrap();
        let d = density_of(&gauss, 1.0, &Grid::cube(1, 16.0, 1024).unwrap()).unwrap();
        let m = absolute_moment(&d, 2.0).unwrap();
        assert!((m.value - 1.0).abs() < 1e-4);
        assert!(!m.tail_divergent);
        assert!(absolute_moment(&d, 0.0).is_err());

        let cauchy = SemigroupSpec::scalar(0.0, 1.0, 0.5).unwrap();
        let d = density_of(&cauchy, 1.0, &Grid::cube(1, 64.0, 4096).unwrap()).unwrap();
        assert!(absolute_moment(&d, 1.0).unwrap().tail_divergent);
        assert!(!absolute_moment(&d, 0.5).unwrap().tail_divergent);
    }

    #[test]
    fn moment_concentrates_at_small_time() {
        for (s, gamma) in [(0.75, 1.0), (1.0, 2.0)] {
            let spec = SemigroupSpec::scalar(0.0, 1.0, s).unwrap();
            let grid = Grid::cube(1, 1.0, 1 << 14).unwrap();
            let d = density_of(&spec, 1e-4, &grid).unwrap();
            assert!(absolute_moment(&d, gamma).unwrap().value <= 1e-2);
        }
    }

    #[test]
    fn fomin_norm_is_twice_the_peak() {
        let cauchy = SemigroupSpec::scalar(0.0, 1.0, 0.5).unwrap();
        let grid = Grid::cube(1, 64.0, 4096).unwrap();
        let v = fomin_l1_norm(&cauchy, 1.0, 0, &grid).unwrap();
        assert!((v - 4.0 / PI).abs() < 0.02, "{v}");
        let d = density_of(&cauchy, 1.0, &grid).unwrap();
        assert!((v - 2.0 * d.max_value()).abs() < 0.01 * v);

        let gauss = SemigroupSpec::scalar(0.0, 1.0, 1.0).unwrap();
        let v = fomin_l1_norm(&gauss, 1.0, 0, &Grid::cube(1, 16.0, 512).unwrap()).unwrap();
        assert!((v - 2.0 / (2.0 * PI).sqrt()).abs() < 1e-3, "{v}");
    }

    #[test]
    fn csv_slice_has_header_and_rows() {
        let spec = SemigroupSpec::scalar(0.0, 1.0, 1.0).unwrap();
        let d = density_of(&spec, 1.0, &Grid::cube(1, 16.0, 256).unwrap()).unwrap();
        let csv = d.slice_csv(0, &["hash abc".into()]);
        assert!(csv.starts_with("# hash abc\nx0,density\n"));
        assert_eq!(csv.lines().count(), 258);
    }
}
