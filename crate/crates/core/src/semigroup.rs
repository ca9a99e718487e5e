//! The Mehler semigroup `P_t f(x) = ∫ f(e^{tA}x + y) g_t(y) dy` on grid
//! functions: spectral application, Monte Carlo along the Langevin
//! equation, Laplace-transform resolvents, generator action and derivative
//! sup-norms.
//!
//! Grid functions are treated as periodic on their box. Convolution with
//! `g_t` is a Fourier multiplier `e^{-ψ_t(ξ)}` on the dual lattice, and the
//! result is then evaluated along the flow, `P_t f(x) = (f ⋆ ǧ_t)(e^{tA}x)`,
//! by separable cubic interpolation.

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, GridFunction, MAX_DIM};
use crate::linalg::SemigroupSpec;
use crate::measures::{characteristic_table, SymbolEvaluator};
use crate::sampler::StableSamplerState;
use crate::spectral::{frequency_axes, interpolate_periodic, lattice_table, Spectrum};

fn check_dim(spec: &SemigroupSpec, grid: &Grid) -> Result<()> {
    if spec.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: grid.dim(),
        });
    }
    Ok(())
}

/// `P_t f` with `f` extended periodically off its box.
///
/// The output is clipped to `[min f, max f]`, the range the exact `P_t f`
/// lies in, so interpolation overshoot never breaks contraction or
/// positivity.
pub fn apply_mehler(spec: &SemigroupSpec, t: f64, f: &GridFunction) -> Result<GridFunction> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("time must be finite and >= 0, got {t}")));
    }
    check_dim(spec, f.grid())?;
    if t == 0.0 {
        return Ok(f.clone());
    }
    let grid = f.grid();
    let u = convolve(spec, t, grid, f.values())?;
    let out = along_flow(spec, t, grid, grid, &u)?;
    clip_to_range(grid, out, f)
}

fn clip_to_range(grid: &Grid, mut out: Vec<f64>, f: &GridFunction) -> Result<GridFunction> {
    let lo = f.min();
    let hi = f.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for v in out.iter_mut() {
        *v = v.clamp(lo, hi);
    }
    GridFunction::new(grid.clone(), out)
}

/// Periodic convolution of grid data with `g_t`.
fn convolve(spec: &SemigroupSpec, t: f64, grid: &Grid, values: &[f64]) -> Result<Vec<f64>> {
    let table = characteristic_table(spec, t, grid)?;
    Ok(Spectrum::forward(grid, values).multiplied_by_table(&table).inverse_real())
}

/// Samples `u` (periodic data on `work`) at `e^{tA}x` for the nodes `x` of
/// `target`. Both grids share their spacing and are centered at the origin.
fn along_flow(spec: &SemigroupSpec, t: f64, target: &Grid, work: &Grid, u: &[f64]) -> Result<Vec<f64>> {
    if !spec.has_zero_drift() {
        return Ok(resample(target, work, u, &spec.flow(t)?));
    }
    if target == work {
        return Ok(u.to_vec());
    }
    let dim = target.dim();
    Ok((0..target.len())
        .map(|i| {
            let idx = target.unravel(i);
            let mut w = [0usize; MAX_DIM];
            for a in 0..dim {
                w[a] = idx[a] + (work.points(a) - target.points(a)) / 2;
            }
            u[work.ravel(&w[..dim])]
        })
        .collect())
}

fn resample(target: &Grid, work: &Grid, u: &[f64], flow: &DMatrix<f64>) -> Vec<f64> {
    let dim = target.dim();
    (0..target.len())
        .into_par_iter()
        .map(|i| {
            let mut x = [0.0; MAX_DIM];
            target.node_into(i, &mut x);
            let mut y = [0.0; MAX_DIM];
            for r in 0..dim {
                for c in 0..dim {
                    y[r] += flow[(r, c)] * x[c];
                }
            }
            interpolate_periodic(work, u, &y[..dim])
        })
        .collect()
}

/// Result of [`apply_mehler_extended`].
#[derive(Debug, Clone)]
pub struct ExtendedApply {
    pub function: GridFunction,
    /// Width added on each side of every axis, filled by constant extension.
    pub margin: Vec<f64>,
}

/// Tail mass of `μ_t` ignored when sizing the padded working box.
const SUPPORT_TAIL: f64 = 1e-6;

/// `P_t f` with `f` extended off its box by the nearest boundary value.
///
/// The working box is the input box stretched by `e^{tA}` plus the radius
/// that holds all but `1e-6` of each marginal of `μ_t`, at the input
/// spacing. Heavy tails make that radius large; `DomainEscape` is raised
/// when the working grid would need more than `max_points` per axis.
pub fn apply_mehler_extended(
    spec: &SemigroupSpec,
    t: f64,
    f: &GridFunction,
    max_points: usize,
) -> Result<ExtendedApply> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("time must be finite and >= 0, got {t}")));
    }
    check_dim(spec, f.grid())?;
    let grid = f.grid();
    let dim = grid.dim();
    if t == 0.0 {
        return Ok(ExtendedApply {
            function: f.clone(),
            margin: vec![0.0; dim],
        });
    }
    let flow = spec.flow(t)?;
    let sym = SymbolEvaluator::new(spec, t)?;
    let mut points = Vec::with_capacity(dim);
    let mut margin = Vec::with_capacity(dim);
    for a in 0..dim {
        let reach: f64 = (0..dim).map(|c| flow[(a, c)].abs() * grid.half_width(c)).sum();
        let mut e = [0.0; MAX_DIM];
        e[a] = 1.0;
        let radius = support_radius(sym.eval(&e[..dim]), spec.stability());
        let half = reach.max(grid.half_width(a)) + radius;
        let h = grid.spacing(a);
        let needed = (2.0 * half / h).ceil();
        if !(needed <= max_points as f64) {
            return Err(Error::DomainEscape {
                needed: if needed.is_finite() { needed as usize } else { usize::MAX },
                budget: max_points,
            });
        }
        let n = (needed as usize).next_power_of_two().max(grid.points(a));
        if n > max_points {
            return Err(Error::DomainEscape {
                needed: n,
                budget: max_points,
            });
        }
        points.push(n);
        margin.push((n - grid.points(a)) as f64 * h / 2.0);
    }
    let half_widths: Vec<f64> = (0..dim).map(|a| points[a] as f64 * grid.spacing(a) / 2.0).collect();
    let work = Grid::new(half_widths, points)?;
    let extended: Vec<f64> = (0..work.len())
        .map(|i| {
            let idx = work.unravel(i);
            let mut src = [0usize; MAX_DIM];
            for a in 0..dim {
                let off = ((work.points(a) - grid.points(a)) / 2) as isize;
                src[a] = (idx[a] as isize - off).clamp(0, grid.points(a) as isize - 1) as usize;
            }
            f.values()[grid.ravel(&src[..dim])]
        })
        .collect();
    let u = convolve(spec, t, &work, &extended)?;
    let out = along_flow(spec, t, grid, &work, &u)?;
    Ok(ExtendedApply {
        function: clip_to_range(grid, out, f)?,
        margin,
    })
}

/// Radius beyond which a one-dimensional marginal with exponent
/// `ψ(r) = c |r|^{2s}` keeps at most `SUPPORT_TAIL` of its mass.
fn support_radius(c: f64, s: f64) -> f64 {
    if s == 1.0 {
        // normal with variance 2c; 1e-6 two-sided quantile is 4.89σ
        4.9 * (2.0 * c).sqrt()
    } else {
        // P(|Y| > r) ~ 2 Γ(2s) sin(πs) / π · c r^{-2s}
        let alpha = 2.0 * s;
        let k = 2.0 * statrs::function::gamma::gamma(alpha) * (std::f64::consts::PI * s).sin()
            / std::f64::consts::PI;
        (k * c / SUPPORT_TAIL).powf(1.0 / alpha)
    }
}

/// Monte Carlo sizes. Path `p` draws from stream `p` of `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MCConfig {
    pub num_paths: usize,
    pub num_steps: usize,
    pub seed: u64,
}

impl MCConfig {
    pub const MIN_PATHS: usize = 100;

    pub fn new(num_paths: usize, num_steps: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            num_paths,
            num_steps,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_paths < Self::MIN_PATHS {
            return Err(invalid(format!(
                "numPaths must be >= {}, got {}",
                Self::MIN_PATHS,
                self.num_paths
            )));
        }
        if self.num_steps == 0 {
            return Err(invalid("numSteps must be >= 1"));
        }
        Ok(())
    }
}

/// Sample mean of `f(X_t)` and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

/// `E f(X_t^x)` for `dX = AX dt + dL`, `X_0 = x`, at each of `points`.
///
/// `X_t = e^{tA}x + Σ_j e^{(t-τ_j)A} ΔL_j` with left-point nodes
/// `τ_j = j t / numSteps`. The noise part does not depend on `x`, so every
/// path is shared by all points.
pub fn apply_mehler_mc<F>(
    spec: &SemigroupSpec,
    t: f64,
    f: F,
    points: &[Vec<f64>],
    cfg: &MCConfig,
) -> Result<Vec<McEstimate>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("time must be positive, got {t}")));
    }
    cfg.validate()?;
    let dim = spec.dim();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: p.len(),
        });
    }
    let dt = t / cfg.num_steps as f64;
    let flow = spec.flow(t)?;
    let propagators = (0..cfg.num_steps)
        .map(|j| spec.flow(t - j as f64 * dt))
        .collect::<Result<Vec<_>>>()?;
    let starts: Vec<Vec<f64>> = points
        .iter()
        .map(|x| (0..dim).map(|r| (0..dim).map(|c| flow[(r, c)] * x[c]).sum()).collect())
        .collect();

    let samples: Vec<Vec<f64>> = (0..cfg.num_paths)
        .into_par_iter()
        .map(|p| -> Result<Vec<f64>> {
            let mut sampler = StableSamplerState::new(cfg.seed, p as u64).sampler();
            let mut z = [0.0; MAX_DIM];
            for prop in &propagators {
                let dl = sampler.levy_increment(spec, dt)?;
                for r in 0..dim {
                    for c in 0..dim {
                        z[r] += prop[(r, c)] * dl[c];
                    }
                }
            }
            starts
                .iter()
                .map(|x0| {
                    let mut x = [0.0; MAX_DIM];
                    for r in 0..dim {
                        x[r] = x0[r] + z[r];
                    }
                    let v = f(&x[..dim]);
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::NonFinite {
                            node: x[..dim].to_vec(),
                            value: v,
                        })
                    }
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let n = cfg.num_paths as f64;
    Ok((0..points.len())
        .map(|k| {
            let mean = samples.iter().map(|s| s[k]).sum::<f64>() / n;
            let var = samples.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            McEstimate {
                estimate: mean,
                stderr: (var / n).sqrt(),
            }
        })
        .collect())
}

/// Nodes and weights for `∫₀^∞ e^{-λt} φ(t) dt`: the trapezoid rule in
/// `log t` on geometric nodes over `[tMin, tMax]` with an end correction at
/// `tMin`, plus `∫₀^{tMin} e^{-λt} dt`
/// times `φ(0)` for the initial segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventQuadrature {
    pub lambda: f64,
    pub t_nodes: Vec<f64>,
    /// Include the factor `e^{-λt}`.
    pub weights: Vec<f64>,
    pub t_min: f64,
    pub t_max: f64,
    /// Weight of `φ(0)` covering `[0, tMin]`.
    pub initial_weight: f64,
}

impl ResolventQuadrature {
    pub const NODES: usize = 160;
    pub const T_MIN: f64 = 1e-5;
    /// `tMax = TAIL / λ`, so the dropped tail is `e^{-TAIL}/λ`.
    pub const TAIL: f64 = 40.0;

    pub fn new(lambda: f64) -> Result<Self> {
        Self::with_nodes(lambda, Self::T_MIN, Self::TAIL / lambda, Self::NODES)
    }

    pub fn with_nodes(lambda: f64, t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("λ must be positive, got {lambda}")));
        }
        if !(t_min > 0.0 && t_max > t_min) || count < 2 {
            return Err(invalid(format!(
                "need 0 < tMin < tMax and at least two nodes, got [{t_min}, {t_max}] with {count}"
            )));
        }
        if (-lambda * t_max).exp() > 1e-8 {
            return Err(invalid(format!(
                "tMax = {t_max} leaves a tail e^(-λ tMax) above 1e-8 for λ = {lambda}"
            )));
        }
        let du = (t_max / t_min).ln() / (count - 1) as f64;
        let t_nodes: Vec<f64> = (0..count).map(|j| t_min * (j as f64 * du).exp()).collect();
        let weights = t_nodes
            .iter()
            .enumerate()
            .map(|(j, &t)| {
                // Euler–Maclaurin slope term at the left end, where the
                // integrand t e^{-λt} φ(t) has log-derivative 1 - λt
                let end = if j == 0 {
                    0.5 + du / 12.0 * (1.0 - lambda * t)
                } else if j + 1 == count {
                    0.5
                } else {
                    1.0
                };
                end * du * t * (-lambda * t).exp()
            })
            .collect();
        Ok(Self {
            lambda,
            t_nodes,
            weights,
            t_min,
            t_max,
            initial_weight: -(-lambda * t_min).exp_m1() / lambda,
        })
    }

    /// The quadrature applied to a scalar function of time.
    pub fn integrate(&self, phi: impl Fn(f64) -> f64) -> f64 {
        let mut acc = self.initial_weight * phi(0.0);
        for (t, w) in self.t_nodes.iter().zip(&self.weights) {
            acc += w * phi(*t);
        }
        acc
    }
}

/// `R(λ, L) f = ∫₀^∞ e^{-λt} P_t f dt` by [`ResolventQuadrature`].
pub fn resolvent(spec: &SemigroupSpec, lambda: f64, f: &GridFunction) -> Result<GridFunction> {
    let quad = ResolventQuadrature::new(lambda)?;
    resolvent_with(spec, &quad, f)
}

/// Number of `P_t` applications held in memory at once.
const RESOLVENT_BATCH: usize = 16;

pub fn resolvent_with(spec: &SemigroupSpec, quad: &ResolventQuadrature, f: &GridFunction) -> Result<GridFunction> {
    check_dim(spec, f.grid())?;
    let grid = f.grid();
    if spec.has_zero_drift() {
        // ψ_t = t ψ_1 without drift: sum the multipliers, transform once
        let unit = SymbolEvaluator::new(spec, 1.0)?;
        let table = lattice_table(grid, |xi| {
            let psi = unit.eval(xi);
            quad.integrate(|t| (-t * psi).exp())
        });
        let out = Spectrum::forward(grid, f.values()).multiplied_by_table(&table).inverse_real();
        return GridFunction::new(grid.clone(), out);
    }
    let mut acc: Vec<f64> = f.values().iter().map(|v| quad.initial_weight * v).collect();
    let jobs: Vec<(f64, f64)> = quad.t_nodes.iter().copied().zip(quad.weights.iter().copied()).collect();
    for batch in jobs.chunks(RESOLVENT_BATCH) {
        let applied = batch
            .par_iter()
            .map(|&(t, _)| apply_mehler(spec, t, f))
            .collect::<Result<Vec<_>>>()?;
        for ((_, w), p) in batch.iter().zip(&applied) {
            for (a, v) in acc.iter_mut().zip(p.values()) {
                *a += w * v;
            }
        }
    }
    GridFunction::new(grid.clone(), acc)
}

/// `L R(λ, L) f = λ R(λ, L) f - f`.
pub fn generator_action(spec: &SemigroupSpec, lambda: f64, f: &GridFunction) -> Result<GridFunction> {
    let r = resolvent(spec, lambda, f)?;
    r.scaled(lambda).sub(f)
}

/// `‖D^k P_t f‖_∞`: the largest sup-norm over all order-`k` partial
/// derivatives along the coordinate axes.
///
/// `∂_J P_t f(x) = (∂_J^{T} u)(e^{tA}x)` where `u = f ⋆ ǧ_t` and each
/// derivative index `j` of `J` acts on `u` as the directional derivative
/// along column `j` of `e^{tA}`; in Fourier variables this is the factor
/// `i (e^{tAᵀ}ξ)_j`.
pub fn derivative_sup(spec: &SemigroupSpec, t: f64, f: &GridFunction, k: usize) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("time must be positive, got {t}")));
    }
    if k == 0 {
        return Err(invalid("derivative order must be at least 1"));
    }
    check_dim(spec, f.grid())?;
    let grid = f.grid();
    let scale = t.powf(spec.theta());
    let required = 4.0 * grid.max_spacing();
    if scale < required {
        return Err(Error::UnderResolved { scale, required });
    }
    let flow = spec.flow(t)?;
    let base = Spectrum::forward(grid, f.values()).multiplied_by_table(&characteristic_table(spec, t, grid)?);
    let axes = frequency_axes(grid);
    let dim = grid.dim();
    let mut best = 0.0f64;
    for combo in multi_indices(dim, k) {
        let spectrum = base.mapped(|i, c| {
            let idx = grid.unravel(i);
            if (0..dim).any(|a| idx[a] == grid.points(a) / 2) {
                return Complex64::new(0.0, 0.0);
            }
            let mut m = Complex64::new(1.0, 0.0);
            for &j in &combo {
                let d: f64 = (0..dim).map(|r| flow[(r, j)] * axes[r][idx[r]]).sum();
                m *= Complex64::new(0.0, d);
            }
            c * m
        });
        let du = spectrum.inverse_real();
        let vals = if spec.has_zero_drift() {
            du
        } else {
            resample(grid, grid, &du, &flow)
        };
        best = best.max(vals.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    Ok(best)
}

/// Nondecreasing sequences of length `k` over `0..dim`.
fn multi_indices(dim: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|p: Vec<usize>| {
                let start = p.last().copied().unwrap_or(0);
                (start..dim).map(move |j| {
                    let mut q = p.clone();
                    q.push(j);
                    q
                })
            })
            .collect();
    }
    out
}

/// `‖(P_h f - f)/h - (λf - g)‖_∞` for `f = R(λ, L) g`, the forward
/// difference quotient of `t ↦ P_t f` at `t = 0` against `Lf = λf - g`.
pub fn time_derivative_residual(spec: &SemigroupSpec, lambda: f64, g: &GridFunction, h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("step must be positive, got {h}")));
    }
    let f = resolvent(spec, lambda, g)?;
    let ph = apply_mehler(spec, h, &f)?;
    let lf = f.scaled(lambda).sub(g)?;
    let quotient = ph.sub(&f)?.scaled(1.0 / h);
    quotient.distance(&lf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cos_on(r: f64, n: usize) -> GridFunction {
        GridFunction::from_fn(&Grid::cube(1, r, n).unwrap(), |x| x[0].cos()).unwrap()
    }

    #[test]
    fn zero_time_is_identity_and_constants_are_fixed() {
        let spec = SemigroupSpec::from_rows(2, &[-0.3, 1.0, -1.0, 0.2], &[1.0, 0.2, 0.2, 0.7], 0.6).unwrap();
        let g = Grid::cube(2, 4.0, 64).unwrap();
        let f = GridFunction::from_fn(&g, |x| (x[0] * x[1]).sin()).unwrap();
        assert_eq!(apply_mehler(&spec, 0.0, &f).unwrap(), f);
        let one = GridFunction::constant(&g, 1.0).unwrap();
        for t in [0.01, 0.3, 2.0] {
            let p = apply_mehler(&spec, t, &one).unwrap();
            assert!(p.values().iter().all(|v| (v - 1.0).abs() <= 1e-9));
        }
        assert!(apply_mehler(&spec, -1.0, &f).is_err());
    }

    #[test]
    fn cosine_multiplier_for_every_index() {
        for s in [0.3, 0.5, 0.8, 1.0] {
            let spec = SemigroupSpec::scalar(0.0, 1.0, s).unwrap();
            let f = cos_on(PI, 64);
            let p = apply_mehler(&spec, 1.0, &f).unwrap();
            assert!((p.value_at_origin() - (-0.5f64).exp()).abs() < 1e-4);
        }
    }

    #[test]
    fn gaussian_bump_closed_form() {
        let spec = SemigroupSpec::scalar(0.0, 1.0, 1.0).unwrap();
        let g = Grid::cube(1, 20.0, 512).unwrap();
        let f = GridFunction::from_fn(&g, |x| (-x[0] * x[0] / 2.0).exp()).unwrap();
        for t in [0.1, 0.7, 2.0] {
            let p = apply_mehler(&spec, t, &f).unwrap();
            let want = GridFunction::from_fn(&g, |x| (1.0 + t).powf(-0.5) * (-x[0] * x[0] / (2.0 * (1.0 + t))).exp()).unwrap();
            assert!(p.distance(&want).unwrap() < 1e-10);
        }
    }

    #[test]
    fn drift_moves_the_argument() {
        // s = 1, A = [a]: P_t cos(x) = e^{-ψ_t(1)} cos(e^{ta} x) with ψ_t(1) = (e^{2at}-1)/(4a)
        let a = -0.4;
        let spec = SemigroupSpec::scalar(a, 1.0, 1.0).unwrap();
        let f = cos_on(8.0 * PI, 1024);
        let t = 0.6;
        let p = apply_mehler(&spec, t, &f).unwrap();
        let damp = (-((2.0 * a * t).exp() - 1.0) / (4.0 * a)).exp();
        let want = GridFunction::from_fn(f.grid(), |x| damp * ((a * t).exp() * x[0]).cos()).unwrap();
        assert!(p.distance(&want).unwrap() < 1e-5);
    }

    #[test]
    fn semigroup_law_without_drift() {
        let g = Grid::cube(1, 8.0, 256).unwrap();
        let f = GridFunction::from_fn(&g, |x| (-x[0] * x[0]).exp() + 0.3 * (PI * x[0] / 4.0).sin()).unwrap();
        for s in [0.5, 0.8, 1.0] {
            let spec = SemigroupSpec::scalar(0.0, 1.0, s).unwrap();
            for (t, u) in [(0.25, 0.25), (0.25, 0.5), (0.5, 0.5)] {
                let lhs = apply_mehler(&spec, t + u, &f).unwrap();
                let rhs = apply_mehler(&spec, t, &apply_mehler(&spec, u, &f).unwrap()).unwrap();
                assert!(lhs.distance(&rhs).unwrap() <= 1e-6 * f.sup_norm());
            }
        }
    }

    #[test]
    fn semigroup_law_with_drift() {
        let spec = SemigroupSpec::from_rows(2, &[-0.2, 0.5, -0.5, -0.1], &[1.0, 0.0, 0.0, 1.0], 1.0).unwrap();
        let g = Grid::cube(2, 8.0, 128).unwrap();
        let f = GridFunction::from_fn(&g, |x| (-(x[0] * x[0] + 0.5 * x[1] * x[1]) / 2.0).exp()).unwrap();
        for (t, u) in [(0.25, 0.25), (0.5, 0.25)] {
            let lhs = apply_mehler(&spec, t + u, &f).unwrap();
            let rhs = apply_mehler(&spec, t, &apply_mehler(&spec, u, &f).unwrap()).unwrap();
            assert!(lhs.distance(&rhs).unwrap() <= 1e-3);
        }
    }

    #[test]
    fn extended_mode_matches_periodic_for_localized_input() {
        let spec = SemigroupSpec::scalar(-0.5, 1.0, 1.0).unwrap();
        let g = Grid::cube(1, 10.0, 256).unwrap();
        let f = GridFunction::from_fn(&g, |x| (-x[0] * x[0]).exp()).unwrap();
        let ext = apply_mehler_extended(&spec, 0.5, &f, 1 << 12).unwrap();
        let per = apply_mehler(&spec, 0.5, &f).unwrap();
        assert!(ext.function.distance(&per).unwrap() < 1e-9);
        assert!(ext.margin[0] > 0.0);
        // heavy tails need a working box far beyond the budget
        let cauchy = SemigroupSpec::scalar(0.0, 1.0, 0.5).unwrap();
        assert!(matches!(
            apply_mehler_extended(&cauchy, 1.0, &f, 1 << 12),
            Err(Error::DomainEscape { .. })
        ));
    }

    #[test]
    fn extended_mode_keeps_boundary_value() {
        let spec = SemigroupSpec::scalar(0.0, 1.0, 1.0).unwrap();
        let g = Grid::cube(1, 4.0, 128).unwrap();
        let f = GridFunction::from_fn(&g, |x| if x[0] > 0.0 { 1.0 } else { 0.0 }).unwrap();
        let out = apply_mehler_extended(&spec, 0.01, &f, 1 << 14).unwrap().function;
        // far from the jump the value is preserved on both sides, unlike the
        // periodic mode which sees a second jump at the box edge
        assert!((out.values()[g.points(0) - 1] - 1.0).abs() < 1e-5);
        assert!(out.values()[0].abs() < 1e-5);
    }

    #[test]
    fn resolvent_constant_and_cosine() {
        let spec = SemigroupSpec::scalar(0.0, 1.0, 0.5).unwrap();
        let one = GridFunction::constant(&Grid::cube(1, PI, 32).unwrap(), 1.0).unwrap();
        for lambda in [0.5, 1.0, 3.0] {
            let r = resolvent(&spec, lambda, &one).unwrap();
            assert!(r.values().iter().all(|v| (v - 1.0 / lambda).abs() < 1e-6));
        }
        let f = cos_on(PI, 64);
        let r = resolvent(&spec, 1.0, &f).unwrap();
        assert!(r.distance(&f.scaled(2.0 / 3.0)).unwrap() < 2e-3);
        let l = generator_action(&spec, 1.0, &f).unwrap();
        assert!(l.distance(&f.scaled(-1.0 / 3.0)).unwrap() < 3e-3);
    }

    #[test]
    fn quadrature_nodes_are_geometric() {
        let q = ResolventQuadrature::new(2.0).unwrap();
        assert_eq!(q.t_nodes.len(), 160);
        let r0 = q.t_nodes[1] / q.t_nodes[0];
        for w in q.t_nodes.windows(2) {
            assert!((w[1] / w[0] - r0).abs() < 1e-12);
        }
        assert!(q.weights.iter().all(|&w| w > 0.0));
        assert!((q.t_max - 20.0).abs() < 1e-12);
        assert!(ResolventQuadrature::new(0.0).is_err());
        // Laplace transform of e^{-t/2} at λ = 1
        assert!((q.integrate(|t| (-0.5 * t).exp()) - 1.0 / 2.5).abs() < 1e-9);
    }

    #[test]
    fn resolvent_with_drift_agrees_with_oracle() {
        // s = 1, A = [a], f = cos: P_t cos(x) = e^{-ψ_t(1)} cos(e^{ta}x) ; check
        // R(λ) at x = 0 against the scalar quadrature of that closed form
        let a = -0.3;
        let spec = SemigroupSpec::scalar(a, 1.0, 1.0).unwrap();
        let f = cos_on(4.0 * PI, 256);
        let r = resolvent(&spec, 1.0, &f).unwrap();
        let want = crate::quadrature::adaptive(
            |t| (-t - ((2.0 * a * t).exp() - 1.0) / (4.0 * a)).exp(),
            0.0,
            60.0,
            1e-12,
        );
        assert!((r.value_at_origin() - want).abs() < 1e-6, "{} vs {want}", r.value_at_origin());
    }

    #[test]
    fn derivative_of_cosine_and_underresolution() {
        let spec = SemigroupSpec::scalar(0.0, 1.0, 0.5).unwrap();
        let f = cos_on(PI, 256);
        let d = derivative_sup(&spec, 1.0, &f, 1).unwrap();
        assert!((d - (-0.5f64).exp()).abs() < 1e-3);
        let d2 = derivative_sup(&spec, 1.0, &f, 2).unwrap();
        assert!((d2 - (-0.5f64).exp()).abs() < 1e-3);
        assert!(matches!(
            derivative_sup(&spec, 1e-3, &f, 1),
            Err(Error::UnderResolved { .. })
        ));
    }

    #[test]
    fn step_gradient_is_density_peak() {
        let spec = SemigroupSpec::scalar(0.0, 1.0, 0.5).unwrap();
        let g = Grid::cube(1, 4.0 * PI, 1 << 15).unwrap();
        let step = GridFunction::from_fn(&g, |x| {
            if x[0] > 0.0 {
                1.0
            } else if x[0] == 0.0 {
                0.5
            } else {
                0.0
            }
        })
        .unwrap();
        for t in [1.0 / 128.0, 1.0 / 16.0, 0.25] {
            let d = derivative_sup(&spec, t, &step, 1).unwrap();
            let want = 2.0 / (PI * t);
            assert!((d / want - 1.0).abs() < 0.02, "t={t}: {d} vs {want}");
        }
    }

    #[test]
    fn derivative_contracts_along_flow() {
        let a = 0.8;
        let spec = SemigroupSpec::scalar(a, 1.0, 0.7).unwrap();
        let f = GridFunction::from_fn(&Grid::cube(1, 16.0 * PI, 4096).unwrap(), |x| x[0].sin()).unwrap();
        for t in [0.1, 0.5, 1.0] {
            let d = derivative_sup(&spec, t, &f, 1).unwrap();
            assert!(d <= (t * a).exp() * 1.01);
        }
        let rot = SemigroupSpec::from_rows(2, &[0.0, 0.6, -0.6, 0.0], &[1.0, 0.0, 0.0, 1.0], 1.0).unwrap();
        let g = Grid::cube(2, 4.0 * PI, 256).unwrap();
        let f = GridFunction::from_fn(&g, |x| ((x[0] + x[1]) / 2f64.sqrt()).sin()).unwrap();
        let d = derivative_sup(&rot, 0.5, &f, 1).unwrap();
        assert!(d <= (0.5f64 * 0.6).exp() * 1.01);
    }

    #[test]
    fn time_derivative_residuals() {
        let spec = SemigroupSpec::scalar(0.0, 1.0, 0.5).unwrap();
        let one = GridFunction::constant(&Grid::cube(1, PI, 32).unwrap(), 1.0).unwrap();
        assert!(time_derivative_residual(&spec, 2.0, &one, 1e-3).unwrap() <= 1e-5);
        let g = cos_on(PI, 64);
        assert!(time_derivative_residual(&spec, 1.0, &g, 1e-3).unwrap() <= 2e-3);
        let r: Vec<f64> = [1e-2, 5e-3, 2.5e-3, 1.25e-3]
            .iter()
            .map(|&h| time_derivative_residual(&spec, 1.0, &g, h).unwrap())
            .collect();
        for w in r.windows(2) {
            assert!(w[1] < w[0], "{r:?}");
        }
    }

    #[test]
    fn monte_carlo_constant_and_cosine() {
        let spec = SemigroupSpec::scalar(0.0, 1.0, 0.5).unwrap();
        let cfg = MCConfig::new(1000, 1, 3).unwrap();
        let one = apply_mehler_mc(&spec, 1.0, |_| 1.0, &[vec![0.0], vec![2.0]], &cfg).unwrap();
        for e in one {
            assert_eq!(e.estimate, 1.0);
            assert_eq!(e.stderr, 0.0);
        }
        let cfg = MCConfig::new(100_000, 1, 11).unwrap();
        let e = apply_mehler_mc(&spec, 1.0, |x| x[0].cos(), &[vec![0.0]], &cfg).unwrap()[0];
        assert!((e.estimate - (-0.5f64).exp()).abs() <= 4.0 * e.stderr);
        assert!(e.stderr < 0.003);
        assert!(MCConfig::new(99, 1, 0).is_err());
        assert!(MCConfig::new(100, 0, 0).is_err());
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let spec = SemigroupSpec::scalar(-0.5, 1.0, 0.7).unwrap();
        let cfg = MCConfig::new(500, 4, 99).unwrap();
        let f = |x: &[f64]| x[0].sin();
        let a = apply_mehler_mc(&spec, 0.4, f, &[vec![0.3]], &cfg).unwrap();
        let b = apply_mehler_mc(&spec, 0.4, f, &[vec![0.3]], &cfg).unwrap();
        assert_eq!(a[0].estimate.to_bits(), b[0].estimate.to_bits());
    }
}
