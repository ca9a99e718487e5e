//! Seminorm estimators: sup, Hölder, Zygmund, the flow seminorm `[f]_{Y_α}`,
//! the semigroup and resolvent Hölder seminorms, and a K-functional upper
//! bound for the couple `(C_b, C¹_b)`.
//!
//! A supremum over a continuum is estimated over a finite sweep. The sweep is
//! grouped into octaves ordered toward the singular end (small offsets,
//! small times, large `λ`) and the estimate is declared diverged when the
//! running sup still grows by 5% or more over the last octave.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, GridFunction, MAX_DIM};
use crate::linalg::SemigroupSpec;
use crate::semigroup::{apply_mehler, generator_action, ResolventQuadrature};
use crate::spectral::{frequency_axes, Spectrum};

/// Relative growth of the running sup over the last octave that counts as
/// divergence.
pub const PLATEAU_GROWTH: f64 = 0.05;

/// Where a seminorm estimate was attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Witness {
    /// Nothing nonzero was found.
    None,
    /// Sup norm: the node.
    Node { x: Vec<f64> },
    /// First difference `f(x + h) - f(x)`.
    Pair { x: Vec<f64>, h: Vec<f64> },
    /// Second difference `f(x + 2h) - 2f(x + h) + f(x)`.
    Triple { x: Vec<f64>, h: Vec<f64> },
    /// Time sweep; `x` is where the inner sup was attained when known.
    Time { t: f64, x: Option<Vec<f64>> },
    Lambda { lambda: f64 },
    Scale { epsilon: f64 },
}

/// The searched parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormEstimate {
    pub value: f64,
    pub diverged: bool,
    pub witness: Witness,
    #[serde(rename = "parameterRange")]
    pub parameter_range: ParameterRange,
}

impl SeminormEstimate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("estimate serializes")
    }
}

/// Plateau rule on per-octave maxima ordered toward the singular end.
pub fn plateau_diverged(octaves: &[f64]) -> bool {
    if octaves.len() < 2 {
        return false;
    }
    let mut running = Vec::with_capacity(octaves.len());
    let mut m = 0.0f64;
    for &v in octaves {
        m = m.max(v);
        running.push(m);
    }
    let last = running[running.len() - 1];
    let prev = running[running.len() - 2];
    last > 0.0 && last >= (1.0 + PLATEAU_GROWTH) * prev
}

pub fn sup_norm(f: &GridFunction) -> f64 {
    f.sup_norm()
}

/// Sup norm with the attaining node.
pub fn sup_estimate(f: &GridFunction) -> SeminormEstimate {
    let (i, v) = f
        .values()
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
    SeminormEstimate {
        value: v,
        diverged: false,
        witness: if v > 0.0 { Witness::Node { x: f.grid().node(i) } } else { Witness::None },
        parameter_range: ParameterRange {
            name: "node".into(),
            min: 0.0,
            max: (f.grid().len() - 1) as f64,
            count: f.grid().len(),
        },
    }
}

/// Offset directions in index units: the coordinate axes and, for
/// `dim > 1`, the diagonals `(1, …, 1)` and `(1, -1, …, -1)`.
fn directions(dim: usize) -> Vec<[isize; MAX_DIM]> {
    let mut out = Vec::new();
    for a in 0..dim {
        let mut d = [0isize; MAX_DIM];
        d[a] = 1;
        out.push(d);
    }
    if dim > 1 {
        let mut plus = [0isize; MAX_DIM];
        let mut minus = [0isize; MAX_DIM];
        for a in 0..dim {
            plus[a] = 1;
            minus[a] = if a == 0 { 1 } else { -1 };
        }
        out.push(plus);
        out.push(minus);
    }
    out
}

/// Admissible offset lengths for difference quotients: `[2·spacing, R/2]`.
pub fn admissible_offsets(grid: &Grid) -> (f64, f64) {
    let r = grid.half_widths().iter().copied().fold(f64::INFINITY, f64::min);
    (2.0 * grid.max_spacing(), r / 2.0)
}

struct Candidate {
    value: f64,
    node: usize,
    offset: [f64; MAX_DIM],
    length: f64,
}

/// Sup of `|Δ^order_h f(x)| / weight(‖h‖)` over admissible offsets `h` and
/// nodes `x` whose stencil stays in the box.
fn difference_sweep(
    f: &GridFunction,
    order: usize,
    weight: impl Fn(f64) -> f64 + Sync,
    name: &str,
) -> SeminormEstimate {
    let grid = f.grid();
    let dim = grid.dim();
    let (lo, hi) = admissible_offsets(grid);
    let mut jobs = Vec::new();
    for d in directions(dim) {
        let step: f64 = (0..dim).map(|a| (d[a] as f64 * grid.spacing(a)).powi(2)).sum::<f64>().sqrt();
        let mut m = 1usize;
        while m as f64 * step <= hi * (1.0 + 1e-12) {
            let len = m as f64 * step;
            if len >= lo * (1.0 - 1e-12) {
                jobs.push((d, m, len));
            }
            m += 1;
        }
    }
    let vals = f.values();
    let results: Vec<Option<Candidate>> = jobs
        .par_iter()
        .map(|&(d, m, len)| {
            let w = weight(len);
            let mut best: Option<Candidate> = None;
            let mut far = [0usize; MAX_DIM];
            let mut mid = [0usize; MAX_DIM];
            'nodes: for i in 0..grid.len() {
                let idx = grid.unravel(i);
                for a in 0..dim {
                    let reach = idx[a] as isize + order as isize * m as isize * d[a];
                    if reach < 0 || reach >= grid.points(a) as isize {
                        continue 'nodes;
                    }
                    far[a] = reach as usize;
                    mid[a] = (idx[a] as isize + m as isize * d[a]) as usize;
                }
                let diff = if order == 1 {
                    vals[grid.ravel(&far[..dim])] - vals[i]
                } else {
                    vals[grid.ravel(&far[..dim])] - 2.0 * vals[grid.ravel(&mid[..dim])] + vals[i]
                };
                let q = diff.abs() / w;
                if best.as_ref().is_none_or(|b| q > b.value) {
                    let mut offset = [0.0; MAX_DIM];
                    for a in 0..dim {
                        offset[a] = m as f64 * d[a] as f64 * grid.spacing(a);
                    }
                    best = Some(Candidate {
                        value: q,
                        node: i,
                        offset,
                        length: len,
                    });
                }
            }
            best
        })
        .collect();

    // per-octave maxima, octave 0 holding the shortest offsets
    let octave_of = |len: f64| ((len / lo).log2().floor().max(0.0)) as usize;
    let octaves = jobs.iter().map(|j| octave_of(j.2)).max().map_or(0, |o| o + 1);
    let mut per_octave = vec![0.0f64; octaves];
    let mut best: Option<&Candidate> = None;
    for c in results.iter().flatten() {
        let o = octave_of(c.length);
        per_octave[o] = per_octave[o].max(c.value);
        if best.is_none_or(|b| c.value > b.value) {
            best = Some(c);
        }
    }
    per_octave.reverse();
    let (value, witness) = match best {
        Some(c) if c.value > 0.0 => {
            let h = c.offset[..dim].to_vec();
            let x = grid.node(c.node);
            let w = if order == 1 {
                Witness::Pair { x, h }
            } else {
                Witness::Triple { x, h }
            };
            (c.value, w)
        }
        _ => (0.0, Witness::None),
    };
    SeminormEstimate {
        value,
        diverged: plateau_diverged(&per_octave),
        witness,
        parameter_range: ParameterRange {
            name: name.into(),
            min: lo,
            max: hi,
            count: jobs.len(),
        },
    }
}

/// `sup |f(x+h) - f(x)| / ‖h‖^α` over admissible offsets.
pub fn holder_seminorm(f: &GridFunction, alpha: f64) -> Result<SeminormEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("Hölder exponent must lie in (0, 1), got {alpha}")));
    }
    Ok(difference_sweep(f, 1, |l| l.powf(alpha), "offset"))
}

/// `sup |f(x+2h) - 2f(x+h) + f(x)| / ‖h‖` over admissible offsets.
pub fn zygmund_seminorm(f: &GridFunction) -> SeminormEstimate {
    difference_sweep(f, 2, |l| l, "offset")
}

/// Refinement protocol for difference seminorms of a pointwise `f`: the
/// estimate on `grid` with the number of points doubled per axis, flagged
/// diverged when it exceeds the estimate on `grid` by 5% or more, or when
/// the octave sweep on the finer grid has not reached a plateau.
///
/// A grid function is smooth below its spacing, so the octave sweep on a
/// single grid flattens at the finest offsets even for functions that are
/// rougher than the tested exponent; halving the spacing exposes them.
pub fn refined(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    grid: &Grid,
    estimator: impl Fn(&GridFunction) -> Result<SeminormEstimate>,
) -> Result<SeminormEstimate> {
    let coarse = estimator(&GridFunction::from_fn(grid, f)?)?;
    let fine_grid = Grid::new(
        grid.half_widths().to_vec(),
        grid.shape().iter().map(|n| 2 * n).collect(),
    )?;
    let mut fine = estimator(&GridFunction::from_fn(&fine_grid, f)?)?;
    fine.diverged |= fine.value > 0.0 && fine.value >= (1.0 + PLATEAU_GROWTH) * coarse.value;
    Ok(fine)
}

/// Re-evaluates the quotient recorded in a Hölder or Zygmund witness.
pub fn witness_quotient(f: &GridFunction, witness: &Witness, alpha: f64) -> Option<f64> {
    let grid = f.grid();
    let at = |p: &[f64]| -> f64 {
        let idx: Vec<usize> = (0..grid.dim())
            .map(|a| ((p[a] + grid.half_width(a)) / grid.spacing(a)).round() as usize)
            .collect();
        f.values()[grid.ravel(&idx)]
    };
    let shifted = |x: &[f64], h: &[f64], k: f64| -> Vec<f64> { x.iter().zip(h).map(|(a, b)| a + k * b).collect() };
    match witness {
        Witness::Pair { x, h } => {
            let len = h.iter().map(|v| v * v).sum::<f64>().sqrt();
            Some((at(&shifted(x, h, 1.0)) - at(x)).abs() / len.powf(alpha))
        }
        Witness::Triple { x, h } => {
            let len = h.iter().map(|v| v * v).sum::<f64>().sqrt();
            Some((at(&shifted(x, h, 2.0)) - 2.0 * at(&shifted(x, h, 1.0)) + at(x)).abs() / len)
        }
        _ => None,
    }
}

/// Domain enlargement settings for [`flow_seminorm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    /// Starting half width.
    pub half_width: f64,
    /// Grid spacing kept fixed while the box doubles.
    pub spacing: f64,
    /// Cap on points per axis.
    pub max_points: usize,
    /// Relative change of the per-`t` sup that counts as a plateau.
    pub plateau: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            half_width: std::f64::consts::PI,
            spacing: std::f64::consts::PI / 64.0,
            max_points: 1 << 20,
            plateau: 0.01,
        }
    }
}

/// `sup_x |f(e^{tA}x) - f(x)|` with the box doubled until the sup changes
/// by less than `opts.plateau`. Returns the sup and its node.
pub fn flow_displacement(
    spec: &SemigroupSpec,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    t: f64,
    opts: &FlowOptions,
) -> Result<(f64, Vec<f64>, f64)> {
    let dim = spec.dim();
    let flow = spec.flow(t)?;
    let mut n = ((2.0 * opts.half_width / opts.spacing).ceil() as usize).next_power_of_two().max(8);
    let mut previous: Option<f64> = None;
    loop {
        if n > opts.max_points {
            let radius = n as f64 * opts.spacing / 4.0;
            return Err(Error::NoPlateau {
                radius,
                previous: previous.unwrap_or(f64::NAN),
                last: previous.unwrap_or(f64::NAN),
            });
        }
        let grid = Grid::cube(dim, n as f64 * opts.spacing / 2.0, n)?;
        let (i, sup) = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let mut x = [0.0; MAX_DIM];
                grid.node_into(i, &mut x);
                let mut y = [0.0; MAX_DIM];
                for r in 0..dim {
                    for c in 0..dim {
                        y[r] += flow[(r, c)] * x[c];
                    }
                }
                (i, (f(&y[..dim]) - f(&x[..dim])).abs())
            })
            .reduce(
                || (usize::MAX, f64::NEG_INFINITY),
                |a, b| {
                    if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                        b
                    } else {
                        a
                    }
                },
            );
        if !sup.is_finite() {
            return Err(Error::NonFinite {
                node: grid.node(i),
                value: sup,
            });
        }
        if let Some(p) = previous {
            if (sup - p).abs() <= opts.plateau * sup.max(p) {
                return Ok((sup, grid.node(i), grid.half_width(0)));
            }
            if n * 2 > opts.max_points {
                return Err(Error::NoPlateau {
                    radius: grid.half_width(0),
                    previous: p,
                    last: sup,
                });
            }
        }
        previous = Some(sup);
        n *= 2;
    }
}

fn check_times(t_set: &[f64], upper: Option<f64>) -> Result<Vec<f64>> {
    if t_set.is_empty() {
        return Err(invalid("empty time set"));
    }
    let mut ts = t_set.to_vec();
    if ts.iter().any(|&t| !(t > 0.0 && t.is_finite()) || upper.is_some_and(|u| t > u)) {
        return Err(invalid(format!("times out of range: {t_set:?}")));
    }
    // far end first: largest t
    ts.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ts.dedup();
    Ok(ts)
}

fn time_range(ts: &[f64]) -> ParameterRange {
    ParameterRange {
        name: "t".into(),
        min: ts[ts.len() - 1],
        max: ts[0],
        count: ts.len(),
    }
}

fn first_max(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > values[best] { i } else { best })
}

/// `[f]_{Y_α} = sup_t t^{-α} sup_x |f(e^{tA}x) - f(x)|` over `t_set`, for
/// `f` given pointwise so the box can grow with `t`.
pub fn flow_seminorm(
    spec: &SemigroupSpec,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    alpha: f64,
    t_set: &[f64],
    opts: &FlowOptions,
) -> Result<SeminormEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("α must lie in (0, 1), got {alpha}")));
    }
    let ts = check_times(t_set, None)?;
    let per_t = ts
        .iter()
        .map(|&t| flow_displacement(spec, f, t, opts))
        .collect::<Result<Vec<_>>>()?;
    let scaled: Vec<f64> = ts.iter().zip(&per_t).map(|(t, p)| t.powf(-alpha) * p.0).collect();
    let k = first_max(&scaled);
    let value = scaled[k];
    Ok(SeminormEstimate {
        value,
        diverged: plateau_diverged(&scaled),
        witness: if value > 0.0 {
            Witness::Time {
                t: ts[k],
                x: Some(per_t[k].1.clone()),
            }
        } else {
            Witness::None
        },
        parameter_range: time_range(&ts),
    })
}

/// `[f]^{(1)}_α = sup_t t^{-α} ‖P_t f - f‖_∞` over `t_set ⊂ (0, 1]`.
pub fn semigroup_holder(spec: &SemigroupSpec, f: &GridFunction, alpha: f64, t_set: &[f64]) -> Result<SeminormEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("α must lie in (0, 1), got {alpha}")));
    }
    let ts = check_times(t_set, Some(1.0))?;
    let dist = ts
        .par_iter()
        .map(|&t| apply_mehler(spec, t, f)?.distance(f))
        .collect::<Result<Vec<_>>>()?;
    let scaled: Vec<f64> = ts.iter().zip(&dist).map(|(t, d)| t.powf(-alpha) * d).collect();
    let k = first_max(&scaled);
    let value = scaled[k];
    Ok(SeminormEstimate {
        value,
        diverged: plateau_diverged(&scaled),
        witness: if value > 0.0 { Witness::Time { t: ts[k], x: None } } else { Witness::None },
        parameter_range: time_range(&ts),
    })
}

/// Largest `λ` for which the resolvent quadrature's initial segment is
/// short compared with `1/λ`.
pub fn max_resolvent_lambda() -> f64 {
    1.0 / (10.0 * ResolventQuadrature::T_MIN)
}

/// `[f]^{(3)}_α = sup_λ λ^α ‖λR(λ, L)f - f‖_∞` over `lambda_set`.
pub fn resolvent_holder(
    spec: &SemigroupSpec,
    f: &GridFunction,
    alpha: f64,
    lambda_set: &[f64],
) -> Result<SeminormEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("α must lie in (0, 1), got {alpha}")));
    }
    if lambda_set.is_empty() {
        return Err(invalid("empty λ set"));
    }
    let cap = max_resolvent_lambda();
    let mut ls = lambda_set.to_vec();
    if ls.iter().any(|&l| !(l > 0.0 && l <= cap)) {
        return Err(invalid(format!("λ values must lie in (0, {cap}], got {lambda_set:?}")));
    }
    // far end first: smallest λ
    ls.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ls.dedup();
    let norms = ls
        .par_iter()
        .map(|&l| Ok(generator_action(spec, l, f)?.sup_norm()))
        .collect::<Result<Vec<_>>>()?;
    let scaled: Vec<f64> = ls.iter().zip(&norms).map(|(l, n)| l.powf(alpha) * n).collect();
    let k = first_max(&scaled);
    let value = scaled[k];
    Ok(SeminormEstimate {
        value,
        diverged: plateau_diverged(&scaled),
        witness: if value > 0.0 { Witness::Lambda { lambda: ls[k] } } else { Witness::None },
        parameter_range: ParameterRange {
            name: "lambda".into(),
            min: ls[0],
            max: ls[ls.len() - 1],
            count: ls.len(),
        },
    })
}

/// `‖g‖_{C¹_b} = ‖g‖_∞ + max_i ‖∂_i g‖_∞` with spectral derivatives.
fn c1_norm(spectrum: &Spectrum) -> f64 {
    let grid = spectrum.grid();
    let axes = frequency_axes(grid);
    let sup = |v: Vec<f64>| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut deriv = 0.0f64;
    for a in 0..grid.dim() {
        let d = spectrum.mapped(|i, c| {
            let k = grid.unravel(i)[a];
            if k == grid.points(a) / 2 {
                rustfft::num_complex::Complex64::new(0.0, 0.0)
            } else {
                c * rustfft::num_complex::Complex64::new(0.0, axes[a][k])
            }
        });
        deriv = deriv.max(sup(d.inverse_real()));
    }
    sup(spectrum.inverse_real()) + deriv
}

/// Gaussian mollifications `f_ε` of a periodic grid function, summarized by
/// `‖f - f_ε‖_∞` and `‖f_ε‖_{C¹_b}` for each radius `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFunctionalProfile {
    pub scales: Vec<f64>,
    pub residual: Vec<f64>,
    pub c1_norm: Vec<f64>,
}

impl KFunctionalProfile {
    pub fn new(f: &GridFunction, scales: &[f64]) -> Result<Self> {
        if scales.is_empty() || scales.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(invalid(format!("mollification radii must be positive, got {scales:?}")));
        }
        let base = Spectrum::forward(f.grid(), f.values());
        let axes = frequency_axes(f.grid());
        let grid = f.grid();
        let rows: Vec<(f64, f64)> = scales
            .par_iter()
            .map(|&eps| {
                let smooth = base.mapped(|i, c| {
                    let idx = grid.unravel(i);
                    let r2: f64 = (0..grid.dim()).map(|a| axes[a][idx[a]].powi(2)).sum();
                    c * (-0.5 * eps * eps * r2).exp()
                });
                let residual = smooth
                    .inverse_real()
                    .iter()
                    .zip(f.values())
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                (residual, c1_norm(&smooth))
            })
            .collect();
        Ok(Self {
            scales: scales.to_vec(),
            residual: rows.iter().map(|r| r.0).collect(),
            c1_norm: rows.iter().map(|r| r.1).collect(),
        })
    }

    /// `min_ε ‖f - f_ε‖_∞ + ξ ‖f_ε‖_{C¹_b}` and the minimizing `ε`.
    pub fn upper(&self, xi: f64) -> (f64, f64) {
        let k = (0..self.scales.len())
            .min_by(|&a, &b| {
                let va = self.residual[a] + xi * self.c1_norm[a];
                let vb = self.residual[b] + xi * self.c1_norm[b];
                va.partial_cmp(&vb).unwrap()
            })
            .expect("nonempty scale set");
        (self.residual[k] + xi * self.c1_norm[k], self.scales[k])
    }
}

/// Upper bound for `K(ξ, f; C_b, C¹_b)` from Gaussian mollification of `f`
/// sampled on `grid` (treated as periodic).
pub fn k_functional_upper(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    grid: &Grid,
    xi: f64,
    scales: &[f64],
) -> Result<f64> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(invalid(format!("ξ must be positive, got {xi}")));
    }
    let g = GridFunction::from_fn(grid, f)?;
    Ok(KFunctionalProfile::new(&g, scales)?.upper(xi).0)
}

/// Dyadic values `2^lo, …, 2^hi`.
pub fn dyadic(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(k)).collect()
}
