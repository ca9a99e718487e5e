//! Test-function families, log-log scaling fits, experiment reports and the
//! experiment procedures built on the semigroup and seminorm estimators.

use std::f64::consts::PI;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::linalg::{SemigroupSpec, SpecRecord};
use crate::measures::{absolute_moment, density_of, fomin_l1_norm, symbol_exponent};
use crate::semigroup::{apply_mehler, derivative_sup};
use crate::seminorms::{resolvent_holder, semigroup_holder, SeminormEstimate};

/// Largest truncation tail `a^{-βK}/(1 - a^{-β})` accepted for a Weierstrass sum.
pub const WEIERSTRASS_TAIL: f64 = 1e-2;
pub const WEIERSTRASS_DEFAULT_TERMS: usize = 18;

/// Bounded test inputs, all functions of the first coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum TestFunctionFamily {
    /// `W_β(x) = Σ_{k=0}^{K} a^{-βk} cos(a^k x₁)`.
    Weierstrass { beta: f64, a: u32, terms: usize },
    Cosine,
    /// `exp(-x₁²/2)`.
    GaussianBump,
    /// Heaviside step with value 1/2 at the jump.
    Step,
    /// `1/(1 + x₁²)`.
    RationalDecay,
}

impl TestFunctionFamily {
    /// Weierstrass sum with base 2 and the fewest terms (at least 18) that
    /// keep the truncation tail below [`WEIERSTRASS_TAIL`].
    pub fn weierstrass(beta: f64) -> Result<Self> {
        Self::weierstrass_with(beta, 2, WEIERSTRASS_DEFAULT_TERMS)
    }

    /// Raises `terms` as needed to meet the tail bound.
    pub fn weierstrass_with(beta: f64, a: u32, terms: usize) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(invalid(format!("Weierstrass β must lie in (0, 1], got {beta}")));
        }
        if a < 2 {
            return Err(invalid(format!("lacunary base must be >= 2, got {a}")));
        }
        let q = (a as f64).powf(-beta);
        let mut k = terms;
        while q.powi(k as i32) / (1.0 - q) > WEIERSTRASS_TAIL {
            k += 1;
        }
        Ok(Self::Weierstrass { beta, a, terms: k })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let x1 = x[0];
        match *self {
            Self::Weierstrass { beta, a, terms } => {
                let a = a as f64;
                (0..=terms)
                    .map(|k| a.powf(-beta * k as f64) * (a.powi(k as i32) * x1).cos())
                    .sum()
            }
            Self::Cosine => x1.cos(),
            Self::GaussianBump => (-0.5 * x1 * x1).exp(),
            Self::Step => {
                if x1 > 0.0 {
                    1.0
                } else if x1 == 0.0 {
                    0.5
                } else {
                    0.0
                }
            }
            Self::RationalDecay => 1.0 / (1.0 + x1 * x1),
        }
    }

    /// `Σ a^{-βk}` for Weierstrass sums, the sup norm otherwise.
    pub fn sup_bound(&self) -> f64 {
        match *self {
            Self::Weierstrass { beta, a, terms } => (0..=terms).map(|k| (a as f64).powf(-beta * k as f64)).sum(),
            _ => 1.0,
        }
    }

    pub fn sample(&self, grid: &Grid) -> Result<GridFunction> {
        GridFunction::from_fn(grid, |x| self.eval(x))
    }
}

/// Least-squares line through `(log t, log value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    #[serde(rename = "rSquared")]
    pub r_squared: f64,
    #[serde(rename = "stdError")]
    pub std_error: f64,
    #[serde(rename = "pointsUsed")]
    pub points_used: Vec<(f64, f64)>,
    /// Fewer than four samples: the fit is not a measurement.
    pub degenerate: bool,
}

/// Ordinary least squares of `log value` against `log t`.
pub fn fit_scaling(samples: &[(f64, f64)]) -> Result<ScalingFit> {
    if samples.len() < 2 {
        return Err(invalid("a scaling fit needs at least two samples"));
    }
    if let Some(&(t, v)) = samples.iter().find(|(t, v)| !(*t > 0.0 && *v > 0.0 && t.is_finite() && v.is_finite())) {
        return Err(invalid(format!("scaling fit needs positive samples, got ({t}, {v})")));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(t, v)| (t.ln(), v.ln())).collect();
    let mut xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if xs.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("scaling fit needs distinct times"));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - exponent * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    let std_error = if pts.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(ScalingFit {
        exponent,
        intercept,
        r_squared,
        std_error,
        points_used: pts,
        degenerate: samples.len() < 4,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Relation {
    /// `|measured - expected| ≤ tolerance`
    Within,
    /// `measured ≤ expected + tolerance`
    AtMost,
    /// `measured ≥ expected - tolerance`
    AtLeast,
}

/// One quantitative comparison inside a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub passed: bool,
}

impl Check {
    pub fn new(label: impl Into<String>, measured: f64, relation: Relation, expected: f64, tolerance: f64) -> Self {
        let passed = match relation {
            Relation::Within => (measured - expected).abs() <= tolerance,
            Relation::AtMost => measured <= expected + tolerance,
            Relation::AtLeast => measured >= expected - tolerance,
        };
        Self {
            label: label.into(),
            measured,
            expected,
            tolerance,
            relation,
            passed,
        }
    }

    pub fn within(label: impl Into<String>, measured: f64, expected: f64, tolerance: f64) -> Self {
        Self::new(label, measured, Relation::Within, expected, tolerance)
    }
    pub fn at_most(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(label, measured, Relation::AtMost, bound, 0.0)
    }
    pub fn at_least(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(label, measured, Relation::AtLeast, bound, 0.0)
    }
    /// A boolean outcome recorded as `1 = true`.
    pub fn holds(label: impl Into<String>, value: bool, expected: bool) -> Self {
        let b = |v: bool| if v { 1.0 } else { 0.0 };
        Self::within(label, b(value), b(expected), 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub spec: Option<SpecRecord>,
    pub parameters: Value,
    pub fit: Option<ScalingFit>,
    pub estimates: Vec<Estimate>,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
    #[serde(rename = "runtimeSeconds", skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>, spec: Option<&SemigroupSpec>, parameters: Value) -> Self {
        Self {
            name: name.into(),
            spec: spec.map(|s| s.to_record()),
            parameters,
            fit: None,
            estimates: Vec::new(),
            checks: Vec::new(),
            verdict: Verdict::Inconclusive,
            notes: Vec::new(),
            runtime_seconds: None,
        }
    }

    pub fn estimate(&mut self, label: impl Into<String>, value: f64) {
        self.estimates.push(Estimate {
            label: label.into(),
            value,
        });
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn note(&mut self, n: impl Into<String>) {
        self.notes.push(n.into());
    }

    /// Sets the verdict from the checks: pass iff every check passes.
    pub fn finish(mut self) -> Self {
        self.verdict = if self.checks.is_empty() {
            Verdict::Inconclusive
        } else if self.checks.iter().all(|c| c.passed) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        self
    }

    /// Turns an error into an inconclusive verdict with the error recorded.
    pub fn failed_precondition(mut self, e: &Error) -> Self {
        self.note(format!("{}: {e}", e.name()));
        self.verdict = Verdict::Inconclusive;
        self
    }

    /// The check shown in one-line summaries: the first failing one, else the first.
    pub fn headline(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed).or(self.checks.first())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Runs `body` on a fresh report, converting errors into an inconclusive
/// verdict and recording the wall time when `timed`.
pub fn run_experiment(
    name: &str,
    spec: Option<&SemigroupSpec>,
    parameters: Value,
    timed: bool,
    body: impl FnOnce(&mut ExperimentReport) -> Result<()>,
) -> ExperimentReport {
    let start = Instant::now();
    let mut report = ExperimentReport::new(name, spec, parameters);
    let mut out = match body(&mut report) {
        Ok(()) => report.finish(),
        Err(e) => report.failed_precondition(&e),
    };
    if timed {
        out.runtime_seconds = Some(start.elapsed().as_secs_f64());
    }
    out
}

/// Half width of a box holding `multiple` natural length scales of `μ_t`,
/// the scale being `max_i ψ_t(e_i)^{1/(2s)}`.
pub fn natural_half_width(spec: &SemigroupSpec, t: f64, multiple: f64) -> Result<f64> {
    let dim = spec.dim();
    let mut scale = 0.0f64;
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        scale = scale.max(symbol_exponent(spec, t, &e)?.powf(0.5 / spec.stability()));
    }
    Ok(multiple * scale)
}

/// Grid of `points` per axis on the box of [`natural_half_width`]. The
/// discretization error is then the same at every `t` for scale-invariant
/// laws, so time sweeps measure the scaling law and not the grid.
pub fn scaled_grid(spec: &SemigroupSpec, t: f64, points: usize, multiple: f64) -> Result<Grid> {
    Grid::cube(spec.dim(), natural_half_width(spec, t, multiple)?, points)
}

fn require_times(t_set: &[f64]) -> Result<()> {
    if t_set.len() < 2 || t_set.iter().any(|&t| !(t > 0.0)) {
        return Err(invalid(format!("need at least two positive times, got {t_set:?}")));
    }
    Ok(())
}

fn fit_into(report: &mut ExperimentReport, samples: &[(f64, f64)]) -> Result<ScalingFit> {
    let fit = fit_scaling(samples)?;
    report.fit = Some(fit.clone());
    Ok(fit)
}

/// Box sizes for density-based time sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub points: usize,
    /// Half width in units of the natural length scale of `μ_t`.
    pub multiple: f64,
}

/// Fits `∫‖y‖^γ g_t(y) dy` over `t_set`; expected exponent `γ/(2s)`.
pub fn moment_scaling_experiment(
    name: &str,
    spec: &SemigroupSpec,
    gamma: f64,
    t_set: &[f64],
    sweep: SweepGrid,
    tolerance: f64,
    timed: bool,
) -> ExperimentReport {
    let params = json!({ "gamma": gamma, "tSet": t_set, "grid": sweep, "tolerance": tolerance });
    run_experiment(name, Some(spec), params, timed, |r| {
        require_times(t_set)?;
        if !spec.is_gaussian() && gamma >= 2.0 * spec.stability() {
            return Err(invalid(format!("moment of order {gamma} is infinite for s = {}", spec.stability())));
        }
        let mut samples = Vec::new();
        for &t in t_set {
            let grid = scaled_grid(spec, t, sweep.points, sweep.multiple)?;
            let d = density_of(spec, t, &grid)?;
            samples.push((t, absolute_moment(&d, gamma)?.value));
        }
        let fit = fit_into(r, &samples)?;
        r.check(Check::within("exponent", fit.exponent, gamma / (2.0 * spec.stability()), tolerance));
        Ok(())
    })
}

/// `E|Y|^γ` of the Cauchy law of scale 1/2 (`s = 1/2`, `A = 0`, `Q = 1`,
/// `t = 1`) on a fixed box, against `(1/2)^γ sec(πγ/2)`.
pub fn cauchy_moment_experiment(name: &str, gamma: f64, grid: &Grid, tolerance: f64, timed: bool) -> ExperimentReport {
    let spec = SemigroupSpec::scalar(0.0, 1.0, 0.5).expect("valid spec");
    let params = json!({ "gamma": gamma, "t": 1.0, "grid": grid, "tolerance": tolerance });
    run_experiment(name, Some(&spec), params, timed, |r| {
        let d = density_of(&spec, 1.0, grid)?;
        let m = absolute_moment(&d, gamma)?;
        let want = 0.5f64.powf(gamma) / (PI * gamma / 2.0).cos();
        r.estimate("tailMass", d.tail_mass);
        r.check(Check::within("moment", m.value, want, tolerance));
        Ok(())
    })
}

/// Fits `‖D^k P_t f‖_∞` over `t_set`. The exponent must not fall below
/// `-k/(2s)`; for the step input it must equal `-k/(2s)` and the intercept
/// must match `expected_intercept` within 10%.
#[allow(clippy::too_many_arguments)]
pub fn smoothing_experiment(
    name: &str,
    spec: &SemigroupSpec,
    family: &TestFunctionFamily,
    k: usize,
    t_set: &[f64],
    grid: &Grid,
    expected_intercept: Option<f64>,
    timed: bool,
) -> ExperimentReport {
    let params = json!({ "family": family, "k": k, "tSet": t_set, "grid": grid });
    run_experiment(name, Some(spec), params, timed, |r| {
        require_times(t_set)?;
        let f = family.sample(grid)?;
        let samples = t_set
            .iter()
            .map(|&t| Ok((t, derivative_sup(spec, t, &f, k)?)))
            .collect::<Result<Vec<_>>>()?;
        let fit = fit_into(r, &samples)?;
        let rate = -(k as f64) * spec.theta();
        r.check(Check::at_least("exponent lower bound", fit.exponent, rate - 0.05));
        if matches!(family, TestFunctionFamily::Step) {
            r.check(Check::within("exponent", fit.exponent, rate, 0.05));
        }
        if let Some(c) = expected_intercept {
            r.estimate("prefactor", fit.intercept.exp());
            r.check(Check::within("prefactor ratio", fit.intercept.exp() / c, 1.0, 0.1));
        }
        Ok(())
    })
}

/// Fits `‖P_t W_β - W_β‖_∞` over `t_set` (expected exponent `β/(2s)`), and
/// checks that `[W_β]^{(1)}_α` is diverged at `α = β/(2s) + margin` and
/// finite at `α = β/(2s) - margin`, with `t_set` extended one octave down.
#[allow(clippy::too_many_arguments)]
pub fn holder_characterization_experiment(
    name: &str,
    spec: &SemigroupSpec,
    beta: f64,
    t_set: &[f64],
    grid: &Grid,
    tolerance: f64,
    margin: f64,
    timed: bool,
) -> ExperimentReport {
    let params = json!({ "beta": beta, "tSet": t_set, "grid": grid, "tolerance": tolerance, "margin": margin });
    run_experiment(name, Some(spec), params, timed, |r| {
        require_times(t_set)?;
        if !spec.has_zero_drift() {
            return Err(invalid("the Hölder characterization experiment needs A = 0"));
        }
        let alpha = beta * spec.theta();
        if !(alpha < 1.0) {
            return Err(invalid(format!("β/(2s) = {alpha} is outside (0, 1)")));
        }
        let w = TestFunctionFamily::weierstrass(beta)?.sample(grid)?;
        let samples = t_set
            .iter()
            .map(|&t| Ok((t, apply_mehler(spec, t, &w)?.distance(&w)?)))
            .collect::<Result<Vec<_>>>()?;
        let fit = fit_into(r, &samples)?;
        r.check(Check::within("exponent", fit.exponent, alpha, tolerance));

        let mut extended = t_set.to_vec();
        let t_min = t_set.iter().copied().fold(f64::INFINITY, f64::min);
        extended.push(t_min / 2.0);
        let above = semigroup_holder(spec, &w, alpha + margin, &extended)?;
        let below = semigroup_holder(spec, &w, alpha - margin, &extended)?;
        r.estimate("seminormAbove", above.value);
        r.estimate("seminormBelow", below.value);
        r.check(Check::holds(format!("diverged at α = {:.3}", alpha + margin), above.diverged, true));
        r.check(Check::holds(format!("finite at α = {:.3}", alpha - margin), below.diverged, false));
        r.note("finiteness verdicts are plateau claims at the grid resolution and time range searched");
        Ok(())
    })
}

/// Box doubling for [`strong_continuity_counterexample`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSweep {
    pub start_half_width: f64,
    pub spacing: f64,
    pub max_points: usize,
    pub plateau: f64,
}

/// `sup |P_t f - f|` on boxes doubled until the value changes by less than
/// `sweep.plateau`. Half widths are `start · 2^k`, so a start that is a
/// multiple of `π` keeps `cos` periodic on the box.
pub fn displacement_on_growing_boxes(
    spec: &SemigroupSpec,
    t: f64,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    sweep: &DomainSweep,
) -> Result<(f64, f64)> {
    let mut r = sweep.start_half_width;
    let mut previous: Option<f64> = None;
    loop {
        let n = ((2.0 * r / sweep.spacing).round() as usize).next_power_of_two();
        if n > sweep.max_points {
            return Err(Error::NoPlateau {
                radius: r,
                previous: previous.unwrap_or(f64::NAN),
                last: previous.unwrap_or(f64::NAN),
            });
        }
        let grid = Grid::cube(spec.dim(), r, n)?;
        let g = GridFunction::from_fn(&grid, f)?;
        let d = apply_mehler(spec, t, &g)?.distance(&g)?;
        if let Some(p) = previous {
            if (d - p).abs() <= sweep.plateau * d.max(p) {
                return Ok((d, r));
            }
        }
        previous = Some(d);
        r *= 2.0;
    }
}

/// With `A = [1]`: `‖P_t cos - cos‖_∞ ≥ 1` for every `t` (no strong
/// continuity on `C_b`), while `f = 1/(1+x²)` obeys `‖P_t f - f‖_∞ ≤ 0.2 t^{1/2}`.
pub fn strong_continuity_counterexample(
    name: &str,
    s: f64,
    t_set: &[f64],
    sweep: &DomainSweep,
    timed: bool,
) -> ExperimentReport {
    let spec = match SemigroupSpec::scalar(1.0, 1.0, s) {
        Ok(sp) => sp,
        Err(e) => return ExperimentReport::new(name, None, json!({ "s": s })).failed_precondition(&e),
    };
    let params = json!({ "tSet": t_set, "sweep": sweep });
    run_experiment(name, Some(&spec), params, timed, |r| {
        require_times(t_set)?;
        let t_min = t_set.iter().copied().fold(f64::INFINITY, f64::min);
        let needed = 2.0 * PI / t_min.exp_m1();
        if (sweep.max_points as f64) * sweep.spacing / 2.0 < needed {
            return Err(Error::DomainEscape {
                needed: (2.0 * needed / sweep.spacing).ceil() as usize,
                budget: sweep.max_points,
            });
        }
        let cos = |x: &[f64]| x[0].cos();
        let rational = |x: &[f64]| 1.0 / (1.0 + x[0] * x[0]);
        for &t in t_set {
            let (d, radius) = displacement_on_growing_boxes(&spec, t, &cos, sweep)?;
            r.estimate(format!("cos half width t={t}"), radius);
            r.check(Check::at_least(format!("cos t={t}"), d, 1.0));
        }
        for &t in t_set {
            let (d, radius) = displacement_on_growing_boxes(&spec, t, &rational, sweep)?;
            r.estimate(format!("rational half width t={t}"), radius);
            r.check(Check::at_most(format!("rational t={t}"), d, 0.2 * t.sqrt()));
        }
        Ok(())
    })
}

/// A smooth function with its first two derivatives.
#[derive(Clone)]
pub struct SmoothFunction {
    pub name: &'static str,
    pub eval: fn(f64) -> [f64; 3],
}

impl std::fmt::Debug for SmoothFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name)
    }
}

fn gauss(a: f64, x: f64) -> [f64; 3] {
    let g = (-a * x * x).exp();
    [g, -2.0 * a * x * g, (4.0 * a * a * x * x - 2.0 * a) * g]
}

fn trig(k: f64, x: f64, sine: bool) -> [f64; 3] {
    let (s, c) = (k * x).sin_cos();
    if sine {
        [s, k * c, -k * k * s]
    } else {
        [c, -k * s, -k * k * c]
    }
}

fn product(u: [f64; 3], v: [f64; 3]) -> [f64; 3] {
    [u[0] * v[0], u[1] * v[0] + u[0] * v[1], u[2] * v[0] + 2.0 * u[1] * v[1] + u[0] * v[2]]
}

fn sum(u: [f64; 3], v: [f64; 3], c: f64) -> [f64; 3] {
    [u[0] + c * v[0], u[1] + c * v[1], u[2] + c * v[2]]
}

/// Twenty smooth bounded functions on the line with closed-form derivatives.
pub fn landau_family() -> Vec<SmoothFunction> {
    vec![
        SmoothFunction { name: "cos(x)", eval: |x| trig(1.0, x, false) },
        SmoothFunction { name: "sin(2x)", eval: |x| trig(2.0, x, true) },
        SmoothFunction { name: "exp(-x^2/2)", eval: |x| gauss(0.5, x) },
        SmoothFunction {
            name: "1/(1+x^2)",
            eval: |x| {
                let d = 1.0 + x * x;
                [1.0 / d, -2.0 * x / (d * d), (6.0 * x * x - 2.0) / (d * d * d)]
            },
        },
        SmoothFunction {
            name: "tanh(x)",
            eval: |x| {
                let th = x.tanh();
                let s2 = 1.0 - th * th;
                [th, s2, -2.0 * th * s2]
            },
        },
        SmoothFunction {
            name: "atan(x)",
            eval: |x| {
                let d = 1.0 + x * x;
                [x.atan(), 1.0 / d, -2.0 * x / (d * d)]
            },
        },
        SmoothFunction { name: "x exp(-x^2/2)", eval: |x| product([x, 1.0, 0.0], gauss(0.5, x)) },
        SmoothFunction {
            name: "sech(x)",
            eval: |x| {
                let s = 1.0 / x.cosh();
                let th = x.tanh();
                [s, -s * th, s * (th * th - s * s)]
            },
        },
        SmoothFunction { name: "exp(-x^2) cos(3x)", eval: |x| product(gauss(1.0, x), trig(3.0, x, false)) },
        SmoothFunction { name: "sin(x) + sin(2x)/2", eval: |x| sum(trig(1.0, x, true), trig(2.0, x, true), 0.5) },
        SmoothFunction {
            name: "cos(x) + cos(sqrt2 x)",
            eval: |x| sum(trig(1.0, x, false), trig(std::f64::consts::SQRT_2, x, false), 1.0),
        },
        SmoothFunction {
            name: "sin(x)/(1+x^2)",
            eval: |x| {
                let d = 1.0 + x * x;
                product(trig(1.0, x, true), [1.0 / d, -2.0 * x / (d * d), (6.0 * x * x - 2.0) / (d * d * d)])
            },
        },
        SmoothFunction {
            name: "1/(1+x^4)",
            eval: |x| {
                let x2 = x * x;
                let d = 1.0 + x2 * x2;
                [1.0 / d, -4.0 * x2 * x / (d * d), (20.0 * x2 * x2 * x2 - 12.0 * x2) / (d * d * d)]
            },
        },
        SmoothFunction {
            name: "erf(x)",
            eval: |x| {
                let c = 2.0 / PI.sqrt();
                let g = (-x * x).exp();
                [statrs::function::erf::erf(x), c * g, -2.0 * x * c * g]
            },
        },
        SmoothFunction { name: "sin(x) exp(-x^2/8)", eval: |x| product(trig(1.0, x, true), gauss(0.125, x)) },
        SmoothFunction {
            name: "sech(x)^2",
            eval: |x| {
                let s2 = 1.0 / (x.cosh() * x.cosh());
                let th = x.tanh();
                [s2, -2.0 * s2 * th, 4.0 * s2 * th * th - 2.0 * s2 * s2]
            },
        },
        SmoothFunction { name: "cos(x) exp(-x^2/20)", eval: |x| product(trig(1.0, x, false), gauss(0.05, x)) },
        SmoothFunction {
            name: "x/(1+x^2)",
            eval: |x| {
                let d = 1.0 + x * x;
                [x / d, (1.0 - x * x) / (d * d), (2.0 * x * x * x - 6.0 * x) / (d * d * d)]
            },
        },
        SmoothFunction {
            name: "sin(x)^3",
            eval: |x| {
                let (s, c) = x.sin_cos();
                [s * s * s, 3.0 * s * s * c, 6.0 * s * c * c - 3.0 * s * s * s]
            },
        },
        SmoothFunction {
            name: "exp(cos(x))",
            eval: |x| {
                let (s, c) = x.sin_cos();
                let e = c.exp();
                [e, -s * e, (s * s - c) * e]
            },
        },
    ]
}

/// `‖f'‖²_∞ / (‖f‖_∞ ‖f''‖_∞)` on `[-R, R)` sampled at `points` nodes, for
/// every function of `family`; the maximum must stay below `bound`.
pub fn landau_inequality_check(
    name: &str,
    family: &[SmoothFunction],
    half_width: f64,
    points: usize,
    bound: f64,
    timed: bool,
) -> ExperimentReport {
    let params = json!({ "halfWidth": half_width, "points": points, "bound": bound, "count": family.len() });
    run_experiment(name, None, params, timed, |r| {
        let grid = Grid::cube(1, half_width, points)?;
        let mut worst = 0.0f64;
        for sf in family {
            let mut norms = [0.0f64; 3];
            for j in 0..points {
                let v = (sf.eval)(grid.coordinate(0, j));
                for (n, d) in norms.iter_mut().zip(v) {
                    *n = n.max(d.abs());
                }
            }
            if norms[0] == 0.0 || norms[2] == 0.0 {
                r.note(format!("{}: skipped, zero denominator", sf.name));
                continue;
            }
            let ratio = norms[1] * norms[1] / (norms[0] * norms[2]);
            r.estimate(sf.name, ratio);
            worst = worst.max(ratio);
        }
        r.check(Check::at_most("max ratio", worst, bound));
        Ok(())
    })
}

/// `[f]^{(3)}_α ≤ Γ(α+1) [f]^{(1)}_α` per input, with 5% slack. Inputs with
/// a diverged semigroup seminorm make the report inconclusive.
pub fn gamma_factor_experiment(
    name: &str,
    spec: &SemigroupSpec,
    inputs: &[(String, GridFunction, f64)],
    t_set: &[f64],
    lambda_set: &[f64],
    timed: bool,
) -> ExperimentReport {
    let labels: Vec<(&str, f64)> = inputs.iter().map(|(l, _, a)| (l.as_str(), *a)).collect();
    let params = json!({ "inputs": labels, "tSet": t_set, "lambdaSet": lambda_set });
    run_experiment(name, Some(spec), params, timed, |r| {
        let mut diverged = Vec::new();
        for (label, f, alpha) in inputs {
            let semi: SeminormEstimate = semigroup_holder(spec, f, *alpha, t_set)?;
            let res = resolvent_holder(spec, f, *alpha, lambda_set)?;
            if semi.diverged || res.diverged {
                diverged.push(label.clone());
            }
            let bound = statrs::function::gamma::gamma(alpha + 1.0) * semi.value * 1.05;
            r.estimate(format!("{label} semigroup"), semi.value);
            r.estimate(format!("{label} resolvent"), res.value);
            // 1e-9 absorbs the quadrature floor when both sides vanish
            r.check(Check::new(label.clone(), res.value, Relation::AtMost, bound, 1e-9));
        }
        if !diverged.is_empty() {
            return Err(invalid(format!("seminorm diverged on {diverged:?}")));
        }
        Ok(())
    })
}

/// Fits `‖∂_axis g_t‖_{L¹}` over `t_set`; expected exponent `-1/(2s)`.
#[allow(clippy::too_many_arguments)]
pub fn fomin_scaling_experiment(
    name: &str,
    spec: &SemigroupSpec,
    axis: usize,
    t_set: &[f64],
    sweep: SweepGrid,
    tolerance: f64,
    timed: bool,
) -> ExperimentReport {
    let params = json!({ "axis": axis, "tSet": t_set, "grid": sweep, "tolerance": tolerance });
    run_experiment(name, Some(spec), params, timed, |r| {
        require_times(t_set)?;
        let samples = t_set
            .iter()
            .map(|&t| {
                let grid = scaled_grid(spec, t, sweep.points, sweep.multiple)?;
                Ok((t, fomin_l1_norm(spec, t, axis, &grid)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let fit = fit_into(r, &samples)?;
        r.check(Check::within("exponent", fit.exponent, -spec.theta(), tolerance));
        Ok(())
    })
}
