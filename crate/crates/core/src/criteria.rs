//! The acceptance catalog: named experiments grouped into numbered criteria.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{invalid, Result};
use crate::experiments::*;
use crate::grid::{Grid, GridFunction};
use crate::linalg::{gaussian_density, gram_covariance, SemigroupSpec};
use crate::measures::density_of;
use crate::sampler::StableSamplerState;
use crate::semigroup::{apply_mehler, apply_mehler_mc, resolvent, MCConfig};
use crate::seminorms::{dyadic, refined, zygmund_seminorm, KFunctionalProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Quick,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub profile: Profile,
    pub seed: u64,
    /// Record wall times in reports. Off by default so outputs are reproducible.
    pub timed: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            profile: Profile::Full,
            seed: 20240601,
            timed: false,
        }
    }
}

type Runner = fn(&str, &SuiteOptions) -> ExperimentReport;

pub struct CatalogEntry {
    pub name: &'static str,
    pub criterion: u32,
    run: Runner,
}

impl CatalogEntry {
    pub fn run(&self, opts: &SuiteOptions) -> ExperimentReport {
        (self.run)(self.name, opts)
    }
}

pub const CRITERIA: [(u32, &str); 9] = [
    (1, "closed-form density oracles"),
    (2, "moment scaling"),
    (3, "smoothing blow-up"),
    (4, "Fomin L1 scaling"),
    (5, "Hölder characterization"),
    (6, "strong continuity obstruction"),
    (7, "semigroup algebra"),
    (8, "Monte Carlo consistency"),
    (9, "interpolation instruments"),
];

pub fn catalog() -> Vec<CatalogEntry> {
    let e = |name, criterion, run: Runner| CatalogEntry { name, criterion, run };
    vec![
        e("density-cauchy-oracle", 1, cauchy_oracle),
        e("density-gaussian-oracle", 1, gaussian_oracle),
        e("moment-scaling-s0.5-g0.5", 2, |n, o| moment(n, o, 0.5, 0.5)),
        e("moment-scaling-s0.75-g1", 2, |n, o| moment(n, o, 0.75, 1.0)),
        e("moment-scaling-s0.9-g1.5", 2, |n, o| moment(n, o, 0.9, 1.5)),
        e("moment-cauchy-analytic", 2, cauchy_moment),
        e("smoothing-step-s0.5", 3, |n, o| smoothing(n, o, 0.5)),
        e("smoothing-step-s1", 3, |n, o| smoothing(n, o, 1.0)),
        e("fomin-scaling-s0.5", 4, |n, o| fomin(n, o, 0.5)),
        e("fomin-scaling-s0.7", 4, |n, o| fomin(n, o, 0.7)),
        e("fomin-scaling-s1", 4, |n, o| fomin(n, o, 1.0)),
        e("fomin-scaling-2d-rotation", 4, fomin_rotation),
        e("holder-characterization-s0.5-b0.5", 5, |n, o| holder(n, o, 0.5, 0.5)),
        e("holder-characterization-s0.8-b0.64", 5, |n, o| holder(n, o, 0.8, 0.64)),
        e("holder-characterization-s1-b0.6", 5, |n, o| holder(n, o, 1.0, 0.6)),
        e("strong-continuity-counterexample", 6, strong_continuity),
        e("semigroup-law", 7, semigroup_law),
        e("resolvent-identity", 7, resolvent_identity),
        e("contraction-positivity", 7, contraction_positivity),
        e("gamma-factor-s0.5", 7, |n, o| gamma_factor(n, o, 0.5)),
        e("gamma-factor-s1", 7, |n, o| gamma_factor(n, o, 1.0)),
        e("mc-consistency", 8, mc_consistency),
        e("sampler-ks", 8, sampler_ks),
        e("landau-inequality", 9, landau),
        e("k-functional-weierstrass", 9, k_functional),
        e("zygmund-affine", 9, zygmund_affine),
    ]
}

pub fn find(name: &str) -> Result<CatalogEntry> {
    catalog()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| invalid(format!("unknown experiment {name:?}")))
}

/// Reports of every experiment of criterion `id`.
pub fn run_criterion(id: u32, opts: &SuiteOptions) -> Vec<ExperimentReport> {
    catalog()
        .iter()
        .filter(|e| e.criterion == id)
        .map(|e| e.run(opts))
        .collect()
}

fn scalar(a: f64, s: f64) -> SemigroupSpec {
    SemigroupSpec::scalar(a, 1.0, s).expect("valid scalar spec")
}

fn rotation(omega: f64, s: f64) -> SemigroupSpec {
    SemigroupSpec::from_rows(2, &[0.0, omega, -omega, 0.0], &[1.0, 0.0, 0.0, 1.0], s).expect("valid rotation spec")
}

fn cauchy_oracle(name: &str, o: &SuiteOptions) -> ExperimentReport {
    let spec = scalar(0.0, 0.5);
    let params = json!({ "t": 1.0, "halfWidth": 64.0, "points": 4096 });
    run_experiment(name, Some(&spec), params, o.timed, |r| {
        let grid = Grid::cube(1, 64.0, 4096)?;
        let d = density_of(&spec, 1.0, &grid)?;
        let err = (0..grid.len())
            .map(|j| {
                let y = grid.coordinate(0, j);
                (d.values()[j] - 0.5 / (PI * (0.25 + y * y))).abs()
            })
            .fold(0.0, f64::max);
        r.estimate("atOrigin", d.at_origin());
        r.check(Check::at_most("sup error", err, 1e-4));
        Ok(())
    })
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
}

fn random_diffusion(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let b = random_matrix(rng, n);
    &b * b.transpose() + DMatrix::identity(n, n) * 0.2
}

fn gaussian_oracle(name: &str, o: &SuiteOptions) -> ExperimentReport {
    let params = json!({ "cases": 10, "seed": o.seed });
    run_experiment(name, None, params, o.timed, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
        for case in 0..10 {
            let dim = 1 + case % 2;
            let a = random_matrix(&mut rng, dim);
            let q = random_diffusion(&mut rng, dim);
            let t = rng.random_range(0.2..2.0);
            let spec = SemigroupSpec::new(a.clone(), q.clone(), 1.0)?;
            let cov = gram_covariance(&a, &q, t)?;
            let prec = cov.clone().try_inverse().ok_or_else(|| invalid("singular covariance"))?;
            // box of 9 standard deviations; Nyquist frequency where e^{-ψ} < e^{-30}
            let mut half = Vec::new();
            let mut points = Vec::new();
            for i in 0..dim {
                let h = 9.0 * cov[(i, i)].sqrt();
                let nyquist = (60.0 * prec[(i, i)]).sqrt();
                half.push(h);
                points.push(((2.0 * h * nyquist / PI).ceil() as usize).next_power_of_two());
            }
            let grid = Grid::new(half, points)?;
            let d = density_of(&spec, t, &grid)?;
            let mut err = 0.0f64;
            for j in 0..grid.len() {
                err = err.max((d.values()[j] - gaussian_density(&cov, &grid.node(j))?).abs());
            }
            r.check(Check::at_most(format!("case {case} (N={dim}, t={t:.3}) sup error"), err, 1e-8));
        }
        Ok(())
    })
}

fn moment_t_set() -> Vec<f64> {
    dyadic(-8, -1)
}

fn moment(name: &str, o: &SuiteOptions, s: f64, gamma: f64) -> ExperimentReport {
    let sweep = SweepGrid {
        points: 1 << 15,
        multiple: 1024.0,
    };
    moment_scaling_experiment(name, &scalar(0.0, s), gamma, &moment_t_set(), sweep, 0.05, o.timed)
}

fn cauchy_moment(name: &str, o: &SuiteOptions) -> ExperimentReport {
    let n = 1 << 15;
    let grid = Grid::cube(1, 0.055 * (n / 2) as f64, n).expect("valid grid");
    cauchy_moment_experiment(name, 0.5, &grid, 0.02, o.timed)
}

fn smoothing(name: &str, o: &SuiteOptions, s: f64) -> ExperimentReport {
    let grid = Grid::cube(1, 4.0 * PI, 1 << 15).expect("valid grid");
    let intercept = if s == 1.0 {
        1.0 / (2.0 * PI).sqrt()
    } else {
        2.0 / PI
    };
    smoothing_experiment(
        name,
        &scalar(0.0, s),
        &TestFunctionFamily::Step,
        1,
        &dyadic(-7, -2),
        &grid,
        Some(intercept),
        o.timed,
    )
}

fn fomin(name: &str, o: &SuiteOptions, s: f64) -> ExperimentReport {
    let sweep = SweepGrid {
        points: 1 << 14,
        multiple: 512.0,
    };
    fomin_scaling_experiment(name, &scalar(0.0, s), 0, &moment_t_set(), sweep, 0.05, o.timed)
}

fn fomin_rotation(name: &str, o: &SuiteOptions) -> ExperimentReport {
    let sweep = SweepGrid {
        points: 512,
        multiple: 64.0,
    };
    fomin_scaling_experiment(name, &rotation(0.5, 0.7), 0, &moment_t_set(), sweep, 0.07, o.timed)
}

fn holder(name: &str, o: &SuiteOptions, s: f64, beta: f64) -> ExperimentReport {
    let grid = Grid::cube(1, PI, 1 << 15).expect("valid grid");
    holder_characterization_experiment(name, &scalar(0.0, s), beta, &dyadic(-8, -1), &grid, 0.07, 0.15, o.timed)
}

fn strong_continuity(name: &str, o: &SuiteOptions) -> ExperimentReport {
    let sweep = DomainSweep {
        start_half_width: 4.0 * PI,
        spacing: PI / 32.0,
        max_points: 1 << 15,
        plateau: 0.01,
    };
    strong_continuity_counterexample(name, 0.5, &[0.05, 0.1, 0.2], &sweep, o.timed)
}

fn semigroup_law(name: &str, o: &SuiteOptions) -> ExperimentReport {
    let params = json!({ "pairs": [[0.25, 0.25], [0.25, 0.5], [0.5, 0.25], [0.5, 0.5]] });
    run_experiment(name, None, params, o.timed, |r| {
        let pairs = [(0.25, 0.25), (0.25, 0.5), (0.5, 0.25), (0.5, 0.5)];
        let residual = |spec: &SemigroupSpec, f: &GridFunction| -> Result<f64> {
            let mut worst = 0.0f64;
            for (t, u) in pairs {
                let lhs = apply_mehler(spec, t + u, f)?;
                let rhs = apply_mehler(spec, t, &apply_mehler(spec, u, f)?)?;
                worst = worst.max(lhs.distance(&rhs)? / f.sup_norm());
            }
            Ok(worst)
        };
        let line = Grid::cube(1, 8.0, 256)?;
        let f = GridFunction::from_fn(&line, |x| (-x[0] * x[0]).exp() + 0.3 * (PI * x[0] / 4.0).sin())?;
        for s in [0.5, 0.8, 1.0] {
            r.check(Check::at_most(format!("A=0, s={s}"), residual(&scalar(0.0, s), &f)?, 1e-6));
        }
        let plane = Grid::cube(2, 16.0, 256)?;
        let bump = GridFunction::from_fn(&plane, |x| (-(x[0] * x[0] + 0.5 * x[1] * x[1]) / 2.0).exp())?;
        for s in [0.7, 1.0] {
            let spec = SemigroupSpec::from_rows(2, &[-0.2, 0.5, -0.5, -0.1], &[1.0, 0.0, 0.0, 1.0], s)?;
            r.check(Check::at_most(format!("A≠0, s={s}"), residual(&spec, &bump)?, 1e-3));
        }
        Ok(())
    })
}

fn resolvent_identity(name: &str, o: &SuiteOptions) -> ExperimentReport {
    let params = json!({ "lambda": 1.0, "mu": 2.0 });
    run_experiment(name, None, params, o.timed, |r| {
        let (lambda, mu) = (1.0, 2.0);
        let line = Grid::cube(1, 8.0, 256)?;
        let cases = [
            (
                "A=0, s=0.5",
                scalar(0.0, 0.5),
                GridFunction::from_fn(&line, |x| (PI * x[0] / 4.0).cos() + 0.5 * (PI * x[0] / 2.0).sin())?,
            ),
            (
                "A=-0.5, s=0.7",
                scalar(-0.5, 0.7),
                GridFunction::from_fn(&line, |x| (-x[0] * x[0]).exp())?,
            ),
        ];
        for (label, spec, f) in cases {
            let rl = resolvent(&spec, lambda, &f)?;
            let rm = resolvent(&spec, mu, &f)?;
            let rlm = resolvent(&spec, lambda, &rm)?;
            let lhs = rl.sub(&rm)?;
            let res = lhs.distance(&rlm.scaled(mu - lambda))?;
            r.check(Check::at_most(label, res / f.sup_norm(), 5e-3));
        }
        Ok(())
    })
}

fn contraction_positivity(name: &str, o: &SuiteOptions) -> ExperimentReport {
    let params = json!({ "inputs": 50, "seed": o.seed });
    run_experiment(name, None, params, o.timed, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(o.seed ^ 0x5eed);
        let mut excess = f64::NEG_INFINITY;
        let mut lowest = f64::INFINITY;
        for case in 0..50 {
            let dim = 1 + case % 2;
            let spec = SemigroupSpec::new(
                random_matrix(&mut rng, dim),
                random_diffusion(&mut rng, dim),
                rng.random_range(0.5..=1.0),
            )?;
            let t = rng.random_range(0.05..2.0);
            let grid = Grid::cube(dim, 8.0, if dim == 1 { 256 } else { 64 })?;
            let signed: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = GridFunction::new(grid.clone(), signed)?;
            excess = excess.max(apply_mehler(&spec, t, &f)?.sup_norm() - f.sup_norm());
            let g = f.map(f64::abs)?;
            lowest = lowest.min(apply_mehler(&spec, t, &g)?.min());
        }
        r.check(Check::at_most("max ‖P_t f‖ - ‖f‖", excess, 1e-12));
        r.check(Check::at_least("min P_t f for f ≥ 0", lowest, -1e-12));
        Ok(())
    })
}

fn gamma_factor(name: &str, o: &SuiteOptions, s: f64) -> ExperimentReport {
    let grid = Grid::cube(1, PI, 1 << 14).expect("valid grid");
    let inputs: Result<Vec<(String, GridFunction, f64)>> = [0.3, 0.4, 0.5, 0.6, 0.7]
        .iter()
        .map(|&beta| {
            let w = TestFunctionFamily::weierstrass(beta)?.sample(&grid)?;
            Ok((format!("W_{beta}"), w, beta / (2.0 * s) - 0.1))
        })
        .collect();
    let spec = scalar(0.0, s);
    match inputs {
        Ok(inputs) => gamma_factor_experiment(name, &spec, &inputs, &dyadic(-9, 0), &dyadic(0, 13), o.timed),
        Err(e) => ExperimentReport::new(name, Some(&spec), json!({})).failed_precondition(&e),
    }
}

fn mc_consistency(name: &str, o: &SuiteOptions) -> ExperimentReport {
    let paths = match o.profile {
        Profile::Quick => 5_000,
        Profile::Full => 20_000,
    };
    let spec = rotation(0.5, 0.7);
    let t = 0.5;
    let params = json!({ "t": t, "paths": paths, "steps": 4, "seeds": 10, "points": 10, "seed": o.seed });
    run_experiment(name, Some(&spec), params, o.timed, |r| {
        let f = |x: &[f64]| x[0].cos() * x[1].cos() + 0.5 * (x[0] + 2.0 * x[1]).sin();
        let grid = Grid::cube(2, PI, 128)?;
        let exact = apply_mehler(&spec, t, &GridFunction::from_fn(&grid, f)?)?;
        let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
        let nodes: Vec<usize> = (0..10).map(|_| rng.random_range(0..grid.len())).collect();
        let points: Vec<Vec<f64>> = nodes.iter().map(|&j| grid.node(j)).collect();
        for k in 0..10u64 {
            let cfg = MCConfig::new(paths, 4, o.seed.wrapping_add(k))?;
            let est = apply_mehler_mc(&spec, t, f, &points, &cfg)?;
            let z = est
                .iter()
                .zip(&nodes)
                .map(|(e, &j)| (e.estimate - exact.values()[j]).abs() / e.stderr)
                .fold(0.0, f64::max);
            r.check(Check::at_most(format!("seed offset {k}: max |z|"), z, 4.0));
        }
        Ok(())
    })
}

fn sampler_ks(name: &str, o: &SuiteOptions) -> ExperimentReport {
    let spec = scalar(0.0, 0.7);
    let samples = 100_000;
    let params = json!({ "t": 1.0, "samples": samples, "seed": o.seed, "halfWidth": 512.0, "points": 1 << 15 });
    run_experiment(name, Some(&spec), params, o.timed, |r| {
        let grid = Grid::cube(1, 512.0, 1 << 15)?;
        let d = density_of(&spec, 1.0, &grid)?;
        let cdf = integrated_cdf(&grid, d.values());
        let mut sampler = StableSamplerState::new(o.seed, 0).sampler();
        let mut xs = (0..samples)
            .map(|_| Ok(sampler.levy_increment(&spec, 1.0)?[0]))
            .collect::<Result<Vec<f64>>>()?;
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = cdf(x);
                (c - i as f64 / n).abs().max((c - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        r.estimate("tailMass", d.tail_mass);
        r.check(Check::at_most("KS distance", ks, 0.005));
        Ok(())
    })
}

/// CDF of a symmetric density on a 1-D grid: trapezoid sums outward from the
/// origin with `F(0) = 1/2`, linear between nodes, constant beyond the box.
fn integrated_cdf<'a>(grid: &'a Grid, g: &[f64]) -> impl Fn(f64) -> f64 + 'a {
    let o = grid.origin_index();
    let h = grid.spacing(0);
    let mut right = vec![0.5; g.len() - o];
    for j in 1..right.len() {
        right[j] = right[j - 1] + 0.5 * h * (g[o + j - 1] + g[o + j]);
    }
    move |x: f64| {
        let upper = |y: f64| {
            let u = y / h;
            let j = u.floor() as usize;
            if j + 1 >= right.len() {
                return *right.last().unwrap();
            }
            let w = u - j as f64;
            right[j] * (1.0 - w) + right[j + 1] * w
        };
        if x >= 0.0 {
            upper(x)
        } else {
            1.0 - upper(-x)
        }
    }
}

fn landau(name: &str, o: &SuiteOptions) -> ExperimentReport {
    landau_inequality_check(name, &landau_family(), 20.0, 1 << 14, 4.1, o.timed)
}

fn k_functional(name: &str, o: &SuiteOptions) -> ExperimentReport {
    let xis = dyadic(-10, -2);
    let scales: Vec<f64> = (-28..=4).map(|k| 2f64.powf(k as f64 / 2.0)).collect();
    let params = json!({ "betas": [0.5, 0.7], "xi": xis, "scales": scales, "halfWidth": PI, "points": 1 << 14 });
    run_experiment(name, None, params, o.timed, |r| {
        let grid = Grid::cube(1, PI, 1 << 14)?;
        for beta in [0.5, 0.7] {
            let w = TestFunctionFamily::weierstrass(beta)?.sample(&grid)?;
            let profile = KFunctionalProfile::new(&w, &scales)?;
            let samples: Vec<(f64, f64)> = xis.iter().map(|&xi| (xi, profile.upper(xi).0)).collect();
            let fit = fit_scaling(&samples)?;
            r.check(Check::within(format!("exponent for β={beta}"), fit.exponent, beta, 0.1));
        }
        Ok(())
    })
}

fn zygmund_affine(name: &str, o: &SuiteOptions) -> ExperimentReport {
    run_experiment(name, None, json!({ "grids": [[1, 256], [2, 64]] }), o.timed, |r| {
        let line = Grid::cube(1, 1.0, 256)?;
        let affine1 = |x: &[f64]| 0.7 * x[0] + 0.2;
        let z1 = refined(&affine1, &line, |g| Ok(zygmund_seminorm(g)))?;
        r.check(Check::within("N=1", z1.value, 0.0, 1e-12));
        let plane = Grid::cube(2, 1.0, 64)?;
        let affine2 = |x: &[f64]| 0.3 * x[0] - 0.5 * x[1] + 1.0;
        let z2 = refined(&affine2, &plane, |g| Ok(zygmund_seminorm(g)))?;
        r.check(Check::within("N=2", z2.value, 0.0, 1e-12));
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_names_are_unique_and_cover_all_criteria() {
        let cat = catalog();
        let mut names: Vec<&str> = cat.iter().map(|e| e.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), cat.len());
        for (id, _) in CRITERIA {
            assert!(cat.iter().any(|e| e.criterion == id));
        }
        assert!(find("nope").is_err());
    }

    #[test]
    fn integrated_cdf_of_cauchy() {
        let grid = Grid::cube(1, 512.0, 1 << 15).unwrap();
        let g: Vec<f64> = (0..grid.len())
            .map(|j| {
                let y = grid.coordinate(0, j);
                1.0 / (PI * (1.0 + y * y))
            })
            .collect();
        let cdf = integrated_cdf(&grid, &g);
        for x in [-30.0, -1.0, 0.0, 0.3, 2.0, 100.0] {
            let want = 0.5 + f64::atan(x) / PI;
            assert!((cdf(x) - want).abs() < 1e-4, "{x}");
        }
    }
}
