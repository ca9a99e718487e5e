use std::f64::consts::PI;

use mehler_core::measures::{absolute_moment, density_of};
use mehler_core::semigroup::{apply_mehler, derivative_sup, resolvent};
use mehler_core::{gram_covariance, Grid, GridFunction, SemigroupSpec};
use proptest::prelude::*;

/// Circular Riemann-sum convolution on a 1-D grid, computed directly.
fn convolve(grid: &Grid, a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let o = grid.origin_index();
    let h = grid.spacing(0);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    // node i = (i - o) h, node j = (j - o) h, difference wraps
                    let k = (i + n + o - j) % n;
                    a[j] * b[k]
                })
                .sum::<f64>()
                * h
        })
        .collect()
}

#[test]
fn convolution_law_of_measures() {
    let grid = Grid::cube(1, 32.0, 2048).unwrap();
    for s in [0.6, 0.8, 1.0] {
        let spec = SemigroupSpec::scalar(0.0, 1.0, s).unwrap();
        let (t, u) = (0.3, 0.7);
        let gt = density_of(&spec, t, &grid).unwrap();
        let gu = density_of(&spec, u, &grid).unwrap();
        let gtu = density_of(&spec, t + u, &grid).unwrap();
        let conv = convolve(&grid, gt.values(), gu.values());
        let err = conv.iter().zip(gtu.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-6, "s = {s}: {err}");
    }
}

#[test]
fn ornstein_uhlenbeck_mehler_formula() {
    // P_t e^{-x²/2} for dX = aX dt + dW: e^{at}x shifted by N(0, σ²),
    // σ² = (e^{2at} - 1)/(2a)
    let a = -0.7;
    let spec = SemigroupSpec::scalar(a, 1.0, 1.0).unwrap();
    let grid = Grid::cube(1, 12.0, 512).unwrap();
    let f = GridFunction::from_fn(&grid, |x| (-0.5 * x[0] * x[0]).exp()).unwrap();
    for t in [0.1, 0.5, 2.0] {
        let var = ((2.0 * a * t).exp() - 1.0) / (2.0 * a);
        let m = (a * t).exp();
        let out = apply_mehler(&spec, t, &f).unwrap();
        let err = (0..grid.len())
            .map(|j| {
                let x = grid.coordinate(0, j);
                let want = (-(m * x).powi(2) / (2.0 * (1.0 + var))).exp() / (1.0 + var).sqrt();
                (out.values()[j] - want).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-5, "t = {t}: {err}");
    }
}

#[test]
fn two_dimensional_gaussian_density_with_drift() {
    let spec = SemigroupSpec::from_rows(2, &[-0.5, 1.0, -1.0, -0.5], &[1.0, 0.2, 0.2, 0.5], 1.0).unwrap();
    let cov = gram_covariance(spec.drift(), spec.diffusion(), 1.0).unwrap();
    let grid = Grid::cube(2, 6.0, 128).unwrap();
    let d = density_of(&spec, 1.0, &grid).unwrap();
    let inv = cov.clone().try_inverse().unwrap();
    let norm = 1.0 / (2.0 * PI * cov.determinant().sqrt());
    let err = (0..grid.len())
        .map(|j| {
            let y = grid.node(j);
            let q = y[0] * (inv[(0, 0)] * y[0] + inv[(0, 1)] * y[1]) + y[1] * (inv[(1, 0)] * y[0] + inv[(1, 1)] * y[1]);
            (d.values()[j] - norm * (-0.5 * q).exp()).abs()
        })
        .fold(0.0, f64::max);
    assert!(err < 1e-8, "{err}");
}

#[test]
fn resolvent_of_plane_wave_in_two_dimensions() {
    // A = 0: R(λ) e^{i ξ·x} = e^{i ξ·x} / (λ + ψ_1(ξ))
    let spec = SemigroupSpec::isotropic(2, 0.75).unwrap();
    let grid = Grid::cube(2, PI, 64).unwrap();
    let f = GridFunction::from_fn(&grid, |x| (x[0] + 2.0 * x[1]).cos()).unwrap();
    let psi = 0.5 * 5f64.powf(0.75);
    for lambda in [0.5, 3.0] {
        let out = resolvent(&spec, lambda, &f).unwrap();
        let want = f.scaled(1.0 / (lambda + psi));
        assert!(out.distance(&want).unwrap() < 1e-5);
    }
}

#[test]
fn heavy_moment_is_flagged() {
    let spec = SemigroupSpec::scalar(0.0, 1.0, 0.5).unwrap();
    let grid = Grid::cube(1, 256.0, 1 << 14).unwrap();
    let d = density_of(&spec, 1.0, &grid).unwrap();
    assert!(absolute_moment(&d, 1.0).unwrap().tail_divergent);
    assert!(!absolute_moment(&d, 0.5).unwrap().tail_divergent);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn densities_are_symmetric_probability_tables(s in 0.55f64..=1.0, t in 0.2f64..2.0) {
        let spec = SemigroupSpec::scalar(0.0, 1.0, s).unwrap();
        let grid = Grid::cube(1, 256.0, 1 << 14).unwrap();
        let d = density_of(&spec, t, &grid).unwrap();
        prop_assert!((d.mass - 1.0).abs() < 1e-6);
        prop_assert!(d.symmetry_residual < 1e-12);
        prop_assert!(d.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn contraction_and_positivity(
        s in 0.5f64..=1.0,
        t in 0.01f64..2.0,
        a in -1.0f64..1.0,
        vals in proptest::collection::vec(0.0f64..1.0, 128),
    ) {
        let spec = SemigroupSpec::scalar(a, 1.0, s).unwrap();
        let grid = Grid::cube(1, 8.0, 128).unwrap();
        let f = GridFunction::new(grid, vals).unwrap();
        let out = apply_mehler(&spec, t, &f).unwrap();
        prop_assert!(out.sup_norm() <= f.sup_norm() + 1e-12);
        prop_assert!(out.min() >= -1e-12);
    }

    #[test]
    fn derivative_grows_at_most_like_the_flow(a in -1.0f64..1.0, t in 0.05f64..1.0) {
        // ‖D P_t f‖ ≤ e^{t|a|} ‖Df‖ for ‖Df‖_∞ = 1
        let spec = SemigroupSpec::scalar(a, 1.0, 1.0).unwrap();
        let grid = Grid::cube(1, 4.0 * PI, 1024).unwrap();
        let f = GridFunction::from_fn(&grid, |x| (x[0] / 2.0).sin() * 2.0).unwrap();
        let d = derivative_sup(&spec, t, &f, 1).unwrap();
        prop_assert!(d <= (t * a.abs()).exp() * 1.01);
    }
}
