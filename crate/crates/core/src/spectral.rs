//! Discrete Fourier machinery on periodic grids: N-D transforms, the dual
//! frequency lattice, spectral multipliers and periodic cubic interpolation.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::grid::{Grid, MAX_DIM};

/// Angular frequency of DFT bin `k` (FFT order) on an axis with `n` points
/// and half width `r`: `ξ_k = π k / R` with `k ∈ [-n/2, n/2)`.
pub fn frequency(k: usize, n: usize, half_width: f64) -> f64 {
    let signed = if k < n / 2 { k as isize } else { k as isize - n as isize };
    std::f64::consts::PI * signed as f64 / half_width
}

/// Signed integer index of DFT bin `k`.
pub fn signed_bin(k: usize, n: usize) -> isize {
    if k < n / 2 {
        k as isize
    } else {
        k as isize - n as isize
    }
}

/// Per-axis frequency tables of the dual lattice of `grid`.
pub fn frequency_axes(grid: &Grid) -> Vec<Vec<f64>> {
    (0..grid.dim())
        .map(|axis| {
            let n = grid.points(axis);
            (0..n).map(|k| frequency(k, n, grid.half_width(axis))).collect()
        })
        .collect()
}

/// In-place unnormalized N-D DFT over a row-major array of the given shape.
/// `inverse` selects the `e^{+2πi jk/n}` kernel.
pub fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let total: usize = shape.iter().product();
    debug_assert_eq!(total, data.len());
    for axis in 0..shape.len() {
        let n = shape[axis];
        let stride: usize = shape[axis + 1..].iter().product();
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        if stride == 1 {
            fft.process(data);
            continue;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let block = n * stride;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (j, l) in line.iter_mut().enumerate() {
                    *l = data[base + j * stride];
                }
                fft.process(&mut line);
                for (j, l) in line.iter().enumerate() {
                    data[base + j * stride] = *l;
                }
            }
        }
    }
}

/// Fourier coefficients of a periodic grid function.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn forward(grid: &Grid, values: &[f64]) -> Self {
        let mut coeffs: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(&mut coeffs, grid.shape(), false);
        Self {
            grid: grid.clone(),
            coeffs,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Returns the coefficients multiplied pointwise by `m(ξ)`.
    pub fn multiplied(&self, m: impl Fn(&[f64]) -> Complex64) -> Spectrum {
        let axes = frequency_axes(&self.grid);
        let dim = self.grid.dim();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let idx = self.grid.unravel(i);
                let mut xi = [0.0; MAX_DIM];
                for a in 0..dim {
                    xi[a] = axes[a][idx[a]];
                }
                c * m(&xi[..dim])
            })
            .collect();
        Spectrum {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    /// Applies `m(flat index, coefficient)` to every coefficient.
    pub fn mapped(&self, m: impl Fn(usize, Complex64) -> Complex64) -> Spectrum {
        Spectrum {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().enumerate().map(|(i, &c)| m(i, c)).collect(),
        }
    }

    /// Multiplies by a real multiplier table laid out like the coefficients.
    pub fn multiplied_by_table(&self, table: &[f64]) -> Spectrum {
        Spectrum {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().zip(table).map(|(c, m)| c * m).collect(),
        }
    }

    /// Real part of the normalized inverse transform.
    pub fn inverse_real(&self) -> Vec<f64> {
        let mut data = self.coeffs.clone();
        fft_nd(&mut data, self.grid.shape(), true);
        let scale = 1.0 / self.grid.len() as f64;
        data.iter().map(|c| c.re * scale).collect()
    }
}

/// Evaluates a multiplier over the whole dual lattice in coefficient order.
pub fn lattice_table(grid: &Grid, m: impl Fn(&[f64]) -> f64 + Sync) -> Vec<f64> {
    use rayon::prelude::*;
    let axes = frequency_axes(grid);
    let dim = grid.dim();
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let idx = grid.unravel(i);
            let mut xi = [0.0; MAX_DIM];
            for a in 0..dim {
                xi[a] = axes[a][idx[a]];
            }
            m(&xi[..dim])
        })
        .collect()
}

/// Indices of the lattice points on the Nyquist faces (some axis at `k = -n/2`).
pub fn nyquist_face(grid: &Grid) -> Vec<usize> {
    (0..grid.len())
        .filter(|&i| {
            let idx = grid.unravel(i);
            (0..grid.dim()).any(|a| idx[a] == grid.points(a) / 2)
        })
        .collect()
}

/// Four-point Lagrange weights for fractional offset `u ∈ [0, 1)` relative
/// to the stencil `{-1, 0, 1, 2}`.
fn lagrange4(u: f64) -> [f64; 4] {
    [
        -u * (u - 1.0) * (u - 2.0) / 6.0,
        (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
        -(u + 1.0) * u * (u - 2.0) / 2.0,
        (u + 1.0) * u * (u - 1.0) / 6.0,
    ]
}

/// Separable cubic Lagrange interpolation of periodic grid data at `point`
/// (wrapped into the box).
pub fn interpolate_periodic(grid: &Grid, values: &[f64], point: &[f64]) -> f64 {
    let dim = grid.dim();
    let mut base = [0isize; MAX_DIM];
    let mut weights = [[0.0; 4]; MAX_DIM];
    for a in 0..dim {
        let h = grid.spacing(a);
        let pos = (point[a] + grid.half_width(a)) / h;
        let fl = pos.floor();
        base[a] = fl as isize;
        weights[a] = lagrange4(pos - fl);
    }
    let wrap = |i: isize, n: usize| -> usize { i.rem_euclid(n as isize) as usize };
    match dim {
        1 => {
            let n = grid.points(0);
            (0..4)
                .map(|p| weights[0][p] * values[wrap(base[0] - 1 + p as isize, n)])
                .sum()
        }
        2 => {
            let (n0, n1) = (grid.points(0), grid.points(1));
            let mut acc = 0.0;
            for p in 0..4 {
                let i0 = wrap(base[0] - 1 + p as isize, n0);
                let mut row = 0.0;
                for q in 0..4 {
                    let i1 = wrap(base[1] - 1 + q as isize, n1);
                    row += weights[1][q] * values[i0 * n1 + i1];
                }
                acc += weights[0][p] * row;
            }
            acc
        }
        _ => {
            let (n0, n1, n2) = (grid.points(0), grid.points(1), grid.points(2));
            let mut acc = 0.0;
            for p in 0..4 {
                let i0 = wrap(base[0] - 1 + p as isize, n0);
                for q in 0..4 {
                    let i1 = wrap(base[1] - 1 + q as isize, n1);
                    let w = weights[0][p] * weights[1][q];
                    for r in 0..4 {
                        let i2 = wrap(base[2] - 1 + r as isize, n2);
                        acc += w * weights[2][r] * values[(i0 * n1 + i1) * n2 + i2];
                    }
                }
            }
            acc
        }
    }
}
