//! Uniform periodic tensor grids on boxes `[-R_i, R_i)` and real samples on them.
//!
//! Nodes are `x_j = -R + j·h` for `j = 0..n`, so the right endpoint is not a
//! node and the grid is the fundamental domain of a periodic lattice. Node
//! ordering is row-major: the last axis varies fastest.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const MAX_DIM: usize = 3;
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_width: Vec<f64>,
    points: Vec<usize>,
}

impl Grid {
    pub fn new(half_width: Vec<f64>, points: Vec<usize>) -> Result<Self> {
        let dim = half_width.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(invalid(format!("grid dimension must be 1..={MAX_DIM}, got {dim}")));
        }
        if points.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: points.len(),
            });
        }
        for (&r, &n) in half_width.iter().zip(&points) {
            if !(r > 0.0 && r.is_finite()) {
                return Err(invalid(format!("half width must be positive and finite, got {r}")));
            }
            if n < MIN_POINTS || !n.is_power_of_two() {
                return Err(invalid(format!(
                    "points per axis must be a power of two >= {MIN_POINTS}, got {n}"
                )));
            }
        }
        Ok(Self { half_width, points })
    }

    /// Same half width and point count on every axis.
    pub fn cube(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        Self::new(vec![half_width; dim], vec![points; dim])
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }
    pub fn half_width(&self, axis: usize) -> f64 {
        self.half_width[axis]
    }
    pub fn half_widths(&self) -> &[f64] {
        &self.half_width
    }
    pub fn points(&self, axis: usize) -> usize {
        self.points[axis]
    }
    pub fn shape(&self) -> &[usize] {
        &self.points
    }
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.half_width[axis] / self.points[axis] as f64
    }
    pub fn max_spacing(&self) -> f64 {
        (0..self.dim()).map(|i| self.spacing(i)).fold(0.0, f64::max)
    }
    /// Volume element `∏ h_i` of the Riemann sum.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.spacing(i)).product()
    }

    pub fn coordinate(&self, axis: usize, j: usize) -> f64 {
        -self.half_width[axis] + j as f64 * self.spacing(axis)
    }

    /// Multi-index of a flat node index.
    pub fn unravel(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for axis in (0..self.dim()).rev() {
            idx[axis] = flat % self.points[axis];
            flat /= self.points[axis];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.points)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Coordinates of node `flat`, written into `out[..dim]`.
    pub fn node_into(&self, flat: usize, out: &mut [f64]) {
        let idx = self.unravel(flat);
        for axis in 0..self.dim() {
            out[axis] = self.coordinate(axis, idx[axis]);
        }
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.node_into(flat, &mut x);
        x
    }

    /// Index of the node at the origin (exists because `n` is even).
    pub fn origin_index(&self) -> usize {
        let idx: Vec<usize> = self.points.iter().map(|n| n / 2).collect();
        self.ravel(&idx)
    }
}

/// Real-valued samples of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                node: grid.node(i),
                value: v,
            });
        }
        Ok(Self { grid, values })
    }

    /// Samples `expr` at every node (parallel, order-independent result).
    pub fn from_fn<F>(grid: &Grid, expr: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let dim = grid.dim();
        let values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let mut x = [0.0; MAX_DIM];
                grid.node_into(i, &mut x);
                expr(&x[..dim])
            })
            .collect();
        Self::new(grid.clone(), values)
    }

    pub fn constant(grid: &Grid, c: f64) -> Result<Self> {
        Self::new(grid.clone(), vec![c; grid.len()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn value_at_origin(&self) -> f64 {
        self.values[self.grid.origin_index()]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Pointwise `self - other` on the same grid.
    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(invalid("grid functions live on different grids"));
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// `sup |self - other|`.
    pub fn distance(&self, other: &GridFunction) -> Result<f64> {
        Ok(self.sub(other)?.sup_norm())
    }

    /// CSV with `#`-prefixed metadata lines, a header row, then one node per
    /// row: coordinates followed by the value, 17 significant digits.
    pub fn to_csv(&self, metadata: &[String]) -> String {
        write_csv(&self.grid, &self.values, "value", metadata)
    }
}

/// Formats a float with 17 significant digits (lossless for `f64`).
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn write_csv(grid: &Grid, values: &[f64], column: &str, metadata: &[String]) -> String {
    let dim = grid.dim();
    let mut out = String::with_capacity(values.len() * (24 * (dim + 1)) + 64);
    for line in metadata {
        let _ = writeln!(out, "# {line}");
    }
    for axis in 0..dim {
        let _ = write!(out, "x{axis},");
    }
    let _ = writeln!(out, "{column}");
    let mut x = [0.0; MAX_DIM];
    for (i, v) in values.iter().enumerate() {
        grid.node_into(i, &mut x);
        for xi in &x[..dim] {
            out.push_str(&fmt17(*xi));
            out.push(',');
        }
        out.push_str(&fmt17(*v));
        out.push('\n');
    }
    out
}

/// Parses the numeric rows of a CSV produced by [`GridFunction::to_csv`].
pub fn parse_csv_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| invalid(format!("bad CSV field {c:?}: {e}"))))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::cube(1, 1.0, 6).is_err());
        assert!(Grid::cube(1, 1.0, 12).is_err());
        assert!(Grid::cube(4, 1.0, 8).is_err());
        assert!(Grid::cube(1, 0.0, 8).is_err());
        assert!(Grid::new(vec![1.0, 1.0], vec![8]).is_err());
    }

    #[test]
    fn spacing_and_nodes() {
        let g = Grid::new(vec![PI, 2.0], vec![8, 16]).unwrap();
        assert_eq!(g.spacing(0), 2.0 * PI / 8.0);
        assert_eq!(g.spacing(1), 0.25);
        assert_eq!(g.len(), 128);
        assert_eq!(g.node(0), vec![-PI, -2.0]);
        // last axis fastest
        assert_eq!(g.node(1), vec![-PI, -1.75]);
        assert_eq!(g.node(16)[0], -PI + PI / 4.0);
        let o = g.origin_index();
        assert_eq!(g.node(o), vec![0.0, 0.0]);
        for i in [0, 5, 77, 127] {
            assert_eq!(g.ravel(&g.unravel(i)[..2]), i);
        }
    }

    #[test]
    fn eval_constant_and_cos() {
        let g = Grid::cube(1, PI, 8).unwrap();
        let one = GridFunction::from_fn(&g, |_| 1.0).unwrap();
        assert!(one.values().iter().all(|&v| v == 1.0));
        let c = GridFunction::from_fn(&g, |x| x[0].cos()).unwrap();
        for (j, v) in c.values().iter().enumerate() {
            assert_eq!(*v, (-PI + j as f64 * PI / 4.0).cos());
        }
        assert_eq!(c.sup_norm(), 1.0);
    }

    #[test]
    fn eval_reports_non_finite_node() {
        let g = Grid::cube(1, 1.0, 8).unwrap();
        let err = GridFunction::from_fn(&g, |x| 1.0 / x[0]).unwrap_err();
        match err {
            Error::NonFinite { node, .. } => assert_eq!(node, vec![0.0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let g = Grid::cube(2, 1.3, 8).unwrap();
        let f = GridFunction::from_fn(&g, |x| (x[0] * 3.1).sin() / 7.0 + x[1]).unwrap();
        let csv = f.to_csv(&["config 1234".into()]);
        assert!(csv.starts_with("# config 1234\nx0,x1,value\n"));
        let rows = parse_csv_rows(&csv).unwrap();
        assert_eq!(rows.len(), g.len());
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r[2], f.values()[i]);
            assert_eq!(&r[..2], &g.node(i)[..]);
        }
    }
}
