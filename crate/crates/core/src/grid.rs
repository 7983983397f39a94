//! Tensor grids on truncated boxes and grid-sampled functions.
//!
//! The grid covers `[-L_i, L_i]` per axis with `N_i` interior points,
//! spacing `h_i = 2 L_i / (N_i + 1)` and node coordinates
//! `x_i(j) = -L_i + (j+1) h_i`. Values on the boundary and outside the box
//! are taken as zero (homogeneous Dirichlet), the discrete surrogate of
//! vanishing at infinity. Node ordering is row-major with the first axis
//! slowest, so CSV dumps are reproducible.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::expr::CoefficientExpr;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub half_width: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(CoreError::InvalidParameter("grid needs >= 1 axis".into()));
        }
        for a in &axes {
            if a.points < 3 {
                return Err(CoreError::InvalidParameter(
                    "each axis needs >= 3 interior points".into(),
                ));
            }
            if a.half_width <= 0.0 {
                return Err(CoreError::InvalidParameter("half_width must be > 0".into()));
            }
        }
        Ok(Self { axes })
    }

    /// Uniform grid: same half-width and point count on every axis.
    pub fn uniform(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        Self::new(vec![Axis { half_width, points }; dim])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let a = &self.axes[axis];
        2.0 * a.half_width / (a.points + 1) as f64
    }

    pub fn coord(&self, axis: usize, idx: usize) -> f64 {
        -self.axes[axis].half_width + (idx + 1) as f64 * self.spacing(axis)
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    /// Quadrature weight of one node, `Π h_i`.
    pub fn volume_weight(&self) -> f64 {
        (0..self.dim()).map(|i| self.spacing(i)).product()
    }

    /// Row-major flat index of a multi-index (first axis slowest).
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for (axis, &m) in multi.iter().enumerate() {
            idx = idx * self.axes[axis].points + m;
        }
        idx
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut multi = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            let n = self.axes[axis].points;
            multi[axis] = flat % n;
            flat /= n;
        }
        multi
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(axis, &m)| self.coord(axis, m))
            .collect()
    }

    /// Flat index of the node closest to the origin.
    pub fn center_index(&self) -> usize {
        let multi: Vec<usize> = self.axes.iter().map(|a| a.points / 2).collect();
        self.flat_index(&multi)
    }

    /// True when every neighbor within `margin` steps stays interior.
    pub fn is_interior(&self, multi: &[usize], margin: usize) -> bool {
        multi
            .iter()
            .zip(&self.axes)
            .all(|(&m, a)| m >= margin && m + margin < a.points)
    }
}

/// A real-valued function sampled at the interior nodes of a grid.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(CoreError::DimensionMismatch {
                expected: grid.node_count(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.node_count();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Pointwise evaluation of a closure at the interior nodes.
    pub fn sample_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let values = crate::par::map_indexed(grid.node_count(), |i| f(&grid.point(i)));
        Self { grid, values }
    }

    /// Pointwise evaluation of a coefficient expression.
    pub fn sample_expr(grid: Arc<Grid>, e: &CoefficientExpr) -> Result<Self> {
        if e.dim() != grid.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: grid.dim(),
                got: e.dim(),
            });
        }
        Ok(Self::sample_fn(grid, |x| e.eval(x)))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `L^q` norm with the grid volume weight; `q = infinity` is `sup_norm`.
    pub fn lq_norm(&self, q: f64) -> f64 {
        if q.is_infinite() {
            return self.sup_norm();
        }
        let w = self.grid.volume_weight();
        let s: f64 = self.values.iter().map(|v| v.abs().powf(q)).sum();
        (w * s).powf(1.0 / q)
    }

    /// Largest |value| on the outermost interior layer; a truncation
    /// diagnostic for Dirichlet boxes.
    pub fn boundary_sup(&self) -> f64 {
        let mut m = 0.0_f64;
        for i in 0..self.values.len() {
            let multi = self.grid.multi_index(i);
            if !self.grid.is_interior(&multi, 1) {
                m = m.max(self.values[i].abs());
            }
        }
        m
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn diff_sup(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (&a, &b)| m.max((a - b).abs()))
    }
}
