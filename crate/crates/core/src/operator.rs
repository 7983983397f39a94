//! Assembly of the discrete `Δ_X` as a sparse matrix over interior nodes.
//!
//! The operator is discretized in non-divergence form,
//! `Δ_X = Σ_{i,j} c_{ij}(x) ∂_i∂_j + Σ_j b_j(x) ∂_j` with
//! `c_{ij} = Σ_k a_{k,i} a_{k,j}` and `b_j = Σ_k (X_k a_{k,j} + div X_k · a_{k,j})`,
//! using second-order central differences: 3-point stencils for the pure
//! terms, 4-point cross stencils for the mixed terms, 2-point centered
//! stencils for the first-order terms. Coefficients are frozen at the
//! stencil center; exterior values are zero (Dirichlet).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{CoreError, Result};
use crate::expr::CoefficientExpr;
use crate::fields::VectorFieldSystem;
use crate::grid::{Grid, GridFunction};
use crate::par;

/// Compressed-row sparse matrix over the interior nodes of a grid.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
    symmetric: bool,
    spectral_bound: f64,
    grid: Arc<Grid>,
}

impl SparseOperator {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    /// Gershgorin bound on the largest eigenvalue magnitude.
    pub fn spectral_bound(&self) -> f64 {
        self.spectral_bound
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn row_apply(&self, row: usize, v: &[f64]) -> f64 {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        let mut acc = 0.0;
        for k in lo..hi {
            acc += self.vals[k] * v[self.col_idx[k]];
        }
        acc
    }

    pub fn apply_slice(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n);
        par::map_indexed(self.n, |row| self.row_apply(row, v))
    }

    /// Sequential matrix-vector product (bench comparison path).
    pub fn apply_slice_seq(&self, v: &[f64]) -> Vec<f64> {
        par::map_indexed_seq(self.n, |row| self.row_apply(row, v))
    }

    pub fn apply(&self, v: &GridFunction) -> GridFunction {
        GridFunction::new(self.grid.clone(), self.apply_slice(v.values())).expect("grid match")
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        for k in lo..hi {
            if self.col_idx[k] == col {
                return self.vals[k];
            }
        }
        0.0
    }

    pub fn row_sum(&self, row: usize) -> f64 {
        self.vals[self.row_ptr[row]..self.row_ptr[row + 1]].iter().sum()
    }

    /// Max-norm asymmetry `‖A − Aᵀ‖_max` and `‖A‖_max`.
    pub fn asymmetry(&self) -> (f64, f64) {
        let mut asym = 0.0_f64;
        let mut amax = 0.0_f64;
        for row in 0..self.n {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                let col = self.col_idx[k];
                amax = amax.max(self.vals[k].abs());
                asym = asym.max((self.vals[k] - self.entry(col, row)).abs());
            }
        }
        (asym, amax)
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); self.n];
        for row in 0..self.n {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                rows[self.col_idx[k]].insert(row, self.vals[k]);
            }
        }
        Self::from_rows(rows, self.symmetric, self.grid.clone())
    }

    fn from_rows(rows: Vec<BTreeMap<usize, f64>>, symmetric: bool, grid: Arc<Grid>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in rows {
            for (c, v) in r {
                if v != 0.0 {
                    col_idx.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let mut op = Self {
            n,
            row_ptr,
            col_idx,
            vals,
            symmetric,
            spectral_bound: 0.0,
            grid,
        };
        op.spectral_bound = (0..n)
            .map(|row| {
                op.vals[op.row_ptr[row]..op.row_ptr[row + 1]]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0_f64, f64::max);
        op
    }

    /// Coordinate-list text export: `row,col,value` with 17 significant digits.
    pub fn to_coo_text(&self) -> String {
        let mut out = String::new();
        for row in 0..self.n {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                writeln!(out, "{},{},{:.16e}", row, self.col_idx[k], self.vals[k]).unwrap();
            }
        }
        out
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for row in 0..self.n {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                m[(row, self.col_idx[k])] = self.vals[k];
            }
        }
        m
    }
}

/// Assemble the discrete `Δ_X` for a system on a grid.
pub fn assemble_operator(system: &VectorFieldSystem, grid: &Arc<Grid>) -> Result<SparseOperator> {
    let n_dim = grid.dim();
    if system.dim() != n_dim {
        return Err(CoreError::DimensionMismatch {
            expected: n_dim,
            got: system.dim(),
        });
    }

    // Symbolic coefficients, evaluated per node during the sweep.
    let mut c: Vec<Vec<CoefficientExpr>> = Vec::with_capacity(n_dim);
    for i in 0..n_dim {
        let mut row = Vec::with_capacity(n_dim);
        for j in 0..n_dim {
            row.push(system.second_order_coeff(i, j));
        }
        c.push(row);
    }
    let b: Vec<CoefficientExpr> = (0..n_dim)
        .map(|j| system.first_order_coeff(j))
        .collect::<Result<Vec<_>>>()?;

    let node_count = grid.node_count();
    let h: Vec<f64> = (0..n_dim).map(|i| grid.spacing(i)).collect();

    let rows: Vec<BTreeMap<usize, f64>> = par::map_indexed(node_count, |flat| {
        let multi = grid.multi_index(flat);
        let x = grid.point(flat);
        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        let mut add = |m: &[usize], offs: &[(usize, isize)], v: f64| {
            // Neighbor with per-axis offsets; outside the box contributes 0.
            let mut nb = m.to_vec();
            for &(axis, d) in offs {
                let ni = nb[axis] as isize + d;
                if ni < 0 || ni >= grid.axes()[axis].points as isize {
                    return;
                }
                nb[axis] = ni as usize;
            }
            *row.entry(grid.flat_index(&nb)).or_insert(0.0) += v;
        };
        for i in 0..n_dim {
            let cii = c[i][i].eval(&x);
            if cii != 0.0 {
                let w = cii / (h[i] * h[i]);
                add(&multi, &[(i, 1)], w);
                add(&multi, &[], -2.0 * w);
                add(&multi, &[(i, -1)], w);
            }
            for j in (i + 1)..n_dim {
                // c_ij + c_ji share one cross stencil.
                let cij = c[i][j].eval(&x) + c[j][i].eval(&x);
                if cij != 0.0 {
                    let w = cij / (4.0 * h[i] * h[j]);
                    add(&multi, &[(i, 1), (j, 1)], w);
                    add(&multi, &[(i, 1), (j, -1)], -w);
                    add(&multi, &[(i, -1), (j, 1)], -w);
                    add(&multi, &[(i, -1), (j, -1)], w);
                }
            }
            let bi = b[i].eval(&x);
            if bi != 0.0 {
                let w = bi / (2.0 * h[i]);
                add(&multi, &[(i, 1)], w);
                add(&multi, &[(i, -1)], -w);
            }
        }
        row
    });

    Ok(SparseOperator::from_rows(
        rows,
        system.all_constant(),
        grid.clone(),
    ))
}

/// Result of a grid-refinement order study.
#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub spacings: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of log(error) vs log(h); `None` when the errors
    /// are at rounding level (stencil-exact case).
    pub order: Option<f64>,
    pub monotone: bool,
}

/// Richardson-style estimate of the interior truncation order: discrete
/// operator applied to a sampled expression against the sampled symbolic
/// `Δ_X u`, max-norm over nodes with a full interior stencil that lie in
/// the fixed subbox `|x_i| <= 0.75 L_i` (so the measured region does not
/// creep toward the boundary as the grid refines).
pub fn convergence_order(
    system: &VectorFieldSystem,
    u: &CoefficientExpr,
    grids: &[Arc<Grid>],
) -> Result<ConvergenceReport> {
    if grids.len() < 3 {
        return Err(CoreError::InvalidParameter(
            "need >= 3 grids with halved spacings".into(),
        ));
    }
    let exact = system.delta_x_symbolic(u)?;
    let mut spacings = Vec::new();
    let mut errors = Vec::new();
    for grid in grids {
        let op = assemble_operator(system, grid)?;
        let uu = GridFunction::sample_expr(grid.clone(), u)?;
        let au = op.apply(&uu);
        let ex = GridFunction::sample_expr(grid.clone(), &exact)?;
        let mut err = 0.0_f64;
        for i in 0..grid.node_count() {
            let multi = grid.multi_index(i);
            if !grid.is_interior(&multi, 1) {
                continue;
            }
            let x = grid.point(i);
            let in_box = x
                .iter()
                .zip(grid.axes())
                .all(|(xi, a)| xi.abs() <= 0.75 * a.half_width);
            if in_box {
                err = err.max((au.values()[i] - ex.values()[i]).abs());
            }
        }
        spacings.push(grid.spacing(0));
        errors.push(err);
    }
    let scale: f64 = errors.iter().fold(0.0_f64, |m, &e| m.max(e));
    let order = if scale < 1e-10 {
        None
    } else {
        let xs: Vec<f64> = spacings.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = errors.iter().map(|e| e.max(1e-300).ln()).collect();
        Some(crate::fit::linear_fit(&xs, &ys).slope)
    };
    let monotone = errors.windows(2).all(|w| w[1] <= w[0]);
    Ok(ConvergenceReport {
        spacings,
        errors,
        order,
        monotone,
    })
}
