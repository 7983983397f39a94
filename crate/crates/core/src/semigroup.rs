//! The heat semigroup `S(t) = exp(tA)` of the assembled operator, kernel
//! slices `h_t(x,·)`, and checks of the standing sub-Markov assumptions.
//!
//! Below 4096 nodes the exponential is computed densely (Padé-13 scaling
//! and squaring); above, by an Arnoldi polynomial approximation of the
//! exponential action. The kernel is defined relative to the grid
//! quadrature: `h_t(x,y) = exp(tA)_{x,y} / Πh_i`, so that
//! `∫ h_t(x,y) w(y) dy` is literally a weighted dot product.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::grid::GridFunction;
use crate::operator::SparseOperator;

const DENSE_NODE_LIMIT: usize = 4096;

/// Dense matrix exponential, Padé-13 with scaling and squaring.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm = a
        .column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let a = a / 2f64.powi(s as i32);
    let id = DMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let u = &a
        * (&a6 * (B[13] * &a6 + B[11] * &a4 + B[9] * &a2)
            + B[7] * &a6
            + B[5] * &a4
            + B[3] * &a2
            + B[1] * &id);
    let v = &a6 * (B[12] * &a6 + B[10] * &a4 + B[8] * &a2)
        + B[6] * &a6
        + B[4] * &a4
        + B[2] * &a2
        + B[0] * &id;
    let mut r = (&v - &u)
        .lu()
        .solve(&(&v + &u))
        .expect("Pade denominator is nonsingular");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SemigroupMethod {
    /// Dense below [`DENSE_NODE_LIMIT`] nodes, Krylov above.
    Auto,
    Dense,
    Krylov,
}

struct MeshCache {
    dt: f64,
    /// `mats[k] = exp(k·dt·A)`.
    mats: Vec<Arc<DMatrix<f64>>>,
}

/// Immutable handle on the semigroup of one assembled operator.
pub struct SemigroupAction {
    op: Arc<SparseOperator>,
    dense_a: Option<DMatrix<f64>>,
    use_dense: bool,
    tol: f64,
    expm_cache: RwLock<HashMap<u64, Arc<DMatrix<f64>>>>,
    mesh_cache: RwLock<Option<MeshCache>>,
    transpose: OnceLock<Arc<SparseOperator>>,
}

impl SemigroupAction {
    pub fn new(op: Arc<SparseOperator>, method: SemigroupMethod, tol: f64) -> Self {
        let use_dense = match method {
            SemigroupMethod::Auto => op.size() <= DENSE_NODE_LIMIT,
            SemigroupMethod::Dense => true,
            SemigroupMethod::Krylov => false,
        };
        let dense_a = use_dense.then(|| op.to_dense());
        Self {
            op,
            dense_a,
            use_dense,
            tol,
            expm_cache: RwLock::new(HashMap::new()),
            mesh_cache: RwLock::new(None),
            transpose: OnceLock::new(),
        }
    }

    pub fn with_default_tol(op: Arc<SparseOperator>) -> Self {
        Self::new(op, SemigroupMethod::Auto, 1e-10)
    }

    pub fn operator(&self) -> &Arc<SparseOperator> {
        &self.op
    }

    pub fn is_dense(&self) -> bool {
        self.use_dense
    }

    fn dense_expm(&self, t: f64) -> Arc<DMatrix<f64>> {
        if let Some(m) = self.expm_cache.read().unwrap().get(&t.to_bits()) {
            return m.clone();
        }
        let a = self.dense_a.as_ref().expect("dense method");
        let m = Arc::new(expm(&(a * t)));
        self.expm_cache
            .write()
            .unwrap()
            .insert(t.to_bits(), m.clone());
        m
    }

    /// Precompute `exp(k·dt·A)` for `k = 0..=jmax` (dense method only).
    /// Picard sweeps on a fixed Duhamel mesh reuse these powers.
    pub fn prepare_mesh(&self, dt: f64, jmax: usize) {
        if !self.use_dense {
            return;
        }
        {
            let cache = self.mesh_cache.read().unwrap();
            if let Some(c) = cache.as_ref() {
                if c.dt == dt && c.mats.len() > jmax {
                    return;
                }
            }
        }
        let n = self.op.size();
        let step = self.dense_expm(dt);
        let mut mats: Vec<Arc<DMatrix<f64>>> = Vec::with_capacity(jmax + 1);
        mats.push(Arc::new(DMatrix::identity(n, n)));
        for k in 1..=jmax {
            mats.push(Arc::new(mats[k - 1].as_ref() * step.as_ref()));
        }
        *self.mesh_cache.write().unwrap() = Some(MeshCache { dt, mats });
    }

    /// `exp(k·dt·A) v` from the mesh cache when available.
    pub fn evolve_steps(&self, v: &GridFunction, k: usize, dt: f64) -> Result<GridFunction> {
        if k == 0 {
            return Ok(v.clone());
        }
        if self.use_dense {
            let mat = {
                let cache = self.mesh_cache.read().unwrap();
                match cache.as_ref() {
                    Some(c) if c.dt == dt && k < c.mats.len() => Some(c.mats[k].clone()),
                    _ => None,
                }
            };
            let mat = mat.unwrap_or_else(|| self.dense_expm(k as f64 * dt));
            let out = mat.as_ref() * DVector::from_column_slice(v.values());
            return GridFunction::new(v.grid().clone(), out.data.into());
        }
        self.evolve(v, k as f64 * dt)
    }

    /// `exp(tA) v`.
    pub fn evolve(&self, v: &GridFunction, t: f64) -> Result<GridFunction> {
        if t < 0.0 {
            return Err(CoreError::InvalidParameter("time must be >= 0".into()));
        }
        if t == 0.0 {
            return Ok(v.clone());
        }
        if self.use_dense {
            let m = self.dense_expm(t);
            let out = m.as_ref() * DVector::from_column_slice(v.values());
            GridFunction::new(v.grid().clone(), out.data.into())
        } else {
            let out = krylov_expm_multiply(
                |x| self.op.apply_slice(x),
                self.op.spectral_bound(),
                v.values(),
                t,
                self.tol,
            )?;
            GridFunction::new(v.grid().clone(), out)
        }
    }

    /// `∫ h_t(x, y) dy` by grid quadrature, i.e. `(exp(tA) 1)(x)`.
    pub fn kernel_mass(&self, node: usize, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Err(CoreError::InvalidParameter("kernel needs t > 0".into()));
        }
        let ones = GridFunction::sample_fn(self.op.grid().clone(), |_| 1.0);
        Ok(self.evolve(&ones, t)?.values()[node])
    }

    /// The kernel slice `h_t(x, ·)` as a grid function.
    pub fn kernel_slice(&self, node: usize, t: f64) -> Result<GridFunction> {
        if t <= 0.0 {
            return Err(CoreError::InvalidParameter("kernel needs t > 0".into()));
        }
        let grid = self.op.grid().clone();
        let w = grid.volume_weight();
        if self.use_dense {
            let m = self.dense_expm(t);
            let vals: Vec<f64> = (0..self.op.size()).map(|j| m[(node, j)] / w).collect();
            GridFunction::new(grid, vals)
        } else {
            // Row x of exp(tA) = exp(tAᵀ) e_x.
            let at = self
                .transpose
                .get_or_init(|| Arc::new(self.op.transpose()))
                .clone();
            let mut e = vec![0.0; self.op.size()];
            e[node] = 1.0;
            let out = krylov_expm_multiply(
                |x| at.apply_slice(x),
                at.spectral_bound(),
                &e,
                t,
                self.tol,
            )?;
            GridFunction::new(grid, out.into_iter().map(|v| v / w).collect())
        }
    }

    /// `‖S(t)S(s)v − S(t+s)v‖_sup / ‖v‖_sup`.
    pub fn semigroup_defect(&self, t: f64, s: f64, v: &GridFunction) -> Result<f64> {
        let two_step = self.evolve(&self.evolve(v, s)?, t)?;
        let one_step = self.evolve(v, t + s)?;
        let norm = v.sup_norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        Ok(two_step.diff_sup(&one_step) / norm)
    }

    /// Fraction of strictly negative kernel values in `h_t(x, ·)`.
    pub fn negative_kernel_fraction(&self, node: usize, t: f64) -> Result<f64> {
        let slice = self.kernel_slice(node, t)?;
        let neg = slice.values().iter().filter(|&&v| v < 0.0).count();
        Ok(neg as f64 / slice.values().len() as f64)
    }
}

/// Free-space Gaussian heat kernel `(4πt)^{-n/2} exp(-|x-y|²/4t)`, the
/// oracle for the euclidean system away from the box boundary.
pub fn gaussian_kernel(n: usize, t: f64, x: &[f64], y: &[f64]) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (4.0 * std::f64::consts::PI * t).powf(-(n as f64) / 2.0) * (-d2 / (4.0 * t)).exp()
}

/// Arnoldi approximation of `exp(tA) v` with sub-stepping.
pub fn krylov_expm_multiply(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    spectral_bound: f64,
    v: &[f64],
    t: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    const M: usize = 30;
    let n = v.len();
    let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm0 == 0.0 || t == 0.0 {
        return Ok(v.to_vec());
    }
    // Substep so that tau * ||A|| stays small enough for the order-30
    // polynomial to reach the tolerance.
    let mut substeps = ((t * spectral_bound) / 5.0).ceil().max(1.0) as usize;
    'outer: for _attempt in 0..8 {
        let tau = t / substeps as f64;
        let mut w = v.to_vec();
        for _ in 0..substeps {
            let beta = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if beta == 0.0 {
                return Ok(w);
            }
            let mut basis: Vec<Vec<f64>> = Vec::with_capacity(M + 1);
            basis.push(w.iter().map(|x| x / beta).collect());
            let mut h = DMatrix::zeros(M + 1, M);
            let mut m_eff = M;
            for j in 0..M {
                let mut p = apply(&basis[j]);
                for (i, b) in basis.iter().enumerate() {
                    let hij: f64 = p.iter().zip(b).map(|(a, c)| a * c).sum();
                    h[(i, j)] = hij;
                    for (pk, bk) in p.iter_mut().zip(b) {
                        *pk -= hij * bk;
                    }
                }
                let hn = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                h[(j + 1, j)] = hn;
                if hn < 1e-12 * spectral_bound.max(1.0) {
                    m_eff = j + 1;
                    break;
                }
                basis.push(p.into_iter().map(|x| x / hn).collect());
            }
            let hm = h.view((0, 0), (m_eff, m_eff)).into_owned();
            let f = expm(&(hm * tau));
            // Saad's a-posteriori estimate from the first neglected term.
            let err = if m_eff == M {
                beta * h[(M, M - 1)].abs() * f[(M - 1, 0)].abs() * tau
            } else {
                0.0
            };
            if err > tol * norm0.max(1.0) {
                substeps *= 2;
                if substeps > 1_000_000 {
                    return Err(CoreError::Nonconvergence {
                        residual: err,
                        target: tol,
                        iterations: substeps,
                    });
                }
                continue 'outer;
            }
            let mut next = vec![0.0; n];
            for (j, b) in basis.iter().take(m_eff).enumerate() {
                let c = beta * f[(j, 0)];
                for (nk, bk) in next.iter_mut().zip(b) {
                    *nk += c * bk;
                }
            }
            w = next;
        }
        return Ok(w);
    }
    Err(CoreError::Nonconvergence {
        residual: f64::NAN,
        target: tol,
        iterations: substeps,
    })
}
