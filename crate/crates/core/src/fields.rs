//! Vector-field systems `X = (X_1, …, X_m)` and exact symbolic application
//! of `X_k`, `X_k²`, `div X_k` and the sums-of-squares operator
//! `Δ_X = Σ_k (X_k² + (div X_k) X_k)`.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::expr::CoefficientExpr;

/// A single vector field `X = Σ_i a_i(x) ∂/∂x_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    coeffs: Vec<CoefficientExpr>,
}

impl VectorField {
    pub fn new(coeffs: Vec<CoefficientExpr>) -> Result<Self> {
        let dim = coeffs.len();
        for c in &coeffs {
            if c.dim() != dim {
                return Err(CoreError::DimensionMismatch {
                    expected: dim,
                    got: c.dim(),
                });
            }
        }
        Ok(Self { coeffs })
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, i: usize) -> &CoefficientExpr {
        &self.coeffs[i]
    }

    pub fn coeffs(&self) -> &[CoefficientExpr] {
        &self.coeffs
    }

    /// `div X = Σ_i ∂a_i/∂x_i`, computed symbolically.
    pub fn divergence(&self) -> CoefficientExpr {
        let n = self.dim();
        let mut acc = CoefficientExpr::zero(n);
        for i in 0..n {
            acc = acc.add(&self.coeffs[i].partial(i));
        }
        acc
    }

    /// `X u = Σ_i a_i ∂u/∂x_i`.
    pub fn apply(&self, u: &CoefficientExpr) -> Result<CoefficientExpr> {
        if u.dim() != self.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim(),
                got: u.dim(),
            });
        }
        let mut acc = CoefficientExpr::zero(self.dim());
        for i in 0..self.dim() {
            acc = acc.add(&self.coeffs[i].mul(&u.partial(i)));
        }
        Ok(acc)
    }
}

/// Named classes of systems handled by the laboratory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SystemClass {
    Euclidean,
    Constant,
    TrigBounded,
    Grushin { k: u32 },
    Engel,
    Custom,
}

/// A system of vector fields with cached divergences and boundedness flags.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VectorFieldSystem {
    dim: usize,
    fields: Vec<VectorField>,
    class: SystemClass,
    divergences: Vec<CoefficientExpr>,
    all_coefficients_bounded: bool,
    all_derivatives_bounded: bool,
    all_constant: bool,
}

impl VectorFieldSystem {
    pub fn new(dim: usize, fields: Vec<VectorField>, class: SystemClass) -> Result<Self> {
        for f in &fields {
            if f.dim() != dim {
                return Err(CoreError::DimensionMismatch {
                    expected: dim,
                    got: f.dim(),
                });
            }
        }
        let divergences = fields.iter().map(|f| f.divergence()).collect();
        let all_coefficients_bounded = fields
            .iter()
            .all(|f| f.coeffs().iter().all(|c| c.is_bounded()));
        let all_derivatives_bounded = fields.iter().all(|f| {
            f.coeffs()
                .iter()
                .all(|c| (0..dim).all(|i| c.partial(i).is_bounded()))
        });
        let all_constant = fields
            .iter()
            .all(|f| f.coeffs().iter().all(|c| c.is_constant()));
        Ok(Self {
            dim,
            fields,
            class,
            divergences,
            all_coefficients_bounded,
            all_derivatives_bounded,
            all_constant,
        })
    }

    /// The named built-in systems.
    ///
    /// * `euclidean`: `X_i = ∂_i`, `i = 1..n`.
    /// * `constant`: `X_i = i·∂_i` (a simple anisotropic constant example).
    /// * `trig-bounded`: `X_k = sin(x_σ(k)) ∂_k` for odd `k`, `cos(x_σ(k)) ∂_k`
    ///   for even `k`, with `σ(k)` the next coordinate cyclically. For `n = 2`
    ///   this is `X_1 = sin(x_2)∂_1`, `X_2 = cos(x_1)∂_2`.
    /// * `grushin`: `X_1 = ∂_1`, `X_2 = x_1^k ∂_2` on `ℝ²`.
    /// * `engel`: `X_1 = ∂_1`, `X_2 = Σ_{i=2}^n x_1^{i-1} ∂_i`.
    pub fn builtin(tag: &str, n: usize, k: u32) -> Result<Self> {
        if n < 1 {
            return Err(CoreError::InvalidParameter("dimension must be >= 1".into()));
        }
        match tag {
            "euclidean" => {
                let fields = (0..n)
                    .map(|i| {
                        let mut coeffs = vec![CoefficientExpr::zero(n); n];
                        coeffs[i] = CoefficientExpr::constant(n, 1.0);
                        VectorField::new(coeffs)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::new(n, fields, SystemClass::Euclidean)
            }
            "constant" => {
                let fields = (0..n)
                    .map(|i| {
                        let mut coeffs = vec![CoefficientExpr::zero(n); n];
                        coeffs[i] = CoefficientExpr::constant(n, (i + 1) as f64);
                        VectorField::new(coeffs)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::new(n, fields, SystemClass::Constant)
            }
            "trig-bounded" => {
                if n < 2 {
                    return Err(CoreError::InvalidParameter(
                        "trig-bounded needs n >= 2".into(),
                    ));
                }
                let fields = (0..n)
                    .map(|i| {
                        let arg = (i + 1) % n;
                        let trig = if i % 2 == 0 {
                            CoefficientExpr::sin(n, arg)
                        } else {
                            CoefficientExpr::cos(n, arg)
                        };
                        let mut coeffs = vec![CoefficientExpr::zero(n); n];
                        coeffs[i] = trig;
                        VectorField::new(coeffs)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::new(n, fields, SystemClass::TrigBounded)
            }
            "grushin" => {
                if n != 2 {
                    return Err(CoreError::InvalidParameter("grushin lives on R^2".into()));
                }
                if k < 1 {
                    return Err(CoreError::InvalidParameter("grushin needs k >= 1".into()));
                }
                let x1 = VectorField::new(vec![
                    CoefficientExpr::constant(2, 1.0),
                    CoefficientExpr::zero(2),
                ])?;
                let x2 = VectorField::new(vec![
                    CoefficientExpr::zero(2),
                    CoefficientExpr::monomial(2, 1.0, &[k, 0]),
                ])?;
                Self::new(2, vec![x1, x2], SystemClass::Grushin { k })
            }
            "engel" => {
                if n < 2 {
                    return Err(CoreError::InvalidParameter("engel needs n >= 2".into()));
                }
                let mut c1 = vec![CoefficientExpr::zero(n); n];
                c1[0] = CoefficientExpr::constant(n, 1.0);
                let x1 = VectorField::new(c1)?;
                let mut c2 = vec![CoefficientExpr::zero(n); n];
                for (i, c) in c2.iter_mut().enumerate().skip(1) {
                    let mut exps = vec![0u32; n];
                    exps[0] = i as u32;
                    *c = CoefficientExpr::monomial(n, 1.0, &exps);
                }
                let x2 = VectorField::new(c2)?;
                Self::new(n, vec![x1, x2], SystemClass::Engel)
            }
            other => Err(CoreError::UnknownTag(other.to_string())),
        }
    }

    /// System with user-supplied constant coefficient matrix `a[k][i]`.
    pub fn constant_matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows
            .first()
            .map(|r| r.len())
            .ok_or_else(|| CoreError::InvalidParameter("empty coefficient matrix".into()))?;
        let fields = rows
            .iter()
            .map(|row| {
                if row.len() != n {
                    return Err(CoreError::DimensionMismatch {
                        expected: n,
                        got: row.len(),
                    });
                }
                VectorField::new(row.iter().map(|&c| CoefficientExpr::constant(n, c)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, fields, SystemClass::Constant)
    }

    /// System from an explicit coefficient table.
    pub fn custom(dim: usize, fields: Vec<VectorField>) -> Result<Self> {
        Self::new(dim, fields, SystemClass::Custom)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn class(&self) -> SystemClass {
        self.class
    }

    pub fn divergence(&self, k: usize) -> &CoefficientExpr {
        &self.divergences[k]
    }

    pub fn all_coefficients_bounded(&self) -> bool {
        self.all_coefficients_bounded
    }

    pub fn all_derivatives_bounded(&self) -> bool {
        self.all_derivatives_bounded
    }

    pub fn all_constant(&self) -> bool {
        self.all_constant
    }

    /// `Δ_X u = Σ_k (X_k² u + (div X_k) · X_k u)` computed symbolically.
    pub fn delta_x_symbolic(&self, u: &CoefficientExpr) -> Result<CoefficientExpr> {
        if u.dim() != self.dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim,
                got: u.dim(),
            });
        }
        let mut acc = CoefficientExpr::zero(self.dim);
        for (k, field) in self.fields.iter().enumerate() {
            let xu = field.apply(u)?;
            let xxu = field.apply(&xu)?;
            acc = acc.add(&xxu).add(&self.divergences[k].mul(&xu));
        }
        Ok(acc)
    }

    /// Second-order coefficient `c_{ij} = Σ_k a_{k,i} a_{k,j}` of the
    /// non-divergence-form expansion of `Δ_X`.
    pub fn second_order_coeff(&self, i: usize, j: usize) -> CoefficientExpr {
        let mut acc = CoefficientExpr::zero(self.dim);
        for f in &self.fields {
            acc = acc.add(&f.coeff(i).mul(f.coeff(j)));
        }
        acc
    }

    /// First-order coefficient `b_j = Σ_k (X_k a_{k,j} + (div X_k) a_{k,j})`.
    pub fn first_order_coeff(&self, j: usize) -> Result<CoefficientExpr> {
        let mut acc = CoefficientExpr::zero(self.dim);
        for (k, f) in self.fields.iter().enumerate() {
            acc = acc
                .add(&f.apply(f.coeff(j))?)
                .add(&self.divergences[k].mul(f.coeff(j)));
        }
        Ok(acc)
    }
}
