//! A small closed expression algebra for vector-field coefficients.
//!
//! An expression is a sum of terms, each term a real constant times a
//! monomial `Π x_i^{α_i}` times per-coordinate trigonometric factors
//! `sin^{s_i}(x_i) cos^{c_i}(x_i)`. The algebra is closed under partial
//! differentiation and multiplication, which is everything the operator
//! expansion `Σ (X_k² + div X_k · X_k)` needs. No general simplification is
//! attempted beyond a canonical form (terms sorted by factor signature,
//! like terms merged, zeros dropped); in particular `sin² + cos² = 1` is
//! never applied, so equality means canonical-form equality.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Multiplicative content attached to one coordinate: `x^pow sin^sin cos^cos`.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default, Serialize, Deserialize,
)]
pub struct CoordFactor {
    pub pow: u32,
    pub sin: u32,
    pub cos: u32,
}

impl CoordFactor {
    fn is_trivial(&self) -> bool {
        self.pow == 0 && self.sin == 0 && self.cos == 0
    }

    fn eval(&self, x: f64) -> f64 {
        let mut v = x.powi(self.pow as i32);
        if self.sin > 0 {
            v *= x.sin().powi(self.sin as i32);
        }
        if self.cos > 0 {
            v *= x.cos().powi(self.cos as i32);
        }
        v
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    /// One factor bundle per coordinate; length equals the ambient dimension.
    pub factors: Vec<CoordFactor>,
}

/// Sum-of-terms expression in `dim` variables, kept in canonical form.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoefficientExpr {
    dim: usize,
    terms: Vec<Term>,
}

impl CoefficientExpr {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: vec![] }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::from_terms(
            dim,
            vec![Term {
                coeff: c,
                factors: vec![CoordFactor::default(); dim],
            }],
        )
    }

    /// The coordinate function `x_i`.
    pub fn var(dim: usize, i: usize) -> Self {
        Self::monomial(dim, 1.0, &{
            let mut e = vec![0u32; dim];
            e[i] = 1;
            e
        })
    }

    pub fn monomial(dim: usize, coeff: f64, exponents: &[u32]) -> Self {
        assert_eq!(exponents.len(), dim);
        let factors = exponents
            .iter()
            .map(|&p| CoordFactor {
                pow: p,
                ..Default::default()
            })
            .collect();
        Self::from_terms(dim, vec![Term { coeff, factors }])
    }

    /// `sin(x_i)`.
    pub fn sin(dim: usize, i: usize) -> Self {
        let mut factors = vec![CoordFactor::default(); dim];
        factors[i].sin = 1;
        Self::from_terms(dim, vec![Term { coeff: 1.0, factors }])
    }

    /// `cos(x_i)`.
    pub fn cos(dim: usize, i: usize) -> Self {
        let mut factors = vec![CoordFactor::default(); dim];
        factors[i].cos = 1;
        Self::from_terms(dim, vec![Term { coeff: 1.0, factors }])
    }

    pub fn from_terms(dim: usize, terms: Vec<Term>) -> Self {
        let mut e = Self { dim, terms };
        e.canonicalize();
        e
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True iff no term carries a monomial power, i.e. the expression is a
    /// combination of constants and trigonometric factors only.
    pub fn is_bounded(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.factors.iter().all(|f| f.pow == 0))
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.factors.iter().all(|f| f.is_trivial()))
    }

    fn canonicalize(&mut self) {
        self.terms.sort_by(|a, b| a.factors.cmp(&b.factors));
        let mut merged: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.factors == t.factors => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff != 0.0);
        self.terms = merged;
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::from_terms(self.dim, terms)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                coeff: t.coeff * s,
                factors: t.factors.clone(),
            })
            .collect();
        Self::from_terms(self.dim, terms)
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let factors = a
                    .factors
                    .iter()
                    .zip(&b.factors)
                    .map(|(fa, fb)| CoordFactor {
                        pow: fa.pow + fb.pow,
                        sin: fa.sin + fb.sin,
                        cos: fa.cos + fb.cos,
                    })
                    .collect();
                terms.push(Term {
                    coeff: a.coeff * b.coeff,
                    factors,
                });
            }
        }
        Self::from_terms(self.dim, terms)
    }

    /// Exact partial derivative with respect to `x_i`.
    pub fn partial(&self, i: usize) -> Self {
        assert!(i < self.dim);
        let mut terms = Vec::new();
        for t in &self.terms {
            let f = t.factors[i];
            // d/dx [x^p sin^s cos^c] expands into up to three terms.
            if f.pow > 0 {
                let mut factors = t.factors.clone();
                factors[i].pow -= 1;
                terms.push(Term {
                    coeff: t.coeff * f.pow as f64,
                    factors,
                });
            }
            if f.sin > 0 {
                let mut factors = t.factors.clone();
                factors[i].sin -= 1;
                factors[i].cos += 1;
                terms.push(Term {
                    coeff: t.coeff * f.sin as f64,
                    factors,
                });
            }
            if f.cos > 0 {
                let mut factors = t.factors.clone();
                factors[i].cos -= 1;
                factors[i].sin += 1;
                terms.push(Term {
                    coeff: -t.coeff * f.cos as f64,
                    factors,
                });
            }
        }
        Self::from_terms(self.dim, terms)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let mut acc = 0.0;
        for t in &self.terms {
            let mut v = t.coeff;
            for (f, &xi) in t.factors.iter().zip(x) {
                if !f.is_trivial() {
                    v *= f.eval(xi);
                }
            }
            acc += v;
        }
        acc
    }

    /// Canonical-form equality with exact coefficient comparison.
    pub fn structurally_eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.terms.len() == other.terms.len()
            && self
                .terms
                .iter()
                .zip(&other.terms)
                .all(|(a, b)| a.coeff == b.coeff && a.factors == b.factors)
    }
}

impl PartialEq for CoefficientExpr {
    fn eq(&self, other: &Self) -> bool {
        self.structurally_eq(other)
    }
}

impl fmt::Display for CoefficientExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", t.coeff)?;
            for (j, fac) in t.factors.iter().enumerate() {
                if fac.pow > 0 {
                    write!(f, "*x{}^{}", j + 1, fac.pow)?;
                }
                if fac.sin > 0 {
                    write!(f, "*sin(x{})^{}", j + 1, fac.sin)?;
                }
                if fac.cos > 0 {
                    write!(f, "*cos(x{})^{}", j + 1, fac.cos)?;
                }
            }
        }
        Ok(())
    }
}
