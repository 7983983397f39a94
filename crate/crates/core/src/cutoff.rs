//! Smooth compactly supported cutoff profiles.
//!
//! The spatial profile is 1 on a plateau, decreases along a transition
//! interval of unit length, and vanishes beyond it. On the transition,
//! `Φ(z) = c ∫_z^b w(s) ds` with `w(s) = (s-a)²(b-s)^κ` (a, b the
//! transition endpoints), so `Φ', Φ''` match continuously at both ends
//! and `Φ` vanishes like `(b-z)^{κ+1}`. The time profile is the
//! classical interior bump `exp(4 - 1/(t(1-t)))` on (0,1).

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::quad;

/// `Φ` with plateau `[0,1]` and transition `[1,2]`, or the shifted
/// variant with plateau `(-∞,0]` and transition `[0,1]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub kappa: u32,
    shifted: bool,
}

impl CutoffProfile {
    pub fn new(kappa: u32) -> Self {
        Self {
            kappa,
            shifted: false,
        }
    }

    /// Plateau on `(-∞, 0]`, transition on `[0, 1]`.
    pub fn shifted(kappa: u32) -> Self {
        Self {
            kappa,
            shifted: true,
        }
    }

    /// Transition interval `[a, b]`.
    pub fn transition(&self) -> (f64, f64) {
        if self.shifted {
            (0.0, 1.0)
        } else {
            (1.0, 2.0)
        }
    }

    /// Normalization `c = 1/∫ w = (κ+1)(κ+2)(κ+3)/2`.
    pub fn norm_constant(&self) -> f64 {
        let k = self.kappa as f64;
        (k + 1.0) * (k + 2.0) * (k + 3.0) / 2.0
    }

    /// `(Φ, Φ', Φ'')` in closed form.
    pub fn eval(&self, z: f64) -> (f64, f64, f64) {
        let (a, b) = self.transition();
        if z <= a {
            return (1.0, 0.0, 0.0);
        }
        if z >= b {
            return (0.0, 0.0, 0.0);
        }
        let k = self.kappa as f64;
        let c = self.norm_constant();
        // With y = b - z: w = (1-y)² y^κ and
        // ∫_z^b w = y^{κ+1}/(κ+1) - 2y^{κ+2}/(κ+2) + y^{κ+3}/(κ+3).
        let y = b - z;
        let yk = y.powi(self.kappa as i32);
        let phi = c * yk * y * (1.0 / (k + 1.0) - 2.0 * y / (k + 2.0) + y * y / (k + 3.0));
        let w = (1.0 - y) * (1.0 - y) * yk;
        // dw/dz = 2(1-y)y^κ - κ(1-y)² y^{κ-1}
        let dw = 2.0 * (1.0 - y) * yk
            - if self.kappa == 0 {
                0.0
            } else {
                k * (1.0 - y) * (1.0 - y) * y.powi(self.kappa as i32 - 1)
            };
        (phi, -c * w, -c * dw)
    }
}

/// `Φ₁(t) = exp(4 - 1/(t(1-t)))` on (0,1), zero elsewhere; sup = 1 at 1/2.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct TimeBump;

impl TimeBump {
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        (4.0 - 1.0 / (t * (1.0 - t))).exp()
    }

    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        if t <= 0.0 || t >= 1.0 {
            return (0.0, 0.0);
        }
        let g = t * (1.0 - t);
        let v = (4.0 - 1.0 / g).exp();
        (v, v * (1.0 - 2.0 * t) / (g * g))
    }
}

/// How the transition-quotient integral is weighted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuotientWeight {
    Plain,
    /// Radial weight `z^{n-2}` used by the critical-log family.
    Radial { n: usize },
}

#[derive(Clone, Copy, Debug)]
pub struct IntegrabilityReport {
    pub kappa: u32,
    pub p: f64,
    /// Endpoint exponent of the integrand, `κ + 1 - 2p'`.
    pub asymptotic_exponent: f64,
    /// Smallest κ with a convergent quotient integral at this p.
    pub min_kappa: u32,
    pub value: f64,
}

/// Smallest integer κ with `κ > 2/(p-1)` (strict; a κ exactly at the
/// bound gives a logarithmically divergent integral).
pub fn min_admissible_kappa(p: f64) -> u32 {
    let bound = 2.0 / (p - 1.0);
    // Snap to the nearest integer when p is a short decimal like 1.1,
    // where 2/(p-1) lands a few ulps under the exact rational value.
    let rounded = bound.round();
    if (bound - rounded).abs() < 1e-9 {
        rounded as u32 + 1
    } else {
        bound.floor() as u32 + 1
    }
}

/// Convergence check and value of `∫ |(Φ' + Φ'')^p / Φ|^{1/(p-1)}` over
/// the transition. Near the outer endpoint the integrand behaves like
/// `(b-z)^{κ+1-2p'}`, so the integral is finite iff `κ > 2/(p-1)`; the
/// quadrature grades its panels geometrically toward that endpoint.
pub fn integrability_check(
    profile: &CutoffProfile,
    p: f64,
    weight: QuotientWeight,
) -> Result<IntegrabilityReport> {
    if p <= 1.0 {
        return Err(CoreError::InvalidParameter("need p > 1".into()));
    }
    let pp = p / (p - 1.0);
    let exponent = profile.kappa as f64 + 1.0 - 2.0 * pp;
    let min_kappa = min_admissible_kappa(p);
    if exponent <= -1.0 {
        return Err(CoreError::ProfileRejected {
            kappa: profile.kappa,
            p,
            suggested: min_kappa,
        });
    }
    let (a, b) = profile.transition();
    let f = |z: f64| {
        let (phi, d1, d2) = profile.eval(z);
        if phi <= 0.0 {
            return 0.0;
        }
        let w = match weight {
            QuotientWeight::Plain => 1.0,
            QuotientWeight::Radial { n } => z.powi(n as i32 - 2),
        };
        ((d1 + d2).abs().powf(p) / phi).powf(1.0 / (p - 1.0)) * w
    };
    // Geometric grading toward z = b where Φ vanishes.
    let mut total = 0.0;
    let mut hi = b;
    for j in 0..240 {
        let lo = if j == 239 { a } else { b - (b - a) * 0.5_f64.powi(j + 1) };
        total += quad::integrate_1d(f, lo, hi, 2);
        hi = lo;
        if j == 239 {
            break;
        }
        if lo <= a {
            break;
        }
    }
    Ok(IntegrabilityReport {
        kappa: profile.kappa,
        p,
        asymptotic_exponent: exponent,
        min_kappa,
        value: total,
    })
}

/// `∫₀¹ |Φ₁'^p / Φ₁|^{1/(p-1)} dt`, finite for every p > 1 because the
/// quotient equals `Φ₁ · |g'/g²|^{p'}` and the bump beats any power.
pub fn time_bump_quotient_integral(p: f64) -> f64 {
    let pp = p / (p - 1.0);
    let bump = TimeBump;
    quad::integrate_1d(
        |t| {
            let (v, _) = bump.eval_with_derivative(t);
            if v == 0.0 {
                return 0.0;
            }
            let g = t * (1.0 - t);
            v * ((1.0 - 2.0 * t).abs() / (g * g)).powf(pp)
        },
        0.0,
        1.0,
        32,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn plateau_and_tail_values() {
        let phi = CutoffProfile::new(8);
        assert_eq!(phi.eval(0.5), (1.0, 0.0, 0.0));
        assert_eq!(phi.eval(2.5), (0.0, 0.0, 0.0));
        let s = CutoffProfile::shifted(8);
        assert_eq!(s.eval(-3.0), (1.0, 0.0, 0.0));
        assert_eq!(s.eval(1.0), (0.0, 0.0, 0.0));
    }

    #[test]
    fn c2_matching_at_junctions() {
        for prof in [CutoffProfile::new(8), CutoffProfile::shifted(8)] {
            let (a, b) = prof.transition();
            for z0 in [a, b] {
                // Side limits of the closed forms: all three values agree
                // across the junction to 1e-6.
                let h = 1e-10;
                let (v0, d10, d20) = prof.eval(z0);
                for z in [z0 - h, z0 + h] {
                    let (v, d1, d2) = prof.eval(z);
                    assert!((v - v0).abs() <= 1e-6, "phi at {z0}");
                    assert!((d1 - d10).abs() <= 1e-6, "phi' at {z0}: {d1} vs {d10}");
                    assert!((d2 - d20).abs() <= 1e-6, "phi'' at {z0}: {d2} vs {d20}");
                }
                // Φ' by a finite difference straddling the junction.
                let h = 1e-5;
                let fd1 = (prof.eval(z0 + h).0 - prof.eval(z0 - h).0) / (2.0 * h);
                assert!((fd1 - d10).abs() <= 1e-6, "fd phi' at {z0}: {fd1} vs {d10}");
            }
            // Interior derivative consistency.
            let h = 1e-4;
            let z0 = a + 0.37;
            let (_, d1, d2) = prof.eval(z0);
            let fd1 = (prof.eval(z0 + h).0 - prof.eval(z0 - h).0) / (2.0 * h);
            let fd2 = (prof.eval(z0 + h).1 - prof.eval(z0 - h).1) / (2.0 * h);
            assert_relative_eq!(fd1, d1, max_relative = 1e-6);
            assert_relative_eq!(fd2, d2, max_relative = 1e-5);
        }
    }

    #[test]
    fn profile_is_nonincreasing_and_normalized() {
        let phi = CutoffProfile::new(8);
        let mut prev = f64::INFINITY;
        for i in 0..=300 {
            let z = -0.5 + 3.0 * i as f64 / 300.0;
            let v = phi.eval(z).0;
            assert!(v <= prev + 1e-14);
            assert!((0.0..=1.0).contains(&v));
            prev = v;
        }
        assert_relative_eq!(phi.eval(1.0).0, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn integrability_examples() {
        let r = integrability_check(&CutoffProfile::new(8), 2.0, QuotientWeight::Plain).unwrap();
        assert!(r.value.is_finite() && r.value > 0.0);
        assert_eq!(r.min_kappa, 3);
        assert_relative_eq!(r.asymptotic_exponent, 5.0);

        let bad = integrability_check(&CutoffProfile::new(0), 1.1, QuotientWeight::Plain);
        match bad {
            Err(CoreError::ProfileRejected { suggested, .. }) => assert_eq!(suggested, 21),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn quadrature_matches_refined_reference() {
        // The graded scheme should agree with a brute-force fine grid.
        let phi = CutoffProfile::new(8);
        let p = 2.0;
        let r = integrability_check(&phi, p, QuotientWeight::Plain).unwrap();
        let brute = crate::quad::integrate_1d(
            |z| {
                let (v, d1, d2) = phi.eval(z);
                if v <= 0.0 {
                    0.0
                } else {
                    ((d1 + d2).abs().powf(p) / v).powf(1.0 / (p - 1.0))
                }
            },
            1.0,
            2.0,
            4096,
        );
        assert_relative_eq!(r.value, brute, max_relative = 1e-8);
    }

    #[test]
    fn time_bump_shape() {
        let bump = TimeBump;
        assert_eq!(bump.eval(0.0), 0.0);
        assert_eq!(bump.eval(1.0), 0.0);
        assert_relative_eq!(bump.eval(0.5), 1.0, max_relative = 1e-14);
        let h = 1e-6;
        let (_, d) = bump.eval_with_derivative(0.3);
        let fd = (bump.eval(0.3 + h) - bump.eval(0.3 - h)) / (2.0 * h);
        assert_relative_eq!(d, fd, max_relative = 1e-6);
    }

    #[test]
    fn time_bump_quotient_finite_for_harsh_p() {
        for p in [1.05, 1.2, 2.0, 5.0] {
            let v = time_bump_quotient_integral(p);
            assert!(v.is_finite() && v > 0.0, "p={p}: {v}");
        }
    }
}
