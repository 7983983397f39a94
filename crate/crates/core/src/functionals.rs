//! Nonexistence machinery: space-time test functions `ψ = Φ_time · Φ(s(x))`,
//! the functionals
//!
//! `I_Δ = ∫∫ |ψ|^{-1/(p-1)} |Δ_X ψ|^{p/(p-1)}`,
//! `I_t = ∫∫ |ψ|^{-1/(p-1)} |ψ_t|^{p/(p-1)}`,
//!
//! their scaling in the horizon `T`, and the closed-form exponents and
//! thresholds they are compared against.
//!
//! Because `ψ` factors into time × space and the two exponents above sum
//! the same way, both functionals split exactly into (1-D time integral) ×
//! (space integral). The space integrals are computed in scaled
//! coordinates `x_i = T^{σ_i/2} u_i` chosen so that for constant-coefficient,
//! Grushin and Engel families the `T`-dependence leaves the integrand
//! entirely (up to terms that vanish as `T` grows in the Engel case); the
//! quadrature then reuses the same unit-cell nodes for every `T` and the
//! fitted slopes are limited only by arithmetic, not by quadrature error.
//! Bounded-coefficient (trigonometric) systems keep a genuinely
//! `T`-dependent integrand and are fitted against the upper-bound slope
//! only. The critical-log family is evaluated through its radial
//! closed-form majorant, whose decay in `ln√R` is the quantity of
//! interest.

use num_rational::Ratio;

use crate::cutoff::{self, CutoffProfile, QuotientWeight, TimeBump};
use crate::error::{CoreError, Result};
use crate::expr::CoefficientExpr;
use crate::fields::VectorFieldSystem;
use crate::fit::{linear_fit, LineFit};
use crate::grid::GridFunction;
use crate::mild::Trajectory;
use crate::quad;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyKind {
    /// `s = |x|²/T`, time factor `Φ(2t/T)`; any vector-field system.
    Parabolic,
    /// `s = ln(|x|/√R)/ln(√R)`, time factor `Φ(t/T)`; euclidean only.
    CriticalLog,
    /// `s = (x₁^{2k+2} + x₂²)/T^{k+1}`, time factor `Φ₁(t/T)`.
    Grushin,
    /// `s = Σ xᵢ^{2^{n-i+1}} / T^{2^{n-1}}`, time factor `Φ₁(t/T)`.
    Engel,
}

pub struct TestFunctionFamily {
    pub kind: FamilyKind,
    pub system: VectorFieldSystem,
    /// Horizon `T`.
    pub t_scale: f64,
    /// Radius `R` (critical-log only).
    pub r_scale: f64,
    pub k: u32,
    pub profile: CutoffProfile,
    time_profile: CutoffProfile,
    bump: TimeBump,
    /// `s(x)` with the `T`-powers baked in.
    space_arg: Option<CoefficientExpr>,
    /// `X_k s`.
    xs: Vec<CoefficientExpr>,
    /// `X_k² s + (div X_k) X_k s`.
    xxs: Vec<CoefficientExpr>,
    /// Coordinate scales `x_i = scale_i · u_i`.
    scale: Vec<f64>,
    /// Support bound of `s ≤ 2` per scaled axis.
    u_bound: Vec<f64>,
}

fn chain_terms(
    system: &VectorFieldSystem,
    s: &CoefficientExpr,
) -> Result<(Vec<CoefficientExpr>, Vec<CoefficientExpr>)> {
    let mut xs = Vec::new();
    let mut xxs = Vec::new();
    for (k, field) in system.fields().iter().enumerate() {
        let e1 = field.apply(s)?;
        let e2 = field.apply(&e1)?.add(&system.divergence(k).mul(&e1));
        xs.push(e1);
        xxs.push(e2);
    }
    Ok((xs, xxs))
}

impl TestFunctionFamily {
    pub fn parabolic(system: VectorFieldSystem, t: f64, kappa: u32) -> Result<Self> {
        let n = system.dim();
        let mut s = CoefficientExpr::zero(n);
        for j in 0..n {
            let mut pows = vec![0u32; n];
            pows[j] = 2;
            s = s.add(&CoefficientExpr::monomial(n, 1.0 / t, &pows));
        }
        let (xs, xxs) = chain_terms(&system, &s)?;
        Ok(Self {
            kind: FamilyKind::Parabolic,
            system,
            t_scale: t,
            r_scale: 0.0,
            k: 0,
            profile: CutoffProfile::new(kappa),
            time_profile: CutoffProfile::new(kappa),
            bump: TimeBump,
            space_arg: Some(s),
            xs,
            xxs,
            scale: vec![t.sqrt(); n],
            u_bound: vec![2f64.sqrt(); n],
        })
    }

    pub fn grushin(k: u32, t: f64, kappa: u32) -> Result<Self> {
        let system = VectorFieldSystem::builtin("grushin", 2, k)?;
        let tk = t.powi(k as i32 + 1);
        let s = CoefficientExpr::monomial(2, 1.0 / tk, &[2 * k + 2, 0])
            .add(&CoefficientExpr::monomial(2, 1.0 / tk, &[0, 2]));
        let (xs, xxs) = chain_terms(&system, &s)?;
        Ok(Self {
            kind: FamilyKind::Grushin,
            system,
            t_scale: t,
            r_scale: 0.0,
            k,
            profile: CutoffProfile::new(kappa),
            time_profile: CutoffProfile::new(kappa),
            bump: TimeBump,
            space_arg: Some(s),
            xs,
            xxs,
            scale: vec![t.sqrt(), t.powf((k as f64 + 1.0) / 2.0)],
            u_bound: vec![2f64.powf(1.0 / (2.0 * k as f64 + 2.0)), 2f64.sqrt()],
        })
    }

    pub fn engel(n: usize, t: f64, kappa: u32) -> Result<Self> {
        let system = VectorFieldSystem::builtin("engel", n, 0)?;
        let big = 1u32 << (n - 1); // 2^{n-1}
        let tb = t.powi(big as i32);
        let mut s = CoefficientExpr::zero(n);
        let mut scale = Vec::with_capacity(n);
        let mut u_bound = Vec::with_capacity(n);
        for i in 0..n {
            let pow = 1u32 << (n - i); // 2^{n-i+1} with 1-based i
            let mut pows = vec![0u32; n];
            pows[i] = pow;
            s = s.add(&CoefficientExpr::monomial(n, 1.0 / tb, &pows));
            scale.push(t.powf((1u64 << i) as f64 / 2.0));
            u_bound.push(2f64.powf(1.0 / pow as f64));
        }
        let (xs, xxs) = chain_terms(&system, &s)?;
        Ok(Self {
            kind: FamilyKind::Engel,
            system,
            t_scale: t,
            r_scale: 0.0,
            k: 0,
            profile: CutoffProfile::new(kappa),
            time_profile: CutoffProfile::new(kappa),
            bump: TimeBump,
            space_arg: Some(s),
            xs,
            xxs,
            scale,
            u_bound,
        })
    }

    pub fn critical_log(n: usize, t: f64, r: f64, kappa: u32) -> Result<Self> {
        if r <= 1.0 {
            return Err(CoreError::InvalidParameter("need R > 1".into()));
        }
        let system = VectorFieldSystem::builtin("euclidean", n, 0)?;
        Ok(Self {
            kind: FamilyKind::CriticalLog,
            system,
            t_scale: t,
            r_scale: r,
            k: 0,
            profile: CutoffProfile::shifted(kappa),
            time_profile: CutoffProfile::new(kappa),
            bump: TimeBump,
            space_arg: None,
            xs: Vec::new(),
            xxs: Vec::new(),
            scale: vec![r; n],
            u_bound: vec![1.0; n],
        })
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    fn ln_sqrt_r(&self) -> f64 {
        0.5 * self.r_scale.ln()
    }

    /// Time factor and its t-derivative.
    pub fn time_factor(&self, t: f64) -> (f64, f64) {
        let big_t = self.t_scale;
        match self.kind {
            FamilyKind::Parabolic => {
                let (v, d, _) = self.time_profile.eval(2.0 * t / big_t);
                (v, 2.0 * d / big_t)
            }
            FamilyKind::CriticalLog => {
                let (v, d, _) = self.time_profile.eval(t / big_t);
                (v, d / big_t)
            }
            FamilyKind::Grushin | FamilyKind::Engel => {
                let (v, d) = self.bump.eval_with_derivative(t / big_t);
                (v, d / big_t)
            }
        }
    }

    /// End of the time support.
    pub fn time_support_end(&self) -> f64 {
        match self.kind {
            FamilyKind::Parabolic => self.t_scale,
            FamilyKind::CriticalLog => 2.0 * self.t_scale,
            FamilyKind::Grushin | FamilyKind::Engel => self.t_scale,
        }
    }

    /// Spatial factor `S(x) = Φ(s(x))` and `D(x) = Δ_X S(x)`.
    pub fn space_eval(&self, x: &[f64]) -> (f64, f64) {
        match self.kind {
            FamilyKind::CriticalLog => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                if r2 == 0.0 {
                    return (1.0, 0.0);
                }
                let l = self.ln_sqrt_r();
                let z = (0.5 * r2.ln() - l) / l;
                let (phi, d1, d2) = self.profile.eval(z);
                let n = self.dim() as f64;
                let d = d2 / (l * l * r2) + d1 * (n - 2.0) / (l * r2);
                (phi, d)
            }
            _ => {
                let s = self.space_arg.as_ref().unwrap().eval(x);
                let (phi, d1, d2) = self.profile.eval(s);
                if d1 == 0.0 && d2 == 0.0 {
                    return (phi, 0.0);
                }
                let mut d = 0.0;
                for (e1, e2) in self.xs.iter().zip(&self.xxs) {
                    let g = e1.eval(x);
                    d += d2 * g * g + d1 * e2.eval(x);
                }
                (phi, d)
            }
        }
    }

    /// `(ψ, ψ_t, Δ_X ψ)` at a space-time point.
    pub fn psi_eval(&self, t: f64, x: &[f64]) -> (f64, f64, f64) {
        let (tf, tfd) = self.time_factor(t);
        if tf == 0.0 && tfd == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let (s_val, d_val) = self.space_eval(x);
        (tf * s_val, tfd * s_val, tf * d_val)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadSettings {
    /// Panels per scaled axis (16 Gauss points each).
    pub panels: usize,
    /// When set, recompute with doubled panels and fail if the relative
    /// disagreement exceeds this.
    pub refine_tol: Option<f64>,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self {
            panels: 8,
            refine_tol: None,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FunctionalIntegrals {
    pub i_delta: f64,
    pub i_t: f64,
}

/// Geometrically graded quadrature over the transition of a profile,
/// refined toward the endpoint where Φ vanishes.
fn graded_transition_integral(profile: &CutoffProfile, f: impl Fn(f64) -> f64 + Sync) -> f64 {
    let (a, b) = profile.transition();
    let mut total = 0.0;
    let mut hi = b;
    for j in 0..240 {
        let lo = b - (b - a) * 0.5_f64.powi(j + 1);
        total += quad::integrate_1d(&f, lo, hi, 2);
        hi = lo;
    }
    total + quad::integrate_1d(&f, a, hi, 1)
}

impl TestFunctionFamily {
    /// `∫ time-factor dt` over the time support.
    pub fn time_mass(&self) -> f64 {
        match self.kind {
            FamilyKind::Parabolic => {
                let m = 1.0 + quad::integrate_1d(|z| self.time_profile.eval(z).0, 1.0, 2.0, 8);
                0.5 * self.t_scale * m
            }
            FamilyKind::CriticalLog => {
                let m = 1.0 + quad::integrate_1d(|z| self.time_profile.eval(z).0, 1.0, 2.0, 8);
                self.t_scale * m
            }
            FamilyKind::Grushin | FamilyKind::Engel => {
                self.t_scale * quad::integrate_1d(|t| self.bump.eval(t), 0.0, 1.0, 16)
            }
        }
    }

    /// `∫ |tf'|^{p'} tf^{-(p'-1)} dt` over the time support.
    fn time_quotient(&self, p: f64) -> f64 {
        let pp = p / (p - 1.0);
        match self.kind {
            FamilyKind::Parabolic => {
                let q = graded_transition_integral(&self.time_profile, |z| {
                    let (v, d, _) = self.time_profile.eval(z);
                    quotient_power(d, v, pp)
                });
                2f64.powf(pp - 1.0) * self.t_scale.powf(1.0 - pp) * q
            }
            FamilyKind::CriticalLog => {
                let q = graded_transition_integral(&self.time_profile, |z| {
                    let (v, d, _) = self.time_profile.eval(z);
                    quotient_power(d, v, pp)
                });
                self.t_scale.powf(1.0 - pp) * q
            }
            FamilyKind::Grushin | FamilyKind::Engel => {
                self.t_scale.powf(1.0 - pp) * cutoff::time_bump_quotient_integral(p)
            }
        }
    }

    fn space_delta_integral(&self, p: f64, panels: usize) -> Result<f64> {
        let pp = p / (p - 1.0);
        match self.kind {
            FamilyKind::CriticalLog => {
                let n = self.dim();
                let report = cutoff::integrability_check(&self.profile, p, QuotientWeight::Radial { n })?;
                Ok(quad::unit_sphere_area(n)
                    * self.ln_sqrt_r().powf(-(pp + 1.0))
                    * report.value)
            }
            _ => {
                let n = self.dim();
                let jac: f64 = self.scale.iter().product();
                let lo: Vec<f64> = self.u_bound.iter().map(|b| -b).collect();
                let panels_v = vec![panels; n];
                let v = quad::integrate_nd(
                    |u| {
                        let x: Vec<f64> = (0..n).map(|i| self.scale[i] * u[i]).collect();
                        let (s_val, d_val) = self.space_eval(&x);
                        quotient_power(d_val, s_val, pp)
                    },
                    &lo,
                    &self.u_bound,
                    &panels_v,
                );
                Ok(jac * v)
            }
        }
    }

    fn space_mass_integral(&self, panels: usize) -> f64 {
        match self.kind {
            FamilyKind::CriticalLog => {
                let n = self.dim() as f64;
                let area = quad::unit_sphere_area(self.dim());
                let sqrt_r = self.r_scale.sqrt();
                let plateau = area * sqrt_r.powf(n) / n;
                let l = self.ln_sqrt_r();
                // r = √R e^{z l} over the transition z ∈ [0, 1].
                let trans = area
                    * l
                    * quad::integrate_1d(
                        |z| self.profile.eval(z).0 * (sqrt_r * (z * l).exp()).powf(n),
                        0.0,
                        1.0,
                        32,
                    );
                plateau + trans
            }
            _ => {
                let n = self.dim();
                let jac: f64 = self.scale.iter().product();
                let lo: Vec<f64> = self.u_bound.iter().map(|b| -b).collect();
                let panels_v = vec![panels; n];
                jac * quad::integrate_nd(
                    |u| {
                        let x: Vec<f64> = (0..n).map(|i| self.scale[i] * u[i]).collect();
                        self.space_eval(&x).0
                    },
                    &lo,
                    &self.u_bound,
                    &panels_v,
                )
            }
        }
    }

    /// The two nonexistence functionals, split as time × space.
    pub fn functional_integrals(&self, p: f64, settings: &QuadSettings) -> Result<FunctionalIntegrals> {
        if p <= 1.0 {
            return Err(CoreError::InvalidParameter("need p > 1".into()));
        }
        // Profile admissibility at this p (the critical path runs the same
        // check with its radial weight inside the space integral).
        if self.kind != FamilyKind::CriticalLog {
            cutoff::integrability_check(&self.profile, p, QuotientWeight::Plain)?;
        }
        let compute = |panels: usize| -> Result<FunctionalIntegrals> {
            Ok(FunctionalIntegrals {
                i_delta: self.time_mass() * self.space_delta_integral(p, panels)?,
                i_t: self.time_quotient(p) * self.space_mass_integral(panels),
            })
        };
        let coarse = compute(self.effective_panels(settings.panels))?;
        if let Some(tol) = settings.refine_tol {
            let fine = compute(self.effective_panels(settings.panels) * 2)?;
            let dis = rel_diff(coarse.i_delta, fine.i_delta).max(rel_diff(coarse.i_t, fine.i_t));
            if dis > tol {
                return Err(CoreError::QuadratureNonconvergence {
                    disagreement: dis,
                    tolerance: tol,
                });
            }
            return Ok(fine);
        }
        Ok(coarse)
    }

    fn effective_panels(&self, requested: usize) -> usize {
        if self.kind == FamilyKind::CriticalLog {
            return requested;
        }
        // Oscillating coefficients need panels resolving wavelength 2π in
        // x, i.e. 2π/scale in the unit cell.
        if self.system.all_coefficients_bounded() && !self.system.all_constant() {
            let max_scale = self.scale.iter().cloned().fold(1.0_f64, f64::max);
            let span = 2.0 * 2f64.sqrt();
            let waves = span * max_scale / (2.0 * std::f64::consts::PI);
            requested.max((waves.ceil() as usize / 4).max(1) * 4)
        } else {
            requested
        }
    }

    /// `∫∫ f ψ = time_mass · ∫ f(x) Φ(s(x)) dx`.
    pub fn forcing_term(
        &self,
        f: impl Fn(&[f64]) -> f64 + Sync,
        settings: &QuadSettings,
    ) -> f64 {
        let n = self.dim();
        let jac: f64 = self.scale.iter().product();
        let lo: Vec<f64> = self.u_bound.iter().map(|b| -b).collect();
        let panels_v = vec![self.effective_panels(settings.panels); n];
        let space = jac
            * quad::integrate_nd(
                |u| {
                    let x: Vec<f64> = (0..n).map(|i| self.scale[i] * u[i]).collect();
                    f(&x) * self.space_eval(&x).0
                },
                &lo,
                &self.u_bound,
                &panels_v,
            );
        self.time_mass() * space
    }
}

/// `|d|^{p'} s^{-(p'-1)}` in log space, so an underflowing numerator never
/// meets an overflowing denominator as 0·inf.
fn quotient_power(d: f64, s: f64, pp: f64) -> f64 {
    if d == 0.0 || s <= 0.0 {
        return 0.0;
    }
    (pp * d.abs().ln() - (pp - 1.0) * s.ln()).exp()
}

fn rel_diff(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Which closed-form exponent a scan is compared against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExponentKind {
    /// Bounded-coefficient estimate: `n/2 + 1 - p/(2(p-1))` (upper bound).
    ParabolicBounded,
    /// Constant-coefficient fields: `n/2 + 1 - p/(p-1)` (sharp).
    Constant,
    /// `(k+4)/2 - p/(p-1)` (sharp).
    Grushin,
    /// `(2^n - 1)/2 + 1 - p/(p-1)` (sharp).
    Engel,
    /// Log-power of `I_Δ/T` in `ln√R`: `-(n+1)`.
    CriticalLog,
}

pub fn conjugate(p: Ratio<i64>) -> Ratio<i64> {
    p / (p - 1)
}

/// Exact rational scaling exponent.
pub fn theoretical_exponent(kind: ExponentKind, n: usize, k: u32, p: Ratio<i64>) -> Ratio<i64> {
    let n = n as i64;
    let pp = conjugate(p);
    let half = |a: i64| Ratio::new(a, 2);
    match kind {
        ExponentKind::ParabolicBounded => half(n) + 1 - pp / 2,
        ExponentKind::Constant => half(n) + 1 - pp,
        ExponentKind::Grushin => half(k as i64 + 4) - pp,
        ExponentKind::Engel => half((1i64 << n) - 1) + 1 - pp,
        ExponentKind::CriticalLog => Ratio::from_integer(-(n + 1)),
    }
}

pub fn theoretical_exponent_f64(kind: ExponentKind, n: usize, k: u32, p: f64) -> f64 {
    let n_f = n as f64;
    let pp = p / (p - 1.0);
    match kind {
        ExponentKind::ParabolicBounded => n_f / 2.0 + 1.0 - pp / 2.0,
        ExponentKind::Constant => n_f / 2.0 + 1.0 - pp,
        ExponentKind::Grushin => (k as f64 + 4.0) / 2.0 - pp,
        ExponentKind::Engel => ((1u64 << n) - 1) as f64 / 2.0 + 1.0 - pp,
        ExponentKind::CriticalLog => -(n_f + 1.0),
    }
}

/// Exact rational nonexistence threshold: blow-up is forced for every
/// `1 < p` below (or at) this value.
pub fn critical_exponent_lower_bound(kind: ExponentKind, n: usize, k: u32) -> Result<Ratio<i64>> {
    let n_i = n as i64;
    match kind {
        ExponentKind::ParabolicBounded => {
            if n <= 1 {
                return Err(CoreError::InvalidParameter("need n > 1".into()));
            }
            Ok(Ratio::new(n_i, n_i - 1))
        }
        ExponentKind::Constant => {
            if n <= 2 {
                return Err(CoreError::InvalidParameter("need n > 2".into()));
            }
            Ok(Ratio::new(n_i, n_i - 2))
        }
        ExponentKind::Grushin => {
            if k == 0 {
                return Err(CoreError::InvalidParameter("need k >= 1".into()));
            }
            Ok(Ratio::new(k as i64 + 2, k as i64))
        }
        ExponentKind::Engel => {
            let two_n = 1i64 << n;
            if two_n - 3 <= 0 {
                return Err(CoreError::InvalidParameter("need n >= 2".into()));
            }
            Ok(Ratio::new(two_n - 1, two_n - 3))
        }
        ExponentKind::CriticalLog => {
            if n <= 2 {
                return Err(CoreError::InvalidParameter("need n > 2".into()));
            }
            Ok(Ratio::new(n_i, n_i - 1))
        }
    }
}

/// `1 / (p' (p/2)^{p'-1})`, the constant of the Young split.
pub fn young_constant(p: f64) -> f64 {
    let pp = p / (p - 1.0);
    1.0 / (pp * (p / 2.0).powf(pp - 1.0))
}

/// Upper bound on the existence time under the forcing `ε‖x‖^{-λ}`:
/// `(C₁ ε)^{-2/(p' - λ)}` with `p' = p/(p-1)`.
pub fn blowup_upper_bound(eps: f64, lambda: f64, p: f64, c1: f64) -> Result<f64> {
    let pp = p / (p - 1.0);
    if lambda >= pp {
        return Err(CoreError::InvalidParameter(format!(
            "need lambda < p/(p-1) = {pp}, got {lambda}"
        )));
    }
    if eps <= 0.0 || c1 <= 0.0 {
        return Err(CoreError::InvalidParameter("need eps, C1 > 0".into()));
    }
    Ok((c1 * eps).powf(-2.0 / (pp - lambda)))
}

#[derive(Clone, Copy, Debug)]
pub struct ScanPoint {
    /// `T` (or `R` for the critical-log family).
    pub scale: f64,
    pub i_delta: f64,
    pub i_t: f64,
}

pub struct FunctionalReport {
    pub points: Vec<ScanPoint>,
    pub delta_fit: LineFit,
    pub t_fit: LineFit,
    pub theta: f64,
    /// When true the theory gives only an upper bound and the pass
    /// criterion is one-sided.
    pub bound_only: bool,
    pub tolerance: f64,
    pub pass: bool,
}

/// Sweep the horizon, fit `log I_Δ` against `log T` (for the critical-log
/// family: `log(I_Δ/T)` against `log ln√R`), and compare with `theta`.
pub fn fit_scaling(
    build: impl Fn(f64) -> Result<TestFunctionFamily>,
    scales: &[f64],
    p: f64,
    settings: &QuadSettings,
    theta: f64,
    bound_only: bool,
    tolerance: f64,
) -> Result<FunctionalReport> {
    if scales.len() < 2 {
        return Err(CoreError::InvalidParameter("need >= 2 scale values".into()));
    }
    let mut points = Vec::with_capacity(scales.len());
    let mut xs = Vec::new();
    let mut yd = Vec::new();
    let mut yt = Vec::new();
    for &s in scales {
        let fam = build(s)?;
        let critical = fam.kind == FamilyKind::CriticalLog;
        let ints = fam.functional_integrals(p, settings)?;
        points.push(ScanPoint {
            scale: s,
            i_delta: ints.i_delta,
            i_t: ints.i_t,
        });
        if critical {
            xs.push((0.5 * s.ln()).ln());
            yd.push((ints.i_delta / fam.t_scale).ln());
            yt.push((ints.i_t / fam.t_scale).max(f64::MIN_POSITIVE).ln());
        } else {
            xs.push(s.ln());
            yd.push(ints.i_delta.ln());
            yt.push(ints.i_t.ln());
        }
    }
    let delta_fit = linear_fit(&xs, &yd);
    let t_fit = linear_fit(&xs, &yt);
    let pass = if bound_only {
        delta_fit.slope <= theta + tolerance
    } else {
        (delta_fit.slope - theta).abs() <= tolerance
    };
    Ok(FunctionalReport {
        points,
        delta_fit,
        t_fit,
        theta,
        bound_only,
        tolerance,
        pass,
    })
}

/// Left side of the weak-solution identity
/// `∫∫|u|^p ψ + ∫u₀ψ(0,·) + ∫∫fψ + ∫∫uψ_t + ∫∫uΔ_Xψ`,
/// evaluated by grid collocation in space and the trajectory's trapezoid
/// rule in time. Zero (up to discretization) for weak solutions when the
/// test function's time support sits inside the trajectory.
pub fn weak_form_residual(
    traj: &Trajectory,
    family: &TestFunctionFamily,
    p: f64,
    u0: &GridFunction,
    forcing: &GridFunction,
) -> f64 {
    let grid = u0.grid();
    let w = grid.volume_weight();
    let nodes = grid.node_count();
    let points: Vec<Vec<f64>> = (0..nodes).map(|i| grid.point(i)).collect();
    let mut total = 0.0;
    // u₀ term.
    for (i, x) in points.iter().enumerate() {
        let (psi0, _, _) = family.psi_eval(0.0, x);
        total += w * u0.values()[i] * psi0;
    }
    let dt = traj.dt();
    for (j, (t, state)) in traj.times.iter().zip(&traj.states).enumerate() {
        let tw = if j == 0 || j + 1 == traj.states.len() {
            0.5 * dt
        } else {
            dt
        };
        let mut slice = 0.0;
        for (i, x) in points.iter().enumerate() {
            let (psi, psi_t, dpsi) = family.psi_eval(*t, x);
            if psi == 0.0 && psi_t == 0.0 && dpsi == 0.0 {
                continue;
            }
            let u = state.values()[i];
            let f = forcing.values()[i];
            slice += w * (u.abs().powf(p) * psi + f * psi + u * psi_t + u * dpsi);
        }
        total += tw * slice;
    }
    total.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exponent_examples() {
        let r = |a, b| Ratio::new(a, b);
        assert_eq!(
            theoretical_exponent(ExponentKind::ParabolicBounded, 3, 0, r(6, 5)),
            r(-1, 2)
        );
        assert_eq!(
            theoretical_exponent(ExponentKind::Constant, 2, 0, r(3, 2)),
            r(-1, 1)
        );
        assert_eq!(
            theoretical_exponent(ExponentKind::Grushin, 2, 1, r(13, 10)),
            r(-11, 6)
        );
        assert_eq!(
            theoretical_exponent(ExponentKind::Engel, 3, 0, r(6, 5)),
            r(-3, 2)
        );
        assert_eq!(
            theoretical_exponent(ExponentKind::CriticalLog, 3, 0, r(3, 2)),
            r(-4, 1)
        );
        // Conjugate identity 1/p + 1/p' = 1 exactly.
        let p = r(13, 10);
        let pp = conjugate(p);
        assert_eq!(p.recip() + pp.recip(), r(1, 1));
    }

    #[test]
    fn critical_bounds() {
        let r = |a, b| Ratio::new(a, b);
        assert_eq!(
            critical_exponent_lower_bound(ExponentKind::ParabolicBounded, 3, 0).unwrap(),
            r(3, 2)
        );
        assert_eq!(
            critical_exponent_lower_bound(ExponentKind::Constant, 4, 0).unwrap(),
            r(2, 1)
        );
        assert_eq!(
            critical_exponent_lower_bound(ExponentKind::Grushin, 2, 2).unwrap(),
            r(2, 1)
        );
        assert_eq!(
            critical_exponent_lower_bound(ExponentKind::Engel, 3, 0).unwrap(),
            r(7, 5)
        );
        assert!(critical_exponent_lower_bound(ExponentKind::Constant, 2, 0).is_err());
    }

    #[test]
    fn young_constant_examples() {
        assert_relative_eq!(young_constant(2.0), 0.5, max_relative = 1e-14);
        assert_relative_eq!(young_constant(3.0), 0.5443310539518174, max_relative = 1e-12);
        // The absorbed-split price explodes as p -> 1+.
        assert!(young_constant(1.01) > 1e3);
    }

    #[test]
    fn blowup_bound_examples() {
        let b = blowup_upper_bound(0.1, 2.0, 1.5, 1.0).unwrap();
        assert_relative_eq!(b, 100.0, max_relative = 1e-12);
        let b2 = blowup_upper_bound(0.2, 2.0, 1.5, 1.0).unwrap();
        assert!(b2 < b);
        assert!(blowup_upper_bound(0.1, 3.0, 1.5, 1.0).is_err());
    }

    #[test]
    fn plateau_values() {
        let fam = TestFunctionFamily::parabolic(
            VectorFieldSystem::builtin("euclidean", 2, 0).unwrap(),
            4.0,
            8,
        )
        .unwrap();
        // |x|²/T = 0.25 → plateau; t small → time factor 1, derivative 0.
        let (psi, psi_t, dpsi) = fam.psi_eval(0.1, &[1.0, 0.0]);
        assert_eq!((psi, dpsi), (1.0, 0.0));
        assert_eq!(psi_t, 0.0);
        // In the time transition the ψ_t factor is the scaled Φ'.
        let t = 3.0; // 2t/T = 1.5
        let (_, psi_t, _) = fam.psi_eval(t, &[1.0, 0.0]);
        let expected = 2.0 / 4.0 * fam.time_profile.eval(1.5).1;
        assert_relative_eq!(psi_t, expected, max_relative = 1e-13);
    }

    #[test]
    fn laplacian_matches_finite_differences() {
        let fam = TestFunctionFamily::parabolic(
            VectorFieldSystem::builtin("euclidean", 2, 0).unwrap(),
            2.0,
            8,
        )
        .unwrap();
        let t = 0.3;
        // A point with |x|²/T = 1.5, inside the transition shell.
        let x = [1.5_f64, 0.8660254037844386];
        let (_, _, dpsi) = fam.psi_eval(t, &x);
        let h = 1e-4;
        let mut fd = 0.0;
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            fd += (fam.psi_eval(t, &xp).0 - 2.0 * fam.psi_eval(t, &x).0
                + fam.psi_eval(t, &xm).0)
                / (h * h);
        }
        assert_relative_eq!(dpsi, fd, max_relative = 1e-5);
    }

    #[test]
    fn grushin_operator_matches_finite_differences() {
        let fam = TestFunctionFamily::grushin(1, 1.5, 8).unwrap();
        let t = 0.5;
        // Choose x with s in the transition: d = x₁⁴ + x₂², s = d/T².
        let x = [1.1_f64, 1.4];
        let s = fam.space_arg.as_ref().unwrap().eval(&x);
        assert!((1.0..2.0).contains(&s), "s = {s}");
        let (_, _, dpsi) = fam.psi_eval(t, &x);
        let h = 1e-4;
        let psi = |y: &[f64]| fam.psi_eval(t, y).0;
        let d11 = (psi(&[x[0] + h, x[1]]) - 2.0 * psi(&x) + psi(&[x[0] - h, x[1]])) / (h * h);
        let d22 = (psi(&[x[0], x[1] + h]) - 2.0 * psi(&x) + psi(&[x[0], x[1] - h])) / (h * h);
        // Δ_X = ∂₁² + x₁² ∂₂² for k = 1.
        let fd = d11 + x[0] * x[0] * d22;
        assert_relative_eq!(dpsi, fd, max_relative = 1e-5);
    }

    #[test]
    fn delta_psi_vanishes_off_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let fams: Vec<TestFunctionFamily> = vec![
            TestFunctionFamily::parabolic(
                VectorFieldSystem::builtin("euclidean", 2, 0).unwrap(),
                2.0,
                8,
            )
            .unwrap(),
            TestFunctionFamily::grushin(1, 2.0, 8).unwrap(),
            TestFunctionFamily::engel(3, 2.0, 8).unwrap(),
            TestFunctionFamily::critical_log(3, 100.0, 100.0, 8).unwrap(),
        ];
        for fam in &fams {
            let mut checked = 0;
            while checked < 1000 {
                let x: Vec<f64> = (0..fam.dim()).map(|_| rng.gen_range(-30.0..30.0)).collect();
                let inside = match fam.kind {
                    FamilyKind::CriticalLog => {
                        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let l = 0.5 * fam.r_scale.ln();
                        let z = (r.max(1e-12).ln() - l) / l;
                        (0.0..1.0).contains(&z)
                    }
                    _ => {
                        let s = fam.space_arg.as_ref().unwrap().eval(&x);
                        (1.0..2.0).contains(&s)
                    }
                };
                if inside {
                    continue;
                }
                let (_, d) = fam.space_eval(&x);
                assert_eq!(d, 0.0, "family {:?} at {x:?}", fam.kind);
                checked += 1;
            }
        }
    }

    #[test]
    fn constant_kind_halving_ratio() {
        let sys = VectorFieldSystem::builtin("constant", 2, 0).unwrap();
        let settings = QuadSettings {
            panels: 8,
            refine_tol: None,
        };
        let i1 = TestFunctionFamily::parabolic(sys.clone(), 100.0, 8)
            .unwrap()
            .functional_integrals(1.5, &settings)
            .unwrap();
        let i2 = TestFunctionFamily::parabolic(sys, 200.0, 8)
            .unwrap()
            .functional_integrals(1.5, &settings)
            .unwrap();
        // θ = -1 for constant coefficients: doubling T halves I_Δ.
        assert_relative_eq!(i2.i_delta / i1.i_delta, 0.5, max_relative = 0.05);
    }

    #[test]
    fn refine_check_passes_on_smooth_profile() {
        let sys = VectorFieldSystem::builtin("euclidean", 2, 0).unwrap();
        let fam = TestFunctionFamily::parabolic(sys, 10.0, 12).unwrap();
        let settings = QuadSettings {
            panels: 20,
            refine_tol: Some(1e-6),
        };
        let r = fam.functional_integrals(1.5, &settings).unwrap();
        assert!(r.i_delta > 0.0 && r.i_t > 0.0);
    }

    #[test]
    fn profile_rejection_propagates() {
        let sys = VectorFieldSystem::builtin("euclidean", 2, 0).unwrap();
        let fam = TestFunctionFamily::parabolic(sys, 10.0, 8).unwrap();
        // κ = 8 is inadmissible at p = 1.2 (needs κ ≥ 11).
        let err = fam.functional_integrals(1.2, &QuadSettings::default());
        assert!(matches!(err, Err(CoreError::ProfileRejected { suggested: 11, .. })));
    }

    #[test]
    fn forcing_term_plateau_identity() {
        // f supported strictly inside the plateau: F = time_mass · ∫f.
        let sys = VectorFieldSystem::builtin("euclidean", 2, 0).unwrap();
        let fam = TestFunctionFamily::parabolic(sys, 4.0, 8).unwrap();
        let f = |x: &[f64]| (0.5 - (x[0] * x[0] + x[1] * x[1])).max(0.0);
        let settings = QuadSettings {
            panels: 16,
            refine_tol: None,
        };
        let computed = fam.forcing_term(f, &settings);
        // ∫ max(0, 1/2 - r²) = 2π ∫₀^{1/√2} (r/2 - r³) dr = π/8.
        let exact = fam.time_mass() * std::f64::consts::PI / 8.0;
        assert_relative_eq!(computed, exact, max_relative = 1e-4);
    }

    #[test]
    fn zero_trajectory_residual_is_forcing_term() {
        use crate::grid::Grid;
        use std::sync::Arc;
        let grid = Arc::new(Grid::uniform(2, 4.0, 25).unwrap());
        let sys = VectorFieldSystem::builtin("euclidean", 2, 0).unwrap();
        let fam = TestFunctionFamily::parabolic(sys, 0.4, 8).unwrap();
        let zero = GridFunction::zeros(grid.clone());
        let traj = Trajectory::constant(&zero, fam.time_support_end(), 16);
        assert_eq!(weak_form_residual(&traj, &fam, 2.0, &zero, &zero), 0.0);
        let f = GridFunction::sample_fn(grid, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        let r = weak_form_residual(&traj, &fam, 2.0, &zero, &f);
        assert!(r > 0.0);
    }
}
