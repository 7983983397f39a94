//! Mild solutions of `u_t - Δ_X u = |u|^p + f` by Picard iteration on the
//! Duhamel formula
//!
//! `u(t) = S(t) u₀ + ∫₀ᵗ S(t-s) (|u(s)|^p + f) ds`,
//!
//! discretized on a uniform time mesh with trapezoidal quadrature in `s`.
//! The guaranteed horizon comes from the contraction estimate on the ball
//! of radius `2δ`, `δ = max(sup|u₀|, sup|f|)`, with contraction target
//! `q* = 1/2` and Lipschitz factor `p·2^p·δ^{p-1}` for the nonlinearity.

use crate::error::{CoreError, Result};
use crate::grid::GridFunction;
use crate::semigroup::SemigroupAction;

/// Sup-norm blow-up threshold shared by the Picard and method-of-lines
/// solvers; a run whose state exceeds it is declared blown up.
pub const BLOWUP_THRESHOLD: f64 = 1e8;

/// Target contraction factor of one Picard sweep on the guaranteed horizon.
pub const CONTRACTION_TARGET: f64 = 0.5;

/// `δ = max(sup|u₀|, sup|f|)`, the data size entering the horizon bound.
pub fn delta_bound(u0: &GridFunction, forcing: &GridFunction) -> f64 {
    u0.sup_norm().max(forcing.sup_norm())
}

/// Guaranteed existence horizon for data of size `δ`:
/// `T = min( 1 / (2^p δ^{p-1} + 1),  q* / (p · 2^p · δ^{p-1}) )`.
pub fn local_time_horizon(delta: f64, p: f64) -> f64 {
    let a = 2f64.powf(p) * delta.powf(p - 1.0);
    (1.0 / (a + 1.0)).min(CONTRACTION_TARGET / (p * a))
}

/// A state history on a uniform time mesh.
#[derive(Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<GridFunction>,
}

impl Trajectory {
    pub fn constant(u0: &GridFunction, t_end: f64, steps: usize) -> Self {
        let dt = t_end / steps as f64;
        Self {
            times: (0..=steps).map(|j| j as f64 * dt).collect(),
            states: vec![u0.clone(); steps + 1],
        }
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn sup_over_time(&self) -> f64 {
        self.states.iter().fold(0.0_f64, |m, s| m.max(s.sup_norm()))
    }

    pub fn final_state(&self) -> &GridFunction {
        self.states.last().expect("nonempty trajectory")
    }

    pub fn diff_sup(&self, other: &Trajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .fold(0.0_f64, |m, (a, b)| m.max(a.diff_sup(b)))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PicardConfig {
    /// Number of time intervals in the Duhamel mesh.
    pub steps: usize,
    /// Sup-norm (over space and time) stopping tolerance for the update.
    pub tol: f64,
    pub max_iter: usize,
    /// Ball radius as a multiple of δ; iterates leaving it abort the run.
    pub ball_factor: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            steps: 32,
            tol: 1e-10,
            max_iter: 60,
            ball_factor: 2.0,
        }
    }
}

pub struct PicardResult {
    pub trajectory: Trajectory,
    pub horizon: f64,
    pub iterations: usize,
    pub final_update: f64,
    /// Ratio of consecutive update norms, one entry per sweep after the
    /// first; each should sit at or below the contraction target.
    pub contraction_ratios: Vec<f64>,
}

/// One Duhamel sweep: `Φ(v)(t_j) = S(t_j)u₀ + Σᵢ wᵢ Δt S(t_j - sᵢ) N(v(sᵢ))`
/// with `N(v) = |v|^p + f` and trapezoid weights.
pub fn picard_map(
    action: &SemigroupAction,
    p: f64,
    u0: &GridFunction,
    forcing: &GridFunction,
    v: &Trajectory,
) -> Result<Trajectory> {
    let steps = v.states.len() - 1;
    let dt = v.dt();
    action.prepare_mesh(dt, steps);
    let nonlin: Vec<GridFunction> = v
        .states
        .iter()
        .map(|s| s.zip(forcing, |u, f| u.abs().powf(p) + f))
        .collect();
    let mut states = Vec::with_capacity(steps + 1);
    states.push(u0.clone());
    for j in 1..=steps {
        let mut acc = action.evolve_steps(u0, j, dt)?;
        for (i, g) in nonlin.iter().enumerate().take(j + 1) {
            let w = if i == 0 || i == j { 0.5 } else { 1.0 };
            let prop = action.evolve_steps(g, j - i, dt)?;
            acc.axpy(w * dt, &prop);
        }
        states.push(acc);
    }
    Ok(Trajectory {
        times: v.times.clone(),
        states,
    })
}

/// Picard iteration on the guaranteed horizon `[0, T(δ, p)]`.
pub fn picard_solve(
    action: &SemigroupAction,
    p: f64,
    u0: &GridFunction,
    forcing: &GridFunction,
    config: &PicardConfig,
) -> Result<PicardResult> {
    let delta = delta_bound(u0, forcing);
    let horizon = local_time_horizon(delta.max(f64::MIN_POSITIVE), p);
    picard_solve_on(action, p, u0, forcing, horizon, config)
}

/// Picard iteration on a caller-supplied horizon (continuation segments).
pub fn picard_solve_on(
    action: &SemigroupAction,
    p: f64,
    u0: &GridFunction,
    forcing: &GridFunction,
    horizon: f64,
    config: &PicardConfig,
) -> Result<PicardResult> {
    let delta = delta_bound(u0, forcing);
    let ball = config.ball_factor * delta.max(f64::MIN_POSITIVE);
    let mut v = Trajectory::constant(u0, horizon, config.steps);
    let mut prev_update = f64::NAN;
    let mut ratios = Vec::new();
    for it in 1..=config.max_iter {
        let next = picard_map(action, p, u0, forcing, &v)?;
        let update = next.diff_sup(&v);
        if prev_update.is_finite() && prev_update > 0.0 {
            ratios.push(update / prev_update);
        }
        prev_update = update;
        let norm = next.sup_over_time();
        if norm > ball * (1.0 + 1e-9) {
            return Err(CoreError::BallViolation { norm, bound: ball });
        }
        v = next;
        if update <= config.tol {
            return Ok(PicardResult {
                trajectory: v,
                horizon,
                iterations: it,
                final_update: update,
                contraction_ratios: ratios,
            });
        }
    }
    Err(CoreError::Nonconvergence {
        residual: prev_update,
        target: config.tol,
        iterations: config.max_iter,
    })
}

/// Sup defect of a trajectory under one more Duhamel sweep; small values
/// certify a discrete mild solution.
pub fn duhamel_residual(
    action: &SemigroupAction,
    p: f64,
    u0: &GridFunction,
    forcing: &GridFunction,
    traj: &Trajectory,
) -> Result<f64> {
    Ok(picard_map(action, p, u0, forcing, traj)?.diff_sup(traj))
}

pub struct ContinuationResult {
    /// `(t, sup-norm)` at the end of each accepted segment.
    pub sup_history: Vec<(f64, f64)>,
    pub segments: usize,
    pub time_reached: f64,
    /// Set when the state crossed [`BLOWUP_THRESHOLD`] before `t_max`.
    pub blowup_time: Option<f64>,
}

/// Restart Picard segments until `t_max`, the threshold, or a stalled
/// horizon. Each segment re-derives its guaranteed length from the
/// current state, so the horizons shrink as the solution grows.
pub fn continue_to_tmax(
    action: &SemigroupAction,
    p: f64,
    u0: &GridFunction,
    forcing: &GridFunction,
    t_max: f64,
    config: &PicardConfig,
) -> Result<ContinuationResult> {
    let mut t = 0.0;
    let mut current = u0.clone();
    let mut history = vec![(0.0, current.sup_norm())];
    let mut segments = 0;
    const MAX_SEGMENTS: usize = 10_000;
    while t < t_max && segments < MAX_SEGMENTS {
        let delta = delta_bound(&current, forcing);
        if delta >= BLOWUP_THRESHOLD {
            return Ok(ContinuationResult {
                sup_history: history,
                segments,
                time_reached: t,
                blowup_time: Some(t),
            });
        }
        let horizon = local_time_horizon(delta.max(f64::MIN_POSITIVE), p).min(t_max - t);
        if !horizon.is_finite() || horizon <= 1e-14 * t_max.max(1.0) {
            // The guaranteed horizon has collapsed: treat as blow-up at t.
            return Ok(ContinuationResult {
                sup_history: history,
                segments,
                time_reached: t,
                blowup_time: Some(t),
            });
        }
        let seg = picard_solve_on(action, p, &current, forcing, horizon, config)?;
        t += horizon;
        current = seg.trajectory.final_state().clone();
        history.push((t, current.sup_norm()));
        segments += 1;
    }
    Ok(ContinuationResult {
        sup_history: history,
        segments,
        time_reached: t,
        blowup_time: None,
    })
}
