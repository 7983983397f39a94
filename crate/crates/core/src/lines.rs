//! Method-of-lines time stepping for `u_t = Δ_X u + |u|^p + f`:
//! implicit Euler in the diffusion, explicit in the nonlinearity,
//!
//! `(I - Δt A) u_{n+1} = u_n + Δt (|u_n|^p + f)`,
//!
//! with the linear solve done by BiCGStab on the sparse stencil matrix.
//! The step size halves whenever the sup norm grows more than 10% in one
//! step and doubles (up to the initial value) when it grows less than 1%,
//! so the solver tracks blow-up into the steep phase. Passing no operator
//! drops the diffusion entirely and integrates the site-wise ODE, whose
//! blow-up time `u₀^{1-p}/(p-1)` is a closed-form cross-check.

use crate::error::{CoreError, Result};
use crate::grid::GridFunction;
use crate::mild::BLOWUP_THRESHOLD;
use crate::operator::SparseOperator;

#[derive(Clone, Copy, Debug)]
pub struct ImexConfig {
    pub dt0: f64,
    pub dt_min: f64,
    pub t_max: f64,
    pub threshold: f64,
    pub linear_tol: f64,
    pub max_steps: usize,
}

impl Default for ImexConfig {
    fn default() -> Self {
        Self {
            dt0: 1e-3,
            dt_min: 1e-9,
            t_max: 10.0,
            threshold: BLOWUP_THRESHOLD,
            linear_tol: 1e-10,
            max_steps: 2_000_000,
        }
    }
}

pub struct RunResult {
    /// `(t, sup-norm)` after every accepted step (including t = 0).
    pub sup_history: Vec<(f64, f64)>,
    pub final_state: GridFunction,
    pub time_reached: f64,
    pub steps: usize,
    pub dt_final: f64,
    /// First time the sup norm crossed the threshold, if it did.
    pub blowup_time: Option<f64>,
}

/// BiCGStab for `M x = b` given the matvec of `M`. Returns the solution
/// or a nonconvergence error with the residual reached.
pub fn bicgstab(
    matvec: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let dot = |a: &[f64], c: &[f64]| -> f64 { a.iter().zip(c).map(|(x, y)| x * y).sum() };
    let norm = |a: &[f64]| dot(a, a).sqrt();
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    let mut x = x0.to_vec();
    let ax = matvec(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    if norm(&r) <= tol * bnorm {
        return Ok(x);
    }
    let r0 = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; b.len()];
    let mut p = vec![0.0; b.len()];
    for it in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-300 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..p.len() {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        v = matvec(&p);
        alpha = rho_new / dot(&r0, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        if norm(&s) <= tol * bnorm {
            for i in 0..x.len() {
                x[i] += alpha * p[i];
            }
            return Ok(x);
        }
        let t = matvec(&s);
        omega = dot(&t, &s) / dot(&t, &t).max(f64::MIN_POSITIVE);
        for i in 0..x.len() {
            x[i] += alpha * p[i] + omega * s[i];
        }
        r = s.iter().zip(&t).map(|(si, ti)| si - omega * ti).collect();
        if norm(&r) <= tol * bnorm {
            return Ok(x);
        }
        rho = rho_new;
        let _ = it;
    }
    let res = norm(&r) / bnorm;
    if res <= tol * 100.0 {
        // Stagnated just above target; close enough for a time step.
        return Ok(x);
    }
    Err(CoreError::Nonconvergence {
        residual: res,
        target: tol,
        iterations: max_iter,
    })
}

fn imex_step(
    op: Option<&SparseOperator>,
    p: f64,
    u: &GridFunction,
    forcing: &GridFunction,
    dt: f64,
    tol: f64,
) -> Result<GridFunction> {
    let rhs: Vec<f64> = u
        .values()
        .iter()
        .zip(forcing.values())
        .map(|(&ui, &fi)| ui + dt * (ui.abs().powf(p) + fi))
        .collect();
    let vals = match op {
        None => rhs,
        Some(a) => {
            let matvec = |x: &[f64]| {
                let ax = a.apply_slice(x);
                x.iter().zip(&ax).map(|(xi, axi)| xi - dt * axi).collect()
            };
            bicgstab(matvec, &rhs, u.values(), tol, 500)?
        }
    };
    GridFunction::new(u.grid().clone(), vals)
}

/// Run the IMEX scheme until `t_max`, the blow-up threshold, or step
/// exhaustion. `op = None` integrates the pure reaction ODE.
pub fn run(
    op: Option<&SparseOperator>,
    p: f64,
    u0: &GridFunction,
    forcing: &GridFunction,
    config: &ImexConfig,
) -> Result<RunResult> {
    let mut u = u0.clone();
    let mut t = 0.0;
    let mut dt = config.dt0;
    let mut history = vec![(0.0, u.sup_norm())];
    let mut steps = 0;
    let mut blowup_time = None;
    while t < config.t_max && steps < config.max_steps {
        let dt_here = dt.min(config.t_max - t);
        let next = imex_step(op, p, &u, forcing, dt_here, config.linear_tol)?;
        let prev_sup = u.sup_norm();
        let sup = next.sup_norm();
        if !sup.is_finite() || sup >= config.threshold {
            blowup_time = Some(t + dt_here);
            history.push((t + dt_here, sup));
            u = next;
            t += dt_here;
            steps += 1;
            break;
        }
        let growth = if prev_sup > 0.0 { sup / prev_sup - 1.0 } else { 0.0 };
        if growth > 0.10 && dt_here > config.dt_min {
            // Too steep: reject and retry with a smaller step.
            dt = (dt_here / 2.0).max(config.dt_min);
            continue;
        }
        u = next;
        t += dt_here;
        steps += 1;
        history.push((t, sup));
        if growth < 0.01 {
            dt = (dt * 2.0).min(config.dt0);
        }
    }
    let dt_final = dt;
    Ok(RunResult {
        sup_history: history,
        final_state: u,
        time_reached: t,
        steps,
        dt_final,
        blowup_time,
    })
}

/// Closed-form blow-up time of `y' = y^p, y(0) = y₀ > 0`.
pub fn ode_blowup_time(y0: f64, p: f64) -> f64 {
    y0.powf(1.0 - p) / (p - 1.0)
}
