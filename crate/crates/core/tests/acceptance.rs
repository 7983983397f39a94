//! End-to-end acceptance gate. Each test prints exactly one PASS/FAIL
//! line; every tolerance is pinned here as a constant.

use std::sync::Arc;

use num_rational::Ratio;

use blowlab_core::expr::CoefficientExpr;
use blowlab_core::fields::VectorFieldSystem;
use blowlab_core::functionals::{
    self, ExponentKind, QuadSettings, TestFunctionFamily,
};
use blowlab_core::grid::{Grid, GridFunction};
use blowlab_core::lines::{self, ImexConfig};
use blowlab_core::mild::{self, PicardConfig, Trajectory};
use blowlab_core::operator::{assemble_operator, convergence_order};
use blowlab_core::semigroup::{gaussian_kernel, SemigroupAction};

const SLOPE_TOL: f64 = 0.05; // criteria 2 and 3
const CRITICAL_SLOPE_TOL: f64 = 0.15; // criterion 4
const CONTRACTION_MAX: f64 = 0.6; // criterion 5
const RESIDUAL_REL: f64 = 1e-8; // criterion 5
const ITERATE_AGREEMENT: f64 = 1e-7; // criterion 5
const DEFECT_MAX: f64 = 1e-8; // criterion 6
const MASS_SLACK_SHARP: f64 = 1e-8; // criterion 6, euclidean/constant
const MASS_SLACK_ENGEL: f64 = 1e-4; // criterion 6
const GAUSS_PEAK_REL: f64 = 1e-2; // criterion 6
const CROSS_SOLVER_REL: f64 = 1e-3; // criterion 7
const ODE_REL: f64 = 0.02; // criterion 8
const BOUND_FACTOR: f64 = 1.1; // criterion 9
const WEAK_ORDER_MIN: f64 = 1.0; // criterion 10
const ORDER_TOL: f64 = 0.2; // criterion 11

fn verdict(criterion: usize, name: &str, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("acceptance {criterion:02} {name}: {tag} ({detail})");
    assert!(ok, "criterion {criterion} ({name}) failed: {detail}");
}

fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

fn gauss_1d(grid: Arc<Grid>, amp: f64) -> GridFunction {
    GridFunction::sample_fn(grid, move |x| amp * (-(x[0] * x[0])).exp())
}

#[test]
fn criterion_01_exponent_table() {
    let cases = [
        (ExponentKind::ParabolicBounded, 3, 0, Ratio::new(3, 2)),
        (ExponentKind::Constant, 4, 0, Ratio::from_integer(2)),
        (ExponentKind::Grushin, 2, 2, Ratio::from_integer(2)),
        (ExponentKind::Engel, 3, 0, Ratio::new(7, 5)),
    ];
    let mut ok = true;
    let mut detail = String::new();
    for (kind, n, k, want) in cases {
        let got = functionals::critical_exponent_lower_bound(kind, n, k).unwrap();
        if got != want {
            ok = false;
        }
        detail.push_str(&format!("{kind:?}={got} "));
    }
    verdict(1, "exponent table", ok, detail.trim());
}

#[test]
fn criterion_02_sharp_scaling_slopes() {
    let started = std::time::Instant::now();
    let scales = log_spaced(1e2, 1e5, 6);
    let settings = QuadSettings::default();
    let engel_settings = QuadSettings {
        panels: 6,
        ..Default::default()
    };

    let constant = VectorFieldSystem::builtin("constant", 2, 0).unwrap();
    let runs = [
        (
            "constant n=2 p=1.5",
            functionals::fit_scaling(
                |t| TestFunctionFamily::parabolic(constant.clone(), t, 8),
                &scales,
                1.5,
                &settings,
                -1.0,
                false,
                SLOPE_TOL,
            )
            .unwrap(),
        ),
        (
            "grushin k=1 p=1.3",
            functionals::fit_scaling(
                |t| TestFunctionFamily::grushin(1, t, 8),
                &scales,
                1.3,
                &settings,
                -11.0 / 6.0,
                false,
                SLOPE_TOL,
            )
            .unwrap(),
        ),
        (
            "engel n=3 p=1.2",
            functionals::fit_scaling(
                |t| TestFunctionFamily::engel(3, t, 12),
                &scales,
                1.2,
                &engel_settings,
                -1.5,
                false,
                SLOPE_TOL,
            )
            .unwrap(),
        ),
    ];
    let elapsed = started.elapsed().as_secs_f64();
    let ok = runs.iter().all(|(_, r)| r.pass) && elapsed < 120.0;
    let detail = runs
        .iter()
        .map(|(name, r)| format!("{name}: slope {:.4} vs {:.4}", r.delta_fit.slope, r.theta))
        .collect::<Vec<_>>()
        .join("; ");
    verdict(2, "sharp scaling slopes", ok, &detail);
}

#[test]
fn criterion_03_bounded_upper_bound_slope() {
    let trig = VectorFieldSystem::builtin("trig-bounded", 3, 0).unwrap();
    let scales = log_spaced(1.0, 100.0, 5);
    let theta = functionals::theoretical_exponent_f64(ExponentKind::ParabolicBounded, 3, 0, 1.2);
    let report = functionals::fit_scaling(
        |t| TestFunctionFamily::parabolic(trig.clone(), t, 12),
        &scales,
        1.2,
        &QuadSettings::default(),
        theta,
        true,
        SLOPE_TOL,
    )
    .unwrap();
    verdict(
        3,
        "bounded-coefficient slope",
        report.pass,
        &format!("slope {:.4} <= {:.4} + {SLOPE_TOL}", report.delta_fit.slope, theta),
    );
}

#[test]
fn criterion_04_critical_log_power() {
    let scales = log_spaced(1e2, 1e6, 5);
    let report = functionals::fit_scaling(
        |s| TestFunctionFamily::critical_log(3, s, s, 8),
        &scales,
        1.5,
        &QuadSettings::default(),
        -4.0,
        false,
        CRITICAL_SLOPE_TOL,
    )
    .unwrap();
    verdict(
        4,
        "critical log power",
        report.pass,
        &format!("slope {:.4} vs -4", report.delta_fit.slope),
    );
}

#[test]
fn criterion_05_picard_machinery() {
    let started = std::time::Instant::now();
    let grid = Arc::new(Grid::uniform(1, 8.0, 201).unwrap());
    let sys = VectorFieldSystem::builtin("euclidean", 1, 0).unwrap();
    let op = Arc::new(assemble_operator(&sys, &grid).unwrap());
    let action = SemigroupAction::with_default_tol(op);
    let u0 = gauss_1d(grid.clone(), 0.8);
    let forcing = gauss_1d(grid.clone(), 0.2);
    let p = 2.0;
    let config = PicardConfig {
        steps: 64,
        ..Default::default()
    };
    let solved = mild::picard_solve(&action, p, &u0, &forcing, &config).unwrap();
    let rate = solved
        .contraction_ratios
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max);
    let residual = mild::duhamel_residual(&action, p, &u0, &forcing, &solved.trajectory).unwrap()
        / solved.trajectory.sup_over_time();

    // Two distinct in-ball starting trajectories must land on the same
    // fixed point.
    let zero = GridFunction::zeros(grid.clone());
    let mut a = Trajectory::constant(&u0, solved.horizon, config.steps);
    let mut b = Trajectory::constant(&zero, solved.horizon, config.steps);
    for _ in 0..50 {
        let next_a = mild::picard_map(&action, p, &u0, &forcing, &a).unwrap();
        let next_b = mild::picard_map(&action, p, &u0, &forcing, &b).unwrap();
        let moved = next_a.diff_sup(&a).max(next_b.diff_sup(&b));
        a = next_a;
        b = next_b;
        if moved <= 1e-12 {
            break;
        }
    }
    let spread = a.diff_sup(&b);

    let ok = rate <= CONTRACTION_MAX
        && residual <= RESIDUAL_REL
        && spread <= ITERATE_AGREEMENT
        && started.elapsed().as_secs_f64() < 60.0;
    verdict(
        5,
        "picard machinery",
        ok,
        &format!(
            "rate {rate:.3}, rel residual {residual:.2e}, iterate spread {spread:.2e}, T {:.4}",
            solved.horizon
        ),
    );
}

#[test]
fn criterion_06_semigroup_quality() {
    // Defect and Gaussian peak: euclidean 1-D, L = 10, N = 401.
    let grid = Arc::new(Grid::uniform(1, 10.0, 401).unwrap());
    let sys = VectorFieldSystem::builtin("euclidean", 1, 0).unwrap();
    let op = Arc::new(assemble_operator(&sys, &grid).unwrap());
    let action = SemigroupAction::with_default_tol(op);
    let v = gauss_1d(grid.clone(), 1.0);
    let defect = action.semigroup_defect(0.3, 0.2, &v).unwrap();
    let center = grid.center_index();
    let mass_euclid = action.kernel_mass(center, 0.5).unwrap();
    let slice = action.kernel_slice(center, 0.5).unwrap();
    let peak = slice.values()[center];
    let exact_peak = gaussian_kernel(1, 0.5, &[0.0], &[0.0]);
    let peak_rel = (peak - exact_peak).abs() / exact_peak;

    let grid_c = Arc::new(Grid::uniform(2, 6.0, 41).unwrap());
    let sys_c = VectorFieldSystem::builtin("constant", 2, 0).unwrap();
    let action_c =
        SemigroupAction::with_default_tol(Arc::new(assemble_operator(&sys_c, &grid_c).unwrap()));
    let mass_const = action_c.kernel_mass(grid_c.center_index(), 0.5).unwrap();

    let grid_e = Arc::new(Grid::uniform(3, 6.0, 11).unwrap());
    let sys_e = VectorFieldSystem::builtin("engel", 3, 0).unwrap();
    let action_e =
        SemigroupAction::with_default_tol(Arc::new(assemble_operator(&sys_e, &grid_e).unwrap()));
    let mass_engel = action_e.kernel_mass(grid_e.center_index(), 0.5).unwrap();

    let ok = defect <= DEFECT_MAX
        && mass_euclid <= 1.0 + MASS_SLACK_SHARP
        && mass_const <= 1.0 + MASS_SLACK_SHARP
        && mass_engel <= 1.0 + MASS_SLACK_ENGEL
        && peak_rel <= GAUSS_PEAK_REL;
    verdict(
        6,
        "semigroup quality",
        ok,
        &format!(
            "defect {defect:.2e}, mass e/c/engel {mass_euclid:.10}/{mass_const:.10}/{mass_engel:.6}, peak rel {peak_rel:.2e}"
        ),
    );
}

#[test]
fn criterion_07_cross_solver() {
    let p = 2.0;
    let mut diffs = Vec::new();
    for (n, steps, dt0) in [(101, 32, 1e-3), (201, 64, 5e-4)] {
        let grid = Arc::new(Grid::uniform(1, 8.0, n).unwrap());
        let sys = VectorFieldSystem::builtin("euclidean", 1, 0).unwrap();
        let op = Arc::new(assemble_operator(&sys, &grid).unwrap());
        let action = SemigroupAction::with_default_tol(op.clone());
        let u0 = gauss_1d(grid.clone(), 0.5);
        let forcing = gauss_1d(grid.clone(), 0.1);
        let config = PicardConfig {
            steps,
            ..Default::default()
        };
        let picard = mild::picard_solve(&action, p, &u0, &forcing, &config).unwrap();
        let imex = ImexConfig {
            dt0,
            t_max: picard.horizon,
            ..Default::default()
        };
        let mol = lines::run(Some(&op), p, &u0, &forcing, &imex).unwrap();
        let rel = picard.trajectory.final_state().diff_sup(&mol.final_state)
            / picard.trajectory.final_state().sup_norm();
        diffs.push(rel);
    }
    let ok = diffs[1] <= CROSS_SOLVER_REL && diffs[1] <= diffs[0];
    verdict(
        7,
        "picard vs method of lines",
        ok,
        &format!("rel diff coarse {:.2e}, refined {:.2e}", diffs[0], diffs[1]),
    );
}

#[test]
fn criterion_08_ode_blowup_oracle() {
    let grid = Arc::new(Grid::uniform(1, 1.0, 3).unwrap());
    let forcing = GridFunction::zeros(grid.clone());
    let config = ImexConfig {
        dt0: 1e-4,
        t_max: 5.0,
        ..Default::default()
    };
    let mut ok = true;
    let mut detail = String::new();
    for y0 in [1.0, 2.0] {
        let u0 = GridFunction::sample_fn(grid.clone(), |_| y0);
        let run = lines::run(None, 2.0, &u0, &forcing, &config).unwrap();
        let t = run.blowup_time.expect("ODE must blow up");
        let exact = lines::ode_blowup_time(y0, 2.0);
        let rel = (t - exact).abs() / exact;
        if rel > ODE_REL {
            ok = false;
        }
        detail.push_str(&format!("u0={y0}: T {t:.4} vs {exact:.4} ({rel:.2e}); "));
    }
    verdict(8, "ode blow-up oracle", ok, detail.trim_end_matches("; "));
}

#[test]
fn criterion_09_forced_blowup_bound() {
    let grid = Arc::new(Grid::uniform(3, 16.0, 33).unwrap());
    let sys = VectorFieldSystem::builtin("euclidean", 3, 0).unwrap();
    let op = assemble_operator(&sys, &grid).unwrap();
    let u0 = GridFunction::zeros(grid.clone());
    let p = 1.5;
    let lambda = 2.0;
    let eps_list = [0.05, 0.1, 0.2, 0.4];
    let config = ImexConfig {
        dt0: 5e-3,
        t_max: 100.0,
        ..Default::default()
    };
    let mut times = Vec::new();
    for &eps in &eps_list {
        let f = GridFunction::sample_fn(grid.clone(), |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            eps * r2.powf(-lambda / 2.0).min(1.0)
        });
        let run = lines::run(Some(&op), p, &u0, &f, &config).unwrap();
        times.push(run.blowup_time.expect("forced run must blow up"));
    }
    let decreasing = times.windows(2).all(|w| w[1] < w[0]);
    let xs: Vec<f64> = eps_list.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let slope = blowlab_core::fit::linear_fit(&xs, &ys).slope;

    // Calibrate C₁ so the bound is tight at the largest amplitude, then
    // require it (up to the factor) at every smaller one.
    let t_ref = *times.last().unwrap();
    let eps_ref = *eps_list.last().unwrap();
    let pp = p / (p - 1.0);
    let c1 = t_ref.powf(-(pp - lambda) / 2.0) / eps_ref;
    let mut bound_ok = true;
    for (&eps, &t) in eps_list.iter().zip(&times) {
        let bound = functionals::blowup_upper_bound(eps, lambda, p, c1).unwrap();
        if t > BOUND_FACTOR * bound {
            bound_ok = false;
        }
    }
    let ok = decreasing && slope <= 0.0 && bound_ok;
    verdict(
        9,
        "forced blow-up bound",
        ok,
        &format!(
            "T {:?}, slope {slope:.3}, bound within factor {BOUND_FACTOR}: {bound_ok}",
            times.iter().map(|t| (t * 1e3).round() / 1e3).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_10_weak_residual_consistency() {
    let p = 2.0;
    let sys = VectorFieldSystem::builtin("euclidean", 1, 0).unwrap();
    let mut residuals = Vec::new();
    for (n, steps) in [(81, 16), (161, 32), (321, 64)] {
        let grid = Arc::new(Grid::uniform(1, 4.0, n).unwrap());
        let op = Arc::new(assemble_operator(&sys, &grid).unwrap());
        let action = SemigroupAction::with_default_tol(op);
        let u0 = gauss_1d(grid.clone(), 0.05);
        let forcing = GridFunction::zeros(grid.clone());
        let config = PicardConfig {
            steps,
            ..Default::default()
        };
        let solved = mild::picard_solve(&action, p, &u0, &forcing, &config).unwrap();
        let family = TestFunctionFamily::parabolic(sys.clone(), solved.horizon, 4).unwrap();
        let r = functionals::weak_form_residual(&solved.trajectory, &family, p, &u0, &forcing);
        residuals.push(r.abs());
    }
    let decreasing = residuals.windows(2).all(|w| w[1] < w[0]);
    let order = (residuals[0] / residuals[2]).log2() / 2.0;
    let ok = decreasing && order >= WEAK_ORDER_MIN;
    verdict(
        10,
        "weak residual consistency",
        ok,
        &format!(
            "residuals {}, order {order:.2}",
            residuals
                .iter()
                .map(|r| format!("{r:.3e}"))
                .collect::<Vec<_>>()
                .join(" -> ")
        ),
    );
}

#[test]
fn criterion_11_discretization_order() {
    fn grids(dim: usize, base: usize, levels: usize) -> Vec<Arc<Grid>> {
        let mut out = Vec::new();
        let mut n = base;
        for _ in 0..levels {
            out.push(Arc::new(Grid::uniform(dim, 1.0, n).unwrap()));
            n = 2 * n + 1;
        }
        out
    }
    let u2 = CoefficientExpr::sin(2, 0)
        .mul(&CoefficientExpr::cos(2, 1))
        .add(&CoefficientExpr::monomial(2, 0.4, &[2, 1]));
    let u3 = CoefficientExpr::sin(3, 0)
        .mul(&CoefficientExpr::cos(3, 2))
        .add(&CoefficientExpr::monomial(3, 0.3, &[1, 2, 1]));
    let cases = [
        ("euclidean", 2, &u2, 17),
        ("trig-bounded", 2, &u2, 17),
        ("engel", 3, &u3, 15),
    ];
    let mut ok = true;
    let mut detail = String::new();
    for (tag, dim, u, base) in cases {
        let sys = VectorFieldSystem::builtin(tag, dim, 0).unwrap();
        let report = convergence_order(&sys, u, &grids(dim, base, 3)).unwrap();
        let order = report.order.expect("non-trivial truncation error");
        if (order - 2.0).abs() > ORDER_TOL {
            ok = false;
        }
        detail.push_str(&format!("{tag}: {order:.3}; "));
    }
    verdict(11, "discretization order", ok, detail.trim_end_matches("; "));
}
