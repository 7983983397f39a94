//! Property tests for the symbolic layer and the solver invariants.

use std::sync::Arc;

use proptest::prelude::*;

use blowlab_core::expr::{CoefficientExpr, CoordFactor, Term};
use blowlab_core::fields::VectorFieldSystem;
use blowlab_core::grid::{Grid, GridFunction};
use blowlab_core::lines::{self, ImexConfig};
use blowlab_core::mild::{self, PicardConfig};
use blowlab_core::operator::assemble_operator;

fn arb_term(dim: usize) -> impl Strategy<Value = Term> {
    (
        -2.0..2.0_f64,
        proptest::collection::vec((0u32..3, 0u32..2, 0u32..2), dim),
    )
        .prop_map(|(coeff, factors)| Term {
            coeff,
            factors: factors
                .into_iter()
                .map(|(pow, sin, cos)| CoordFactor { pow, sin, cos })
                .collect(),
        })
}

fn arb_expr(dim: usize) -> impl Strategy<Value = CoefficientExpr> {
    proptest::collection::vec(arb_term(dim), 1..4)
        .prop_map(move |terms| CoefficientExpr::from_terms(dim, terms))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Symbolic partials match central finite differences.
    #[test]
    fn partial_matches_finite_difference(
        e in arb_expr(2),
        x0 in -1.0..1.0_f64,
        x1 in -1.0..1.0_f64,
        axis in 0usize..2,
    ) {
        let x = [x0, x1];
        let h = 1e-4;
        let mut xp = x;
        let mut xm = x;
        xp[axis] += h;
        xm[axis] -= h;
        let fd = (e.eval(&xp) - e.eval(&xm)) / (2.0 * h);
        let sym = e.partial(axis).eval(&x);
        let scale = sym.abs().max(fd.abs()).max(1.0);
        prop_assert!((fd - sym).abs() <= 1e-6 * scale, "fd {fd} sym {sym}");
    }

    /// Product rule: (fg)' = f'g + fg'.
    #[test]
    fn product_rule(e in arb_expr(2), g in arb_expr(2), axis in 0usize..2) {
        let lhs = e.mul(&g).partial(axis);
        let rhs = e.partial(axis).mul(&g).add(&e.mul(&g.partial(axis)));
        for x in [[0.3, -0.7], [-1.1, 0.2], [0.0, 0.9]] {
            let a = lhs.eval(&x);
            let b = rhs.eval(&x);
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0));
        }
    }

    /// Δ_X is linear for every builtin system.
    #[test]
    fn delta_x_is_linear(
        e in arb_expr(2),
        g in arb_expr(2),
        alpha in -2.0..2.0_f64,
        tag in prop::sample::select(vec!["euclidean", "constant", "grushin", "trig-bounded"]),
    ) {
        let k = 1;
        let sys = VectorFieldSystem::builtin(tag, 2, k).unwrap();
        let lhs = sys.delta_x_symbolic(&e.scale(alpha).add(&g)).unwrap();
        let rhs = sys.delta_x_symbolic(&e).unwrap().scale(alpha)
            .add(&sys.delta_x_symbolic(&g).unwrap());
        for x in [[0.4, 0.8], [-0.9, -0.3]] {
            let a = lhs.eval(&x);
            let b = rhs.eval(&x);
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0));
        }
    }
}

/// The vector fields act as first-order operators: X_k(u) agrees with a
/// directional finite difference at probe points, for every builtin.
#[test]
fn fields_act_as_directional_derivatives() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let u3 = CoefficientExpr::monomial(3, 1.3, &[1, 2, 0])
        .add(&CoefficientExpr::sin(3, 2))
        .mul(&CoefficientExpr::cos(3, 0));
    for tag in ["euclidean", "constant", "engel", "trig-bounded"] {
        let sys = VectorFieldSystem::builtin(tag, 3, 0).unwrap();
        for field in sys.fields() {
            let xu = field.apply(&u3).unwrap();
            for _ in 0..100 {
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let h = 1e-4;
                // u(x + h a(x)) - u(x - h a(x)) over 2h, frozen direction.
                let a: Vec<f64> = field.coeffs().iter().map(|c| c.eval(&x)).collect();
                let xp: Vec<f64> = x.iter().zip(&a).map(|(xi, ai)| xi + h * ai).collect();
                let xm: Vec<f64> = x.iter().zip(&a).map(|(xi, ai)| xi - h * ai).collect();
                let fd = (u3.eval(&xp) - u3.eval(&xm)) / (2.0 * h);
                let sym = xu.eval(&x);
                assert!(
                    (fd - sym).abs() <= 1e-6 * sym.abs().max(fd.abs()).max(1.0),
                    "{tag}: fd {fd} sym {sym} at {x:?}"
                );
            }
        }
    }
}

/// Blow-up time is nonincreasing in the forcing amplitude.
#[test]
fn blowup_time_monotone_in_forcing() {
    let grid = Arc::new(Grid::uniform(1, 4.0, 21).unwrap());
    let sys = VectorFieldSystem::builtin("euclidean", 1, 0).unwrap();
    let op = assemble_operator(&sys, &grid).unwrap();
    let u0 = GridFunction::zeros(grid.clone());
    let cfg = ImexConfig {
        dt0: 2e-3,
        t_max: 100.0,
        ..Default::default()
    };
    let mut last = f64::INFINITY;
    for eps in [0.5, 1.0, 2.0] {
        let f = GridFunction::sample_fn(grid.clone(), |x| eps * (-(x[0] * x[0])).exp());
        let r = lines::run(Some(&op), 2.0, &u0, &f, &cfg).unwrap();
        let t = r.blowup_time.expect("forced blow-up");
        assert!(t < last, "eps {eps}: {t} !< {last}");
        last = t;
    }
}

/// The continuation driver agrees with the one-shot Picard solve on the
/// first guaranteed segment.
#[test]
fn continuation_first_segment_matches_picard() {
    let grid = Arc::new(Grid::uniform(1, 4.0, 31).unwrap());
    let sys = VectorFieldSystem::builtin("euclidean", 1, 0).unwrap();
    let op = Arc::new(assemble_operator(&sys, &grid).unwrap());
    let action = blowlab_core::semigroup::SemigroupAction::with_default_tol(op);
    let u0 = GridFunction::sample_fn(grid.clone(), |x| 0.7 * (-(x[0] * x[0])).exp());
    let zero = GridFunction::zeros(grid);
    let cfg = PicardConfig::default();
    let one = mild::picard_solve(&action, 2.0, &u0, &zero, &cfg).unwrap();
    let cont = mild::continue_to_tmax(&action, 2.0, &u0, &zero, one.horizon, &cfg).unwrap();
    assert_eq!(cont.segments, 1);
    let (t_end, sup_end) = *cont.sup_history.last().unwrap();
    assert!((t_end - one.horizon).abs() < 1e-12);
    assert!((sup_end - one.trajectory.final_state().sup_norm()).abs() < 1e-9);
}
