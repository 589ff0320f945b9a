use isodelay::euler_lagrange::{el_residual, Regime};
use isodelay::expr::Binding;
use isodelay::optimal_control::{costate_from_momenta, first_order_as_control, pmp_residuals};
use isodelay::solver::{solve_el, solve_pmp, CollocationScheme, InitialGuess};
use isodelay::{constraint_defect, AugmentedSetup, History, IsoperimetricProblem, Trajectory};

fn delayed_first_order() -> IsoperimetricProblem {
    let b = Binding::variational(1, 1);
    IsoperimetricProblem::new(1, 1, 0.4, 0.0, 1.0, b.integrand("qd^2 + qd*qd_tau + q^2").unwrap())
        .with_constraint(b.integrand("q").unwrap(), 0.2)
        .with_history(History::new(vec![Binding::time_only().integrand("sin(t)").unwrap()]))
        .with_terminal(0, vec![0.5])
}

fn sup_diff(a: &Trajectory, b: &Trajectory, lo: f64, hi: f64) -> f64 {
    (0..=400)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / 400.0;
            (a.eval(t, 0).unwrap()[0] - b.eval(t, 0).unwrap()[0]).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn variational_and_control_solutions_agree() {
    let problem = delayed_first_order();
    let scheme = CollocationScheme::default().with_nodes(24);
    let el = solve_el(&problem, &InitialGuess::default(), &scheme).unwrap();
    let cp = first_order_as_control(&problem).unwrap();
    let pmp = solve_pmp(&cp, &scheme).unwrap();
    assert!(sup_diff(&el.trajectory, &pmp.triple.state, 0.0, 1.0) < 1e-7);
    assert!((el.lambda[0] - pmp.lambda[0]).abs() < 1e-6, "{:?} vs {:?}", el.lambda, pmp.lambda);

    let setup = AugmentedSetup::new(problem.clone(), el.lambda.clone()).unwrap();
    for t in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let regime = Regime::of(t, problem.switch_time());
        let p = costate_from_momenta(&setup, &el.trajectory, t, regime).unwrap()[0];
        assert!((p - pmp.triple.costate.eval(t, 0).unwrap()[0]).abs() < 1e-6, "t = {t}");
        // off-node residuals carry the collocation truncation error
        assert!(el_residual(&setup, &el.trajectory, t).unwrap()[0].abs() < 1e-5);
        assert!(pmp_residuals(&cp, &pmp.triple, &pmp.lambda, t).unwrap().sup() < 1e-5);
    }
    assert!(constraint_defect(&problem, &el.trajectory).unwrap()[0].abs() < 1e-10);
    assert!((el.trajectory.eval(1.0, 0).unwrap()[0] - 0.5).abs() < 1e-10);
}

#[test]
fn refinement_reduces_error() {
    let problem = delayed_first_order();
    let fine = solve_el(&problem, &InitialGuess::default(), &CollocationScheme::default().with_nodes(64)).unwrap();
    let errors: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| {
            let sol = solve_el(&problem, &InitialGuess::default(), &CollocationScheme::default().with_nodes(n)).unwrap();
            sup_diff(&sol.trajectory, &fine.trajectory, 0.0, 1.0)
        })
        .collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    assert!(errors[1] / errors[2] > 4.0, "{errors:?}");
}

#[test]
fn second_order_agrees_with_reduced_control_problem() {
    let b = Binding::variational(2, 1);
    let problem = IsoperimetricProblem::new(2, 1, 0.5, 0.0, 1.5, b.integrand("qdd^2 + qd*qd_tau + q^2").unwrap())
        .with_history(History::new(vec![Binding::time_only().integrand("cos(t)").unwrap()]))
        .with_terminal(0, vec![0.0]);
    let scheme = CollocationScheme::default().with_nodes(24);
    let el = solve_el(&problem, &InitialGuess::default(), &scheme).unwrap();
    let cp = isodelay::optimal_control::reduce_to_control(&problem).unwrap();
    let pmp = solve_pmp(&cp, &scheme).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..=300 {
        let t = 1.5 * i as f64 / 300.0;
        let a = el.trajectory.eval(t, 0).unwrap()[0];
        let s = pmp.triple.state.eval(t, 0).unwrap()[0];
        worst = worst.max((a - s).abs());
    }
    assert!(worst < 1e-6, "{worst:e}");
    let setup = AugmentedSetup::new(problem.clone(), vec![]).unwrap();
    for t in [0.2, 0.7, 1.2] {
        let regime = Regime::of(t, problem.switch_time());
        let p = costate_from_momenta(&setup, &el.trajectory, t, regime).unwrap();
        let q = pmp.triple.costate.eval(t, 0).unwrap();
        for (x, y) in p.iter().zip(&q) {
            assert!((x - y).abs() < 1e-5, "t = {t}: {p:?} vs {q:?}");
        }
    }
}
