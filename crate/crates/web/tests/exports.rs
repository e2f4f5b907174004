use parareal_web::{epsilon_curves, iteration_history, trajectories};

#[test]
fn curves_have_one_row_per_iteration() {
    let c = epsilon_curves(2, "exact", 3, 2).unwrap();
    assert_eq!(c.epsilons.len(), 9);
    assert_eq!(c.macro_errors.len(), 4);
    assert!(c.macro_errors.iter().all(|row| row.len() == 9));
    // the second iterate is much closer than the initial guess at small ε
    assert!(c.macro_errors[2][0] < 1e-3 * c.macro_errors[0][0]);
    let json = serde_json::to_string(&c).unwrap();
    assert!(json.starts_with("{\"epsilons\":["));
}

#[test]
fn history_decreases_for_matching() {
    let h = iteration_history(2, "euler", 1e-3, 10).unwrap();
    assert_eq!(h.micro_errors.len(), 11);
    assert!(h.micro_errors[10] < h.micro_errors[0] * 1e-5);
}

#[test]
fn trajectories_start_at_initial_condition() {
    let t = trajectories(1, "exact", 1e-2, 2).unwrap();
    assert_eq!(t.times.len(), 101);
    assert_eq!(t.iterates.len(), 3);
    assert!(t.iterates.iter().all(|x| x[0] == 1.0));
    assert_eq!(t.reference[0], 1.0);
    assert!((t.times[100] - 10.0).abs() < 1e-12);
}

#[test]
fn bad_inputs_are_reported() {
    assert!(epsilon_curves(4, "exact", 2, 2).is_err());
    assert!(iteration_history(2, "rk4", 1e-3, 2).is_err());
    assert!(trajectories(2, "exact", -1.0, 2).is_err());
    assert!(trajectories(2, "exact", 1e-3, 500).is_err());
}
