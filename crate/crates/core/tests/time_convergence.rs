//! Second-order convergence in the step size up to half the collapse time.

use bnls::grid::{interpolate_to_grid, FieldSnapshot, InitialCondition};
use bnls::presets::simulation_preset;
use bnls::timestepper::{run_simulation, HaltReason};

fn final_field(dt0: f64) -> FieldSnapshot {
    let mut cfg = simulation_preset("crit-1d").unwrap();
    cfg.r_max = 30.0;
    cfg.nodes = 1201;
    cfg.dt0 = dt0;
    // the preset collapses at t ≈ 0.0499
    cfg.t_max = Some(0.025);
    assert_eq!(cfg.initial, InitialCondition::gaussian(1.618, 2.0));
    let out = run_simulation(&cfg, None).unwrap();
    assert_eq!(out.halt, HaltReason::TimeLimit);
    assert!((out.final_state.snapshot.t() - 0.025).abs() < 1e-14);
    out.final_state.snapshot
}

fn sup_difference(a: &FieldSnapshot, b: &FieldSnapshot) -> f64 {
    let b = interpolate_to_grid(b, a.shared_grid()).unwrap();
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn halving_the_step_quarters_the_error() {
    let coarse = final_field(4e-4);
    let mid = final_field(2e-4);
    let fine = final_field(1e-4);
    let ratio = sup_difference(&coarse, &mid) / sup_difference(&mid, &fine);
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}
