//! Cross-checks of the radial split-step solver against closed forms and
//! against the variational width equations.

use logbec::pde::{self, RadialGrid, SplitStepSolver};
use logbec::units::{Dimension, ELECTRON_VOLT};
use logbec::variational::{self, IntegratorSettings};
use logbec::{BECParams, Experiment, GaussianState, TrapSchedule};

fn linear_width(s0: f64, t: f64) -> f64 {
    (s0 * s0 + t * t / (4.0 * s0 * s0)).sqrt()
}

#[test]
fn free_gaussian_over_100_ms() {
    let e = Experiment::baseline(0.0);
    let p = BECParams::new(0.0, 0.0, 0.0).unwrap();
    let t_end = e.internal_time(0.1);
    // σ(0.1 s) ≈ 14.8 µm.
    let grid = RadialGrid::new(100.0, 4096).unwrap();
    let field = pde::init_gaussian(grid, 2.5, 0.0).unwrap();
    let times: Vec<f64> = (1..=10).map(|k| e.internal_time(0.01 * k as f64)).collect();
    let run = pde::evolve(
        &field,
        &p,
        &TrapSchedule::free_flight(),
        t_end,
        0.05,
        &times,
    )
    .unwrap();
    for s in &run.samples {
        let rel = (s.width / linear_width(2.5, s.time) - 1.0).abs();
        assert!(rel < 1e-3, "t = {}: rel {rel:e}", s.time);
    }
}

#[test]
fn gausson_at_current_bound() {
    let e = Experiment::baseline(3.3e-15);
    let p = BECParams::new(0.0, 0.0, e.params.log_strength).unwrap();
    let seq = variational::gausson_width(&p).unwrap();
    let grid = RadialGrid::new(80.0, 2048).unwrap();
    let field = pde::init_gaussian(grid, seq, 0.0).unwrap();
    let t_end = 200.0;
    let dt = pde::default_time_step(&field, &p, &TrapSchedule::free_flight());
    let times: Vec<f64> = (1..=20).map(|k| 10.0 * k as f64).collect();
    let run = pde::evolve(&field, &p, &TrapSchedule::free_flight(), t_end, dt, &times).unwrap();
    for s in &run.samples {
        assert!((s.width / seq - 1.0).abs() < 1e-2, "{s:?}");
    }
}

#[test]
fn norm_drift_per_ten_thousand_steps() {
    let e = Experiment::baseline(3.3e-15);
    let grid = RadialGrid::new(300.0, 4096).unwrap();
    let field = pde::init_gaussian(grid, 2.5, 0.0).unwrap();
    let dt = pde::default_time_step(&field, &e.params, &TrapSchedule::free_flight());
    let t_end = 10_000.0 * dt;
    let run = pde::evolve(
        &field,
        &e.params,
        &TrapSchedule::free_flight(),
        t_end,
        dt,
        &[],
    )
    .unwrap();
    assert_eq!(run.steps, 10_000);
    let drift = (run.field.norm() - field.norm()).abs();
    assert!(drift < 1e-8, "{drift:e}");
}

#[test]
fn second_order_in_time_step() {
    let e = Experiment::baseline(3.3e-15);
    let mut p = e.params.clone();
    p.atom_number = 5e3;
    p.log_strength *= 20.0;
    let grid = RadialGrid::new(60.0, 2048).unwrap();
    let field = pde::init_gaussian(grid, 2.5, 0.0).unwrap();
    let sched = TrapSchedule::free_flight();
    let t_end = 4.0;
    let times = [1.0, 2.0, 3.0];
    let widths = |dt: f64| -> Vec<f64> {
        pde::evolve(&field, &p, &sched, t_end, dt, &times)
            .unwrap()
            .samples
            .iter()
            .map(|s| s.width)
            .collect()
    };
    let reference = widths(0.00125);
    let err = |dt: f64| {
        widths(dt)
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(0.02), err(0.01));
    let ratio = e1 / e2;
    assert!(
        (3.0..5.0).contains(&ratio),
        "errors {e1:e} {e2:e}, ratio {ratio}"
    );
}

#[test]
fn density_floor_insensitivity() {
    let e = Experiment::baseline(3.3e-15);
    let grid = RadialGrid::new(300.0, 4096).unwrap();
    let field = pde::init_gaussian(grid, 2.5, 0.0).unwrap();
    let sched = TrapSchedule::free_flight();
    let dt = pde::default_time_step(&field, &e.params, &sched);
    let t_end = e.internal_time(0.02);
    let run = |ratio: f64| {
        SplitStepSolver::new(grid)
            .with_density_floor_ratio(ratio)
            .evolve(&field, &e.params, &sched, t_end, dt, &[])
            .unwrap()
            .field
            .width()
    };
    let (a, b) = (run(1e-12), run(1e-11));
    assert!((a / b - 1.0).abs() < 1e-3, "{a} {b}");
}

#[test]
fn matches_variational_on_baseline() {
    for b_ev in [0.0, 3.3e-15] {
        let e = Experiment::baseline(b_ev);
        let t_end = e.internal_time(0.05);
        let grid = RadialGrid::new(300.0, 4096).unwrap();
        let field = pde::init_gaussian(grid, 2.5, 0.0).unwrap();
        let sched = TrapSchedule::free_flight();
        let dt = pde::default_time_step(&field, &e.params, &sched);
        let times = e.sample_times(t_end);
        let run = pde::evolve(&field, &e.params, &sched, t_end, dt, &times).unwrap();
        let var = variational::integrate_at(
            &GaussianState::spherical(2.5, 0.0).unwrap(),
            &e.params,
            &sched,
            t_end,
            &times,
            &IntegratorSettings::default(),
        )
        .unwrap();
        let mut worst: f64 = 0.0;
        for s in &run.samples {
            let v = var.sample_at(s.time).unwrap().widths[0];
            worst = worst.max((s.width / v - 1.0).abs());
        }
        eprintln!("b = {b_ev:e} eV: worst relative discrepancy {worst:.4}");
        assert!(worst < 0.05, "{worst}");
    }
}

#[test]
fn internal_energy_unit_consistency() {
    let e = Experiment::baseline(3.3e-15);
    let b_si = e
        .units
        .from_internal(e.params.log_strength, Dimension::Energy);
    assert!((b_si / (3.3e-15 * ELECTRON_VOLT) - 1.0).abs() < 1e-14);
}
