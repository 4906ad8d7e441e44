//! Closed-loop error dynamics along simulated trajectories.

use dhflow::analysis::storage_s_ch;
use dhflow::control::Saturation;
use dhflow::model::regressor_w;
use dhflow::sim::{ChordMode, IntegratorConfig, Sample, Simulation, StateBundle};
use dhflow::synth::two_tank_scenario;
use dhflow::Scenario;
use nalgebra::DVector;

fn scenario() -> Scenario {
    two_tank_scenario().build().unwrap()
}

fn run(sc: &Scenario, mode: ChordMode, init: StateBundle, t_end: f64, dt: f64) -> Vec<Sample> {
    let mut cl = sc.closed_loop();
    cl.mode = mode;
    cl.saturation = Saturation::disabled();
    let sim = Simulation {
        closed_loop: cl,
        initial: init,
        setpoints: sc.setpoints.clone(),
        schedule: Default::default(),
        integrator: IntegratorConfig { dt, t_end, record_every: dt },
    };
    sim.run().unwrap().samples
}

fn z_of(sc: &Scenario, s: &Sample) -> DVector<f64> {
    &s.q_pr - &s.x_a + sc.vol.n_sh.component_mul(&(&s.v_sh - &s.v_sh_star))
}

/// Five-point central difference of `f` over uniformly spaced samples.
fn fd5(samples: &[Sample], k: usize, dt: f64, f: impl Fn(&Sample) -> DVector<f64>) -> DVector<f64> {
    (f(&samples[k - 2]) - f(&samples[k - 1]) * 8.0 + f(&samples[k + 1]) * 8.0 - f(&samples[k + 2])) / (12.0 * dt)
}

/// `-N_pr z - ṽ + W̃(z)(x_b - θ)`.
fn z_law(sc: &Scenario, s: &Sample) -> DVector<f64> {
    let z = z_of(sc, s);
    let v = &s.v_sh - &s.v_sh_star;
    -sc.vol.n_pr.component_mul(&z) - &v + regressor_w(&s.q_pr).component_mul(&(&s.x_b - sc.model.theta()))
}

fn pinned_start(sc: &Scenario) -> StateBundle {
    let mut init = sc.initial.clone();
    init.plant.v_sh += DVector::from_vec(vec![20.0, -15.0]);
    init.plant.v_sc = &sc.model.capacity - &init.plant.v_sh;
    init.plant.q_pr[0] += 0.004;
    init
}

#[test]
fn producer_error_dynamics_from_vector_field() {
    let sc = scenario();
    let init = pinned_start(&sc);
    let samples = run(&sc, ChordMode::Pinned, init, 600.0, 0.1);
    let mut cl = sc.closed_loop();
    cl.mode = ChordMode::Pinned;
    cl.saturation = Saturation::disabled();
    let (n_ch, n_pr) = (sc.model.n_ch(), sc.model.n_pr());
    let mut worst: f64 = 0.0;
    for s in samples.iter().step_by(10) {
        let sp = dhflow::sim::Setpoints { q_ch_star: s.q_ch_star.clone(), v_sh_star: s.v_sh_star.clone() };
        let y = dhflow::analysis::sample_bundle(s).to_flat();
        let (dy, _) = cl.rhs(&y, &sp).unwrap();
        let q_pr_dot = dy.rows(n_ch, n_pr).into_owned();
        let v_dot = dy.rows(n_ch + n_pr, n_pr).into_owned();
        let x_a_dot = dy.rows(2 * n_ch + 3 * n_pr, n_pr).into_owned();
        let z_dot = q_pr_dot - x_a_dot + sc.vol.n_sh.component_mul(&v_dot);
        let lhs = sc.model.j_pr.component_mul(&z_dot);
        worst = worst.max((lhs - z_law(&sc, s)).amax());
    }
    assert!(worst < 1e-8, "{worst:e}");
}

#[test]
fn producer_error_dynamics_by_finite_difference() {
    let sc = scenario();
    let dt = 0.01;
    let samples = run(&sc, ChordMode::Pinned, pinned_start(&sc), 60.0, dt);
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in (2..samples.len() - 2).step_by(50) {
        let z_dot = fd5(&samples, k, dt, |s| z_of(&sc, s));
        let law = z_law(&sc, &samples[k]);
        worst = worst.max((sc.model.j_pr.component_mul(&z_dot) - &law).amax());
        scale = scale.max(law.amax());
    }
    assert!(worst <= 1e-6 * scale, "{worst:e} against {scale:e}");
}

#[test]
fn chord_storage_dissipates_at_least_the_damping() {
    let sc = scenario();
    let dt = 0.01;
    let mut init = sc.initial.clone();
    init.plant.q_ch += DVector::from_vec(vec![0.006, -0.004]);
    init.pi.x_ch += DVector::from_vec(vec![300.0, 150.0]);
    let samples = run(&sc, ChordMode::Dynamic, init, 30.0, dt);
    let q_star = &sc.setpoints.q_ch_star;
    let s_of = |s: &Sample| DVector::from_element(1, storage_s_ch(&sc.model, &sc.pi, &s.q_ch, &s.x_ch, q_star));
    let mut checked = 0;
    for k in 2..samples.len() - 2 {
        let s = &samples[k];
        let e = &s.q_ch - q_star;
        let bound = -e.component_mul(&sc.pi.n_ch).dot(&e);
        let s_dot = fd5(&samples, k, dt, s_of)[0];
        assert!(s_dot <= bound + 1e-6, "t = {}: {s_dot:e} > {bound:e}", s.t);
        assert!(samples[k + 1].s_ch <= s.s_ch + 1e-9);
        checked += 1;
    }
    assert!(checked > 2000);
    assert!(samples.last().unwrap().s_ch < 0.05 * samples[0].s_ch);
}
