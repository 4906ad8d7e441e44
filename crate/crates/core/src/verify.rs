//! Invariant suite run by `dhsim verify`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{self, compute_equilibrium, convergence_metrics, ConvergenceReport};
use crate::graph::NodeKind;
use crate::hydraulics::generic_friction_map;
use crate::intmat;
use crate::scenario::Scenario;
use crate::sim::{ChordMode, IntegratorConfig, Simulation};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured quantity compared against `tolerance`.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub checks: Vec<Check>,
    pub convergence: Option<ConvergenceReport>,
    pub warnings: Vec<String>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("scenario: {}\n", self.scenario);
        for c in &self.checks {
            out += &format!(
                "[{}] {:<28} value {:.3e} (tol {:.1e}) {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.tolerance,
                c.detail
            );
        }
        if let Some(r) = &self.convergence {
            out += &format!(
                "terminal errors: q_ch {:.3e} m3/s, V_sh {:.3e} m3, x_b {:.3e} (relative)\n",
                r.terminal_q_ch_error, r.terminal_v_sh_error, r.terminal_param_error
            );
        }
        for w in &self.warnings {
            out += &format!("warning: {w}\n");
        }
        out
    }
}

fn check(name: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> Check {
    Check { name: name.into(), passed: value.is_finite() && value <= tolerance, value, tolerance, detail: detail.into() }
}

fn flag(name: &str, ok: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), passed: ok, value: if ok { 0.0 } else { 1.0 }, tolerance: 0.0, detail: detail.into() }
}

/// Static checks on the model plus a full simulation checked on every sample.
/// A 1 h pinned-chord run covers the volume-loop storage decay.
pub fn run_verification(sc: &Scenario) -> VerificationReport {
    let m = &sc.model;
    let mut checks = Vec::new();
    let mut warnings = Vec::new();

    let f = &m.loops.f;
    checks.push(flag("F entries in {-1,0,1}", intmat::entries_unit(f), ""));
    let rank = intmat::rank(f);
    checks.push(flag("F full row rank", rank == m.loops.rows(), format!("rank {rank} of {}", m.loops.rows())));
    checks.push(flag("B entries in {-1,0,1}", intmat::entries_unit(&m.b_int), ""));
    let b0 = m.graph.build_incidence().expect("model graph is connected");
    let fn_ = m.loops.natural(&m.graph);
    let prod = &b0 * fn_.transpose();
    let junction_ok = m
        .graph
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, n)| n.kind == NodeKind::Junction)
        .all(|(k, _)| prod.row(k).iter().all(|&v| v == 0));
    checks.push(flag("junction mass balance", junction_ok, "B0(junctions) F^T = 0"));

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let q_ch = DVector::from_fn(m.n_ch(), |_, _| rng.random_range(-0.2..0.2));
        let q_pr = DVector::from_fn(m.n_pr(), |_, _| rng.random_range(-0.2..0.2));
        let (gc, gp) = generic_friction_map(&m.loops, &m.theta_cols, &q_ch, &q_pr).expect("dimensions match");
        let (cc, cp) = (m.f_ch(&q_ch), m.f_pr(&q_pr));
        let scale = gc.amax().max(gp.amax()).max(f64::MIN_POSITIVE);
        worst = worst.max((&cc - &gc).amax().max((&cp - &gp).amax()) / scale);
    }
    checks.push(check("friction closed form", worst, 1e-12, "relative to -F f_E(F^T q)"));

    let cl = sc.closed_loop();
    let sp0 = sc.setpoints.clone();
    let eq = compute_equilibrium(m, &sp0.q_ch_star, &sp0.v_sh_star);
    warnings.extend(eq.warnings.iter().cloned());
    match analysis::closed_loop_residual(&cl, &eq.bundle(m), &sp0) {
        Ok(r) => checks.push(check("equilibrium residual", r, 1e-10, "closed-loop RHS at equilibrium")),
        Err(e) => checks.push(flag("equilibrium residual", false, e.to_string())),
    }

    let mut convergence = None;
    match sc.run() {
        Err(abort) => {
            checks.push(flag("simulation", false, abort.error.to_string()));
        }
        Ok(traj) => {
            warnings.extend(traj.diagnostics.warnings.iter().cloned());
            let mut cons: f64 = 0.0;
            for s in &traj.samples {
                for i in 0..m.n_st() {
                    cons = cons.max((s.v_sh[i] + s.v_sc[i] - m.capacity[i]).abs() / m.capacity[i]);
                }
            }
            checks.push(check("tank conservation", cons, 1e-6, "relative to capacity"));
            let mut loop_res: f64 = 0.0;
            for s in &traj.samples {
                match analysis::sample_loop_residual(&cl, s) {
                    Ok(r) => loop_res = loop_res.max(r),
                    Err(_) => loop_res = f64::INFINITY,
                }
            }
            checks.push(check("loop law", loop_res, 1e-9, "max |F dP_E| over samples, Pa"));
            let fin = sc.final_setpoints();
            let eq_fin = compute_equilibrium(m, &fin.q_ch_star, &fin.v_sh_star);
            convergence = Some(convergence_metrics(&traj, &eq_fin, &m.theta()));
        }
    }

    // volume-loop storage decay with the chord flows pinned, unclipped
    let mut pinned = cl.clone();
    pinned.mode = ChordMode::Pinned;
    pinned.saturation.enabled = false;
    let sim = Simulation {
        closed_loop: pinned,
        initial: sc.initial.clone(),
        setpoints: sp0,
        schedule: Default::default(),
        integrator: IntegratorConfig { dt: sc.integrator.dt, t_end: 3600.0, record_every: sc.integrator.dt },
    };
    match sim.run() {
        Ok(t) => {
            let h: Vec<f64> = t.samples.iter().map(|s| s.h_tilde).collect();
            let inc = analysis::max_increase(&h, &[]);
            checks.push(check("volume storage decay", inc, 1e-9, "max sampled increase of H over 1 h, chords pinned"));
        }
        Err(abort) => checks.push(flag("volume storage decay", false, abort.error.to_string())),
    }

    VerificationReport { scenario: sc.name.clone(), checks, convergence, warnings }
}
