//! Equilibria, storage functions, loop-law residuals and convergence metrics.
//!
//! These functions read the true plant parameters. They are post-processing
//! and diagnostics only and never feed back into the controllers.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::control::{FlowPIGains, FlowPIState, VolumeCtrlState, VolumeGains};
use crate::hydraulics::edge_pressure_loss;
use crate::model::{PlantState, ReducedModel};
use crate::sim::{ClosedLoop, Sample, Setpoints, StateBundle, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumPoint {
    pub q_ch: DVector<f64>,
    pub x_ch: DVector<f64>,
    pub q_pr: DVector<f64>,
    pub v_sh: DVector<f64>,
    pub x_a: DVector<f64>,
    pub x_b: DVector<f64>,
    /// `false` where the producer's equilibrium flow is zero.
    pub in_operation: Vec<bool>,
    pub warnings: Vec<String>,
}

impl EquilibriumPoint {
    pub fn is_feasible(&self) -> bool {
        self.in_operation.iter().all(|&b| b)
    }

    pub fn bundle(&self, model: &ReducedModel) -> StateBundle {
        StateBundle {
            plant: PlantState {
                t: 0.0,
                q_ch: self.q_ch.clone(),
                q_pr: self.q_pr.clone(),
                v_sh: self.v_sh.clone(),
                v_sc: &model.capacity - &self.v_sh,
            },
            pi: FlowPIState { x_ch: self.x_ch.clone() },
            vol: VolumeCtrlState { x_a: self.x_a.clone(), x_b: self.x_b.clone() },
        }
    }
}

/// Closed-loop equilibrium for constant setpoints.
pub fn compute_equilibrium(model: &ReducedModel, q_ch_star: &DVector<f64>, v_sh_star: &DVector<f64>) -> EquilibriumPoint {
    let q_pr = &model.b * q_ch_star;
    let in_operation: Vec<bool> = q_pr.iter().map(|&q| q != 0.0).collect();
    let warnings = in_operation
        .iter()
        .enumerate()
        .filter(|(_, &op)| !op)
        .map(|(i, _)| {
            format!("producer {i} is not in operation at equilibrium (zero flow); its friction estimate is not guaranteed to converge")
        })
        .collect();
    EquilibriumPoint {
        q_ch: q_ch_star.clone(),
        x_ch: -model.f_ch(q_ch_star),
        x_a: q_pr.clone(),
        q_pr,
        v_sh: v_sh_star.clone(),
        x_b: model.theta(),
        in_operation,
        warnings,
    }
}

/// `‖RHS‖∞` of the closed loop at `bundle`.
pub fn closed_loop_residual(cl: &ClosedLoop, bundle: &StateBundle, sp: &Setpoints) -> Result<f64, crate::model::ModelError> {
    let (dy, _) = cl.rhs(&bundle.to_flat(), sp)?;
    Ok(dy.amax())
}

/// `‖F ΔP_E‖∞` with `ΔP_E = J_E q̇_E + f_E(q_E) - w_E`, using the model's own
/// friction coefficients.
pub fn loop_law_residual(
    model: &ReducedModel,
    q_ch: &DVector<f64>,
    q_pr: &DVector<f64>,
    q_ch_dot: &DVector<f64>,
    q_pr_dot: &DVector<f64>,
    u_ch: &DVector<f64>,
    u_pr: &DVector<f64>,
) -> f64 {
    let theta: Vec<f64> = model.graph.edges().iter().map(|e| e.theta).collect();
    loop_law_residual_with(model, &theta, q_ch, q_pr, q_ch_dot, q_pr_dot, u_ch, u_pr)
}

/// As [`loop_law_residual`] with per-edge friction coefficients supplied in
/// natural edge order.
#[allow(clippy::too_many_arguments)]
pub fn loop_law_residual_with(
    model: &ReducedModel,
    theta_natural: &[f64],
    q_ch: &DVector<f64>,
    q_pr: &DVector<f64>,
    q_ch_dot: &DVector<f64>,
    q_pr_dot: &DVector<f64>,
    u_ch: &DVector<f64>,
    u_pr: &DVector<f64>,
) -> f64 {
    let edges = model.graph.edges();
    let q_e = model.edge_flows(q_ch, q_pr);
    let qd_e = model.edge_flows(q_ch_dot, q_pr_dot);
    let w = model.pumps.edge_pressures(edges.len(), u_ch, u_pr);
    let dp = DVector::from_fn(edges.len(), |j, _| {
        edges[j].inertia * qd_e[j] + edge_pressure_loss(theta_natural[j], q_e[j]) - w[j]
    });
    let f = model.loops.natural(&model.graph).map(|v| v as f64);
    (f * dp).amax()
}

/// Loop-law residual of a recorded sample, with flow derivatives
/// reconstructed from the closed-loop vector field.
pub fn sample_loop_residual(cl: &ClosedLoop, s: &Sample) -> Result<f64, crate::model::ModelError> {
    let m = cl.model;
    let (n_ch, n_pr) = (m.n_ch(), m.n_pr());
    let bundle = sample_bundle(s);
    let sp = Setpoints { q_ch_star: s.q_ch_star.clone(), v_sh_star: s.v_sh_star.clone() };
    let (dy, inp) = cl.rhs(&bundle.to_flat(), &sp)?;
    let q_ch_dot = dy.rows(0, n_ch).into_owned();
    let q_pr_dot = dy.rows(n_ch, n_pr).into_owned();
    Ok(loop_law_residual(m, &s.q_ch, &s.q_pr, &q_ch_dot, &q_pr_dot, &inp.u_ch, &inp.u_pr))
}

pub fn sample_bundle(s: &Sample) -> StateBundle {
    StateBundle {
        plant: PlantState {
            t: s.t,
            q_ch: s.q_ch.clone(),
            q_pr: s.q_pr.clone(),
            v_sh: s.v_sh.clone(),
            v_sc: s.v_sc.clone(),
        },
        pi: FlowPIState { x_ch: s.x_ch.clone() },
        vol: VolumeCtrlState { x_a: s.x_a.clone(), x_b: s.x_b.clone() },
    }
}

/// `S_ch = ½ eᵀ J_ch e + ½ (x - x̄)ᵀ M_ch⁻¹ (x - x̄)` with `e = q - q⋆` and
/// `x̄ = -f_ch(q⋆)`.
pub fn storage_s_ch(
    model: &ReducedModel,
    gains: &FlowPIGains,
    q_ch: &DVector<f64>,
    x_ch: &DVector<f64>,
    q_ch_star: &DVector<f64>,
) -> f64 {
    let e = q_ch - q_ch_star;
    let xe = x_ch + model.f_ch(q_ch_star);
    0.5 * e.dot(&(&model.j_ch * &e)) + 0.5 * xe.component_div(&gains.m_ch).dot(&xe)
}

/// `H̃ = ½ zᵀ J_pr z + ½ ṽᵀ ṽ + ½ x̃_aᵀ M_a⁻¹ x̃_a + ½ x̃_bᵀ M_b⁻¹ x̃_b`
/// with `x̃_a = x_a - B q⋆` and `x̃_b = x_b - θ`.
#[allow(clippy::too_many_arguments)]
pub fn hamiltonian_h_tilde(
    model: &ReducedModel,
    gains: &VolumeGains,
    z_pr: &DVector<f64>,
    v_sh: &DVector<f64>,
    x_a: &DVector<f64>,
    x_b: &DVector<f64>,
    q_ch_star: &DVector<f64>,
    v_sh_star: &DVector<f64>,
) -> f64 {
    let v = v_sh - v_sh_star;
    let xa = x_a - &model.b * q_ch_star;
    let xb = x_b - model.theta();
    0.5 * z_pr.component_mul(&model.j_pr).dot(z_pr)
        + 0.5 * v.dot(&v)
        + 0.5 * xa.component_div(&gains.m_a).dot(&xa)
        + 0.5 * xb.component_div(&gains.m_b).dot(&xb)
}

/// `-zᵀ N_pr z - ṽᵀ N_sh ṽ`.
pub fn dissipation_rate(gains: &VolumeGains, z_pr: &DVector<f64>, v_err: &DVector<f64>) -> f64 {
    -z_pr.component_mul(&gains.n_pr).dot(z_pr) - v_err.component_mul(&gains.n_sh).dot(v_err)
}

/// Interconnection and damping matrix of the volume loop in the coordinates
/// `(J_pr z, V_sh, M_a⁻¹ x_a, M_b⁻¹ x_b)`, for the regressor diagonal `w`.
pub fn interconnection_matrix(gains: &VolumeGains, w: &DVector<f64>) -> DMatrix<f64> {
    let n = w.len();
    let mut f = DMatrix::zeros(4 * n, 4 * n);
    for i in 0..n {
        let (z, v, a, b) = (i, n + i, 2 * n + i, 3 * n + i);
        f[(z, z)] = -gains.n_pr[i];
        f[(z, v)] = -1.0;
        f[(z, b)] = w[i];
        f[(v, z)] = 1.0;
        f[(v, v)] = -gains.n_sh[i];
        f[(v, a)] = 1.0;
        f[(a, v)] = -1.0;
        f[(b, z)] = -w[i];
    }
    f
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// Time (s) after which `‖q_ch - q⋆‖∞` stays within 1% of `‖q⋆‖∞`.
    pub settling_q_ch: Option<f64>,
    /// Per tank, within 1% of `|V⋆|`.
    pub settling_v_sh: Vec<Option<f64>>,
    /// Per producer, within 1% of `θ_i`.
    pub settling_x_b: Vec<Option<f64>>,
    /// Per tank, overshoot past the final volume setpoint as a fraction of
    /// the commanded change.
    pub overshoot_v_sh: Vec<f64>,
    pub terminal_q_ch_error: f64,
    pub terminal_v_sh_error: f64,
    /// `‖x_b - θ‖ / ‖θ‖` over all producers.
    pub terminal_param_error: f64,
    /// Same, restricted to producers in operation.
    pub terminal_param_error_operating: f64,
    pub in_operation: Vec<bool>,
}

fn settling(samples: &[Sample], within: impl Fn(&Sample) -> bool) -> Option<f64> {
    let last_out = samples.iter().rposition(|s| !within(s));
    match last_out {
        None => samples.first().map(|s| s.t),
        Some(k) if k + 1 < samples.len() => Some(samples[k + 1].t),
        Some(_) => None,
    }
}

/// Settling metrics relative to the final setpoints.
pub fn convergence_metrics(traj: &Trajectory, eq: &EquilibriumPoint, theta: &DVector<f64>) -> ConvergenceReport {
    let s = &traj.samples;
    let last = s.last().expect("non-empty trajectory");
    let q_band = 0.01 * eq.q_ch.amax();
    let settling_q_ch = settling(s, |x| (&x.q_ch - &eq.q_ch).amax() <= q_band);
    let n_st = eq.v_sh.len();
    let settling_v_sh =
        (0..n_st).map(|i| settling(s, |x| (x.v_sh[i] - eq.v_sh[i]).abs() <= 0.01 * eq.v_sh[i].abs())).collect();
    let settling_x_b =
        (0..theta.len()).map(|i| settling(s, |x| (x.x_b[i] - theta[i]).abs() <= 0.01 * theta[i].abs())).collect();
    let overshoot_v_sh = (0..n_st)
        .map(|i| {
            let v0 = s[0].v_sh[i];
            let step = eq.v_sh[i] - v0;
            if step == 0.0 {
                return 0.0;
            }
            let peak = s.iter().map(|x| (x.v_sh[i] - eq.v_sh[i]) * step.signum()).fold(0.0, f64::max);
            peak / step.abs()
        })
        .collect();
    let xb_err = &last.x_b - theta;
    let op: Vec<usize> = (0..theta.len()).filter(|&i| eq.in_operation[i]).collect();
    let norm_op = |v: &DVector<f64>| op.iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt();
    ConvergenceReport {
        settling_q_ch,
        settling_v_sh,
        settling_x_b,
        overshoot_v_sh,
        terminal_q_ch_error: (&last.q_ch - &eq.q_ch).amax(),
        terminal_v_sh_error: (&last.v_sh - &eq.v_sh).amax(),
        terminal_param_error: xb_err.norm() / theta.norm(),
        terminal_param_error_operating: if op.is_empty() { 0.0 } else { norm_op(&xb_err) / norm_op(theta) },
        in_operation: eq.in_operation.clone(),
    }
}

/// Largest sampled increase of a scalar series over consecutive samples,
/// ignoring pairs that straddle one of `breaks` (sample indices where the
/// setpoints change).
pub fn max_increase(values: &[f64], breaks: &[usize]) -> f64 {
    values
        .windows(2)
        .enumerate()
        .filter(|(k, _)| !breaks.contains(&(k + 1)))
        .map(|(_, w)| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Indices `k` where sample `k` ran under different setpoints than `k - 1`.
pub fn setpoint_breaks(samples: &[Sample]) -> Vec<usize> {
    (1..samples.len())
        .filter(|&k| samples[k].q_ch_star != samples[k - 1].q_ch_star || samples[k].v_sh_star != samples[k - 1].v_sh_star)
        .collect()
}
