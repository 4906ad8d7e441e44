//! Fixed-step RK4 integration of the closed loop (plant, PI flow controller,
//! adaptive volume controller) with piecewise-constant setpoint schedules.

use log::warn;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis;
use crate::control::{
    adaptive_volume_channel, pi_flow_channel, saturate_u_pr, ChordMeasurement, FlowPIGains, FlowPIState,
    ProducerMeasurement, Saturation, VolumeCtrlState, VolumeGains,
};
use crate::model::{ModelError, PlantState, ReducedModel};

#[derive(Debug, Clone, PartialEq)]
pub struct Setpoints {
    pub q_ch_star: DVector<f64>,
    pub v_sh_star: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// s
    pub t: f64,
    pub q_ch_star: Option<DVector<f64>>,
    pub v_sh_star: Option<DVector<f64>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("event times must be strictly increasing (event {index} at t = {t} s)")]
    NotIncreasing { index: usize, t: f64 },
    #[error("event {index}: {reason}")]
    BadEvent { index: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schedule {
    events: Vec<Event>,
}

impl Schedule {
    pub fn new(events: Vec<Event>) -> Result<Self, ScheduleError> {
        for (i, w) in events.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(ScheduleError::NotIncreasing { index: i + 1, t: w[1].t });
            }
        }
        for (i, e) in events.iter().enumerate() {
            if !(e.t >= 0.0) || !e.t.is_finite() {
                return Err(ScheduleError::BadEvent { index: i, reason: "time must be finite and >= 0".into() });
            }
        }
        Ok(Schedule { events })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn check_dims(&self, n_ch: usize, n_st: usize) -> Result<(), ScheduleError> {
        for (i, e) in self.events.iter().enumerate() {
            if e.q_ch_star.as_ref().is_some_and(|q| q.len() != n_ch) {
                return Err(ScheduleError::BadEvent { index: i, reason: format!("q_ch_star needs {n_ch} entries") });
            }
            if e.v_sh_star.as_ref().is_some_and(|v| v.len() != n_st) {
                return Err(ScheduleError::BadEvent { index: i, reason: format!("v_sh_star needs {n_st} entries") });
            }
        }
        Ok(())
    }

    /// Setpoints in force on `[t, next event)` starting from `initial`.
    pub fn setpoints_at(&self, initial: &Setpoints, t: f64) -> Setpoints {
        let mut sp = initial.clone();
        for e in self.events.iter().take_while(|e| e.t <= t) {
            apply(e, &mut sp);
        }
        sp
    }
}

fn apply(e: &Event, sp: &mut Setpoints) {
    if let Some(q) = &e.q_ch_star {
        sp.q_ch_star = q.clone();
    }
    if let Some(v) = &e.v_sh_star {
        sp.v_sh_star = v.clone();
    }
}

/// Applies every event scheduled at `t` (within `tol`). Controller states
/// are left alone. Returns whether anything fired.
pub fn apply_event(schedule: &Schedule, t: f64, tol: f64, setpoints: &mut Setpoints) -> bool {
    let mut fired = false;
    for e in schedule.events.iter().filter(|e| (e.t - t).abs() <= tol) {
        apply(e, setpoints);
        fired = true;
    }
    fired
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    /// s
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// s
    pub t_end: f64,
    /// Recording interval in simulated seconds.
    #[serde(default = "default_record")]
    pub record_every: f64,
}

fn default_dt() -> f64 {
    0.5
}
fn default_record() -> f64 {
    60.0
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        IntegratorConfig { dt, t_end, record_every: default_record() }
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn stride(&self) -> usize {
        ((self.record_every / self.dt).round() as usize).max(1)
    }
}

/// `Pinned` holds the chord flows at their setpoints, which removes the
/// disturbance acting on the volume loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChordMode {
    #[default]
    Dynamic,
    Pinned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateBundle {
    pub plant: PlantState,
    pub pi: FlowPIState,
    pub vol: VolumeCtrlState,
}

impl StateBundle {
    pub fn to_flat(&self) -> DVector<f64> {
        let p = &self.plant;
        let parts = [&p.q_ch, &p.q_pr, &p.v_sh, &p.v_sc, &self.pi.x_ch, &self.vol.x_a, &self.vol.x_b];
        DVector::from_iterator(parts.iter().map(|v| v.len()).sum(), parts.iter().flat_map(|v| v.iter().copied()))
    }

    pub fn from_flat(y: &DVector<f64>, n_ch: usize, n_pr: usize, t: f64) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let v = y.rows(at, n).into_owned();
            at += n;
            v
        };
        let q_ch = take(n_ch);
        let q_pr = take(n_pr);
        let v_sh = take(n_pr);
        let v_sc = take(n_pr);
        let x_ch = take(n_ch);
        let x_a = take(n_pr);
        let x_b = take(n_pr);
        StateBundle {
            plant: PlantState { t, q_ch, q_pr, v_sh, v_sc },
            pi: FlowPIState { x_ch },
            vol: VolumeCtrlState { x_a, x_b },
        }
    }

    pub fn dim(n_ch: usize, n_pr: usize) -> usize {
        2 * n_ch + 5 * n_pr
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("t = {t} s: {source}")]
    Model { t: f64, source: ModelError },
    #[error("state became non-finite at t = {t} s")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Inputs applied during one RHS evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct AppliedInputs {
    pub u_ch: DVector<f64>,
    pub u_pr: DVector<f64>,
    pub u_pr_raw: DVector<f64>,
    pub sat_active: bool,
}

/// The closed-loop vector field minus the setpoints.
#[derive(Debug, Clone)]
pub struct ClosedLoop<'a> {
    pub model: &'a ReducedModel,
    pub pi: FlowPIGains,
    pub vol: VolumeGains,
    pub saturation: Saturation,
    pub mode: ChordMode,
}

impl<'a> ClosedLoop<'a> {
    pub fn dim(&self) -> usize {
        StateBundle::dim(self.model.n_ch(), self.model.n_pr())
    }

    /// Control inputs for the flat state `y`.
    pub fn inputs(&self, y: &DVector<f64>, sp: &Setpoints) -> AppliedInputs {
        let (n_ch, n_pr) = (self.model.n_ch(), self.model.n_pr());
        let o_qpr = n_ch;
        let o_vsh = o_qpr + n_pr;
        let o_xch = o_vsh + 2 * n_pr;
        let o_xa = o_xch + n_ch;
        let o_xb = o_xa + n_pr;
        let q_ch = self.chord_flows(y, sp);
        let mut u_ch = DVector::zeros(n_ch);
        for i in 0..n_ch {
            let xi = ChordMeasurement { q: q_ch[i], q_star: sp.q_ch_star[i] };
            u_ch[i] = pi_flow_channel(xi, y[o_xch + i], self.pi.m_ch[i], self.pi.n_ch[i]).0;
        }
        // physical tank-outlet flows, as a flow meter would report them
        let outlet = &self.model.b * &q_ch;
        let mut u_pr_raw = DVector::zeros(n_pr);
        for i in 0..n_pr {
            let xi = ProducerMeasurement {
                q_pr: y[o_qpr + i],
                v_sh: y[o_vsh + i],
                outlet_flow: outlet[i],
                j_pr: self.model.j_pr[i],
                v_sh_star: sp.v_sh_star[i],
            };
            u_pr_raw[i] = adaptive_volume_channel(xi, y[o_xa + i], y[o_xb + i], self.vol.channel(i)).u;
        }
        let (u_pr, sat_active) = saturate_u_pr(&u_pr_raw, &self.saturation);
        AppliedInputs { u_ch, u_pr, u_pr_raw, sat_active }
    }

    fn chord_flows(&self, y: &DVector<f64>, sp: &Setpoints) -> DVector<f64> {
        match self.mode {
            ChordMode::Dynamic => y.rows(0, self.model.n_ch()).into_owned(),
            ChordMode::Pinned => sp.q_ch_star.clone(),
        }
    }

    /// Closed-loop vector field on the flat state.
    pub fn rhs(&self, y: &DVector<f64>, sp: &Setpoints) -> Result<(DVector<f64>, AppliedInputs), ModelError> {
        let m = self.model;
        let (n_ch, n_pr) = (m.n_ch(), m.n_pr());
        let o_qpr = n_ch;
        let o_vsh = o_qpr + n_pr;
        let o_xch = o_vsh + 2 * n_pr;
        let o_xa = o_xch + n_ch;
        let inp = self.inputs(y, sp);
        let q_ch = self.chord_flows(y, sp);
        let q_pr = y.rows(o_qpr, n_pr).into_owned();
        let v_sh = y.rows(o_vsh, n_pr).into_owned();
        m.check_volumes(&v_sh)?;

        let mut dy = DVector::zeros(y.len());
        if self.mode == ChordMode::Dynamic {
            let q_ch_dot = m.solve_j_ch(&(m.f_ch(&q_ch) + &inp.u_ch));
            dy.rows_mut(0, n_ch).copy_from(&q_ch_dot);
            for i in 0..n_ch {
                dy[o_xch + i] = -self.pi.m_ch[i] * (q_ch[i] - sp.q_ch_star[i]);
            }
        }
        let q_pr_dot = (m.f_pr(&q_pr) + &inp.u_pr).component_div(&m.j_pr);
        dy.rows_mut(o_qpr, n_pr).copy_from(&q_pr_dot);
        let v_dot = &q_pr - &m.b * &q_ch;
        dy.rows_mut(o_vsh, n_pr).copy_from(&v_dot);
        dy.rows_mut(o_vsh + n_pr, n_pr).copy_from(&(-&v_dot));
        let outlet = &m.b * &q_ch;
        for i in 0..n_pr {
            let xi = ProducerMeasurement {
                q_pr: q_pr[i],
                v_sh: v_sh[i],
                outlet_flow: outlet[i],
                j_pr: m.j_pr[i],
                v_sh_star: sp.v_sh_star[i],
            };
            let o = adaptive_volume_channel(xi, y[o_xa + i], y[o_xa + n_pr + i], self.vol.channel(i));
            dy[o_xa + i] = o.x_a_dot;
            dy[o_xa + n_pr + i] = o.x_b_dot;
        }
        Ok((dy, inp))
    }

    /// One classical RK4 step; setpoints are held over the step.
    pub fn step(&self, y: &DVector<f64>, sp: &Setpoints, dt: f64) -> Result<(DVector<f64>, AppliedInputs), ModelError> {
        let (k1, inp) = self.rhs(y, sp)?;
        let (k2, _) = self.rhs(&(y + &k1 * (0.5 * dt)), sp)?;
        let (k3, _) = self.rhs(&(y + &k2 * (0.5 * dt)), sp)?;
        let (k4, _) = self.rhs(&(y + &k3 * dt), sp)?;
        let mut out = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if self.mode == ChordMode::Pinned {
            out.rows_mut(0, self.model.n_ch()).copy_from(&sp.q_ch_star);
        }
        Ok((out, inp))
    }

    /// Recorded sample at flat state `y`.
    pub fn sample(&self, t: f64, y: &DVector<f64>, sp: &Setpoints) -> Sample {
        let m = self.model;
        let b = StateBundle::from_flat(y, m.n_ch(), m.n_pr(), t);
        let inp = self.inputs(y, sp);
        let s_ch = analysis::storage_s_ch(m, &self.pi, &b.plant.q_ch, &b.pi.x_ch, &sp.q_ch_star);
        let z = crate::control::z_transform(
            &producer_measurements(m, &b, sp),
            &b.vol.x_a,
            &self.vol,
        );
        let h = analysis::hamiltonian_h_tilde(m, &self.vol, &z, &b.plant.v_sh, &b.vol.x_a, &b.vol.x_b, &sp.q_ch_star, &sp.v_sh_star);
        Sample {
            t,
            q_ch: b.plant.q_ch,
            q_pr: b.plant.q_pr,
            v_sh: b.plant.v_sh,
            v_sc: b.plant.v_sc,
            x_ch: b.pi.x_ch,
            x_a: b.vol.x_a,
            x_b: b.vol.x_b,
            u_ch: inp.u_ch,
            u_pr: inp.u_pr,
            s_ch,
            h_tilde: h,
            sat_active: inp.sat_active,
            q_ch_star: sp.q_ch_star.clone(),
            v_sh_star: sp.v_sh_star.clone(),
        }
    }
}

/// Local producer measurements for a state bundle.
pub fn producer_measurements(m: &ReducedModel, b: &StateBundle, sp: &Setpoints) -> Vec<ProducerMeasurement> {
    let outlet = &m.b * &b.plant.q_ch;
    (0..m.n_pr())
        .map(|i| ProducerMeasurement {
            q_pr: b.plant.q_pr[i],
            v_sh: b.plant.v_sh[i],
            outlet_flow: outlet[i],
            j_pr: m.j_pr[i],
            v_sh_star: sp.v_sh_star[i],
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub q_ch: DVector<f64>,
    pub q_pr: DVector<f64>,
    pub v_sh: DVector<f64>,
    pub v_sc: DVector<f64>,
    pub x_ch: DVector<f64>,
    pub x_a: DVector<f64>,
    pub x_b: DVector<f64>,
    pub u_ch: DVector<f64>,
    pub u_pr: DVector<f64>,
    pub s_ch: f64,
    pub h_tilde: f64,
    pub sat_active: bool,
    /// Setpoints the state evolved under up to this sample.
    pub q_ch_star: DVector<f64>,
    pub v_sh_star: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Diagnostics {
    /// Fraction of steps with at least one clipped producer input.
    pub saturation_fraction: f64,
    pub windup_warning: bool,
    /// Producers whose final equilibrium flow is zero; adaptation stalls there.
    pub stalled_producers: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n_ch: usize,
    pub n_pr: usize,
    pub dt: f64,
    /// Steps between recorded samples.
    pub decimation: usize,
    pub samples: Vec<Sample>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Error)]
#[error("simulation aborted: {error}")]
pub struct SimAbort {
    pub partial: Trajectory,
    pub error: SimError,
}

/// Closed loop plus initial condition, setpoints and schedule.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    pub closed_loop: ClosedLoop<'a>,
    pub initial: StateBundle,
    pub setpoints: Setpoints,
    pub schedule: Schedule,
    pub integrator: IntegratorConfig,
}

pub const WINDUP_FRACTION: f64 = 0.10;

impl Simulation<'_> {
    pub fn run(&self) -> Result<Trajectory, Box<SimAbort>> {
        let cl = &self.closed_loop;
        let cfg = self.integrator;
        let (n_ch, n_pr) = (cl.model.n_ch(), cl.model.n_pr());
        let mut traj = Trajectory {
            n_ch,
            n_pr,
            dt: cfg.dt,
            decimation: cfg.stride(),
            samples: Vec::new(),
            diagnostics: Diagnostics::default(),
        };
        let abort = |traj: Trajectory, error: SimError| Err(Box::new(SimAbort { partial: traj, error }));
        if !(cfg.dt > 0.0) || !(cfg.t_end >= 0.0) || !(cfg.record_every > 0.0) {
            return abort(traj, SimError::Config("dt and record_every must be positive, t_end >= 0".into()));
        }
        if let Err(e) = self.schedule.check_dims(n_ch, n_pr) {
            return abort(traj, e.into());
        }
        let mut warnings = Vec::new();
        let ratio = cfg.record_every / cfg.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            warnings.push(format!("record interval {} s is not a multiple of dt = {} s", cfg.record_every, cfg.dt));
        }
        let n_steps = cfg.n_steps();
        let mut event_steps: Vec<usize> = Vec::new();
        for e in self.schedule.events() {
            let r = e.t / cfg.dt;
            if (r - r.round()).abs() > 1e-9 * r.max(1.0) {
                warnings.push(format!("event at t = {} s snapped to {} s", e.t, r.round() * cfg.dt));
            }
            event_steps.push(r.round() as usize);
        }
        for w in &warnings {
            warn!("{w}");
        }

        let mut sp = self.setpoints.clone();
        let mut y = self.initial.to_flat();
        if cl.mode == ChordMode::Pinned {
            y.rows_mut(0, n_ch).copy_from(&sp.q_ch_star);
        }
        let stride = cfg.stride();
        let mut sat_steps = 0usize;
        let mut next_event = 0usize;
        for k in 0..=n_steps {
            let t = k as f64 * cfg.dt;
            if k % stride == 0 || k == n_steps {
                traj.samples.push(cl.sample(t, &y, &sp));
            }
            if k == n_steps {
                break;
            }
            while next_event < event_steps.len() && event_steps[next_event] <= k {
                apply(&self.schedule.events()[next_event], &mut sp);
                next_event += 1;
            }
            match cl.step(&y, &sp, cfg.dt) {
                Ok((next, inp)) => {
                    if next.iter().any(|v| !v.is_finite()) {
                        traj.diagnostics.warnings = warnings;
                        return abort(traj, SimError::NonFinite { t: t + cfg.dt });
                    }
                    sat_steps += inp.sat_active as usize;
                    y = next;
                }
                Err(source) => {
                    traj.diagnostics.warnings = warnings;
                    return abort(traj, SimError::Model { t, source });
                }
            }
        }

        let d = &mut traj.diagnostics;
        let mut late = Vec::new();
        d.saturation_fraction = if n_steps > 0 { sat_steps as f64 / n_steps as f64 } else { 0.0 };
        if d.saturation_fraction > WINDUP_FRACTION {
            d.windup_warning = true;
            late.push(format!(
                "producer inputs clipped during {:.1}% of the run; integrator windup likely",
                100.0 * d.saturation_fraction
            ));
        }
        let q_pr_bar = &cl.model.b * &sp.q_ch_star;
        d.stalled_producers = (0..n_pr).filter(|&i| q_pr_bar[i] == 0.0).collect();
        for &i in &d.stalled_producers {
            late.push(format!("producer {i} is not in operation at the final setpoint; its estimate is not driven"));
        }
        for w in &late {
            warn!("{w}");
        }
        warnings.extend(late);
        d.warnings = warnings;
        Ok(traj)
    }
}
