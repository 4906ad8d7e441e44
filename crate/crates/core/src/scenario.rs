//! JSON scenario files and the trajectory CSV format.
//!
//! A scenario holds the network, fluid, gains, clipping, initial condition,
//! setpoints, schedule and integrator settings. Units are SI; schedule times
//! may be given in hours with `t_h`.
//!
//! ```json
//! {
//!   "name": "two-tank",
//!   "fluid": { "density": 1000.0, "viscosity": 0.001 },
//!   "network": {
//!     "nodes": [{ "id": 1, "kind": "junction", "layer": "supply" }, ...],
//!     "edges": [{ "id": 1, "kind": "pipe", "tail": 1, "head": 2, "theta": 1e4, "inertia": 1e5 },
//!               { "id": 2, "kind": "pipe", "tail": 2, "head": 3,
//!                 "geometry": { "length": 100, "diameter": 0.1, "roughness": 1e-4 },
//!                 "nominal_flow": 0.01 }, ...],
//!     "consumers": [{ "id": 1, "hx": 1, "edges": [1, 8, 9] }],
//!     "producers": [{ "tank": 1, "hx": 3, "edges": [3, 11, 12] }],
//!     "tanks": [{ "id": 1, "capacity": 1000, "v_sh0": 250, "v_sc0": 750, "outlet": 2 }]
//!   },
//!   "gains": { "m_ch": 1e5, "n_ch": 1e5, "n_pr": 7.11e4, "n_sh": 7.5e-3, "m_a": 1.406e-4, "m_b": 7.11e7 },
//!   "saturation": { "enabled": true, "lower": 0.03, "upper": 1.15, "u_nominal": [ ... ] },
//!   "initial": { "from_equilibrium": true, "x_b": [ ... ] },
//!   "setpoints": { "q_ch_star": [ ... ], "v_sh_star": [ ... ] },
//!   "schedule": [{ "t_h": 6, "v_sh_star": [ ... ], "ramp_h": 3, "ramp_step_s": 60 }],
//!   "integrator": { "dt": 0.1, "t_end": 86400, "record_every": 60 }
//! }
//! ```
//!
//! Gains are either one scalar for every channel or a full diagonal.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::compute_equilibrium;
use crate::control::{FlowPIGains, FlowPIState, Saturation, VolumeCtrlState, VolumeGains};
use crate::graph::{
    ConsumerPath, Edge, EdgeId, EdgeKind, NetworkGraph, Node, NodeId, ProducerPath, Tank, TankId, TopologyError,
    TopologyReport,
};
use crate::hydraulics::{pipe_parameters, FluidProps, PipeGeometry};
use crate::model::{ModelError, PlantState, ReducedModel};
use crate::sim::{
    ChordMode, ClosedLoop, Event, IntegratorConfig, Schedule, SimAbort, Simulation, StateBundle, Trajectory,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid value at `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("topology: {0}")]
    Topology(#[from] TopologyError),
    #[error("topology assumptions violated: {}", .0.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Assumptions(TopologyReport),
    #[error("model: {0}")]
    Model(#[from] ModelError),
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { path: path.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub id: EdgeId,
    pub kind: EdgeKind,
    pub tail: NodeId,
    pub head: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<PipeGeometry>,
    /// Flow at which Re is evaluated when `geometry` is given, m³/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal_flow: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsumerSpec {
    pub id: u32,
    pub hx: EdgeId,
    pub edges: Vec<EdgeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProducerSpec {
    pub tank: TankId,
    pub hx: EdgeId,
    pub edges: Vec<EdgeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TankSpec {
    pub id: TankId,
    pub capacity: f64,
    pub v_sh0: f64,
    pub v_sc0: f64,
    pub outlet: EdgeId,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub nodes: Vec<Node>,
    pub edges: Vec<EdgeSpec>,
    pub consumers: Vec<ConsumerSpec>,
    pub producers: Vec<ProducerSpec>,
    pub tanks: Vec<TankSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainSpec {
    Scalar(f64),
    Diagonal(Vec<f64>),
}

impl GainSpec {
    fn expand(&self, n: usize, path: &str) -> Result<DVector<f64>, ScenarioError> {
        let v = match self {
            GainSpec::Scalar(g) => vec![*g; n],
            GainSpec::Diagonal(d) => {
                if d.len() != n {
                    return Err(invalid(path, format!("expected {n} entries, got {}", d.len())));
                }
                d.clone()
            }
        };
        for (i, g) in v.iter().enumerate() {
            if !(*g > 0.0) || !g.is_finite() {
                let p = match self {
                    GainSpec::Scalar(_) => path.to_string(),
                    GainSpec::Diagonal(_) => format!("{path}[{i}]"),
                };
                return Err(invalid(p, format!("gain must be positive and finite, got {g}")));
            }
        }
        Ok(DVector::from_vec(v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSpec {
    pub m_ch: GainSpec,
    pub n_ch: GainSpec,
    pub n_pr: GainSpec,
    pub n_sh: GainSpec,
    pub m_a: GainSpec,
    pub m_b: GainSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaturationSpec {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_lower")]
    pub lower: f64,
    #[serde(default = "default_upper")]
    pub upper: f64,
    pub u_nominal: Vec<f64>,
}

fn yes() -> bool {
    true
}
fn default_lower() -> f64 {
    0.03
}
fn default_upper() -> f64 {
    1.15
}

/// Initial condition. With `from_equilibrium` every state starts at the
/// equilibrium of the initial setpoints except the tank volumes, which come
/// from the tanks; otherwise flows and controller states start at zero.
/// Any listed vector overrides the corresponding state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default)]
    pub from_equilibrium: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_ch: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_pr: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_ch: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_b: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetpointSpec {
    pub q_ch_star: Vec<f64>,
    pub v_sh_star: Vec<f64>,
}

/// One schedule entry. With `ramp_h` (or `ramp_s`) the change is spread
/// over a staircase of steps `ramp_step_s` seconds apart, starting at the
/// event time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_ch_star: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_sh_star: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_step_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub fluid: FluidProps,
    pub network: NetworkSpec,
    pub gains: GainsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation: Option<SaturationSpec>,
    #[serde(default)]
    pub initial: InitialSpec,
    pub setpoints: SetpointSpec,
    #[serde(default)]
    pub schedule: Vec<EventSpec>,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub chord_mode: ChordMode,
    /// Seed the network was generated from, if synthetic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A fully validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub model: ReducedModel,
    pub pi: FlowPIGains,
    pub vol: VolumeGains,
    pub saturation: Saturation,
    pub initial: StateBundle,
    pub setpoints: crate::sim::Setpoints,
    pub schedule: Schedule,
    pub integrator: IntegratorConfig,
    pub chord_mode: ChordMode,
    pub seed: Option<u64>,
}

impl Scenario {
    pub fn closed_loop(&self) -> ClosedLoop<'_> {
        ClosedLoop {
            model: &self.model,
            pi: self.pi.clone(),
            vol: self.vol.clone(),
            saturation: self.saturation.clone(),
            mode: self.chord_mode,
        }
    }

    pub fn simulation(&self) -> Simulation<'_> {
        Simulation {
            closed_loop: self.closed_loop(),
            initial: self.initial.clone(),
            setpoints: self.setpoints.clone(),
            schedule: self.schedule.clone(),
            integrator: self.integrator,
        }
    }

    pub fn run(&self) -> Result<Trajectory, Box<SimAbort>> {
        self.simulation().run()
    }

    /// Setpoints in force at the end of the schedule.
    pub fn final_setpoints(&self) -> crate::sim::Setpoints {
        self.schedule.setpoints_at(&self.setpoints, f64::INFINITY)
    }
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.into(), source })?;
    ScenarioFile::from_json(&text)?.build()
}

pub fn read_scenario_file(path: &Path) -> Result<ScenarioFile, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.into(), source })?;
    ScenarioFile::from_json(&text)
}

fn vector(v: &[f64], n: usize, path: &str) -> Result<DVector<f64>, ScenarioError> {
    if v.len() != n {
        return Err(invalid(path, format!("expected {n} entries, got {}", v.len())));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(invalid(format!("{path}[{i}]"), "value must be finite"));
    }
    Ok(DVector::from_column_slice(v))
}

impl NetworkSpec {
    /// Network graph with θ and J resolved from explicit values or geometry.
    pub fn to_graph(&self, fluid: &FluidProps) -> Result<NetworkGraph, ScenarioError> {
        if !(fluid.density > 0.0 && fluid.viscosity > 0.0) {
            return Err(invalid("fluid", "density and viscosity must be positive"));
        }
        let mut edges = Vec::new();
        for (k, e) in self.edges.iter().enumerate() {
            let path = format!("network.edges[{k}]");
            let (theta, inertia) = match (&e.geometry, e.theta, e.inertia) {
                (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                    return Err(invalid(path, "both geometry and explicit theta/inertia given"));
                }
                (Some(g), None, None) => {
                    if e.kind != EdgeKind::Pipe {
                        return Err(invalid(format!("{path}.geometry"), "only pipes accept geometry"));
                    }
                    let q = e.nominal_flow.ok_or_else(|| invalid(format!("{path}.nominal_flow"), "required with geometry"))?;
                    pipe_parameters(g, fluid, q).map_err(|err| invalid(format!("{path}.geometry"), err.to_string()))?
                }
                (None, th, j) => {
                    if e.nominal_flow.is_some() {
                        return Err(invalid(format!("{path}.nominal_flow"), "only meaningful with geometry"));
                    }
                    match e.kind {
                        EdgeKind::Pump => (th.unwrap_or(0.0), j.unwrap_or(0.0)),
                        EdgeKind::Valve => (
                            th.ok_or_else(|| invalid(format!("{path}.theta"), "required for valves"))?,
                            j.unwrap_or(0.0),
                        ),
                        EdgeKind::Pipe => (
                            th.ok_or_else(|| invalid(format!("{path}.theta"), "required without geometry"))?,
                            j.ok_or_else(|| invalid(format!("{path}.inertia"), "required without geometry"))?,
                        ),
                    }
                }
            };
            edges.push(Edge { id: e.id, kind: e.kind, tail: e.tail, head: e.head, inertia, theta, geometry: e.geometry });
        }
        let n = self;
        let tanks = n
            .tanks
            .iter()
            .map(|t| Tank { id: t.id, capacity: t.capacity, v_sh0: t.v_sh0, v_sc0: t.v_sc0, outlet: t.outlet })
            .collect();
        let consumers =
            n.consumers.iter().map(|c| ConsumerPath { id: c.id, hx: c.hx, edges: c.edges.clone() }).collect();
        let producers =
            n.producers.iter().map(|p| ProducerPath { tank: p.tank, hx: p.hx, edges: p.edges.clone() }).collect();
        Ok(NetworkGraph::new(n.nodes.clone(), edges, tanks, consumers, producers)?)
    }
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de)
            .map_err(|e| ScenarioError::Schema { path: e.path().to_string(), message: e.inner().to_string() })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes") + "\n"
    }

    pub fn graph(&self) -> Result<NetworkGraph, ScenarioError> {
        self.network.to_graph(&self.fluid)
    }

    pub fn build(&self) -> Result<Scenario, ScenarioError> {
        let graph = self.graph()?;
        let report = graph.validate_topology();
        if !report.passed() {
            return Err(ScenarioError::Assumptions(report));
        }
        let model = ReducedModel::build(graph)?;
        let (n_ch, n_pr) = (model.n_ch(), model.n_pr());

        let g = &self.gains;
        let pi = FlowPIGains { m_ch: g.m_ch.expand(n_ch, "gains.m_ch")?, n_ch: g.n_ch.expand(n_ch, "gains.n_ch")? };
        let vol = VolumeGains {
            n_pr: g.n_pr.expand(n_pr, "gains.n_pr")?,
            n_sh: g.n_sh.expand(n_pr, "gains.n_sh")?,
            m_a: g.m_a.expand(n_pr, "gains.m_a")?,
            m_b: g.m_b.expand(n_pr, "gains.m_b")?,
        };

        let saturation = match &self.saturation {
            None => Saturation::disabled(),
            Some(s) => {
                if !(s.lower > 0.0 && s.upper > s.lower) {
                    return Err(invalid("saturation", "need 0 < lower < upper"));
                }
                let u = vector(&s.u_nominal, n_pr, "saturation.u_nominal")?;
                Saturation { enabled: s.enabled, lower: s.lower, upper: s.upper, u_nominal: u.as_slice().to_vec() }
            }
        };

        let setpoints = crate::sim::Setpoints {
            q_ch_star: vector(&self.setpoints.q_ch_star, n_ch, "setpoints.q_ch_star")?,
            v_sh_star: vector(&self.setpoints.v_sh_star, n_pr, "setpoints.v_sh_star")?,
        };
        for (i, (&v, &c)) in setpoints.v_sh_star.iter().zip(model.capacity.iter()).enumerate() {
            if !(0.0..=c).contains(&v) {
                return Err(invalid(format!("setpoints.v_sh_star[{i}]"), format!("must lie in [0, {c}]")));
            }
        }
        let schedule = self.expand_schedule(&setpoints, n_ch, n_pr, &model)?;

        let ic = &self.initial;
        let plant0 = model.initial_state();
        let mut init = if ic.from_equilibrium {
            let eq = compute_equilibrium(&model, &setpoints.q_ch_star, &setpoints.v_sh_star);
            let mut b = eq.bundle(&model);
            b.plant.v_sh = plant0.v_sh.clone();
            b.plant.v_sc = plant0.v_sc.clone();
            b
        } else {
            StateBundle {
                plant: PlantState { t: 0.0, ..plant0 },
                pi: FlowPIState { x_ch: DVector::zeros(n_ch) },
                vol: VolumeCtrlState { x_a: DVector::zeros(n_pr), x_b: DVector::zeros(n_pr) },
            }
        };
        let over = |v: &Option<Vec<f64>>, n: usize, p: &str, dst: &mut DVector<f64>| -> Result<(), ScenarioError> {
            if let Some(v) = v {
                *dst = vector(v, n, p)?;
            }
            Ok(())
        };
        over(&ic.q_ch, n_ch, "initial.q_ch", &mut init.plant.q_ch)?;
        over(&ic.q_pr, n_pr, "initial.q_pr", &mut init.plant.q_pr)?;
        over(&ic.x_ch, n_ch, "initial.x_ch", &mut init.pi.x_ch)?;
        over(&ic.x_a, n_pr, "initial.x_a", &mut init.vol.x_a)?;
        over(&ic.x_b, n_pr, "initial.x_b", &mut init.vol.x_b)?;

        let it = self.integrator;
        if !(it.dt > 0.0) || !(it.t_end >= 0.0) || !(it.record_every > 0.0) {
            return Err(invalid("integrator", "dt and record_every must be positive, t_end >= 0"));
        }
        Ok(Scenario {
            name: self.name.clone(),
            model,
            pi,
            vol,
            saturation,
            initial: init,
            setpoints,
            schedule,
            integrator: it,
            chord_mode: self.chord_mode,
            seed: self.seed,
        })
    }

    fn expand_schedule(
        &self,
        initial: &crate::sim::Setpoints,
        n_ch: usize,
        n_pr: usize,
        model: &ReducedModel,
    ) -> Result<Schedule, ScenarioError> {
        let mut events = Vec::new();
        let mut current = initial.clone();
        for (k, e) in self.schedule.iter().enumerate() {
            let path = format!("schedule[{k}]");
            let t = match (e.t_s, e.t_h) {
                (Some(s), None) => s,
                (None, Some(h)) => h * 3600.0,
                _ => return Err(invalid(&path, "exactly one of t_s and t_h is required")),
            };
            let q = e.q_ch_star.as_ref().map(|v| vector(v, n_ch, &format!("{path}.q_ch_star"))).transpose()?;
            let v = e.v_sh_star.as_ref().map(|v| vector(v, n_pr, &format!("{path}.v_sh_star"))).transpose()?;
            if let Some(v) = &v {
                for (i, (&x, &c)) in v.iter().zip(model.capacity.iter()).enumerate() {
                    if !(0.0..=c).contains(&x) {
                        return Err(invalid(format!("{path}.v_sh_star[{i}]"), format!("must lie in [0, {c}]")));
                    }
                }
            }
            if q.is_none() && v.is_none() {
                return Err(invalid(&path, "event changes nothing"));
            }
            let ramp = match (e.ramp_h, e.ramp_s) {
                (Some(_), Some(_)) => return Err(invalid(&path, "give ramp_h or ramp_s, not both")),
                (Some(h), None) => Some(h * 3600.0),
                (None, s) => s,
            };
            match ramp {
                None => {
                    if e.ramp_step_s.is_some() {
                        return Err(invalid(format!("{path}.ramp_step_s"), "only meaningful with a ramp"));
                    }
                    events.push(Event { t, q_ch_star: q.clone(), v_sh_star: v.clone() });
                }
                Some(duration) => {
                    let step = e.ramp_step_s.unwrap_or(60.0);
                    if !(step > 0.0) || !(duration >= step) {
                        return Err(invalid(format!("{path}.ramp_step_s"), "need 0 < ramp_step_s <= ramp duration"));
                    }
                    let n = (duration / step).round() as usize;
                    for s in 1..=n {
                        let frac = s as f64 / n as f64;
                        let lerp = |a: &DVector<f64>, b: &DVector<f64>| a + (b - a) * frac;
                        events.push(Event {
                            t: t + (s - 1) as f64 * step,
                            q_ch_star: q.as_ref().map(|q| lerp(&current.q_ch_star, q)),
                            v_sh_star: v.as_ref().map(|v| lerp(&current.v_sh_star, v)),
                        });
                    }
                }
            }
            if let Some(q) = q {
                current.q_ch_star = q;
            }
            if let Some(v) = v {
                current.v_sh_star = v;
            }
        }
        Schedule::new(events).map_err(|e| invalid("schedule", e.to_string()))
    }
}

/// CSV header for a trajectory with `n_ch` chords and `n_pr` producers.
pub fn csv_header(n_ch: usize, n_pr: usize) -> Vec<String> {
    let mut h = vec!["t_s".to_string()];
    let mut push = |prefix: &str, n: usize| h.extend((1..=n).map(|i| format!("{prefix}_{i}")));
    push("q_ch", n_ch);
    push("q_pr", n_pr);
    push("V_sh", n_pr);
    push("V_sc", n_pr);
    push("x_b", n_pr);
    push("u_ch", n_ch);
    push("u_pr", n_pr);
    h.extend(["S_ch", "H_tilde", "sat_active"].map(String::from));
    h
}

/// Trajectory as CSV text: 17 significant digits, LF line endings.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = csv_header(traj.n_ch, traj.n_pr).join(",");
    out.push('\n');
    for s in &traj.samples {
        let mut first = true;
        let mut put = |x: f64| {
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{x:.16e}").expect("write to string");
        };
        put(s.t);
        for v in [&s.q_ch, &s.q_pr, &s.v_sh, &s.v_sc, &s.x_b, &s.u_ch, &s.u_pr] {
            v.iter().for_each(|&x| put(x));
        }
        put(s.s_ch);
        put(s.h_tilde);
        out.push_str(if s.sat_active { ",1\n" } else { ",0\n" });
    }
    out
}

pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<(), ScenarioError> {
    if traj.samples.is_empty() {
        return Err(invalid("trajectory", "no samples to write"));
    }
    fs::write(path, trajectory_csv(traj)).map_err(|source| ScenarioError::Io { path: path.into(), source })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn parse_trajectory_csv(text: &str) -> Result<CsvTable, ScenarioError> {
    let mut lines = text.lines();
    let header: Vec<String> =
        lines.next().ok_or_else(|| invalid("csv", "empty file"))?.split(',').map(String::from).collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let row: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
        let row = row.map_err(|e| invalid(format!("csv line {}", k + 2), e.to_string()))?;
        if row.len() != header.len() {
            return Err(invalid(format!("csv line {}", k + 2), "column count differs from header"));
        }
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

pub fn read_trajectory_csv(path: &Path) -> Result<CsvTable, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.into(), source })?;
    parse_trajectory_csv(&text)
}
