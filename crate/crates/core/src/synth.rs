//! Small hand-built networks and a seeded generator of synthetic meshed
//! networks with mirrored supply and return layers.
//!
//! Generated parameters are synthetic: pipe and valve friction coefficients
//! are log-uniform in [1e3, 1e5] Pa·s²/m⁶ and pipe inertias log-uniform in
//! [1e4, 1e6] Pa·s²/m³.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{ChordKind, EdgeId, EdgeKind, Layer, NetworkGraph, Node, NodeId, NodeKind, TankId};
use crate::hydraulics::FluidProps;
use crate::model::{ModelError, ReducedModel};
use crate::scenario::{
    ConsumerSpec, EdgeSpec, EventSpec, GainSpec, GainsSpec, InitialSpec, NetworkSpec, ProducerSpec, SaturationSpec,
    ScenarioError, ScenarioFile, SetpointSpec, TankSpec,
};
use crate::sim::{ChordMode, IntegratorConfig};

pub const THETA_RANGE: (f64, f64) = (1e3, 1e5);
pub const INERTIA_RANGE: (f64, f64) = (1e4, 1e6);
/// Consumer flow at full demand, m³/s.
pub const FULL_DEMAND_RANGE: (f64, f64) = (0.1, 0.225);

/// Incremental builder for [`NetworkSpec`].
#[derive(Debug)]
pub struct NetBuilder {
    spec: NetworkSpec,
    next_node: NodeId,
}

impl Default for NetBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl NetBuilder {
    pub fn new() -> Self {
        NetBuilder { spec: NetworkSpec::default(), next_node: 1 }
    }

    pub fn junction(&mut self, layer: Option<Layer>) -> NodeId {
        let id = self.next_node;
        self.next_node += 1;
        self.spec.nodes.push(Node::junction(id, layer));
        id
    }

    /// Adds the hot and cold nodes of a tank; returns `(hot, cold)`.
    pub fn tank_nodes(&mut self, tank: TankId) -> (NodeId, NodeId) {
        let hot = self.next_node;
        let cold = hot + 1;
        self.next_node += 2;
        self.spec.nodes.push(Node::tank_hot(hot, tank));
        self.spec.nodes.push(Node::tank_cold(cold, tank));
        (hot, cold)
    }

    pub fn edge(&mut self, id: EdgeId, kind: EdgeKind, tail: NodeId, head: NodeId, theta: f64, inertia: f64) -> EdgeId {
        let (theta, inertia) = match kind {
            EdgeKind::Pump => (None, None),
            EdgeKind::Valve => (Some(theta), None),
            EdgeKind::Pipe => (Some(theta), Some(inertia)),
        };
        self.spec.edges.push(EdgeSpec { id, kind, tail, head, theta, inertia, geometry: None, nominal_flow: None });
        id
    }

    pub fn consumer(&mut self, id: u32, hx: EdgeId, edges: Vec<EdgeId>) {
        self.spec.consumers.push(ConsumerSpec { id, hx, edges });
    }

    pub fn producer(&mut self, tank: TankId, hx: EdgeId, edges: Vec<EdgeId>) {
        self.spec.producers.push(ProducerSpec { tank, hx, edges });
    }

    pub fn tank(&mut self, id: TankId, capacity: f64, v_sh0: f64, outlet: EdgeId) {
        self.spec.tanks.push(TankSpec { id, capacity, v_sh0, v_sc0: capacity - v_sh0, outlet });
    }

    pub fn finish(self) -> NetworkSpec {
        self.spec
    }
}

pub fn to_graph(spec: &NetworkSpec) -> NetworkGraph {
    spec.to_graph(&FluidProps::default()).expect("generated network is well formed")
}

/// Two tanks, two producers and one consumer around one supply and one
/// return junction.
///
/// Flow-carrying edges 1..=7: consumer heat exchanger (1), tank-1 outlet (2),
/// producer heat exchangers (3, 4), tank-1 cold pipe (5), tank-2 hot pipe
/// (6) and tank-2 cold pipe (7). Valves and pumps use ids from 8 on.
pub fn two_tank_spec() -> NetworkSpec {
    let mut b = NetBuilder::new();
    let s0 = b.junction(Some(Layer::Supply));
    let r0 = b.junction(Some(Layer::Return));
    let (t1h, t1c) = b.tank_nodes(1);
    let (t2h, t2c) = b.tank_nodes(2);
    let ca = b.junction(None);
    let cb = b.junction(None);
    let o1 = b.junction(Some(Layer::Supply));
    let p1a = b.junction(None);
    let p1b = b.junction(None);
    let p2a = b.junction(None);
    let p2b = b.junction(None);
    let (th, j) = (1e4, 1e5);
    b.edge(1, EdgeKind::Pipe, s0, ca, 2e4, j);
    b.edge(2, EdgeKind::Pipe, o1, s0, th, j);
    b.edge(3, EdgeKind::Pipe, p1b, t1h, 3e4, 2e5);
    b.edge(4, EdgeKind::Pipe, p2b, t2h, 4e4, 3e5);
    b.edge(5, EdgeKind::Pipe, r0, t1c, th, j);
    b.edge(6, EdgeKind::Pipe, s0, t2h, 1.5e4, 1.5e5);
    b.edge(7, EdgeKind::Pipe, t2c, r0, 1.5e4, 1.5e5);
    b.edge(8, EdgeKind::Valve, ca, cb, 5e3, 0.0);
    b.edge(9, EdgeKind::Pump, cb, r0, 0.0, 0.0);
    b.edge(10, EdgeKind::Pump, t1h, o1, 0.0, 0.0);
    b.edge(11, EdgeKind::Valve, t1c, p1a, 5e3, 0.0);
    b.edge(12, EdgeKind::Pump, p1a, p1b, 0.0, 0.0);
    b.edge(13, EdgeKind::Valve, t2c, p2a, 5e3, 0.0);
    b.edge(14, EdgeKind::Pump, p2a, p2b, 0.0, 0.0);
    b.consumer(1, 1, vec![1, 8, 9]);
    b.producer(1, 3, vec![3, 11, 12]);
    b.producer(2, 4, vec![4, 13, 14]);
    b.tank(1, 1000.0, 500.0, 2);
    b.tank(2, 1000.0, 500.0, 6);
    b.finish()
}

pub fn two_tank_network() -> NetworkGraph {
    to_graph(&two_tank_spec())
}

/// One consumer, one producer, one tank, no loops.
pub fn radial_spec() -> NetworkSpec {
    let mut b = NetBuilder::new();
    let s = b.junction(Some(Layer::Supply));
    let r = b.junction(Some(Layer::Return));
    let (th, tc) = b.tank_nodes(1);
    let c = b.junction(None);
    let p1 = b.junction(None);
    let p2 = b.junction(None);
    b.edge(1, EdgeKind::Pipe, s, c, 2e4, 1e5);
    b.edge(2, EdgeKind::Pipe, th, s, 1e4, 1e5);
    b.edge(3, EdgeKind::Pipe, p2, th, 3e4, 2e5);
    b.edge(4, EdgeKind::Pipe, r, tc, 1e4, 1e5);
    b.edge(5, EdgeKind::Pump, c, r, 0.0, 0.0);
    b.edge(6, EdgeKind::Valve, tc, p1, 5e3, 0.0);
    b.edge(7, EdgeKind::Pump, p1, p2, 0.0, 0.0);
    b.consumer(1, 1, vec![1, 5]);
    b.producer(1, 3, vec![3, 6, 7]);
    b.tank(1, 1000.0, 500.0, 2);
    b.finish()
}

pub fn radial_network() -> NetworkGraph {
    to_graph(&radial_spec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthParams {
    pub producers: usize,
    pub consumers: usize,
    /// Extra pipes per layer; the loop count over both layers is twice this.
    pub loops_per_layer: usize,
}

/// Uniform draw with 1–4 producers, 1–10 consumers and up to 6 loops.
pub fn random_params(rng: &mut impl Rng) -> SynthParams {
    SynthParams {
        producers: rng.random_range(1..=4),
        consumers: rng.random_range(1..=10),
        loops_per_layer: rng.random_range(0..=3),
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Seeded synthetic network.
///
/// The supply layer is a random tree over one junction per consumer and per
/// tank. Each extra loop pipe has a booster pump in series, and the return
/// layer mirrors the supply layer. Every tank but the last drives its outlet
/// with a pump; consumers and producers carry a valve and a pump.
pub fn generate(params: SynthParams, rng: &mut impl Rng) -> NetworkSpec {
    assert!(params.producers >= 1 && params.consumers >= 1);
    let mut b = NetBuilder::new();
    let mut next_edge: EdgeId = 1;
    let mut new_edge = |b: &mut NetBuilder, rng: &mut dyn rand::RngCore, kind, tail, head| {
        let id = next_edge;
        next_edge += 1;
        let theta = log_uniform(rng, THETA_RANGE);
        let j = log_uniform(rng, INERTIA_RANGE);
        b.edge(id, kind, tail, head, theta, j)
    };

    let n_t = params.producers;
    let n_c = params.consumers;
    let n_j = n_c + n_t;
    let sup: Vec<NodeId> = (0..n_j).map(|_| b.junction(Some(Layer::Supply))).collect();
    let ret: Vec<NodeId> = (0..n_j).map(|_| b.junction(Some(Layer::Return))).collect();

    // random tree, mirrored
    let mut order: Vec<usize> = (0..n_j).collect();
    for i in (1..n_j).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    for k in 1..n_j {
        let a = order[rng.random_range(0..k)];
        let c = order[k];
        new_edge(&mut b, rng, EdgeKind::Pipe, sup[a], sup[c]);
        new_edge(&mut b, rng, EdgeKind::Pipe, ret[c], ret[a]);
    }
    // loop pipes with boosters, mirrored
    if n_j >= 2 {
        for _ in 0..params.loops_per_layer {
            let a = rng.random_range(0..n_j);
            let mut c = rng.random_range(0..n_j - 1);
            if c >= a {
                c += 1;
            }
            let xs = b.junction(Some(Layer::Supply));
            new_edge(&mut b, rng, EdgeKind::Pump, sup[a], xs);
            new_edge(&mut b, rng, EdgeKind::Pipe, xs, sup[c]);
            let xr = b.junction(Some(Layer::Return));
            new_edge(&mut b, rng, EdgeKind::Pump, ret[c], xr);
            new_edge(&mut b, rng, EdgeKind::Pipe, xr, ret[a]);
        }
    }
    // consumers: supply -> hx -> valve -> pump -> return
    for c in 0..n_c {
        let ja = b.junction(None);
        let jb = b.junction(None);
        let hx = new_edge(&mut b, rng, EdgeKind::Pipe, sup[c], ja);
        let v = new_edge(&mut b, rng, EdgeKind::Valve, ja, jb);
        let p = new_edge(&mut b, rng, EdgeKind::Pump, jb, ret[c]);
        b.consumer(c as u32 + 1, hx, vec![hx, v, p]);
    }
    // tanks and producers
    for t in 0..n_t {
        let tid = t as TankId + 1;
        let (hot, cold) = b.tank_nodes(tid);
        let js = sup[n_c + t];
        let jr = ret[n_c + t];
        let outlet = if t + 1 < n_t {
            let o = b.junction(Some(Layer::Supply));
            new_edge(&mut b, rng, EdgeKind::Pump, hot, o);
            new_edge(&mut b, rng, EdgeKind::Pipe, o, js)
        } else {
            new_edge(&mut b, rng, EdgeKind::Pipe, hot, js)
        };
        new_edge(&mut b, rng, EdgeKind::Pipe, jr, cold);
        let pa = b.junction(None);
        let pb = b.junction(None);
        let v = new_edge(&mut b, rng, EdgeKind::Valve, cold, pa);
        let p = new_edge(&mut b, rng, EdgeKind::Pump, pa, pb);
        let hx = new_edge(&mut b, rng, EdgeKind::Pipe, pb, hot);
        b.producer(tid, hx, vec![hx, v, p]);
        b.tank(tid, 1000.0, 500.0, outlet);
    }
    b.finish()
}

pub fn generate_seeded(params: SynthParams, seed: u64) -> NetworkSpec {
    generate(params, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Layer node count of a generated network, for sanity checks.
pub fn layer_nodes(g: &NetworkGraph, layer: Layer) -> usize {
    g.nodes().iter().filter(|n| n.effective_layer() == Some(layer) && n.kind == NodeKind::Junction).count()
}

/// Gains used by the reference scenario.
pub fn reference_gains() -> GainsSpec {
    GainsSpec {
        m_ch: GainSpec::Scalar(1e5),
        n_ch: GainSpec::Scalar(1e5),
        n_pr: GainSpec::Scalar(7.11e4),
        n_sh: GainSpec::Scalar(7.5e-3),
        m_a: GainSpec::Scalar(14.06e-5),
        m_b: GainSpec::Scalar(7.11e7),
    }
}

/// Chord setpoints at full demand: consumer demands drawn uniformly from
/// [0.1, 0.225] m³/s, small loop circulations, and tank outlets sharing the
/// total demand evenly.
pub fn full_demand(model: &ReducedModel, rng: &mut impl Rng) -> DVector<f64> {
    let kinds = &model.classification.chord_kinds;
    let mut q = DVector::zeros(kinds.len());
    let mut total = 0.0;
    for (i, k) in kinds.iter().enumerate() {
        if let ChordKind::Consumer(_) = k {
            q[i] = rng.random_range(FULL_DEMAND_RANGE.0..FULL_DEMAND_RANGE.1);
            total += q[i];
        }
    }
    let share = total / model.n_pr() as f64;
    for (i, k) in kinds.iter().enumerate() {
        match k {
            ChordKind::Loop => q[i] = 0.005,
            ChordKind::TankOutlet(_) => q[i] = share,
            ChordKind::Consumer(_) => {}
        }
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceOptions {
    pub seed: u64,
    pub clipped: bool,
    pub dt: f64,
    pub t_end_h: f64,
    /// Stair width of the setpoint ramps, s.
    pub ramp_step_s: f64,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions { seed: 11, clipped: true, dt: 0.1, t_end_h: 24.0, ramp_step_s: 1.0 }
    }
}

/// The 24 h reference study on a synthetic network with 9 consumers,
/// 3 producers and 3 loops per layer (17 chords).
///
/// Schedule: 25% demand and 250 m³ per tank at start; tanks charged to
/// 650 m³ from 6 h; demand raised to 95% from 12 h; tanks discharged to
/// 350 m³ from 18 h. Volume changes are spread over 3 h and the demand
/// change over 30 min, in 1 s stairs.
pub fn reference_scenario(opts: ReferenceOptions) -> Result<ScenarioFile, ScenarioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let params = SynthParams { producers: 3, consumers: 9, loops_per_layer: 3 };
    let mut network = generate(params, &mut rng);
    for t in &mut network.tanks {
        t.v_sh0 = 250.0;
        t.v_sc0 = t.capacity - 250.0;
    }
    let model = ReducedModel::build(network.to_graph(&FluidProps::default())?).map_err(ScenarioError::Model)?;
    let q_full = full_demand(&model, &mut rng);
    let q_pr_full = &model.b * &q_full;
    let theta = model.theta();
    let u_nominal: Vec<f64> = (0..model.n_pr()).map(|i| theta[i] * q_pr_full[i] * q_pr_full[i]).collect();
    let x_b0: Vec<f64> = theta.iter().map(|&t| t * rng.random_range(0.5..1.5)).collect();
    let n_st = model.n_st();
    let vols = |v: f64| vec![v; n_st];
    let q_at = |f: f64| (&q_full * f).as_slice().to_vec();
    let ramp = |t_h: f64, q: Option<Vec<f64>>, v: Option<Vec<f64>>, ramp_h: f64| EventSpec {
        t_h: Some(t_h),
        q_ch_star: q,
        v_sh_star: v,
        ramp_h: Some(ramp_h),
        ramp_step_s: Some(opts.ramp_step_s),
        ..EventSpec::default()
    };
    let schedule: Vec<EventSpec> = [
        ramp(6.0, None, Some(vols(650.0)), 3.0),
        ramp(12.0, Some(q_at(0.95)), None, 0.5),
        ramp(18.0, None, Some(vols(350.0)), 3.0),
    ]
    .into_iter()
    .filter(|e| e.t_h.unwrap() < opts.t_end_h)
    .collect();
    let clip = if opts.clipped { "with" } else { "without" };
    Ok(ScenarioFile {
        name: format!("reference-{}", if opts.clipped { "clipped" } else { "unclipped" }),
        description: format!(
            "24 h charge/discharge study on a synthetic network (seed {}), {clip} producer input clipping",
            opts.seed
        ),
        fluid: FluidProps::default(),
        network,
        gains: reference_gains(),
        saturation: Some(SaturationSpec { enabled: opts.clipped, lower: 0.03, upper: 1.15, u_nominal }),
        initial: InitialSpec { from_equilibrium: true, x_b: Some(x_b0), ..InitialSpec::default() },
        setpoints: SetpointSpec { q_ch_star: q_at(0.25), v_sh_star: vols(250.0) },
        schedule,
        integrator: IntegratorConfig { dt: opts.dt, t_end: opts.t_end_h * 3600.0, record_every: 60.0 },
        chord_mode: ChordMode::Dynamic,
        seed: Some(opts.seed),
    })
}

/// Scenario on the two-tank network: one hour at rest at q⋆ = (0.01, 0.02).
pub fn two_tank_scenario() -> ScenarioFile {
    let network = two_tank_spec();
    let g = to_graph(&network);
    let model = ReducedModel::build(g).expect("two-tank network is valid");
    let theta = model.theta();
    ScenarioFile {
        name: "two-tank".into(),
        description: "one consumer, two producers with storage tanks, at rest".into(),
        fluid: FluidProps::default(),
        network,
        gains: reference_gains(),
        saturation: None,
        initial: InitialSpec { from_equilibrium: true, x_b: Some(theta.iter().map(|t| 1.2 * t).collect()), ..Default::default() },
        setpoints: SetpointSpec { q_ch_star: vec![0.01, 0.02], v_sh_star: vec![500.0, 500.0] },
        schedule: Vec::new(),
        integrator: IntegratorConfig { dt: 0.1, t_end: 3600.0, record_every: 60.0 },
        chord_mode: ChordMode::Dynamic,
        seed: None,
    }
}

/// Builds the model of a generated network.
pub fn model_of(spec: &NetworkSpec) -> Result<ReducedModel, ModelError> {
    ReducedModel::build(to_graph(spec))
}
