//! Directed network graph, incidence matrix, chord selection and the
//! fundamental loop matrix.
//!
//! Sign convention: `B0[k, i] = +1` when edge `i` points into node `k` and
//! `-1` when it leaves `k`.
//!
//! Chord selection runs a Kruskal-style union-find on the *merged* graph in
//! which the hot and cold layer nodes of every tank are identified. The total
//! volume of a tank is constant, so the merged tank node obeys the same mass
//! balance as a zero-volume junction, and every fundamental cycle of the
//! merged graph is a valid flow circulation of the full network.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hydraulics::PipeGeometry;
use crate::intmat::{self, IntMatrix};

pub type NodeId = u32;
pub type EdgeId = u32;
pub type TankId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Junction,
    TankHot,
    TankCold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Supply,
    Return,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tank: Option<TankId>,
    /// Layer of a junction. `None` marks the interior of a consumer or
    /// producer path. Tank nodes are placed by their kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<Layer>,
}

impl Node {
    pub fn junction(id: NodeId, layer: Option<Layer>) -> Self {
        Node { id, kind: NodeKind::Junction, tank: None, layer }
    }

    pub fn tank_hot(id: NodeId, tank: TankId) -> Self {
        Node { id, kind: NodeKind::TankHot, tank: Some(tank), layer: Some(Layer::Supply) }
    }

    pub fn tank_cold(id: NodeId, tank: TankId) -> Self {
        Node { id, kind: NodeKind::TankCold, tank: Some(tank), layer: Some(Layer::Return) }
    }

    pub fn effective_layer(&self) -> Option<Layer> {
        match self.kind {
            NodeKind::TankHot => Some(Layer::Supply),
            NodeKind::TankCold => Some(Layer::Return),
            NodeKind::Junction => self.layer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Pipe,
    Valve,
    Pump,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub kind: EdgeKind,
    pub tail: NodeId,
    pub head: NodeId,
    /// J_E in Pa·s²/m³; zero for valves and pumps.
    pub inertia: f64,
    /// Friction coefficient in Pa·s²/m⁶; zero for pumps.
    pub theta: f64,
    pub geometry: Option<PipeGeometry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tank {
    pub id: TankId,
    /// m³
    pub capacity: f64,
    pub v_sh0: f64,
    pub v_sc0: f64,
    /// Hot-layer outlet edge (the pipe connecting the tank to the supply layer).
    pub outlet: EdgeId,
}

/// Series edges of one consumer substation. `hx` is the heat-exchanger pipe.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsumerPath {
    pub id: u32,
    pub hx: EdgeId,
    pub edges: Vec<EdgeId>,
}

/// Series edges of one producer, running from its tank's cold node to its
/// hot node.
#[derive(Debug, Clone, PartialEq)]
pub struct ProducerPath {
    pub tank: TankId,
    pub hx: EdgeId,
    pub edges: Vec<EdgeId>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("duplicate edge id {0}")]
    DuplicateEdge(EdgeId),
    #[error("edge {edge} references unknown node {node}")]
    UnknownNode { edge: EdgeId, node: NodeId },
    #[error("unknown edge id {0}")]
    UnknownEdge(EdgeId),
    #[error("edge {0} is a self-loop")]
    SelfLoop(EdgeId),
    #[error("edge {edge}: {reason}")]
    BadEdge { edge: EdgeId, reason: String },
    #[error("tank {tank}: {reason}")]
    BadTank { tank: TankId, reason: String },
    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error("network has no producers")]
    NoProducers,
    #[error("malformed path: {0}")]
    MalformedPath(String),
    #[error("unsupported pump placement: {0}")]
    PumpPlacement(String),
    #[error("loop matrix is rank deficient: rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("chord and producer rows share tree edge {0}")]
    CrossCoupling(EdgeId),
    #[error("tank-outlet block: {0}")]
    OutletBlock(String),
}

#[derive(Debug, Clone)]
pub struct NetworkGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    tanks: Vec<Tank>,
    consumers: Vec<ConsumerPath>,
    producers: Vec<ProducerPath>,
    node_index: HashMap<NodeId, usize>,
    edge_index: HashMap<EdgeId, usize>,
}

impl NetworkGraph {
    /// Checks ids, endpoints and per-kind edge parameters. Topological
    /// assumptions are left to [`NetworkGraph::validate_topology`].
    pub fn new(
        mut nodes: Vec<Node>,
        mut edges: Vec<Edge>,
        mut tanks: Vec<Tank>,
        mut consumers: Vec<ConsumerPath>,
        mut producers: Vec<ProducerPath>,
    ) -> Result<Self, TopologyError> {
        nodes.sort_by_key(|n| n.id);
        edges.sort_by_key(|e| e.id);
        tanks.sort_by_key(|t| t.id);
        consumers.sort_by_key(|c| c.id);
        producers.sort_by_key(|p| p.tank);

        let mut node_index = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if node_index.insert(n.id, i).is_some() {
                return Err(TopologyError::DuplicateNode(n.id));
            }
        }
        let mut edge_index = HashMap::new();
        for (i, e) in edges.iter().enumerate() {
            if edge_index.insert(e.id, i).is_some() {
                return Err(TopologyError::DuplicateEdge(e.id));
            }
            for nid in [e.tail, e.head] {
                if !node_index.contains_key(&nid) {
                    return Err(TopologyError::UnknownNode { edge: e.id, node: nid });
                }
            }
            if e.tail == e.head {
                return Err(TopologyError::SelfLoop(e.id));
            }
            let bad = |reason: &str| TopologyError::BadEdge { edge: e.id, reason: reason.into() };
            if !e.inertia.is_finite() || !e.theta.is_finite() {
                return Err(bad("non-finite parameter"));
            }
            match e.kind {
                EdgeKind::Pipe => {
                    if e.inertia <= 0.0 {
                        return Err(bad("pipe inertia must be positive"));
                    }
                    if e.theta < 0.0 {
                        return Err(bad("pipe theta must be non-negative"));
                    }
                }
                EdgeKind::Valve => {
                    if e.inertia != 0.0 {
                        return Err(bad("valve inertia must be zero"));
                    }
                    if e.theta < 0.0 {
                        return Err(bad("valve theta must be non-negative"));
                    }
                }
                EdgeKind::Pump => {
                    if e.inertia != 0.0 || e.theta != 0.0 {
                        return Err(bad("pump inertia and theta must be zero"));
                    }
                }
            }
        }
        let check_edge = |id: EdgeId| {
            if edge_index.contains_key(&id) {
                Ok(())
            } else {
                Err(TopologyError::UnknownEdge(id))
            }
        };
        for t in &tanks {
            check_edge(t.outlet)?;
            let hot = nodes.iter().filter(|n| n.tank == Some(t.id) && n.kind == NodeKind::TankHot).count();
            let cold = nodes.iter().filter(|n| n.tank == Some(t.id) && n.kind == NodeKind::TankCold).count();
            if hot != 1 || cold != 1 {
                return Err(TopologyError::BadTank {
                    tank: t.id,
                    reason: format!("needs exactly one hot and one cold node, found {hot} and {cold}"),
                });
            }
            if !(t.capacity > 0.0) {
                return Err(TopologyError::BadTank { tank: t.id, reason: "capacity must be positive".into() });
            }
        }
        for n in &nodes {
            if n.kind != NodeKind::Junction {
                match n.tank {
                    Some(tid) if tanks.iter().any(|t| t.id == tid) => {}
                    _ => {
                        return Err(TopologyError::MalformedPath(format!(
                            "layer node {} references no known tank",
                            n.id
                        )))
                    }
                }
            }
        }
        for c in &consumers {
            c.edges.iter().try_for_each(|&e| check_edge(e))?;
            if !c.edges.contains(&c.hx) {
                return Err(TopologyError::MalformedPath(format!(
                    "consumer {}: hx edge {} not in its edge list",
                    c.id, c.hx
                )));
            }
        }
        for p in &producers {
            p.edges.iter().try_for_each(|&e| check_edge(e))?;
            if !p.edges.contains(&p.hx) {
                return Err(TopologyError::MalformedPath(format!(
                    "producer of tank {}: hx edge {} not in its edge list",
                    p.tank, p.hx
                )));
            }
        }
        Ok(NetworkGraph { nodes, edges, tanks, consumers, producers, node_index, edge_index })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }
    pub fn tanks(&self) -> &[Tank] {
        &self.tanks
    }
    pub fn consumers(&self) -> &[ConsumerPath] {
        &self.consumers
    }
    pub fn producers(&self) -> &[ProducerPath] {
        &self.producers
    }

    /// Position of an edge in the natural (ascending id) ordering.
    pub fn edge_pos(&self, id: EdgeId) -> Option<usize> {
        self.edge_index.get(&id).copied()
    }
    pub fn node_pos(&self, id: NodeId) -> Option<usize> {
        self.node_index.get(&id).copied()
    }
    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edge_pos(id).map(|i| &self.edges[i])
    }

    pub fn tank_nodes(&self, tank: TankId) -> Option<(NodeId, NodeId)> {
        let hot = self.nodes.iter().find(|n| n.tank == Some(tank) && n.kind == NodeKind::TankHot)?;
        let cold = self.nodes.iter().find(|n| n.tank == Some(tank) && n.kind == NodeKind::TankCold)?;
        Some((hot.id, cold.id))
    }

    /// Incidence matrix `B0` with rows in node-id order and columns in
    /// edge-id order.
    pub fn build_incidence(&self) -> Result<IntMatrix, TopologyError> {
        let components = self.components(false);
        if components > 1 {
            return Err(TopologyError::Disconnected { components });
        }
        Ok(self.incidence_unchecked())
    }

    fn incidence_unchecked(&self) -> IntMatrix {
        let mut b0 = IntMatrix::zeros(self.nodes.len(), self.edges.len());
        for (j, e) in self.edges.iter().enumerate() {
            b0[(self.node_index[&e.tail], j)] = -1;
            b0[(self.node_index[&e.head], j)] = 1;
        }
        b0
    }

    /// Representative index of each node, with tank layers merged when
    /// `merge_tanks` is set.
    fn node_class(&self, merge_tanks: bool) -> Vec<usize> {
        let mut class: Vec<usize> = (0..self.nodes.len()).collect();
        if merge_tanks {
            for t in &self.tanks {
                if let Some((h, c)) = self.tank_nodes(t.id) {
                    class[self.node_index[&c]] = self.node_index[&h];
                }
            }
        }
        class
    }

    fn components(&self, merge_tanks: bool) -> usize {
        let class = self.node_class(merge_tanks);
        let mut uf = UnionFind::new(self.nodes.len());
        for (i, &c) in class.iter().enumerate() {
            uf.union(i, c);
        }
        for e in &self.edges {
            uf.union(self.node_index[&e.tail], self.node_index[&e.head]);
        }
        (0..self.nodes.len()).filter(|&i| uf.find(i) == i).count()
    }

    /// Maximal series chains: edge sets joined through junctions of degree 2.
    fn series_chain_ids(&self) -> Vec<usize> {
        let mut degree = vec![0usize; self.nodes.len()];
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for (j, e) in self.edges.iter().enumerate() {
            for n in [e.tail, e.head] {
                let k = self.node_index[&n];
                degree[k] += 1;
                incident[k].push(j);
            }
        }
        let mut uf = UnionFind::new(self.edges.len());
        for (k, n) in self.nodes.iter().enumerate() {
            if n.kind == NodeKind::Junction && degree[k] == 2 {
                uf.union(incident[k][0], incident[k][1]);
            }
        }
        (0..self.edges.len()).map(|j| uf.find(j)).collect()
    }

    /// Splits edges into chords, producer edges and tree edges.
    ///
    /// Pumps and valves are forced into the spanning tree. Consumer and
    /// producer heat-exchanger pipes and the outlets of all tanks but the
    /// highest id are forced chords. Remaining edges are offered in ascending
    /// id order, pipes without a pump in series first; every edge that would
    /// close a cycle becomes a loop chord.
    pub fn classify_edges(&self) -> Result<EdgeClassification, TopologyError> {
        if self.producers.is_empty() {
            return Err(TopologyError::NoProducers);
        }
        if self.producers.len() != self.tanks.len() {
            return Err(TopologyError::MalformedPath(format!(
                "{} producers for {} tanks",
                self.producers.len(),
                self.tanks.len()
            )));
        }
        let class = self.node_class(true);
        let n = self.nodes.len();
        let mut uf = UnionFind::new(n);
        for (i, &c) in class.iter().enumerate() {
            uf.union(i, c);
        }
        let ends = |e: &Edge| (self.node_index[&e.tail], self.node_index[&e.head]);

        let last_tank = self.tanks.last().map(|t| t.id);
        let mut forced_chord = vec![false; self.edges.len()];
        let mut chord_kinds: Vec<(EdgeId, ChordKind)> = Vec::new();
        for c in &self.consumers {
            chord_kinds.push((c.hx, ChordKind::Consumer(c.id)));
        }
        let mut outlet_chords = Vec::new();
        for t in &self.tanks {
            if Some(t.id) != last_tank {
                outlet_chords.push((t.outlet, ChordKind::TankOutlet(t.id)));
            }
        }
        for (id, _) in chord_kinds.iter().chain(&outlet_chords) {
            forced_chord[self.edge_index[id]] = true;
        }
        for p in &self.producers {
            forced_chord[self.edge_index[&p.hx]] = true;
        }
        for (j, e) in self.edges.iter().enumerate() {
            if forced_chord[j] && e.kind != EdgeKind::Pipe {
                return Err(TopologyError::BadEdge {
                    edge: e.id,
                    reason: "heat exchangers and tank outlets must be pipes".into(),
                });
            }
        }

        let mut in_tree = vec![false; self.edges.len()];
        for (j, e) in self.edges.iter().enumerate() {
            if matches!(e.kind, EdgeKind::Pump | EdgeKind::Valve) {
                let (a, b) = ends(e);
                if !uf.union(a, b) {
                    return Err(TopologyError::PumpPlacement(format!(
                        "pumps and valves close a cycle at edge {}",
                        e.id
                    )));
                }
                in_tree[j] = true;
            }
        }
        // forced tree edges of producer paths other than the hx pipe
        for p in &self.producers {
            for &eid in &p.edges {
                let j = self.edge_index[&eid];
                if eid != p.hx && !in_tree[j] {
                    let (a, b) = ends(&self.edges[j]);
                    if !uf.union(a, b) {
                        return Err(TopologyError::MalformedPath(format!(
                            "producer of tank {} closes a cycle at edge {eid}",
                            p.tank
                        )));
                    }
                    in_tree[j] = true;
                }
            }
        }

        let chain = self.series_chain_ids();
        let mut chain_has_pump: HashMap<usize, bool> = HashMap::new();
        for (j, e) in self.edges.iter().enumerate() {
            *chain_has_pump.entry(chain[j]).or_default() |= e.kind == EdgeKind::Pump;
        }
        let mut rest: Vec<usize> = (0..self.edges.len()).filter(|&j| !in_tree[j] && !forced_chord[j]).collect();
        rest.sort_by_key(|&j| (chain_has_pump[&chain[j]], self.edges[j].id));
        let mut loop_chords = Vec::new();
        for j in rest {
            let (a, b) = ends(&self.edges[j]);
            if uf.union(a, b) {
                in_tree[j] = true;
            } else {
                loop_chords.push(self.edges[j].id);
            }
        }
        let roots = (0..n).filter(|&i| uf.find(i) == i).count();
        if roots != 1 {
            return Err(TopologyError::Disconnected { components: roots });
        }
        loop_chords.sort_unstable();
        let a = loop_chords.len();
        chord_kinds.extend(loop_chords.into_iter().map(|id| (id, ChordKind::Loop)));
        chord_kinds.extend(outlet_chords);

        let producer_edges: Vec<EdgeId> = self.producers.iter().map(|p| p.hx).collect();
        let tree_edges: Vec<EdgeId> =
            self.edges.iter().enumerate().filter(|(j, _)| in_tree[*j]).map(|(_, e)| e.id).collect();
        Ok(EdgeClassification {
            chord_edges: chord_kinds.iter().map(|c| c.0).collect(),
            chord_kinds: chord_kinds.into_iter().map(|c| c.1).collect(),
            producer_edges,
            tree_edges,
            n_consumers: self.consumers.len(),
            n_loops: a,
        })
    }

    /// Fundamental loop matrix in block column order
    /// `[chords | producers | G columns | H columns]`.
    pub fn fundamental_loop_matrix(&self, cls: &EdgeClassification) -> Result<LoopMatrix, TopologyError> {
        let n_ch = cls.chord_edges.len();
        let n_pr = cls.producer_edges.len();
        let rows = n_ch + n_pr;
        let n_e = self.edges.len();
        let class = self.node_class(true);

        // tree adjacency on merged node classes
        let mut adj: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for &eid in &cls.tree_edges {
            let j = self.edge_index[&eid];
            let e = &self.edges[j];
            let (a, b) = (class[self.node_index[&e.tail]], class[self.node_index[&e.head]]);
            adj.entry(a).or_default().push((j, b));
            adj.entry(b).or_default().push((j, a));
        }

        let mut natural = IntMatrix::zeros(rows, n_e);
        let row_edges = cls.chord_edges.iter().chain(&cls.producer_edges);
        for (r, &eid) in row_edges.enumerate() {
            let j = self.edge_index[&eid];
            let e = &self.edges[j];
            natural[(r, j)] = 1;
            // cycle continues from head back to tail through the tree
            let from = class[self.node_index[&e.head]];
            let to = class[self.node_index[&e.tail]];
            for (tj, forward) in tree_path(&adj, from, to, |k| {
                let te = &self.edges[k];
                class[self.node_index[&te.tail]]
            }) {
                natural[(r, tj)] = if forward { 1 } else { -1 };
            }
        }

        // block column order
        let mut col_kind = vec![0u8; n_e]; // 0 chord, 1 producer, 2 G, 3 H
        for &eid in &cls.producer_edges {
            col_kind[self.edge_index[&eid]] = 1;
        }
        for &eid in &cls.tree_edges {
            let j = self.edge_index[&eid];
            let in_ch = (0..n_ch).any(|r| natural[(r, j)] != 0);
            let in_pr = (n_ch..rows).any(|r| natural[(r, j)] != 0);
            if in_ch && in_pr {
                return Err(TopologyError::CrossCoupling(eid));
            }
            col_kind[j] = if in_pr { 3 } else { 2 };
        }
        let mut columns: Vec<EdgeId> = cls.chord_edges.clone();
        columns.extend(&cls.producer_edges);
        for kind in [2u8, 3u8] {
            columns.extend(self.edges.iter().enumerate().filter(|(j, _)| col_kind[*j] == kind).map(|(_, e)| e.id));
        }
        let mut f = IntMatrix::zeros(rows, n_e);
        let mut col_of_edge = vec![0usize; n_e];
        for (c, eid) in columns.iter().enumerate() {
            let j = self.edge_index[eid];
            col_of_edge[j] = c;
            f.set_column(c, &natural.column(j));
        }
        let n_g = col_kind.iter().filter(|&&k| k == 2).count();
        let n_h = col_kind.iter().filter(|&&k| k == 3).count();

        let g_cols = (0..n_g)
            .map(|k| {
                let c = rows + k;
                (0..n_ch).filter(|&r| f[(r, c)] != 0).map(|r| (r, f[(r, c)] as i8)).collect()
            })
            .collect();
        let h_cols = (0..n_h)
            .map(|k| {
                let c = rows + n_g + k;
                (n_ch..rows).filter(|&r| f[(r, c)] != 0).map(|r| (r - n_ch, f[(r, c)] as i8)).collect()
            })
            .collect();

        let rank = intmat::rank(&f);
        if rank != rows {
            return Err(TopologyError::RankDeficient { rank, expected: rows });
        }
        Ok(LoopMatrix { f, columns, col_of_edge, n_ch, n_pr, n_g, n_h, g_cols, h_cols })
    }

    /// Tank-outlet block `B` (n_ST × n_ch) with `V̇_sh = q_pr − B q_ch`.
    ///
    /// Derived from the hot-layer rows of `B0 Fᵀ` and cross-checked against
    /// the outlet column of `F`.
    pub fn extract_b(&self, lm: &LoopMatrix) -> Result<IntMatrix, TopologyError> {
        let b0 = self.incidence_unchecked();
        let ft = lm.natural(self).transpose();
        let flows = &b0 * &ft; // n_N × (n_ch + n_pr)
        let n_st = self.tanks.len();
        let mut b = IntMatrix::zeros(n_st, lm.n_ch);
        for (i, t) in self.tanks.iter().enumerate() {
            let (hot, cold) = self.tank_nodes(t.id).expect("checked at construction");
            let hr = self.node_index[&hot];
            let cr = self.node_index[&cold];
            for k in 0..lm.n_pr {
                let want = if k == i { 1 } else { 0 };
                if flows[(hr, lm.n_ch + k)] != want || flows[(cr, lm.n_ch + k)] != -want {
                    return Err(TopologyError::OutletBlock(format!(
                        "tank {} layers do not balance producer {}",
                        t.id, k
                    )));
                }
            }
            for c in 0..lm.n_ch {
                b[(i, c)] = -flows[(hr, c)];
                if flows[(cr, c)] != b[(i, c)] {
                    return Err(TopologyError::OutletBlock(format!(
                        "tank {} hot and cold layers disagree on chord {c}",
                        t.id
                    )));
                }
            }
            let oc = lm.col_of_edge[self.edge_index[&t.outlet]];
            let outlet: Vec<i32> = (0..lm.n_ch).map(|r| lm.f[(r, oc)]).collect();
            let row: Vec<i32> = b.row(i).iter().copied().collect();
            let neg: Vec<i32> = outlet.iter().map(|v| -v).collect();
            if row != outlet && row != neg {
                return Err(TopologyError::OutletBlock(format!(
                    "tank {} outlet edge {} does not carry the hot-layer outflow",
                    t.id, t.outlet
                )));
            }
        }
        if !intmat::entries_unit(&b) {
            return Err(TopologyError::OutletBlock("entry outside {-1, 0, 1}".into()));
        }
        Ok(b)
    }

    /// Checks the structural assumptions and reports every violation found.
    pub fn validate_topology(&self) -> TopologyReport {
        let mut v = Vec::new();
        let comps = self.components(false);
        if comps > 1 {
            v.push(Violation::Disconnected { components: comps });
        }
        if self.producers.is_empty() {
            v.push(Violation::NoProducers);
        }
        // (a) producer paths: a series chain from the tank's cold to hot node
        for p in &self.producers {
            match self.tank_nodes(p.tank) {
                None => v.push(Violation::ProducerWithoutTank { hx: p.hx }),
                Some((hot, cold)) => {
                    if !self.is_series_path(&p.edges, cold, hot) {
                        v.push(Violation::ProducerWithoutTank { hx: p.hx });
                    }
                }
            }
        }
        // (b) volumes
        for t in &self.tanks {
            let sum = t.v_sh0 + t.v_sc0;
            if (sum - t.capacity).abs() > 1e-9 * t.capacity.max(1.0) || t.v_sh0 < 0.0 || t.v_sc0 < 0.0 {
                v.push(Violation::VolumeMismatch { tank: t.id, sum, capacity: t.capacity });
            }
        }
        // (c) every tank has one producer and an outlet touching its hot node
        for t in &self.tanks {
            let np = self.producers.iter().filter(|p| p.tank == t.id).count();
            let hot = self.tank_nodes(t.id).map(|x| x.0);
            let outlet_ok = self
                .edge(t.outlet)
                .is_some_and(|e| Some(e.tail) == hot || Some(e.head) == hot || self.chain_touches(t.outlet, hot));
            if np != 1 || !outlet_ok {
                v.push(Violation::StandaloneTank { tank: t.id });
            }
        }
        for c in &self.consumers {
            if !self.consumer_spans_layers(c) {
                v.push(Violation::MalformedConsumer { consumer: c.id });
            }
        }
        let sup = self.layer_signature(Layer::Supply);
        let ret = self.layer_signature(Layer::Return);
        if sup != ret {
            v.push(Violation::Asymmetric { supply: sup, ret });
        }
        TopologyReport { violations: v }
    }

    fn is_series_path(&self, edges: &[EdgeId], from: NodeId, to: NodeId) -> bool {
        let mut remaining: Vec<&Edge> = edges.iter().filter_map(|&e| self.edge(e)).collect();
        if remaining.len() != edges.len() {
            return false;
        }
        let mut at = from;
        while !remaining.is_empty() {
            let Some(k) = remaining.iter().position(|e| e.tail == at || e.head == at) else {
                return false;
            };
            let e = remaining.swap_remove(k);
            at = if e.tail == at { e.head } else { e.tail };
            if at != to && !remaining.is_empty() {
                let n = &self.nodes[self.node_index[&at]];
                if n.kind != NodeKind::Junction {
                    return false;
                }
            }
        }
        at == to
    }

    fn chain_touches(&self, edge: EdgeId, node: Option<NodeId>) -> bool {
        let Some(node) = node else { return false };
        let chain = self.series_chain_ids();
        let Some(j) = self.edge_pos(edge) else { return false };
        self.edges
            .iter()
            .enumerate()
            .any(|(k, e)| chain[k] == chain[j] && (e.tail == node || e.head == node))
    }

    fn consumer_spans_layers(&self, c: &ConsumerPath) -> bool {
        let mut layers = Vec::new();
        for &eid in &c.edges {
            let Some(e) = self.edge(eid) else { return false };
            for nid in [e.tail, e.head] {
                if let Some(l) = self.nodes[self.node_index[&nid]].effective_layer() {
                    layers.push(l);
                }
            }
        }
        layers.contains(&Layer::Supply) && layers.contains(&Layer::Return)
    }

    /// Series-contracted degree sequence and cycle count of one layer.
    fn layer_signature(&self, layer: Layer) -> LayerSignature {
        let in_layer: Vec<bool> = self.nodes.iter().map(|n| n.effective_layer() == Some(layer)).collect();
        let mut full_degree = vec![0usize; self.nodes.len()];
        for e in &self.edges {
            full_degree[self.node_index[&e.tail]] += 1;
            full_degree[self.node_index[&e.head]] += 1;
        }
        let mut edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|e| (self.node_index[&e.tail], self.node_index[&e.head]))
            .filter(|&(a, b)| in_layer[a] && in_layer[b])
            .collect();
        let mut alive = in_layer.clone();
        loop {
            let mut changed = false;
            for k in 0..self.nodes.len() {
                if !alive[k] || self.nodes[k].kind != NodeKind::Junction || full_degree[k] != 2 {
                    continue;
                }
                let inc: Vec<usize> = (0..edges.len()).filter(|&i| edges[i].0 == k || edges[i].1 == k).collect();
                if inc.len() != 2 {
                    continue;
                }
                let other = |i: usize| if edges[i].0 == k { edges[i].1 } else { edges[i].0 };
                let (a, b) = (other(inc[0]), other(inc[1]));
                if a == k || b == k {
                    continue;
                }
                edges.remove(inc[1]);
                edges[inc[0]] = (a, b);
                alive[k] = false;
                changed = true;
            }
            if !changed {
                break;
            }
        }
        let idx: Vec<usize> = (0..self.nodes.len()).filter(|&k| alive[k]).collect();
        let mut deg: Vec<usize> = idx.iter().map(|&k| edges.iter().filter(|e| e.0 == k).count() + edges.iter().filter(|e| e.1 == k).count()).collect();
        deg.sort_unstable();
        let mut uf = UnionFind::new(self.nodes.len());
        for &(a, b) in &edges {
            uf.union(a, b);
        }
        let comps = idx.iter().filter(|&&k| uf.find(k) == k).count();
        LayerSignature { nodes: idx.len(), degrees: deg, cycles: edges.len() + comps - idx.len() }
    }
}

/// Tree path from `from` to `to`; yields `(edge position, forward)` where
/// `forward` means the edge is traversed tail to head.
fn tree_path(
    adj: &BTreeMap<usize, Vec<(usize, usize)>>,
    from: usize,
    to: usize,
    tail_class: impl Fn(usize) -> usize,
) -> Vec<(usize, bool)> {
    if from == to {
        return Vec::new();
    }
    let mut prev: HashMap<usize, (usize, usize)> = HashMap::new();
    let mut stack = vec![from];
    prev.insert(from, (usize::MAX, usize::MAX));
    while let Some(v) = stack.pop() {
        if v == to {
            break;
        }
        for &(e, w) in adj.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
            if let std::collections::hash_map::Entry::Vacant(s) = prev.entry(w) {
                s.insert((v, e));
                stack.push(w);
            }
        }
    }
    let mut out = Vec::new();
    let mut at = to;
    while at != from {
        let (p, e) = prev[&at];
        // traversing p -> at
        out.push((e, tail_class(e) == p));
        at = p;
    }
    out.reverse();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum ChordKind {
    Consumer(u32),
    Loop,
    TankOutlet(TankId),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeClassification {
    /// Consumers, then loop pipes, then tank outlets.
    pub chord_edges: Vec<EdgeId>,
    pub chord_kinds: Vec<ChordKind>,
    pub producer_edges: Vec<EdgeId>,
    pub tree_edges: Vec<EdgeId>,
    pub n_consumers: usize,
    /// Loop count `a`, summed over both layers.
    pub n_loops: usize,
}

impl EdgeClassification {
    pub fn n_ch(&self) -> usize {
        self.chord_edges.len()
    }
    pub fn n_pr(&self) -> usize {
        self.producer_edges.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopMatrix {
    /// `(n_ch + n_pr) × n_E`, block columns `[I 0 G 0; 0 I 0 H]`.
    pub f: IntMatrix,
    /// Edge id of each block column.
    pub columns: Vec<EdgeId>,
    /// Block column of each edge, indexed by natural edge position.
    pub col_of_edge: Vec<usize>,
    pub n_ch: usize,
    pub n_pr: usize,
    pub n_g: usize,
    pub n_h: usize,
    /// Nonzeros `(chord row, sign)` of each G column.
    pub g_cols: Vec<Vec<(usize, i8)>>,
    /// Nonzeros `(producer row, sign)` of each H column.
    pub h_cols: Vec<Vec<(usize, i8)>>,
}

impl LoopMatrix {
    pub fn rows(&self) -> usize {
        self.n_ch + self.n_pr
    }

    pub fn g(&self) -> IntMatrix {
        let r = self.rows();
        self.f.view((0, r), (self.n_ch, self.n_g)).into_owned()
    }

    pub fn h(&self) -> IntMatrix {
        let r = self.rows();
        self.f.view((self.n_ch, r + self.n_g), (self.n_pr, self.n_h)).into_owned()
    }

    /// `F` with columns permuted back to natural edge order.
    pub fn natural(&self, graph: &NetworkGraph) -> IntMatrix {
        let mut out = IntMatrix::zeros(self.rows(), self.columns.len());
        for (c, eid) in self.columns.iter().enumerate() {
            let j = graph.edge_pos(*eid).expect("column edge exists");
            out.set_column(j, &self.f.column(c));
        }
        out
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        self.f.map(|v| v as f64)
    }

    /// Per-edge values in natural order, permuted into block column order.
    pub fn permute_edges(&self, natural: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; natural.len()];
        for (j, &c) in self.col_of_edge.iter().enumerate() {
            out[c] = natural[j];
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerSignature {
    pub nodes: usize,
    pub degrees: Vec<usize>,
    pub cycles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    Disconnected { components: usize },
    NoProducers,
    ProducerWithoutTank { hx: EdgeId },
    VolumeMismatch { tank: TankId, sum: f64, capacity: f64 },
    StandaloneTank { tank: TankId },
    MalformedConsumer { consumer: u32 },
    Asymmetric { supply: LayerSignature, ret: LayerSignature },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Disconnected { components } => write!(f, "graph has {components} components"),
            Violation::NoProducers => write!(f, "no producers"),
            Violation::ProducerWithoutTank { hx } => {
                write!(f, "producer with hx edge {hx} does not run from a tank's cold to its hot layer")
            }
            Violation::VolumeMismatch { tank, sum, capacity } => {
                write!(f, "tank {tank}: initial volumes sum to {sum}, capacity is {capacity}")
            }
            Violation::StandaloneTank { tank } => write!(f, "tank {tank} is not interfaced with one producer and the network"),
            Violation::MalformedConsumer { consumer } => {
                write!(f, "consumer {consumer} does not connect supply and return layers")
            }
            Violation::Asymmetric { supply, ret } => {
                write!(f, "supply and return layers differ: {supply:?} vs {ret:?}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologyReport {
    pub violations: Vec<Violation>,
}

impl TopologyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined. The smaller root
    /// wins so results do not depend on call order details.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}
