//! Reduced ODE plant: chord and producer flow dynamics plus tank volumes.
//!
//! ```text
//! J_ch q̇_ch = f_ch(q_ch) + u_ch
//! J_pr q̇_pr = f_pr(q_pr) + u_pr
//! V̇_sh = q_pr - B q_ch,   V̇_sc = -V̇_sh
//! ```

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::graph::{EdgeClassification, EdgeKind, LoopMatrix, NetworkGraph, TankId, TopologyError};
use crate::hydraulics::{FrictionMaps, HydraulicsError};
use crate::intmat::IntMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Hydraulics(#[from] HydraulicsError),
    #[error("inertia cross block between chords and producers is nonzero (max {0})")]
    CrossInertia(f64),
    #[error("producer inertia matrix is not diagonal")]
    ProducerInertiaNotDiagonal,
    #[error("chord inertia matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("tank {tank}: hot-layer volume {v_sh} m³ outside [0, {capacity}]")]
    Infeasible { tank: TankId, v_sh: f64, capacity: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub t: f64,
    pub q_ch: DVector<f64>,
    pub q_pr: DVector<f64>,
    pub v_sh: DVector<f64>,
    pub v_sc: DVector<f64>,
}

impl PlantState {
    pub fn zeros(n_ch: usize, n_pr: usize) -> Self {
        PlantState {
            t: 0.0,
            q_ch: DVector::zeros(n_ch),
            q_pr: DVector::zeros(n_pr),
            v_sh: DVector::zeros(n_pr),
            v_sc: DVector::zeros(n_pr),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantDerivative {
    pub q_ch: DVector<f64>,
    pub q_pr: DVector<f64>,
    pub v_sh: DVector<f64>,
    pub v_sc: DVector<f64>,
}

/// Maps `(u_ch, u_pr)` to per-edge pump pressures with `F w_E = (u_ch, u_pr)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpAssignment {
    /// `(natural edge position, row of F, sign)` for every pump.
    pub pumps: Vec<(usize, usize, i8)>,
}

impl PumpAssignment {
    /// Requires exactly one pump per row of `F` and exactly one nonzero in
    /// every pump column.
    pub fn new(graph: &NetworkGraph, lm: &LoopMatrix) -> Result<Self, TopologyError> {
        let rows = lm.rows();
        let mut per_row = vec![0usize; rows];
        let mut pumps = Vec::new();
        for (j, e) in graph.edges().iter().enumerate() {
            if e.kind != EdgeKind::Pump {
                continue;
            }
            let c = lm.col_of_edge[j];
            let nz: Vec<usize> = (0..rows).filter(|&r| lm.f[(r, c)] != 0).collect();
            if nz.len() != 1 {
                return Err(TopologyError::PumpPlacement(format!(
                    "pump {} lies on {} fundamental loops, expected 1",
                    e.id,
                    nz.len()
                )));
            }
            per_row[nz[0]] += 1;
            pumps.push((j, nz[0], lm.f[(nz[0], c)] as i8));
        }
        if let Some(r) = per_row.iter().position(|&k| k != 1) {
            let eid = lm.columns[r];
            return Err(TopologyError::PumpPlacement(format!(
                "loop of edge {eid} has {} pumps, expected 1",
                per_row[r]
            )));
        }
        Ok(PumpAssignment { pumps })
    }

    /// Pump pressures in natural edge order.
    pub fn edge_pressures(&self, n_e: usize, u_ch: &DVector<f64>, u_pr: &DVector<f64>) -> DVector<f64> {
        let n_ch = u_ch.len();
        let mut w = DVector::zeros(n_e);
        for &(j, r, s) in &self.pumps {
            let u = if r < n_ch { u_ch[r] } else { u_pr[r - n_ch] };
            w[j] = s as f64 * u;
        }
        w
    }
}

/// `(J_ch, diag J_pr)` from `F ⟨J_E⟩ Fᵀ`, with the cross block checked to be
/// exactly zero.
pub fn assemble_inertia(lm: &LoopMatrix, j_cols: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>), ModelError> {
    if j_cols.len() != lm.columns.len() {
        return Err(ModelError::Dimension(format!("{} inertias for {} edges", j_cols.len(), lm.columns.len())));
    }
    let f = lm.to_f64();
    let jd = DMatrix::from_diagonal(&DVector::from_column_slice(j_cols));
    let full = &f * jd * f.transpose();
    let (n_ch, n_pr) = (lm.n_ch, lm.n_pr);
    let cross = full.view((0, n_ch), (n_ch, n_pr)).amax();
    if cross != 0.0 {
        return Err(ModelError::CrossInertia(cross));
    }
    let j_pr_full = full.view((n_ch, n_ch), (n_pr, n_pr));
    for r in 0..n_pr {
        for c in 0..n_pr {
            if r != c && j_pr_full[(r, c)] != 0.0 {
                return Err(ModelError::ProducerInertiaNotDiagonal);
            }
        }
    }
    let j_pr = j_pr_full.diagonal();
    if j_pr.iter().any(|&v| !(v > 0.0)) {
        return Err(ModelError::ProducerInertiaNotDiagonal);
    }
    Ok((full.view((0, 0), (n_ch, n_ch)).into_owned(), j_pr))
}

/// Diagonal of `W(q_pr) = diag(|q_pr,i| q_pr,i)`.
pub fn regressor_w(q_pr: &DVector<f64>) -> DVector<f64> {
    q_pr.map(|q| q.abs() * q)
}

/// `Ψ = B (q_ch⋆ - q_ch)`.
pub fn disturbance_psi(b: &DMatrix<f64>, q_ch: &DVector<f64>, q_ch_star: &DVector<f64>) -> DVector<f64> {
    b * (q_ch_star - q_ch)
}

#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub graph: NetworkGraph,
    pub classification: EdgeClassification,
    pub loops: LoopMatrix,
    pub b_int: IntMatrix,
    pub b: DMatrix<f64>,
    /// Friction coefficient per block column.
    pub theta_cols: Vec<f64>,
    /// Inertia per block column.
    pub inertia_cols: Vec<f64>,
    pub friction: FrictionMaps,
    pub j_ch: DMatrix<f64>,
    j_ch_chol: Cholesky<f64, Dyn>,
    pub j_pr: DVector<f64>,
    pub pumps: PumpAssignment,
    pub capacity: DVector<f64>,
}

impl ReducedModel {
    pub fn build(graph: NetworkGraph) -> Result<Self, ModelError> {
        let classification = graph.classify_edges()?;
        let loops = graph.fundamental_loop_matrix(&classification)?;
        let b_int = graph.extract_b(&loops)?;
        let pumps = PumpAssignment::new(&graph, &loops)?;
        let theta_nat: Vec<f64> = graph.edges().iter().map(|e| e.theta).collect();
        let j_nat: Vec<f64> = graph.edges().iter().map(|e| e.inertia).collect();
        let theta_cols = loops.permute_edges(&theta_nat);
        let inertia_cols = loops.permute_edges(&j_nat);
        let friction = FrictionMaps::new(&loops, &theta_cols)?;
        let (j_ch, j_pr) = assemble_inertia(&loops, &inertia_cols)?;
        let j_ch_chol = Cholesky::new(j_ch.clone()).ok_or(ModelError::NotPositiveDefinite)?;
        let capacity = DVector::from_iterator(graph.tanks().len(), graph.tanks().iter().map(|t| t.capacity));
        Ok(ReducedModel {
            b: b_int.map(|v| v as f64),
            b_int,
            graph,
            classification,
            loops,
            theta_cols,
            inertia_cols,
            friction,
            j_ch,
            j_ch_chol,
            j_pr,
            pumps,
            capacity,
        })
    }

    pub fn n_ch(&self) -> usize {
        self.loops.n_ch
    }
    pub fn n_pr(&self) -> usize {
        self.loops.n_pr
    }
    pub fn n_st(&self) -> usize {
        self.capacity.len()
    }
    pub fn n_loops(&self) -> usize {
        self.classification.n_loops
    }
    pub fn n_edges(&self) -> usize {
        self.loops.columns.len()
    }

    /// True aggregated producer friction coefficients.
    pub fn theta(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.friction.theta_pr)
    }

    pub fn f_ch(&self, q_ch: &DVector<f64>) -> DVector<f64> {
        self.friction.f_ch(q_ch)
    }

    pub fn f_pr(&self, q_pr: &DVector<f64>) -> DVector<f64> {
        self.friction.f_pr(q_pr)
    }

    /// `J_ch⁻¹ v` by triangular solves.
    pub fn solve_j_ch(&self, v: &DVector<f64>) -> DVector<f64> {
        self.j_ch_chol.solve(v)
    }

    pub fn initial_state(&self) -> PlantState {
        let tanks = self.graph.tanks();
        PlantState {
            t: 0.0,
            q_ch: DVector::zeros(self.n_ch()),
            q_pr: DVector::zeros(self.n_pr()),
            v_sh: DVector::from_iterator(tanks.len(), tanks.iter().map(|t| t.v_sh0)),
            v_sc: DVector::from_iterator(tanks.len(), tanks.iter().map(|t| t.v_sc0)),
        }
    }

    pub fn check_volumes(&self, v_sh: &DVector<f64>) -> Result<(), ModelError> {
        for (i, t) in self.graph.tanks().iter().enumerate() {
            let v = v_sh[i];
            if !(v >= 0.0 && v <= t.capacity) {
                return Err(ModelError::Infeasible { tank: t.id, v_sh: v, capacity: t.capacity });
            }
        }
        Ok(())
    }

    pub fn open_loop_rhs(
        &self,
        state: &PlantState,
        u_ch: &DVector<f64>,
        u_pr: &DVector<f64>,
    ) -> Result<PlantDerivative, ModelError> {
        if state.q_ch.len() != self.n_ch()
            || state.q_pr.len() != self.n_pr()
            || u_ch.len() != self.n_ch()
            || u_pr.len() != self.n_pr()
            || state.v_sh.len() != self.n_st()
        {
            return Err(ModelError::Dimension("state or input does not match the model".into()));
        }
        self.check_volumes(&state.v_sh)?;
        let q_ch_dot = self.solve_j_ch(&(self.f_ch(&state.q_ch) + u_ch));
        let q_pr_dot = (self.f_pr(&state.q_pr) + u_pr).component_div(&self.j_pr);
        let v_sh = &state.q_pr - &self.b * &state.q_ch;
        let v_sc = -&v_sh;
        Ok(PlantDerivative { q_ch: q_ch_dot, q_pr: q_pr_dot, v_sh, v_sc })
    }

    /// Edge flows `q_E = Fᵀ (q_ch, q_pr)` in natural edge order.
    pub fn edge_flows(&self, q_ch: &DVector<f64>, q_pr: &DVector<f64>) -> DVector<f64> {
        let q = DVector::from_iterator(self.loops.rows(), q_ch.iter().chain(q_pr.iter()).copied());
        let cols = self.loops.to_f64().transpose() * q;
        let mut out = DVector::zeros(cols.len());
        for (j, &c) in self.loops.col_of_edge.iter().enumerate() {
            out[j] = cols[c];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regressor_desk_values() {
        let w = regressor_w(&DVector::from_vec(vec![2.0, -3.0]));
        assert_eq!(w.as_slice(), &[4.0, -9.0]);
        assert_eq!(regressor_w(&DVector::zeros(3)), DVector::zeros(3));
    }

    #[test]
    fn psi_vanishes_on_setpoint() {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, -1.0]);
        let q = DVector::from_vec(vec![0.3, 0.1]);
        assert_eq!(disturbance_psi(&b, &q, &q), DVector::zeros(2));
    }
}
