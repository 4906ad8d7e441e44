//! Hydraulic simulation and decentralized control of multi-producer district
//! heating networks with stratified storage tanks.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: the directed network graph, its incidence matrix, chord
//!   selection and the fundamental loop matrix `F` with its tank-outlet
//!   sub-block `B`.
//! - [`hydraulics`]: Colebrook friction factors, friction coefficients and the
//!   reduced friction maps `f_ch`, `f_pr`.
//! - [`model`]: the reduced ODE plant (inertia matrices, regressor,
//!   disturbance, open-loop vector field).
//! - [`control`]: the decentralized PI flow controller and the adaptive
//!   backstepping volume controller, plus actuator clipping.
//! - [`sim`]: fixed-step RK4 integration of the closed loop with setpoint
//!   schedules and trajectory recording.
//! - [`analysis`]: equilibria, storage functions, loop-law residuals,
//!   convergence metrics and the verification suite.
//! - [`scenario`]: JSON scenario files and the trajectory CSV format.
//! - [`synth`]: small hand-built networks, a seeded generator of synthetic
//!   meshed networks and the reference study.
//! - [`verify`]: the invariant suite behind `dhsim verify`.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod control;
pub mod graph;
pub mod hydraulics;
pub mod intmat;
pub mod model;
pub mod scenario;
pub mod sim;
pub mod synth;
pub mod verify;

pub use graph::{EdgeClassification, LoopMatrix, NetworkGraph};
pub use model::{PlantState, ReducedModel};
pub use scenario::Scenario;
pub use sim::{StateBundle, Trajectory};
