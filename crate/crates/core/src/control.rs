//! Decentralized controllers.
//!
//! Every control channel is a function of its own local measurement and its
//! own controller state. The vector wrappers only loop over channels; neither
//! controller has access to the plant model, so friction coefficients, the
//! outlet block `B` and the consumer setpoints never reach the producer side.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::model::regressor_w;

/// Diagonal gains of the PI flow controller.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPIGains {
    pub m_ch: DVector<f64>,
    pub n_ch: DVector<f64>,
}

impl FlowPIGains {
    pub fn uniform(n: usize, m: f64, k: f64) -> Self {
        FlowPIGains { m_ch: DVector::from_element(n, m), n_ch: DVector::from_element(n, k) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowPIState {
    pub x_ch: DVector<f64>,
}

/// Local measurement of chord `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChordMeasurement {
    pub q: f64,
    pub q_star: f64,
}

/// Local measurement of producer `i`: its own flow, its tank's hot volume,
/// the measured tank-outlet flow, its own path inertia and volume setpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProducerMeasurement {
    pub q_pr: f64,
    pub v_sh: f64,
    pub outlet_flow: f64,
    pub j_pr: f64,
    pub v_sh_star: f64,
}

/// `(u, ẋ)` of one PI channel.
#[inline]
pub fn pi_flow_channel(xi: ChordMeasurement, x: f64, m: f64, n: f64) -> (f64, f64) {
    let e = xi.q - xi.q_star;
    (-n * e + x, -m * e)
}

pub fn pi_flow_control(
    xi: &[ChordMeasurement],
    state: &FlowPIState,
    gains: &FlowPIGains,
) -> (DVector<f64>, DVector<f64>) {
    let n = xi.len();
    let mut u = DVector::zeros(n);
    let mut xdot = DVector::zeros(n);
    for i in 0..n {
        (u[i], xdot[i]) = pi_flow_channel(xi[i], state.x_ch[i], gains.m_ch[i], gains.n_ch[i]);
    }
    (u, xdot)
}

/// Diagonal gains of the adaptive volume controller.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeGains {
    pub n_pr: DVector<f64>,
    pub n_sh: DVector<f64>,
    pub m_a: DVector<f64>,
    pub m_b: DVector<f64>,
}

impl VolumeGains {
    pub fn uniform(n: usize, n_pr: f64, n_sh: f64, m_a: f64, m_b: f64) -> Self {
        VolumeGains {
            n_pr: DVector::from_element(n, n_pr),
            n_sh: DVector::from_element(n, n_sh),
            m_a: DVector::from_element(n, m_a),
            m_b: DVector::from_element(n, m_b),
        }
    }

    pub fn channel(&self, i: usize) -> VolumeChannelGains {
        VolumeChannelGains { n_pr: self.n_pr[i], n_sh: self.n_sh[i], m_a: self.m_a[i], m_b: self.m_b[i] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeChannelGains {
    pub n_pr: f64,
    pub n_sh: f64,
    pub m_a: f64,
    pub m_b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeCtrlState {
    pub x_a: DVector<f64>,
    /// Live estimate of the producer friction coefficients.
    pub x_b: DVector<f64>,
}

/// `z = q_pr - x_a + N_sh (V_sh - V_sh⋆)`.
#[inline]
pub fn z_channel(xi: ProducerMeasurement, x_a: f64, n_sh: f64) -> f64 {
    xi.q_pr - x_a + n_sh * (xi.v_sh - xi.v_sh_star)
}

pub fn z_transform(xi: &[ProducerMeasurement], x_a: &DVector<f64>, gains: &VolumeGains) -> DVector<f64> {
    DVector::from_fn(xi.len(), |i, _| z_channel(xi[i], x_a[i], gains.n_sh[i]))
}

/// Output of one adaptive volume channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeChannelOutput {
    pub u: f64,
    pub x_a_dot: f64,
    pub x_b_dot: f64,
    pub z: f64,
}

#[inline]
pub fn adaptive_volume_channel(xi: ProducerMeasurement, x_a: f64, x_b: f64, g: VolumeChannelGains) -> VolumeChannelOutput {
    let v = xi.v_sh - xi.v_sh_star;
    let z = z_channel(xi, x_a, g.n_sh);
    let q = z + x_a - g.n_sh * v;
    let w = q.abs() * q;
    let j = xi.j_pr;
    let u = w * x_b - (j * (g.m_a - g.n_sh * g.n_sh) + 1.0) * v - (j * g.n_sh + g.n_pr) * z
        + j * g.n_sh * (xi.outlet_flow - x_a);
    VolumeChannelOutput { u, x_a_dot: -g.m_a * v, x_b_dot: -g.m_b * w * z, z }
}

/// `(u_pr, ẋ_a, ẋ_b)` for all producers.
pub fn adaptive_volume_control(
    xi: &[ProducerMeasurement],
    state: &VolumeCtrlState,
    gains: &VolumeGains,
) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let n = xi.len();
    let (mut u, mut xa, mut xb) = (DVector::zeros(n), DVector::zeros(n), DVector::zeros(n));
    for i in 0..n {
        let o = adaptive_volume_channel(xi[i], state.x_a[i], state.x_b[i], gains.channel(i));
        (u[i], xa[i], xb[i]) = (o.u, o.x_a_dot, o.x_b_dot);
    }
    (u, xa, xb)
}

/// `W̃(z)`: the regressor at `q_pr = z + x_a - N_sh (V_sh - V_sh⋆)`.
pub fn regressor_tilde(z: &DVector<f64>, x_a: &DVector<f64>, v_err: &DVector<f64>, n_sh: &DVector<f64>) -> DVector<f64> {
    regressor_w(&(z + x_a - n_sh.component_mul(v_err)))
}

/// Output clamp of the producer pump pressures. Controller states are not
/// touched (no anti-windup).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Saturation {
    pub enabled: bool,
    pub lower: f64,
    pub upper: f64,
    /// Nominal producer input `ū_pr` at maximum demand, Pa.
    pub u_nominal: Vec<f64>,
}

impl Saturation {
    pub fn disabled() -> Self {
        Saturation { enabled: false, lower: 0.03, upper: 1.15, u_nominal: Vec::new() }
    }

    pub fn bounds(&self, i: usize) -> (f64, f64) {
        let (a, b) = (self.lower * self.u_nominal[i], self.upper * self.u_nominal[i]);
        (a.min(b), a.max(b))
    }
}

/// Returns the clipped inputs and whether any component was clipped.
pub fn saturate_u_pr(u_pr: &DVector<f64>, sat: &Saturation) -> (DVector<f64>, bool) {
    if !sat.enabled {
        return (u_pr.clone(), false);
    }
    let mut active = false;
    let out = DVector::from_fn(u_pr.len(), |i, _| {
        let (lo, hi) = sat.bounds(i);
        let c = u_pr[i].clamp(lo, hi);
        active |= c != u_pr[i];
        c
    });
    (out, active)
}
