//! Friction physics: Colebrook friction factors, friction coefficients and
//! the reduced friction maps `f_ch`, `f_pr`.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::LoopMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipeGeometry {
    /// m
    pub length: f64,
    /// m
    pub diameter: f64,
    /// absolute roughness, m
    pub roughness: f64,
}

impl PipeGeometry {
    pub fn validate(&self) -> Result<(), HydraulicsError> {
        if !(self.length > 0.0 && self.diameter > 0.0 && self.roughness >= 0.0) {
            return Err(HydraulicsError::Domain(format!(
                "geometry needs length > 0, diameter > 0, roughness >= 0, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        PI * self.diameter * self.diameter / 4.0
    }

    pub fn relative_roughness(&self) -> f64 {
        self.roughness / self.diameter
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidProps {
    /// kg/m³
    pub density: f64,
    /// Viscosity as it enters the Reynolds formula below.
    pub viscosity: f64,
}

impl Default for FluidProps {
    fn default() -> Self {
        FluidProps { density: 1000.0, viscosity: 1e-3 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HydraulicsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("Colebrook iteration did not converge (eps/d = {rel_roughness}, Re = {re}); iterates of 1/sqrt(k): {iterates:?}")]
    NonConvergence { rel_roughness: f64, re: f64, iterates: Vec<f64> },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// `Re = ρ|q| / ((π d / 4) ν)`, evaluated once at a nominal flow.
pub fn reynolds(q_nominal: f64, geom: &PipeGeometry, fluid: &FluidProps) -> Result<f64, HydraulicsError> {
    if q_nominal == 0.0 || !q_nominal.is_finite() {
        return Err(HydraulicsError::Domain("nominal flow must be nonzero and finite".into()));
    }
    if !(geom.diameter > 0.0 && fluid.viscosity > 0.0 && fluid.density > 0.0) {
        return Err(HydraulicsError::Domain("diameter, density and viscosity must be positive".into()));
    }
    Ok(fluid.density * q_nominal.abs() / (PI * geom.diameter / 4.0 * fluid.viscosity))
}

/// Colebrook residual written in `x = 1/sqrt(k)`.
pub fn colebrook_residual(rel_roughness: f64, re: f64, k: f64) -> f64 {
    let x = 1.0 / k.sqrt();
    x + 2.0 * (rel_roughness / 3.7 + 2.51 * x / re).log10()
}

pub fn swamee_jain(rel_roughness: f64, re: f64) -> f64 {
    let l = (rel_roughness / 3.7 + 5.74 / re.powf(0.9)).log10();
    0.25 / (l * l)
}

const COLEBROOK_MAX_ITER: usize = 100;
const COLEBROOK_DAMPING: f64 = 0.9;
const COLEBROOK_TOL: f64 = 1e-12;

/// Darcy friction factor from the Colebrook equation by damped fixed-point
/// iteration on `x = 1/sqrt(k)`, started from Swamee–Jain.
pub fn colebrook_friction(rel_roughness: f64, re: f64) -> Result<f64, HydraulicsError> {
    if !(re > 0.0) || !re.is_finite() {
        return Err(HydraulicsError::Domain(format!("Reynolds number must be positive, got {re}")));
    }
    if !(rel_roughness >= 0.0) || !rel_roughness.is_finite() {
        return Err(HydraulicsError::Domain(format!("relative roughness must be >= 0, got {rel_roughness}")));
    }
    let g = |x: f64| -2.0 * (rel_roughness / 3.7 + 2.51 * x / re).log10();
    let mut x = 1.0 / swamee_jain(rel_roughness, re).sqrt();
    let mut iterates = vec![x];
    for _ in 0..COLEBROOK_MAX_ITER {
        let next = (1.0 - COLEBROOK_DAMPING) * x + COLEBROOK_DAMPING * g(x);
        iterates.push(next);
        if !next.is_finite() || next <= 0.0 {
            break;
        }
        let step = (next - x).abs();
        x = next;
        if step <= 4.0 * f64::EPSILON * x && (x - g(x)).abs() < COLEBROOK_TOL {
            return Ok(1.0 / (x * x));
        }
    }
    if x.is_finite() && x > 0.0 && (x - g(x)).abs() < COLEBROOK_TOL {
        return Ok(1.0 / (x * x));
    }
    Err(HydraulicsError::NonConvergence { rel_roughness, re, iterates })
}

/// `θ = k ℓ ρ / (2 d)` in Pa·s²/m⁶ (as a coefficient of `|q| q`).
pub fn theta_from_geometry(k: f64, geom: &PipeGeometry, fluid: &FluidProps) -> f64 {
    k * geom.length * fluid.density / (2.0 * geom.diameter)
}

/// `J = ρ ℓ / A`.
pub fn inertia_from_geometry(geom: &PipeGeometry, fluid: &FluidProps) -> f64 {
    fluid.density * geom.length / geom.area()
}

/// Geometry to `(θ, J)` via Reynolds at the nominal flow and Colebrook.
pub fn pipe_parameters(
    geom: &PipeGeometry,
    fluid: &FluidProps,
    q_nominal: f64,
) -> Result<(f64, f64), HydraulicsError> {
    geom.validate()?;
    let re = reynolds(q_nominal, geom, fluid)?;
    let k = colebrook_friction(geom.relative_roughness(), re)?;
    Ok((theta_from_geometry(k, geom, fluid), inertia_from_geometry(geom, fluid)))
}

#[inline]
pub fn edge_pressure_loss(theta: f64, q: f64) -> f64 {
    theta * q.abs() * q
}

#[inline]
pub fn edge_pressure_loss_derivative(theta: f64, q: f64) -> f64 {
    2.0 * theta * q.abs()
}

/// Reduced friction maps in closed form.
///
/// `f_ch,i = -θ_i |q_i| q_i - Σ_j G_ij θ_j |(Gᵀq)_j| (Gᵀq)_j` and
/// `f_pr,i = -θ_pr,i |q_pr,i| q_pr,i`, where `θ_pr,i` sums the producer's
/// heat exchanger and every series edge.
#[derive(Debug, Clone, PartialEq)]
pub struct FrictionMaps {
    pub theta_ch: Vec<f64>,
    pub theta_g: Vec<f64>,
    pub g_cols: Vec<Vec<(usize, i8)>>,
    pub theta_pr: Vec<f64>,
}

impl FrictionMaps {
    /// `theta_cols` is indexed by block column of `lm`.
    pub fn new(lm: &LoopMatrix, theta_cols: &[f64]) -> Result<Self, HydraulicsError> {
        let n_e = lm.columns.len();
        if theta_cols.len() != n_e {
            return Err(HydraulicsError::Dimension(format!("{} thetas for {} edges", theta_cols.len(), n_e)));
        }
        let (n_ch, n_pr, n_g) = (lm.n_ch, lm.n_pr, lm.n_g);
        let theta_ch = theta_cols[..n_ch].to_vec();
        let mut theta_pr = theta_cols[n_ch..n_ch + n_pr].to_vec();
        let theta_g = theta_cols[n_ch + n_pr..n_ch + n_pr + n_g].to_vec();
        for (k, col) in lm.h_cols.iter().enumerate() {
            match col.as_slice() {
                [(row, _)] => theta_pr[*row] += theta_cols[n_ch + n_pr + n_g + k],
                _ => {
                    return Err(HydraulicsError::Dimension(format!(
                        "producer tree column {} is shared by {} producers",
                        lm.columns[n_ch + n_pr + n_g + k],
                        col.len()
                    )))
                }
            }
        }
        Ok(FrictionMaps { theta_ch, theta_g, g_cols: lm.g_cols.clone(), theta_pr })
    }

    pub fn n_ch(&self) -> usize {
        self.theta_ch.len()
    }

    pub fn n_pr(&self) -> usize {
        self.theta_pr.len()
    }

    pub fn f_ch(&self, q_ch: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::from_fn(q_ch.len(), |i, _| -edge_pressure_loss(self.theta_ch[i], q_ch[i]));
        for (col, &th) in self.g_cols.iter().zip(&self.theta_g) {
            let s: f64 = col.iter().map(|&(r, g)| g as f64 * q_ch[r]).sum();
            let loss = edge_pressure_loss(th, s);
            for &(r, g) in col {
                out[r] -= g as f64 * loss;
            }
        }
        out
    }

    pub fn f_pr(&self, q_pr: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(q_pr.len(), |i, _| -edge_pressure_loss(self.theta_pr[i], q_pr[i]))
    }

    pub fn evaluate(
        &self,
        q_ch: &DVector<f64>,
        q_pr: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>), HydraulicsError> {
        if q_ch.len() != self.n_ch() || q_pr.len() != self.n_pr() {
            return Err(HydraulicsError::Dimension(format!(
                "flows of length ({}, {}) for maps of size ({}, {})",
                q_ch.len(),
                q_pr.len(),
                self.n_ch(),
                self.n_pr()
            )));
        }
        Ok((self.f_ch(q_ch), self.f_pr(q_pr)))
    }
}

/// Closed-form evaluation of `(f_ch, f_pr)`.
pub fn reduced_friction_maps(
    lm: &LoopMatrix,
    theta_cols: &[f64],
    q_ch: &DVector<f64>,
    q_pr: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>), HydraulicsError> {
    FrictionMaps::new(lm, theta_cols)?.evaluate(q_ch, q_pr)
}

/// Brute-force `-F f_E(Fᵀ (q_ch, q_pr))`.
pub fn generic_friction_map(
    lm: &LoopMatrix,
    theta_cols: &[f64],
    q_ch: &DVector<f64>,
    q_pr: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>), HydraulicsError> {
    let n_e = lm.columns.len();
    if theta_cols.len() != n_e || q_ch.len() != lm.n_ch || q_pr.len() != lm.n_pr {
        return Err(HydraulicsError::Dimension("flows or thetas do not match the loop matrix".into()));
    }
    let f = lm.to_f64();
    let q = DVector::from_iterator(lm.rows(), q_ch.iter().chain(q_pr.iter()).copied());
    let q_e = f.transpose() * q;
    let f_e = DVector::from_fn(n_e, |j, _| edge_pressure_loss(theta_cols[j], q_e[j]));
    let out = -(f * f_e);
    Ok((out.rows(0, lm.n_ch).into_owned(), out.rows(lm.n_ch, lm.n_pr).into_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(rel: f64, re: f64) -> f64 {
        // residual is decreasing in k
        let (mut lo, mut hi) = (1e-4, 0.5);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if colebrook_residual(rel, re, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn reynolds_desk_value() {
        let g = PipeGeometry { length: 1.0, diameter: 0.1, roughness: 0.0 };
        let re = reynolds(0.01, &g, &FluidProps::default()).unwrap();
        let desk = 1000.0 * 0.01 / (std::f64::consts::PI * 0.1 / 4.0 * 1e-3);
        assert!((re - desk).abs() < 1e-9 * desk);
        assert!((re - 1.27324e5).abs() < 1.0);
        assert_eq!(re, reynolds(-0.01, &g, &FluidProps::default()).unwrap());
        let thick = FluidProps { viscosity: 2e-3, ..FluidProps::default() };
        assert!((reynolds(0.01, &g, &thick).unwrap() - re / 2.0).abs() < 1e-9);
        assert!(reynolds(0.0, &g, &FluidProps::default()).is_err());
    }

    #[test]
    fn colebrook_matches_bisection() {
        let k = colebrook_friction(0.001, 1e5).unwrap();
        assert!((k - bisect(0.001, 1e5)).abs() < 1e-10);
        assert!((k - 0.0222).abs() < 5e-4);
        let smooth = colebrook_friction(0.0, 1e5).unwrap();
        assert!((smooth - 0.018).abs() < 5e-4);
        assert!(matches!(colebrook_friction(0.001, 0.0), Err(HydraulicsError::Domain(_))));
        assert!(colebrook_friction(0.001, -5.0).is_err());
    }

    #[test]
    fn theta_desk_values() {
        let g = PipeGeometry { length: 100.0, diameter: 0.1, roughness: 0.0 };
        assert_eq!(theta_from_geometry(0.02, &g, &FluidProps::default()), 10000.0);
        assert_eq!(theta_from_geometry(0.0, &g, &FluidProps::default()), 0.0);
        let g2 = PipeGeometry { length: 200.0, ..g };
        assert_eq!(theta_from_geometry(0.02, &g2, &FluidProps::default()), 20000.0);
    }

    #[test]
    fn edge_loss_basics() {
        assert_eq!(edge_pressure_loss(2.0, 3.0), 18.0);
        assert_eq!(edge_pressure_loss(2.0, 0.0), 0.0);
        assert_eq!(edge_pressure_loss(2.0, -3.0), -18.0);
        for &q in &[-2.0_f64, -0.3, 0.01, 1.7] {
            let h = 1e-5 * q.abs();
            let fd = (edge_pressure_loss(3.0, q + h) - edge_pressure_loss(3.0, q - h)) / (2.0 * h);
            let d = edge_pressure_loss_derivative(3.0, q);
            assert!((fd - d).abs() <= 1e-6 * d.abs());
        }
    }
}
