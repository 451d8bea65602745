//! Magnetic potentials as oriented edge phases.
//!
//! A potential stores theta_e = integral of alpha along each oriented edge;
//! reversing the orientation negates the phase. Face fluxes realize d alpha,
//! holonomies realize circulation integrals, and Shigekawa's criterion
//! (d alpha = 0 and all holonomies in 2 pi Z) decides gauge triviality.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{DiscretizedManifold, ModelStructure};

#[derive(Debug, Error)]
pub enum MagneticError {
    #[error("potential was built for a different mesh")]
    HostMismatch,
    #[error("{op} requires a {expected} grid")]
    UnsupportedModel { op: &'static str, expected: &'static str },
    #[error("edge path is not a closed cycle")]
    PathNotClosed,
    #[error("gauge function has {got} angles for {expected} vertices")]
    GaugeSizeMismatch { got: usize, expected: usize },
}

/// Oriented edge phases theta_e plus a provenance tag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MagneticPotential {
    host: u64,
    pub edge_phase: Vec<f64>,
    pub descriptor: String,
}

/// Vertex angles psi_u representing tau(u) = e^{i psi_u} in U(1).
#[derive(Debug, Clone)]
pub struct GaugeFunction {
    pub angles: Vec<f64>,
}

/// Wrap an angle to the principal branch (-pi, pi].
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = x % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

impl MagneticPotential {
    pub fn new(m: &DiscretizedManifold, edge_phase: Vec<f64>, descriptor: String) -> Self {
        assert_eq!(edge_phase.len(), m.edge_count());
        MagneticPotential { host: m.fingerprint(), edge_phase, descriptor }
    }

    pub fn check_host(&self, m: &DiscretizedManifold) -> Result<(), MagneticError> {
        if self.host == m.fingerprint() {
            Ok(())
        } else {
            Err(MagneticError::HostMismatch)
        }
    }

    /// Phase for traversing edge `e` from `u`; the stored value if `u` is the
    /// tail of the stored orientation, its negation otherwise.
    pub fn phase_from(&self, forward: bool, e: usize) -> f64 {
        if forward {
            self.edge_phase[e]
        } else {
            -self.edge_phase[e]
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "descriptor": self.descriptor,
            "phases": self.edge_phase.iter().enumerate()
                .map(|(e, th)| serde_json::json!([e, th])).collect::<Vec<_>>(),
        })
    }
}

/// The zero potential on any model.
pub fn zero_potential(m: &DiscretizedManifold) -> MagneticPotential {
    MagneticPotential::new(m, vec![0.0; m.edge_count()], "zero".to_string())
}

/// alpha = A dx on the circle: theta_e = A * edge length on every forward edge.
pub fn circle_constant(
    m: &DiscretizedManifold,
    a: f64,
) -> Result<MagneticPotential, MagneticError> {
    let ModelStructure::Circle { .. } = m.structure else {
        return Err(MagneticError::UnsupportedModel { op: "circle_constant", expected: "circle" });
    };
    let phases = m.edges.iter().map(|e| a * e.length).collect();
    Ok(MagneticPotential::new(m, phases, format!("circle A={a}")))
}

/// alpha = A dx + B dy on the torus; closed (all face fluxes vanish).
pub fn torus_constant(
    m: &DiscretizedManifold,
    a: f64,
    b: f64,
) -> Result<MagneticPotential, MagneticError> {
    let ModelStructure::Torus { n1, n2, .. } = m.structure else {
        return Err(MagneticError::UnsupportedModel { op: "torus_constant", expected: "torus" });
    };
    let nv = n1 * n2;
    let mut phases = vec![0.0; m.edge_count()];
    for (i, e) in m.edges.iter().enumerate() {
        phases[i] = if i < nv { a * e.length } else { b * e.length };
    }
    Ok(MagneticPotential::new(m, phases, format!("torus A={a} B={b}")))
}

/// Landau-gauge phases giving every square face the flux 2 pi m / (n1 n2).
pub fn torus_uniform_flux(
    m: &DiscretizedManifold,
    quanta: i64,
) -> Result<MagneticPotential, MagneticError> {
    let ModelStructure::Torus { n1, n2, .. } = m.structure else {
        return Err(MagneticError::UnsupportedModel {
            op: "torus_uniform_flux",
            expected: "torus",
        });
    };
    let nv = n1 * n2;
    let phi0 = 2.0 * std::f64::consts::PI * quanta as f64 / nv as f64;
    let mut phases = vec![0.0; m.edge_count()];
    // y-edge (i,j) carries phi0*i; the seam column of x-edges absorbs the wrap.
    for j in 0..n2 {
        for i in 0..n1 {
            phases[nv + j * n1 + i] = phi0 * i as f64;
        }
    }
    for j in 0..n2 {
        phases[j * n1 + (n1 - 1)] = -phi0 * n1 as f64 * j as f64;
    }
    Ok(MagneticPotential::new(m, phases, format!("torus uniform flux m={quanta}")))
}

/// alpha = s (x dy - y dx) on the sphere, integrated exactly along each chord.
pub fn sphere_axial(m: &DiscretizedManifold, s: f64) -> Result<MagneticPotential, MagneticError> {
    let ModelStructure::Sphere { .. } = m.structure else {
        return Err(MagneticError::UnsupportedModel { op: "sphere_axial", expected: "sphere" });
    };
    // For the straight chord P->Q the integrand of x dy - y dx is linear in
    // the parameter, so midpoint quadrature equals the exact value
    // P_x Q_y - P_y Q_x.
    let phases = m
        .edges
        .iter()
        .map(|e| {
            let p = m.vertices[e.endpoints.0];
            let q = m.vertices[e.endpoints.1];
            s * (p[0] * q[1] - p[1] * q[0])
        })
        .collect();
    Ok(MagneticPotential::new(m, phases, format!("sphere s={s}")))
}

/// Per-face flux, wrapped to the principal branch (-pi, pi].
///
/// Raw oriented phase sums around all faces of a closed surface telescope to
/// zero, so the quantized total flux (2 pi * integer) is recovered only from
/// the wrapped per-face values.
pub fn face_fluxes(
    m: &DiscretizedManifold,
    p: &MagneticPotential,
) -> Result<Vec<f64>, MagneticError> {
    p.check_host(m)?;
    Ok(m.faces
        .iter()
        .map(|f| {
            let raw: f64 = f.edges.iter().map(|&(e, fwd)| p.phase_from(fwd, e)).sum();
            wrap_angle(raw)
        })
        .collect())
}

/// max_f |flux_f| / area_f; zero in dimension 1.
pub fn d_alpha_sup_norm(
    m: &DiscretizedManifold,
    p: &MagneticPotential,
) -> Result<f64, MagneticError> {
    let fluxes = face_fluxes(m, p)?;
    Ok(fluxes
        .iter()
        .zip(&m.faces)
        .map(|(phi, f)| phi.abs() / f.area)
        .fold(0.0, f64::max))
}

/// alpha -> alpha + d tau / (i tau): theta'_{uv} = theta_{uv} + psi_v - psi_u.
pub fn gauge_transform(
    m: &DiscretizedManifold,
    p: &MagneticPotential,
    tau: &GaugeFunction,
) -> Result<MagneticPotential, MagneticError> {
    p.check_host(m)?;
    if tau.angles.len() != m.vertex_count() {
        return Err(MagneticError::GaugeSizeMismatch {
            got: tau.angles.len(),
            expected: m.vertex_count(),
        });
    }
    let phases = m
        .edges
        .iter()
        .zip(&p.edge_phase)
        .map(|(e, th)| th + tau.angles[e.endpoints.1] - tau.angles[e.endpoints.0])
        .collect();
    Ok(MagneticPotential::new(m, phases, format!("{} (gauged)", p.descriptor)))
}

/// Oriented phase sum along a closed edge path.
pub fn holonomy(
    m: &DiscretizedManifold,
    p: &MagneticPotential,
    cycle: &[(usize, bool)],
) -> Result<f64, MagneticError> {
    p.check_host(m)?;
    if cycle.is_empty() {
        return Err(MagneticError::PathNotClosed);
    }
    let tail = |&(e, fwd): &(usize, bool)| {
        let (u, v) = m.edges[e].endpoints;
        if fwd {
            (u, v)
        } else {
            (v, u)
        }
    };
    let (start, mut at) = tail(&cycle[0]);
    for step in &cycle[1..] {
        let (from, to) = tail(step);
        if from != at {
            return Err(MagneticError::PathNotClosed);
        }
        at = to;
    }
    if at != start {
        return Err(MagneticError::PathNotClosed);
    }
    Ok(cycle.iter().map(|&(e, fwd)| p.phase_from(fwd, e)).sum())
}

/// Shigekawa's criterion: d alpha = 0 (all face fluxes below `tol`) and every
/// homology generator's holonomy within `tol` of 2 pi Z.
pub fn is_gauge_trivial(
    m: &DiscretizedManifold,
    p: &MagneticPotential,
    tol: f64,
) -> Result<bool, MagneticError> {
    p.check_host(m)?;
    let fluxes = face_fluxes(m, p)?;
    if fluxes.iter().any(|phi| phi.abs() > tol) {
        return Ok(false);
    }
    for generator in &m.homology_generators {
        let hol = holonomy(m, p, generator)?;
        if wrap_angle(hol).abs() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Default tolerance for the gauge-triviality test, in radians.
pub const TRIVIALITY_TOL: f64 = 1e-8;
