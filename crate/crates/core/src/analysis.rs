//! Integrated Bochner-identity verification on structured grids and
//! heat-semigroup inequality checks via dense matrix exponentials.
//!
//! Covariant derivatives use phased central differences: along each axis,
//! D f(u) = (e^{i theta(u->u+)} f(u+) - e^{i theta(u->u-)} f(u-)) / (2h).
//! These stencils exist only on the circle and torus grids; the sphere is
//! unsupported here by design.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::eigensolve::{smallest_k, EigenError, SolverOptions};
use crate::geometry::{DiscretizedManifold, ModelStructure};
use crate::magnetic::{face_fluxes, zero_potential, MagneticError, MagneticPotential};
use crate::operator::{assemble, MagneticOperator, OperatorError};

/// Dense matrix exponentials only below this size.
pub const HEAT_DENSE_MAX: usize = 400;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Magnetic(#[from] MagneticError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error("covariant stencils require a circle or torus grid")]
    UnsupportedModel,
    #[error("heat semigroup needs N <= {max}, got {n}")]
    TooLarge { n: usize, max: usize },
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("empty {0} grid")]
    EmptyGrid(&'static str),
    #[error("vector length {got} does not match grid size {expected}")]
    DimensionMismatch { got: usize, expected: usize },
}

/// Per-vertex stencil data of a structured periodic grid.
struct GridStencil {
    dims: usize,
    spacing: [f64; 2],
    /// [axis] -> (forward neighbor, phase to it, backward neighbor, phase).
    hops: Vec<[(usize, f64, usize, f64); 2]>,
}

fn build_stencil(
    m: &DiscretizedManifold,
    p: &MagneticPotential,
) -> Result<GridStencil, AnalysisError> {
    p.check_host(m)?;
    match m.structure {
        ModelStructure::Circle { n, length } => {
            let h = length / n as f64;
            let hops = (0..n)
                .map(|u| {
                    let fwd = u; // edge u -> u+1
                    let bwd = (u + n - 1) % n;
                    [
                        (
                            (u + 1) % n,
                            p.edge_phase[fwd],
                            (u + n - 1) % n,
                            -p.edge_phase[bwd],
                        ),
                        (u, 0.0, u, 0.0),
                    ]
                })
                .collect();
            Ok(GridStencil { dims: 1, spacing: [h, 0.0], hops })
        }
        ModelStructure::Torus { n1, n2, l1, l2 } => {
            let (h1, h2) = (l1 / n1 as f64, l2 / n2 as f64);
            let nv = n1 * n2;
            let x_edge = |i: usize, j: usize| (j % n2) * n1 + (i % n1);
            let y_edge = |i: usize, j: usize| nv + (j % n2) * n1 + (i % n1);
            let hops = (0..nv)
                .map(|u| {
                    let (i, j) = (u % n1, u / n1);
                    [
                        (
                            j * n1 + (i + 1) % n1,
                            p.edge_phase[x_edge(i, j)],
                            j * n1 + (i + n1 - 1) % n1,
                            -p.edge_phase[x_edge(i + n1 - 1, j)],
                        ),
                        (
                            ((j + 1) % n2) * n1 + i,
                            p.edge_phase[y_edge(i, j)],
                            ((j + n2 - 1) % n2) * n1 + i,
                            -p.edge_phase[y_edge(i, j + n2 - 1)],
                        ),
                    ]
                })
                .collect();
            Ok(GridStencil { dims: 2, spacing: [h1, h2], hops })
        }
        ModelStructure::Sphere { .. } => Err(AnalysisError::UnsupportedModel),
    }
}

impl GridStencil {
    fn derivative(&self, f: &[Complex64], axis: usize) -> Vec<Complex64> {
        let h = self.spacing[axis];
        self.hops
            .iter()
            .map(|hop| {
                let (fp, tp, fm, tm) = hop[axis];
                (Complex64::from_polar(1.0, tp) * f[fp] - Complex64::from_polar(1.0, tm) * f[fm])
                    / (2.0 * h)
            })
            .collect()
    }
}

/// Magnetic gradient components per vertex (second component zero on the
/// circle).
pub fn covariant_gradient(
    m: &DiscretizedManifold,
    p: &MagneticPotential,
    f: &[Complex64],
) -> Result<Vec<[Complex64; 2]>, AnalysisError> {
    let st = build_stencil(m, p)?;
    if f.len() != m.vertex_count() {
        return Err(AnalysisError::DimensionMismatch { got: f.len(), expected: m.vertex_count() });
    }
    let mut out = vec![[Complex64::default(); 2]; f.len()];
    for axis in 0..st.dims {
        for (o, d) in out.iter_mut().zip(st.derivative(f, axis)) {
            o[axis] = d;
        }
    }
    Ok(out)
}

/// Magnetic Hessian per vertex: H[a][b] = D_a applied to the b-th gradient
/// component.
pub fn covariant_hessian(
    m: &DiscretizedManifold,
    p: &MagneticPotential,
    f: &[Complex64],
) -> Result<Vec<[[Complex64; 2]; 2]>, AnalysisError> {
    let st = build_stencil(m, p)?;
    if f.len() != m.vertex_count() {
        return Err(AnalysisError::DimensionMismatch { got: f.len(), expected: m.vertex_count() });
    }
    let grad = covariant_gradient(m, p, f)?;
    let mut out = vec![[[Complex64::default(); 2]; 2]; f.len()];
    for b in 0..st.dims {
        let comp: Vec<Complex64> = grad.iter().map(|g| g[b]).collect();
        for a in 0..st.dims {
            for (o, d) in out.iter_mut().zip(st.derivative(&comp, a)) {
                o[a][b] = d;
            }
        }
    }
    Ok(out)
}

/// The five integral terms of the integrated Bochner identity, stored with
/// the signs they carry in the identity; their sum is the residual.
#[derive(Debug, Clone, Serialize)]
pub struct BochnerResidual {
    pub hess_term: f64,
    pub ric_term: f64,
    pub mixed_term: f64,
    pub field_density_term: f64,
    pub field_gradient_term: f64,
    pub residual: f64,
    pub resolution: f64,
}

/// Per-vertex field density |d alpha| averaged from the incident faces.
fn vertex_field_density(
    m: &DiscretizedManifold,
    p: &MagneticPotential,
) -> Result<Vec<f64>, AnalysisError> {
    let fluxes = face_fluxes(m, p)?;
    let mut weight = vec![0.0; m.vertex_count()];
    let mut acc = vec![0.0; m.vertex_count()];
    for (f, face) in m.faces.iter().enumerate() {
        let density = fluxes[f] / face.area;
        let verts = m.face_vertex_loop(face);
        let w = face.area / verts.len() as f64;
        for v in verts {
            acc[v] += w * density;
            weight[v] += w;
        }
    }
    Ok(acc
        .iter()
        .zip(&weight)
        .map(|(a, w)| if *w > 0.0 { a / w } else { 0.0 })
        .collect())
}

/// Evaluate the integrated Bochner identity at the given test function.
///
/// In the continuum the five terms sum to zero on a closed manifold; the
/// discrete residual measures the O(h^2) stencil error.
pub fn verify_integrated_bochner(
    m: &DiscretizedManifold,
    p: &MagneticPotential,
    f: &[Complex64],
) -> Result<BochnerResidual, AnalysisError> {
    let grad = covariant_gradient(m, p, f)?;
    let hess = covariant_hessian(m, p, f)?;
    let op = assemble(m, p)?;
    let lap = op.apply(f)?;
    let grad_lap = covariant_gradient(m, p, &lap)?;
    let density = vertex_field_density(m, p)?;
    let k_exact = m.ricci_lower_bound;

    let mut hess_term = 0.0;
    let mut ric_term = 0.0;
    let mut mixed_term = 0.0;
    let mut field_density_term = 0.0;
    let mut field_gradient_term = 0.0;
    for u in 0..m.vertex_count() {
        let mu = m.vertex_volume[u];
        let g = grad[u];
        hess_term += mu
            * (hess[u][0][0].norm_sqr()
                + hess[u][0][1].norm_sqr()
                + hess[u][1][0].norm_sqr()
                + hess[u][1][1].norm_sqr());
        ric_term += mu * k_exact * (g[0].norm_sqr() + g[1].norm_sqr());
        mixed_term -=
            mu * (grad_lap[u][0] * g[0].conj() + grad_lap[u][1] * g[1].conj()).re;
        field_density_term -= mu * f[u].norm_sqr() * density[u] * density[u];
        // Re(i F (g_x conj(g_y) - g_y conj(g_x))) = -2 F Im(g_x conj(g_y))
        field_gradient_term +=
            mu * (Complex64::i() * density[u] * (g[0] * g[1].conj() - g[1] * g[0].conj())).re;
    }
    let residual =
        hess_term + ric_term + mixed_term + field_density_term + field_gradient_term;
    Ok(BochnerResidual {
        hess_term,
        ric_term,
        mixed_term,
        field_density_term,
        field_gradient_term,
        residual,
        resolution: m.max_spacing(),
    })
}

/// Empirical convergence order from residuals at h and h/2.
pub fn refinement_order(coarse: &BochnerResidual, fine: &BochnerResidual) -> f64 {
    (coarse.residual.abs() / fine.residual.abs()).log2()
}

#[derive(Debug, Clone, Serialize)]
pub struct BochnerStudy {
    pub coarse: BochnerResidual,
    pub fine: BochnerResidual,
    pub order: f64,
}

/// Refinement scenarios pinned by the verification suite.
#[derive(Debug, Clone)]
pub enum BochnerScenario {
    /// alpha = A dx, f = first Fourier mode.
    CircleConstant { l: f64, a: f64, n: usize },
    /// alpha = A dx + B dy, seeded band-limited random f shared across
    /// resolutions.
    TorusConstant { l1: f64, l2: f64, a: f64, b: f64, n1: usize, n2: usize },
    /// Uniform flux, f = ground eigenvector (recomputed per resolution).
    TorusFlux { l1: f64, l2: f64, quanta: i64, n1: usize, n2: usize },
}

fn fourier_field(m: &DiscretizedManifold, coeffs: &[(i64, i64, Complex64)]) -> Vec<Complex64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    match m.structure {
        ModelStructure::Circle { n, .. } => (0..n)
            .map(|u| {
                let x = u as f64 / n as f64;
                coeffs
                    .iter()
                    .map(|&(k, _, c)| c * Complex64::from_polar(1.0, two_pi * k as f64 * x))
                    .sum()
            })
            .collect(),
        ModelStructure::Torus { n1, n2, .. } => (0..n1 * n2)
            .map(|u| {
                let x = (u % n1) as f64 / n1 as f64;
                let y = (u / n1) as f64 / n2 as f64;
                coeffs
                    .iter()
                    .map(|&(k, l, c)| {
                        c * Complex64::from_polar(1.0, two_pi * (k as f64 * x + l as f64 * y))
                    })
                    .sum()
            })
            .collect(),
        ModelStructure::Sphere { .. } => unreachable!("scenarios are grid models"),
    }
}

/// Smooth random field: Fourier modes up to `max_mode` per axis with
/// amplitudes decaying as 1/(1+|k|^2).
fn band_limited_coeffs(
    max_mode_x: i64,
    max_mode_y: i64,
    rng: &mut ChaCha8Rng,
) -> Vec<(i64, i64, Complex64)> {
    let mut coeffs = Vec::new();
    for k in -max_mode_x..=max_mode_x {
        for l in -max_mode_y..=max_mode_y {
            let amp = 1.0 / (1.0 + (k * k + l * l) as f64);
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amp;
            coeffs.push((k, l, c));
        }
    }
    coeffs
}

pub fn bochner_refinement(
    scenario: &BochnerScenario,
    seed: u64,
) -> Result<BochnerStudy, AnalysisError> {
    let run = |refine: usize| -> Result<BochnerResidual, AnalysisError> {
        match *scenario {
            BochnerScenario::CircleConstant { l, a, n } => {
                let m = crate::geometry::circle_grid(l, n * refine)
                    .expect("scenario parameters are valid");
                let p = crate::magnetic::circle_constant(&m, a)?;
                let f = fourier_field(&m, &[(1, 0, Complex64::new(1.0, 0.0))]);
                verify_integrated_bochner(&m, &p, &f)
            }
            BochnerScenario::TorusConstant { l1, l2, a, b, n1, n2 } => {
                let m = crate::geometry::torus_grid(l1, l2, n1 * refine, n2 * refine)
                    .expect("scenario parameters are valid");
                let p = crate::magnetic::torus_constant(&m, a, b)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let coeffs =
                    band_limited_coeffs((n1 as i64 / 8).max(1), (n2 as i64 / 8).max(1), &mut rng);
                let f = fourier_field(&m, &coeffs);
                verify_integrated_bochner(&m, &p, &f)
            }
            BochnerScenario::TorusFlux { l1, l2, quanta, n1, n2 } => {
                // Total flux 2 pi m fixes the field density independently of
                // the grid, so the quanta are not rescaled under refinement.
                let m = crate::geometry::torus_grid(l1, l2, n1 * refine, n2 * refine)
                    .expect("scenario parameters are valid");
                let p = crate::magnetic::torus_uniform_flux(&m, quanta)?;
                let op = assemble(&m, &p)?;
                let opts = SolverOptions { seed, ..Default::default() };
                let s = smallest_k(&op, 1, &opts)?;
                verify_integrated_bochner(&m, &p, &s.eigenvectors[0])
            }
        }
    };
    let coarse = run(1)?;
    let fine = run(2)?;
    let order = refinement_order(&coarse, &fine);
    Ok(BochnerStudy { coarse, fine, order })
}

/// Dense propagator e^{-t M^{-1} A} via scaling-and-squaring on the
/// similarity-symmetrized matrix.
pub struct HeatPropagator {
    exp_scaled: DMatrix<Complex64>,
    sqrt_mass: Vec<f64>,
    pub t: f64,
}

impl HeatPropagator {
    pub fn new(op: &MagneticOperator, t: f64) -> Result<Self, AnalysisError> {
        let n = op.size();
        if n > HEAT_DENSE_MAX {
            return Err(AnalysisError::TooLarge { n, max: HEAT_DENSE_MAX });
        }
        if t < 0.0 {
            return Err(AnalysisError::NegativeTime(t));
        }
        let sqrt_mass: Vec<f64> = op.mass().iter().map(|mu| mu.sqrt()).collect();
        let mut s = DMatrix::<Complex64>::zeros(n, n);
        for u in 0..n {
            s[(u, u)] = Complex64::new(op.stiffness_diagonal()[u] / op.mass()[u], 0.0);
            for &(v, a) in &op.off_diagonal_rows()[u] {
                s[(u, v)] = a / Complex64::new(sqrt_mass[u] * sqrt_mass[v], 0.0);
            }
        }
        let exp_scaled = expm(&(s * Complex64::new(-t, 0.0)));
        Ok(HeatPropagator { exp_scaled, sqrt_mass, t })
    }

    pub fn apply(&self, f: &[Complex64]) -> Result<Vec<Complex64>, AnalysisError> {
        let n = self.sqrt_mass.len();
        if f.len() != n {
            return Err(AnalysisError::DimensionMismatch { got: f.len(), expected: n });
        }
        let y = nalgebra::DVector::from_iterator(
            n,
            f.iter().zip(&self.sqrt_mass).map(|(z, s)| z * *s),
        );
        let out = &self.exp_scaled * y;
        Ok((0..n).map(|u| out[u] / self.sqrt_mass[u]).collect())
    }
}

/// Heat-semigroup action on one vector.
pub fn heat_semigroup(
    op: &MagneticOperator,
    t: f64,
    f: &[Complex64],
) -> Result<Vec<Complex64>, AnalysisError> {
    HeatPropagator::new(op, t)?.apply(f)
}

/// Matrix exponential by Pade(13) with scaling and squaring.
fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let theta13 = 5.371920351148152;
    let norm1 = (0..n)
        .map(|c| a.column(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm1 > theta13 { (norm1 / theta13).log2().ceil() as u32 } else { 0 };
    let a_scaled = a / Complex64::new(2f64.powi(s as i32), 0.0);

    let b: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let id = DMatrix::<Complex64>::identity(n, n);
    let a2 = &a_scaled * &a_scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let c = |x: f64| Complex64::new(x, 0.0);
    let u_inner = &a6 * c(b[13]) + &a4 * c(b[11]) + &a2 * c(b[9]);
    let u = &a_scaled
        * (&a6 * u_inner + &a6 * c(b[7]) + &a4 * c(b[5]) + &a2 * c(b[3]) + &id * c(b[1]));
    let v_inner = &a6 * c(b[12]) + &a4 * c(b[10]) + &a2 * c(b[8]);
    let v = &a6 * v_inner + &a6 * c(b[6]) + &a4 * c(b[4]) + &a2 * c(b[2]) + &id * c(b[0]);

    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut r = lhs.lu().solve(&rhs).expect("Pade denominator is nonsingular");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatCheck {
    pub t_values: Vec<f64>,
    /// Max signed violation of each inequality per t (positive = violated by
    /// that amount before tolerance).
    pub gradient_bound: Vec<f64>,
    pub variance_bound: Vec<f64>,
    pub l1_contraction: Vec<f64>,
    pub samples: usize,
    pub tol: f64,
    pub holds: bool,
}

/// Check the three heat-semigroup inequalities on seeded band-limited
/// samples: (i) |grad P_t^a f|^2 <= e^{2Kt} P_t |grad f|^2 pointwise,
/// (ii) P_t|f|^2 - |P_t^a f|^2 >= c_K(t) |grad P_t^a f|^2 pointwise,
/// (iii) ||f - P_t^a f||_1 <= 2 sqrt(t) ||grad f||_1 in weighted L1.
pub fn verify_heat_lemma(
    m: &DiscretizedManifold,
    p: &MagneticPotential,
    k_ric: f64,
    t_grid: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<HeatCheck, AnalysisError> {
    if t_grid.is_empty() {
        return Err(AnalysisError::EmptyGrid("t"));
    }
    if n_samples == 0 {
        return Err(AnalysisError::EmptyGrid("sample"));
    }
    let op_alpha = assemble(m, p)?;
    let p_zero = zero_potential(m);
    let op_zero = assemble(m, &p_zero)?;
    let nv = m.vertex_count();
    let h = m.max_spacing();
    let tol = 1e-6 + 10.0 * h * h;

    let (mx, my) = match m.structure {
        ModelStructure::Circle { n, .. } => ((n as i64 / 8).max(1), 0),
        ModelStructure::Torus { n1, n2, .. } => ((n1 as i64 / 8).max(1), (n2 as i64 / 8).max(1)),
        ModelStructure::Sphere { .. } => return Err(AnalysisError::UnsupportedModel),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Vec<Complex64>> = (0..n_samples)
        .map(|_| fourier_field(m, &band_limited_coeffs(mx, my, &mut rng)))
        .collect();

    let grad_norm_sq = |p: &MagneticPotential, f: &[Complex64]| -> Result<Vec<f64>, AnalysisError> {
        Ok(covariant_gradient(m, p, f)?
            .iter()
            .map(|g| g[0].norm_sqr() + g[1].norm_sqr())
            .collect())
    };

    let mut gradient_bound = Vec::with_capacity(t_grid.len());
    let mut variance_bound = Vec::with_capacity(t_grid.len());
    let mut l1_contraction = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let prop_a = HeatPropagator::new(&op_alpha, t)?;
        let prop_z = HeatPropagator::new(&op_zero, t)?;
        let c_k = if k_ric > 0.0 { (1.0 - (-2.0 * k_ric * t).exp()) / k_ric } else { 2.0 * t };
        let mut v1 = f64::NEG_INFINITY;
        let mut v2 = f64::NEG_INFINITY;
        let mut v3 = f64::NEG_INFINITY;
        for f in &samples {
            let ptaf = prop_a.apply(f)?;
            let gf_sq = grad_norm_sq(p, f)?;
            let g_ptaf_sq = grad_norm_sq(p, &ptaf)?;
            let gf_sq_c: Vec<Complex64> =
                gf_sq.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            let pt_gf_sq = prop_z.apply(&gf_sq_c)?;
            let f_sq: Vec<Complex64> =
                f.iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect();
            let pt_f_sq = prop_z.apply(&f_sq)?;
            let scale = (-2.0 * k_ric * t).exp().recip();
            for u in 0..nv {
                v1 = v1.max(g_ptaf_sq[u] - scale * pt_gf_sq[u].re);
                v2 = v2.max(c_k * g_ptaf_sq[u] - (pt_f_sq[u].re - ptaf[u].norm_sqr()));
            }
            let diff_l1: f64 = f
                .iter()
                .zip(&ptaf)
                .zip(&m.vertex_volume)
                .map(|((a, b), mu)| mu * (a - b).norm())
                .sum();
            let grad_l1: f64 = gf_sq
                .iter()
                .zip(&m.vertex_volume)
                .map(|(g2, mu)| mu * g2.sqrt())
                .sum();
            v3 = v3.max(diff_l1 - 2.0 * t.sqrt() * grad_l1);
        }
        gradient_bound.push(v1);
        variance_bound.push(v2);
        l1_contraction.push(v3);
    }
    let worst = gradient_bound
        .iter()
        .chain(&variance_bound)
        .chain(&l1_contraction)
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    Ok(HeatCheck {
        t_values: t_grid.to_vec(),
        gradient_bound,
        variance_bound,
        l1_contraction,
        samples: n_samples,
        tol,
        holds: worst <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{circle_grid, icosphere, torus_grid};
    use crate::magnetic::{circle_constant, gauge_transform, GaugeFunction};
    use std::f64::consts::PI;

    fn mode_field(n: usize, k: f64) -> Vec<Complex64> {
        (0..n)
            .map(|u| Complex64::from_polar(1.0, k * 2.0 * PI * u as f64 / n as f64))
            .collect()
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let m = torus_grid(2.0 * PI, 2.0 * PI, 8, 8).unwrap();
        let p = zero_potential(&m);
        let f = vec![Complex64::new(3.0, -1.0); m.vertex_count()];
        for g in covariant_gradient(&m, &p, &f).unwrap() {
            assert!(g[0].norm() < 1e-14 && g[1].norm() < 1e-14);
        }
        for h in covariant_hessian(&m, &p, &f).unwrap() {
            assert!(h[0][0].norm() < 1e-14 && h[1][1].norm() < 1e-14);
        }
    }

    #[test]
    fn gradient_of_fourier_mode_second_order() {
        let errs: Vec<f64> = [64usize, 128]
            .iter()
            .map(|&n| {
                let m = circle_grid(2.0 * PI, n).unwrap();
                let p = zero_potential(&m);
                let f = mode_field(n, 1.0);
                let g = covariant_gradient(&m, &p, &f).unwrap();
                f.iter()
                    .zip(&g)
                    .map(|(fv, gv)| (gv[0] - Complex64::i() * fv).norm())
                    .fold(0.0, f64::max)
            })
            .collect();
        // central-difference error ~ k^3 h^2 / 6
        assert!(errs[0] < 2e-3);
        let ratio = errs[0] / errs[1];
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn gradient_modulus_gauge_covariant() {
        let n = 64;
        let m = circle_grid(2.0 * PI, n).unwrap();
        let p = circle_constant(&m, 0.7).unwrap();
        let f = mode_field(n, 2.0);
        let g = covariant_gradient(&m, &p, &f).unwrap();
        // |D^alpha f| must be unchanged by a global phase rotation of f.
        let rotated: Vec<Complex64> =
            f.iter().map(|z| z * Complex64::from_polar(1.0, 1.234)).collect();
        let gr = covariant_gradient(&m, &p, &rotated).unwrap();
        for (a, b) in g.iter().zip(&gr) {
            assert!((a[0].norm() - b[0].norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_unsupported() {
        let m = icosphere(2).unwrap();
        let p = zero_potential(&m);
        let f = vec![Complex64::default(); m.vertex_count()];
        assert!(matches!(
            covariant_gradient(&m, &p, &f),
            Err(AnalysisError::UnsupportedModel)
        ));
    }

    #[test]
    fn bochner_circle_mode_refines_at_order_two() {
        let study = bochner_refinement(
            &BochnerScenario::CircleConstant { l: 2.0 * PI, a: 0.5, n: 128 },
            7,
        )
        .unwrap();
        assert!(study.coarse.residual.abs() < 0.1);
        assert!((1.5..2.5).contains(&study.order), "order {}", study.order);
        // Flat trivial-field reduction: hessian term balances the mixed term.
        assert!(
            (study.coarse.hess_term + study.coarse.mixed_term - study.coarse.residual).abs()
                < 1e-12 * study.coarse.hess_term.abs().max(1.0)
        );
        assert_eq!(study.coarse.ric_term, 0.0);
        assert_eq!(study.coarse.field_density_term, 0.0);
    }

    #[test]
    fn expm_matches_scalar_and_semigroup() {
        let m = circle_grid(2.0 * PI, 32).unwrap();
        let p = circle_constant(&m, 0.5).unwrap();
        let op = assemble(&m, &p).unwrap();
        let f = mode_field(32, 1.0);

        // t = 0 is the identity.
        let id = heat_semigroup(&op, 0.0, &f).unwrap();
        for (a, b) in id.iter().zip(&f) {
            assert!((a - b).norm() < 1e-12);
        }

        // On an exact discrete eigenvector the semigroup is scalar decay.
        let s = smallest_k(&op, 2, &SolverOptions::default()).unwrap();
        let x = &s.eigenvectors[0];
        let lam = s.eigenvalues[0];
        let flowed = heat_semigroup(&op, 0.7, x).unwrap();
        let decay = (-0.7 * lam).exp();
        for (a, b) in flowed.iter().zip(x) {
            assert!((a - b * Complex64::new(decay, 0.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn heat_semigroup_properties() {
        let m = circle_grid(2.0 * PI, 48).unwrap();
        let p = circle_constant(&m, 0.3).unwrap();
        let op = assemble(&m, &p).unwrap();
        let f = mode_field(48, 1.0);
        let g = mode_field(48, 2.0);

        // Composition P_{t+s} = P_t P_s.
        let once = heat_semigroup(&op, 0.9, &f).unwrap();
        let twice = heat_semigroup(&op, 0.4, &heat_semigroup(&op, 0.5, &f).unwrap()).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).norm() < 1e-9);
        }

        // Self-adjointness in L^2(mu).
        let pf = heat_semigroup(&op, 0.6, &f).unwrap();
        let pg = heat_semigroup(&op, 0.6, &g).unwrap();
        let ip = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
            a.iter()
                .zip(b)
                .zip(&m.vertex_volume)
                .map(|((x, y), mu)| x * y.conj() * *mu)
                .sum()
        };
        assert!((ip(&pf, &g) - ip(&f, &pg)).norm() < 1e-10);

        // Trivial potential preserves constants.
        let p0 = zero_potential(&m);
        let op0 = assemble(&m, &p0).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); 48];
        let flowed = heat_semigroup(&op0, 2.0, &ones).unwrap();
        for z in flowed {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn heat_flow_gauge_covariant() {
        let n = 40;
        let m = circle_grid(2.0 * PI, n).unwrap();
        let p = circle_constant(&m, 0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tau = GaugeFunction { angles: (0..n).map(|_| rng.gen_range(-PI..PI)).collect() };
        let q = gauge_transform(&m, &p, &tau).unwrap();
        let op_p = assemble(&m, &p).unwrap();
        let op_q = assemble(&m, &q).unwrap();
        let f = mode_field(n, 1.0);
        // theta' = theta + psi_v - psi_u realizes A' = conj(tau) A tau, so
        // P'_t(conj(tau) f) = conj(tau) P_t f and the moduli agree pointwise.
        let f_rot: Vec<Complex64> = f
            .iter()
            .zip(&tau.angles)
            .map(|(z, a)| z * Complex64::from_polar(1.0, -a))
            .collect();
        let lhs = heat_semigroup(&op_q, 0.8, &f_rot).unwrap();
        let rhs = heat_semigroup(&op_p, 0.8, &f).unwrap();
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a.norm() - b.norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn heat_lemma_on_circle_mode() {
        let m = circle_grid(2.0 * PI, 100).unwrap();
        let p = circle_constant(&m, 0.5).unwrap();
        let check = verify_heat_lemma(&m, &p, 0.0, &[0.0, 1.0], 4, 42).unwrap();
        assert!(check.holds, "violations: {:?} {:?} {:?}",
            check.gradient_bound, check.variance_bound, check.l1_contraction);
        // t = 0: all inequalities are equalities/trivial.
        assert!(check.gradient_bound[0].abs() < 1e-9);
        assert!(check.variance_bound[0].abs() < 1e-9);
        assert!(check.l1_contraction[0] <= 1e-12);
    }

    #[test]
    fn heat_errors() {
        let m = circle_grid(2.0 * PI, 16).unwrap();
        let op = assemble(&m, &zero_potential(&m)).unwrap();
        let f = vec![Complex64::default(); 16];
        assert!(matches!(
            heat_semigroup(&op, -1.0, &f),
            Err(AnalysisError::NegativeTime(_))
        ));
        let big = circle_grid(2.0 * PI, 500).unwrap();
        let op_big = assemble(&big, &zero_potential(&big)).unwrap();
        assert!(matches!(
            HeatPropagator::new(&op_big, 1.0),
            Err(AnalysisError::TooLarge { .. })
        ));
        let p = zero_potential(&m);
        assert!(matches!(
            verify_heat_lemma(&m, &p, 0.0, &[], 4, 1),
            Err(AnalysisError::EmptyGrid("t"))
        ));
    }
}
