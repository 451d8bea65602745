//! Assembly of the discrete magnetic Laplacian as a Hermitian pencil (A, M).
//!
//! A_uu = sum of incident conductances, A_uv = -w_e e^{i theta_uv}, and M is
//! the diagonal of vertex volumes. The generalized problem A x = lambda M x
//! realizes the operator in L^2(mu); the quadratic form is the exact
//! sum-of-squares sum_e w_e |f_u - e^{i theta_uv} f_v|^2.

use num_complex::Complex64;
use std::io::{self, Write};
use thiserror::Error;

use crate::geometry::DiscretizedManifold;
use crate::magnetic::{MagneticError, MagneticPotential};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error(transparent)]
    Magnetic(#[from] MagneticError),
    #[error("vector length {got} does not match operator size {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("rayleigh quotient of the zero vector")]
    ZeroVector,
}

/// Hermitian stiffness matrix plus diagonal mass, with the edge data kept
/// alongside for exact energy evaluation.
#[derive(Debug, Clone)]
pub struct MagneticOperator {
    size: usize,
    diag: Vec<f64>,
    /// Off-diagonal entries per row, sorted by column index.
    rows: Vec<Vec<(usize, Complex64)>>,
    mass: Vec<f64>,
    /// (u, v, w_e, theta_uv) per edge, for the sum-of-squares form.
    edge_terms: Vec<(usize, usize, f64, f64)>,
}

pub fn assemble(
    m: &DiscretizedManifold,
    p: &MagneticPotential,
) -> Result<MagneticOperator, OperatorError> {
    p.check_host(m)?;
    let n = m.vertex_count();
    let mut diag = vec![0.0; n];
    let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); n];
    let mut edge_terms = Vec::with_capacity(m.edge_count());
    for (e, edge) in m.edges.iter().enumerate() {
        let (u, v) = edge.endpoints;
        let w = edge.conductance;
        let theta = p.edge_phase[e];
        let off = -w * Complex64::from_polar(1.0, theta);
        diag[u] += w;
        diag[v] += w;
        // The (v,u) entry is the exact conjugate of the computed (u,v) entry,
        // so A = A* holds bitwise.
        rows[u].push((v, off));
        rows[v].push((u, off.conj()));
        edge_terms.push((u, v, w, theta));
    }
    for row in &mut rows {
        row.sort_by_key(|&(c, _)| c);
    }
    Ok(MagneticOperator { size: n, diag, rows, mass: m.vertex_volume.clone(), edge_terms })
}

impl MagneticOperator {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn stiffness_diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn off_diagonal_rows(&self) -> &[Vec<(usize, Complex64)>] {
        &self.rows
    }

    fn check_len(&self, f: &[Complex64]) -> Result<(), OperatorError> {
        if f.len() == self.size {
            Ok(())
        } else {
            Err(OperatorError::DimensionMismatch { got: f.len(), expected: self.size })
        }
    }

    /// A f (stiffness only).
    pub fn apply_stiffness(&self, f: &[Complex64], out: &mut [Complex64]) {
        for u in 0..self.size {
            let mut acc = f[u] * self.diag[u];
            for &(v, a) in &self.rows[u] {
                acc += a * f[v];
            }
            out[u] = acc;
        }
    }

    /// The operator action M^{-1} A f, i.e. Delta^alpha f at each vertex.
    pub fn apply(&self, f: &[Complex64]) -> Result<Vec<Complex64>, OperatorError> {
        self.check_len(f)?;
        let mut out = vec![Complex64::default(); self.size];
        self.apply_stiffness(f, &mut out);
        for (o, mu) in out.iter_mut().zip(&self.mass) {
            *o /= *mu;
        }
        Ok(out)
    }

    /// f* A f as the exact nonnegative edge sum.
    pub fn energy(&self, f: &[Complex64]) -> Result<f64, OperatorError> {
        self.check_len(f)?;
        let mut acc = 0.0;
        for &(u, v, w, theta) in &self.edge_terms {
            let d = f[u] - Complex64::from_polar(1.0, theta) * f[v];
            acc += w * d.norm_sqr();
        }
        Ok(acc)
    }

    /// f* A f / f* M f.
    pub fn rayleigh(&self, f: &[Complex64]) -> Result<f64, OperatorError> {
        self.check_len(f)?;
        let mass_norm: f64 = f.iter().zip(&self.mass).map(|(z, mu)| mu * z.norm_sqr()).sum();
        if mass_norm == 0.0 {
            return Err(OperatorError::ZeroVector);
        }
        Ok(self.energy(f)? / mass_norm)
    }

    /// Euclidean residual norm ||A x - lambda M x|| / ||x||.
    pub fn residual(&self, lambda: f64, x: &[Complex64]) -> f64 {
        let mut ax = vec![Complex64::default(); self.size];
        self.apply_stiffness(x, &mut ax);
        let mut num = 0.0;
        let mut den = 0.0;
        for u in 0..self.size {
            num += (ax[u] - x[u] * (lambda * self.mass[u])).norm_sqr();
            den += x[u].norm_sqr();
        }
        (num / den).sqrt()
    }

    /// Stiffness matrix in MatrixMarket coordinate complex Hermitian format
    /// (lower triangle, 1-based indices).
    pub fn export_matrix_market(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate complex hermitian")?;
        let lower: usize = self
            .rows
            .iter()
            .enumerate()
            .map(|(r, row)| row.iter().filter(|&&(c, _)| c < r).count())
            .sum();
        writeln!(w, "{} {} {}", self.size, self.size, self.size + lower)?;
        for r in 0..self.size {
            writeln!(w, "{} {} {:.17e} {:.17e}", r + 1, r + 1, self.diag[r], 0.0)?;
            for &(c, a) in &self.rows[r] {
                if c < r {
                    writeln!(w, "{} {} {:.17e} {:.17e}", r + 1, c + 1, a.re, a.im)?;
                }
            }
        }
        Ok(())
    }
}
