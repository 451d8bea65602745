//! Smallest eigenpairs of the Hermitian pencil (A, M).
//!
//! Both paths work on the similarity-symmetrized S = M^{-1/2} A M^{-1/2},
//! whose Euclidean geometry matches the M-inner product of the pencil:
//! dense Hermitian diagonalization below `dense_threshold`, Lanczos with
//! full reorthogonalization and locking/deflation restarts above it.
//! Eigenvectors are returned M-orthonormal; residuals are the Euclidean
//! ||A x - lambda M x|| / ||x||.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::io::{self, Write};
use thiserror::Error;

use crate::operator::MagneticOperator;

pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("requested {k} eigenpairs from an operator of size {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("k must be at least 1")]
    KZero,
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("no convergence after {iterations} iterations; best residuals {best_residuals:?}")]
    NonConvergence { iterations: usize, best_residuals: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    Dense,
    Lanczos,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Residual tolerance ||A x - lambda M x|| / ||x||.
    pub tol: f64,
    pub seed: u64,
    /// Problem sizes up to this use dense diagonalization.
    pub dense_threshold: usize,
    /// Cap on the Lanczos subspace dimension per sweep.
    pub max_subspace: usize,
    /// Cap on locking/restart sweeps.
    pub max_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            seed: DEFAULT_SEED,
            dense_threshold: 1500,
            max_subspace: 500,
            max_sweeps: 64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Ascending eigenvalues of the pencil.
    pub eigenvalues: Vec<f64>,
    /// M-orthonormal eigenvectors, one per eigenvalue.
    pub eigenvectors: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub method: SolverMethod,
}

impl Spectrum {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "eigenvalues": self.eigenvalues,
            "residuals": self.residuals,
            "iterations": self.iterations,
            "method": self.method,
        })
    }

    /// Binary eigenvector dump: magic "MSPECV01", then n and k as little-endian
    /// u64, then column-major little-endian f64 pairs (re, im).
    pub fn write_eigenvectors_binary(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(b"MSPECV01")?;
        let n = self.eigenvectors.first().map_or(0, |v| v.len());
        w.write_all(&(n as u64).to_le_bytes())?;
        w.write_all(&(self.eigenvectors.len() as u64).to_le_bytes())?;
        for col in &self.eigenvectors {
            for z in col {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Index ranges (inclusive, 0-based) of eigenvalues separated by gaps larger
/// than `gap_tol * max(1, lambda)`.
pub fn degenerate_groups(s: &Spectrum, gap_tol: f64) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    if s.eigenvalues.is_empty() {
        return groups;
    }
    let mut start = 0;
    for i in 1..s.eigenvalues.len() {
        let gap = s.eigenvalues[i] - s.eigenvalues[i - 1];
        if gap > gap_tol * s.eigenvalues[i].abs().max(1.0) {
            groups.push((start, i - 1));
            start = i;
        }
    }
    groups.push((start, s.eigenvalues.len() - 1));
    groups
}

pub const DEFAULT_GAP_TOL: f64 = 1e-6;

/// Scaled sparse operator S = M^{-1/2} A M^{-1/2}.
struct ScaledOperator {
    diag: Vec<f64>,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl ScaledOperator {
    fn new(op: &MagneticOperator) -> Self {
        let n = op.size();
        let inv_sqrt: Vec<f64> = op.mass().iter().map(|mu| 1.0 / mu.sqrt()).collect();
        let diag = (0..n).map(|u| op.stiffness_diagonal()[u] / op.mass()[u]).collect();
        let rows = op
            .off_diagonal_rows()
            .iter()
            .enumerate()
            .map(|(u, row)| {
                row.iter().map(|&(v, a)| (v, a * (inv_sqrt[u] * inv_sqrt[v]))).collect()
            })
            .collect();
        ScaledOperator { diag, rows }
    }

    fn apply(&self, f: &[Complex64], out: &mut [Complex64]) {
        for u in 0..f.len() {
            let mut acc = f[u] * self.diag[u];
            for &(v, a) in &self.rows[u] {
                acc += a * f[v];
            }
            out[u] = acc;
        }
    }
}

pub fn smallest_k(
    op: &MagneticOperator,
    k: usize,
    opts: &SolverOptions,
) -> Result<Spectrum, EigenError> {
    let n = op.size();
    if k == 0 {
        return Err(EigenError::KZero);
    }
    if k > n {
        return Err(EigenError::KTooLarge { k, n });
    }
    if !(opts.tol > 0.0) {
        return Err(EigenError::BadTolerance(opts.tol));
    }
    let mut spectrum = if n <= opts.dense_threshold {
        dense_path(op, k, opts.tol)?
    } else {
        lanczos_path(op, k, opts)?
    };
    // Recompute residuals against the sparse pencil and enforce the contract.
    spectrum.residuals = spectrum
        .eigenvalues
        .iter()
        .zip(&spectrum.eigenvectors)
        .map(|(&l, x)| op.residual(l, x))
        .collect();
    if spectrum.residuals.iter().any(|&r| r > opts.tol) {
        return Err(EigenError::NonConvergence {
            iterations: spectrum.iterations,
            best_residuals: spectrum.residuals,
        });
    }
    Ok(spectrum)
}

fn dense_path(op: &MagneticOperator, k: usize, tol: f64) -> Result<Spectrum, EigenError> {
    let n = op.size();
    let scaled = ScaledOperator::new(op);
    let mut s = DMatrix::<Complex64>::zeros(n, n);
    for u in 0..n {
        s[(u, u)] = Complex64::new(scaled.diag[u], 0.0);
        for &(v, a) in &scaled.rows[u] {
            s[(u, v)] = a;
        }
    }
    let eig = SymmetricEigen::new(s.clone());
    // nalgebra's eigenvalue/column pairing can be scrambled within
    // near-degenerate clusters of complex Hermitian matrices, so use only the
    // columns and recompute each column's eigenvalue as a Rayleigh quotient
    // against the sparse scaled operator.
    let mut col_values = Vec::with_capacity(n);
    let mut sy = vec![Complex64::default(); n];
    let mut y = vec![Complex64::default(); n];
    for i in 0..n {
        for (u, z) in y.iter_mut().enumerate() {
            *z = eig.eigenvectors[(u, i)];
        }
        scaled.apply(&y, &mut sy);
        let num = dot(&y, &sy).re;
        let den: f64 = y.iter().map(|z| z.norm_sqr()).sum();
        col_values.push(num / den);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| col_values[a].total_cmp(&col_values[b]));

    let mu_max = op.mass().iter().fold(0.0f64, |a, &b| a.max(b));
    let op_scale = scaled.diag.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
    let y_target = 0.5 * tol / mu_max;

    let mut selected: Vec<(f64, Vec<Complex64>)> = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let mut vec_y: Vec<Complex64> =
            (0..n).map(|u| eig.eigenvectors[(u, idx)]).collect();
        let mut lambda = col_values[idx];
        // The backend occasionally leaves ~1e-7 cross-contamination in a
        // column; one shifted inverse-iteration step restores it.
        let mut res = y_residual(&scaled, lambda, &mut sy, &vec_y);
        let mut shift = 1e-9 * op_scale;
        let mut tries = 0;
        while res > y_target && tries < 3 {
            let mut shifted = s.clone();
            for u in 0..n {
                shifted[(u, u)] -= Complex64::new(lambda + shift, 0.0);
            }
            let rhs = nalgebra::DVector::from_column_slice(&vec_y);
            if let Some(z) = shifted.lu().solve(&rhs) {
                let zn = z.norm();
                if zn > 0.0 {
                    let candidate: Vec<Complex64> =
                        (0..n).map(|u| z[u] / Complex64::new(zn, 0.0)).collect();
                    scaled.apply(&candidate, &mut sy);
                    let lam_new = dot(&candidate, &sy).re;
                    let res_new = y_residual(&scaled, lam_new, &mut sy, &candidate);
                    if res_new < res {
                        vec_y = candidate;
                        lambda = lam_new;
                        res = res_new;
                    }
                }
            }
            shift *= 10.0;
            tries += 1;
        }
        selected.push((lambda, vec_y));
    }

    // Restore orthonormality (polishing within a degenerate cluster keeps the
    // span but may tilt individual vectors).
    for i in 0..selected.len() {
        let (left, right) = selected.split_at_mut(i);
        let (_, ref mut yi) = right[0];
        for (_, yj) in left.iter() {
            let c = dot(yj, yi);
            axpy(yi, -c, yj);
        }
        let nn = norm(yi);
        if nn > 0.0 {
            for z in yi.iter_mut() {
                *z /= nn;
            }
        }
        scaled.apply(yi, &mut sy);
        right[0].0 = dot(yi, &sy).re;
    }
    selected.sort_by(|a, b| a.0.total_cmp(&b.0));

    let inv_sqrt: Vec<f64> = op.mass().iter().map(|mu| 1.0 / mu.sqrt()).collect();
    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenvectors = Vec::with_capacity(k);
    for (lambda, vec_y) in selected {
        eigenvalues.push(lambda);
        eigenvectors.push(vec_y.iter().zip(&inv_sqrt).map(|(z, s)| z * *s).collect());
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
        residuals: Vec::new(),
        iterations: 1,
        method: SolverMethod::Dense,
    })
}

fn y_residual(
    scaled: &ScaledOperator,
    lambda: f64,
    workspace: &mut [Complex64],
    y: &[Complex64],
) -> f64 {
    scaled.apply(y, workspace);
    workspace
        .iter()
        .zip(y)
        .map(|(sy, yi)| (sy - yi * lambda).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &mut [Complex64], alpha: Complex64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Remove components of `w` along every vector in `basis` sets (one pass).
fn orthogonalize(w: &mut [Complex64], sets: &[&[Vec<Complex64>]]) {
    for set in sets {
        for v in set.iter() {
            let c = dot(v, w);
            axpy(w, -c, v);
        }
    }
}

fn lanczos_path(
    op: &MagneticOperator,
    k: usize,
    opts: &SolverOptions,
) -> Result<Spectrum, EigenError> {
    let n = op.size();
    let scaled = ScaledOperator::new(op);
    let inv_sqrt: Vec<f64> = op.mass().iter().map(|mu| 1.0 / mu.sqrt()).collect();
    let op_scale = scaled.diag.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    // ||A x - lambda M x|| / ||x|| <= mu_max * ||S y - lambda y|| for
    // x = M^{-1/2} y, so this y-space estimate guarantees the x-space tol.
    let mu_max = op.mass().iter().fold(0.0f64, |a, &b| a.max(b));
    let est_trigger = 0.25 * opts.tol / mu_max;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked_vals: Vec<f64> = Vec::new();
    let mut locked_vecs: Vec<Vec<Complex64>> = Vec::new(); // y-space, orthonormal
    let mut total_iters = 0usize;
    let mut best_residuals: Vec<f64> = Vec::new();
    let mut subspace_cap = opts.max_subspace.min(n);

    // A single Krylov space sees one vector per degenerate eigenspace, so k
    // locked pairs are not enough: sweep with deflation until a fresh start
    // certifies that nothing below the current k-th value remains.
    let mut certified = false;
    let mut sweeps = 0;
    while locked_vals.len() < k || !certified {
        if locked_vals.len() >= k && locked_vecs.len() == n {
            break;
        }
        sweeps += 1;
        if sweeps > opts.max_sweeps {
            return Err(EigenError::NonConvergence {
                iterations: total_iters,
                best_residuals,
            });
        }
        let free = n - locked_vecs.len();
        let mdim = subspace_cap.min(free);
        let need = (k - locked_vals.len().min(k)).max(1);

        // Random start, deflated against locked vectors.
        let mut v0: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        orthogonalize(&mut v0, &[&locked_vecs]);
        orthogonalize(&mut v0, &[&locked_vecs]);
        let nv = norm(&v0);
        if nv < 1e-12 {
            continue;
        }
        for z in v0.iter_mut() {
            *z /= nv;
        }

        let mut basis: Vec<Vec<Complex64>> = vec![v0];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut w = vec![Complex64::default(); n];
        let mut next_check = 16.min(mdim);

        loop {
            let j = alphas.len();
            scaled.apply(&basis[j], &mut w);
            if j > 0 {
                let b = Complex64::new(betas[j - 1], 0.0);
                for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                    *wi -= b * vi;
                }
            }
            let alpha = dot(&basis[j], &w).re;
            axpy(&mut w, Complex64::new(-alpha, 0.0), &basis[j]);
            // Full reorthogonalization against locked and current basis, twice.
            orthogonalize(&mut w, &[&locked_vecs, &basis]);
            orthogonalize(&mut w, &[&locked_vecs, &basis]);
            alphas.push(alpha);
            total_iters += 1;
            let beta = norm(&w);
            let at_cap = alphas.len() >= mdim;
            let breakdown = beta <= 1e-13 * op_scale.max(1.0);

            if at_cap || breakdown || alphas.len() >= next_check {
                next_check = alphas.len() + (alphas.len() / 4).max(16);
                let (ritz_vals, ritz_vecs) = tridiag_eigen(&alphas, &betas);
                let est_ok = (0..need.min(ritz_vals.len())).all(|i| {
                    let last = ritz_vecs[(alphas.len() - 1, i)].abs();
                    beta * last <= est_trigger
                });
                if est_ok || at_cap || breakdown {
                    break;
                }
            }
            if breakdown || at_cap {
                break;
            }
            betas.push(beta);
            let mut next = w.clone();
            for z in next.iter_mut() {
                *z /= beta;
            }
            basis.push(next);
        }

        // Assemble Ritz pairs and lock the converged ascending prefix.
        let m = alphas.len();
        let (ritz_vals, ritz_vecs) = tridiag_eigen(&alphas, &betas);
        let mut newly_locked = 0;
        let mut sweep_smallest = f64::INFINITY;
        best_residuals.clear();
        for i in 0..m.min(need + 2) {
            let mut y = vec![Complex64::default(); n];
            for (jv, vrow) in basis.iter().enumerate().take(m) {
                let c = Complex64::new(ritz_vecs[(jv, i)], 0.0);
                axpy(&mut y, c, vrow);
            }
            // x-space residual against the pencil.
            let x: Vec<Complex64> = y.iter().zip(&inv_sqrt).map(|(z, s)| z * *s).collect();
            let res = op.residual(ritz_vals[i], &x);
            best_residuals.push(res);
            if res <= opts.tol && newly_locked == i {
                sweep_smallest = sweep_smallest.min(ritz_vals[i]);
                // Keep the locked set orthonormal despite roundoff.
                orthogonalize(&mut y, &[&locked_vecs]);
                let ny = norm(&y);
                if ny < 0.5 {
                    break;
                }
                for z in y.iter_mut() {
                    *z /= ny;
                }
                locked_vals.push(ritz_vals[i]);
                locked_vecs.push(y);
                newly_locked += 1;
            } else if newly_locked == i {
                break;
            }
        }

        if newly_locked == 0 {
            if mdim < free {
                subspace_cap = (subspace_cap * 2).min(free);
            } else {
                return Err(EigenError::NonConvergence {
                    iterations: total_iters,
                    best_residuals,
                });
            }
        } else if locked_vals.len() >= k {
            // Certified once the deflated operator's smallest converged value
            // sits at or above the current k-th smallest locked value.
            let mut sorted = locked_vals.clone();
            sorted.sort_by(f64::total_cmp);
            let kth = sorted[k - 1];
            let slack = 10.0 * opts.tol * kth.abs().max(1.0);
            certified = sweep_smallest >= kth - slack;
        }
    }

    // Sort by eigenvalue and map back to x-space.
    let mut order: Vec<usize> = (0..locked_vals.len()).collect();
    order.sort_by(|&a, &b| locked_vals[a].total_cmp(&locked_vals[b]));
    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenvectors = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        eigenvalues.push(locked_vals[idx]);
        eigenvectors
            .push(locked_vecs[idx].iter().zip(&inv_sqrt).map(|(z, s)| z * *s).collect());
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
        residuals: Vec::new(),
        iterations: total_iters,
        method: SolverMethod::Lanczos,
    })
}

/// Eigen-decomposition of the real symmetric tridiagonal matrix with the
/// given diagonal and subdiagonal, values ascending. Column eigenvalues are
/// recomputed from Rayleigh quotients so the value/vector pairing never
/// depends on the backend's internal ordering.
fn tridiag_eigen(alphas: &[f64], betas: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alphas.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for (i, &a) in alphas.iter().enumerate() {
        t[(i, i)] = a;
    }
    for (i, &b) in betas.iter().enumerate().take(m.saturating_sub(1)) {
        t[(i, i + 1)] = b;
        t[(i + 1, i)] = b;
    }
    let eig = SymmetricEigen::new(t);
    let mut col_values = Vec::with_capacity(m);
    for i in 0..m {
        let z = eig.eigenvectors.column(i);
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..m {
            num += alphas[j] * z[j] * z[j];
            if j + 1 < m {
                num += 2.0 * betas[j] * z[j] * z[j + 1];
            }
            den += z[j] * z[j];
        }
        col_values.push(num / den);
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| col_values[a].total_cmp(&col_values[b]));
    let vals: Vec<f64> = order.iter().map(|&i| col_values[i]).collect();
    let mut vecs = DMatrix::<f64>::zeros(m, m);
    for (new_col, &old_col) in order.iter().enumerate() {
        vecs.set_column(new_col, &eig.eigenvectors.column(old_col));
    }
    (vals, vecs)
}
