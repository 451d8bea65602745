//! Numerical laboratory for the magnetic Laplacian on closed model manifolds.
//!
//! Discretizes Delta^alpha on the circle, flat torus, and unit sphere,
//! computes low-lying spectra, frustration indices and magnetic Cheeger
//! constants, and checks the quantitative eigenvalue estimates that relate
//! them (Lichnerowicz- and Buser-type bounds, the integrated Bochner
//! identity, heat-semigroup inequalities, and the gauge-triviality
//! characterization).

pub mod geometry;
pub mod magnetic;
pub mod operator;
pub mod eigensolve;
pub mod cheeger;
pub mod bounds;
pub mod analysis;
pub mod cli;
