//! Matrix-free symmetric operators and the eigen primitives built on them.
//!
//! Everything downstream (solver, certificates, generators) talks to a
//! symmetric matrix only through [`SymOp::apply_into`]. Three storage forms
//! cover the instances this crate generates: dense symmetric, a rank-1 spike
//! plus scaled noise, and a sparse adjacency with a rank-1 shift. Derived
//! operators (curvature and dual-certificate forms) implement the same trait
//! so one eigensolver serves all of them.

mod eigen;
mod io;
mod ops;

pub use eigen::{
    dense_eigen_jacobi, extreme_eigenpair, spectral_norm, EigOptions, EigResult, Extreme,
};
pub use io::{
    read_coord, write_coord, write_coord_file, write_coord_sparse, write_coord_sparse_file,
};
pub use ops::{
    matvec, CenteredAdjacency, DenseSym, NoiseMatrix, ScaledOp, SparseSym, SpikeNoise, SymOp,
};
