//! Compressed sensing for signals that are sparse in a coherent tight frame.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`] holds the dense linear-algebra kernels (eigen-extremes,
//!   range bases, minimum-norm least squares, power iteration).
//! * [`frames`] builds and checks tight frames `D` (`D D^T = I`) and the
//!   best `s`-term approximation used for tail terms.
//! * [`sensing`] draws measurement matrices and observations `y = A f + z`.
//! * [`drip`] computes restricted isometry constants adapted to a frame,
//!   exactly by support enumeration or as a randomized lower bound.
//! * [`guarantees`] evaluates the recovery constants, issues certificates and
//!   audits every intermediate inequality of the recovery argument on
//!   concrete instances.
//! * [`solvers`] solves the analysis `l1`, `lq` and `l0` recovery programs.
//! * [`harness`] ties everything into reproducible experiments with CSV output.

pub mod drip;
pub mod error;
pub mod frames;
pub mod guarantees;
pub mod harness;
pub mod io;
pub mod numerics;
pub mod rng;
pub mod sensing;
pub mod serde17;
pub mod solvers;

pub use drip::{exact_drip, exact_rip, random_lower_bound, RipMethod, RipReport};
pub use error::{Error, Result};
pub use frames::{best_s_term, SparseApprox, TightFrame};
pub use guarantees::{
    audit::{audit_lemmas, InequalityAuditRecord},
    certify, BlockPartition, GuaranteeCertificate, PartitionNorm, Regime,
};
pub use numerics::{DenseMatrix, Vector};
pub use sensing::{MatrixKind, NoiseMode, SensingModel};
pub use solvers::{Program, RecoveryResult, SolverOptions};

#[cfg(test)]
pub(crate) mod testutil;
