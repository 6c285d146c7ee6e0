//! Forward-mode derivatives (JVPs) of the truncated SVD and the truncated
//! eigendecomposition of dense complex matrices.
//!
//! Three entry points:
//!
//! - [`jvp_truncated_svd_explicit`] when the discarded singular triples are
//!   available,
//! - [`jvp_truncated_svd_iterative`] when only the kept triples and the matrix
//!   are, as after a partial SVD ([`gkl_partial_svd`]),
//! - [`jvp_truncated_evd`] for a subset of eigenpairs of a diagonalizable
//!   matrix, with eigenvector tangents in a pivot gauge.
//!
//! [`verify`] checks all three against central differences.

pub mod cmx;
pub mod config;
pub mod decomp;
pub mod error;
pub mod generate;
pub mod iterative;
mod krylov;
pub mod matrix;
pub mod tevd;
pub mod tsvd;
pub mod verify;

pub use config::{DegeneracyPolicy, GradConfig, SolverKind};
pub use decomp::{full_evd, full_svd, truncate_svd, truncate_svd_with, FullEvd, FullSvd, SvdDiscarded, SvdKept};
pub use error::{Error, Result};
pub use iterative::{gkl_partial_svd, jvp_truncated_svd_iterative, Branch};
pub use matrix::{CMat, RealDiag, C64};
pub use tevd::{fix_gauge, jvp_truncated_evd, truncate_evd, EvdKept, EvdTangent, GaugeChoice, GaugePolicy};
pub use tsvd::{jvp_truncated_svd_explicit, SvdTangent};
