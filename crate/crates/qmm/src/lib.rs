//! Toolkit for certifying and reconstructing sets of quantum marginals that
//! carry a local Markov structure on a lattice.
//!
//! The library is organized in layers:
//!
//! - [`state`]: dense Hermitian operators on multi-site registers (tensor
//!   products, partial traces, site permutations, sanitization).
//! - [`spectral`]: Hermitian eigendecompositions and spectral matrix
//!   functions (fractional and complex powers, pseudo-inverse conventions).
//! - [`measures`]: von Neumann entropy, conditional mutual information,
//!   trace distance and Uhlmann fidelity.
//! - [`recovery`]: recovery channels built from a bipartite state (the Petz
//!   map, its rotated variants, and their weighted average).
//! - [`model`]: lattice geometries (chain, hexagonal grid, custom), marginal
//!   sets and the consistency/Markov validators.
//! - [`strings`]: sequences of polymorphic extensions and contractions, their
//!   well-formedness, evaluation and commutation analysis.
//! - [`reconstruct`]: global-state reconstruction drivers and the relation
//!   (lemma) verification suites.
//! - [`generators`]: seeded instance generators with known ground truth.
//! - [`format`]: on-disk formats for marginal sets, states and reports.

pub mod format;
pub mod generators;
pub mod measures;
pub mod model;
pub mod reconstruct;
pub mod recovery;
pub mod spectral;
pub mod state;
pub mod strings;

mod error;

pub use error::{Error, Result};
pub use state::{LocalState, SiteId};

/// Tolerance used to accept a matrix as Hermitian / trace-one in strict
/// constructors.
pub const STRICT_TOL: f64 = 1e-10;

/// Tolerance used by [`state::LocalState::sanitize`]: violations up to this
/// magnitude are repaired, anything beyond is rejected.
pub const SANITIZE_TOL: f64 = 1e-8;

/// Default relative spectral cutoff: eigenvalues below `cutoff * lambda_max`
/// are treated as exact zeros by logarithms and inverse powers.
pub const DEFAULT_CUTOFF: f64 = 1e-12;
