//! Non-neural realizations of invariant geometric models on 3D point clouds.
//!
//! Each model is run at maximal expressiveness: message and update functions
//! are replaced by an injective encoding (canonical serialization, sorting of
//! multisets, and a 128-bit hash), so two clouds receive equal fingerprints
//! exactly when the model cannot tell them apart.
//!
//! - [`geometry`]: point clouds, distances, quantization and a brute-force
//!   congruence oracle.
//! - [`refine`]: color refinement engines (distance message passing, nested
//!   subgraph refinement with node marking, its chiral variant, and two
//!   edge-level engines) and their fingerprints.
//! - [`symmetry`]: center-coincidence symmetry tests and the weighted center
//!   distance formulas.
//! - [`reconstruct`]: coordinate recovery from two-anchor distance encodings.
//! - [`counterexamples`]: polyhedral search for pairs that distance message
//!   passing cannot separate.

pub mod counterexamples;
pub mod error;
pub mod geometry;
pub mod hash;
pub mod reconstruct;
pub mod refine;
pub mod sample;
pub mod symmetry;

pub use error::{Error, Result};
pub use geometry::{
    align_isomorphic, centroid, distance_matrix, quantize, rescale_unit, AlignmentResult,
    PointCloud, Quantizer, SymmetryGroup, Vec3,
};
pub use hash::{ColorId, Digest128};
pub use refine::{distinguish, fingerprint, Coloring, Fingerprint, Model, RefineConfig, Verdict};
pub use symmetry::{classify_symmetry, SymmetryReport};
