//! Positive fully nontrivial solutions of weakly coupled competitive elliptic
//! systems on boxes,
//!
//! ```text
//! −Δu_i = μ_i (u_i⁺)^p + Σ_{j≠i} λ_ij (u_i⁺)^{α_ij} (u_j⁺)^{β_ij}  in Ω,   u_i = 0 on ∂Ω,
//! ```
//!
//! with `λ_ij < 0` and `α_ij + β_ij < p`. Solutions live on a Nehari-type
//! manifold reached through a componentwise scaling map; they are computed by
//! homotopy continuation from the uncoupled system with semismooth Newton on a
//! finite-difference grid.

pub mod cli;
pub mod config;
pub mod error;
pub mod grid;
mod linalg;
pub mod nehari;
mod newton;
mod problems;
mod reaction;
pub mod scalar;
pub mod scaling;
pub mod selftest;
pub mod sync;
pub mod system;

pub use error::{Error, Result};
pub use grid::{Domain, GridFunction};
pub use nehari::{State, SystemParams};
pub use scaling::ScalingCoeffs;
pub use sync::SyncVerdict;
pub use system::{ContinuationConfig, SolveReport};
