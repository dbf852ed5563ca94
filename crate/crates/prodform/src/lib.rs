//! Numerical engine for the extrinsic geometry of isometric immersions into
//! products of two space forms Q_{k1}^{n1} x Q_{k2}^{n2}.
//!
//! The crate computes the projection tensors R, S, T and the operator Phi of
//! an immersion, verifies the algebraic and differential identities they
//! satisfy together with the Gauss, Codazzi and Ricci equations, and
//! classifies sampled immersions against the parallel / totally geodesic /
//! umbilical taxonomies. A gallery of analytic constructions provides ground
//! truth; a scenario runner exposes everything as a batch tool.

pub mod ambient;
pub mod classifier;
pub mod equations;
pub mod error;
pub mod extrinsic;
pub mod fd;
pub mod gallery;
pub mod immersion;
pub mod jet;
pub mod expr;
pub mod linalg;
pub mod scenario;
pub mod tensors;
pub mod util;

pub use ambient::{AmbientVector, ProductAmbient, SpaceFormSpec};
pub use error::{Error, Result};
pub use immersion::{ChartBox, ChartMap, DiffConfig, FramedPoint, ImmersionMap};
