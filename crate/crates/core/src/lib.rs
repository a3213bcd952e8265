//! Branching random walk on the d-regular tree.
//!
//! The crate contains the simulation engines and numerical oracles used by
//! the `brwcover` command line tool:
//!
//! * [`offspring`]: offspring laws with mean `d`, thinning and bulk sampling.
//! * [`tree`]: addressing and geometry of the infinite d-regular tree.
//! * [`gw`]: critical Galton-Watson simulation and exact survival by pgf iteration.
//! * [`pakes`]: the total-progeny limit law via numerical Laplace inversion.
//! * [`freeze`]: the (x,k)-freezing processes (full tree, projected, chained).
//! * [`field`]: the count-field engine for cover and hitting times.
//! * [`census`]: per-boundary-vertex genealogy census (slow vertices).
//! * [`scales`], [`experiments`], [`stats`], [`harness`], [`config`], [`report`]:
//!   the experiment layer.

pub mod census;
pub mod config;
pub mod error;
pub mod experiments;
pub mod field;
pub mod freeze;
pub mod gw;
pub mod harness;
pub mod offspring;
pub mod pakes;
pub mod report;
pub mod rng;
pub mod sampling;
pub mod scales;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};
pub use field::{HittingRecord, ParticleField};
pub use freeze::{FreezeOutcome, FrozenConfig};
pub use gw::GwTrace;
pub use offspring::{DistKind, OffspringDist};
pub use sampling::{Count, SamplingPolicy};
pub use tree::{Tree, VertexId};

/// Version string written into JSON summaries.
pub const ARTIFACT_VERSION: &str = concat!("brwcover ", env!("CARGO_PKG_VERSION"));
