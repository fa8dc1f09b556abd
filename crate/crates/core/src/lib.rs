//! Tools for studying what small neural-network objectives look like along
//! low-dimensional slices of parameter space.
//!
//! The library trains networks with plain SGD + momentum, records parameter
//! snapshots, and then probes the objective along straight lines between
//! interesting points (initial parameters, trained solutions, random points),
//! projects whole trajectories onto the initial-to-final chord, and evaluates
//! two-dimensional cost surfaces around a trajectory. A handful of analytic
//! control models (a factored scalar network, random walks, quadratic bowls,
//! a second-order Taylor check of early gradient descent) give closed-form or
//! independently integrable baselines for the same visualisations.
//!
//! Everything is `f64` and deterministic: reductions run in a fixed index
//! order, randomness comes from counter-based ChaCha streams keyed by
//! explicit seeds, and repeated runs produce bit-identical results regardless
//! of thread count.

pub mod data;
pub mod dynamics;
mod error;
pub mod export;
pub mod idx;
pub mod linalg;
pub mod model;
pub mod params;
pub mod probe;
pub mod surface;
pub mod train;
pub mod trajfile;

pub use error::{Error, Result};
pub use model::{Batch, LayerKind, LossKind, NetworkSpec, Targets};
pub use params::{Manifest, ParamVector, Segment};
