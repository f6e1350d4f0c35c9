//! Classical Ising ground states under random control errors, and their
//! suppression by repetition encoding.
//!
//! The crate builds hardware graphs and problem instances, draws reproducible
//! error Hamiltonians, encodes instances on `G □ F`, finds exact ground states
//! with three independent solvers, and runs Monte Carlo failure sweeps.

pub mod encoding;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod model;
pub mod noise;
pub mod solvers;

pub use encoding::{decode, encode, EncodedModel, EncodingDescriptor, RepetitionEncoding};
pub use error::{Error, Result};
pub use graph::{Edge, Graph};
pub use model::{make_ladder_instance, IsingModel, ModelFile, SpinConfig};
pub use noise::{NoiseSpec, TrialSeed};
pub use solvers::{auto_solve, GroundResult, SolverId};
