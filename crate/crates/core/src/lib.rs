pub mod centrality;
pub mod communities;
pub mod diagnostics;
pub mod embed;
pub mod error;
pub mod gbm;
pub mod graph;
pub mod interp_graph;
pub mod rng;
pub mod sparsify;
pub mod spectral;
pub mod tabular;
pub mod treeshap;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
