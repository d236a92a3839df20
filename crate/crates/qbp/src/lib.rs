pub mod bp;
pub mod error;
pub mod graph;
pub mod hastings;
pub mod markov;
pub mod operator;
pub mod quad;
pub mod random;
pub mod testkit;
pub mod thermal;

pub use error::{Error, Result};
pub use graph::{EdgeFactory, GraphModel, ModelSpec, RegionPartition, Tree};
pub use operator::{DenseOperator, HermitianEigen, Pauli, SiteId, SiteLayout};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
