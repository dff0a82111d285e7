pub mod aggregation;
pub mod copula;
pub mod data;
pub mod error;
pub mod harness;
pub mod information;
pub mod numerics;
pub mod selection;
pub mod theory;

pub use error::{Error, Result};
pub use aggregation::Aggregator;
pub use copula::{CopulaModel, EquicorrelatedSpec};
pub use data::{Dataset, ErrorMatrix, Sign, SplitSpec};
pub use harness::{ExperimentConfig, ExperimentReport};
pub use numerics::SymmetricMatrix;
pub use selection::{SelectionMethod, SelectionResult};
