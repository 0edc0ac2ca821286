pub mod compare;
pub mod error;
pub mod grid;
pub mod plan;
pub mod plot;
pub mod runner;
pub mod store;

pub use error::HarnessError;
pub use plan::{Arm, ExperimentPlan, ModelVariant, SearchScope, SeedPolicy};
pub use runner::{Context, PreparedData};
