//! Simulator for first-past-the-post multi-plan query optimization over a
//! two-field document collection, plus the selectivity-grid methodology used
//! to score an optimizer's plan choices against measured execution times.

pub mod collection;
pub mod error;
pub mod executor;
pub mod harness;
pub mod index;
pub mod optimizer;
pub mod plans;
pub mod query;
pub mod scenario;
pub mod viz;

pub use collection::{generate_dataset, load_dataset, save_dataset, Collection, Distribution};
pub use error::{Error, Result};
pub use executor::{open_execution, CostModel, PlanExecution};
pub use harness::{
    cache_experiment, run_experiment, DatasetSource, ExperimentConfig, ExperimentGrid, SummaryMetrics, TimingMode,
};
pub use index::IndexCatalog;
pub use optimizer::{CacheMode, Decision, Optimizer, PlanCache, RaceKnobs};
pub use plans::{OptimizerVariant, PlanId};
pub use query::{Field, Query, RangePredicate};
pub use scenario::{Scenario, Workbench};
