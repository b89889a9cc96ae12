//! Detection, quantification and remedies for negative data externalities
//! on group performance: cases where adding training data from one source
//! group makes a model worse on some evaluation group.
//!
//! The pipeline is: estimate a [`sweep::RiskSurface`] over a grid of
//! training-set allocations, scan it with [`externality::detect`] and
//! [`externality::delta`], then realise the improvement with a group-routed
//! [`intervention::SplitModel`].

pub mod allocation;
pub mod dataio;
pub mod dataset;
pub mod error;
pub mod externality;
pub mod group;
pub mod intervention;
pub mod learners;
pub mod metrics;
pub mod sampling;
pub mod seed;
pub mod sweep;
pub mod synthetic;

pub use allocation::{dominated_pairs, Allocation};
pub use dataset::{GroupedDataset, Instance, Task};
pub use error::{Error, ErrorClass, Result};
pub use group::GroupId;
pub use seed::{Purpose, SeedSpec};
