//! Quantifying which driving scenarios are reasonably foreseeable and which
//! collisions are reasonably preventable.
//!
//! The crate is organised along the pipeline:
//!
//! - [`scenario_store`]: scenario categories, record ingestion, tag-based
//!   scenario mining and exposure.
//! - [`density`]: Gaussian kernel density estimation over transformed and
//!   standardized scenario parameters.
//! - [`evt`]: peaks-over-threshold tail modelling with the generalized Pareto
//!   distribution.
//! - [`foreseeable`]: solving for the parameter range whose complement occurs
//!   at a given rate per hour.
//! - [`driver_sim`]: longitudinal IDM+ simulation of a skilled and attentive
//!   driver.
//! - [`preventable`]: crude and importance-sampled Monte Carlo collision
//!   probabilities, sequential binomial testing and boundary extraction.

pub mod density;
pub mod driver_sim;
pub mod evt;
pub mod foreseeable;
pub mod optimize;
pub mod preventable;
pub mod rng;
pub mod scenario_store;
pub mod special;

pub use density::{Hyperrectangle, KdeModel, ParamTransform, ZeroRegion};
pub use driver_sim::{DriverConfig, ScenarioSpec, SimulationOutcome};
pub use evt::{ExcessSet, GpdFit, Orientation};
pub use foreseeable::{DimPolicy, EvtBound, ForeseeableQuery, ForeseeableRange};
pub use preventable::{RiskEstimate, SequentialResult, Verdict};
pub use scenario_store::{ExposureEstimate, ScenarioCategory, ScenarioFamily, ScenarioRecord};

/// Crate-wide error, used where several modules meet (pipelines, bindings).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Store(#[from] scenario_store::StoreError),
    #[error(transparent)]
    Density(#[from] density::DensityError),
    #[error(transparent)]
    Evt(#[from] evt::EvtError),
    #[error(transparent)]
    Foreseeable(#[from] foreseeable::ForeseeableError),
    #[error(transparent)]
    Sim(#[from] driver_sim::SimError),
    #[error(transparent)]
    Preventable(#[from] preventable::PreventableError),
}

impl Error {
    /// True for failures of an iterative numerical method (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Evt(evt::EvtError::NoConvergence { .. })
                | Error::Density(density::DensityError::RejectionExhausted { .. })
        )
    }
}
