//! Feedback Alignment dynamics in deep linear networks: continuous flows, discrete schemes,
//! step-size budgets, implicit-regularization scaling and a matrix autoencoder harness.

pub mod acceptance;
pub mod analysis;
pub mod cubic;
pub mod deep_continuous;
pub mod error;
pub mod implicit_reg;
pub mod matrix_fa;
pub mod ode;
pub mod scalar_continuous;
pub mod scalar_discrete;
pub mod trajectory;

pub use analysis::{RateFit, RateKind};
pub use cubic::{CubicRoots, DepressedCubic, Discriminant, Sign, SortedRoots};
pub use deep_continuous::{DeepLayerConstants, DeepParams};
pub use error::{Error, Result};
pub use implicit_reg::{Side, ThresholdReport};
pub use matrix_fa::{AutoencoderConfig, DataModel, ExperimentMetrics, FaMatrices, LinearModel};
pub use scalar_continuous::{CaseTag, ComponentParams, DecayRate};
pub use scalar_discrete::{BudgetScheme, StepSizeBudget};
pub use trajectory::{Scheme, Trajectory, TrajectoryMeta};
