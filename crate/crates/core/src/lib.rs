//! Multi-reference alignment: signals on the cyclic group, the noisy shift
//! model, invariant moment tensors, KL divergences between orbit mixtures,
//! estimators and risk experiments.

pub mod divergence;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod io;
pub mod model;
pub mod moments;
pub mod quadrature;
pub mod rng;
pub mod signal;

pub use error::{MraError, Result};
pub use model::{sample, ModelConfig, Observations, SampleBatch};
pub use signal::{GroupElement, GroupKind, Signal, SignalClassParams, SupportSet};
