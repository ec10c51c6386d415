//! Parameter extraction from decay traces and recovery series.

mod bootstrap;
mod decay;
mod exponential;
mod lm;

pub use bootstrap::{bootstrap, BootstrapResult, MAX_FAILURE_FRACTION};
pub use decay::{
    fit_decay, initial_guess, model_jacobian, Bounds, FitOptions, FitResult, ParamErrors,
    WEIGHT_FLOOR,
};
pub use exponential::{fit_exponential, fit_recovery, fit_recovery_weighted, ExpFit, RecoveryFit};
pub use lm::JACOBIAN_STEP;
