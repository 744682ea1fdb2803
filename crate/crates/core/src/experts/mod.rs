//! Black-box decision-makers. Every expert answers
//! (x ⊙ b, b, o) → probability of a positive decision.

pub mod bias;
pub mod llm;
pub mod local_linear;
pub mod nw;
pub mod pool;

use crate::domain::{DecisionOutput, Mask};
use crate::error::ExpertError;

pub use bias::{apply_overload, apply_risk_aversion, apply_simplicity_bias, BiasConfig, BiasKind, BiasedExpert, PoisonModel};
pub use llm::{ChatBackend, HttpBackend, LlmExpert, LlmExpertConfig, MockBackend, PromptStyle};
pub use local_linear::LocalLinearExpert;
pub use nw::NwExpert;
pub use pool::ExpertPool;

pub trait DecisionMaker: Send + Sync {
    /// Feature dimensionality d the expert expects.
    fn dim(&self) -> usize;

    /// Size of the option set this expert understands.
    fn n_options(&self) -> usize {
        1
    }

    /// `x_masked` is x ⊙ b; `mask` says which zeros are real.
    fn decide(&self, x_masked: &[f64], mask: &Mask, option: usize) -> Result<DecisionOutput, ExpertError>;
}

pub(crate) fn check_option(option: usize, count: usize) -> Result<(), ExpertError> {
    if option < count {
        Ok(())
    } else {
        Err(ExpertError::OptionOutOfRange { option, count })
    }
}
