//! Common fixed points of weakly contractive map families on metric type
//! spaces: expression-defined spaces and controls, λ-sequence analysis,
//! contraction checks and Picard iteration with convergence envelopes.

pub mod condition;
pub mod control;
pub mod error;
pub mod expr;
pub mod lambda;
pub mod report;
pub mod run;
pub mod scenario;
pub mod solver;
pub mod space;

pub use condition::{ConditionVariant, SamplePlan, VariantTag};
pub use error::{Error, ErrorClass, Result};
pub use expr::{Bindings, Expr, Var};
pub use scenario::{builtin, Scenario};
pub use space::{Carrier, Space};
