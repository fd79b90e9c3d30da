//! Two-state vectors, the ABL rule and timed pre-/post-selection scenarios.

pub mod scenario;
pub mod two_state;

pub use scenario::{scenario_for_gtsv, Branch, ChannelKind, PostSelection, RunRecord, Scenario, ScenarioChannel, Step, StepId, StepKind};
pub use two_state::{abl_probability, GeneralizedTwoStateVector, GtsvTerm, Reduction, TwoStateVector};
