//! Teleportation, time reversal of backward-evolving states, and demolition
//! measurements of nonlocal variables built on top of the scenario engine.

pub mod demolition;
pub mod naive;
pub mod observable;
pub mod reversal;
pub mod teleport;

pub use observable::{bell_preparation_circuit, eigenbasis_unitary, DirectionTag, NonlocalObservable};
pub use reversal::{
    attempt_reverse_forward, consolidate_backward, consolidate_generalized, crossed_measurement_scenario,
    generalized_forward_image, move_backward_state, reversed_state, time_reverse_backward, BackwardMove,
    CrossedMeasurement, ForwardReversal, GeneralizedConsolidation,
};
pub use teleport::{complete_teleport, half_teleport, ChannelPair, TeleportRun};
pub use demolition::{
    demolition_attempt, demolition_measure, demolition_tally, demolition_with_early_message, measure_mixed_direction,
    prepare_mixed_direction, reconstruct_outcome, ChannelPool, DemolitionRun, DemolitionTally, Layout,
    MixedDirectionSetup, MixedRun, PreparedMixed, RoundRecord,
};
pub use naive::{naive_prepare_strategy, naive_scenario, NaiveReport, PrepareStrategy};
