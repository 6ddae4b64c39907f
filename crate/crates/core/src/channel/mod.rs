//! Geometry, OFDM numerology and observation synthesis.

pub mod geometry;
pub mod ofdm;
pub mod synth;

pub use geometry::{path_gain, propagation_delay, reflection_delay, Position2D};
pub use ofdm::{carrier_phase, steering_vector, subcarriers_for_bandwidth, OfdmConfig};
pub use synth::{
    complex_noise, mean_ab, mean_ba, path_mean, stacked_mean, synth_observation, ChannelKind,
    ChannelTruth, DirectionMode, DirectionalMean, ModelParams, ObservationSet, OffsetTruth,
    PilotKind, PilotSequence, Scenario, SynthesisRecord,
};
