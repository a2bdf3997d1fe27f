//! Core of the traitwave pipeline.
//!
//! Band-power rows arrive as ThinkGear-framed packets ([`codec`]) or from
//! the seeded cohort generator ([`simulator`]), are stored per subject and
//! emotion ([`dataset`]), reduced to 16-dimensional mean/std vectors
//! ([`features`]) and classified per (trait, emotion) by a searched
//! portfolio of classical models ([`classical`]) or recurrent networks
//! ([`deep`]). [`session`] holds the evaluation state machine used by the
//! live service.

pub mod classical;
pub mod codec;
pub mod dataset;
pub mod deep;
pub mod features;
pub mod seed;
pub mod session;
pub mod simulator;
pub mod types;

pub use types::{
    Band, BandPowerRow, Emotion, Segment, Trait, TraitLabels, MAX_BAND_VALUE, NUM_BANDS, NUM_TRAITS,
};
