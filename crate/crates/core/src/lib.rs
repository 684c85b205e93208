//! Noncoherent distributed on-off-keying reception over fast-fading
//! body-area channels.
//!
//! A transmitter sends OOK symbols to `K` receiving nodes whose channels are
//! redrawn every slot from per-node squared-gain models. A fusion center
//! detects each data symbol from the received samples alone, using a short
//! pilot sequence (`np/2` ones, then `np/2` zeros) to learn either reference
//! values (the weight-comparing detectors) or kernel density estimates (the
//! empirical likelihood ratio test). Coherent MRC and a statistical-CSI
//! likelihood ratio test serve as baselines, and [`harness`] runs
//! reproducible Monte Carlo BER sweeps over all of them.

pub mod channel;
pub mod cli;
pub mod config;
pub mod detectors;
pub mod error;
pub mod frames;
pub mod harness;
pub mod numerics;
pub mod oracle;

pub use channel::{
    body_channel_model, body_channel_models, dbm_to_watts, watts_to_dbm, ComplexSample, GainDistribution,
    NoiseSpec,
};
pub use detectors::{DetectorId, ElrtConfig, ReferenceValues};
pub use error::{Error, Result};
pub use frames::{simulate_frame, FrameConfig, ReceivedFrame};
pub use harness::{run_sweep, wilson_interval, BerPoint, SweepConfig};
pub use oracle::StatCsiDetector;
