//! Fixtures shared by unit tests.

use crate::channel::{sample_channels, ChannelSet};
use crate::scenario::{sample_geometry, SystemConfig};

pub fn desk_channels(seed: u64) -> ChannelSet {
    let cfg = SystemConfig::desk();
    let g = sample_geometry(&cfg, seed).unwrap();
    sample_channels(&cfg, &g, seed).unwrap()
}

pub use crate::harness::selftest::random_design;
