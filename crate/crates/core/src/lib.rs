//! Synchronization-signal-block generation and cell search for 5G NR.
//!
//! The modules follow the receive chain: sequence generation, SSB grid and
//! OFDM handling, channel simulation, and detection of the cell identity and
//! SSB (beam) index.

pub mod chansim;
pub mod detect;
pub mod error;
pub mod nr_seq;
pub mod ssb_phy;

pub use error::{Error, Result};

