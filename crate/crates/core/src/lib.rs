//! Joint FMCW radar and OFDM communication frame simulator.

pub mod channel;
pub mod cli;
pub mod codec;
pub mod comm;
pub mod config;
pub mod error;
pub mod eval;
pub mod frame;
pub mod plot;
pub mod qam;
pub mod radar;
pub mod signal;

pub use error::{Error, Result};
pub use signal::{Cf64, ComplexFrame};
