//! Link-level simulation of multi-antenna chirp-multicarrier (AFDM) and OFDM
//! links under transceiver hardware impairments.

pub mod analysis;
pub mod channel;
pub mod constellation;
pub mod detect;
pub mod error;
pub mod hwi;
pub mod link;
pub mod math;
pub mod modem;
pub mod sweep;

pub use error::{Error, Result};
