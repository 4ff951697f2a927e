//! Monte Carlo workbench for probabilistic amplitude shaping (PAS) over PAM
//! with bit-interleaved binary LDPC coding, and the information metrics used
//! to predict post-FEC bit error rates from LLR statistics.
//!
//! The transmit chain is `shaping -> framing -> fec -> constellation`, the
//! receive chain `channel -> demapper -> fec`, and [`metrics`] turns the
//! demapper's LLR trace into BER_pre, I_n, I_s, I_a, NGMI and the Monte
//! Carlo rate estimate. [`harness`] runs sweeps and prediction-accuracy
//! analyses over all of it.

pub mod channel;
pub mod constellation;
pub mod demapper;
pub mod entropy;
pub mod error;
pub mod fec;
pub mod framing;
pub mod harness;
pub mod metrics;
pub mod shaping;

pub use error::{Error, Result};
