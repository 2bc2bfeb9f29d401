//! Compression of many identical copies of displaced thermal states and
//! qudit states: truncated Fock-space simulation, exact codec errors, memory
//! ledgers and lower-bound audits.

pub mod channels;
pub mod cli;
pub mod dts_protocols;
pub mod error;
pub mod fock_engine;
pub mod linalg;
pub mod metrics;
pub mod optimality_auditor;
pub mod qudit_gaussian;
pub mod thermal_codec;

pub use error::{Error, Result};
