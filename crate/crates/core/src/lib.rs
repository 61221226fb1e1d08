//! Simulation of a cavity-QED scheme that prepares atomic Bell states,
//! discriminates them and teleports an atomic qubit through a cavity field
//! prepared in a coherent state.
//!
//! * [`hilbert`] holds states of two-level atoms plus one truncated mode.
//! * [`qops`] holds the primitive operations (Ramsey rotations, dispersive
//!   gate, displacement, Jaynes–Cummings probe, detection).
//! * [`protocols`] chains them into Bell preparation, Bell discrimination and
//!   teleportation.
//! * [`script`] parses and runs `.cqp` protocol scripts.
//! * [`oracle`] contains slow reference implementations used for checking.

pub mod error;
pub mod hilbert;
pub mod oracle;
pub mod protocols;
pub mod qops;
pub mod script;

pub use error::{Error, Result};
pub use hilbert::C64;
