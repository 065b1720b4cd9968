//! Numerical workbench for SU(2) Yang–Mills connections on the unit ball B⁴:
//! BPST instanton gluing, harmonic extensions, the reduced bubble functional
//! and probes of the glued connection.

pub mod ad;
pub mod algebra;
pub mod cli;
pub mod error;
pub mod fields;
pub mod gluing;
pub mod harmonic;
pub mod instanton;
pub mod numerics;
pub mod reduced;

pub use error::{Result, YmbError};
