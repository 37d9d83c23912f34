//! Proof-driven composition and execution of hypermedia APIs described in Notation3.

pub mod n3;
pub mod reason;
pub mod samples;
pub mod restdesc;
pub mod agent;
pub mod benchmark;
pub mod simulator;
pub mod descgen;
