//! The guide's chapters, compiled so their code blocks run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/n3.md")]
pub mod n3 {}

#[doc = include_str!("../../../book/src/proofs.md")]
pub mod proofs {}

#[doc = include_str!("../../../book/src/descriptions.md")]
pub mod descriptions {}

#[doc = include_str!("../../../book/src/agent.md")]
pub mod agent {}

#[doc = include_str!("../../../book/src/simulator.md")]
pub mod simulator {}

#[doc = include_str!("../../../book/src/benchmark.md")]
pub mod benchmark {}

#[doc = include_str!("../../../book/src/descgen.md")]
pub mod descgen {}
