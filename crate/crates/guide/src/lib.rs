//! Doctest harness for the book under `book/`.
//!
//! mdbook renders the chapters but cannot execute their Rust blocks against
//! this workspace, so each chapter is also included here as module
//! documentation; `cargo test --doc` then compiles and runs every code
//! block. A failing snippet names its chapter module.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/quantizer.md")]
pub mod quantizer {}

#[doc = include_str!("../../../book/src/channel_ofdm.md")]
pub mod channel_ofdm {}

#[doc = include_str!("../../../book/src/sqinr_coupling.md")]
pub mod sqinr_coupling {}

#[doc = include_str!("../../../book/src/duality_power.md")]
pub mod duality_power {}

#[doc = include_str!("../../../book/src/solver.md")]
pub mod solver {}

#[doc = include_str!("../../../book/src/linksim.md")]
pub mod linksim {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
