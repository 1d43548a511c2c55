//! The chapters of `book/` as doc comments, so `cargo test --doc` runs every
//! snippet in the book. One module per chapter keeps failures traceable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/feedback.md")]
pub mod feedback {}
#[doc = include_str!("../../../book/src/ridge.md")]
pub mod ridge {}
#[doc = include_str!("../../../book/src/bias.md")]
pub mod bias {}
#[doc = include_str!("../../../book/src/policies.md")]
pub mod policies {}
#[doc = include_str!("../../../book/src/simulator.md")]
pub mod simulator {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
#[doc = include_str!("../../../book/src/service.md")]
pub mod service {}
