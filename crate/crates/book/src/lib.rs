//! Compiles every chapter of the book as a module so `cargo test --doc`
//! runs its listings.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/instances.md")]
pub mod instances {}

#[doc = include_str!("../../../book/src/oracle.md")]
pub mod oracle {}

#[doc = include_str!("../../../book/src/dp.md")]
pub mod dp {}

#[doc = include_str!("../../../book/src/milp.md")]
pub mod milp {}

#[doc = include_str!("../../../book/src/prd.md")]
pub mod prd {}

#[doc = include_str!("../../../book/src/pwd.md")]
pub mod pwd {}

#[doc = include_str!("../../../book/src/generators.md")]
pub mod generators {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
