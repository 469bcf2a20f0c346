//! The guide under `book/` as doc-tests: each chapter is included as the
//! documentation of one module, so `cargo test` compiles and runs every
//! listing, and a failure names the chapter it came from.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/graphs.md")]
pub mod graphs {}
#[doc = include_str!("../../../book/src/dynamics.md")]
pub mod dynamics {}
#[doc = include_str!("../../../book/src/sampling.md")]
pub mod sampling {}
#[doc = include_str!("../../../book/src/encoding.md")]
pub mod encoding {}
#[doc = include_str!("../../../book/src/factorization.md")]
pub mod factorization {}
#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}
#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
