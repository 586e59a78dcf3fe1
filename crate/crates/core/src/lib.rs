//! Regression surrogate losses, numerical verification of their consistency
//! bounds against the squared loss, and smooth adversarial training of linear
//! models.

// `!(x > y)` is used on purpose so that NaN takes the error path.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversarial;
pub mod bounds;
pub mod cli;
pub mod conditional;
pub mod counterexamples;
pub mod datagen;
pub mod distributions;
pub mod error;
pub mod fuzz;
pub mod lemmas;
pub mod losses;
pub mod scalar;

pub use error::{Error, Result};
pub use losses::LossKind;
