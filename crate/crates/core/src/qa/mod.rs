//! Template question generation.
//!
//! [`generate_dataset`] sub-samples each scene, then for every reference frame
//! runs the enabled categories in a fixed order. Each candidate question draws
//! from its own seeded stream, so output is independent of scheduling.

mod dataset;
mod generate;
mod prompt;
mod record;
pub mod templates;

pub use dataset::*;
pub use generate::*;
pub use prompt::*;
pub use record::*;
