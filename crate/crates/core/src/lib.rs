pub mod adapt;
pub mod analyze;
pub mod bench;
pub mod construct;
pub mod document;
pub mod error;
pub mod evaluate;
pub mod ground;
pub mod infer;
pub mod model;
pub mod oracle;

pub use error::{Error, Result};
