pub mod caps;
pub mod error;
pub mod harness;
pub mod hermite;
pub mod process;
pub mod tensor;
pub mod transport;

pub use error::{Error, Result};
