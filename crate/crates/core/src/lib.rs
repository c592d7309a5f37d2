pub mod attention;
pub mod bench;
pub mod config;
pub mod editing;
pub mod error;
pub mod geometry;
pub mod gradsuite;
pub mod imaging;
pub mod losses;
pub mod mask;
pub mod network;
pub mod pgt;
pub mod pipeline;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
