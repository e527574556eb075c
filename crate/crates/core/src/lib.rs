pub mod code513;
pub mod error;
pub mod evolution;
pub mod gates;
pub mod network;
pub mod noise;
pub mod protocol;
pub mod quadrature;
pub mod sequences;
pub mod shapes;

pub use error::{Error, Result};
