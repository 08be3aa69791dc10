pub mod error;
pub mod model;
pub mod numerics;
pub mod oneperiod;
pub mod valuefn;

pub use error::{Error, Result};
