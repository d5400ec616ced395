pub mod analysis;
pub mod audio;
pub mod cochlea;
pub mod eeg;
mod error;
pub mod oae;
pub mod stimulus;

pub use error::{Error, Result};
