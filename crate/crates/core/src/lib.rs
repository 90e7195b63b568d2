pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod features;
pub mod intention;
pub mod irl;
pub mod online;
pub mod oracle;
pub mod pipeline;
pub mod sim;
pub mod trajopt;
pub mod types;

pub use error::{Error, Result};
