pub mod error;
pub mod melnikov;
pub mod model;
pub mod mpnum;
pub mod oracle;
pub mod singular;
pub mod lab;

pub use error::{Error, Result};
