//! Energy-minimizing placement of processing demands on an in-building fog
//! architecture, over a PON or a spine-and-leaf backhaul.

pub mod config;
pub mod error;
pub mod milp;
pub mod model;
pub mod oracle;
pub mod params;
pub mod runner;
pub mod scenario;
pub mod solver;
pub mod topology;

pub use error::{Error, Result};
