mod characterize;
mod metrics;
mod simulate;
mod synthesize;

pub use characterize::characterize;
pub use metrics::metrics;
pub use simulate::simulate;
pub use synthesize::synthesize;

use serde::Serialize;

/// Line printed on stdout after a command finishes.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub command: &'static str,
    pub passed: bool,
    pub outputs: Vec<String>,
    pub headline: serde_json::Value,
}
