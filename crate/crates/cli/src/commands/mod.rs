mod active_learning;
mod dns;
mod graph;
mod idnn;
mod rom;
mod vsi;

pub use active_learning::run as active_learning;
pub use dns::run as dns;
pub use graph::run as graph;
pub use idnn::{eval as idnn_eval, scan as idnn_scan, train as idnn_train};
pub use rom::run as allen_cahn_rom;
pub use vsi::run as vsi;

use crate::Common;

fn seed_or(common: &Common, default: u64) -> u64 {
    common.seed.unwrap_or(default)
}
