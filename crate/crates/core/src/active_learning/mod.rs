//! Exploration / training / exploitation loop that fits an integrable
//! network free-energy surrogate to chemical-potential data from an oracle.

mod config;
mod oracle;
mod sampling;
mod workflow;

pub use config::ActiveLearningConfig;
pub use oracle::Oracle;
pub use sampling::{duplicate_filter, latin_hypercube, perturb, uniform};
pub use workflow::{
    global_sampling, hyperparameter_search, in_well_fraction, input_layer, local_sampling, main_workflow, read_samples,
    rounds_csv, samples_csv, slice_csv, surrogate_training, RoundLog, Sample, SearchResult, Stream, WorkflowState,
};

/// The default four-parameter oracle.
pub fn synthetic_oracle() -> Oracle {
    Oracle::default()
}
