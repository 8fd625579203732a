//! Variational system identification: ridge/OLS fits, stepwise backward
//! elimination with the extra-sum-of-squares F-test, a ratio-consistency
//! confirmation test and the INI configuration front end.

mod config;
mod confirm;
mod regression;
mod stepwise;

pub use config::{config_from_ini, parse_config, DropStrategy, IdentifyStrategy, RegressionMethod, StepwiseConfig};
pub use confirm::{confirmation_test, ConfirmationReport, OperatorCheck};
pub use regression::{f_statistic, ridge_fit, LeastSquares, SubsetFit};
pub use stepwise::{prepare_library, stepwise_eliminate, RegressionTrace, TraceStep};
