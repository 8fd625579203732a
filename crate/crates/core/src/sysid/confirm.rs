//! Confirmation of an identified model by re-posing the regression with
//! each retained operator as the target.
//!
//! The model `y = χ_S ω` is written as `A θ = 0` with `A = [y | χ_S]` and
//! `θ = (-1, ω)`. Solving for column `j` predicts coefficients
//! `-θ_k / θ_j` on the remaining columns; the check compares those with a
//! direct least-squares fit. This ratio-consistency formulation is a
//! reconstruction, not a published procedure.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::weak_operators::OperatorLibrary;

use super::config::StepwiseConfig;
use super::regression::ridge_fit;
use super::stepwise::{prepare_library, RegressionTrace};

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorCheck {
    pub label: String,
    /// Labels of the regressors, the original target first.
    pub regressors: Vec<String>,
    pub expected: Vec<f64>,
    pub observed: Vec<f64>,
    pub max_relative_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfirmationReport {
    pub checks: Vec<OperatorCheck>,
    pub tolerance: f64,
}

impl ConfirmationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_labels(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.label.as_str()).collect()
    }
}

/// Runs the ratio-consistency check on the identified model of `trace`.
/// A one-operator model passes vacuously.
pub fn confirmation_test(
    library: &OperatorLibrary,
    trace: &RegressionTrace,
    config: &StepwiseConfig,
) -> Result<ConfirmationReport> {
    let (lib, _) = prepare_library(library, config)?;
    if lib.labels != trace.all_labels {
        return Err(Error::Data("trace does not belong to this library".into()));
    }
    let model = trace.model();
    let tolerance = config.confirmation_tolerance;
    if model.active.len() <= 1 {
        return Ok(ConfirmationReport { checks: Vec::new(), tolerance });
    }
    let target_name = trace.target_label.clone().unwrap_or_else(|| "y".into());
    let k = model.active.len();
    let n = lib.nrows();
    let mut a = DMatrix::zeros(n, k + 1);
    a.set_column(0, &lib.y);
    let mut names = vec![target_name];
    let mut theta = vec![-1.0];
    for (c, (&j, &w)) in model.active.iter().zip(&model.coefficients).enumerate() {
        a.set_column(c + 1, &lib.chi.column(j));
        names.push(lib.labels[j].clone());
        theta.push(w);
    }

    for col in 1..=k {
        if a.column(col).iter().all(|&v| v == 0.0) {
            return Err(Error::Data(format!("operator column '{}' is identically zero", names[col])));
        }
    }
    let mut checks = Vec::with_capacity(k);
    for col in 1..=k {
        let target: DVector<f64> = a.column(col).into_owned();
        let rest: Vec<usize> = (0..=k).filter(|&c| c != col).collect();
        let observed: Vec<f64> = ridge_fit(&a.select_columns(&rest), &target, 0.0)?.iter().copied().collect();
        let expected: Vec<f64> = rest.iter().map(|&c| -theta[c] / theta[col]).collect();
        let max_relative_error = observed
            .iter()
            .zip(&expected)
            .map(|(o, e)| (o - e).abs() / e.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        checks.push(OperatorCheck {
            label: names[col].clone(),
            regressors: rest.iter().map(|&c| names[c].clone()).collect(),
            expected,
            observed,
            max_relative_error,
            passed: max_relative_error <= tolerance,
        });
    }
    Ok(ConfirmationReport { checks, tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysid::{stepwise_eliminate, RegressionMethod, TraceStep};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lib(chi: DMatrix<f64>, y: DVector<f64>) -> OperatorLibrary {
        let n = y.len();
        OperatorLibrary {
            labels: (0..chi.ncols()).map(|j| format!("op{j}")).collect(),
            y,
            chi,
            dof_map: (0..n).map(|i| (i, 0)).collect(),
        }
    }

    fn ols() -> StepwiseConfig {
        StepwiseConfig { regression_method: RegressionMethod::Ols, ..Default::default() }
    }

    #[test]
    fn exact_system_confirms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let chi = DMatrix::from_fn(100, 2, |_, _| rng.gen_range(-1.0..1.0));
        let y = chi.column(0) * 2.0 - chi.column(1) * 0.5;
        let l = lib(chi, y);
        let t = stepwise_eliminate(&l, &ols()).unwrap();
        let r = confirmation_test(&l, &t, &ols()).unwrap();
        assert_eq!(r.checks.len(), 2);
        for c in &r.checks {
            assert!(c.max_relative_error < 1e-8, "{c:?}");
        }
        assert!(r.passed());
    }

    #[test]
    fn spurious_collinear_column_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 400;
        let mut chi = DMatrix::from_fn(n, 3, |_, _| rng.gen_range(-1.0..1.0));
        let s = chi.column(0) + DVector::from_fn(n, |_, _| rng.gen_range(-0.01..0.01));
        chi.set_column(2, &s);
        let y = chi.column(0) * 2.0 + chi.column(1) + DVector::from_fn(n, |_, _| rng.gen_range(-0.01..0.01));
        let l = lib(chi, y);
        // force the spurious operator into the model
        let full = stepwise_eliminate(&l, &StepwiseConfig { f_criteria: 1e-12, ..ols() }).unwrap();
        assert_eq!(full.model().active, vec![0, 1, 2]);
        let r = confirmation_test(&l, &full, &ols()).unwrap();
        assert!(r.failed_labels().contains(&"op2"), "{r:?}");
    }

    #[test]
    fn one_operator_vacuous() {
        let chi = DMatrix::from_fn(10, 1, |i, _| i as f64 + 1.0);
        let y = chi.column(0) * 3.0;
        let l = lib(chi, y);
        let t = stepwise_eliminate(&l, &ols()).unwrap();
        let r = confirmation_test(&l, &t, &ols()).unwrap();
        assert!(r.checks.is_empty() && r.passed());
    }

    #[test]
    fn zero_column_is_error() {
        let chi = DMatrix::from_fn(10, 2, |i, j| if j == 0 { i as f64 } else { 0.0 });
        let l = lib(chi, DVector::from_fn(10, |i, _| i as f64));
        let t = RegressionTrace {
            steps: vec![TraceStep {
                active: vec![0, 1],
                labels: vec!["op0".into(), "op1".into()],
                coefficients: vec![1.0, 0.5],
                loss: 0.0,
                f_stat: None,
                dropped: None,
            }],
            identified: 0,
            all_labels: l.labels.clone(),
            target_label: None,
            n_rows: 10,
        };
        let e = confirmation_test(&l, &t, &ols()).unwrap_err().to_string();
        assert!(e.contains("op1"), "{e}");
    }
}
