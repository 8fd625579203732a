use std::path::Path;

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::weak_operators::OperatorLibrary;

use super::config::{IdentifyStrategy, StepwiseConfig};
use super::regression::{f_statistic, LeastSquares};

/// One iteration of backward elimination.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    /// Active column indices, ascending.
    pub active: Vec<usize>,
    pub labels: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Mean squared residual `‖y - χω‖² / n`.
    pub loss: f64,
    /// F statistic of the drop that produced this iteration.
    pub f_stat: Option<f64>,
    pub dropped: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTrace {
    pub steps: Vec<TraceStep>,
    /// Index into `steps` of the identified model.
    pub identified: usize,
    /// Labels of the regression columns (after any target move).
    pub all_labels: Vec<String>,
    /// Label of the column moved to the left-hand side, if any.
    pub target_label: Option<String>,
    pub n_rows: usize,
}

impl RegressionTrace {
    pub fn model(&self) -> &TraceStep {
        &self.steps[self.identified]
    }

    /// Coefficients of step `k` over all columns, zero on dropped ones.
    pub fn padded_coefficients(&self, k: usize) -> Vec<f64> {
        let s = &self.steps[k];
        let mut out = vec![0.0; self.all_labels.len()];
        for (&j, &w) in s.active.iter().zip(&s.coefficients) {
            out[j] = w;
        }
        out
    }

    pub fn retained_labels(&self) -> &[String] {
        &self.model().labels
    }

    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut head = vec!["iteration".to_string(), "n_terms".into(), "dropped".into(), "loss".into(), "F".into()];
        head.extend(self.all_labels.iter().cloned());
        w.write_record(&head)?;
        for (k, s) in self.steps.iter().enumerate() {
            let mut rec = vec![
                k.to_string(),
                s.active.len().to_string(),
                s.dropped.clone().unwrap_or_default(),
                fmt_f64(s.loss),
                s.f_stat.map(fmt_f64).unwrap_or_default(),
            ];
            rec.extend(self.padded_coefficients(k).into_iter().map(fmt_f64));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_model_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["label", "coefficient"])?;
        let m = self.model();
        for (l, c) in m.labels.iter().zip(&m.coefficients) {
            w.write_record([l.clone(), fmt_f64(*c)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Applies the identify strategy: a library whose target vector is
/// identically zero (a steady state) gets column `target_index` moved to
/// the left-hand side. Returns the label of the moved column.
pub fn prepare_library(library: &OperatorLibrary, config: &StepwiseConfig) -> Result<(OperatorLibrary, Option<String>)> {
    library.validate()?;
    if library.ncols() == 0 {
        return Err(Error::Data("empty operator library".into()));
    }
    match config.identify_strategy {
        IdentifyStrategy::SpecifiedTarget => {
            if library.y.iter().all(|&v| v == 0.0) {
                let lib = library.with_target_column(config.target_index)?;
                if lib.ncols() == 0 {
                    return Err(Error::Data("no operators left after moving the target column".into()));
                }
                Ok((lib, Some(library.labels[config.target_index].clone())))
            } else {
                Ok((library.clone(), None))
            }
        }
    }
}

/// Backward stepwise elimination driven by the extra-sum-of-squares F test.
pub fn stepwise_eliminate(library: &OperatorLibrary, config: &StepwiseConfig) -> Result<RegressionTrace> {
    config.validate()?;
    let (lib, target_label) = prepare_library(library, config)?;
    if lib.y.iter().all(|&v| v == 0.0) {
        return Err(Error::Data("target vector is identically zero".into()));
    }
    let ls = LeastSquares::new(&lib.chi, &lib.y)?;
    let n = lib.nrows();
    let alpha = config.alpha();
    let labels = &lib.labels;
    let rss_floor = (config.precision_floor * ls.y_norm_squared().sqrt()).powi(2).max(f64::MIN_POSITIVE);

    let mut active: Vec<usize> = (0..lib.ncols()).collect();
    let fit = ls.fit(&active, alpha, Some(labels))?;
    let mut rss = fit.rss;
    let mut steps = vec![TraceStep {
        active: active.clone(),
        labels: active.iter().map(|&j| labels[j].clone()).collect(),
        coefficients: fit.coefficients,
        loss: rss / n as f64,
        f_stat: None,
        dropped: None,
    }];
    let mut identified = None;

    while active.len() > 1 {
        let mut best: Option<(usize, super::SubsetFit)> = None;
        let mut cands = Vec::with_capacity(active.len());
        for (pos, _) in active.iter().enumerate() {
            let sub: Vec<usize> = active.iter().enumerate().filter(|&(q, _)| q != pos).map(|(_, &j)| j).collect();
            cands.push(ls.fit(&sub, alpha, Some(labels))?);
        }
        let min_rss = cands.iter().map(|c| c.rss).fold(f64::INFINITY, f64::min);
        // ties go to the lowest column index; `active` is ascending
        for (pos, c) in cands.into_iter().enumerate() {
            if best.is_none() && c.rss <= min_rss * (1.0 + config.tie_tolerance) + f64::MIN_POSITIVE {
                best = Some((pos, c));
            }
        }
        let (pos, fit) = best.expect("at least one candidate");
        let k = active.len();
        if n <= k {
            return Err(Error::Data(format!("{n} rows cannot support an F test on {k} operators")));
        }
        let f = f_statistic(fit.rss, rss.max(rss_floor), k - 1, k, n)?;
        if identified.is_none() && f >= config.f_criteria {
            identified = Some(steps.len() - 1);
            if !config.full_path {
                break;
            }
        }
        let dropped = labels[active.remove(pos)].clone();
        rss = fit.rss;
        steps.push(TraceStep {
            active: active.clone(),
            labels: active.iter().map(|&j| labels[j].clone()).collect(),
            coefficients: fit.coefficients,
            loss: rss / n as f64,
            f_stat: Some(f),
            dropped: Some(dropped),
        });
    }
    let identified = identified.unwrap_or(steps.len() - 1);
    Ok(RegressionTrace { steps, identified, all_labels: lib.labels.clone(), target_label, n_rows: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysid::RegressionMethod;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
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

    fn random_chi(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn ols() -> StepwiseConfig {
        StepwiseConfig { regression_method: RegressionMethod::Ols, ..Default::default() }
    }

    #[test]
    fn recovers_exact_two_term_model() {
        let chi = random_chi(200, 5, 3);
        let y = chi.column(1) * 1.5 - chi.column(3) * 0.7;
        let t = stepwise_eliminate(&lib(chi, y), &ols()).unwrap();
        let m = t.model();
        assert_eq!(m.active, vec![1, 3]);
        assert!((m.coefficients[0] - 1.5).abs() < 1e-8);
        assert!((m.coefficients[1] + 0.7).abs() < 1e-8);
        for s in &t.steps[1..=t.identified] {
            assert!(s.f_stat.unwrap() < 1.0);
        }
        assert_eq!(t.steps.len(), t.identified + 1);
    }

    #[test]
    fn ridge_recovery_close() {
        let chi = random_chi(300, 5, 4);
        let y = chi.column(0) * 2.0 + chi.column(4) * 0.5;
        let t = stepwise_eliminate(&lib(chi, y), &StepwiseConfig::default()).unwrap();
        assert_eq!(t.model().active, vec![0, 4]);
        assert!((t.model().coefficients[0] - 2.0).abs() < 1e-5);
    }

    #[test]
    fn single_column() {
        let chi = random_chi(10, 1, 1);
        let y = chi.column(0) * 2.0;
        let t = stepwise_eliminate(&lib(chi, y), &ols()).unwrap();
        assert_eq!(t.steps.len(), 1);
        assert!(t.steps[0].dropped.is_none());
    }

    #[test]
    fn empty_library_rejected() {
        let l = lib(DMatrix::zeros(3, 0), DVector::from_element(3, 1.0));
        assert!(stepwise_eliminate(&l, &ols()).is_err());
    }

    #[test]
    fn zero_target_moves_column() {
        let chi0 = random_chi(50, 3, 9);
        let mut chi = DMatrix::zeros(50, 4);
        chi.view_mut((0, 1), (50, 3)).copy_from(&chi0);
        // column 0 = -(2 c1 + c3) so that chi * [1,2,0,1] = 0
        let c0 = -(chi0.column(0) * 2.0 + chi0.column(2));
        chi.set_column(0, &c0);
        let t = stepwise_eliminate(&lib(chi, DVector::zeros(50)), &ols()).unwrap();
        assert_eq!(t.target_label.as_deref(), Some("op0"));
        assert_eq!(t.retained_labels(), &["op1".to_string(), "op3".to_string()]);
        assert!((t.model().coefficients[0] + 2.0).abs() < 1e-10);
    }

    #[test]
    fn full_path_runs_to_one_term() {
        let chi = random_chi(100, 4, 5);
        let y = chi.column(0) + chi.column(2);
        let cfg = StepwiseConfig { full_path: true, ..ols() };
        let t = stepwise_eliminate(&lib(chi, y), &cfg).unwrap();
        assert_eq!(t.steps.len(), 4);
        assert_eq!(t.model().active, vec![0, 2]);
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let mut chi = random_chi(60, 3, 8);
        let c = chi.column(1).into_owned();
        chi.set_column(2, &c);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noise = DVector::from_fn(60, |_, _| rng.gen_range(-1e-3..1e-3));
        let y = chi.column(0) * 1.0 + noise;
        // ridge keeps the duplicated pair solvable
        let t = stepwise_eliminate(&lib(chi, y), &StepwiseConfig::default()).unwrap();
        assert_eq!(t.steps[1].dropped.as_deref(), Some("op1"));
    }

    #[test]
    fn csv_outputs() {
        let chi = random_chi(40, 3, 6);
        let y = chi.column(2) * 3.0;
        let t = stepwise_eliminate(&lib(chi, y), &ols()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        t.write_trace_csv(&dir.path().join("trace.csv")).unwrap();
        t.write_model_csv(&dir.path().join("model.csv")).unwrap();
        let tr = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
        assert!(tr.starts_with("iteration,n_terms,dropped,loss,F,op0,op1,op2"));
        assert_eq!(tr.lines().count(), t.steps.len() + 1);
        let m = std::fs::read_to_string(dir.path().join("model.csv")).unwrap();
        assert!(m.contains("op2,3.0000000000000"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn ols_loss_monotone_and_recomputable(seed in 0u64..1000, scale in 0.1f64..100.0) {
            let n = 80;
            let chi = random_chi(n, 5, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            let w: Vec<f64> = (0..5).map(|_| if rng.gen_bool(0.5) { rng.gen_range(-2.0..2.0) } else { 0.0 }).collect();
            let noise = DVector::from_fn(n, |_, _| rng.gen_range(-0.05..0.05));
            let y = &chi * DVector::from_vec(w) + noise;
            let cfg = StepwiseConfig { full_path: true, ..ols() };
            let t = stepwise_eliminate(&lib(chi.clone(), y.clone()), &cfg).unwrap();
            for k in 1..t.steps.len() {
                prop_assert!(t.steps[k].loss >= t.steps[k - 1].loss * (1.0 - 1e-12));
            }
            for k in 0..t.steps.len() {
                let om = DVector::from_vec(t.padded_coefficients(k));
                let direct = (&y - &chi * om).norm_squared() / n as f64;
                prop_assert!((direct - t.steps[k].loss).abs() <= 1e-12 * direct.max(1e-300) * 10.0 + 1e-14 * y.norm_squared() / n as f64);
            }
            let cfg = ols();
            let a = stepwise_eliminate(&lib(chi.clone(), y.clone()), &cfg).unwrap();
            let b = stepwise_eliminate(&lib(chi * scale, y * scale), &cfg).unwrap();
            prop_assert_eq!(&a.model().active, &b.model().active);
            prop_assert_eq!(a.identified, b.identified);
        }
    }
}
