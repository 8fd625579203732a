use matml::active_learning::*;
use matml::nn::{Activation, Idnn};
use matml::Error;

fn small() -> ActiveLearningConfig {
    ActiveLearningConfig {
        rounds: 3,
        global_initial: 64,
        global_batch: 16,
        local_batch: 32,
        screening_batch: 128,
        hidden: vec![8, 8],
        search_grid: vec![vec![8, 8], vec![4, 4]],
        search_epochs: 20,
        epochs: 40,
        slice_resolution: 5,
        ..ActiveLearningConfig::default()
    }
}

fn empty_state(idnn: Idnn, seed: u64) -> WorkflowState {
    WorkflowState { round: 0, samples: vec![], idnn, seed, last_loss: None, search: None, logs: vec![] }
}

#[test]
fn global_batch_growth_determinism_and_coverage() {
    let o = synthetic_oracle();
    let c = ActiveLearningConfig { global_initial: 16, ..small() };
    let mut a = WorkflowState::new(&o, &c).unwrap();
    let mut b = WorkflowState::new(&o, &c).unwrap();
    assert_eq!(global_sampling(&mut a, &o, &c, 0).unwrap(), 16);
    global_sampling(&mut b, &o, &c, 0).unwrap();
    assert_eq!(a.samples, b.samples);
    for k in 0..4 {
        let mut q = [false; 4];
        for s in &a.samples {
            let u = (s.eta[k] - o.lower[k]) / (o.upper[k] - o.lower[k]);
            q[((u * 4.0) as usize).min(3)] = true;
        }
        assert!(q.iter().all(|v| *v), "axis {k} misses a quartile");
    }
    assert_eq!(global_sampling(&mut a, &o, &c, 2).unwrap(), c.global_batch);
    assert_eq!(a.samples.len(), 16 + c.global_batch);
}

#[test]
fn training_fits_quadratic_gradients() {
    let o = synthetic_oracle();
    let c = ActiveLearningConfig { epochs: 300, batch_size: 20, lr_decay: 0.02, ..small() };
    let mut st = WorkflowState::new(&o, &c).unwrap();
    let coef = [1.0, 2.0, 0.5, 1.5];
    let pts = latin_hypercube(200, &o.lower, &o.upper, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(4));
    for p in pts {
        let mu = (0..4).map(|k| 2.0 * coef[k] * p[k]).collect();
        st.samples.push(Sample { round: 0, stream: Stream::Global, eta: p, mu });
    }
    let loss = surrogate_training(&mut st, &c, 0).unwrap();
    assert!(loss.is_finite() && st.last_loss == Some(loss));
    let mut se = 0.0;
    let mut n = 0;
    for s in &st.samples {
        for (a, b) in st.idnn.gradient(&s.eta).unwrap().iter().zip(&s.mu) {
            se += (a - b).powi(2);
            n += 1;
        }
    }
    let rmse = (se / n as f64).sqrt();
    assert!(rmse < 1e-2, "gradient rmse {rmse}");

    let before = st.idnn.net().params();
    let c0 = ActiveLearningConfig { epochs: 0, ..c };
    assert_eq!(surrogate_training(&mut st, &c0, 1).unwrap(), loss);
    assert_eq!(st.idnn.net().params(), before);
}

#[test]
fn training_needs_data() {
    let o = synthetic_oracle();
    let c = small();
    let mut st = WorkflowState::new(&o, &c).unwrap();
    assert!(matches!(surrogate_training(&mut st, &c, 0), Err(Error::Data(_))));
}

#[test]
fn concave_surrogate_gives_only_error_samples() {
    let o = synthetic_oracle();
    let c = small();
    let idnn = Idnn::new(4, &[12], Activation::Softplus, 3).unwrap();
    // negative output weights on convex units: concave everywhere
    idnn.update(|m| {
        let w = &mut m.net.weights_mut()[1];
        for v in w.iter_mut() {
            *v = -v.abs() - 0.1;
        }
    });
    let mut st = empty_state(idnn, 1);
    global_sampling(&mut st, &o, &c, 0).unwrap();
    let (a, b) = local_sampling(&mut st, &o, &c, 1).unwrap();
    assert_eq!((a, b), (0, c.local_batch - c.local_batch / 2));
    assert!(st.samples.iter().all(|s| s.stream != Stream::Convexity));
}

#[test]
fn exact_surrogate_falls_back_to_uniform_choice() {
    let o = Oracle { scale: 0.0, ..synthetic_oracle() };
    let c = ActiveLearningConfig { convexity_fraction: 0.0, ..small() };
    let idnn = Idnn::new(4, &[6], Activation::Softplus, 0).unwrap();
    idnn.update(|m| m.net.weights_mut()[1].fill(0.0));
    let mut st = empty_state(idnn.deep_clone(), 5);
    global_sampling(&mut st, &o, &c, 0).unwrap();
    let (_, b) = local_sampling(&mut st, &o, &c, 1).unwrap();
    assert_eq!(b, c.local_batch);
    let mut again = empty_state(idnn, 5);
    global_sampling(&mut again, &o, &c, 0).unwrap();
    local_sampling(&mut again, &o, &c, 1).unwrap();
    assert_eq!(st.samples, again.samples);
    // a uniform choice does not favour the first screened points
    let err: Vec<&Sample> = st.samples.iter().filter(|s| s.stream == Stream::Error).collect();
    assert!(err.windows(2).any(|w| w[0].eta != w[1].eta));
}

#[test]
fn search_selects_argmin_and_is_seeded() {
    let o = synthetic_oracle();
    let c = small();
    let mut st = WorkflowState::new(&o, &c).unwrap();
    global_sampling(&mut st, &o, &c, 0).unwrap();
    let mut st2 = WorkflowState::new(&o, &c).unwrap();
    global_sampling(&mut st2, &o, &c, 0).unwrap();
    let r = hyperparameter_search(&mut st, &c, 1).unwrap();
    let r2 = hyperparameter_search(&mut st2, &c, 1).unwrap();
    assert_eq!(r, r2);
    assert!(r.validation_loss.iter().all(|l| r.validation_loss[r.selected] <= *l));
    assert_eq!(st.idnn.hidden_widths(), r.selected_widths());
    assert!(st.idnn.model().transforms.is_some());

    let one = ActiveLearningConfig { search_grid: vec![vec![5]], ..small() };
    assert_eq!(hyperparameter_search(&mut st, &one, 1).unwrap().selected, 0);
    assert_eq!(st.idnn.hidden_widths(), vec![5]);
    let none = ActiveLearningConfig { search_grid: vec![], ..small() };
    assert!(matches!(hyperparameter_search(&mut st, &none, 1), Err(Error::Config(_))));
}

#[test]
fn one_round_skips_search() {
    let o = synthetic_oracle();
    let c = ActiveLearningConfig { rounds: 1, search_grid: vec![], ..small() };
    let st = main_workflow(&o, &c, None).unwrap();
    assert!(st.search.is_none());
    assert_eq!(st.logs.len(), 1);
    assert_eq!(st.samples.len(), c.global_initial + c.local_batch);
}

#[test]
fn zero_local_batch_grows_by_global_only() {
    let o = synthetic_oracle();
    let c = ActiveLearningConfig { local_batch: 0, ..small() };
    let st = main_workflow(&o, &c, None).unwrap();
    assert_eq!(st.samples.len(), c.global_initial + 2 * c.global_batch);
    assert!(st.samples.iter().all(|s| s.stream == Stream::Global));
}

#[test]
fn accounting_logs_and_reconstruction() {
    let o = synthetic_oracle();
    let c = small();
    let dir = tempfile::tempdir().unwrap();
    let st = main_workflow(&o, &c, Some(dir.path())).unwrap();
    let mut total = 0;
    let mut prev = 0;
    for (r, l) in st.logs.iter().enumerate() {
        assert_eq!(l.round, r);
        total += l.n_global + l.n_convexity + l.n_error;
        assert_eq!(l.dataset_size, total);
        assert!(l.dataset_size > prev);
        assert!(l.train_loss.is_finite());
        prev = l.dataset_size;
    }
    assert!(st.logs[1].validation_loss.is_some() && st.logs[0].validation_loss.is_none());
    let text = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    assert_eq!(read_samples(&text).unwrap(), st.samples);
    for r in 0..c.rounds {
        let s = std::fs::read_to_string(dir.path().join(format!("slice_round_{r:02}.csv"))).unwrap();
        assert_eq!(s.lines().count(), 1 + c.slice_resolution * c.slice_resolution);
    }
    let saved = Idnn::load(&dir.path().join("idnn.txt")).unwrap();
    assert_eq!(saved.value(&[0.1, 0.05, -0.1, 0.2]).unwrap(), st.idnn.value(&[0.1, 0.05, -0.1, 0.2]).unwrap());

    let dir2 = tempfile::tempdir().unwrap();
    main_workflow(&o, &c, Some(dir2.path())).unwrap();
    for f in ["samples.csv", "rounds.csv", "search.csv", "slice_round_02.csv"] {
        assert_eq!(std::fs::read(dir.path().join(f)).unwrap(), std::fs::read(dir2.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn duplicate_radius_thins_local_samples() {
    let o = synthetic_oracle();
    let c = ActiveLearningConfig { rounds: 2, dedup_radius: 0.05, ..small() };
    let st = main_workflow(&o, &c, None).unwrap();
    let total: usize = st.logs.iter().map(|l| l.n_global + l.n_convexity + l.n_error).sum();
    assert_eq!(total, st.samples.len());
    for (i, a) in st.samples.iter().enumerate() {
        for b in &st.samples[..i] {
            let d: f64 = a.eta.iter().zip(&b.eta).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            assert!(d >= 0.05);
        }
    }
}

#[test]
fn samples_concentrate_in_wells() {
    let o = synthetic_oracle();
    let c = ActiveLearningConfig { rounds: 6, epochs: 100, ..small() };
    let st = main_workflow(&o, &c, None).unwrap();
    let f: Vec<f64> = st.logs.iter().map(|l| l.in_well_fraction).collect();
    assert!(f[5] > f[0], "{f:?}");
}
