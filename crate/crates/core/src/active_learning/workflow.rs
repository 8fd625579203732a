use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ActiveLearningConfig;
use super::oracle::Oracle;
use super::sampling::{duplicate_filter, latin_hypercube, perturb, uniform};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::nn::{evaluate_loss, is_convex, train_idnn, Idnn, LossWeights, Optimizer, TrainConfig, TrainingData, Transform, TransformLayer};

/// Which criterion produced a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Global,
    Convexity,
    Error,
}

impl Stream {
    pub fn name(self) -> &'static str {
        match self {
            Stream::Global => "global",
            Stream::Convexity => "convexity",
            Stream::Error => "error",
        }
    }

    pub fn from_name(s: &str) -> Result<Stream> {
        match s {
            "global" => Ok(Stream::Global),
            "convexity" => Ok(Stream::Convexity),
            "error" => Ok(Stream::Error),
            _ => Err(Error::Data(format!("unknown sample stream '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub round: usize,
    pub stream: Stream,
    pub eta: Vec<f64>,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub candidates: Vec<Vec<usize>>,
    pub validation_loss: Vec<f64>,
    pub selected: usize,
}

impl SearchResult {
    pub fn selected_widths(&self) -> &[usize] {
        &self.candidates[self.selected]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub round: usize,
    pub dataset_size: usize,
    pub n_global: usize,
    pub n_convexity: usize,
    pub n_error: usize,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
    pub hidden: Vec<usize>,
    /// Known well centres flagged convex by the surrogate.
    pub wells_convex: usize,
    pub in_well_fraction: f64,
}

pub struct WorkflowState {
    pub round: usize,
    pub samples: Vec<Sample>,
    pub idnn: Idnn,
    pub seed: u64,
    pub last_loss: Option<f64>,
    pub search: Option<SearchResult>,
    pub logs: Vec<RoundLog>,
}

/// Independent generator per (call tag, purpose).
fn rng_for(seed: u64, tag: usize, purpose: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(tag as u64 * 16 + purpose);
    r
}

/// Rescales η₀ to [-1, 1]; η₁..η₃ are squared after scaling when
/// `symmetric`, otherwise rescaled like η₀.
pub fn input_layer(oracle: &Oracle, symmetric: bool) -> Result<TransformLayer> {
    let d = oracle.dim();
    let mut ts = Vec::with_capacity(d);
    for k in 0..d {
        let (lo, hi) = (oracle.lower[k], oracle.upper[k]);
        if k > 0 && symmetric {
            ts.push(Transform::Square { index: k, shift: 0.0, scale: lo.abs().max(hi.abs()) });
        } else {
            ts.push(Transform::Affine { index: k, shift: 0.5 * (lo + hi), scale: 0.5 * (hi - lo) });
        }
    }
    TransformLayer::new(d, ts)
}

impl WorkflowState {
    pub fn new(oracle: &Oracle, config: &ActiveLearningConfig) -> Result<WorkflowState> {
        config.validate()?;
        let layer = input_layer(oracle, config.symmetric_inputs)?;
        let idnn = Idnn::with_transforms(layer, &config.hidden, config.activation, config.seed)?;
        Ok(WorkflowState { round: 0, samples: Vec::new(), idnn, seed: config.seed, last_loss: None, search: None, logs: Vec::new() })
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.eta.clone()).collect()
    }

    pub fn training_data(&self) -> TrainingData {
        TrainingData::from_gradients(self.points(), self.samples.iter().map(|s| s.mu.clone()).collect())
    }

    fn append(&mut self, oracle: &Oracle, pts: Vec<Vec<f64>>, stream: Stream, radius: f64) -> Result<usize> {
        let keep = duplicate_filter(&pts, &self.points(), radius);
        let mut n = 0;
        for (p, k) in pts.into_iter().zip(keep) {
            if k {
                let mu = oracle.mu(&p)?;
                self.samples.push(Sample { round: self.round, stream, eta: p, mu });
                n += 1;
            }
        }
        Ok(n)
    }
}

/// Latin-hypercube batch over the oracle box; returns the number appended.
pub fn global_sampling(state: &mut WorkflowState, oracle: &Oracle, config: &ActiveLearningConfig, tag: usize) -> Result<usize> {
    let n = if tag == 0 { config.global_initial } else { config.global_batch };
    let mut rng = rng_for(state.seed, tag, 0);
    let pts = latin_hypercube(n, &oracle.lower, &oracle.upper, &mut rng);
    state.append(oracle, pts, Stream::Global, config.dedup_radius)
}

fn train_config(config: &ActiveLearningConfig, epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: config.learning_rate,
        epochs,
        batch_size: config.batch_size,
        optimizer: Optimizer::rmsprop(),
        seed,
        weights: LossWeights::default(),
        lr_decay: config.lr_decay,
    }
}

/// Trains the working network on every sample so far and records the
/// full-dataset loss.
pub fn surrogate_training(state: &mut WorkflowState, config: &ActiveLearningConfig, rnd: usize) -> Result<f64> {
    if state.samples.is_empty() {
        return Err(Error::Data("surrogate training needs a non-empty dataset".into()));
    }
    let data = state.training_data();
    if config.epochs > 0 {
        let seed = state.seed.wrapping_add(1_000 + rnd as u64);
        train_idnn(&state.idnn, &data, &train_config(config, config.epochs, seed))?;
    } else if let Some(l) = state.last_loss {
        return Ok(l);
    }
    let loss = evaluate_loss(&state.idnn, &data, &LossWeights::default())?;
    state.last_loss = Some(loss);
    Ok(loss)
}

/// Convexity- and error-guided sampling. Returns the counts appended per
/// stream.
pub fn local_sampling(
    state: &mut WorkflowState,
    oracle: &Oracle,
    config: &ActiveLearningConfig,
    tag: usize,
) -> Result<(usize, usize)> {
    if config.local_batch == 0 {
        return Ok((0, 0));
    }
    let n_conv = (config.local_batch as f64 * config.convexity_fraction).round() as usize;
    let n_err = config.local_batch - n_conv;
    let mut rng = rng_for(state.seed, tag, 1);

    let mut candidates = uniform(config.screening_batch, &oracle.lower, &oracle.upper, &mut rng);
    candidates.extend(state.points());
    let flags = is_convex(&state.idnn, &candidates)?;
    let convex: Vec<&Vec<f64>> = candidates.iter().zip(&flags).filter(|(_, f)| **f).map(|(c, _)| c).collect();
    let sigma: Vec<f64> = oracle.lower.iter().zip(&oracle.upper).map(|(l, u)| config.perturbation * (u - l)).collect();
    // wells are convex stationary points: centre on the flattest convex
    // candidates
    let mut conv_pts = Vec::new();
    if !convex.is_empty() && n_conv > 0 {
        let pts: Vec<Vec<f64>> = convex.iter().map(|c| (*c).clone()).collect();
        let slope: Vec<f64> = state.idnn.gradients(&pts)?.iter().map(|g| g.iter().map(|v| v * v).sum()).collect();
        let mut order: Vec<usize> = (0..pts.len()).collect();
        order.sort_by(|&a, &b| slope[a].total_cmp(&slope[b]).then(a.cmp(&b)));
        for i in 0..n_conv {
            let c = &pts[order[i % order.len().min(n_conv)]];
            conv_pts.push(perturb(c, &sigma, &oracle.lower, &oracle.upper, &mut rng));
        }
    }

    let screen = uniform(config.screening_batch.max(n_err), &oracle.lower, &oracle.upper, &mut rng);
    let pred = state.idnn.gradients(&screen)?;
    let mut scores = Vec::with_capacity(screen.len());
    let mut mu_max = 0.0f64;
    for (p, g) in screen.iter().zip(&pred) {
        let mu = oracle.mu(p)?;
        mu_max = mu.iter().fold(mu_max, |m, v| m.max(v.abs()));
        scores.push(mu.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
    }
    let top = scores.iter().cloned().fold(0.0, f64::max);
    let mut idx: Vec<usize> = (0..screen.len()).collect();
    if top <= 1e-12 * (1.0 + mu_max) {
        idx.shuffle(&mut rng);
    } else {
        idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    }
    let err_pts: Vec<Vec<f64>> = idx[..n_err].iter().map(|&i| screen[i].clone()).collect();

    let a = state.append(oracle, conv_pts, Stream::Convexity, config.dedup_radius)?;
    let b = state.append(oracle, err_pts, Stream::Error, config.dedup_radius)?;
    Ok((a, b))
}

/// Short training of each grid shape on an 80/20 split; the lowest
/// validation loss wins (first on ties) and replaces the working network,
/// keeping its input transforms.
pub fn hyperparameter_search(state: &mut WorkflowState, config: &ActiveLearningConfig, rnd: usize) -> Result<SearchResult> {
    if config.search_grid.is_empty() {
        return Err(Error::Config("hyperparameter search grid is empty".into()));
    }
    let n = state.samples.len();
    if n < 2 {
        return Err(Error::Data("hyperparameter search needs at least two samples".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(state.seed, rnd, 2));
    let n_val = ((n as f64 * config.validation_fraction).round() as usize).clamp(1, n - 1);
    let subset = |rows: &[usize]| {
        TrainingData::from_gradients(
            rows.iter().map(|&i| state.samples[i].eta.clone()).collect(),
            rows.iter().map(|&i| state.samples[i].mu.clone()).collect(),
        )
    };
    let val = subset(&idx[..n_val]);
    let train = subset(&idx[n_val..]);
    let model = state.idnn.model();
    let mut losses = Vec::with_capacity(config.search_grid.len());
    let mut best: Option<(usize, Idnn)> = None;
    for (i, widths) in config.search_grid.iter().enumerate() {
        let seed = state.seed.wrapping_add(100 * (rnd as u64 + 1) + i as u64);
        let cand = match &model.transforms {
            Some(t) => Idnn::with_transforms(t.clone(), widths, config.activation, seed)?,
            None => Idnn::new(model.input_dim(), widths, config.activation, seed)?,
        };
        train_idnn(&cand, &train, &train_config(config, config.search_epochs, seed))?;
        let l = evaluate_loss(&cand, &val, &LossWeights::default())?;
        let better = match &best {
            None => true,
            Some((b, _)) => l < losses[*b],
        };
        losses.push(l);
        if better {
            best = Some((i, cand));
        }
    }
    let (selected, net) = best.expect("grid is non-empty");
    state.idnn = net;
    Ok(SearchResult { candidates: config.search_grid.clone(), validation_loss: losses, selected })
}

/// Fraction of samples within `radius` (range-normalised) of a well centre.
pub fn in_well_fraction(oracle: &Oracle, samples: &[Sample], radius: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let wells = oracle.well_centers();
    let inside = samples
        .iter()
        .filter(|s| {
            wells.iter().any(|w| {
                let d2: f64 = (0..oracle.dim())
                    .map(|k| ((s.eta[k] - w[k]) / (oracle.upper[k] - oracle.lower[k])).powi(2))
                    .sum();
                d2 < radius * radius
            })
        })
        .count();
    inside as f64 / samples.len() as f64
}

/// Long-format `eta_0, eta_1, f_hat, f_oracle` grid at η₂ = η₃ = 0, with
/// the surrogate shifted so that it vanishes at η = 0.
pub fn slice_csv(idnn: &Idnn, oracle: &Oracle, resolution: usize) -> Result<String> {
    let mut pts = Vec::with_capacity(resolution * resolution);
    let axis = |k: usize, i: usize| oracle.lower[k] + (oracle.upper[k] - oracle.lower[k]) * i as f64 / (resolution - 1) as f64;
    for i in 0..resolution {
        for j in 0..resolution {
            pts.push(vec![axis(0, i), axis(1, j), 0.0, 0.0]);
        }
    }
    let f0 = idnn.value(&[0.0; 4])?;
    let vals = idnn.values(&pts)?;
    let mut out = String::from("eta_0,eta_1,f_hat,f_oracle\n");
    for (p, v) in pts.iter().zip(vals) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(p[0]),
            fmt_f64(p[1]),
            fmt_f64(v - f0),
            fmt_f64(oracle.energy(p)?)
        ));
    }
    Ok(out)
}

pub fn samples_csv(samples: &[Sample]) -> String {
    let d = samples.first().map_or(0, |s| s.eta.len());
    let mut out = String::from("round,stream");
    for k in 0..d {
        out.push_str(&format!(",eta_{k}"));
    }
    for k in 0..d {
        out.push_str(&format!(",mu_{k}"));
    }
    out.push('\n');
    for s in samples {
        out.push_str(&format!("{},{}", s.round, s.stream.name()));
        for v in s.eta.iter().chain(&s.mu) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`samples_csv`].
pub fn read_samples(text: &str) -> Result<Vec<Sample>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let ncols = rdr.headers()?.len();
    if ncols < 2 || (ncols - 2) % 2 != 0 {
        return Err(Error::Data("sample log needs round, stream and paired eta/mu columns".into()));
    }
    let d = (ncols - 2) / 2;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| {
            rec[i].parse::<f64>().map_err(|_| Error::Data(format!("sample log row {}: bad number '{}'", line + 1, &rec[i])))
        };
        let round = rec[0].parse::<usize>().map_err(|_| Error::Data(format!("sample log row {}: bad round", line + 1)))?;
        let eta = (0..d).map(|k| num(2 + k)).collect::<Result<Vec<_>>>()?;
        let mu = (0..d).map(|k| num(2 + d + k)).collect::<Result<Vec<_>>>()?;
        out.push(Sample { round, stream: Stream::from_name(&rec[1])?, eta, mu });
    }
    Ok(out)
}

pub fn rounds_csv(logs: &[RoundLog]) -> String {
    let mut out = String::from(
        "round,dataset_size,n_global,n_convexity,n_error,train_loss,validation_loss,hidden,wells_convex,in_well_fraction\n",
    );
    for l in logs {
        let hidden: Vec<String> = l.hidden.iter().map(|w| w.to_string()).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            l.round,
            l.dataset_size,
            l.n_global,
            l.n_convexity,
            l.n_error,
            fmt_f64(l.train_loss),
            l.validation_loss.map(fmt_f64).unwrap_or_default(),
            hidden.join("x"),
            l.wells_convex,
            fmt_f64(l.in_well_fraction)
        ));
    }
    out
}

/// The round loop: global sampling, the search at round 1, training, then
/// local sampling. With `out_dir` it writes `rounds.csv`, `samples.csv`,
/// `search.csv`, one `slice_round_NN.csv` per round and `idnn.txt`.
pub fn main_workflow(oracle: &Oracle, config: &ActiveLearningConfig, out_dir: Option<&Path>) -> Result<WorkflowState> {
    let mut state = WorkflowState::new(oracle, config)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let wells = oracle.well_centers();
    for rnd in 0..config.rounds {
        state.round = rnd;
        let n_global = global_sampling(&mut state, oracle, config, 2 * rnd)?;
        let mut validation_loss = None;
        if rnd == 1 {
            let s = hyperparameter_search(&mut state, config, rnd)?;
            validation_loss = Some(s.validation_loss[s.selected]);
            state.search = Some(s);
        }
        let train_loss = surrogate_training(&mut state, config, rnd)?;
        let (n_convexity, n_error) = local_sampling(&mut state, oracle, config, 2 * rnd + 1)?;
        let wells_convex = is_convex(&state.idnn, &wells)?.iter().filter(|f| **f).count();
        state.logs.push(RoundLog {
            round: rnd,
            dataset_size: state.samples.len(),
            n_global,
            n_convexity,
            n_error,
            train_loss,
            validation_loss,
            hidden: state.idnn.hidden_widths(),
            wells_convex,
            in_well_fraction: in_well_fraction(oracle, &state.samples, config.well_radius),
        });
        if let Some(dir) = out_dir {
            std::fs::write(dir.join(format!("slice_round_{rnd:02}.csv")), slice_csv(&state.idnn, oracle, config.slice_resolution)?)?;
        }
    }
    if let Some(dir) = out_dir {
        std::fs::write(dir.join("rounds.csv"), rounds_csv(&state.logs))?;
        std::fs::write(dir.join("samples.csv"), samples_csv(&state.samples))?;
        if let Some(s) = &state.search {
            let mut t = String::from("hidden,validation_loss,selected\n");
            for (i, (c, l)) in s.candidates.iter().zip(&s.validation_loss).enumerate() {
                let w: Vec<String> = c.iter().map(|x| x.to_string()).collect();
                t.push_str(&format!("{},{},{}\n", w.join("x"), fmt_f64(*l), u8::from(i == s.selected)));
            }
            std::fs::write(dir.join("search.csv"), t)?;
        }
        state.idnn.save(&dir.join("idnn.txt"))?;
    }
    Ok(state)
}
