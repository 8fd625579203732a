use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dense::{backprop, Depth};
use super::idnn::{Idnn, Model};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    /// `v ← ρv + (1-ρ)g²`, `θ ← θ - lr·g/(√v + ε)`.
    RmsProp { rho: f64, eps: f64 },
}

impl Optimizer {
    pub fn rmsprop() -> Optimizer {
        Optimizer::RmsProp { rho: 0.9, eps: 1e-7 }
    }
}

/// Weights of the function-value, gradient and Hessian loss channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub value: f64,
    pub gradient: f64,
    pub hessian: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { value: 1.0, gradient: 1.0, hessian: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub weights: LossWeights,
    /// Inverse-time decay: the rate at epoch `e` is `lr / (1 + decay·e)`.
    pub lr_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 1000,
            batch_size: 20,
            optimizer: Optimizer::rmsprop(),
            seed: 0,
            weights: LossWeights::default(),
            lr_decay: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if !(self.lr_decay >= 0.0 && self.lr_decay.is_finite()) {
            return Err(Error::Config(format!("lr_decay must be >= 0, got {}", self.lr_decay)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        let w = self.weights;
        if [w.value, w.gradient, w.hessian].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Config("loss weights must be finite and >= 0".into()));
        }
        if let Optimizer::RmsProp { rho, eps } = self.optimizer {
            if !(0.0..1.0).contains(&rho) || !(eps > 0.0) {
                return Err(Error::Config(format!("bad RMSprop constants rho {rho}, eps {eps}")));
            }
        }
        Ok(())
    }
}

/// Training samples; any subset of the three channels may be present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingData {
    pub points: Vec<Vec<f64>>,
    pub values: Option<Vec<f64>>,
    pub gradients: Option<Vec<Vec<f64>>>,
    pub hessians: Option<Vec<DMatrix<f64>>>,
}

impl TrainingData {
    pub fn from_gradients(points: Vec<Vec<f64>>, gradients: Vec<Vec<f64>>) -> TrainingData {
        TrainingData { points, gradients: Some(gradients), ..Default::default() }
    }

    pub fn from_values(points: Vec<Vec<f64>>, values: Vec<f64>) -> TrainingData {
        TrainingData { points, values: Some(values), ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let n = self.points.len();
        if n == 0 {
            return Err(Error::Data("empty training data".into()));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        for (i, p) in self.points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::Shape(format!("point {i} has {} coordinates, expected {dim}", p.len())));
            }
            if !finite(p) {
                return Err(Error::Data(format!("point {i} is not finite")));
            }
        }
        if let Some(v) = &self.values {
            if v.len() != n || !finite(v) {
                return Err(Error::Data("function values must be finite, one per point".into()));
            }
        }
        if let Some(g) = &self.gradients {
            if g.len() != n || g.iter().any(|r| r.len() != dim || !finite(r)) {
                return Err(Error::Data(format!("gradients must be finite, {dim} per point")));
            }
        }
        if let Some(h) = &self.hessians {
            if h.len() != n || h.iter().any(|m| m.shape() != (dim, dim) || !finite(m.as_slice())) {
                return Err(Error::Data(format!("Hessians must be finite {dim}x{dim}, one per point")));
            }
        }
        Ok(())
    }

    fn channels(&self, w: &LossWeights) -> (bool, bool, bool) {
        (
            self.values.is_some() && w.value > 0.0,
            self.gradients.is_some() && w.gradient > 0.0,
            self.hessians.is_some() && w.hessian > 0.0,
        )
    }
}

/// Per-epoch mean of the batch losses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epoch_loss: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_loss.last().copied()
    }
}

/// Loss on the rows `rows` and its gradient with respect to the net
/// parameters (layout of `DenseNet::params`). The loss is the sum over
/// channels and components of the batch-mean squared error.
pub fn loss_and_gradient(model: &Model, data: &TrainingData, rows: &[usize], w: &LossWeights) -> Result<(f64, Vec<f64>)> {
    let (cv, cg, ch) = data.channels(w);
    if !(cv || cg || ch) {
        return Err(Error::Config("no active loss channel".into()));
    }
    let depth = if ch { Depth::Hessian } else if cg { Depth::Gradient } else { Depth::Value };
    let pts: Vec<&[f64]> = rows.iter().map(|&r| data.points[r].as_slice()).collect();
    let tape = model.tape(&pts, depth)?;
    let (b, d) = (rows.len(), tape.d);
    let inv = 1.0 / b as f64;
    let mut loss = 0.0;
    let mut sv = DVector::zeros(b);
    if cv {
        let y = data.values.as_ref().unwrap();
        for (s, &r) in rows.iter().enumerate() {
            let e = tape.out_val[s] - y[r];
            loss += w.value * e * e * inv;
            sv[s] = 2.0 * w.value * e * inv;
        }
    }
    let st = cg.then(|| {
        let g = data.gradients.as_ref().unwrap();
        let t = tape.out_tan.as_ref().unwrap();
        let mut seed = DVector::zeros(b * d);
        for (s, &r) in rows.iter().enumerate() {
            for k in 0..d {
                let e = t[s * d + k] - g[r][k];
                loss += w.gradient * e * e * inv;
                seed[s * d + k] = 2.0 * w.gradient * e * inv;
            }
        }
        seed
    });
    let sh = ch.then(|| {
        let h = data.hessians.as_ref().unwrap();
        let t = tape.out_hess.as_ref().unwrap();
        let mut seed = DVector::zeros(b * d * d);
        for (s, &r) in rows.iter().enumerate() {
            for k in 0..d {
                for l in 0..d {
                    let c = (s * d + k) * d + l;
                    let e = t[c] - h[r][(k, l)];
                    loss += w.hessian * e * e * inv;
                    seed[c] = 2.0 * w.hessian * e * inv;
                }
            }
        }
        seed
    });
    let grad = backprop(&model.net, &tape, &sv, st.as_ref(), sh.as_ref())?;
    Ok((loss, grad))
}

/// Loss over the whole data set.
pub fn evaluate_loss(idnn: &Idnn, data: &TrainingData, w: &LossWeights) -> Result<f64> {
    data.validate(idnn.input_dim())?;
    idnn.read(|m| {
        let mut total = 0.0;
        let all: Vec<usize> = (0..data.len()).collect();
        for chunk in all.chunks(256) {
            let (l, _) = loss_and_gradient(m, data, chunk, w)?;
            total += l * chunk.len() as f64;
        }
        Ok(total / data.len() as f64)
    })
}

/// Mini-batch training of `idnn` in place.
pub fn train_idnn(idnn: &Idnn, data: &TrainingData, config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    data.validate(idnn.input_dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut model = idnn.model();
    let mut params = model.net.params();
    let mut acc = vec![0.0; params.len()];
    let mut report = TrainReport::default();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let lr = config.learning_rate / (1.0 + config.lr_decay * epoch as f64);
        let mut sum = 0.0;
        let mut count = 0usize;
        for (bi, rows) in order.chunks(config.batch_size).enumerate() {
            let (loss, grad) = loss_and_gradient(&model, data, rows, &config.weights)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Solver(format!("training diverged: non-finite loss at epoch {epoch}, batch {bi}")));
            }
            sum += loss * rows.len() as f64;
            count += rows.len();
            match config.optimizer {
                Optimizer::Sgd => {
                    for (p, g) in params.iter_mut().zip(&grad) {
                        *p -= lr * g;
                    }
                }
                Optimizer::RmsProp { rho, eps } => {
                    for ((p, g), v) in params.iter_mut().zip(&grad).zip(acc.iter_mut()) {
                        *v = rho * *v + (1.0 - rho) * g * g;
                        *p -= lr * g / (v.sqrt() + eps);
                    }
                }
            }
            model.net.set_params(&params)?;
        }
        report.epoch_loss.push(sum / count as f64);
    }
    idnn.update(|m| m.net = model.net);
    Ok(report)
}
