use super::idnn::Idnn;
use super::train::{train_idnn, LossWeights, TrainConfig, TrainReport, TrainingData};
use crate::error::{Error, Result};

/// Sum of a pre-trained base net and a detail net scaled by `detail_scale`.
#[derive(Debug, Clone)]
pub struct MultiResolution {
    pub base: Idnn,
    pub detail: Idnn,
    pub detail_scale: f64,
}

impl MultiResolution {
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.base.value(x)? + self.detail_scale * self.detail.value(x)?)
    }

    pub fn values(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        let b = self.base.values(points)?;
        let d = self.detail.values(points)?;
        Ok(b.iter().zip(&d).map(|(b, d)| b + self.detail_scale * d).collect())
    }

    pub fn gradients(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let b = self.base.gradients(points)?;
        let d = self.detail.gradients(points)?;
        Ok(b.iter()
            .zip(&d)
            .map(|(b, d)| b.iter().zip(d).map(|(b, d)| b + self.detail_scale * d).collect())
            .collect())
    }
}

/// Trains `detail` on the residual `Ψ - base(x)`. With `beta > 0` the loss
/// adds `β‖∇(base + detail) - reference‖²` per sample.
///
/// Residual labels are divided by their RMS so the detail net fits
/// order-one targets; the scale is folded back into the prediction. The
/// detail net's output layer is zeroed first, so training starts from the
/// base model.
pub fn multi_resolution_fit(
    base: &Idnn,
    detail: Idnn,
    points: &[Vec<f64>],
    values: &[f64],
    beta: f64,
    reference_gradients: Option<&[Vec<f64>]>,
    config: &TrainConfig,
) -> Result<(MultiResolution, TrainReport)> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Config(format!("beta must be >= 0, got {beta}")));
    }
    if beta > 0.0 && reference_gradients.is_none() {
        return Err(Error::Config("gradient penalty needs reference gradients".into()));
    }
    if points.len() != values.len() {
        return Err(Error::Shape(format!("{} points, {} values", points.len(), values.len())));
    }
    if detail.input_dim() != base.input_dim() {
        return Err(Error::Shape("base and detail nets take different inputs".into()));
    }
    let base_vals = base.values(points)?;
    let resid: Vec<f64> = values.iter().zip(&base_vals).map(|(y, b)| y - b).collect();
    let rms = (resid.iter().map(|r| r * r).sum::<f64>() / resid.len().max(1) as f64).sqrt();
    let scale = if rms > 0.0 && rms.is_finite() { rms } else { 1.0 };
    let mut data = TrainingData::from_values(points.to_vec(), resid.iter().map(|r| r / scale).collect());
    if beta > 0.0 {
        let refs = reference_gradients.unwrap();
        if refs.len() != points.len() {
            return Err(Error::Shape("one reference gradient per point required".into()));
        }
        let bg = base.gradients(points)?;
        data.gradients = Some(
            refs.iter()
                .zip(&bg)
                .map(|(r, b)| r.iter().zip(b).map(|(r, b)| (r - b) / scale).collect())
                .collect(),
        );
    }
    detail.update(|m| {
        let nl = m.net.weights().len();
        m.net.weights_mut()[nl - 1].fill(0.0);
        m.net.biases_mut()[nl - 1].fill(0.0);
    });
    let cfg = TrainConfig { weights: LossWeights { value: 1.0, gradient: beta, hessian: 0.0 }, ..config.clone() };
    let report = train_idnn(&detail, &data, &cfg)?;
    Ok((MultiResolution { base: base.clone(), detail, detail_scale: scale }, report))
}
