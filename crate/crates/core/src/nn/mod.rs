//! Dense networks with exact input gradients and Hessians, trained on
//! derivative data (integrable networks). The forward output of a net fit
//! to gradient data is the antiderivative.

mod activation;
mod dense;
mod idnn;
mod multires;
mod train;
mod transform;

pub use activation::Activation;
pub use dense::DenseNet;
pub use idnn::{is_convex, Antiderivative, Idnn, Model};
pub use multires::{multi_resolution_fit, MultiResolution};
pub use train::{evaluate_loss, loss_and_gradient, train_idnn, LossWeights, Optimizer, TrainConfig, TrainReport, TrainingData};
pub use transform::{Transform, TransformFn, TransformLayer};

use crate::error::Result;
use nalgebra::DMatrix;

/// Network output `Y(X)`.
pub fn forward(idnn: &Idnn, x: &[f64]) -> Result<f64> {
    idnn.value(x)
}

/// `∂Y/∂X`.
pub fn gradient_out(idnn: &Idnn, x: &[f64]) -> Result<Vec<f64>> {
    idnn.gradient(x)
}

/// `∂²Y/∂X²`, exactly symmetric.
pub fn hessian_out(idnn: &Idnn, x: &[f64]) -> Result<DMatrix<f64>> {
    idnn.hessian(x)
}

/// Forward view sharing the parameters of `idnn`.
pub fn antiderivative(idnn: &Idnn) -> Antiderivative {
    idnn.antiderivative()
}
