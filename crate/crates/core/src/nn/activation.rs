use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Softplus,
    Tanh,
    Identity,
    /// Not twice differentiable; value and gradient only.
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Softplus => "softplus",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
            Activation::Relu => "relu",
        }
    }

    pub fn from_name(s: &str) -> Result<Activation> {
        match s.trim().to_ascii_lowercase().as_str() {
            "softplus" => Ok(Activation::Softplus),
            "tanh" => Ok(Activation::Tanh),
            "identity" | "linear" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            o => Err(Error::Config(format!("unknown activation '{o}'"))),
        }
    }

    pub fn has_second_derivative(self) -> bool {
        !matches!(self, Activation::Relu)
    }

    pub(crate) fn require_second(self) -> Result<()> {
        if self.has_second_derivative() {
            Ok(())
        } else {
            Err(Error::Capability(format!("activation '{}' has no second derivative", self.name())))
        }
    }

    /// `g(z)` and its first three derivatives.
    #[inline]
    pub fn eval(self, z: f64) -> [f64; 4] {
        match self {
            Activation::Softplus => {
                let g = if z > 30.0 { z + (-z).exp() } else { z.exp().ln_1p() };
                let s = if z >= 0.0 { 1.0 / (1.0 + (-z).exp()) } else { let e = z.exp(); e / (1.0 + e) };
                let d2 = s * (1.0 - s);
                [g, s, d2, d2 * (1.0 - 2.0 * s)]
            }
            Activation::Tanh => {
                let t = z.tanh();
                let d1 = 1.0 - t * t;
                [t, d1, -2.0 * t * d1, d1 * (6.0 * t * t - 2.0)]
            }
            Activation::Identity => [z, 1.0, 0.0, 0.0],
            Activation::Relu => {
                if z > 0.0 {
                    [z, 1.0, 0.0, 0.0]
                } else {
                    [0.0, 0.0, 0.0, 0.0]
                }
            }
        }
    }
}
