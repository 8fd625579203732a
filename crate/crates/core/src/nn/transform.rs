use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// `x -> (value, gradient, row-major Hessian)`.
pub type TransformFn = Arc<dyn Fn(&[f64]) -> (f64, Vec<f64>, Vec<f64>) + Send + Sync>;

/// One transformed input, a twice differentiable function of the raw input.
#[derive(Clone)]
pub enum Transform {
    /// `(x_i - shift) / scale`.
    Affine { index: usize, shift: f64, scale: f64 },
    /// `((x_i - shift) / scale)²`.
    Square { index: usize, shift: f64, scale: f64 },
    Custom { label: String, func: TransformFn },
}

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Affine { index, shift, scale } => write!(f, "Affine(x{index}, {shift}, {scale})"),
            Transform::Square { index, shift, scale } => write!(f, "Square(x{index}, {shift}, {scale})"),
            Transform::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

impl Transform {
    pub fn identity(index: usize) -> Transform {
        Transform::Affine { index, shift: 0.0, scale: 1.0 }
    }

    pub fn square(index: usize) -> Transform {
        Transform::Square { index, shift: 0.0, scale: 1.0 }
    }
}

/// Input maps applied before the first dense layer.
#[derive(Debug, Clone)]
pub struct TransformLayer {
    input_dim: usize,
    transforms: Vec<Transform>,
}

/// Transformed values with first and second derivatives for one point.
pub(crate) struct Jet {
    pub value: Vec<f64>,
    /// `[t][k]`, row-major `out × in`.
    pub jacobian: Vec<f64>,
    /// `[t][k][l]`.
    pub hessian: Vec<f64>,
}

impl TransformLayer {
    pub fn new(input_dim: usize, transforms: Vec<Transform>) -> Result<TransformLayer> {
        if input_dim == 0 || transforms.is_empty() {
            return Err(Error::Shape("transform layer needs inputs and outputs".into()));
        }
        for t in &transforms {
            match t {
                Transform::Affine { index, scale, .. } | Transform::Square { index, scale, .. } => {
                    if *index >= input_dim {
                        return Err(Error::Shape(format!("transform reads x{index} of a {input_dim}-input layer")));
                    }
                    if !(scale.is_finite() && *scale != 0.0) {
                        return Err(Error::Config(format!("transform scale must be finite and nonzero, got {scale}")));
                    }
                }
                Transform::Custom { .. } => {}
            }
        }
        Ok(TransformLayer { input_dim, transforms })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.transforms.len()
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jet(x, false)?.value)
    }

    pub(crate) fn jet(&self, x: &[f64], second: bool) -> Result<Jet> {
        let d = self.input_dim;
        if x.len() != d {
            return Err(Error::Shape(format!("transform layer expects {d} inputs, got {}", x.len())));
        }
        let m = self.transforms.len();
        let mut jet = Jet { value: vec![0.0; m], jacobian: vec![0.0; m * d], hessian: vec![0.0; if second { m * d * d } else { 0 }] };
        for (t, tr) in self.transforms.iter().enumerate() {
            match tr {
                Transform::Affine { index, shift, scale } => {
                    jet.value[t] = (x[*index] - shift) / scale;
                    jet.jacobian[t * d + index] = 1.0 / scale;
                }
                Transform::Square { index, shift, scale } => {
                    let u = (x[*index] - shift) / scale;
                    jet.value[t] = u * u;
                    jet.jacobian[t * d + index] = 2.0 * u / scale;
                    if second {
                        jet.hessian[(t * d + index) * d + index] = 2.0 / (scale * scale);
                    }
                }
                Transform::Custom { label, func } => {
                    let (v, g, h) = func(x);
                    if g.len() != d || h.len() != d * d {
                        return Err(Error::Shape(format!("custom transform '{label}' returned wrong derivative sizes")));
                    }
                    jet.value[t] = v;
                    jet.jacobian[t * d..(t + 1) * d].copy_from_slice(&g);
                    if second {
                        jet.hessian[t * d * d..(t + 1) * d * d].copy_from_slice(&h);
                    }
                }
            }
        }
        Ok(jet)
    }

    pub(crate) fn to_lines(&self) -> Result<Vec<String>> {
        let mut out = vec![format!("transforms {} {}", self.input_dim, self.transforms.len())];
        for t in &self.transforms {
            out.push(match t {
                Transform::Affine { index, shift, scale } => format!("affine {index} {} {}", fmt_f64(*shift), fmt_f64(*scale)),
                Transform::Square { index, shift, scale } => format!("square {index} {} {}", fmt_f64(*shift), fmt_f64(*scale)),
                Transform::Custom { label, .. } => {
                    return Err(Error::Capability(format!("custom transform '{label}' cannot be serialized")))
                }
            });
        }
        Ok(out)
    }

    pub(crate) fn parse_line(line: &str) -> Result<Transform> {
        let p: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Data(format!("bad transform line '{line}'"));
        if p.len() != 4 {
            return Err(bad());
        }
        let index = p[1].parse().map_err(|_| bad())?;
        let shift = p[2].parse().map_err(|_| bad())?;
        let scale = p[3].parse().map_err(|_| bad())?;
        match p[0] {
            "affine" => Ok(Transform::Affine { index, shift, scale }),
            "square" => Ok(Transform::Square { index, shift, scale }),
            _ => Err(bad()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_and_affine_jets() {
        let l = TransformLayer::new(2, vec![Transform::identity(0), Transform::Square { index: 1, shift: 1.0, scale: 2.0 }]).unwrap();
        let j = l.jet(&[0.5, 3.0], true).unwrap();
        assert_eq!(j.value, vec![0.5, 1.0]);
        assert_eq!(j.jacobian, vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(j.hessian[(1 * 2 + 1) * 2 + 1], 0.5);
    }

    #[test]
    fn errors() {
        assert!(TransformLayer::new(2, vec![Transform::square(2)]).is_err());
        assert!(TransformLayer::new(1, vec![Transform::Affine { index: 0, shift: 0.0, scale: 0.0 }]).is_err());
        let l = TransformLayer::new(1, vec![Transform::square(0)]).unwrap();
        assert!(l.apply(&[1.0, 2.0]).is_err());
    }
}
