use std::path::Path;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};

use super::activation::Activation;
use super::dense::{propagate, DenseNet, Depth, Inputs, Tape};
use super::transform::TransformLayer;
use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// Points evaluated per forward sweep.
const CHUNK: usize = 256;

const MAGIC: &str = "matml-idnn v1";

/// Dense net with an optional input transform layer.
#[derive(Debug, Clone)]
pub struct Model {
    pub net: DenseNet,
    pub transforms: Option<TransformLayer>,
}

impl Model {
    pub fn new(net: DenseNet, transforms: Option<TransformLayer>) -> Result<Model> {
        if let Some(t) = &transforms {
            if t.output_dim() != net.input_dim() {
                return Err(Error::Shape(format!(
                    "transform layer yields {} inputs, net expects {}",
                    t.output_dim(),
                    net.input_dim()
                )));
            }
        }
        Ok(Model { net, transforms })
    }

    pub fn input_dim(&self) -> usize {
        self.transforms.as_ref().map(|t| t.input_dim()).unwrap_or_else(|| self.net.input_dim())
    }

    pub(crate) fn tape(&self, points: &[&[f64]], depth: Depth) -> Result<Tape> {
        let d = self.input_dim();
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(Error::Shape(format!("model expects {d} inputs, got {}", p.len())));
        }
        let inp = Inputs::from_points(points, self.transforms.as_ref(), depth)?;
        propagate(&self.net, &inp, depth)
    }
}

/// Integrable network: trained on derivative data, its forward output is
/// the antiderivative.
///
/// Clones share parameters; use [`Idnn::deep_clone`] for an independent copy.
#[derive(Debug, Clone)]
pub struct Idnn {
    shared: Arc<RwLock<Model>>,
}

/// Forward view of an [`Idnn`] sharing its parameters.
#[derive(Debug, Clone)]
pub struct Antiderivative {
    shared: Arc<RwLock<Model>>,
}

impl Antiderivative {
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let m = self.shared.read().unwrap();
        Ok(m.tape(&[x], Depth::Value)?.out_val[0])
    }

    pub fn values(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        values_of(&self.shared.read().unwrap(), points)
    }
}

fn values_of(m: &Model, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(points.len());
    for chunk in points.chunks(CHUNK) {
        let refs: Vec<&[f64]> = chunk.iter().map(|p| p.as_slice()).collect();
        out.extend(m.tape(&refs, Depth::Value)?.out_val.iter());
    }
    Ok(out)
}

impl Idnn {
    /// Softplus-style IDNN `d -> hidden -> 1` with seeded initialisation.
    pub fn new(input_dim: usize, hidden: &[usize], activation: Activation, seed: u64) -> Result<Idnn> {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Idnn::from_model(Model::new(DenseNet::new(&sizes, activation, seed)?, None)?)
    }

    pub fn with_transforms(layer: TransformLayer, hidden: &[usize], activation: Activation, seed: u64) -> Result<Idnn> {
        let mut sizes = vec![layer.output_dim()];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Idnn::from_model(Model::new(DenseNet::new(&sizes, activation, seed)?, Some(layer))?)
    }

    pub fn from_model(model: Model) -> Result<Idnn> {
        let model = Model::new(model.net, model.transforms)?;
        Ok(Idnn { shared: Arc::new(RwLock::new(model)) })
    }

    pub fn deep_clone(&self) -> Idnn {
        Idnn { shared: Arc::new(RwLock::new(self.model())) }
    }

    /// Snapshot of the current parameters.
    pub fn model(&self) -> Model {
        self.shared.read().unwrap().clone()
    }

    pub fn net(&self) -> DenseNet {
        self.shared.read().unwrap().net.clone()
    }

    pub fn update<T>(&self, f: impl FnOnce(&mut Model) -> T) -> T {
        f(&mut self.shared.write().unwrap())
    }

    pub(crate) fn read<T>(&self, f: impl FnOnce(&Model) -> T) -> T {
        f(&self.shared.read().unwrap())
    }

    pub fn input_dim(&self) -> usize {
        self.read(|m| m.input_dim())
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.read(|m| {
            let s = m.net.sizes();
            s[1..s.len() - 1].to_vec()
        })
    }

    pub fn antiderivative(&self) -> Antiderivative {
        Antiderivative { shared: self.shared.clone() }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.read(|m| Ok(m.tape(&[x], Depth::Value)?.out_val[0]))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.read(|m| Ok(m.tape(&[x], Depth::Gradient)?.gradient(0)))
    }

    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.read(|m| Ok(m.tape(&[x], Depth::Hessian)?.hessian(0)))
    }

    pub fn values(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.read(|m| values_of(m, points))
    }

    pub fn gradients(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.read(|m| {
            let mut out = Vec::with_capacity(points.len());
            for chunk in points.chunks(CHUNK) {
                let refs: Vec<&[f64]> = chunk.iter().map(|p| p.as_slice()).collect();
                let t = m.tape(&refs, Depth::Gradient)?;
                out.extend((0..chunk.len()).map(|s| t.gradient(s)));
            }
            Ok(out)
        })
    }

    pub fn hessians(&self, points: &[Vec<f64>]) -> Result<Vec<DMatrix<f64>>> {
        self.read(|m| {
            let mut out = Vec::with_capacity(points.len());
            for chunk in points.chunks(CHUNK) {
                let refs: Vec<&[f64]> = chunk.iter().map(|p| p.as_slice()).collect();
                let t = m.tape(&refs, Depth::Hessian)?;
                out.extend((0..chunk.len()).map(|s| t.hessian(s)));
            }
            Ok(out)
        })
    }

    pub fn to_text(&self) -> Result<String> {
        self.read(|m| {
            let mut lines = vec![MAGIC.to_string(), format!("activation {}", m.net.activation().name())];
            let sizes: Vec<String> = m.net.sizes().iter().map(|s| s.to_string()).collect();
            lines.push(format!("sizes {}", sizes.join(" ")));
            if let Some(t) = &m.transforms {
                lines.extend(t.to_lines()?);
            }
            for (w, b) in m.net.weights().iter().zip(m.net.biases()) {
                for r in 0..w.nrows() {
                    let row: Vec<String> = w.row(r).iter().map(|v| fmt_f64(*v)).collect();
                    lines.push(format!("w {}", row.join(" ")));
                }
                let bias: Vec<String> = b.iter().map(|v| fmt_f64(*v)).collect();
                lines.push(format!("b {}", bias.join(" ")));
            }
            Ok(lines.join("\n") + "\n")
        })
    }

    pub fn from_text(text: &str) -> Result<Idnn> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let bad = |m: &str| Error::Data(format!("network file: {m}"));
        if lines.next() != Some(MAGIC) {
            return Err(bad("missing version header"));
        }
        let act = lines
            .next()
            .and_then(|l| l.strip_prefix("activation "))
            .ok_or_else(|| bad("missing activation"))
            .and_then(Activation::from_name)?;
        let sizes: Vec<usize> = lines
            .next()
            .and_then(|l| l.strip_prefix("sizes "))
            .ok_or_else(|| bad("missing sizes"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad size")))
            .collect::<Result<_>>()?;
        let mut rest: Vec<&str> = lines.collect();
        let mut transforms = None;
        if let Some(h) = rest.first().and_then(|l| l.strip_prefix("transforms ")) {
            let p: Vec<usize> = h.split_whitespace().filter_map(|t| t.parse().ok()).collect();
            if p.len() != 2 || rest.len() < 1 + p[1] {
                return Err(bad("bad transform header"));
            }
            let ts = rest[1..=p[1]].iter().map(|l| TransformLayer::parse_line(l)).collect::<Result<Vec<_>>>()?;
            transforms = Some(TransformLayer::new(p[0], ts)?);
            rest.drain(..=p[1]);
        }
        let nums = |l: &str| -> Result<Vec<f64>> {
            l[1..].split_whitespace().map(|t| t.parse().map_err(|_| bad("bad number"))).collect()
        };
        let mut it = rest.into_iter();
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let mut m = DMatrix::zeros(w[1], w[0]);
            for r in 0..w[1] {
                let l = it.next().filter(|l| l.starts_with('w')).ok_or_else(|| bad("missing weight row"))?;
                let row = nums(l)?;
                if row.len() != w[0] {
                    return Err(bad("weight row length"));
                }
                for (c, v) in row.into_iter().enumerate() {
                    m[(r, c)] = v;
                }
            }
            let l = it.next().filter(|l| l.starts_with('b')).ok_or_else(|| bad("missing bias"))?;
            let b = nums(l)?;
            if b.len() != w[1] {
                return Err(bad("bias length"));
            }
            weights.push(m);
            biases.push(DVector::from_vec(b));
        }
        if it.next().is_some() {
            return Err(bad("trailing content"));
        }
        Idnn::from_model(Model::new(DenseNet::from_parameters(weights, biases, act)?, transforms)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Idnn> {
        Idnn::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Positive definiteness of the Hessian at each point (Cholesky succeeds).
pub fn is_convex(idnn: &Idnn, points: &[Vec<f64>]) -> Result<Vec<bool>> {
    Ok(idnn.hessians(points)?.into_iter().map(|h| h.cholesky().is_some()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Transform;

    #[test]
    fn shared_parameters() {
        let n = Idnn::new(2, &[5], Activation::Softplus, 1).unwrap();
        let f = n.antiderivative();
        let x = [0.3, -0.1];
        assert_eq!(f.value(&x).unwrap(), n.value(&x).unwrap());
        n.update(|m| m.net.biases_mut()[1][0] += 2.5);
        assert_eq!(f.value(&x).unwrap(), n.value(&x).unwrap());
        let copy = n.deep_clone();
        n.update(|m| m.net.biases_mut()[1][0] += 1.0);
        assert!((n.value(&x).unwrap() - copy.value(&x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_net_antiderivative() {
        let n = Idnn::from_model(Model::new(DenseNet::zeros(&[3, 4, 1], Activation::Tanh).unwrap(), None).unwrap()).unwrap();
        assert_eq!(n.antiderivative().value(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn text_round_trip() {
        let t = TransformLayer::new(2, vec![Transform::identity(0), Transform::square(1)]).unwrap();
        let n = Idnn::with_transforms(t, &[4, 3], Activation::Tanh, 9).unwrap();
        let s = n.to_text().unwrap();
        let m = Idnn::from_text(&s).unwrap();
        assert_eq!(m.to_text().unwrap(), s);
        let x = [0.2, -0.7];
        assert_eq!(m.value(&x).unwrap(), n.value(&x).unwrap());
        assert!(Idnn::from_text("nonsense").is_err());
        assert!(Idnn::from_text(&s.replace("sizes 2 4 3 1", "sizes 2 4 1")).is_err());
    }

    #[test]
    fn transform_dimension_mismatch() {
        let t = TransformLayer::new(2, vec![Transform::identity(0)]).unwrap();
        let net = DenseNet::new(&[2, 3, 1], Activation::Softplus, 0).unwrap();
        assert!(matches!(Model::new(net, Some(t)), Err(Error::Shape(_))));
    }

    #[test]
    fn convexity_of_squares() {
        // Y = t0 + t1 with t = (x0², x1²) via identity activation
        let w = vec![DMatrix::from_row_slice(1, 2, &[1.0, 1.0])];
        let b = vec![DVector::zeros(1)];
        let t = TransformLayer::new(2, vec![Transform::square(0), Transform::square(1)]).unwrap();
        let n = Idnn::from_model(Model::new(DenseNet::from_parameters(w.clone(), b.clone(), Activation::Softplus).unwrap(), Some(t.clone())).unwrap()).unwrap();
        let pts: Vec<Vec<f64>> = (0..25).map(|i| vec![(i % 5) as f64 - 2.0, (i / 5) as f64 - 2.0]).collect();
        assert!(is_convex(&n, &pts).unwrap().iter().all(|&c| c));
        let h = n.hessian(&[0.5, 0.5]).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]));
        let neg = vec![DMatrix::from_row_slice(1, 2, &[-1.0, -1.0])];
        let n = Idnn::from_model(Model::new(DenseNet::from_parameters(neg, b, Activation::Softplus).unwrap(), Some(t)).unwrap()).unwrap();
        assert!(is_convex(&n, &pts).unwrap().iter().all(|&c| !c));
    }
}
