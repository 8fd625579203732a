use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::activation::Activation;
use super::transform::TransformLayer;
use crate::error::{Error, Result};

/// Fully connected network with a scalar linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
    activation: Activation,
}

impl DenseNet {
    /// LeCun-uniform weights, zero biases. `sizes` runs from input width
    /// to the output width 1.
    pub fn new(sizes: &[usize], activation: Activation, seed: u64) -> Result<DenseNet> {
        check_sizes(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let lim = (3.0 / w[0] as f64).sqrt();
            weights.push(DMatrix::from_fn(w[1], w[0], |_, _| rng.gen_range(-lim..lim)));
            biases.push(DVector::zeros(w[1]));
        }
        Ok(DenseNet { weights, biases, activation })
    }

    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<DenseNet> {
        check_sizes(sizes)?;
        Ok(DenseNet {
            weights: sizes.windows(2).map(|w| DMatrix::zeros(w[1], w[0])).collect(),
            biases: sizes[1..].iter().map(|&n| DVector::zeros(n)).collect(),
            activation,
        })
    }

    pub fn from_parameters(weights: Vec<DMatrix<f64>>, biases: Vec<DVector<f64>>, activation: Activation) -> Result<DenseNet> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Shape(format!("{} weight matrices, {} bias vectors", weights.len(), biases.len())));
        }
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.nrows() != b.len() {
                return Err(Error::Shape(format!("layer {l}: {} rows but bias of {}", w.nrows(), b.len())));
            }
            if l > 0 && w.ncols() != weights[l - 1].nrows() {
                return Err(Error::Shape(format!("layer {l}: expects {} inputs, previous gives {}", w.ncols(), weights[l - 1].nrows())));
            }
        }
        if weights.last().unwrap().nrows() != 1 {
            return Err(Error::Shape("output layer must have width 1".into()));
        }
        Ok(DenseNet { weights, biases, activation })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.weights[0].ncols()];
        s.extend(self.weights.iter().map(|w| w.nrows()));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[DVector<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [DMatrix<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [DVector<f64>] {
        &mut self.biases
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Parameters flattened layer by layer, weights (column-major) then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b.as_slice());
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::Shape(format!("{} parameters for a net with {}", p.len(), self.n_params())));
        }
        let mut o = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let n = w.len();
            w.as_mut_slice().copy_from_slice(&p[o..o + n]);
            o += n;
            let n = b.len();
            b.as_mut_slice().copy_from_slice(&p[o..o + n]);
            o += n;
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        let t = propagate(self, &Inputs::from_points(&[x], None, Depth::Value)?, Depth::Value)?;
        Ok(t.out_val[0])
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let t = propagate(self, &Inputs::from_points(&[x], None, Depth::Gradient)?, Depth::Gradient)?;
        Ok(t.out_tan.unwrap().iter().copied().collect())
    }

    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let t = propagate(self, &Inputs::from_points(&[x], None, Depth::Hessian)?, Depth::Hessian)?;
        Ok(t.hessian(0))
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
        return Err(Error::Shape(format!("bad layer sizes {sizes:?}")));
    }
    if *sizes.last().unwrap() != 1 {
        return Err(Error::Shape(format!("output width must be 1, got {sizes:?}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Depth {
    Value,
    Gradient,
    Hessian,
}

/// Network inputs for a batch of `b` points with raw dimension `d`.
///
/// Tangent column `s*d + k` holds `∂t/∂x_k` of point `s`; Hessian column
/// `(s*d + k)*d + l` holds `∂²t/∂x_k∂x_l`.
pub(crate) struct Inputs {
    pub d: usize,
    pub b: usize,
    pub val: DMatrix<f64>,
    pub tan: Option<DMatrix<f64>>,
    pub hess: Option<DMatrix<f64>>,
}

impl Inputs {
    pub fn from_points(points: &[&[f64]], transforms: Option<&TransformLayer>, depth: Depth) -> Result<Inputs> {
        let b = points.len();
        let d = match transforms {
            Some(t) => t.input_dim(),
            None => points.first().map(|p| p.len()).unwrap_or(0),
        };
        let p = transforms.map(|t| t.output_dim()).unwrap_or(d);
        let mut val = DMatrix::zeros(p, b);
        let mut tan = (depth >= Depth::Gradient).then(|| DMatrix::zeros(p, b * d));
        let mut hess = (depth >= Depth::Hessian).then(|| DMatrix::zeros(p, b * d * d));
        for (s, x) in points.iter().enumerate() {
            if x.len() != d {
                return Err(Error::Shape(format!("expected {d} inputs, got {}", x.len())));
            }
            match transforms {
                None => {
                    val.column_mut(s).copy_from_slice(x);
                    if let Some(t) = tan.as_mut() {
                        for k in 0..d {
                            t[(k, s * d + k)] = 1.0;
                        }
                    }
                }
                Some(tl) => {
                    let jet = tl.jet(x, depth >= Depth::Hessian)?;
                    val.column_mut(s).copy_from_slice(&jet.value);
                    if let Some(t) = tan.as_mut() {
                        for i in 0..p {
                            for k in 0..d {
                                t[(i, s * d + k)] = jet.jacobian[i * d + k];
                            }
                        }
                    }
                    if let Some(h) = hess.as_mut() {
                        for i in 0..p {
                            for kl in 0..d * d {
                                h[(i, s * d * d + kl)] = jet.hessian[i * d * d + kl];
                            }
                        }
                    }
                }
            }
        }
        Ok(Inputs { d, b, val, tan, hess })
    }
}

struct HiddenTape {
    z_tan: Option<DMatrix<f64>>,
    z_hess: Option<DMatrix<f64>>,
    g1: DMatrix<f64>,
    g2: DMatrix<f64>,
    g3: DMatrix<f64>,
}

/// Forward jet through the network, kept for the reverse sweep.
pub(crate) struct Tape {
    pub d: usize,
    pub b: usize,
    depth: Depth,
    /// Activations per layer; index 0 is the input.
    acts: Vec<(DMatrix<f64>, Option<DMatrix<f64>>, Option<DMatrix<f64>>)>,
    hidden: Vec<HiddenTape>,
    pub out_val: DVector<f64>,
    pub out_tan: Option<DVector<f64>>,
    pub out_hess: Option<DVector<f64>>,
}

impl Tape {
    pub fn gradient(&self, s: usize) -> Vec<f64> {
        let t = self.out_tan.as_ref().expect("gradient depth");
        t.rows(s * self.d, self.d).iter().copied().collect()
    }

    /// Hessian of point `s`; the upper triangle is mirrored so the result
    /// is exactly symmetric.
    pub fn hessian(&self, s: usize) -> DMatrix<f64> {
        let d = self.d;
        let h = self.out_hess.as_ref().expect("hessian depth");
        let mut m = DMatrix::zeros(d, d);
        for k in 0..d {
            for l in k..d {
                let v = h[(s * d + k) * d + l];
                m[(k, l)] = v;
                m[(l, k)] = v;
            }
        }
        m
    }
}

fn add_bias(z: &mut DMatrix<f64>, b: &DVector<f64>) {
    for mut c in z.column_iter_mut() {
        c += b;
    }
}

pub(crate) fn propagate(net: &DenseNet, inp: &Inputs, depth: Depth) -> Result<Tape> {
    if inp.val.nrows() != net.input_dim() {
        return Err(Error::Shape(format!("net expects {} inputs, got {}", net.input_dim(), inp.val.nrows())));
    }
    if depth >= Depth::Hessian {
        net.activation.require_second()?;
    }
    let (d, b) = (inp.d, inp.b);
    let want_tan = depth >= Depth::Gradient;
    let want_hess = depth >= Depth::Hessian;
    if (want_tan && inp.tan.is_none()) || (want_hess && inp.hess.is_none()) {
        return Err(Error::Shape("inputs lack the requested derivative depth".into()));
    }
    let mut acts = vec![(
        inp.val.clone(),
        if want_tan { inp.tan.clone() } else { None },
        if want_hess { inp.hess.clone() } else { None },
    )];
    let mut hidden = Vec::new();
    let nl = net.weights.len();
    for l in 0..nl - 1 {
        let w = &net.weights[l];
        let (av, at, ah) = acts.last().unwrap();
        let mut z_val = w * av;
        add_bias(&mut z_val, &net.biases[l]);
        let z_tan = at.as_ref().map(|a| w * a);
        let z_hess = ah.as_ref().map(|a| w * a);
        let n = w.nrows();
        let mut g0 = DMatrix::zeros(n, b);
        let mut g1 = DMatrix::zeros(n, b);
        let mut g2 = DMatrix::zeros(n, b);
        let mut g3 = DMatrix::zeros(n, b);
        for (idx, &z) in z_val.iter().enumerate() {
            let g = net.activation.eval(z);
            g0[idx] = g[0];
            g1[idx] = g[1];
            g2[idx] = g[2];
            g3[idx] = g[3];
        }
        let a_tan = z_tan.as_ref().map(|zt| {
            let mut a = zt.clone();
            for s in 0..b {
                for k in 0..d {
                    let mut c = a.column_mut(s * d + k);
                    c.component_mul_assign(&g1.column(s));
                }
            }
            a
        });
        let a_hess = z_hess.as_ref().map(|zh| {
            let zt = z_tan.as_ref().unwrap();
            let mut a = DMatrix::zeros(n, b * d * d);
            for s in 0..b {
                for k in 0..d {
                    for l2 in 0..d {
                        let col = (s * d + k) * d + l2;
                        for i in 0..n {
                            a[(i, col)] = g2[(i, s)] * zt[(i, s * d + k)] * zt[(i, s * d + l2)] + g1[(i, s)] * zh[(i, col)];
                        }
                    }
                }
            }
            a
        });
        hidden.push(HiddenTape { z_tan, z_hess, g1, g2, g3 });
        acts.push((g0, a_tan, a_hess));
    }
    let w = &net.weights[nl - 1];
    let (av, at, ah) = acts.last().unwrap();
    let out_val = (w * av).row(0).transpose() + DVector::from_element(b, net.biases[nl - 1][0]);
    let out_tan = at.as_ref().map(|a| (w * a).row(0).transpose());
    let out_hess = ah.as_ref().map(|a| (w * a).row(0).transpose());
    Ok(Tape { d, b, depth, acts, hidden, out_val, out_tan, out_hess })
}

/// Parameter gradients in the layout of [`DenseNet::params`].
pub(crate) fn backprop(
    net: &DenseNet,
    tape: &Tape,
    seed_val: &DVector<f64>,
    seed_tan: Option<&DVector<f64>>,
    seed_hess: Option<&DVector<f64>>,
) -> Result<Vec<f64>> {
    let (d, b) = (tape.d, tape.b);
    if seed_tan.is_some() && tape.depth < Depth::Gradient || seed_hess.is_some() && tape.depth < Depth::Hessian {
        return Err(Error::Shape("tape too shallow for the requested seeds".into()));
    }
    if seed_tan.is_some() || seed_hess.is_some() {
        net.activation.require_second()?;
    }
    let nl = net.weights.len();
    let mut gw: Vec<DMatrix<f64>> = Vec::with_capacity(nl);
    let mut gb: Vec<DVector<f64>> = Vec::with_capacity(nl);
    // adjoints of the current layer's pre-activation
    let mut zv = DMatrix::from_row_slice(1, b, seed_val.as_slice());
    let mut zt = match (seed_tan, seed_hess) {
        (Some(s), _) => Some(DMatrix::from_row_slice(1, b * d, s.as_slice())),
        (None, Some(_)) => Some(DMatrix::zeros(1, b * d)),
        _ => None,
    };
    let mut zh = seed_hess.map(|s| DMatrix::from_row_slice(1, b * d * d, s.as_slice()));
    for l in (0..nl).rev() {
        let (av, at, ah) = &tape.acts[l];
        let mut g = &zv * av.transpose();
        if let (Some(z), Some(a)) = (&zt, at) {
            g += z * a.transpose();
        }
        if let (Some(z), Some(a)) = (&zh, ah) {
            g += z * a.transpose();
        }
        gw.push(g);
        gb.push(zv.column_sum());
        if l == 0 {
            break;
        }
        let w = &net.weights[l];
        let wt = w.transpose();
        let av_bar = &wt * &zv;
        let at_bar = zt.as_ref().map(|z| &wt * z);
        let ah_bar = zh.as_ref().map(|z| &wt * z);
        let h = &tape.hidden[l - 1];
        let n = av_bar.nrows();
        let mut nzv = av_bar.component_mul(&h.g1);
        let mut nzt = at_bar.as_ref().map(|_| DMatrix::zeros(n, b * d));
        let nzh = ah_bar.as_ref().map(|ab| {
            let mut m = ab.clone();
            for s in 0..b {
                for kl in 0..d * d {
                    m.column_mut(s * d * d + kl).component_mul_assign(&h.g1.column(s));
                }
            }
            m
        });
        if let (Some(abar), Some(ztan)) = (&at_bar, &h.z_tan) {
            let nt = nzt.as_mut().unwrap();
            for s in 0..b {
                for k in 0..d {
                    let c = s * d + k;
                    for i in 0..n {
                        nzv[(i, s)] += abar[(i, c)] * h.g2[(i, s)] * ztan[(i, c)];
                        nt[(i, c)] = abar[(i, c)] * h.g1[(i, s)];
                    }
                }
            }
        }
        if let (Some(hbar), Some(ztan), Some(zhess)) = (&ah_bar, &h.z_tan, &h.z_hess) {
            let nt = nzt.as_mut().unwrap();
            for s in 0..b {
                for k in 0..d {
                    for l2 in 0..d {
                        let c = (s * d + k) * d + l2;
                        let ck = s * d + k;
                        let cl = s * d + l2;
                        for i in 0..n {
                            let hb = hbar[(i, c)];
                            nzv[(i, s)] += hb * (h.g3[(i, s)] * ztan[(i, ck)] * ztan[(i, cl)] + h.g2[(i, s)] * zhess[(i, c)]);
                            // ∂/∂ż_k and ∂/∂ż_l of g''·ż_k·ż_l
                            nt[(i, ck)] += hb * h.g2[(i, s)] * ztan[(i, cl)];
                            nt[(i, cl)] += hb * h.g2[(i, s)] * ztan[(i, ck)];
                        }
                    }
                }
            }
        }
        zv = nzv;
        zt = nzt;
        zh = nzh;
    }
    gw.reverse();
    gb.reverse();
    let mut out = Vec::with_capacity(net.n_params());
    for (w, b) in gw.iter().zip(&gb) {
        out.extend_from_slice(w.as_slice());
        out.extend(b.iter());
    }
    Ok(out)
}
