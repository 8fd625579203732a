use crate::error::{Error, Result};

/// Tensor-product Gauss-Legendre rule on the reference cell `[-1, 1]^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub dim: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Largest supported number of points per axis.
pub const MAX_GAUSS_POINTS: usize = 10;

/// `n`-point Gauss-Legendre rule per axis in dimension 1 or 2.
pub fn gauss_rule(n: usize, dim: usize) -> Result<QuadratureRule> {
    if n == 0 || n > MAX_GAUSS_POINTS {
        return Err(Error::Data(format!("unsupported quadrature order {n} (1..={MAX_GAUSS_POINTS})")));
    }
    if dim != 1 && dim != 2 {
        return Err(Error::Data(format!("unsupported dimension {dim}")));
    }
    let (x, w) = legendre_nodes(n);
    let mut rule = QuadratureRule { dim, points: Vec::new(), weights: Vec::new() };
    if dim == 1 {
        for (xi, wi) in x.iter().zip(&w) {
            rule.points.push([*xi, 0.0]);
            rule.weights.push(*wi);
        }
    } else {
        for (yj, wj) in x.iter().zip(&w) {
            for (xi, wi) in x.iter().zip(&w) {
                rule.points.push([*xi, *yj]);
                rule.weights.push(wi * wj);
            }
        }
    }
    Ok(rule)
}

// Newton iteration on P_n from the Chebyshev-like initial guesses.
fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 1..=n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p2) / k as f64;
            }
            let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, 0.0);
        for k in 1..=n {
            let p2 = p1;
            p1 = p0;
            p0 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p2) / k as f64;
        }
        let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_rule() {
        let r = gauss_rule(2, 1).unwrap();
        let a = 1.0 / 3f64.sqrt();
        assert!((r.points[0][0] + a).abs() < 1e-15 && (r.points[1][0] - a).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_point_rule() {
        let r = gauss_rule(3, 1).unwrap();
        let a = (0.6f64).sqrt();
        assert!((r.points[0][0] + a).abs() < 1e-15);
        assert!((r.weights[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn exact_for_degree_2n_minus_1() {
        for n in 1..=MAX_GAUSS_POINTS {
            let r = gauss_rule(n, 1).unwrap();
            for deg in 0..2 * n {
                let q: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * p[0].powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn tensor_weights_sum_to_area() {
        let r = gauss_rule(4, 2).unwrap();
        assert_eq!(r.len(), 16);
        assert!((r.weights.iter().sum::<f64>() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn unsupported_order() {
        assert!(gauss_rule(0, 1).is_err());
        assert!(gauss_rule(MAX_GAUSS_POINTS + 1, 2).is_err());
        assert!(gauss_rule(2, 3).is_err());
    }
}
