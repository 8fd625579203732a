use crate::error::{Error, Result};

/// Analytic multi-well free energy standing in for atomistic data.
///
/// With `ξ = η₀/c₀` and `ζ_k = η_k/c₁`:
///
/// `f = s·[A ξ²(ξ-1)² + B((ζ₁²-ξ)² + (ζ₂²-ξ)²) + C ζ₃² + E(1-ξ)²(ζ₁²+ζ₂²+ζ₃²)]`
///
/// Minima (f = 0): the disordered well at η = 0 and four ordered variants
/// at `η = (c₀, ±c₁, ±c₁, 0)`. The function is even in each of η₁..η₃.
#[derive(Debug, Clone, PartialEq)]
pub struct Oracle {
    pub scale: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub e: f64,
    /// Composition of the ordered wells.
    pub c0: f64,
    /// Order-parameter magnitude of the ordered wells.
    pub c1: f64,
    pub lower: [f64; 4],
    pub upper: [f64; 4],
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle {
            scale: 0.05,
            a: 1.0,
            b: 1.0,
            c: 1.0,
            e: 1.0,
            c0: 0.25,
            c1: 0.2,
            lower: [-0.05, -0.3, -0.3, -0.3],
            upper: [0.3, 0.3, 0.3, 0.3],
        }
    }
}

impl Oracle {
    pub fn dim(&self) -> usize {
        4
    }

    /// The disordered well followed by the four ordered variants.
    pub fn well_centers(&self) -> Vec<Vec<f64>> {
        let mut w = vec![vec![0.0; 4]];
        for s1 in [1.0, -1.0] {
            for s2 in [1.0, -1.0] {
                w.push(vec![self.c0, s1 * self.c1, s2 * self.c1, 0.0]);
            }
        }
        w
    }

    pub fn check_domain(&self, eta: &[f64]) -> Result<()> {
        if eta.len() != 4 {
            return Err(Error::Shape(format!("oracle takes 4 order parameters, got {}", eta.len())));
        }
        for k in 0..4 {
            if !(eta[k] >= self.lower[k] && eta[k] <= self.upper[k]) {
                return Err(Error::Data(format!(
                    "eta_{k} = {} outside [{}, {}]",
                    eta[k], self.lower[k], self.upper[k]
                )));
            }
        }
        Ok(())
    }

    fn raw(&self, eta: &[f64]) -> (f64, [f64; 4]) {
        let xi = eta[0] / self.c0;
        let z = [eta[1] / self.c1, eta[2] / self.c1, eta[3] / self.c1];
        let (a, b, c, e) = (self.a, self.b, self.c, self.e);
        let q1 = z[0] * z[0] - xi;
        let q2 = z[1] * z[1] - xi;
        let zz = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
        let om = 1.0 - xi;
        let f = a * xi * xi * (xi - 1.0).powi(2) + b * (q1 * q1 + q2 * q2) + c * z[2] * z[2] + e * om * om * zz;
        let dxi = a * 2.0 * xi * (xi - 1.0) * (2.0 * xi - 1.0) - 2.0 * b * (q1 + q2) - 2.0 * e * om * zz;
        let dz1 = 4.0 * b * q1 * z[0] + 2.0 * e * om * om * z[0];
        let dz2 = 4.0 * b * q2 * z[1] + 2.0 * e * om * om * z[1];
        let dz3 = 2.0 * c * z[2] + 2.0 * e * om * om * z[2];
        let s = self.scale;
        (s * f, [s * dxi / self.c0, s * dz1 / self.c1, s * dz2 / self.c1, s * dz3 / self.c1])
    }

    /// Free energy; errors outside the domain.
    pub fn energy(&self, eta: &[f64]) -> Result<f64> {
        self.check_domain(eta)?;
        Ok(self.raw(eta).0)
    }

    /// Chemical potentials `μ_k = ∂f/∂η_k`; errors outside the domain.
    pub fn mu(&self, eta: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(eta)?;
        Ok(self.raw(eta).1.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn wells_are_critical_minima() {
        let o = Oracle::default();
        for w in o.well_centers() {
            assert!(o.mu(&w).unwrap().iter().all(|m| m.abs() < 1e-14), "{w:?}");
            assert!(o.energy(&w).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_is_exact_and_curl_free() {
        let o = Oracle::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let h = 1e-6;
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|k| rng.gen_range(o.lower[k] + 0.01..o.upper[k] - 0.01)).collect();
            let mu = o.mu(&x).unwrap();
            let mut jac = [[0.0; 4]; 4];
            for j in 0..4 {
                let mut p = x.clone();
                let mut m = x.clone();
                p[j] += h;
                m[j] -= h;
                let fd = (o.energy(&p).unwrap() - o.energy(&m).unwrap()) / (2.0 * h);
                assert!((fd - mu[j]).abs() < 1e-6 * mu[j].abs().max(1.0));
                let (mp, mm) = (o.mu(&p).unwrap(), o.mu(&m).unwrap());
                for i in 0..4 {
                    jac[i][j] = (mp[i] - mm[i]) / (2.0 * h);
                }
            }
            for i in 0..4 {
                for j in 0..i {
                    assert!((jac[i][j] - jac[j][i]).abs() < 1e-8 * jac[i][j].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn odd_potentials() {
        let o = Oracle::default();
        let x = [0.1, 0.12, -0.07, 0.2];
        let mu = o.mu(&x).unwrap();
        for k in 1..4 {
            let mut y = x;
            y[k] = -y[k];
            let m2 = o.mu(&y).unwrap();
            assert_eq!(m2[k], -mu[k]);
            assert_eq!(o.energy(&y).unwrap(), o.energy(&x).unwrap());
        }
    }

    #[test]
    fn domain_errors() {
        let o = Oracle::default();
        assert!(o.mu(&[0.5, 0.0, 0.0, 0.0]).is_err());
        assert!(o.mu(&[0.0, 0.0, 0.0]).is_err());
    }
}
