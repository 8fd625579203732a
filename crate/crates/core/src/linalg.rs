//! Small direct solvers for the banded systems produced on structured grids.

use crate::error::{Error, Result};

/// Symmetric matrix stored as its lower band.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    // band[i * (bw + 1) + k] holds A[i][i - k]
    band: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> BandedSym {
        BandedSym { n, bw, band: vec![0.0; n * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Adds `v` to entry (i, j); the mirrored entry is implied.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let k = r - c;
        assert!(k <= self.bw, "entry ({i},{j}) outside band {}", self.bw);
        self.band[r * (self.bw + 1) + k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let k = r - c;
        if k > self.bw {
            0.0
        } else {
            self.band[r * (self.bw + 1) + k]
        }
    }

    /// Returns `a * self + b * other` for matrices of equal shape.
    pub fn combine(&self, a: f64, other: &BandedSym, b: f64) -> BandedSym {
        assert_eq!((self.n, self.bw), (other.n, other.bw));
        BandedSym {
            n: self.n,
            bw: self.bw,
            band: self.band.iter().zip(&other.band).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let w = self.bw + 1;
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let row = &self.band[i * w..(i + 1) * w];
            y[i] += row[0] * x[i];
            for k in 1..=self.bw.min(i) {
                let j = i - k;
                y[i] += row[k] * x[j];
                y[j] += row[k] * x[i];
            }
        }
    }

    /// Restricts to the rows and columns listed in `keep` (in order).
    pub fn submatrix(&self, keep: &[usize]) -> BandedSym {
        let mut bw = 0;
        let mut pos = vec![usize::MAX; self.n];
        for (p, &i) in keep.iter().enumerate() {
            pos[i] = p;
        }
        for (p, &i) in keep.iter().enumerate() {
            for k in 1..=self.bw.min(i) {
                let q = pos[i - k];
                if q != usize::MAX && self.get(i, i - k) != 0.0 {
                    bw = bw.max(p - q);
                }
            }
        }
        let mut out = BandedSym::zeros(keep.len(), bw);
        for (p, &i) in keep.iter().enumerate() {
            for k in 0..=self.bw.min(i) {
                let q = pos[i - k];
                if q != usize::MAX {
                    let v = self.get(i, i - k);
                    if v != 0.0 {
                        out.add(p, q, v);
                    }
                }
            }
        }
        out
    }

    /// Cholesky factorisation; fails if the matrix is not positive definite.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let w = self.bw + 1;
        let mut l = self.band.clone();
        for i in 0..self.n {
            for k in (0..=self.bw.min(i)).rev() {
                let j = i - k;
                let mut s = l[i * w + k];
                // sum over m < j with both L[i][m], L[j][m] in band
                let lo = i.saturating_sub(self.bw);
                for m in lo..j {
                    s -= l[i * w + (i - m)] * l[j * w + (j - m)];
                }
                if k == 0 {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::Solver(format!("matrix not positive definite at row {i}")));
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + k] = s / l[j * w];
                }
            }
        }
        Ok(BandedCholesky { n: self.n, bw: self.bw, l })
    }
}

/// Lower-triangular banded factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let w = self.bw + 1;
        for i in 0..self.n {
            let mut s = x[i];
            for k in 1..=self.bw.min(i) {
                s -= self.l[i * w + k] * x[i - k];
            }
            x[i] = s / self.l[i * w];
        }
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for k in 1..=self.bw.min(self.n - 1 - i) {
                s -= self.l[(i + k) * w + k] * x[i + k];
            }
            x[i] = s / self.l[i * w];
        }
    }
}

/// Solves a tridiagonal system with the Thomas algorithm.
///
/// `lower[i]` couples row `i + 1` to column `i`, `upper[i]` couples row `i`
/// to column `i + 1`.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if lower.len() + 1 != n.max(1) || upper.len() + 1 != n.max(1) || rhs.len() != n {
        return Err(Error::Shape("tridiagonal operand lengths".into()));
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if piv == 0.0 {
        return Err(Error::Solver("zero pivot in tridiagonal solve".into()));
    }
    if n > 1 {
        c[0] = upper[0] / piv;
    }
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - lower[i - 1] * c[i - 1];
        if piv == 0.0 || !piv.is_finite() {
            return Err(Error::Solver(format!("zero pivot in tridiagonal solve at row {i}")));
        }
        if i < n - 1 {
            c[i] = upper[i] / piv;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / piv;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}
