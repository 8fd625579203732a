use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value threshold below which OLS reports rank loss.
const RANK_TOL: f64 = 1e-12;

/// Least-squares problem reduced once by a QR factorisation of the full
/// operator matrix, so that fits on any column subset cost `O(p³)`.
///
/// With `χ = Q R`, `‖y - χ_S ω‖² = ‖Qᵀy - R_S ω‖² + ‖(I - QQᵀ) y‖²`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    r: DMatrix<f64>,
    qty: DVector<f64>,
    rss_perp: f64,
    n: usize,
    yty: f64,
}

/// Result of one subset fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetFit {
    pub coefficients: Vec<f64>,
    /// Unpenalised residual sum of squares.
    pub rss: f64,
}

impl LeastSquares {
    pub fn new(chi: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquares> {
        let (n, p) = chi.shape();
        if n == 0 || p == 0 {
            return Err(Error::Data("empty regression system".into()));
        }
        if y.len() != n {
            return Err(Error::Shape(format!("chi has {n} rows, y has {}", y.len())));
        }
        if chi.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite entries in regression system".into()));
        }
        let (r, qty, rss_perp) = if n >= p {
            let qr = chi.clone().qr();
            let q = qr.q();
            let qty = q.transpose() * y;
            let resid = y - &q * &qty;
            (qr.r(), qty, resid.norm_squared())
        } else {
            // fewer rows than columns: keep the system as is
            (chi.clone(), y.clone(), 0.0)
        };
        Ok(LeastSquares { r, qty, rss_perp, n, yty: y.norm_squared() })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.r.ncols()
    }

    /// `‖y‖²`.
    pub fn y_norm_squared(&self) -> f64 {
        self.yty
    }

    /// Fits on columns `cols` (indices into the original matrix).
    pub fn fit(&self, cols: &[usize], alpha: f64, labels: Option<&[String]>) -> Result<SubsetFit> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::Data(format!("alpha must be non-negative, got {alpha}")));
        }
        if cols.is_empty() {
            return Ok(SubsetFit { coefficients: Vec::new(), rss: self.yty });
        }
        let k = cols.len();
        let m = self.r.nrows();
        let a = self.r.select_columns(cols);
        let omega = if alpha > 0.0 {
            let mut aug = DMatrix::zeros(m + k, k);
            aug.view_mut((0, 0), (m, k)).copy_from(&a);
            for j in 0..k {
                aug[(m + j, j)] = alpha.sqrt();
            }
            let mut b = DVector::zeros(m + k);
            b.rows_mut(0, m).copy_from(&self.qty);
            solve_least_squares(&aug, &b)?
        } else {
            let svd = a.clone().svd(false, true);
            let smax = svd.singular_values.max();
            let (jmin, smin) = svd.singular_values.argmin();
            if m < k || smin <= RANK_TOL * smax || smax == 0.0 {
                let mut dep = Vec::new();
                if let Some(vt) = &svd.v_t {
                    let row = vt.row(jmin);
                    let big = row.amax();
                    for (c, v) in row.iter().enumerate() {
                        if v.abs() > 0.1 * big {
                            let j = cols[c];
                            dep.push(labels.and_then(|l| l.get(j).cloned()).unwrap_or_else(|| format!("column {j}")));
                        }
                    }
                }
                return Err(Error::Solver(format!(
                    "rank-deficient least squares; dependent columns: {}",
                    dep.join(", ")
                )));
            }
            solve_least_squares(&a, &self.qty)?
        };
        let resid = &self.qty - &a * &omega;
        Ok(SubsetFit { coefficients: omega.iter().copied().collect(), rss: resid.norm_squared() + self.rss_perp })
    }
}

fn solve_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let k = a.ncols();
    let qr = a.clone().qr();
    let qtb = qr.q().transpose() * b;
    let r = qr.r();
    let x = r
        .solve_upper_triangular(&qtb.rows(0, k).into_owned())
        .ok_or_else(|| Error::Solver("singular triangular factor".into()))?;
    Ok(x)
}

/// Minimises `‖y - χω‖² + α‖ω‖²`. With `α = 0` this is ordinary least
/// squares and rank deficiency is an error naming the dependent columns.
pub fn ridge_fit(chi: &DMatrix<f64>, y: &DVector<f64>, alpha: f64) -> Result<DVector<f64>> {
    let ls = LeastSquares::new(chi, y)?;
    let cols: Vec<usize> = (0..chi.ncols()).collect();
    Ok(DVector::from_vec(ls.fit(&cols, alpha, None)?.coefficients))
}

/// Extra-sum-of-squares F statistic for dropping `p_full - p_reduced`
/// columns. A reduced fit better than the full one counts as no increase.
pub fn f_statistic(rss_reduced: f64, rss_full: f64, p_reduced: usize, p_full: usize, n_rows: usize) -> Result<f64> {
    if !(rss_full > 0.0) || p_full <= p_reduced || n_rows <= p_full {
        return Err(Error::Data(format!(
            "degenerate F test: rss_full {rss_full:e}, p {p_reduced} -> {p_full}, n {n_rows}"
        )));
    }
    let num = (rss_reduced - rss_full).max(0.0) / (p_full - p_reduced) as f64;
    Ok(num / (rss_full / (n_rows - p_full) as f64))
}
