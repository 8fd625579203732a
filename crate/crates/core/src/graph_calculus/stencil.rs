use nalgebra::{DMatrix, DVector};

use super::Graph;
use crate::error::{Error, Result};

/// Moment residuals above this (in scaled offsets) mean the neighbourhood
/// cannot support the requested derivative.
const CONSISTENCY_TOL: f64 = 1e-8;

/// One non-local partial derivative request.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffOpSpec {
    /// State label.
    pub function: String,
    /// Axis labels differentiated against, one per derivative order.
    pub variable: Vec<String>,
    /// Axis labels spanning the embedding used for distances and moments.
    pub manifold: Vec<String>,
    pub accuracy: usize,
    /// Indices into `manifold`; a single index with order 2 is repeated.
    pub dimension: Vec<usize>,
    pub order: usize,
    /// Neighbourhood size; defaults to the moment count plus 2.
    pub k: Option<usize>,
}

impl DiffOpSpec {
    pub fn partial(function: &str, manifold: &[&str], dimension: &[usize], order: usize, accuracy: usize) -> DiffOpSpec {
        let dims = expand_dimension(dimension, order);
        DiffOpSpec {
            function: function.into(),
            variable: dims.iter().filter_map(|&d| manifold.get(d).map(|s| s.to_string())).collect(),
            manifold: manifold.iter().map(|s| s.to_string()).collect(),
            accuracy,
            dimension: dimension.to_vec(),
            order,
            k: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.accuracy < 1 {
            return Err(Error::Config("accuracy must be >= 1".into()));
        }
        if !(1..=2).contains(&self.order) {
            return Err(Error::Config(format!("order must be 1 or 2, got {}", self.order)));
        }
        let p = self.manifold.len();
        if p == 0 {
            return Err(Error::Config("empty manifold".into()));
        }
        let dims = expand_dimension(&self.dimension, self.order);
        if dims.len() != self.order {
            return Err(Error::Config(format!(
                "dimension {:?} does not match order {}",
                self.dimension, self.order
            )));
        }
        if let Some(&d) = dims.iter().find(|&&d| d >= p) {
            return Err(Error::Config(format!("dimension index {d} out of range for {p} axes")));
        }
        if !self.variable.is_empty() {
            let want: Vec<&str> = dims.iter().map(|&d| self.manifold[d].as_str()).collect();
            let mut v: Vec<&str> = self.variable.iter().map(String::as_str).collect();
            if v.len() == 1 && self.order == 2 {
                v.push(v[0]);
            }
            if v != want {
                return Err(Error::Config(format!(
                    "variable {:?} disagrees with manifold axes {:?}",
                    self.variable, want
                )));
            }
        }
        if self.k == Some(0) {
            return Err(Error::Config("k must be >= 1".into()));
        }
        Ok(())
    }

    /// Derivative multi-index over the manifold axes.
    pub fn alpha(&self) -> Vec<usize> {
        let mut a = vec![0; self.manifold.len()];
        for d in expand_dimension(&self.dimension, self.order) {
            if d < a.len() {
                a[d] += 1;
            }
        }
        a
    }

    pub fn neighborhood_size(&self) -> usize {
        self.k.unwrap_or_else(|| moment_count(self.manifold.len(), self.accuracy + self.order - 1) + 2)
    }

    /// Output column label, e.g. `du_3/dx_1` or `d2u/dx_1dx_2`.
    pub fn label(&self) -> String {
        let axes: Vec<String> = expand_dimension(&self.dimension, self.order)
            .iter()
            .map(|&d| format!("d{}", self.manifold.get(d).map(String::as_str).unwrap_or("?")))
            .collect();
        if self.order == 1 {
            format!("d{}/{}", self.function, axes.concat())
        } else {
            format!("d{}{}/{}", self.order, self.function, axes.concat())
        }
    }
}

fn expand_dimension(dimension: &[usize], order: usize) -> Vec<usize> {
    if dimension.len() == 1 && order == 2 {
        vec![dimension[0]; 2]
    } else {
        dimension.to_vec()
    }
}

/// Multi-indices with `1 <= |β| <= degree` in `dim` variables, graded.
pub fn multi_indices(dim: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(dim: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == dim - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for a in (0..=left).rev() {
            cur.push(a);
            rec(dim, left - a, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for d in 1..=degree {
        rec(dim, d, &mut Vec::with_capacity(dim), &mut out);
    }
    out
}

/// Number of moment conditions, `C(dim + degree, degree) - 1`.
pub fn moment_count(dim: usize, degree: usize) -> usize {
    let mut c = 1usize;
    for i in 1..=degree {
        c = c * (dim + i) / i;
    }
    c - 1
}

/// Coefficients of one vertex's non-local derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    /// `c_j` in `Σ (u_j - u_0) c_j`.
    pub coefficients: Vec<f64>,
    offsets: Vec<f64>,
    dim: usize,
}

impl Stencil {
    /// Edge weights in the quotient form `Σ (u_j - u_0)/z_j^μ · w_j`,
    /// `w_j = c_j z_j^μ` for axis `mu`.
    pub fn weights(&self, mu: usize) -> Vec<f64> {
        self.coefficients.iter().enumerate().map(|(j, c)| c * self.offsets[j * self.dim + mu]).collect()
    }

    pub fn apply(&self, center: f64, neighbors: impl Iterator<Item = f64>) -> f64 {
        neighbors.zip(&self.coefficients).map(|(u, c)| (u - center) * c).sum()
    }
}

fn fmt_index(b: &[usize]) -> String {
    let parts: Vec<String> = b.iter().map(|v| v.to_string()).collect();
    format!("({})", parts.join(","))
}

/// Solves the moment conditions `Σ_j c_j z_j^β = α! δ_{βα}` for
/// `1 <= |β| <= accuracy + order - 1`, minimum-norm when there are more
/// neighbours than conditions. Offsets are scaled by their largest
/// component before solving.
pub fn stencil_weights(offsets: &[f64], dim: usize, accuracy: usize, alpha: &[usize]) -> Result<Stencil> {
    if dim == 0 || offsets.len() % dim != 0 || alpha.len() != dim {
        return Err(Error::Shape(format!(
            "offsets of length {} with dimension {dim} and multi-index {alpha:?}",
            offsets.len()
        )));
    }
    let order: usize = alpha.iter().sum();
    if order == 0 || accuracy == 0 {
        return Err(Error::Config("order and accuracy must be >= 1".into()));
    }
    let k = offsets.len() / dim;
    if k == 0 {
        return Err(Error::Rank("no neighbours".into()));
    }
    let scale = offsets.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::Rank("all neighbours coincide with the centre".into()));
    }
    let rows = multi_indices(dim, accuracy + order - 1);
    let m = rows.len();
    let a = DMatrix::from_fn(m, k, |r, j| {
        rows[r].iter().enumerate().map(|(d, &e)| (offsets[j * dim + d] / scale).powi(e as i32)).product()
    });
    let fact: f64 = alpha.iter().map(|&e| (1..=e).product::<usize>() as f64).product();
    let b = DVector::from_fn(m, |r, _| if rows[r] == alpha { fact } else { 0.0 });
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let c = svd
        .solve(&b, 1e-12 * smax)
        .map_err(|e| Error::Solver(format!("stencil solve: {e}")))?;
    let resid = &a * &c - &b;
    let worst = resid.iamax();
    let rmax = resid[worst].abs();
    if rmax > CONSISTENCY_TOL {
        return Err(Error::Rank(format!(
            "neighbourhood of {k} points cannot satisfy moment {} (residual {rmax:.3e})",
            fmt_index(&rows[worst])
        )));
    }
    let inv = scale.powi(order as i32);
    Ok(Stencil { coefficients: c.iter().map(|v| v / inv).collect(), offsets: offsets.to_vec(), dim })
}

/// Non-local derivative of `state` at every vertex of `graph`.
pub fn nonlocal_partial(graph: &Graph, state: &[f64], spec: &DiffOpSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    if spec.manifold.len() != graph.dim() {
        return Err(Error::Shape(format!(
            "spec manifold has {} axes, graph has {}",
            spec.manifold.len(),
            graph.dim()
        )));
    }
    if state.len() != graph.len() {
        return Err(Error::Shape(format!("state has {} values for {} vertices", state.len(), graph.len())));
    }
    let alpha = spec.alpha();
    (0..graph.len())
        .map(|i| {
            let st = stencil_weights(&graph.offsets(i), graph.dim(), spec.accuracy, &alpha).map_err(|e| match e {
                Error::Rank(m) => Error::Rank(format!("vertex {i}: {m}")),
                other => other,
            })?;
            Ok(st.apply(state[i], graph.neighbors(i).iter().map(|&j| state[j])))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_calculus::build_graph;
    use proptest::prelude::*;

    #[test]
    fn central_difference() {
        let h = 0.1;
        let s = stencil_weights(&[-h, h], 1, 2, &[1]).unwrap();
        assert!((s.coefficients[0] + 0.5 / h).abs() < 1e-12);
        assert!((s.coefficients[1] - 0.5 / h).abs() < 1e-12);
        // quotient-form weights are 1/2 each
        for w in s.weights(0) {
            assert!((w - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn one_sided_exact_on_quadratic() {
        let (x0, h) = (0.3, 0.05);
        let s = stencil_weights(&[h, 2.0 * h], 1, 2, &[1]).unwrap();
        let u = |x: f64| x * x;
        let d = s.apply(u(x0), [u(x0 + h), u(x0 + 2.0 * h)].into_iter());
        assert!((d - 2.0 * x0).abs() < 1e-12);
    }

    #[test]
    fn second_derivative_three_point() {
        let h = 0.2;
        let s = stencil_weights(&[-h, h], 1, 1, &[2]).unwrap();
        assert!((s.coefficients[0] - 1.0 / (h * h)).abs() < 1e-9);
        assert!((s.coefficients[1] - 1.0 / (h * h)).abs() < 1e-9);
    }

    #[test]
    fn collinear_offsets_orthogonal_axis() {
        let off = [0.1, 0.0, -0.1, 0.0, 0.2, 0.0, -0.2, 0.0];
        match stencil_weights(&off, 2, 1, &[0, 1]) {
            Err(Error::Rank(m)) => assert!(m.contains("(0,1)"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn counts() {
        assert_eq!(moment_count(1, 3), 3);
        assert_eq!(moment_count(2, 2), 5);
        assert_eq!(moment_count(3, 2), 9);
        assert_eq!(multi_indices(2, 2), vec![vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
        for (d, q) in [(1, 4), (2, 3), (3, 3), (4, 2)] {
            assert_eq!(multi_indices(d, q).len(), moment_count(d, q));
        }
    }

    #[test]
    fn labels() {
        let s = DiffOpSpec::partial("u_3", &["x_1", "x_2", "x_3"], &[0], 1, 2);
        assert_eq!(s.label(), "du_3/dx_1");
        assert_eq!(s.variable, vec!["x_1"]);
        let s2 = DiffOpSpec::partial("u", &["x_1", "x_2"], &[0, 1], 2, 2);
        assert_eq!(s2.label(), "d2u/dx_1dx_2");
        assert_eq!(s2.alpha(), vec![1, 1]);
        assert_eq!(s.neighborhood_size(), 11);
    }

    #[test]
    fn spec_validation() {
        let mut s = DiffOpSpec::partial("u", &["x"], &[0], 1, 2);
        s.accuracy = 0;
        assert!(s.validate().is_err());
        let mut s = DiffOpSpec::partial("u", &["x"], &[0], 1, 2);
        s.order = 3;
        assert!(s.validate().is_err());
        let mut s = DiffOpSpec::partial("u", &["x"], &[0], 1, 2);
        s.dimension = vec![1];
        assert!(s.validate().is_err());
        let mut s = DiffOpSpec::partial("u", &["x", "y"], &[0], 1, 2);
        s.variable = vec!["y".into()];
        assert!(s.validate().is_err());
    }

    fn grid(n: usize) -> (Vec<f64>, Graph) {
        let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let g = build_graph(&x, 1, 2).unwrap();
        (x, g)
    }

    #[test]
    fn quadratic_and_constant_on_grid() {
        let (x, g) = grid(21);
        let spec = DiffOpSpec::partial("u", &["x"], &[0], 1, 2);
        let d = nonlocal_partial(&g, &vec![3.0; 21], &spec).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-12));
        let u: Vec<f64> = x.iter().map(|v| v * v).collect();
        let d = nonlocal_partial(&g, &u, &spec).unwrap();
        for (xi, di) in x.iter().zip(&d) {
            assert!((di - 2.0 * xi).abs() < 1e-10);
        }
    }

    #[test]
    fn sine_convergence() {
        let spec = DiffOpSpec::partial("u", &["x"], &[0], 1, 2);
        let err = |n: usize| {
            let x: Vec<f64> = (0..n).map(|i| 3.0 * i as f64 / (n - 1) as f64).collect();
            let g = build_graph(&x, 1, 2).unwrap();
            let u: Vec<f64> = x.iter().map(|v| v.sin()).collect();
            let d = nonlocal_partial(&g, &u, &spec).unwrap();
            x.iter().zip(&d).map(|(xi, di)| (di - xi.cos()).abs()).fold(0.0, f64::max)
        };
        let (e1, e2, e3) = (err(41), err(81), err(161));
        assert!((e1 / e2).log2() >= 1.9 && (e2 / e3).log2() >= 1.9, "{e1} {e2} {e3}");
    }

    #[test]
    fn rank_error_names_vertex() {
        // 2D points on a line; y-derivative impossible
        let pts: Vec<f64> = (0..6).flat_map(|i| [i as f64, 0.0]).collect();
        let g = build_graph(&pts, 2, 3).unwrap();
        let spec = DiffOpSpec::partial("u", &["x", "y"], &[1], 1, 1);
        let e = nonlocal_partial(&g, &[0.0; 6], &spec).unwrap_err().to_string();
        assert!(e.contains("vertex 0"), "{e}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn polynomial_exactness_2d(seed in 0u64..500, acc in 1usize..4, mu in 0usize..2) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let k = moment_count(2, acc) + 3;
            let off: Vec<f64> = (0..2 * k).map(|_| rng.gen_range(-0.1..0.1)).collect();
            let mut alpha = vec![0, 0];
            alpha[mu] = 1;
            let s = stencil_weights(&off, 2, acc, &alpha).unwrap();
            let c = [0.3, -0.2];
            for b in multi_indices(2, acc) {
                let f = |x: f64, y: f64| x.powi(b[0] as i32) * y.powi(b[1] as i32);
                let u0 = f(c[0], c[1]);
                let d = s.apply(u0, (0..k).map(|j| f(c[0] + off[2 * j], c[1] + off[2 * j + 1])));
                let exact = if b[mu] == 0 { 0.0 } else {
                    let mut e = b.clone();
                    e[mu] -= 1;
                    b[mu] as f64 * c[0].powi(e[0] as i32) * c[1].powi(e[1] as i32)
                };
                prop_assert!((d - exact).abs() < 1e-10, "beta {:?}: {} vs {}", b, d, exact);
            }
        }

        #[test]
        fn translation_invariant(seed in 0u64..500, sx in -5.0f64..5.0, sy in -5.0f64..5.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<f64> = (0..60).map(|_| rng.gen_range(0.0..1.0)).collect();
            let shifted: Vec<f64> = pts.iter().enumerate().map(|(i, v)| v + if i % 2 == 0 { sx } else { sy }).collect();
            let g1 = build_graph(&pts, 2, 7).unwrap();
            let g2 = build_graph(&shifted, 2, 7).unwrap();
            for i in 0..30 {
                prop_assert_eq!(g1.neighbors(i), g2.neighbors(i));
                let a = stencil_weights(&g1.offsets(i), 2, 2, &[1, 0]).unwrap();
                let b = stencil_weights(&g2.offsets(i), 2, 2, &[1, 0]).unwrap();
                for (wa, wb) in a.weights(0).iter().zip(b.weights(0)) {
                    prop_assert!((wa - wb).abs() < 1e-12 * wa.abs().max(1.0));
                }
            }
        }
    }
}
