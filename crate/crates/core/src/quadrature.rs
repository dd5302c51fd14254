//! Gauss–Hermite rules for expectations under one- and two-dimensional Gaussians.

use nalgebra::DMatrix;

/// Q-point rule for E[g(Z)], Z ~ N(0, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Orthonormal Hermite values p_{Q-1}(x), p_Q(x) for weight e^{-x²}, plus Σ_{k<Q} p_k(x)².
fn orthonormal(q: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25);
    let mut sum = 0.0;
    for k in 0..q {
        sum += cur * cur;
        let next = (2.0 / (k + 1) as f64).sqrt() * x * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    (prev, cur, sum)
}

impl GaussHermite {
    /// Golub–Welsch eigenvalues, polished by Newton steps on the three-term recurrence;
    /// weights from the Christoffel function.
    pub fn new(q: usize) -> Self {
        assert!(q >= 1, "Gauss-Hermite rule needs at least one node");
        let jac = DMatrix::from_fn(q, q, |i, j| {
            if i + 1 == j || j + 1 == i {
                ((i.max(j)) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let mut xs: Vec<f64> = jac.symmetric_eigen().eigenvalues.iter().copied().collect();
        xs.sort_by(f64::total_cmp);
        let mut nodes = Vec::with_capacity(q);
        let mut weights = Vec::with_capacity(q);
        for mut x in xs {
            for _ in 0..3 {
                let (pm1, p, _) = orthonormal(q, x);
                let dp = (2.0 * q as f64).sqrt() * pm1;
                if dp == 0.0 {
                    break;
                }
                x -= p / dp;
            }
            let (_, _, sum) = orthonormal(q, x);
            nodes.push(std::f64::consts::SQRT_2 * x);
            weights.push(1.0 / (sum * std::f64::consts::PI.sqrt()));
        }
        // symmetrize against round-off
        for i in 0..q / 2 {
            let j = q - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            let w = 0.5 * (weights[i] + weights[j]);
            nodes[i] = -x;
            nodes[j] = x;
            weights[i] = w;
            weights[j] = w;
        }
        if q % 2 == 1 {
            nodes[q / 2] = 0.0;
        }
        GaussHermite { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// E[g(m + sqrt(v) Z)].
    pub fn expect_normal(&self, mean: f64, var: f64, g: impl Fn(f64) -> f64) -> f64 {
        if var <= 0.0 {
            return g(mean);
        }
        let s = var.sqrt();
        let mut acc = 0.0;
        for (z, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * g(mean + s * z);
        }
        acc
    }

    /// E[g(X, Y)] for (X, Y) ~ N(mean, cov) through the Cholesky factor. A negative
    /// Schur complement (round-off on a singular covariance) is clipped at zero.
    pub fn expect_bivariate(&self, mean: [f64; 2], cov: [[f64; 2]; 2], g: impl Fn(f64, f64) -> f64) -> f64 {
        let l11 = cov[0][0].max(0.0).sqrt();
        let l21 = if l11 > 0.0 { cov[1][0] / l11 } else { 0.0 };
        let l22 = (cov[1][1] - l21 * l21).max(0.0).sqrt();
        if l11 == 0.0 {
            return self.expect_normal(mean[1], l22 * l22, |y| g(mean[0], y));
        }
        if l22 == 0.0 {
            return self.expect_normal(0.0, 1.0, |z| g(mean[0] + l11 * z, mean[1] + l21 * z));
        }
        let mut acc = 0.0;
        for (z1, w1) in self.nodes.iter().zip(&self.weights) {
            let x = mean[0] + l11 * z1;
            let yb = mean[1] + l21 * z1;
            let mut inner = 0.0;
            for (z2, w2) in self.nodes.iter().zip(&self.weights) {
                inner += w2 * g(x, yb + l22 * z2);
            }
            acc += w1 * inner;
        }
        acc
    }
}
