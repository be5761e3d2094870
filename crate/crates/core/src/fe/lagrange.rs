//! One-dimensional nodal Lagrange bases on Gauss–Lobatto nodes.

use super::quadrature::legendre_and_derivative;

/// Gauss–Lobatto nodes of degree `p` on [-1,1] (p+1 nodes, endpoints included).
/// Degree 0 uses the single midpoint.
pub fn gll_nodes(p: usize) -> Vec<f64> {
    match p {
        0 => vec![0.0],
        1 => vec![-1.0, 1.0],
        _ => {
            let mut x = vec![0.0; p + 1];
            x[0] = -1.0;
            x[p] = 1.0;
            // interior nodes are the roots of P_p'
            for i in 1..p {
                let mut z = -(std::f64::consts::PI * i as f64 / p as f64).cos();
                for _ in 0..100 {
                    let (pp, dp) = legendre_and_derivative(p, z);
                    // (1 - z^2) P'' = 2 z P' - p(p+1) P
                    let d2 = (2.0 * z * dp - (p * (p + 1)) as f64 * pp) / (1.0 - z * z);
                    let dz = dp / d2;
                    z -= dz;
                    if dz.abs() < 1e-16 {
                        break;
                    }
                }
                x[i] = z;
            }
            if p % 2 == 0 {
                x[p / 2] = 0.0;
            }
            x
        }
    }
}

/// Lagrange basis of degree `p` through the Gauss–Lobatto nodes.
#[derive(Debug, Clone)]
pub struct Lagrange1d {
    pub degree: usize,
    pub nodes: Vec<f64>,
    denom: Vec<f64>,
}

impl Lagrange1d {
    pub fn new(degree: usize) -> Self {
        let nodes = gll_nodes(degree);
        let denom = (0..=degree)
            .map(|i| {
                (0..=degree)
                    .filter(|&j| j != i)
                    .map(|j| nodes[i] - nodes[j])
                    .product::<f64>()
            })
            .collect();
        Self { degree, nodes, denom }
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Values, first and second derivatives of every basis function at `x`.
    pub fn eval(&self, x: f64, v: &mut [f64], d1: &mut [f64], d2: &mut [f64]) {
        let n = self.degree + 1;
        let diff: Vec<f64> = self.nodes.iter().map(|&xj| x - xj).collect();
        for i in 0..n {
            let mut val = 1.0;
            let mut der = 0.0;
            let mut sec = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                val *= diff[j];
                let mut pj = 1.0;
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    pj *= diff[k];
                    let mut pjk = 1.0;
                    for l in 0..n {
                        if l != i && l != j && l != k {
                            pjk *= diff[l];
                        }
                    }
                    sec += pjk;
                }
                der += pj;
            }
            if n == 1 {
                der = 0.0;
            }
            v[i] = val / self.denom[i];
            d1[i] = der / self.denom[i];
            d2[i] = sec / self.denom[i];
        }
    }
}
