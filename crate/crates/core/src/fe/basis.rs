//! Tensor-product Lagrange bases Q^(p_t,p_s) on space-time boxes.
//!
//! The same type serves element spaces (degrees `[1, p_s, ..]`) and facet
//! spaces, where the normal axis gets degree 0 (a single constant factor).

use super::geometry::{BoxGeom, PointSet, MAX_AXES};
use super::lagrange::Lagrange1d;

#[derive(Debug, Clone)]
pub struct TensorBasis {
    pub dim: usize,
    pub degrees: [usize; MAX_AXES],
    axes: Vec<Lagrange1d>,
}

/// Basis values and reference-coordinate derivatives at one point.
#[derive(Debug, Clone)]
pub struct BasisEval {
    pub values: Vec<f64>,
    /// first derivatives per axis, `[axis][i]`
    pub d1: Vec<Vec<f64>>,
    /// pure second derivatives per axis, `[axis][i]`
    pub d2: Vec<Vec<f64>>,
}

impl TensorBasis {
    pub fn new(degrees: &[usize]) -> Self {
        assert!(!degrees.is_empty() && degrees.len() <= MAX_AXES);
        let mut deg = [0; MAX_AXES];
        deg[..degrees.len()].copy_from_slice(degrees);
        let axes = degrees.iter().map(|&p| Lagrange1d::new(p)).collect();
        TensorBasis { dim: degrees.len(), degrees: deg, axes }
    }

    /// Element space Q^(1,p_s) in d space dimensions.
    pub fn element(d: usize, ps: usize) -> Self {
        let mut deg = vec![1];
        deg.extend(std::iter::repeat(ps).take(d));
        Self::new(&deg)
    }

    /// Facet space for a facet with normal axis `axis`.
    pub fn facet(d: usize, ps: usize, axis: usize) -> Self {
        let mut deg = vec![1];
        deg.extend(std::iter::repeat(ps).take(d));
        deg[axis] = 0;
        Self::new(&deg)
    }

    pub fn len(&self) -> usize {
        (0..self.dim).map(|a| self.degrees[a] + 1).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn axis(&self, a: usize) -> &Lagrange1d {
        &self.axes[a]
    }

    /// Per-axis node indices of basis function `i` (axis 0 fastest).
    pub fn split(&self, i: usize) -> [usize; MAX_AXES] {
        let mut idx = [0; MAX_AXES];
        let mut rem = i;
        for a in 0..self.dim {
            let n = self.degrees[a] + 1;
            idx[a] = rem % n;
            rem /= n;
        }
        idx
    }

    /// Reference coordinates of the nodes of basis function `i`.
    pub fn node(&self, i: usize) -> [f64; MAX_AXES] {
        let idx = self.split(i);
        let mut x = [0.0; MAX_AXES];
        for a in 0..self.dim {
            x[a] = self.axes[a].nodes[idx[a]];
        }
        x
    }

    /// Evaluate at a reference point in [-1,1]^dim.
    pub fn evaluate(&self, r: &[f64]) -> BasisEval {
        debug_assert!(r.iter().take(self.dim).all(|x| x.abs() <= 1.0 + 1e-10));
        let tabs: Vec<[Vec<f64>; 3]> = (0..self.dim)
            .map(|a| {
                let n = self.degrees[a] + 1;
                let (mut v, mut d1, mut d2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
                self.axes[a].eval(r[a], &mut v, &mut d1, &mut d2);
                [v, d1, d2]
            })
            .collect();
        let nb = self.len();
        let mut out = BasisEval {
            values: vec![0.0; nb],
            d1: vec![vec![0.0; nb]; self.dim],
            d2: vec![vec![0.0; nb]; self.dim],
        };
        for i in 0..nb {
            let idx = self.split(i);
            out.values[i] = (0..self.dim).map(|a| tabs[a][0][idx[a]]).product();
            for b in 0..self.dim {
                let mut g = 1.0;
                let mut h = 1.0;
                for a in 0..self.dim {
                    let k = if a == b { 1 } else { 0 };
                    g *= tabs[a][k][idx[a]];
                    h *= tabs[a][if a == b { 2 } else { 0 }][idx[a]];
                }
                out.d1[b][i] = g;
                out.d2[b][i] = h;
            }
        }
        out
    }

    /// Tabulate on a tensor point set placed on the physical box `geom`.
    /// Derivatives are physical; collapsed axes of `geom` must carry degree 0.
    pub fn tabulate(&self, geom: &BoxGeom, pts: &PointSet) -> Tabulation {
        assert_eq!(pts.dim, self.dim);
        let dim = self.dim;
        // per axis: [point][node] tables of value, d1, d2 (physical)
        let mut tv: Vec<Vec<f64>> = Vec::with_capacity(dim);
        let mut td1: Vec<Vec<f64>> = Vec::with_capacity(dim);
        let mut td2: Vec<Vec<f64>> = Vec::with_capacity(dim);
        for a in 0..dim {
            let n = self.degrees[a] + 1;
            let np = pts.axis_x[a].len();
            let (mut v, mut d1, mut d2) = (vec![0.0; np * n], vec![0.0; np * n], vec![0.0; np * n]);
            let e = geom.extent(a);
            let s = if e > 0.0 { 2.0 / e } else { 0.0 };
            debug_assert!(e > 0.0 || self.degrees[a] == 0);
            for (k, &x) in pts.axis_x[a].iter().enumerate() {
                let r = geom.to_ref(a, x);
                self.axes[a].eval(
                    r,
                    &mut v[k * n..(k + 1) * n],
                    &mut d1[k * n..(k + 1) * n],
                    &mut d2[k * n..(k + 1) * n],
                );
                for j in 0..n {
                    d1[k * n + j] *= s;
                    d2[k * n + j] *= s * s;
                }
            }
            tv.push(v);
            td1.push(d1);
            td2.push(d2);
        }
        let nb = self.len();
        let nq = pts.len();
        let mut tab = Tabulation {
            dim,
            nq,
            nb,
            x: pts.points(),
            w: pts.weights(),
            phi: vec![0.0; nq * nb],
            d1: vec![vec![0.0; nq * nb]; dim],
            d2: vec![vec![0.0; nq * nb]; dim],
        };
        let bsplit: Vec<[usize; MAX_AXES]> = (0..nb).map(|i| self.split(i)).collect();
        for q in 0..nq {
            let qi = pts.split(q);
            for (i, bi) in bsplit.iter().enumerate() {
                let mut fac = [[0.0; 3]; MAX_AXES];
                for a in 0..dim {
                    let n = self.degrees[a] + 1;
                    let o = qi[a] * n + bi[a];
                    fac[a] = [tv[a][o], td1[a][o], td2[a][o]];
                }
                let val: f64 = (0..dim).map(|a| fac[a][0]).product();
                tab.phi[q * nb + i] = val;
                for b in 0..dim {
                    let mut g = 1.0;
                    let mut h = 1.0;
                    for a in 0..dim {
                        if a == b {
                            g *= fac[a][1];
                            h *= fac[a][2];
                        } else {
                            g *= fac[a][0];
                            h *= fac[a][0];
                        }
                    }
                    tab.d1[b][q * nb + i] = g;
                    tab.d2[b][q * nb + i] = h;
                }
            }
        }
        tab
    }
}

/// Basis values and physical derivatives at the points of a [`PointSet`].
/// Layout `[q * nb + i]`.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub dim: usize,
    pub nq: usize,
    pub nb: usize,
    pub x: Vec<[f64; MAX_AXES]>,
    pub w: Vec<f64>,
    pub phi: Vec<f64>,
    pub d1: Vec<Vec<f64>>,
    pub d2: Vec<Vec<f64>>,
}

impl Tabulation {
    pub fn phi_at(&self, q: usize) -> &[f64] {
        &self.phi[q * self.nb..(q + 1) * self.nb]
    }

    pub fn d1_at(&self, axis: usize, q: usize) -> &[f64] {
        &self.d1[axis][q * self.nb..(q + 1) * self.nb]
    }

    pub fn d2_at(&self, axis: usize, q: usize) -> &[f64] {
        &self.d2[axis][q * self.nb..(q + 1) * self.nb]
    }

    /// Σ_i c_i φ_i at point q.
    pub fn value(&self, c: &[f64], q: usize) -> f64 {
        dot(c, self.phi_at(q))
    }

    pub fn deriv(&self, c: &[f64], axis: usize, q: usize) -> f64 {
        dot(c, self.d1_at(axis, q))
    }

    /// Spatial Laplacian (axes 1..dim).
    pub fn laplacian(&self, c: &[f64], q: usize) -> f64 {
        (1..self.dim).map(|a| dot(c, self.d2_at(a, q))).sum()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
