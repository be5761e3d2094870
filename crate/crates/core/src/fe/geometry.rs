//! Axis-aligned space-time boxes and tensor point sets on them.
//!
//! Axis 0 is time, axes 1..=d are space.

use super::quadrature::gauss_legendre;

/// Maximum number of space-time axes (d ≤ 2).
pub const MAX_AXES: usize = 3;

/// Closed axis-aligned box in space-time. A facet is a box with one
/// collapsed axis (`lo[a] == hi[a]`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxGeom {
    pub dim: usize,
    pub lo: [f64; MAX_AXES],
    pub hi: [f64; MAX_AXES],
}

impl BoxGeom {
    pub fn new(lo: &[f64], hi: &[f64]) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(lo.len() <= MAX_AXES);
        let mut b = BoxGeom { dim: lo.len(), lo: [0.0; MAX_AXES], hi: [0.0; MAX_AXES] };
        b.lo[..lo.len()].copy_from_slice(lo);
        b.hi[..hi.len()].copy_from_slice(hi);
        b
    }

    pub fn extent(&self, a: usize) -> f64 {
        self.hi[a] - self.lo[a]
    }

    /// Lebesgue measure over the non-collapsed axes.
    pub fn measure(&self) -> f64 {
        (0..self.dim)
            .map(|a| self.extent(a))
            .filter(|&e| e > 0.0)
            .product()
    }

    pub fn to_ref(&self, a: usize, x: f64) -> f64 {
        let e = self.extent(a);
        if e > 0.0 {
            2.0 * (x - self.lo[a]) / e - 1.0
        } else {
            0.0
        }
    }

    pub fn from_ref(&self, a: usize, r: f64) -> f64 {
        self.lo[a] + 0.5 * (r + 1.0) * self.extent(a)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        (0..self.dim).all(|a| x[a] >= self.lo[a] - tol && x[a] <= self.hi[a] + tol)
    }

    /// The face of this box with axis `a` fixed at the low (`side = 0`) or high end.
    pub fn face(&self, a: usize, side: usize) -> BoxGeom {
        let mut f = *self;
        let c = if side == 0 { self.lo[a] } else { self.hi[a] };
        f.lo[a] = c;
        f.hi[a] = c;
        f
    }
}

/// Tensor point set: per-axis coordinates and weights. Collapsed axes carry
/// one coordinate with unit weight. Points are ordered with axis 0 fastest.
#[derive(Debug, Clone)]
pub struct PointSet {
    pub dim: usize,
    pub axis_x: Vec<Vec<f64>>,
    pub axis_w: Vec<Vec<f64>>,
}

impl PointSet {
    /// `n` Gauss points along every non-collapsed axis of `b`.
    pub fn gauss(b: &BoxGeom, n: usize) -> Self {
        let (gx, gw) = gauss_legendre(n);
        let mut axis_x = Vec::with_capacity(b.dim);
        let mut axis_w = Vec::with_capacity(b.dim);
        for a in 0..b.dim {
            let e = b.extent(a);
            if e > 0.0 {
                axis_x.push(gx.iter().map(|&r| b.from_ref(a, r)).collect());
                axis_w.push(gw.iter().map(|&w| 0.5 * e * w).collect());
            } else {
                axis_x.push(vec![b.lo[a]]);
                axis_w.push(vec![1.0]);
            }
        }
        PointSet { dim: b.dim, axis_x, axis_w }
    }

    /// Explicit per-axis coordinates (unit weights); used for sampling grids.
    pub fn grid(axis_x: Vec<Vec<f64>>) -> Self {
        let axis_w = axis_x.iter().map(|v| vec![1.0; v.len()]).collect();
        PointSet { dim: axis_x.len(), axis_x, axis_w }
    }

    pub fn len(&self) -> usize {
        self.axis_x.iter().map(|v| v.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-axis indices of flat point `q`.
    pub fn split(&self, q: usize) -> [usize; MAX_AXES] {
        let mut idx = [0; MAX_AXES];
        let mut rem = q;
        for a in 0..self.dim {
            let n = self.axis_x[a].len();
            idx[a] = rem % n;
            rem /= n;
        }
        idx
    }

    pub fn point(&self, q: usize) -> [f64; MAX_AXES] {
        let idx = self.split(q);
        let mut p = [0.0; MAX_AXES];
        for a in 0..self.dim {
            p[a] = self.axis_x[a][idx[a]];
        }
        p
    }

    pub fn weight(&self, q: usize) -> f64 {
        let idx = self.split(q);
        (0..self.dim).map(|a| self.axis_w[a][idx[a]]).product()
    }

    pub fn points(&self) -> Vec<[f64; MAX_AXES]> {
        (0..self.len()).map(|q| self.point(q)).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|q| self.weight(q)).collect()
    }
}
