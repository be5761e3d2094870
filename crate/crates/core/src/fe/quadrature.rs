//! Gauss–Legendre rules on [-1,1] and their tensor products.

/// Points and weights of the `n`-point Gauss–Legendre rule on [-1,1].
///
/// Newton iteration on the Legendre polynomial starting from the
/// Chebyshev-like guess; converges to machine precision in a few steps.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss rule needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// P_n(z) and P_n'(z) by the three-term recurrence.
pub(crate) fn legendre_and_derivative(n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    // derivative from P_n and P_{n-1}
    let d = if (1.0 - z * z).abs() < 1e-300 {
        let s = if z > 0.0 { 1.0 } else if n % 2 == 0 { -1.0 } else { 1.0 };
        s * (n * (n + 1)) as f64 / 2.0
    } else {
        n as f64 * (z * p1 - p0) / (z * z - 1.0)
    };
    (p1, d)
}

/// Tensor-product Gauss rule on [-1,1]^k, first axis varying fastest.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub dim: usize,
    pub n_per_axis: usize,
    /// flattened point coordinates, `dim` entries per point
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, q: usize) -> &[f64] {
        &self.points[q * self.dim..(q + 1) * self.dim]
    }

    /// Highest per-axis polynomial degree integrated exactly.
    pub fn exactness(&self) -> usize {
        2 * self.n_per_axis - 1
    }
}

/// `n` Gauss points per axis on `k` axes.
pub fn gauss_rule(n: usize, k: usize) -> QuadratureRule {
    let (x, w) = gauss_legendre(n);
    let total = n.pow(k as u32);
    let mut points = Vec::with_capacity(total * k);
    let mut weights = Vec::with_capacity(total);
    for q in 0..total {
        let mut rem = q;
        let mut wt = 1.0;
        for _ in 0..k {
            let i = rem % n;
            rem /= n;
            points.push(x[i]);
            wt *= w[i];
        }
        weights.push(wt);
    }
    QuadratureRule { dim: k, n_per_axis: n, points, weights }
}
