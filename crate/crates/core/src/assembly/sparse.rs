//! Compressed-row sparse matrix with a right-hand side.

/// Square CSR system `A x = b`. The sparsity pattern is structurally
/// symmetric (missing transposed entries are stored as explicit zeros).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    /// Build from triplets. Duplicates are summed in input order, so the
    /// result is bitwise reproducible for a fixed triplet sequence.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)], rhs: Vec<f64>) -> Self {
        assert_eq!(rhs.len(), n);
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * triplets.len());
        entries.extend_from_slice(triplets);
        entries.extend(triplets.iter().map(|&(i, j, _)| (j, i, 0.0)));
        for i in 0..n {
            entries.push((i, i, 0.0));
        }
        // stable: keeps the summation order of duplicates
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            assert!(i < n && j < n, "triplet ({i},{j}) outside {n}x{n}");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSystem { n, row_ptr, col_idx, values, rhs }
    }

    /// Zero matrix on a given CSR pattern (columns sorted within rows).
    pub fn from_pattern(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, rhs: Vec<f64>) -> Self {
        assert_eq!(row_ptr.len(), n + 1);
        assert_eq!(rhs.len(), n);
        let values = vec![0.0; col_idx.len()];
        SparseSystem { n, row_ptr, col_idx, values, rhs }
    }

    /// Add `v` to entry (i, j), which must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        let k = self.col_idx[r.clone()].binary_search(&j).unwrap_or_else(|_| panic!("({i},{j}) outside pattern"));
        self.values[r.start + k] += v;
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(k) => v[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum()
            })
            .collect()
    }

    /// xᵀ A y
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    /// A x − b
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.matvec(x);
        for (ri, bi) in r.iter_mut().zip(&self.rhs) {
            *ri -= bi;
        }
        r
    }

    /// Replace row `i` by the identity row with right-hand side `value`.
    /// The pattern is kept; off-diagonal entries become explicit zeros.
    pub fn set_identity_row(&mut self, i: usize, value: f64) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        for k in r {
            self.values[k] = if self.col_idx[k] == i { 1.0 } else { 0.0 };
        }
        self.rhs[i] = value;
    }

    /// Structural symmetry check of the pattern.
    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            let (c, _) = self.row(i);
            c.iter().all(|&j| self.row(j).0.binary_search(&i).is_ok())
        })
    }

    /// Max absolute value of a row.
    pub fn row_max(&self, i: usize) -> f64 {
        self.row(i).1.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
