use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Real symmetric matrix stored as its packed lower triangle (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

#[inline]
fn packed(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            data: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = SymMatrix::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds a matrix from `f(i, j)` evaluated on the lower triangle `i >= j`.
    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Symmetrizes a dense square matrix as `(M + M^T) / 2`.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "matrix must be square");
        SymMatrix::from_fn(m.nrows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    }

    /// Reads the lower-triangle rows `[[a11], [a21, a22], ...]`.
    pub fn from_lower_rows(rows: &[Vec<f64>]) -> Result<Self, String> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * (dim + 1) / 2);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(format!(
                    "row {} of a lower triangle must have {} entries, found {}",
                    i + 1,
                    i + 1,
                    row.len()
                ));
            }
            data.extend_from_slice(row);
        }
        Ok(SymMatrix { dim, data })
    }

    pub fn lower_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..=i).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[packed(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[packed(i, j)] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[packed(i, j)] += v;
    }

    /// Packed lower triangle.
    pub fn packed(&self) -> &[f64] {
        &self.data
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }

    pub fn scale(&self, a: f64) -> Self {
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().map(|v| a * v).collect(),
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &SymMatrix) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        SymMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| x + a * y)
                .collect(),
        }
    }

    /// Trace inner product `Tr(self * other)`.
    pub fn trace_dot(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..i {
                acc += 2.0 * self.get(i, j) * other.get(i, j);
            }
            acc += self.get(i, i) * other.get(i, i);
        }
        acc
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.trace_dot(self).sqrt()
    }

    /// Eigenvalues sorted in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim == 0 {
            return Vec::new();
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(self.to_dense())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// Eigenvalues (descending) with the matching unit eigenvectors.
    pub fn eigen(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let e = SymmetricEigen::new(self.to_dense());
        let mut order: Vec<usize> = (0..self.dim).collect();
        order.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
        let values = order.iter().map(|&k| e.eigenvalues[k]).collect();
        let vectors = order
            .iter()
            .map(|&k| e.eigenvectors.column(k).iter().copied().collect())
            .collect();
        (values, vectors)
    }

    pub fn min_eig(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }

    pub fn max_eig(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Block-diagonal matrix with the given blocks in order.
    pub fn block_diag(blocks: &[&SymMatrix]) -> Self {
        let dim = blocks.iter().map(|b| b.dim).sum();
        let mut out = SymMatrix::zeros(dim);
        let mut offset = 0;
        for b in blocks {
            for i in 0..b.dim {
                for j in 0..=i {
                    out.set(offset + i, offset + j, b.get(i, j));
                }
            }
            offset += b.dim;
        }
        out
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig(m: &SymMatrix) -> f64 {
    m.min_eig()
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = String;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        SymMatrix::from_lower_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.lower_rows()
    }
}
