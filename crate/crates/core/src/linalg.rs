//! Dense helpers for the small row-major matrices the coefficients produce.

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dim * dim, "matrix data length");
        Self { dim, data }
    }

    pub fn diag(entries: &[f64]) -> Self {
        let dim = entries.len();
        let mut m = Self::zeros(dim);
        for (i, &v) in entries.iter().enumerate() {
            m.data[i * dim + i] = v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn frobenius(&self) -> f64 {
        norm(&self.data)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        mul_vec_acc(&self.data, v, 1.0, &mut out);
        out
    }
}

#[inline]
pub fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// Euclidean norm for vectors, Frobenius norm for row-major matrices.
#[inline]
pub fn norm(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `out += scale * m * v` for a row-major `m`.
#[inline]
pub fn mul_vec_acc(m: &[f64], v: &[f64], scale: f64, out: &mut [f64]) {
    let d = v.len();
    for (row, o) in m.chunks_exact(d).zip(out.iter_mut()) {
        *o += scale * dot(row, v);
    }
}

#[inline]
pub fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|a| a.is_finite())
}
