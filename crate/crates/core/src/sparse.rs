//! Compressed sparse row storage for assembled system matrices.

use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::DMatrix;
use std::io::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds a zero-valued matrix with the given per-row sorted column pattern.
    pub fn from_pattern(ncols: usize, rows: Vec<Vec<usize>>) -> Self {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        let nnz: usize = rows.iter().map(|r| r.len()).sum();
        let mut indices = Vec::with_capacity(nnz);
        for r in rows {
            debug_assert!(r.windows(2).all(|w| w[0] < w[1]));
            indices.extend(r);
            indptr.push(indices.len());
        }
        let data = vec![T::zero(); indices.len()];
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    /// Raw constructor; validates shape consistency and sorted rows.
    pub fn from_raw(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        data: Vec<T>,
    ) -> Result<Self> {
        if indptr.len() != nrows + 1
            || indices.len() != data.len()
            || indptr[nrows] != indices.len()
        {
            return Err(Error::InvalidArgument("inconsistent CSR arrays".into()));
        }
        for i in 0..nrows {
            let row = &indices[indptr[i]..indptr[i + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&j| j >= ncols) {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has unsorted or out-of-range columns"
                )));
            }
        }
        Ok(Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        })
    }

    /// Converts a dense matrix, dropping exact zeros.
    pub fn from_dense(m: &DMatrix<T>) -> Self {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != T::zero() {
                    indices.push(j);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: m.nrows(),
            ncols: m.ncols(),
            indptr,
            indices,
            data,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Values in storage order; the pattern stays fixed.
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.data[r])
    }

    pub fn row_mut(&mut self, i: usize) -> (&[usize], &mut [T]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &mut self.data[r])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(T::zero(), |k| vals[k])
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            let (s, e) = (self.indptr[i], self.indptr[i + 1]);
            let mut acc = T::zero();
            for k in s..e {
                acc += self.data[k] * x[self.indices[k]];
            }
            *yi = acc;
        }
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                got: x.len(),
            });
        }
        let mut y = vec![T::zero(); self.nrows];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    /// Removes stored entries that are exactly zero.
    pub fn drop_zeros(&mut self) {
        let mut indptr = vec![0];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                if self.data[k] != T::zero() {
                    indices.push(self.indices[k]);
                    data.push(self.data[k]);
                }
            }
            indptr.push(indices.len());
        }
        self.indptr = indptr;
        self.indices = indices;
        self.data = data;
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().fold(T::zero(), |a, &v| a + v * v).sqrt()
    }

    /// Writes the matrix in Matrix Market coordinate format (1-based indices).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v.as_f64())?;
            }
        }
        Ok(())
    }
}

/// Parses a Matrix Market coordinate file written by [`CsrMatrix::write_matrix_market`].
pub fn read_matrix_market(text: &str) -> Result<CsrMatrix<f64>> {
    let mut lines = text
        .lines()
        .filter(|l| !l.starts_with('%') && !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Io("empty Matrix Market file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Io(format!("bad header {header:?}")))
        })
        .collect::<Result<_>>()?;
    let (nrows, ncols) = (dims[0], dims[1]);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
    for l in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        let bad = || Error::Io(format!("bad entry {l:?}"));
        let i: usize = t.first().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let j: usize = t.get(1).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let v: f64 = t.get(2).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        rows[i - 1].push((j - 1, v));
    }
    let mut indptr = vec![0];
    let mut indices = Vec::new();
    let mut data = Vec::new();
    for mut r in rows {
        r.sort_by_key(|e| e.0);
        for (j, v) in r {
            indices.push(j);
            data.push(v);
        }
        indptr.push(indices.len());
    }
    CsrMatrix::from_raw(nrows, ncols, indptr, indices, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_roundtrip_and_matvec() {
        let d = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0, 4.0, 0.0, 5.0]);
        let s = CsrMatrix::from_dense(&d);
        assert_eq!(s.nnz(), 5);
        assert_eq!(s.to_dense(), d);
        assert_eq!(s.matvec(&[1.0, 1.0, 1.0]).unwrap(), vec![3.0, 3.0, 9.0]);
        assert_eq!(s.get(0, 2), 2.0);
        assert_eq!(s.get(0, 1), 0.0);
        assert!(s.matvec(&[1.0]).is_err());
    }

    #[test]
    fn matrix_market_roundtrip() {
        let d = DMatrix::from_row_slice(2, 3, &[1.5, 0.0, -2.25e-7, 0.0, 3.0, 1.0 / 3.0]);
        let s = CsrMatrix::from_dense(&d);
        let mut buf = Vec::new();
        s.write_matrix_market(&mut buf).unwrap();
        let back = read_matrix_market(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn drop_zeros_keeps_values() {
        let mut s = CsrMatrix::<f64>::from_pattern(3, vec![vec![0, 1], vec![1, 2], vec![2]]);
        s.row_mut(0).1[1] = 2.0;
        s.row_mut(2).1[0] = 1.0;
        s.drop_zeros();
        assert_eq!(s.nnz(), 2);
        assert_eq!(s.get(0, 1), 2.0);
        assert!(CsrMatrix::<f64>::from_raw(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
    }
}
