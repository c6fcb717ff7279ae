use std::io::Write;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};

/// An `n × d` binary indicator matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskMatrix(Array2<u8>);

impl MaskMatrix {
    pub fn new(entries: Array2<u8>) -> Result<Self> {
        if let Some(bad) = entries.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidArgument(format!("mask entry {bad} is not 0 or 1")));
        }
        Ok(MaskMatrix(entries))
    }

    pub fn from_fn(n: usize, d: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        MaskMatrix(Array2::from_shape_fn((n, d), |(i, j)| f(i, j) as u8))
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let flat: Vec<u8> = rows.iter().flatten().copied().collect();
        let arr = Array2::from_shape_vec((n, d), flat).map_err(|e| Error::Shape {
            expected: format!("{n}x{d}"),
            got: e.to_string(),
        })?;
        Self::new(arr)
    }

    pub fn ones(n: usize, d: usize) -> Self {
        MaskMatrix(Array2::ones((n, d)))
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        MaskMatrix(Array2::zeros((n, d)))
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.0[[i, j]] == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.0[[i, j]] = v as u8;
    }

    pub fn entries(&self) -> &Array2<u8> {
        &self.0
    }

    pub fn to_f64(&self) -> Array2<f64> {
        self.0.mapv(f64::from)
    }

    /// Column-wise fraction of ones.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.nrows().max(1) as f64;
        self.0
            .axis_iter(Axis(1))
            .map(|c| c.iter().map(|&v| v as f64).sum::<f64>() / n)
            .collect()
    }

    pub fn row_count(&self, i: usize) -> usize {
        self.0.row(i).iter().map(|&v| v as usize).sum()
    }

    pub fn count(&self) -> usize {
        self.0.iter().map(|&v| v as usize).sum()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        MaskMatrix(self.0.select(Axis(0), rows))
    }

    /// Entrywise complement.
    pub fn complement(&self) -> Self {
        MaskMatrix(self.0.mapv(|v| 1 - v))
    }

    pub fn write_csv<W: Write>(&self, out: W, header: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if !header.is_empty() {
            w.write_record(header)?;
        }
        for row in self.0.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}
