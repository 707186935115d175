use crate::error::{Error, Result};

/// Observations of a `d`-dimensional random vector, stored row-major
/// (one row per observation).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl SampleMatrix {
    /// Builds a matrix from row-major data. Rejects empty shapes and
    /// non-finite entries.
    pub fn from_row_major(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::EmptySample);
        }
        if data.len() != n * d {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {n}x{d} matrix, got {}",
                n * d,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self { data, n, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or(Error::EmptySample)?;
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} columns, expected {d}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(rows.len(), d, data)
    }

    /// Single-column matrix.
    pub fn from_column(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::from_row_major(n, 1, values)
    }

    // Generators build matrices whose entries are finite by construction.
    pub(crate) fn from_generated(n: usize, d: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * d);
        Self { data, n, d }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// True when every entry is strictly positive, as for model-generated
    /// heavy-tailed losses. Ingested return data may fail this.
    pub fn is_positive(&self) -> bool {
        self.data.iter().all(|&v| v > 0.0)
    }

    /// Portfolio values `θᵀX_i` for every row.
    pub fn project(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        Ok(self.rows().map(|r| dot(r, theta)).collect())
    }

    /// New matrix holding the selected rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self::from_generated(idx.len(), self.d, data)
    }

    /// Every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self::from_generated(self.n, self.d, self.data.iter().map(|v| v * c).collect())
    }

    pub(crate) fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.d {
            return Err(Error::InvalidInput(format!(
                "theta has {} components, samples have {} columns",
                theta.len(),
                self.d
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("theta has non-finite components".into()));
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
