use crate::error::{Error, Result};

/// Dense row-major feature matrix; `NaN` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::invalid(format!(
                "matrix data has {} values, expected {n_rows}x{n_cols}",
                data.len()
            )));
        }
        if data.iter().any(|v| v.is_infinite()) {
            return Err(Error::invalid("matrix contains an infinite value"));
        }
        Ok(Self {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::new(rows.len(), n_cols, rows.concat())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.n_cols + col] = value;
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            data,
        }
    }
}

/// Feature matrix with named columns and regression targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub targets: Vec<f64>,
    pub schema: Vec<String>,
}

impl Dataset {
    pub fn new(features: Matrix, targets: Vec<f64>, schema: Vec<String>) -> Result<Self> {
        if features.n_rows() != targets.len() {
            return Err(Error::invalid(format!(
                "{} feature rows but {} targets",
                features.n_rows(),
                targets.len()
            )));
        }
        if features.n_cols() != schema.len() {
            return Err(Error::schema(format!(
                "{} feature columns but {} schema names",
                features.n_cols(),
                schema.len()
            )));
        }
        Ok(Self {
            features,
            targets,
            schema,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(rows),
            targets: rows.iter().map(|&r| self.targets[r]).collect(),
            schema: self.schema.clone(),
        }
    }
}
