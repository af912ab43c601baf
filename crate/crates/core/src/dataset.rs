//! Design matrix and response storage.

use crate::error::{Error, Result};
use crate::model::ModelIndex;

/// Distribution of the response.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ResponseFamily {
    Gaussian,
    Binomial,
}

impl std::fmt::Display for ResponseFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ResponseFamily::Gaussian => write!(f, "gaussian"),
            ResponseFamily::Binomial => write!(f, "binomial"),
        }
    }
}

/// A regression dataset with column-centered covariates.
///
/// Covariate columns are mean-centered on construction. For the gaussian
/// family the response is centered as well; a binomial response must be
/// 0/1 coded and is left untouched.
#[derive(Clone, Debug)]
pub struct Dataset {
    columns: Vec<Vec<f64>>,
    y: Vec<f64>,
    names: Vec<String>,
    family: ResponseFamily,
    centered: bool,
    n: usize,
    p: usize,
}

impl Dataset {
    /// Builds (and centers) a dataset from covariate columns and a response.
    ///
    /// `names` defaults to `x1..xp` when `None`.
    pub fn new(
        columns: Vec<Vec<f64>>,
        y: Vec<f64>,
        names: Option<Vec<String>>,
        family: ResponseFamily,
    ) -> Result<Self> {
        let p = columns.len();
        let n = y.len();
        if p < 1 {
            return Err(Error::Config("need at least one covariate (p >= 1)".into()));
        }
        if n < 2 {
            return Err(Error::Config(format!("need at least two observations, got n = {n}")));
        }
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::Config(format!(
                    "column {} has {} rows, response has {n}",
                    j + 1,
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("column {} contains a non-finite value", j + 1)));
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("response contains a non-finite value".into()));
        }
        if family == ResponseFamily::Binomial && y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Config(
                "binomial response must be coded 0/1".into(),
            ));
        }
        let names = match names {
            Some(names) => {
                if names.len() != p {
                    return Err(Error::Config(format!(
                        "got {} names for {p} columns",
                        names.len()
                    )));
                }
                names
            }
            None => (1..=p).map(|j| format!("x{j}")).collect(),
        };

        let mut columns = columns;
        for col in &mut columns {
            center(col);
        }
        let mut y = y;
        if family == ResponseFamily::Gaussian {
            center(&mut y);
        }

        Ok(Dataset {
            columns,
            y,
            names,
            family,
            centered: true,
            n,
            p,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn family(&self) -> ResponseFamily {
        self.family
    }

    pub fn centered(&self) -> bool {
        self.centered
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Column of variable `j` (1-based).
    pub fn column(&self, j: u32) -> &[f64] {
        &self.columns[(j - 1) as usize]
    }

    /// Dot product of columns `j` and `k` (1-based).
    pub fn column_dot(&self, j: u32, k: u32) -> f64 {
        dot(self.column(j), self.column(k))
    }

    /// Dot product of column `j` with the response.
    pub fn column_dot_y(&self, j: u32) -> f64 {
        dot(self.column(j), &self.y)
    }

    /// Sum of squares of the (centered, for gaussian) response.
    pub fn y_sum_squares(&self) -> f64 {
        dot(&self.y, &self.y)
    }

    /// Gram matrix `X_S^T X_S` of the selected columns, row-major.
    pub fn gram(&self, model: &ModelIndex) -> Vec<f64> {
        let m = model.size();
        let idx = model.members();
        let mut g = vec![0.0; m * m];
        for a in 0..m {
            for b in a..m {
                let v = self.column_dot(idx[a], idx[b]);
                g[a * m + b] = v;
                g[b * m + a] = v;
            }
        }
        g
    }

    /// `X_S^T y` for the selected columns.
    pub fn xty(&self, model: &ModelIndex) -> Vec<f64> {
        model.members().iter().map(|&j| self.column_dot_y(j)).collect()
    }
}

fn center(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
