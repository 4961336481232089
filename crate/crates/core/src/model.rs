//! Regression data model shared by every estimator.
//!
//! All solvers work on a centered response and a design whose columns are
//! centered and scaled so that `(1/n) X_jᵀX_j = 1`. The loss is the
//! un-normalized residual sum of squares `½‖y − Xβ‖²`, so penalty levels
//! scale like `√(n log p)`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Design matrix and response. Dense, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if x.nrows() < 2 || x.ncols() < 1 {
            return Err(Error::InvalidInput(format!(
                "need n >= 2 and p >= 1, got n = {}, p = {}",
                x.nrows(),
                x.ncols()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Rows `rows` of the data, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        Self::new(self.x.select_rows(rows), self.y.select_rows(rows))
    }

    /// Columns `cols` of the design with the full response.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        Self::new(self.x.select_columns(cols), self.y.clone())
    }

    /// `max_j |X_jᵀy|`, the smallest ℓ1 level at which the Lasso is all-zero.
    pub fn lambda_max(&self) -> f64 {
        (self.x.transpose() * &self.y).amax()
    }

    /// Squared column norms `‖X_j‖²`.
    pub fn column_sq_norms(&self) -> Vec<f64> {
        self.x.column_iter().map(|c| c.norm_squared()).collect()
    }

    pub fn predict(&self, beta: &CoefficientVector) -> Result<DVector<f64>> {
        check_len(self.p(), beta.len())?;
        Ok(&self.x * beta.values())
    }
}

/// Coefficient vector β. The support is always recomputed from the values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientVector {
    values: DVector<f64>,
}

impl CoefficientVector {
    pub fn new(values: DVector<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(p: usize) -> Self {
        Self::new(DVector::zeros(p))
    }

    pub fn from_slice(values: &[f64]) -> Self {
        Self::new(DVector::from_column_slice(values))
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DVector<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Indices of exactly nonzero entries.
    pub fn support(&self) -> SupportSet {
        extract_support(self, 0.0)
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    pub fn signs(&self) -> Vec<i8> {
        self.values.iter().map(|v| sign(*v)).collect()
    }
}

pub(crate) fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Ordered index set S with cardinality q.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct SupportSet {
    indices: Vec<usize>,
}

impl SupportSet {
    /// Sorts and deduplicates `indices`.
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn q(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    pub fn is_subset_of(&self, other: &SupportSet) -> bool {
        self.indices.iter().all(|j| other.contains(*j))
    }

    /// Fails when `q > n`; the model assumes the true support never exceeds
    /// the sample count.
    pub fn check_fits(&self, n: usize) -> Result<()> {
        if self.q() > n {
            return Err(Error::InvalidInput(format!(
                "support of size {} exceeds n = {n}",
                self.q()
            )));
        }
        Ok(())
    }
}

/// Means and scales removed by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StandardizationRecord {
    pub y_mean: f64,
    pub column_means: Vec<f64>,
    pub column_scales: Vec<f64>,
}

impl StandardizationRecord {
    /// Maps standardized-scale coefficients back to the raw scale.
    /// Returns `(intercept, slopes)`.
    pub fn destandardize(&self, beta: &CoefficientVector) -> (f64, CoefficientVector) {
        let slopes: DVector<f64> = DVector::from_iterator(
            beta.len(),
            beta.values()
                .iter()
                .zip(&self.column_scales)
                .map(|(b, s)| b / s),
        );
        let intercept = self.y_mean
            - slopes
                .iter()
                .zip(&self.column_means)
                .map(|(b, m)| b * m)
                .sum::<f64>();
        (intercept, CoefficientVector::new(slopes))
    }

    /// Inverse of [`Self::destandardize`] for the slopes.
    pub fn restandardize(&self, raw: &CoefficientVector) -> CoefficientVector {
        CoefficientVector::new(DVector::from_iterator(
            raw.len(),
            raw.values()
                .iter()
                .zip(&self.column_scales)
                .map(|(b, s)| b * s),
        ))
    }

    /// Applies the stored transform to new raw rows.
    pub fn transform(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let mut xs = x.clone();
        for (j, mut col) in xs.column_iter_mut().enumerate() {
            let (m, s) = (self.column_means[j], self.column_scales[j]);
            col.apply(|v| *v = (*v - m) / s);
        }
        (xs, y.map(|v| v - self.y_mean))
    }
}

/// Centers `y` and every column of `X`, then scales each column so that
/// `(1/n)‖X_j‖² = 1`.
pub fn standardize(raw: &Dataset) -> Result<(Dataset, StandardizationRecord)> {
    let n = raw.n() as f64;
    let y_mean = raw.y.mean();
    let y = raw.y.map(|v| v - y_mean);
    let mut x = raw.x.clone();
    let mut column_means = Vec::with_capacity(raw.p());
    let mut column_scales = Vec::with_capacity(raw.p());
    for (j, mut col) in x.column_iter_mut().enumerate() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let scale = (col.norm_squared() / n).sqrt();
        // Relative test so columns of large constant prices are still caught.
        if !(scale > 1e-12 * mean.abs().max(1.0)) {
            return Err(Error::ConstantColumn(j));
        }
        col.unscale_mut(scale);
        column_means.push(mean);
        column_scales.push(scale);
    }
    Ok((
        Dataset { x, y },
        StandardizationRecord {
            y_mean,
            column_means,
            column_scales,
        },
    ))
}

/// `y − Xβ` as a dense vector.
pub fn residual(d: &Dataset, beta: &CoefficientVector) -> Result<DVector<f64>> {
    check_len(d.p(), beta.len())?;
    Ok(&d.y - &d.x * beta.values())
}

/// `{j : |β_j| > tol}`.
pub fn extract_support(beta: &CoefficientVector, tol: f64) -> SupportSet {
    SupportSet {
        indices: beta
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > tol)
            .map(|(j, _)| j)
            .collect(),
    }
}

/// `v` rounded to `digits` significant digits; non-finite values pass
/// through.
pub fn round_sig(v: f64, digits: usize) -> f64 {
    if !v.is_finite() || v == 0.0 || digits == 0 {
        return v;
    }
    format!("{:.*e}", digits - 1, v).parse().unwrap_or(v)
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Reads a dataset CSV: a header row, the response in the first column and
/// predictors in the rest. Returns the data and the predictor names.
pub fn load_dataset_csv(path: impl AsRef<Path>) -> Result<(Dataset, Vec<String>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "need a response column and at least one predictor".into(),
        });
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
    let p = names.len();
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != p + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", p + 1, rec.len()),
            });
        }
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("not a number: {field:?}"),
            })?;
            if k == 0 {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    let n = ys.len();
    let x = DMatrix::from_row_slice(n, p, &xs);
    Ok((Dataset::new(x, DVector::from_vec(ys))?, names))
}
