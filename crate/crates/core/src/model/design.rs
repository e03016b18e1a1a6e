//! Small design matrices used by examples and tests.

use nalgebra::DMatrix;

/// Column of ones.
pub fn intercept(n: usize) -> DMatrix<f64> {
    DMatrix::from_element(n, 1, 1.0)
}

/// Balanced one-way indicator matrix: `groups` columns, `per_group`
/// consecutive rows in each.
pub fn one_way(groups: usize, per_group: usize) -> DMatrix<f64> {
    DMatrix::from_fn(groups * per_group, groups, |i, j| if i / per_group == j { 1.0 } else { 0.0 })
}

pub fn identity(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

/// Stacks `k` copies of the rows of `m`.
pub fn replicate_rows(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n * k, m.ncols(), |i, j| m[(i % n, j)])
}
