// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};

fn check_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<usize> {
    let first = rows
        .first()
        .ok_or_else(|| Error::InvalidArgument("pooling over zero rows".into()))?;
    let width = first.as_ref().len();
    for r in rows {
        if r.as_ref().len() != width {
            return Err(Error::DimMismatch {
                expected: width,
                got: r.as_ref().len(),
            });
        }
    }
    Ok(width)
}

/// Elementwise mean of the rows.
pub fn avg_pool_1d<R: AsRef<[f64]>>(rows: &[R]) -> Result<Vec<f64>> {
    let width = check_rows(rows)?;
    let mut out = vec![0.0; width];
    for r in rows {
        for (o, x) in out.iter_mut().zip(r.as_ref()) {
            *o += x;
        }
    }
    let n = rows.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    Ok(out)
}

/// Elementwise max of the rows with the winning row per column (first on ties).
pub fn max_pool_1d<R: AsRef<[f64]>>(rows: &[R]) -> Result<(Vec<f64>, Vec<usize>)> {
    let width = check_rows(rows)?;
    let mut out = rows[0].as_ref().to_vec();
    let mut arg = vec![0usize; width];
    for (ri, r) in rows.iter().enumerate().skip(1) {
        for (j, &x) in r.as_ref().iter().enumerate() {
            if x > out[j] {
                out[j] = x;
                arg[j] = ri;
            }
        }
    }
    Ok((out, arg))
}

/// Gradient of [`avg_pool_1d`] for each of `n` rows.
pub fn avg_pool_backward(grad: &[f64], n: usize) -> Vec<Vec<f64>> {
    let share: Vec<f64> = grad.iter().map(|g| g / n as f64).collect();
    vec![share; n]
}

/// Routes each column's gradient to its argmax row.
pub fn max_pool_backward(grad: &[f64], argmax: &[usize], n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; grad.len()]; n];
    for (j, (&g, &r)) in grad.iter().zip(argmax).enumerate() {
        out[r][j] += g;
    }
    out
}
