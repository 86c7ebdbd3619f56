use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::expr::{BoundExpr, Expr};
use crate::error::{Error, Result};

/// Grid evidence of boundedness and smoothness of a coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularity {
    pub sup_abs: f64,
    /// Largest first divided difference along either axis.
    pub lipschitz_est: f64,
    /// Largest second divided difference (both pure axes and the mixed one).
    pub d2_est: f64,
    /// Smallest value seen on the grid.
    pub min_value: f64,
}

pub const MIN_GRID: usize = 8;

pub fn regularity_probe(
    expr: &Expr,
    t_range: (f64, f64),
    x_range: (f64, f64),
    grid_n: usize,
    params: &BTreeMap<String, f64>,
) -> Result<Regularity> {
    let bound = expr
        .bind(params)
        .map_err(|source| Error::Eval { t: f64::NAN, x: f64::NAN, source })?;
    probe_bound(&bound, t_range, x_range, grid_n)
}

fn axis(range: (f64, f64), n: usize) -> Result<(Vec<f64>, f64)> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::Config(format!("probe range [{lo}, {hi}] must be bounded")));
    }
    let h = (hi - lo) / (n - 1) as f64;
    let pts = (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + h * i as f64 })
        .collect();
    Ok((pts, h))
}

pub fn probe_bound(
    expr: &BoundExpr,
    t_range: (f64, f64),
    x_range: (f64, f64),
    grid_n: usize,
) -> Result<Regularity> {
    if grid_n < MIN_GRID {
        return Err(Error::Config(format!("grid_n = {grid_n}, need at least {MIN_GRID}")));
    }
    let (ts, ht) = axis(t_range, grid_n)?;
    let (xs, hx) = axis(x_range, grid_n)?;

    // values[i * n + j] = f(ts[i], xs[j])
    let n = grid_n;
    let mut values = Vec::with_capacity(n * n);
    for &t in &ts {
        for &x in &xs {
            let v = expr.eval(t, x).map_err(|source| Error::Eval { t, x, source })?;
            values.push(v);
        }
    }
    let f = |i: usize, j: usize| values[i * n + j];

    let mut out = Regularity {
        sup_abs: 0.0,
        lipschitz_est: 0.0,
        d2_est: 0.0,
        min_value: f64::INFINITY,
    };
    for &v in &values {
        out.sup_abs = out.sup_abs.max(v.abs());
        out.min_value = out.min_value.min(v);
    }
    for i in 0..n {
        for j in 0..n {
            if hx > 0.0 && j + 1 < n {
                out.lipschitz_est = out.lipschitz_est.max((f(i, j + 1) - f(i, j)).abs() / hx);
            }
            if ht > 0.0 && i + 1 < n {
                out.lipschitz_est = out.lipschitz_est.max((f(i + 1, j) - f(i, j)).abs() / ht);
            }
            if hx > 0.0 && j >= 1 && j + 1 < n {
                let d2 = (f(i, j + 1) - 2.0 * f(i, j) + f(i, j - 1)).abs() / (hx * hx);
                out.d2_est = out.d2_est.max(d2);
            }
            if ht > 0.0 && i >= 1 && i + 1 < n {
                let d2 = (f(i + 1, j) - 2.0 * f(i, j) + f(i - 1, j)).abs() / (ht * ht);
                out.d2_est = out.d2_est.max(d2);
            }
            if hx > 0.0 && ht > 0.0 && i + 1 < n && j + 1 < n {
                let mixed = (f(i + 1, j + 1) - f(i + 1, j) - f(i, j + 1) + f(i, j)).abs() / (hx * ht);
                out.d2_est = out.d2_est.max(mixed);
            }
        }
    }
    Ok(out)
}
