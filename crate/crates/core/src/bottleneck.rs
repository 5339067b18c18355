//! Class-, self- and total-bottlenecking scores, and their graph-level
//! averages: higher-order homophily, self-connectivity and total
//! connectivity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shift::ShiftOperator;

/// Per-node bottlenecking scores for path-length orders (r, s).
///
/// `b_class[i]` counts pairs of same-class sources reaching node i via
/// paths of lengths r and s, weighted by the shift operator; `b_total`
/// drops the class constraint and `b_self` restricts to equal sources.
#[derive(Debug, Clone)]
pub struct BottleneckScores {
    pub r: usize,
    pub s: usize,
    pub b_class: Vec<f64>,
    pub b_self: Vec<f64>,
    pub b_total: Vec<f64>,
}

/// Graph-level connectivity measures at a single order.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OrderMetrics {
    pub order: usize,
    /// Higher-order homophily h^(l): weighted homophily of S^l.
    pub h: f64,
    /// Self-connectivity t^(l): mean diagonal entry of S^l.
    pub t: f64,
    /// Total connectivity c^(l): mean of all entries of S^l.
    pub c: f64,
}

fn check_labels(shift: &ShiftOperator, labels: &[usize]) -> Result<usize> {
    if labels.len() != shift.n() {
        return Err(Error::DimensionMismatch {
            context: "labels",
            got: labels.len(),
            expected: shift.n(),
        });
    }
    Ok(labels.iter().copied().max().unwrap_or(0) + 1)
}

fn class_indicators(labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let mut ind = vec![vec![0.0; labels.len()]; k];
    for (i, &y) in labels.iter().enumerate() {
        ind[y][i] = 1.0;
    }
    ind
}

/// Exact bottlenecking scores via per-class aggregation. Class and total
/// scores cost O(k (r+s) nnz); the self score applies the operator to the
/// basis vector of every node and parallelizes over nodes.
pub fn bottleneck_scores(
    shift: &ShiftOperator,
    labels: &[usize],
    r: usize,
    s: usize,
) -> Result<BottleneckScores> {
    let k = check_labels(shift, labels)?;
    let n = shift.n();
    let m = &shift.matrix;

    let mut b_class = vec![0.0; n];
    for ind in class_indicators(labels, k) {
        let v = m.pow_matvec(&ind, r);
        let w = if r == s { v.clone() } else { m.pow_matvec(&ind, s) };
        for i in 0..n {
            b_class[i] += v[i] * w[i];
        }
    }

    let ones = vec![1.0; n];
    let v1 = m.pow_matvec(&ones, r);
    let w1 = if r == s { v1.clone() } else { m.pow_matvec(&ones, s) };
    let b_total: Vec<f64> = (0..n).map(|i| v1[i] * w1[i]).collect();

    // b_self[i] = <row_i(S^r), row_i(S^s)>, rows obtained as (S^T)^p e_i.
    let b_self: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let row_r = m.pow_matvec_transpose(&e, r);
            if r == s {
                row_r.iter().map(|v| v * v).sum()
            } else {
                let row_s = m.pow_matvec_transpose(&e, s);
                row_r.iter().zip(&row_s).map(|(a, b)| a * b).sum()
            }
        })
        .collect();

    Ok(BottleneckScores {
        r,
        s,
        b_class,
        b_self,
        b_total,
    })
}

/// Order-l metrics of S^l. For asymmetric operators this treats S^l
/// literally; use [`order_metrics_general`] for the (S^r)^T S^s form.
pub fn order_metrics(shift: &ShiftOperator, labels: &[usize], ell: usize) -> Result<OrderMetrics> {
    let k = check_labels(shift, labels)?;
    let n = shift.n();
    let m = &shift.matrix;

    let mut h = 0.0;
    for ind in class_indicators(labels, k) {
        let v = m.pow_matvec(&ind, ell);
        h += ind.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
    }
    h /= n as f64;

    let ones = vec![1.0; n];
    let c = m.pow_matvec(&ones, ell).iter().sum::<f64>() / n as f64;

    let t = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            m.pow_matvec(&e, ell)[i]
        })
        .sum::<f64>()
        / n as f64;

    Ok(OrderMetrics { order: ell, h, t, c })
}

/// Metrics of (S^r)^T S^s, the general form for directed or asymmetric
/// operators. Coincides with [`order_metrics`] at order r + s when S is
/// symmetric.
pub fn order_metrics_general(
    shift: &ShiftOperator,
    labels: &[usize],
    r: usize,
    s: usize,
) -> Result<OrderMetrics> {
    let k = check_labels(shift, labels)?;
    let n = shift.n();
    let m = &shift.matrix;

    let mut h = 0.0;
    for ind in class_indicators(labels, k) {
        let v = m.pow_matvec(&ind, r);
        let w = if r == s { v.clone() } else { m.pow_matvec(&ind, s) };
        h += v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
    }
    h /= n as f64;

    let ones = vec![1.0; n];
    let v1 = m.pow_matvec(&ones, r);
    let w1 = if r == s { v1.clone() } else { m.pow_matvec(&ones, s) };
    let c = v1.iter().zip(&w1).map(|(a, b)| a * b).sum::<f64>() / n as f64;

    // [(S^r)^T S^s]_{ii} = <S^r e_i, S^s e_i>
    let t = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let u = m.pow_matvec(&e, r);
            if r == s {
                u.iter().map(|v| v * v).sum::<f64>()
            } else {
                let w = m.pow_matvec(&e, s);
                u.iter().zip(&w).map(|(a, b)| a * b).sum()
            }
        })
        .sum::<f64>()
        / n as f64;

    Ok(OrderMetrics {
        order: r + s,
        h,
        t,
        c,
    })
}
