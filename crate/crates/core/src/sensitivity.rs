//! Signal, noise and global sensitivities: exact closed forms for the SGC,
//! exact Jacobian-based values for the two-layer ReLU GCN, and the
//! binomial-weighted structural upper bounds.
//!
//! For a linear model H = S^l X W the Jacobian is dH_ip/dX_jq =
//! [S^l]_ij W_qp. For the bias-free two-layer GCN H = S ReLU(S X W1) W2
//! with activation masks M evaluated at the chosen point, the Jacobian
//! collapses to dH_ip/dX_jq = [S diag(m_q) S]_ij with the per-node weights
//! m_q[l] = sum_h M_lh W1_qh W2_hp. All sensitivities reduce to products
//! of vectors of the form S diag(m) S v.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bottleneck::{bottleneck_scores, order_metrics};
use crate::error::{Error, Result};
use crate::model::{Arch, TrainedModel};
use crate::shift::ShiftOperator;
use crate::sparse::{CsrMatrix, DENSE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SensitivityMode {
    ExactSgc,
    ExactJacobian,
    IsotropicBound,
    AnisotropicBound,
}

/// Which input-dimension slice the sensitivities cover: the q-summed
/// diagonal form (used by the sensitivity condition) or a single (q, r)
/// pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputDims {
    Diagonal,
    Pair(usize, usize),
}

/// Per-node signal/noise/global sensitivity values or bounds.
#[derive(Debug, Clone)]
pub struct SensitivityTriple {
    pub mode: SensitivityMode,
    /// Propagation order the values refer to (l for exact modes and bounds).
    pub order: usize,
    pub signal: Vec<f64>,
    pub noise: Vec<f64>,
    pub global: Vec<f64>,
}

impl SensitivityTriple {
    pub fn n(&self) -> usize {
        self.signal.len()
    }

    pub fn mean(&self) -> (f64, f64, f64) {
        let n = self.n() as f64;
        (
            self.signal.iter().sum::<f64>() / n,
            self.noise.iter().sum::<f64>() / n,
            self.global.iter().sum::<f64>() / n,
        )
    }
}

/// Full per-(q, r) sensitivities for one output dimension, used by the
/// general-covariance SNR formula. Entry layout is node-major:
/// `values[i * d_in * d_in + q * d_in + r]`.
#[derive(Debug, Clone)]
pub struct SensitivityTensor {
    pub n: usize,
    pub d_in: usize,
    pub signal: Vec<f64>,
    pub noise: Vec<f64>,
    pub global: Vec<f64>,
}

impl SensitivityTensor {
    pub fn get(&self, which: &str, i: usize, q: usize, r: usize) -> f64 {
        let idx = i * self.d_in * self.d_in + q * self.d_in + r;
        match which {
            "signal" => self.signal[idx],
            "noise" => self.noise[idx],
            "global" => self.global[idx],
            _ => panic!("unknown component"),
        }
    }
}

/// Derivative norm bounds of the update and message functions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LipschitzParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl LipschitzParams {
    /// Isotropic model: messages ignore the receiving node (beta1 = 0).
    pub fn isotropic(alpha1: f64, alpha2: f64, beta: f64) -> Result<Self> {
        Self::new(alpha1, alpha2, 0.0, beta)
    }

    pub fn new(alpha1: f64, alpha2: f64, beta1: f64, beta2: f64) -> Result<Self> {
        for (name, v) in [
            ("alpha1", alpha1),
            ("alpha2", alpha2),
            ("beta1", beta1),
            ("beta2", beta2),
        ] {
            if v < 0.0 {
                return Err(Error::NegativeVariance { name, value: v });
            }
        }
        Ok(LipschitzParams {
            alpha1,
            alpha2,
            beta1,
            beta2,
        })
    }

    /// The single message bound used by the bound formulas.
    pub fn beta(&self) -> f64 {
        self.beta1.max(self.beta2)
    }
}

/// Exact SGC sensitivities at depth l: signal = w b_class^{l,l}, noise =
/// w b_self^{l,l}, global = w b_total^{l,l}, where w is the weight-product
/// factor (1 for the weight-invariant condition).
pub fn sgc_sensitivities(
    shift: &ShiftOperator,
    labels: &[usize],
    ell: usize,
    w_factor: f64,
) -> Result<SensitivityTriple> {
    let b = bottleneck_scores(shift, labels, ell, ell)?;
    Ok(SensitivityTriple {
        mode: SensitivityMode::ExactSgc,
        order: ell,
        signal: b.b_class.iter().map(|v| v * w_factor).collect(),
        noise: b.b_self.iter().map(|v| v * w_factor).collect(),
        global: b.b_total.iter().map(|v| v * w_factor).collect(),
    })
}

/// ReLU activation masks of the first GCN layer at the evaluation point.
/// The derivative at exactly zero is taken as 1, so masks at X0 = 0 are
/// all ones and the GCN collapses to its linear skeleton.
fn relu_masks(shift: &ShiftOperator, w1: &DMatrix<f64>, x0: &DMatrix<f64>) -> DMatrix<f64> {
    let z1 = shift.matrix.matmul_dense(x0) * w1;
    z1.map(|v| if v >= 0.0 { 1.0 } else { 0.0 })
}

/// The per-node sandwich weights m_q[l] = sum_h M_lh W1_qh W2_hp for every
/// input dimension q, as columns of an n x d_in matrix.
fn sandwich_weights(
    masks: &DMatrix<f64>,
    w1: &DMatrix<f64>,
    w2: &DMatrix<f64>,
    p: usize,
) -> DMatrix<f64> {
    let n = masks.nrows();
    let d_in = w1.nrows();
    let hidden = w1.ncols();
    let mut m = DMatrix::zeros(n, d_in);
    for q in 0..d_in {
        for h in 0..hidden {
            let coeff = w1[(q, h)] * w2[(h, p)];
            if coeff == 0.0 {
                continue;
            }
            for l in 0..n {
                m[(l, q)] += coeff * masks[(l, h)];
            }
        }
    }
    m
}

struct JacobianFactors<'a> {
    shift: &'a ShiftOperator,
    /// Sandwich weights per input dimension; `None` marks the SGC case
    /// where J[q] = coeff[q] * S^l.
    sandwich: Option<DMatrix<f64>>,
    /// SGC column of W for output p (coeff[q] = W_qp).
    sgc_coeff: Option<Vec<f64>>,
    ell: usize,
}

impl JacobianFactors<'_> {
    /// J[q] v for all q, returned as columns of an n x d_in matrix.
    fn apply_all(&self, v: &[f64]) -> DMatrix<f64> {
        let n = v.len();
        match (&self.sandwich, &self.sgc_coeff) {
            (Some(m), None) => {
                let sv = self.shift.matrix.matvec(v);
                let d_in = m.ncols();
                let mut out = DMatrix::zeros(n, d_in);
                for q in 0..d_in {
                    let weighted: Vec<f64> = (0..n).map(|l| m[(l, q)] * sv[l]).collect();
                    let col = self.shift.matrix.matvec(&weighted);
                    out.column_mut(q).copy_from_slice(&col);
                }
                out
            }
            (None, Some(coeff)) => {
                let sv = self.shift.matrix.pow_matvec(v, self.ell);
                let mut out = DMatrix::zeros(n, coeff.len());
                for (q, &c) in coeff.iter().enumerate() {
                    for i in 0..n {
                        out[(i, q)] = c * sv[i];
                    }
                }
                out
            }
            _ => unreachable!(),
        }
    }

    /// Row i of J[q] for all q, as columns of an n x d_in matrix.
    fn rows_at(&self, i: usize) -> DMatrix<f64> {
        let n = self.shift.n();
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        match (&self.sandwich, &self.sgc_coeff) {
            (Some(m), None) => {
                let st_e = self.shift.matrix.matvec_transpose(&e);
                let d_in = m.ncols();
                let mut out = DMatrix::zeros(n, d_in);
                for q in 0..d_in {
                    let weighted: Vec<f64> = (0..n).map(|l| m[(l, q)] * st_e[l]).collect();
                    let row = self.shift.matrix.matvec_transpose(&weighted);
                    out.column_mut(q).copy_from_slice(&row);
                }
                out
            }
            (None, Some(coeff)) => {
                let row = self.shift.matrix.pow_matvec_transpose(&e, self.ell);
                let mut out = DMatrix::zeros(n, coeff.len());
                for (q, &c) in coeff.iter().enumerate() {
                    for j in 0..n {
                        out[(j, q)] = c * row[j];
                    }
                }
                out
            }
            _ => unreachable!(),
        }
    }

    fn d_in(&self) -> usize {
        match (&self.sandwich, &self.sgc_coeff) {
            (Some(m), None) => m.ncols(),
            (None, Some(c)) => c.len(),
            _ => unreachable!(),
        }
    }
}

fn jacobian_factors<'a>(
    shift: &'a ShiftOperator,
    model: &TrainedModel,
    x0: Option<&DMatrix<f64>>,
    p: usize,
) -> Result<JacobianFactors<'a>> {
    let n = shift.n();
    let d_in = model.best_weights[0].nrows();
    let zero;
    let x0 = match x0 {
        Some(x) => {
            if x.nrows() != n || x.ncols() != d_in {
                return Err(Error::DimensionMismatch {
                    context: "jacobian evaluation point",
                    got: x.nrows(),
                    expected: n,
                });
            }
            x
        }
        None => {
            zero = DMatrix::zeros(n, d_in);
            &zero
        }
    };
    if p >= model.d_out() {
        return Err(Error::DimensionMismatch {
            context: "output dimension",
            got: p,
            expected: model.d_out(),
        });
    }
    match model.spec.arch {
        Arch::Gcn2 => {
            let w1 = &model.best_weights[0];
            let w2 = &model.best_weights[1];
            let masks = relu_masks(shift, w1, x0);
            Ok(JacobianFactors {
                shift,
                sandwich: Some(sandwich_weights(&masks, w1, w2, p)),
                sgc_coeff: None,
                ell: 2,
            })
        }
        Arch::Sgc => {
            let w = &model.best_weights[0];
            let coeff: Vec<f64> = (0..w.nrows()).map(|q| w[(q, p)]).collect();
            Ok(JacobianFactors {
                shift,
                sandwich: None,
                sgc_coeff: Some(coeff),
                ell: model.spec.ell,
            })
        }
    }
}

/// Exact Jacobian-based sensitivities of a trained model (SGC at any depth
/// or the two-layer ReLU GCN) for output dimension `p`, evaluated at `x0`
/// (zero matrix when absent).
pub fn model_jacobian_sensitivities(
    shift: &ShiftOperator,
    model: &TrainedModel,
    labels: &[usize],
    x0: Option<&DMatrix<f64>>,
    p: usize,
    dims: InputDims,
) -> Result<SensitivityTriple> {
    if labels.len() != shift.n() {
        return Err(Error::DimensionMismatch {
            context: "labels",
            got: labels.len(),
            expected: shift.n(),
        });
    }
    let factors = jacobian_factors(shift, model, x0, p)?;
    let n = shift.n();
    let d_in = factors.d_in();
    let k = labels.iter().copied().max().unwrap_or(0) + 1;
    if let InputDims::Pair(q, r) = dims {
        if q >= d_in || r >= d_in {
            return Err(Error::DimensionMismatch {
                context: "input dimension pair",
                got: q.max(r),
                expected: d_in,
            });
        }
    }

    let pairs: Vec<(usize, usize)> = match dims {
        InputDims::Diagonal => (0..d_in).map(|q| (q, q)).collect(),
        InputDims::Pair(q, r) => vec![(q, r)],
    };

    // signal and global from class-indicator images under every J[q]
    let mut signal = vec![0.0; n];
    let mut global = vec![0.0; n];
    let mut class_ind = vec![vec![0.0; n]; k];
    for (i, &y) in labels.iter().enumerate() {
        class_ind[y][i] = 1.0;
    }
    let images: Vec<DMatrix<f64>> = class_ind.iter().map(|ind| factors.apply_all(ind)).collect();
    let ones_image = factors.apply_all(&vec![1.0; n]);
    for &(q, r) in &pairs {
        for img in &images {
            for i in 0..n {
                signal[i] += img[(i, q)] * img[(i, r)];
            }
        }
        for i in 0..n {
            global[i] += ones_image[(i, q)] * ones_image[(i, r)];
        }
    }

    // noise from row dot products, per node
    let noise: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let rows = factors.rows_at(i);
            pairs
                .iter()
                .map(|&(q, r)| rows.column(q).dot(&rows.column(r)))
                .sum()
        })
        .collect();

    Ok(SensitivityTriple {
        mode: SensitivityMode::ExactJacobian,
        order: factors.ell,
        signal,
        noise,
        global,
    })
}

/// Full per-(q, r) sensitivity tensor for output dimension `p`.
pub fn model_sensitivity_tensor(
    shift: &ShiftOperator,
    model: &TrainedModel,
    labels: &[usize],
    x0: Option<&DMatrix<f64>>,
    p: usize,
) -> Result<SensitivityTensor> {
    let factors = jacobian_factors(shift, model, x0, p)?;
    let n = shift.n();
    let d_in = factors.d_in();
    let k = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut class_ind = vec![vec![0.0; n]; k];
    for (i, &y) in labels.iter().enumerate() {
        class_ind[y][i] = 1.0;
    }
    let images: Vec<DMatrix<f64>> = class_ind.iter().map(|ind| factors.apply_all(ind)).collect();
    let ones_image = factors.apply_all(&vec![1.0; n]);

    let d2 = d_in * d_in;
    let mut signal = vec![0.0; n * d2];
    let mut global = vec![0.0; n * d2];
    for i in 0..n {
        for q in 0..d_in {
            for r in 0..d_in {
                let idx = i * d2 + q * d_in + r;
                signal[idx] = images
                    .iter()
                    .map(|img| img[(i, q)] * img[(i, r)])
                    .sum::<f64>();
                global[idx] = ones_image[(i, q)] * ones_image[(i, r)];
            }
        }
    }
    let noise: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let rows = factors.rows_at(i);
            let mut out = Vec::with_capacity(d2);
            for q in 0..d_in {
                for r in 0..d_in {
                    out.push(rows.column(q).dot(&rows.column(r)));
                }
            }
            out
        })
        .collect();

    Ok(SensitivityTensor {
        n,
        d_in,
        signal,
        noise,
        global,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut acc = 1.0;
    for i in 0..k.min(n - k) {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// The modified operator A + diag(A 1) of the anisotropic bound.
fn anisotropic_operator(shift: &ShiftOperator) -> ShiftOperator {
    let row_sums = shift.matrix.row_sums();
    let matrix = shift.matrix.add_diagonal(&row_sums);
    ShiftOperator::from_matrix(matrix, shift.kind)
}

/// Structural upper bounds on the sensitivities at depth l:
/// sum_{s,t} C(l,s) C(l,t) alpha1^{2l-s-t} (alpha2 beta)^{s+t} b^{s,t}.
/// The isotropic form scores the operator itself; the anisotropic form
/// scores A + diag(A 1).
pub fn sensitivity_bounds(
    shift: &ShiftOperator,
    labels: &[usize],
    ell: usize,
    lip: &LipschitzParams,
    isotropic: bool,
) -> Result<SensitivityTriple> {
    let modified;
    let (op, beta, mode) = if isotropic {
        (shift, lip.beta2, SensitivityMode::IsotropicBound)
    } else {
        modified = anisotropic_operator(shift);
        (&modified, lip.beta(), SensitivityMode::AnisotropicBound)
    };
    let n = op.n();
    let mut signal = vec![0.0; n];
    let mut noise = vec![0.0; n];
    let mut global = vec![0.0; n];
    for s in 0..=ell {
        for t in 0..=ell {
            let coeff = binomial(ell, s)
                * binomial(ell, t)
                * lip.alpha1.powi((2 * ell - s - t) as i32)
                * (lip.alpha2 * beta).powi((s + t) as i32);
            if coeff == 0.0 {
                continue;
            }
            let b = bottleneck_scores(op, labels, s, t)?;
            for i in 0..n {
                signal[i] += coeff * b.b_class[i];
                noise[i] += coeff * b.b_self[i];
                global[i] += coeff * b.b_total[i];
            }
        }
    }
    Ok(SensitivityTriple {
        mode,
        order: ell,
        signal,
        noise,
        global,
    })
}

/// Node-averaged bounds collapsed by Vandermonde's identity:
/// sum_{u=0}^{2l} C(2l,u) alpha1^{2l-u} (alpha2 beta)^u {h,c,t}^(u).
/// Returns (signal, noise, global) bounds. Requires a symmetric operator.
pub fn averaged_bounds(
    shift: &ShiftOperator,
    labels: &[usize],
    ell: usize,
    lip: &LipschitzParams,
) -> Result<(f64, f64, f64)> {
    if !shift.symmetric {
        return Err(Error::AsymmetricOperator);
    }
    let beta = lip.beta2;
    let mut acc = (0.0, 0.0, 0.0);
    for u in 0..=(2 * ell) {
        let coeff = binomial(2 * ell, u)
            * lip.alpha1.powi((2 * ell - u) as i32)
            * (lip.alpha2 * beta).powi(u as i32);
        if coeff == 0.0 {
            continue;
        }
        let m = order_metrics(shift, labels, u)?;
        acc.0 += coeff * m.h;
        acc.1 += coeff * m.t;
        acc.2 += coeff * m.c;
    }
    Ok(acc)
}

/// Dense entrywise bound K^l on the MPNN Jacobian, with
/// K = alpha2 beta2 A + alpha2 beta1 diag(A 1) + alpha1 I.
pub fn jacobian_norm_bound(
    shift: &ShiftOperator,
    ell: usize,
    lip: &LipschitzParams,
) -> Result<DMatrix<f64>> {
    let n = shift.n();
    if n > DENSE_LIMIT {
        return Err(Error::DenseSizeLimit { n, limit: DENSE_LIMIT });
    }
    let k = bound_kernel(shift, lip);
    let dense = k.to_dense();
    let mut out = DMatrix::identity(n, n);
    for _ in 0..ell {
        out = &out * &dense;
    }
    Ok(out)
}

/// Row i of K^l, for instances above the dense threshold.
pub fn jacobian_norm_bound_row(
    shift: &ShiftOperator,
    ell: usize,
    lip: &LipschitzParams,
    i: usize,
) -> Result<Vec<f64>> {
    let n = shift.n();
    if i >= n {
        return Err(Error::NodeOutOfRange { id: i, n });
    }
    let k = bound_kernel(shift, lip);
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    Ok(k.pow_matvec_transpose(&e, ell))
}

fn bound_kernel(shift: &ShiftOperator, lip: &LipschitzParams) -> CsrMatrix {
    let n = shift.n();
    let row_sums = shift.matrix.row_sums();
    let mut triplets: Vec<(usize, usize, f64)> = shift
        .matrix
        .iter_entries()
        .map(|(r, c, v)| (r, c, lip.alpha2 * lip.beta2 * v))
        .collect();
    for i in 0..n {
        triplets.push((i, i, lip.alpha2 * lip.beta1 * row_sums[i] + lip.alpha1));
    }
    CsrMatrix::from_triplets(n, n, &triplets)
}
