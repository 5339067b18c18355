//! Minimal trainable node classifiers: SGC (linear, arbitrary propagation
//! depth, covering the graph-free logistic baseline at depth 0) and a
//! two-layer ReLU GCN. Trained by full-batch gradient descent with L2
//! weight decay and optional momentum. Models carry no bias terms, so the
//! Jacobian at X = 0 is exactly the linear skeleton.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::rng_from_seed;
use crate::shift::ShiftOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arch {
    /// H = S^l X W
    Sgc,
    /// H = S ReLU(S X W1) W2
    Gcn2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Arch,
    pub hidden: usize,
    /// Propagation depth. For `Gcn2` this must be 2 (one application of S
    /// per layer); for `Sgc` any depth including 0 (graph-free logistic).
    pub ell: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub dropout: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl ModelSpec {
    pub fn sgc(ell: usize, lr: f64, weight_decay: f64, epochs: usize, seed: u64) -> Self {
        ModelSpec {
            arch: Arch::Sgc,
            hidden: 0,
            ell,
            lr,
            weight_decay,
            epochs,
            dropout: 0.0,
            momentum: 0.0,
            seed,
        }
    }

    pub fn gcn2(hidden: usize, lr: f64, weight_decay: f64, epochs: usize, seed: u64) -> Self {
        ModelSpec {
            arch: Arch::Gcn2,
            hidden,
            ell: 2,
            lr,
            weight_decay,
            epochs,
            dropout: 0.0,
            momentum: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0 {
            return Err(Error::InvalidModelSpec {
                reason: format!("lr must be positive, got {}", self.lr),
            });
        }
        if self.epochs == 0 {
            return Err(Error::InvalidModelSpec {
                reason: "epochs must be >= 1".into(),
            });
        }
        if self.arch == Arch::Gcn2 {
            if self.hidden == 0 {
                return Err(Error::InvalidModelSpec {
                    reason: "gcn2 requires hidden >= 1".into(),
                });
            }
            if self.ell != 2 {
                return Err(Error::InvalidModelSpec {
                    reason: "gcn2 propagation depth is fixed at 2".into(),
                });
            }
            if !(0.0..1.0).contains(&self.dropout) {
                return Err(Error::InvalidModelSpec {
                    reason: format!("dropout must be in [0, 1), got {}", self.dropout),
                });
            }
        }
        Ok(())
    }
}

/// Disjoint train/val/test node index sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for (name, set) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &i in set {
                if i >= n {
                    return Err(Error::InvalidSplit {
                        reason: format!("{name} index {i} out of range for {n} nodes"),
                    });
                }
                if seen[i] {
                    return Err(Error::InvalidSplit {
                        reason: format!("index {i} appears in more than one set"),
                    });
                }
                seen[i] = true;
            }
        }
        if self.train.is_empty() {
            return Err(Error::InvalidSplit {
                reason: "train set is empty".into(),
            });
        }
        Ok(())
    }

    /// Random split by fractions (train, val); the remainder is test.
    pub fn random(n: usize, train_frac: f64, val_frac: f64, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut idx: Vec<usize> = (0..n).collect();
        // Fisher-Yates
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
        let n_train = ((n as f64) * train_frac).round() as usize;
        let n_val = ((n as f64) * val_frac).round() as usize;
        Split {
            train: idx[..n_train].to_vec(),
            val: idx[n_train..(n_train + n_val).min(n)].to_vec(),
            test: idx[(n_train + n_val).min(n)..].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub shift_kind: crate::shift::ShiftKind,
    /// Final weights, one matrix per layer.
    pub weights: Vec<DMatrix<f64>>,
    /// Weights at the best validation epoch.
    pub best_weights: Vec<DMatrix<f64>>,
    pub best_val_accuracy: f64,
    pub history: Vec<EpochRecord>,
}

impl TrainedModel {
    pub fn d_out(&self) -> usize {
        self.weights.last().map(|w| w.ncols()).unwrap_or(0)
    }

    /// Pre-softmax representation H for the final weights.
    pub fn logits(&self, shift: &ShiftOperator, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        forward(&self.spec, &self.weights, shift, x, None).map(|f| f.logits)
    }

    /// Pre-softmax representation H for the best-validation weights.
    pub fn logits_best(&self, shift: &ShiftOperator, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        forward(&self.spec, &self.best_weights, shift, x, None).map(|f| f.logits)
    }
}

pub(crate) struct ForwardPass {
    pub logits: DMatrix<f64>,
    /// Pre-activation of the hidden layer (gcn2 only).
    pub z1: Option<DMatrix<f64>>,
    /// Post-activation, after dropout when enabled (gcn2 only).
    pub h1: Option<DMatrix<f64>>,
    /// S^l X (sgc) or S X (gcn2), reused by the backward pass.
    pub propagated: DMatrix<f64>,
}

fn xavier_init(rows: usize, cols: usize, rng: &mut crate::rng::Rng) -> DMatrix<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
}

pub(crate) fn forward(
    spec: &ModelSpec,
    weights: &[DMatrix<f64>],
    shift: &ShiftOperator,
    x: &DMatrix<f64>,
    dropout_mask: Option<&DMatrix<f64>>,
) -> Result<ForwardPass> {
    if x.nrows() != shift.n() {
        return Err(Error::DimensionMismatch {
            context: "forward features",
            got: x.nrows(),
            expected: shift.n(),
        });
    }
    match spec.arch {
        Arch::Sgc => {
            let w = &weights[0];
            if w.nrows() != x.ncols() {
                return Err(Error::DimensionMismatch {
                    context: "sgc weight rows",
                    got: w.nrows(),
                    expected: x.ncols(),
                });
            }
            let mut propagated = x.clone();
            for _ in 0..spec.ell {
                propagated = shift.matrix.matmul_dense(&propagated);
            }
            Ok(ForwardPass {
                logits: &propagated * w,
                z1: None,
                h1: None,
                propagated,
            })
        }
        Arch::Gcn2 => {
            let (w1, w2) = (&weights[0], &weights[1]);
            if w1.nrows() != x.ncols() {
                return Err(Error::DimensionMismatch {
                    context: "gcn2 first-layer weight rows",
                    got: w1.nrows(),
                    expected: x.ncols(),
                });
            }
            let propagated = shift.matrix.matmul_dense(x);
            let z1 = &propagated * w1;
            let mut h1 = z1.map(|v| v.max(0.0));
            if let Some(mask) = dropout_mask {
                h1.component_mul_assign(mask);
            }
            let logits = shift.matrix.matmul_dense(&h1) * w2;
            Ok(ForwardPass {
                logits,
                z1: Some(z1),
                h1: Some(h1),
                propagated,
            })
        }
    }
}

/// Row-wise softmax.
pub fn softmax(logits: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = logits.clone();
    for mut row in out.row_iter_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

fn cross_entropy(probs: &DMatrix<f64>, labels: &[usize], idx: &[usize]) -> f64 {
    let mut loss = 0.0;
    for &i in idx {
        loss -= probs[(i, labels[i])].max(1e-300).ln();
    }
    loss / idx.len() as f64
}

fn l2_norm_sq(weights: &[DMatrix<f64>]) -> f64 {
    weights.iter().map(|w| w.norm_squared()).sum()
}

/// Trains a classifier by full-batch gradient descent on softmax
/// cross-entropy over the train split, with L2 decay. Deterministic under
/// the spec seed. Weights from the best validation epoch are kept
/// alongside the final weights.
pub fn train(
    g: &Graph,
    x: &DMatrix<f64>,
    shift: &ShiftOperator,
    spec: &ModelSpec,
    split: &Split,
) -> Result<TrainedModel> {
    spec.validate()?;
    split.validate(g.n())?;
    if x.nrows() != g.n() {
        return Err(Error::FeatureRowMismatch {
            got: x.nrows(),
            expected: g.n(),
        });
    }
    let d_in = x.ncols();
    let k = g.k();
    let mut rng = rng_from_seed(spec.seed);

    let mut weights: Vec<DMatrix<f64>> = match spec.arch {
        Arch::Sgc => vec![xavier_init(d_in, k, &mut rng)],
        Arch::Gcn2 => vec![
            xavier_init(d_in, spec.hidden, &mut rng),
            xavier_init(spec.hidden, k, &mut rng),
        ],
    };
    let mut velocity: Vec<DMatrix<f64>> = weights
        .iter()
        .map(|w| DMatrix::zeros(w.nrows(), w.ncols()))
        .collect();

    let labels = g.labels();
    let n = g.n();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_weights = weights.clone();
    let mut history = Vec::with_capacity(spec.epochs);

    for epoch in 0..spec.epochs {
        let dropout_mask = if spec.arch == Arch::Gcn2 && spec.dropout > 0.0 {
            let keep = 1.0 - spec.dropout;
            Some(DMatrix::from_fn(n, spec.hidden, |_, _| {
                if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            }))
        } else {
            None
        };

        let fwd = forward(spec, &weights, shift, x, dropout_mask.as_ref())?;
        let probs = softmax(&fwd.logits);
        let loss = cross_entropy(&probs, labels, &split.train)
            + 0.5 * spec.weight_decay * l2_norm_sq(&weights);
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, lr: spec.lr });
        }

        // dL/dlogits, nonzero on train rows only
        let mut dlogits = DMatrix::zeros(n, k);
        let scale = 1.0 / split.train.len() as f64;
        for &i in &split.train {
            for c in 0..k {
                let target = if labels[i] == c { 1.0 } else { 0.0 };
                dlogits[(i, c)] = (probs[(i, c)] - target) * scale;
            }
        }

        let grads: Vec<DMatrix<f64>> = match spec.arch {
            Arch::Sgc => {
                let mut gw = fwd.propagated.transpose() * &dlogits;
                gw += spec.weight_decay * &weights[0];
                vec![gw]
            }
            Arch::Gcn2 => {
                let h1 = fwd.h1.as_ref().unwrap();
                let z1 = fwd.z1.as_ref().unwrap();
                // logits = S h1 W2
                let s_t_dlogits = shift.matrix.matmul_dense_transpose(&dlogits);
                let mut gw2 = h1.transpose() * &s_t_dlogits;
                gw2 += spec.weight_decay * &weights[1];
                let mut dh1 = &s_t_dlogits * weights[1].transpose();
                if let Some(mask) = dropout_mask.as_ref() {
                    dh1.component_mul_assign(mask);
                }
                let dz1 = DMatrix::from_fn(n, spec.hidden, |i, j| {
                    if z1[(i, j)] > 0.0 {
                        dh1[(i, j)]
                    } else {
                        0.0
                    }
                });
                let mut gw1 = fwd.propagated.transpose() * &dz1;
                gw1 += spec.weight_decay * &weights[0];
                vec![gw1, gw2]
            }
        };

        for ((w, v), grad) in weights.iter_mut().zip(&mut velocity).zip(&grads) {
            *v = spec.momentum * &*v - spec.lr * grad;
            *w += &*v;
        }
        if weights.iter().any(|w| w.iter().any(|v| !v.is_finite())) {
            return Err(Error::Divergence { epoch, lr: spec.lr });
        }

        let val_accuracy = if split.val.is_empty() {
            0.0
        } else {
            let eval = forward(spec, &weights, shift, x, None)?;
            let pred = argmax_rows(&eval.logits);
            accuracy(&pred, labels, &split.val)?
        };
        if val_accuracy > best_val {
            best_val = val_accuracy;
            best_weights = weights.clone();
        }
        history.push(EpochRecord {
            epoch,
            loss,
            val_accuracy,
        });
    }

    Ok(TrainedModel {
        spec: spec.clone(),
        shift_kind: shift.kind,
        weights,
        best_weights,
        best_val_accuracy: best_val.max(0.0),
        history,
    })
}

pub fn argmax_rows(logits: &DMatrix<f64>) -> Vec<usize> {
    (0..logits.nrows())
        .map(|i| {
            let mut best = 0;
            for c in 1..logits.ncols() {
                if logits[(i, c)] > logits[(i, best)] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Argmax labels and the row-stochastic probability matrix, using the
/// best-validation weights.
pub fn predict(
    m: &TrainedModel,
    shift: &ShiftOperator,
    x: &DMatrix<f64>,
) -> Result<(Vec<usize>, DMatrix<f64>)> {
    let logits = m.logits_best(shift, x)?;
    let probs = softmax(&logits);
    Ok((argmax_rows(&logits), probs))
}

/// Fraction of correct predictions over the index set.
pub fn accuracy(pred: &[usize], truth: &[usize], idx: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "accuracy",
            got: pred.len(),
            expected: truth.len(),
        });
    }
    if idx.is_empty() {
        return Ok(0.0);
    }
    let correct = idx.iter().filter(|&&i| pred[i] == truth[i]).count();
    Ok(correct as f64 / idx.len() as f64)
}

/// Joint-proportion confusion matrix: C_uv = (1/n) |{i : pred_i = u, y_i = v}|.
/// Entries sum to 1; column sums are the true class proportions.
pub fn confusion_matrix(pred: &[usize], truth: &[usize], k: usize) -> Result<DMatrix<f64>> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "confusion_matrix",
            got: pred.len(),
            expected: truth.len(),
        });
    }
    let n = pred.len();
    let mut c = DMatrix::zeros(k, k);
    for i in 0..n {
        if pred[i] >= k {
            return Err(Error::LabelOutOfRange {
                node: i,
                label: pred[i],
                k,
            });
        }
        if truth[i] >= k {
            return Err(Error::LabelOutOfRange {
                node: i,
                label: truth[i],
                k,
            });
        }
        c[(pred[i], truth[i])] += 1.0;
    }
    c /= n as f64;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::shift::{shift_operator, Normalization};

    fn ring_graph(n: usize, k: usize) -> Graph {
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        build_graph(&edges, &labels, None).unwrap()
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let logits = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -5.0, 0.0, 5.0]);
        let p = softmax(&logits);
        for i in 0..2 {
            let s: f64 = (0..3).map(|j| p[(i, j)]).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn softmax_shift_invariant_argmax() {
        let logits = DMatrix::from_row_slice(1, 3, &[0.2, 1.5, -0.3]);
        let shifted = logits.map(|v| v + 100.0);
        assert_eq!(argmax_rows(&logits), argmax_rows(&shifted));
    }

    #[test]
    fn uniform_weights_give_uniform_probabilities() {
        let g = ring_graph(6, 2);
        let s = shift_operator(&g, Normalization::Symmetric, true).unwrap();
        let x = DMatrix::from_element(6, 3, 0.7);
        let spec = ModelSpec::sgc(1, 0.1, 0.0, 1, 0);
        let m = TrainedModel {
            spec: spec.clone(),
            shift_kind: s.kind,
            weights: vec![DMatrix::from_element(3, 2, 0.25)],
            best_weights: vec![DMatrix::from_element(3, 2, 0.25)],
            best_val_accuracy: 0.0,
            history: vec![],
        };
        let (_, probs) = predict(&m, &s, &x).unwrap();
        for i in 0..6 {
            for c in 0..2 {
                assert!((probs[(i, c)] - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn separable_features_reach_high_accuracy() {
        // two classes, features fully determined by the class
        let n = 40;
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let g = ring_graph(n, 2);
        let x = DMatrix::from_fn(n, 2, |i, j| if labels[i] == j { 1.0 } else { -1.0 });
        let s = shift_operator(&g, Normalization::Symmetric, true).unwrap();
        let spec = ModelSpec::sgc(0, 0.5, 0.0, 200, 3);
        let split = Split {
            train: (0..n).collect(),
            val: vec![],
            test: vec![],
        };
        let m = train(&g, &x, &s, &spec, &split).unwrap();
        let logits = m.logits(&s, &x).unwrap();
        let pred = argmax_rows(&logits);
        let acc = accuracy(&pred, g.labels(), &split.train).unwrap();
        assert!(acc >= 0.99, "train accuracy {acc}");
    }

    #[test]
    fn zero_feature_variance_gives_chance_accuracy() {
        // identical features carry no label signal: the SGC on two
        // disjoint same-class cliques predicts one class everywhere
        let edges = vec![(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)];
        let labels = vec![0, 0, 0, 1, 1, 1];
        let g = build_graph(&edges, &labels, None).unwrap();
        let x = DMatrix::zeros(6, 3);
        let s = shift_operator(&g, Normalization::Symmetric, true).unwrap();
        let spec = ModelSpec::sgc(2, 0.2, 0.0, 50, 1);
        let split = Split {
            train: vec![0, 1, 3, 4],
            val: vec![],
            test: vec![2, 5],
        };
        let m = train(&g, &x, &s, &spec, &split).unwrap();
        let logits = m.logits(&s, &x).unwrap();
        let pred = argmax_rows(&logits);
        let acc = accuracy(&pred, g.labels(), &split.test).unwrap();
        assert!((acc - 0.5).abs() < 1e-12, "expected chance level, got {acc}");
    }

    #[test]
    fn prediction_matches_independent_forward() {
        let g = ring_graph(10, 2);
        let x = DMatrix::from_fn(10, 3, |i, j| ((i * 3 + j) as f64).sin());
        let s = shift_operator(&g, Normalization::Symmetric, true).unwrap();
        let spec = ModelSpec::gcn2(4, 0.1, 1e-4, 30, 9);
        let split = Split::random(10, 0.6, 0.2, 4);
        let m = train(&g, &x, &s, &spec, &split).unwrap();
        let (pred, probs) = predict(&m, &s, &x).unwrap();

        // independent recomputation: dense operator, explicit loops
        let dense = s.matrix.to_dense();
        let z1 = &dense * &x * &m.best_weights[0];
        let h1 = z1.map(|v| v.max(0.0));
        let logits = &dense * &h1 * &m.best_weights[1];
        let probs2 = softmax(&logits);
        assert_eq!(pred, argmax_rows(&logits));
        assert!((probs - probs2).abs().max() < 1e-10);
    }

    #[test]
    fn loss_non_increasing_small_lr() {
        let g = ring_graph(12, 2);
        let x = DMatrix::from_fn(12, 2, |i, j| ((i + j) as f64 * 0.37).cos());
        let s = shift_operator(&g, Normalization::Symmetric, true).unwrap();
        let spec = ModelSpec::gcn2(4, 1e-3, 0.0, 80, 5);
        let split = Split {
            train: (0..12).collect(),
            val: vec![],
            test: vec![],
        };
        let m = train(&g, &x, &s, &spec, &split).unwrap();
        for w in m.history.windows(2) {
            assert!(
                w[1].loss <= w[0].loss + 1e-12,
                "loss increased: {} -> {}",
                w[0].loss,
                w[1].loss
            );
        }
    }

    #[test]
    fn divergence_reports_lr() {
        let g = ring_graph(8, 2);
        let x = DMatrix::from_fn(8, 2, |i, j| ((i + j) as f64).sin() * 100.0);
        let s = shift_operator(&g, Normalization::Symmetric, true).unwrap();
        let spec = ModelSpec::sgc(1, 1e6, 1.0, 400, 5);
        let split = Split {
            train: (0..8).collect(),
            val: vec![],
            test: vec![],
        };
        match train(&g, &x, &s, &spec, &split) {
            Err(Error::Divergence { lr, .. }) => assert_eq!(lr, 1e6),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn confusion_matrix_properties() {
        let truth = vec![0, 0, 1, 1, 2, 2];
        // perfect prediction: C = diag of class proportions
        let c = confusion_matrix(&truth, &truth, 3).unwrap();
        for u in 0..3 {
            for v in 0..3 {
                let expect = if u == v { 1.0 / 3.0 } else { 0.0 };
                assert!((c[(u, v)] - expect).abs() < 1e-15);
            }
        }
        // constant prediction: mass only in row 0
        let pred = vec![0; 6];
        let c = confusion_matrix(&pred, &truth, 3).unwrap();
        assert!((c.row(0).sum() - 1.0).abs() < 1e-15);
        assert_eq!(c.row(1).sum(), 0.0);
        // entries always sum to 1; column sums are true proportions
        assert!((c.sum() - 1.0).abs() < 1e-15);
        for v in 0..3 {
            assert!((c.column(v).sum() - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn random_balanced_predictions_near_half() {
        use rand::Rng;
        let mut rng = crate::rng::rng_from_seed(13);
        let n = 20_000;
        let truth: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let idx: Vec<usize> = (0..n).collect();
        let acc = accuracy(&pred, &truth, &idx).unwrap();
        // 3-sigma band for Bernoulli(1/2) over 20k trials
        assert!((acc - 0.5).abs() < 3.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = ring_graph(8, 2);
        let x = DMatrix::from_fn(8, 3, |i, j| ((i * 7 + j * 3) as f64 * 0.21).sin());
        let s = shift_operator(&g, Normalization::Symmetric, true).unwrap();
        let split = Split {
            train: vec![0, 2, 3, 5, 7],
            val: vec![],
            test: vec![],
        };
        for arch_spec in [ModelSpec::sgc(2, 0.1, 0.05, 1, 2), ModelSpec::gcn2(4, 0.1, 0.05, 1, 2)] {
            let mut rng = rng_from_seed(17);
            let weights: Vec<DMatrix<f64>> = match arch_spec.arch {
                Arch::Sgc => vec![xavier_init(3, 2, &mut rng)],
                Arch::Gcn2 => vec![xavier_init(3, 4, &mut rng), xavier_init(4, 2, &mut rng)],
            };
            let loss_fn = |ws: &[DMatrix<f64>]| -> f64 {
                let fwd = forward(&arch_spec, ws, &s, &x, None).unwrap();
                let probs = softmax(&fwd.logits);
                cross_entropy(&probs, g.labels(), &split.train)
                    + 0.5 * arch_spec.weight_decay * l2_norm_sq(ws)
            };
            // analytic gradient (mirrors the training loop)
            let fwd = forward(&arch_spec, &weights, &s, &x, None).unwrap();
            let probs = softmax(&fwd.logits);
            let mut dlogits = DMatrix::zeros(8, 2);
            let scale = 1.0 / split.train.len() as f64;
            for &i in &split.train {
                for c in 0..2 {
                    let t = if g.labels()[i] == c { 1.0 } else { 0.0 };
                    dlogits[(i, c)] = (probs[(i, c)] - t) * scale;
                }
            }
            let grads: Vec<DMatrix<f64>> = match arch_spec.arch {
                Arch::Sgc => {
                    let mut gw = fwd.propagated.transpose() * &dlogits;
                    gw += arch_spec.weight_decay * &weights[0];
                    vec![gw]
                }
                Arch::Gcn2 => {
                    let h1 = fwd.h1.as_ref().unwrap();
                    let z1 = fwd.z1.as_ref().unwrap();
                    let s_t_dlogits = s.matrix.matmul_dense_transpose(&dlogits);
                    let mut gw2 = h1.transpose() * &s_t_dlogits;
                    gw2 += arch_spec.weight_decay * &weights[1];
                    let dh1 = &s_t_dlogits * weights[1].transpose();
                    let dz1 = DMatrix::from_fn(8, 4, |i, j| {
                        if z1[(i, j)] > 0.0 { dh1[(i, j)] } else { 0.0 }
                    });
                    let mut gw1 = fwd.propagated.transpose() * &dz1;
                    gw1 += arch_spec.weight_decay * &weights[0];
                    vec![gw1, gw2]
                }
            };
            // central finite differences
            let eps = 1e-6;
            for (li, w) in weights.iter().enumerate() {
                for r in 0..w.nrows() {
                    for c in 0..w.ncols() {
                        let mut wp = weights.clone();
                        wp[li][(r, c)] += eps;
                        let mut wm = weights.clone();
                        wm[li][(r, c)] -= eps;
                        let fd = (loss_fn(&wp) - loss_fn(&wm)) / (2.0 * eps);
                        let an = grads[li][(r, c)];
                        let denom = fd.abs().max(an.abs()).max(1e-8);
                        assert!(
                            (fd - an).abs() / denom < 1e-4,
                            "layer {li} ({r},{c}): fd {fd} vs analytic {an}"
                        );
                    }
                }
            }
        }
    }
}
