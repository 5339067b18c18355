//! Optimal block-matrix construction, involution enumeration, and the
//! iterative block-resampling rewiring loop.
//!
//! The block matrices maximizing expected even-order homophily are
//! B = (<d>/k) Pi^{-1} P Pi^{-1} for a symmetric permutation (involution)
//! P, i.e. disjoint unions of single-class and two-class-bipartite
//! clusters. The loop alternates class prediction and resampling from the
//! optimal ensemble built on the predicted labels.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::bottleneck::order_metrics;
use crate::ensemble::SbmParams;
use crate::error::{Error, Result};
use crate::features::{sample_features, FeatureParams};
use crate::graph::{build_graph, Graph};
use crate::model::{accuracy, confusion_matrix, predict, train, ModelSpec, Split, TrainedModel};
use crate::rng::{rng_from_seed, split_mix};
use crate::shift::{shift_operator, Normalization, ShiftOperator};

const INVOLUTION_LIMIT: usize = 12;

/// A symmetric permutation of [k]: mapping[mapping[u]] == u.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetricPermutation {
    k: usize,
    mapping: Vec<usize>,
}

impl SymmetricPermutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let k = mapping.len();
        for (u, &v) in mapping.iter().enumerate() {
            if v >= k || mapping[v] != u {
                return Err(Error::NotInvolution);
            }
        }
        Ok(SymmetricPermutation { k, mapping })
    }

    pub fn identity(k: usize) -> Self {
        SymmetricPermutation {
            k,
            mapping: (0..k).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn map(&self, u: usize) -> usize {
        self.mapping[u]
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.k, self.k, |i, j| {
            if self.mapping[i] == j {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Cycle notation, fixed points as singletons: "(0)(1 2)".
    pub fn cycle_notation(&self) -> String {
        let mut out = String::new();
        for u in 0..self.k {
            let v = self.mapping[u];
            if v == u {
                out.push_str(&format!("({u})"));
            } else if u < v {
                out.push_str(&format!("({u} {v})"));
            }
        }
        out
    }
}

/// Telephone numbers T(k): involution counts, T(k) = T(k-1) + (k-1) T(k-2).
pub fn telephone_number(k: usize) -> u64 {
    let mut a = 1u64; // T(0)
    let mut b = 1u64; // T(1)
    if k == 0 {
        return a;
    }
    for i in 2..=k {
        let next = b + (i as u64 - 1) * a;
        a = b;
        b = next;
    }
    b
}

/// All involutions of [k] in a deterministic order. The count equals the
/// k-th telephone number.
pub fn enumerate_involutions(k: usize) -> Result<Vec<SymmetricPermutation>> {
    if k > INVOLUTION_LIMIT {
        return Err(Error::InvolutionLimit {
            k,
            limit: INVOLUTION_LIMIT,
        });
    }
    let mut out = Vec::new();
    let mut mapping: Vec<Option<usize>> = vec![None; k];
    fn recurse(
        mapping: &mut Vec<Option<usize>>,
        out: &mut Vec<SymmetricPermutation>,
        k: usize,
    ) {
        let u = match mapping.iter().position(|m| m.is_none()) {
            Some(u) => u,
            None => {
                let m: Vec<usize> = mapping.iter().map(|v| v.unwrap()).collect();
                out.push(SymmetricPermutation { k, mapping: m });
                return;
            }
        };
        // u as a fixed point
        mapping[u] = Some(u);
        recurse(mapping, out, k);
        mapping[u] = None;
        // u paired with a later unassigned element
        for v in (u + 1)..k {
            if mapping[v].is_none() {
                mapping[u] = Some(v);
                mapping[v] = Some(u);
                recurse(mapping, out, k);
                mapping[u] = None;
                mapping[v] = None;
            }
        }
    }
    recurse(&mut mapping, &mut out, k);
    Ok(out)
}

/// The homophily-optimal block matrix B = (<d>/k) Pi^{-1} P Pi^{-1} for
/// proportions pi and involution P. The normalized block matrix of the
/// result equals P exactly and the overall mean degree equals
/// `mean_degree`. Entries are capped at n (edge probability 1); the cap
/// only binds for classes holding O(1) nodes.
pub fn optimal_block_matrix(
    pi_hat: &[f64],
    perm: &SymmetricPermutation,
    mean_degree: f64,
    n: usize,
) -> Result<SbmParams> {
    let k = pi_hat.len();
    if perm.k() != k {
        return Err(Error::DimensionMismatch {
            context: "permutation size",
            got: perm.k(),
            expected: k,
        });
    }
    for (c, &p) in pi_hat.iter().enumerate() {
        if p <= 0.0 {
            return Err(Error::ZeroClassProportion { class: c });
        }
    }
    let scale = mean_degree / k as f64;
    let b = DMatrix::from_fn(k, k, |u, v| {
        if perm.map(u) == v {
            (scale / (pi_hat[u] * pi_hat[v])).min(n as f64)
        } else {
            0.0
        }
    });
    SbmParams::new(b, pi_hat.to_vec(), n)
}

/// The achievable expected higher-order homophily ceiling for predictions
/// with confusion matrix C: tr(C^T Pi_hat^{-1} C).
pub fn optimum_value(confusion: &DMatrix<f64>, pi_hat: &[f64]) -> Result<f64> {
    let k = pi_hat.len();
    if confusion.nrows() != k || confusion.ncols() != k {
        return Err(Error::InvalidConfusion {
            reason: format!("expected {k}x{k} confusion matrix"),
        });
    }
    for (c, &p) in pi_hat.iter().enumerate() {
        if p <= 0.0 {
            return Err(Error::ZeroClassProportion { class: c });
        }
    }
    let pi_inv = DMatrix::from_diagonal(&DVector::from_iterator(
        k,
        pi_hat.iter().map(|p| 1.0 / p),
    ));
    Ok((confusion.transpose() * pi_inv * confusion).trace())
}

/// Per-iteration record of the rewiring loop.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BridgeRecord {
    pub iteration: usize,
    pub test_accuracy: f64,
    /// Second-order homophily h^(2) of the current graph.
    pub h2: f64,
    /// tr(C^T Pi_hat^{-1} C) for the predictions used at this iteration.
    pub optimum_value: f64,
    pub mean_degree: f64,
}

#[derive(Debug, Clone)]
pub struct BridgeState {
    pub iteration: usize,
    pub graph: Graph,
    pub predicted: Vec<usize>,
    pub permutation: SymmetricPermutation,
    pub target_degree: f64,
    pub history: Vec<BridgeRecord>,
    pub model: TrainedModel,
}

/// Feature input of the loop: fixed matrix or parameters sampled once.
#[derive(Debug, Clone)]
pub enum FeatureSource {
    Fixed(DMatrix<f64>),
    Params(FeatureParams),
}

#[derive(Debug, Clone)]
pub struct BridgeConfig {
    pub spec: ModelSpec,
    pub permutation: SymmetricPermutation,
    pub mean_degree: f64,
    pub iterations: usize,
    /// Retrain after every resample instead of only after the first.
    pub retrain_each_iteration: bool,
    /// Stop early when h^(2) has not improved for this many iterations.
    pub plateau_patience: Option<usize>,
    pub normalization: Normalization,
    pub add_self_loops: bool,
    pub seed: u64,
}

impl BridgeConfig {
    pub fn new(spec: ModelSpec, permutation: SymmetricPermutation, mean_degree: f64) -> Self {
        BridgeConfig {
            spec,
            permutation,
            mean_degree,
            iterations: 10,
            retrain_each_iteration: false,
            plateau_patience: None,
            normalization: Normalization::Symmetric,
            add_self_loops: true,
            seed: 0,
        }
    }
}

/// Predicted class proportions with empty classes floored at one node.
pub fn floored_proportions(pred: &[usize], k: usize) -> Vec<f64> {
    let mut counts = vec![0usize; k];
    for &y in pred {
        counts[y] += 1;
    }
    let floored: Vec<f64> = counts.iter().map(|&c| c.max(1) as f64).collect();
    let total: f64 = floored.iter().sum();
    floored.into_iter().map(|c| c / total).collect()
}

/// Samples edges of the optimal ensemble using the predicted labels as
/// block assignments.
fn sample_optimal_edges(
    params: &SbmParams,
    pred: &[usize],
    seed: u64,
) -> Vec<(usize, usize)> {
    let mut rng = rng_from_seed(seed);
    let n = pred.len();
    let scale = 1.0 / params.n as f64;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let prob = (params.b[(pred[i], pred[j])] * scale).min(1.0);
            if prob > 0.0 && rng.random::<f64>() < prob {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// The rewiring loop. Iteration 0 trains the cold-start model on the input
/// graph; each subsequent iteration predicts labels, builds the optimal
/// block matrix on the floored predicted proportions, resamples the graph,
/// and (per the default schedule) retrains only once, on the first
/// resampled graph. The history holds one record per iteration including
/// the baseline.
pub fn bridge(
    g0: &Graph,
    features: &FeatureSource,
    config: &BridgeConfig,
    split: &Split,
) -> Result<BridgeState> {
    let n = g0.n();
    let k = g0.k();
    let x = match features {
        FeatureSource::Fixed(x) => x.clone(),
        FeatureSource::Params(p) => sample_features(g0, p, split_mix(config.seed, 0))?.x,
    };
    let truth = g0.labels().to_vec();

    let mut graph = g0.clone();
    let mut shift = shift_operator(&graph, config.normalization, config.add_self_loops)?;
    let mut spec = config.spec.clone();
    spec.seed = split_mix(config.seed, 1);
    let mut model = train(&graph, &x, &shift, &spec, split)?;

    let mut history = Vec::with_capacity(config.iterations + 1);
    let (mut pred, _) = predict(&model, &shift, &x)?;
    let record = |iter: usize,
                  graph: &Graph,
                  shift: &ShiftOperator,
                  model: &TrainedModel,
                  pred: &[usize]|
     -> Result<BridgeRecord> {
        let (eval_pred, _) = predict(model, shift, &x)?;
        let test_accuracy = accuracy(&eval_pred, &truth, &split.test)?;
        let h2 = order_metrics(shift, &truth, 2)?.h;
        let c = confusion_matrix(pred, &truth, k)?;
        let pi_hat = floored_proportions(pred, k);
        let optimum = optimum_value(&c, &pi_hat)?;
        Ok(BridgeRecord {
            iteration: iter,
            test_accuracy,
            h2,
            optimum_value: optimum,
            mean_degree: graph.mean_degree(),
        })
    };
    history.push(record(0, &graph, &shift, &model, &pred)?);

    let mut best_h2 = history[0].h2;
    let mut stall = 0usize;
    for m in 1..=config.iterations {
        let pi_hat = floored_proportions(&pred, k);
        let params = optimal_block_matrix(&pi_hat, &config.permutation, config.mean_degree, n)?;
        let edges = sample_optimal_edges(&params, &pred, split_mix(config.seed, 100 + m as u64));
        let new_graph = build_graph(&edges, &truth, None)?;
        let new_shift = shift_operator(&new_graph, config.normalization, config.add_self_loops)?;
        graph = new_graph;
        shift = new_shift;

        if m == 1 || config.retrain_each_iteration {
            let mut round_spec = config.spec.clone();
            round_spec.seed = split_mix(config.seed, 200 + m as u64);
            model = train(&graph, &x, &shift, &round_spec, split)?;
        }
        let (new_pred, _) = predict(&model, &shift, &x)?;
        pred = new_pred;
        history.push(record(m, &graph, &shift, &model, &pred)?);

        if let Some(patience) = config.plateau_patience {
            let h2 = history.last().unwrap().h2;
            if h2 > best_h2 + 1e-12 {
                best_h2 = h2;
                stall = 0;
            } else {
                stall += 1;
                if stall >= patience {
                    break;
                }
            }
        }
    }

    Ok(BridgeState {
        iteration: history.len() - 1,
        graph,
        predicted: pred,
        permutation: config.permutation.clone(),
        target_degree: config.mean_degree,
        history,
        model,
    })
}

/// Runs the loop once per involution of [k] and keeps the run with the
/// best final validation accuracy. Limited to k <= 6.
pub fn bridge_best_involution(
    g0: &Graph,
    features: &FeatureSource,
    config: &BridgeConfig,
    split: &Split,
) -> Result<BridgeState> {
    let k = g0.k();
    if k > 6 {
        return Err(Error::InvolutionLimit { k, limit: 6 });
    }
    let x_eval = match features {
        FeatureSource::Fixed(x) => x.clone(),
        FeatureSource::Params(p) => sample_features(g0, p, split_mix(config.seed, 0))?.x,
    };
    let mut best: Option<(f64, BridgeState)> = None;
    for perm in enumerate_involutions(k)? {
        let mut cfg = config.clone();
        cfg.permutation = perm;
        let state = bridge(g0, features, &cfg, split)?;
        let shift = shift_operator(&state.graph, config.normalization, config.add_self_loops)?;
        let (pred, _) = predict(&state.model, &shift, &x_eval)?;
        let val_acc = accuracy(&pred, g0.labels(), &split.val)?;
        if best.as_ref().map(|(v, _)| val_acc > *v).unwrap_or(true) {
            best = Some((val_acc, state));
        }
    }
    Ok(best.unwrap().1)
}
