//! Predicted SNR from sensitivities, the sensitivity condition, and the
//! Monte-Carlo empirical-SNR estimator.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{sample_mu_gamma, sample_noise, assemble_features, FeatureParams};
use crate::graph::Graph;
use crate::model::{train, ModelSpec, Split, TrainedModel};
use crate::rng::{rng_from_seed, split_mix};
use crate::sensitivity::{SensitivityTensor, SensitivityTriple};
use crate::shift::ShiftOperator;

/// Sentinel for a positive signal over a vanishing denominator.
pub const SNR_INFINITE: f64 = f64::INFINITY;

/// Predicted per-node SNR under IID feature dimensions:
/// sigma^2/(phi^2+psi^2) * signal / (rho * noise + (1-rho) * global).
pub fn predict_snr(sens: &SensitivityTriple, params: &FeatureParams) -> Result<Vec<f64>> {
    let prefactor = params.input_snr()?;
    let rho = crate::features::local_noise_proportion(params)?;
    Ok((0..sens.n())
        .map(|i| {
            let denom = rho * sens.noise[i] + (1.0 - rho) * sens.global[i];
            ratio_or_sentinel(prefactor * sens.signal[i], denom)
        })
        .collect())
}

/// Predicted per-node SNR for full covariance matrices, via the double sum
/// over input-dimension pairs.
pub fn predict_snr_general(tensor: &SensitivityTensor, params: &FeatureParams) -> Result<Vec<f64>> {
    let (sigma, phi, psi) = match params {
        FeatureParams::General { sigma, phi, psi } => (sigma, phi, psi),
        FeatureParams::Iid { .. } => return Err(Error::MixedCovarianceMode),
    };
    let d = tensor.d_in;
    if sigma.nrows() != d {
        return Err(Error::DimensionMismatch {
            context: "covariance dimension",
            got: sigma.nrows(),
            expected: d,
        });
    }
    Ok((0..tensor.n)
        .map(|i| {
            let mut num = 0.0;
            let mut den = 0.0;
            for q in 0..d {
                for r in 0..d {
                    let idx = i * d * d + q * d + r;
                    num += sigma[(q, r)] * tensor.signal[idx];
                    den += phi[(q, r)] * tensor.global[idx] + psi[(q, r)] * tensor.noise[idx];
                }
            }
            ratio_or_sentinel(num, den)
        })
        .collect())
}

fn ratio_or_sentinel(num: f64, den: f64) -> f64 {
    if den <= 0.0 {
        if num == 0.0 {
            0.0
        } else {
            SNR_INFINITE
        }
    } else {
        num / den
    }
}

/// Per-node sensitivity condition: signal > rho * noise + (1-rho) * global,
/// strict. Expects q-summed diagonal sensitivities.
pub fn sensitivity_condition(sens: &SensitivityTriple, rho: f64) -> Vec<bool> {
    (0..sens.n())
        .map(|i| sens.signal[i] > rho * sens.noise[i] + (1.0 - rho) * sens.global[i])
        .collect()
}

/// Fraction of nodes where the condition agrees with the observed
/// advantage (gcn accuracy strictly above fnn accuracy).
pub fn condition_prediction_accuracy(
    condition: &[bool],
    gcn_acc: &[f64],
    fnn_acc: &[f64],
) -> f64 {
    let n = condition.len();
    let agree = (0..n)
        .filter(|&i| condition[i] == (gcn_acc[i] > fnn_acc[i]))
        .count();
    agree as f64 / n as f64
}

/// Monte-Carlo configuration echoed in reports.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct McConfig {
    pub n_mu: usize,
    pub n_ge: usize,
    pub seed: u64,
}

/// Per-node SNR report for external plotting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnrReport {
    pub predicted: Vec<f64>,
    pub empirical: Option<Vec<f64>>,
    pub condition: Vec<bool>,
    pub mean_predicted: f64,
    pub mean_empirical: Option<f64>,
    pub mc: Option<McConfig>,
}

fn finite_mean(values: &[f64]) -> f64 {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        0.0
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    }
}

impl SnrReport {
    pub fn new(
        predicted: Vec<f64>,
        empirical: Option<Vec<f64>>,
        condition: Vec<bool>,
        mc: Option<McConfig>,
    ) -> Self {
        let mean_predicted = finite_mean(&predicted);
        let mean_empirical = empirical.as_ref().map(|e| finite_mean(e));
        SnrReport {
            predicted,
            empirical,
            condition,
            mean_predicted,
            mean_empirical,
            mc,
        }
    }
}

/// Empirical per-node, per-output-dimension SNR of an arbitrary
/// representation map, following the conditional-variance estimator with
/// (N-1) denominators. `represent` maps a feature matrix to the n x d_out
/// representation.
///
/// The numerator is the sample variance over mu draws of the conditional
/// means; the denominator is the mean over mu draws of the conditional
/// variances over (gamma, eps) draws. A zero denominator yields 0 when the
/// numerator is zero and an infinity sentinel otherwise.
pub fn empirical_snr_of_map<F>(
    g: &Graph,
    params: &FeatureParams,
    represent: F,
    n_mu: usize,
    n_ge: usize,
    seed: u64,
) -> Result<DMatrix<f64>>
where
    F: Fn(&DMatrix<f64>) -> DMatrix<f64> + Sync,
{
    if n_mu < 2 || n_ge < 2 {
        return Err(Error::TooFewReplicates { n_mu, n_ge });
    }
    let n = g.n();

    // shared (gamma, eps) draws reused across every mu draw
    let ge_sets: Vec<(nalgebra::DVector<f64>, DMatrix<f64>)> = (0..n_ge)
        .map(|s| {
            let mut rng = rng_from_seed(split_mix(seed, 1_000_000 + s as u64));
            let (_, gamma) = sample_mu_gamma(0, params, &mut rng);
            let eps = sample_noise(n, params, &mut rng);
            (gamma, eps)
        })
        .collect();

    let per_mu: Vec<(DMatrix<f64>, DMatrix<f64>)> = (0..n_mu)
        .into_par_iter()
        .map(|m| {
            let mut rng = rng_from_seed(split_mix(seed, 2_000_000 + m as u64));
            let (mu, _) = sample_mu_gamma(g.k(), params, &mut rng);
            let mut mean: Option<DMatrix<f64>> = None;
            let mut m2: Option<DMatrix<f64>> = None;
            for (count, (gamma, eps)) in ge_sets.iter().enumerate() {
                let x = assemble_features(g.labels(), &mu, gamma, eps);
                let h = represent(&x);
                match (&mut mean, &mut m2) {
                    (None, None) => {
                        m2 = Some(DMatrix::zeros(h.nrows(), h.ncols()));
                        mean = Some(h);
                    }
                    (Some(mean), Some(m2)) => {
                        // Welford update
                        let delta = &h - &*mean;
                        *mean += &delta / (count as f64 + 1.0);
                        let delta2 = &h - &*mean;
                        *m2 += delta.component_mul(&delta2);
                    }
                    _ => unreachable!(),
                }
            }
            let mean = mean.unwrap();
            let var = m2.unwrap() / (n_ge as f64 - 1.0);
            (mean, var)
        })
        .collect();

    let d_out = per_mu[0].0.ncols();
    // variance over mu of the conditional means
    let mut grand = DMatrix::zeros(n, d_out);
    for (mean, _) in &per_mu {
        grand += mean;
    }
    grand /= n_mu as f64;
    let mut signal_var = DMatrix::zeros(n, d_out);
    for (mean, _) in &per_mu {
        let d = mean - &grand;
        signal_var += d.component_mul(&d);
    }
    signal_var /= n_mu as f64 - 1.0;
    // variance of identical conditional means is pure roundoff; snap it
    for i in 0..n {
        for p in 0..d_out {
            let floor = (1e-13 * grand[(i, p)].abs()).powi(2);
            if signal_var[(i, p)] <= floor {
                signal_var[(i, p)] = 0.0;
            }
        }
    }

    let mut noise_var = DMatrix::zeros(n, d_out);
    for (_, var) in &per_mu {
        noise_var += var;
    }
    noise_var /= n_mu as f64;

    Ok(DMatrix::from_fn(n, d_out, |i, p| {
        ratio_or_sentinel(signal_var[(i, p)], noise_var[(i, p)])
    }))
}

/// Empirical SNR of a trained classifier: trains one model on the first
/// feature sample and evaluates its pre-softmax representation over all
/// Monte-Carlo draws. Returns (per-node-per-dim SNR matrix, model).
pub fn empirical_snr(
    g: &Graph,
    shift: &ShiftOperator,
    params: &FeatureParams,
    spec: &ModelSpec,
    split: &Split,
    n_mu: usize,
    n_ge: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, TrainedModel)> {
    if n_mu < 2 || n_ge < 2 {
        return Err(Error::TooFewReplicates { n_mu, n_ge });
    }
    // the first feature sample (m = 1, s = 1) trains the model
    let x_train = {
        let mut rng_mu = rng_from_seed(split_mix(seed, 2_000_000));
        let (mu, _) = sample_mu_gamma(g.k(), params, &mut rng_mu);
        let mut rng_ge = rng_from_seed(split_mix(seed, 1_000_000));
        let (_, gamma) = sample_mu_gamma(0, params, &mut rng_ge);
        let eps = sample_noise(g.n(), params, &mut rng_ge);
        assemble_features(g.labels(), &mu, &gamma, &eps)
    };
    let model = train(g, &x_train, shift, spec, split)?;
    let snr = empirical_snr_of_map(
        g,
        params,
        |x| model.logits_best(shift, x).expect("forward pass"),
        n_mu,
        n_ge,
        seed,
    )?;
    Ok((snr, model))
}

/// Averages per-output-dimension SNRs into per-node values, skipping
/// non-finite sentinels.
pub fn per_node_mean_snr(snr: &DMatrix<f64>) -> Vec<f64> {
    (0..snr.nrows())
        .map(|i| {
            let vals: Vec<f64> = (0..snr.ncols())
                .map(|p| snr[(i, p)])
                .filter(|v| v.is_finite())
                .collect();
            if vals.is_empty() {
                f64::INFINITY
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::sensitivity::{sgc_sensitivities, InputDims, SensitivityMode};
    use crate::shift::{shift_operator, Normalization};

    fn triple(signal: Vec<f64>, noise: Vec<f64>, global: Vec<f64>) -> SensitivityTriple {
        SensitivityTriple {
            mode: SensitivityMode::ExactSgc,
            order: 1,
            signal,
            noise,
            global,
        }
    }

    #[test]
    fn fnn_level_snr() {
        // equal sensitivities reproduce the input SNR
        let params = FeatureParams::iid(5, 1e-5, 1e-4, 1e-4).unwrap();
        let t = triple(vec![2.0; 4], vec![2.0; 4], vec![2.0; 4]);
        let snr = predict_snr(&t, &params).unwrap();
        for v in snr {
            assert!((v - 0.05).abs() < 1e-15);
        }
    }

    #[test]
    fn bridge_node_rho_one_snr_is_fnn_level() {
        // the bridging-node example at rho = 1: factor (1/2)/(1 * 1/2) = 1
        let g = build_graph(&[(0, 1), (1, 2), (2, 3), (3, 4)], &[0, 0, 0, 1, 1], None).unwrap();
        let s = shift_operator(&g, Normalization::Symmetric, false).unwrap();
        let sens = sgc_sensitivities(&s, g.labels(), 1, 1.0).unwrap();
        let params = FeatureParams::iid(5, 1e-5, 0.0, 2e-4).unwrap(); // rho = 1
        let snr = predict_snr(&sens, &params).unwrap();
        assert!((snr[2] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn zero_signal_variance_gives_zero() {
        let params = FeatureParams::iid(2, 0.0, 1e-4, 1e-4).unwrap();
        let t = triple(vec![1.0, 2.0], vec![1.0, 1.0], vec![1.0, 1.0]);
        let snr = predict_snr(&t, &params).unwrap();
        assert_eq!(snr, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_denominator_sentinel() {
        let params = FeatureParams::iid(2, 1.0, 0.5, 0.5).unwrap();
        let t = triple(vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]);
        let snr = predict_snr(&t, &params).unwrap();
        assert!(snr[0].is_infinite());
        assert_eq!(snr[1], 0.0);
    }

    #[test]
    fn condition_fig_bridge_false_for_all_rho() {
        let g = build_graph(&[(0, 1), (1, 2), (2, 3), (3, 4)], &[0, 0, 0, 1, 1], None).unwrap();
        let s = shift_operator(&g, Normalization::Symmetric, false).unwrap();
        let sens = sgc_sensitivities(&s, g.labels(), 1, 1.0).unwrap();
        for rho in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let cond = sensitivity_condition(&sens, rho);
            assert!(!cond[2], "rho {rho}");
        }
    }

    #[test]
    fn condition_fnn_boundary_is_false() {
        let t = triple(vec![1.0], vec![1.0], vec![1.0]);
        assert_eq!(sensitivity_condition(&t, 0.3), vec![false]);
    }

    #[test]
    fn condition_two_cliques_rho_one() {
        // two disjoint same-class cliques, l = 1, rho = 1:
        // signal = global > noise, condition holds
        let g = build_graph(
            &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)],
            &[0, 0, 0, 1, 1, 1],
            None,
        )
        .unwrap();
        let s = shift_operator(&g, Normalization::Symmetric, true).unwrap();
        let sens = sgc_sensitivities(&s, g.labels(), 1, 1.0).unwrap();
        let cond = sensitivity_condition(&sens, 1.0);
        assert!(cond.iter().all(|&c| c));
        for i in 0..6 {
            assert!((sens.signal[i] - sens.global[i]).abs() < 1e-12);
            assert!(sens.signal[i] > sens.noise[i]);
        }
    }

    #[test]
    fn condition_accuracy_aligned_and_anti() {
        let cond = vec![true, true, false, false];
        let gcn = vec![0.9, 0.8, 0.5, 0.4];
        let fnn = vec![0.5, 0.5, 0.6, 0.6];
        assert_eq!(condition_prediction_accuracy(&cond, &gcn, &fnn), 1.0);
        let anti: Vec<bool> = cond.iter().map(|c| !c).collect();
        assert_eq!(condition_prediction_accuracy(&anti, &gcn, &fnn), 0.0);
    }

    #[test]
    fn deterministic_map_has_zero_snr() {
        let g = build_graph(&[(0, 1), (1, 2)], &[0, 1, 0], None).unwrap();
        let params = FeatureParams::iid(2, 1e-3, 1e-3, 1e-3).unwrap();
        let constant = DMatrix::from_element(3, 2, 4.2);
        let snr =
            empirical_snr_of_map(&g, &params, |_| constant.clone(), 40, 40, 5).unwrap();
        assert_eq!(snr.abs().max(), 0.0);
    }

    #[test]
    fn identity_map_recovers_input_snr() {
        // H = X: SNR converges to sigma^2 / (phi^2 + psi^2)
        let n = 60;
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let g = build_graph(&[(0, 1)], &labels, None).unwrap();
        let params = FeatureParams::iid(2, 2e-5, 1e-4, 1e-4).unwrap();
        let snr = empirical_snr_of_map(&g, &params, |x| x.clone(), 300, 300, 11).unwrap();
        let target = 0.1;
        let mean = snr.iter().sum::<f64>() / (snr.len() as f64);
        assert!(
            (mean - target).abs() / target < 0.15,
            "mean {mean} vs {target}"
        );
    }

    #[test]
    fn predicted_snr_invariant_to_weight_scaling() {
        use crate::model::{ModelSpec, TrainedModel};
        use crate::sensitivity::model_jacobian_sensitivities;
        let g = build_graph(&[(0, 1), (1, 2), (2, 3), (0, 3), (1, 3)], &[0, 1, 0, 1], None)
            .unwrap();
        let s = shift_operator(&g, Normalization::Symmetric, true).unwrap();
        let params = FeatureParams::iid(2, 1e-5, 1e-4, 1e-4).unwrap();
        let w = DMatrix::from_row_slice(2, 2, &[0.3, -0.8, 1.1, 0.4]);
        let make = |w: DMatrix<f64>| TrainedModel {
            spec: ModelSpec::sgc(2, 0.1, 0.0, 1, 0),
            shift_kind: s.kind,
            weights: vec![w.clone()],
            best_weights: vec![w],
            best_val_accuracy: 0.0,
            history: vec![],
        };
        let m1 = make(w.clone());
        let m2 = make(w * 10.0);
        let t1 = model_jacobian_sensitivities(&s, &m1, g.labels(), None, 0, InputDims::Diagonal)
            .unwrap();
        let t2 = model_jacobian_sensitivities(&s, &m2, g.labels(), None, 0, InputDims::Diagonal)
            .unwrap();
        let s1 = predict_snr(&t1, &params).unwrap();
        let s2 = predict_snr(&t2, &params).unwrap();
        for i in 0..4 {
            assert!((s1[i] - s2[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn predicted_snr_monotone_in_variances() {
        let t = triple(vec![1.5], vec![0.8], vec![1.2]);
        let base = predict_snr(&t, &FeatureParams::iid(2, 1e-5, 1e-4, 1e-4).unwrap()).unwrap()[0];
        let more_signal =
            predict_snr(&t, &FeatureParams::iid(2, 2e-5, 1e-4, 1e-4).unwrap()).unwrap()[0];
        let more_local =
            predict_snr(&t, &FeatureParams::iid(2, 1e-5, 1e-4, 2e-4).unwrap()).unwrap()[0];
        let more_global =
            predict_snr(&t, &FeatureParams::iid(2, 1e-5, 2e-4, 1e-4).unwrap()).unwrap()[0];
        assert!(more_signal > base);
        assert!(more_local < base);
        assert!(more_global < base);
    }

    #[test]
    fn general_covariance_matches_iid_on_diagonal() {
        use crate::model::{ModelSpec, TrainedModel};
        use crate::sensitivity::{model_jacobian_sensitivities, model_sensitivity_tensor};
        let g = build_graph(&[(0, 1), (1, 2), (2, 0), (2, 3)], &[0, 1, 0, 1], None).unwrap();
        let s = shift_operator(&g, Normalization::Symmetric, true).unwrap();
        let d = 3;
        let w = DMatrix::from_fn(d, 2, |i, j| ((i * 2 + j) as f64 * 0.71).sin());
        let model = TrainedModel {
            spec: ModelSpec::sgc(1, 0.1, 0.0, 1, 0),
            shift_kind: s.kind,
            weights: vec![w.clone()],
            best_weights: vec![w],
            best_val_accuracy: 0.0,
            history: vec![],
        };
        let (s2, p2, ps2) = (3e-5, 1e-4, 2e-4);
        let iid = FeatureParams::iid(d, s2, p2, ps2).unwrap();
        let eye = DMatrix::<f64>::identity(d, d);
        let gen = FeatureParams::general(&eye * s2, &eye * p2, &eye * ps2).unwrap();
        let tri = model_jacobian_sensitivities(&s, &model, g.labels(), None, 0, InputDims::Diagonal)
            .unwrap();
        let tensor = model_sensitivity_tensor(&s, &model, g.labels(), None, 0).unwrap();
        let a = predict_snr(&tri, &iid).unwrap();
        let b = predict_snr_general(&tensor, &gen).unwrap();
        for i in 0..4 {
            assert!((a[i] - b[i]).abs() < 1e-12, "{} vs {}", a[i], b[i]);
        }
    }
}
