//! Scratch calibration harness (not shipped).

use graph_snr::ensemble::{planted_partition, sample_sbm};
use graph_snr::features::{sample_features, FeatureParams};
use graph_snr::model::{accuracy, predict, train, ModelSpec, Split};
use graph_snr::rng::split_mix;
use graph_snr::shift::{shift_operator, Normalization};
use rayon::prelude::*;

fn standardize(x: &nalgebra::DMatrix<f64>, p: &FeatureParams) -> nalgebra::DMatrix<f64> {
    match p {
        FeatureParams::Iid { sigma2, phi2, psi2, .. } => {
            let rms = (sigma2 + phi2 + psi2).sqrt();
            let mut out = x / rms;
            let n = out.nrows();
            for j in 0..out.ncols() {
                let mean = out.column(j).sum() / n as f64;
                for i in 0..n {
                    out[(i, j)] -= mean;
                }
            }
            out
        }
        _ => unreachable!(),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(|s| s.as_str()).unwrap_or("baseline");
    match mode {
        "baseline" => baseline_sweep(),
        "ushape" => ushape(),
        "bridge" => bridge_calib(),
        _ => panic!("unknown mode"),
    }
}

fn run_one(
    n: usize,
    d: f64,
    h: f64,
    sigma2: f64,
    hidden: usize,
    lr: f64,
    wd: f64,
    epochs: usize,
    seed: u64,
) -> (f64, f64) {
    let params = FeatureParams::iid(5, sigma2, 1e-4, 1e-4).unwrap();
    let sbm = planted_partition(2, d, h, n).unwrap();
    let g = sample_sbm(&sbm, None, split_mix(seed, 1)).unwrap();
    let x = sample_features(&g, &params, split_mix(seed, 2)).unwrap().x;
    let x = standardize(&x, &params);
    let shift = shift_operator(&g, Normalization::Symmetric, true).unwrap();
    let split = Split::random(n, 0.6, 0.2, split_mix(seed, 3));
    let mut spec = ModelSpec::gcn2(hidden, lr, wd, epochs, split_mix(seed, 4));
    spec.momentum = 0.9;
    let m = train(&g, &x, &shift, &spec, &split).unwrap();
    let (pred, _) = predict(&m, &shift, &x).unwrap();
    let gcn_acc = accuracy(&pred, g.labels(), &split.test).unwrap();

    let mut fnn_spec = ModelSpec::sgc(0, lr, wd, epochs, split_mix(seed, 5));
    fnn_spec.momentum = 0.9;
    let fm = train(&g, &x, &shift, &fnn_spec, &split).unwrap();
    let (fpred, _) = predict(&fm, &shift, &x).unwrap();
    let fnn_acc = accuracy(&fpred, g.labels(), &split.test).unwrap();
    (gcn_acc, fnn_acc)
}

fn baseline_sweep() {
    for sigma2 in [5e-4, 1e-3, 2e-3] {
        for (lr, epochs) in [(0.5, 1000)] {
            for hidden in [64] {
                let results: Vec<(f64, f64)> = (0..10u64)
                    .into_par_iter()
                    .map(|seed| run_one(1000, 10.0, 0.5, sigma2, hidden, lr, 5e-4, epochs, seed))
                    .collect();
                let gm = results.iter().map(|r| r.0).sum::<f64>() / 10.0;
                let fm = results.iter().map(|r| r.1).sum::<f64>() / 10.0;
                let gmin = results.iter().map(|r| r.0).fold(f64::MAX, f64::min);
                let gmax = results.iter().map(|r| r.0).fold(f64::MIN, f64::max);
                println!(
                    "sigma2={sigma2:.0e} lr={lr} hid={hidden} ep={epochs}: GCN mean {gm:.3} [{gmin:.3},{gmax:.3}]  FNN mean {fm:.3}"
                );
            }
        }
    }
}

fn ushape() {
    let sigma2 = 1e-3;
    for h in [0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65] {
        let results: Vec<(f64, f64)> = (0..12u64)
            .into_par_iter()
            .map(|seed| run_one(1000, 10.0, h, sigma2, 64, 0.5, 5e-4, 1000, 1000 + seed))
            .collect();
        let gm = results.iter().map(|r| r.0).sum::<f64>() / 12.0;
        let fm = results.iter().map(|r| r.1).sum::<f64>() / 12.0;
        println!("h={h:.2}: GCN mean {gm:.4}  FNN mean {fm:.4}");
    }
}

fn bridge_calib() {
    use graph_snr::rewire::{bridge_best_involution, BridgeConfig, FeatureSource, SymmetricPermutation};
    let args: Vec<String> = std::env::args().collect();
    let sigma2: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let d_target: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(10.0);
    let epochs: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(1000);
    let params = FeatureParams::iid(5, sigma2, 1e-4, 1e-4).unwrap();
    let results: Vec<(f64, f64, f64, f64)> = (0..10u64)
        .into_par_iter()
        .map(|seed| {
            let sbm = planted_partition(2, 10.0, 0.5, 1000).unwrap();
            let g = sample_sbm(&sbm, None, split_mix(seed, 1)).unwrap();
            let x = sample_features(&g, &params, split_mix(seed, 2)).unwrap().x;
            let x = standardize(&x, &params);
            let split = Split::random(1000, 0.6, 0.2, split_mix(seed, 3));
            let mut spec = ModelSpec::gcn2(64, 0.5, 5e-4, epochs, 0);
            spec.momentum = 0.9;
            let mut cfg = BridgeConfig::new(spec, SymmetricPermutation::identity(2), d_target);
            cfg.iterations = 20;
            cfg.retrain_each_iteration = true;
            cfg.seed = split_mix(seed, 4);
            let state = bridge_best_involution(&g, &FeatureSource::Fixed(x), &cfg, &split).unwrap();
            let base = state.history[0].test_accuracy;
            let last = state.history.last().unwrap();
            (base, last.test_accuracy, state.history[0].h2, last.h2)
        })
        .collect();
    for (i, r) in results.iter().enumerate() {
        println!("seed {i}: base {:.3} post {:.3}  h2 {:.4} -> {:.4}", r.0, r.1, r.2, r.3);
    }
    let base_mean = results.iter().map(|r| r.0).sum::<f64>() / 10.0;
    let n_post = results.iter().filter(|r| r.1 >= 0.95).count();
    let n_h2 = results.iter().filter(|r| r.3 > r.2).count();
    println!("base mean {base_mean:.3}; post>=0.95 on {n_post}/10; h2 up on {n_h2}/10");
}
