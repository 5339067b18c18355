//! Node feature sampling under the class-signal / global-shift / node-noise
//! decomposition, and the covariance parameters used by the SNR theory.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{rng_from_seed, Rng};

const PSD_EIGENVALUE_FLOOR: f64 = -1e-10;

/// Covariance parameters of the three feature components. The IID-scalar
/// mode uses sigma^2 I, phi^2 I, psi^2 I; the general mode carries full
/// symmetric PSD matrices. The two modes are constructed separately and
/// never mixed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum FeatureParams {
    Iid {
        d_in: usize,
        sigma2: f64,
        phi2: f64,
        psi2: f64,
    },
    General {
        sigma: DMatrix<f64>,
        phi: DMatrix<f64>,
        psi: DMatrix<f64>,
    },
}

impl FeatureParams {
    pub fn iid(d_in: usize, sigma2: f64, phi2: f64, psi2: f64) -> Result<Self> {
        for (name, v) in [("sigma2", sigma2), ("phi2", phi2), ("psi2", psi2)] {
            if v < 0.0 {
                return Err(Error::NegativeVariance { name, value: v });
            }
        }
        Ok(FeatureParams::Iid {
            d_in,
            sigma2,
            phi2,
            psi2,
        })
    }

    pub fn general(sigma: DMatrix<f64>, phi: DMatrix<f64>, psi: DMatrix<f64>) -> Result<Self> {
        for (name, m) in [("Sigma", &sigma), ("Phi", &phi), ("Psi", &psi)] {
            validate_psd(name, m)?;
        }
        let d = sigma.nrows();
        if phi.nrows() != d || psi.nrows() != d {
            return Err(Error::DimensionMismatch {
                context: "covariance dimensions",
                got: phi.nrows(),
                expected: d,
            });
        }
        Ok(FeatureParams::General { sigma, phi, psi })
    }

    pub fn d_in(&self) -> usize {
        match self {
            FeatureParams::Iid { d_in, .. } => *d_in,
            FeatureParams::General { sigma, .. } => sigma.nrows(),
        }
    }

    pub fn is_iid(&self) -> bool {
        matches!(self, FeatureParams::Iid { .. })
    }

    /// FNN-level SNR sigma^2 / (phi^2 + psi^2) for IID parameters.
    pub fn input_snr(&self) -> Result<f64> {
        match self {
            FeatureParams::Iid {
                sigma2, phi2, psi2, ..
            } => {
                if phi2 + psi2 == 0.0 {
                    return Err(Error::ZeroNoiseVariance);
                }
                Ok(sigma2 / (phi2 + psi2))
            }
            FeatureParams::General { .. } => Err(Error::MixedCovarianceMode),
        }
    }
}

fn validate_psd(name: &'static str, m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidCovariance { name });
    }
    let sym_err = (m - m.transpose()).abs().max();
    if sym_err > 1e-12 {
        return Err(Error::InvalidCovariance { name });
    }
    let eig = m.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l < PSD_EIGENVALUE_FLOOR) {
        return Err(Error::InvalidCovariance { name });
    }
    Ok(())
}

/// Local noise proportion rho = psi^2 / (phi^2 + psi^2).
pub fn local_noise_proportion(p: &FeatureParams) -> Result<f64> {
    match p {
        FeatureParams::Iid { phi2, psi2, .. } => {
            if phi2 + psi2 == 0.0 {
                return Err(Error::ZeroNoiseVariance);
            }
            Ok(psi2 / (phi2 + psi2))
        }
        FeatureParams::General { .. } => Err(Error::MixedCovarianceMode),
    }
}

/// One draw of the feature decomposition: X_j = mu_{y_j} + gamma + eps_j.
#[derive(Debug, Clone)]
pub struct FeatureSample {
    pub x: DMatrix<f64>,
    /// k x d_in class means drawn this sample.
    pub mu: DMatrix<f64>,
    pub gamma: DVector<f64>,
    pub eps: DMatrix<f64>,
}

/// Square-root factor of a PSD covariance for Gaussian sampling. Negative
/// eigenvalues within the floor are clipped to zero.
fn cov_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    &eig.eigenvectors * sqrt
}

fn gaussian_row(rng: &mut Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Samples features for every node of the graph. Class means are drawn
/// IID N(0, Sigma) per class, the global shift N(0, Phi) once, and node
/// noise N(0, Psi) per node. Deterministic under a fixed seed.
pub fn sample_features(g: &Graph, p: &FeatureParams, seed: u64) -> Result<FeatureSample> {
    let mut rng = rng_from_seed(seed);
    sample_features_with_rng(g, p, &mut rng)
}

pub fn sample_features_with_rng(g: &Graph, p: &FeatureParams, rng: &mut Rng) -> Result<FeatureSample> {
    let d = p.d_in();
    let (mu, gamma) = sample_mu_gamma(g.k(), p, rng);
    let eps = sample_noise(g.n(), p, rng);
    let mut x = DMatrix::zeros(g.n(), d);
    for (i, &y) in g.labels().iter().enumerate() {
        for q in 0..d {
            x[(i, q)] = mu[(y, q)] + gamma[q] + eps[(i, q)];
        }
    }
    Ok(FeatureSample { x, mu, gamma, eps })
}

/// Class means (k x d) and global shift, drawn independently.
pub fn sample_mu_gamma(k: usize, p: &FeatureParams, rng: &mut Rng) -> (DMatrix<f64>, DVector<f64>) {
    let d = p.d_in();
    match p {
        FeatureParams::Iid {
            sigma2, phi2, ..
        } => {
            let mu = DMatrix::from_fn(k, d, |_, _| {
                sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal)
            });
            let gamma = gaussian_row(rng, d) * phi2.sqrt();
            (mu, gamma)
        }
        FeatureParams::General { sigma, phi, .. } => {
            let fs = cov_factor(sigma);
            let fp = cov_factor(phi);
            let mut mu = DMatrix::zeros(k, d);
            for c in 0..k {
                let row = &fs * gaussian_row(rng, d);
                mu.row_mut(c).copy_from(&row.transpose());
            }
            let gamma = &fp * gaussian_row(rng, d);
            (mu, gamma)
        }
    }
}

/// Node noise matrix (n x d), IID rows.
pub fn sample_noise(n: usize, p: &FeatureParams, rng: &mut Rng) -> DMatrix<f64> {
    let d = p.d_in();
    match p {
        FeatureParams::Iid { psi2, .. } => DMatrix::from_fn(n, d, |_, _| {
            psi2.sqrt() * rng.sample::<f64, _>(StandardNormal)
        }),
        FeatureParams::General { psi, .. } => {
            let fp = cov_factor(psi);
            let mut eps = DMatrix::zeros(n, d);
            for i in 0..n {
                let row = &fp * gaussian_row(rng, d);
                eps.row_mut(i).copy_from(&row.transpose());
            }
            eps
        }
    }
}

/// Assembles X from components for fixed labels: X_j = mu_{y_j} + gamma + eps_j.
pub fn assemble_features(
    labels: &[usize],
    mu: &DMatrix<f64>,
    gamma: &DVector<f64>,
    eps: &DMatrix<f64>,
) -> DMatrix<f64> {
    let d = mu.ncols();
    DMatrix::from_fn(labels.len(), d, |i, q| {
        mu[(labels[i], q)] + gamma[q] + eps[(i, q)]
    })
}
