//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node id {id} out of range for {n} nodes")]
    NodeOutOfRange { id: usize, n: usize },

    #[error("label length {got} does not match node count {expected}")]
    LabelLengthMismatch { got: usize, expected: usize },

    #[error("feature matrix has {got} rows, expected {expected}")]
    FeatureRowMismatch { got: usize, expected: usize },

    #[error("label {label} at node {node} out of range for {k} classes")]
    LabelOutOfRange { node: usize, label: usize, k: usize },

    #[error("graph has no edges")]
    EmptyEdgeSet,

    #[error("graph is empty")]
    EmptyGraph,

    #[error("degree-normalized operator undefined: isolated nodes {nodes:?}")]
    DegenerateDegree { nodes: Vec<usize> },

    #[error("dimension mismatch: {context} (got {got}, expected {expected})")]
    DimensionMismatch {
        context: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("covariance matrix {name} is not symmetric positive semidefinite")]
    InvalidCovariance { name: &'static str },

    #[error("variance {name} must be non-negative, got {value}")]
    NegativeVariance { name: &'static str, value: f64 },

    #[error("local noise proportion undefined: phi^2 + psi^2 = 0")]
    ZeroNoiseVariance,

    #[error("mixed IID-scalar and general-matrix covariance modes are not supported")]
    MixedCovarianceMode,

    #[error("block matrix entry {value} exceeds node count {n} (edge probability > 1)")]
    ProbabilityOverflow { value: f64, n: usize },

    #[error("invalid block model: {reason}")]
    InvalidBlockModel { reason: String },

    #[error("invalid confusion matrix: {reason}")]
    InvalidConfusion { reason: String },

    #[error("class proportion vector must be strictly positive (class {class})")]
    ZeroClassProportion { class: usize },

    #[error("Poisson rate must be positive, got {0}")]
    NonPositiveRate(f64),

    #[error("involution enumeration limited to k <= {limit}, got {k}")]
    InvolutionLimit { k: usize, limit: usize },

    #[error("mapping is not an involution")]
    NotInvolution,

    #[error("training diverged at epoch {epoch}: non-finite loss with lr = {lr}")]
    Divergence { epoch: usize, lr: f64 },

    #[error("invalid model spec: {reason}")]
    InvalidModelSpec { reason: String },

    #[error("invalid split: {reason}")]
    InvalidSplit { reason: String },

    #[error("operator is asymmetric; use the general (r, s) form")]
    AsymmetricOperator,

    #[error("dense fallback limited to n <= {limit}, got {n}; use the row-query form")]
    DenseSizeLimit { n: usize, limit: usize },

    #[error("unreachable class pair ({u}, {v}) at order {r}: zero denominator")]
    UnreachableClassPair { u: usize, v: usize, r: usize },

    #[error("Monte-Carlo replicate counts must be >= 2 (got N_mu = {n_mu}, N_ge = {n_ge})")]
    TooFewReplicates { n_mu: usize, n_ge: usize },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
