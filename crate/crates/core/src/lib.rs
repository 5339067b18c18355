//! Feature-agnostic diagnostics for message-passing neural networks on
//! labelled graphs: class-bottlenecking scores, higher-order homophily,
//! signal/noise/global sensitivities with predicted SNR, stochastic block
//! model ensemble analytics, and block-resampling graph rewiring.

pub mod bottleneck;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod graph;
pub mod io;
pub mod model;
pub mod rewire;
pub mod rng;
pub mod sensitivity;
pub mod shift;
pub mod snr;
pub mod sparse;

pub use bottleneck::{bottleneck_scores, order_metrics, BottleneckScores, OrderMetrics};
pub use ensemble::{planted_partition, sample_sbm, EnsembleMetrics, SbmParams};
pub use error::{Error, Result};
pub use features::{local_noise_proportion, sample_features, FeatureParams, FeatureSample};
pub use graph::{build_graph, edge_homophily, node_homophily, weighted_homophily, Graph};
pub use model::{accuracy, confusion_matrix, predict, train, Arch, ModelSpec, Split, TrainedModel};
pub use rewire::{
    bridge, enumerate_involutions, optimal_block_matrix, optimum_value, BridgeConfig, BridgeState,
    SymmetricPermutation,
};
pub use sensitivity::{
    averaged_bounds, jacobian_norm_bound, model_jacobian_sensitivities, sensitivity_bounds,
    sgc_sensitivities, InputDims, LipschitzParams, SensitivityTriple,
};
pub use shift::{apply_power, shift_operator, Normalization, ShiftKind, ShiftOperator};
pub use snr::{
    empirical_snr, predict_snr, sensitivity_condition, SnrReport,
};
pub use sparse::CsrMatrix;
