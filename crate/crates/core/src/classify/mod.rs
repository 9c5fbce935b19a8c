//! Trace discrimination: photon-count threshold, shallow network on
//! cumulative sums, k-means subgroup removal and confidence filters.

mod discard;
mod kmeans;
mod model_io;
mod net;
mod prediction;
mod preprocess;
mod threshold;

pub use discard::{discard_filter_ml, kept_indices, ml_threshold_for_ratio, Filtered};
pub use kmeans::{kmeans_discard, kmeans_fit, KMeansDiscard, KMeansModel, DEFAULT_K, MAX_ITERATIONS};
pub use model_io::{
    decode_net, encode_net, read_net, sidecar_for, sidecar_path, write_net, NetSidecar, NET_FORMAT_VERSION, NET_MAGIC,
};
pub use net::{
    feature_matrix, hidden_width, split_indices, train_shallow_net, EpochLog, Gradient, ShallowNet, TrainConfig,
    TrainingLog, BRIGHT_OUTPUT, DARK_OUTPUT,
};
pub use prediction::Prediction;
pub use preprocess::{cumsum, Normalization};
pub use threshold::{fit_threshold, DiscardBand, ThresholdModel};
