//! Effective jump rates, the Monte-Carlo readout protocol and labeled
//! trajectory datasets.

pub mod averaging;
pub mod calibrate;
pub mod dataset;
pub mod ensemble;
pub mod format;
pub mod jump;
pub mod protocol;

pub use averaging::{build_effective_rates, effective_population_matrix, time_averaged_populations, EffectiveRateTable};
pub use calibrate::{calibrate_beta, calibrated_params, expected_bright_total, PhotonBudget, BETA_RANGE};
pub use dataset::{
    generate_dataset, simulate_dataset, simulate_trajectory, trace_seed, Class, ClassCounts, ClassMix, Dataset,
    DatasetManifest, FlipRecord, Label, Trajectory, FORMAT_VERSION, RNG_SCHEME,
};
pub use ensemble::{continuous_negative_fraction, EnsemblePropagator};
pub use format::{dataset_hash, manifest_hash, sha256_hex, decode_dataset, encode_dataset, read_dataset, write_dataset, write_dataset_csv};
pub use jump::{sample_jump, Jump, JumpTable, NuclearFlip};
pub use protocol::{apply_cnot, simulate_readout_pulse, PulseOutcome, PulseTiming, ReadoutModel};
