//! Fidelity metrics and the experiment drivers built on them.

mod experiments;
mod metrics;
mod report;

pub use experiments::{
    cross_param_robustness, discard_curve, evaluate_threshold, flip_analysis, kmeans_analysis, prepare_cell,
    repetition_grid, sweep_parameters, sweep_repetitions, train_networks, Cell, CellData, CellSummary, DiscardPoint,
    ExperimentConfig, FirstFlipBin, FlipReport, KMeansGroupReport, RepetitionPoint, RepetitionSweep, RobustnessRow,
    TrainedNet,
};
pub use metrics::{
    accuracy_on, fidelity, fidelity_on, mean_std, Coordinates, Fidelity, FidelityReport, Method, RunFidelity,
};
pub use report::{
    rows, to_json, write_discard_series, write_flip_histogram, write_repetition_series, write_rows_csv, ReportRow,
    CSV_HEADER,
};
