//! TOML run configuration: defaults, merging, diagnostics and hashing.

use std::fs;
use std::path::{Path, PathBuf};

use nvreadout::classify::TrainConfig;
use nvreadout::dynamics::{sha256_hex, PhotonBudget, PulseTiming};
use nvreadout::eval::{Cell, ExperimentConfig};
use nvreadout::nvmodel::{Diagnostic, PhysicalParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Dataset sizes and seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub max_repetitions: usize,
    pub data_seed: u64,
    pub training_seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub grid_start: usize,
    pub grid_step: usize,
    /// Repetition counts at which networks are trained during `sweep-n`.
    pub ml_repetitions: Vec<usize>,
    pub cells: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscardConfig {
    /// Target discard ratios for the matched TM/ML curve.
    pub ratios: Vec<f64>,
    /// Explicit ML confidence margins, each in [0, 0.5).
    pub t: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlipConfig {
    pub bins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessConfig {
    /// Input length of the reference networks.
    pub reference_repetitions: usize,
    pub cells: Vec<Cell>,
}

/// Output location and worker count; these do not affect results and are
/// left out of the config hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub output: PathBuf,
    /// 0 means one worker per core.
    pub workers: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { output: PathBuf::from("nvreadout-out"), workers: 0 }
    }
}

/// A resolved configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub run: RunOptions,
    pub cell: Cell,
    pub params: PhysicalParams,
    pub timing: PulseTiming,
    pub budget: PhotonBudget,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub sweep: SweepConfig,
    pub discard: DiscardConfig,
    pub flips: FlipConfig,
    pub kmeans: KMeansConfig,
    pub robustness: RobustnessConfig,
}

fn grid_cells() -> Vec<Cell> {
    let mut cells = Vec::new();
    for a_perp in [-30.0, -40.0, -50.0] {
        for k_ion in [70.0, 90.0, 110.0] {
            cells.push(Cell { a_perp, k_ion });
        }
    }
    cells
}

impl Default for RunConfig {
    fn default() -> Self {
        let base = ExperimentConfig::default();
        RunConfig {
            run: RunOptions::default(),
            cell: Cell::REFERENCE,
            params: base.base,
            timing: base.timing,
            budget: base.budget,
            data: DataConfig {
                n_train: base.n_train,
                n_test: base.n_test,
                max_repetitions: base.max_repetitions,
                data_seed: base.data_seed,
                training_seeds: base.training_seeds,
            },
            train: base.train,
            sweep: SweepConfig { grid_start: 500, grid_step: 125, ml_repetitions: Vec::new(), cells: grid_cells() },
            discard: DiscardConfig { ratios: vec![0.0, 0.05, 0.1, 0.2, 0.3], t: vec![0.0, 0.1, 0.2, 0.3, 0.4] },
            flips: FlipConfig { bins: 10 },
            kmeans: KMeansConfig { k: 3, seed: 0 },
            robustness: RobustnessConfig {
                reference_repetitions: base.budget.repetitions,
                cells: vec![
                    Cell { a_perp: -40.0, k_ion: 90.0 },
                    Cell { a_perp: -30.0, k_ion: 90.0 },
                    Cell { a_perp: -50.0, k_ion: 100.0 },
                ],
            },
        }
    }
}

fn merge(base: &mut toml::Table, user: toml::Table) {
    for (key, value) in user {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Parses `text` over the defaults. Unknown keys become diagnostics; a
/// document that cannot be parsed or typed is an error.
pub fn parse(text: &str) -> Result<(RunConfig, Vec<Diagnostic>), Diagnostic> {
    let user: toml::Table = toml::from_str(text).map_err(|e| Diagnostic::new("", format!("TOML syntax: {}", e.message())))?;
    let mut merged = toml::Table::try_from(RunConfig::default()).expect("defaults serialize");
    merge(&mut merged, user);
    let mut unknown = Vec::new();
    let config: RunConfig = serde_ignored::deserialize(toml::Value::Table(merged), |path| {
        unknown.push(Diagnostic::new(path.to_string(), "unknown key"))
    })
    .map_err(|e| Diagnostic::new("", format!("schema: {e}")))?;
    Ok((config, unknown))
}

/// Reads and parses a config file. A missing or unreadable file is a config error.
pub fn load(path: &Path) -> Result<(RunConfig, Vec<Diagnostic>), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text).map_err(|d| CliError::Config(format!("{}: {}", path.display(), d.message)))
}

impl RunConfig {
    /// TOML of the result-determining part only, as written next to artifacts.
    pub fn to_toml_without_run(&self) -> String {
        let mut table = toml::Table::try_from(self).expect("config serializes");
        table.remove("run");
        toml::to_string(&table).expect("config serializes")
    }

    /// The repetition grid; a config error when it is empty.
    pub fn nonempty_grid(&self) -> Result<Vec<usize>, CliError> {
        let grid = self.grid();
        if grid.is_empty() {
            return Err(CliError::Config(format!(
                "sweep.grid_start {} exceeds data.max_repetitions {}",
                self.sweep.grid_start, self.data.max_repetitions
            )));
        }
        Ok(grid)
    }

    /// SHA-256 of the canonical JSON with `run` reset to its defaults.
    pub fn hash(&self) -> String {
        let canonical = RunConfig { run: RunOptions::default(), ..self.clone() };
        sha256_hex(serde_json::to_string(&canonical).expect("config serializes").as_bytes())
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        let e = self;
        ExperimentConfig {
            base: e.params.clone(),
            timing: e.timing.clone(),
            budget: e.budget,
            n_train: e.data.n_train,
            n_test: e.data.n_test,
            max_repetitions: e.data.max_repetitions,
            data_seed: e.data.data_seed,
            training_seeds: e.data.training_seeds.clone(),
            train: e.train.clone(),
        }
    }

    /// Repetition grid from `grid_start` to `max_repetitions`.
    pub fn grid(&self) -> Vec<usize> {
        let s = &self.sweep;
        (s.grid_start..=self.data.max_repetitions).step_by(s.grid_step.max(1)).collect()
    }

    /// Schema and physical-range checks.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let e = self;
        let mut out: Vec<Diagnostic> = e
            .params
            .diagnostics()
            .into_iter()
            .map(|d| Diagnostic::new(format!("params.{}", d.field), d.message))
            .collect();
        let mut check = |ok: bool, field: &str, message: String| {
            if !ok {
                out.push(Diagnostic::new(field, message));
            }
        };
        for (i, c) in e.sweep.cells.iter().chain(e.robustness.cells.iter()).chain([&e.cell]).enumerate() {
            check(c.a_perp.is_finite() && c.a_perp <= 0.0, "cell.a_perp", format!("must be finite and <= 0, got {} (cell {i})", c.a_perp));
            check(c.k_ion.is_finite() && c.k_ion > 0.0, "cell.k_ion", format!("must be finite and > 0, got {} (cell {i})", c.k_ion));
        }
        if let Err(err) = e.timing.validate() {
            check(false, "timing", err.to_string());
        }
        check(e.budget.total.is_finite() && e.budget.total > 0.0, "budget.total", format!("must be > 0, got {}", e.budget.total));
        check(e.budget.repetitions >= 1, "budget.repetitions", "must be >= 1".into());
        if let Err(err) = e.train.validate() {
            check(false, "train", err.to_string());
        }
        check(e.data.n_train >= 2, "data.n_train", format!("must be >= 2, got {}", e.data.n_train));
        check(e.data.n_test >= 2, "data.n_test", format!("must be >= 2, got {}", e.data.n_test));
        check(e.data.max_repetitions >= 1, "data.max_repetitions", "must be >= 1".into());
        check(!e.data.training_seeds.is_empty(), "data.training_seeds", "at least one seed is required".into());
        check(e.sweep.grid_start >= 1, "sweep.grid_start", "must be >= 1".into());
        check(e.sweep.grid_step >= 1, "sweep.grid_step", "must be >= 1".into());
        for &n in &e.sweep.ml_repetitions {
            check((1..=e.data.max_repetitions).contains(&n), "sweep.ml_repetitions", format!("{n} is outside 1..={}", e.data.max_repetitions));
        }
        for &r in &e.discard.ratios {
            check((0.0..1.0).contains(&r), "discard.ratios", format!("must lie in [0, 1), got {r}"));
        }
        for &t in &e.discard.t {
            check((0.0..0.5).contains(&t), "discard.t", format!("must lie in [0, 0.5), got {t}"));
        }
        check(e.flips.bins >= 1, "flips.bins", "must be >= 1".into());
        check(e.kmeans.k >= 1, "kmeans.k", "must be >= 1".into());
        check(e.robustness.reference_repetitions >= 1, "robustness.reference_repetitions", "must be >= 1".into());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_without_diagnostics() {
        let text = toml::to_string(&RunConfig::default()).unwrap();
        let (config, unknown) = parse(&text).unwrap();
        assert!(unknown.is_empty());
        assert_eq!(config, RunConfig::default());
        assert!(config.diagnostics().is_empty());
    }

    #[test]
    fn partial_sections_merge() {
        let (config, unknown) = parse("[params]\ncollection_efficiency = 0.2\n[data]\nn_train = 50\n").unwrap();
        assert!(unknown.is_empty());
        assert_eq!(config.params.collection_efficiency, 0.2);
        assert_eq!(config.params.k_r, 65.9);
        assert_eq!(config.data.n_train, 50);
        assert_eq!(config.data.n_test, 10_000);
    }

    #[test]
    fn unknown_keys_are_reported() {
        let (_, unknown) = parse("colour = 1\n[train]\nlr = 0.1\n").unwrap();
        let fields: Vec<&str> = unknown.iter().map(|d| d.field.as_str()).collect();
        assert_eq!(fields, ["colour", "train.lr"]);
    }

    #[test]
    fn hash_ignores_output_and_workers() {
        let a = RunConfig::default();
        let b = RunConfig { run: RunOptions { output: "elsewhere".into(), workers: 3 }, ..RunConfig::default() };
        assert_eq!(a.hash(), b.hash());
        let mut c = RunConfig::default();
        c.data.data_seed = 2;
        assert_ne!(a.hash(), c.hash());
    }
}
