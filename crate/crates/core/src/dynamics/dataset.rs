use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::protocol::{apply_cnot, simulate_readout_pulse, PulseTiming, ReadoutModel};
use crate::error::{Error, Result};
use crate::nvmodel::{ElectronicLevel, Level, PhysicalParams};

pub const FORMAT_VERSION: u32 = 1;
pub const RNG_SCHEME: &str = "splitmix64(seed,stream,index)->chacha8";

/// Initial nuclear state of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    /// `m_I = +1`.
    Dark,
    /// `m_I = 0`.
    Bright0,
    /// `m_I = -1`.
    BrightM1,
}

/// The readout decision: bright = `m_I ∈ {0, -1}`, dark = `m_I = +1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Dark,
    Bright,
}

impl Label {
    pub fn m_i(self) -> i8 {
        match self {
            Label::Dark => 1,
            Label::Bright0 => 0,
            Label::BrightM1 => -1,
        }
    }

    pub fn from_m_i(m_i: i8) -> Option<Label> {
        match m_i {
            1 => Some(Label::Dark),
            0 => Some(Label::Bright0),
            -1 => Some(Label::BrightM1),
            _ => None,
        }
    }

    pub fn class(self) -> Class {
        match self {
            Label::Dark => Class::Dark,
            _ => Class::Bright,
        }
    }
}

/// Net nuclear change across one repetition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipRecord {
    pub repetition: u32,
    pub from: i8,
    pub to: i8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    pub counts: Vec<u16>,
    pub label: Label,
    pub flips: Vec<FlipRecord>,
    pub seed: u64,
}

impl Trajectory {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn has_flip(&self) -> bool {
        !self.flips.is_empty()
    }

    pub fn first_flip(&self) -> Option<u32> {
        self.flips.first().map(|f| f.repetition)
    }

    /// First `repetitions` readouts; flips after the cut are dropped.
    pub fn truncated(&self, repetitions: usize) -> Trajectory {
        let n = repetitions.min(self.counts.len());
        Trajectory {
            counts: self.counts[..n].to_vec(),
            label: self.label,
            flips: self.flips.iter().copied().filter(|f| (f.repetition as usize) < n).collect(),
            seed: self.seed,
        }
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trace `index` in stream `stream` of a dataset with master `seed`.
/// Depends only on its arguments, so traces can be generated in any order.
pub fn trace_seed(seed: u64, stream: u64, index: u64) -> u64 {
    mix64(mix64(mix64(seed) ^ stream) ^ index)
}

pub fn simulate_trajectory(seed: u64, label: Label, repetitions: usize, model: &ReadoutModel) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = Level::new(ElectronicLevel::MinusGround(0), label.m_i()).unwrap();
    let mut counts = Vec::with_capacity(repetitions);
    let mut flips = Vec::new();
    for rep in 0..repetitions {
        let before = state.m_i();
        let outcome = simulate_readout_pulse(&mut rng, apply_cnot(state), model);
        counts.push(outcome.detected.min(u16::MAX as u32) as u16);
        state = outcome.end;
        if state.m_i() != before {
            flips.push(FlipRecord { repetition: rep as u32, from: before, to: state.m_i() });
        }
    }
    Trajectory { counts, label, flips, seed }
}

/// Class proportions of a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMix {
    pub dark: f64,
    pub bright0: f64,
    pub bright_m1: f64,
}

impl Default for ClassMix {
    fn default() -> Self {
        ClassMix { dark: 0.5, bright0: 0.25, bright_m1: 0.25 }
    }
}

impl ClassMix {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.dark, self.bright0, self.bright_m1];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("class mix must be probabilities summing to 1, got {parts:?}")));
        }
        Ok(())
    }

    /// Integer class sizes summing to `n`; the remainder goes to `bright_m1`.
    pub fn counts(&self, n: usize) -> ClassCounts {
        let dark = (self.dark * n as f64).round() as usize;
        let bright0 = ((self.bright0 * n as f64).round() as usize).min(n - dark);
        ClassCounts { dark, bright0, bright_m1: n - dark - bright0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub dark: usize,
    pub bright0: usize,
    pub bright_m1: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.dark + self.bright0 + self.bright_m1
    }
}

/// Everything needed to regenerate a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub n_traces: usize,
    pub repetitions: usize,
    pub classes: ClassCounts,
    pub params: PhysicalParams,
    pub timing: PulseTiming,
    pub seed: u64,
    pub stream: u64,
    pub rng_scheme: String,
    /// Repetition count of the dataset this one was truncated from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated_from: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub traces: Vec<Trajectory>,
}

/// Labels in generation order. Classes are interleaved so that every prefix
/// keeps close to the requested proportions.
fn label_sequence(classes: &ClassCounts) -> Vec<Label> {
    let n = classes.total();
    let targets = [
        (Label::Dark, classes.dark),
        (Label::Bright0, classes.bright0),
        (Label::BrightM1, classes.bright_m1),
    ];
    let mut assigned = [0usize; 3];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let deficit = |k: usize| (i + 1) as f64 * targets[k].1 as f64 / n as f64 - assigned[k] as f64;
        let k = (0..3)
            .filter(|&k| assigned[k] < targets[k].1)
            .max_by(|&a, &b| deficit(a).total_cmp(&deficit(b)).then(b.cmp(&a)))
            .expect("class counts sum to n");
        assigned[k] += 1;
        out.push(targets[k].0);
    }
    out
}

pub fn generate_dataset(
    seed: u64,
    stream: u64,
    n_traces: usize,
    repetitions: usize,
    mix: &ClassMix,
    model: &ReadoutModel,
) -> Result<Dataset> {
    if n_traces < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 traces, got {n_traces}")));
    }
    if repetitions == 0 {
        return Err(Error::InvalidParameter("repetitions must be >= 1".into()));
    }
    mix.validate()?;
    let classes = mix.counts(n_traces);
    let labels = label_sequence(&classes);
    let traces = labels
        .par_iter()
        .enumerate()
        .map(|(i, &label)| simulate_trajectory(trace_seed(seed, stream, i as u64), label, repetitions, model))
        .collect();
    Ok(Dataset {
        manifest: DatasetManifest {
            format_version: FORMAT_VERSION,
            n_traces,
            repetitions,
            classes,
            params: model.params.clone(),
            timing: model.timing.clone(),
            seed,
            stream,
            rng_scheme: RNG_SCHEME.to_string(),
            truncated_from: None,
        },
        traces,
    })
}

impl Dataset {
    /// Regenerates the traces described by the manifest.
    pub fn regenerate(manifest: &DatasetManifest) -> Result<Dataset> {
        let model = ReadoutModel::new(&manifest.params, &manifest.timing)?;
        let n = manifest.classes.total() as f64;
        let mix = ClassMix {
            dark: manifest.classes.dark as f64 / n,
            bright0: manifest.classes.bright0 as f64 / n,
            bright_m1: manifest.classes.bright_m1 as f64 / n,
        };
        let repetitions = manifest.truncated_from.unwrap_or(manifest.repetitions);
        let full = generate_dataset(manifest.seed, manifest.stream, manifest.n_traces, repetitions, &mix, &model)?;
        Ok(if manifest.truncated_from.is_some() { full.truncated(manifest.repetitions) } else { full })
    }

    pub fn repetitions(&self) -> usize {
        self.manifest.repetitions
    }

    pub fn truncated(&self, repetitions: usize) -> Dataset {
        let n = repetitions.min(self.manifest.repetitions);
        let mut manifest = self.manifest.clone();
        if n < self.manifest.repetitions {
            manifest.truncated_from = Some(self.manifest.truncated_from.unwrap_or(self.manifest.repetitions));
            manifest.repetitions = n;
        }
        Dataset { manifest, traces: self.traces.iter().map(|t| t.truncated(n)).collect() }
    }

    pub fn classes(&self) -> Vec<Class> {
        self.traces.iter().map(|t| t.label.class()).collect()
    }

    pub fn totals(&self) -> Vec<u64> {
        self.traces.iter().map(Trajectory::total).collect()
    }
}

/// Convenience for building the model and dataset in one call.
pub fn simulate_dataset(
    params: &PhysicalParams,
    timing: &PulseTiming,
    seed: u64,
    stream: u64,
    n_traces: usize,
    repetitions: usize,
) -> Result<Dataset> {
    let model = ReadoutModel::new(params, timing)?;
    generate_dataset(seed, stream, n_traces, repetitions, &ClassMix::default(), &model)
}
