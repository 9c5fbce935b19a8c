use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{accuracy_on, fidelity_on, Coordinates, Fidelity, FidelityReport, Method, RunFidelity};
use crate::classify::{
    discard_filter_ml, fit_threshold, kept_indices, kmeans_discard, kmeans_fit, ml_threshold_for_ratio,
    train_shallow_net, Prediction, ShallowNet, ThresholdModel, TrainConfig, TrainingLog,
};
use crate::dynamics::{
    calibrated_params, generate_dataset, manifest_hash, Class, ClassMix, Dataset, PhotonBudget, PulseTiming,
    ReadoutModel, Trajectory,
};
use crate::error::{Error, Result};
use crate::nvmodel::PhysicalParams;

/// One point of the (A_perp, k_ion) parameter grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// MHz; zero switches off nuclear flip-flops.
    pub a_perp: f64,
    /// Ionization rate per unit `beta`, MHz.
    pub k_ion: f64,
}

impl Cell {
    pub const REFERENCE: Cell = Cell { a_perp: -50.0, k_ion: 90.0 };

    /// `base` with this cell's coupling and ionization coefficient; the
    /// deionization/ionization ratio of `base` is kept.
    pub fn apply(&self, base: &PhysicalParams) -> Result<PhysicalParams> {
        if !(self.a_perp <= 0.0) || !(self.k_ion > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cell needs A_perp <= 0 and k_ion > 0, got ({}, {})",
                self.a_perp, self.k_ion
            )));
        }
        let mut p = base.clone();
        let deion_ratio = if base.k_ion > 0.0 { base.k_deion / base.k_ion } else { 2.0 };
        p.a_perp = self.a_perp;
        p.k_ion = self.k_ion * p.beta;
        p.k_deion = deion_ratio * p.k_ion;
        Ok(p)
    }
}

/// Shared settings of every experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub base: PhysicalParams,
    pub timing: PulseTiming,
    pub budget: PhotonBudget,
    pub n_train: usize,
    pub n_test: usize,
    /// Longest trace simulated per cell; shorter N are truncations of it.
    pub max_repetitions: usize,
    pub data_seed: u64,
    pub training_seeds: Vec<u64>,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            base: PhysicalParams::default(),
            timing: PulseTiming::default(),
            budget: PhotonBudget::default(),
            n_train: 10_000,
            n_test: 10_000,
            max_repetitions: 8000,
            data_seed: 1,
            training_seeds: (0..10).collect(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Small configuration that runs in seconds.
    pub fn desk() -> Self {
        ExperimentConfig {
            n_train: 2000,
            n_test: 1000,
            max_repetitions: 1000,
            training_seeds: (0..5).collect(),
            ..Default::default()
        }
    }
}

/// Default repetition grid: multiples of 125 from 500 to `max`.
pub fn repetition_grid(max: usize) -> Vec<usize> {
    (500..=max).step_by(125).collect()
}

/// Calibrated parameters with training and test sets for one cell.
#[derive(Clone, Debug)]
pub struct CellData {
    pub cell: Cell,
    pub params: PhysicalParams,
    pub train: Dataset,
    pub test: Dataset,
}

impl CellData {
    pub fn truncated(&self, repetitions: usize) -> Result<CellData> {
        if repetitions == 0 || repetitions > self.train.repetitions() {
            return Err(Error::InvalidParameter(format!(
                "cannot truncate {}-repetition traces to {repetitions}",
                self.train.repetitions()
            )));
        }
        Ok(CellData {
            cell: self.cell,
            params: self.params.clone(),
            train: self.train.truncated(repetitions),
            test: self.test.truncated(repetitions),
        })
    }

    pub fn repetitions(&self) -> usize {
        self.test.repetitions()
    }

    pub fn test_hash(&self) -> Result<String> {
        manifest_hash(&self.test.manifest)
    }

    fn coordinates(&self, discard_ratio: f64) -> Coordinates {
        Coordinates { repetitions: self.repetitions(), a_perp: self.cell.a_perp, k_ion: self.cell.k_ion, discard_ratio }
    }
}

/// Calibrates `beta` for the cell (before anything else) and simulates
/// training (stream 0) and test (stream 1) sets of `repetitions` readouts.
pub fn prepare_cell(cell: Cell, repetitions: usize, cfg: &ExperimentConfig) -> Result<CellData> {
    let template = cell.apply(&cfg.base)?;
    let params = calibrated_params(&template, &cfg.timing, &cfg.budget)?;
    let model = ReadoutModel::new(&params, &cfg.timing)?;
    let mix = ClassMix::default();
    let train = generate_dataset(cfg.data_seed, 0, cfg.n_train, repetitions, &mix, &model)?;
    let test = generate_dataset(cfg.data_seed, 1, cfg.n_test, repetitions, &mix, &model)?;
    Ok(CellData { cell, params, train, test })
}

fn counts(traces: &[Trajectory]) -> Vec<&[u16]> {
    traces.iter().map(|t| t.counts.as_slice()).collect()
}

/// Threshold fitted on the training totals, with its test predictions.
pub fn evaluate_threshold(data: &CellData) -> Result<(ThresholdModel, Vec<Prediction>, Fidelity)> {
    let tm = fit_threshold(&data.train.totals(), &data.train.classes())?;
    let preds: Vec<Prediction> = data.test.traces.iter().map(|t| tm.classify(&t.counts)).collect();
    let fid = fidelity_on(&preds, &data.test.traces, None)?;
    Ok((tm, preds, fid))
}

/// A trained network with its test predictions.
#[derive(Clone, Debug)]
pub struct TrainedNet {
    pub seed: u64,
    pub net: ShallowNet,
    pub log: TrainingLog,
    pub predictions: Vec<Prediction>,
    pub fidelity: Fidelity,
}

/// Trains one network per seed (concurrently) and scores each on the test set.
pub fn train_networks(data: &CellData, cfg: &ExperimentConfig) -> Result<Vec<TrainedNet>> {
    let train: Vec<&Trajectory> = data.train.traces.iter().collect();
    let test = counts(&data.test.traces);
    cfg.training_seeds
        .par_iter()
        .map(|&seed| {
            let tc = TrainConfig { seed, ..cfg.train.clone() };
            let (net, log) = train_shallow_net(&train, &tc)?;
            let predictions = net.predict_batch(&test)?;
            let fidelity = fidelity_on(&predictions, &data.test.traces, None)?;
            Ok(TrainedNet { seed, net, log, predictions, fidelity })
        })
        .collect()
}

fn run(seed: Option<u64>, f: &Fidelity, discard_ratio: f64) -> RunFidelity {
    RunFidelity { seed, f: f.f, f_bright: f.f_bright, f_dark: f.f_dark, discard_ratio }
}

fn network_report(data: &CellData, nets: &[TrainedNet], method: Method) -> Result<FidelityReport> {
    let runs = nets.iter().map(|n| run(Some(n.seed), &n.fidelity, 0.0)).collect();
    Ok(FidelityReport::from_runs(method, data.coordinates(0.0), runs, data.test.traces.len(), &data.test_hash()?))
}

fn threshold_report(data: &CellData, fid: &Fidelity) -> Result<FidelityReport> {
    Ok(FidelityReport::single(Method::Threshold, data.coordinates(0.0), *fid, 0.0, data.test.traces.len(), &data.test_hash()?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionPoint {
    pub repetitions: usize,
    pub tm: FidelityReport,
    pub ml: Option<FidelityReport>,
}

/// Fidelity against the number of repetitions for one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionSweep {
    pub cell: Cell,
    pub beta: f64,
    pub points: Vec<RepetitionPoint>,
    /// Argmax of the threshold fidelity; ties go to the smaller N.
    pub n_opt: usize,
    /// All points are truncations of one dataset per split.
    pub source_train_hash: String,
    pub source_test_hash: String,
}

impl RepetitionSweep {
    pub fn point(&self, repetitions: usize) -> Option<&RepetitionPoint> {
        self.points.iter().find(|p| p.repetitions == repetitions)
    }
}

/// Threshold fidelity at every N of `grid` and network fidelity at every N of
/// `ml_grid`, all on truncations of `data`.
pub fn sweep_repetitions(data: &CellData, grid: &[usize], ml_grid: &[usize], cfg: &ExperimentConfig) -> Result<RepetitionSweep> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("repetition grid is empty".into()));
    }
    let mut ns: Vec<usize> = grid.iter().chain(ml_grid).copied().collect();
    ns.sort_unstable();
    ns.dedup();
    let mut points = Vec::with_capacity(ns.len());
    let mut best: Option<(f64, usize)> = None;
    for &n in &ns {
        let d = data.truncated(n)?;
        let (_, _, fid) = evaluate_threshold(&d)?;
        if grid.contains(&n) && best.is_none_or(|(f, _)| fid.f > f) {
            best = Some((fid.f, n));
        }
        let ml = if ml_grid.contains(&n) { Some(network_report(&d, &train_networks(&d, cfg)?, Method::Network)?) } else { None };
        points.push(RepetitionPoint { repetitions: n, tm: threshold_report(&d, &fid)?, ml });
    }
    Ok(RepetitionSweep {
        cell: data.cell,
        beta: data.params.beta,
        points,
        n_opt: best.map(|b| b.1).unwrap_or(grid[0]),
        source_train_hash: manifest_hash(&data.train.manifest)?,
        source_test_hash: manifest_hash(&data.test.manifest)?,
    })
}

/// Summary of one cell of the parameter grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: Cell,
    pub beta: f64,
    pub n_opt: usize,
    pub tm_at_opt: FidelityReport,
    pub ml_at_opt: FidelityReport,
    pub ml_at_max: FidelityReport,
}

/// Calibrates each cell, finds its threshold optimum on `grid`, then trains
/// networks at the optimum and at `cfg.max_repetitions`.
pub fn sweep_parameters(cells: &[Cell], grid: &[usize], cfg: &ExperimentConfig) -> Result<Vec<CellSummary>> {
    cells
        .iter()
        .map(|&cell| {
            let data = prepare_cell(cell, cfg.max_repetitions, cfg)?;
            let tm_sweep = sweep_repetitions(&data, grid, &[], cfg)?;
            let at_opt = data.truncated(tm_sweep.n_opt)?;
            let ml_at_opt = network_report(&at_opt, &train_networks(&at_opt, cfg)?, Method::Network)?;
            let ml_at_max = network_report(&data, &train_networks(&data, cfg)?, Method::Network)?;
            let tm_at_opt = tm_sweep.point(tm_sweep.n_opt).expect("n_opt is a grid point").tm.clone();
            Ok(CellSummary { cell, beta: data.params.beta, n_opt: tm_sweep.n_opt, tm_at_opt, ml_at_opt, ml_at_max })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscardPoint {
    pub target_ratio: f64,
    /// Half-width of the threshold band realizing the ratio.
    pub band_half_width: u64,
    pub tm: FidelityReport,
    /// Networks filtered to the threshold band's realized ratio.
    pub ml: FidelityReport,
}

/// Kept-set fidelity against discard ratio for both methods.
pub fn discard_curve(data: &CellData, nets: &[TrainedNet], targets: &[f64]) -> Result<Vec<DiscardPoint>> {
    let tm = fit_threshold(&data.train.totals(), &data.train.classes())?;
    let totals = data.test.totals();
    let hash = data.test_hash()?;
    let n_test = totals.len();
    let max_total = totals.iter().copied().max().unwrap_or(0);

    // Realized ratio for each half-width until everything is discarded.
    let mut widths = Vec::new();
    for w in 0..=max_total + 1 {
        let banded = tm.with_symmetric_band(w);
        let ratio = totals.iter().filter(|&&t| banded.classify_total(t).discarded).count() as f64 / n_test as f64;
        widths.push((w, ratio));
        if ratio >= 1.0 {
            break;
        }
    }

    targets
        .iter()
        .map(|&target| {
            let &(w, _) = widths
                .iter()
                .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
                .expect("at least one width");
            let banded = tm.with_symmetric_band(w);
            let tm_preds: Vec<Prediction> = totals.iter().map(|&t| banded.classify_total(t)).collect();
            let kept = kept_indices(&tm_preds);
            let fid = fidelity_on(&tm_preds, &data.test.traces, Some(&kept.kept))?;
            let tm_report = FidelityReport::single(Method::Threshold, data.coordinates(kept.discard_ratio), fid, kept.discard_ratio, n_test, &hash);

            let runs = nets
                .iter()
                .map(|n| {
                    let t = ml_threshold_for_ratio(&n.predictions, kept.discard_ratio);
                    let filtered = discard_filter_ml(&n.predictions, t)?;
                    let fid = fidelity_on(&n.predictions, &data.test.traces, Some(&filtered.kept))?;
                    Ok(run(Some(n.seed), &fid, filtered.discard_ratio))
                })
                .collect::<Result<Vec<_>>>()?;
            let ml_report = FidelityReport::from_runs(Method::Network, data.coordinates(0.0), runs, n_test, &hash);
            Ok(DiscardPoint { target_ratio: target, band_half_width: w, tm: tm_report, ml: ml_report })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstFlipBin {
    pub start: usize,
    pub end: usize,
    pub ml_correct: usize,
    pub ml_wrong: usize,
}

/// How the two methods fare on traces with and without nuclear flips.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlipReport {
    pub repetitions: usize,
    pub n_traces: usize,
    pub n_flip: usize,
    pub tm_correct_flip: Option<f64>,
    pub ml_correct_flip: Option<f64>,
    pub tm_wrong_flip: Option<f64>,
    pub tm_correct_no_flip: Option<f64>,
    pub ml_correct_no_flip: Option<f64>,
    pub median_first_flip_ml_wrong: Option<f64>,
    pub median_first_flip_ml_correct: Option<f64>,
    pub histogram: Vec<FirstFlipBin>,
}

fn median(mut v: Vec<u32>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_unstable();
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] as f64 } else { 0.5 * (v[n / 2 - 1] as f64 + v[n / 2] as f64) })
}

/// Splits traces by whether a flip happened and by network correctness.
pub fn flip_analysis(traces: &[Trajectory], tm: &[Prediction], ml: &[Prediction], bins: usize) -> Result<FlipReport> {
    for p in [tm, ml] {
        if p.len() != traces.len() {
            return Err(Error::LengthMismatch { expected: traces.len(), actual: p.len() });
        }
    }
    let flip: Vec<usize> = (0..traces.len()).filter(|&i| traces[i].has_flip()).collect();
    let no_flip: Vec<usize> = (0..traces.len()).filter(|&i| !traces[i].has_flip()).collect();
    let repetitions = traces.first().map_or(0, |t| t.counts.len());
    let ml_ok = |i: usize| ml[i].class == traces[i].label.class();

    let first = |want: bool| flip.iter().filter(|&&i| ml_ok(i) == want).filter_map(|&i| traces[i].first_flip()).collect::<Vec<u32>>();
    let bins = bins.max(1);
    let width = repetitions.div_ceil(bins).max(1);
    let mut histogram: Vec<FirstFlipBin> = (0..bins)
        .map(|b| FirstFlipBin { start: b * width, end: ((b + 1) * width).min(repetitions), ml_correct: 0, ml_wrong: 0 })
        .collect();
    for &i in &flip {
        if let Some(r) = traces[i].first_flip() {
            let bin = &mut histogram[(r as usize / width).min(bins - 1)];
            if ml_ok(i) { bin.ml_correct += 1 } else { bin.ml_wrong += 1 }
        }
    }

    let tm_correct_flip = accuracy_on(tm, traces, &flip);
    Ok(FlipReport {
        repetitions,
        n_traces: traces.len(),
        n_flip: flip.len(),
        tm_correct_flip,
        ml_correct_flip: accuracy_on(ml, traces, &flip),
        tm_wrong_flip: tm_correct_flip.map(|a| 1.0 - a),
        tm_correct_no_flip: accuracy_on(tm, traces, &no_flip),
        ml_correct_no_flip: accuracy_on(ml, traces, &no_flip),
        median_first_flip_ml_wrong: median(first(false)),
        median_first_flip_ml_correct: median(first(true)),
        histogram,
    })
}

/// One row of the transfer comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub cell: Cell,
    pub n_opt: usize,
    pub tm: FidelityReport,
    pub ml_native: FidelityReport,
    pub network_r: FidelityReport,
}

/// Scores networks trained on one cell (`reference`) against threshold and
/// natively trained networks on other cells, each at its own optimum.
///
/// The reference networks see the test traces truncated to their input
/// length; shorter traces are an error, never padded.
pub fn cross_param_robustness(reference: &[TrainedNet], cells: &[Cell], grid: &[usize], cfg: &ExperimentConfig) -> Result<Vec<RobustnessRow>> {
    let n_r = reference.first().map(|n| n.net.n_inputs()).ok_or_else(|| Error::InvalidParameter("no reference networks".into()))?;
    cells
        .iter()
        .map(|&cell| {
            let max = grid.iter().copied().max().unwrap_or(n_r).max(n_r);
            let data = prepare_cell(cell, max, cfg)?;
            let n_opt = sweep_repetitions(&data, grid, &[], cfg)?.n_opt;
            let at_opt = data.truncated(n_opt)?;
            let (_, _, tm_fid) = evaluate_threshold(&at_opt)?;
            let tm = threshold_report(&at_opt, &tm_fid)?;
            let ml_native = network_report(&at_opt, &train_networks(&at_opt, cfg)?, Method::Network)?;

            let for_r = data.truncated(n_r)?;
            let test = counts(&for_r.test.traces);
            let runs = reference
                .iter()
                .map(|r| {
                    let preds = r.net.predict_batch(&test)?;
                    Ok(run(Some(r.seed), &fidelity_on(&preds, &for_r.test.traces, None)?, 0.0))
                })
                .collect::<Result<Vec<_>>>()?;
            let network_r = FidelityReport::from_runs(Method::TransferNetwork, at_opt.coordinates(0.0), runs, for_r.test.traces.len(), &at_opt.test_hash()?);
            Ok(RobustnessRow { cell, n_opt, tm, ml_native, network_r })
        })
        .collect()
}

/// Effect of dropping the smallest k-means subgroup inside one threshold-assigned group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansGroupReport {
    pub group: Class,
    pub k: usize,
    pub n_group: usize,
    /// Fraction of the group whose true class matches the group.
    pub accuracy_before: f64,
    pub accuracy_after: f64,
    pub discard_ratio: f64,
    pub flip_fraction_group: f64,
    pub flip_fraction_discarded: f64,
    pub cluster_sizes: Vec<usize>,
}

/// Clusters the test traces the threshold assigns to `group` and removes the
/// smallest cluster. Accuracy is the purity of the group.
pub fn kmeans_analysis(data: &CellData, group: Class, k: usize, seed: u64) -> Result<KMeansGroupReport> {
    let (_, preds, _) = evaluate_threshold(data)?;
    let members: Vec<usize> = (0..preds.len()).filter(|&i| preds[i].class == group).collect();
    let traces = &data.test.traces;
    let member_counts: Vec<&[u16]> = members.iter().map(|&i| traces[i].counts.as_slice()).collect();
    let model = kmeans_fit(&member_counts, k, seed)?;
    let result = kmeans_discard(&model, &member_counts)?;

    let purity = |idx: &mut dyn Iterator<Item = usize>| {
        let (mut n, mut ok) = (0usize, 0usize);
        for i in idx {
            n += 1;
            ok += (traces[i].label.class() == group) as usize;
        }
        if n == 0 { 0.0 } else { ok as f64 / n as f64 }
    };
    let flip_fraction = |idx: &mut dyn Iterator<Item = usize>| {
        let (mut n, mut f) = (0usize, 0usize);
        for i in idx {
            n += 1;
            f += traces[i].has_flip() as usize;
        }
        if n == 0 { 0.0 } else { f as f64 / n as f64 }
    };
    let discarded = (0..members.len()).filter(|&j| result.assignments[j] == result.discarded_cluster);
    Ok(KMeansGroupReport {
        group,
        k,
        n_group: members.len(),
        accuracy_before: purity(&mut members.iter().copied()),
        accuracy_after: purity(&mut result.kept.iter().map(|&j| members[j])),
        discard_ratio: result.discard_ratio,
        flip_fraction_group: flip_fraction(&mut members.iter().copied()),
        flip_fraction_discarded: flip_fraction(&mut discarded.map(|j| members[j])),
        cluster_sizes: result.cluster_sizes,
    })
}
