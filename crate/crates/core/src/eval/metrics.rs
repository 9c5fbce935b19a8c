use serde::{Deserialize, Serialize};

use crate::classify::Prediction;
use crate::dynamics::{Class, Trajectory};
use crate::error::{Error, Result};

/// Balanced readout fidelity and its per-class parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub f: f64,
    pub f_bright: f64,
    pub f_dark: f64,
    pub n_bright: usize,
    pub n_dark: usize,
}

/// `F = (F_bright + F_dark) / 2` with per-class accuracies.
pub fn fidelity(predicted: &[Class], truth: &[Class]) -> Result<Fidelity> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch { expected: truth.len(), actual: predicted.len() });
    }
    let (mut nb, mut nd, mut cb, mut cd) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in predicted.iter().zip(truth) {
        match t {
            Class::Bright => {
                nb += 1;
                cb += (p == Class::Bright) as usize;
            }
            Class::Dark => {
                nd += 1;
                cd += (p == Class::Dark) as usize;
            }
        }
    }
    if nb == 0 || nd == 0 {
        return Err(Error::MissingClass);
    }
    let f_bright = cb as f64 / nb as f64;
    let f_dark = cd as f64 / nd as f64;
    Ok(Fidelity { f: 0.5 * (f_bright + f_dark), f_bright, f_dark, n_bright: nb, n_dark: nd })
}

/// Fidelity of `predictions` on the traces selected by `subset` (all when `None`).
pub fn fidelity_on(predictions: &[Prediction], traces: &[Trajectory], subset: Option<&[usize]>) -> Result<Fidelity> {
    if predictions.len() != traces.len() {
        return Err(Error::LengthMismatch { expected: traces.len(), actual: predictions.len() });
    }
    let all: Vec<usize>;
    let idx = match subset {
        Some(s) => s,
        None => {
            all = (0..traces.len()).collect();
            &all
        }
    };
    let p: Vec<Class> = idx.iter().map(|&i| predictions[i].class).collect();
    let t: Vec<Class> = idx.iter().map(|&i| traces[i].label.class()).collect();
    fidelity(&p, &t)
}

/// Fraction of correctly classified traces in `subset`, ignoring class balance.
pub fn accuracy_on(predictions: &[Prediction], traces: &[Trajectory], subset: &[usize]) -> Option<f64> {
    if subset.is_empty() {
        return None;
    }
    let correct = subset.iter().filter(|&&i| predictions[i].class == traces[i].label.class()).count();
    Some(correct as f64 / subset.len() as f64)
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Threshold,
    Network,
    /// A network trained on a different parameter set.
    TransferNetwork,
    KMeans,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Threshold => "tm",
            Method::Network => "ml",
            Method::TransferNetwork => "ml_r",
            Method::KMeans => "kmeans",
        }
    }
}

/// Where in the experiment space a report was taken.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coordinates {
    pub repetitions: usize,
    pub a_perp: f64,
    pub k_ion: f64,
    pub discard_ratio: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFidelity {
    /// Training seed; `None` for deterministic methods.
    pub seed: Option<u64>,
    pub f: f64,
    pub f_bright: f64,
    pub f_dark: f64,
    pub discard_ratio: f64,
}

/// Mean ± sample std over repeated runs of one method at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub method: Method,
    pub coordinates: Coordinates,
    /// `(f_bright + f_dark) / 2` of the means.
    pub f: f64,
    pub f_bright: f64,
    pub f_dark: f64,
    pub f_std: f64,
    pub f_bright_std: f64,
    pub f_dark_std: f64,
    pub n_test: usize,
    pub dataset_hash: String,
    pub runs: Vec<RunFidelity>,
}

impl FidelityReport {
    /// Aggregates runs; the discard-ratio coordinate becomes the mean realized ratio.
    pub fn from_runs(
        method: Method,
        mut coordinates: Coordinates,
        runs: Vec<RunFidelity>,
        n_test: usize,
        dataset_hash: &str,
    ) -> Self {
        let col = |g: fn(&RunFidelity) -> f64| runs.iter().map(g).collect::<Vec<f64>>();
        let (fb, fb_std) = mean_std(&col(|r| r.f_bright));
        let (fd, fd_std) = mean_std(&col(|r| r.f_dark));
        let (_, f_std) = mean_std(&col(|r| r.f));
        coordinates.discard_ratio = mean_std(&col(|r| r.discard_ratio)).0;
        FidelityReport {
            method,
            coordinates,
            f: 0.5 * (fb + fd),
            f_bright: fb,
            f_dark: fd,
            f_std,
            f_bright_std: fb_std,
            f_dark_std: fd_std,
            n_test,
            dataset_hash: dataset_hash.to_string(),
            runs,
        }
    }

    pub fn single(method: Method, coordinates: Coordinates, fid: Fidelity, discard_ratio: f64, n_test: usize, dataset_hash: &str) -> Self {
        let run = RunFidelity { seed: None, f: fid.f, f_bright: fid.f_bright, f_dark: fid.f_dark, discard_ratio };
        Self::from_runs(method, coordinates, vec![run], n_test, dataset_hash)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Class::*;

    #[test]
    fn class_averaged_examples() {
        let truth = [Bright, Bright, Dark, Dark];
        let all = fidelity(&truth, &truth).unwrap();
        assert_eq!((all.f, all.f_bright, all.f_dark), (1.0, 1.0, 1.0));
        let half = fidelity(&[Bright; 4], &truth).unwrap();
        assert_eq!((half.f, half.f_bright, half.f_dark), (0.5, 1.0, 0.0));
        assert!(matches!(fidelity(&[Dark], &[Dark]), Err(Error::MissingClass)));
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }
}
