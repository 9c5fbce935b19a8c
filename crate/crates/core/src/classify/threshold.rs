use serde::{Deserialize, Serialize};

use super::prediction::Prediction;
use crate::dynamics::Class;
use crate::error::{Error, Result};

/// Confidence band of the threshold method: totals strictly between
/// `dark_max` and `bright_min` are discarded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscardBand {
    pub dark_max: u64,
    pub bright_min: u64,
}

/// Threshold on the total photon count: bright iff `total > threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdModel {
    pub threshold: u64,
    pub band: Option<DiscardBand>,
}

impl ThresholdModel {
    pub fn new(threshold: u64) -> Self {
        ThresholdModel { threshold, band: None }
    }

    pub fn with_band(self, dark_max: u64, bright_min: u64) -> Result<Self> {
        if !(dark_max <= self.threshold && self.threshold <= bright_min) {
            return Err(Error::InvalidParameter(format!(
                "band must satisfy N_dark <= N_th <= N_bright, got {dark_max} <= {} <= {bright_min}",
                self.threshold
            )));
        }
        Ok(ThresholdModel { band: Some(DiscardBand { dark_max, bright_min }), ..self })
    }

    /// Band of half-width `w` centered between `threshold` and `threshold + 1`:
    /// discards the `2w` totals `threshold - w + 1 ..= threshold + w`.
    pub fn with_symmetric_band(self, w: u64) -> Self {
        let dark_max = self.threshold.saturating_sub(w);
        let bright_min = self.threshold + 1 + w;
        ThresholdModel { band: Some(DiscardBand { dark_max, bright_min }), ..self }
    }

    pub fn classify_total(&self, total: u64) -> Prediction {
        let class = if total > self.threshold { Class::Bright } else { Class::Dark };
        let mut p = Prediction::hard(class);
        if let Some(band) = self.band {
            p.discarded = band.dark_max < total && total < band.bright_min;
        }
        p
    }

    pub fn classify(&self, trace: &[u16]) -> Prediction {
        self.classify_total(trace.iter().map(|&c| c as u64).sum())
    }
}

/// Picks the integer threshold maximizing the balanced fidelity
/// `(F_bright + F_dark) / 2` on the training totals; ties go to the smaller
/// threshold.
pub fn fit_threshold(totals: &[u64], classes: &[Class]) -> Result<ThresholdModel> {
    if totals.len() != classes.len() {
        return Err(Error::LengthMismatch { expected: totals.len(), actual: classes.len() });
    }
    let n_bright = classes.iter().filter(|&&c| c == Class::Bright).count();
    let n_dark = classes.len() - n_bright;
    if n_bright == 0 || n_dark == 0 {
        return Err(Error::MissingClass);
    }

    let mut order: Vec<usize> = (0..totals.len()).collect();
    order.sort_by_key(|&i| totals[i]);

    // Start with every trace called bright: a threshold just below the smallest total.
    let lowest = totals[order[0]];
    let mut dark_correct = 0usize;
    let mut bright_correct = n_bright;
    let score = |dc: usize, bc: usize| 0.5 * (dc as f64 / n_dark as f64 + bc as f64 / n_bright as f64);
    let (mut best_threshold, mut best) = match lowest.checked_sub(1) {
        Some(t) => (t, score(dark_correct, bright_correct)),
        None => (0, f64::NEG_INFINITY),
    };

    let mut k = 0;
    while k < order.len() {
        let value = totals[order[k]];
        while k < order.len() && totals[order[k]] == value {
            match classes[order[k]] {
                Class::Dark => dark_correct += 1,
                Class::Bright => bright_correct -= 1,
            }
            k += 1;
        }
        let f = score(dark_correct, bright_correct);
        if f > best {
            best = f;
            best_threshold = value;
        }
    }
    Ok(ThresholdModel::new(best_threshold))
}
