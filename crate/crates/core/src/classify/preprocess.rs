use serde::{Deserialize, Serialize};

use crate::dynamics::{Class, Trajectory};

/// Running photon totals; the last element is the threshold-method total.
pub fn cumsum(trace: &[u16]) -> Vec<f64> {
    let mut acc = 0.0;
    trace
        .iter()
        .map(|&c| {
            acc += c as f64;
            acc
        })
        .collect()
}

/// Scale applied to cumulative sums before they enter the network.
///
/// Inputs are divided by the mean bright-state total of the training set,
/// which puts the final input near 1 for bright traces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub scale: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization { scale: 1.0 }
    }
}

impl Normalization {
    pub fn fit(traces: &[&Trajectory]) -> Self {
        let bright: Vec<f64> =
            traces.iter().filter(|t| t.label.class() == Class::Bright).map(|t| t.total() as f64).collect();
        let mean = if bright.is_empty() { 0.0 } else { bright.iter().sum::<f64>() / bright.len() as f64 };
        Normalization { scale: if mean > 0.0 { mean } else { 1.0 } }
    }

    pub fn apply(&self, trace: &[u16]) -> Vec<f64> {
        let inv = 1.0 / self.scale;
        cumsum(trace).into_iter().map(|x| x * inv).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumsum_examples() {
        assert_eq!(cumsum(&[0, 0, 0]), vec![0.0, 0.0, 0.0]);
        assert_eq!(cumsum(&[1, 0, 2, 1]), vec![1.0, 1.0, 3.0, 4.0]);
    }

    #[test]
    fn normalization_scales_to_bright_mean() {
        use crate::dynamics::Label;
        let t = |label, counts: Vec<u16>| Trajectory { counts, label, flips: vec![], seed: 0 };
        let a = t(Label::Bright0, vec![2, 2]);
        let b = t(Label::BrightM1, vec![4, 4]);
        let c = t(Label::Dark, vec![0, 1]);
        let n = Normalization::fit(&[&a, &b, &c]);
        assert_eq!(n.scale, 6.0);
        assert_eq!(n.apply(&[3, 3]), vec![0.5, 1.0]);

        let zero = t(Label::Bright0, vec![0, 0]);
        assert_eq!(Normalization::fit(&[&zero]).scale, 1.0);
    }
}
