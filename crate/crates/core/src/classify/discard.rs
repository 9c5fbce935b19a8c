use super::prediction::Prediction;
use crate::error::{Error, Result};

/// Kept indices and realized discard ratio of a confidence filter.
#[derive(Clone, Debug, PartialEq)]
pub struct Filtered {
    pub kept: Vec<usize>,
    pub discard_ratio: f64,
}

/// Discards predictions whose winning probability lies in `(0.5 - t, 0.5 + t)`.
pub fn discard_filter_ml(predictions: &[Prediction], t: f64) -> Result<Filtered> {
    if !(0.0..0.5).contains(&t) {
        return Err(Error::InvalidParameter(format!("discard threshold t must be in [0, 0.5), got {t}")));
    }
    let kept: Vec<usize> = (0..predictions.len()).filter(|&i| predictions[i].confidence() >= 0.5 + t).collect();
    let discard_ratio = ratio(predictions.len() - kept.len(), predictions.len());
    Ok(Filtered { kept, discard_ratio })
}

/// Largest `t` that discards at most `target` of the predictions.
///
/// Ties in confidence make some ratios unreachable; the realized ratio is
/// then the closest one from below.
pub fn ml_threshold_for_ratio(predictions: &[Prediction], target: f64) -> f64 {
    if predictions.is_empty() || target <= 0.0 {
        return 0.0;
    }
    let mut conf: Vec<f64> = predictions.iter().map(|p| p.confidence()).collect();
    conf.sort_by(f64::total_cmp);
    let k = ((target * conf.len() as f64).round() as usize).min(conf.len() - 1);
    // Everything strictly below conf[k] is discarded.
    let t = conf[k] - 0.5;
    t.clamp(0.0, 0.5 - f64::EPSILON)
}

/// Indices of predictions not flagged as discarded (threshold-method bands).
pub fn kept_indices(predictions: &[Prediction]) -> Filtered {
    let kept: Vec<usize> = (0..predictions.len()).filter(|&i| !predictions[i].discarded).collect();
    let discard_ratio = ratio(predictions.len() - kept.len(), predictions.len());
    Filtered { kept, discard_ratio }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 { 0.0 } else { a as f64 / b as f64 }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preds(ps: &[f64]) -> Vec<Prediction> {
        ps.iter().map(|&p| Prediction::from_probabilities(1.0 - p, p)).collect()
    }

    #[test]
    fn zero_t_keeps_everything() {
        let p = preds(&[0.5, 0.51, 0.2, 0.99]);
        let f = discard_filter_ml(&p, 0.0).unwrap();
        assert_eq!(f.kept.len(), 4);
        assert_eq!(f.discard_ratio, 0.0);
    }

    #[test]
    fn band_excludes_uncertain() {
        let p = preds(&[0.55, 0.45, 0.2, 0.99, 0.7]);
        let f = discard_filter_ml(&p, 0.1).unwrap();
        assert_eq!(f.kept, vec![2, 3, 4]);
        assert!((f.discard_ratio - 0.4).abs() < 1e-12);
        assert!(discard_filter_ml(&p, 0.5).is_err());
        assert!(discard_filter_ml(&p, -0.1).is_err());
    }

    #[test]
    fn ratio_helper_hits_target() {
        let p = preds(&[0.55, 0.6, 0.7, 0.8, 0.9, 0.95, 0.1, 0.3, 0.42, 0.99]);
        let t = ml_threshold_for_ratio(&p, 0.3);
        let f = discard_filter_ml(&p, t).unwrap();
        assert!((f.discard_ratio - 0.3).abs() < 1e-12);
    }
}
