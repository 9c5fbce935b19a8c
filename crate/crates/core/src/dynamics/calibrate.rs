use serde::{Deserialize, Serialize};

use super::ensemble::EnsemblePropagator;
use super::protocol::{PulseTiming, ReadoutModel};
use crate::error::{Error, Result};
use crate::nvmodel::{ElectronicLevel, Level, PhysicalParams};

/// Search bracket for `beta`.
pub const BETA_RANGE: (f64, f64) = (1e-4, 10.0);

/// Detected bright-state photons every parameter set is calibrated to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhotonBudget {
    pub total: f64,
    pub repetitions: usize,
}

impl Default for PhotonBudget {
    /// 0.4 detected photons per repetition at N = 2375.
    fn default() -> Self {
        PhotonBudget { total: 950.0, repetitions: 2375 }
    }
}

/// `template` with `beta` (and the (de)ionization rates) set to meet `budget`.
pub fn calibrated_params(template: &PhysicalParams, timing: &PulseTiming, budget: &PhotonBudget) -> Result<PhysicalParams> {
    let beta = calibrate_beta(template, timing, budget.total, budget.repetitions)?;
    template.with_beta(beta)
}

/// Ensemble-mean detected photons of a bright (`m_I = 0`) trajectory.
pub fn expected_bright_total(params: &PhysicalParams, timing: &PulseTiming, repetitions: usize) -> Result<f64> {
    let model = ReadoutModel::new(params, timing)?;
    let start = Level::new(ElectronicLevel::MinusGround(0), 0).unwrap();
    Ok(EnsemblePropagator::new(&model).expected_total(start, repetitions))
}

/// Finds the laser power `beta` at which a bright trajectory of `repetitions`
/// readouts yields `target_total` detected photons on average.
///
/// `k_ion` and `k_deion` keep their per-beta coefficients from `template`.
/// The objective is the master-equation mean, so the bisection is free of
/// sampling noise; it stops at 1e-6 relative error.
pub fn calibrate_beta(
    template: &PhysicalParams,
    timing: &PulseTiming,
    target_total: f64,
    repetitions: usize,
) -> Result<f64> {
    if !(target_total > 0.0) || !target_total.is_finite() {
        return Err(Error::InvalidParameter(format!("photon target must be positive, got {target_total}")));
    }
    if repetitions == 0 {
        return Err(Error::InvalidParameter("repetitions must be >= 1".into()));
    }
    let total = |beta: f64| -> Result<f64> { expected_bright_total(&template.with_beta(beta)?, timing, repetitions) };

    // The yield saturates and can turn over at high power (ionization), so
    // bracket the lowest crossing on a geometric grid before bisecting.
    let (beta_min, beta_max) = BETA_RANGE;
    let steps = 40;
    let ratio = (beta_max / beta_min).powf(1.0 / steps as f64);
    let mut lo = beta_min;
    let mut f_lo = total(lo)?;
    let mut hi = None;
    for k in 1..=steps {
        let beta = beta_min * ratio.powi(k);
        let f = total(beta)?;
        if f >= target_total {
            hi = Some(beta);
            break;
        }
        lo = beta;
        f_lo = f;
    }
    let Some(mut hi) = hi.filter(|_| f_lo <= target_total) else {
        return Err(Error::Calibration(format!(
            "target {target_total} photons not reachable for beta in [{beta_min}, {beta_max}] (max seen below target)"
        )));
    };
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let f = total(mid)?;
        if ((f - target_total) / target_total).abs() < 1e-6 {
            return Ok(mid);
        }
        if f < target_total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn larger_target_needs_more_power() {
        let p = PhysicalParams::default();
        let t = PulseTiming::default();
        let b1 = calibrate_beta(&p, &t, 100.0, 1000).unwrap();
        let b2 = calibrate_beta(&p, &t, 200.0, 1000).unwrap();
        assert!(b2 > b1);
        let realized = expected_bright_total(&p.with_beta(b1).unwrap(), &t, 1000).unwrap();
        assert!((realized / 100.0 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn unreachable_target_is_reported() {
        let p = PhysicalParams::default();
        let t = PulseTiming::default();
        assert!(matches!(calibrate_beta(&p, &t, 1e9, 10), Err(Error::Calibration(_))));
        assert!(matches!(calibrate_beta(&p, &t, -1.0, 10), Err(Error::InvalidParameter(_))));
    }
}
