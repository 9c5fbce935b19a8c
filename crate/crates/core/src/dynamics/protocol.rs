//! The repetitive readout loop: CNOT, laser pulse, dark relaxation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::averaging::{effective_rates_from_populations, time_averaged_populations, EffectiveRateTable};
use super::jump::{sample_jump, JumpTable};
use crate::error::{Error, Result};
use crate::nvmodel::{
    build_hamiltonian, build_rate_matrix, build_relaxation_rate_matrix, ElectronicLevel, Level, PhysicalParams,
};

/// Laser timing of one readout repetition, µs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseTiming {
    pub readout: f64,
    pub relaxation: f64,
    /// Simulate the laser-off window after each pulse.
    pub relax: bool,
}

impl Default for PulseTiming {
    fn default() -> Self {
        PulseTiming { readout: 1.0, relaxation: 1.0, relax: true }
    }
}

impl PulseTiming {
    pub fn validate(&self) -> Result<()> {
        if !(self.readout > 0.0) || !self.readout.is_finite() {
            return Err(Error::InvalidParameter(format!("readout pulse must be > 0 µs, got {}", self.readout)));
        }
        if !(self.relaxation >= 0.0) || !self.relaxation.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "relaxation window must be >= 0 µs, got {}",
                self.relaxation
            )));
        }
        Ok(())
    }
}

/// Everything a trajectory worker needs; immutable and shared read-only.
#[derive(Clone, Debug)]
pub struct ReadoutModel {
    pub params: PhysicalParams,
    pub timing: PulseTiming,
    pub illuminated: EffectiveRateTable,
    pub dark: EffectiveRateTable,
    illuminated_jumps: JumpTable,
    dark_jumps: JumpTable,
}

impl ReadoutModel {
    pub fn new(params: &PhysicalParams, timing: &PulseTiming) -> Result<Self> {
        params.validate()?;
        timing.validate()?;
        let populations = time_averaged_populations(&build_hamiltonian(params))?;
        let illuminated = effective_rates_from_populations(populations, &build_rate_matrix(params)?);
        let dark = effective_rates_from_populations(populations, &build_relaxation_rate_matrix(params)?);
        Ok(ReadoutModel {
            params: params.clone(),
            timing: timing.clone(),
            illuminated_jumps: JumpTable::new(&illuminated),
            dark_jumps: JumpTable::new(&dark),
            illuminated,
            dark,
        })
    }

    pub fn illuminated_jumps(&self) -> &JumpTable {
        &self.illuminated_jumps
    }

    pub fn dark_jumps(&self) -> &JumpTable {
        &self.dark_jumps
    }
}

/// Result of one laser pulse plus the following relaxation window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseOutcome {
    pub detected: u32,
    pub end: Level,
    /// Number of nuclear projection changes during the pulse and relaxation.
    pub flips: u32,
}

/// Perfect CₙNOTₑ: swaps NV⁻ ground `|0,+1⟩ ↔ |+1,+1⟩`, identity elsewhere.
pub fn apply_cnot(state: Level) -> Level {
    use ElectronicLevel::MinusGround;
    match (state.electronic(), state.m_i()) {
        (MinusGround(0), 1) => Level::new(MinusGround(1), 1).unwrap(),
        (MinusGround(1), 1) => Level::new(MinusGround(0), 1).unwrap(),
        _ => state,
    }
}

/// Runs the jump process for `duration` µs; returns (detected photons, end level, flips).
fn evolve<R: Rng + ?Sized>(
    rng: &mut R,
    mut state: Level,
    table: &JumpTable,
    duration: f64,
    efficiency: f64,
    count_photons: bool,
) -> (u32, Level, u32) {
    let mut clock = 0.0;
    let mut detected = 0;
    let mut flips = 0;
    while !table.is_absorbing(state) {
        let jump = sample_jump(rng, state, table).expect("non-absorbing level");
        clock += jump.dwell;
        if clock > duration {
            break;
        }
        if count_photons && jump.photon_emitted && rng.random::<f64>() < efficiency {
            detected += 1;
        }
        if jump.nuclear_flip.is_some() {
            flips += 1;
        }
        state = jump.next;
    }
    (detected, state, flips)
}

/// One readout pulse from `state`. Photons are counted during the laser pulse
/// only; the relaxation window drains excited and singlet population.
pub fn simulate_readout_pulse<R: Rng + ?Sized>(rng: &mut R, state: Level, model: &ReadoutModel) -> PulseOutcome {
    let efficiency = model.params.collection_efficiency;
    let (detected, mut end, mut flips) =
        evolve(rng, state, &model.illuminated_jumps, model.timing.readout, efficiency, true);
    if model.timing.relax && model.timing.relaxation > 0.0 {
        let (_, relaxed, more) = evolve(rng, end, &model.dark_jumps, model.timing.relaxation, efficiency, false);
        end = relaxed;
        flips += more;
    }
    PulseOutcome { detected, end, flips }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cnot_maps() {
        use ElectronicLevel::*;
        let l = |e, m| Level::new(e, m).unwrap();
        assert_eq!(apply_cnot(l(MinusGround(0), 1)), l(MinusGround(1), 1));
        assert_eq!(apply_cnot(l(MinusGround(0), 0)), l(MinusGround(0), 0));
        assert_eq!(apply_cnot(l(MinusGround(0), -1)), l(MinusGround(0), -1));
        assert_eq!(apply_cnot(l(ZeroGround(1), 1)), l(ZeroGround(1), 1));
        for s in Level::all() {
            assert_eq!(apply_cnot(apply_cnot(s)), s);
        }
    }

    #[test]
    fn rejects_bad_timing() {
        let t = PulseTiming { readout: 0.0, ..PulseTiming::default() };
        assert!(ReadoutModel::new(&PhysicalParams::default(), &t).is_err());
    }
}
