use nalgebra::SMatrix;

use super::levels::{ElectronicLevel, Level, NUM_LEVELS};
use super::params::PhysicalParams;
use crate::error::Result;

pub type LevelMatrix = SMatrix<f64, NUM_LEVELS, NUM_LEVELS>;

/// Incoherent transition rates between model levels (MHz).
///
/// `rates[(m, n)]` is the rate from level `m` to level `n`. `photon` holds
/// the part of each rate that emits a detectable photon; it is nonzero only
/// on NV⁻ excited → ground radiative decays.
#[derive(Clone, Debug, PartialEq)]
pub struct RateMatrix {
    pub rates: LevelMatrix,
    pub photon: LevelMatrix,
}

impl RateMatrix {
    pub fn rate(&self, from: Level, to: Level) -> f64 {
        self.rates[(from.index(), to.index())]
    }

    pub fn is_photon_emitting(&self, from: Level, to: Level) -> bool {
        self.photon[(from.index(), to.index())] > 0.0
    }

    pub fn total_out_rate(&self, from: Level) -> f64 {
        self.rates.row(from.index()).sum()
    }

    fn add(&mut self, from: Level, to: Level, rate: f64, emits: bool) {
        if rate == 0.0 {
            return;
        }
        self.rates[(from.index(), to.index())] += rate;
        if emits {
            self.photon[(from.index(), to.index())] += rate;
        }
    }
}

fn level(e: ElectronicLevel, m_i: i8) -> Level {
    Level::new(e, m_i).expect("level table only uses valid projections")
}

fn assemble(params: &PhysicalParams, illuminated: bool) -> Result<RateMatrix> {
    use ElectronicLevel::*;
    params.validate()?;
    let mut r = RateMatrix { rates: LevelMatrix::zeros(), photon: LevelMatrix::zeros() };
    let pump = if illuminated { params.beta * params.k_r } else { 0.0 };
    let (k_ion, k_deion) = if illuminated { (params.k_ion, params.k_deion) } else { (0.0, 0.0) };

    for m_i in -1..=1 {
        let singlet = level(Singlet, m_i);
        for ms in -1..=1 {
            let gs = level(MinusGround(ms), m_i);
            let es = level(MinusExcited(ms), m_i);
            let (to_singlet, from_singlet) =
                if ms == 0 { (params.k_57, params.k_72) } else { (params.k_47, params.k_71) };
            r.add(gs, es, pump, false);
            r.add(es, gs, params.k_r, true);
            r.add(es, singlet, to_singlet, false);
            r.add(singlet, gs, from_singlet, false);
            r.add(es, level(ZeroGround(-1), m_i), k_ion * params.ion_branch_down, false);
            r.add(es, level(ZeroGround(1), m_i), k_ion * (1.0 - params.ion_branch_down), false);
        }
        for two_ms in [-1, 1] {
            let gs = level(ZeroGround(two_ms), m_i);
            let es = level(ZeroExcited(two_ms), m_i);
            r.add(gs, es, pump, false);
            r.add(es, gs, params.k_r, false);
            r.add(es, level(MinusGround(params.deion_ms), m_i), k_deion, false);
        }
    }
    Ok(r)
}

/// Rates under continuous laser illumination.
pub fn build_rate_matrix(params: &PhysicalParams) -> Result<RateMatrix> {
    assemble(params, true)
}

/// Rates with the laser off: no optical pumping and no (de)ionization.
pub fn build_relaxation_rate_matrix(params: &PhysicalParams) -> Result<RateMatrix> {
    assemble(params, false)
}
