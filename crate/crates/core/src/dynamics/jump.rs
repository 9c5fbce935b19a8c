use rand::Rng;

use super::averaging::EffectiveRateTable;
use crate::error::{Error, Result};
use crate::nvmodel::{Level, NUM_LEVELS};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Channel {
    pub target: Level,
    pub rate: f64,
    pub photon_fraction: f64,
}

/// Sparse per-level view of an [`EffectiveRateTable`] for fast sampling.
#[derive(Clone, Debug)]
pub struct JumpTable {
    channels: Vec<Vec<Channel>>,
    totals: [f64; NUM_LEVELS],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NuclearFlip {
    pub from: i8,
    pub to: i8,
}

/// One incoherent jump out of a level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jump {
    /// Dwell time before the jump, µs.
    pub dwell: f64,
    pub next: Level,
    /// A photon left the defect; detection thinning is applied by the caller.
    pub photon_emitted: bool,
    pub nuclear_flip: Option<NuclearFlip>,
}

impl JumpTable {
    pub fn new(eff: &EffectiveRateTable) -> Self {
        let mut channels = Vec::with_capacity(NUM_LEVELS);
        let mut totals = [0.0; NUM_LEVELS];
        for from in Level::all() {
            let row: Vec<Channel> = Level::all()
                .filter(|&to| eff.rate(from, to) > 0.0)
                .map(|to| Channel {
                    target: to,
                    rate: eff.rate(from, to),
                    photon_fraction: eff.photon_fraction(from, to),
                })
                .collect();
            totals[from.index()] = row.iter().map(|c| c.rate).sum();
            channels.push(row);
        }
        JumpTable { channels, totals }
    }

    #[inline]
    pub fn total_rate(&self, level: Level) -> f64 {
        self.totals[level.index()]
    }

    pub fn channels(&self, level: Level) -> &[Channel] {
        &self.channels[level.index()]
    }

    pub fn is_absorbing(&self, level: Level) -> bool {
        self.totals[level.index()] == 0.0
    }
}

/// Draws the dwell time and destination of the next jump out of `from`.
pub fn sample_jump<R: Rng + ?Sized>(rng: &mut R, from: Level, table: &JumpTable) -> Result<Jump> {
    let total = table.total_rate(from);
    if total <= 0.0 {
        return Err(Error::AbsorbingState { level: from.index() });
    }
    let dwell = -(1.0 - rng.random::<f64>()).ln() / total;

    let channels = table.channels(from);
    let mut target = rng.random::<f64>() * total;
    let mut chosen = channels[channels.len() - 1];
    for c in channels {
        if target < c.rate {
            chosen = *c;
            break;
        }
        target -= c.rate;
    }

    let photon_emitted = match chosen.photon_fraction {
        f if f >= 1.0 => true,
        f if f <= 0.0 => false,
        f => rng.random::<f64>() < f,
    };
    let nuclear_flip = (chosen.target.m_i() != from.m_i())
        .then(|| NuclearFlip { from: from.m_i(), to: chosen.target.m_i() });

    Ok(Jump { dwell, next: chosen.target, photon_emitted, nuclear_flip })
}
