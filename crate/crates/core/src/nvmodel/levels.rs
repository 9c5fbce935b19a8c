//! The 33-level basis: 11 electronic levels of the NV⁻/NV⁰ system times the
//! three projections of the ¹⁴N nuclear spin (I = 1).

use std::fmt;

use serde::{Deserialize, Serialize};

pub const NUM_ELECTRONIC: usize = 11;
pub const NUM_NUCLEAR: usize = 3;
pub const NUM_LEVELS: usize = NUM_ELECTRONIC * NUM_NUCLEAR;

/// Electronic part of a model level.
///
/// Triplet levels carry `m_s ∈ {-1, 0, +1}`. The NV⁰ doublet levels carry
/// `2·m_s ∈ {-1, +1}` so that every projection stays an integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElectronicLevel {
    MinusGround(i8),
    MinusExcited(i8),
    Singlet,
    ZeroGround(i8),
    ZeroExcited(i8),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChargeState {
    Negative,
    Neutral,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Manifold {
    Ground,
    Excited,
    Metastable,
}

impl ElectronicLevel {
    /// Every electronic level in basis order.
    pub const ALL: [ElectronicLevel; NUM_ELECTRONIC] = [
        ElectronicLevel::MinusGround(-1),
        ElectronicLevel::MinusGround(0),
        ElectronicLevel::MinusGround(1),
        ElectronicLevel::MinusExcited(-1),
        ElectronicLevel::MinusExcited(0),
        ElectronicLevel::MinusExcited(1),
        ElectronicLevel::Singlet,
        ElectronicLevel::ZeroGround(-1),
        ElectronicLevel::ZeroGround(1),
        ElectronicLevel::ZeroExcited(-1),
        ElectronicLevel::ZeroExcited(1),
    ];

    pub fn index(self) -> Option<usize> {
        use ElectronicLevel::*;
        match self {
            MinusGround(ms @ -1..=1) => Some((ms + 1) as usize),
            MinusExcited(ms @ -1..=1) => Some(3 + (ms + 1) as usize),
            Singlet => Some(6),
            ZeroGround(-1) => Some(7),
            ZeroGround(1) => Some(8),
            ZeroExcited(-1) => Some(9),
            ZeroExcited(1) => Some(10),
            _ => None,
        }
    }

    pub fn charge(self) -> ChargeState {
        match self {
            ElectronicLevel::ZeroGround(_) | ElectronicLevel::ZeroExcited(_) => ChargeState::Neutral,
            _ => ChargeState::Negative,
        }
    }

    pub fn manifold(self) -> Manifold {
        use ElectronicLevel::*;
        match self {
            MinusGround(_) | ZeroGround(_) => Manifold::Ground,
            MinusExcited(_) | ZeroExcited(_) => Manifold::Excited,
            Singlet => Manifold::Metastable,
        }
    }

    /// Twice the electron spin projection (0 for the singlet).
    pub fn twice_ms(self) -> i8 {
        use ElectronicLevel::*;
        match self {
            MinusGround(ms) | MinusExcited(ms) => 2 * ms,
            ZeroGround(two_ms) | ZeroExcited(two_ms) => two_ms,
            Singlet => 0,
        }
    }
}

impl fmt::Display for ElectronicLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ElectronicLevel::*;
        match *self {
            MinusGround(ms) => write!(f, "NVm_gs({ms:+})"),
            MinusExcited(ms) => write!(f, "NVm_es({ms:+})"),
            Singlet => write!(f, "NVm_singlet"),
            ZeroGround(t) => write!(f, "NV0_gs({t:+}/2)"),
            ZeroExcited(t) => write!(f, "NV0_es({t:+}/2)"),
        }
    }
}

/// Index of one of the 33 model levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Level(u8);

impl Level {
    pub fn new(electronic: ElectronicLevel, m_i: i8) -> Option<Level> {
        if !(-1..=1).contains(&m_i) {
            return None;
        }
        let e = electronic.index()?;
        Some(Level((e * NUM_NUCLEAR + (m_i + 1) as usize) as u8))
    }

    pub fn from_index(index: usize) -> Option<Level> {
        (index < NUM_LEVELS).then_some(Level(index as u8))
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn electronic(self) -> ElectronicLevel {
        ElectronicLevel::ALL[self.index() / NUM_NUCLEAR]
    }

    #[inline]
    pub fn m_i(self) -> i8 {
        (self.index() % NUM_NUCLEAR) as i8 - 1
    }

    /// Same electronic level with a different nuclear projection.
    pub fn with_m_i(self, m_i: i8) -> Option<Level> {
        Level::new(self.electronic(), m_i)
    }

    pub fn all() -> impl Iterator<Item = Level> {
        (0..NUM_LEVELS).map(|i| Level(i as u8))
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|mI={:+}", self.electronic(), self.m_i())
    }
}

/// Ordered enumeration of the model levels with the bijective index map.
#[derive(Clone, Debug)]
pub struct LevelBasis {
    levels: Vec<(ElectronicLevel, i8)>,
}

impl Default for LevelBasis {
    fn default() -> Self {
        Self::new()
    }
}

impl LevelBasis {
    pub fn new() -> Self {
        let levels = ElectronicLevel::ALL
            .iter()
            .flat_map(|&e| (-1..=1).map(move |m_i| (e, m_i)))
            .collect();
        LevelBasis { levels }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<(ElectronicLevel, i8)> {
        self.levels.get(index).copied()
    }

    pub fn index_of(&self, electronic: ElectronicLevel, m_i: i8) -> Option<usize> {
        Level::new(electronic, m_i).map(Level::index)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, ElectronicLevel, i8)> + '_ {
        self.levels.iter().enumerate().map(|(i, &(e, m))| (i, e, m))
    }

    /// Level names in basis order, used for CSV headers.
    pub fn labels(&self) -> Vec<String> {
        Level::all().map(|l| l.to_string()).collect()
    }
}
