use serde::{Deserialize, Serialize};

use crate::dynamics::Class;

/// A single discrimination result.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub p_bright: f64,
    pub p_dark: f64,
    pub class: Class,
    pub discarded: bool,
}

impl Prediction {
    /// Hard decision from probabilities; an exact tie goes to dark.
    pub fn from_probabilities(p_dark: f64, p_bright: f64) -> Self {
        let class = if p_bright > p_dark { Class::Bright } else { Class::Dark };
        Prediction { p_bright, p_dark, class, discarded: false }
    }

    /// Hard decision with no probability information (probability 1 on the decision).
    pub fn hard(class: Class) -> Self {
        let p_bright = if class == Class::Bright { 1.0 } else { 0.0 };
        Prediction { p_bright, p_dark: 1.0 - p_bright, class, discarded: false }
    }

    /// Probability of the chosen class.
    pub fn confidence(&self) -> f64 {
        self.p_bright.max(self.p_dark)
    }
}
