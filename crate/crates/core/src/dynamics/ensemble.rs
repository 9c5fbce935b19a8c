//! Ensemble (master-equation) expectations of the jump process.
//!
//! The Monte-Carlo trajectories sample a continuous-time Markov chain whose
//! generator is the effective rate table, so ensemble averages follow from
//! matrix exponentials of that generator. A 34th component integrates the
//! detected-photon flux during the pulse.

use nalgebra::{SMatrix, SVector};

use super::averaging::EffectiveRateTable;
use super::protocol::{apply_cnot, ReadoutModel};
use crate::nvmodel::{ChargeState, Level, NUM_LEVELS};

const AUGMENTED: usize = NUM_LEVELS + 1;
type Augmented = SMatrix<f64, AUGMENTED, AUGMENTED>;
type Populations = SVector<f64, NUM_LEVELS>;

/// Column-convention generator `x' = A x` with an optional photon counter row.
fn augmented_generator(eff: &EffectiveRateTable, efficiency: Option<f64>) -> Augmented {
    let mut a = Augmented::zeros();
    for m in 0..NUM_LEVELS {
        let mut out = 0.0;
        for n in 0..NUM_LEVELS {
            let k = eff.rates[(m, n)];
            if k > 0.0 && m != n {
                a[(n, m)] += k;
                out += k;
            }
        }
        a[(m, m)] -= out;
        if let Some(eta) = efficiency {
            a[(NUM_LEVELS, m)] = eta * eff.photon.row(m).sum();
        }
    }
    a
}

/// Per-repetition propagators for the populations and the detected-photon mean.
#[derive(Clone, Debug)]
pub struct EnsemblePropagator {
    pulse: Augmented,
    relaxation: Option<Augmented>,
}

impl EnsemblePropagator {
    pub fn new(model: &ReadoutModel) -> Self {
        let eta = model.params.collection_efficiency;
        let pulse = (augmented_generator(&model.illuminated, Some(eta)) * model.timing.readout).exp();
        let relaxation = (model.timing.relax && model.timing.relaxation > 0.0)
            .then(|| (augmented_generator(&model.dark, None) * model.timing.relaxation).exp());
        EnsemblePropagator { pulse, relaxation }
    }

    /// Mean detected photons in each of `repetitions` readouts starting from `initial`.
    pub fn expected_counts(&self, initial: Level, repetitions: usize) -> Vec<f64> {
        let mut x = Populations::zeros();
        x[initial.index()] = 1.0;
        let mut out = Vec::with_capacity(repetitions);
        for _ in 0..repetitions {
            let mut state = SVector::<f64, AUGMENTED>::zeros();
            for l in Level::all() {
                state[apply_cnot(l).index()] += x[l.index()];
            }
            state = self.pulse * state;
            out.push(state[NUM_LEVELS]);
            state[NUM_LEVELS] = 0.0;
            if let Some(relax) = &self.relaxation {
                state = relax * state;
            }
            x = state.fixed_rows::<NUM_LEVELS>(0).into_owned();
        }
        out
    }

    pub fn expected_total(&self, initial: Level, repetitions: usize) -> f64 {
        self.expected_counts(initial, repetitions).iter().sum()
    }
}

/// NV⁻ population after `duration` µs of continuous illumination from `initial`.
pub fn continuous_negative_fraction(eff: &EffectiveRateTable, initial: Level, duration: f64) -> f64 {
    let a = augmented_generator(eff, None);
    let propagator = (a * duration).exp();
    let mut x = SVector::<f64, AUGMENTED>::zeros();
    x[initial.index()] = 1.0;
    let x = propagator * x;
    Level::all()
        .filter(|l| l.electronic().charge() == ChargeState::Negative)
        .map(|l| x[l.index()])
        .sum()
}
