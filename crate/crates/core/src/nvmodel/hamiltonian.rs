//! Coherent excited-state Hamiltonians.
//!
//! Ground-state and singlet blocks are zero. The NV⁻ excited triplet (9 levels)
//! and the NV⁰ excited doublet (6 levels) carry zero-field, Zeeman, quadrupole
//! and hyperfine terms. Matrix entries are angular frequencies in rad/µs; the
//! cyclic-MHz parameters are converted once, in [`to_angular`].

use std::f64::consts::TAU;

use super::levels::{ElectronicLevel, Level};
use super::params::PhysicalParams;
use super::rates::LevelMatrix;

/// Cyclic MHz to angular rad/µs.
#[inline]
pub fn to_angular(mhz: f64) -> f64 {
    TAU * mhz
}

/// `√(j(j+1) − m(m+1))`, the raising coefficient, from doubled quantum numbers.
pub fn raising_coefficient(twice_j: i8, twice_m: i8) -> f64 {
    let j = twice_j as f64 / 2.0;
    let m = twice_m as f64 / 2.0;
    (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

/// Symmetric 33×33 Hamiltonian of the model, in rad/µs.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSpec {
    pub matrix: LevelMatrix,
}

impl HamiltonianSpec {
    /// Levels of the NV⁻ excited triplet block followed by the NV⁰ excited doublet block.
    pub fn coherent_blocks() -> [Vec<Level>; 2] {
        let minus = Level::all()
            .filter(|l| matches!(l.electronic(), ElectronicLevel::MinusExcited(_)))
            .collect();
        let zero = Level::all()
            .filter(|l| matches!(l.electronic(), ElectronicLevel::ZeroExcited(_)))
            .collect();
        [minus, zero]
    }

    /// Largest |H − Hᵀ| entry relative to the largest |H| entry.
    pub fn hermiticity_defect(&self) -> f64 {
        let scale = self.matrix.amax().max(f64::MIN_POSITIVE);
        (self.matrix - self.matrix.transpose()).amax() / scale
    }

    pub fn is_diagonal(&self) -> bool {
        self.matrix
            .iter()
            .enumerate()
            .all(|(k, &v)| v == 0.0 || k % self.matrix.nrows() == k / self.matrix.nrows())
    }
}

struct BlockTerms {
    twice_s: i8,
    zero_field: f64,
    gamma_e_b: f64,
    par: f64,
    perp: f64,
}

pub fn build_hamiltonian(params: &PhysicalParams) -> HamiltonianSpec {
    let q = params.q;
    let gamma_n_b = params.gamma_n * 1e-3 * params.b_field;
    let gamma_e_b = params.gamma_e * params.b_field;
    let mut h = LevelMatrix::zeros();

    let [minus, zero] = HamiltonianSpec::coherent_blocks();
    let terms = [
        (
            minus,
            BlockTerms {
                twice_s: 2,
                zero_field: params.delta_es * 1e3,
                gamma_e_b,
                par: params.a_par,
                perp: params.a_perp,
            },
        ),
        (
            zero,
            BlockTerms { twice_s: 1, zero_field: 0.0, gamma_e_b, par: params.c_par, perp: params.c_perp },
        ),
    ];

    for (block, t) in terms.iter() {
        for &a in block {
            let ms = a.electronic().twice_ms() as f64 / 2.0;
            let mi = a.m_i() as f64;
            let diag = t.zero_field * ms * ms + q * mi * mi + t.gamma_e_b * ms + gamma_n_b * mi + t.par * ms * mi;
            h[(a.index(), a.index())] = to_angular(diag);

            // perp·(SxIx + SyIy) = perp/2 · (S₊I₋ + S₋I₊); fill the S₊I₋ half and mirror.
            for &b in block {
                let (sa, sb) = (a.electronic().twice_ms(), b.electronic().twice_ms());
                if sb == sa + 2 && b.m_i() == a.m_i() - 1 {
                    let coeff = raising_coefficient(t.twice_s, sa) * raising_coefficient(2, 2 * b.m_i());
                    let value = to_angular(0.5 * t.perp * coeff);
                    h[(b.index(), a.index())] = value;
                    h[(a.index(), b.index())] = value;
                }
            }
        }
    }
    HamiltonianSpec { matrix: h }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nvmodel::params::default_params;

    fn level(e: ElectronicLevel, m_i: i8) -> usize {
        Level::new(e, m_i).unwrap().index()
    }

    #[test]
    fn diagonal_without_transverse_coupling() {
        let mut p = PhysicalParams::default();
        p.a_perp = 0.0;
        p.c_perp = 0.0;
        assert!(build_hamiltonian(&p).is_diagonal());
        assert!(!build_hamiltonian(&PhysicalParams::default()).is_diagonal());
    }

    #[test]
    fn hermitian_and_zero_outside_excited_blocks() {
        let h = build_hamiltonian(&PhysicalParams::default());
        assert!(h.hermiticity_defect() < 1e-12);
        for a in Level::all() {
            for b in Level::all() {
                let v = h.matrix[(a.index(), b.index())];
                if v != 0.0 {
                    let excited = |l: Level| {
                        matches!(
                            l.electronic(),
                            ElectronicLevel::MinusExcited(_) | ElectronicLevel::ZeroExcited(_)
                        )
                    };
                    assert!(excited(a) && excited(b));
                    assert_eq!(a.electronic().charge(), b.electronic().charge());
                }
            }
        }
    }

    #[test]
    fn stretched_state_diagonal_entry() {
        let p = PhysicalParams::default();
        let h = build_hamiltonian(&p);
        let i = level(ElectronicLevel::MinusExcited(1), 1);
        // Δ_es + Q + γ_e·B + γ_n·B + A_par in cyclic MHz.
        let expected = 1420.0 - 4.945 + 2.802 * 7500.0 - 0.308e-3 * 7500.0 - 40.0;
        assert!((h.matrix[(i, i)] - TAU * expected).abs() < 1e-9);
    }

    #[test]
    fn flip_flop_element_for_spin_one_pair() {
        let p = default_params(-50.0, 90.0, 1.0).unwrap();
        let h = build_hamiltonian(&p);
        let a = level(ElectronicLevel::MinusExcited(0), 1);
        let b = level(ElectronicLevel::MinusExcited(1), 0);
        // (A⊥/2)·√2·√2 = A⊥
        assert!((h.matrix[(a, b)].abs() - TAU * 50.0).abs() < 1e-9);
    }
}
