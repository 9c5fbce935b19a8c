//! Time-averaged populations and the effective jump rates built from them.
//!
//! A level entered by an incoherent jump evolves coherently under the
//! excited-state Hamiltonian until the next jump. The hyperfine oscillations
//! (~10 GHz) are far faster than any incoherent rate (~100 MHz), so the jump
//! process only sees the long-time average of `|⟨i|ψ(t)⟩|²`. With `H = U Λ Uᵀ`
//! that average is `Σ_λ |⟨i|Π_λ|m⟩|²`, summed over the eigenspace projectors
//! `Π_λ`; for a non-degenerate spectrum it reduces to `Σ_k U_ik² U_mk²`.

use nalgebra::{DMatrix, SVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::nvmodel::{HamiltonianSpec, Level, LevelMatrix, RateMatrix, NUM_LEVELS};

/// Eigenvalues closer than this fraction of the spectral range share an eigenspace.
pub const DEGENERACY_TOLERANCE: f64 = 1e-6;

const HERMITICITY_TOLERANCE: f64 = 1e-12;

/// Row `m` holds P̄(·|m), the averaged populations after entering level `m`.
pub fn time_averaged_populations(h: &HamiltonianSpec) -> Result<LevelMatrix> {
    let defect = h.hermiticity_defect();
    if defect > HERMITICITY_TOLERANCE {
        return Err(Error::ContractViolation(format!(
            "Hamiltonian is not Hermitian (relative defect {defect:.3e})"
        )));
    }
    let mut averaged = LevelMatrix::zeros();
    for component in coupled_components(&h.matrix) {
        if component.len() == 1 {
            averaged[(component[0], component[0])] = 1.0;
            continue;
        }
        let dim = component.len();
        let block = DMatrix::from_fn(dim, dim, |r, c| h.matrix[(component[r], component[c])]);
        let eig = SymmetricEigen::new(block);

        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let range = eig.eigenvalues[order[dim - 1]] - eig.eigenvalues[order[0]];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for &k in &order {
            match groups.last_mut() {
                Some(g)
                    if eig.eigenvalues[k] - eig.eigenvalues[*g.last().unwrap()]
                        <= DEGENERACY_TOLERANCE * range =>
                {
                    g.push(k)
                }
                _ => groups.push(vec![k]),
            }
        }

        let u = &eig.eigenvectors;
        for (a, &m) in component.iter().enumerate() {
            for (b, &i) in component.iter().enumerate() {
                let p: f64 = groups
                    .iter()
                    .map(|g| {
                        let overlap: f64 = g.iter().map(|&k| u[(b, k)] * u[(a, k)]).sum();
                        overlap * overlap
                    })
                    .sum();
                averaged[(m, i)] = p;
            }
        }
    }
    Ok(averaged)
}

/// P̄(·|entry) as a probability vector over the 33 levels.
pub fn effective_population_matrix(h: &HamiltonianSpec, entry: Level) -> Result<SVector<f64, NUM_LEVELS>> {
    let averaged = time_averaged_populations(h)?;
    Ok(averaged.row(entry.index()).transpose())
}

/// Connected components of the nonzero pattern of `h`; each evolves on its own.
fn coupled_components(h: &LevelMatrix) -> Vec<Vec<usize>> {
    let mut component = [usize::MAX; NUM_LEVELS];
    let mut out = Vec::new();
    for start in 0..NUM_LEVELS {
        if component[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![start];
        component[start] = id;
        let mut cursor = 0;
        while cursor < members.len() {
            let i = members[cursor];
            cursor += 1;
            for j in 0..NUM_LEVELS {
                if component[j] == usize::MAX && (h[(i, j)] != 0.0 || h[(j, i)] != 0.0) {
                    component[j] = id;
                    members.push(j);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Time-averaged jump rates: `eff(m, n) = Σ_i P̄(i|m) k_in`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveRateTable {
    pub rates: LevelMatrix,
    /// Photon-emitting share of each effective rate.
    pub photon: LevelMatrix,
    /// Row `m` is P̄(·|m).
    pub populations: LevelMatrix,
}

impl EffectiveRateTable {
    pub fn rate(&self, from: Level, to: Level) -> f64 {
        self.rates[(from.index(), to.index())]
    }

    pub fn total_out_rate(&self, from: Level) -> f64 {
        self.rates.row(from.index()).sum()
    }

    /// Fraction of the `from → to` channel that emits a photon.
    pub fn photon_fraction(&self, from: Level, to: Level) -> f64 {
        let total = self.rate(from, to);
        if total > 0.0 {
            (self.photon[(from.index(), to.index())] / total).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

pub fn build_effective_rates(h: &HamiltonianSpec, bare: &RateMatrix) -> Result<EffectiveRateTable> {
    let populations = time_averaged_populations(h)?;
    Ok(effective_rates_from_populations(populations, bare))
}

pub(crate) fn effective_rates_from_populations(populations: LevelMatrix, bare: &RateMatrix) -> EffectiveRateTable {
    EffectiveRateTable {
        rates: populations * bare.rates,
        photon: populations * bare.photon,
        populations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nvmodel::{build_hamiltonian, build_rate_matrix, ElectronicLevel, PhysicalParams};

    fn level(e: ElectronicLevel, m_i: i8) -> Level {
        Level::new(e, m_i).unwrap()
    }

    #[test]
    fn diagonal_hamiltonian_gives_unit_vectors() {
        let mut p = PhysicalParams::default();
        p.a_perp = 0.0;
        p.c_perp = 0.0;
        let h = build_hamiltonian(&p);
        for m in Level::all() {
            let v = effective_population_matrix(&h, m).unwrap();
            for i in 0..NUM_LEVELS {
                assert_eq!(v[i], if i == m.index() { 1.0 } else { 0.0 });
            }
        }
        let eff = build_effective_rates(&h, &build_rate_matrix(&p).unwrap()).unwrap();
        assert_eq!(eff.rates, build_rate_matrix(&p).unwrap().rates);
    }

    #[test]
    fn ground_levels_do_not_mix() {
        let h = build_hamiltonian(&PhysicalParams::default());
        let m = level(ElectronicLevel::MinusGround(0), 1);
        let v = effective_population_matrix(&h, m).unwrap();
        assert_eq!(v[m.index()], 1.0);
        assert_eq!(v.sum(), 1.0);
    }

    #[test]
    fn rows_are_probability_vectors() {
        let h = build_hamiltonian(&PhysicalParams::default());
        let p = time_averaged_populations(&h).unwrap();
        for m in 0..NUM_LEVELS {
            assert!((p.row(m).sum() - 1.0).abs() < 1e-10);
            assert!(p.row(m).iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn bright_excited_level_leaks_into_flip_partner() {
        let h = build_hamiltonian(&PhysicalParams::default());
        let m = level(ElectronicLevel::MinusExcited(0), 1);
        let partner = level(ElectronicLevel::MinusExcited(1), 0);
        let v = effective_population_matrix(&h, m).unwrap();
        assert!(v[partner.index()] > 1e-6 && v[partner.index()] < 1e-4, "{}", v[partner.index()]);
        // |+1,+1⟩ has no flip-flop partner in the I = 1 manifold.
        let stretched = level(ElectronicLevel::MinusExcited(1), 1);
        assert_eq!(effective_population_matrix(&h, stretched).unwrap()[stretched.index()], 1.0);
    }

    #[test]
    fn row_sums_match_population_weighted_out_rates() {
        let p = PhysicalParams::default();
        let bare = build_rate_matrix(&p).unwrap();
        let eff = build_effective_rates(&build_hamiltonian(&p), &bare).unwrap();
        for m in Level::all() {
            let expected: f64 = Level::all()
                .map(|i| eff.populations[(m.index(), i.index())] * bare.total_out_rate(i))
                .sum();
            assert!((eff.total_out_rate(m) - expected).abs() < 1e-9 * expected.max(1.0));
        }
    }

    #[test]
    fn mixing_opens_shelving_channel() {
        let p = PhysicalParams::default();
        let bare = build_rate_matrix(&p).unwrap();
        let eff = build_effective_rates(&build_hamiltonian(&p), &bare).unwrap();
        let m = level(ElectronicLevel::MinusExcited(0), 1);
        let flipped_singlet = level(ElectronicLevel::Singlet, 0);
        assert_eq!(bare.rate(m, flipped_singlet), 0.0);
        assert!(eff.rate(m, flipped_singlet) > 0.0);
    }

    #[test]
    fn degenerate_eigenspace_keeps_cross_terms() {
        // H = all-ones on three levels: eigenvalues {3, 0, 0}. Exact average from
        // |0⟩ is |Π₃|0⟩|² + |Π₀|0⟩|² = (5/9, 2/9, 2/9).
        let mut h = HamiltonianSpec { matrix: LevelMatrix::zeros() };
        for i in 3..6 {
            for j in 3..6 {
                h.matrix[(i, j)] = 1.0;
            }
        }
        let v = effective_population_matrix(&h, Level::from_index(3).unwrap()).unwrap();
        assert!((v[3] - 5.0 / 9.0).abs() < 1e-12);
        assert!((v[4] - 2.0 / 9.0).abs() < 1e-12);
        assert!((v[5] - 2.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian_input() {
        let mut h = HamiltonianSpec { matrix: LevelMatrix::zeros() };
        h.matrix[(3, 4)] = 1.0;
        assert!(matches!(
            effective_population_matrix(&h, Level::from_index(3).unwrap()),
            Err(Error::ContractViolation(_))
        ));
    }
}
