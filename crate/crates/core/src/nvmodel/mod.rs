//! State space, parameters, incoherent rates and excited-state Hamiltonians
//! of the NV⁻/NV⁰–¹⁴N system.

pub mod hamiltonian;
pub mod levels;
pub mod params;
pub mod rates;

pub use hamiltonian::{build_hamiltonian, HamiltonianSpec};
pub use levels::{ChargeState, ElectronicLevel, Level, LevelBasis, Manifold, NUM_LEVELS};
pub use params::{default_params, Diagnostic, PhysicalParams};
pub use rates::{build_rate_matrix, build_relaxation_rate_matrix, LevelMatrix, RateMatrix};
