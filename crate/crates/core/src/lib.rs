//! Numerical laboratory for a single soliton of the cubic Gross–Pitaevskii
//! equation in a slowly varying external potential `V(x) = W(hx)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`]: periodic grid, complex fields, spectral derivatives and quadrature.
//! * [`group`]: the four-parameter soliton group, its action on fields and its Lie algebra.
//! * [`potential`]: slowly varying potentials with analytic derivatives.
//! * [`modulation`]: symplectic decomposition `u = g·(η + w)` and the related projections.
//! * [`solver`]: Strang split-step integration of the PDE.
//! * [`effective`]: effective-Hamiltonian and Newton modulation ODEs, RK4.
//! * [`spectral`]: the linearised operators `L±` and their spectral facts.
//! * [`experiment`]: run orchestration and CSV artefacts used by the CLI.

pub mod effective;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod group;
pub mod modulation;
pub mod potential;
pub mod quadrature;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Grid, WaveField, C64};
pub use group::{GroupElement, LieAlgebraElement};
pub use potential::{Potential, PotentialSpec, Profile};
