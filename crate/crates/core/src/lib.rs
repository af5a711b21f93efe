//! Generalized Dirac brackets for constrained Hamiltonian systems.
//!
//! Given a Poisson matrix `J(z)` and constraints `Φ(z)`, the Dirac bracket
//! `J* = J − J Q̂ᵀ D Q̂ J` is built from any antisymmetric `D` that makes the
//! constraints Casimir invariants, `J Q̂ᵀ (1 − D C) = 0` with `C = Q̂ J Q̂ᵀ`.
//! `C` need not be invertible: a solution exists iff `Ker C ⊂ Ker J Q̂ᵀ`, and
//! the pointwise pseudoinverse `D = C⁺` is one.
//!
//! ```
//! use dirac_core::dirac::{ConstrainedSystem, DSolution, DiracSystem};
//! use dirac_core::verify::{verify, VerifyConfig};
//! use dirac_core::{ConstraintSet, PhaseSpace, PoissonStructure};
//!
//! # fn main() -> Result<(), dirac_core::DiracError> {
//! let space = PhaseSpace::new(["q1", "p1", "q2", "p2"])?;
//! let j = PoissonStructure::build(space.clone(), [((0, 1), "1"), ((2, 3), "1")])?;
//! let phi = ConstraintSet::parse(space, &["q1*p1", "q1", "p1"])?;
//! let sys = DiracSystem::build(ConstrainedSystem::new(j, phi)?, DSolution::pseudoinverse())?;
//! let report = verify(&sys, &VerifyConfig { points: 10, ..Default::default() })?;
//! assert!(report.all_passed());
//! # Ok(())
//! # }
//! ```

pub mod cli;
pub mod dirac;
pub mod dynamics;
pub mod error;
pub mod fixtures;
pub mod linalg;
pub mod phase;
pub mod poly;
pub mod polymat;
pub mod problem;
pub mod verify;

pub use error::DiracError;
pub use phase::{ConstraintSet, PhaseSpace, PoissonStructure};
pub use poly::{parse_poly, PolyExpr, Rational};
