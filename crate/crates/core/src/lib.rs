//! Harmonic invariant forms on compact homogeneous spaces `G/K`.
//!
//! The crate is organised bottom-up:
//!
//! * [`liealg`] builds compact Lie algebras as structure-constant tensors.
//! * [`homog`] models an embedding `k ⊂ g`, its Killing constants, alignment
//!   and the reductive decompositions `g = k ⊕ p`.
//! * [`exterior`] is a general purpose calculus on `K`-invariant forms on `p`
//!   (differential, codifferential, Hodge Laplacian, Betti numbers). It is
//!   used as the numerical reference for every closed formula.
//! * [`cartan`] holds the closed formulas: Cartan 3-forms, the forms `H_Q`,
//!   the codifferential on Lie groups, Casimir constants and the harmonicity
//!   criterion for aligned spaces together with its metric families.
//! * [`catalog`] describes spaces declaratively and ships the standard
//!   examples used throughout the tests.

pub mod cartan;
pub mod catalog;
pub mod error;
pub mod exterior;
pub mod homog;
pub mod liealg;
pub mod linalg;

pub use error::{Error, Result};
