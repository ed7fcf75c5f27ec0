//! Finite-dimensional Følner approximations of the CCR algebras.
//!
//! The crate covers the Weyl algebra `𝒲₀(X, σ)` over an exact rational
//! symplectic space, its explicit Følner subspaces, compressions of the trace
//! representation onto lattice boxes, the calculus of finite c.c.p. map
//! samples (spectral splitting, unitalization, certificates), and truncated
//! Fock-space checks of the resolvent algebra relations.

pub mod amenability;
pub mod character;
pub mod cp;
pub mod error;
pub mod expr;
pub mod fock;
pub mod lattice;
pub mod linalg;
pub mod par;
pub mod rational;
pub mod report;
pub mod symplectic;
pub mod weyl;

pub use error::{Error, Result};
pub use rational::Rational;
pub use symplectic::{SymplecticSpace, VecX};
pub use weyl::WeylElement;
