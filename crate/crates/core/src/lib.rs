//! Exact computation with subgroups of direct products of finitely
//! generated free groups.
//!
//! The toolkit represents subgroups of a product `Γ₁ × … × Γₙ` of free
//! groups as equalizers/kernels of maps onto computable quotients
//! (finite groups, finitely generated abelian groups, free class-2
//! nilpotent groups).  On top of that representation it provides
//!
//! * fibre products of two surjections with a common target, together
//!   with the two short exact sequences they fit into,
//! * projections `p_J`, intersections `N_J = P ∩ Γ_J` and the iterated
//!   decomposition of a subdirect product into fibre products,
//! * virtual-surjection-to-`k`-tuples checking with per-subset index
//!   reports,
//! * constructive nilpotency witnesses (partition, lifts, iterated
//!   commutators) for the quotients `Γᵢ/Nᵢ`,
//! * finiteness lengths of kernels of maps onto free abelian groups via
//!   character-sphere pattern analysis,
//! * first homology of finite-index fibre products via
//!   Reidemeister–Schreier rewriting plus Smith normal form, and a
//!   forward-chaining rule engine for (weak) homological finiteness
//!   flags.
//!
//! Membership of an arbitrary finitely generated subgroup of `F × F` is
//! undecidable, so generator lists are never accepted as subgroup
//! *inputs*; subgroups are always given by their defining quotient
//! data.  All integer arithmetic is arbitrary precision.

pub mod error;
pub mod flags;
pub mod formats;
pub mod homology;
pub mod linalg;
pub mod product;
pub mod quotient;
pub mod report;
pub mod reproduce;
pub mod sigma;
pub mod stallings;
pub mod witness;
pub mod word;

pub use error::{Error, Result};
