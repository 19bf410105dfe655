//! A laboratory for exponential sums over multiplicative subgroups of prime
//! fields.
//!
//! The crate computes `S_a(H)`, the interval sums `S_a(N, H)`, the additive
//! energies `T_m(H)` and the count `J(N, H)` exactly or to controlled
//! precision, evaluates the known upper bounds for them, and replays the
//! dyadic set construction behind the single-sum bound on concrete
//! instances, checking every step that holds deterministically.

pub mod accum;
pub mod bounds;
pub mod energy;
pub mod error;
pub mod expsum;
pub mod field;
pub mod harness;
pub mod prooftrace;
pub mod subgroup;
pub mod transform;

pub use error::{Error, ErrorKind, Result};
pub use expsum::{Interval, Strategy, SumConfig, SumTable};
pub use field::PrimeModulus;
pub use subgroup::Subgroup;
