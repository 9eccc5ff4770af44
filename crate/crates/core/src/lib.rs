//! Numerical laboratory for XY-type potentials on the circle shift.
//!
//! Finite temperature: the Ruelle transfer operator of `c·f`, its leading
//! eigendata and the Gibbs state `μ_c`. Zero temperature: the max-plus
//! eigenproblem giving `β(f)` and a calibrated subaction `V`. The modules in
//! between follow `c → ∞` and test large deviations against `R₊^∞`; a
//! Markov-chain sampler draws from `μ_c`.

// `!(x > 0.0)` also rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circle;
pub mod error;
pub mod ldp;
pub mod maxplus;
pub mod model;
pub mod numerics;
pub mod sampler;
pub mod states;
pub mod transfer;
pub mod zero_temp;

pub use error::{Error, Result};
pub use maxplus::{periodic_orbit_oracle, solve_maxplus, MaxPlusMethod, MaxPlusOptions, Subaction, UniquenessReport};
pub use model::{Arc, ArcSet, BasePoint, FiberGrid, FourierTerm, Potential, ShiftMetric, Word};
pub use transfer::{build_kernel, leading_eigensystem, EigenOptions, EigenSystem, LogKernel};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
