//! Chebyshev key exchange over arbitrary-precision reals: the semigroup
//! T_a(T_b(x)) = T_ab(x) as a DH-style handshake, plus the attack and
//! analysis harnesses used to probe it.

pub mod analysis;
pub mod attack;
pub mod chebyshev;
pub mod error;
pub mod protocol;
pub mod real;
pub mod rng;
pub mod strategy;
pub mod suite;
pub mod wire;

pub use error::{DecodeCode, Error, Result};
pub use real::{PrecisionCtx, Real};
