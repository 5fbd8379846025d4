//! Secret-draw randomness. Every secret flows through [`SecretRng`], whose
//! `CryptoRng` bound makes a time-seeded or linear-congruential generator a
//! compile error rather than a code-review finding.

use rand_chacha::ChaCha20Rng;
use rand_core::{CryptoRng, RngCore, SeedableRng};

/// An RNG fit to produce secrets: cryptographically secure by type.
/// Blanket-implemented for every `RngCore + CryptoRng`.
///
/// A plain PRNG is rejected at compile time:
///
/// ```compile_fail
/// use qrke::rng::SecretRng;
/// use rand_core::RngCore;
///
/// struct Lcg(u64);
/// impl RngCore for Lcg {
///     fn next_u32(&mut self) -> u32 { self.next_u64() as u32 }
///     fn next_u64(&mut self) -> u64 {
///         self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1);
///         self.0
///     }
///     fn fill_bytes(&mut self, dest: &mut [u8]) { dest.fill(0) }
///     fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand_core::Error> {
///         dest.fill(0);
///         Ok(())
///     }
/// }
///
/// fn draw<R: SecretRng + ?Sized>(_rng: &mut R) {}
/// let mut weak = Lcg(1);
/// draw(&mut weak); // no CryptoRng marker: must not compile
/// ```
pub trait SecretRng: RngCore + CryptoRng {}

impl<R: RngCore + CryptoRng + ?Sized> SecretRng for R {}

/// The default secret source: ChaCha20 keyed from OS entropy.
pub fn os_rng() -> ChaCha20Rng {
    ChaCha20Rng::from_entropy()
}

/// Deterministic stream for reproducible tests. The name is the warning:
/// a u64 seed is not a key space, never use this for real exchanges.
pub fn insecure_seeded(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Uniform draw from [0, bound) by rejection, bias-free.
pub fn uniform_u64(rng: &mut dyn SecretRng, bound: u64) -> u64 {
    assert!(bound > 0, "uniform_u64 bound must be positive");
    let zone = (u64::MAX / bound) * bound;
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % bound;
        }
    }
}
