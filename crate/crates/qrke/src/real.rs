//! Arbitrary-precision real arithmetic under an explicit decimal-digit
//! precision context.
//!
//! All trigonometric entry points and argument reduction route through this
//! module so the guard-digit policy stays in one place. The kernel is MPFR
//! (via `rug`); internal precision is binary with enough headroom that every
//! operation under a ctx keeps relative error well below `10^(1 - digits)`,
//! and decimal round-to-nearest happens at the canonical-string boundary.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Integer};

use crate::error::{Error, Result};

/// Hard cap on internal widening (decimal digits); exceeding it is a
/// precision error, never a silently wrong answer.
pub const WIDEN_CAP_DIGITS: u32 = 1 << 17;

const LOG2_10: f64 = 3.321928094887362;

/// Extra binary headroom beyond the decimal-digit request. Keeps binary
/// round-off at least ~4 decimal orders below the ctx contract and makes
/// the decimal->binary->decimal round trip lossless.
const BITS_MARGIN: u32 = 16;

/// Precision context: a count of significant decimal digits. Rounding is
/// fixed to round-to-nearest (ties to even) so both handshake parties are
/// bit-deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrecisionCtx {
    digits: u32,
}

impl PrecisionCtx {
    /// Minimum viable context; the binary64-emulation experiments use 16.
    pub const MIN_DIGITS: u32 = 16;

    pub fn new(digits: u32) -> Result<Self> {
        if digits < Self::MIN_DIGITS {
            return Err(Error::Parameter(format!(
                "precision context needs >= {} digits, got {digits}",
                Self::MIN_DIGITS
            )));
        }
        if digits > WIDEN_CAP_DIGITS {
            return Err(Error::Precision(format!(
                "precision context {digits} digits exceeds cap {WIDEN_CAP_DIGITS}"
            )));
        }
        Ok(PrecisionCtx { digits })
    }

    pub fn digits(self) -> u32 {
        self.digits
    }

    /// Binary working precision equivalent to `digits` decimal digits.
    pub(crate) fn bits(self) -> u32 {
        (self.digits as f64 * LOG2_10).ceil() as u32 + BITS_MARGIN
    }

    /// Context widened by `extra` decimal digits, for internal guard work.
    pub(crate) fn widen(self, extra: u32) -> Result<Self> {
        let digits = self.digits.checked_add(extra).unwrap_or(u32::MAX);
        if digits > WIDEN_CAP_DIGITS {
            return Err(Error::Precision(format!(
                "widening to {digits} digits exceeds cap {WIDEN_CAP_DIGITS}"
            )));
        }
        Ok(PrecisionCtx { digits })
    }
}

/// An immutable arbitrary-precision real tied to the ctx it was computed
/// under. Values are safe to share across threads.
#[derive(Debug, Clone)]
pub struct Real {
    pub(crate) f: Float,
    pub(crate) ctx: PrecisionCtx,
}

impl Real {
    pub(crate) fn raw(f: Float, ctx: PrecisionCtx) -> Real {
        Real { f, ctx }
    }

    pub fn ctx(&self) -> PrecisionCtx {
        self.ctx
    }

    pub fn from_u64(v: u64, ctx: PrecisionCtx) -> Real {
        Real::raw(Float::with_val(ctx.bits(), v), ctx)
    }

    pub fn from_i64(v: i64, ctx: PrecisionCtx) -> Real {
        Real::raw(Float::with_val(ctx.bits(), v), ctx)
    }

    pub fn zero(ctx: PrecisionCtx) -> Real {
        Real::raw(Float::with_val(ctx.bits(), 0), ctx)
    }

    /// Round-to-nearest value of `self` at a (usually narrower) ctx.
    pub fn round_to(&self, ctx: PrecisionCtx) -> Real {
        Real::raw(Float::with_val(ctx.bits(), &self.f), ctx)
    }

    pub fn add(&self, rhs: &Real) -> Real {
        debug_assert_eq!(self.ctx, rhs.ctx);
        Real::raw(Float::with_val(self.ctx.bits(), &self.f + &rhs.f), self.ctx)
    }

    pub fn sub(&self, rhs: &Real) -> Real {
        debug_assert_eq!(self.ctx, rhs.ctx);
        Real::raw(Float::with_val(self.ctx.bits(), &self.f - &rhs.f), self.ctx)
    }

    pub fn mul(&self, rhs: &Real) -> Real {
        debug_assert_eq!(self.ctx, rhs.ctx);
        Real::raw(Float::with_val(self.ctx.bits(), &self.f * &rhs.f), self.ctx)
    }

    pub fn div(&self, rhs: &Real) -> Real {
        debug_assert_eq!(self.ctx, rhs.ctx);
        Real::raw(Float::with_val(self.ctx.bits(), &self.f / &rhs.f), self.ctx)
    }

    pub fn neg(&self) -> Real {
        Real::raw(Float::with_val(self.ctx.bits(), -self.f.clone()), self.ctx)
    }

    pub fn abs(&self) -> Real {
        Real::raw(self.f.clone().abs(), self.ctx)
    }

    pub fn is_zero(&self) -> bool {
        self.f.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.f.is_sign_negative() && !self.f.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        self.f.to_f64()
    }

    /// |self - rhs| as a Real under self's ctx.
    pub fn abs_diff(&self, rhs: &Real) -> Real {
        self.sub(rhs).abs()
    }

    /// Exact power of ten at this ctx, for tolerance thresholds.
    pub fn pow10(exp: i32, ctx: PrecisionCtx) -> Real {
        Real::raw(Float::with_val(ctx.bits(), 10).pow(exp), ctx)
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Real) -> bool {
        self.f == other.f
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Real) -> Option<std::cmp::Ordering> {
        self.f.partial_cmp(&other.f)
    }
}

/// Parses a decimal string: optional `-`, digits, optional fraction,
/// optional exponent. The value is rounded to ctx digits.
pub fn from_decimal(s: &str, ctx: PrecisionCtx) -> Result<Real> {
    validate_lenient_grammar(s)?;
    let parsed = Float::parse(s).map_err(|e| Error::Parse(format!("{s:?}: {e}")))?;
    Ok(Real::raw(Float::with_val(ctx.bits(), parsed), ctx))
}

fn validate_lenient_grammar(s: &str) -> Result<()> {
    let bytes = s.as_bytes();
    let mut i = 0;
    if bytes.first() == Some(&b'-') {
        i += 1;
    }
    let int_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i == int_start {
        return Err(Error::Parse(format!("{s:?}: missing integer digits")));
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i == frac_start {
            return Err(Error::Parse(format!("{s:?}: empty fraction")));
        }
    }
    if i < bytes.len() && bytes[i] == b'e' {
        i += 1;
        if i < bytes.len() && bytes[i] == b'-' {
            i += 1;
        }
        let exp_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return Err(Error::Parse(format!("{s:?}: empty exponent")));
        }
    }
    if i != bytes.len() {
        return Err(Error::Parse(format!("{s:?}: trailing input at byte {i}")));
    }
    Ok(())
}

/// Canonical decimal form `[-]D[.D+]e[-]D+`: exactly one leading nonzero
/// digit, exactly `max_digits` significant digits (zero-padded), zero
/// written `0e0`. This is the bit-exact interchange format.
pub fn to_decimal(v: &Real, max_digits: u32) -> String {
    assert!(
        max_digits >= 1 && max_digits <= v.ctx.digits,
        "max_digits {} outside 1..={}",
        max_digits,
        v.ctx.digits
    );
    if v.f.is_zero() {
        return "0e0".to_string();
    }
    let (neg, digits, exp) = v.f.to_sign_string_exp(10, Some(max_digits as usize));
    // rug yields value = +-0.digits * 10^exp; canonical form wants one digit
    // before the point, so the printed exponent is exp - 1.
    let exp = exp.expect("nonzero finite value has an exponent") - 1;
    let digits = digits.as_bytes();
    let mut out = String::with_capacity(digits.len() + 8);
    if neg {
        out.push('-');
    }
    out.push(digits[0] as char);
    if digits.len() > 1 {
        out.push('.');
        out.push_str(std::str::from_utf8(&digits[1..]).unwrap());
    }
    out.push('e');
    out.push_str(&exp.to_string());
    out
}

/// First `max_digits` digits of |v|'s decimal expansion, truncated toward
/// zero, never rounded: digits beyond the window cannot carry into it.
/// Returns bare significand digits (no sign, point, or exponent).
pub fn expansion_digits(v: &Real, max_digits: u32) -> String {
    assert!(!v.f.is_zero(), "zero has no significant digits");
    assert!(
        max_digits >= 1 && max_digits <= v.ctx.digits,
        "max_digits {} outside 1..={}",
        max_digits,
        v.ctx.digits
    );
    let (_, digits, _) = v.f.to_sign_string_exp_round(
        10,
        Some(max_digits as usize),
        rug::float::Round::Zero,
    );
    debug_assert_eq!(digits.len(), max_digits as usize);
    digits
}

/// Parses a string that must already be in the canonical form `to_decimal`
/// emits at `digits` significant digits. Used by the wire layer, which
/// rejects anything non-canonical.
pub fn from_canonical(s: &str, digits: u32, ctx: PrecisionCtx) -> Result<Real> {
    let sig = canonical_sig_digits(s)?;
    if sig != digits as usize {
        return Err(Error::Parse(format!(
            "{s:?}: {sig} significant digits, field requires {digits}"
        )));
    }
    let v = from_decimal(s, ctx)?;
    // Round-tripping is the airtight canonicality test: it catches
    // non-normalized exponents, "0.50"-style forms, and negative zero.
    if to_decimal(&v, digits.min(ctx.digits())) != s {
        return Err(Error::Parse(format!("{s:?}: not canonical")));
    }
    Ok(v)
}

/// Significant-digit count of a canonical string, validating its shape.
fn canonical_sig_digits(s: &str) -> Result<usize> {
    if s == "0e0" {
        return Ok(1);
    }
    let bytes = s.as_bytes();
    let mut i = 0;
    if bytes.first() == Some(&b'-') {
        i += 1;
    }
    if i >= bytes.len() || !(b'1'..=b'9').contains(&bytes[i]) {
        return Err(Error::Parse(format!("{s:?}: leading digit must be nonzero")));
    }
    i += 1;
    let mut sig = 1;
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            sig += 1;
            i += 1;
        }
        if i == frac_start {
            return Err(Error::Parse(format!("{s:?}: empty fraction")));
        }
    }
    if i >= bytes.len() || bytes[i] != b'e' {
        return Err(Error::Parse(format!("{s:?}: missing exponent")));
    }
    i += 1;
    if i < bytes.len() && bytes[i] == b'-' {
        i += 1;
    }
    let exp_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i == exp_start || i != bytes.len() {
        return Err(Error::Parse(format!("{s:?}: malformed exponent")));
    }
    let exp_digits = &s[exp_start..];
    if exp_digits.len() > 1 && exp_digits.starts_with('0') {
        return Err(Error::Parse(format!("{s:?}: zero-padded exponent")));
    }
    Ok(sig)
}

fn pi_cache() -> &'static Mutex<HashMap<u32, Float>> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Float>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// pi at the given binary precision, cached per precision. Safe under
/// concurrent read; first caller per precision computes.
pub(crate) fn pi_bits(bits: u32) -> Float {
    let mut cache = pi_cache().lock().unwrap();
    cache
        .entry(bits)
        .or_insert_with(|| Float::with_val(bits, Constant::Pi))
        .clone()
}

/// pi rounded to ctx digits.
pub fn pi(ctx: PrecisionCtx) -> Real {
    Real::raw(pi_bits(ctx.bits()), ctx)
}

/// Principal arc cosine: result in [0, pi].
pub fn arccos(v: &Real, ctx: PrecisionCtx) -> Result<Real> {
    let one = Float::with_val(8, 1);
    if v.f.clone().abs() > one {
        return Err(Error::Domain(format!(
            "arccos argument {} outside [-1, 1]",
            to_decimal(&v.round_to(v.ctx), v.ctx.digits().min(20))
        )));
    }
    Ok(Real::raw(Float::with_val(ctx.bits(), v.f.acos_ref()), ctx))
}

/// Cosine of any argument; reduction happens internally with a guard sized
/// from the argument's magnitude, so callers never pre-reduce.
pub fn cos(v: &Real, ctx: PrecisionCtx) -> Result<Real> {
    let guard = quotient_digits(&v.f).max(1) + 2;
    let reduced = mod_two_pi(v, ctx, guard)?;
    Ok(Real::raw(Float::with_val(ctx.bits(), reduced.f.cos_ref()), ctx))
}

/// Decimal length of floor(|v| / 2pi); the guard a reduction of v needs.
fn quotient_digits(v: &Float) -> u32 {
    // Cheap overestimate from the binary exponent: |v|/2pi < 2^(exp - 2).
    match v.get_exp() {
        Some(e) if e > 2 => ((e - 2) as f64 / LOG2_10).ceil() as u32 + 1,
        _ => 1,
    }
}

/// Reduces v into [0, 2pi), computing at ctx.digits + guard_digits so the
/// result keeps ctx.digits correct digits even after the cancellation.
///
/// Results within ~10 ulp of 0 or 2pi snap to exactly 0: an input that is a
/// multiple of 2pi up to ctx rounding has no resolvable phase, and the snap
/// keeps the result range honest.
pub fn mod_two_pi(v: &Real, ctx: PrecisionCtx, guard_digits: u32) -> Result<Real> {
    if quotient_digits(&v.f) > guard_digits {
        return Err(Error::Precision(format!(
            "mod_two_pi guard {} digits < quotient length {}",
            guard_digits,
            quotient_digits(&v.f)
        )));
    }
    let wide = ctx.widen(guard_digits)?;
    let bits = wide.bits();
    let two_pi = Float::with_val(bits, pi_bits(bits) * 2u32);
    let q = Float::with_val(bits, &v.f / &two_pi).floor();
    let mut r = Float::with_val(bits, &v.f - Float::with_val(bits, &two_pi * &q));
    // Floor at finite precision can land one step off; correct into range.
    while r.is_sign_negative() && !r.is_zero() {
        r += &two_pi;
    }
    while r >= two_pi {
        r -= &two_pi;
    }
    // Snap reduction noise at the seam to exact zero.
    let seam = Float::with_val(bits, &two_pi >> (ctx.bits() + 4));
    if r.clone().abs() < seam || (two_pi.clone() - &r).abs() < seam {
        r = Float::with_val(bits, 0);
    }
    Ok(Real::raw(Float::with_val(ctx.bits(), r), ctx))
}

/// Round-half-away-from-zero to an exact integer, the `[..]` operation of
/// the sieve; applied at the value's full precision.
pub fn round_half_away(v: &Real) -> Integer {
    round_half_away_float(&v.f)
}

pub(crate) fn round_half_away_float(v: &Float) -> Integer {
    // 8 guard bits so the half itself survives the addition.
    let shifted = if v.is_sign_negative() {
        Float::with_val(v.prec() + 8, v - 0.5f64)
    } else {
        Float::with_val(v.prec() + 8, v + 0.5f64)
    };
    shifted.trunc().to_integer().expect("finite value")
}

/// The big integer n as a Real at ctx precision (rounded if n exceeds it).
pub fn from_integer(n: &Integer, ctx: PrecisionCtx) -> Real {
    Real::raw(Float::with_val(ctx.bits(), n), ctx)
}
