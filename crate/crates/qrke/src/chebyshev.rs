//! Chebyshev polynomial evaluation by three methods (value recurrence, 2x2
//! matrix fast power, analytic cos/arccos) and composition of chains.
//!
//! The recurrence is the workhorse for small prime steps inside chains; the
//! analytic route handles big-integer degrees; the matrix power is kept as
//! an oracle and benchmark path. All three are registered behind a common
//! trait so callers can pick one by name at runtime.

use rug::ops::Pow;
use rug::{Float, Integer};

use crate::error::{Error, Result};
use crate::real::{self, PrecisionCtx, Real};

/// Largest degree t_recurrence accepts; beyond this the linear scan is the
/// wrong tool and callers should switch to t_matrix or t_analytic.
pub const RECURRENCE_MAX_N: u64 = 1_000_000;

/// An ordered composition chain: apply T_index `count` times per step.
/// Index 1 is the identity and is forbidden; canonical order is ascending
/// index so runs are reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainSpec {
    steps: Vec<(u64, u32)>,
}

impl ChainSpec {
    pub fn new(mut steps: Vec<(u64, u32)>) -> Result<Self> {
        for &(index, _) in &steps {
            if index < 2 {
                return Err(Error::Parameter(format!(
                    "chain index {index} < 2 (T_1 is the identity)"
                )));
            }
        }
        steps.sort_by_key(|&(index, _)| index);
        // Merge duplicate indices; zero counts are legal (identity steps).
        let mut merged: Vec<(u64, u32)> = Vec::with_capacity(steps.len());
        for (index, count) in steps {
            match merged.last_mut() {
                Some((last, c)) if *last == index => *c += count,
                _ => merged.push((index, count)),
            }
        }
        Ok(ChainSpec { steps: merged })
    }

    pub fn steps(&self) -> &[(u64, u32)] {
        &self.steps
    }

    /// Total composed degree prod index^count, exact.
    pub fn degree(&self) -> Integer {
        let mut d = Integer::from(1);
        for &(index, count) in &self.steps {
            d *= Integer::from(index).pow(count);
        }
        d
    }

    /// Number of recurrence applications evaluating this chain costs.
    pub fn recurrence_steps(&self) -> u64 {
        self.steps.iter().map(|&(i, c)| i * c as u64).sum()
    }
}

/// Conservative digit-loss estimate for `steps` recurrence degrees: the
/// classical one-bit-per-degree model converted to decimal (one digit per
/// ~3.3 degrees). Queryable so callers can size a ctx pessimistically; the
/// measured loss of the value recurrence is far smaller (roughly
/// log10(total degree), see the divergence experiment in attack).
pub fn recurrence_loss_estimate_digits(steps: u64) -> u64 {
    (steps as f64 * std::f64::consts::LOG10_2).ceil() as u64
}

fn check_domain_closed(x: &Real) -> Result<()> {
    if x.f.clone().abs() > Float::with_val(8, 1) {
        return Err(Error::Domain(format!(
            "|x| > 1: {}",
            real::to_decimal(x, x.ctx().digits().min(20))
        )));
    }
    Ok(())
}

fn check_domain_open(x: &Real) -> Result<()> {
    if x.f.clone().abs() >= Float::with_val(8, 1) {
        return Err(Error::Domain(format!(
            "|x| >= 1: {}",
            real::to_decimal(x, x.ctx().digits().min(20))
        )));
    }
    Ok(())
}

/// T_n(x) by the value recurrence T_k = 2x*T_{k-1} - T_{k-2}, linear in n.
pub fn t_recurrence(n: u64, x: &Real, ctx: PrecisionCtx) -> Result<Real> {
    if n > RECURRENCE_MAX_N {
        return Err(Error::Parameter(format!(
            "t_recurrence degree {n} > {RECURRENCE_MAX_N}; use t_matrix or t_analytic"
        )));
    }
    check_domain_closed(x)?;
    let bits = ctx.bits();
    if n == 0 {
        return Ok(Real::from_u64(1, ctx));
    }
    let x = Float::with_val(bits, &x.f);
    if n == 1 {
        return Ok(Real::raw(x, ctx));
    }
    let two_x = Float::with_val(bits, &x * 2u32);
    let mut t_prev = Float::with_val(bits, 1);
    let mut t = x;
    for _ in 1..n {
        let t_next = Float::with_val(bits, &two_x * &t) - &t_prev;
        t_prev = t;
        t = t_next;
    }
    Ok(Real::raw(t, ctx))
}

/// T_n(x) via fast power of the companion matrix (0 1; -1 2x): O(log n)
/// squarings, n may be a big integer.
pub fn t_matrix(n: &Integer, x: &Real, ctx: PrecisionCtx) -> Result<Real> {
    check_domain_closed(x)?;
    if n.is_zero() {
        return Ok(Real::from_u64(1, ctx));
    }
    let bits = ctx.bits();
    let x = Float::with_val(bits, &x.f);
    // Row-major [a b; c d], M = (0 1; -1 2x).
    let mul = |p: &[Float; 4], q: &[Float; 4]| -> [Float; 4] {
        [
            Float::with_val(bits, Float::with_val(bits, &p[0] * &q[0]) + Float::with_val(bits, &p[1] * &q[2])),
            Float::with_val(bits, Float::with_val(bits, &p[0] * &q[1]) + Float::with_val(bits, &p[1] * &q[3])),
            Float::with_val(bits, Float::with_val(bits, &p[2] * &q[0]) + Float::with_val(bits, &p[3] * &q[2])),
            Float::with_val(bits, Float::with_val(bits, &p[2] * &q[1]) + Float::with_val(bits, &p[3] * &q[3])),
        ]
    };
    let m = [
        Float::with_val(bits, 0),
        Float::with_val(bits, 1),
        Float::with_val(bits, -1),
        Float::with_val(bits, 2u32) * &x,
    ];
    let mut acc: Option<[Float; 4]> = None;
    let mut sq = m;
    for bit in 0..n.significant_bits() {
        if n.get_bit(bit) {
            acc = Some(match acc {
                None => sq.clone(),
                Some(a) => mul(&a, &sq),
            });
        }
        if bit + 1 < n.significant_bits() {
            sq = mul(&sq.clone(), &sq);
        }
    }
    let p = acc.expect("n >= 1 has a set bit");
    // (T_n, T_{n+1}) = M^n (T_0, T_1) with T_0 = 1, T_1 = x.
    let t_n = Float::with_val(bits, &p[0] * 1u32) + Float::with_val(bits, &p[1] * &x);
    Ok(Real::raw(Float::with_val(bits, t_n), ctx))
}

/// T_n(x) = cos(n * arccos x) with internal widening to
/// ctx.digits + declen(n) + 20 so the n*theta product and its reduction
/// keep ctx.digits correct digits.
pub fn t_analytic(n: &Integer, x: &Real, ctx: PrecisionCtx) -> Result<Real> {
    if n.is_zero() {
        return Ok(Real::from_u64(1, ctx));
    }
    if *n == 1 {
        check_domain_open(x)?;
        return Ok(x.round_to(ctx));
    }
    check_domain_open(x)?;
    let declen = n.to_string().len() as u32;
    let wide = ctx.widen(declen + 20)?;
    let x_wide = x.round_to(wide);
    let theta = real::arccos(&x_wide, wide)?;
    let product = Real::raw(Float::with_val(wide.bits(), &theta.f * n), wide);
    let reduced = real::mod_two_pi(&product, ctx, declen + 20)?;
    real::cos(&reduced, ctx)
}

/// Applies the steps in the order given (used to demonstrate order
/// independence); `compose_chain` is the canonical ascending-order entry.
///
/// After every single T_index application the running value is checked
/// against the degenerate neighborhoods of -1, 0, 1 (radius
/// 10^-(digits/2)); hitting one is an error so the caller can re-pick x.
pub fn compose_steps(steps: &[(u64, u32)], x: &Real, ctx: PrecisionCtx) -> Result<Real> {
    check_domain_open(x)?;
    let tol = Real::pow10(-((ctx.digits() / 2) as i32), ctx);
    let mut v = x.round_to(ctx);
    for &(index, count) in steps {
        for _ in 0..count {
            v = t_recurrence(index, &v, ctx)?;
            check_degenerate(&v, &tol)?;
        }
    }
    Ok(v)
}

fn check_degenerate(v: &Real, tol: &Real) -> Result<()> {
    for target in [-1i64, 0, 1] {
        let dist = v.sub(&Real::from_i64(target, v.ctx())).abs();
        if dist < *tol {
            return Err(Error::Degenerate(format!(
                "intermediate within 10^-{} of {target}",
                v.ctx().digits() / 2
            )));
        }
    }
    Ok(())
}

/// Evaluates the chain in canonical ascending-index order; equals
/// t_analytic(chain.degree(), x) within the documented error budget.
pub fn compose_chain(chain: &ChainSpec, x: &Real, ctx: PrecisionCtx) -> Result<Real> {
    compose_steps(chain.steps(), x, ctx)
}

/// A named T_n evaluation method, selectable at runtime.
pub trait Evaluator: Send + Sync {
    fn name(&self) -> &'static str;
    fn eval(&self, n: &Integer, x: &Real, ctx: PrecisionCtx) -> Result<Real>;
}

struct RecurrenceEval;
struct MatrixEval;
struct AnalyticEval;

impl Evaluator for RecurrenceEval {
    fn name(&self) -> &'static str {
        "recurrence"
    }
    fn eval(&self, n: &Integer, x: &Real, ctx: PrecisionCtx) -> Result<Real> {
        let n = n.to_u64().filter(|&n| n <= RECURRENCE_MAX_N).ok_or_else(|| {
            Error::Parameter(format!("recurrence evaluator: degree {n} > {RECURRENCE_MAX_N}"))
        })?;
        t_recurrence(n, x, ctx)
    }
}

impl Evaluator for MatrixEval {
    fn name(&self) -> &'static str {
        "matrix"
    }
    fn eval(&self, n: &Integer, x: &Real, ctx: PrecisionCtx) -> Result<Real> {
        t_matrix(n, x, ctx)
    }
}

impl Evaluator for AnalyticEval {
    fn name(&self) -> &'static str {
        "analytic"
    }
    fn eval(&self, n: &Integer, x: &Real, ctx: PrecisionCtx) -> Result<Real> {
        t_analytic(n, x, ctx)
    }
}

static EVALUATORS: [&dyn Evaluator; 3] = [&RecurrenceEval, &MatrixEval, &AnalyticEval];

/// Looks up an evaluator by registry name.
pub fn evaluator(name: &str) -> Option<&'static dyn Evaluator> {
    EVALUATORS.iter().copied().find(|e| e.name() == name)
}

pub fn evaluator_names() -> Vec<&'static str> {
    EVALUATORS.iter().map(|e| e.name()).collect()
}

/// Leading significant decimal digits on which a and b agree, capped at
/// `max_digits`. Sign or exponent disagreement counts as zero.
pub fn agreement_digits(a: &Real, b: &Real, max_digits: u32) -> u32 {
    let sa = real::to_decimal(a, max_digits.min(a.ctx().digits()));
    let sb = real::to_decimal(b, max_digits.min(b.ctx().digits()));
    agreement_digits_str(&sa, &sb)
}

/// Agreement count over two canonical decimal strings: 0 unless sign and
/// exponent match, else the length of the common significand prefix.
pub fn agreement_digits_str(a: &str, b: &str) -> u32 {
    let split = |s: &str| -> Option<(bool, String, String)> {
        let (neg, rest) = match s.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, s),
        };
        let (mant, exp) = rest.split_once('e')?;
        Some((neg, mant.replace('.', ""), exp.to_string()))
    };
    match (split(a), split(b)) {
        (Some((na, ma, ea)), Some((nb, mb, eb))) if na == nb && ea == eb => {
            ma.bytes().zip(mb.bytes()).take_while(|(x, y)| x == y).count() as u32
        }
        _ => 0,
    }
}
