//! Cryptanalytic procedures against the exchange: arccos-ratio recovery,
//! the diophantine sieve over rounded arccos parameters, and exhaustive
//! combination search. Failure is a legitimate, reported outcome.

use std::collections::HashSet;

use rug::ops::RemRounding;
use rug::Integer;

use crate::chebyshev::{agreement_digits, t_analytic, t_recurrence};
use crate::error::{Error, Result};
use crate::real::{self, from_integer, round_half_away, PrecisionCtx, Real};
use crate::strategy::{combination_count, evaluate_secret, FunctionSet, SecretSelection};

/// Lifts enumerated per residue class before giving up on it; keeps a
/// pathological gcd([e M], M) from exploding the candidate list.
const LIFTS_PER_CLASS: usize = 64;

fn check_open_interval(v: &Real, what: &str) -> Result<()> {
    let one = Real::from_u64(1, v.ctx());
    if v.abs() >= one {
        return Err(Error::Domain(format!("{what} must lie in (-1, 1)")));
    }
    Ok(())
}

/// arccos(y)/arccos(x), the quantity whose integrality over the branch
/// lattice encodes the secret degree: for y = T_n(x) it is congruent to
/// +-n modulo 2 pi / arccos(x).
pub fn arccos_ratio(y: &Real, x: &Real, ctx: PrecisionCtx) -> Result<Real> {
    check_open_interval(x, "x")?;
    check_open_interval(y, "y")?;
    let ax = real::arccos(x, ctx)?;
    // arccos(x) ~ 0 only within a few ulp of x = 1; the ratio is then
    // all rounding noise.
    let floor = Real::pow10(-((ctx.digits() / 2) as i32), ctx);
    if ax.abs() < floor {
        return Err(Error::Degenerate(format!(
            "arccos(x) below 10^-{}, ratio is unresolvable",
            ctx.digits() / 2
        )));
    }
    Ok(real::arccos(y, ctx)?.div(&ax))
}

/// The sieve parameters (d, e) with a_k = +-d + e k: d = arccos(y)/arccos(x),
/// e = 2 pi / arccos(x). Always e > 2 since arccos(x) < pi.
pub fn sieve_params(y: &Real, x: &Real, ctx: PrecisionCtx) -> Result<(Real, Real)> {
    let d = arccos_ratio(y, x, ctx)?;
    let two_pi = real::pi(ctx).add(&real::pi(ctx));
    let e = two_pi.div(&real::arccos(x, ctx)?);
    Ok((d, e))
}

/// One intercepted exchange reduced to sieve form.
pub struct SieveInstance {
    pub x: Real,
    pub y: Real,
    pub m: Integer,
    pub d: Real,
    pub e: Real,
}

impl SieveInstance {
    pub fn new(x: &Real, y: &Real, m: &Integer, ctx: PrecisionCtx) -> Result<SieveInstance> {
        if *m < 2 {
            return Err(Error::Parameter("sieve modulus M must be >= 2".into()));
        }
        let (d, e) = sieve_params(y, x, ctx)?;
        Ok(SieveInstance { x: x.clone(), y: y.clone(), m: m.clone(), d, e })
    }
}

/// The solution set of k a = b (mod M): `count` classes k = base + t step,
/// t in [0, count), all inside [0, M).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModularSolutions {
    pub base: Integer,
    pub step: Integer,
    pub count: Integer,
}

impl ModularSolutions {
    /// Ascending solutions in [0, M), at most `cap` of them.
    pub fn lift(&self, cap: usize) -> Vec<Integer> {
        let mut out = Vec::new();
        let mut k = self.base.clone();
        let mut left = self.count.clone();
        while left > 0 && out.len() < cap {
            out.push(k.clone());
            k += &self.step;
            left -= 1u32;
        }
        out
    }
}

/// Complete solution of the linear congruence k a = b (mod M) by extended
/// gcd: no solutions when gcd(a, M) does not divide b, else gcd(a, M)
/// residue classes modulo M. Exact integer arithmetic throughout.
pub fn solve_modular_linear(a: &Integer, b: &Integer, m: &Integer) -> Option<ModularSolutions> {
    assert!(*m >= 2, "modulus must be >= 2");
    let a = a.clone().rem_euc(m.clone());
    let b = b.clone().rem_euc(m.clone());
    let g = a.clone().gcd(m);
    if !b.is_divisible(&g) {
        return None;
    }
    let step = m.clone() / &g;
    if step == 1 {
        // a = 0 and b = 0 (mod M): every k solves it.
        return Some(ModularSolutions { base: Integer::ZERO, step: Integer::from(1), count: g });
    }
    let a_red = a / &g;
    let b_red = b / &g;
    let inv = a_red.invert(&step).expect("a/g coprime to M/g by construction");
    let base = (b_red * inv).rem_euc(step.clone());
    Some(ModularSolutions { base, step, count: g })
}

/// Per-candidate evidence row: how far T_candidate(x) agrees with y.
#[derive(Debug, Clone)]
pub struct CandidateReport {
    pub candidate: Integer,
    pub agreement_digits: u32,
    pub verified: bool,
}

/// Outcome of one attack run. `success` is honest: an empty or unverified
/// candidate list is a result, not an error.
#[derive(Debug)]
pub struct AttackResult {
    pub candidates: Vec<Integer>,
    pub verified: Option<Integer>,
    pub success: bool,
    pub work: u64,
    pub reports: Vec<CandidateReport>,
}

/// Accepts candidate n iff t_analytic(n, x) matches y on the first
/// digits - declen(n) - 5 digits, the scheme's own agreement window.
/// Returns (verified, measured agreement); degrees too large to leave a
/// window are unverifiable and cost no evaluation.
fn verify_candidate(
    n: &Integer,
    x: &Real,
    y: &Real,
    ctx: PrecisionCtx,
    work: &mut u64,
) -> Result<(bool, u32)> {
    let declen = n.to_string_radix(10).len() as u32;
    if declen + 5 >= ctx.digits() {
        return Ok((false, 0));
    }
    let want = ctx.digits() - declen - 5;
    let t = t_analytic(n, x, ctx)?;
    *work += 1;
    let agree = agreement_digits(&t, y, ctx.digits());
    Ok((agree >= want, agree))
}

/// The full sieve: round e M and +-d M to integers, solve the congruence
/// k [e M] = -+[d M] + j (mod M) for every slack j with |j| <= search_width,
/// lift each class to candidate degrees round(+-d + e k), verify each
/// against y. The slack absorbs the rounding residual, which for the true
/// (sign, k) is bounded by (k + 1)/2.
pub fn run_sieve_attack(
    x: &Real,
    y: &Real,
    ctx: PrecisionCtx,
    m: &Integer,
    search_width: u64,
) -> Result<AttackResult> {
    let inst = SieveInstance::new(x, y, m, ctx)?;
    let m_real = from_integer(m, ctx);
    let em = round_half_away(&inst.e.mul(&m_real));
    let dm = round_half_away(&inst.d.mul(&m_real));

    let mut seen: HashSet<Integer> = HashSet::new();
    let mut result = AttackResult {
        candidates: Vec::new(),
        verified: None,
        success: false,
        work: 0,
        reports: Vec::new(),
    };
    for sigma in [1i32, -1i32] {
        for j in -(search_width as i64)..=(search_width as i64) {
            let b = Integer::from(-sigma) * &dm + j;
            let Some(sol) = solve_modular_linear(&em, &b, m) else {
                continue;
            };
            for k in sol.lift(LIFTS_PER_CLASS) {
                // a_k = sigma d + e k, rounded to the nearest integer.
                let a = inst.e.mul(&from_integer(&k, ctx));
                let a = if sigma > 0 { inst.d.add(&a) } else { a.sub(&inst.d) };
                let n = round_half_away(&a);
                if n <= 0 || !seen.insert(n.clone()) {
                    continue;
                }
                let (ok, agree) = verify_candidate(&n, x, y, ctx, &mut result.work)?;
                result.candidates.push(n.clone());
                result.reports.push(CandidateReport {
                    candidate: n.clone(),
                    agreement_digits: agree,
                    verified: ok,
                });
                if ok && result.verified.is_none() {
                    result.verified = Some(n);
                }
            }
        }
    }
    result.success = result.verified.is_some();
    Ok(result)
}

/// Scans k in [0, k_max] for both signs looking for near-integral
/// +-d + e k; the independent cross-check for sieve completeness at toy
/// scale. Tolerance 10^-(digits/4) separates integral hits from noise.
pub fn brute_force_k_scan(
    x: &Real,
    y: &Real,
    ctx: PrecisionCtx,
    k_max: u64,
) -> Result<Vec<Integer>> {
    let (d, e) = sieve_params(y, x, ctx)?;
    let tol = Real::pow10(-((ctx.digits() / 4) as i32), ctx);
    let mut hits = Vec::new();
    let mut seen = HashSet::new();
    for k in 0..=k_max {
        let ek = e.mul(&Real::from_u64(k, ctx));
        for a in [d.add(&ek), ek.sub(&d)] {
            let n = round_half_away(&a);
            if n <= 0 {
                continue;
            }
            let gap = a.sub(&from_integer(&n, ctx)).abs();
            if gap < tol && seen.insert(n.clone()) {
                hits.push(n);
            }
        }
    }
    Ok(hits)
}

/// Exhaustive search over every v vector of the function set, the attack
/// the combination count is sized against. Refuses sets with more than
/// 2^24 combinations.
pub fn brute_force_combinations(
    fs: &FunctionSet,
    x: &Real,
    y: &Real,
    ctx: PrecisionCtx,
) -> Result<AttackResult> {
    let count = combination_count(fs);
    if count > (1u32 << 24) {
        return Err(Error::Parameter(format!(
            "{count} combinations exceed the 2^24 brute-force guard"
        )));
    }
    let mut result = AttackResult {
        candidates: Vec::new(),
        verified: None,
        success: false,
        work: 0,
        reports: Vec::new(),
    };
    let mut v = vec![0u32; fs.len()];
    loop {
        let sel = SecretSelection::Combination { primes: fs.primes().to_vec(), v: v.clone() };
        let exponent = crate::strategy::exponent_of(&sel);
        let n = exponent.value().clone();
        let t = evaluate_secret(&sel, x, ctx)?;
        result.work += 1;
        let declen = n.to_string_radix(10).len() as u32;
        if declen + 5 < ctx.digits() {
            let want = ctx.digits() - declen - 5;
            let agree = agreement_digits(&t, y, ctx.digits());
            if agree >= want {
                result.candidates.push(n.clone());
                result.reports.push(CandidateReport {
                    candidate: n.clone(),
                    agreement_digits: agree,
                    verified: true,
                });
                if result.verified.is_none() {
                    result.verified = Some(n);
                }
            }
        }
        // Mixed-radix increment over v_i in {0, .., w_i - 1}.
        let mut i = 0;
        loop {
            if i == v.len() {
                result.success = result.verified.is_some();
                return Ok(result);
            }
            v[i] += 1;
            if v[i] < fs.max_reps()[i] {
                break;
            }
            v[i] = 0;
            i += 1;
        }
    }
}

pub const DIVERGENCE_LOW_DIGITS: u32 = 16;
pub const DIVERGENCE_HIGH_DIGITS: u32 = 200;
pub const DIVERGENCE_MAX_DEGREE: u64 = 1_000_000;

/// How the two composition orders drift apart at low precision.
#[derive(Debug, Clone)]
pub struct DivergenceReport {
    pub degree: u64,
    /// Agreement digits of T_r(T_s(x)) vs T_s(T_r(x)) at 16 digits.
    pub agreement_low: u32,
    pub sign_match_low: bool,
    /// 1-based position of the first disagreeing digit at 16 digits;
    /// None when the whole window agrees.
    pub first_disagreeing_digit: Option<u32>,
    /// Agreement for the same inputs at 200 digits (the control).
    pub agreement_high: u32,
}

/// Compares T_r(T_s(x)) against T_s(T_r(x)) at 16 digits and again at a
/// 200-digit control. x is taken as a decimal literal so both runs start
/// from the same written number, not from one rounding of it.
pub fn double_precision_divergence(r: u64, s: u64, x_dec: &str) -> Result<DivergenceReport> {
    let degree = r
        .checked_mul(s)
        .filter(|d| *d <= DIVERGENCE_MAX_DEGREE)
        .ok_or_else(|| {
            Error::Parameter(format!("degree r*s must be <= 10^6, got {r}*{s}"))
        })?;
    let both_orders = |digits: u32| -> Result<(Real, Real)> {
        let ctx = PrecisionCtx::new(digits)?;
        let x = real::from_decimal(x_dec, ctx)?;
        let rs = t_recurrence(r, &t_recurrence(s, &x, ctx)?, ctx)?;
        let sr = t_recurrence(s, &t_recurrence(r, &x, ctx)?, ctx)?;
        Ok((rs, sr))
    };
    let (rs, sr) = both_orders(DIVERGENCE_LOW_DIGITS)?;
    let agreement_low = agreement_digits(&rs, &sr, DIVERGENCE_LOW_DIGITS);
    let sign_match_low = rs.is_negative() == sr.is_negative();
    let (rs_hi, sr_hi) = both_orders(DIVERGENCE_HIGH_DIGITS)?;
    Ok(DivergenceReport {
        degree,
        agreement_low,
        sign_match_low,
        first_disagreeing_digit: if agreement_low >= DIVERGENCE_LOW_DIGITS {
            None
        } else {
            Some(agreement_low + 1)
        },
        agreement_high: agreement_digits(&rs_hi, &sr_hi, DIVERGENCE_HIGH_DIGITS),
    })
}

/// CSV report: one row per candidate, schema `M,candidate,agreement_digits,
/// verified,work` with the run's total work in every row.
pub fn sieve_csv(m: &Integer, result: &AttackResult) -> String {
    let mut out = String::from("M,candidate,agreement_digits,verified,work\n");
    for row in &result.reports {
        out.push_str(&format!(
            "{m},{},{},{},{}\n",
            row.candidate, row.agreement_digits, row.verified, result.work
        ));
    }
    out
}
