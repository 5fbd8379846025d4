//! Secret-generation strategies over a fixed function set: combination
//! (per-prime repetition exponents), casket (multiset of functions), and
//! analytic (one huge integer degree). All three sit behind a common trait
//! and a name registry so a session can select one at runtime.
//!
//! Also hosts the parameter-sizing rules: the combination/casket counting
//! formulas, the security floor on drawn exponents, and the precision rule
//! digits = ceil(log10 d_max) + shared-window + guard.

use std::fmt;

use rug::ops::Pow;
use rug::Integer;

use crate::chebyshev::{compose_chain, t_analytic, ChainSpec};
use crate::error::{Error, Result};
use crate::real::{PrecisionCtx, Real};
use crate::rng::{uniform_u64, SecretRng};

/// First `m` primes starting at 2, by trial division (pools are small).
pub fn first_primes(m: usize) -> Vec<u64> {
    let mut primes: Vec<u64> = Vec::with_capacity(m);
    let mut candidate = 2u64;
    while primes.len() < m {
        if primes.iter().take_while(|&&p| p * p <= candidate).all(|&p| candidate % p != 0) {
            primes.push(candidate);
        }
        candidate += if candidate == 2 { 1 } else { 2 };
    }
    primes
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// The public function set: N distinct primes with per-prime repetition
/// bounds w_i, drawn from a pool of the first M primes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSet {
    primes: Vec<u64>,
    max_reps: Vec<u32>,
    pool_size: usize,
}

impl FunctionSet {
    /// Validating constructor used by suite parsing and tests.
    pub fn with_parts(primes: Vec<u64>, max_reps: Vec<u32>, pool_size: usize) -> Result<Self> {
        if primes.is_empty() || primes.len() != max_reps.len() {
            return Err(Error::Parameter(format!(
                "function set needs matching non-empty primes/max_reps, got {}/{}",
                primes.len(),
                max_reps.len()
            )));
        }
        if pool_size < primes.len() {
            return Err(Error::Parameter(format!(
                "pool size {} < set size {}",
                pool_size,
                primes.len()
            )));
        }
        let mut seen = primes.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != primes.len() {
            return Err(Error::Parameter("duplicate primes in function set".into()));
        }
        for &p in &primes {
            if !is_prime(p) {
                return Err(Error::Parameter(format!("{p} is not prime")));
            }
        }
        if max_reps.iter().any(|&w| w == 0) {
            return Err(Error::Parameter("every max_reps entry must be >= 1".into()));
        }
        Ok(FunctionSet { primes, max_reps, pool_size })
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn max_reps(&self) -> &[u32] {
        &self.max_reps
    }

    pub fn pool_size(&self) -> usize {
        self.pool_size
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    /// d_max = prod p_i^{w_i}: the sizing bound on any drawn exponent.
    /// Deliberately conservative: with v_i < w_i the bound is strict.
    pub fn d_max(&self) -> Integer {
        let mut d = Integer::from(1);
        for (&p, &w) in self.primes.iter().zip(&self.max_reps) {
            d *= Integer::from(p).pow(w);
        }
        d
    }
}

/// N distinct primes uniformly sampled from the first M primes; uniform
/// repetition bound w on every slot.
pub fn gen_function_set(
    n: usize,
    m: usize,
    w: u32,
    rng: &mut dyn SecretRng,
) -> Result<FunctionSet> {
    if n == 0 || m < n {
        return Err(Error::Parameter(format!("need pool M >= N >= 1, got N={n} M={m}")));
    }
    if w == 0 {
        return Err(Error::Parameter("repetition bound w must be >= 1".into()));
    }
    let mut pool = first_primes(m);
    // Partial Fisher-Yates: the first n slots end up a uniform n-subset.
    for i in 0..n {
        let j = i + uniform_u64(rng, (m - i) as u64) as usize;
        pool.swap(i, j);
    }
    let mut primes: Vec<u64> = pool[..n].to_vec();
    primes.sort_unstable();
    FunctionSet::with_parts(primes, vec![w; n], m)
}

/// s = prod w_i, the number of distinct combination draws.
pub fn combination_count(fs: &FunctionSet) -> Integer {
    let mut s = Integer::from(1);
    for &w in fs.max_reps() {
        s *= w;
    }
    s
}

/// Multisets of size r over n functions: binomial(n + r - 1, r), exact.
pub fn casket_count(n: u64, r: u32) -> Result<Integer> {
    if n < 1 || r < 1 {
        return Err(Error::Parameter(format!("casket_count needs n, r >= 1, got n={n} r={r}")));
    }
    Ok(Integer::from(n + r as u64 - 1).binomial(r))
}

/// One party's secret draw. Debug is redacted: selections must never reach
/// logs, panics included.
#[derive(Clone, PartialEq, Eq)]
pub enum SecretSelection {
    /// Exponent vector v over the set's primes, 0 <= v_i < w_i.
    Combination { primes: Vec<u64>, v: Vec<u32> },
    /// Multiset of drawn primes (sorted, repetitions allowed).
    Casket { multiset: Vec<u64> },
    /// One huge integer degree.
    Analytic { n: Integer },
}

impl fmt::Debug for SecretSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretSelection(<redacted>)")
    }
}

/// The composed degree d_v = prod p_i^{v_i}; Debug-redacted like the
/// selection it came from.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretExponent(Integer);

impl SecretExponent {
    pub fn value(&self) -> &Integer {
        &self.0
    }

    /// Decimal length of the exponent, a public quantity (it bounds the
    /// digit loss both parties already know how to size for).
    pub fn decimal_len(&self) -> usize {
        self.0.to_string().len()
    }
}

impl fmt::Debug for SecretExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretExponent(<redacted>)")
    }
}

/// Exact big-integer degree of a selection; order-independent over the
/// underlying multiset.
pub fn exponent_of(sel: &SecretSelection) -> SecretExponent {
    SecretExponent(raw_exponent(sel))
}

fn raw_exponent(sel: &SecretSelection) -> Integer {
    match sel {
        SecretSelection::Combination { primes, v } => {
            let mut d = Integer::from(1);
            for (&p, &vi) in primes.iter().zip(v) {
                d *= Integer::from(p).pow(vi);
            }
            d
        }
        SecretSelection::Casket { multiset } => {
            let mut d = Integer::from(1);
            for &p in multiset {
                d *= p;
            }
            d
        }
        SecretSelection::Analytic { n } => n.clone(),
    }
}

fn chain_of(sel: &SecretSelection) -> Result<Option<ChainSpec>> {
    match sel {
        SecretSelection::Combination { primes, v } => {
            let steps: Vec<(u64, u32)> =
                primes.iter().zip(v).map(|(&p, &vi)| (p, vi)).collect();
            Ok(Some(ChainSpec::new(steps)?))
        }
        SecretSelection::Casket { multiset } => {
            let mut steps: Vec<(u64, u32)> = Vec::new();
            for &p in multiset {
                match steps.last_mut() {
                    Some((q, c)) if *q == p => *c += 1,
                    _ => steps.push((p, 1)),
                }
            }
            Ok(Some(ChainSpec::new(steps)?))
        }
        SecretSelection::Analytic { .. } => Ok(None),
    }
}

/// T_{d_v}(x): chain composition for combination/casket selections,
/// cos(n arccos x) for analytic ones.
pub fn evaluate_secret(sel: &SecretSelection, x: &Real, ctx: PrecisionCtx) -> Result<Real> {
    match chain_of(sel)? {
        Some(chain) => compose_chain(&chain, x, ctx),
        None => match sel {
            SecretSelection::Analytic { n } => t_analytic(n, x, ctx),
            _ => unreachable!("chain_of covers non-analytic variants"),
        },
    }
}

/// Tunables for a draw: the security floor every exponent must clear, the
/// casket draw count r, the analytic digit range, and a resample budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DrawConfig {
    pub floor: Integer,
    pub casket_draws: u32,
    pub analytic_digits: (u32, u32),
    pub max_resamples: u32,
}

impl Default for DrawConfig {
    fn default() -> Self {
        DrawConfig {
            // Secrets must be at least order 10^39.
            floor: Integer::from(10).pow(39),
            casket_draws: 20,
            analytic_digits: (200, 600),
            max_resamples: 10_000,
        }
    }
}

/// A named secret-generation strategy, selectable at runtime.
pub trait Strategy: Send + Sync {
    fn name(&self) -> &'static str;
    /// One draw, floor not yet applied (draw_secret handles resampling).
    fn draw_raw(
        &self,
        fs: &FunctionSet,
        cfg: &DrawConfig,
        rng: &mut dyn SecretRng,
    ) -> SecretSelection;
    /// Number of distinct selections this strategy can produce.
    fn selection_count(&self, fs: &FunctionSet, cfg: &DrawConfig) -> Result<Integer>;
    /// Largest exponent any draw can reach (floor-reachability check).
    fn max_exponent(&self, fs: &FunctionSet, cfg: &DrawConfig) -> Integer;
}

pub struct CombinationStrategy;
pub struct CasketStrategy;
pub struct AnalyticStrategy;

impl Strategy for CombinationStrategy {
    fn name(&self) -> &'static str {
        "combination"
    }

    fn draw_raw(
        &self,
        fs: &FunctionSet,
        _cfg: &DrawConfig,
        rng: &mut dyn SecretRng,
    ) -> SecretSelection {
        let v: Vec<u32> = fs
            .max_reps()
            .iter()
            .map(|&w| uniform_u64(rng, w as u64) as u32)
            .collect();
        SecretSelection::Combination { primes: fs.primes().to_vec(), v }
    }

    fn selection_count(&self, fs: &FunctionSet, _cfg: &DrawConfig) -> Result<Integer> {
        Ok(combination_count(fs))
    }

    fn max_exponent(&self, fs: &FunctionSet, _cfg: &DrawConfig) -> Integer {
        let mut d = Integer::from(1);
        for (&p, &w) in fs.primes().iter().zip(fs.max_reps()) {
            d *= Integer::from(p).pow(w - 1);
        }
        d
    }
}

impl Strategy for CasketStrategy {
    fn name(&self) -> &'static str {
        "casket"
    }

    fn draw_raw(
        &self,
        fs: &FunctionSet,
        cfg: &DrawConfig,
        rng: &mut dyn SecretRng,
    ) -> SecretSelection {
        let n = fs.len() as u64;
        let mut multiset: Vec<u64> = (0..cfg.casket_draws)
            .map(|_| fs.primes()[uniform_u64(rng, n) as usize])
            .collect();
        multiset.sort_unstable();
        SecretSelection::Casket { multiset }
    }

    fn selection_count(&self, fs: &FunctionSet, cfg: &DrawConfig) -> Result<Integer> {
        casket_count(fs.len() as u64, cfg.casket_draws)
    }

    fn max_exponent(&self, fs: &FunctionSet, cfg: &DrawConfig) -> Integer {
        let p_max = *fs.primes().iter().max().expect("non-empty set");
        Integer::from(p_max).pow(cfg.casket_draws)
    }
}

impl Strategy for AnalyticStrategy {
    fn name(&self) -> &'static str {
        "analytic"
    }

    fn draw_raw(
        &self,
        _fs: &FunctionSet,
        cfg: &DrawConfig,
        rng: &mut dyn SecretRng,
    ) -> SecretSelection {
        let (lo, hi) = cfg.analytic_digits;
        // Uniform decimal length, then uniform among that length's integers.
        let len = lo as u64 + uniform_u64(rng, (hi - lo + 1) as u64);
        let mut digits = String::with_capacity(len as usize);
        digits.push(char::from(b'1' + uniform_u64(rng, 9) as u8));
        for _ in 1..len {
            digits.push(char::from(b'0' + uniform_u64(rng, 10) as u8));
        }
        SecretSelection::Analytic {
            n: Integer::from_str_radix(&digits, 10).expect("digit string"),
        }
    }

    fn selection_count(&self, _fs: &FunctionSet, cfg: &DrawConfig) -> Result<Integer> {
        let (lo, hi) = cfg.analytic_digits;
        if lo < 1 || hi < lo {
            return Err(Error::Parameter(format!(
                "analytic digit range ({lo}, {hi}) invalid"
            )));
        }
        Ok(Integer::from(10).pow(hi) - Integer::from(10).pow(lo - 1))
    }

    fn max_exponent(&self, _fs: &FunctionSet, cfg: &DrawConfig) -> Integer {
        Integer::from(10).pow(cfg.analytic_digits.1) - 1u32
    }
}

static STRATEGIES: [&dyn Strategy; 3] =
    [&CombinationStrategy, &CasketStrategy, &AnalyticStrategy];

/// Looks up a strategy by registry name.
pub fn strategy(name: &str) -> Option<&'static dyn Strategy> {
    STRATEGIES.iter().copied().find(|s| s.name() == name)
}

pub fn strategy_names() -> Vec<&'static str> {
    STRATEGIES.iter().map(|s| s.name()).collect()
}

/// Draws a selection and resamples until its exponent clears cfg.floor.
/// Unreachable floors fail fast; a reachable-but-unlucky streak fails
/// after cfg.max_resamples rather than spinning.
pub fn draw_secret(
    fs: &FunctionSet,
    strat: &dyn Strategy,
    cfg: &DrawConfig,
    rng: &mut dyn SecretRng,
) -> Result<SecretSelection> {
    if strat.max_exponent(fs, cfg) < cfg.floor {
        return Err(Error::Parameter(format!(
            "security floor {} unreachable for strategy {} on this set",
            cfg.floor,
            strat.name()
        )));
    }
    for _ in 0..cfg.max_resamples.max(1) {
        let sel = strat.draw_raw(fs, cfg, rng);
        if raw_exponent(&sel) >= cfg.floor {
            return Ok(sel);
        }
    }
    Err(Error::Parameter(format!(
        "no draw cleared the floor in {} resamples",
        cfg.max_resamples
    )))
}

/// Minimum working precision in decimal digits:
/// ceil(log10 d_max) + shared-digit window (50 at 128-bit, 90 at 256-bit)
/// + 10 guard digits. Both parties derive the identical number from the
/// suite alone.
pub fn required_precision(fs: &FunctionSet, security_bits: u32) -> Result<u32> {
    let window = shared_window_digits(security_bits)?;
    let d_max = fs.d_max();
    Ok(ceil_log10(&d_max) + window + 10)
}

/// Shared-digit requirement per security level: 50 digits at 128-bit,
/// 90 at 256-bit.
pub fn shared_window_digits(security_bits: u32) -> Result<u32> {
    match security_bits {
        128 => Ok(50),
        256 => Ok(90),
        other => Err(Error::Parameter(format!(
            "security_bits must be 128 or 256, got {other}"
        ))),
    }
}

/// ceil(log10 n) for n >= 1, exact (powers of ten handled).
pub fn ceil_log10(n: &Integer) -> u32 {
    let len = n.to_string().len() as u32;
    if *n == Integer::from(10).pow(len - 1) {
        len - 1
    } else {
        len
    }
}

/// log10 of a positive big integer, accurate to f64 (for histograms).
pub fn log10_integer(n: &Integer) -> f64 {
    debug_assert!(*n > 0);
    let bits = n.significant_bits();
    if bits <= 900 {
        n.to_f64().log10()
    } else {
        let shift = bits - 64;
        let top = Integer::from(n >> shift);
        top.to_f64().log10() + shift as f64 * std::f64::consts::LOG10_2
    }
}

/// Raw-draw magnitude statistics: samples of log10(exponent) with no floor
/// applied, so the sample mean is comparable to the closed-form
/// expectation (combination: sum (w_i - 1)/2 * log10 p_i).
#[derive(Debug, Clone)]
pub struct MagnitudeStats {
    pub samples: Vec<f64>,
    pub mean: f64,
    pub stddev: f64,
    pub analytic_mean: Option<f64>,
}

pub fn simulate_magnitude_distribution(
    fs: &FunctionSet,
    strat: &dyn Strategy,
    cfg: &DrawConfig,
    trials: u32,
    rng: &mut dyn SecretRng,
) -> Result<MagnitudeStats> {
    if trials < 1 {
        return Err(Error::Parameter("trials must be >= 1".into()));
    }
    let mut samples = Vec::with_capacity(trials as usize);
    for _ in 0..trials {
        let sel = strat.draw_raw(fs, cfg, rng);
        let d = raw_exponent(&sel);
        // Exponent 0 is impossible; exponent 1 contributes log10 = 0.
        samples.push(log10_integer(&d.max(Integer::from(1))));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    let analytic_mean = match strat.name() {
        "combination" => Some(
            fs.primes()
                .iter()
                .zip(fs.max_reps())
                .map(|(&p, &w)| (w as f64 - 1.0) / 2.0 * (p as f64).log10())
                .sum(),
        ),
        "casket" => {
            let mean_logp =
                fs.primes().iter().map(|&p| (p as f64).log10()).sum::<f64>() / fs.len() as f64;
            Some(cfg.casket_draws as f64 * mean_logp)
        }
        _ => None,
    };
    Ok(MagnitudeStats { samples, mean, stddev: var.sqrt(), analytic_mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::from_decimal;
    use crate::rng::insecure_seeded;

    fn tiny_fs() -> FunctionSet {
        FunctionSet::with_parts(vec![3, 5], vec![2, 2], 2).unwrap()
    }

    #[test]
    fn first_primes_prefix() {
        assert_eq!(first_primes(10), vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
    }

    #[test]
    fn pool_exhausted_gives_exact_primes() {
        let mut rng = insecure_seeded(3);
        let fs = gen_function_set(4, 4, 2, &mut rng).unwrap();
        assert_eq!(fs.primes(), &[2, 3, 5, 7]);
        assert_eq!(fs.pool_size(), 4);
    }

    #[test]
    fn gen_rejects_bad_shapes() {
        let mut rng = insecure_seeded(4);
        assert!(gen_function_set(5, 4, 2, &mut rng).is_err());
        assert!(gen_function_set(0, 4, 2, &mut rng).is_err());
        assert!(gen_function_set(2, 4, 0, &mut rng).is_err());
    }

    #[test]
    fn combination_counts() {
        let fs = FunctionSet::with_parts(vec![2, 3, 5], vec![2, 2, 2], 3).unwrap();
        assert_eq!(combination_count(&fs), 8);
        let mut rng = insecure_seeded(5);
        let fs64 = gen_function_set(64, 128, 4, &mut rng).unwrap();
        assert_eq!(combination_count(&fs64), Integer::from(1) << 128);
        let fs128 = gen_function_set(128, 128, 2, &mut rng).unwrap();
        assert_eq!(combination_count(&fs128), Integer::from(1) << 128);
    }

    #[test]
    fn casket_counts() {
        assert_eq!(casket_count(3, 2).unwrap(), 6);
        assert_eq!(casket_count(1, 5).unwrap(), 1);
        // Exhaustive multiset enumeration oracle at n=6, r=3.
        let mut count = 0u32;
        for a in 0..6u32 {
            for b in a..6 {
                for c in b..6 {
                    let _ = (a, b, c);
                    count += 1;
                }
            }
        }
        assert_eq!(casket_count(6, 3).unwrap(), count);
        assert_eq!(count, 56);
    }

    #[test]
    fn exponent_examples() {
        let sel = SecretSelection::Combination { primes: vec![3, 5], v: vec![1, 1] };
        assert_eq!(*exponent_of(&sel).value(), 15);
        let sel = SecretSelection::Casket { multiset: vec![3, 3, 5] };
        assert_eq!(*exponent_of(&sel).value(), 45);
    }

    #[test]
    fn exponent_matches_independent_product_oracle() {
        let mut rng = insecure_seeded(6);
        let fs = gen_function_set(64, 128, 4, &mut rng).unwrap();
        let strat = strategy("combination").unwrap();
        let sel = strat.draw_raw(&fs, &DrawConfig::default(), &mut rng);
        let SecretSelection::Combination { primes, v } = &sel else { panic!() };
        // Oracle: same product folded in reverse with repeated multiplies.
        let mut oracle = Integer::from(1);
        for (&p, &vi) in primes.iter().zip(v).rev() {
            for _ in 0..vi {
                oracle *= p;
            }
        }
        assert_eq!(*exponent_of(&sel).value(), oracle);
    }

    #[test]
    fn floor_resampling_excludes_small_exponents() {
        let fs = tiny_fs();
        let cfg = DrawConfig { floor: Integer::from(2), ..DrawConfig::default() };
        let strat = strategy("combination").unwrap();
        let mut rng = insecure_seeded(7);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..200 {
            let sel = draw_secret(&fs, strat, &cfg, &mut rng).unwrap();
            let e = exponent_of(&sel).value().to_u64().unwrap();
            assert!(e >= 2);
            seen.insert(e);
        }
        // Possible exponents {1,3,5,15}; the floor removes 1.
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![3, 5, 15]);
    }

    #[test]
    fn unreachable_floor_is_a_parameter_error() {
        let fs = FunctionSet::with_parts(vec![3, 5], vec![1, 1], 2).unwrap();
        let cfg = DrawConfig { floor: Integer::from(2), ..DrawConfig::default() };
        let mut rng = insecure_seeded(8);
        let err = draw_secret(&fs, strategy("combination").unwrap(), &cfg, &mut rng);
        assert!(matches!(err, Err(Error::Parameter(_))));
    }

    #[test]
    fn casket_and_analytic_draw_shapes() {
        let fs = tiny_fs();
        let cfg = DrawConfig {
            floor: Integer::from(2),
            casket_draws: 3,
            analytic_digits: (5, 8),
            ..DrawConfig::default()
        };
        let mut rng = insecure_seeded(9);
        let sel = draw_secret(&fs, strategy("casket").unwrap(), &cfg, &mut rng).unwrap();
        let SecretSelection::Casket { multiset } = &sel else { panic!() };
        assert_eq!(multiset.len(), 3);
        assert!(multiset.iter().all(|p| [3, 5].contains(p)));
        assert!(multiset.windows(2).all(|w| w[0] <= w[1]));

        let sel = draw_secret(&fs, strategy("analytic").unwrap(), &cfg, &mut rng).unwrap();
        let SecretSelection::Analytic { n } = &sel else { panic!() };
        let len = n.to_string().len();
        assert!((5..=8).contains(&len));
    }

    #[test]
    fn required_precision_formula() {
        let fs = tiny_fs(); // d_max = 225, ceil(log10) = 3
        assert_eq!(required_precision(&fs, 128).unwrap(), 63);
        assert_eq!(required_precision(&fs, 256).unwrap(), 103);
        assert!(required_precision(&fs, 192).is_err());
        // Monotone in every w_i.
        let bigger = FunctionSet::with_parts(vec![3, 5], vec![3, 2], 2).unwrap();
        assert!(required_precision(&bigger, 128).unwrap() >= 63);
    }

    #[test]
    fn required_precision_64_4() {
        // ceil(4 * sum log10 of first 64 primes) = ceil(501.16...) = 502.
        let mut rng = insecure_seeded(10);
        let fs = gen_function_set(64, 64, 4, &mut rng).unwrap();
        assert_eq!(required_precision(&fs, 128).unwrap(), 502 + 50 + 10);
    }

    #[test]
    fn ceil_log10_handles_powers_of_ten() {
        assert_eq!(ceil_log10(&Integer::from(1)), 0);
        assert_eq!(ceil_log10(&Integer::from(10)), 1);
        assert_eq!(ceil_log10(&Integer::from(11)), 2);
        assert_eq!(ceil_log10(&Integer::from(225)), 3);
        assert_eq!(ceil_log10(&Integer::from(1000)), 3);
    }

    #[test]
    fn evaluate_matches_direct_recurrence() {
        let ctx = PrecisionCtx::new(63).unwrap();
        let x = from_decimal("0.3", ctx).unwrap();
        let sel = SecretSelection::Combination { primes: vec![3, 5], v: vec![1, 1] };
        let via_sel = evaluate_secret(&sel, &x, ctx).unwrap();
        let direct = crate::chebyshev::t_recurrence(15, &x, ctx).unwrap();
        assert!(via_sel.abs_diff(&direct) < Real::pow10(4 - 63, ctx));
    }

    #[test]
    fn evaluate_casket_and_analytic() {
        let ctx = PrecisionCtx::new(63).unwrap();
        let x = from_decimal("0.3", ctx).unwrap();
        let casket = SecretSelection::Casket { multiset: vec![3, 3, 5] };
        let a = evaluate_secret(&casket, &x, ctx).unwrap();
        let b = crate::chebyshev::t_recurrence(45, &x, ctx).unwrap();
        assert!(a.abs_diff(&b) < Real::pow10(4 - 63, ctx));
        let analytic = SecretSelection::Analytic { n: Integer::from(45) };
        let c = evaluate_secret(&analytic, &x, ctx).unwrap();
        assert!(a.abs_diff(&c) < Real::pow10(4 - 63, ctx));
    }

    #[test]
    fn magnitude_mean_matches_expectation_tiny() {
        // E[log10 d] = 0.5 (log10 3 + log10 5) ~ 0.5880456.
        let fs = tiny_fs();
        let mut rng = insecure_seeded(11);
        let stats = simulate_magnitude_distribution(
            &fs,
            strategy("combination").unwrap(),
            &DrawConfig::default(),
            4000,
            &mut rng,
        )
        .unwrap();
        let expect = stats.analytic_mean.unwrap();
        assert!((expect - 0.588045629527840621).abs() < 1e-12);
        // Sample mean within 3 standard errors of the expectation.
        let se = stats.stddev / (stats.samples.len() as f64).sqrt();
        assert!((stats.mean - expect).abs() < 3.0 * se + 1e-9);
    }

    #[test]
    fn magnitude_mean_matches_expectation_64_4() {
        let mut rng = insecure_seeded(12);
        let fs = gen_function_set(64, 64, 4, &mut rng).unwrap();
        let stats = simulate_magnitude_distribution(
            &fs,
            strategy("combination").unwrap(),
            &DrawConfig::default(),
            3000,
            &mut rng,
        )
        .unwrap();
        // 1.5 * sum log10 of first 64 primes = 187.9355 on this pool.
        let expect = stats.analytic_mean.unwrap();
        assert!((expect - 187.9354992870054).abs() < 1e-9);
        assert!((stats.mean - expect).abs() / expect < 0.02);
    }

    #[test]
    fn secrets_debug_redacted() {
        let sel = SecretSelection::Combination { primes: vec![3, 5], v: vec![1, 1] };
        assert_eq!(format!("{sel:?}"), "SecretSelection(<redacted>)");
        assert_eq!(format!("{:?}", exponent_of(&sel)), "SecretExponent(<redacted>)");
    }

    #[test]
    fn registry_names() {
        assert_eq!(strategy_names(), vec!["combination", "casket", "analytic"]);
        assert!(strategy("combination").is_some());
        assert!(strategy("nope").is_none());
    }

    #[test]
    fn function_set_validation() {
        assert!(FunctionSet::with_parts(vec![4, 5], vec![2, 2], 2).is_err());
        assert!(FunctionSet::with_parts(vec![3, 3], vec![2, 2], 2).is_err());
        assert!(FunctionSet::with_parts(vec![3, 5], vec![2, 0], 2).is_err());
        assert!(FunctionSet::with_parts(vec![3, 5], vec![2, 2], 1).is_err());
        assert!(FunctionSet::with_parts(vec![], vec![], 0).is_err());
    }

    #[test]
    fn d_max_is_exact() {
        assert_eq!(tiny_fs().d_max(), 225);
    }
}
