//! Statistical and performance studies: per-position digit uniformity of
//! shared secrets, secret-magnitude distributions, and the storage/time
//! cost model with measured scaling exponents.

use std::time::Instant;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::chebyshev::compose_steps;
use crate::error::{Error, Result};
use crate::protocol::{pick_public_x, SessionConfig};
use crate::real;
use crate::rng::SecretRng;
use crate::strategy::{
    draw_secret, evaluate_secret, simulate_magnitude_distribution, FunctionSet, MagnitudeStats,
};
use crate::suite::SuiteDescriptor;

/// Decimal digit counts per significant-digit position over many values.
#[derive(Debug, Clone)]
pub struct DigitSample {
    counts: Vec<[u64; 10]>,
    n: u64,
}

impl DigitSample {
    pub fn new(positions: usize) -> DigitSample {
        assert!(positions >= 1, "need at least one position");
        DigitSample { counts: vec![[0; 10]; positions], n: 0 }
    }

    /// Records one value's digit string; it must cover every position.
    pub fn record(&mut self, digits: &str) {
        assert!(digits.len() >= self.counts.len(), "digit string too short");
        for (pos, b) in digits.bytes().take(self.counts.len()).enumerate() {
            assert!(b.is_ascii_digit(), "non-digit in sample");
            self.counts[pos][(b - b'0') as usize] += 1;
        }
        self.n += 1;
    }

    pub fn positions(&self) -> usize {
        self.counts.len()
    }

    pub fn sample_size(&self) -> u64 {
        self.n
    }

    /// Counts at 1-based position; each row sums to sample_size.
    pub fn counts_at(&self, position: usize) -> &[u64; 10] {
        &self.counts[position - 1]
    }
}

/// Draws `trials` shared values T_r(T_s(x)) on fresh (x, r, s) and tallies
/// the first `positions` significant digits of each.
pub fn sample_shared_digits(
    cfg: &SessionConfig,
    positions: usize,
    trials: u64,
    rng: &mut dyn SecretRng,
) -> Result<DigitSample> {
    if positions as u32 > cfg.ctx.digits() {
        return Err(Error::Parameter(format!(
            "{positions} positions exceed the {}-digit context",
            cfg.ctx.digits()
        )));
    }
    let mut sample = DigitSample::new(positions);
    let mut recorded = 0;
    // An exactly-zero shared value has no significant digits; vanishingly
    // rare, skipped with a bounded retry budget.
    let mut budget = trials + 16;
    while recorded < trials {
        if budget == 0 {
            return Err(Error::Precision("too many zero shared values".into()));
        }
        budget -= 1;
        let x = pick_public_x(cfg.ctx, rng);
        let r = draw_secret(&cfg.suite.fs, cfg.strategy, &cfg.suite.draw, rng)?;
        let s = draw_secret(&cfg.suite.fs, cfg.strategy, &cfg.suite.draw, rng)?;
        let shared = evaluate_secret(&r, &evaluate_secret(&s, &x, cfg.ctx)?, cfg.ctx)?;
        if shared.is_zero() {
            continue;
        }
        sample.record(&real::expansion_digits(&shared, positions as u32));
        recorded += 1;
    }
    Ok(sample)
}

/// One position's uniformity verdict.
#[derive(Debug, Clone)]
pub struct DigitUniformityRow {
    pub position: usize,
    pub counts: [u64; 10],
    pub chi2: f64,
    pub p_value: f64,
}

/// Upper-tail p-value of the chi-square statistic at 9 degrees of freedom
/// (10 digit cells minus 1).
pub fn chi2_p_value(chi2: f64) -> f64 {
    let dist = ChiSquared::new(9.0).expect("fixed dof");
    1.0 - dist.cdf(chi2)
}

/// Per-position chi-square against uniform(0..9). Positions are 1-based
/// and inclusive; sample size must be at least 500 so the expected count
/// per cell stays well above the chi-square approximation floor.
pub fn digit_uniformity(
    sample: &DigitSample,
    positions: std::ops::RangeInclusive<usize>,
) -> Result<Vec<DigitUniformityRow>> {
    if sample.sample_size() < 500 {
        return Err(Error::Parameter(format!(
            "sample size {} < 500, chi-square would be unreliable",
            sample.sample_size()
        )));
    }
    if *positions.start() < 1 || *positions.end() > sample.positions() {
        return Err(Error::Parameter(format!(
            "positions {positions:?} outside 1..={}",
            sample.positions()
        )));
    }
    let expected = sample.sample_size() as f64 / 10.0;
    Ok(positions
        .map(|pos| {
            let counts = *sample.counts_at(pos);
            let chi2 = counts
                .iter()
                .map(|&c| {
                    let d = c as f64 - expected;
                    d * d / expected
                })
                .sum();
            DigitUniformityRow { position: pos, counts, chi2, p_value: chi2_p_value(chi2) }
        })
        .collect())
}

/// CSV with schema `position,count_0..count_9,chi2,p`.
pub fn digit_csv(rows: &[DigitUniformityRow]) -> String {
    let mut out = String::from(
        "position,count_0,count_1,count_2,count_3,count_4,count_5,count_6,count_7,count_8,count_9,chi2,p\n",
    );
    for row in rows {
        out.push_str(&row.position.to_string());
        for c in row.counts {
            out.push(',');
            out.push_str(&c.to_string());
        }
        out.push_str(&format!(",{:.6},{:.8}\n", row.chi2, row.p_value));
    }
    out
}

/// Relative cost of a function set: storage = digits * sum(p_i),
/// time = digits^a * sum(p_i w_i), a in (1.4, 2] per the multiplication
/// algorithm in use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEstimate {
    pub storage_units: f64,
    pub time_units: f64,
}

pub fn estimate_cost(fs: &FunctionSet, digits: u32, a: f64) -> Result<CostEstimate> {
    if !(a > 1.4 && a <= 2.0) {
        return Err(Error::Parameter(format!("exponent a = {a} outside (1.4, 2]")));
    }
    let sum_p: f64 = fs.primes().iter().map(|&p| p as f64).sum();
    let sum_pw: f64 =
        fs.primes().iter().zip(fs.max_reps()).map(|(&p, &w)| p as f64 * w as f64).sum();
    Ok(CostEstimate {
        storage_units: digits as f64 * sum_p,
        time_units: (digits as f64).powf(a) * sum_pw,
    })
}

#[derive(Debug, Clone)]
pub struct ScalingRow {
    pub suite: String,
    pub digits: u32,
    pub median_seconds: f64,
    /// max - min over the repetitions, the reported variance proxy.
    pub spread_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ScalingFit {
    pub suite: String,
    pub exponent: f64,
}

#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub fits: Vec<ScalingFit>,
}

/// Times the full-weight evaluation chain of each suite over a digit grid
/// and fits log(median time) against log(digits); the slope estimates the
/// multiplication exponent a.
pub fn measure_scaling(
    suites: &[&SuiteDescriptor],
    digit_grid: &[u32],
    repetitions: u32,
) -> Result<ScalingReport> {
    if digit_grid.len() < 2 {
        return Err(Error::Parameter("digit grid needs at least two points".into()));
    }
    if repetitions < 1 {
        return Err(Error::Parameter("need at least one repetition".into()));
    }
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for suite in suites {
        let steps: Vec<(u64, u32)> =
            suite.fs.primes().iter().zip(suite.fs.max_reps()).map(|(&p, &w)| (p, w)).collect();
        let mut points = Vec::new();
        for &digits in digit_grid {
            let ctx = real::PrecisionCtx::new(digits)?;
            let x = real::from_decimal("0.437", ctx)?;
            // Warm-up evaluation outside the timed runs.
            compose_steps(&steps, &x, ctx)?;
            let mut times = Vec::with_capacity(repetitions as usize);
            for _ in 0..repetitions {
                let start = Instant::now();
                let out = compose_steps(&steps, &x, ctx)?;
                times.push(start.elapsed().as_secs_f64());
                assert!(!out.is_zero(), "evaluation must not be optimized away");
            }
            times.sort_by(|a, b| a.total_cmp(b));
            let median = times[times.len() / 2];
            rows.push(ScalingRow {
                suite: suite.name.clone(),
                digits,
                median_seconds: median,
                spread_seconds: times[times.len() - 1] - times[0],
            });
            points.push(((digits as f64).ln(), median.max(1e-9).ln()));
        }
        fits.push(ScalingFit { suite: suite.name.clone(), exponent: least_squares_slope(&points) });
    }
    Ok(ScalingReport { rows, fits })
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// CSV with schema `suite,digits,median_seconds,spread_seconds`.
pub fn scaling_csv(report: &ScalingReport) -> String {
    let mut out = String::from("suite,digits,median_seconds,spread_seconds\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{:.9},{:.9}\n",
            row.suite, row.digits, row.median_seconds, row.spread_seconds
        ));
    }
    out
}

/// CSV with schema `suite,fitted_exponent`.
pub fn scaling_fit_csv(report: &ScalingReport) -> String {
    let mut out = String::from("suite,fitted_exponent\n");
    for fit in &report.fits {
        out.push_str(&format!("{},{:.4}\n", fit.suite, fit.exponent));
    }
    out
}

#[derive(Debug, Clone)]
pub struct MagnitudeBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    /// Normal-approximation expected count from the analytic mean/stddev.
    pub expected: f64,
}

#[derive(Debug)]
pub struct MagnitudeReport {
    pub stats: MagnitudeStats,
    pub analytic_stddev: f64,
    pub bins: Vec<MagnitudeBin>,
}

/// Histogram of log10(secret exponent) over raw combination draws, with
/// the analytic normal overlay (mean Σ E[v_i] log10 p_i, variance
/// Σ Var[v_i] log10(p_i)^2, v_i uniform on {0..w_i-1}).
pub fn magnitude_report(
    fs: &FunctionSet,
    trials: u32,
    bin_count: usize,
    rng: &mut dyn SecretRng,
) -> Result<MagnitudeReport> {
    if trials < 1000 {
        return Err(Error::Parameter(format!("need >= 1000 trials, got {trials}")));
    }
    if bin_count < 2 {
        return Err(Error::Parameter("need at least two bins".into()));
    }
    let strat = crate::strategy::strategy("combination").expect("registered");
    let draw = crate::suite::default_draw_for(fs);
    let stats = simulate_magnitude_distribution(fs, strat, &draw, trials, rng)?;
    let analytic_var: f64 = fs
        .primes()
        .iter()
        .zip(fs.max_reps())
        .map(|(&p, &w)| {
            let w = w as f64;
            (w * w - 1.0) / 12.0 * (p as f64).log10().powi(2)
        })
        .sum();
    let analytic_stddev = analytic_var.sqrt();
    let lo = stats.samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = stats.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / bin_count as f64).max(f64::MIN_POSITIVE);
    let mut bins: Vec<MagnitudeBin> = (0..bin_count)
        .map(|i| {
            let b_lo = lo + width * i as f64;
            let b_hi = b_lo + width;
            let mean = stats.analytic_mean.expect("combination has analytic mean");
            // Expected count: n * P(bin) under N(mean, stddev^2).
            let z = |v: f64| (v - mean) / analytic_stddev / std::f64::consts::SQRT_2;
            let p = 0.5 * (erf_approx(z(b_hi)) - erf_approx(z(b_lo)));
            MagnitudeBin { lo: b_lo, hi: b_hi, count: 0, expected: p * trials as f64 }
        })
        .collect();
    for &s in &stats.samples {
        let idx = (((s - lo) / width) as usize).min(bin_count - 1);
        bins[idx].count += 1;
    }
    Ok(MagnitudeReport { stats, analytic_stddev, bins })
}

/// Abramowitz-Stegun 7.1.26 rational approximation, |error| < 1.5e-7:
/// ample for an overlay curve.
fn erf_approx(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// CSV with schema `bin_lo,bin_hi,count,expected`.
pub fn magnitude_csv(report: &MagnitudeReport) -> String {
    let mut out = String::from("bin_lo,bin_hi,count,expected\n");
    for bin in &report.bins {
        out.push_str(&format!(
            "{:.6},{:.6},{},{:.3}\n",
            bin.lo, bin.hi, bin.count, bin.expected
        ));
    }
    out
}

/// Unimodality after a window-3 moving average: the smoothed counts must
/// rise to a single peak and then fall. Moves smaller than 2% of the peak
/// are sampling noise and do not count as direction changes.
pub fn is_unimodal_smoothed(counts: &[u64]) -> bool {
    if counts.len() < 3 {
        return true;
    }
    let smoothed: Vec<f64> = (0..counts.len())
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(counts.len() - 1);
            counts[lo..=hi].iter().sum::<u64>() as f64 / (hi - lo + 1) as f64
        })
        .collect();
    let eps = 0.02 * smoothed.iter().cloned().fold(0.0f64, f64::max);
    let mut falling = false;
    for w in smoothed.windows(2) {
        if w[1] > w[0] + eps && falling {
            return false;
        }
        if w[1] < w[0] - eps {
            falling = true;
        }
    }
    true
}
