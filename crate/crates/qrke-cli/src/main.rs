//! Command-line front end: suite inspection, handshakes over TCP or
//! files, attack experiments, and analysis runs. Prints fingerprints,
//! never key or secret material.

use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rug::Integer;

use qrke::analysis;
use qrke::attack;
use qrke::chebyshev::t_analytic;
use qrke::error::{Error, Result};
use qrke::protocol::{KeyMaterial, SessionConfig};
use qrke::real::{from_decimal, PrecisionCtx};
use qrke::rng::{insecure_seeded, os_rng, SecretRng};
use qrke::strategy::{
    casket_count, combination_count, draw_secret, evaluate_secret, exponent_of,
};
use qrke::suite::{find_suite, shipped_suites, SuiteDescriptor};
use qrke::wire::offline::{
    finalize_from_file, offer_to_file, respond_to_file, OfflineFinalize, RespondOutcome,
};
use qrke::wire::tcp::{run_initiator, serve_connection, TransportConfig};

#[derive(Parser)]
#[command(name = "qrke", version, about = "Chebyshev-polynomial key exchange workbench")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Inspect parameter suites
    #[command(subcommand)]
    Suite(SuiteCmd),
    /// Run handshakes over TCP or envelope files
    #[command(subcommand)]
    Kex(KexCmd),
    /// Run attack experiments, writing CSV evidence
    #[command(subcommand)]
    Attack(AttackCmd),
    /// Run statistical and performance analyses, writing CSV
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
}

#[derive(Subcommand)]
enum SuiteCmd {
    /// List shipped suites with their descriptor lines
    List,
    /// Show one suite in detail
    Show {
        /// Suite name (shipped, or a <name>.suite file under QRKE_SUITE_DIR)
        name: String,
    },
}

#[derive(Args)]
struct RngArgs {
    /// Deterministic RNG seed; test use only, needs --insecure-test-seed
    #[arg(long)]
    seed: Option<u64>,
    /// Acknowledge that a seeded run is NOT secure
    #[arg(long)]
    insecure_test_seed: bool,
}

impl RngArgs {
    fn rng(&self) -> Result<Box<dyn SecretRng>> {
        match self.seed {
            None => Ok(Box::new(os_rng())),
            Some(s) if self.insecure_test_seed => Ok(Box::new(insecure_seeded(s))),
            Some(_) => Err(Error::Parameter(
                "--seed makes keys predictable; pass --insecure-test-seed to confirm".into(),
            )),
        }
    }
}

#[derive(Args)]
struct SessionArgs {
    /// Suite name
    #[arg(long, default_value = "4-2")]
    suite: String,
    /// Secret strategy: combination, casket, or analytic
    #[arg(long)]
    strategy: Option<String>,
    /// Working precision override in decimal digits
    #[arg(long)]
    digits: Option<u32>,
}

impl SessionArgs {
    fn config(&self) -> Result<SessionConfig> {
        let mut cfg = SessionConfig::new(load_suite(&self.suite)?)?;
        if let Some(s) = &self.strategy {
            cfg = cfg.with_strategy(s)?;
        }
        if let Some(d) = self.digits {
            cfg = cfg.with_digits(d)?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum KexCmd {
    /// Accept handshakes as the responder
    Serve {
        /// Address to listen on, e.g. 127.0.0.1:7100
        #[arg(long)]
        listen: String,
        #[command(flatten)]
        session: SessionArgs,
        #[command(flatten)]
        rng: RngArgs,
        /// Write the agreed key (hex) to this file, mode 0600; needs --once
        #[arg(long)]
        emit_key: Option<PathBuf>,
        /// Serve a single session, then exit
        #[arg(long)]
        once: bool,
        /// Per-message socket timeout in seconds
        #[arg(long, default_value_t = 30)]
        timeout_secs: u64,
    },
    /// Dial a responder as the initiator
    Connect {
        /// Responder address, e.g. 127.0.0.1:7100
        addr: String,
        #[command(flatten)]
        session: SessionArgs,
        #[command(flatten)]
        rng: RngArgs,
        /// Write the agreed key (hex) to this file, mode 0600
        #[arg(long)]
        emit_key: Option<PathBuf>,
        /// Per-message socket timeout in seconds
        #[arg(long, default_value_t = 30)]
        timeout_secs: u64,
    },
    /// File-based handshake, one envelope per invocation
    #[command(subcommand)]
    Offline(OfflineCmd),
}

#[derive(Subcommand)]
enum OfflineCmd {
    /// Start a session: write an OFFER envelope and the session state
    Offer {
        #[command(flatten)]
        session: SessionArgs,
        #[command(flatten)]
        rng: RngArgs,
        /// Envelope file to write
        #[arg(long)]
        out: PathBuf,
        /// Session state file (created mode 0600)
        #[arg(long)]
        state: PathBuf,
    },
    /// Answer an OFFER, RESUME, or CONFIRM envelope
    Respond {
        #[command(flatten)]
        session: SessionArgs,
        #[command(flatten)]
        rng: RngArgs,
        /// Envelope file to read
        #[arg(long = "in")]
        input: PathBuf,
        /// Envelope file to write (required for OFFER and RESUME)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Session state file (created mode 0600)
        #[arg(long)]
        state: PathBuf,
    },
    /// Consume a RESPOND envelope: confirm, resume, or fail
    Finalize {
        #[command(flatten)]
        rng: RngArgs,
        /// Envelope file to read
        #[arg(long = "in")]
        input: PathBuf,
        /// Envelope file to write (CONFIRM or RESUME)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Session state file from the offer step
        #[arg(long)]
        state: PathBuf,
    },
}

#[derive(Subcommand)]
enum AttackCmd {
    /// Diophantine sieve against a planted T_degree(x)
    Sieve {
        /// Public point x as a decimal literal
        #[arg(long, default_value = "0.3")]
        x: String,
        /// Planted secret degree
        #[arg(long, default_value_t = 15)]
        degree: u64,
        /// Working precision in decimal digits
        #[arg(long, default_value_t = 30)]
        digits: u32,
        /// Sieve modulus M
        #[arg(long, default_value = "1000000")]
        modulus: String,
        /// Residue slack scanned around each rounded target
        #[arg(long, default_value_t = 512)]
        width: u64,
        /// CSV report path (columns M,candidate,agreement_digits,verified,work)
        #[arg(long, default_value = "sieve.csv")]
        out: PathBuf,
    },
    /// Exhaustive combination search against a planted suite secret
    Brute {
        #[command(flatten)]
        session: SessionArgs,
        #[command(flatten)]
        rng: RngArgs,
        /// Public point x as a decimal literal
        #[arg(long, default_value = "0.44")]
        x: String,
        /// CSV report path (the M column carries the combination count)
        #[arg(long, default_value = "brute.csv")]
        out: PathBuf,
    },
    /// Composition-order divergence at 16 digits vs a 200-digit control
    DoubleDemo {
        /// First composed degree
        #[arg(long, default_value_t = 31)]
        r: u64,
        /// Second composed degree
        #[arg(long, default_value_t = 37)]
        s: u64,
        /// Public point x as a decimal literal
        #[arg(long, default_value = "0.3")]
        x: String,
        /// Optional CSV report path
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    /// Per-position digit uniformity of shared secrets (chi-square)
    Digits {
        #[command(flatten)]
        session: SessionArgs,
        #[command(flatten)]
        rng: RngArgs,
        /// Shared secrets to sample
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        /// Leading positions to test (1..=N)
        #[arg(long, default_value_t = 40)]
        positions: usize,
        /// CSV report path (columns position,count_0..count_9,chi2,p)
        #[arg(long, default_value = "digits.csv")]
        out: PathBuf,
    },
    /// Histogram of log10(secret exponent) with analytic overlay
    Magnitude {
        #[command(flatten)]
        session: SessionArgs,
        #[command(flatten)]
        rng: RngArgs,
        /// Raw draws to histogram
        #[arg(long, default_value_t = 10000)]
        trials: u32,
        /// Histogram bin count
        #[arg(long, default_value_t = 40)]
        bins: usize,
        /// CSV report path (columns bin_lo,bin_hi,count,expected)
        #[arg(long, default_value = "magnitude.csv")]
        out: PathBuf,
    },
    /// Wall-time scaling over a digit grid with a fitted exponent
    Scaling {
        /// Suites to measure (repeatable)
        #[arg(long = "suite", default_values_t = [String::from("32-8")])]
        suites: Vec<String>,
        /// Digit grid, comma separated
        #[arg(long, value_delimiter = ',', default_values_t = [1000u32, 2000, 4000])]
        grid: Vec<u32>,
        /// Repetitions per grid point (fit uses medians)
        #[arg(long, default_value_t = 3)]
        reps: u32,
        /// Raw timing CSV path (columns suite,digits,median_seconds,spread_seconds)
        #[arg(long, default_value = "scaling.csv")]
        out: PathBuf,
        /// Fit CSV path (columns suite,fitted_exponent)
        #[arg(long, default_value = "scaling-fit.csv")]
        fit_out: PathBuf,
    },
    /// Storage and time cost estimates from the suite formulas
    Cost {
        #[command(flatten)]
        session: SessionArgs,
        /// Multiplication exponent a in (1.4, 2]
        #[arg(long, default_value_t = 2.0)]
        exponent: f64,
        /// Optional CSV report path
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_suite(name: &str) -> Result<SuiteDescriptor> {
    let dir = std::env::var_os("QRKE_SUITE_DIR").map(PathBuf::from);
    find_suite(name, dir.as_deref())
}

/// Key files are written owner-only; everything else is normal CSV.
fn write_key_file(path: &Path, key: &KeyMaterial) -> Result<()> {
    let mut opts = fs::OpenOptions::new();
    opts.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    let mut f = opts.open(path)?;
    writeln!(f, "{}", hex::encode(&key.key))?;
    Ok(())
}

fn finish_key(key: &KeyMaterial, emit_key: Option<&Path>) -> Result<()> {
    println!("fingerprint: {}", key.fingerprint());
    if let Some(path) = emit_key {
        write_key_file(path, key)?;
        println!("key written to {} (mode 0600)", path.display());
    }
    Ok(())
}

fn cmd_suite(cmd: SuiteCmd) -> Result<()> {
    match cmd {
        SuiteCmd::List => {
            for s in shipped_suites() {
                println!("{}  [required precision {} digits]", s.line(), s.digits);
            }
        }
        SuiteCmd::Show { name } => {
            let s = load_suite(&name)?;
            println!("{}", s.line());
            println!("id: {}", s.id());
            println!("security: {} bits", s.security_bits);
            println!("required precision: {} digits", s.digits);
            println!("combinations: {}", combination_count(&s.fs));
            println!(
                "caskets (r = {}): {}",
                s.fs.len(),
                casket_count(s.fs.pool_size() as u64, s.fs.len() as u32)?
            );
            println!("d_max digits: {}", s.fs.d_max().to_string().len());
        }
    }
    Ok(())
}

fn cmd_kex(cmd: KexCmd) -> Result<()> {
    match cmd {
        KexCmd::Serve { listen, session, rng, emit_key, once, timeout_secs } => {
            if emit_key.is_some() && !once {
                return Err(Error::Parameter("--emit-key needs --once".into()));
            }
            let cfg = session.config()?;
            let tcfg = TransportConfig { timeout: std::time::Duration::from_secs(timeout_secs) };
            let listener = TcpListener::bind(&listen)?;
            println!("listening on {}", listener.local_addr()?);
            let mut rng = rng.rng()?;
            loop {
                let (stream, peer) = listener.accept()?;
                if once {
                    let key = serve_connection(stream, &cfg, &mut *rng, &tcfg)?;
                    println!("session with {peer} complete");
                    finish_key(&key, emit_key.as_deref())?;
                    return Ok(());
                }
                let cfg = cfg.clone();
                let tcfg = tcfg.clone();
                std::thread::spawn(move || {
                    let mut rng = os_rng();
                    match serve_connection(stream, &cfg, &mut rng, &tcfg) {
                        Ok(key) => {
                            println!("session with {peer}: fingerprint {}", key.fingerprint())
                        }
                        Err(e) => eprintln!("session with {peer} failed: {e}"),
                    }
                });
            }
        }
        KexCmd::Connect { addr, session, rng, emit_key, timeout_secs } => {
            let cfg = session.config()?;
            let tcfg = TransportConfig { timeout: std::time::Duration::from_secs(timeout_secs) };
            let mut rng = rng.rng()?;
            let key = run_initiator(&addr, &cfg, &mut *rng, &tcfg)?;
            finish_key(&key, emit_key.as_deref())
        }
        KexCmd::Offline(cmd) => cmd_offline(cmd),
    }
}

fn cmd_offline(cmd: OfflineCmd) -> Result<()> {
    match cmd {
        OfflineCmd::Offer { session, rng, out, state } => {
            let cfg = session.config()?;
            let mut rng = rng.rng()?;
            offer_to_file(&cfg, &mut *rng, &out, &state)?;
            println!("offer written to {}", out.display());
            println!("state written to {} (mode 0600)", state.display());
            Ok(())
        }
        OfflineCmd::Respond { session, rng, input, out, state } => {
            let cfg = session.config()?;
            let mut rng = rng.rng()?;
            match respond_to_file(&cfg, &mut *rng, &input, out.as_deref(), &state)? {
                RespondOutcome::Responded { key } => {
                    println!(
                        "respond written to {}",
                        out.expect("responded implies an output envelope").display()
                    );
                    println!("fingerprint: {}", key.fingerprint());
                }
                RespondOutcome::ConfirmAccepted { fingerprint } => {
                    println!("confirm accepted");
                    println!("fingerprint: {fingerprint}");
                }
            }
            Ok(())
        }
        OfflineCmd::Finalize { rng, input, out, state } => {
            let mut rng = rng.rng()?;
            match finalize_from_file(&mut *rng, &input, out.as_deref(), &state)? {
                OfflineFinalize::Confirmed { key } => {
                    if let Some(out) = out {
                        println!("confirm written to {}", out.display());
                    }
                    println!("fingerprint: {}", key.fingerprint());
                    Ok(())
                }
                OfflineFinalize::Resumed => {
                    println!(
                        "tags disagreed; resume written to {}",
                        out.expect("resume implies an output envelope").display()
                    );
                    println!("run respond and finalize again with the new envelopes");
                    Ok(())
                }
                OfflineFinalize::Failed { diagnostic } => Err(Error::Protocol(diagnostic)),
            }
        }
    }
}

fn parse_modulus(s: &str) -> Result<Integer> {
    Integer::parse(s)
        .map(Integer::from)
        .map_err(|_| Error::Parameter(format!("bad modulus {s:?}")))
}

fn cmd_attack(cmd: AttackCmd) -> Result<()> {
    match cmd {
        AttackCmd::Sieve { x, degree, digits, modulus, width, out } => {
            let ctx = PrecisionCtx::new(digits)?;
            let x = from_decimal(&x, ctx)?;
            let m = parse_modulus(&modulus)?;
            let y = t_analytic(&Integer::from(degree), &x, ctx)?;
            let res = attack::run_sieve_attack(&x, &y, ctx, &m, width)?;
            fs::write(&out, attack::sieve_csv(&m, &res))?;
            println!("csv written to {}", out.display());
            println!("candidates: {}   verifications: {}", res.candidates.len(), res.work);
            match &res.verified {
                Some(n) => println!("verified candidate: {n} (planted {degree})"),
                None => println!("no verified candidate (planted {degree} not recovered)"),
            }
            Ok(())
        }
        AttackCmd::Brute { session, rng, x, out } => {
            let cfg = session.config()?;
            let mut rng = rng.rng()?;
            let x = from_decimal(&x, cfg.ctx)?;
            let planted = draw_secret(&cfg.suite.fs, cfg.strategy, &cfg.suite.draw, &mut *rng)?;
            let y = evaluate_secret(&planted, &x, cfg.ctx)?;
            let res = attack::brute_force_combinations(&cfg.suite.fs, &x, &y, cfg.ctx)?;
            fs::write(&out, attack::sieve_csv(&combination_count(&cfg.suite.fs), &res))?;
            println!("csv written to {}", out.display());
            println!("evaluations: {}", res.work);
            match &res.verified {
                Some(n) => println!(
                    "recovered exponent: {n} (matches planted: {})",
                    *n == *exponent_of(&planted).value()
                ),
                None => println!("no combination reproduced the intercepted value"),
            }
            Ok(())
        }
        AttackCmd::DoubleDemo { r, s, x, out } => {
            let rep = attack::double_precision_divergence(r, s, &x)?;
            println!("degree {}: {} of 16 digits agree at low precision", rep.degree, rep.agreement_low);
            println!("signs match: {}", rep.sign_match_low);
            match rep.first_disagreeing_digit {
                Some(p) => println!("first disagreeing digit: position {p}"),
                None => println!("no disagreement within the 16-digit window"),
            }
            println!("200-digit control agreement: {} digits", rep.agreement_high);
            if let Some(out) = out {
                fs::write(
                    &out,
                    format!(
                        "degree,agreement_low,sign_match_low,first_disagreeing_digit,agreement_high\n{},{},{},{},{}\n",
                        rep.degree,
                        rep.agreement_low,
                        rep.sign_match_low,
                        rep.first_disagreeing_digit.map(|p| p.to_string()).unwrap_or_default(),
                        rep.agreement_high
                    ),
                )?;
                println!("csv written to {}", out.display());
            }
            Ok(())
        }
    }
}

fn cmd_analyze(cmd: AnalyzeCmd) -> Result<()> {
    match cmd {
        AnalyzeCmd::Digits { session, rng, trials, positions, out } => {
            let cfg = session.config()?;
            let mut rng = rng.rng()?;
            let sample = analysis::sample_shared_digits(&cfg, positions, trials, &mut *rng)?;
            let rows = analysis::digit_uniformity(&sample, 1..=positions)?;
            fs::write(&out, analysis::digit_csv(&rows))?;
            println!("csv written to {}", out.display());
            let skewed: Vec<String> = rows
                .iter()
                .filter(|r| r.p_value < 0.01)
                .map(|r| r.position.to_string())
                .collect();
            println!(
                "non-uniform positions (p < 0.01): {}",
                if skewed.is_empty() { "none".into() } else { skewed.join(",") }
            );
            Ok(())
        }
        AnalyzeCmd::Magnitude { session, rng, trials, bins, out } => {
            let cfg = session.config()?;
            let mut rng = rng.rng()?;
            let report = analysis::magnitude_report(&cfg.suite.fs, trials, bins, &mut *rng)?;
            fs::write(&out, analysis::magnitude_csv(&report))?;
            println!("csv written to {}", out.display());
            println!(
                "log10 exponent: mean {:.4} (analytic {:.4}), stddev {:.4}",
                report.stats.mean,
                report.stats.analytic_mean.unwrap_or(f64::NAN),
                report.stats.stddev
            );
            let counts: Vec<u64> = report.bins.iter().map(|b| b.count).collect();
            println!("unimodal: {}", analysis::is_unimodal_smoothed(&counts));
            Ok(())
        }
        AnalyzeCmd::Scaling { suites, grid, reps, out, fit_out } => {
            let descriptors: Vec<SuiteDescriptor> =
                suites.iter().map(|n| load_suite(n)).collect::<Result<_>>()?;
            let refs: Vec<&SuiteDescriptor> = descriptors.iter().collect();
            let report = analysis::measure_scaling(&refs, &grid, reps)?;
            fs::write(&out, analysis::scaling_csv(&report))?;
            fs::write(&fit_out, analysis::scaling_fit_csv(&report))?;
            println!("csv written to {} and {}", out.display(), fit_out.display());
            for fit in &report.fits {
                println!("suite {}: fitted exponent {:.3}", fit.suite, fit.exponent);
            }
            Ok(())
        }
        AnalyzeCmd::Cost { session, exponent, out } => {
            let suite = load_suite(&session.suite)?;
            let digits = session.digits.unwrap_or(suite.digits);
            let est = analysis::estimate_cost(&suite.fs, digits, exponent)?;
            println!(
                "suite {} at {} digits, a = {}: storage {} units, time {} units",
                suite.name, digits, exponent, est.storage_units, est.time_units
            );
            if let Some(out) = out {
                fs::write(
                    &out,
                    format!(
                        "suite,digits,exponent,storage_units,time_units\n{},{},{},{},{}\n",
                        suite.name, digits, exponent, est.storage_units, est.time_units
                    ),
                )?;
                println!("csv written to {}", out.display());
            }
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Suite(cmd) => cmd_suite(cmd),
        Cmd::Kex(cmd) => cmd_kex(cmd),
        Cmd::Attack(cmd) => cmd_attack(cmd),
        Cmd::Analyze(cmd) => cmd_analyze(cmd),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
