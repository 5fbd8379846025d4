//! Suites: the public parameter bundle (function set, security bits,
//! working precision) serialized as a one-line descriptor and identified
//! on the wire by a hash of that line.
//!
//! Descriptor grammar, normative and bit-exact:
//! `SUITE v1 N=<n> M=<m> W=<w1,..> P=<p1,..> SEC=<bits> DIGITS=<digits>`

use std::fs;
use std::path::Path;

use rug::ops::Pow;
use rug::Integer;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::real::PrecisionCtx;
use crate::strategy::{
    first_primes, required_precision, CombinationStrategy, DrawConfig, FunctionSet, Strategy,
};

/// A named suite: everything two parties must share before a handshake.
/// `draw` is local draw policy (floor, casket r, analytic range) and is
/// not part of the wire identity.
#[derive(Debug, Clone)]
pub struct SuiteDescriptor {
    pub name: String,
    pub fs: FunctionSet,
    pub security_bits: u32,
    pub digits: u32,
    pub draw: DrawConfig,
}

impl SuiteDescriptor {
    /// The canonical descriptor line (no trailing newline).
    pub fn line(&self) -> String {
        let join = |it: Vec<String>| it.join(",");
        format!(
            "SUITE v1 N={} M={} W={} P={} SEC={} DIGITS={}",
            self.fs.len(),
            self.fs.pool_size(),
            join(self.fs.max_reps().iter().map(u32::to_string).collect()),
            join(self.fs.primes().iter().map(u64::to_string).collect()),
            self.security_bits,
            self.digits
        )
    }

    /// Wire identity: first 32 hex chars of SHA-256 over the line.
    pub fn id(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.line().as_bytes());
        hex::encode(h.finalize())[..32].to_string()
    }

    pub fn ctx(&self) -> Result<PrecisionCtx> {
        PrecisionCtx::new(self.digits)
    }

    /// Parses a descriptor line; `name` is caller-chosen (file stem or
    /// suite registry key), it is not part of the line.
    pub fn parse_line(name: &str, line: &str) -> Result<Self> {
        let line = line.trim_end_matches(['\r', '\n']);
        let mut tok = line.split(' ');
        if tok.next() != Some("SUITE") {
            return Err(Error::Parse("descriptor must start with SUITE".into()));
        }
        if tok.next() != Some("v1") {
            return Err(Error::Parse("unsupported descriptor version".into()));
        }
        let mut take = |key: &str| -> Result<String> {
            let part = tok
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {key}= field")))?;
            part.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| Error::Parse(format!("expected {key}=..., got {part}")))
        };
        let n: usize = parse_num(&take("N")?, "N")?;
        let m: usize = parse_num(&take("M")?, "M")?;
        let w: Vec<u32> = parse_list(&take("W")?, "W")?;
        let p: Vec<u64> = parse_list(&take("P")?, "P")?;
        let sec: u32 = parse_num(&take("SEC")?, "SEC")?;
        let digits: u32 = parse_num(&take("DIGITS")?, "DIGITS")?;
        if tok.next().is_some() {
            return Err(Error::Parse("trailing tokens after DIGITS".into()));
        }
        if w.len() != n || p.len() != n {
            return Err(Error::Parse(format!(
                "W and P must each list N={n} entries, got {}/{}",
                w.len(),
                p.len()
            )));
        }
        let fs = FunctionSet::with_parts(p, w, m)?;
        PrecisionCtx::new(digits)?;
        let draw = default_draw_for(&fs);
        Ok(SuiteDescriptor { name: name.to_string(), fs, security_bits: sec, digits, draw })
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, key: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("bad {key} value: {s}")))
}

fn parse_list<T: std::str::FromStr>(s: &str, key: &str) -> Result<Vec<T>> {
    s.split(',').map(|part| parse_num(part, key)).collect()
}

/// Local draw defaults: the 10^39 security floor whenever the set can
/// reach it, else floor 2 (any non-identity secret) so tiny test suites
/// remain usable.
pub fn default_draw_for(fs: &FunctionSet) -> DrawConfig {
    let mut draw = DrawConfig::default();
    let max = CombinationStrategy.max_exponent(fs, &draw);
    if max < Integer::from(10).pow(39) {
        draw.floor = Integer::from(2);
    }
    draw
}

fn build_shipped(name: &str, n: usize, w: u32, security_bits: u32) -> SuiteDescriptor {
    let fs = FunctionSet::with_parts(first_primes(n), vec![w; n], n)
        .expect("shipped sets are valid");
    let digits = required_precision(&fs, security_bits).expect("shipped bits are valid");
    let draw = default_draw_for(&fs);
    SuiteDescriptor { name: name.to_string(), fs, security_bits, digits, draw }
}

/// The built-in suites: the three full-scale configurations plus a tiny
/// test suite whose exponents are enumerable by hand.
pub fn shipped_suites() -> Vec<SuiteDescriptor> {
    vec![
        build_shipped("4-2", 4, 2, 128),
        build_shipped("32-8", 32, 8, 128),
        build_shipped("64-4", 64, 4, 128),
        build_shipped("128-2", 128, 2, 128),
    ]
}

/// Resolves a suite by name: shipped registry first, then
/// `<dir>/<name>.suite` (one descriptor line) if a directory is given.
pub fn find_suite(name: &str, dir: Option<&Path>) -> Result<SuiteDescriptor> {
    if let Some(s) = shipped_suites().into_iter().find(|s| s.name == name) {
        return Ok(s);
    }
    if let Some(dir) = dir {
        let path = dir.join(format!("{name}.suite"));
        if path.is_file() {
            let text = fs::read_to_string(&path)?;
            let line = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .ok_or_else(|| Error::Parse(format!("{}: empty suite file", path.display())))?;
            return SuiteDescriptor::parse_line(name, line);
        }
    }
    Err(Error::Parameter(format!(
        "unknown suite {name}; shipped: {}",
        shipped_suites().iter().map(|s| s.name.clone()).collect::<Vec<_>>().join(", ")
    )))
}
