//! Offline (file-based) handshake: each invocation reads one envelope
//! file, advances the session, writes the next envelope, and persists
//! session state between invocations.
//!
//! The state file necessarily holds the party's own secret selection (a
//! later invocation must finish the handshake), which is the one
//! sanctioned exception to "secrets are never persisted": it is the
//! user's own session memory, written 0600, never transmitted.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::protocol::{
    accept_resume, create_offer, finalize, respond, FinalizeOutcome, KeyMaterial, RejectMsg, Role,
    SessionConfig, State,
};
use crate::real;
use crate::rng::SecretRng;
use crate::strategy::SecretSelection;
use crate::suite::SuiteDescriptor;
use crate::wire::{encode_message, message_from_envelope, Envelope, Message, MsgType};

const STATE_MAGIC: &str = "QRKE-STATE v1";

fn secret_to_string(sel: &SecretSelection) -> String {
    let join = |it: Vec<String>| it.join(",");
    match sel {
        SecretSelection::Combination { primes, v } => format!(
            "combination p={} v={}",
            join(primes.iter().map(u64::to_string).collect()),
            join(v.iter().map(u32::to_string).collect())
        ),
        SecretSelection::Casket { multiset } => {
            format!("casket {}", join(multiset.iter().map(u64::to_string).collect()))
        }
        SecretSelection::Analytic { n } => format!("analytic {n}"),
    }
}

fn secret_from_string(s: &str) -> Result<SecretSelection> {
    let bad = || Error::Parse("malformed secret field in state file".into());
    let (kind, rest) = s.split_once(' ').ok_or_else(bad)?;
    let parse_list = |t: &str| -> Result<Vec<u64>> {
        t.split(',').map(|x| x.parse().map_err(|_| bad())).collect()
    };
    match kind {
        "combination" => {
            let (p_part, v_part) = rest.split_once(' ').ok_or_else(bad)?;
            let primes = parse_list(p_part.strip_prefix("p=").ok_or_else(bad)?)?;
            let v: Vec<u32> = parse_list(v_part.strip_prefix("v=").ok_or_else(bad)?)?
                .into_iter()
                .map(|x| x as u32)
                .collect();
            if primes.len() != v.len() {
                return Err(bad());
            }
            Ok(SecretSelection::Combination { primes, v })
        }
        "casket" => Ok(SecretSelection::Casket { multiset: parse_list(rest)? }),
        "analytic" => Ok(SecretSelection::Analytic {
            n: rest.parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

struct PersistedSession {
    role: Role,
    state: State,
    suite_name: String,
    suite_line: String,
    digits: u32,
    strategy: String,
    max_resumes: u32,
    resume_count: u32,
    nonce: String,
    x: String,
    secret: SecretSelection,
    tag: Option<Vec<u8>>,
}

fn state_name(s: State) -> &'static str {
    match s {
        State::Init => "init",
        State::OfferSent => "offer-sent",
        State::Responded => "responded",
        State::Confirmed => "confirmed",
        State::Failed => "failed",
    }
}

fn state_from_name(s: &str) -> Result<State> {
    Ok(match s {
        "init" => State::Init,
        "offer-sent" => State::OfferSent,
        "responded" => State::Responded,
        "confirmed" => State::Confirmed,
        "failed" => State::Failed,
        _ => return Err(Error::Parse(format!("unknown state {s} in state file"))),
    })
}

impl PersistedSession {
    fn serialize(&self) -> String {
        let mut out = format!("{STATE_MAGIC}\n");
        let mut push = |k: &str, v: &str| {
            out.push_str(k);
            out.push_str(": ");
            out.push_str(v);
            out.push('\n');
        };
        push("role", if self.role == Role::Initiator { "initiator" } else { "responder" });
        push("state", state_name(self.state));
        push("suite_name", &self.suite_name);
        push("suite", &self.suite_line);
        push("digits", &self.digits.to_string());
        push("strategy", &self.strategy);
        push("max_resumes", &self.max_resumes.to_string());
        push("resume_count", &self.resume_count.to_string());
        push("nonce", &self.nonce);
        push("x", &self.x);
        push("secret", &secret_to_string(&self.secret));
        if let Some(tag) = &self.tag {
            push("tag", &hex::encode(tag));
        }
        out
    }

    fn parse(text: &str) -> Result<PersistedSession> {
        let mut lines = text.lines();
        if lines.next() != Some(STATE_MAGIC) {
            return Err(Error::Parse("not a session state file".into()));
        }
        let mut get = std::collections::HashMap::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once(": ")
                .ok_or_else(|| Error::Parse(format!("malformed state line {line:?}")))?;
            if get.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Parse(format!("duplicate state key {k}")));
            }
        }
        let mut field = |k: &str| -> Result<String> {
            get.remove(k)
                .ok_or_else(|| Error::Parse(format!("state file missing {k}")))
        };
        let role = match field("role")?.as_str() {
            "initiator" => Role::Initiator,
            "responder" => Role::Responder,
            other => return Err(Error::Parse(format!("unknown role {other}"))),
        };
        let num = |s: String, k: &str| -> Result<u32> {
            s.parse().map_err(|_| Error::Parse(format!("bad {k} in state file")))
        };
        Ok(PersistedSession {
            role,
            state: state_from_name(&field("state")?)?,
            suite_name: field("suite_name")?,
            suite_line: field("suite")?,
            digits: num(field("digits")?, "digits")?,
            strategy: field("strategy")?,
            max_resumes: num(field("max_resumes")?, "max_resumes")?,
            resume_count: num(field("resume_count")?, "resume_count")?,
            nonce: field("nonce")?,
            x: field("x")?,
            secret: secret_from_string(&field("secret")?)?,
            tag: match get.remove("tag") {
                None => None,
                Some(t) => Some(
                    hex::decode(&t).map_err(|_| Error::Parse("bad tag in state file".into()))?,
                ),
            },
        })
    }

    fn config(&self) -> Result<SessionConfig> {
        let suite = SuiteDescriptor::parse_line(&self.suite_name, &self.suite_line)?;
        let mut cfg = SessionConfig::new(suite)?
            .with_strategy(&self.strategy)?
            .with_digits(self.digits)?;
        cfg.max_resumes = self.max_resumes;
        Ok(cfg)
    }
}

/// Writes `text` with owner-only permissions (the state-file exception).
fn write_private(path: &Path, text: &str) -> Result<()> {
    let mut opts = fs::OpenOptions::new();
    opts.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    let mut f = opts.open(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

fn persist(path: &Path, cfg: &SessionConfig, session: &crate::protocol::Session) -> Result<()> {
    let (secret, x) = session.persist_parts();
    let ps = PersistedSession {
        role: session.role(),
        state: session.state(),
        suite_name: cfg.suite.name.clone(),
        suite_line: cfg.suite.line(),
        digits: cfg.ctx.digits(),
        strategy: cfg.strategy.name().to_string(),
        max_resumes: cfg.max_resumes,
        resume_count: session.resume_count(),
        nonce: session.nonce().to_string(),
        x: real::to_decimal(&x, cfg.ctx.digits()),
        secret,
        tag: session.key_material().map(|k| k.confirm_tag.clone()),
    };
    write_private(path, &ps.serialize())
}

fn restore_session(ps: &PersistedSession, cfg: &SessionConfig) -> Result<crate::protocol::Session> {
    let x = real::from_canonical(&ps.x, cfg.ctx.digits(), cfg.ctx)?;
    Ok(crate::protocol::Session::restore(
        cfg.clone(),
        ps.role,
        ps.state,
        ps.secret.clone(),
        x,
        ps.nonce.clone(),
        ps.tag.as_ref().map(|tag| KeyMaterial {
            key: Vec::new(),
            confirm_tag: tag.clone(),
            digit_window: String::new(),
        }),
        ps.resume_count,
    ))
}

fn read_envelope_file(path: &Path) -> Result<Envelope> {
    Envelope::decode(&fs::read(path)?)
}

fn write_envelope_file(path: &Path, msg: &Message, cfg: &SessionConfig) -> Result<()> {
    fs::write(path, encode_message(msg, cfg.ctx))?;
    Ok(())
}

/// Initiator step 1: write the OFFER envelope and the session state.
pub fn offer_to_file(
    cfg: &SessionConfig,
    rng: &mut dyn SecretRng,
    envelope_out: &Path,
    state_out: &Path,
) -> Result<()> {
    let (session, offer) = create_offer(cfg, rng)?;
    write_envelope_file(envelope_out, &Message::Offer(offer), cfg)?;
    persist(state_out, cfg, &session)
}

#[derive(Debug)]
pub enum RespondOutcome {
    /// Wrote a RESPOND envelope; key material derived on this side.
    Responded { key: KeyMaterial },
    /// Input was the peer's CONFIRM and its tag matched ours.
    ConfirmAccepted { fingerprint: String },
}

/// Responder step: handles OFFER (fresh session), RESUME (existing
/// session state), or CONFIRM (verifies and closes).
pub fn respond_to_file(
    cfg: &SessionConfig,
    rng: &mut dyn SecretRng,
    envelope_in: &Path,
    envelope_out: Option<&Path>,
    state_path: &Path,
) -> Result<RespondOutcome> {
    let env = read_envelope_file(envelope_in)?;
    match env.msg_type {
        MsgType::Offer => {
            let out = envelope_out
                .ok_or_else(|| Error::Parameter("responding to OFFER needs --out".into()))?;
            let Message::Offer(offer) = message_from_envelope(&env, cfg.ctx)? else {
                unreachable!("type matched above")
            };
            let (session, resp) = respond(cfg, &offer, rng)?;
            write_envelope_file(out, &Message::Respond(resp), cfg)?;
            persist(state_path, cfg, &session)?;
            let key = session.key_material().expect("responder derives at respond").clone();
            Ok(RespondOutcome::Responded { key })
        }
        MsgType::Resume => {
            let out = envelope_out
                .ok_or_else(|| Error::Parameter("responding to RESUME needs --out".into()))?;
            let ps = PersistedSession::parse(&fs::read_to_string(state_path)?)?;
            let cfg2 = ps.config()?;
            let Message::Resume(offer) = message_from_envelope(&env, cfg2.ctx)? else {
                unreachable!("type matched above")
            };
            let mut session = restore_session(&ps, &cfg2)?;
            let resp = accept_resume(&mut session, &offer)?;
            write_envelope_file(out, &Message::Respond(resp), &cfg2)?;
            persist(state_path, &cfg2, &session)?;
            let key = session.key_material().expect("resume re-derives").clone();
            Ok(RespondOutcome::Responded { key })
        }
        MsgType::Confirm => {
            let ps = PersistedSession::parse(&fs::read_to_string(state_path)?)?;
            let cfg2 = ps.config()?;
            let Message::Confirm(confirm) = message_from_envelope(&env, cfg2.ctx)? else {
                unreachable!("type matched above")
            };
            if ps.state != State::Responded {
                return Err(Error::Protocol(format!(
                    "confirm out of order in state {:?}",
                    ps.state
                )));
            }
            if confirm.nonce != ps.nonce {
                return Err(Error::Protocol("confirm nonce does not echo the offer".into()));
            }
            let tag = ps.tag.as_ref().ok_or_else(|| {
                Error::Protocol("state file holds no confirm tag".into())
            })?;
            if &confirm.confirm_tag != tag {
                let mut failed = ps;
                failed.state = State::Failed;
                write_private(state_path, &failed.serialize())?;
                return Err(Error::Protocol("confirm tag mismatch".into()));
            }
            let fingerprint = hex::encode(&tag[..8]);
            let mut done = ps;
            done.state = State::Confirmed;
            write_private(state_path, &done.serialize())?;
            Ok(RespondOutcome::ConfirmAccepted { fingerprint })
        }
        other => Err(Error::Protocol(format!(
            "respond cannot handle a {} envelope",
            other.as_str()
        ))),
    }
}

#[derive(Debug)]
pub enum OfflineFinalize {
    Confirmed { key: KeyMaterial },
    /// Tag mismatch within the resume budget: a RESUME envelope was
    /// written, run respond/finalize again with it.
    Resumed,
    Failed { diagnostic: String },
}

/// Initiator step 2: read the RESPOND envelope, finish or resume.
pub fn finalize_from_file(
    rng: &mut dyn SecretRng,
    envelope_in: &Path,
    envelope_out: Option<&Path>,
    state_path: &Path,
) -> Result<OfflineFinalize> {
    let ps = PersistedSession::parse(&fs::read_to_string(state_path)?)?;
    let cfg = ps.config()?;
    let env = read_envelope_file(envelope_in)?;
    let Message::Respond(resp) = message_from_envelope(&env, cfg.ctx)? else {
        return Err(Error::Protocol(format!(
            "finalize expects RESPOND, got {}",
            env.msg_type.as_str()
        )));
    };
    let mut session = restore_session(&ps, &cfg)?;
    match finalize(&mut session, &resp, rng)? {
        FinalizeOutcome::Confirmed { key, confirm } => {
            if let Some(out) = envelope_out {
                write_envelope_file(out, &Message::Confirm(confirm), &cfg)?;
            }
            persist(state_path, &cfg, &session)?;
            Ok(OfflineFinalize::Confirmed { key })
        }
        FinalizeOutcome::Resume { offer } => {
            let out = envelope_out.ok_or_else(|| {
                Error::Parameter("resume needs --out for the RESUME envelope".into())
            })?;
            write_envelope_file(out, &Message::Resume(offer), &cfg)?;
            persist(state_path, &cfg, &session)?;
            Ok(OfflineFinalize::Resumed)
        }
        FinalizeOutcome::Failed { diagnostic } => {
            if let Some(out) = envelope_out {
                write_envelope_file(
                    out,
                    &Message::Reject(RejectMsg {
                        code: "key-mismatch".into(),
                        reason: diagnostic.clone(),
                    }),
                    &cfg,
                )?;
            }
            persist(state_path, &cfg, &session)?;
            Ok(OfflineFinalize::Failed { diagnostic })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::insecure_seeded;
    use crate::suite::find_suite;

    fn cfg() -> SessionConfig {
        SessionConfig::new(find_suite("4-2", None).unwrap()).unwrap()
    }

    #[test]
    fn secret_strings_round_trip() {
        let cases = [
            SecretSelection::Combination { primes: vec![2, 3, 5, 7], v: vec![1, 0, 1, 1] },
            SecretSelection::Casket { multiset: vec![3, 3, 5] },
            SecretSelection::Analytic { n: rug::Integer::from(12345) },
        ];
        for sel in cases {
            let s = secret_to_string(&sel);
            assert_eq!(secret_from_string(&s).unwrap(), sel);
        }
        assert!(secret_from_string("junk").is_err());
        assert!(secret_from_string("combination p=2,3 v=1").is_err());
    }

    #[test]
    fn full_offline_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = |n: &str| dir.path().join(n);
        let cfg = cfg();
        let mut rng_a = insecure_seeded(50);
        let mut rng_b = insecure_seeded(51);

        offer_to_file(&cfg, &mut rng_a, &p("offer.env"), &p("a.state")).unwrap();
        let out = respond_to_file(
            &cfg,
            &mut rng_b,
            &p("offer.env"),
            Some(&p("respond.env")),
            &p("b.state"),
        )
        .unwrap();
        let RespondOutcome::Responded { key: key_b } = out else { panic!("{out:?}") };

        let out = finalize_from_file(
            &mut rng_a,
            &p("respond.env"),
            Some(&p("confirm.env")),
            &p("a.state"),
        )
        .unwrap();
        let OfflineFinalize::Confirmed { key: key_a } = out else { panic!("{out:?}") };
        assert_eq!(key_a.fingerprint(), key_b.fingerprint());
        assert_eq!(key_a.key, key_b.key);

        let out = respond_to_file(&cfg, &mut rng_b, &p("confirm.env"), None, &p("b.state"))
            .unwrap();
        let RespondOutcome::ConfirmAccepted { fingerprint } = out else { panic!("{out:?}") };
        assert_eq!(fingerprint, key_a.fingerprint());
    }

    #[test]
    fn offline_resume_after_corrupted_respond() {
        let dir = tempfile::tempdir().unwrap();
        let p = |n: &str| dir.path().join(n);
        let cfg = cfg();
        let mut rng_a = insecure_seeded(60);
        let mut rng_b = insecure_seeded(61);

        offer_to_file(&cfg, &mut rng_a, &p("offer.env"), &p("a.state")).unwrap();
        respond_to_file(&cfg, &mut rng_b, &p("offer.env"), Some(&p("respond.env")), &p("b.state"))
            .unwrap();

        // Flip the first tag nibble: deterministic mismatch.
        let text = fs::read_to_string(p("respond.env")).unwrap();
        let pos = text.find("tag: ").unwrap() + 5;
        let mut bytes = text.into_bytes();
        bytes[pos] = if bytes[pos] == b'0' { b'1' } else { b'0' };
        fs::write(p("respond.env"), bytes).unwrap();

        let out = finalize_from_file(
            &mut rng_a,
            &p("respond.env"),
            Some(&p("resume.env")),
            &p("a.state"),
        )
        .unwrap();
        assert!(matches!(out, OfflineFinalize::Resumed), "{out:?}");

        respond_to_file(&cfg, &mut rng_b, &p("resume.env"), Some(&p("respond2.env")), &p("b.state"))
            .unwrap();
        let out = finalize_from_file(
            &mut rng_a,
            &p("respond2.env"),
            Some(&p("confirm.env")),
            &p("a.state"),
        )
        .unwrap();
        assert!(matches!(out, OfflineFinalize::Confirmed { .. }), "{out:?}");
    }

    #[cfg(unix)]
    #[test]
    fn state_files_are_owner_only() {
        use std::os::unix::fs::PermissionsExt;
        let dir = tempfile::tempdir().unwrap();
        let cfg = cfg();
        let mut rng = insecure_seeded(70);
        let state = dir.path().join("a.state");
        offer_to_file(&cfg, &mut rng, &dir.path().join("offer.env"), &state).unwrap();
        let mode = fs::metadata(&state).unwrap().permissions().mode();
        assert_eq!(mode & 0o777, 0o600);
    }

    #[test]
    fn state_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = cfg();
        let mut rng = insecure_seeded(80);
        let state = dir.path().join("a.state");
        offer_to_file(&cfg, &mut rng, &dir.path().join("offer.env"), &state).unwrap();
        let ps = PersistedSession::parse(&fs::read_to_string(&state).unwrap()).unwrap();
        assert_eq!(ps.role, Role::Initiator);
        assert_eq!(ps.state, State::OfferSent);
        assert_eq!(ps.suite_name, "4-2");
        let again = PersistedSession::parse(&ps.serialize()).unwrap();
        assert_eq!(again.serialize(), ps.serialize());
    }
}
