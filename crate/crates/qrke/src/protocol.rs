//! The two-party handshake: pick a public x in (-1,1), exchange
//! y = T_r(x) and y2 = T_s(x), converge on T_rs(x), hash a digit window
//! of it into key material, confirm by tag, and resume with a fresh x
//! when rounding ate the window.
//!
//! Sessions are strict state machines; secrets and key material are
//! Debug-redacted and never serialized by this module.

use std::fmt;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::real::{self, PrecisionCtx, Real};
use crate::rng::{uniform_u64, SecretRng};
use crate::strategy::{
    draw_secret, evaluate_secret, required_precision, shared_window_digits, strategy,
    SecretSelection, Strategy,
};
use crate::suite::SuiteDescriptor;

/// Degenerate-value retries before an offer gives up on this suite.
const MAX_X_REPICKS: u32 = 10;

/// Everything a session needs up front. `ctx.digits >= required_precision`
/// in normal operation; `with_digits` may deliberately violate that for
/// fault-injection runs (the resume path exists for exactly that outcome).
#[derive(Clone)]
pub struct SessionConfig {
    pub suite: SuiteDescriptor,
    pub strategy: &'static dyn Strategy,
    pub security_bits: u32,
    pub max_resumes: u32,
    pub ctx: PrecisionCtx,
}

impl SessionConfig {
    pub fn new(suite: SuiteDescriptor) -> Result<Self> {
        let needed = required_precision(&suite.fs, suite.security_bits)?;
        if suite.digits < needed {
            return Err(Error::Parameter(format!(
                "suite {} declares {} digits, required_precision is {needed}",
                suite.name, suite.digits
            )));
        }
        let ctx = suite.ctx()?;
        Ok(SessionConfig {
            security_bits: suite.security_bits,
            strategy: strategy("combination").expect("registered"),
            suite,
            max_resumes: 3,
            ctx,
        })
    }

    pub fn with_strategy(mut self, name: &str) -> Result<Self> {
        self.strategy = strategy(name)
            .ok_or_else(|| Error::Parameter(format!("unknown strategy {name}")))?;
        Ok(self)
    }

    /// Overrides the working precision. Values below required_precision
    /// are allowed on purpose: under-precisioned sessions are how the
    /// resume path is exercised.
    pub fn with_digits(mut self, digits: u32) -> Result<Self> {
        self.ctx = PrecisionCtx::new(digits)?;
        Ok(self)
    }
}

impl fmt::Debug for SessionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SessionConfig")
            .field("suite", &self.suite.name)
            .field("strategy", &self.strategy.name())
            .field("security_bits", &self.security_bits)
            .field("max_resumes", &self.max_resumes)
            .field("digits", &self.ctx.digits())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Initiator,
    Responder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum State {
    Init,
    OfferSent,
    Responded,
    Confirmed,
    Failed,
}

/// Offer payload (also reused as the RESUME payload with a fresh nonce).
#[derive(Debug, Clone)]
pub struct OfferMsg {
    pub suite_id: String,
    pub nonce: String,
    pub x: Real,
    pub y: Real,
}

#[derive(Debug, Clone)]
pub struct RespondMsg {
    pub nonce: String,
    pub y2: Real,
    pub confirm_tag: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct ConfirmMsg {
    pub nonce: String,
    pub confirm_tag: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct RejectMsg {
    pub code: String,
    pub reason: String,
}

/// Derived key material. Debug is redacted; `fingerprint` is the only
/// display-safe handle (first 8 octets of the confirm hash, hex).
#[derive(Clone, PartialEq, Eq)]
pub struct KeyMaterial {
    pub key: Vec<u8>,
    pub confirm_tag: Vec<u8>,
    pub digit_window: String,
}

impl KeyMaterial {
    pub fn fingerprint(&self) -> String {
        hex::encode(&self.confirm_tag[..8])
    }
}

impl fmt::Debug for KeyMaterial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyMaterial(fingerprint={}, <redacted>)", self.fingerprint())
    }
}

/// One endpoint of one handshake.
pub struct Session {
    cfg: SessionConfig,
    role: Role,
    state: State,
    my_secret: SecretSelection,
    x: Real,
    nonce: String,
    key: Option<KeyMaterial>,
    shared: Option<Real>,
    resume_count: u32,
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session")
            .field("role", &self.role)
            .field("state", &self.state)
            .field("suite", &self.cfg.suite.name)
            .field("resume_count", &self.resume_count)
            .field("secrets", &"<redacted>")
            .finish()
    }
}

impl Session {
    pub fn role(&self) -> Role {
        self.role
    }

    pub fn state(&self) -> State {
        self.state
    }

    pub fn resume_count(&self) -> u32 {
        self.resume_count
    }

    pub fn nonce(&self) -> &str {
        &self.nonce
    }

    pub fn key_material(&self) -> Option<&KeyMaterial> {
        self.key.as_ref()
    }

    /// The converged T_rs(x), for harnesses measuring digit agreement.
    /// Secret-grade: callers must not print it outside tests.
    pub fn shared_value(&self) -> Option<&Real> {
        self.shared.as_ref()
    }

    pub(crate) fn restore(
        cfg: SessionConfig,
        role: Role,
        state: State,
        my_secret: SecretSelection,
        x: Real,
        nonce: String,
        key: Option<KeyMaterial>,
        resume_count: u32,
    ) -> Session {
        Session { cfg, role, state, my_secret, x, nonce, key, shared: None, resume_count }
    }

    /// Secret-bearing snapshot for offline state persistence.
    pub(crate) fn persist_parts(&self) -> (SecretSelection, Real) {
        (self.my_secret.clone(), self.x.clone())
    }
}

/// Uniform x over [-0.99, -0.01] u [0.01, 0.99] at ctx precision:
/// a sign bit plus x = 0.01 + 0.98 u with u drawn digit-by-digit.
pub fn pick_public_x(ctx: PrecisionCtx, rng: &mut dyn SecretRng) -> Real {
    let mut digits = String::with_capacity(ctx.digits() as usize + 2);
    digits.push_str("0.");
    for _ in 0..ctx.digits() {
        digits.push(char::from(b'0' + uniform_u64(rng, 10) as u8));
    }
    let u = real::from_decimal(&digits, ctx).expect("constructed decimal");
    let lo = real::from_decimal("0.01", ctx).expect("constant");
    let span = real::from_decimal("0.98", ctx).expect("constant");
    let x = lo.add(&span.mul(&u));
    if rng.next_u64() & 1 == 0 {
        x
    } else {
        x.neg()
    }
}

fn fresh_nonce(rng: &mut dyn SecretRng) -> String {
    let mut bytes = [0u8; 16];
    rng.fill_bytes(&mut bytes);
    hex::encode(bytes)
}

/// Picks x and evaluates y = T_r(x), re-picking x on degenerate values up
/// to MAX_X_REPICKS times.
fn pick_x_and_evaluate(
    cfg: &SessionConfig,
    secret: &SecretSelection,
    rng: &mut dyn SecretRng,
) -> Result<(Real, Real)> {
    for _ in 0..MAX_X_REPICKS {
        let x = pick_public_x(cfg.ctx, rng);
        match evaluate_secret(secret, &x, cfg.ctx) {
            Ok(y) => return Ok((x, y)),
            Err(Error::Degenerate(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Degenerate(format!(
        "no non-degenerate offer after {MAX_X_REPICKS} re-picks of x"
    )))
}

/// Initiator entry: draw r, pick x, offer (suite_id, x, T_r(x), nonce).
pub fn create_offer(cfg: &SessionConfig, rng: &mut dyn SecretRng) -> Result<(Session, OfferMsg)> {
    let secret = draw_secret(&cfg.suite.fs, cfg.strategy, &cfg.suite.draw, rng)?;
    let (x, y) = pick_x_and_evaluate(cfg, &secret, rng)?;
    let nonce = fresh_nonce(rng);
    let offer = OfferMsg { suite_id: cfg.suite.id(), nonce: nonce.clone(), x: x.round_to(cfg.ctx), y };
    let session = Session {
        cfg: cfg.clone(),
        role: Role::Initiator,
        state: State::OfferSent,
        my_secret: secret,
        x,
        nonce,
        key: None,
        shared: None,
        resume_count: 0,
    };
    Ok((session, offer))
}

fn check_x_range(x: &Real, ctx: PrecisionCtx) -> Result<()> {
    let ax = x.abs();
    let lo = real::from_decimal("0.01", ctx).expect("constant");
    let hi = real::from_decimal("0.99", ctx).expect("constant");
    if ax < lo || ax > hi {
        return Err(Error::Protocol(
            "offer x outside [-0.99,-0.01] u [0.01,0.99]".into(),
        ));
    }
    Ok(())
}

fn check_y_range(y: &Real, ctx: PrecisionCtx) -> Result<()> {
    let one = Real::from_u64(1, ctx);
    if y.abs() > one {
        return Err(Error::Protocol("offer y outside [-1,1]".into()));
    }
    Ok(())
}

/// Responder entry: validate the offer, draw s, compute the shared value
/// T_s(y) and own y2 = T_s(x), derive key material, emit the confirm tag.
pub fn respond(
    cfg: &SessionConfig,
    offer: &OfferMsg,
    rng: &mut dyn SecretRng,
) -> Result<(Session, RespondMsg)> {
    if offer.suite_id != cfg.suite.id() {
        return Err(Error::Protocol(format!(
            "offer names unknown suite {}",
            offer.suite_id
        )));
    }
    check_x_range(&offer.x, cfg.ctx)?;
    check_y_range(&offer.y, cfg.ctx)?;
    let secret = draw_secret(&cfg.suite.fs, cfg.strategy, &cfg.suite.draw, rng)?;
    let shared = evaluate_secret(&secret, &offer.y, cfg.ctx)?;
    let key = derive_key(&shared, cfg.security_bits)?;
    let y2 = evaluate_secret(&secret, &offer.x, cfg.ctx)?;
    let msg = RespondMsg {
        nonce: offer.nonce.clone(),
        y2,
        confirm_tag: key.confirm_tag.clone(),
    };
    let session = Session {
        cfg: cfg.clone(),
        role: Role::Responder,
        state: State::Responded,
        my_secret: secret,
        x: offer.x.clone(),
        nonce: offer.nonce.clone(),
        key: Some(key),
        shared: Some(shared),
        resume_count: 0,
    };
    Ok((session, msg))
}

/// What finalize decided: key confirmed, a resume offer to send, or a
/// clean failure with its diagnostic.
#[derive(Debug)]
pub enum FinalizeOutcome {
    Confirmed { key: KeyMaterial, confirm: ConfirmMsg },
    Resume { offer: OfferMsg },
    Failed { diagnostic: String },
}

fn tag_hex_agreement(a: &[u8], b: &[u8]) -> usize {
    hex::encode(a)
        .bytes()
        .zip(hex::encode(b).bytes())
        .take_while(|(x, y)| x == y)
        .count()
}

/// Initiator completion: compute the shared value from y2, derive key
/// material, and compare confirm tags. Mismatch resumes (new x, same
/// secret, fresh nonce) until max_resumes, then fails with a diagnostic.
pub fn finalize(
    session: &mut Session,
    respond: &RespondMsg,
    rng: &mut dyn SecretRng,
) -> Result<FinalizeOutcome> {
    if session.role != Role::Initiator {
        return Err(Error::Protocol("finalize is an initiator operation".into()));
    }
    if session.state != State::OfferSent {
        return Err(Error::Protocol(format!(
            "finalize out of order in state {:?}",
            session.state
        )));
    }
    if respond.nonce != session.nonce {
        return Err(Error::Protocol("respond nonce does not echo the offer".into()));
    }
    check_y_range(&respond.y2, session.cfg.ctx)?;
    let shared = evaluate_secret(&session.my_secret, &respond.y2, session.cfg.ctx)?;
    let key = derive_key(&shared, session.cfg.security_bits)?;
    session.shared = Some(shared);
    if key.confirm_tag == respond.confirm_tag {
        session.state = State::Confirmed;
        let confirm = ConfirmMsg {
            nonce: session.nonce.clone(),
            confirm_tag: key.confirm_tag.clone(),
        };
        session.key = Some(key.clone());
        return Ok(FinalizeOutcome::Confirmed { key, confirm });
    }
    if session.resume_count < session.cfg.max_resumes {
        session.resume_count += 1;
        let (x, y) = pick_x_and_evaluate(&session.cfg, &session.my_secret, rng)?;
        let nonce = fresh_nonce(rng);
        session.x = x.clone();
        session.nonce = nonce.clone();
        let offer = OfferMsg { suite_id: session.cfg.suite.id(), nonce, x, y };
        return Ok(FinalizeOutcome::Resume { offer });
    }
    session.state = State::Failed;
    Ok(FinalizeOutcome::Failed {
        diagnostic: format!(
            "confirm tag mismatch after {} resumes (expected vs got agree on {}/32 hex chars)",
            session.resume_count,
            tag_hex_agreement(&key.confirm_tag, &respond.confirm_tag)
        ),
    })
}

/// Responder handling of a RESUME: same secret, new x, fresh key attempt.
pub fn accept_resume(
    session: &mut Session,
    offer: &OfferMsg,
) -> Result<RespondMsg> {
    if session.role != Role::Responder {
        return Err(Error::Protocol("accept_resume is a responder operation".into()));
    }
    if session.state != State::Responded {
        return Err(Error::Protocol(format!(
            "resume out of order in state {:?}",
            session.state
        )));
    }
    if offer.suite_id != session.cfg.suite.id() {
        return Err(Error::Protocol("resume names a different suite".into()));
    }
    if session.resume_count >= session.cfg.max_resumes {
        session.state = State::Failed;
        return Err(Error::Protocol("resume budget exhausted".into()));
    }
    session.resume_count += 1;
    check_x_range(&offer.x, session.cfg.ctx)?;
    check_y_range(&offer.y, session.cfg.ctx)?;
    let shared = evaluate_secret(&session.my_secret, &offer.y, session.cfg.ctx)?;
    let key = derive_key(&shared, session.cfg.security_bits)?;
    let y2 = evaluate_secret(&session.my_secret, &offer.x, session.cfg.ctx)?;
    session.x = offer.x.clone();
    session.nonce = offer.nonce.clone();
    let msg = RespondMsg {
        nonce: offer.nonce.clone(),
        y2,
        confirm_tag: key.confirm_tag.clone(),
    };
    session.shared = Some(shared);
    session.key = Some(key);
    Ok(msg)
}

/// Responder handling of the final CONFIRM: tag equality seals the key.
pub fn accept_confirm<'s>(
    session: &'s mut Session,
    confirm: &ConfirmMsg,
) -> Result<&'s KeyMaterial> {
    if session.role != Role::Responder {
        return Err(Error::Protocol("accept_confirm is a responder operation".into()));
    }
    if session.state != State::Responded {
        return Err(Error::Protocol(format!(
            "confirm out of order in state {:?}",
            session.state
        )));
    }
    if confirm.nonce != session.nonce {
        return Err(Error::Protocol("confirm nonce does not echo the offer".into()));
    }
    let key = session.key.as_ref().expect("Responded state always holds key material");
    if confirm.confirm_tag != key.confirm_tag {
        session.state = State::Failed;
        return Err(Error::Protocol("confirm tag mismatch".into()));
    }
    session.state = State::Confirmed;
    Ok(session.key.as_ref().expect("checked above"))
}

/// Hashes a digit window of |shared| into key + confirm tag: skip the
/// first 10 significant decimal digits (leading digits are biased), take
/// the next 50 (128-bit) or 90 (256-bit), and hash them under separate
/// domain tags. The sign of shared is deliberately ignored.
pub fn derive_key(shared: &Real, security_bits: u32) -> Result<KeyMaterial> {
    let window = shared_window_digits(security_bits)?;
    let need = 10 + window;
    let ctx = shared.ctx();
    if ctx.digits() < need {
        return Err(Error::Precision(format!(
            "ctx provides {} digits, key derivation needs {need} stable ones",
            ctx.digits()
        )));
    }
    if shared.is_zero() {
        return Err(Error::Precision("shared value is zero, no digits to hash".into()));
    }
    // Truncated expansion, not rounded: a carry out of digit `need + 1`
    // must never reach the window, or equal-window peers could diverge.
    let mantissa = real::expansion_digits(shared, need);
    let digit_window = mantissa[10..].to_string();
    let mut kh = Sha256::new();
    kh.update(b"QRKE-KEY");
    kh.update(digit_window.as_bytes());
    let key = kh.finalize()[..(security_bits / 8) as usize].to_vec();
    let mut th = Sha256::new();
    th.update(b"QRKE-CONFIRM");
    th.update(digit_window.as_bytes());
    let confirm_tag = th.finalize()[..16].to_vec();
    Ok(KeyMaterial { key, confirm_tag, digit_window })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chebyshev::agreement_digits;
    use crate::real::from_decimal;
    use crate::rng::insecure_seeded;
    use crate::suite::find_suite;

    fn tiny_cfg() -> SessionConfig {
        SessionConfig::new(find_suite("4-2", None).unwrap()).unwrap()
    }

    #[test]
    fn x_is_in_band_and_reproducible() {
        let ctx = PrecisionCtx::new(40).unwrap();
        let lo = from_decimal("0.01", ctx).unwrap();
        let hi = from_decimal("0.99", ctx).unwrap();
        let mut rng = insecure_seeded(21);
        for _ in 0..200 {
            let x = pick_public_x(ctx, &mut rng);
            let ax = x.abs();
            assert!(ax >= lo && ax <= hi);
        }
        let a = pick_public_x(ctx, &mut insecure_seeded(5));
        let b = pick_public_x(ctx, &mut insecure_seeded(5));
        assert_eq!(real::to_decimal(&a, 40), real::to_decimal(&b, 40));
    }

    #[test]
    fn derive_key_known_answer() {
        let ctx = PrecisionCtx::new(65).unwrap();
        // Significand 1234567890 repeated: window = digits 11..60.
        let digits: String = "1234567890".repeat(7)[..65].to_string();
        let shared = from_decimal(&format!("0.{digits}"), ctx).unwrap();
        let km = derive_key(&shared, 128).unwrap();
        assert_eq!(km.digit_window, "1234567890".repeat(5));
        assert_eq!(hex::encode(&km.key), "bc480046f64b839ebe38f1d7a4b31112");
        assert_eq!(hex::encode(&km.confirm_tag), "f74331c4da64ac21ae88fa5b2fbc3ed0");
        assert_eq!(km.fingerprint(), "f74331c4da64ac21");
    }

    #[test]
    fn derive_key_ignores_sign_and_tail() {
        let ctx = PrecisionCtx::new(70).unwrap();
        let a = from_decimal(&format!("0.{}", "3".repeat(70)), ctx).unwrap();
        let b = a.neg();
        assert_eq!(derive_key(&a, 128).unwrap(), derive_key(&b, 128).unwrap());
        // Differ only from significant digit 61 on: same 128-bit key.
        let c = from_decimal(&format!("0.{}9999999999", "3".repeat(60)), ctx).unwrap();
        assert_eq!(derive_key(&a, 128).unwrap().key, derive_key(&c, 128).unwrap().key);
        // But a 256-bit window sees the difference.
        let ctx2 = PrecisionCtx::new(110).unwrap();
        let a2 = from_decimal(&format!("0.{}", "3".repeat(110)), ctx2).unwrap();
        let c2 = from_decimal(&format!("0.{}9{}", "3".repeat(70), "3".repeat(39)), ctx2).unwrap();
        assert_ne!(derive_key(&a2, 256).unwrap().key, derive_key(&c2, 256).unwrap().key);
    }

    #[test]
    fn derive_key_needs_enough_digits() {
        let ctx = PrecisionCtx::new(50).unwrap();
        let shared = from_decimal("0.5", ctx).unwrap();
        assert!(matches!(derive_key(&shared, 128), Err(Error::Precision(_))));
        let ctx = PrecisionCtx::new(65).unwrap();
        assert!(matches!(
            derive_key(&Real::zero(ctx), 128),
            Err(Error::Precision(_))
        ));
    }

    #[test]
    fn end_to_end_tiny_suite() {
        let cfg = tiny_cfg();
        let mut rng_a = insecure_seeded(100);
        let mut rng_b = insecure_seeded(200);
        let (mut alice, offer) = create_offer(&cfg, &mut rng_a).unwrap();
        let (mut bob, resp) = respond(&cfg, &offer, &mut rng_b).unwrap();
        let out = finalize(&mut alice, &resp, &mut rng_a).unwrap();
        let FinalizeOutcome::Confirmed { key, confirm } = out else {
            panic!("expected confirmation, got {out:?}")
        };
        let bob_key = accept_confirm(&mut bob, &confirm).unwrap().clone();
        assert_eq!(key, bob_key);
        assert_eq!(alice.state(), State::Confirmed);
        assert_eq!(bob.state(), State::Confirmed);
        // Shared values agree far past the hashed window.
        let agreement = agreement_digits(
            alice.shared_value().unwrap(),
            bob.shared_value().unwrap(),
            65,
        );
        assert!(agreement >= 60, "agreement {agreement}");
    }

    #[test]
    fn respond_rejects_bad_offers() {
        let cfg = tiny_cfg();
        let mut rng = insecure_seeded(300);
        let (_, offer) = create_offer(&cfg, &mut rng).unwrap();

        let mut wrong_suite = offer.clone();
        wrong_suite.suite_id = "0".repeat(32);
        assert!(matches!(
            respond(&cfg, &wrong_suite, &mut rng),
            Err(Error::Protocol(_))
        ));

        let mut big_x = offer.clone();
        big_x.x = from_decimal("1.5", cfg.ctx).unwrap();
        assert!(matches!(respond(&cfg, &big_x, &mut rng), Err(Error::Protocol(_))));

        let mut small_x = offer.clone();
        small_x.x = from_decimal("0.001", cfg.ctx).unwrap();
        assert!(matches!(respond(&cfg, &small_x, &mut rng), Err(Error::Protocol(_))));

        let mut big_y = offer;
        big_y.y = from_decimal("1.25", cfg.ctx).unwrap();
        assert!(matches!(respond(&cfg, &big_y, &mut rng), Err(Error::Protocol(_))));
    }

    #[test]
    fn out_of_order_calls_are_rejected() {
        let cfg = tiny_cfg();
        let mut rng_a = insecure_seeded(400);
        let mut rng_b = insecure_seeded(500);
        let (mut alice, offer) = create_offer(&cfg, &mut rng_a).unwrap();
        let (mut bob, resp) = respond(&cfg, &offer, &mut rng_b).unwrap();

        // Finalize on the responder role.
        assert!(matches!(
            finalize(&mut bob, &resp, &mut rng_b),
            Err(Error::Protocol(_))
        ));

        let out = finalize(&mut alice, &resp, &mut rng_a).unwrap();
        let FinalizeOutcome::Confirmed { confirm, .. } = out else { panic!() };

        // Double finalize.
        assert!(matches!(
            finalize(&mut alice, &resp, &mut rng_a),
            Err(Error::Protocol(_))
        ));

        // Confirm twice: second is out of order (already Confirmed).
        accept_confirm(&mut bob, &confirm).unwrap();
        assert!(matches!(
            accept_confirm(&mut bob, &confirm),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn nonce_echo_is_checked() {
        let cfg = tiny_cfg();
        let mut rng_a = insecure_seeded(600);
        let mut rng_b = insecure_seeded(700);
        let (mut alice, offer) = create_offer(&cfg, &mut rng_a).unwrap();
        let (_, mut resp) = respond(&cfg, &offer, &mut rng_b).unwrap();
        resp.nonce = "0".repeat(32);
        assert!(matches!(
            finalize(&mut alice, &resp, &mut rng_a),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn corrupted_tag_triggers_resume_then_success() {
        let cfg = tiny_cfg();
        let mut rng_a = insecure_seeded(800);
        let mut rng_b = insecure_seeded(900);
        let (mut alice, offer) = create_offer(&cfg, &mut rng_a).unwrap();
        let (mut bob, mut resp) = respond(&cfg, &offer, &mut rng_b).unwrap();
        // Flip the tag: rounding-mismatch stand-in, fully deterministic.
        resp.confirm_tag[0] ^= 0xff;
        let out = finalize(&mut alice, &resp, &mut rng_a).unwrap();
        let FinalizeOutcome::Resume { offer: resume } = out else {
            panic!("expected resume, got {out:?}")
        };
        assert_eq!(alice.resume_count(), 1);
        assert_ne!(resume.nonce, offer.nonce);
        let resp2 = accept_resume(&mut bob, &resume).unwrap();
        let out = finalize(&mut alice, &resp2, &mut rng_a).unwrap();
        let FinalizeOutcome::Confirmed { key, confirm } = out else {
            panic!("expected confirmation, got {out:?}")
        };
        let bob_key = accept_confirm(&mut bob, &confirm).unwrap();
        assert_eq!(&key, bob_key);
    }

    #[test]
    fn resume_budget_exhausts_to_clean_failure() {
        let cfg = tiny_cfg();
        let mut rng_a = insecure_seeded(1000);
        let mut rng_b = insecure_seeded(1100);
        let (mut alice, offer) = create_offer(&cfg, &mut rng_a).unwrap();
        let (mut bob, resp) = respond(&cfg, &offer, &mut rng_b).unwrap();
        let mut corrupted = resp;
        corrupted.confirm_tag[0] ^= 0xff;
        let mut outcome = finalize(&mut alice, &corrupted, &mut rng_a).unwrap();
        for _ in 0..cfg.max_resumes {
            let FinalizeOutcome::Resume { offer } = outcome else {
                panic!("expected resume, got {outcome:?}")
            };
            let mut resp = accept_resume(&mut bob, &offer).unwrap();
            resp.confirm_tag[0] ^= 0xff;
            outcome = finalize(&mut alice, &resp, &mut rng_a).unwrap();
        }
        let FinalizeOutcome::Failed { diagnostic } = outcome else {
            panic!("expected failure, got {outcome:?}")
        };
        assert!(diagnostic.contains("after 3 resumes"), "{diagnostic}");
        assert_eq!(alice.state(), State::Failed);
    }

    #[test]
    fn accept_confirm_rejects_wrong_tag() {
        let cfg = tiny_cfg();
        let mut rng_a = insecure_seeded(1200);
        let mut rng_b = insecure_seeded(1300);
        let (_, offer) = create_offer(&cfg, &mut rng_a).unwrap();
        let (mut bob, _) = respond(&cfg, &offer, &mut rng_b).unwrap();
        let bad = ConfirmMsg { nonce: offer.nonce.clone(), confirm_tag: vec![0u8; 16] };
        assert!(matches!(accept_confirm(&mut bob, &bad), Err(Error::Protocol(_))));
        assert_eq!(bob.state(), State::Failed);
    }

    #[test]
    fn debug_output_is_redacted() {
        let cfg = tiny_cfg();
        let mut rng = insecure_seeded(1400);
        let (session, _) = create_offer(&cfg, &mut rng).unwrap();
        let dump = format!("{session:?}");
        assert!(dump.contains("<redacted>"));
        assert!(!dump.contains("Combination"));
        let km = KeyMaterial {
            key: vec![1; 16],
            confirm_tag: vec![2; 16],
            digit_window: "123".into(),
        };
        let dump = format!("{km:?}");
        assert!(dump.contains("<redacted>"));
        assert!(!dump.contains("123"));
    }

    #[test]
    fn config_validates_digit_budget() {
        let mut suite = find_suite("4-2", None).unwrap();
        suite.digits = 60; // below required 65
        assert!(matches!(SessionConfig::new(suite), Err(Error::Parameter(_))));
        let ok = SessionConfig::new(find_suite("4-2", None).unwrap()).unwrap();
        // Deliberate under-precision is allowed via the explicit override.
        let faulty = ok.with_digits(33).unwrap();
        assert_eq!(faulty.ctx.digits(), 33);
    }
}
