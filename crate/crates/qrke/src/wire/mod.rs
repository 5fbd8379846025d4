//! Bit-exact text envelopes for the handshake messages.
//!
//! Grammar, normative: first line `QRKE/1 <TYPE>`, then `key: value`
//! lines sorted by key, then one blank line. Real fields carry exactly
//! ctx.digits significant digits (canonical grammar), so message lengths
//! depend only on public parameters. Decoding is strict: every rejection
//! carries a distinct diagnostic code.

pub mod offline;
pub mod tcp;

use crate::error::{DecodeCode, Error, Result};
use crate::protocol::{ConfirmMsg, OfferMsg, RejectMsg, RespondMsg};
use crate::real::{self, PrecisionCtx, Real};

/// Hard cap on one envelope, octets.
pub const MAX_ENVELOPE: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsgType {
    Offer,
    Respond,
    Confirm,
    Resume,
    Reject,
}

impl MsgType {
    pub fn as_str(self) -> &'static str {
        match self {
            MsgType::Offer => "OFFER",
            MsgType::Respond => "RESPOND",
            MsgType::Confirm => "CONFIRM",
            MsgType::Resume => "RESUME",
            MsgType::Reject => "REJECT",
        }
    }

    fn from_token(s: &str) -> Option<Self> {
        Some(match s {
            "OFFER" => MsgType::Offer,
            "RESPOND" => MsgType::Respond,
            "CONFIRM" => MsgType::Confirm,
            "RESUME" => MsgType::Resume,
            "REJECT" => MsgType::Reject,
            _ => return None,
        })
    }
}

/// Structure-level view of a message: type plus key-value fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub msg_type: MsgType,
    pub fields: Vec<(String, String)>,
}

impl Envelope {
    /// Deterministic encoding: fields sorted by key, `\n` line ends,
    /// blank-line terminator.
    pub fn encode(&self) -> Vec<u8> {
        let mut fields = self.fields.clone();
        fields.sort();
        let mut out = format!("QRKE/1 {}\n", self.msg_type.as_str());
        for (k, v) in &fields {
            out.push_str(k);
            out.push_str(": ");
            out.push_str(v);
            out.push('\n');
        }
        out.push('\n');
        out.into_bytes()
    }

    /// Strict structural parse; field values are validated by the
    /// message layer.
    pub fn decode(octets: &[u8]) -> Result<Envelope> {
        if octets.len() > MAX_ENVELOPE {
            return Err(Error::decode(
                DecodeCode::Oversize,
                format!("{} octets exceeds the 1 MiB cap", octets.len()),
            ));
        }
        let text = std::str::from_utf8(octets)
            .map_err(|_| Error::decode(DecodeCode::Truncated, "not valid UTF-8"))?;
        let parts: Vec<&str> = text.split('\n').collect();
        // Well-formed: [header, field.., "", ""] from "...\n" + "\n".
        if parts.len() < 3 || parts[parts.len() - 1] != "" || parts[parts.len() - 2] != "" {
            return Err(Error::decode(
                DecodeCode::Truncated,
                "missing blank-line terminator",
            ));
        }
        if parts[..parts.len() - 2].iter().any(|l| l.is_empty()) {
            return Err(Error::decode(
                DecodeCode::Truncated,
                "blank line before terminator",
            ));
        }
        let header = parts[0];
        let (proto, type_token) = header.split_once(' ').ok_or_else(|| {
            Error::decode(DecodeCode::BadVersion, format!("malformed header {header:?}"))
        })?;
        if proto != "QRKE/1" {
            return Err(Error::decode(
                DecodeCode::BadVersion,
                format!("unsupported protocol {proto:?}"),
            ));
        }
        let msg_type = MsgType::from_token(type_token).ok_or_else(|| {
            Error::decode(DecodeCode::UnknownType, format!("unknown type {type_token:?}"))
        })?;
        let mut fields = Vec::new();
        for line in &parts[1..parts.len() - 2] {
            let (k, v) = line.split_once(": ").ok_or_else(|| {
                Error::decode(DecodeCode::BadField, format!("field line without separator: {line:?}"))
            })?;
            if k.is_empty()
                || !k.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
            {
                return Err(Error::decode(
                    DecodeCode::BadField,
                    format!("illegal key {k:?}"),
                ));
            }
            if fields.iter().any(|(seen, _)| seen == k) {
                return Err(Error::decode(
                    DecodeCode::DuplicateKey,
                    format!("duplicate key {k}"),
                ));
            }
            fields.push((k.to_string(), v.to_string()));
        }
        Ok(Envelope { msg_type, fields })
    }
}

/// Typed handshake message.
#[derive(Debug, Clone)]
pub enum Message {
    Offer(OfferMsg),
    Respond(RespondMsg),
    Confirm(ConfirmMsg),
    Resume(OfferMsg),
    Reject(RejectMsg),
}

impl Message {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Message::Offer(_) => MsgType::Offer,
            Message::Respond(_) => MsgType::Respond,
            Message::Confirm(_) => MsgType::Confirm,
            Message::Resume(_) => MsgType::Resume,
            Message::Reject(_) => MsgType::Reject,
        }
    }
}

fn real_field(v: &Real, ctx: PrecisionCtx) -> String {
    real::to_decimal(&v.round_to(ctx), ctx.digits())
}

/// Message -> envelope; Real fields padded to exactly ctx.digits digits.
pub fn envelope_of(msg: &Message, ctx: PrecisionCtx) -> Envelope {
    let fields = match msg {
        Message::Offer(o) | Message::Resume(o) => vec![
            ("nonce".into(), o.nonce.clone()),
            ("suite".into(), o.suite_id.clone()),
            ("x".into(), real_field(&o.x, ctx)),
            ("y".into(), real_field(&o.y, ctx)),
        ],
        Message::Respond(r) => vec![
            ("nonce".into(), r.nonce.clone()),
            ("tag".into(), hex::encode(&r.confirm_tag)),
            ("y2".into(), real_field(&r.y2, ctx)),
        ],
        Message::Confirm(c) => vec![
            ("nonce".into(), c.nonce.clone()),
            ("tag".into(), hex::encode(&c.confirm_tag)),
        ],
        Message::Reject(r) => vec![
            ("code".into(), r.code.clone()),
            ("reason".into(), r.reason.clone()),
        ],
    };
    Envelope { msg_type: msg.msg_type(), fields }
}

pub fn encode_message(msg: &Message, ctx: PrecisionCtx) -> Vec<u8> {
    envelope_of(msg, ctx).encode()
}

fn take_field<'e>(env: &'e Envelope, key: &str) -> Result<&'e str> {
    env.fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::decode(DecodeCode::MissingKey, format!("missing key {key}")))
}

fn check_known_keys(env: &Envelope, allowed: &[&str]) -> Result<()> {
    for (k, _) in &env.fields {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::decode(
                DecodeCode::UnknownKey,
                format!("unknown key {k} for {}", env.msg_type.as_str()),
            ));
        }
    }
    Ok(())
}

fn parse_real(env: &Envelope, key: &str, ctx: PrecisionCtx) -> Result<Real> {
    let v = take_field(env, key)?;
    real::from_canonical(v, ctx.digits(), ctx).map_err(|e| {
        Error::decode(DecodeCode::BadNumber, format!("field {key}: {e}"))
    })
}

fn parse_hex(env: &Envelope, key: &str, octets: usize) -> Result<Vec<u8>> {
    let v = take_field(env, key)?;
    if v.len() != 2 * octets || !v.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
    {
        return Err(Error::decode(
            DecodeCode::BadField,
            format!("field {key} must be {} lowercase hex chars", 2 * octets),
        ));
    }
    Ok(hex::decode(v).expect("validated hex"))
}

fn parse_hex_string(env: &Envelope, key: &str, octets: usize) -> Result<String> {
    parse_hex(env, key, octets)?;
    Ok(take_field(env, key)?.to_string())
}

/// Envelope -> typed message; Real fields parsed at ctx.digits exactly.
pub fn message_from_envelope(env: &Envelope, ctx: PrecisionCtx) -> Result<Message> {
    match env.msg_type {
        MsgType::Offer | MsgType::Resume => {
            check_known_keys(env, &["nonce", "suite", "x", "y"])?;
            let offer = OfferMsg {
                suite_id: parse_hex_string(env, "suite", 16)?,
                nonce: parse_hex_string(env, "nonce", 16)?,
                x: parse_real(env, "x", ctx)?,
                y: parse_real(env, "y", ctx)?,
            };
            Ok(if env.msg_type == MsgType::Offer {
                Message::Offer(offer)
            } else {
                Message::Resume(offer)
            })
        }
        MsgType::Respond => {
            check_known_keys(env, &["nonce", "tag", "y2"])?;
            Ok(Message::Respond(RespondMsg {
                nonce: parse_hex_string(env, "nonce", 16)?,
                y2: parse_real(env, "y2", ctx)?,
                confirm_tag: parse_hex(env, "tag", 16)?,
            }))
        }
        MsgType::Confirm => {
            check_known_keys(env, &["nonce", "tag"])?;
            Ok(Message::Confirm(ConfirmMsg {
                nonce: parse_hex_string(env, "nonce", 16)?,
                confirm_tag: parse_hex(env, "tag", 16)?,
            }))
        }
        MsgType::Reject => {
            check_known_keys(env, &["code", "reason"])?;
            let code = take_field(env, "code")?;
            if code.is_empty() || !code.bytes().all(|b| b.is_ascii_lowercase() || b == b'-') {
                return Err(Error::decode(
                    DecodeCode::BadField,
                    format!("illegal reject code {code:?}"),
                ));
            }
            Ok(Message::Reject(RejectMsg {
                code: code.to_string(),
                reason: take_field(env, "reason")?.to_string(),
            }))
        }
    }
}

pub fn decode_message(octets: &[u8], ctx: PrecisionCtx) -> Result<Message> {
    message_from_envelope(&Envelope::decode(octets)?, ctx)
}
