//! TCP transport: one handshake per connection, blank-line-delimited
//! envelopes over the stream, per-message timeouts.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::time::Duration;

use crate::error::{DecodeCode, Error, Result};
use crate::protocol::{
    accept_confirm, accept_resume, create_offer, finalize, respond, FinalizeOutcome, KeyMaterial,
    RejectMsg, SessionConfig,
};
use crate::rng::SecretRng;
use crate::wire::{decode_message, encode_message, Message, MAX_ENVELOPE};

#[derive(Debug, Clone)]
pub struct TransportConfig {
    /// Per-message read/write deadline and connect deadline.
    pub timeout: Duration,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig { timeout: Duration::from_secs(30) }
    }
}

fn send(stream: &mut TcpStream, msg: &Message, cfg: &SessionConfig) -> Result<()> {
    stream.write_all(&encode_message(msg, cfg.ctx))?;
    stream.flush()?;
    Ok(())
}

fn send_reject(stream: &mut TcpStream, cfg: &SessionConfig, code: &str, reason: &str) {
    // Best-effort courtesy to the peer; the local error already stands.
    let msg = Message::Reject(RejectMsg { code: code.into(), reason: reason.into() });
    let _ = stream.write_all(&encode_message(&msg, cfg.ctx));
    let _ = stream.flush();
}

/// Reads one envelope (through its blank-line terminator) off the stream.
fn read_envelope(reader: &mut BufReader<TcpStream>) -> Result<Vec<u8>> {
    let mut raw: Vec<u8> = Vec::new();
    loop {
        let mut line = Vec::new();
        let n = reader.read_until(b'\n', &mut line)?;
        if n == 0 {
            return Err(Error::decode(
                DecodeCode::Truncated,
                "connection closed mid-envelope",
            ));
        }
        raw.extend_from_slice(&line);
        if raw.len() > MAX_ENVELOPE {
            return Err(Error::decode(DecodeCode::Oversize, "stream envelope over 1 MiB"));
        }
        if line == b"\n" && raw.len() > 1 {
            return Ok(raw);
        }
    }
}

fn configure(stream: &TcpStream, tcfg: &TransportConfig) -> Result<()> {
    stream.set_read_timeout(Some(tcfg.timeout))?;
    stream.set_write_timeout(Some(tcfg.timeout))?;
    Ok(())
}

/// Dials the responder and runs the initiator side to completion.
pub fn run_initiator(
    addr: &str,
    cfg: &SessionConfig,
    rng: &mut dyn SecretRng,
    tcfg: &TransportConfig,
) -> Result<KeyMaterial> {
    let sockaddr = addr
        .to_socket_addrs()?
        .next()
        .ok_or_else(|| Error::Parameter(format!("cannot resolve {addr}")))?;
    let mut stream = TcpStream::connect_timeout(&sockaddr, tcfg.timeout)?;
    configure(&stream, tcfg)?;
    let (mut session, offer) = create_offer(cfg, rng)?;
    send(&mut stream, &Message::Offer(offer), cfg)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    loop {
        let raw = read_envelope(&mut reader)?;
        match decode_message(&raw, cfg.ctx)? {
            Message::Respond(resp) => match finalize(&mut session, &resp, rng)? {
                FinalizeOutcome::Confirmed { key, confirm } => {
                    send(&mut stream, &Message::Confirm(confirm), cfg)?;
                    return Ok(key);
                }
                FinalizeOutcome::Resume { offer } => {
                    send(&mut stream, &Message::Resume(offer), cfg)?;
                }
                FinalizeOutcome::Failed { diagnostic } => {
                    send_reject(&mut stream, cfg, "key-mismatch", &diagnostic);
                    return Err(Error::Protocol(diagnostic));
                }
            },
            Message::Reject(r) => {
                return Err(Error::Protocol(format!("peer rejected ({}): {}", r.code, r.reason)));
            }
            other => {
                send_reject(&mut stream, cfg, "unexpected-type", other.msg_type().as_str());
                return Err(Error::Protocol(format!(
                    "unexpected {} from responder",
                    other.msg_type().as_str()
                )));
            }
        }
    }
}

/// Runs the responder side over an accepted connection.
pub fn serve_connection(
    stream: TcpStream,
    cfg: &SessionConfig,
    rng: &mut dyn SecretRng,
    tcfg: &TransportConfig,
) -> Result<KeyMaterial> {
    configure(&stream, tcfg)?;
    let mut stream = stream;
    let mut reader = BufReader::new(stream.try_clone()?);
    let raw = read_envelope(&mut reader)?;
    let offer = match decode_message(&raw, cfg.ctx) {
        Ok(Message::Offer(o)) => o,
        Ok(other) => {
            send_reject(&mut stream, cfg, "unexpected-type", other.msg_type().as_str());
            return Err(Error::Protocol(format!(
                "expected OFFER, got {}",
                other.msg_type().as_str()
            )));
        }
        Err(e) => {
            send_reject(&mut stream, cfg, "decode", &e.to_string());
            return Err(e);
        }
    };
    let (mut session, resp) = match respond(cfg, &offer, rng) {
        Ok(pair) => pair,
        Err(e) => {
            send_reject(&mut stream, cfg, "offer-rejected", &e.to_string());
            return Err(e);
        }
    };
    send(&mut stream, &Message::Respond(resp), cfg)?;
    loop {
        let raw = read_envelope(&mut reader)?;
        match decode_message(&raw, cfg.ctx)? {
            Message::Confirm(c) => {
                let key = accept_confirm(&mut session, &c)?.clone();
                return Ok(key);
            }
            Message::Resume(offer) => {
                let resp = match accept_resume(&mut session, &offer) {
                    Ok(r) => r,
                    Err(e) => {
                        send_reject(&mut stream, cfg, "resume-rejected", &e.to_string());
                        return Err(e);
                    }
                };
                send(&mut stream, &Message::Respond(resp), cfg)?;
            }
            Message::Reject(r) => {
                return Err(Error::Protocol(format!("peer rejected ({}): {}", r.code, r.reason)));
            }
            other => {
                send_reject(&mut stream, cfg, "unexpected-type", other.msg_type().as_str());
                return Err(Error::Protocol(format!(
                    "unexpected {} from initiator",
                    other.msg_type().as_str()
                )));
            }
        }
    }
}

/// Binds, accepts one connection, and serves one handshake.
pub fn run_responder_once(
    addr: &str,
    cfg: &SessionConfig,
    rng: &mut dyn SecretRng,
    tcfg: &TransportConfig,
) -> Result<KeyMaterial> {
    let listener = TcpListener::bind(addr)?;
    let (stream, _) = listener.accept()?;
    serve_connection(stream, cfg, rng, tcfg)
}
