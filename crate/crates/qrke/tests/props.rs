//! Property tests: arithmetic against a double-precision-budget oracle,
//! evaluator cross-agreement, codec round-trips and fuzz, the modular
//! solver against exhaustive scans, and counting formulas against
//! enumeration.

use proptest::prelude::*;
use rug::Integer;

use qrke::attack::solve_modular_linear;
use qrke::chebyshev::{agreement_digits, t_analytic, t_matrix, t_recurrence};
use qrke::protocol::{ConfirmMsg, OfferMsg, RejectMsg, RespondMsg};
use qrke::real::{self, arccos, cos, from_canonical, from_decimal, to_decimal};
use qrke::strategy::{casket_count, combination_count, first_primes, FunctionSet};
use qrke::wire::{decode_message, encode_message, Message};
use qrke::{PrecisionCtx, Real};

fn ctx(digits: u32) -> PrecisionCtx {
    PrecisionCtx::new(digits).unwrap()
}

/// Canonical significand strings: first digit nonzero, fixed length.
fn significand(len: usize) -> impl Strategy<Value = String> {
    (1u8..=9, proptest::collection::vec(0u8..=9, len - 1)).prop_map(move |(first, rest)| {
        let mut s = String::with_capacity(len);
        s.push(char::from(b'0' + first));
        for d in rest {
            s.push(char::from(b'0' + d));
        }
        s
    })
}

fn canonical_literal(len: usize) -> impl Strategy<Value = String> {
    (any::<bool>(), significand(len), -20i32..=20).prop_map(|(neg, sig, exp)| {
        let sign = if neg { "-" } else { "" };
        if sig.len() == 1 {
            format!("{sign}{sig}e{exp}")
        } else {
            format!("{sign}{}.{}e{exp}", &sig[..1], &sig[1..])
        }
    })
}

proptest! {
    /// Canonical decimal form survives a parse/print round trip exactly.
    #[test]
    fn canonical_decimal_round_trips(s in (1usize..=30).prop_flat_map(canonical_literal)) {
        let c = ctx(40);
        let sig = s.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
        let v = from_canonical(&s, sig.len() as u32, c).unwrap();
        prop_assert_eq!(to_decimal(&v, sig.len() as u32), s);
    }

    /// Cancellation-free arithmetic at D digits matches the same chain run
    /// at 2D digits on all but a rounding slack of the last two digits.
    #[test]
    fn arithmetic_matches_double_budget_oracle(
        ops in proptest::collection::vec((0u8..3, significand(20)), 1..6),
        first in significand(20),
    ) {
        let lo = ctx(30);
        let hi = ctx(60);
        let run = |c: PrecisionCtx| -> Real {
            // Operands in [1, 10): add, mul, div never cancel or hit zero.
            let mut acc = from_decimal(&format!("{}.{}", &first[..1], &first[1..]), c).unwrap();
            for (op, sig) in &ops {
                let rhs = from_decimal(&format!("{}.{}", &sig[..1], &sig[1..]), c).unwrap();
                acc = match op {
                    0 => acc.add(&rhs),
                    1 => acc.mul(&rhs),
                    _ => acc.div(&rhs),
                };
            }
            acc
        };
        let agreement = agreement_digits(&run(lo), &run(hi), 30);
        prop_assert!(agreement >= 28, "only {agreement} digits agree");
    }

    /// cos(arccos x) = x to nearly full working precision on the x band
    /// the protocol draws from.
    #[test]
    fn cos_arccos_is_identity_on_the_band(sig in significand(30), neg in any::<bool>()) {
        let c = ctx(40);
        // |x| in [0.1, 0.999...]: inside (-1, 1) with sound conditioning.
        let mut x = from_decimal(&format!("0.{sig}"), c).unwrap();
        if neg {
            x = x.neg();
        }
        let back = cos(&arccos(&x, c).unwrap(), c).unwrap();
        let agreement = agreement_digits(&x, &back, 40);
        prop_assert!(agreement >= 37, "only {agreement} digits agree");
    }

    /// The three evaluators agree within the predicted degree-driven loss.
    #[test]
    fn evaluators_agree_up_to_degree_loss(
        n in 0u64..=10_000,
        sig in significand(12),
        neg in any::<bool>(),
    ) {
        let c = ctx(40);
        let mut x = from_decimal(&format!("0.{sig}"), c).unwrap();
        if neg {
            x = x.neg();
        }
        let nz = Integer::from(n);
        let rec = t_recurrence(n, &x, c).unwrap();
        let mat = t_matrix(&nz, &x, c).unwrap();
        let ana = t_analytic(&nz, &x, c).unwrap();
        // Budget: 40 digits minus the decimal length of n minus 5 guard.
        let floor = 40 - nz.to_string().len() as u32 - 5;
        prop_assert!(agreement_digits(&rec, &mat, 40) >= floor);
        prop_assert!(agreement_digits(&rec, &ana, 40) >= floor);
        prop_assert!(agreement_digits(&mat, &ana, 40) >= floor);
    }

    /// Every message type round-trips through the wire codec.
    #[test]
    fn messages_round_trip_through_the_codec(
        which in 0u8..5,
        nonce in "[0-9a-f]{32}",
        xsig in significand(30),
        ysig in significand(30),
        tag in proptest::collection::vec(any::<u8>(), 16),
        reason in "[ -~]{0,40}",
    ) {
        let c = ctx(30);
        let x = from_decimal(&format!("0.0{xsig}"), c).unwrap();
        let y = from_decimal(&format!("0.0{ysig}"), c).unwrap();
        let msg = match which {
            0 => Message::Offer(OfferMsg {
                suite_id: "c5708c8e52b48227ab3bf91ac6525f88".into(),
                nonce, x, y,
            }),
            1 => Message::Respond(RespondMsg { nonce, y2: y, confirm_tag: tag }),
            2 => Message::Confirm(ConfirmMsg { nonce, confirm_tag: tag }),
            3 => Message::Resume(OfferMsg {
                suite_id: "c5708c8e52b48227ab3bf91ac6525f88".into(),
                nonce, x, y,
            }),
            _ => {
                let trimmed = reason.trim();
                Message::Reject(RejectMsg {
                    code: "key-mismatch".into(),
                    reason: if trimmed.is_empty() { "mismatch".into() } else { trimmed.into() },
                })
            }
        };
        let raw = encode_message(&msg, c);
        let back = decode_message(&raw, c).unwrap();
        prop_assert_eq!(back.msg_type(), msg.msg_type());
        // Re-encoding is byte-identical: the codec is canonical.
        prop_assert_eq!(encode_message(&back, c), raw);
    }

    /// Arbitrary bytes never panic the decoder.
    #[test]
    fn decode_never_panics_on_noise(bytes in proptest::collection::vec(any::<u8>(), 0..2048)) {
        let _ = decode_message(&bytes, ctx(30));
    }

    /// Mutations of a well-formed envelope never panic the decoder, and
    /// anything it does accept still re-encodes canonically.
    #[test]
    fn decode_never_panics_on_mutations(
        seedbyte in any::<u8>(),
        cut in any::<u16>(),
        flips in proptest::collection::vec((any::<u16>(), any::<u8>()), 1..8),
    ) {
        let c = ctx(30);
        let msg = Message::Confirm(ConfirmMsg {
            nonce: hex::encode([seedbyte; 16]),
            confirm_tag: vec![seedbyte; 16],
        });
        let mut raw = encode_message(&msg, c);
        for (pos, val) in flips {
            let i = pos as usize % raw.len();
            raw[i] = val;
        }
        raw.truncate((cut as usize).max(1).min(raw.len()));
        if let Ok(back) = decode_message(&raw, c) {
            let re = encode_message(&back, c);
            prop_assert!(decode_message(&re, c).is_ok());
        }
    }

    /// The congruence solver returns exactly the set an exhaustive scan
    /// finds, in the same ascending order.
    #[test]
    fn solver_matches_exhaustive_scan(m in 2u64..=10_000, a in 0u64..=10_000, b in 0u64..=10_000) {
        let (am, bm, mm) = (Integer::from(a), Integer::from(b), Integer::from(m));
        let scan: Vec<Integer> = (0..m)
            .filter(|k| (k * a) % m == b % m)
            .map(Integer::from)
            .collect();
        match solve_modular_linear(&am, &bm, &mm) {
            None => prop_assert!(scan.is_empty(), "solver missed {} solutions", scan.len()),
            Some(sol) => {
                prop_assert_eq!(sol.lift(m as usize + 1), scan);
            }
        }
    }

    /// combination_count matches odometer enumeration of the v-vectors.
    #[test]
    fn combination_count_matches_enumeration(ws in proptest::collection::vec(1u32..=6, 1..=5)) {
        let primes = first_primes(ws.len());
        let fs = FunctionSet::with_parts(primes, ws.clone(), ws.len()).unwrap();
        let mut v = vec![0u32; ws.len()];
        let mut seen = 0u64;
        loop {
            seen += 1;
            // Odometer increment over v_i in {0..w_i-1}.
            let mut i = 0;
            loop {
                if i == ws.len() {
                    break;
                }
                v[i] += 1;
                if v[i] < ws[i] {
                    break;
                }
                v[i] = 0;
                i += 1;
            }
            if v.iter().all(|&d| d == 0) {
                break;
            }
            prop_assert!(seen <= 10_000, "enumeration larger than the test bound");
        }
        prop_assert_eq!(combination_count(&fs), Integer::from(seen));
    }

    /// casket_count matches recursive enumeration of sorted multisets.
    #[test]
    fn casket_count_matches_enumeration(n in 1u64..=12, r in 1u32..=5) {
        // Count multisets of size r over {1..n} by their sorted form.
        fn enumerate(n: u64, r: u32, lo: u64) -> u64 {
            if r == 0 {
                return 1;
            }
            (lo..=n).map(|next| enumerate(n, r - 1, next)).sum()
        }
        let expected = enumerate(n, r, 1);
        prop_assert!(expected <= 10_000);
        prop_assert_eq!(casket_count(n, r).unwrap(), Integer::from(expected));
    }
}

/// T_0 = 1 and T_1 = x hold bit-exactly in every evaluator.
#[test]
fn base_cases_are_exact() {
    let c = ctx(40);
    let x = from_decimal("0.4375", c).unwrap();
    let one = Real::from_u64(1, c);
    for n in [0u64, 1] {
        let expect = if n == 0 { &one } else { &x };
        let rec = t_recurrence(n, &x, c).unwrap();
        let mat = t_matrix(&Integer::from(n), &x, c).unwrap();
        assert_eq!(real::to_decimal(&rec, 40), real::to_decimal(expect, 40));
        assert_eq!(real::to_decimal(&mat, 40), real::to_decimal(expect, 40));
    }
}
