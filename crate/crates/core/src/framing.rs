//! Qubit frame encoding and decoding.
//!
//! A frame is one header qubit, a variable-length qubit payload, and a
//! trailing 8-bit end-of-frame flag. The header is |1> for data frames and
//! |0> for EPR frames.
//!
//! Data payload bits are taken two at a time, most significant bit of each
//! byte first. While the entanglement buffer holds a stored EPR half, the
//! bit pair is superdense-encoded onto one popped half (two bits for one
//! transmitted qubit); once the buffer runs dry each bit costs one
//! basis-state qubit. The receiver applies the mirror rule: pop-and-Bell-
//! measure while its buffer is non-empty, plain measurement afterwards.
//!
//! Two flag disciplines are supported, because the pop-if-available rule and
//! a fixed basis-encoded flag cannot both hold once pairs outlast the
//! payload:
//!
//! - [`FlagMode::InBandUniform`] (default): the 8 flag bits join the payload
//!   bit stream and obey the same pair-if-available rule on both sides. The
//!   frame is fully self-delimiting.
//! - [`FlagMode::OracleDelimited`]: the flag is always 8 basis-state qubits
//!   and the receiver is told the payload qubit count out of band by the
//!   harness. This reproduces the closed-form accounting exactly, since flag
//!   bits never consume pairs.
//!
//! Payload transparency relative to the reserved flag byte is either
//! enforced ([`Stuffing::Strict`] rejects colliding payloads) or provided by
//! HDLC-style escaping ([`Stuffing::ByteStuffed`], escape `0x7D`, XOR
//! `0x20`).

use crate::link::EntBuffer;
use crate::qsim::{Engine, QsimError, QubitRef};

/// Default end-of-frame byte (HDLC convention).
pub const DEFAULT_FLAG_BYTE: u8 = 0x7E;
/// Escape byte used in byte-stuffed mode.
pub const ESCAPE_BYTE: u8 = 0x7D;
/// XOR mask applied to escaped bytes.
pub const ESCAPE_XOR: u8 = 0x20;
/// Flag length in bits.
pub const FLAG_BITS: usize = 8;

/// How the end-of-frame flag of data frames is encoded and found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlagMode {
    /// Flag bits share the payload's pair-if-available encoding.
    #[default]
    InBandUniform,
    /// Flag is 8 basis qubits; payload length is delivered out of band.
    OracleDelimited,
}

/// How payload bytes equal to the flag byte are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stuffing {
    /// Reject payloads containing the flag byte before encoding.
    #[default]
    Strict,
    /// Escape flag and escape bytes for full transparency.
    ByteStuffed,
}

/// Flag discipline shared by both ends of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlagConfig {
    pub flag_byte: u8,
    pub mode: FlagMode,
    pub stuffing: Stuffing,
}

impl Default for FlagConfig {
    fn default() -> Self {
        FlagConfig {
            flag_byte: DEFAULT_FLAG_BYTE,
            mode: FlagMode::InBandUniform,
            stuffing: Stuffing::Strict,
        }
    }
}

impl FlagConfig {
    /// In byte-stuffed mode the flag byte must not collide with the escape
    /// machinery, or escape sequences would themselves contain the flag.
    pub fn validate(&self) -> Result<(), FramingError> {
        if self.stuffing == Stuffing::ByteStuffed
            && (self.flag_byte == ESCAPE_BYTE || self.flag_byte == ESCAPE_BYTE ^ ESCAPE_XOR)
        {
            return Err(FramingError::UnstuffableFlagByte(self.flag_byte));
        }
        Ok(())
    }
}

/// One link-layer frame as produced by the encoder: the header qubit, the
/// qubits carrying payload bits, and the qubits carrying flag bits.
#[derive(Debug)]
pub struct Frame {
    pub header: QubitRef,
    pub payload: Vec<QubitRef>,
    pub flag: Vec<QubitRef>,
}

impl Frame {
    pub fn qubit_count(&self) -> usize {
        1 + self.payload.len() + self.flag.len()
    }

    /// All qubits in wire order: header, payload, flag.
    pub fn into_qubits(self) -> impl Iterator<Item = QubitRef> {
        std::iter::once(self.header)
            .chain(self.payload)
            .chain(self.flag)
    }
}

/// What a decoded frame carried.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FrameResult {
    /// Classical payload bytes, flag excluded (and unstuffed if applicable).
    Data(Vec<u8>),
    /// Number of EPR halves stored into the local buffer.
    Epr(usize),
}

/// Decode result plus the per-category event counts the link layer tallies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub result: FrameResult,
    /// Qubits that carried payload (data bits or EPR halves).
    pub payload_qubits: usize,
    /// Qubits that carried flag bits.
    pub flag_qubits: usize,
    /// EPR halves popped from the local buffer while decoding.
    pub pairs_consumed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FramingError {
    #[error("payload byte {index} equals the flag byte; strict mode forbids it")]
    FlagByteInPayload { index: usize },
    #[error("flag byte {0:#04x} collides with the escape sequence alphabet")]
    UnstuffableFlagByte(u8),
    #[error("data frames must carry at least one payload byte")]
    EmptyPayload,
    #[error("EPR frame requested while the entanglement buffer is full")]
    BufferFull,
    #[error("entanglement buffer overflowed while storing an EPR half")]
    BufferOverflow,
    #[error("qubit stream ended before the frame terminator")]
    TruncatedFrame,
    #[error("flag qubits decoded to {found:#04x}, expected {expected:#04x}")]
    FlagMismatch { expected: u8, found: u8 },
    #[error("decoded payload spans {0} bits, which is not byte-aligned")]
    MisalignedPayload(usize),
    #[error("oracle-delimited decoding needs the payload qubit count")]
    MissingPayloadLength,
    #[error("dangling escape byte at end of stuffed payload")]
    DanglingEscape,
    #[error(transparent)]
    Engine(#[from] QsimError),
}

fn byte_bits(byte: u8) -> impl Iterator<Item = bool> {
    (0..8).rev().map(move |i| (byte >> i) & 1 == 1)
}

fn bits_to_byte(bits: &[bool]) -> u8 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as u8)
}

/// Escape every flag or escape byte as `ESCAPE, byte ^ ESCAPE_XOR`.
pub fn stuff_bytes(payload: &[u8], cfg: &FlagConfig) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len());
    for &b in payload {
        if b == cfg.flag_byte || b == ESCAPE_BYTE {
            out.push(ESCAPE_BYTE);
            out.push(b ^ ESCAPE_XOR);
        } else {
            out.push(b);
        }
    }
    out
}

/// Exact inverse of [`stuff_bytes`].
pub fn unstuff_bytes(data: &[u8]) -> Result<Vec<u8>, FramingError> {
    let mut out = Vec::with_capacity(data.len());
    let mut iter = data.iter();
    while let Some(&b) = iter.next() {
        if b == ESCAPE_BYTE {
            let &escaped = iter.next().ok_or(FramingError::DanglingEscape)?;
            out.push(escaped ^ ESCAPE_XOR);
        } else {
            out.push(b);
        }
    }
    Ok(out)
}

/// Encode a classical payload into a data frame, consuming stored EPR halves
/// greedily (FIFO) at one popped half per bit pair while any remain.
pub fn encode_data_frame(
    engine: &mut Engine,
    payload: &[u8],
    buffer: &mut EntBuffer,
    cfg: &FlagConfig,
) -> Result<Frame, FramingError> {
    cfg.validate()?;
    if payload.is_empty() {
        return Err(FramingError::EmptyPayload);
    }
    let body: Vec<u8> = match cfg.stuffing {
        Stuffing::Strict => {
            if let Some(index) = payload.iter().position(|&b| b == cfg.flag_byte) {
                return Err(FramingError::FlagByteInPayload { index });
            }
            payload.to_vec()
        }
        Stuffing::ByteStuffed => stuff_bytes(payload, cfg),
    };

    let mut bits: Vec<bool> = body.iter().flat_map(|&b| byte_bits(b)).collect();
    let payload_bits = bits.len();
    if cfg.mode == FlagMode::InBandUniform {
        bits.extend(byte_bits(cfg.flag_byte));
    }

    let header = engine.new_qubit(true);
    let mut payload_qubits = Vec::with_capacity(payload_bits);
    let mut flag_qubits = Vec::with_capacity(FLAG_BITS);
    for (i, pair) in bits.chunks_exact(2).enumerate() {
        let (b1, b2) = (pair[0], pair[1]);
        let dst = if 2 * i < payload_bits {
            &mut payload_qubits
        } else {
            &mut flag_qubits
        };
        match buffer.pop() {
            Some(half) => {
                engine.superdense_encode(half, b1, b2)?;
                debug_assert!(engine.group_len(half)? <= 2);
                dst.push(half);
            }
            None => {
                dst.push(engine.new_qubit(b1));
                dst.push(engine.new_qubit(b2));
            }
        }
    }
    if cfg.mode == FlagMode::OracleDelimited {
        flag_qubits.extend(byte_bits(cfg.flag_byte).map(|b| engine.new_qubit(b)));
    }

    Ok(Frame {
        header,
        payload: payload_qubits,
        flag: flag_qubits,
    })
}

/// Generate EPR pairs until the local buffer is full or the frame holds
/// `max_pairs` halves; the kept halves are pushed in frame order so both
/// ends pop in lockstep.
pub fn encode_epr_frame(
    engine: &mut Engine,
    buffer: &mut EntBuffer,
    max_pairs: usize,
    cfg: &FlagConfig,
) -> Result<Frame, FramingError> {
    cfg.validate()?;
    if buffer.is_full() {
        return Err(FramingError::BufferFull);
    }
    let header = engine.new_qubit(false);
    let mut payload = Vec::new();
    while !buffer.is_full() && payload.len() < max_pairs {
        let (keep, send) = engine.make_epr();
        buffer.push(keep).map_err(|_| FramingError::BufferOverflow)?;
        payload.push(send);
    }
    let flag = byte_bits(cfg.flag_byte)
        .map(|b| engine.new_qubit(b))
        .collect();
    Ok(Frame {
        header,
        payload,
        flag,
    })
}

/// Decode one frame from an ordered qubit stream positioned at a frame
/// boundary. `oracle_payload_qubits` must carry the data-frame payload qubit
/// count in [`FlagMode::OracleDelimited`]; it is ignored otherwise.
pub fn decode_frame(
    engine: &mut Engine,
    stream: &mut impl Iterator<Item = QubitRef>,
    buffer: &mut EntBuffer,
    epr_frame_len: usize,
    cfg: &FlagConfig,
    oracle_payload_qubits: Option<usize>,
) -> Result<DecodeOutcome, FramingError> {
    cfg.validate()?;
    let header = stream.next().ok_or(FramingError::TruncatedFrame)?;
    if engine.measure(header)? {
        match cfg.mode {
            FlagMode::InBandUniform => decode_data_uniform(engine, stream, buffer, cfg),
            FlagMode::OracleDelimited => {
                let count = oracle_payload_qubits.ok_or(FramingError::MissingPayloadLength)?;
                decode_data_oracle(engine, stream, buffer, cfg, count)
            }
        }
    } else {
        decode_epr(engine, stream, buffer, epr_frame_len, cfg)
    }
}

fn decode_data_uniform(
    engine: &mut Engine,
    stream: &mut impl Iterator<Item = QubitRef>,
    buffer: &mut EntBuffer,
    cfg: &FlagConfig,
) -> Result<DecodeOutcome, FramingError> {
    let mut bytes = Vec::new();
    let mut payload_qubits = 0;
    let mut pairs_consumed = 0;
    let flag_qubits = loop {
        let mut bits = [false; 8];
        let mut filled = 0;
        let mut qubits_used = 0;
        while filled < 8 {
            let q = stream.next().ok_or(FramingError::TruncatedFrame)?;
            qubits_used += 1;
            match buffer.pop() {
                Some(half) => {
                    // Pops only happen while the group cursor is even: the
                    // buffer can only empty, never refill, mid-frame.
                    debug_assert!(filled + 2 <= 8);
                    let out = engine.bell_measure(q, half)?;
                    bits[filled] = out.b1;
                    bits[filled + 1] = out.b2;
                    filled += 2;
                    pairs_consumed += 1;
                }
                None => {
                    bits[filled] = engine.measure(q)?;
                    filled += 1;
                }
            }
        }
        let byte = bits_to_byte(&bits);
        if byte == cfg.flag_byte {
            break qubits_used;
        }
        payload_qubits += qubits_used;
        bytes.push(byte);
    };
    let data = match cfg.stuffing {
        Stuffing::Strict => bytes,
        Stuffing::ByteStuffed => unstuff_bytes(&bytes)?,
    };
    Ok(DecodeOutcome {
        result: FrameResult::Data(data),
        payload_qubits,
        flag_qubits,
        pairs_consumed,
    })
}

fn decode_data_oracle(
    engine: &mut Engine,
    stream: &mut impl Iterator<Item = QubitRef>,
    buffer: &mut EntBuffer,
    cfg: &FlagConfig,
    payload_qubits: usize,
) -> Result<DecodeOutcome, FramingError> {
    let mut bits = Vec::with_capacity(payload_qubits * 2);
    let mut pairs_consumed = 0;
    for _ in 0..payload_qubits {
        let q = stream.next().ok_or(FramingError::TruncatedFrame)?;
        match buffer.pop() {
            Some(half) => {
                let out = engine.bell_measure(q, half)?;
                bits.push(out.b1);
                bits.push(out.b2);
                pairs_consumed += 1;
            }
            None => bits.push(engine.measure(q)?),
        }
    }
    if bits.len() % 8 != 0 {
        return Err(FramingError::MisalignedPayload(bits.len()));
    }
    let bytes: Vec<u8> = bits.chunks_exact(8).map(bits_to_byte).collect();
    verify_flag(engine, stream, cfg)?;
    let data = match cfg.stuffing {
        Stuffing::Strict => bytes,
        Stuffing::ByteStuffed => unstuff_bytes(&bytes)?,
    };
    Ok(DecodeOutcome {
        result: FrameResult::Data(data),
        payload_qubits,
        flag_qubits: FLAG_BITS,
        pairs_consumed,
    })
}

fn decode_epr(
    engine: &mut Engine,
    stream: &mut impl Iterator<Item = QubitRef>,
    buffer: &mut EntBuffer,
    epr_frame_len: usize,
    cfg: &FlagConfig,
) -> Result<DecodeOutcome, FramingError> {
    // The sender clamps the batch to its own free room; occupancies mirror
    // at frame boundaries, so the local free room predicts the batch size.
    let expected = buffer
        .free_room()
        .map_or(epr_frame_len, |room| room.min(epr_frame_len));
    for _ in 0..expected {
        let q = stream.next().ok_or(FramingError::TruncatedFrame)?;
        buffer.push(q).map_err(|_| FramingError::BufferOverflow)?;
    }
    verify_flag(engine, stream, cfg)?;
    Ok(DecodeOutcome {
        result: FrameResult::Epr(expected),
        payload_qubits: expected,
        flag_qubits: FLAG_BITS,
        pairs_consumed: 0,
    })
}

/// Consume and measure the 8 basis-state flag qubits closing a frame.
fn verify_flag(
    engine: &mut Engine,
    stream: &mut impl Iterator<Item = QubitRef>,
    cfg: &FlagConfig,
) -> Result<(), FramingError> {
    let mut bits = [false; 8];
    for bit in bits.iter_mut() {
        let q = stream.next().ok_or(FramingError::TruncatedFrame)?;
        *bit = engine.measure(q)?;
    }
    let found = bits_to_byte(&bits);
    if found != cfg.flag_byte {
        return Err(FramingError::FlagMismatch {
            expected: cfg.flag_byte,
            found,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::EntBuffer;

    fn oracle_cfg() -> FlagConfig {
        FlagConfig {
            mode: FlagMode::OracleDelimited,
            ..FlagConfig::default()
        }
    }

    /// Share `pairs` EPR pairs between a sender and a receiver buffer.
    fn share_pairs(engine: &mut Engine, sender: &mut EntBuffer, receiver: &mut EntBuffer, pairs: usize) {
        for _ in 0..pairs {
            let (keep, send) = engine.make_epr();
            sender.push(keep).unwrap();
            receiver.push(send).unwrap();
        }
    }

    fn round_trip(payload: &[u8], shared_pairs: usize, cfg: &FlagConfig) -> (Vec<u8>, usize, usize) {
        let mut engine = Engine::new(9);
        let mut tx = EntBuffer::unbounded();
        let mut rx = EntBuffer::unbounded();
        share_pairs(&mut engine, &mut tx, &mut rx, shared_pairs);
        let frame = encode_data_frame(&mut engine, payload, &mut tx, cfg).unwrap();
        let sender_popped = shared_pairs - tx.len();
        let hint = frame.payload.len();
        let mut stream = frame.into_qubits();
        let outcome =
            decode_frame(&mut engine, &mut stream, &mut rx, 0, cfg, Some(hint)).unwrap();
        assert!(stream.next().is_none());
        assert_eq!(outcome.pairs_consumed, sender_popped);
        assert_eq!(rx.len(), tx.len());
        match outcome.result {
            FrameResult::Data(data) => (data, sender_popped, outcome.payload_qubits),
            other => panic!("expected data frame, got {other:?}"),
        }
    }

    #[test]
    fn classical_data_frame_qubit_count() {
        // 21 bytes, no pairs, oracle mode: 1 + 168 + 8 qubits.
        let mut engine = Engine::new(0);
        let mut tx = EntBuffer::unbounded();
        let payload = [0x55u8; 21];
        let frame = encode_data_frame(&mut engine, &payload, &mut tx, &oracle_cfg()).unwrap();
        assert_eq!(frame.payload.len(), 168);
        assert_eq!(frame.flag.len(), 8);
        assert_eq!(frame.qubit_count(), 177);
    }

    #[test]
    fn fully_assisted_uniform_frame_uses_nine_qubits() {
        let mut engine = Engine::new(0);
        let mut tx = EntBuffer::unbounded();
        let mut rx = EntBuffer::unbounded();
        share_pairs(&mut engine, &mut tx, &mut rx, 8);
        let cfg = FlagConfig::default();
        let frame = encode_data_frame(&mut engine, &[0xA5], &mut tx, &cfg).unwrap();
        assert_eq!(frame.payload.len(), 4);
        assert_eq!(frame.flag.len(), 4);
        assert_eq!(frame.qubit_count(), 9);
        assert!(tx.is_empty());
    }

    #[test]
    fn buffer_depletes_mid_payload() {
        // 3 pairs cover 6 of the 8 payload bits; flag goes classical.
        let mut engine = Engine::new(0);
        let mut tx = EntBuffer::unbounded();
        let mut rx = EntBuffer::unbounded();
        share_pairs(&mut engine, &mut tx, &mut rx, 3);
        let cfg = FlagConfig::default();
        let frame = encode_data_frame(&mut engine, &[0xA5], &mut tx, &cfg).unwrap();
        assert_eq!(frame.payload.len(), 5);
        assert_eq!(frame.flag.len(), 8);
        assert_eq!(frame.qubit_count(), 14);
        assert!(tx.is_empty());
    }

    #[test]
    fn strict_mode_rejects_flag_byte() {
        let mut engine = Engine::new(0);
        let mut tx = EntBuffer::unbounded();
        let err = encode_data_frame(
            &mut engine,
            &[0x01, DEFAULT_FLAG_BYTE, 0x02],
            &mut tx,
            &FlagConfig::default(),
        )
        .unwrap_err();
        assert_eq!(err, FramingError::FlagByteInPayload { index: 1 });
    }

    #[test]
    fn empty_payload_is_rejected() {
        let mut engine = Engine::new(0);
        let mut tx = EntBuffer::unbounded();
        let err = encode_data_frame(&mut engine, &[], &mut tx, &FlagConfig::default());
        assert_eq!(err.unwrap_err(), FramingError::EmptyPayload);
    }

    #[test]
    fn epr_frame_fills_buffer_and_payload() {
        let mut engine = Engine::new(0);
        let mut tx = EntBuffer::unbounded();
        let frame = encode_epr_frame(&mut engine, &mut tx, 8, &FlagConfig::default()).unwrap();
        assert_eq!(frame.payload.len(), 8);
        assert_eq!(frame.qubit_count(), 17);
        assert_eq!(tx.len(), 8);
    }

    #[test]
    fn epr_frame_clamps_to_capacity() {
        let mut engine = Engine::new(0);
        let mut tx = EntBuffer::bounded(5);
        share_pairs(&mut engine, &mut tx, &mut EntBuffer::unbounded(), 2);
        let frame = encode_epr_frame(&mut engine, &mut tx, 8, &FlagConfig::default()).unwrap();
        assert_eq!(frame.payload.len(), 3);
        assert_eq!(tx.len(), 5);
    }

    #[test]
    fn epr_frame_with_zero_length_is_header_and_flag() {
        let mut engine = Engine::new(0);
        let mut tx = EntBuffer::unbounded();
        let frame = encode_epr_frame(&mut engine, &mut tx, 0, &FlagConfig::default()).unwrap();
        assert!(frame.payload.is_empty());
        assert_eq!(frame.qubit_count(), 9);
    }

    #[test]
    fn epr_frame_rejected_when_full() {
        let mut engine = Engine::new(0);
        let mut tx = EntBuffer::bounded(1);
        share_pairs(&mut engine, &mut tx, &mut EntBuffer::unbounded(), 1);
        let err = encode_epr_frame(&mut engine, &mut tx, 8, &FlagConfig::default()).unwrap_err();
        assert_eq!(err, FramingError::BufferFull);
    }

    #[test]
    fn epr_round_trip_stores_halves() {
        let mut engine = Engine::new(0);
        let mut tx = EntBuffer::unbounded();
        let mut rx = EntBuffer::unbounded();
        let cfg = FlagConfig::default();
        let frame = encode_epr_frame(&mut engine, &mut tx, 8, &cfg).unwrap();
        let mut stream = frame.into_qubits();
        let outcome = decode_frame(&mut engine, &mut stream, &mut rx, 8, &cfg, None).unwrap();
        assert!(stream.next().is_none());
        assert_eq!(outcome.result, FrameResult::Epr(8));
        assert_eq!(outcome.flag_qubits, 8);
        assert_eq!(rx.len(), 8);
        // The stored halves really are entangled pairwise with the sender's.
        let (s, r) = (tx.pop().unwrap(), rx.pop().unwrap());
        assert_eq!(engine.bell_measure(s, r).unwrap(), crate::qsim::BellOutcome { b1: false, b2: false });
    }

    #[test]
    fn data_round_trip_without_pairs() {
        let payload = [0x00, 0x01, 0xFF, 0x42];
        for cfg in [FlagConfig::default(), oracle_cfg()] {
            let (data, popped, payload_qubits) = round_trip(&payload, 0, &cfg);
            assert_eq!(data, payload);
            assert_eq!(popped, 0);
            assert_eq!(payload_qubits, payload.len() * 8);
        }
    }

    #[test]
    fn data_round_trip_with_surplus_pairs() {
        let payload = [0x13, 0x37];
        for cfg in [FlagConfig::default(), oracle_cfg()] {
            let (data, popped, payload_qubits) = round_trip(&payload, 64, &cfg);
            assert_eq!(data, payload);
            let expected_popped = match cfg.mode {
                FlagMode::InBandUniform => 12, // 16 payload + 8 flag bits
                FlagMode::OracleDelimited => 8,
            };
            assert_eq!(popped, expected_popped);
            assert_eq!(payload_qubits, 8);
        }
    }

    #[test]
    fn data_round_trip_with_partial_pairs() {
        let payload = [0xC3, 0x99, 0x0F];
        for cfg in [FlagConfig::default(), oracle_cfg()] {
            for pairs in [1, 5, 11] {
                let (data, popped, _) = round_trip(&payload, pairs, &cfg);
                assert_eq!(data, payload);
                assert_eq!(popped, pairs);
            }
        }
    }

    #[test]
    fn stuffed_round_trip_carries_flag_bytes() {
        let cfg = FlagConfig {
            stuffing: Stuffing::ByteStuffed,
            ..FlagConfig::default()
        };
        let payload = [DEFAULT_FLAG_BYTE, ESCAPE_BYTE, 0x00, DEFAULT_FLAG_BYTE];
        for pairs in [0, 7, 80] {
            let (data, _, _) = round_trip(&payload, pairs, &cfg);
            assert_eq!(data, payload);
        }
    }

    #[test]
    fn uniform_qubit_count_law() {
        // 1 + k + (T - 2k) qubits for T = 8n + 8 payload+flag bits and
        // k = min(p, T/2) pairs.
        let cfg = FlagConfig::default();
        for n in [1usize, 2, 3, 8, 21, 64] {
            let t = 8 * n + 8;
            for p in [0, 1, t / 2 - 1, t / 2, t / 2 + 4] {
                let mut engine = Engine::new(1);
                let mut tx = EntBuffer::unbounded();
                let mut rx = EntBuffer::unbounded();
                share_pairs(&mut engine, &mut tx, &mut rx, p);
                let payload = vec![0x5A; n];
                let frame = encode_data_frame(&mut engine, &payload, &mut tx, &cfg).unwrap();
                let k = p.min(t / 2);
                assert_eq!(frame.qubit_count(), 1 + k + (t - 2 * k));
            }
        }
    }

    #[test]
    fn stuffing_is_identity_on_clean_payloads() {
        let cfg = FlagConfig {
            stuffing: Stuffing::ByteStuffed,
            ..FlagConfig::default()
        };
        let payload = [0x00, 0x11, 0x22, 0xFE];
        assert_eq!(stuff_bytes(&payload, &cfg), payload);
        assert_eq!(unstuff_bytes(&payload).unwrap(), payload);
    }

    #[test]
    fn stuffing_round_trips_every_single_byte() {
        let cfg = FlagConfig {
            stuffing: Stuffing::ByteStuffed,
            ..FlagConfig::default()
        };
        for b in 0..=255u8 {
            let stuffed = stuff_bytes(&[b], &cfg);
            if b == cfg.flag_byte || b == ESCAPE_BYTE {
                assert_eq!(stuffed.len(), 2);
            }
            assert!(!stuffed.contains(&cfg.flag_byte));
            assert_eq!(unstuff_bytes(&stuffed).unwrap(), [b]);
        }
    }

    #[test]
    fn unstuff_rejects_dangling_escape() {
        assert_eq!(
            unstuff_bytes(&[0x01, ESCAPE_BYTE]).unwrap_err(),
            FramingError::DanglingEscape
        );
    }

    #[test]
    fn stuffed_mode_rejects_colliding_flag_bytes() {
        for flag_byte in [ESCAPE_BYTE, ESCAPE_BYTE ^ ESCAPE_XOR] {
            let cfg = FlagConfig {
                flag_byte,
                stuffing: Stuffing::ByteStuffed,
                ..FlagConfig::default()
            };
            assert_eq!(
                cfg.validate().unwrap_err(),
                FramingError::UnstuffableFlagByte(flag_byte)
            );
        }
    }

    #[test]
    fn oracle_decode_requires_payload_length() {
        let cfg = oracle_cfg();
        let mut engine = Engine::new(0);
        let mut tx = EntBuffer::unbounded();
        let frame = encode_data_frame(&mut engine, &[0x42], &mut tx, &cfg).unwrap();
        let mut rx = EntBuffer::unbounded();
        let err = decode_frame(&mut engine, &mut frame.into_qubits(), &mut rx, 0, &cfg, None)
            .unwrap_err();
        assert_eq!(err, FramingError::MissingPayloadLength);
    }

    #[test]
    fn truncated_stream_is_a_framing_error() {
        let cfg = FlagConfig::default();
        let mut engine = Engine::new(0);
        let mut tx = EntBuffer::unbounded();
        let frame = encode_data_frame(&mut engine, &[0x42], &mut tx, &cfg).unwrap();
        let count = frame.qubit_count();
        let mut stream = frame.into_qubits().take(count - 3);
        let mut rx = EntBuffer::unbounded();
        let err = decode_frame(&mut engine, &mut stream, &mut rx, 0, &cfg, None).unwrap_err();
        assert_eq!(err, FramingError::TruncatedFrame);
    }

    #[test]
    fn epr_flag_corruption_is_detected() {
        let cfg = FlagConfig::default();
        let mut engine = Engine::new(0);
        let mut tx = EntBuffer::unbounded();
        let frame = encode_epr_frame(&mut engine, &mut tx, 2, &cfg).unwrap();
        // Flip one flag qubit in transit.
        engine.apply_x(frame.flag[3]).unwrap();
        let mut rx = EntBuffer::unbounded();
        let err = decode_frame(&mut engine, &mut frame.into_qubits(), &mut rx, 2, &cfg, None)
            .unwrap_err();
        assert!(matches!(err, FramingError::FlagMismatch { .. }));
    }

    #[test]
    fn header_discriminates_frame_type() {
        let cfg = FlagConfig::default();
        let mut engine = Engine::new(0);
        let mut tx = EntBuffer::unbounded();
        let data = encode_data_frame(&mut engine, &[1], &mut tx, &cfg).unwrap();
        assert!(engine.measure(data.header).unwrap());
        let epr = encode_epr_frame(&mut engine, &mut tx, 1, &cfg).unwrap();
        assert!(!engine.measure(epr.header).unwrap());
    }
}
