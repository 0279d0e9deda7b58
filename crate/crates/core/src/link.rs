//! The link engine: entanglement buffer, lossless ordered qubit channel,
//! sender/receiver state machines, and per-category transmission counters.
//!
//! One protocol iteration on the sender side transmits a pending packet as a
//! data frame if any is queued, otherwise shares an EPR frame while the
//! buffer has room and the driver's idle budget allows, otherwise idles. The
//! receiver decodes whatever complete frame the channel holds. Frames are
//! handed over atomically, which keeps the two buffer occupancies equal at
//! every frame boundary.

use std::collections::VecDeque;

use crate::framing::{
    decode_frame, encode_data_frame, encode_epr_frame, FlagConfig, Frame, FrameResult,
    FramingError,
};
use crate::qsim::{Engine, QubitRef};

/// FIFO store of locally held EPR halves, optionally capacity-bounded.
#[derive(Debug)]
pub struct EntBuffer {
    queue: VecDeque<QubitRef>,
    capacity: Option<usize>,
}

/// Push target had no room.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufferFull;

impl EntBuffer {
    pub fn new(capacity: Option<usize>) -> Self {
        EntBuffer {
            queue: VecDeque::new(),
            capacity,
        }
    }

    pub fn unbounded() -> Self {
        Self::new(None)
    }

    pub fn bounded(capacity: usize) -> Self {
        Self::new(Some(capacity))
    }

    pub fn push(&mut self, half: QubitRef) -> Result<(), BufferFull> {
        if self.is_full() {
            return Err(BufferFull);
        }
        self.queue.push_back(half);
        Ok(())
    }

    /// Pop the oldest stored half.
    pub fn pop(&mut self) -> Option<QubitRef> {
        self.queue.pop_front()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.capacity.is_some_and(|cap| self.queue.len() >= cap)
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    /// Remaining room; `None` means unbounded.
    pub fn free_room(&self) -> Option<usize> {
        self.capacity.map(|cap| cap.saturating_sub(self.queue.len()))
    }
}

/// A frame in transit: its qubits in wire order plus the payload qubit
/// count, which the harness reveals to oracle-delimited receivers.
#[derive(Debug)]
pub struct WireFrame {
    pub qubits: Vec<QubitRef>,
    pub payload_qubits: usize,
}

impl From<Frame> for WireFrame {
    fn from(frame: Frame) -> Self {
        let payload_qubits = frame.payload.len();
        WireFrame {
            qubits: frame.into_qubits().collect(),
            payload_qubits,
        }
    }
}

/// Error-free ordered qubit channel with frame-granular handoff.
#[derive(Debug, Default)]
pub struct QuantumChannel {
    in_flight: VecDeque<WireFrame>,
    delivered_qubits: u64,
}

impl QuantumChannel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn send(&mut self, frame: WireFrame) {
        self.in_flight.push_back(frame);
    }

    /// Take the oldest complete frame, if any.
    pub fn recv(&mut self) -> Option<WireFrame> {
        let frame = self.in_flight.pop_front()?;
        self.delivered_qubits += frame.qubits.len() as u64;
        Some(frame)
    }

    pub fn in_flight_frames(&self) -> usize {
        self.in_flight.len()
    }

    pub fn in_flight_qubits(&self) -> usize {
        self.in_flight.iter().map(|f| f.qubits.len()).sum()
    }

    pub fn delivered_qubits(&self) -> u64 {
        self.delivered_qubits
    }

    pub fn is_empty(&self) -> bool {
        self.in_flight.is_empty()
    }
}

/// Event counters, split by qubit category so throughput can be related to
/// the closed-form model. `data_bits_delivered` counts payload bits moved
/// for the upper layer: submitted bits on the sender, delivered bits on the
/// receiver (equal under lossless delivery).
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct LinkStats {
    pub header_qubits: u64,
    pub data_payload_qubits: u64,
    pub flag_qubits: u64,
    pub epr_payload_qubits: u64,
    pub epr_pairs_generated: u64,
    pub epr_pairs_consumed: u64,
    pub data_bits_delivered: u64,
    pub data_frames: u64,
    pub epr_frames: u64,
}

impl LinkStats {
    /// Total qubits sent over the channel.
    pub fn total_transmissions(&self) -> u64 {
        self.header_qubits + self.data_payload_qubits + self.flag_qubits + self.epr_payload_qubits
    }

    /// Field-wise difference against an earlier snapshot.
    pub fn delta_since(&self, earlier: &LinkStats) -> LinkStats {
        LinkStats {
            header_qubits: self.header_qubits - earlier.header_qubits,
            data_payload_qubits: self.data_payload_qubits - earlier.data_payload_qubits,
            flag_qubits: self.flag_qubits - earlier.flag_qubits,
            epr_payload_qubits: self.epr_payload_qubits - earlier.epr_payload_qubits,
            epr_pairs_generated: self.epr_pairs_generated - earlier.epr_pairs_generated,
            epr_pairs_consumed: self.epr_pairs_consumed - earlier.epr_pairs_consumed,
            data_bits_delivered: self.data_bits_delivered - earlier.data_bits_delivered,
            data_frames: self.data_frames - earlier.data_frames,
            epr_frames: self.epr_frames - earlier.epr_frames,
        }
    }

    /// Field-wise accumulation.
    pub fn accumulate(&mut self, other: &LinkStats) {
        self.header_qubits += other.header_qubits;
        self.data_payload_qubits += other.data_payload_qubits;
        self.flag_qubits += other.flag_qubits;
        self.epr_payload_qubits += other.epr_payload_qubits;
        self.epr_pairs_generated += other.epr_pairs_generated;
        self.epr_pairs_consumed += other.epr_pairs_consumed;
        self.data_bits_delivered += other.data_bits_delivered;
        self.data_frames += other.data_frames;
        self.epr_frames += other.epr_frames;
    }
}

/// Per-link protocol parameters shared by both ends.
#[derive(Debug, Clone, Copy)]
pub struct LinkConfig {
    pub flag: FlagConfig,
    /// Maximum EPR pairs per EPR frame (L).
    pub epr_frame_len: usize,
}

/// Sender end: pending packets, local EPR halves, counters.
#[derive(Debug)]
pub struct SenderState {
    pub tx_queue: VecDeque<Vec<u8>>,
    pub buffer: EntBuffer,
    pub stats: LinkStats,
}

impl SenderState {
    pub fn new(buffer: EntBuffer) -> Self {
        SenderState {
            tx_queue: VecDeque::new(),
            buffer,
            stats: LinkStats::default(),
        }
    }

    pub fn enqueue(&mut self, packet: Vec<u8>) {
        self.tx_queue.push_back(packet);
    }
}

/// Receiver end: stored EPR halves and counters.
#[derive(Debug)]
pub struct ReceiverState {
    pub buffer: EntBuffer,
    pub stats: LinkStats,
}

impl ReceiverState {
    pub fn new(buffer: EntBuffer) -> Self {
        ReceiverState {
            buffer,
            stats: LinkStats::default(),
        }
    }
}

/// What one sender iteration did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SenderAction {
    SentData { bytes: usize },
    SentEpr { pairs: usize },
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum LinkError {
    #[error(transparent)]
    Framing(#[from] FramingError),
    #[error("no data payload qubits transmitted; bits per data qubit is undefined")]
    UndefinedMetric,
}

/// One sender iteration: data frame if a packet is queued, else an EPR
/// frame while the buffer has room and `epr_allowed` (the driver's idle
/// budget) permits, else idle.
pub fn sender_step(
    engine: &mut Engine,
    sender: &mut SenderState,
    channel: &mut QuantumChannel,
    cfg: &LinkConfig,
    epr_allowed: bool,
) -> Result<SenderAction, LinkError> {
    if let Some(packet) = sender.tx_queue.pop_front() {
        let before = sender.buffer.len();
        let frame = encode_data_frame(engine, &packet, &mut sender.buffer, &cfg.flag)?;
        let consumed = (before - sender.buffer.len()) as u64;
        let stats = &mut sender.stats;
        stats.header_qubits += 1;
        stats.data_payload_qubits += frame.payload.len() as u64;
        stats.flag_qubits += frame.flag.len() as u64;
        stats.epr_pairs_consumed += consumed;
        stats.data_bits_delivered += packet.len() as u64 * 8;
        stats.data_frames += 1;
        channel.send(frame.into());
        Ok(SenderAction::SentData {
            bytes: packet.len(),
        })
    } else if epr_allowed && !sender.buffer.is_full() {
        let before = sender.buffer.len();
        let frame = encode_epr_frame(engine, &mut sender.buffer, cfg.epr_frame_len, &cfg.flag)?;
        let generated = (sender.buffer.len() - before) as u64;
        let stats = &mut sender.stats;
        stats.header_qubits += 1;
        stats.epr_payload_qubits += frame.payload.len() as u64;
        stats.flag_qubits += frame.flag.len() as u64;
        stats.epr_pairs_generated += generated;
        stats.epr_frames += 1;
        channel.send(frame.into());
        Ok(SenderAction::SentEpr {
            pairs: generated as usize,
        })
    } else {
        Ok(SenderAction::Idle)
    }
}

/// Decode one complete frame from the channel, if any: data bytes are
/// returned for the upper layer, EPR halves land in the receiver buffer.
pub fn receiver_step(
    engine: &mut Engine,
    receiver: &mut ReceiverState,
    channel: &mut QuantumChannel,
    cfg: &LinkConfig,
) -> Result<Option<FrameResult>, LinkError> {
    let Some(wire) = channel.recv() else {
        return Ok(None);
    };
    let hint = wire.payload_qubits;
    let mut stream = wire.qubits.into_iter();
    let outcome = decode_frame(
        engine,
        &mut stream,
        &mut receiver.buffer,
        cfg.epr_frame_len,
        &cfg.flag,
        Some(hint),
    )?;
    debug_assert!(stream.next().is_none(), "frame not fully consumed");

    let stats = &mut receiver.stats;
    stats.header_qubits += 1;
    stats.flag_qubits += outcome.flag_qubits as u64;
    stats.epr_pairs_consumed += outcome.pairs_consumed as u64;
    match &outcome.result {
        FrameResult::Data(bytes) => {
            stats.data_payload_qubits += outcome.payload_qubits as u64;
            stats.data_bits_delivered += bytes.len() as u64 * 8;
            stats.data_frames += 1;
        }
        FrameResult::Epr(stored) => {
            stats.epr_payload_qubits += outcome.payload_qubits as u64;
            stats.epr_pairs_generated += *stored as u64;
            stats.epr_frames += 1;
        }
    }
    Ok(Some(outcome.result))
}

/// Average classical bits delivered per data-frame payload qubit. Header,
/// flag, and EPR-frame qubits are excluded from the denominator.
pub fn avg_bits_per_data_qubit(stats: &LinkStats) -> Result<f64, LinkError> {
    if stats.data_payload_qubits == 0 {
        return Err(LinkError::UndefinedMetric);
    }
    Ok(stats.data_bits_delivered as f64 / stats.data_payload_qubits as f64)
}
