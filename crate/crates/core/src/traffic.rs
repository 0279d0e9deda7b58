//! Bursty workload generation and the experiment driver.
//!
//! Each cycle is an idle phase followed by a burst: the idle phase grants
//! the sender `E` EPR-frame opportunities (each clamped by buffer capacity
//! and the frame length `L`), then `B` packets of `D` bits are enqueued and
//! drained through the link, with every delivered packet verified byte for
//! byte. The idle phase comes first so the very first burst already has
//! `E*L` pairs available, making cycle statistics steady from the start in
//! the unbounded regimes.
//!
//! [`trace_oracle`] replays the greedy pair-consumption schedule with plain
//! integer arithmetic (no qubits, no frames) and must agree with
//! [`run_experiment`] counter for counter; it is the independent check that
//! the simulated protocol does what the accounting says.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analytic::bits_per_transmission;
use crate::framing::{FlagConfig, FlagMode, FrameResult, Stuffing};
use crate::link::{
    avg_bits_per_data_qubit, receiver_step, sender_step, EntBuffer, LinkConfig, LinkError,
    LinkStats, QuantumChannel, ReceiverState, SenderAction, SenderState,
};
use crate::qsim::Engine;

/// Decorrelates the packet-content RNG from the engine's measurement RNG.
const PACKET_STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Full description of one experiment run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    /// Packets per burst (B).
    pub burst_packets: usize,
    /// EPR-frame opportunities per idle period (E).
    pub epr_frames: usize,
    /// Bits per packet (D); must be a positive multiple of 8.
    pub packet_bits: usize,
    /// EPR pairs per EPR frame (L).
    pub epr_frame_len: usize,
    /// Idle+burst cycles to run.
    pub cycles: usize,
    /// Leading cycles excluded from the measured aggregate.
    pub warmup_cycles: usize,
    pub flag: FlagConfig,
    /// Entanglement buffer capacity in pairs; `None` is unbounded.
    pub capacity: Option<usize>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            burst_packets: 1,
            epr_frames: 10,
            packet_bits: 168,
            epr_frame_len: 8,
            cycles: 4,
            warmup_cycles: 1,
            flag: FlagConfig::default(),
            capacity: None,
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.burst_packets == 0 {
            return Err(ExperimentError::InvalidConfig("burst_packets must be >= 1"));
        }
        if self.packet_bits == 0 || !self.packet_bits.is_multiple_of(8) {
            return Err(ExperimentError::InvalidConfig(
                "packet_bits must be a positive multiple of 8",
            ));
        }
        if self.cycles == 0 {
            return Err(ExperimentError::InvalidConfig("cycles must be >= 1"));
        }
        if self.warmup_cycles >= self.cycles {
            return Err(ExperimentError::InvalidConfig(
                "warmup_cycles must be smaller than cycles",
            ));
        }
        self.flag.validate().map_err(LinkError::from)?;
        Ok(())
    }

    fn link_config(&self) -> LinkConfig {
        LinkConfig {
            flag: self.flag,
            epr_frame_len: self.epr_frame_len,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("delivered packet differs from the transmitted packet (cycle {cycle}, packet {index})")]
    DeliveryMismatch { cycle: usize, index: usize },
    #[error("decoded frame type does not match the protocol phase (cycle {cycle})")]
    UnexpectedFrame { cycle: usize },
    #[error("no frame arrived for a transmitted packet (cycle {cycle})")]
    MissingFrame { cycle: usize },
    #[error("buffer occupancies diverged in cycle {cycle}: sender {sender}, receiver {receiver}")]
    BufferDesync {
        cycle: usize,
        sender: usize,
        receiver: usize,
    },
}

/// Outcome of one experiment run. Counter snapshots are receiver-side;
/// sender totals are kept alongside for cross-checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Per-cycle counter deltas, one entry per cycle including warmup.
    pub per_cycle: Vec<LinkStats>,
    /// Sum over the measured (post-warmup) cycles.
    pub aggregate: LinkStats,
    pub measured_bits_per_data_qubit: f64,
    pub analytic_bits_per_transmission: f64,
    pub sender_totals: LinkStats,
    pub receiver_totals: LinkStats,
    /// Final occupancy, equal on both sides by the symmetry invariant.
    pub final_buffer_occupancy: usize,
}

/// Draw `count` packets of `packet_bits/8` uniformly random bytes. In
/// strict flag mode the flag byte is excluded so every packet is encodable.
pub fn generate_burst(
    count: usize,
    packet_bits: usize,
    flag: &FlagConfig,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<u8>>, ExperimentError> {
    if !packet_bits.is_multiple_of(8) {
        return Err(ExperimentError::InvalidConfig(
            "packet_bits must be a positive multiple of 8",
        ));
    }
    let bytes = packet_bits / 8;
    let mut packets = Vec::with_capacity(count);
    for _ in 0..count {
        let mut packet = Vec::with_capacity(bytes);
        while packet.len() < bytes {
            let b = rng.random::<u8>();
            if flag.stuffing == Stuffing::Strict && b == flag.flag_byte {
                continue;
            }
            packet.push(b);
        }
        packets.push(packet);
    }
    Ok(packets)
}

fn check_sync(
    cycle: usize,
    sender: &SenderState,
    receiver: &ReceiverState,
) -> Result<(), ExperimentError> {
    if sender.buffer.len() != receiver.buffer.len() {
        return Err(ExperimentError::BufferDesync {
            cycle,
            sender: sender.buffer.len(),
            receiver: receiver.buffer.len(),
        });
    }
    Ok(())
}

/// Run the full periodic experiment and report measured statistics next to
/// the closed-form prediction for the same parameters.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    cfg.validate()?;
    let link_cfg = cfg.link_config();
    let mut engine = Engine::new(cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ PACKET_STREAM_SALT);
    let mut sender = SenderState::new(EntBuffer::new(cfg.capacity));
    let mut receiver = ReceiverState::new(EntBuffer::new(cfg.capacity));
    let mut channel = QuantumChannel::new();

    let mut per_cycle = Vec::with_capacity(cfg.cycles);
    let mut previous = LinkStats::default();
    for cycle in 0..cfg.cycles {
        // Idle phase: E EPR-frame opportunities, drained one at a time.
        for _ in 0..cfg.epr_frames {
            let action = sender_step(&mut engine, &mut sender, &mut channel, &link_cfg, true)?;
            if action == SenderAction::Idle {
                continue;
            }
            match receiver_step(&mut engine, &mut receiver, &mut channel, &link_cfg)? {
                Some(FrameResult::Epr(_)) => {}
                Some(FrameResult::Data(_)) => {
                    return Err(ExperimentError::UnexpectedFrame { cycle })
                }
                None => return Err(ExperimentError::MissingFrame { cycle }),
            }
            check_sync(cycle, &sender, &receiver)?;
        }

        // Burst phase: enqueue B packets, then drain the queue through the
        // link, verifying every delivery.
        let packets = generate_burst(cfg.burst_packets, cfg.packet_bits, &cfg.flag, &mut rng)?;
        for packet in &packets {
            sender.enqueue(packet.clone());
        }
        for (index, expected) in packets.iter().enumerate() {
            sender_step(&mut engine, &mut sender, &mut channel, &link_cfg, false)?;
            match receiver_step(&mut engine, &mut receiver, &mut channel, &link_cfg)? {
                Some(FrameResult::Data(bytes)) => {
                    if &bytes != expected {
                        return Err(ExperimentError::DeliveryMismatch { cycle, index });
                    }
                }
                Some(FrameResult::Epr(_)) => {
                    return Err(ExperimentError::UnexpectedFrame { cycle })
                }
                None => return Err(ExperimentError::MissingFrame { cycle }),
            }
            check_sync(cycle, &sender, &receiver)?;
        }

        per_cycle.push(receiver.stats.delta_since(&previous));
        previous = receiver.stats;
    }

    let mut aggregate = LinkStats::default();
    for delta in &per_cycle[cfg.warmup_cycles..] {
        aggregate.accumulate(delta);
    }
    let measured = avg_bits_per_data_qubit(&aggregate)?;
    let analytic = bits_per_transmission(
        cfg.burst_packets as u64,
        cfg.epr_frames as u64,
        cfg.packet_bits as u64,
        cfg.epr_frame_len as u64,
    );
    Ok(ExperimentResult {
        per_cycle,
        aggregate,
        measured_bits_per_data_qubit: measured,
        analytic_bits_per_transmission: analytic,
        sender_totals: sender.stats,
        receiver_totals: receiver.stats,
        final_buffer_occupancy: sender.buffer.len(),
    })
}

/// Counter prediction from the arithmetic replay.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePrediction {
    pub per_cycle: Vec<LinkStats>,
    pub aggregate: LinkStats,
    pub bits_per_data_qubit: f64,
}

/// Replay the greedy pair-generation/consumption schedule without any
/// quantum state: pure integer bookkeeping over the same cycle structure.
/// The predicted counters must equal [`run_experiment`]'s exactly.
pub fn trace_oracle(cfg: &ExperimentConfig) -> Result<OraclePrediction, ExperimentError> {
    cfg.validate()?;
    let payload_bits = cfg.packet_bits;
    let stream_bits = match cfg.flag.mode {
        FlagMode::InBandUniform => payload_bits + 8,
        FlagMode::OracleDelimited => payload_bits,
    };

    let mut buffered = 0usize;
    let mut per_cycle = Vec::with_capacity(cfg.cycles);
    for _ in 0..cfg.cycles {
        let mut stats = LinkStats::default();
        for _ in 0..cfg.epr_frames {
            let room = cfg
                .capacity
                .map_or(usize::MAX, |cap| cap.saturating_sub(buffered));
            if room == 0 {
                continue; // full buffer: the sender idles, no frame at all
            }
            let generated = cfg.epr_frame_len.min(room);
            buffered += generated;
            stats.header_qubits += 1;
            stats.epr_payload_qubits += generated as u64;
            stats.flag_qubits += 8;
            stats.epr_pairs_generated += generated as u64;
            stats.epr_frames += 1;
        }
        for _ in 0..cfg.burst_packets {
            let pairs = buffered.min(stream_bits / 2);
            buffered -= pairs;
            let payload_pairs = pairs.min(payload_bits / 2);
            let flag_pairs = pairs - payload_pairs;
            stats.header_qubits += 1;
            stats.data_payload_qubits += (payload_bits - payload_pairs) as u64;
            stats.flag_qubits += (8 - flag_pairs) as u64;
            stats.epr_pairs_consumed += pairs as u64;
            stats.data_bits_delivered += payload_bits as u64;
            stats.data_frames += 1;
        }
        per_cycle.push(stats);
    }

    let mut aggregate = LinkStats::default();
    for delta in &per_cycle[cfg.warmup_cycles..] {
        aggregate.accumulate(delta);
    }
    let metric = avg_bits_per_data_qubit(&aggregate)?;
    Ok(OraclePrediction {
        per_cycle,
        aggregate,
        bits_per_data_qubit: metric,
    })
}
