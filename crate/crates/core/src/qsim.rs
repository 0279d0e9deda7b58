//! Ideal (noiseless) quantum state engine.
//!
//! Supports exactly what the link protocol needs: qubit preparation in a
//! basis state, the Pauli-X/Z and Hadamard gates, CNOT, computational-basis
//! measurement, EPR-pair generation, and Bell-basis measurement.
//!
//! State is kept as dense amplitude vectors over disjoint entanglement
//! groups; two groups merge (tensor product) the first time a two-qubit gate
//! spans them. The protocol never entangles more than two qubits, so groups
//! stay tiny and simulation cost is O(1) per qubit regardless of traffic
//! volume.
//!
//! Conventions the framing layer relies on:
//!
//! - [`Engine::make_epr`] returns a pair in `(|00> + |11>)/sqrt(2)`, built as
//!   H on the first qubit then CNOT onto the second.
//! - [`Engine::superdense_encode`] maps the bit pair onto the held half as
//!   `(0,0)` = identity, `(0,1)` = X, `(1,0)` = Z, `(1,1)` = X then Z.
//! - [`Engine::bell_measure`] decodes with CNOT(first -> second) then H on
//!   the first, so an unmodified pair yields `(0,0)` and an encoded half
//!   yields exactly the encoded bits.
//!
//! Measuring a qubit (single or Bell) consumes its handle; any later use is
//! an error rather than silent garbage, so protocol desyncs surface at the
//! first wrong pop.

use std::collections::HashMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Marginal probabilities closer than this to 0 or 1 are treated as exact
/// basis events and measured without drawing from the RNG.
const BASIS_EPS: f64 = 1e-12;

/// Opaque handle to one live qubit. Valid from creation until measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QubitRef(u64);

/// Result of a Bell-basis measurement; each component is one classical bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BellOutcome {
    pub b1: bool,
    pub b2: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum QsimError {
    /// The handle was never issued or its qubit has already been measured.
    #[error("qubit handle {0:?} is invalid or already consumed")]
    InvalidHandle(QubitRef),
    /// A two-qubit operation was given the same qubit twice.
    #[error("two-qubit operation requires two distinct qubits")]
    AliasedQubits,
}

struct Group {
    /// Qubit ids in tensor order; the first member is the most significant
    /// bit of an amplitude index.
    members: Vec<u64>,
    amps: Vec<Complex64>,
}

impl Group {
    fn singleton(id: u64, initial: bool) -> Self {
        let mut amps = vec![Complex64::ZERO; 2];
        amps[initial as usize] = Complex64::ONE;
        Group {
            members: vec![id],
            amps,
        }
    }

    fn slot(&self, id: u64) -> usize {
        self.members
            .iter()
            .position(|&m| m == id)
            .expect("member list out of sync")
    }

    /// Bit mask selecting `id`'s axis in an amplitude index.
    fn mask(&self, id: u64) -> usize {
        1 << (self.members.len() - 1 - self.slot(id))
    }

    fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// The simulator. One instance owns every qubit it issued plus a seeded RNG
/// for the (rare) genuinely probabilistic measurements, so a fixed seed
/// reproduces any operation sequence exactly.
pub struct Engine {
    groups: HashMap<u64, Group>,
    /// qubit id -> group id; a qubit is live iff present here.
    membership: HashMap<u64, u64>,
    next_qubit: u64,
    next_group: u64,
    rng: ChaCha8Rng,
}

impl Engine {
    pub fn new(seed: u64) -> Self {
        Engine {
            groups: HashMap::new(),
            membership: HashMap::new(),
            next_qubit: 0,
            next_group: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Prepare a fresh qubit in |0> or |1>.
    pub fn new_qubit(&mut self, initial: bool) -> QubitRef {
        let qid = self.next_qubit;
        self.next_qubit += 1;
        let gid = self.next_group;
        self.next_group += 1;
        self.groups.insert(gid, Group::singleton(qid, initial));
        self.membership.insert(qid, gid);
        QubitRef(qid)
    }

    /// Number of currently live (unmeasured) qubits.
    pub fn live_qubits(&self) -> usize {
        self.membership.len()
    }

    pub fn is_live(&self, q: QubitRef) -> bool {
        self.membership.contains_key(&q.0)
    }

    fn group_id(&self, q: QubitRef) -> Result<u64, QsimError> {
        self.membership
            .get(&q.0)
            .copied()
            .ok_or(QsimError::InvalidHandle(q))
    }

    /// Size of the entanglement group `q` belongs to.
    pub fn group_len(&self, q: QubitRef) -> Result<usize, QsimError> {
        let gid = self.group_id(q)?;
        Ok(self.groups[&gid].members.len())
    }

    /// Members of `q`'s entanglement group in tensor order (first member is
    /// the most significant bit of an amplitude index).
    pub fn group_members(&self, q: QubitRef) -> Result<Vec<QubitRef>, QsimError> {
        let gid = self.group_id(q)?;
        Ok(self.groups[&gid].members.iter().map(|&m| QubitRef(m)).collect())
    }

    /// Amplitude vector of `q`'s entanglement group, indexed per
    /// [`Engine::group_members`] order.
    pub fn group_amplitudes(&self, q: QubitRef) -> Result<Vec<Complex64>, QsimError> {
        let gid = self.group_id(q)?;
        Ok(self.groups[&gid].amps.clone())
    }

    fn apply_single<F>(&mut self, q: QubitRef, f: F) -> Result<(), QsimError>
    where
        F: Fn(Complex64, Complex64) -> (Complex64, Complex64),
    {
        let gid = self.group_id(q)?;
        let group = self.groups.get_mut(&gid).expect("group table out of sync");
        let mask = group.mask(q.0);
        for i in 0..group.amps.len() {
            if i & mask == 0 {
                let (a0, a1) = f(group.amps[i], group.amps[i | mask]);
                group.amps[i] = a0;
                group.amps[i | mask] = a1;
            }
        }
        debug_assert!((group.norm_sqr() - 1.0).abs() < 1e-12);
        Ok(())
    }

    /// Pauli-X (bit flip).
    pub fn apply_x(&mut self, q: QubitRef) -> Result<(), QsimError> {
        self.apply_single(q, |a0, a1| (a1, a0))
    }

    /// Pauli-Z (phase flip).
    pub fn apply_z(&mut self, q: QubitRef) -> Result<(), QsimError> {
        self.apply_single(q, |a0, a1| (a0, -a1))
    }

    /// Hadamard.
    pub fn apply_h(&mut self, q: QubitRef) -> Result<(), QsimError> {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        self.apply_single(q, move |a0, a1| ((a0 + a1) * s, (a0 - a1) * s))
    }

    /// Controlled-X. Merges the two entanglement groups first when the
    /// qubits live in different ones.
    pub fn cnot(&mut self, control: QubitRef, target: QubitRef) -> Result<(), QsimError> {
        if control == target {
            return Err(QsimError::AliasedQubits);
        }
        let cg = self.group_id(control)?;
        let tg = self.group_id(target)?;
        let gid = if cg == tg { cg } else { self.merge(cg, tg) };

        let group = self.groups.get_mut(&gid).expect("group table out of sync");
        let cmask = group.mask(control.0);
        let tmask = group.mask(target.0);
        for i in 0..group.amps.len() {
            if i & cmask != 0 && i & tmask == 0 {
                group.amps.swap(i, i | tmask);
            }
        }
        debug_assert!((group.norm_sqr() - 1.0).abs() < 1e-12);
        Ok(())
    }

    /// Tensor the two groups into one; the control group's members stay in
    /// the high-order slots. Returns the surviving group id.
    fn merge(&mut self, keep: u64, absorb: u64) -> u64 {
        let absorbed = self.groups.remove(&absorb).expect("group table out of sync");
        let group = self.groups.get_mut(&keep).expect("group table out of sync");
        let mut amps = Vec::with_capacity(group.amps.len() * absorbed.amps.len());
        for a in &group.amps {
            for b in &absorbed.amps {
                amps.push(a * b);
            }
        }
        group.amps = amps;
        for &m in &absorbed.members {
            self.membership.insert(m, keep);
        }
        group.members.extend(absorbed.members);
        keep
    }

    /// Measure in the computational basis. Samples the qubit's marginal with
    /// the engine RNG, collapses the group, and consumes the handle. The
    /// outcome is deterministic (no RNG draw) when the marginal is a basis
    /// state.
    pub fn measure(&mut self, q: QubitRef) -> Result<bool, QsimError> {
        let gid = self.group_id(q)?;
        let group = &self.groups[&gid];
        let mask = group.mask(q.0);
        let p_one: f64 = group
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();

        let outcome = if p_one < BASIS_EPS {
            false
        } else if p_one > 1.0 - BASIS_EPS {
            true
        } else {
            self.rng.random::<f64>() < p_one
        };

        self.collapse(gid, q.0, outcome, if outcome { p_one } else { 1.0 - p_one });
        Ok(outcome)
    }

    /// Project `qid`'s axis onto `outcome`, renormalize, and drop the qubit
    /// from its group (deleting the group once empty).
    fn collapse(&mut self, gid: u64, qid: u64, outcome: bool, prob: f64) {
        let group = self.groups.get_mut(&gid).expect("group table out of sync");
        if group.members.len() == 1 {
            self.groups.remove(&gid);
        } else {
            let slot = group.slot(qid);
            let bitpos = group.members.len() - 1 - slot;
            let mask = 1usize << bitpos;
            let low = mask - 1;
            let scale = Complex64::new(1.0 / prob.sqrt(), 0.0);
            let kept = if outcome { mask } else { 0 };
            let mut amps = Vec::with_capacity(group.amps.len() / 2);
            for j in 0..group.amps.len() / 2 {
                let i = ((j >> bitpos) << (bitpos + 1)) | kept | (j & low);
                amps.push(group.amps[i] * scale);
            }
            group.amps = amps;
            group.members.remove(slot);
            debug_assert!((group.norm_sqr() - 1.0).abs() < 1e-9);
        }
        self.membership.remove(&qid);
    }

    /// Create a fresh EPR pair in `(|00> + |11>)/sqrt(2)`.
    pub fn make_epr(&mut self) -> (QubitRef, QubitRef) {
        let first = self.new_qubit(false);
        let second = self.new_qubit(false);
        self.apply_h(first).expect("fresh qubit");
        self.cnot(first, second).expect("fresh qubits");
        (first, second)
    }

    /// Write two classical bits onto one half of a shared EPR pair:
    /// `(0,0)` identity, `(0,1)` X, `(1,0)` Z, `(1,1)` X then Z.
    pub fn superdense_encode(&mut self, q: QubitRef, b1: bool, b2: bool) -> Result<(), QsimError> {
        if b2 {
            self.apply_x(q)?;
        }
        if b1 {
            self.apply_z(q)?;
        }
        Ok(())
    }

    /// Bell-basis measurement: CNOT(q1 -> q2), H(q1), then measure both.
    /// Consumes both handles. Deterministic when the pair is in an exact
    /// Bell state; together with [`Engine::superdense_encode`] it returns
    /// exactly the encoded bit pair.
    pub fn bell_measure(&mut self, q1: QubitRef, q2: QubitRef) -> Result<BellOutcome, QsimError> {
        if q1 == q2 {
            return Err(QsimError::AliasedQubits);
        }
        self.cnot(q1, q2)?;
        self.apply_h(q1)?;
        let b1 = self.measure(q1)?;
        let b2 = self.measure(q2)?;
        Ok(BellOutcome { b1, b2 })
    }
}
