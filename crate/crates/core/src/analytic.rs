//! Closed-form throughput model for entanglement-assisted burst transmission.
//!
//! For a burst of `B` packets of `D` bits each, preceded by an idle period
//! that shared `E` EPR frames of `L` pairs, each buffered pair lets one
//! payload qubit carry two classical bits instead of one. The payload-qubit
//! cost of the burst and the average bits per transmission then have closed
//! forms, piecewise in whether the pair supply `E*L` covers every bit pair.

/// One evaluated point of the closed-form model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticPoint {
    pub burst_packets: u64,
    pub epr_frames: u64,
    pub packet_bits: u64,
    pub epr_frame_len: u64,
    /// Payload qubits needed to move one burst.
    pub transmissions: f64,
    /// Average classical bits carried per payload qubit, in [1, 2].
    pub bits_per_transmission: f64,
}

/// Payload-qubit cost of one burst: `B*D - E*L` while `E*L < B*D/2`, and
/// `B*D/2` once every bit pair is entanglement-assisted.
///
/// Returned as `f64` so the saturated branch stays exact even for odd
/// `B*D`; the value is integral whenever `B*D` is even.
pub fn burst_transmissions(b: u64, e: u64, d: u64, l: u64) -> f64 {
    let bits = (b * d) as f64;
    if 2 * e * l < b * d {
        bits - (e * l) as f64
    } else {
        bits / 2.0
    }
}

/// Average classical bits per payload qubit: `B*D / (B*D - E*L)` while
/// `E*L < B*D/2`, and exactly 2 otherwise.
pub fn bits_per_transmission(b: u64, e: u64, d: u64, l: u64) -> f64 {
    if 2 * e * l < b * d {
        let bits = (b * d) as f64;
        bits / (bits - (e * l) as f64)
    } else {
        2.0
    }
}

/// Evaluate both model quantities at one parameter point.
pub fn evaluate(b: u64, e: u64, d: u64, l: u64) -> AnalyticPoint {
    AnalyticPoint {
        burst_packets: b,
        epr_frames: e,
        packet_bits: d,
        epr_frame_len: l,
        transmissions: burst_transmissions(b, e, d, l),
        bits_per_transmission: bits_per_transmission(b, e, d, l),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unsaturated_burst_cost() {
        assert_eq!(burst_transmissions(10, 10, 168, 8), 1600.0);
    }

    #[test]
    fn no_assistance_costs_one_qubit_per_bit() {
        assert_eq!(burst_transmissions(7, 0, 168, 33), 7.0 * 168.0);
        assert_eq!(bits_per_transmission(7, 0, 168, 33), 1.0);
    }

    #[test]
    fn saturated_burst_cost_is_half_the_bits() {
        assert_eq!(burst_transmissions(1, 10, 168, 80), 84.0);
        assert_eq!(bits_per_transmission(1, 10, 168, 16), 2.0);
    }

    #[test]
    fn reference_points() {
        assert!((bits_per_transmission(1, 10, 168, 8) - 168.0 / 88.0).abs() < 1e-12);
        assert!((bits_per_transmission(10, 10, 168, 8) - 1.05).abs() < 1e-12);
        assert!((bits_per_transmission(3, 10, 168, 16) - 1.465116).abs() < 1e-6);
        assert!((bits_per_transmission(10, 10, 168, 80) - 1.909091).abs() < 1e-6);
    }

    #[test]
    fn branches_agree_on_the_boundary() {
        // 2*E*L == B*D: the unsaturated formula degenerates to exactly 2.
        for (b, e, d, l) in [(1, 1, 16, 8), (3, 2, 8, 6), (5, 10, 160, 40)] {
            assert_eq!(2 * e * l, b * d);
            let bits = (b * d) as f64;
            let unsaturated = bits / (bits - (e * l) as f64);
            assert_eq!(bits_per_transmission(b, e, d, l), 2.0);
            assert_eq!(unsaturated, 2.0);
        }
    }

    #[test]
    fn identity_with_burst_cost() {
        for b in 1..=8u64 {
            for e in 0..=6 {
                for d in [8, 24, 168] {
                    for l in 0..=40 {
                        let c = bits_per_transmission(b, e, d, l);
                        let t = burst_transmissions(b, e, d, l);
                        assert_eq!(c, (b * d) as f64 / t);
                        assert!((1.0..=2.0).contains(&c));
                    }
                }
            }
        }
    }
}
