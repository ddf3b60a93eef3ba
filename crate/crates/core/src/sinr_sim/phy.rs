use super::config::{MacConfig, TrafficConfig};

/// A frame is decodable when its SINR meets the threshold (inclusive).
pub fn decode(signal: f64, interference: &[f64], noise: f64, threshold: f64) -> bool {
    signal > 0.0 && sinr(signal, interference.iter().sum(), noise) >= threshold
}

pub fn sinr(signal: f64, interference: f64, noise: f64) -> f64 {
    signal / (interference + noise)
}

/// Running minimum of a frame's SINR over every interference segment it
/// overlaps. A segment in which an interferer is present counts that
/// interferer at full power, whatever the overlap length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrTracker {
    min: f64,
}

impl Default for SinrTracker {
    fn default() -> Self {
        SinrTracker { min: f64::INFINITY }
    }
}

impl SinrTracker {
    pub fn observe(&mut self, value: f64) {
        if value < self.min {
            self.min = value;
        }
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.min >= threshold
    }
}

fn micros_to_ns(us: f64) -> u64 {
    (us * 1000.0).ceil() as u64
}

/// Frame durations in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Airtime {
    /// Preamble plus MAC header at the header rate.
    pub header_ns: u64,
    pub data_ns: u64,
    pub control_ns: u64,
}

impl Airtime {
    pub fn new(mac: &MacConfig, traffic: &TrafficConfig) -> Self {
        let header_us =
            mac.preamble_us as f64 + (mac.mac_overhead_bytes * 8) as f64 / mac.header_rate_mbps;
        let payload_us = (traffic.packet_bytes * 8) as f64 / mac.payload_rate_mbps;
        let control_us =
            mac.preamble_us as f64 + (mac.control_bytes * 8) as f64 / mac.control_rate_mbps;
        let header_ns = micros_to_ns(header_us);
        Airtime {
            header_ns,
            data_ns: header_ns + micros_to_ns(payload_us),
            control_ns: micros_to_ns(control_us),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_is_inclusive() {
        assert!(decode(4.0, &[], 2.0, 2.0));
        assert!(!decode(4.0, &[], 2.0, 2.000_001));
    }

    #[test]
    fn silent_signal_never_decodes() {
        assert!(!decode(0.0, &[], 1e-12, 0.0));
    }

    #[test]
    fn equal_power_interferer_blocks_decoding() {
        assert!(!decode(1.0, &[1.0], 1e-3, 3.0));
        assert!(!decode(1.0, &[0.5, 0.5], 0.0, 3.0));
    }

    #[test]
    fn tracker_keeps_the_worst_segment() {
        let mut t = SinrTracker::default();
        for v in [30.0, 12.0, 50.0] {
            t.observe(v);
        }
        assert_eq!(t.min(), 12.0);
        assert!(t.passes(12.0));
        assert!(!t.passes(12.5));
    }

    #[test]
    fn default_airtimes() {
        let a = Airtime::new(&MacConfig::default(), &TrafficConfig::default());
        assert_eq!(a.header_ns, 53_334);
        assert_eq!(a.data_ns, 53_334 + 326_667);
        assert_eq!(a.control_ns, 34_667);
    }
}
