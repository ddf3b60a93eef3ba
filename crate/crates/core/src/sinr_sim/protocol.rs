//! Relay transmit decisions from instantaneous received powers.

use crate::policy_synth::Decision;

/// Received powers at the moment a relay would start forwarding.
///
/// `power[i][j]` is the power (mW) that node `j` receives when node `i`
/// transmits. Thresholds are linear: `gamma` is an SINR ratio and
/// `cs_threshold` a power in mW.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSnapshot {
    pub power: Vec<Vec<f64>>,
    pub noise: f64,
    pub gamma: f64,
    pub cs_threshold: f64,
    pub source: usize,
    pub destination: usize,
    pub relay: usize,
}

impl NetworkSnapshot {
    fn p(&self, i: usize, j: usize) -> f64 {
        self.power[i][j]
    }

    fn others(&self, exclude: &[usize]) -> impl Iterator<Item = usize> + '_ {
        let (s, d, r) = (self.source, self.destination, self.relay);
        let exclude = exclude.to_vec();
        (0..self.power.len()).filter(move |k| *k != s && *k != d && *k != r && !exclude.contains(k))
    }

    fn third_party_pairs(&self) -> Vec<(usize, usize)> {
        self.others(&[])
            .flat_map(|i| self.others(&[i]).map(move |j| (i, j)))
            .collect()
    }

    /// Everyone outside the cooperative triple except `exclude`, summed at `at`.
    fn background(&self, at: usize, exclude: &[usize], include_all: bool) -> f64 {
        if !include_all {
            return 0.0;
        }
        self.others(exclude).map(|k| self.p(k, at)).sum()
    }

    fn col_s(&self, i: usize, j: usize) -> bool {
        self.p(i, j) / (self.p(self.source, j) + self.noise) < self.gamma
    }

    fn col_sr(&self, i: usize, j: usize, worst_case: bool) -> bool {
        let interference = self.p(self.source, j)
            + self.p(self.relay, j)
            + self.background(j, &[i, j], worst_case);
        self.p(i, j) / (interference + self.noise) < self.gamma
    }

    fn bo_s(&self, i: usize) -> bool {
        self.p(self.source, i) + self.noise >= self.cs_threshold
    }

    fn bo_sr(&self, i: usize, worst_case: bool) -> bool {
        self.p(self.source, i)
            + self.p(self.relay, i)
            + self.background(i, &[i], worst_case)
            + self.noise
            >= self.cs_threshold
    }

    /// Source and relay together still cannot reach the destination.
    pub fn col_srd(&self) -> bool {
        (self.p(self.source, self.destination) + self.p(self.relay, self.destination)) / self.noise
            < self.gamma
    }
}

/// Conservative two-hop protocol: stay silent if relaying could newly push
/// any third-party node into backoff or newly break any third-party link,
/// assuming every other third-party node transmits at once.
pub fn relay_decision_cons2(snap: &NetworkSnapshot) -> Decision {
    for (i, j) in snap.third_party_pairs() {
        if (!snap.bo_s(i) && snap.bo_sr(i, true)) || (!snap.col_s(i, j) && snap.col_sr(i, j, true))
        {
            return Decision::Rx;
        }
    }
    Decision::Tx
}

/// Greedy two-hop protocol: stay silent only when forwarding cannot help the
/// destination, or when some third-party pair would suffer both a new
/// backoff and a new collision, ignoring other third-party transmitters.
pub fn relay_decision_greed2(snap: &NetworkSnapshot) -> Decision {
    if snap.col_srd() {
        return Decision::Rx;
    }
    for (i, j) in snap.third_party_pairs() {
        if !snap.bo_s(i) && snap.bo_sr(i, false) && !snap.col_s(i, j) && snap.col_sr(i, j, false) {
            return Decision::Rx;
        }
    }
    Decision::Tx
}
