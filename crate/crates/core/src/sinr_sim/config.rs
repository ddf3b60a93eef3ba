use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SimError;

pub const SCHEMA_VERSION: u32 = 1;

/// Relay access protocol run by every relay in the topology.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    #[default]
    NoRelay,
    Cons0,
    Cons2,
    Greed2,
    Greed0,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::NoRelay,
        Protocol::Cons0,
        Protocol::Cons2,
        Protocol::Greed2,
        Protocol::Greed0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::NoRelay => "norelay",
            Protocol::Cons0 => "cons0",
            Protocol::Cons2 => "cons2",
            Protocol::Greed2 => "greed2",
            Protocol::Greed0 => "greed0",
        }
    }

    pub fn needs_relay(self) -> bool {
        self != Protocol::NoRelay
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| SimError::Config(format!("unknown protocol `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Destination,
    Relay,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    /// Metres.
    pub position: [f64; 2],
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub source: String,
    pub destination: String,
    #[serde(default)]
    pub relay: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    /// Two parallel flows; flow 1 owns a relay placed next to its source.
    FlowSeparation {
        separation_m: f64,
        #[serde(default = "default_s1_d1")]
        s1_d1_m: f64,
        #[serde(default = "default_s1_r1")]
        s1_r1_m: f64,
        #[serde(default = "default_s2_d2")]
        s2_d2_m: f64,
        /// Horizontal shift of S2 relative to S1.
        #[serde(default)]
        offset_m: f64,
    },
    Explicit {
        nodes: Vec<NodeSpec>,
        flows: Vec<FlowSpec>,
    },
}

fn default_s1_d1() -> f64 {
    250.0
}
fn default_s1_r1() -> f64 {
    15.0
}
fn default_s2_d2() -> f64 {
    60.0
}

impl TopologySpec {
    pub fn flow_separation(separation_m: f64) -> Self {
        TopologySpec::FlowSeparation {
            separation_m,
            s1_d1_m: default_s1_d1(),
            s1_r1_m: default_s1_r1(),
            s2_d2_m: default_s2_d2(),
            offset_m: 0.0,
        }
    }

    /// Same geometry with a different flow separation.
    pub fn with_separation(&self, separation: f64) -> Result<Self, SimError> {
        match self {
            TopologySpec::FlowSeparation {
                s1_d1_m,
                s1_r1_m,
                s2_d2_m,
                offset_m,
                ..
            } => Ok(TopologySpec::FlowSeparation {
                separation_m: separation,
                s1_d1_m: *s1_d1_m,
                s1_r1_m: *s1_r1_m,
                s2_d2_m: *s2_d2_m,
                offset_m: *offset_m,
            }),
            TopologySpec::Explicit { .. } => Err(SimError::Config(
                "separation sweeps need a flow_separation topology".into(),
            )),
        }
    }

    pub fn build(&self) -> Result<Topology, SimError> {
        let (nodes, flows) = match self {
            TopologySpec::FlowSeparation {
                separation_m,
                s1_d1_m,
                s1_r1_m,
                s2_d2_m,
                offset_m,
            } => {
                let node = |id: &str, x: f64, y: f64, role| NodeSpec {
                    id: id.into(),
                    position: [x, y],
                    role,
                };
                let nodes = vec![
                    node("S1", 0.0, 0.0, Role::Source),
                    node("R1", *s1_r1_m, 0.0, Role::Relay),
                    node("D1", *s1_d1_m, 0.0, Role::Destination),
                    node("S2", *offset_m, *separation_m, Role::Source),
                    node("D2", offset_m + s2_d2_m, *separation_m, Role::Destination),
                ];
                let flows = vec![
                    FlowSpec {
                        source: "S1".into(),
                        destination: "D1".into(),
                        relay: Some("R1".into()),
                    },
                    FlowSpec {
                        source: "S2".into(),
                        destination: "D2".into(),
                        relay: None,
                    },
                ];
                (nodes, flows)
            }
            TopologySpec::Explicit { nodes, flows } => (nodes.clone(), flows.clone()),
        };
        Topology::new(nodes, flows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub source: usize,
    pub destination: usize,
    pub relay: Option<usize>,
}

/// Validated node and flow layout; nodes are referred to by index.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub nodes: Vec<NodeSpec>,
    pub flows: Vec<Flow>,
}

impl Topology {
    pub fn new(nodes: Vec<NodeSpec>, flow_specs: Vec<FlowSpec>) -> Result<Self, SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        for (i, n) in nodes.iter().enumerate() {
            if !n.position.iter().all(|c| c.is_finite()) {
                return bad(format!("node {} has a non-finite position", n.id));
            }
            for m in &nodes[..i] {
                if m.id == n.id {
                    return bad(format!("duplicate node id {}", n.id));
                }
                if m.position == n.position {
                    return bad(format!("nodes {} and {} coincide", m.id, n.id));
                }
            }
        }
        let index = |id: &str| {
            nodes
                .iter()
                .position(|n| n.id == id)
                .ok_or_else(|| SimError::Config(format!("unknown node id {id}")))
        };
        let mut flows = Vec::with_capacity(flow_specs.len());
        let mut used = vec![false; nodes.len()];
        for spec in &flow_specs {
            let flow = Flow {
                source: index(&spec.source)?,
                destination: index(&spec.destination)?,
                relay: spec.relay.as_deref().map(index).transpose()?,
            };
            let members = [Some(flow.source), Some(flow.destination), flow.relay];
            for m in members.into_iter().flatten() {
                if used[m] {
                    return bad(format!(
                        "node {} takes part in more than one flow",
                        nodes[m].id
                    ));
                }
                used[m] = true;
            }
            if flow.source == flow.destination {
                return bad(format!("flow {} sends to itself", spec.source));
            }
            flows.push(flow);
        }
        if flows.is_empty() {
            return bad("topology has no flows".into());
        }
        Ok(Topology { nodes, flows })
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let [x0, y0] = self.nodes[a].position;
        let [x1, y1] = self.nodes[b].position;
        (x0 - x1).hypot(y0 - y1)
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }
}

/// Radio parameters. Power, noise and the three thresholds are tuning choices
/// that give a fading-limited cooperative link and a carrier-sense range
/// about twice the payload decode range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhyConfig {
    pub tx_power_dbm: f64,
    pub noise_dbm: f64,
    pub path_loss_exponent: f64,
    /// Loss at the 1 m reference distance.
    pub reference_loss_db: f64,
    /// SINR needed to decode a whole data frame.
    pub payload_threshold_db: f64,
    /// SINR needed to detect a frame header (a NACK is sent for a detected
    /// but undecodable frame).
    pub header_threshold_db: f64,
    /// Total received power at which backoff freezes.
    pub cs_threshold_dbm: f64,
    pub doppler_hz: f64,
    /// Fading-process update interval.
    pub coherence_step_us: u64,
}

impl Default for PhyConfig {
    fn default() -> Self {
        PhyConfig {
            tx_power_dbm: 20.0,
            noise_dbm: -101.0,
            path_loss_exponent: 3.0,
            reference_loss_db: 30.0,
            payload_threshold_db: 18.0,
            header_threshold_db: 5.0,
            cs_threshold_dbm: -92.0,
            doppler_hz: 15.0,
            coherence_step_us: 1000,
        }
    }
}

/// Simplified DCF constants. The default header and payload rates are BPSK
/// rate 1/2 and 16-QAM rate 3/4 on a 20 MHz OFDM channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacConfig {
    pub slot_us: u64,
    pub sifs_us: u64,
    pub difs_us: u64,
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
    pub preamble_us: u64,
    pub header_rate_mbps: f64,
    pub payload_rate_mbps: f64,
    pub mac_overhead_bytes: u32,
    pub control_bytes: u32,
    pub control_rate_mbps: f64,
}

impl Default for MacConfig {
    fn default() -> Self {
        MacConfig {
            slot_us: 9,
            sifs_us: 16,
            difs_us: 34,
            cw_min: 15,
            cw_max: 15,
            retry_limit: 7,
            preamble_us: 16,
            header_rate_mbps: 6.0,
            payload_rate_mbps: 36.0,
            mac_overhead_bytes: 28,
            control_bytes: 14,
            control_rate_mbps: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub packet_bytes: u32,
    /// Constant-bit-rate arrivals per source, packets per second.
    pub rate_pps: f64,
    pub queue_limit: usize,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            packet_bytes: 1470,
            rate_pps: 2500.0,
            queue_limit: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub duration_s: f64,
    /// Number of equal time batches used for batch-means error bars.
    pub batches: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            duration_s: 60.0,
            batches: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub topology: TopologySpec,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default)]
    pub phy: PhyConfig,
    #[serde(default)]
    pub mac: MacConfig,
    #[serde(default)]
    pub traffic: TrafficConfig,
    #[serde(default)]
    pub run: RunConfig,
}

/// False for NaN as well as for non-positive values.
pub(crate) fn positive(x: f64) -> bool {
    x > 0.0
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

impl SimConfig {
    /// Default radio and MAC settings on the two-flow geometry.
    pub fn flow_separation(separation_m: f64, protocol: Protocol) -> Self {
        SimConfig {
            schema_version: SCHEMA_VERSION,
            topology: TopologySpec::flow_separation(separation_m),
            protocol,
            phy: PhyConfig::default(),
            mac: MacConfig::default(),
            traffic: TrafficConfig::default(),
            run: RunConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: SimConfig =
            serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<Topology, SimError> {
        let bad = |msg: &str| Err(SimError::Config(msg.to_string()));
        if self.schema_version != SCHEMA_VERSION {
            return Err(SimError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let topology = self.topology.build()?;
        if self.protocol.needs_relay() && topology.flows.iter().all(|f| f.relay.is_none()) {
            return Err(SimError::Config(format!(
                "protocol {} needs a flow with a relay",
                self.protocol
            )));
        }
        let phy = &self.phy;
        let finite = [
            phy.tx_power_dbm,
            phy.noise_dbm,
            phy.path_loss_exponent,
            phy.reference_loss_db,
            phy.payload_threshold_db,
            phy.header_threshold_db,
            phy.cs_threshold_dbm,
            phy.doppler_hz,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("phy parameters must be finite");
        }
        if phy.path_loss_exponent <= 0.0 || phy.doppler_hz < 0.0 || phy.coherence_step_us == 0 {
            return bad(
                "path loss exponent and coherence step must be positive, Doppler non-negative",
            );
        }
        let mac = &self.mac;
        if mac.slot_us == 0 || mac.cw_min > mac.cw_max {
            return bad("slot must be positive and cw_min <= cw_max");
        }
        if [
            mac.header_rate_mbps,
            mac.payload_rate_mbps,
            mac.control_rate_mbps,
        ]
        .iter()
        .any(|r| !positive(*r))
        {
            return bad("rates must be positive");
        }
        if !positive(self.traffic.rate_pps)
            || self.traffic.packet_bytes == 0
            || self.traffic.queue_limit == 0
        {
            return bad("traffic rate, packet size and queue limit must be positive");
        }
        if !positive(self.run.duration_s) || self.run.batches == 0 {
            return bad("duration and batch count must be positive");
        }
        Ok(topology)
    }
}
