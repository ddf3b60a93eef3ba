use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::channel::{db_to_linear, dbm_to_mw, ChannelField};
use super::config::{MacConfig, Protocol, SimConfig, Topology};
use super::phy::{sinr, Airtime, SinrTracker};
use super::protocol::{relay_decision_cons2, relay_decision_greed2, NetworkSnapshot};
use super::SimError;
use crate::policy_synth::Decision;

/// Per-flow counters from one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowStats {
    /// 1-based flow number.
    pub flow_id: usize,
    pub offered: u64,
    pub delivered: u64,
    pub dropped: u64,
    /// Data frames lost at the destination although the noise-only SNR
    /// would have decoded them.
    pub collisions: u64,
    /// Slots that the source spent frozen while contending.
    pub deferral_slots: u64,
    /// Relay transmissions made on behalf of this flow.
    pub relay_tx_count: u64,
    /// Receptions of this flow that decode without the other flows' relay
    /// signal but fail with it.
    pub relay_collisions: u64,
    /// Relay transmissions during which this flow's source sensed the medium
    /// busy only because of the relay.
    pub relay_deferrals: u64,
    pub throughput_bps: f64,
    pub batch_throughput_bps: Vec<f64>,
}

/// One relay forwarding, recorded for invariant checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelayTxRecord {
    pub flow_id: usize,
    pub seq: u64,
    pub start_ns: u64,
    pub end_ns: u64,
    /// End of the NACK that triggered the forwarding.
    pub nack_end_ns: u64,
    /// The packet the relay decoded from the source's first transmission.
    pub relay_copy: Option<u64>,
    pub epoch_start: u64,
    pub epoch_end: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Data,
    Retransmission,
    Relay,
    Ack,
    Nack,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TxRecord {
    pub node: usize,
    pub kind: FrameKind,
    pub start_ns: u64,
    pub end_ns: u64,
    /// Received power at every node, fixed for the whole frame.
    pub power_at: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimOptions {
    pub record_transmissions: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub protocol: Protocol,
    pub seed: u64,
    pub flows: Vec<FlowStats>,
    pub relay_log: Vec<RelayTxRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub transmissions: Vec<TxRecord>,
    pub events: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Ev {
    TxEnd(usize),
    ChannelStep,
    Arrival(usize),
    Difs { flow: usize, gen: u64 },
    Countdown { flow: usize, gen: u64 },
    Timeout { flow: usize, gen: u64 },
    Respond { flow: usize, ack: bool },
    Retransmit { flow: usize },
}

impl Ev {
    /// Frame ends are handled before anything else scheduled at the same
    /// instant, so back-to-back frames never appear to overlap.
    fn priority(self) -> u8 {
        match self {
            Ev::TxEnd(_) => 0,
            Ev::ChannelStep => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    WaitIdle,
    Difs,
    Countdown,
    Exchange,
}

#[derive(Debug)]
struct Source {
    queue: VecDeque<u64>,
    next_seq: u64,
    backoff: Option<u32>,
    cw: u32,
    retries: u32,
    phase: Phase,
    phase_start: u64,
    /// Time at which the pending DIFS or countdown event fires.
    phase_deadline: u64,
    gen: u64,
    busy: bool,
    defer_mark: u64,
    defer_ns: u64,
    retransmitted: bool,
    /// Relay transmission id during which this source was last blamed.
    blamed_relay_tx: Option<usize>,
}

impl Source {
    fn contending(&self) -> bool {
        matches!(self.phase, Phase::WaitIdle | Phase::Difs | Phase::Countdown)
    }
}

#[derive(Debug)]
struct Tx {
    node: usize,
    kind: FrameKind,
    flow: usize,
    group: usize,
    end: u64,
    power_at: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Purpose {
    Destination,
    RelayCopy,
}

#[derive(Debug)]
struct Reception {
    rx: usize,
    group: usize,
    flow: usize,
    seq: u64,
    purpose: Purpose,
    signal: f64,
    header_end: u64,
    blocked: bool,
    full: SinrTracker,
    header: SinrTracker,
    without_relay: SinrTracker,
}

struct Timing {
    slot: u64,
    sifs: u64,
    difs: u64,
    air: Airtime,
    step: u64,
    end: u64,
    batch_ns: u64,
    arrival_ns: f64,
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    topo: Topology,
    t: Timing,
    noise: f64,
    gamma_payload: f64,
    gamma_header: f64,
    cs: f64,
    now: u64,
    seq: u64,
    queue: BinaryHeap<Reverse<(u64, u8, u64, Ev)>>,
    rng: ChaCha8Rng,
    field: ChannelField,
    epoch: u64,
    step_pending: bool,
    txs: Vec<Tx>,
    active: Vec<usize>,
    receptions: Vec<Reception>,
    sources: Vec<Source>,
    relay_copy: Vec<Option<u64>>,
    last_nack_end: Vec<u64>,
    arrival_anchor: Vec<f64>,
    stats: Vec<FlowStats>,
    relay_log: Vec<RelayTxRecord>,
    relay_log_index: Vec<Option<usize>>,
    record: Option<Vec<TxRecord>>,
    events: u64,
}

fn us(v: u64) -> u64 {
    v * 1000
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SimConfig, topo: Topology, options: &SimOptions) -> Self {
        let mac: &MacConfig = &cfg.mac;
        let end = (cfg.run.duration_s * 1e9).round() as u64;
        let batches = cfg.run.batches as u64;
        let t = Timing {
            slot: us(mac.slot_us),
            sifs: us(mac.sifs_us),
            difs: us(mac.difs_us),
            air: Airtime::new(mac, &cfg.traffic),
            step: us(cfg.phy.coherence_step_us),
            end,
            batch_ns: end.div_ceil(batches).max(1),
            arrival_ns: 1e9 / cfg.traffic.rate_pps,
        };
        let seed = cfg.run.seed;
        let flows = topo.flows.len();
        let field = ChannelField::new(&topo, &cfg.phy, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        let sources = (0..flows)
            .map(|_| Source {
                queue: VecDeque::new(),
                next_seq: 0,
                backoff: None,
                cw: mac.cw_min,
                retries: 0,
                phase: Phase::Idle,
                phase_start: 0,
                phase_deadline: 0,
                gen: 0,
                busy: false,
                defer_mark: 0,
                defer_ns: 0,
                retransmitted: false,
                blamed_relay_tx: None,
            })
            .collect();
        let stats = (0..flows)
            .map(|f| FlowStats {
                flow_id: f + 1,
                offered: 0,
                delivered: 0,
                dropped: 0,
                collisions: 0,
                deferral_slots: 0,
                relay_tx_count: 0,
                relay_collisions: 0,
                relay_deferrals: 0,
                throughput_bps: 0.0,
                batch_throughput_bps: vec![0.0; cfg.run.batches],
            })
            .collect();
        Engine {
            cfg,
            t,
            noise: dbm_to_mw(cfg.phy.noise_dbm),
            gamma_payload: db_to_linear(cfg.phy.payload_threshold_db),
            gamma_header: db_to_linear(cfg.phy.header_threshold_db),
            cs: dbm_to_mw(cfg.phy.cs_threshold_dbm),
            now: 0,
            seq: 0,
            queue: BinaryHeap::new(),
            rng,
            field,
            epoch: 0,
            step_pending: false,
            txs: Vec::new(),
            active: Vec::new(),
            receptions: Vec::new(),
            sources,
            relay_copy: vec![None; flows],
            last_nack_end: vec![0; flows],
            arrival_anchor: vec![0.0; flows],
            stats,
            relay_log: Vec::new(),
            relay_log_index: Vec::new(),
            record: options.record_transmissions.then(Vec::new),
            events: 0,
            topo,
        }
    }

    fn schedule(&mut self, at: u64, ev: Ev) {
        self.seq += 1;
        self.queue.push(Reverse((at, ev.priority(), self.seq, ev)));
    }

    fn run(mut self) -> SimReport {
        for f in 0..self.topo.flows.len() {
            let offset = self.rng.random_range(0.0..self.t.arrival_ns);
            self.arrival_anchor[f] = offset;
            self.schedule(offset.round() as u64, Ev::Arrival(f));
        }
        self.schedule(self.t.step, Ev::ChannelStep);
        while let Some(Reverse((at, _, _, ev))) = self.queue.pop() {
            if at > self.t.end {
                break;
            }
            self.now = at;
            self.events += 1;
            self.dispatch(ev);
        }
        self.now = self.t.end;
        self.finish()
    }

    fn dispatch(&mut self, ev: Ev) {
        match ev {
            Ev::TxEnd(id) => self.on_tx_end(id),
            Ev::ChannelStep => {
                if self
                    .active
                    .iter()
                    .any(|&id| self.txs[id].kind == FrameKind::Relay)
                {
                    self.step_pending = true;
                } else {
                    self.step_channel();
                }
                self.schedule(self.now + self.t.step, Ev::ChannelStep);
            }
            Ev::Arrival(f) => self.on_arrival(f),
            Ev::Difs { flow, gen } if gen == self.sources[flow].gen => {
                let b = self.sources[flow].backoff.unwrap_or(0);
                let deadline = self.now + b as u64 * self.t.slot;
                let src = &mut self.sources[flow];
                src.phase = Phase::Countdown;
                src.phase_start = self.now;
                src.phase_deadline = deadline;
                self.schedule(deadline, Ev::Countdown { flow, gen });
            }
            Ev::Countdown { flow, gen } if gen == self.sources[flow].gen => {
                self.mark_deferral(flow);
                let src = &mut self.sources[flow];
                src.phase = Phase::Exchange;
                src.backoff = None;
                src.retransmitted = false;
                self.send_data(flow, false);
            }
            Ev::Timeout { flow, gen } if gen == self.sources[flow].gen => {
                self.exchange_failed(flow)
            }
            Ev::Respond { flow, ack } => {
                let kind = if ack { FrameKind::Ack } else { FrameKind::Nack };
                let node = self.topo.flows[flow].destination;
                let group = self.txs.len();
                self.start_tx(node, kind, flow, group, self.t.air.control_ns);
                self.after_medium_change();
            }
            Ev::Retransmit { flow } => self.retransmit(flow),
            Ev::Difs { .. } | Ev::Countdown { .. } | Ev::Timeout { .. } => {}
        }
    }

    fn step_channel(&mut self) {
        self.field.step();
        self.epoch += 1;
    }

    fn on_arrival(&mut self, flow: usize) {
        let limit = self.cfg.traffic.queue_limit;
        let src = &mut self.sources[flow];
        self.stats[flow].offered += 1;
        if src.queue.len() < limit {
            src.queue.push_back(src.next_seq);
            src.next_seq += 1;
        } else {
            self.stats[flow].dropped += 1;
        }
        let next = self.arrival_anchor[flow] + self.stats[flow].offered as f64 * self.t.arrival_ns;
        self.schedule(next.round() as u64, Ev::Arrival(flow));
        if self.sources[flow].phase == Phase::Idle {
            self.begin_access(flow);
        }
    }

    fn sensed(&self, node: usize, include_relay: bool) -> f64 {
        self.active
            .iter()
            .map(|&id| &self.txs[id])
            .filter(|tx| tx.node != node && (include_relay || tx.kind != FrameKind::Relay))
            .map(|tx| tx.power_at[node])
            .sum::<f64>()
            + self.noise
    }

    fn begin_access(&mut self, flow: usize) {
        if self.sources[flow].queue.is_empty() {
            self.sources[flow].phase = Phase::Idle;
            return;
        }
        if self.sources[flow].backoff.is_none() {
            let cw = self.sources[flow].cw;
            self.sources[flow].backoff = Some(self.rng.random_range(0..=cw));
        }
        let node = self.topo.flows[flow].source;
        let busy = self.sensed(node, true) >= self.cs;
        let src = &mut self.sources[flow];
        src.busy = busy;
        src.defer_mark = self.now;
        if busy {
            src.phase = Phase::WaitIdle;
        } else {
            self.start_difs(flow);
        }
    }

    fn start_difs(&mut self, flow: usize) {
        let deadline = self.now + self.t.difs;
        let src = &mut self.sources[flow];
        src.gen += 1;
        src.phase = Phase::Difs;
        src.phase_start = self.now;
        src.phase_deadline = deadline;
        let gen = src.gen;
        self.schedule(deadline, Ev::Difs { flow, gen });
    }

    fn mark_deferral(&mut self, flow: usize) {
        let src = &mut self.sources[flow];
        if src.contending() && src.busy {
            src.defer_ns += self.now - src.defer_mark;
        }
        src.defer_mark = self.now;
    }

    /// Re-evaluates carrier sense at every contending source and the SINR of
    /// every reception in progress after the set of active frames changed.
    fn after_medium_change(&mut self) {
        self.refresh_receptions();
        let relay_tx = self
            .active
            .iter()
            .copied()
            .find(|&id| self.txs[id].kind == FrameKind::Relay);
        for flow in 0..self.sources.len() {
            if !self.sources[flow].contending() {
                continue;
            }
            let node = self.topo.flows[flow].source;
            let busy = self.sensed(node, true) >= self.cs;
            if let Some(rid) = relay_tx {
                let own_relay = self.topo.flows[flow].relay == Some(self.txs[rid].node);
                if busy
                    && !own_relay
                    && self.sources[flow].blamed_relay_tx != Some(rid)
                    && self.sensed(node, false) < self.cs
                {
                    self.sources[flow].blamed_relay_tx = Some(rid);
                    self.stats[flow].relay_deferrals += 1;
                }
            }
            if busy == self.sources[flow].busy {
                continue;
            }
            self.mark_deferral(flow);
            self.sources[flow].busy = busy;
            if busy {
                self.freeze(flow);
            } else if self.sources[flow].phase == Phase::WaitIdle {
                self.start_difs(flow);
            }
        }
    }

    fn freeze(&mut self, flow: usize) {
        let slot = self.t.slot;
        let now = self.now;
        let src = &mut self.sources[flow];
        // A timer expiring at this very instant has already won the slot.
        if matches!(src.phase, Phase::Difs | Phase::Countdown) && src.phase_deadline == now {
            return;
        }
        if src.phase == Phase::Countdown {
            let elapsed = ((now - src.phase_start) / slot) as u32;
            src.backoff = src.backoff.map(|b| b.saturating_sub(elapsed));
        }
        if matches!(src.phase, Phase::Difs | Phase::Countdown) {
            src.gen += 1;
            src.phase = Phase::WaitIdle;
        }
    }

    fn refresh_receptions(&mut self) {
        let now = self.now;
        for r in &mut self.receptions {
            let mut interference = 0.0;
            let mut interference_wo = 0.0;
            for &id in &self.active {
                let tx = &self.txs[id];
                if tx.node == r.rx {
                    r.blocked = true;
                }
                if tx.group == r.group {
                    continue;
                }
                interference += tx.power_at[r.rx];
                if tx.kind != FrameKind::Relay {
                    interference_wo += tx.power_at[r.rx];
                }
            }
            let s = sinr(r.signal, interference, self.noise);
            r.full.observe(s);
            if now < r.header_end {
                r.header.observe(s);
            }
            r.without_relay
                .observe(sinr(r.signal, interference_wo, self.noise));
        }
    }

    fn start_tx(
        &mut self,
        node: usize,
        kind: FrameKind,
        flow: usize,
        group: usize,
        duration: u64,
    ) -> usize {
        let id = self.txs.len();
        let end = self.now + duration;
        let power_at = self.field.rx_row(node);
        if let Some(log) = &mut self.record {
            log.push(TxRecord {
                node,
                kind,
                start_ns: self.now,
                end_ns: end,
                power_at: power_at.clone(),
            });
        }
        self.txs.push(Tx {
            node,
            kind,
            flow,
            group,
            end,
            power_at,
        });
        self.active.push(id);
        self.relay_log_index.push(None);
        self.schedule(end, Ev::TxEnd(id));
        id
    }

    fn open_reception(&mut self, rx: usize, group: usize, flow: usize, seq: u64, purpose: Purpose) {
        let signal: f64 = self
            .active
            .iter()
            .map(|&id| &self.txs[id])
            .filter(|tx| tx.group == group)
            .map(|tx| tx.power_at[rx])
            .sum();
        let blocked = self.active.iter().any(|&id| self.txs[id].node == rx);
        self.receptions.push(Reception {
            rx,
            group,
            flow,
            seq,
            purpose,
            signal,
            header_end: self.now + self.t.air.header_ns,
            blocked,
            full: SinrTracker::default(),
            header: SinrTracker::default(),
            without_relay: SinrTracker::default(),
        });
    }

    fn send_data(&mut self, flow: usize, retransmission: bool) {
        let f = self.topo.flows[flow].clone();
        let seq = *self.sources[flow]
            .queue
            .front()
            .expect("exchange without a packet");
        let group = self.txs.len();
        let kind = if retransmission {
            FrameKind::Retransmission
        } else {
            FrameKind::Data
        };
        let mut relay_joins = false;
        if retransmission {
            if let Some(relay) = f.relay {
                relay_joins = self.relay_copy[flow] == Some(seq) && self.relay_allows(flow, relay);
            }
        }
        self.start_tx(f.source, kind, flow, group, self.t.air.data_ns);
        if relay_joins {
            let relay = f.relay.expect("relay present");
            let id = self.start_tx(relay, FrameKind::Relay, flow, group, self.t.air.data_ns);
            self.stats[flow].relay_tx_count += 1;
            self.relay_log_index[id] = Some(self.relay_log.len());
            self.relay_log.push(RelayTxRecord {
                flow_id: flow + 1,
                seq,
                start_ns: self.now,
                end_ns: self.txs[id].end,
                nack_end_ns: self.last_nack_end[flow],
                relay_copy: self.relay_copy[flow],
                epoch_start: self.epoch,
                epoch_end: self.epoch,
            });
        }
        self.open_reception(f.destination, group, flow, seq, Purpose::Destination);
        if let (Some(relay), false) = (f.relay, retransmission) {
            self.open_reception(relay, group, flow, seq, Purpose::RelayCopy);
        }
        self.after_medium_change();
    }

    fn snapshot(&self, flow: usize, relay: usize, frozen: bool) -> NetworkSnapshot {
        let n = self.topo.nodes.len();
        let mut power: Vec<Vec<f64>> = (0..n).map(|i| self.field.rx_row(i)).collect();
        if frozen {
            for &id in &self.active {
                power[self.txs[id].node] = self.txs[id].power_at.clone();
            }
        }
        let f = &self.topo.flows[flow];
        NetworkSnapshot {
            power,
            noise: self.noise,
            gamma: self.gamma_payload,
            cs_threshold: self.cs,
            source: f.source,
            destination: f.destination,
            relay,
        }
    }

    fn relay_allows(&self, flow: usize, relay: usize) -> bool {
        match self.cfg.protocol {
            Protocol::NoRelay | Protocol::Cons0 => false,
            Protocol::Greed0 => true,
            // Frames already on the air keep the powers they started with;
            // frames started while the relay is active see the current
            // gains. Both must be safe.
            Protocol::Cons2 => [true, false].into_iter().all(|frozen| {
                relay_decision_cons2(&self.snapshot(flow, relay, frozen)) == Decision::Tx
            }),
            Protocol::Greed2 => {
                relay_decision_greed2(&self.snapshot(flow, relay, true)) == Decision::Tx
            }
        }
    }

    fn on_tx_end(&mut self, id: usize) {
        if !self.active.contains(&id) {
            return;
        }
        let (kind, flow, group) = {
            let tx = &self.txs[id];
            (tx.kind, tx.flow, tx.group)
        };
        // A source and its relay stop together; never expose a state with
        // the relay still on the air alone.
        let now = self.now;
        let ending: Vec<usize> = self
            .active
            .iter()
            .copied()
            .filter(|&a| self.txs[a].group == group && self.txs[a].end == now)
            .collect();
        self.active.retain(|a| !ending.contains(a));
        for &a in &ending {
            if self.txs[a].kind == FrameKind::Relay {
                if let Some(i) = self.relay_log_index[a] {
                    self.relay_log[i].epoch_end = self.epoch;
                }
                if self.step_pending {
                    self.step_pending = false;
                    self.step_channel();
                }
            }
        }
        match kind {
            FrameKind::Relay => {}
            FrameKind::Data | FrameKind::Retransmission => {
                self.close_receptions(group);
                let deadline = self.now + self.t.sifs + self.t.air.control_ns + self.t.slot;
                let gen = self.sources[flow].gen + 1;
                self.sources[flow].gen = gen;
                self.schedule(deadline, Ev::Timeout { flow, gen });
            }
            FrameKind::Ack => {
                let src = &mut self.sources[flow];
                src.gen += 1;
                self.exchange_succeeded(flow);
            }
            FrameKind::Nack => {
                self.sources[flow].gen += 1;
                self.last_nack_end[flow] = self.now;
                if self.sources[flow].retransmitted {
                    self.exchange_failed(flow);
                } else {
                    self.schedule(self.now + self.t.sifs, Ev::Retransmit { flow });
                }
            }
        }
        self.after_medium_change();
    }

    fn retransmit(&mut self, flow: usize) {
        self.sources[flow].retransmitted = true;
        self.send_data(flow, true);
    }

    fn close_receptions(&mut self, group: usize) {
        let mut i = 0;
        while i < self.receptions.len() {
            if self.receptions[i].group != group {
                i += 1;
                continue;
            }
            let r = self.receptions.swap_remove(i);
            let decoded = !r.blocked && r.full.passes(self.gamma_payload);
            match r.purpose {
                Purpose::RelayCopy => self.relay_copy[r.flow] = decoded.then_some(r.seq),
                Purpose::Destination => {
                    let s = &mut self.stats[r.flow];
                    if decoded {
                        s.delivered += 1;
                        let batch = ((self.now / self.t.batch_ns) as usize)
                            .min(s.batch_throughput_bps.len() - 1);
                        s.batch_throughput_bps[batch] += 1.0;
                        self.schedule(
                            self.now + self.t.sifs,
                            Ev::Respond {
                                flow: r.flow,
                                ack: true,
                            },
                        );
                    } else {
                        if r.signal / self.noise >= self.gamma_payload {
                            s.collisions += 1;
                        }
                        if !r.blocked && r.without_relay.passes(self.gamma_payload) {
                            s.relay_collisions += 1;
                        }
                        if !r.blocked && r.header.passes(self.gamma_header) {
                            self.schedule(
                                self.now + self.t.sifs,
                                Ev::Respond {
                                    flow: r.flow,
                                    ack: false,
                                },
                            );
                        }
                    }
                }
            }
        }
    }

    fn exchange_succeeded(&mut self, flow: usize) {
        let cw_min = self.cfg.mac.cw_min;
        let src = &mut self.sources[flow];
        src.queue.pop_front();
        src.retries = 0;
        src.cw = cw_min;
        src.backoff = None;
        src.phase = Phase::Idle;
        self.begin_access(flow);
    }

    fn exchange_failed(&mut self, flow: usize) {
        let mac = &self.cfg.mac;
        let src = &mut self.sources[flow];
        src.gen += 1;
        src.retries += 1;
        if src.retries > mac.retry_limit {
            src.queue.pop_front();
            src.retries = 0;
            src.cw = mac.cw_min;
            self.stats[flow].dropped += 1;
        } else {
            src.cw = (2 * src.cw + 1).min(mac.cw_max);
        }
        src.backoff = None;
        src.phase = Phase::Idle;
        self.begin_access(flow);
    }

    fn finish(mut self) -> SimReport {
        for flow in 0..self.sources.len() {
            self.mark_deferral(flow);
        }
        let bits = self.cfg.traffic.packet_bytes as f64 * 8.0;
        let duration = self.t.end as f64 * 1e-9;
        let batch_s = self.t.batch_ns as f64 * 1e-9;
        let batches = self.cfg.run.batches;
        let last_batch_s = duration - batch_s * (batches as f64 - 1.0);
        for (flow, s) in self.stats.iter_mut().enumerate() {
            s.deferral_slots = self.sources[flow].defer_ns / self.t.slot;
            s.throughput_bps = s.delivered as f64 * bits / duration;
            for (k, b) in s.batch_throughput_bps.iter_mut().enumerate() {
                let len = if k + 1 == batches {
                    last_batch_s
                } else {
                    batch_s
                };
                *b = *b * bits / len.max(1e-12);
            }
        }
        SimReport {
            protocol: self.cfg.protocol,
            seed: self.cfg.run.seed,
            flows: self.stats,
            relay_log: self.relay_log,
            transmissions: self.record.unwrap_or_default(),
            events: self.events,
        }
    }
}

/// Runs one simulation. Identical configurations give identical reports.
pub fn run_simulation(config: &SimConfig) -> Result<SimReport, SimError> {
    run_simulation_with(config, &SimOptions::default())
}

pub fn run_simulation_with(
    config: &SimConfig,
    options: &SimOptions,
) -> Result<SimReport, SimError> {
    let topo = config.validate()?;
    Ok(Engine::new(config, topo, options).run())
}
