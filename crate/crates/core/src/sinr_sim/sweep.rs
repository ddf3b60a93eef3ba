use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{positive, Protocol, SimConfig, TopologySpec};
use super::engine::{run_simulation, FlowStats};
use super::SimError;

/// One finished run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub protocol: Protocol,
    pub separation_m: f64,
    pub seed: u64,
    pub flows: Vec<FlowStats>,
}

/// CSV row: one per (run, flow). `delta_bps` is relative to the no-relay run
/// at the same separation and seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub protocol: Protocol,
    /// Empty for explicit topologies.
    pub separation_m: Option<f64>,
    pub flow_id: usize,
    pub thpt_bps: f64,
    pub delta_bps: f64,
    pub collisions: u64,
    pub deferrals: u64,
    pub relay_tx_count: u64,
    pub seed: u64,
    pub relay_collisions: u64,
    pub relay_deferrals: u64,
}

impl SweepRow {
    fn new(
        protocol: Protocol,
        separation_m: Option<f64>,
        seed: u64,
        f: &FlowStats,
        base: &FlowStats,
    ) -> Self {
        SweepRow {
            protocol,
            separation_m,
            flow_id: f.flow_id,
            thpt_bps: f.throughput_bps,
            delta_bps: f.throughput_bps - base.throughput_bps,
            collisions: f.collisions,
            deferrals: f.deferral_slots,
            relay_tx_count: f.relay_tx_count,
            seed,
            relay_collisions: f.relay_collisions,
            relay_deferrals: f.relay_deferrals,
        }
    }
}

/// Runs `config` and, unless it already is the baseline, the no-relay run
/// with the same seed, and returns the configured protocol's rows.
pub fn simulate_rows(config: &SimConfig) -> Result<Vec<SweepRow>, SimError> {
    let separation = match config.topology {
        TopologySpec::FlowSeparation { separation_m, .. } => Some(separation_m),
        TopologySpec::Explicit { .. } => None,
    };
    let report = run_simulation(config)?;
    let base = if config.protocol == Protocol::NoRelay {
        report.flows.clone()
    } else {
        let mut cfg = config.clone();
        cfg.protocol = Protocol::NoRelay;
        run_simulation(&cfg)?.flows
    };
    Ok(report
        .flows
        .iter()
        .zip(&base)
        .map(|(f, b)| SweepRow::new(config.protocol, separation, config.run.seed, f, b))
        .collect())
}

/// Seed-averaged throughput change at one sweep point, with a batch-means
/// standard error for the protocol's own throughput.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointSummary {
    pub mean_thpt_bps: f64,
    pub mean_delta_bps: f64,
    pub stderr_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub separations: Vec<f64>,
    pub protocols: Vec<Protocol>,
    pub seeds: Vec<u64>,
    pub points: Vec<SweepPoint>,
}

/// Seed of replica `k` derived from a master seed (SplitMix64 finalizer).
pub fn replica_seed(master: u64, k: u64) -> u64 {
    let mut z = master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs every (separation, protocol, replica) combination. The no-relay
/// baseline is always included. Runs are independent and execute in
/// parallel; the output order does not depend on scheduling.
pub fn flow_separation_sweep(
    base: &SimConfig,
    separations: &[f64],
    protocols: &[Protocol],
    replicas: usize,
) -> Result<SweepTable, SimError> {
    if separations.len() < 2 {
        return Err(SimError::Config(
            "a sweep needs at least two separations".into(),
        ));
    }
    if replicas == 0 {
        return Err(SimError::Config("a sweep needs at least one seed".into()));
    }
    let mut protos = vec![Protocol::NoRelay];
    protos.extend(
        protocols
            .iter()
            .copied()
            .filter(|p| *p != Protocol::NoRelay),
    );
    protos.dedup();
    let seeds: Vec<u64> = (0..replicas as u64)
        .map(|k| replica_seed(base.run.seed, k))
        .collect();
    let mut jobs = Vec::new();
    for &sep in separations {
        let topology = base.topology.with_separation(sep)?;
        for &protocol in &protos {
            for &seed in &seeds {
                let mut cfg = base.clone();
                cfg.topology = topology.clone();
                cfg.protocol = protocol;
                cfg.run.seed = seed;
                cfg.validate()?;
                jobs.push(cfg);
            }
        }
    }
    let points = jobs
        .par_iter()
        .map(|cfg| {
            let report = run_simulation(cfg)?;
            let separation_m = match cfg.topology {
                TopologySpec::FlowSeparation { separation_m, .. } => separation_m,
                TopologySpec::Explicit { .. } => f64::NAN,
            };
            Ok(SweepPoint {
                protocol: cfg.protocol,
                separation_m,
                seed: cfg.run.seed,
                flows: report.flows,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(SweepTable {
        separations: separations.to_vec(),
        protocols: protos,
        seeds,
        points,
    })
}

impl SweepTable {
    fn point(&self, protocol: Protocol, separation: f64, seed: u64) -> Option<&SweepPoint> {
        self.points
            .iter()
            .find(|p| p.protocol == protocol && p.separation_m == separation && p.seed == seed)
    }

    pub fn rows(&self) -> Vec<SweepRow> {
        let mut rows = Vec::new();
        for p in &self.points {
            let base = self
                .point(Protocol::NoRelay, p.separation_m, p.seed)
                .expect("baseline present");
            for (f, b) in p.flows.iter().zip(&base.flows) {
                rows.push(SweepRow::new(
                    p.protocol,
                    Some(p.separation_m),
                    p.seed,
                    f,
                    b,
                ));
            }
        }
        rows
    }

    /// Mean over seeds; the standard error treats every (seed, batch)
    /// throughput as one observation.
    pub fn summary(
        &self,
        protocol: Protocol,
        separation: f64,
        flow_id: usize,
    ) -> Option<PointSummary> {
        let mut thpt = Vec::new();
        let mut delta = Vec::new();
        let mut batches = Vec::new();
        for &seed in &self.seeds {
            let p = self.point(protocol, separation, seed)?;
            let b = self.point(Protocol::NoRelay, separation, seed)?;
            let f = p.flows.iter().find(|f| f.flow_id == flow_id)?;
            let fb = b.flows.iter().find(|f| f.flow_id == flow_id)?;
            thpt.push(f.throughput_bps);
            delta.push(f.throughput_bps - fb.throughput_bps);
            batches.extend_from_slice(&f.batch_throughput_bps);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let m = mean(&batches);
        let var = if batches.len() > 1 {
            batches.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches.len() - 1) as f64
        } else {
            0.0
        };
        Some(PointSummary {
            mean_thpt_bps: mean(&thpt),
            mean_delta_bps: mean(&delta),
            stderr_bps: (var / batches.len() as f64).sqrt(),
        })
    }
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| SimError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| SimError::Io(e.to_string()))
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_range(spec: &str) -> Result<Vec<f64>, SimError> {
    let bad = || SimError::Config(format!("bad range `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !positive(step) || stop < start || !start.is_finite() || !stop.is_finite() {
                return Err(bad());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|k| start + k as f64 * step).collect())
        }
        [list] => list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(num)
            .collect(),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("50:1000:50").unwrap().len(), 20);
        assert_eq!(
            parse_range("0:1:0.25").unwrap(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert_eq!(parse_range("100,300").unwrap(), vec![100.0, 300.0]);
        assert!(parse_range("1:0:1").is_err());
        assert!(parse_range("a").is_err());
    }

    #[test]
    fn replica_seeds_differ() {
        let s: Vec<u64> = (0..4).map(|k| replica_seed(1, k)).collect();
        for i in 0..4 {
            for j in 0..i {
                assert_ne!(s[i], s[j]);
            }
        }
    }

    #[test]
    fn too_few_separations() {
        let cfg = SimConfig::flow_separation(100.0, Protocol::Cons2);
        assert!(flow_separation_sweep(&cfg, &[100.0], &[Protocol::Cons2], 1).is_err());
    }
}
