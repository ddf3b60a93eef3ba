use coop_relay::sinr_sim::{
    bessel_j0, run_simulation, run_simulation_with, FadingProcess, FlowSpec, FrameKind, NodeSpec,
    Protocol, Role, SimConfig, SimOptions, TopologySpec,
};

fn short(separation: f64, protocol: Protocol, seconds: f64) -> SimConfig {
    let mut cfg = SimConfig::flow_separation(separation, protocol);
    cfg.run.duration_s = seconds;
    cfg.run.batches = 4;
    cfg
}

#[test]
fn identical_seeds_give_identical_reports() {
    let cfg = short(300.0, Protocol::Greed2, 3.0);
    let a = run_simulation(&cfg).unwrap();
    let b = run_simulation(&cfg).unwrap();
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.run.seed = 2;
    assert_ne!(run_simulation(&other).unwrap().flows, a.flows);
}

#[test]
fn zero_hop_conservative_relay_never_forwards() {
    for sep in [50.0, 400.0, 900.0] {
        let none = run_simulation(&short(sep, Protocol::NoRelay, 3.0)).unwrap();
        let cons0 = run_simulation(&short(sep, Protocol::Cons0, 3.0)).unwrap();
        assert_eq!(none.flows, cons0.flows, "separation {sep}");
        assert!(cons0.relay_log.is_empty());
    }
}

#[test]
fn relay_forwards_only_its_own_copy_after_a_nack() {
    let cfg = short(200.0, Protocol::Greed0, 5.0);
    let sifs = cfg.mac.sifs_us * 1000;
    let report = run_simulation(&cfg).unwrap();
    assert!(!report.relay_log.is_empty());
    for r in &report.relay_log {
        assert_eq!(r.relay_copy, Some(r.seq));
        assert_eq!(r.start_ns, r.nack_end_ns + sifs);
        assert!(r.end_ns > r.start_ns);
    }
}

#[test]
fn channel_is_constant_over_every_relay_frame() {
    let options = SimOptions {
        record_transmissions: true,
    };
    for protocol in [Protocol::Greed0, Protocol::Greed2, Protocol::Cons2] {
        let report = run_simulation_with(&short(250.0, protocol, 5.0), &options).unwrap();
        for r in &report.relay_log {
            assert_eq!(r.epoch_start, r.epoch_end, "{protocol}: {r:?}");
        }
        let relays: Vec<_> = report
            .transmissions
            .iter()
            .filter(|t| t.kind == FrameKind::Relay)
            .collect();
        assert_eq!(relays.len(), report.relay_log.len());
        for t in &report.transmissions {
            assert_eq!(t.power_at.len(), 5);
            assert_eq!(t.power_at[t.node], 0.0);
            assert!(t.power_at.iter().all(|p| p.is_finite() && *p >= 0.0));
        }
    }
}

#[test]
fn greedy_relay_helps_its_flow_and_hurts_the_other() {
    let base = run_simulation(&short(500.0, Protocol::NoRelay, 10.0)).unwrap();
    let greedy = run_simulation(&short(500.0, Protocol::Greed0, 10.0)).unwrap();
    let coop = greedy.flows[0].throughput_bps - base.flows[0].throughput_bps;
    let other = greedy.flows[1].throughput_bps - base.flows[1].throughput_bps;
    assert!(coop > 0.0, "coop delta {coop}");
    assert!(other < 0.0, "non-coop delta {other}");
    assert!(greedy.flows[1].relay_collisions + greedy.flows[1].relay_deferrals > 0);
}

#[test]
fn conservative_relay_causes_no_attributable_harm() {
    for sep in [100.0, 300.0, 600.0] {
        let report = run_simulation(&short(sep, Protocol::Cons2, 5.0)).unwrap();
        let other = &report.flows[1];
        assert_eq!(other.relay_collisions, 0, "separation {sep}");
        assert_eq!(other.relay_deferrals, 0, "separation {sep}");
    }
}

#[test]
fn cooperative_protocol_without_a_relay_is_rejected() {
    let node = |id: &str, x: f64, role| NodeSpec {
        id: id.into(),
        position: [x, 0.0],
        role,
    };
    let mut cfg = SimConfig::flow_separation(100.0, Protocol::Cons2);
    cfg.topology = TopologySpec::Explicit {
        nodes: vec![
            node("S", 0.0, Role::Source),
            node("D", 100.0, Role::Destination),
        ],
        flows: vec![FlowSpec {
            source: "S".into(),
            destination: "D".into(),
            relay: None,
        }],
    };
    assert!(cfg.validate().is_err());
    cfg.protocol = Protocol::NoRelay;
    assert!(cfg.validate().is_ok());
}

#[test]
fn config_round_trips_and_rejects_unknown_fields() {
    let cfg = SimConfig::flow_separation(350.0, Protocol::Greed2);
    let back = SimConfig::from_json(&cfg.to_json()).unwrap();
    assert_eq!(back, cfg);
    let minimal =
        r#"{"topology": {"kind": "flow_separation", "separation_m": 120}, "protocol": "cons2"}"#;
    let parsed = SimConfig::from_json(minimal).unwrap();
    assert_eq!(parsed.protocol, Protocol::Cons2);
    assert_eq!(parsed.phy, cfg.phy);
    let typo =
        r#"{"topology": {"kind": "flow_separation", "separation_m": 120}, "protcol": "cons2"}"#;
    assert!(SimConfig::from_json(typo).is_err());
}

/// Samples `|h|²` from many independent processes, spaced far enough apart
/// that successive samples are effectively independent.
fn fading_samples(rho: f64, processes: u64, per_process: usize, spacing: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(processes as usize * per_process);
    for stream in 0..processes {
        let mut h = FadingProcess::new(rho, 77, stream);
        for _ in 0..per_process {
            for _ in 0..spacing {
                h.step();
            }
            out.push(h.power());
        }
    }
    out
}

#[test]
fn fading_power_is_unit_mean_exponential() {
    let rho = FadingProcess::jakes_rho(15.0, 1e-3);
    let mut samples = fading_samples(rho, 1000, 100, 500);
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    assert!((mean - 1.0).abs() < 0.015, "mean {mean}");

    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ks = samples
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let cdf = 1.0 - (-x).exp();
            (cdf - k as f64 / n)
                .abs()
                .max(((k + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks <= 0.01, "KS distance {ks}");
}

#[test]
fn fading_autocorrelation_tracks_clarke() {
    let rho = FadingProcess::jakes_rho(15.0, 1e-3);
    assert!((rho - bessel_j0(2.0 * std::f64::consts::PI * 0.015)).abs() < 1e-15);
    let lags = [0usize, 1, 5, 10, 15, 20, 25];
    let max_lag = *lags.last().unwrap();
    let mut acc = vec![0.0; lags.len()];
    let mut count = 0.0;
    for stream in 0..20_000 {
        let mut h = FadingProcess::new(rho, 5, stream);
        let mut window = Vec::with_capacity(max_lag + 4);
        for _ in 0..max_lag + 4 {
            window.push(h.coefficient());
            h.step();
        }
        for t in 0..window.len() - max_lag {
            let (ar, ai) = window[t];
            for (slot, &lag) in lags.iter().enumerate() {
                let (br, bi) = window[t + lag];
                acc[slot] += ar * br + ai * bi;
            }
            count += 1.0;
        }
    }
    let r: Vec<f64> = acc.iter().map(|a| a / count).collect();
    assert!((r[0] - 1.0).abs() < 0.05, "lag 0: {}", r[0]);
    assert!(
        (r[1] / r[0] - rho).abs() < 0.01,
        "lag 1: {} vs {rho}",
        r[1] / r[0]
    );
    for w in r.windows(2) {
        assert!(w[1] < w[0], "autocorrelation not decreasing: {r:?}");
    }
}
