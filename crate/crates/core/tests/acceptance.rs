//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so that the multi-minute
//! simulation sweep is computed once and shared by two criteria.

use std::process::ExitCode;
use std::time::Instant;

use coop_relay::binary_model::{appendix_table, classify, enumerate_states, Event};
use coop_relay::perf_eval::{
    check_reference_table, monte_carlo_events, policy_event_probabilities, rational_to_f64,
    BernoulliAssignment,
};
use coop_relay::policy_synth::{check_reference_expressions, NamedPolicy};
use coop_relay::sinr_sim::{
    flow_separation_sweep, parse_range, run_simulation_with, FadingProcess, Protocol, SimConfig,
    SimOptions, SweepTable,
};
use num_rational::BigRational;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn state_labels() -> Outcome {
    let table = appendix_table();
    let matching = enumerate_states()
        .filter(|&s| classify(s) == table[s.index() as usize])
        .count();
    let harmful = enumerate_states()
        .filter(|&s| classify(s).is_harmful())
        .count();
    outcome(
        matching == 256 && harmful == 48,
        format!("{matching}/256 labels match, {harmful} states in B∪C"),
    )
}

fn closed_forms() -> Outcome {
    let checks = check_reference_expressions();
    let bad: Vec<String> = checks
        .iter()
        .filter(|c| !c.equivalent)
        .map(|c| c.policy.to_string())
        .collect();
    outcome(
        bad.is_empty(),
        format!(
            "{}/{} policies equivalent on their care sets {bad:?}",
            checks.len() - bad.len(),
            checks.len()
        ),
    )
}

/// The cells whose reference values contradict their own boundary and
/// monotonicity constraints; see the README.
const KNOWN_TABLE_MISMATCHES: [(NamedPolicy, Event); 3] = [
    (NamedPolicy::Cons(2), Event::Assist),
    (NamedPolicy::Greed(2), Event::Assist),
    (NamedPolicy::Greed(2), Event::Backoff),
];

fn table_cells() -> (Outcome, bool) {
    let checks = check_reference_table();
    let bad: Vec<_> = checks.iter().filter(|c| !c.matches()).collect();
    let mut detail = format!("{}/{} cells match", checks.len() - bad.len(), checks.len());
    for c in &bad {
        detail.push_str(&format!(
            "\n      {} {}: computed {} reference {}",
            c.policy,
            c.event.letter(),
            c.computed,
            c.reference
        ));
    }
    let known =
        bad.iter().map(|c| (c.policy, c.event)).collect::<Vec<_>>() == KNOWN_TABLE_MISMATCHES;
    (outcome(bad.is_empty(), detail), known)
}

fn monte_carlo() -> Outcome {
    let scenario = BernoulliAssignment::flow_separation_scenario();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let mut checked = 0;
    for p in [rat(1, 10), rat(1, 2), rat(9, 10)] {
        let params = scenario.substitute(&p);
        for named in NamedPolicy::ALL {
            let policy = named.policy();
            let exact = policy_event_probabilities(&policy, &scenario).unwrap();
            let mc = monte_carlo_events(&policy, &params, 1_000_000, 2024).unwrap();
            for k in 0..3 {
                let truth = rational_to_f64(&exact[k].eval(&p));
                let diff = (mc[k].estimate - truth).abs();
                checked += 1;
                if mc[k].std_error > 0.0 {
                    worst = worst.max(diff / mc[k].std_error);
                }
                if diff > 4.0 * mc[k].std_error {
                    failures.push(format!("{named} {} p={p}", Event::ALL[k].letter()));
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("{checked} estimates, worst |z| = {worst:.2} {failures:?}"),
    )
}

fn half_point_values() -> Outcome {
    let params = BernoulliAssignment::flow_separation_scenario();
    let at_half = |named: NamedPolicy| -> [BigRational; 3] {
        policy_event_probabilities(&named.policy(), &params)
            .unwrap()
            .map(|poly| poly.eval(&rat(1, 2)))
    };
    let mut bad = Vec::new();
    if at_half(NamedPolicy::Greed(0)) != [rat(3, 8), rat(1, 8), rat(1, 16)] {
        bad.push("Greed(0)");
    }
    if at_half(NamedPolicy::Greed(1)) != [rat(3, 8), rat(1, 16), rat(1, 32)] {
        bad.push("Greed(1)");
    }
    if at_half(NamedPolicy::Cons(1))[0] != rat(3, 32) {
        bad.push("Cons(1)");
    }
    for named in [
        NamedPolicy::Fnsi,
        NamedPolicy::Cons(2),
        NamedPolicy::Cons(1),
        NamedPolicy::Cons(0),
    ] {
        let v = at_half(named);
        if v[1] != rat(0, 1) || v[2] != rat(0, 1) {
            bad.push("conservative harm");
        }
    }
    outcome(
        bad.is_empty(),
        format!("Greed(0), Greed(1), Cons(1) and conservative harm at p = 1/2 {bad:?}"),
    )
}

const SWEEP_PROTOCOLS: [Protocol; 4] = [
    Protocol::Cons0,
    Protocol::Cons2,
    Protocol::Greed2,
    Protocol::Greed0,
];

fn run_sweep() -> SweepTable {
    let base = SimConfig::flow_separation(50.0, Protocol::NoRelay);
    assert!(base.run.duration_s >= 60.0);
    flow_separation_sweep(
        &base,
        &parse_range("50:1000:50").unwrap(),
        &SWEEP_PROTOCOLS,
        3,
    )
    .expect("sweep runs")
}

fn zero_harm(table: &SweepTable) -> Outcome {
    let mut harm = 0u64;
    let mut cons0_mismatch = 0;
    for p in &table.points {
        match p.protocol {
            Protocol::Cons2 => harm += p.flows[1].relay_collisions + p.flows[1].relay_deferrals,
            Protocol::Cons0 => {
                let base = table
                    .points
                    .iter()
                    .find(|b| {
                        b.protocol == Protocol::NoRelay
                            && b.separation_m == p.separation_m
                            && b.seed == p.seed
                    })
                    .unwrap();
                if base.flows != p.flows {
                    cons0_mismatch += 1;
                }
            }
            _ => {}
        }
    }
    let runs = table.separations.len() * table.seeds.len();
    outcome(
        harm == 0 && cons0_mismatch == 0,
        format!(
            "Cons(2) relay-attributed collisions+deferrals on flow 2 = {harm}; Cons(0) differs from no-relay in {cons0_mismatch}/{runs} runs"
        ),
    )
}

/// `x ≥ y` up to three combined standard errors.
fn at_least(x: (f64, f64), y: (f64, f64)) -> bool {
    x.0 - y.0 >= -3.0 * (x.1 * x.1 + y.1 * y.1).sqrt()
}

fn trend_ordering(table: &SweepTable) -> Outcome {
    let n = table.separations.len();
    // (label, holds at each point)
    let mut links: Vec<(&str, Vec<bool>)> = [
        "gain G0>=G2",
        "gain G2>=C2",
        "gain C2>=C0",
        "gain C0=0",
        "harm G0>=G2",
        "harm G2>=C2",
        "harm C2~0",
    ]
    .into_iter()
    .map(|l| (l, Vec::new()))
    .collect();
    println!("      sep_m   gain C0/C2/G2/G0 (kbps)          harm C0/C2/G2/G0 (kbps)        se");
    for &sep in &table.separations {
        let s = |proto, flow| table.summary(proto, sep, flow).unwrap();
        let base2 = s(Protocol::NoRelay, 2).stderr_bps;
        let gain = |proto| {
            let v = s(proto, 1);
            (v.mean_delta_bps, v.stderr_bps)
        };
        let harm = |proto| {
            let v = s(proto, 2);
            (v.mean_delta_bps.abs(), v.stderr_bps)
        };
        let (c0, c2, g2, g0) = (
            gain(Protocol::Cons0),
            gain(Protocol::Cons2),
            gain(Protocol::Greed2),
            gain(Protocol::Greed0),
        );
        let (hc2, hg2, hg0) = (
            harm(Protocol::Cons2),
            harm(Protocol::Greed2),
            harm(Protocol::Greed0),
        );
        let held = [
            at_least(g0, g2),
            at_least(g2, c2),
            at_least(c2, c0),
            c0.0 == 0.0,
            at_least(hg0, hg2),
            at_least(hg2, hc2),
            hc2.0 <= 3.0 * (hc2.1 * hc2.1 + base2 * base2).sqrt(),
        ];
        for (link, ok) in links.iter_mut().zip(held) {
            link.1.push(ok);
        }
        let k = |v: (f64, f64)| v.0 / 1e3;
        println!(
            "      {sep:>5}  {:>7.0} {:>7.0} {:>7.0} {:>7.0}    {:>7.0} {:>7.0} {:>7.0} {:>7.0}   {:>5.0}",
            k(c0),
            k(c2),
            k(g2),
            k(g0),
            -s(Protocol::Cons0, 2).mean_delta_bps / 1e3,
            -s(Protocol::Cons2, 2).mean_delta_bps / 1e3,
            -s(Protocol::Greed2, 2).mean_delta_bps / 1e3,
            -s(Protocol::Greed0, 2).mean_delta_bps / 1e3,
            g0.1 / 1e3,
        );
    }
    let needed = (0.95 * n as f64).ceil() as usize;
    let mut pass = true;
    let mut detail = Vec::new();
    for (label, held) in &links {
        let count = held.iter().filter(|&&h| h).count();
        pass &= count >= needed;
        detail.push(format!("{label} {count}/{n}"));
    }
    outcome(
        pass,
        format!("need >= {needed}/{n} per link: {}", detail.join(", ")),
    )
}

fn channel_statistics() -> Outcome {
    let rho = FadingProcess::jakes_rho(15.0, 1e-3);
    let mut samples = Vec::with_capacity(100_000);
    for stream in 0..1000 {
        let mut h = FadingProcess::new(rho, 31, stream);
        for _ in 0..100 {
            for _ in 0..500 {
                h.step();
            }
            samples.push(h.power());
        }
    }
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
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

    let mut cfg = SimConfig::flow_separation(250.0, Protocol::Greed0);
    cfg.run.duration_s = 10.0;
    let report = run_simulation_with(
        &cfg,
        &SimOptions {
            record_transmissions: true,
        },
    )
    .unwrap();
    let relays = report.relay_log.len();
    let constant = report
        .relay_log
        .iter()
        .filter(|r| r.epoch_start == r.epoch_end)
        .count();
    outcome(
        ks <= 0.01 && relays > 0 && constant == relays,
        format!("KS = {ks:.4} over {} samples; {constant}/{relays} relay frames within one channel epoch", samples.len()),
    )
}

fn report(number: usize, name: &str, started: Instant, o: &Outcome) {
    println!(
        "criterion {number} {name}: {} ({:.1} s) {}",
        if o.pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64(),
        o.detail
    );
}

fn main() -> ExitCode {
    let mut unexpected = 0;
    let mut passed = 0;
    let mut check = |number: usize, name: &str, f: &mut dyn FnMut() -> Outcome| -> Outcome {
        let t = Instant::now();
        let o = f();
        report(number, name, t, &o);
        if o.pass {
            passed += 1;
        }
        o
    };

    if !check(1, "state labels", &mut state_labels).pass {
        unexpected += 1;
    }
    if !check(2, "policy closed forms", &mut closed_forms).pass {
        unexpected += 1;
    }
    let mut known_red = false;
    let table = check(3, "event table exactness", &mut || {
        let (o, known) = table_cells();
        known_red = known;
        o
    });
    if !table.pass && !known_red {
        unexpected += 1;
    }
    if !check(4, "Monte-Carlo consistency", &mut monte_carlo).pass {
        unexpected += 1;
    }
    if !check(5, "point values at p = 1/2", &mut half_point_values).pass {
        unexpected += 1;
    }
    let t = Instant::now();
    let sweep = run_sweep();
    println!(
        "      sweep: {} runs in {:.1} s",
        sweep.points.len(),
        t.elapsed().as_secs_f64()
    );
    if !check(6, "simulation zero harm", &mut || zero_harm(&sweep)).pass {
        unexpected += 1;
    }
    if !check(7, "simulation trend ordering", &mut || {
        trend_ordering(&sweep)
    })
    .pass
    {
        unexpected += 1;
    }
    if !check(8, "channel statistics", &mut channel_statistics).pass {
        unexpected += 1;
    }

    println!("acceptance: {passed}/8 criteria PASS");
    if !table.pass && known_red {
        println!(
            "acceptance: criterion 3 stays red on exactly the three documented reference cells \
             (README, \"Known discrepancy\"); the build treats only that failure as expected"
        );
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {unexpected} unexpected failure(s)");
        ExitCode::FAILURE
    }
}
