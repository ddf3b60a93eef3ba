//! Probability that a policy transmits while the network is in an assist,
//! backoff or collision state.
//!
//! Every state element is an independent Bernoulli variable. Parameters are
//! either exact rationals or the single symbol `p`, so the probabilities come
//! out as exact univariate polynomials in `p`.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::binary_model::{
    classify, enumerate_states, Event, NetworkState, StateElement, ELEMENT_COUNT,
};
use crate::policy_synth::{NamedPolicy, RelayPolicy, Viewpoint};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PerfError {
    #[error("probability for {element} is {value}, outside [0, 1]")]
    ParameterOutOfRange {
        element: StateElement,
        value: String,
    },
    #[error("parameter for {0} is symbolic; a numeric value is required")]
    Symbolic(StateElement),
    #[error("Monte-Carlo run needs at least one sample")]
    ZeroSamples,
    #[error("cannot parse rational `{0}`")]
    Parse(String),
}

/// Parses `3/8`, `-2`, `0.25` or `1e-2` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational, PerfError> {
    let s = s.trim();
    let err = || PerfError::Parse(s.to_string());
    if s.contains('/') {
        return BigRational::from_str(s).map_err(|_| err());
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| err())?),
        None => (s, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    let digits = format!("{int_part}{frac_part}");
    let digits = if digits == "-" || digits == "+" || digits.is_empty() {
        return Err(err());
    } else {
        digits
    };
    let numer: BigInt = digits.parse().map_err(|_| err())?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    Ok(if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    })
}

/// Formats a rational as `n/d` (or `n` when integral).
pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact polynomial in `p` with rational coefficients, ascending powers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PerfPolynomial {
    coeffs: Vec<BigRational>,
}

impl PerfPolynomial {
    pub fn zero() -> Self {
        PerfPolynomial { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        Self::from_coeffs(vec![c])
    }

    /// The polynomial `p`.
    pub fn p() -> Self {
        Self::from_coeffs(vec![BigRational::zero(), BigRational::one()])
    }

    pub fn from_coeffs(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        PerfPolynomial { coeffs }
    }

    /// `(Σ numer[i] p^i) / denom`.
    pub fn from_ints(numer: &[i64], denom: i64) -> Self {
        let d = BigInt::from(denom);
        Self::from_coeffs(
            numer
                .iter()
                .map(|&n| BigRational::new(BigInt::from(n), d.clone()))
                .collect(),
        )
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, p: &BigRational) -> BigRational {
        self.coeffs
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * p + c)
    }

    pub fn eval_f64(&self, p: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * p + rational_to_f64(c))
    }

    fn scale(&self, k: &BigRational) -> Self {
        Self::from_coeffs(self.coeffs.iter().map(|c| c * k).collect())
    }
}

impl Add for &PerfPolynomial {
    type Output = PerfPolynomial;

    fn add(self, rhs: &PerfPolynomial) -> PerfPolynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let zero = BigRational::zero();
        PerfPolynomial::from_coeffs(
            (0..n)
                .map(|i| self.coeffs.get(i).unwrap_or(&zero) + rhs.coeffs.get(i).unwrap_or(&zero))
                .collect(),
        )
    }
}

impl Sub for &PerfPolynomial {
    type Output = PerfPolynomial;

    fn sub(self, rhs: &PerfPolynomial) -> PerfPolynomial {
        self + &rhs.scale(&-BigRational::one())
    }
}

impl Mul for &PerfPolynomial {
    type Output = PerfPolynomial;

    fn mul(self, rhs: &PerfPolynomial) -> PerfPolynomial {
        if self.is_zero() || rhs.is_zero() {
            return PerfPolynomial::zero();
        }
        let mut out = vec![BigRational::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        PerfPolynomial::from_coeffs(out)
    }
}

impl fmt::Display for PerfPolynomial {
    /// Clears denominators: `(5p^2-5p+6)/16`, `3/8`, `0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let lcm = self.coeffs.iter().fold(BigInt::one(), |l, c| {
            num_integer::Integer::lcm(&l, c.denom())
        });
        let mut body = String::new();
        let mut terms = 0;
        for (power, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let n = (c * BigRational::from_integer(lcm.clone())).to_integer();
            let negative = n.is_negative();
            let mag = n.abs();
            if negative {
                body.push('-');
            } else if terms > 0 {
                body.push('+');
            }
            let unit = mag.is_one();
            match power {
                0 => body.push_str(&mag.to_string()),
                _ => {
                    if !unit {
                        body.push_str(&mag.to_string());
                    }
                    body.push('p');
                    if power > 1 {
                        body.push_str(&format!("^{power}"));
                    }
                }
            }
            terms += 1;
        }
        if lcm.is_one() {
            f.write_str(&body)
        } else if terms > 1 {
            write!(f, "({body})/{lcm}")
        } else {
            write!(f, "{body}/{lcm}")
        }
    }
}

/// Success probability of one state element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BernoulliParam {
    Value(BigRational),
    /// The free flow-separation variable `p`.
    Symbol,
}

impl BernoulliParam {
    fn as_poly(&self) -> PerfPolynomial {
        match self {
            BernoulliParam::Value(v) => PerfPolynomial::constant(v.clone()),
            BernoulliParam::Symbol => PerfPolynomial::p(),
        }
    }
}

/// One Bernoulli parameter per state element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BernoulliAssignment {
    params: [BernoulliParam; ELEMENT_COUNT],
}

impl BernoulliAssignment {
    pub fn uniform(value: BigRational) -> Self {
        BernoulliAssignment {
            params: std::array::from_fn(|_| BernoulliParam::Value(value.clone())),
        }
    }

    /// `p` on the four cross-flow links (`H_S1S2`, `H_S1D2`, `H_R1S2`, `H_R1D2`),
    /// one half everywhere else.
    pub fn flow_separation_scenario() -> Self {
        use StateElement::*;
        let half = BigRational::new(1.into(), 2.into());
        let mut a = Self::uniform(half);
        for e in [HS1S2, HS1D2, HR1S2, HR1D2] {
            a.params[e.bit() as usize] = BernoulliParam::Symbol;
        }
        a
    }

    pub fn with(mut self, element: StateElement, param: BernoulliParam) -> Self {
        self.params[element.bit() as usize] = param;
        self
    }

    pub fn get(&self, element: StateElement) -> &BernoulliParam {
        &self.params[element.bit() as usize]
    }

    /// Replaces the symbol with a concrete value.
    pub fn substitute(&self, p: &BigRational) -> Self {
        BernoulliAssignment {
            params: self.params.clone().map(|param| match param {
                BernoulliParam::Symbol => BernoulliParam::Value(p.clone()),
                v => v,
            }),
        }
    }

    pub fn validate(&self) -> Result<(), PerfError> {
        let zero = BigRational::zero();
        let one = BigRational::one();
        for e in StateElement::ALL {
            if let BernoulliParam::Value(v) = self.get(e) {
                if *v < zero || *v > one {
                    return Err(PerfError::ParameterOutOfRange {
                        element: e,
                        value: format_rational(v),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_f64(&self) -> Result<[f64; ELEMENT_COUNT], PerfError> {
        self.validate()?;
        let mut out = [0.0; ELEMENT_COUNT];
        for e in StateElement::ALL {
            out[e.bit() as usize] = match self.get(e) {
                BernoulliParam::Value(v) => rational_to_f64(v),
                BernoulliParam::Symbol => return Err(PerfError::Symbolic(e)),
            };
        }
        Ok(out)
    }
}

/// Product over the elements of `param` (bit set) or `1 - param` (bit clear).
pub fn state_probability(
    state: NetworkState,
    params: &BernoulliAssignment,
) -> Result<PerfPolynomial, PerfError> {
    params.validate()?;
    Ok(state_probability_unchecked(state, params))
}

fn state_probability_unchecked(
    state: NetworkState,
    params: &BernoulliAssignment,
) -> PerfPolynomial {
    let one = PerfPolynomial::one();
    StateElement::ALL
        .iter()
        .fold(PerfPolynomial::one(), |acc, &e| {
            let q = params.get(e).as_poly();
            let factor = if state.get(e) { q } else { &one - &q };
            &acc * &factor
        })
}

/// `Pr{relay transmits ∧ state ∈ event}`. Don't-care bins count as silent.
pub fn policy_event_probability(
    policy: &RelayPolicy,
    event: Event,
    params: &BernoulliAssignment,
) -> Result<PerfPolynomial, PerfError> {
    params.validate()?;
    Ok(enumerate_states()
        .filter(|&s| policy.transmits(s) && classify(s).contains(event))
        .fold(PerfPolynomial::zero(), |acc, s| {
            &acc + &state_probability_unchecked(s, params)
        }))
}

/// The A, B and C probabilities of a policy in one pass.
pub fn policy_event_probabilities(
    policy: &RelayPolicy,
    params: &BernoulliAssignment,
) -> Result<[PerfPolynomial; 3], PerfError> {
    params.validate()?;
    let mut out = [
        PerfPolynomial::zero(),
        PerfPolynomial::zero(),
        PerfPolynomial::zero(),
    ];
    for s in enumerate_states().filter(|&s| policy.transmits(s)) {
        let label = classify(s);
        if label.is_d() {
            continue;
        }
        let prob = state_probability_unchecked(s, params);
        for (slot, event) in out.iter_mut().zip(Event::ALL) {
            if label.contains(event) {
                *slot = &*slot + &prob;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub hits: u64,
    pub samples: u64,
}

impl McEstimate {
    fn from_counts(hits: u64, samples: u64) -> Self {
        let n = samples as f64;
        let phat = hits as f64 / n;
        McEstimate {
            estimate: phat,
            std_error: (phat * (1.0 - phat) / n).sqrt(),
            hits,
            samples,
        }
    }
}

const MC_SHARD: u64 = 1 << 16;

/// Draws i.i.d. states and counts (transmit ∧ event) for all three events.
///
/// Shard `k` uses ChaCha8 stream `k` of `seed`, so the result depends only on
/// `(seed, samples)` and not on the thread count.
pub fn monte_carlo_events(
    policy: &RelayPolicy,
    params: &BernoulliAssignment,
    samples: u64,
    seed: u64,
) -> Result<[McEstimate; 3], PerfError> {
    if samples == 0 {
        return Err(PerfError::ZeroSamples);
    }
    let probs = params.to_f64()?;
    let mut hit_table = [[false; 3]; 256];
    for s in enumerate_states() {
        let label = classify(s);
        let tx = policy.transmits(s);
        for (k, event) in Event::ALL.into_iter().enumerate() {
            hit_table[s.index() as usize][k] = tx && label.contains(event);
        }
    }
    let shards = samples.div_ceil(MC_SHARD);
    let counts: Vec<[u64; 3]> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let n = MC_SHARD.min(samples - shard * MC_SHARD);
            let mut c = [0u64; 3];
            for _ in 0..n {
                let mut index = 0usize;
                for (bit, &q) in probs.iter().enumerate() {
                    if rng.random::<f64>() < q {
                        index |= 1 << bit;
                    }
                }
                for k in 0..3 {
                    c[k] += hit_table[index][k] as u64;
                }
            }
            c
        })
        .collect();
    let total = counts.iter().fold([0u64; 3], |acc, c| {
        [acc[0] + c[0], acc[1] + c[1], acc[2] + c[2]]
    });
    Ok(total.map(|h| McEstimate::from_counts(h, samples)))
}

/// Monte-Carlo estimate of a single event probability.
pub fn monte_carlo_check(
    policy: &RelayPolicy,
    event: Event,
    params: &BernoulliAssignment,
    samples: u64,
    seed: u64,
) -> Result<McEstimate, PerfError> {
    let all = monte_carlo_events(policy, params, samples, seed)?;
    Ok(all[Event::ALL.iter().position(|&e| e == event).unwrap()])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopRow {
    pub policy: NamedPolicy,
    /// `0`, `1`, `2` or `full`.
    pub level: String,
    pub assist: BigRational,
    pub backoff: BigRational,
    pub collision: BigRational,
}

/// Exact A/B/C probabilities of the 0/1/2-hop policies of `view` plus the
/// full-knowledge policy, under the flow-separation scenario at `p`.
pub fn hop_sweep_report(view: Viewpoint, p: &BigRational) -> Result<Vec<HopRow>, PerfError> {
    let params = BernoulliAssignment::flow_separation_scenario().substitute(p);
    params.validate()?;
    let named: Vec<NamedPolicy> = (0..=2u8)
        .map(|h| match view {
            Viewpoint::Conservative => NamedPolicy::Cons(h),
            Viewpoint::Greedy => NamedPolicy::Greed(h),
        })
        .chain([NamedPolicy::Fnsi])
        .collect();
    named
        .into_iter()
        .map(|policy| {
            let [a, b, c] = policy_event_probabilities(&policy.policy(), &params)?;
            let at = |poly: PerfPolynomial| poly.eval(&BigRational::zero());
            let level = match policy {
                NamedPolicy::Fnsi => "full".to_string(),
                NamedPolicy::Cons(h) | NamedPolicy::Greed(h) => h.to_string(),
            };
            Ok(HopRow {
                policy,
                level,
                assist: at(a),
                backoff: at(b),
                collision: at(c),
            })
        })
        .collect()
}

/// Transcribed closed-form (A, B, C) values for the named policies under the
/// flow-separation scenario, in [`NamedPolicy::ALL`] order. Used only as
/// reference data by [`check_reference_table`].
pub fn reference_table() -> Vec<(NamedPolicy, [PerfPolynomial; 3])> {
    let c = PerfPolynomial::from_ints;
    let z = PerfPolynomial::zero;
    vec![
        (NamedPolicy::Fnsi, [c(&[6, -5, 5], 16), z(), z()]),
        (NamedPolicy::Cons(2), [c(&[2, -7, 10, -6, 3], 16), z(), z()]),
        (NamedPolicy::Cons(1), [c(&[3, -6, 3], 8), z(), z()]),
        (NamedPolicy::Cons(0), [z(), z(), z()]),
        (
            NamedPolicy::Greed(2),
            [
                c(&[3, -1, 0, 2, -1], 8),
                c(&[0, 2, -3, 2, -1], 16),
                c(&[0, 1, -2, 2, -1], 8),
            ],
        ),
        (
            NamedPolicy::Greed(1),
            [c(&[3], 8), c(&[0, 1, -1], 4), c(&[0, 1, -1], 8)],
        ),
        (
            NamedPolicy::Greed(0),
            [c(&[3], 8), c(&[0, 1, -1], 2), c(&[0, 1, -1], 4)],
        ),
    ]
}

/// One reference cell next to the value computed by enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellCheck {
    pub policy: NamedPolicy,
    pub event: Event,
    pub computed: PerfPolynomial,
    pub reference: PerfPolynomial,
}

impl CellCheck {
    pub fn matches(&self) -> bool {
        self.computed == self.reference
    }
}

/// Compares every cell of [`reference_table`] with exact enumeration.
pub fn check_reference_table() -> Vec<CellCheck> {
    let params = BernoulliAssignment::flow_separation_scenario();
    reference_table()
        .into_iter()
        .flat_map(|(policy, reference)| {
            let computed = policy_event_probabilities(&policy.policy(), &params)
                .expect("scenario parameters are valid");
            Event::ALL
                .into_iter()
                .zip(computed.into_iter().zip(reference))
                .map(move |(event, (computed, reference))| CellCheck {
                    policy,
                    event,
                    computed,
                    reference,
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(q("3/8"), BigRational::new(3.into(), 8.into()));
        assert_eq!(q("0.25"), BigRational::new(1.into(), 4.into()));
        assert_eq!(q("1e-2"), BigRational::new(1.into(), 100.into()));
        assert_eq!(q("2"), BigRational::from_integer(2.into()));
        assert_eq!(q(".5"), BigRational::new(1.into(), 2.into()));
        assert!(parse_rational("x").is_err());
        assert!(parse_rational("1/0").is_err());
        assert_eq!(format_rational(&q("6/16")), "3/8");
    }

    #[test]
    fn polynomial_display() {
        assert_eq!(
            PerfPolynomial::from_ints(&[6, -5, 5], 16).to_string(),
            "(5p^2-5p+6)/16"
        );
        assert_eq!(PerfPolynomial::from_ints(&[3], 8).to_string(), "3/8");
        assert_eq!(
            PerfPolynomial::from_ints(&[0, 1, -1], 4).to_string(),
            "(-p^2+p)/4"
        );
        assert_eq!(PerfPolynomial::zero().to_string(), "0");
        assert_eq!(PerfPolynomial::p().to_string(), "p");
    }

    #[test]
    fn state_probabilities() {
        let params = BernoulliAssignment::flow_separation_scenario();
        let one_minus_p = &PerfPolynomial::one() - &PerfPolynomial::p();
        let sq = &one_minus_p * &one_minus_p;
        let expected = &(&sq * &sq) * &PerfPolynomial::from_ints(&[1], 16);
        assert_eq!(
            state_probability(NetworkState::from_index(0), &params).unwrap(),
            expected
        );
        assert_eq!(
            state_probability(NetworkState::from_index(2), &params).unwrap(),
            expected
        );

        let total = enumerate_states().fold(PerfPolynomial::zero(), |acc, s| {
            &acc + &state_probability(s, &params).unwrap()
        });
        assert_eq!(total, PerfPolynomial::one());
    }

    #[test]
    fn out_of_range_parameter() {
        let params = BernoulliAssignment::uniform(q("3/2"));
        assert!(matches!(
            state_probability(NetworkState::from_index(0), &params),
            Err(PerfError::ParameterOutOfRange { .. })
        ));
    }

    #[test]
    fn monte_carlo_errors_and_determinism() {
        let policy = NamedPolicy::Greed(0).policy();
        let params = BernoulliAssignment::flow_separation_scenario();
        assert_eq!(
            monte_carlo_check(&policy, Event::Assist, &params, 10, 1),
            Err(PerfError::Symbolic(StateElement::HR1D2))
        );
        let numeric = params.substitute(&q("1/2"));
        assert_eq!(
            monte_carlo_check(&policy, Event::Assist, &numeric, 0, 1),
            Err(PerfError::ZeroSamples)
        );
        let a = monte_carlo_events(&policy, &numeric, 200_000, 7).unwrap();
        let b = monte_carlo_events(&policy, &numeric, 200_000, 7).unwrap();
        assert_eq!(a, b);
        let zero = monte_carlo_events(&NamedPolicy::Cons(0).policy(), &numeric, 50_000, 7).unwrap();
        assert!(zero.iter().all(|e| e.hits == 0 && e.estimate == 0.0));
    }

    #[test]
    fn hop_report_points() {
        let greedy = hop_sweep_report(Viewpoint::Greedy, &q("1/2")).unwrap();
        assert_eq!(greedy[0].assist, q("3/8"));
        assert_eq!(greedy[1].backoff, q("1/16"));
        let cons = hop_sweep_report(Viewpoint::Conservative, &q("1/2")).unwrap();
        assert_eq!(cons[0].assist, BigRational::zero());
        assert_eq!(cons[0].backoff, BigRational::zero());
        assert_eq!(cons[0].collision, BigRational::zero());
        assert_eq!(cons[3].level, "full");
    }
}
