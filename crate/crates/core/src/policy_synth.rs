//! Relay policy synthesis over arbitrary knowledge subsets.
//!
//! A relay that only observes some of the eight state elements cannot tell apart
//! the states that agree on what it does observe. Those states form a conflict
//! set and the policy assigns a single decision to the whole set, resolved either
//! conservatively (worst case over the unknown elements) or greedily.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binary_model::{classify, ModelError, NetworkState, StateElement, ELEMENT_COUNT};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthError {
    #[error("bin assigns no value to known element {0}")]
    IncompleteAssignment(StateElement),
    #[error("bin assigns element {0}, which is not in the knowledge subset")]
    UnknownInBin(StateElement),
    #[error("element {0} assigned twice")]
    DuplicateAssignment(StateElement),
    #[error("expression uses elements outside the comparison domain")]
    DomainMismatch,
    #[error("bin index {index} out of range for {bins} bins")]
    BinOutOfRange { index: usize, bins: usize },
    #[error("cannot parse `{0}`")]
    Parse(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The set of state elements visible to the relay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct KnowledgeSubset {
    mask: u8,
}

impl KnowledgeSubset {
    pub const fn empty() -> Self {
        KnowledgeSubset { mask: 0 }
    }

    pub const fn full() -> Self {
        KnowledgeSubset { mask: u8::MAX }
    }

    pub const fn from_mask(mask: u8) -> Self {
        KnowledgeSubset { mask }
    }

    pub fn from_elements<I: IntoIterator<Item = StateElement>>(elements: I) -> Self {
        let mask = elements.into_iter().fold(0u8, |m, e| m | e.mask());
        KnowledgeSubset { mask }
    }

    /// Channel elements no further than `hops` hops from the relay. The node
    /// state `X_S2` is never part of a hop set.
    pub fn hops(hops: u8) -> Self {
        Self::from_elements(
            StateElement::ALL
                .into_iter()
                .filter(|e| e.hop_distance().is_some_and(|d| d <= hops)),
        )
    }

    pub const fn mask(self) -> u8 {
        self.mask
    }

    pub const fn contains(self, element: StateElement) -> bool {
        self.mask & element.mask() != 0
    }

    pub const fn is_subset_of(self, other: KnowledgeSubset) -> bool {
        self.mask & !other.mask == 0
    }

    pub fn len(self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.mask == 0
    }

    /// Known elements in bit order; bin indices use this order.
    pub fn elements(self) -> Vec<StateElement> {
        StateElement::ALL
            .into_iter()
            .filter(|e| self.contains(*e))
            .collect()
    }

    pub fn bin_count(self) -> usize {
        1 << self.len()
    }

    /// All bin indices, for use as a care set.
    pub fn all_bins(self) -> Vec<usize> {
        (0..self.bin_count()).collect()
    }

    /// Spreads a compact bin index onto the known bit positions.
    pub fn expand(self, bin: usize) -> u8 {
        self.elements().iter().enumerate().fold(0u8, |acc, (i, e)| {
            if bin >> i & 1 == 1 {
                acc | e.mask()
            } else {
                acc
            }
        })
    }

    /// The bin a full state falls into.
    pub fn project(self, state: NetworkState) -> usize {
        self.elements()
            .iter()
            .enumerate()
            .fold(
                0usize,
                |acc, (i, e)| if state.get(*e) { acc | 1 << i } else { acc },
            )
    }

    /// Compact bin index of a complete assignment of the known elements.
    pub fn bin_of(self, assignment: &[(StateElement, bool)]) -> Result<usize, SynthError> {
        let mut seen = 0u8;
        let mut bits = 0u8;
        for &(e, v) in assignment {
            if !self.contains(e) {
                return Err(SynthError::UnknownInBin(e));
            }
            if seen & e.mask() != 0 {
                return Err(SynthError::DuplicateAssignment(e));
            }
            seen |= e.mask();
            if v {
                bits |= e.mask();
            }
        }
        if let Some(missing) = self.elements().into_iter().find(|e| seen & e.mask() == 0) {
            return Err(SynthError::IncompleteAssignment(missing));
        }
        Ok(self.project(NetworkState::from_index(bits)))
    }

    /// Full states consistent with bin `bin`.
    pub fn states_in_bin(self, bin: usize) -> Vec<NetworkState> {
        let fixed = self.expand(bin);
        let free = !self.mask;
        // Enumerate submasks of the free bits.
        let mut out = Vec::with_capacity(1 << free.count_ones());
        let mut sub = free;
        loop {
            out.push(NetworkState::from_index(fixed | sub));
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & free;
        }
        out.sort();
        out
    }
}

impl fmt::Display for KnowledgeSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Self::full() {
            return f.write_str("full");
        }
        for h in 0..=2 {
            if *self == Self::hops(h) {
                return write!(f, "hops:{h}");
            }
        }
        let names: Vec<_> = self.elements().iter().map(|e| e.name()).collect();
        write!(f, "custom:{}", names.join(","))
    }
}

impl FromStr for KnowledgeSubset {
    type Err = SynthError;

    /// `full`, `hops:0`, `hops:1`, `hops:2` or `custom:H_R1D1,X_S2,...`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("full") {
            return Ok(Self::full());
        }
        if let Some(h) = s.strip_prefix("hops:") {
            return match h.trim() {
                "0" => Ok(Self::hops(0)),
                "1" => Ok(Self::hops(1)),
                "2" => Ok(Self::hops(2)),
                _ => Err(SynthError::Parse(s.to_string())),
            };
        }
        if let Some(list) = s.strip_prefix("custom:") {
            let mut mask = 0u8;
            for name in list.split(',').map(str::trim).filter(|n| !n.is_empty()) {
                mask |= name.parse::<StateElement>()?.mask();
            }
            return Ok(Self::from_mask(mask));
        }
        Err(SynthError::Parse(s.to_string()))
    }
}

/// Resolution of a conflict set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Viewpoint {
    Conservative,
    Greedy,
}

impl FromStr for Viewpoint {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cons" | "conservative" => Ok(Viewpoint::Conservative),
            "greed" | "greedy" => Ok(Viewpoint::Greedy),
            _ => Err(SynthError::Parse(s.to_string())),
        }
    }
}

impl fmt::Display for Viewpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Viewpoint::Conservative => "cons",
            Viewpoint::Greedy => "greed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Tx,
    Rx,
    DontCare,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Tx => "Tx",
            Decision::Rx => "Rx",
            Decision::DontCare => "Z",
        })
    }
}

/// States in `bin`, i.e. the conflict set of a partial assignment.
pub fn conflict_set(
    knowledge: KnowledgeSubset,
    assignment: &[(StateElement, bool)],
) -> Result<Vec<NetworkState>, SynthError> {
    let bin = knowledge.bin_of(assignment)?;
    Ok(knowledge.states_in_bin(bin))
}

/// A decision for every bin of a knowledge subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelayPolicy {
    knowledge: KnowledgeSubset,
    decisions: Vec<Decision>,
}

impl RelayPolicy {
    pub fn from_decisions(knowledge: KnowledgeSubset, decisions: Vec<Decision>) -> Option<Self> {
        (decisions.len() == knowledge.bin_count()).then_some(RelayPolicy {
            knowledge,
            decisions,
        })
    }

    /// A policy that ignores the state entirely.
    pub fn constant(decision: Decision) -> Self {
        RelayPolicy {
            knowledge: KnowledgeSubset::empty(),
            decisions: vec![decision],
        }
    }

    pub fn knowledge(&self) -> KnowledgeSubset {
        self.knowledge
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    pub fn bin_decision(&self, bin: usize) -> Decision {
        self.decisions[bin]
    }

    /// Raw table entry for the bin containing `state`.
    pub fn decision(&self, state: NetworkState) -> Decision {
        self.decisions[self.knowledge.project(state)]
    }

    /// Executable behaviour: don't-care bins stay silent.
    pub fn transmits(&self, state: NetworkState) -> bool {
        self.decision(state) == Decision::Tx
    }

    /// Bins whose decision is not a don't-care.
    pub fn care_bins(&self) -> Vec<usize> {
        (0..self.decisions.len())
            .filter(|&b| self.decisions[b] != Decision::DontCare)
            .collect()
    }
}

/// Synthesizes the policy for `knowledge` under `view`.
///
/// Conservative: silent if any state of the conflict set is harmful (`B ∪ C`),
/// otherwise transmit if any state is assisting, otherwise don't-care.
///
/// Greedy: transmit iff the conflict set contains an assisting state and also
/// contains a harmless state. The simpler rule "transmit iff some state is
/// assisting and harmless" is wrong for two-hop knowledge: in the bin
/// `H_R1D1 = H_S2D1 = H_R1S2 = 1, H_S1S2 = 0` with a non-colliding `S2` link the
/// `X_S2 = 0` completion is `A∩B` and the `X_S2 = 1` completion is `D`, so no
/// completion demands transmission, yet the greedy two-hop policy transmits there
/// because only one of the backoff and collision conditions holds.
pub fn derive_policy(knowledge: KnowledgeSubset, view: Viewpoint) -> RelayPolicy {
    let decisions = (0..knowledge.bin_count())
        .map(|bin| {
            let labels: Vec<_> = knowledge
                .states_in_bin(bin)
                .into_iter()
                .map(classify)
                .collect();
            let any_harm = labels.iter().any(|l| l.is_harmful());
            let any_harmless = labels.iter().any(|l| !l.is_harmful());
            let any_assist = labels.iter().any(|l| l.in_a());
            match view {
                Viewpoint::Conservative if any_harm => Decision::Rx,
                Viewpoint::Conservative if any_assist => Decision::Tx,
                Viewpoint::Conservative => Decision::DontCare,
                Viewpoint::Greedy if any_assist && any_harmless => Decision::Tx,
                Viewpoint::Greedy => Decision::Rx,
            }
        })
        .collect();
    RelayPolicy {
        knowledge,
        decisions,
    }
}

/// The seven policies with closed forms: full knowledge plus
/// {conservative, greedy} × {0, 1, 2} hops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NamedPolicy {
    Fnsi,
    Cons(u8),
    Greed(u8),
}

impl NamedPolicy {
    pub const ALL: [NamedPolicy; 7] = [
        NamedPolicy::Fnsi,
        NamedPolicy::Cons(2),
        NamedPolicy::Cons(1),
        NamedPolicy::Cons(0),
        NamedPolicy::Greed(2),
        NamedPolicy::Greed(1),
        NamedPolicy::Greed(0),
    ];

    pub fn knowledge(self) -> KnowledgeSubset {
        match self {
            NamedPolicy::Fnsi => KnowledgeSubset::full(),
            NamedPolicy::Cons(h) | NamedPolicy::Greed(h) => KnowledgeSubset::hops(h),
        }
    }

    pub fn viewpoint(self) -> Viewpoint {
        match self {
            NamedPolicy::Fnsi | NamedPolicy::Cons(_) => Viewpoint::Conservative,
            NamedPolicy::Greed(_) => Viewpoint::Greedy,
        }
    }

    pub fn policy(self) -> RelayPolicy {
        derive_policy(self.knowledge(), self.viewpoint())
    }

    /// Short identifier used on the command line (`fnsi`, `cons2`, ...).
    pub fn id(self) -> String {
        match self {
            NamedPolicy::Fnsi => "fnsi".into(),
            NamedPolicy::Cons(h) => format!("cons{h}"),
            NamedPolicy::Greed(h) => format!("greed{h}"),
        }
    }
}

impl fmt::Display for NamedPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NamedPolicy::Fnsi => f.write_str("FNSI"),
            NamedPolicy::Cons(h) => write!(f, "Cons({h})"),
            NamedPolicy::Greed(h) => write!(f, "Greed({h})"),
        }
    }
}

impl FromStr for NamedPolicy {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| !matches!(c, '(' | ')' | ' '))
            .collect();
        if norm == "fnsi" {
            return Ok(NamedPolicy::Fnsi);
        }
        let (ctor, hops): (fn(u8) -> NamedPolicy, &str) = if let Some(h) = norm.strip_prefix("cons")
        {
            (NamedPolicy::Cons, h)
        } else if let Some(h) = norm.strip_prefix("greed") {
            (NamedPolicy::Greed, h)
        } else {
            return Err(SynthError::Parse(s.to_string()));
        };
        match hops {
            "0" | "1" | "2" => Ok(ctor(hops.parse().unwrap())),
            _ => Err(SynthError::Parse(s.to_string())),
        }
    }
}

/// A possibly complemented state element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub element: StateElement,
    pub positive: bool,
}

impl Literal {
    pub fn eval(self, bits: u8) -> bool {
        (bits & self.element.mask() != 0) == self.positive
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str("¬")?;
        }
        f.write_str(self.element.name())
    }
}

/// Conjunction of literals; the empty product is the constant 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Product(Vec<Literal>);

impl Product {
    pub fn new(mut literals: Vec<Literal>) -> Self {
        literals.sort();
        literals.dedup();
        Product(literals)
    }

    pub fn literals(&self) -> &[Literal] {
        &self.0
    }

    /// True if the product contains both `x` and `¬x` for some element.
    fn is_contradiction(&self) -> bool {
        self.0.windows(2).any(|w| w[0].element == w[1].element)
    }

    pub fn eval(&self, bits: u8) -> bool {
        self.0.iter().all(|l| l.eval(bits))
    }

    fn support(&self) -> u8 {
        self.0.iter().fold(0, |m, l| m | l.element.mask())
    }
}

impl fmt::Display for Product {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        let parts: Vec<_> = self.0.iter().map(|l| l.to_string()).collect();
        f.write_str(&parts.join("·"))
    }
}

/// Sum-of-products expression in canonical order: literals sorted by element,
/// products sorted by length and then lexicographically. No products means 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoolExpr {
    products: Vec<Product>,
}

impl BoolExpr {
    pub fn zero() -> Self {
        BoolExpr {
            products: Vec::new(),
        }
    }

    pub fn one() -> Self {
        BoolExpr {
            products: vec![Product(Vec::new())],
        }
    }

    pub fn from_products<I: IntoIterator<Item = Product>>(products: I) -> Self {
        let mut products: Vec<_> = products
            .into_iter()
            .filter(|p| !p.is_contradiction())
            .collect();
        products.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.cmp(b)));
        products.dedup();
        BoolExpr { products }
    }

    pub fn products(&self) -> &[Product] {
        &self.products
    }

    pub fn eval_bits(&self, bits: u8) -> bool {
        self.products.iter().any(|p| p.eval(bits))
    }

    pub fn eval(&self, state: NetworkState) -> bool {
        self.eval_bits(state.index())
    }

    /// Mask of the elements the expression mentions.
    pub fn support(&self) -> u8 {
        self.products.iter().fold(0, |m, p| m | p.support())
    }

    pub fn literal_count(&self) -> usize {
        self.products.iter().map(|p| p.0.len()).sum()
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.products.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<_> = self.products.iter().map(|p| p.to_string()).collect();
        f.write_str(&parts.join(" + "))
    }
}

impl FromStr for BoolExpr {
    type Err = SynthError;

    /// Parses `H_S2D2·H_R1D2·¬H_S1D2 + H_R1S2·¬H_S1S2`. Literals may be joined by
    /// `·`, `*`, `&` or whitespace and complemented by `¬`, `!` or `~`, with
    /// optional parentheses around a single literal.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "0" {
            return Ok(BoolExpr::zero());
        }
        let mut products = Vec::new();
        for term in s.split('+') {
            let term = term.trim();
            if term == "1" {
                products.push(Product(Vec::new()));
                continue;
            }
            let literals = term
                .split(|c: char| c == '·' || c == '*' || c == '&' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(parse_literal)
                .collect::<Result<Vec<_>, _>>()?;
            if literals.is_empty() {
                return Err(SynthError::Parse(s.to_string()));
            }
            products.push(Product::new(literals));
        }
        Ok(BoolExpr::from_products(products))
    }
}

fn parse_literal(token: &str) -> Result<Literal, SynthError> {
    let mut rest = token.trim();
    let mut positive = true;
    loop {
        if let Some(r) = rest.strip_prefix(['¬', '!', '~']) {
            positive = !positive;
            rest = r.trim_start();
        } else if let Some(inner) = rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
            rest = inner.trim();
        } else {
            break;
        }
    }
    let element = rest.parse::<StateElement>()?;
    Ok(Literal { element, positive })
}

/// Which decision the minimized expression should be true on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    TxSet,
    RxSet,
}

/// Implicant over the compact bin variables: `dash` marks eliminated variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Implicant {
    dash: u16,
    value: u16,
}

impl Implicant {
    fn covers(self, minterm: u16) -> bool {
        minterm & !self.dash == self.value
    }

    fn literal_count(self, vars: usize) -> u32 {
        vars as u32 - self.dash.count_ones()
    }
}

fn prime_implicants(minterms: &BTreeSet<u16>) -> Vec<Implicant> {
    let mut current: BTreeSet<Implicant> = minterms
        .iter()
        .map(|&m| Implicant { dash: 0, value: m })
        .collect();
    let mut primes = BTreeSet::new();
    while !current.is_empty() {
        let items: Vec<_> = current.iter().copied().collect();
        let mut merged = HashSet::new();
        let mut next = BTreeSet::new();
        for (i, a) in items.iter().enumerate() {
            for b in &items[i + 1..] {
                if a.dash != b.dash {
                    continue;
                }
                let diff = a.value ^ b.value;
                if diff.count_ones() == 1 {
                    next.insert(Implicant {
                        dash: a.dash | diff,
                        value: a.value & !diff,
                    });
                    merged.insert(*a);
                    merged.insert(*b);
                }
            }
        }
        primes.extend(items.into_iter().filter(|i| !merged.contains(i)));
        current = next;
    }
    primes.into_iter().collect()
}

/// Picks a small set of primes covering every on-set minterm. Essential primes
/// and row/column dominance are applied until nothing changes; a cyclic core
/// that survives is broken greedily (most new minterms, then fewest literals).
fn select_cover(primes: &[Implicant], on: &BTreeSet<u16>, vars: usize) -> Vec<Implicant> {
    let mut chosen: Vec<Implicant> = Vec::new();
    let mut remaining: BTreeSet<u16> = on.clone();
    let mut candidates: Vec<Implicant> = primes.to_vec();

    while !remaining.is_empty() {
        let mut progressed = false;

        // Essential primes.
        for &m in remaining.clone().iter() {
            if !remaining.contains(&m) {
                continue;
            }
            let covering: Vec<_> = candidates.iter().copied().filter(|p| p.covers(m)).collect();
            if covering.len() == 1 {
                let p = covering[0];
                remaining.retain(|&x| !p.covers(x));
                candidates.retain(|&c| c != p);
                chosen.push(p);
                progressed = true;
            }
        }
        if remaining.is_empty() {
            break;
        }

        // Drop primes that cover nothing, or are dominated by a no-costlier prime.
        let cover_of = |p: &Implicant| -> BTreeSet<u16> {
            remaining.iter().copied().filter(|&m| p.covers(m)).collect()
        };
        let before = candidates.len();
        let sets: Vec<_> = candidates.iter().map(cover_of).collect();
        let keep: Vec<bool> = (0..candidates.len())
            .map(|i| {
                if sets[i].is_empty() {
                    return false;
                }
                !(0..candidates.len()).any(|j| {
                    j != i
                        && sets[i].is_subset(&sets[j])
                        && candidates[j].literal_count(vars) <= candidates[i].literal_count(vars)
                        && (sets[i] != sets[j]
                            || candidates[j].literal_count(vars)
                                < candidates[i].literal_count(vars)
                            || j < i)
                })
            })
            .collect();
        let mut k = keep.iter();
        candidates.retain(|_| *k.next().unwrap());
        progressed |= candidates.len() != before;

        // Column dominance: a minterm whose covering set contains another
        // minterm's covering set is covered automatically.
        let cols: Vec<(u16, BTreeSet<usize>)> = remaining
            .iter()
            .map(|&m| {
                let rows = (0..candidates.len())
                    .filter(|&i| candidates[i].covers(m))
                    .collect();
                (m, rows)
            })
            .collect();
        for (idx, (m, rows)) in cols.iter().enumerate() {
            let dominated = cols.iter().enumerate().any(|(jdx, (_, other))| {
                jdx != idx && other.is_subset(rows) && (other != rows || jdx < idx)
            });
            if dominated && remaining.remove(m) {
                progressed = true;
            }
        }

        if !progressed {
            // Cyclic core.
            let best = candidates
                .iter()
                .copied()
                .max_by(|a, b| {
                    let ca = remaining.iter().filter(|&&m| a.covers(m)).count();
                    let cb = remaining.iter().filter(|&&m| b.covers(m)).count();
                    ca.cmp(&cb)
                        .then_with(|| b.literal_count(vars).cmp(&a.literal_count(vars)))
                        .then_with(|| b.cmp(a))
                })
                .expect("on-set minterm without covering prime");
            remaining.retain(|&x| !best.covers(x));
            candidates.retain(|&c| c != best);
            chosen.push(best);
        }
    }

    debug_assert!(on.iter().all(|&m| chosen.iter().any(|p| p.covers(m))));
    chosen.sort();
    chosen.dedup();
    chosen
}

/// Minimal sum-of-products over the known elements that is true exactly on the
/// bins mapped to `target`, treating don't-care bins as free.
pub fn minimize(policy: &RelayPolicy, target: Target) -> BoolExpr {
    let knowledge = policy.knowledge();
    let vars = knowledge.len();
    let want = match target {
        Target::TxSet => Decision::Tx,
        Target::RxSet => Decision::Rx,
    };
    let on: BTreeSet<u16> = (0..policy.decisions().len())
        .filter(|&b| policy.bin_decision(b) == want)
        .map(|b| b as u16)
        .collect();
    if on.is_empty() {
        return BoolExpr::zero();
    }
    let dc: BTreeSet<u16> = (0..policy.decisions().len())
        .filter(|&b| policy.bin_decision(b) == Decision::DontCare)
        .map(|b| b as u16)
        .collect();
    let all: BTreeSet<u16> = on.union(&dc).copied().collect();
    let primes = prime_implicants(&all);
    let cover = select_cover(&primes, &on, vars);

    let elements = knowledge.elements();
    BoolExpr::from_products(cover.into_iter().map(|imp| {
        let literals = (0..vars)
            .filter(|&i| imp.dash >> i & 1 == 0)
            .map(|i| Literal {
                element: elements[i],
                positive: imp.value >> i & 1 == 1,
            })
            .collect();
        Product::new(literals)
    }))
}

/// True iff `a` and `b` agree on every bin of `care` (compact indices over `domain`).
pub fn expr_equivalent(
    a: &BoolExpr,
    b: &BoolExpr,
    domain: KnowledgeSubset,
    care: &[usize],
) -> Result<bool, SynthError> {
    if (a.support() | b.support()) & !domain.mask() != 0 {
        return Err(SynthError::DomainMismatch);
    }
    let bins = domain.bin_count();
    for &bin in care {
        if bin >= bins {
            return Err(SynthError::BinOutOfRange { index: bin, bins });
        }
        let bits = domain.expand(bin);
        if a.eval_bits(bits) != b.eval_bits(bits) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Hand-derived halt conditions (`Rx` sets) of the named policies, in
/// [`NamedPolicy::ALL`] order.
pub fn reference_halt_expressions() -> Vec<(NamedPolicy, BoolExpr)> {
    let parse = |s: &str| s.parse::<BoolExpr>().expect("reference expression parses");
    vec![
        (
            NamedPolicy::Fnsi,
            parse("X_S2·H_S2D2·H_R1D2·¬H_S1D2 + ¬X_S2·H_R1S2·¬H_S1S2"),
        ),
        (
            NamedPolicy::Cons(2),
            parse("H_S2D2·H_R1D2·¬H_S1D2 + H_R1S2·¬H_S1S2"),
        ),
        (NamedPolicy::Cons(1), parse("H_R1S2 + H_R1D2")),
        (NamedPolicy::Cons(0), BoolExpr::one()),
        (
            NamedPolicy::Greed(2),
            parse("H_S2D2·H_R1D2·¬H_S1D2·H_R1S2·¬H_S1S2 + ¬H_R1D1"),
        ),
        (NamedPolicy::Greed(1), parse("¬H_R1D1")),
        (NamedPolicy::Greed(0), BoolExpr::zero()),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExprCheck {
    pub policy: NamedPolicy,
    pub reference: BoolExpr,
    pub minimized: BoolExpr,
    /// Reference and minimized forms agree on every care bin.
    pub equivalent: bool,
}

/// Synthesizes and minimizes each named policy and compares the result with
/// [`reference_halt_expressions`] over the policy's care set.
pub fn check_reference_expressions() -> Vec<ExprCheck> {
    reference_halt_expressions()
        .into_iter()
        .map(|(policy, reference)| {
            let synthesized = policy.policy();
            let minimized = minimize(&synthesized, Target::RxSet);
            let equivalent = expr_equivalent(
                &minimized,
                &reference,
                synthesized.knowledge(),
                &synthesized.care_bins(),
            )
            .unwrap_or(false);
            ExprCheck {
                policy,
                reference,
                minimized,
                equivalent,
            }
        })
        .collect()
}

/// The policy's table with one row per bin, in bin order.
pub fn decision_rows(policy: &RelayPolicy) -> Vec<(Vec<(StateElement, bool)>, Decision)> {
    let knowledge = policy.knowledge();
    let elements = knowledge.elements();
    (0..knowledge.bin_count())
        .map(|bin| {
            let assignment = elements
                .iter()
                .enumerate()
                .map(|(i, &e)| (e, bin >> i & 1 == 1))
                .collect();
            (assignment, policy.bin_decision(bin))
        })
        .collect()
}

const _: () = assert!(ELEMENT_COUNT <= 16);
