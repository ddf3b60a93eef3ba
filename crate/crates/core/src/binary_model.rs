//! Binary relay-centric network model.
//!
//! After fixing the states implied by NACK-triggered decode-and-forward relaying
//! (`X_S1 = 1`, `X_D1 = 0`, `X_D2 = 0`, `H_S1D1 = 0`, `H_S1R1 = 1`), eight binary
//! elements remain. Every snapshot of those eight bits is a [`NetworkState`] and is
//! labelled by the effect a relay transmission would have on the network.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of free binary state elements.
pub const ELEMENT_COUNT: usize = 8;
/// Number of distinct network states.
pub const STATE_COUNT: usize = 1 << ELEMENT_COUNT;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("state index {0} out of range 0..=255")]
    IndexOutOfRange(usize),
    #[error("unknown state element `{0}`")]
    UnknownElement(String),
}

/// One of the eight free elements of the binary model.
///
/// Discriminants are the bit positions used by the state index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum StateElement {
    HR1D2 = 0,
    HR1D1 = 1,
    HR1S2 = 2,
    HS2D1 = 3,
    HS2D2 = 4,
    HS1S2 = 5,
    HS1D2 = 6,
    XS2 = 7,
}

impl StateElement {
    /// All elements in bit order.
    pub const ALL: [StateElement; ELEMENT_COUNT] = [
        StateElement::HR1D2,
        StateElement::HR1D1,
        StateElement::HR1S2,
        StateElement::HS2D1,
        StateElement::HS2D2,
        StateElement::HS1S2,
        StateElement::HS1D2,
        StateElement::XS2,
    ];

    pub const fn bit(self) -> u8 {
        self as u8
    }

    pub const fn mask(self) -> u8 {
        1 << (self as u8)
    }

    pub fn from_bit(bit: u8) -> Option<Self> {
        Self::ALL.get(bit as usize).copied()
    }

    /// Hop distance of a channel element from the relay. `None` for the node
    /// state `X_S2`, which belongs to no hop set.
    pub const fn hop_distance(self) -> Option<u8> {
        match self {
            StateElement::HR1S2 | StateElement::HR1D2 | StateElement::HR1D1 => Some(1),
            StateElement::HS2D1
            | StateElement::HS2D2
            | StateElement::HS1S2
            | StateElement::HS1D2 => Some(2),
            StateElement::XS2 => None,
        }
    }

    pub const fn is_channel(self) -> bool {
        self.hop_distance().is_some()
    }

    pub const fn name(self) -> &'static str {
        match self {
            StateElement::HR1D2 => "H_R1D2",
            StateElement::HR1D1 => "H_R1D1",
            StateElement::HR1S2 => "H_R1S2",
            StateElement::HS2D1 => "H_S2D1",
            StateElement::HS2D2 => "H_S2D2",
            StateElement::HS1S2 => "H_S1S2",
            StateElement::HS1D2 => "H_S1D2",
            StateElement::XS2 => "X_S2",
        }
    }
}

impl fmt::Display for StateElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StateElement {
    type Err = ModelError;

    /// Accepts `H_R1D2`, `HR1D2` or `h_r1d2` spellings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| *c != '_')
            .map(|c| c.to_ascii_uppercase())
            .collect();
        StateElement::ALL
            .iter()
            .copied()
            .find(|e| e.name().replace('_', "") == norm)
            .ok_or_else(|| ModelError::UnknownElement(s.to_string()))
    }
}

/// A full assignment of the eight state elements, stored as its index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NetworkState(u8);

impl NetworkState {
    pub const fn from_index(index: u8) -> Self {
        NetworkState(index)
    }

    pub fn try_from_index(index: usize) -> Result<Self, ModelError> {
        u8::try_from(index)
            .map(NetworkState)
            .map_err(|_| ModelError::IndexOutOfRange(index))
    }

    pub fn from_bits(bits: [bool; ELEMENT_COUNT]) -> Self {
        let index = bits
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << i));
        NetworkState(index)
    }

    pub const fn index(self) -> u8 {
        self.0
    }

    pub const fn get(self, element: StateElement) -> bool {
        self.0 & element.mask() != 0
    }

    pub fn bits(self) -> [bool; ELEMENT_COUNT] {
        StateElement::ALL.map(|e| self.get(e))
    }
}

impl fmt::Display for NetworkState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Effect classes of a relay transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Event {
    /// The relay helps its own flow recover the packet.
    Assist,
    /// The relay forces an otherwise idle-sensing `S2` to defer.
    Backoff,
    /// The relay destroys `S2`'s packet at `D2`.
    Collision,
}

impl Event {
    pub const ALL: [Event; 3] = [Event::Assist, Event::Backoff, Event::Collision];

    pub const fn letter(self) -> &'static str {
        match self {
            Event::Assist => "A",
            Event::Backoff => "B",
            Event::Collision => "C",
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.letter())
    }
}

impl FromStr for Event {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Event::Assist),
            "B" => Ok(Event::Backoff),
            "C" => Ok(Event::Collision),
            other => Err(format!("unknown event `{other}` (expected A, B or C)")),
        }
    }
}

/// Membership of a state in the assist/backoff/collision sets.
///
/// `D` is the all-false case. `B` and `C` can never be set together, so the
/// constructor rejects that combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateLabel {
    in_a: bool,
    in_b: bool,
    in_c: bool,
}

impl StateLabel {
    pub const D: StateLabel = StateLabel::raw(false, false, false);
    pub const A: StateLabel = StateLabel::raw(true, false, false);
    pub const B: StateLabel = StateLabel::raw(false, true, false);
    pub const C: StateLabel = StateLabel::raw(false, false, true);
    pub const AB: StateLabel = StateLabel::raw(true, true, false);
    pub const AC: StateLabel = StateLabel::raw(true, false, true);

    /// The six realizable labels.
    pub const ALL: [StateLabel; 6] = [
        StateLabel::A,
        StateLabel::B,
        StateLabel::C,
        StateLabel::AB,
        StateLabel::AC,
        StateLabel::D,
    ];

    const fn raw(in_a: bool, in_b: bool, in_c: bool) -> Self {
        StateLabel { in_a, in_b, in_c }
    }

    pub fn new(in_a: bool, in_b: bool, in_c: bool) -> Option<Self> {
        (!(in_b && in_c)).then_some(StateLabel { in_a, in_b, in_c })
    }

    pub const fn in_a(self) -> bool {
        self.in_a
    }

    pub const fn in_b(self) -> bool {
        self.in_b
    }

    pub const fn in_c(self) -> bool {
        self.in_c
    }

    pub const fn is_d(self) -> bool {
        !(self.in_a || self.in_b || self.in_c)
    }

    /// Relay transmission would harm the other flow (`B ∪ C`).
    pub const fn is_harmful(self) -> bool {
        self.in_b || self.in_c
    }

    pub const fn contains(self, event: Event) -> bool {
        match event {
            Event::Assist => self.in_a,
            Event::Backoff => self.in_b,
            Event::Collision => self.in_c,
        }
    }

    pub const fn as_str(self) -> &'static str {
        match (self.in_a, self.in_b, self.in_c) {
            (false, false, false) => "D",
            (true, false, false) => "A",
            (false, true, false) => "B",
            (false, false, true) => "C",
            (true, true, false) => "A∩B",
            (true, false, true) => "A∩C",
            _ => unreachable!(),
        }
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for StateLabel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

/// Labels a state from its eight bits.
///
/// * assist: `H_R1D1 ∧ ¬(X_S2 ∧ H_S2D1)`
/// * backoff: `¬X_S2 ∧ H_R1S2 ∧ ¬H_S1S2`
/// * collision: `X_S2 ∧ H_S2D2 ∧ H_R1D2 ∧ ¬H_S1D2`
pub fn classify(state: NetworkState) -> StateLabel {
    use StateElement::*;
    let x_s2 = state.get(XS2);
    let in_a = state.get(HR1D1) && !(x_s2 && state.get(HS2D1));
    let in_b = !x_s2 && state.get(HR1S2) && !state.get(HS1S2);
    let in_c = x_s2 && state.get(HS2D2) && state.get(HR1D2) && !state.get(HS1D2);
    StateLabel::raw(in_a, in_b, in_c)
}

/// All 256 states in ascending index order.
pub fn enumerate_states() -> impl Iterator<Item = NetworkState> + Clone {
    (0..=u8::MAX).map(NetworkState)
}

/// Per-state labels as published in the state-classification table,
/// transcribed independently of [`classify`] and used to cross-check it.
pub fn appendix_table() -> &'static [StateLabel; STATE_COUNT] {
    &APPENDIX_TABLE
}

const D: StateLabel = StateLabel::D;
const A: StateLabel = StateLabel::A;
const B: StateLabel = StateLabel::B;
const C: StateLabel = StateLabel::C;
const AB: StateLabel = StateLabel::AB;
const AC: StateLabel = StateLabel::AC;

#[rustfmt::skip]
static APPENDIX_TABLE: [StateLabel; STATE_COUNT] = [
    D, D, A, A, B, B, AB, AB, D, D, A, A, B, B, AB, AB,
    D, D, A, A, B, B, AB, AB, D, D, A, A, B, B, AB, AB,
    D, D, A, A, D, D, A, A, D, D, A, A, D, D, A, A,
    D, D, A, A, D, D, A, A, D, D, A, A, D, D, A, A,
    D, D, A, A, B, B, AB, AB, D, D, A, A, B, B, AB, AB,
    D, D, A, A, B, B, AB, AB, D, D, A, A, B, B, AB, AB,
    D, D, A, A, D, D, A, A, D, D, A, A, D, D, A, A,
    D, D, A, A, D, D, A, A, D, D, A, A, D, D, A, A,
    D, D, A, A, D, D, A, A, D, D, D, D, D, D, D, D,
    D, C, A, AC, D, C, A, AC, D, C, D, C, D, C, D, C,
    D, D, A, A, D, D, A, A, D, D, D, D, D, D, D, D,
    D, C, A, AC, D, C, A, AC, D, C, D, C, D, C, D, C,
    D, D, A, A, D, D, A, A, D, D, D, D, D, D, D, D,
    D, D, A, A, D, D, A, A, D, D, D, D, D, D, D, D,
    D, D, A, A, D, D, A, A, D, D, D, D, D, D, D, D,
    D, D, A, A, D, D, A, A, D, D, D, D, D, D, D, D,
];
