//! Three-bit classical reconciliation between Alice (two photons) and Bob
//! (one photon).
//!
//! Alice's rules:
//!
//! | her indices                           | first bit        | second bit       |
//! |---------------------------------------|------------------|------------------|
//! | `n2 = n1 + 2`, `B_n1 = B_n2 = p`      | `!p`             | `!p`             |
//! | otherwise                             | `B_n1` (`B_n2`)  | `B_n2` (`B_n1`)  |
//!
//! Bob answers the first bit with a recognition flag: 1 when the bit
//! differs from his own, otherwise 0 for a center index and an edge-side
//! signal for an edge index (see [`EdgeConvention`]).
//!
//! Deduction does not transcribe a case analysis. Each party enumerates the
//! worlds compatible with what it holds, replays the forward rules in each
//! one, and keeps those that reproduce the observed bits.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::tribo::{
    bit_alloc, edge_side, position_class, tribonacci, BlockCode, EdgeSide, Index, Position,
};
use crate::world::{alice_candidate_pumps, all_worlds, PumpWindow, TripleSlot, World};

/// How Bob signals his edge side when Alice's first bit equals his own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeConvention {
    /// Left edge sends 1, right edge sends 0.
    #[serde(rename = "prose")]
    ProseLeftOne,
    /// Send `!(n3 mod 4)`: left edge (`n3 mod 4 = 1`) sends 0, right edge sends 1.
    #[default]
    #[serde(rename = "formula")]
    FormulaMod4,
}

impl EdgeConvention {
    pub const ALL: [EdgeConvention; 2] =
        [EdgeConvention::ProseLeftOne, EdgeConvention::FormulaMod4];

    pub fn wire_code(self) -> u8 {
        match self {
            EdgeConvention::ProseLeftOne => 0,
            EdgeConvention::FormulaMod4 => 1,
        }
    }

    pub fn from_wire_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(EdgeConvention::ProseLeftOne),
            1 => Some(EdgeConvention::FormulaMod4),
            _ => None,
        }
    }

    fn side_signal(self, n3: Index) -> u8 {
        match self {
            EdgeConvention::ProseLeftOne => match edge_side(n3) {
                Ok(EdgeSide::Left) => 1,
                _ => 0,
            },
            EdgeConvention::FormulaMod4 => u8::from(n3.is_multiple_of(4)),
        }
    }
}

impl fmt::Display for EdgeConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeConvention::ProseLeftOne => "prose",
            EdgeConvention::FormulaMod4 => "formula",
        })
    }
}

impl FromStr for EdgeConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prose" => Ok(EdgeConvention::ProseLeftOne),
            "formula" => Ok(EdgeConvention::FormulaMod4),
            other => Err(Error::Config(format!("unknown edge convention {other:?}"))),
        }
    }
}

/// Alice's private coin for the order-free rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderChoice {
    LowerFirst,
    UpperFirst,
}

impl OrderChoice {
    pub const ALL: [OrderChoice; 2] = [OrderChoice::LowerFirst, OrderChoice::UpperFirst];

    pub fn from_coin(heads: bool) -> Self {
        if heads {
            OrderChoice::UpperFirst
        } else {
            OrderChoice::LowerFirst
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AliceRule {
    /// Discontinuous pair with equal bits `p`: send `!p` twice.
    RepeatComplement,
    /// Send both own bits, in the order of the latent choice.
    OwnBits,
}

pub fn alice_rule((n1, n2): (Index, Index)) -> AliceRule {
    if n2 == n1 + 2 && bit_alloc(n1) == bit_alloc(n2) {
        AliceRule::RepeatComplement
    } else {
        AliceRule::OwnBits
    }
}

/// Latent choices that matter for a pair: one for the repeat rule, two otherwise.
pub fn order_choices(pair: (Index, Index)) -> &'static [OrderChoice] {
    match alice_rule(pair) {
        AliceRule::RepeatComplement => &OrderChoice::ALL[..1],
        AliceRule::OwnBits => &OrderChoice::ALL,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliceKnowledge {
    pub pair_indices: (Index, Index),
    pub latent_order_choice: OrderChoice,
    pub sent_bits: Vec<u8>,
    pub received_bit: Option<u8>,
}

impl AliceKnowledge {
    pub fn new(n1: Index, n2: Index, choice: OrderChoice) -> Result<Self> {
        let (lo, hi) = (n1.min(n2), n1.max(n2));
        if lo < 1 || !matches!(hi - lo, 1 | 2) {
            return Err(domain(format!(
                "({n1}, {n2}) is not a pair from one consecutive triple"
            )));
        }
        Ok(Self {
            pair_indices: (lo, hi),
            latent_order_choice: choice,
            sent_bits: Vec::new(),
            received_bit: None,
        })
    }

    pub fn from_world(world: &World, choice: OrderChoice) -> Self {
        let (n1, n2) = world.alice_pair();
        Self::new(n1, n2, choice).expect("worlds always give a valid pair")
    }

    pub fn rule(&self) -> AliceRule {
        alice_rule(self.pair_indices)
    }

    pub fn send_first_bit(&mut self) -> Result<u8> {
        if !self.sent_bits.is_empty() {
            return Err(Error::State("first bit already sent".into()));
        }
        let b = alice_first_bit(self);
        self.sent_bits.push(b);
        Ok(b)
    }

    pub fn receive_bob_bit(&mut self, bit: u8) -> Result<()> {
        check_bit(bit)?;
        if self.sent_bits.len() != 1 || self.received_bit.is_some() {
            return Err(Error::State("Bob's bit arrived out of order".into()));
        }
        self.received_bit = Some(bit);
        Ok(())
    }

    pub fn send_second_bit(&mut self) -> Result<u8> {
        if self.sent_bits.len() != 1 || self.received_bit.is_none() {
            return Err(Error::State(
                "second bit requires first bit and Bob's response".into(),
            ));
        }
        let b = alice_second_bit(self);
        self.sent_bits.push(b);
        Ok(b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BobKnowledge {
    pub own_index: Index,
    pub received_bits: Vec<u8>,
    pub sent_bit: Option<u8>,
}

impl BobKnowledge {
    pub fn new(own_index: Index) -> Result<Self> {
        if own_index < 1 {
            return Err(domain("Bob's index must be >= 1"));
        }
        Ok(Self {
            own_index,
            received_bits: Vec::new(),
            sent_bit: None,
        })
    }

    pub fn receive_first_bit(&mut self, bit: u8, convention: EdgeConvention) -> Result<u8> {
        check_bit(bit)?;
        if !self.received_bits.is_empty() {
            return Err(Error::State("first bit already received".into()));
        }
        self.received_bits.push(bit);
        let response = bob_response(self, bit, convention);
        self.sent_bit = Some(response);
        Ok(response)
    }

    pub fn receive_second_bit(&mut self, bit: u8) -> Result<Transcript> {
        check_bit(bit)?;
        match (self.received_bits.as_slice(), self.sent_bit) {
            ([first], Some(bob_bit)) => {
                let t = Transcript {
                    alice_bit_1: *first,
                    bob_bit,
                    alice_bit_2: bit,
                };
                self.received_bits.push(bit);
                Ok(t)
            }
            _ => Err(Error::State("second bit arrived out of order".into())),
        }
    }

    pub fn transcript(&self) -> Option<Transcript> {
        match (self.received_bits.as_slice(), self.sent_bit) {
            ([b1, b2], Some(bb)) => Some(Transcript {
                alice_bit_1: *b1,
                bob_bit: bb,
                alice_bit_2: *b2,
            }),
            _ => None,
        }
    }
}

fn check_bit(bit: u8) -> Result<()> {
    if bit > 1 {
        return Err(Error::ProtocolViolation(format!("{bit} is not a bit")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transcript {
    pub alice_bit_1: u8,
    pub bob_bit: u8,
    pub alice_bit_2: u8,
}

impl Transcript {
    pub fn new(alice_bit_1: u8, bob_bit: u8, alice_bit_2: u8) -> Self {
        Self {
            alice_bit_1,
            bob_bit,
            alice_bit_2,
        }
    }

    pub fn bits(&self) -> [u8; 3] {
        [self.alice_bit_1, self.bob_bit, self.alice_bit_2]
    }

    /// Index 0..8 reading the bits in order as a binary number.
    pub fn code(&self) -> usize {
        ((self.alice_bit_1 as usize) << 2)
            | ((self.bob_bit as usize) << 1)
            | self.alice_bit_2 as usize
    }

    pub fn from_code(code: usize) -> Self {
        Self::new(
            ((code >> 2) & 1) as u8,
            ((code >> 1) & 1) as u8,
            (code & 1) as u8,
        )
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}{}",
            self.alice_bit_1, self.bob_bit, self.alice_bit_2
        )
    }
}

pub fn alice_first_bit(k: &AliceKnowledge) -> u8 {
    let (n1, n2) = k.pair_indices;
    match k.rule() {
        AliceRule::RepeatComplement => 1 - bit_alloc(n1),
        AliceRule::OwnBits => match k.latent_order_choice {
            OrderChoice::LowerFirst => bit_alloc(n1),
            OrderChoice::UpperFirst => bit_alloc(n2),
        },
    }
}

pub fn alice_second_bit(k: &AliceKnowledge) -> u8 {
    let (n1, n2) = k.pair_indices;
    match k.rule() {
        AliceRule::RepeatComplement => 1 - bit_alloc(n1),
        AliceRule::OwnBits => match k.latent_order_choice {
            OrderChoice::LowerFirst => bit_alloc(n2),
            OrderChoice::UpperFirst => bit_alloc(n1),
        },
    }
}

pub fn bob_response(k: &BobKnowledge, received: u8, convention: EdgeConvention) -> u8 {
    bob_response_for(k.own_index, received, convention)
}

pub(crate) fn bob_response_for(n3: Index, received: u8, convention: EdgeConvention) -> u8 {
    if received != bit_alloc(n3) {
        return 1;
    }
    match position_class(n3) {
        Position::Center => 0,
        Position::Edge => convention.side_signal(n3),
    }
}

/// The transcript an honest run produces in `world`.
pub fn forward_transcript(
    world: &World,
    choice: OrderChoice,
    convention: EdgeConvention,
) -> Transcript {
    let alice = AliceKnowledge::from_world(world, choice);
    let b1 = alice_first_bit(&alice);
    Transcript {
        alice_bit_1: b1,
        bob_bit: bob_response_for(world.bob_index(), b1, convention),
        alice_bit_2: alice_second_bit(&alice),
    }
}

/// Worlds still compatible with one party's observations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldSet {
    pub candidates: BTreeSet<World>,
}

impl WorldSet {
    pub fn is_resolved(&self) -> bool {
        self.candidates.len() == 1
    }

    pub fn resolved(&self) -> Option<World> {
        if self.is_resolved() {
            self.candidates.iter().next().copied()
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn pumps(&self) -> BTreeSet<Index> {
        self.candidates.iter().map(|w| w.pump).collect()
    }
}

/// Bob's candidates given his index and the full transcript.
///
/// Returns a protocol violation when no world reproduces the transcript.
pub fn deduce_bob(
    k: &BobKnowledge,
    transcript: &Transcript,
    window: &PumpWindow,
    convention: EdgeConvention,
) -> Result<WorldSet> {
    let n3 = k.own_index;
    let candidates: BTreeSet<World> = TripleSlot::ALL
        .into_iter()
        .filter(|slot| window.contains(n3 + slot.offset()))
        .map(|slot| World::new(n3 + slot.offset(), slot))
        .filter(|w| {
            order_choices(w.alice_pair())
                .iter()
                .any(|&c| forward_transcript(w, c, convention) == *transcript)
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::ProtocolViolation(format!(
            "transcript {transcript} is impossible for Bob holding F_{n3}"
        )));
    }
    Ok(WorldSet { candidates })
}

/// Alice's candidates given her pair, the first bit she sent and Bob's reply.
pub fn deduce_alice(
    k: &AliceKnowledge,
    bob_bit: u8,
    window: &PumpWindow,
    convention: EdgeConvention,
) -> Result<WorldSet> {
    let sent = *k
        .sent_bits
        .first()
        .ok_or_else(|| Error::State("Alice has not sent her first bit".into()))?;
    let (n1, n2) = k.pair_indices;
    let candidates: BTreeSet<World> = alice_candidate_pumps((n1, n2))
        .into_iter()
        .filter(|p| window.contains(*p))
        .filter_map(|pump| {
            let bob = (1..=3).map(|o| pump - o).find(|&n| n != n1 && n != n2)?;
            World::from_bob_index(pump, bob)
        })
        .filter(|w| bob_response_for(w.bob_index(), sent, convention) == bob_bit)
        .collect();
    if candidates.is_empty() {
        return Err(Error::ProtocolViolation(format!(
            "Bob's bit {bob_bit} is impossible for Alice holding (F_{n1}, F_{n2})"
        )));
    }
    Ok(WorldSet { candidates })
}

/// Key segment for a resolved world: the block assigned to the pump value.
pub fn derive_key_segment(set: &WorldSet, code: &BlockCode) -> Result<Vec<u8>> {
    let world = set
        .resolved()
        .ok_or_else(|| Error::State(format!("{} candidate worlds remain", set.len())))?;
    code.encode(tribonacci(world.pump)?)
}

/// `(-1)^(3 - (n3 mod 4))`.
pub fn direction_sign(n3: Index) -> i32 {
    if (3 - n3 % 4).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Outcome of one honest round played out in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundPlay {
    pub world: World,
    pub choice: OrderChoice,
    pub transcript: Transcript,
    pub alice: WorldSet,
    pub bob: WorldSet,
}

pub fn play_round(
    world: World,
    choice: OrderChoice,
    window: &PumpWindow,
    convention: EdgeConvention,
) -> Result<RoundPlay> {
    let (n1, n2) = world.alice_pair();
    let mut alice = AliceKnowledge::new(n1, n2, choice)?;
    let mut bob = BobKnowledge::new(world.bob_index())?;
    let b1 = alice.send_first_bit()?;
    let bb = bob.receive_first_bit(b1, convention)?;
    alice.receive_bob_bit(bb)?;
    let alice_set = deduce_alice(&alice, bb, window, convention)?;
    let b2 = alice.send_second_bit()?;
    let transcript = bob.receive_second_bit(b2)?;
    let bob_set = deduce_bob(&bob, &transcript, window, convention)?;
    Ok(RoundPlay {
        world,
        choice,
        transcript,
        alice: alice_set,
        bob: bob_set,
    })
}

/// Structural row of the combined rule table: Alice's rule, Bob's position
/// class and whether Alice's first bit equals Bob's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RuleRow {
    pub rule: AliceRule,
    pub bob_position: Position,
    pub first_bit_matches: bool,
}

impl RuleRow {
    pub fn all() -> Vec<RuleRow> {
        let mut rows = Vec::with_capacity(8);
        for rule in [AliceRule::RepeatComplement, AliceRule::OwnBits] {
            for bob_position in [Position::Center, Position::Edge] {
                for first_bit_matches in [false, true] {
                    rows.push(RuleRow {
                        rule,
                        bob_position,
                        first_bit_matches,
                    });
                }
            }
        }
        rows
    }

    /// Bob's reply prescribed by the row, for Bob holding `n3`.
    pub fn prescribed_reply(&self, n3: Index, convention: EdgeConvention) -> u8 {
        match (self.first_bit_matches, self.bob_position) {
            (false, _) => 1,
            (true, Position::Center) => 0,
            (true, Position::Edge) => convention.side_signal(n3),
        }
    }
}

pub fn classify(world: &World, choice: OrderChoice) -> RuleRow {
    let alice = AliceKnowledge::from_world(world, choice);
    let n3 = world.bob_index();
    RuleRow {
        rule: alice.rule(),
        bob_position: position_class(n3),
        first_bit_matches: alice_first_bit(&alice) == bit_alloc(n3),
    }
}

/// One failed case from [`exhaustive_check`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckFailure {
    pub world: World,
    pub choice: OrderChoice,
    pub transcript: Option<Transcript>,
    pub alice_pumps: Vec<Index>,
    pub bob_pumps: Vec<Index>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletenessReport {
    pub convention: Option<EdgeConvention>,
    /// All (world, latent choice) combinations in the window.
    pub cases: usize,
    /// Combinations whose world is interior.
    pub interior_cases: usize,
    /// Interior combinations where a party is left with more than one world.
    pub ambiguous: usize,
    pub failures: Vec<CheckFailure>,
    /// Boundary combinations that nevertheless resolved for both parties.
    pub boundary_resolved: usize,
}

impl CompletenessReport {
    pub fn is_complete(&self) -> bool {
        self.ambiguous == 0 && self.failures.is_empty()
    }
}

/// Plays every interior world and latent choice in `window`, checking that
/// both parties resolve the true pump and derive the same key segment.
pub fn exhaustive_check(
    window: &PumpWindow,
    convention: EdgeConvention,
    code: Option<&BlockCode>,
) -> CompletenessReport {
    let mut report = CompletenessReport {
        convention: Some(convention),
        ..Default::default()
    };
    for world in all_worlds(window) {
        for &choice in order_choices(world.alice_pair()) {
            report.cases += 1;
            let interior = world.is_interior(window);
            let fail =
                |transcript, alice: &WorldSet, bob: &WorldSet, reason: String| CheckFailure {
                    world,
                    choice,
                    transcript,
                    alice_pumps: alice.pumps().into_iter().collect(),
                    bob_pumps: bob.pumps().into_iter().collect(),
                    reason,
                };
            let play = match play_round(world, choice, window, convention) {
                Ok(p) => p,
                Err(e) => {
                    if interior {
                        report.interior_cases += 1;
                        let empty = WorldSet::default();
                        report
                            .failures
                            .push(fail(None, &empty, &empty, e.to_string()));
                    }
                    continue;
                }
            };
            let both_true =
                play.alice.resolved() == Some(world) && play.bob.resolved() == Some(world);
            if !interior {
                if both_true {
                    report.boundary_resolved += 1;
                }
                continue;
            }
            report.interior_cases += 1;
            if !play.alice.is_resolved() || !play.bob.is_resolved() {
                report.ambiguous += 1;
            }
            if !both_true {
                report.failures.push(fail(
                    Some(play.transcript),
                    &play.alice,
                    &play.bob,
                    "wrong or unresolved world".into(),
                ));
                continue;
            }
            if let Some(code) = code {
                let segments = (
                    derive_key_segment(&play.alice, code),
                    derive_key_segment(&play.bob, code),
                );
                match segments {
                    (Ok(a), Ok(b)) if a == b => {}
                    (a, b) => report.failures.push(fail(
                        Some(play.transcript),
                        &play.alice,
                        &play.bob,
                        format!("segments differ: {a:?} vs {b:?}"),
                    )),
                }
            }
        }
    }
    report
}

/// Alice pairs (with each possible first bit) for which both of Bob's
/// candidate worlds inside `window` would send the same reply.
pub fn alice_ambiguities(
    window: &PumpWindow,
    convention: EdgeConvention,
) -> Vec<((Index, Index), u8)> {
    let mut pairs: BTreeSet<(Index, Index)> = BTreeSet::new();
    for w in all_worlds(window) {
        pairs.insert(w.alice_pair());
    }
    let mut out = Vec::new();
    for pair in pairs {
        let bobs: Vec<Index> = alice_candidate_pumps(pair)
            .into_iter()
            .filter(|p| window.contains(*p))
            .filter_map(|p| (1..=3).map(|o| p - o).find(|&n| n != pair.0 && n != pair.1))
            .collect();
        if bobs.len() < 2 {
            continue;
        }
        for &choice in order_choices(pair) {
            let k = AliceKnowledge::new(pair.0, pair.1, choice).expect("pair from a world");
            let b1 = alice_first_bit(&k);
            if bob_response_for(bobs[0], b1, convention)
                == bob_response_for(bobs[1], b1, convention)
            {
                out.push((pair, b1));
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Convention used when none is configured: the first one whose exhaustive
/// check over `window` is complete, preferring [`EdgeConvention::FormulaMod4`].
pub fn validated_convention(window: &PumpWindow) -> Option<EdgeConvention> {
    [EdgeConvention::FormulaMod4, EdgeConvention::ProseLeftOne]
        .into_iter()
        .find(|&c| {
            exhaustive_check(window, c, None).is_complete()
                && alice_ambiguities(window, c).is_empty()
        })
}

/// One category of what Alice can hold, with an example pair and the
/// indices Bob might then hold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Situation {
    pub adjacent: bool,
    /// Unordered position classes of Alice's pair, e.g. `"c,e"`.
    pub alice_classes: String,
    pub example: (Index, Index),
    pub alice_bits: (u8, u8),
    pub bob_candidates: Vec<Index>,
    pub bob_classes: Vec<Position>,
    pub bob_bits: Vec<u8>,
}

/// The distinct situations, keyed by adjacency, unordered classes and
/// whether Alice's bits agree, with the first example at or above `from`.
/// Adjacent categories come first.
pub fn alice_situations(from: Index) -> Vec<Situation> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for n1 in from.max(1)..from.max(1) + 8 {
        for gap in [1, 2] {
            let pair = (n1, n1 + gap);
            let mut classes = [
                position_class(pair.0).letter(),
                position_class(pair.1).letter(),
            ];
            classes.sort_unstable();
            let bits = (bit_alloc(pair.0), bit_alloc(pair.1));
            if !seen.insert((gap, classes, bits.0 == bits.1)) {
                continue;
            }
            let bob_candidates: Vec<Index> = alice_candidate_pumps(pair)
                .into_iter()
                .filter_map(|p| (1..=3).map(|o| p - o).find(|&n| n != pair.0 && n != pair.1))
                .collect();
            out.push(Situation {
                adjacent: gap == 1,
                alice_classes: format!("{},{}", classes[0], classes[1]),
                example: pair,
                alice_bits: bits,
                bob_classes: bob_candidates.iter().map(|&n| position_class(n)).collect(),
                bob_bits: bob_candidates.iter().map(|&n| bit_alloc(n)).collect(),
                bob_candidates,
            });
        }
    }
    out.sort_by_key(|s| (!s.adjacent, s.example));
    out
}

/// Realized rows of the combined rule table over `window`, with the number
/// of (world, latent choice) cases that fall into each.
pub fn rule_table(window: &PumpWindow) -> Vec<(RuleRow, usize)> {
    let mut counts: std::collections::BTreeMap<RuleRow, usize> =
        RuleRow::all().into_iter().map(|r| (r, 0)).collect();
    for world in all_worlds(window) {
        for &c in order_choices(world.alice_pair()) {
            *counts.entry(classify(&world, c)).or_default() += 1;
        }
    }
    counts.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tribo::BlockCode;

    fn w(lo: Index, hi: Index) -> PumpWindow {
        PumpWindow::new(lo, hi).unwrap()
    }

    fn alice(n1: Index, n2: Index, c: OrderChoice) -> AliceKnowledge {
        AliceKnowledge::new(n1, n2, c).unwrap()
    }

    #[test]
    fn alice_first_bits() {
        assert_eq!(alice_first_bit(&alice(6, 8, OrderChoice::LowerFirst)), 0);
        assert_eq!(alice_first_bit(&alice(6, 8, OrderChoice::UpperFirst)), 0);
        assert_eq!(alice_first_bit(&alice(8, 9, OrderChoice::LowerFirst)), 1);
        assert_eq!(alice_first_bit(&alice(7, 9, OrderChoice::LowerFirst)), 1);
        assert_eq!(alice_first_bit(&alice(7, 9, OrderChoice::UpperFirst)), 0);
        assert_eq!(
            alice(7, 9, OrderChoice::LowerFirst).rule(),
            AliceRule::OwnBits
        );
        assert!(AliceKnowledge::new(6, 9, OrderChoice::LowerFirst).is_err());
    }

    #[test]
    fn alice_second_bits() {
        let k = alice(6, 8, OrderChoice::LowerFirst);
        assert_eq!((alice_first_bit(&k), alice_second_bit(&k)), (0, 0));
        assert_eq!(alice_second_bit(&alice(8, 9, OrderChoice::LowerFirst)), 0);
        for n1 in 1..40 {
            for gap in [1, 2] {
                for c in OrderChoice::ALL {
                    let k = alice(n1, n1 + gap, c);
                    if k.rule() == AliceRule::OwnBits {
                        let mut sent = [alice_first_bit(&k), alice_second_bit(&k)];
                        let mut own = [bit_alloc(n1), bit_alloc(n1 + gap)];
                        sent.sort();
                        own.sort();
                        assert_eq!(sent, own);
                    }
                }
            }
        }
    }

    #[test]
    fn bob_replies() {
        let bob = |n| BobKnowledge::new(n).unwrap();
        assert_eq!(bob_response(&bob(6), 0, EdgeConvention::FormulaMod4), 1);
        assert_eq!(bob_response(&bob(6), 1, EdgeConvention::FormulaMod4), 0);
        assert_eq!(bob_response(&bob(5), 1, EdgeConvention::ProseLeftOne), 1);
        assert_eq!(bob_response(&bob(5), 1, EdgeConvention::FormulaMod4), 0);
        assert_eq!(bob_response(&bob(8), 1, EdgeConvention::FormulaMod4), 1);
        assert_eq!(bob_response(&bob(8), 1, EdgeConvention::ProseLeftOne), 0);
        assert_eq!(bob_response(&bob(5), 0, EdgeConvention::ProseLeftOne), 1);
    }

    #[test]
    fn message_order_enforced() {
        let mut a = alice(6, 7, OrderChoice::LowerFirst);
        assert!(a.send_second_bit().is_err());
        assert!(a.receive_bob_bit(1).is_err());
        a.send_first_bit().unwrap();
        assert!(a.send_first_bit().is_err());
        assert!(a.receive_bob_bit(2).is_err());
        a.receive_bob_bit(1).unwrap();
        assert!(a.receive_bob_bit(1).is_err());
        a.send_second_bit().unwrap();

        let mut b = BobKnowledge::new(5).unwrap();
        assert!(b.receive_second_bit(1).is_err());
        b.receive_first_bit(1, EdgeConvention::FormulaMod4).unwrap();
        assert!(b.receive_first_bit(1, EdgeConvention::FormulaMod4).is_err());
        b.receive_second_bit(0).unwrap();
        assert!(b.transcript().is_some());
    }

    #[test]
    fn bob_deduction_cases() {
        let window = w(4, 20);
        let conv = EdgeConvention::FormulaMod4;
        // Bob holds F_5 from pump 6 (Alice (3, 4), bits (0, 0)): rule 2.
        let world = World::new(6, TripleSlot::Largest);
        for c in OrderChoice::ALL {
            let t = forward_transcript(&world, c, conv);
            let set = deduce_bob(&BobKnowledge::new(5).unwrap(), &t, &window, conv).unwrap();
            assert_eq!(set.pumps(), BTreeSet::from([6]));
        }
        // Repeat rule with interior center Bob: pump 9, Bob F_7, Alice (6, 8).
        let world = World::new(9, TripleSlot::Middle);
        let t = forward_transcript(&world, OrderChoice::LowerFirst, conv);
        assert_eq!(t.alice_bit_1, t.alice_bit_2);
        assert_ne!(t.alice_bit_1, bit_alloc(7));
        let set = deduce_bob(&BobKnowledge::new(7).unwrap(), &t, &window, conv).unwrap();
        assert_eq!(set.resolved(), Some(world));
        // A transcript no world produces.
        let all: BTreeSet<Transcript> = TripleSlot::ALL
            .into_iter()
            .flat_map(|s| {
                let w = World::new(7 + s.offset(), s);
                order_choices(w.alice_pair())
                    .iter()
                    .map(move |&c| forward_transcript(&w, c, conv))
            })
            .collect();
        let impossible = (0..8)
            .map(Transcript::from_code)
            .find(|t| !all.contains(t))
            .unwrap();
        assert!(matches!(
            deduce_bob(&BobKnowledge::new(7).unwrap(), &impossible, &window, conv),
            Err(Error::ProtocolViolation(_))
        ));
    }

    #[test]
    fn alice_deduction_cases() {
        let window = w(4, 20);
        let conv = EdgeConvention::FormulaMod4;
        // Discontinuous pair: a single candidate before Bob's bit matters.
        let mut k = alice(6, 8, OrderChoice::LowerFirst);
        let b1 = k.send_first_bit().unwrap();
        let reply = bob_response_for(7, b1, conv);
        assert_eq!(
            deduce_alice(&k, reply, &window, conv).unwrap().pumps(),
            BTreeSet::from([9])
        );
        assert!(deduce_alice(&k, 1 - reply, &window, conv).is_err());
        // (F_6, F_7): Bob holds F_5 (pump 8) or F_8 (pump 9).
        for c in OrderChoice::ALL {
            let mut k = alice(6, 7, c);
            let b1 = k.send_first_bit().unwrap();
            for (pump, bob) in [(8, 5), (9, 8)] {
                let set = deduce_alice(&k, bob_response_for(bob, b1, conv), &window, conv).unwrap();
                assert_eq!(set.pumps(), BTreeSet::from([pump]), "choice {c:?}");
            }
        }
        let unsent = alice(6, 7, OrderChoice::LowerFirst);
        assert!(matches!(
            deduce_alice(&unsent, 0, &window, conv),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn segments() {
        let code = BlockCode::new(8, 1).unwrap();
        let set = |pump| WorldSet {
            candidates: BTreeSet::from([World::new(pump, TripleSlot::Middle)]),
        };
        assert_eq!(derive_key_segment(&set(6), &code).unwrap(), vec![1, 0, 1]);
        assert_eq!(derive_key_segment(&set(4), &code).unwrap(), vec![0, 1, 1]);
        assert_eq!(derive_key_segment(&set(8), &code).unwrap(), vec![1, 1, 1]);
        let two = WorldSet {
            candidates: BTreeSet::from([
                World::new(6, TripleSlot::Middle),
                World::new(7, TripleSlot::Largest),
            ]),
        };
        assert!(matches!(
            derive_key_segment(&two, &code),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn direction_signs() {
        assert_eq!(direction_sign(6), -1);
        assert_eq!(direction_sign(7), 1);
        assert_eq!(direction_sign(4), -1);
        assert_eq!(direction_sign(5), 1);
    }

    #[test]
    fn both_conventions_complete_over_wide_window() {
        let window = w(5, 20);
        let code = BlockCode::new(16, 5).unwrap();
        for conv in EdgeConvention::ALL {
            let report = exhaustive_check(&window, conv, Some(&code));
            assert!(report.is_complete(), "{conv}: {:?}", report.failures);
            assert!(alice_ambiguities(&window, conv).is_empty());
        }
        assert_eq!(
            validated_convention(&window),
            Some(EdgeConvention::FormulaMod4)
        );
    }

    #[test]
    fn repeat_rule_never_mimicked_by_own_bits_for_center_bob() {
        // Two equal Alice bits that both differ from a center Bob's bit only
        // arise from the repeat rule.
        for world in all_worlds(&w(4, 60)) {
            let n3 = world.bob_index();
            if position_class(n3) != Position::Center {
                continue;
            }
            for &c in order_choices(world.alice_pair()) {
                let t = forward_transcript(&world, c, EdgeConvention::FormulaMod4);
                let looks_repeat = t.alice_bit_1 == t.alice_bit_2 && t.alice_bit_1 != bit_alloc(n3);
                let is_repeat = alice_rule(world.alice_pair()) == AliceRule::RepeatComplement;
                assert_eq!(looks_repeat, is_repeat, "{world:?}");
            }
        }
    }

    #[test]
    fn rule_rows_and_replies() {
        let mut seen = BTreeSet::new();
        for conv in EdgeConvention::ALL {
            for world in all_worlds(&w(4, 40)) {
                for &c in order_choices(world.alice_pair()) {
                    let row = classify(&world, c);
                    seen.insert(row);
                    let t = forward_transcript(&world, c, conv);
                    assert_eq!(t.bob_bit, row.prescribed_reply(world.bob_index(), conv));
                }
            }
        }
        assert!(seen.iter().all(|r| RuleRow::all().contains(r)));
        // The repeat rule only ever meets a center Bob whose bit differs.
        let repeat: Vec<_> = seen
            .iter()
            .filter(|r| r.rule == AliceRule::RepeatComplement)
            .collect();
        assert_eq!(
            repeat,
            vec![&RuleRow {
                rule: AliceRule::RepeatComplement,
                bob_position: Position::Center,
                first_bit_matches: false
            }]
        );
        assert_eq!(
            seen.iter().filter(|r| r.rule == AliceRule::OwnBits).count(),
            4
        );
    }

    #[test]
    fn five_situations() {
        let s = alice_situations(6);
        assert_eq!(s.len(), 5);
        let ex: Vec<_> = s.iter().map(|s| s.example).collect();
        assert_eq!(ex, vec![(6, 7), (7, 8), (8, 9), (6, 8), (7, 9)]);
        assert_eq!(s[0].bob_candidates, vec![5, 8]);
        assert_eq!(s[1].alice_classes, "c,e");
        assert_eq!(s[3].bob_candidates, vec![7]);
        assert_eq!(s[4].alice_bits, (1, 0));
    }

    #[test]
    fn convention_round_trip() {
        for c in EdgeConvention::ALL {
            assert_eq!(c.to_string().parse::<EdgeConvention>().unwrap(), c);
            assert_eq!(EdgeConvention::from_wire_code(c.wire_code()), Some(c));
        }
        assert!("sideways".parse::<EdgeConvention>().is_err());
    }
}
