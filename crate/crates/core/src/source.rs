//! Cascaded down-conversion source with Tribonacci-valued OAM sorters.
//!
//! Each emission picks a pump index `n` from the configured window, splits
//! `F_n` into its consecutive triple and hands one member to Bob, the other
//! two to Alice. The OAM values always satisfy `l_b + l_a1 + l_a2 = F_n`.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::rng::{self, Purpose};
use crate::tribo::{tribonacci, CodeTable, Index, Value};
use crate::world::{alice_candidate_pumps, PumpWindow, TripleSlot, World};

pub const DEFAULT_CHECK_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub window: PumpWindow,
    /// Weights over `window.lo..=window.hi`; empty means uniform.
    #[serde(default)]
    pub pump_weights: Vec<f64>,
    /// Weights for Bob receiving `F_{n-1}`, `F_{n-2}`, `F_{n-3}`.
    #[serde(default = "uniform_slots")]
    pub bob_weights: [f64; 3],
    #[serde(default = "default_check_fraction")]
    pub check_fraction: f64,
    pub seed: u64,
}

fn uniform_slots() -> [f64; 3] {
    [1.0; 3]
}

fn default_check_fraction() -> f64 {
    DEFAULT_CHECK_FRACTION
}

impl SourceConfig {
    pub fn uniform(window: PumpWindow, seed: u64) -> Self {
        Self {
            window,
            pump_weights: Vec::new(),
            bob_weights: uniform_slots(),
            check_fraction: DEFAULT_CHECK_FRACTION,
            seed,
        }
    }

    pub fn with_check_fraction(mut self, fraction: f64) -> Self {
        self.check_fraction = fraction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        PumpWindow::new(self.window.lo, self.window.hi)?;
        if !self.pump_weights.is_empty() {
            if self.pump_weights.len() != self.window.len() {
                return Err(config(format!(
                    "{} pump weights for a window of {} pumps",
                    self.pump_weights.len(),
                    self.window.len()
                )));
            }
            check_weights("pump", &self.pump_weights)?;
        }
        check_weights("bob assignment", &self.bob_weights)?;
        if !(0.0..=1.0).contains(&self.check_fraction) {
            return Err(config(format!(
                "check fraction {} outside [0, 1]",
                self.check_fraction
            )));
        }
        Ok(())
    }

    /// Normalised pump probabilities, in window order.
    pub fn pump_probabilities(&self) -> Vec<f64> {
        normalise(&self.pump_weights, self.window.len())
    }

    pub fn slot_probabilities(&self) -> [f64; 3] {
        let p = normalise(&self.bob_weights, 3);
        [p[0], p[1], p[2]]
    }
}

fn check_weights(what: &str, weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(config(format!(
            "{what} weights must be finite and nonnegative"
        )));
    }
    if !weights.iter().any(|w| *w > 0.0) {
        return Err(config(format!("{what} weights are all zero")));
    }
    Ok(())
}

fn normalise(weights: &[f64], len: usize) -> Vec<f64> {
    if weights.is_empty() {
        return vec![1.0 / len as f64; len];
    }
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// One emission of the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleEvent {
    pub round_id: u64,
    pub pump_n: Index,
    pub l_b: Value,
    /// Alice's two values, ascending.
    pub alice_pair: [Value; 2],
    pub check_mode: bool,
}

impl TripleEvent {
    fn from_world(round_id: u64, world: World, check_mode: bool) -> Result<Self> {
        let (n1, n2) = world.alice_pair();
        Ok(Self {
            round_id,
            pump_n: world.pump,
            l_b: tribonacci(world.bob_index())?,
            alice_pair: [tribonacci(n1)?, tribonacci(n2)?],
            check_mode,
        })
    }

    /// Recovers which slot Bob received.
    pub fn world(&self) -> Result<World> {
        TripleSlot::ALL
            .into_iter()
            .map(|slot| World::new(self.pump_n, slot))
            .find(|w| tribonacci(w.bob_index()).ok() == Some(self.l_b))
            .ok_or_else(|| Error::Inconsistent(format!("event {}", self.round_id)))
    }

    pub fn bob_index(&self) -> Result<Index> {
        self.world().map(|w| w.bob_index())
    }

    pub fn alice_indices(&self) -> Result<(Index, Index)> {
        self.world().map(|w| w.alice_pair())
    }
}

/// Validated source with its sampling distributions prepared.
#[derive(Debug, Clone)]
pub struct EventFeed {
    config: SourceConfig,
    pumps: WeightedIndex<f64>,
    slots: WeightedIndex<f64>,
}

impl EventFeed {
    pub fn new(config: SourceConfig) -> Result<Self> {
        config.validate()?;
        // All values the source can emit must be representable.
        tribonacci(config.window.hi)?;
        let pumps = WeightedIndex::new(config.pump_probabilities()).map_err(|e| config_err(&e))?;
        let slots = WeightedIndex::new(config.slot_probabilities()).map_err(|e| config_err(&e))?;
        Ok(Self {
            config,
            pumps,
            slots,
        })
    }

    pub fn config(&self) -> &SourceConfig {
        &self.config
    }

    pub fn window(&self) -> &PumpWindow {
        &self.config.window
    }

    /// The emission for `round_id`; a pure function of seed, config and id.
    pub fn event(&self, round_id: u64) -> TripleEvent {
        let mut rng = rng::stream(self.config.seed, Purpose::SourceEvent, round_id);
        let world = self.sample_world(&mut rng);
        let check_mode = rng.gen_bool(self.config.check_fraction);
        TripleEvent::from_world(round_id, world, check_mode)
            .expect("window was checked against overflow")
    }

    pub fn events(&self, rounds: u64) -> impl Iterator<Item = TripleEvent> + '_ {
        (0..rounds).map(move |r| self.event(r))
    }

    fn sample_world<R: Rng>(&self, rng: &mut R) -> World {
        let pump = self.config.window.lo + self.pumps.sample(rng) as Index;
        let slot = TripleSlot::ALL[self.slots.sample(rng)];
        World::new(pump, slot)
    }

    /// A multi-photon pulse of `k` photons. Each photon is an independent
    /// emission unless `shared_pump` is set, in which case all photons come
    /// from one pump draw (a correlated-source ablation).
    pub fn pulse(&self, pulse_id: u64, k: usize, shared_pump: bool) -> Vec<TripleEvent> {
        let mut rng = rng::stream(self.config.seed, Purpose::Pulse, pulse_id);
        let first = self.sample_world(&mut rng);
        let mut worlds = vec![first];
        for _ in 1..k {
            let w = self.sample_world(&mut rng);
            worlds.push(if shared_pump {
                World::new(first.pump, w.bob_slot)
            } else {
                w
            });
        }
        worlds
            .into_iter()
            .take(k)
            .map(|w| TripleEvent::from_world(pulse_id, w, false).expect("checked window"))
            .collect()
    }
}

fn config_err(e: &dyn std::fmt::Display) -> Error {
    config(format!("bad sampling weights: {e}"))
}

/// OAM sorter: passes positive Tribonacci values present in `table`.
pub fn sorter_filter(value: Value, table: &CodeTable) -> bool {
    value > 0 && table.contains_value(value)
}

/// A real-amplitude superposition over OAM values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OamState {
    terms: Vec<(Value, f64)>,
}

impl OamState {
    pub fn basis(value: Value) -> Self {
        Self {
            terms: vec![(value, 1.0)],
        }
    }

    /// Equal-weight superposition over distinct `values`.
    pub fn uniform(values: &[Value]) -> Self {
        let mut values = values.to_vec();
        values.sort_unstable();
        values.dedup();
        let amp = 1.0 / (values.len() as f64).sqrt();
        Self {
            terms: values.into_iter().map(|v| (v, amp)).collect(),
        }
    }

    pub fn amplitude(&self, value: Value) -> f64 {
        self.terms
            .iter()
            .find(|(v, _)| *v == value)
            .map_or(0.0, |(_, a)| *a)
    }

    pub fn probability(&self, value: Value) -> f64 {
        self.amplitude(value).powi(2)
    }

    pub fn terms(&self) -> &[(Value, f64)] {
        &self.terms
    }

    pub fn overlap(&self, other: &OamState) -> f64 {
        self.terms
            .iter()
            .map(|(v, a)| a * other.amplitude(*v))
            .sum()
    }

    /// Probability that a projective test onto `self` accepts `other`.
    pub fn fidelity(&self, other: &OamState) -> f64 {
        self.overlap(other).powi(2)
    }
}

/// State Bob's photon must be in, given the pair Alice revealed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BobStatePrediction {
    pub support: Vec<Value>,
}

impl BobStatePrediction {
    pub fn probability(&self, value: Value) -> f64 {
        if self.support.contains(&value) {
            1.0 / self.support.len() as f64
        } else {
            0.0
        }
    }

    pub fn state(&self) -> OamState {
        OamState::uniform(&self.support)
    }
}

/// Values Bob may hold when Alice holds `alice_pair`, restricted to pumps
/// inside `window`, with equal amplitudes.
pub fn predict_bob_state(
    alice_pair: [Value; 2],
    table: &CodeTable,
    window: &PumpWindow,
) -> Result<BobStatePrediction> {
    let lookup = |v: Value| {
        table
            .index_of(v)
            .ok_or_else(|| Error::Inconsistent(format!("value {v} is not in the code table")))
    };
    let (a, b) = (lookup(alice_pair[0])?, lookup(alice_pair[1])?);
    let pair = (a.min(b), a.max(b));
    let mut support = Vec::new();
    for pump in alice_candidate_pumps(pair) {
        if !window.contains(pump) {
            continue;
        }
        let bob = (1..=3)
            .map(|k| pump - k)
            .find(|&n| n != pair.0 && n != pair.1)
            .expect("a triple has three members");
        support.push(tribonacci(bob)?);
    }
    if support.is_empty() {
        return Err(Error::Inconsistent(format!(
            "alice pair {{{}, {}}} within window {window}",
            alice_pair[0], alice_pair[1]
        )));
    }
    support.sort_unstable();
    Ok(BobStatePrediction { support })
}
