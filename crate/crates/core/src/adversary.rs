//! What Eve learns from the public transcript, how her intercept-resend
//! attempts show up in check rounds, and why splitting multi-photon pulses
//! gains her nothing.
//!
//! Eve's classical knowledge is the three-bit transcript. Her optimal guess
//! for each transcript is the key with the largest posterior, so her success
//! probability is `sum_t max_k P(k, t)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exchange::{
    alice_first_bit, alice_second_bit, bob_response_for, AliceKnowledge, EdgeConvention,
    OrderChoice, Transcript,
};
use crate::rng::{self, Purpose};
use crate::source::{predict_bob_state, EventFeed, OamState, SourceConfig};
use crate::stats::{mutual_information, wilson_interval};
use crate::tribo::{bit_alloc, tribonacci, CodeTable, Index, Value};
use crate::world::{all_worlds, PumpWindow, World};

/// How the key value is derived from a world, and whether Bob's
/// recognition flag is randomized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KeyStrategy {
    /// Key is the pump value.
    #[serde(rename = "v0")]
    V0PumpSum,
    /// Bob replaces a recognition flag with a coin; in those rounds the key
    /// is `F_{n-3} + F_{n-2}`, otherwise the pump value.
    #[serde(rename = "v1")]
    V1RandomFlag,
    /// Randomized flag as in V1; key combines `F_{n-3}` with another triple
    /// member by sum or product, selected by Bob's index mod 4.
    #[serde(rename = "v2")]
    V2CaseDependent,
    /// V2, keeping only rounds whose transcript has the most candidate keys.
    #[serde(rename = "v3")]
    V3RetainBest,
}

impl KeyStrategy {
    pub const ALL: [KeyStrategy; 4] = [
        KeyStrategy::V0PumpSum,
        KeyStrategy::V1RandomFlag,
        KeyStrategy::V2CaseDependent,
        KeyStrategy::V3RetainBest,
    ];

    pub fn randomizes_flag(self) -> bool {
        self != KeyStrategy::V0PumpSum
    }

    /// Key for `world` given whether Alice's first bit differed from Bob's.
    pub fn key(self, world: &World, recognition: bool) -> Result<Value> {
        let [hi, mid, lo] = world.triple_indices().map(tribonacci);
        let (hi, mid, lo) = (hi?, mid?, lo?);
        let overflow = || Error::Overflow { index: world.pump };
        match self {
            KeyStrategy::V0PumpSum => tribonacci(world.pump),
            KeyStrategy::V1RandomFlag if recognition => Ok(lo + mid),
            KeyStrategy::V1RandomFlag => tribonacci(world.pump),
            KeyStrategy::V2CaseDependent | KeyStrategy::V3RetainBest => match world.bob_index() % 4
            {
                0 => Ok(lo + mid),
                1 => Ok(lo + hi),
                2 => lo.checked_mul(mid).ok_or_else(overflow),
                _ => lo.checked_mul(hi).ok_or_else(overflow),
            },
        }
    }
}

impl fmt::Display for KeyStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KeyStrategy::V0PumpSum => "v0",
            KeyStrategy::V1RandomFlag => "v1",
            KeyStrategy::V2CaseDependent => "v2",
            KeyStrategy::V3RetainBest => "v3",
        })
    }
}

impl FromStr for KeyStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KeyStrategy::ALL
            .into_iter()
            .find(|k| k.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?} (expected v0..v3)")))
    }
}

/// One fully specified scenario: world plus every latent coin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnumeratedWorld {
    pub world: World,
    pub order: OrderChoice,
    /// Bob's coin when his flag is randomized; irrelevant coins are still
    /// enumerated so every world has the same number of latent combinations.
    pub flag_coin: Option<u8>,
    pub probability: f64,
    pub transcript: Transcript,
    pub key: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldDistribution {
    pub strategy: KeyStrategy,
    pub window: PumpWindow,
    pub convention: EdgeConvention,
    pub worlds: Vec<EnumeratedWorld>,
}

impl WorldDistribution {
    /// Joint `P(key, transcript)`.
    pub fn joint(&self) -> BTreeMap<Transcript, BTreeMap<Value, f64>> {
        let mut out: BTreeMap<Transcript, BTreeMap<Value, f64>> = BTreeMap::new();
        for w in &self.worlds {
            *out.entry(w.transcript)
                .or_default()
                .entry(w.key)
                .or_default() += w.probability;
        }
        out
    }

    pub fn total_probability(&self) -> f64 {
        self.worlds.iter().map(|w| w.probability).sum()
    }

    /// Number of (party view, transcript) combinations that leave a party
    /// with more than one candidate key. Zero means both parties can always
    /// derive the key.
    pub fn party_ambiguity(&self) -> usize {
        let mut bob: BTreeMap<(Index, Transcript), BTreeSet<Value>> = BTreeMap::new();
        let mut alice: BTreeMap<((Index, Index), Transcript), BTreeSet<Value>> = BTreeMap::new();
        for w in self.worlds.iter().filter(|w| w.probability > 0.0) {
            bob.entry((w.world.bob_index(), w.transcript))
                .or_default()
                .insert(w.key);
            alice
                .entry((w.world.alice_pair(), w.transcript))
                .or_default()
                .insert(w.key);
        }
        bob.values()
            .chain(alice.values())
            .filter(|s| s.len() > 1)
            .count()
    }
}

/// Forward-simulates every world and latent coin in the source window.
pub fn enumerate_worlds(
    source: &SourceConfig,
    strategy: KeyStrategy,
    convention: EdgeConvention,
) -> Result<WorldDistribution> {
    source.validate()?;
    let window = source.window;
    let pumps = source.pump_probabilities();
    let slots = source.slot_probabilities();
    let coins: &[Option<u8>] = if strategy.randomizes_flag() {
        &[Some(0), Some(1)]
    } else {
        &[None]
    };
    let mut worlds = Vec::new();
    for world in all_worlds(&window) {
        let slot_idx = (world.bob_slot.offset() - 1) as usize;
        let prior = pumps[(world.pump - window.lo) as usize] * slots[slot_idx];
        let n3 = world.bob_index();
        for order in OrderChoice::ALL {
            let alice = AliceKnowledge::from_world(&world, order);
            let b1 = alice_first_bit(&alice);
            let b2 = alice_second_bit(&alice);
            let recognition = b1 != bit_alloc(n3);
            let key = strategy.key(&world, recognition)?;
            for &coin in coins {
                let bob_bit = match coin {
                    Some(c) if recognition => c,
                    _ => bob_response_for(n3, b1, convention),
                };
                worlds.push(EnumeratedWorld {
                    world,
                    order,
                    flag_coin: coin,
                    probability: prior / (2 * coins.len()) as f64,
                    transcript: Transcript::new(b1, bob_bit, b2),
                    key,
                });
            }
        }
    }
    let mut dist = WorldDistribution {
        strategy,
        window,
        convention,
        worlds,
    };
    if strategy == KeyStrategy::V3RetainBest {
        let retained = retained_transcript(&dist).expect("nonempty window");
        dist.worlds.retain(|w| w.transcript == retained);
        let total = dist.total_probability();
        for w in &mut dist.worlds {
            w.probability /= total;
        }
    }
    Ok(dist)
}

/// Transcript class with the most distinct candidate keys; ties go to the
/// larger transcript code.
pub fn retained_transcript(dist: &WorldDistribution) -> Option<Transcript> {
    dist.joint()
        .into_iter()
        .max_by_key(|(t, keys)| (keys.len(), *t))
        .map(|(t, _)| t)
}

/// Bayes-optimal success probability `sum_t max_k P(k, t)`.
pub fn eve_guess_rate(dist: &WorldDistribution) -> f64 {
    let total = dist.total_probability();
    dist.joint()
        .values()
        .map(|keys| keys.values().copied().fold(0.0, f64::max))
        .sum::<f64>()
        / total
}

/// Unweighted mean over transcripts of `1 / |candidate keys|`.
pub fn naive_guess_rate(dist: &WorldDistribution) -> f64 {
    let joint = dist.joint();
    if joint.is_empty() {
        return 0.0;
    }
    joint.values().map(|k| 1.0 / k.len() as f64).sum::<f64>() / joint.len() as f64
}

/// `9 / (10 (N + 1))`.
pub fn guess_rate_formula(set_size: u32) -> Result<f64> {
    if set_size < 2 {
        return Err(Error::Domain(format!("set size {set_size} < 2")));
    }
    Ok(9.0 / (10.0 * (set_size as f64 + 1.0)))
}

/// Information per photon: `log2 N` for the plain key, and the inverse of
/// the guessing-rate formula for the retained variant.
pub fn entropy_per_photon(set_size: u32, strategy: KeyStrategy) -> Result<f64> {
    match strategy {
        KeyStrategy::V3RetainBest => Ok(-guess_rate_formula(set_size)?.log2()),
        _ if set_size < 2 => Err(Error::Domain(format!("set size {set_size} < 2"))),
        _ => Ok((set_size as f64).log2()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRow {
    pub bits: String,
    pub keys: Vec<Value>,
    /// `P(k | t)` for each key, in the order of `keys`.
    pub posterior: Vec<f64>,
    pub probability: f64,
    pub best_guess_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveReport {
    pub variant: KeyStrategy,
    pub window: PumpWindow,
    pub convention: EdgeConvention,
    pub world_count: usize,
    pub transcripts: Vec<TranscriptRow>,
    pub average_rate: f64,
    pub naive_rate: f64,
    pub formula_rate: f64,
    pub party_ambiguity: usize,
    pub retained_transcript: Option<String>,
    pub detection_probability: Option<f64>,
}

pub fn eve_report(dist: &WorldDistribution, set_size: u32) -> Result<EveReport> {
    let total = dist.total_probability();
    let transcripts = dist
        .joint()
        .into_iter()
        .map(|(t, keys)| {
            let p_t: f64 = keys.values().sum();
            TranscriptRow {
                bits: t.to_string(),
                keys: keys.keys().copied().collect(),
                posterior: keys.values().map(|p| p / p_t).collect(),
                probability: p_t / total,
                best_guess_p: keys.values().copied().fold(0.0, f64::max) / p_t,
            }
        })
        .collect();
    Ok(EveReport {
        variant: dist.strategy,
        window: dist.window,
        convention: dist.convention,
        world_count: dist.worlds.len(),
        transcripts,
        average_rate: eve_guess_rate(dist),
        naive_rate: naive_guess_rate(dist),
        formula_rate: guess_rate_formula(set_size)?,
        party_ambiguity: dist.party_ambiguity(),
        retained_transcript: (dist.strategy == KeyStrategy::V3RetainBest)
            .then(|| dist.worlds.first().map(|w| w.transcript.to_string()))
            .flatten(),
        detection_probability: None,
    })
}

/// Smallest pump window whose pump values cover every value in `keys`.
pub fn covering_window(
    keys: impl IntoIterator<Item = Value>,
    table: &CodeTable,
) -> Result<PumpWindow> {
    let idx: Vec<Index> = keys
        .into_iter()
        .map(|k| {
            table
                .index_of(k)
                .ok_or_else(|| Error::Domain(format!("{k} is not a tribonacci value")))
        })
        .collect::<Result<_>>()?;
    let lo = *idx
        .iter()
        .min()
        .ok_or_else(|| Error::Domain("no keys".into()))?;
    PumpWindow::new(lo, *idx.iter().max().unwrap())
}

/// Eve's behaviour on Bob's photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EveStrategy {
    Passthrough,
    /// Measure the OAM value and resend that basis state.
    ResendMeasuredValue,
    /// Measure the OAM value, then resend the superposition Bob would hold
    /// for one of the Alice pairs compatible with that value.
    ResendRandomSuperposition,
}

impl FromStr for EveStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "passthrough" | "none" => Ok(EveStrategy::Passthrough),
            "resend_measured_value" | "measured" => Ok(EveStrategy::ResendMeasuredValue),
            "resend_random_superposition" | "superposition" => {
                Ok(EveStrategy::ResendRandomSuperposition)
            }
            _ => Err(Error::Config(format!("unknown eve strategy {s:?}"))),
        }
    }
}

impl fmt::Display for EveStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EveStrategy::Passthrough => "passthrough",
            EveStrategy::ResendMeasuredValue => "resend_measured_value",
            EveStrategy::ResendRandomSuperposition => "resend_random_superposition",
        })
    }
}

/// States Eve might resend after reading `value`, each equally likely.
fn resend_options(
    strategy: EveStrategy,
    value: Value,
    table: &CodeTable,
    window: &PumpWindow,
) -> Result<Vec<OamState>> {
    match strategy {
        EveStrategy::Passthrough => Err(Error::State("passthrough does not resend".into())),
        EveStrategy::ResendMeasuredValue => Ok(vec![OamState::basis(value)]),
        EveStrategy::ResendRandomSuperposition => {
            let m = table
                .index_of(value)
                .ok_or_else(|| Error::Domain(format!("{value} not in table")))?;
            let mut out = Vec::new();
            for pump in (m + 1..=m + 3).filter(|p| window.contains(*p)) {
                let world = World::from_bob_index(pump, m).expect("offset 1..=3");
                let (a, b) = world.alice_pair();
                let pred = predict_bob_state([tribonacci(a)?, tribonacci(b)?], table, window)?;
                out.push(pred.state());
            }
            Ok(out)
        }
    }
}

/// Probability that one check event fails, averaged over Eve's randomness.
fn check_failure_probability(
    strategy: EveStrategy,
    alice_pair: [Value; 2],
    table: &CodeTable,
    window: &PumpWindow,
) -> Result<f64> {
    if strategy == EveStrategy::Passthrough {
        return Ok(0.0);
    }
    let expected = predict_bob_state(alice_pair, table, window)?.state();
    let mut fail = 0.0;
    for &(v, amp) in expected.terms() {
        let options = resend_options(strategy, v, table, window)?;
        let pass: f64 =
            options.iter().map(|s| expected.fidelity(s)).sum::<f64>() / options.len() as f64;
        fail += amp * amp * (1.0 - pass);
    }
    Ok(fail.clamp(0.0, 1.0))
}

/// Exact mean per-event failure probability under the source priors.
pub fn expected_disturbance(strategy: EveStrategy, source: &SourceConfig) -> Result<f64> {
    let window = source.window;
    let table = CodeTable::new(window.hi)?;
    let pumps = source.pump_probabilities();
    let slots = source.slot_probabilities();
    let mut total = 0.0;
    for world in all_worlds(&window) {
        let p = pumps[(world.pump - window.lo) as usize]
            * slots[(world.bob_slot.offset() - 1) as usize];
        let (a, b) = world.alice_pair();
        total += p * check_failure_probability(
            strategy,
            [tribonacci(a)?, tribonacci(b)?],
            &table,
            &window,
        )?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub strategy: EveStrategy,
    pub check_rounds: u64,
    pub trials: u64,
    pub detected_trials: u64,
    /// Fraction of trials with at least one failed check; `None` without check rounds.
    pub detection_rate: Option<f64>,
    pub wilson_lower: f64,
    pub wilson_upper: f64,
    pub alpha: f64,
    /// Fraction of individual check events that failed.
    pub per_event_rate: Option<f64>,
    pub expected_per_event: f64,
    /// `1 - (1 - p)^m` with `p` the expected per-event failure probability.
    pub analytic_detection: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub source: SourceConfig,
    pub check_rounds: u64,
    pub trials: u64,
    pub alpha: f64,
}

/// Monte Carlo of check rounds under `strategy`. A check round reveals
/// Alice's pair and projects Bob's photon onto the state predicted for it;
/// a trial detects Eve when any of its `check_rounds` projections fails.
pub fn intercept_resend_sim(
    cfg: &DetectionConfig,
    strategy: EveStrategy,
) -> Result<DetectionReport> {
    if cfg.trials == 0 {
        return Err(Error::Domain("trials must be >= 1".into()));
    }
    let feed = EventFeed::new(cfg.source.clone())?;
    let window = cfg.source.window;
    let table = CodeTable::new(window.hi)?;
    let m = cfg.check_rounds;
    let per_trial: Vec<(bool, u64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| -> Result<(bool, u64)> {
            let mut rng = rng::stream(cfg.source.seed, Purpose::Trial, trial);
            let mut failures = 0;
            for i in 0..m {
                let ev = feed.event(trial * m + i);
                if strategy == EveStrategy::Passthrough {
                    continue;
                }
                let expected = predict_bob_state(ev.alice_pair, &table, &window)?.state();
                // Eve reads a value from the state Bob's photon is tested against.
                let mut u: f64 = rng.gen();
                let mut read = expected.terms()[expected.terms().len() - 1].0;
                for &(v, a) in expected.terms() {
                    if u < a * a {
                        read = v;
                        break;
                    }
                    u -= a * a;
                }
                let options = resend_options(strategy, read, &table, &window)?;
                let resent = &options[rng.gen_range(0..options.len())];
                let pass = expected.fidelity(resent);
                if pass < 1.0 - 1e-12 && rng.gen::<f64>() >= pass {
                    failures += 1;
                }
            }
            Ok((failures > 0, failures))
        })
        .collect::<Result<_>>()?;
    let detected = per_trial.iter().filter(|(d, _)| *d).count() as u64;
    let failed_events: u64 = per_trial.iter().map(|(_, f)| f).sum();
    let (lo, hi) = wilson_interval(detected, cfg.trials, cfg.alpha);
    let p = expected_disturbance(strategy, &cfg.source)?;
    Ok(DetectionReport {
        strategy,
        check_rounds: m,
        trials: cfg.trials,
        detected_trials: detected,
        detection_rate: (m > 0).then(|| detected as f64 / cfg.trials as f64),
        wilson_lower: lo,
        wilson_upper: hi,
        alpha: cfg.alpha,
        per_event_rate: (m > 0).then(|| failed_events as f64 / (m * cfg.trials) as f64),
        expected_per_event: p,
        analytic_detection: 1.0 - (1.0 - p).powf(m as f64),
    })
}

/// Detection reports for each check-round count in `check_rounds`.
pub fn detection_sweep(
    base: &DetectionConfig,
    strategy: EveStrategy,
    check_rounds: &[u64],
) -> Result<Vec<DetectionReport>> {
    check_rounds
        .iter()
        .map(|&m| {
            intercept_resend_sim(
                &DetectionConfig {
                    check_rounds: m,
                    ..base.clone()
                },
                strategy,
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnsReport {
    pub photons_per_pulse: usize,
    pub trials: u64,
    pub shared_pump: bool,
    /// Plug-in mutual information, in bits, between the siphoned photon's
    /// value and the value of one of its pulse-mates.
    pub mutual_information_bits: f64,
}

/// Eve siphons the first photon of each `k`-photon pulse and compares its
/// value with a pulse-mate's.
pub fn pns_immunity_stat(
    source: &SourceConfig,
    k: usize,
    trials: u64,
    shared_pump: bool,
) -> Result<PnsReport> {
    let report = |mi| PnsReport {
        photons_per_pulse: k,
        trials,
        shared_pump,
        mutual_information_bits: mi,
    };
    if k < 2 {
        return Ok(report(0.0));
    }
    let feed = EventFeed::new(source.clone())?;
    let samples: Vec<(Value, Value)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let pulse = feed.pulse(t, k, shared_pump);
            (pulse[0].l_b, pulse[1].l_b)
        })
        .collect();
    Ok(report(mutual_information(&samples)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn src(lo: Index, hi: Index) -> SourceConfig {
        SourceConfig::uniform(PumpWindow::new(lo, hi).unwrap(), 1)
    }

    fn v0(lo: Index, hi: Index) -> WorldDistribution {
        enumerate_worlds(
            &src(lo, hi),
            KeyStrategy::V0PumpSum,
            EdgeConvention::FormulaMod4,
        )
        .unwrap()
    }

    fn keys_for(dist: &WorldDistribution, bits: &str) -> BTreeSet<Value> {
        dist.joint()
            .into_iter()
            .find(|(t, _)| t.to_string() == bits)
            .map(|(_, k)| k.into_keys().collect())
            .unwrap_or_default()
    }

    #[test]
    fn world_count_is_product() {
        let d = v0(4, 11);
        assert_eq!(d.worlds.len(), 8 * 3 * 2);
        assert!((d.total_probability() - 1.0).abs() < 1e-12);
        let d1 = enumerate_worlds(
            &src(4, 11),
            KeyStrategy::V1RandomFlag,
            EdgeConvention::FormulaMod4,
        )
        .unwrap();
        assert_eq!(d1.worlds.len(), 8 * 3 * 4);
    }

    #[test]
    fn small_transcript_sets() {
        let d = v0(4, 11);
        assert!(keys_for(&d, "000").is_superset(&BTreeSet::from([6, 11])));
        assert!(keys_for(&d, "010").is_superset(&BTreeSet::from([11, 20, 68, 125, 423])));
    }

    #[test]
    fn v0_keeps_parties_unambiguous() {
        assert_eq!(v0(4, 11).party_ambiguity(), 0);
        assert_eq!(v0(5, 20).party_ambiguity(), 0);
    }

    #[test]
    fn degenerate_distribution() {
        let d = v0(4, 4);
        let single = WorldDistribution {
            worlds: vec![EnumeratedWorld {
                probability: 1.0,
                ..d.worlds[0]
            }],
            ..d
        };
        assert_eq!(eve_guess_rate(&single), 1.0);
    }

    #[test]
    fn formulas() {
        assert!((guess_rate_formula(8).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(guess_rate_formula(89).unwrap(), 0.01);
        assert!(guess_rate_formula(1).is_err());
        assert_eq!(entropy_per_photon(8, KeyStrategy::V0PumpSum).unwrap(), 3.0);
        for n in [2, 8, 480, 1024] {
            let h = entropy_per_photon(n, KeyStrategy::V3RetainBest).unwrap();
            let r = guess_rate_formula(n).unwrap();
            assert!((h.exp2() * r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn v3_conditions_on_one_class() {
        let d = enumerate_worlds(
            &src(4, 11),
            KeyStrategy::V3RetainBest,
            EdgeConvention::FormulaMod4,
        )
        .unwrap();
        assert_eq!(d.joint().len(), 1);
        assert!((d.total_probability() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strategy_names() {
        for k in KeyStrategy::ALL {
            assert_eq!(k.to_string().parse::<KeyStrategy>().unwrap(), k);
        }
        assert_eq!(
            "V2".parse::<KeyStrategy>().unwrap(),
            KeyStrategy::V2CaseDependent
        );
        assert_eq!(
            "measured".parse::<EveStrategy>().unwrap(),
            EveStrategy::ResendMeasuredValue
        );
    }

    #[test]
    fn measured_resend_halves_adjacent_pass() {
        // Alice reveals (3, 6): Bob should hold 2 or 11 in equal superposition.
        let w = PumpWindow::new(4, 20).unwrap();
        let t = CodeTable::new(20).unwrap();
        let p =
            check_failure_probability(EveStrategy::ResendMeasuredValue, [3, 6], &t, &w).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        // A discontinuous pair pins Bob's value; a basis resend is invisible.
        let p =
            check_failure_probability(EveStrategy::ResendMeasuredValue, [3, 11], &t, &w).unwrap();
        assert!(p.abs() < 1e-12);
        assert_eq!(
            check_failure_probability(EveStrategy::Passthrough, [3, 6], &t, &w).unwrap(),
            0.0
        );
    }

    #[test]
    fn detection_zero_rounds_undefined() {
        let cfg = DetectionConfig {
            source: src(4, 11),
            check_rounds: 0,
            trials: 5,
            alpha: 0.001,
        };
        let r = intercept_resend_sim(&cfg, EveStrategy::ResendMeasuredValue).unwrap();
        assert_eq!(r.detection_rate, None);
    }

    #[test]
    fn detection_matches_analytic_rate() {
        let cfg = DetectionConfig {
            source: src(4, 11),
            check_rounds: 1,
            trials: 20_000,
            alpha: 0.001,
        };
        for s in [
            EveStrategy::ResendMeasuredValue,
            EveStrategy::ResendRandomSuperposition,
        ] {
            let r = intercept_resend_sim(&cfg, s).unwrap();
            let got = r.detection_rate.unwrap();
            let sd = (r.expected_per_event * (1.0 - r.expected_per_event) / 20_000.0).sqrt();
            assert!(
                (got - r.expected_per_event).abs() < 4.0 * sd + 1e-9,
                "{s}: {got} vs {}",
                r.expected_per_event
            );
        }
    }

    #[test]
    fn pns_trivial_cases() {
        assert_eq!(
            pns_immunity_stat(&src(4, 11), 1, 100, false)
                .unwrap()
                .mutual_information_bits,
            0.0
        );
        let shared = pns_immunity_stat(&src(4, 11), 2, 20_000, true).unwrap();
        assert!(shared.mutual_information_bits > 0.5);
    }

    proptest! {
        #[test]
        fn bayes_rule_beats_any_fixed_guess(choice in proptest::collection::vec(any::<u16>(), 8), v in 0usize..3) {
            let strategy = [KeyStrategy::V0PumpSum, KeyStrategy::V1RandomFlag, KeyStrategy::V2CaseDependent][v];
            let d = enumerate_worlds(&src(4, 11), strategy, EdgeConvention::FormulaMod4).unwrap();
            let joint = d.joint();
            let mut success = 0.0;
            for (i, keys) in joint.values().enumerate() {
                let ks: Vec<&f64> = keys.values().collect();
                success += ks[choice[i % 8] as usize % ks.len()];
            }
            prop_assert!(success <= eve_guess_rate(&d) + 1e-12);
        }
    }
}
