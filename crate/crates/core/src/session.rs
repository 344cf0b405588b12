//! Two-peer sessions over a framed duplex byte stream.
//!
//! Only classical bits cross the transport. The photons are simulated on
//! each side from a shared-seed [`EventFeed`], which stands in for the
//! entangled source.
//!
//! Message flow:
//!
//! ```text
//! Alice                        Bob
//!   HELLO ------------------->
//!         <------------------- HELLO (echo) | ABORT(parameter mismatch)
//!   per round r:
//!   ROUND_OPEN(r) ----------->
//!   check round:
//!   CHECK_REVEAL(r, a1, a2) ->
//!         <------------------- CHECK_RESULT(r, pass)
//!   key round:
//!   ALICE_BIT1(r, b1) ------->
//!         <------------------- BOB_RESPONSE(r, bb)
//!   ALICE_BIT2(r, b2) ------->
//!   KEY_CONFIRM(tag) -------->
//!         <------------------- KEY_CONFIRM(tag) | ABORT(key mismatch)
//! ```
//!
//! The confirmation tag binds the key digest to the public transcript each
//! side observed, so a flipped bit is caught even in a round that produced
//! no key material.

use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::{config, Error, Result};
use crate::exchange::{
    deduce_alice, deduce_bob, derive_key_segment, play_round, AliceKnowledge, BobKnowledge,
    EdgeConvention, OrderChoice, WorldSet,
};
use crate::rng::{self, Purpose};
use crate::source::{predict_bob_state, EventFeed, SourceConfig, TripleEvent};
use crate::tribo::{BlockCode, CodeTable, Index};
use crate::wire::{
    decode_frame, decode_header, encode_frame, hex, AbortReason, Frame, Hello, Message, WireError,
    DIGEST_LEN, DIGEST_SHA256, HEADER_LEN,
};
use crate::world::PumpWindow;

pub const DEFAULT_ROUND_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Alice,
    Bob,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub session_id: u32,
    /// Number of values in the block code; a power of two.
    pub set_size: u32,
    /// Index of the value the block code maps to all zeros.
    pub code_base: Index,
    pub source: SourceConfig,
    pub rounds: u32,
    pub convention: EdgeConvention,
    #[serde(with = "millis")]
    pub round_timeout: Duration,
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

/// Default pump window for a block code of `set_size` values: the first
/// `set_size` pumps starting at 4.
pub fn default_window(set_size: u32) -> Result<PumpWindow> {
    if set_size < 1 {
        return Err(config("set size must be positive"));
    }
    PumpWindow::new(4, 3 + set_size)
}

impl SessionConfig {
    /// Window defaults to [`default_window`]; the code starts at the window.
    pub fn new(set_size: u32, window: Option<PumpWindow>, rounds: u32, seed: u64) -> Result<Self> {
        let window = match window {
            Some(w) => w,
            None => default_window(set_size)?,
        };
        let cfg = Self {
            session_id: 1,
            set_size,
            code_base: window.lo,
            source: SourceConfig::uniform(window, seed),
            rounds,
            convention: EdgeConvention::default(),
            round_timeout: DEFAULT_ROUND_TIMEOUT,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn window(&self) -> PumpWindow {
        self.source.window
    }

    pub fn seed(&self) -> u64 {
        self.source.seed
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        let code = self.block_code()?;
        let w = self.window();
        if !(code.covers_index(w.lo) && code.covers_index(w.hi)) {
            return Err(config(format!(
                "window {w} is not covered by the code [{}, {}]",
                code.base_index(),
                code.top_index()
            )));
        }
        if w.hi > u16::MAX as Index || self.set_size > u16::MAX as u32 {
            return Err(config("window and set size must fit in 16 bits"));
        }
        EventFeed::new(self.source.clone())?;
        Ok(())
    }

    pub fn block_code(&self) -> Result<BlockCode> {
        BlockCode::new(self.set_size, self.code_base)
    }

    /// SHA-256 of the serialized source configuration.
    pub fn config_digest(&self) -> [u8; DIGEST_LEN] {
        let bytes = serde_json::to_vec(&self.source).expect("source config serializes");
        Sha256::digest(&bytes).into()
    }

    pub fn hello(&self) -> Hello {
        let w = self.window();
        Hello {
            digest_alg: DIGEST_SHA256,
            convention: self.convention,
            set_size: self.set_size as u16,
            code_base: self.code_base as u16,
            window_lo: w.lo as u16,
            window_hi: w.hi as u16,
            rounds: self.rounds,
            check_fraction_ppm: (self.source.check_fraction * 1e6).round() as u32,
            seed: self.seed(),
            config_digest: self.config_digest(),
        }
    }
}

/// Agreed key bits with their digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyMaterial {
    pub bits: Vec<u8>,
    pub segments: usize,
    pub digest: String,
}

impl KeyMaterial {
    pub fn from_bits(bits: Vec<u8>, segments: usize) -> Self {
        let digest = hex(&key_digest(&bits));
        Self {
            bits,
            segments,
            digest,
        }
    }
}

/// SHA-256 over the bit count (u64 big-endian) followed by the bits packed
/// most significant first.
pub fn key_digest(bits: &[u8]) -> [u8; DIGEST_LEN] {
    let mut h = Sha256::new();
    h.update((bits.len() as u64).to_be_bytes());
    for chunk in bits.chunks(8) {
        let byte = chunk
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, b)| acc | ((b & 1) << (7 - i)));
        h.update([byte]);
    }
    h.finalize().into()
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("transport closed")]
    Closed,

    #[error("no message within the round timeout")]
    Timeout,

    #[error("i/o: {0}")]
    Io(#[from] io::Error),

    #[error("wire: {0}")]
    Wire(#[from] WireError),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error(transparent)]
    Config(#[from] Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundMode {
    Key,
    Check,
    /// Resolved but not interior, or unresolved: no key bits.
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_id: u32,
    pub mode: RoundMode,
    /// Three bits for key rounds; check result for check rounds.
    pub public: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Aborted { reason: String, by_peer: bool },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionReport {
    pub role: Role,
    pub session_id: u32,
    pub rounds_played: u32,
    pub key_rounds: u32,
    pub check_rounds: u32,
    pub check_failures: u32,
    pub discarded_rounds: u32,
    pub key_bits: usize,
    pub digest: Option<String>,
    pub outcome: Outcome,
    pub trace: Vec<RoundRecord>,
}

impl SessionReport {
    fn new(role: Role, session_id: u32) -> Self {
        Self {
            role,
            session_id,
            rounds_played: 0,
            key_rounds: 0,
            check_rounds: 0,
            check_failures: 0,
            discarded_rounds: 0,
            key_bits: 0,
            digest: None,
            outcome: Outcome::Completed,
            trace: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionOutput {
    /// Present only when the session completed with matching digests.
    pub key: Option<KeyMaterial>,
    pub report: SessionReport,
}

impl SessionOutput {
    pub fn aborted(&self) -> bool {
        !matches!(self.report.outcome, Outcome::Completed)
    }
}

struct Channel<'a, T: Read + Write> {
    io: &'a mut T,
    session_id: u32,
}

impl<T: Read + Write> Channel<'_, T> {
    fn send(&mut self, m: &Message) -> std::result::Result<(), SessionError> {
        self.io.write_all(&m.encode(self.session_id))?;
        self.io.flush()?;
        Ok(())
    }

    fn recv(&mut self) -> std::result::Result<Message, SessionError> {
        let (frame, sid) = read_frame(self.io)?;
        if sid != self.session_id {
            return Err(SessionError::Protocol(format!(
                "frame for session {sid}, expected {}",
                self.session_id
            )));
        }
        Ok(Message::from_frame(&frame)?)
    }
}

/// Reads one whole frame.
pub fn read_frame<R: Read>(r: &mut R) -> std::result::Result<(Frame, u32), SessionError> {
    let mut header = [0u8; HEADER_LEN];
    read_exact(r, &mut header)?;
    let (msg_type, session_id, len) = decode_header(&header)?;
    let mut payload = vec![0u8; len];
    read_exact(r, &mut payload)?;
    Ok((Frame::new(msg_type, session_id, payload), session_id))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> std::result::Result<(), SessionError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof
        | io::ErrorKind::BrokenPipe
        | io::ErrorKind::ConnectionReset => SessionError::Closed,
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => SessionError::Timeout,
        _ => SessionError::Io(e),
    })
}

enum Stop {
    /// We abort and tell the peer.
    Abort(AbortReason, String),
    /// The peer aborted.
    PeerAbort(AbortReason),
    Error(SessionError),
}

impl From<SessionError> for Stop {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Protocol(m) => Stop::Abort(AbortReason::ProtocolViolation, m),
            SessionError::Timeout => Stop::Abort(AbortReason::Timeout, "round timeout".into()),
            SessionError::Wire(w) => Stop::Abort(AbortReason::ProtocolViolation, w.to_string()),
            other => Stop::Error(other),
        }
    }
}

fn violation(expected: &str, got: &Message) -> Stop {
    match got {
        Message::Abort { reason } => Stop::PeerAbort(*reason),
        other => Stop::Abort(
            AbortReason::ProtocolViolation,
            format!("expected {expected}, got {:?}", other.msg_type()),
        ),
    }
}

/// Accumulates segments for one party.
struct KeyBuilder {
    code: BlockCode,
    window: PumpWindow,
    bits: Vec<u8>,
    segments: usize,
}

impl KeyBuilder {
    fn new(cfg: &SessionConfig) -> Result<Self> {
        Ok(Self {
            code: cfg.block_code()?,
            window: cfg.window(),
            bits: Vec::new(),
            segments: 0,
        })
    }

    /// Appends the segment when the world is resolved and interior.
    fn absorb(&mut self, set: &WorldSet) -> Result<bool> {
        match set.resolved() {
            Some(w) if w.is_interior(&self.window) => {
                self.bits.extend(derive_key_segment(set, &self.code)?);
                self.segments += 1;
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    fn finish(self) -> KeyMaterial {
        KeyMaterial::from_bits(self.bits, self.segments)
    }
}

fn order_choice(seed: u64, round: u32) -> OrderChoice {
    OrderChoice::from_coin(rng::stream(seed, Purpose::AliceOrder, round as u64).gen_bool(0.5))
}

fn check_passes(
    ev: &TripleEvent,
    revealed: [u64; 2],
    table: &CodeTable,
    window: &PumpWindow,
) -> bool {
    predict_bob_state(revealed, table, window)
        .map(|p| p.probability(ev.l_b) > 0.0)
        .unwrap_or(false)
}

/// Runs one side of a session to completion. Never panics on peer input.
pub fn run_session<T: Read + Write>(
    role: Role,
    transport: &mut T,
    feed: &EventFeed,
    cfg: &SessionConfig,
) -> SessionOutput {
    let mut report = SessionReport::new(role, cfg.session_id);
    let mut ch = Channel {
        io: transport,
        session_id: cfg.session_id,
    };
    let result = match role {
        Role::Alice => alice_loop(&mut ch, feed, cfg, &mut report),
        Role::Bob => bob_loop(&mut ch, feed, cfg, &mut report),
    };
    report.session_id = ch.session_id;
    match result {
        Ok(key) => {
            report.key_bits = key.bits.len();
            report.digest = Some(key.digest.clone());
            SessionOutput {
                key: Some(key),
                report,
            }
        }
        Err(stop) => {
            report.outcome = match stop {
                Stop::Abort(reason, msg) => {
                    let _ = ch.send(&Message::Abort { reason });
                    Outcome::Aborted {
                        reason: format!("{reason:?}: {msg}"),
                        by_peer: false,
                    }
                }
                Stop::PeerAbort(reason) => Outcome::Aborted {
                    reason: format!("{reason:?}"),
                    by_peer: true,
                },
                Stop::Error(e) => Outcome::Failed {
                    error: e.to_string(),
                },
            };
            SessionOutput { key: None, report }
        }
    }
}

fn alice_loop<T: Read + Write>(
    ch: &mut Channel<'_, T>,
    feed: &EventFeed,
    cfg: &SessionConfig,
    report: &mut SessionReport,
) -> std::result::Result<KeyMaterial, Stop> {
    let cfg_err = |e: Error| Stop::Error(SessionError::Config(e));
    let window = cfg.window();
    let mut key = KeyBuilder::new(cfg).map_err(cfg_err)?;
    let hello = cfg.hello();
    ch.send(&Message::Hello(hello.clone()))?;
    match ch.recv()? {
        Message::Hello(echo) if echo == hello => {}
        Message::Hello(_) => {
            return Err(Stop::Abort(
                AbortReason::ParameterMismatch,
                "HELLO echo differs".into(),
            ))
        }
        other => return Err(violation("HELLO", &other)),
    }
    for r in 0..cfg.rounds {
        let ev = feed.event(r as u64);
        ch.send(&Message::RoundOpen { round_id: r })?;
        if ev.check_mode {
            report.check_rounds += 1;
            ch.send(&Message::CheckReveal {
                round_id: r,
                values: ev.alice_pair,
            })?;
            let pass = match ch.recv()? {
                Message::CheckResult { round_id, pass } if round_id == r => pass,
                other => return Err(violation("CHECK_RESULT", &other)),
            };
            report.trace.push(RoundRecord {
                round_id: r,
                mode: RoundMode::Check,
                public: u8::from(pass).to_string(),
            });
            report.rounds_played += 1;
            if !pass {
                report.check_failures += 1;
                return Err(Stop::Abort(
                    AbortReason::Tamper,
                    format!("check failed in round {r}"),
                ));
            }
            continue;
        }
        let (n1, n2) = ev.alice_indices().map_err(cfg_err)?;
        let mut alice =
            AliceKnowledge::new(n1, n2, order_choice(cfg.seed(), r)).map_err(cfg_err)?;
        let b1 = alice.send_first_bit().map_err(cfg_err)?;
        ch.send(&Message::AliceBit1 {
            round_id: r,
            bit: b1,
        })?;
        let bb = match ch.recv()? {
            Message::BobResponse { round_id, bit } if round_id == r => bit,
            other => return Err(violation("BOB_RESPONSE", &other)),
        };
        alice.receive_bob_bit(bb).map_err(cfg_err)?;
        let set = deduce_alice(&alice, bb, &window, cfg.convention)
            .map_err(|e| Stop::Abort(AbortReason::Tamper, format!("round {r}: {e}")))?;
        let b2 = alice.send_second_bit().map_err(cfg_err)?;
        ch.send(&Message::AliceBit2 {
            round_id: r,
            bit: b2,
        })?;
        let used = key.absorb(&set).map_err(cfg_err)?;
        record_key_round(report, r, [b1, bb, b2], used);
    }
    let material = key.finish();
    let tag = confirm_tag(&material, &report.trace);
    ch.send(&Message::KeyConfirm { digest: tag })?;
    match ch.recv()? {
        Message::KeyConfirm { digest: theirs } if theirs == tag => Ok(material),
        Message::KeyConfirm { .. } => Err(Stop::Abort(
            AbortReason::KeyMismatch,
            "confirmation tags differ".into(),
        )),
        other => Err(violation("KEY_CONFIRM", &other)),
    }
}

/// SHA-256 over the key digest and every public round record.
pub fn confirm_tag(key: &KeyMaterial, trace: &[RoundRecord]) -> [u8; DIGEST_LEN] {
    let mut h = Sha256::new();
    h.update(key_digest(&key.bits));
    for rec in trace {
        h.update(rec.round_id.to_be_bytes());
        h.update([rec.public.len() as u8]);
        h.update(rec.public.as_bytes());
    }
    h.finalize().into()
}

fn record_key_round(report: &mut SessionReport, r: u32, bits: [u8; 3], used: bool) {
    report.rounds_played += 1;
    if used {
        report.key_rounds += 1;
    } else {
        report.discarded_rounds += 1;
    }
    report.trace.push(RoundRecord {
        round_id: r,
        mode: if used {
            RoundMode::Key
        } else {
            RoundMode::Discarded
        },
        public: bits.iter().map(|b| b.to_string()).collect(),
    });
}

fn bob_loop<T: Read + Write>(
    ch: &mut Channel<'_, T>,
    feed: &EventFeed,
    cfg: &SessionConfig,
    report: &mut SessionReport,
) -> std::result::Result<KeyMaterial, Stop> {
    let cfg_err = |e: Error| Stop::Error(SessionError::Config(e));
    let window = cfg.window();
    let table = CodeTable::new(window.hi + 3).map_err(cfg_err)?;
    let mut key = KeyBuilder::new(cfg).map_err(cfg_err)?;

    // Bob serves whatever session id Alice opens with.
    let (frame, sid) = read_frame(ch.io)?;
    ch.session_id = sid;
    match Message::from_frame(&frame).map_err(SessionError::from)? {
        Message::Hello(h) if h == cfg.hello() => ch.send(&Message::Hello(h))?,
        Message::Hello(_) => {
            return Err(Stop::Abort(
                AbortReason::ParameterMismatch,
                "HELLO differs".into(),
            ))
        }
        other => return Err(violation("HELLO", &other)),
    }
    let mut next_round = 0u32;
    loop {
        match ch.recv()? {
            Message::RoundOpen { round_id } if round_id == next_round && round_id < cfg.rounds => {
                let r = round_id;
                let ev = feed.event(r as u64);
                if ev.check_mode {
                    report.check_rounds += 1;
                    let values = match ch.recv()? {
                        Message::CheckReveal { round_id, values } if round_id == r => values,
                        other => return Err(violation("CHECK_REVEAL", &other)),
                    };
                    let pass = check_passes(&ev, values, &table, &window);
                    if !pass {
                        report.check_failures += 1;
                    }
                    ch.send(&Message::CheckResult { round_id: r, pass })?;
                    report.rounds_played += 1;
                    report.trace.push(RoundRecord {
                        round_id: r,
                        mode: RoundMode::Check,
                        public: u8::from(pass).to_string(),
                    });
                } else {
                    let mut bob =
                        BobKnowledge::new(ev.bob_index().map_err(cfg_err)?).map_err(cfg_err)?;
                    let b1 = match ch.recv()? {
                        Message::AliceBit1 { round_id, bit } if round_id == r => bit,
                        other => return Err(violation("ALICE_BIT1", &other)),
                    };
                    let bb = bob.receive_first_bit(b1, cfg.convention).map_err(cfg_err)?;
                    ch.send(&Message::BobResponse {
                        round_id: r,
                        bit: bb,
                    })?;
                    let b2 = match ch.recv()? {
                        Message::AliceBit2 { round_id, bit } if round_id == r => bit,
                        other => return Err(violation("ALICE_BIT2", &other)),
                    };
                    let transcript = bob.receive_second_bit(b2).map_err(cfg_err)?;
                    let set = deduce_bob(&bob, &transcript, &window, cfg.convention)
                        .map_err(|e| Stop::Abort(AbortReason::Tamper, format!("round {r}: {e}")))?;
                    let used = key.absorb(&set).map_err(cfg_err)?;
                    record_key_round(report, r, transcript.bits(), used);
                }
                next_round += 1;
            }
            Message::KeyConfirm { digest } if next_round == cfg.rounds => {
                let material = key.finish();
                let ours = confirm_tag(&material, &report.trace);
                if digest != ours {
                    return Err(Stop::Abort(
                        AbortReason::KeyMismatch,
                        "confirmation tags differ".into(),
                    ));
                }
                ch.send(&Message::KeyConfirm { digest: ours })?;
                return Ok(material);
            }
            other => return Err(violation("ROUND_OPEN or KEY_CONFIRM", &other)),
        }
    }
}

/// Key both parties derive when every round is played in memory without a
/// transport. Useful as a reference for wire runs.
pub fn direct_key(cfg: &SessionConfig) -> Result<KeyMaterial> {
    cfg.validate()?;
    let feed = EventFeed::new(cfg.source.clone())?;
    let window = cfg.window();
    let mut key = KeyBuilder::new(cfg)?;
    for r in 0..cfg.rounds {
        let ev = feed.event(r as u64);
        if ev.check_mode {
            continue;
        }
        let play = play_round(
            ev.world()?,
            order_choice(cfg.seed(), r),
            &window,
            cfg.convention,
        )?;
        if play.alice != play.bob {
            return Err(Error::Inconsistent(format!("round {r}: parties disagree")));
        }
        key.absorb(&play.alice)?;
    }
    Ok(key.finish())
}

/// One end of an in-process duplex pipe.
#[derive(Debug)]
pub struct LoopbackEnd {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    pending: Vec<u8>,
    pos: usize,
    timeout: Duration,
}

pub fn loopback_pair(timeout: Duration) -> (LoopbackEnd, LoopbackEnd) {
    let (a_tx, b_rx) = mpsc::channel();
    let (b_tx, a_rx) = mpsc::channel();
    let end = |tx, rx| LoopbackEnd {
        tx,
        rx,
        pending: Vec::new(),
        pos: 0,
        timeout,
    };
    (end(a_tx, a_rx), end(b_tx, b_rx))
}

impl Read for LoopbackEnd {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        if self.pos == self.pending.len() {
            match self.rx.recv_timeout(self.timeout) {
                Ok(chunk) => {
                    self.pending = chunk;
                    self.pos = 0;
                }
                Err(RecvTimeoutError::Timeout) => return Err(io::ErrorKind::TimedOut.into()),
                Err(RecvTimeoutError::Disconnected) => return Ok(0),
            }
        }
        let n = buf.len().min(self.pending.len() - self.pos);
        buf[..n].copy_from_slice(&self.pending[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

impl Write for LoopbackEnd {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.tx
            .send(buf.to_vec())
            .map_err(|_| io::Error::from(io::ErrorKind::BrokenPipe))?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Fault injection on outgoing frames: flips the bit field of selected
/// message types with a fixed probability.
#[derive(Debug)]
pub struct Tamper<T> {
    inner: T,
    targets: Vec<crate::wire::MessageType>,
    probability: f64,
    rng: rand_chacha::ChaCha8Rng,
    buffer: Vec<u8>,
    pub flips: u64,
}

impl<T> Tamper<T> {
    pub fn new(
        inner: T,
        targets: &[crate::wire::MessageType],
        probability: f64,
        seed: u64,
    ) -> Self {
        Self {
            inner,
            targets: targets.to_vec(),
            probability,
            rng: rng::stream(seed, Purpose::Tamper, 0),
            buffer: Vec::new(),
            flips: 0,
        }
    }
}

impl<T: Read> Read for Tamper<T> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        self.inner.read(buf)
    }
}

impl<T: Write> Write for Tamper<T> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.buffer.extend_from_slice(buf);
        while let Ok((mut frame, used)) = decode_frame(&self.buffer) {
            self.buffer.drain(..used);
            if self.targets.contains(&frame.msg_type)
                && frame.payload.len() == 5
                && self.rng.gen_bool(self.probability)
            {
                frame.payload[4] ^= 1;
                self.flips += 1;
            }
            self.inner.write_all(&encode_frame(&frame))?;
        }
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Runs Alice and Bob on the two given transports, Bob on a helper thread.
pub fn run_pair<A, B>(
    cfg: &SessionConfig,
    mut alice_io: A,
    mut bob_io: B,
) -> Result<(SessionOutput, SessionOutput)>
where
    A: Read + Write,
    B: Read + Write + Send,
{
    let feed = EventFeed::new(cfg.source.clone())?;
    thread::scope(|s| {
        let bob = s.spawn(|| run_session(Role::Bob, &mut bob_io, &feed, cfg));
        let alice = run_session(Role::Alice, &mut alice_io, &feed, cfg);
        drop(alice_io);
        Ok((alice, bob.join().expect("bob thread panicked")))
    })
}

/// Both peers in-process over a loopback pipe.
pub fn run_loopback(cfg: &SessionConfig) -> Result<(SessionOutput, SessionOutput)> {
    let (a, b) = loopback_pair(cfg.round_timeout);
    run_pair(cfg, a, b)
}

fn prepare(stream: &TcpStream, timeout: Duration) -> io::Result<()> {
    stream.set_read_timeout(Some(timeout))?;
    stream.set_write_timeout(Some(timeout))?;
    stream.set_nodelay(true)
}

/// Alice dials Bob and runs her side.
pub fn connect_alice(
    addr: impl ToSocketAddrs,
    cfg: &SessionConfig,
) -> std::result::Result<SessionOutput, SessionError> {
    let feed = EventFeed::new(cfg.source.clone())?;
    let mut stream = TcpStream::connect(addr)?;
    prepare(&stream, cfg.round_timeout)?;
    Ok(run_session(Role::Alice, &mut stream, &feed, cfg))
}

/// Bob accepts `sessions` connections and serves each on its own thread.
pub fn serve_bob(
    listener: &TcpListener,
    cfg: &SessionConfig,
    sessions: usize,
) -> std::result::Result<Vec<SessionOutput>, SessionError> {
    let feed = EventFeed::new(cfg.source.clone())?;
    thread::scope(|s| {
        let mut handles = Vec::with_capacity(sessions);
        for _ in 0..sessions {
            let (mut stream, _) = listener.accept()?;
            prepare(&stream, cfg.round_timeout)?;
            let feed = &feed;
            handles.push(s.spawn(move || run_session(Role::Bob, &mut stream, feed, cfg)));
        }
        Ok(handles
            .into_iter()
            .map(|h| h.join().expect("session thread panicked"))
            .collect())
    })
}
