//! Simulator for a quantum key distribution scheme built on tribonacci
//! encoded orbital angular momentum photon triples.
//!
//! A pump photon carrying `F_n` splits into three photons carrying the
//! consecutive values `F_{n-1}, F_{n-2}, F_{n-3}`. Alice keeps two, Bob
//! keeps one, and a three-bit public exchange lets both recover `F_n`
//! without revealing it.

pub mod adversary;
pub mod error;
pub mod exchange;
pub mod rate;
pub mod rng;
pub mod session;
pub mod source;
pub mod stats;
pub mod tribo;
pub mod wire;
pub mod world;

pub use error::{Error, Result};
pub use exchange::{EdgeConvention, OrderChoice, Transcript, WorldSet};
pub use source::{EventFeed, SourceConfig, TripleEvent};
pub use tribo::{
    bit_alloc, position_class, tribonacci, BlockCode, CodeTable, Index, Position, Value,
};
pub use world::{PumpWindow, TripleSlot, World};
