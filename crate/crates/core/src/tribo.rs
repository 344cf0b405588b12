//! Third-order Fibonacci (Tribonacci) numbers and the bit/position
//! allocation used to label OAM values.
//!
//! The sequence is seeded `F_1 = 1, F_2 = 2, F_3 = 3` and continues with
//! `F_n = F_{n-1} + F_{n-2} + F_{n-3}`:
//!
//! ```text
//! n      1  2  3  4  5   6   7   8    9   10
//! F_n    1  2  3  6  11  20  37  68  125  230
//! B_n    0  0  0  0  1   1   1   1    0    0
//! pos    e  c  c  e  e   c   c   e    e    c
//! ```
//!
//! Bits come in runs of four: indices with `n mod 8` in `{1,2,3,4}` carry 0,
//! the rest carry 1. The two inner members of a run are "center" indices,
//! the outer two are "edge" indices.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Index into the sequence (`n >= 1`).
pub type Index = u32;
/// A Tribonacci value, i.e. an OAM quantum number.
pub type Value = u64;

/// Returns `F_n`. Fails for `n < 1` and when the value does not fit in 64 bits.
pub fn tribonacci(n: Index) -> Result<Value> {
    match n {
        0 => Err(domain("tribonacci index must be >= 1")),
        1 => Ok(1),
        2 => Ok(2),
        3 => Ok(3),
        _ => {
            let (mut a, mut b, mut c): (Value, Value, Value) = (1, 2, 3);
            for i in 4..=n {
                let next = a
                    .checked_add(b)
                    .and_then(|s| s.checked_add(c))
                    .ok_or(Error::Overflow { index: i })?;
                a = b;
                b = c;
                c = next;
            }
            Ok(c)
        }
    }
}

/// Bit allocated to index `n`: 0 iff `n mod 8` is in `{1,2,3,4}`.
///
/// Index 0 evaluates to 1, which is the conventional `B_0` used when the
/// left neighbour of `n = 1` is needed.
pub fn bit_alloc(n: Index) -> u8 {
    if matches!(n % 8, 1..=4) {
        0
    } else {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Center,
    Edge,
}

impl Position {
    pub fn letter(self) -> char {
        match self {
            Position::Center => 'c',
            Position::Edge => 'e',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeSide {
    /// First index of a run: the left neighbour carries the other bit.
    Left,
    /// Last index of a run: the right neighbour carries the other bit.
    Right,
}

pub fn position_class(n: Index) -> Position {
    if matches!(n % 4, 2 | 3) {
        Position::Center
    } else {
        Position::Edge
    }
}

/// Side of an edge index within its run of equal bits.
pub fn edge_side(n: Index) -> Result<EdgeSide> {
    match n % 8 {
        1 | 5 => Ok(EdgeSide::Left),
        0 | 4 => Ok(EdgeSide::Right),
        _ => Err(domain(format!(
            "index {n} is a center index and has no edge side"
        ))),
    }
}

/// The three values immediately preceding `F_n`, largest first:
/// `(F_{n-1}, F_{n-2}, F_{n-3})`. They always sum to `F_n`.
pub fn consecutive_triple(n: Index) -> Result<[Value; 3]> {
    if n < 4 {
        return Err(domain(format!(
            "pump index {n} has no consecutive triple (need n >= 4)"
        )));
    }
    Ok([tribonacci(n - 1)?, tribonacci(n - 2)?, tribonacci(n - 3)?])
}

/// Exhaustive search for three-element multisets of Tribonacci values
/// (indices `1..=max_index`) summing to `target`.
///
/// Each result is sorted ascending. With `allow_repeats == false` only sets
/// of three distinct values are returned.
pub fn find_tribonacci_triples(
    target: Value,
    max_index: Index,
    allow_repeats: bool,
) -> BTreeSet<[Value; 3]> {
    let values: Vec<Value> = (1..=max_index)
        .map_while(|n| tribonacci(n).ok())
        .take_while(|&v| v <= target)
        .collect();
    let mut found = BTreeSet::new();
    for i in 0..values.len() {
        for j in i..values.len() {
            for k in j..values.len() {
                if !allow_repeats && (i == j || j == k) {
                    continue;
                }
                let (a, b, c) = (values[i], values[j], values[k]);
                if a + b + c == target {
                    found.insert([a, b, c]);
                }
            }
        }
    }
    found
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeEntry {
    pub n: Index,
    pub value: Value,
    pub bit: u8,
    pub pos: Position,
    pub side: Option<EdgeSide>,
}

/// Immutable table of `F_1..=F_{n_max}` with their labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeTable {
    entries: Vec<CodeEntry>,
}

impl CodeTable {
    pub fn new(n_max: Index) -> Result<Self> {
        if n_max < 1 {
            return Err(domain("code table needs n_max >= 1"));
        }
        let mut entries = Vec::with_capacity(n_max as usize);
        let (mut a, mut b, mut c): (Value, Value, Value) = (0, 0, 0);
        for n in 1..=n_max {
            let value = match n {
                1 => 1,
                2 => 2,
                3 => 3,
                _ => a
                    .checked_add(b)
                    .and_then(|s| s.checked_add(c))
                    .ok_or(Error::Overflow { index: n })?,
            };
            a = b;
            b = c;
            c = value;
            let pos = position_class(n);
            entries.push(CodeEntry {
                n,
                value,
                bit: bit_alloc(n),
                pos,
                side: edge_side(n).ok(),
            });
        }
        Ok(Self { entries })
    }

    pub fn n_min(&self) -> Index {
        1
    }

    pub fn n_max(&self) -> Index {
        self.entries.len() as Index
    }

    pub fn entries(&self) -> &[CodeEntry] {
        &self.entries
    }

    pub fn entry(&self, n: Index) -> Option<&CodeEntry> {
        if n == 0 {
            return None;
        }
        self.entries.get(n as usize - 1)
    }

    pub fn value(&self, n: Index) -> Option<Value> {
        self.entry(n).map(|e| e.value)
    }

    /// Index of `value`, if it is a member of the table.
    pub fn index_of(&self, value: Value) -> Option<Index> {
        self.entries
            .binary_search_by_key(&value, |e| e.value)
            .ok()
            .map(|i| self.entries[i].n)
    }

    pub fn contains_value(&self, value: Value) -> bool {
        self.index_of(value).is_some()
    }
}

/// Assignment of `log2(N)`-bit blocks to `N` consecutive values
/// `F_{n_0} .. F_{n_0 + N - 1}` in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockCode {
    set_size: u32,
    base_index: Index,
    values: Vec<Value>,
}

impl BlockCode {
    pub fn new(set_size: u32, base_index: Index) -> Result<Self> {
        if set_size < 2 || !set_size.is_power_of_two() {
            return Err(domain(format!(
                "block code set size {set_size} is not a power of two >= 2"
            )));
        }
        if base_index < 1 {
            return Err(domain("block code base index must be >= 1"));
        }
        let values = (0..set_size)
            .map(|i| tribonacci(base_index + i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            set_size,
            base_index,
            values,
        })
    }

    pub fn set_size(&self) -> u32 {
        self.set_size
    }

    pub fn base_index(&self) -> Index {
        self.base_index
    }

    /// Last index covered by the code.
    pub fn top_index(&self) -> Index {
        self.base_index + self.set_size - 1
    }

    pub fn bits_per_value(&self) -> u32 {
        self.set_size.trailing_zeros()
    }

    pub fn covers_index(&self, n: Index) -> bool {
        (self.base_index..=self.top_index()).contains(&n)
    }

    /// Block assigned to `value`, most significant bit first.
    pub fn encode(&self, value: Value) -> Result<Vec<u8>> {
        let pos = self
            .values
            .binary_search(&value)
            .map_err(|_| domain(format!("value {value} is outside the block code set")))?;
        let width = self.bits_per_value();
        Ok((0..width).rev().map(|b| ((pos >> b) & 1) as u8).collect())
    }

    pub fn decode(&self, block: &[u8]) -> Result<Value> {
        if block.len() != self.bits_per_value() as usize {
            return Err(domain(format!(
                "block of {} bits, code uses {}",
                block.len(),
                self.bits_per_value()
            )));
        }
        let mut pos = 0usize;
        for &b in block {
            if b > 1 {
                return Err(domain(format!("block digit {b} is not a bit")));
            }
            pos = (pos << 1) | b as usize;
        }
        Ok(self.values[pos])
    }
}

pub fn block_code(value: Value, code: &BlockCode) -> Result<Vec<u8>> {
    code.encode(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> Vec<u8> {
        s.bytes().map(|b| b - b'0').collect()
    }

    #[test]
    fn tribonacci_values() {
        assert_eq!(tribonacci(1).unwrap(), 1);
        assert_eq!(tribonacci(3).unwrap(), 3);
        assert_eq!(tribonacci(6).unwrap(), 20);
        assert_eq!(tribonacci(10).unwrap(), 230);
        assert_eq!(tribonacci(11).unwrap(), 423);
        assert!(matches!(tribonacci(0), Err(Error::Domain(_))));
    }

    #[test]
    fn tribonacci_overflow_is_an_error() {
        let last_ok = (1..200)
            .take_while(|&n| tribonacci(n).is_ok())
            .last()
            .unwrap();
        assert!(last_ok > 60);
        assert_eq!(
            tribonacci(last_ok + 1),
            Err(Error::Overflow { index: last_ok + 1 })
        );
        assert_eq!(
            CodeTable::new(last_ok + 1),
            Err(Error::Overflow { index: last_ok + 1 })
        );
        assert_eq!(CodeTable::new(last_ok).unwrap().n_max(), last_ok);
    }

    #[test]
    fn bit_and_position_labels() {
        assert_eq!(bit_alloc(5), 1);
        assert_eq!(bit_alloc(9), 0);
        assert_eq!(bit_alloc(16), 1);
        assert_eq!(bit_alloc(0), 1);
        assert_eq!(position_class(2), Position::Center);
        assert_eq!(position_class(4), Position::Edge);
        assert_eq!(position_class(10), Position::Center);
        assert_eq!(position_class(12), Position::Edge);
    }

    #[test]
    fn edge_sides() {
        assert_eq!(edge_side(5).unwrap(), EdgeSide::Left);
        assert_eq!(edge_side(8).unwrap(), EdgeSide::Right);
        assert_eq!(edge_side(1).unwrap(), EdgeSide::Left);
        assert!(edge_side(6).is_err());
    }

    #[test]
    fn edge_side_matches_neighbour_definition() {
        // left: B_{n-1} != B_n and B_{n+1} == B_n; right: the mirror image.
        for n in 1..200 {
            if position_class(n) == Position::Center {
                continue;
            }
            let (prev, cur, next) = (bit_alloc(n - 1), bit_alloc(n), bit_alloc(n + 1));
            let expected = if prev != cur && next == cur {
                EdgeSide::Left
            } else {
                assert!(
                    prev == cur && next != cur,
                    "n={n} is neither left nor right"
                );
                EdgeSide::Right
            };
            assert_eq!(edge_side(n).unwrap(), expected, "n={n}");
        }
    }

    #[test]
    fn triples() {
        assert_eq!(consecutive_triple(6).unwrap(), [11, 6, 3]);
        assert_eq!(consecutive_triple(4).unwrap(), [3, 2, 1]);
        assert_eq!(consecutive_triple(9).unwrap(), [68, 37, 20]);
        assert_eq!(consecutive_triple(9).unwrap().iter().sum::<u64>(), 125);
        assert!(consecutive_triple(3).is_err());
    }

    #[test]
    fn triple_search() {
        assert_eq!(
            find_tribonacci_triples(20, 10, false),
            BTreeSet::from([[3, 6, 11]])
        );
        assert_eq!(
            find_tribonacci_triples(6, 10, true),
            BTreeSet::from([[1, 2, 3], [2, 2, 2]])
        );
        assert!(find_tribonacci_triples(5, 10, false).is_empty());
        assert_eq!(
            find_tribonacci_triples(3, 10, true),
            BTreeSet::from([[1, 1, 1]])
        );
    }

    #[test]
    fn block_code_n8() {
        let code = BlockCode::new(8, 1).unwrap();
        assert_eq!(block_code(1, &code).unwrap(), bits("000"));
        assert_eq!(block_code(11, &code).unwrap(), bits("100"));
        assert_eq!(block_code(68, &code).unwrap(), bits("111"));
        assert!(block_code(125, &code).is_err());
        assert!(block_code(4, &code).is_err());
        assert_eq!(code.decode(&bits("101")).unwrap(), 20);
        assert!(code.decode(&bits("10")).is_err());
        assert!(BlockCode::new(6, 1).is_err());
    }

    #[test]
    fn table_lookup() {
        let t = CodeTable::new(11).unwrap();
        assert_eq!(t.index_of(423), Some(11));
        assert_eq!(t.index_of(4), None);
        assert_eq!(t.value(0), None);
        assert_eq!(t.entry(5).unwrap().side, Some(EdgeSide::Left));
        assert_eq!(t.entry(6).unwrap().side, None);
    }
}
