//! Block code is a bijection between its value set and all `log2 N`-bit
//! strings.

use proptest::prelude::*;
use tribokey::{tribonacci, BlockCode};

fn code() -> impl Strategy<Value = BlockCode> {
    (1u32..=5, 1u32..=20).prop_map(|(k, base)| BlockCode::new(1 << k, base).unwrap())
}

proptest! {
    #[test]
    fn encode_then_decode(c in code(), i in 0u32..32) {
        let value = tribonacci(c.base_index() + i % c.set_size()).unwrap();
        let block = c.encode(value).unwrap();
        prop_assert_eq!(block.len() as u32, c.bits_per_value());
        prop_assert_eq!(c.decode(&block).unwrap(), value);
    }

    #[test]
    fn decode_then_encode(c in code(), raw in any::<u32>()) {
        let width = c.bits_per_value();
        let block: Vec<u8> = (0..width).rev().map(|b| ((raw >> b) & 1) as u8).collect();
        let value = c.decode(&block).unwrap();
        prop_assert_eq!(c.encode(value).unwrap(), block);
    }

    #[test]
    fn values_outside_the_set_are_rejected(c in code()) {
        prop_assert!(c.encode(tribonacci(c.top_index() + 1).unwrap()).is_err());
        if c.base_index() > 1 {
            prop_assert!(c.encode(tribonacci(c.base_index() - 1).unwrap()).is_err());
        }
    }
}

#[test]
fn every_block_is_hit_once() {
    for k in 1..=5 {
        let c = BlockCode::new(1 << k, 4).unwrap();
        let mut blocks: Vec<Vec<u8>> = (0..c.set_size())
            .map(|i| c.encode(tribonacci(4 + i).unwrap()).unwrap())
            .collect();
        blocks.sort();
        blocks.dedup();
        assert_eq!(blocks.len(), c.set_size() as usize);
    }
}
