//! Candidate scenarios ("worlds") for one source emission: which pump value
//! was split, and which member of its consecutive triple went to Bob.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::tribo::Index;

/// Which member of the consecutive triple `(F_{n-1}, F_{n-2}, F_{n-3})`
/// a photon carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripleSlot {
    /// `F_{n-1}`
    Largest,
    /// `F_{n-2}`
    Middle,
    /// `F_{n-3}`
    Smallest,
}

impl TripleSlot {
    pub const ALL: [TripleSlot; 3] = [
        TripleSlot::Largest,
        TripleSlot::Middle,
        TripleSlot::Smallest,
    ];

    /// Distance below the pump index.
    pub fn offset(self) -> Index {
        match self {
            TripleSlot::Largest => 1,
            TripleSlot::Middle => 2,
            TripleSlot::Smallest => 3,
        }
    }

    pub fn from_offset(offset: Index) -> Option<Self> {
        match offset {
            1 => Some(TripleSlot::Largest),
            2 => Some(TripleSlot::Middle),
            3 => Some(TripleSlot::Smallest),
            _ => None,
        }
    }
}

/// Inclusive range of pump indices the source emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PumpWindow {
    pub lo: Index,
    pub hi: Index,
}

impl PumpWindow {
    pub fn new(lo: Index, hi: Index) -> Result<Self> {
        if lo < 4 {
            return Err(config(format!("pump window starts at {lo}, must be >= 4")));
        }
        if hi < lo {
            return Err(config(format!("empty pump window [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, pump: Index) -> bool {
        (self.lo..=self.hi).contains(&pump)
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn pumps(&self) -> impl Iterator<Item = Index> + Clone {
        self.lo..=self.hi
    }
}

impl std::fmt::Display for PumpWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// One hypothesis about an emission: pump index and Bob's slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct World {
    pub pump: Index,
    pub bob_slot: TripleSlot,
}

impl World {
    pub fn new(pump: Index, bob_slot: TripleSlot) -> Self {
        debug_assert!(pump >= 4);
        Self { pump, bob_slot }
    }

    /// Builds the world in which Bob holds `bob_index` from pump `pump`.
    pub fn from_bob_index(pump: Index, bob_index: Index) -> Option<Self> {
        let offset = pump.checked_sub(bob_index)?;
        TripleSlot::from_offset(offset).map(|slot| Self::new(pump, slot))
    }

    pub fn bob_index(&self) -> Index {
        self.pump - self.bob_slot.offset()
    }

    /// Alice's two indices, ascending.
    pub fn alice_pair(&self) -> (Index, Index) {
        match self.bob_slot {
            TripleSlot::Largest => (self.pump - 3, self.pump - 2),
            TripleSlot::Middle => (self.pump - 3, self.pump - 1),
            TripleSlot::Smallest => (self.pump - 2, self.pump - 1),
        }
    }

    /// Indices `(n-1, n-2, n-3)`.
    pub fn triple_indices(&self) -> [Index; 3] {
        [self.pump - 1, self.pump - 2, self.pump - 3]
    }

    /// Every pump either party could still suspect after seeing their own
    /// photons lies inside `window`. Only such rounds feed the key.
    pub fn is_interior(&self, window: &PumpWindow) -> bool {
        let bob = self.bob_index();
        let bob_side = (1..=3).all(|k| window.contains(bob + k));
        bob_side
            && alice_candidate_pumps(self.alice_pair())
                .iter()
                .all(|&p| window.contains(p))
    }
}

/// Pumps whose consecutive triple contains both of Alice's indices.
pub fn alice_candidate_pumps((n1, n2): (Index, Index)) -> Vec<Index> {
    match n2.checked_sub(n1) {
        Some(2) => vec![n2 + 1],
        Some(1) => {
            let mut pumps = Vec::with_capacity(2);
            if n1 >= 2 {
                pumps.push(n1 + 2);
            }
            pumps.push(n2 + 2);
            pumps
        }
        _ => Vec::new(),
    }
}

/// All worlds with a pump in `window`, ordered by pump then slot.
pub fn all_worlds(window: &PumpWindow) -> impl Iterator<Item = World> + '_ {
    window.pumps().flat_map(|pump| {
        TripleSlot::ALL
            .into_iter()
            .map(move |slot| World::new(pump, slot))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_shapes() {
        assert_eq!(World::new(6, TripleSlot::Middle).alice_pair(), (3, 5));
        assert_eq!(World::new(6, TripleSlot::Largest).alice_pair(), (3, 4));
        assert_eq!(World::new(6, TripleSlot::Smallest).alice_pair(), (4, 5));
        assert_eq!(
            World::from_bob_index(8, 5),
            Some(World::new(8, TripleSlot::Smallest))
        );
        assert_eq!(World::from_bob_index(8, 4), None);
    }

    #[test]
    fn candidate_pumps() {
        assert_eq!(alice_candidate_pumps((6, 8)), vec![9]);
        assert_eq!(alice_candidate_pumps((6, 7)), vec![8, 9]);
        assert_eq!(alice_candidate_pumps((1, 2)), vec![4]);
        assert!(alice_candidate_pumps((6, 9)).is_empty());
    }

    #[test]
    fn window_validation() {
        assert!(PumpWindow::new(3, 8).is_err());
        assert!(PumpWindow::new(8, 7).is_err());
        assert_eq!(PumpWindow::new(5, 20).unwrap().len(), 16);
    }

    #[test]
    fn interior_worlds() {
        let w = PumpWindow::new(4, 11).unwrap();
        // Bob holds F_1: he would also suspect pumps 2 and 3.
        assert!(!World::new(4, TripleSlot::Smallest).is_interior(&w));
        assert!(World::new(8, TripleSlot::Middle).is_interior(&w));
        // Alice holds (F_9, F_10): she suspects pump 13 as well.
        assert!(!World::new(11, TripleSlot::Smallest).is_interior(&w));
    }
}
