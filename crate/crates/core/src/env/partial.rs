use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Item, LocalState};

/// Observations revealed in one round: item -> local state.
///
/// Entries are kept sorted by item so equality and hashing are independent of
/// the order in which items were selected.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PartialState {
    entries: Vec<(Item, LocalState)>,
}

impl PartialState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from arbitrary-order pairs; fails on a repeated item.
    pub fn from_pairs<I: IntoIterator<Item = (Item, LocalState)>>(pairs: I) -> Option<Self> {
        let mut entries: Vec<_> = pairs.into_iter().collect();
        entries.sort_unstable();
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return None;
        }
        Some(PartialState { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, v: Item) -> Option<LocalState> {
        self.entries.binary_search_by_key(&v, |e| e.0).ok().map(|i| self.entries[i].1)
    }

    pub fn contains(&self, v: Item) -> bool {
        self.get(v).is_some()
    }

    /// Record `v -> local`. Returns false (and leaves the state unchanged) if
    /// `v` was already observed.
    pub fn insert(&mut self, v: Item, local: LocalState) -> bool {
        match self.entries.binary_search_by_key(&v, |e| e.0) {
            Ok(_) => false,
            Err(pos) => {
                self.entries.insert(pos, (v, local));
                true
            }
        }
    }

    pub fn with(&self, v: Item, local: LocalState) -> Self {
        let mut next = self.clone();
        next.insert(v, local);
        next
    }

    pub fn iter(&self) -> impl Iterator<Item = (Item, LocalState)> + '_ {
        self.entries.iter().copied()
    }

    pub fn items(&self) -> Vec<Item> {
        self.entries.iter().map(|e| e.0).collect()
    }

    /// Bitmask of observed items (items must be < 64).
    pub fn mask(&self) -> u64 {
        self.entries.iter().fold(0, |m, e| m | 1u64 << e.0)
    }

    /// `self ⪯ other`: every observation here is also made, identically, in `other`.
    pub fn is_sub_state_of(&self, other: &PartialState) -> bool {
        self.entries.iter().all(|&(v, s)| other.get(v) == Some(s))
    }

    /// Restriction to the items in `mask`.
    pub fn restrict(&self, mask: u64) -> PartialState {
        PartialState { entries: self.entries.iter().copied().filter(|e| mask >> e.0 & 1 == 1).collect() }
    }

    /// Canonical text form `item:state,item:state` (empty string if nothing observed).
    pub fn canonical(&self) -> String {
        self.to_string()
    }

    pub fn parse(text: &str) -> Option<Self> {
        if text.is_empty() {
            return Some(Self::new());
        }
        let pairs = text
            .split(',')
            .map(|kv| {
                let (k, v) = kv.split_once(':')?;
                Some((k.parse().ok()?, v.parse().ok()?))
            })
            .collect::<Option<Vec<_>>>()?;
        Self::from_pairs(pairs)
    }
}

impl fmt::Display for PartialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (v, s)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}:{s}")?;
        }
        Ok(())
    }
}
