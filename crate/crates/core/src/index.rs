//! Kinematic index sets: which orders (1 = position, 2 = velocity,
//! 3 = acceleration, 4 = its derivative) a field depends on.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// Highest kinematic order handled.
pub const MAX_ORDER: u8 = 4;

/// Strictly increasing set of kinematic orders.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct KinematicIndexSet(Vec<u8>);

impl KinematicIndexSet {
    pub fn new(indices: impl Into<Vec<u8>>) -> Result<Self> {
        let indices = indices.into();
        for &i in &indices {
            if i == 0 || i > MAX_ORDER {
                return config(format!("kinematic order {i} outside 1..={MAX_ORDER}"));
            }
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return config(format!("indices {indices:?} are not strictly increasing"));
        }
        Ok(Self(indices))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Contiguous run `first..first+len`.
    pub fn contiguous(first: u8, len: u8) -> Result<Self> {
        Self::new((first..first + len).collect::<Vec<_>>())
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, order: u8) -> bool {
        self.0.binary_search(&order).is_ok()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.iter().all(|i| other.contains(i))
    }

    /// `self \ other`
    pub fn difference(&self, other: &Self) -> Self {
        Self(self.iter().filter(|&i| !other.contains(i)).collect())
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut v: Vec<u8> = self.iter().chain(other.iter()).collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn with(&self, order: u8) -> Result<Self> {
        let mut v = self.0.clone();
        v.push(order);
        v.sort_unstable();
        v.dedup();
        Self::new(v)
    }

    pub fn without(&self, order: u8) -> Self {
        Self(self.iter().filter(|&i| i != order).collect())
    }

    /// True for a run of consecutive orders (first-group sets).
    pub fn is_contiguous(&self) -> bool {
        self.0.windows(2).all(|w| w[1] == w[0] + 1)
    }

    pub fn first(&self) -> Option<u8> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<u8> {
        self.0.last().copied()
    }
}

impl TryFrom<Vec<u8>> for KinematicIndexSet {
    type Error = crate::error::ChainError;
    fn try_from(v: Vec<u8>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<KinematicIndexSet> for Vec<u8> {
    fn from(s: KinematicIndexSet) -> Self {
        s.0
    }
}

impl fmt::Display for KinematicIndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// Shorthand for literal sets in code that knows they are valid.
#[macro_export]
macro_rules! kset {
    () => { $crate::index::KinematicIndexSet::empty() };
    ($($i:expr),+ $(,)?) => {
        $crate::index::KinematicIndexSet::new(vec![$($i as u8),+]).expect("valid index set")
    };
}
