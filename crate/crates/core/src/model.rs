//! Models as subsets of the candidate variables `{1, ..., p}`.

use crate::error::{Error, Result};

/// A model: a subset of the variable indices `1..=p`.
///
/// Members are kept sorted and duplicate-free, so equal sets always have
/// equal encodings and the member list can be used directly as a hash key.
/// Indices are 1-based throughout.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct ModelIndex {
    members: Vec<u32>,
    p: u32,
}

impl ModelIndex {
    /// The empty model (intercept only).
    pub fn empty(p: usize) -> Self {
        ModelIndex {
            members: Vec::new(),
            p: p as u32,
        }
    }

    /// The full model containing all `p` variables.
    pub fn full(p: usize) -> Self {
        ModelIndex {
            members: (1..=p as u32).collect(),
            p: p as u32,
        }
    }

    /// Builds a model from arbitrary 1-based indices.
    ///
    /// Rejects indices outside `[1, p]` and duplicates.
    pub fn new(members: impl IntoIterator<Item = u32>, p: usize) -> Result<Self> {
        let mut members: Vec<u32> = members.into_iter().collect();
        members.sort_unstable();
        for (i, &j) in members.iter().enumerate() {
            if j < 1 || j as usize > p {
                return Err(Error::Config(format!(
                    "variable index {j} outside [1, {p}]"
                )));
            }
            if i > 0 && members[i - 1] == j {
                return Err(Error::Config(format!("duplicate variable index {j}")));
            }
        }
        Ok(ModelIndex {
            members,
            p: p as u32,
        })
    }

    /// Builds a model from a bitmask; bit `j-1` set means variable `j` is in.
    pub fn from_bitmask(mask: u64, p: usize) -> Result<Self> {
        if p > 64 {
            return Err(Error::Config(format!("bitmask constructor limited to p <= 64, got {p}")));
        }
        if p < 64 && mask >> p != 0 {
            return Err(Error::Config(format!("bitmask {mask:#x} has bits above p = {p}")));
        }
        let members = (0..p as u32).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect();
        Ok(ModelIndex { members, p: p as u32 })
    }

    /// The bitmask encoding for small `p` (used by the enumeration oracle).
    pub fn to_bitmask(&self) -> Option<u64> {
        if self.p > 64 {
            return None;
        }
        let mut mask = 0u64;
        for &j in &self.members {
            mask |= 1 << (j - 1);
        }
        Some(mask)
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p as usize
    }

    /// Sorted 1-based member indices.
    pub fn members(&self) -> &[u32] {
        &self.members
    }

    pub fn contains(&self, j: u32) -> bool {
        self.members.binary_search(&j).is_ok()
    }

    /// The model with variable `j` added or removed (the MC3 neighbour move).
    pub fn toggled(&self, j: u32) -> Result<Self> {
        if j < 1 || j > self.p {
            return Err(Error::Config(format!("variable index {j} outside [1, {}]", self.p)));
        }
        let mut members = self.members.clone();
        match members.binary_search(&j) {
            Ok(i) => {
                members.remove(i);
            }
            Err(i) => members.insert(i, j),
        }
        Ok(ModelIndex { members, p: self.p })
    }

    /// Splits the symmetric difference into (in `self` only, in `other` only).
    pub fn symmetric_difference(&self, other: &Self) -> (Vec<u32>, Vec<u32>) {
        let (mut only_self, mut only_other) = (Vec::new(), Vec::new());
        let (a, b) = (&self.members, &other.members);
        let (mut i, mut k) = (0, 0);
        while i < a.len() && k < b.len() {
            match a[i].cmp(&b[k]) {
                std::cmp::Ordering::Less => {
                    only_self.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    only_other.push(b[k]);
                    k += 1;
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    k += 1;
                }
            }
        }
        only_self.extend_from_slice(&a[i..]);
        only_other.extend_from_slice(&b[k..]);
        (only_self, only_other)
    }

    /// Fixed-width lowercase hex encoding; the least-significant bit of the
    /// *last* digit is variable 1. Width is `ceil(p/4)` digits.
    pub fn to_hex(&self) -> String {
        let width = (self.p as usize).div_ceil(4);
        let mut nibbles = vec![0u8; width];
        for &j in &self.members {
            let bit = (j - 1) as usize;
            nibbles[bit / 4] |= 1 << (bit % 4);
        }
        nibbles
            .iter()
            .rev()
            .map(|n| char::from_digit(*n as u32, 16).unwrap())
            .collect()
    }

    /// Parses the hex encoding produced by [`ModelIndex::to_hex`].
    pub fn from_hex(s: &str, p: usize) -> Result<Self> {
        let width = p.div_ceil(4);
        if s.len() != width {
            return Err(Error::Parse(format!(
                "model encoding '{s}' has {} digits, expected {width} for p = {p}",
                s.len()
            )));
        }
        let mut members = Vec::new();
        for (pos, c) in s.chars().rev().enumerate() {
            let nibble = c
                .to_digit(16)
                .ok_or_else(|| Error::Parse(format!("bad hex digit '{c}' in model encoding")))?;
            for b in 0..4 {
                if nibble >> b & 1 == 1 {
                    let j = (pos * 4 + b + 1) as u32;
                    if j as usize > p {
                        return Err(Error::Parse(format!(
                            "model encoding '{s}' sets variable {j} beyond p = {p}"
                        )));
                    }
                    members.push(j);
                }
            }
        }
        members.sort_unstable();
        Ok(ModelIndex {
            members,
            p: p as u32,
        })
    }
}

impl std::fmt::Display for ModelIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, j) in self.members.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}
