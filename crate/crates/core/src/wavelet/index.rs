//! Wavelet indices and tree structure.
//!
//! Level 0 holds the scaling functions of the coarsest mesh `h = 2^-J0`
//! (`2^J0 - 1` of them). Level `l >= 1` holds the `2^(J0 + l - 1)` wavelets
//! that refine the mesh of level `J0 + l - 1` to `J0 + l`. The flat position
//! of `(l, k)` is `2^(J0 + l - 1) - 1 + k`, so the levels `0..=J - J0` fill
//! `0..2^J - 1`, the dimension of the hat-function space on mesh `2^-J`.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Result, SheqError};

/// Dyadic level of the coarsest mesh.
pub const J0: u32 = 2;

/// Largest supported index level.
pub const MAX_INDEX_LEVEL: u32 = 40;

/// Index `lambda = (level, pos)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WaveletIndex {
    pub level: u32,
    pub pos: u64,
}

impl fmt::Display for WaveletIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.level, self.pos)
    }
}

/// Number of valid positions on an index level.
pub fn level_count(level: u32) -> u64 {
    if level == 0 {
        (1u64 << J0) - 1
    } else {
        1u64 << (J0 + level - 1)
    }
}

/// Highest index level contained in the space on mesh `2^-j`.
pub fn max_index_level(j: u32) -> Result<u32> {
    if j < J0 {
        return Err(SheqError::InvalidArgument(format!(
            "wavelet decompositions need mesh level >= {J0}, got {j}"
        )));
    }
    Ok(j - J0)
}

/// Dimension of the hat-function space on mesh `2^-j`.
pub fn space_dim(j: u32) -> usize {
    (1usize << j) - 1
}

impl WaveletIndex {
    pub fn new(level: u32, pos: u64) -> Result<Self> {
        let idx = Self { level, pos };
        if level > MAX_INDEX_LEVEL || pos >= level_count(level) {
            return Err(SheqError::InvalidIndex(idx.to_string()));
        }
        Ok(idx)
    }

    /// Dyadic level of the finest mesh the function lives on.
    pub fn mesh_level(&self) -> u32 {
        J0 + self.level
    }

    pub fn is_root(&self) -> bool {
        self.level == 0
    }

    pub fn flat(&self) -> usize {
        if self.level == 0 {
            self.pos as usize
        } else {
            (1usize << (J0 + self.level - 1)) - 1 + self.pos as usize
        }
    }

    pub fn from_flat(i: usize) -> Self {
        let roots = level_count(0) as usize;
        if i < roots {
            return Self {
                level: 0,
                pos: i as u64,
            };
        }
        // 2^j - 1 <= i < 2^(j+1) - 1
        let j = usize::BITS - 1 - (i + 1).leading_zeros();
        Self {
            level: j - J0 + 1,
            pos: (i + 1 - (1usize << j)) as u64,
        }
    }

    /// `None` for roots. Level-1 wavelets hang below root `k / 2`.
    pub fn parent(&self) -> Option<Self> {
        if self.level == 0 {
            return None;
        }
        Some(Self {
            level: self.level - 1,
            pos: self.pos / 2,
        })
    }

    /// `{(l+1, 2k), (l+1, 2k+1)}` clipped to valid positions.
    pub fn children(&self) -> Vec<Self> {
        let next = self.level + 1;
        let count = level_count(next);
        [2 * self.pos, 2 * self.pos + 1]
            .into_iter()
            .filter(|&p| p < count)
            .map(|pos| Self { level: next, pos })
            .collect()
    }

    pub fn ancestors(&self) -> impl Iterator<Item = WaveletIndex> {
        std::iter::successors(self.parent(), |p| p.parent())
    }
}

/// Checked version of [`WaveletIndex::children`].
pub fn children(lambda: WaveletIndex) -> Result<Vec<WaveletIndex>> {
    WaveletIndex::new(lambda.level, lambda.pos)?;
    Ok(lambda.children())
}

/// All root indices.
pub fn roots() -> impl Iterator<Item = WaveletIndex> {
    (0..level_count(0)).map(|pos| WaveletIndex { level: 0, pos })
}

/// Closure of `support` under taking parents.
pub fn smallest_tree<'a>(support: impl IntoIterator<Item = &'a WaveletIndex>) -> BTreeSet<WaveletIndex> {
    let mut tree = BTreeSet::new();
    for &idx in support {
        if !tree.insert(idx) {
            continue;
        }
        for a in idx.ancestors() {
            if !tree.insert(a) {
                break;
            }
        }
    }
    tree
}

/// Returns the first index whose parent is missing, if any.
pub fn tree_violation(support: &BTreeSet<WaveletIndex>) -> Option<WaveletIndex> {
    support
        .iter()
        .find(|idx| idx.parent().is_some_and(|p| !support.contains(&p)))
        .copied()
}

pub fn is_tree(support: &BTreeSet<WaveletIndex>) -> bool {
    tree_violation(support).is_none()
}
