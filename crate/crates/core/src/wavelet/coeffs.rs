//! Sparse wavelet coefficient vectors.

use std::collections::{BTreeMap, BTreeSet};

use super::index::{smallest_tree, tree_violation, WaveletIndex};
use crate::error::{Result, SheqError};

/// Entries with magnitude at or below this are not stored.
pub const DROP_TOL: f64 = 1e-14;

/// Sparse map from wavelet indices to coefficients.
///
/// When `tree` is set the key set is closed under taking parents. Ancestors
/// needed for that closure are kept even when their value is below the
/// drop tolerance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WaveletCoeffs {
    entries: BTreeMap<WaveletIndex, f64>,
    tree: bool,
}

impl WaveletCoeffs {
    pub fn new() -> Self {
        Self::default()
    }

    /// Empty tree-flagged vector.
    pub fn new_tree() -> Self {
        Self {
            entries: BTreeMap::new(),
            tree: true,
        }
    }

    /// From a flat vector; entries with `|x| <= drop_tol` are skipped.
    pub fn from_dense(flat: &[f64], drop_tol: f64) -> Self {
        let entries = flat
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > drop_tol)
            .map(|(i, &v)| (WaveletIndex::from_flat(i), v))
            .collect();
        Self { entries, tree: false }
    }

    /// From a flat vector, keeping the smallest tree around the retained entries.
    pub fn tree_from_dense(flat: &[f64], drop_tol: f64) -> Self {
        let mut c = Self::from_dense(flat, drop_tol);
        c.close_tree();
        c
    }

    /// Entries on an explicit support; the support must be a tree when `tree` is set.
    pub fn from_support(
        support: &BTreeSet<WaveletIndex>,
        value: impl Fn(WaveletIndex) -> f64,
        tree: bool,
    ) -> Result<Self> {
        if tree {
            if let Some(bad) = tree_violation(support) {
                return Err(SheqError::NotATree(bad.to_string()));
            }
        }
        Ok(Self {
            entries: support.iter().map(|&i| (i, value(i))).collect(),
            tree,
        })
    }

    pub fn to_dense(&self, dim: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; dim];
        self.add_to_dense(1.0, &mut out)?;
        Ok(out)
    }

    /// `out += alpha * self` in flat layout.
    pub fn add_to_dense(&self, alpha: f64, out: &mut [f64]) -> Result<()> {
        for (idx, v) in &self.entries {
            let f = idx.flat();
            if f >= out.len() {
                return Err(SheqError::InvalidIndex(format!(
                    "{idx} outside a space of dimension {}",
                    out.len()
                )));
            }
            out[f] += alpha * v;
        }
        Ok(())
    }

    pub fn is_tree(&self) -> bool {
        self.tree
    }

    /// Sets the tree flag after checking the support.
    pub fn set_tree(&mut self, tree: bool) -> Result<()> {
        if tree {
            self.check_tree()?;
        }
        self.tree = tree;
        Ok(())
    }

    pub fn check_tree(&self) -> Result<()> {
        let support = self.support();
        match tree_violation(&support) {
            Some(bad) => Err(SheqError::NotATree(bad.to_string())),
            None => Ok(()),
        }
    }

    /// Adds zero entries for all missing ancestors and sets the tree flag.
    pub fn close_tree(&mut self) {
        let tree = smallest_tree(self.entries.keys());
        for idx in tree {
            self.entries.entry(idx).or_insert(0.0);
        }
        self.tree = true;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, idx: &WaveletIndex) -> f64 {
        self.entries.get(idx).copied().unwrap_or(0.0)
    }

    /// Sets an entry; values at or below [`DROP_TOL`] remove non-tree entries.
    pub fn insert(&mut self, idx: WaveletIndex, value: f64) {
        if value.abs() <= DROP_TOL && !self.tree {
            self.entries.remove(&idx);
        } else {
            self.entries.insert(idx, value);
        }
    }

    pub fn contains(&self, idx: &WaveletIndex) -> bool {
        self.entries.contains_key(idx)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&WaveletIndex, &f64)> {
        self.entries.iter()
    }

    pub fn support(&self) -> BTreeSet<WaveletIndex> {
        self.entries.keys().copied().collect()
    }

    pub fn max_level(&self) -> Option<u32> {
        self.entries.keys().map(|i| i.level).max()
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, alpha: f64) {
        self.entries.values_mut().for_each(|v| *v *= alpha);
    }

    /// `self + alpha * other` on the union of supports. The result is a tree
    /// when both inputs are.
    pub fn axpy(&self, alpha: f64, other: &WaveletCoeffs) -> WaveletCoeffs {
        let mut entries = self.entries.clone();
        for (idx, v) in &other.entries {
            *entries.entry(*idx).or_insert(0.0) += alpha * v;
        }
        WaveletCoeffs {
            entries,
            tree: self.tree && other.tree,
        }
    }

    /// Removes entries with `|v| <= tol` that are not needed as ancestors.
    pub fn prune(&mut self, tol: f64) {
        if !self.tree {
            self.entries.retain(|_, v| v.abs() > tol);
            return;
        }
        let keep: Vec<WaveletIndex> = self
            .entries
            .iter()
            .filter(|(_, v)| v.abs() > tol)
            .map(|(i, _)| *i)
            .collect();
        let tree = smallest_tree(keep.iter());
        self.entries.retain(|i, _| tree.contains(i));
    }
}
