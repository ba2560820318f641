//! Tree coarsening and tree approximation rates.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use super::coeffs::WaveletCoeffs;
use super::index::{smallest_tree, WaveletIndex};

#[derive(Debug, PartialEq)]
struct Candidate {
    energy: f64,
    idx: WaveletIndex,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.energy
            .total_cmp(&other.energy)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy growth of a tree from the roots, always adding the candidate with
/// the largest subtree energy.
struct GreedyTree {
    energy: HashMap<WaveletIndex, f64>,
    heap: BinaryHeap<Candidate>,
}

impl GreedyTree {
    fn new(coeffs: &WaveletCoeffs) -> Self {
        let tree = smallest_tree(coeffs.iter().map(|(i, _)| i));
        let mut energy: HashMap<WaveletIndex, f64> = HashMap::with_capacity(tree.len());
        // children come after parents in the index order
        for idx in tree.iter().rev() {
            let c = coeffs.get(idx);
            let below: f64 = idx.children().iter().filter_map(|ch| energy.get(ch)).sum();
            energy.insert(*idx, c * c + below);
        }
        let heap = tree
            .iter()
            .take_while(|i| i.is_root())
            .map(|&idx| Candidate {
                energy: energy[&idx],
                idx,
            })
            .collect();
        Self { energy, heap }
    }

    fn total(&self) -> f64 {
        self.heap.iter().map(|c| c.energy).sum()
    }

    fn next(&mut self) -> Option<WaveletIndex> {
        let best = self.heap.pop()?;
        for ch in best.idx.children() {
            if let Some(&e) = self.energy.get(&ch) {
                self.heap.push(Candidate { energy: e, idx: ch });
            }
        }
        Some(best.idx)
    }
}

fn discarded_energy(coeffs: &WaveletCoeffs, kept: &WaveletCoeffs) -> f64 {
    coeffs
        .iter()
        .filter(|(i, _)| !kept.contains(i))
        .map(|(_, v)| v * v)
        .sum()
}

/// Smallest greedy tree whose complement carries at most `tol` in l2.
///
/// Tree growth is ordered by subtree energy, so the result is a tree but not
/// necessarily the optimal one of its size.
pub fn coarsen(coeffs: &WaveletCoeffs, tol: f64) -> WaveletCoeffs {
    let tol2 = tol.max(0.0).powi(2);
    let mut greedy = GreedyTree::new(coeffs);
    let mut discarded = greedy.total();
    let mut out = WaveletCoeffs::new_tree();
    loop {
        while discarded > tol2 {
            if greedy.heap.peek().is_none_or(|c| c.energy <= 0.0) {
                break;
            }
            match greedy.next() {
                Some(idx) => {
                    let c = coeffs.get(&idx);
                    out.insert(idx, c);
                    discarded -= c * c;
                }
                None => break,
            }
        }
        // guard against drift in the running difference
        let exact = if tol2 > 0.0 {
            discarded_energy(coeffs, &out)
        } else {
            discarded
        };
        if exact <= tol2 || greedy.heap.is_empty() {
            break;
        }
        discarded = exact;
    }
    out
}

/// [`coarsen`] for a vector in flat layout whose nonzeros (and their
/// ancestors) form the candidate tree. Returns the kept set as a mask.
pub fn coarsen_dense(flat: &[f64], tol: f64) -> Vec<bool> {
    let dim = flat.len();
    let tol2 = tol.max(0.0).powi(2);
    let mut energy: Vec<f64> = flat.iter().map(|v| v * v).collect();
    // children have larger flat positions than their parents
    for i in (0..dim).rev() {
        if let Some(p) = WaveletIndex::from_flat(i).parent() {
            energy[p.flat()] += energy[i];
        }
    }
    let mut heap: BinaryHeap<Candidate> = super::index::roots()
        .filter(|r| r.flat() < dim)
        .map(|idx| Candidate {
            energy: energy[idx.flat()],
            idx,
        })
        .collect();
    let mut discarded: f64 = heap.iter().map(|c| c.energy).sum();
    let mut keep = vec![false; dim];
    loop {
        while discarded > tol2 {
            let Some(best) = heap.peek() else { break };
            if best.energy <= 0.0 {
                break;
            }
            let best = heap.pop().expect("peeked");
            let f = best.idx.flat();
            keep[f] = true;
            discarded -= flat[f] * flat[f];
            for ch in best.idx.children() {
                let cf = ch.flat();
                if cf < dim {
                    heap.push(Candidate {
                        energy: energy[cf],
                        idx: ch,
                    });
                }
            }
        }
        let exact: f64 = if tol2 > 0.0 {
            flat.iter()
                .zip(&keep)
                .filter(|(_, k)| !**k)
                .map(|(v, _)| v * v)
                .sum()
        } else {
            discarded
        };
        if exact <= tol2 || heap.peek().is_none_or(|c| c.energy <= 0.0) {
            break;
        }
        discarded = exact;
    }
    keep
}

/// `sigma_N`, `N = 0..=#tree`, the l2 error after `N` greedy tree steps.
pub fn greedy_tree_errors(coeffs: &WaveletCoeffs) -> Vec<f64> {
    let mut greedy = GreedyTree::new(coeffs);
    let mut discarded = greedy.total();
    let mut out = vec![discarded.max(0.0).sqrt()];
    while let Some(idx) = greedy.next() {
        let c = coeffs.get(&idx);
        discarded -= c * c;
        out.push(discarded.max(0.0).sqrt());
    }
    if let Some(last) = out.last_mut() {
        *last = 0.0;
    }
    out
}

/// `max_N (N + 1)^s sigma_N` along the greedy tree sequence.
///
/// Greedy trees are not optimal, so this bounds the tree approximation
/// quasi-norm from above.
pub fn anorm_tree_estimate(coeffs: &WaveletCoeffs, s: f64) -> f64 {
    greedy_tree_errors(coeffs)
        .iter()
        .enumerate()
        .map(|(n, sigma)| ((n + 1) as f64).powf(s) * sigma)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tree(seed: u64, dim: usize) -> WaveletCoeffs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flat: Vec<f64> = (0..dim)
            .map(|i| {
                let lvl = WaveletIndex::from_flat(i).level as i32;
                if rng.random_bool(0.3) {
                    0.0
                } else {
                    rng.random_range(-1.0..1.0) * 2f64.powi(-lvl)
                }
            })
            .collect();
        WaveletCoeffs::tree_from_dense(&flat, 1e-14)
    }

    #[test]
    fn zero_tolerance_keeps_smallest_tree() {
        let c = random_tree(1, 255);
        let out = coarsen(&c, 0.0);
        let mut nonzero = c.clone();
        nonzero.prune(0.0);
        assert_eq!(out.support(), nonzero.support());
        assert!(out.is_tree());
    }

    #[test]
    fn large_tolerance_empties() {
        let c = random_tree(2, 127);
        assert!(coarsen(&c, c.l2_norm()).is_empty());
    }

    #[test]
    fn discarded_mass_within_tolerance() {
        for seed in 0..20 {
            let c = random_tree(seed, 511);
            for frac in [0.01, 0.1, 0.5] {
                let tol = frac * c.l2_norm();
                let out = coarsen(&c, tol);
                out.check_tree().unwrap();
                let disc: f64 = c
                    .iter()
                    .filter(|(i, _)| !out.support().contains(i))
                    .map(|(_, v)| v * v)
                    .sum::<f64>()
                    .sqrt();
                assert!(disc <= tol, "seed {seed}: {disc} > {tol}");
            }
        }
    }

    #[test]
    fn dense_variant_agrees() {
        for seed in 0..10 {
            let c = random_tree(seed, 1023);
            let flat = c.to_dense(1023).unwrap();
            for frac in [0.0, 0.01, 0.1, 0.5, 1.0] {
                let tol = frac * c.l2_norm();
                let sparse = coarsen(&c, tol);
                let mask = coarsen_dense(&flat, tol);
                let from_mask: Vec<WaveletIndex> = (0..1023)
                    .filter(|i| mask[*i])
                    .map(WaveletIndex::from_flat)
                    .collect();
                assert_eq!(
                    from_mask.into_iter().collect::<std::collections::BTreeSet<_>>(),
                    sparse.support(),
                    "seed {seed} frac {frac}"
                );
            }
        }
    }

    #[test]
    fn single_root() {
        let mut c = WaveletCoeffs::new_tree();
        c.insert(WaveletIndex::new(0, 1).unwrap(), -3.0);
        for s in [0.5, 1.0, 2.0] {
            assert_eq!(anorm_tree_estimate(&c, s), 3.0);
        }
    }

    #[test]
    fn homogeneity() {
        let c = random_tree(5, 63);
        let mut d = c.clone();
        d.scale(-2.5);
        let a = anorm_tree_estimate(&c, 1.0);
        let b = anorm_tree_estimate(&d, 1.0);
        assert!((b - 2.5 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn geometric_chain() {
        let r: f64 = 0.5;
        let len = 8;
        let mut c = WaveletCoeffs::new_tree();
        for l in 0..len {
            c.insert(WaveletIndex::new(l, 0).unwrap(), r.powi(l as i32));
        }
        let s = 1.0;
        let errs = greedy_tree_errors(&c);
        let mut expected = 0.0f64;
        assert_eq!(errs.len(), len as usize + 1);
        for (n, err) in errs.iter().enumerate() {
            let tail: f64 = (n..len as usize)
                .map(|i| r.powi(2 * i as i32))
                .sum::<f64>()
                .sqrt();
            assert!((err - tail).abs() < 1e-14);
            expected = expected.max((n + 1) as f64 * tail);
        }
        assert!((anorm_tree_estimate(&c, s) - expected).abs() < 1e-14);
    }
}
