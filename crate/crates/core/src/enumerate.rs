//! Bounded enumeration of subbodies and universe elements.
//!
//! Small bodies are enumerated exhaustively. Larger ones get a deterministic
//! sample: every singleton, every co-singleton, the body itself, and seeded
//! random subsets. Coverage is reported as sampled / total.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::geometry::{CellId, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumConfig {
    /// Largest candidate count enumerated exhaustively.
    pub cap: usize,
    /// Random subsets added when sampling.
    pub samples: usize,
    pub seed: u64,
}

impl Default for EnumConfig {
    fn default() -> Self {
        EnumConfig { cap: 4096, samples: 128, seed: 0x5eed }
    }
}

/// Candidates plus the size of the space they were drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Enumerated<X> {
    pub items: Vec<X>,
    pub total: f64,
    pub exhaustive: bool,
}

impl<X> Enumerated<X> {
    pub fn coverage(&self) -> f64 {
        if self.total == 0.0 {
            1.0
        } else {
            (self.items.len() as f64 / self.total).min(1.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coverage {
    pub enumerated: usize,
    pub total: f64,
    pub fraction: f64,
    pub exhaustive: bool,
}

impl<X> From<&Enumerated<X>> for Coverage {
    fn from(e: &Enumerated<X>) -> Self {
        Coverage {
            enumerated: e.items.len(),
            total: e.total,
            fraction: e.coverage(),
            exhaustive: e.exhaustive,
        }
    }
}

fn sort_regions(v: &mut [Region]) {
    v.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
}

/// Nonempty subsets of `body`, exhaustive or sampled.
pub fn subbodies(body: &Region, cfg: &EnumConfig) -> Enumerated<Region> {
    let cells: Vec<CellId> = body.iter().collect();
    let n = cells.len();
    let total = 2f64.powi(n as i32) - 1.0;
    if total <= cfg.cap as f64 {
        let mut items: Vec<Region> = (1u64..(1u64 << n))
            .map(|m| Region::from_cells((0..n).filter(|i| m >> i & 1 == 1).map(|i| cells[i])))
            .collect();
        sort_regions(&mut items);
        return Enumerated { items, total, exhaustive: true };
    }
    let mut set: BTreeSet<Region> = BTreeSet::new();
    for &c in &cells {
        set.insert(Region::from_cells([c]));
        set.insert(Region::from_cells(cells.iter().copied().filter(|x| *x != c)));
    }
    set.insert(body.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.samples {
        let r = Region::from_cells(cells.iter().copied().filter(|_| rng.gen_bool(0.5)));
        if !r.is_empty() {
            set.insert(r);
        }
    }
    let mut items: Vec<Region> = set.into_iter().collect();
    sort_regions(&mut items);
    Enumerated { items, total, exhaustive: false }
}

/// Universe elements: the subbodies plus the nonempty exteriors of each.
pub fn universe(
    subbodies: &Enumerated<Region>,
    grid_cells: &Region,
    body_is_grid: bool,
) -> Enumerated<Region> {
    let mut set: BTreeSet<Region> = subbodies.items.iter().cloned().collect();
    for a in &subbodies.items {
        let ext = grid_cells.difference(a);
        if !ext.is_empty() {
            set.insert(ext);
        }
    }
    let mut items: Vec<Region> = set.into_iter().collect();
    sort_regions(&mut items);
    let n = subbodies.total;
    let total = if body_is_grid { n } else { 2.0 * n };
    Enumerated { items, total, exhaustive: subbodies.exhaustive }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body(n: u32) -> Region {
        Region::from_cells((0..n).map(CellId))
    }

    #[test]
    fn small_bodies_are_exhaustive() {
        let e = subbodies(&body(3), &EnumConfig::default());
        assert!(e.exhaustive);
        assert_eq!(e.items.len(), 7);
        assert_eq!(e.coverage(), 1.0);
        assert_eq!(e.items[0].len(), 1);
        assert_eq!(e.items[6].len(), 3);
    }

    #[test]
    fn large_bodies_are_sampled_deterministically() {
        let cfg = EnumConfig { cap: 100, samples: 20, seed: 9 };
        let a = subbodies(&body(20), &cfg);
        let b = subbodies(&body(20), &cfg);
        assert!(!a.exhaustive);
        assert_eq!(a, b);
        // singletons, co-singletons and the body are always present
        assert!(a.items.len() >= 41);
        assert!(a.items.contains(&body(20)));
        assert!(a.coverage() < 1e-3);
    }

    #[test]
    fn universe_adds_exteriors() {
        let grid = body(3);
        let b = body(2);
        let sub = subbodies(&b, &EnumConfig::default());
        let u = universe(&sub, &grid, false);
        // {0},{1},{0,1} and exteriors {1,2},{0,2},{2}
        assert_eq!(u.items.len(), 6);
        assert_eq!(u.total, 6.0);
    }
}
