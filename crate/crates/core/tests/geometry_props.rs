use std::collections::BTreeSet;

use proptest::prelude::*;
use thermo_axioms::geometry::{boundary_faces, check_exterior_identity, exterior, is_separate, material_universe};
use thermo_axioms::{Atom, CellId, Grid, GridMeasure, Part, Region};

fn grid(d: [usize; 3]) -> Grid<f64> {
    Grid::new(d, 1.0).unwrap()
}

fn region_from_bits(g: &Grid<f64>, bits: u64) -> Region {
    Region::from_cells(g.cells().filter(|c| bits >> c.index() & 1 == 1))
}

/// Face-adjacent pairs inside `a`, counted from coordinates alone.
fn adjacent_pairs(g: &Grid<f64>, a: &Region) -> usize {
    let pts: Vec<[usize; 3]> = a.iter().map(|c| g.coords(c)).collect();
    let mut n = 0;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            let d: usize = (0..3).map(|k| p[k].abs_diff(q[k])).sum();
            if d == 1 {
                n += 1;
            }
        }
    }
    n
}

fn dims() -> impl Strategy<Value = [usize; 3]> {
    (1usize..=3, 1usize..=3, 1usize..=2).prop_map(|(x, y, z)| [x, y, z])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exterior_identity_for_nested_regions(d in dims(), b_bits in any::<u64>(), a_bits in any::<u64>()) {
        let g = grid(d);
        let b = region_from_bits(&g, b_bits);
        let a = region_from_bits(&g, a_bits & b_bits);
        prop_assert!(check_exterior_identity(&a, &b, &g).unwrap());
        // the exterior and the region partition the grid
        let ext = exterior(&a, &g).unwrap();
        prop_assert_eq!(ext.len() + a.len(), g.num_cells());
        prop_assert!(ext.intersection(&a).is_empty());
    }

    #[test]
    fn boundary_and_closure_counts(d in dims(), bits in any::<u64>()) {
        let g = grid(d);
        let a = region_from_bits(&g, bits);
        let pairs = adjacent_pairs(&g, &a);
        // each shared face is interior, every other face of a cell is on the boundary
        prop_assert_eq!(boundary_faces(&a, &g).len(), 6 * a.len() - 2 * pairs);
        let cl = a.closure(&g);
        prop_assert_eq!(cl.cells.len(), a.len());
        prop_assert_eq!(cl.faces.len(), 6 * a.len() - pairs);
        prop_assert!((cl.volume(&g) - a.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn boundary_is_symmetric_between_region_and_exterior(d in dims(), bits in any::<u64>()) {
        let g = grid(d);
        let a = region_from_bits(&g, bits);
        let ext = exterior(&a, &g).unwrap();
        let inner: BTreeSet<_> = boundary_faces(&a, &g).iter().map(|f| f.face).collect();
        let outer: BTreeSet<_> = boundary_faces(&ext, &g).iter().map(|f| f.face).collect();
        // faces on the grid border belong to one side only
        let shared: BTreeSet<_> = inner.intersection(&outer).copied().collect();
        for f in &shared {
            prop_assert!(g.face_cells(f).iter().all(Option::is_some));
        }
        let fa = boundary_faces(&a, &g);
        let fe = boundary_faces(&ext, &g);
        for f in &shared {
            prop_assert_eq!(fa.orientation(f).map(|o| o.reversed()), fe.orientation(f));
        }
    }

    #[test]
    fn separation_matches_manhattan_distance(d in dims(), x in any::<u64>(), y in any::<u64>()) {
        let g = grid(d);
        let a = region_from_bits(&g, x);
        let c = region_from_bits(&g, y);
        let oracle = a.iter().all(|p| c.iter().all(|q| {
            let (p, q) = (g.coords(p), g.coords(q));
            (0..3).map(|k| p[k].abs_diff(q[k])).sum::<usize>() >= 2
        }));
        prop_assert_eq!(is_separate(&a, &c, &g), oracle);
        prop_assert_eq!(is_separate(&c, &a, &g), oracle);
    }

    #[test]
    fn density_measures_are_additive(
        values in proptest::collection::vec(-10.0f64..10.0, 8),
        split in any::<u64>(),
    ) {
        let g = grid([2, 2, 2]);
        let mu = GridMeasure::from_cells(g.cells().zip(values.iter().copied()));
        let all = g.full_region().closure(&g);
        let atoms: Vec<Atom> = all.atoms().collect();
        let p = Part::from_atoms(atoms.iter().enumerate().filter(|(i, _)| split >> (i % 64) & 1 == 1).map(|(_, a)| *a));
        let q = all.difference(&p);
        let sum: f64 = values.iter().sum();
        prop_assert!((mu.eval(&p) + mu.eval(&q) - mu.eval(&all)).abs() < 1e-9);
        prop_assert!((mu.total() - sum).abs() < 1e-9);
        prop_assert_eq!(mu.eval(&Part::empty()), 0.0);
    }
}

#[test]
fn material_universe_size_on_small_grids() {
    let g = grid([2, 2, 1]);
    let all = g.full_region();
    // the whole grid: every nonempty subset, and each exterior is again one
    assert_eq!(material_universe(&all, &g, 4096).unwrap().len(), 15);
    let b = Region::from_cells([CellId(0), CellId(1)]);
    let u = material_universe(&b, &g, 4096).unwrap();
    // three subbodies and their three exteriors
    assert_eq!(u.len(), 6);
}

#[test]
fn translation_leaves_the_grid() {
    let g = grid([2, 1, 1]);
    let a = Region::from_cells([CellId(0)]);
    assert_eq!(a.translated(&g, [1, 0, 0]), Some(Region::from_cells([CellId(1)])));
    assert_eq!(a.translated(&g, [-1, 0, 0]), None);
    assert_eq!(a.translated(&g, [2, 0, 0]), None);
}
