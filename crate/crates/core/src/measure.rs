//! Finite signed measures on the cell/face algebra.
//!
//! A [`GridMeasure`] is stored as atom densities, so it is additive by
//! construction. Tabulated `entries` override the value on specific parts;
//! they exist to represent set functions read from files, which may fail to
//! be additive and are what [`is_measure`] is really for.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::{is_separate, part_separate_from, Atom, CellId, Face, Grid, Part, Region};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeasureError {
    #[error("part is not contained in the measure's host")]
    Domain,
    #[error("source regions of an additivity pair are not separate from each other or from the part")]
    NotSeparate,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridMeasure<T> {
    cells: BTreeMap<CellId, T>,
    faces: BTreeMap<Face, T>,
    entries: BTreeMap<Part, T>,
}

impl<T: Scalar> GridMeasure<T> {
    pub fn new() -> Self {
        GridMeasure { cells: BTreeMap::new(), faces: BTreeMap::new(), entries: BTreeMap::new() }
    }

    pub fn from_cells<I: IntoIterator<Item = (CellId, T)>>(cells: I) -> Self {
        let mut m = Self::new();
        for (c, v) in cells {
            m.set_cell(c, v);
        }
        m
    }

    pub fn set_cell(&mut self, cell: CellId, value: T) {
        self.cells.insert(cell, value);
    }

    pub fn set_face(&mut self, face: Face, value: T) {
        self.faces.insert(face, value);
    }

    pub fn add_cell(&mut self, cell: CellId, value: T) {
        let v = self.cells.entry(cell).or_insert_with(T::zero);
        *v = *v + value;
    }

    pub fn add_face(&mut self, face: Face, value: T) {
        let v = self.faces.entry(face).or_insert_with(T::zero);
        *v = *v + value;
    }

    pub fn add_atom(&mut self, atom: Atom, value: T) {
        match atom {
            Atom::Cell(c) => self.add_cell(c, value),
            Atom::Face(f) => self.add_face(f, value),
        }
    }

    /// Overrides the value on one specific part.
    pub fn set_entry(&mut self, part: Part, value: T) {
        self.entries.insert(part, value);
    }

    pub fn cell_densities(&self) -> &BTreeMap<CellId, T> {
        &self.cells
    }

    pub fn face_densities(&self) -> &BTreeMap<Face, T> {
        &self.faces
    }

    pub fn entries(&self) -> &BTreeMap<Part, T> {
        &self.entries
    }

    pub fn density(&self, atom: &Atom) -> T {
        match atom {
            Atom::Cell(c) => self.cells.get(c).copied().unwrap_or_else(T::zero),
            Atom::Face(f) => self.faces.get(f).copied().unwrap_or_else(T::zero),
        }
    }

    /// Density sum over the part, ignoring tabulated entries.
    pub fn density_eval(&self, part: &Part) -> T {
        let cells: T = part.cells.iter().filter_map(|c| self.cells.get(c)).copied().sum();
        let faces: T = part.faces.iter().filter_map(|f| self.faces.get(f)).copied().sum();
        cells + faces
    }

    pub fn eval(&self, part: &Part) -> T {
        match self.entries.get(part) {
            Some(v) => *v,
            None => self.density_eval(part),
        }
    }

    pub fn eval_in(&self, part: &Part, host: &Part) -> Result<T, MeasureError> {
        if !part.is_subset(host) {
            return Err(MeasureError::Domain);
        }
        Ok(self.eval(part))
    }

    /// Value on a single atom, honouring singleton entries.
    pub fn atom(&self, atom: Atom) -> T {
        if self.entries.is_empty() {
            self.density(&atom)
        } else {
            self.eval(&Part::atom(atom))
        }
    }

    /// Every atom or part carrying a stored value.
    pub fn support(&self) -> Part {
        let mut p = Part::new(self.cells.keys().copied(), self.faces.keys().copied());
        for e in self.entries.keys() {
            p = p.union(e);
        }
        p
    }

    pub fn support_within(&self, host: &Part) -> bool {
        self.support().is_subset(host)
    }

    pub fn total(&self) -> T {
        self.cells.values().copied().sum::<T>() + self.faces.values().copied().sum::<T>()
    }

    /// Same densities with entries dropped when they mix cells and faces.
    pub fn pure_entries(&self) -> GridMeasure<T> {
        GridMeasure {
            cells: self.cells.clone(),
            faces: self.faces.clone(),
            entries: self.entries.iter().filter(|(p, _)| !p.is_mixed()).map(|(p, v)| (p.clone(), *v)).collect(),
        }
    }

    pub fn map<F: Fn(T) -> T>(&self, f: F) -> GridMeasure<T> {
        GridMeasure {
            cells: self.cells.iter().map(|(k, v)| (*k, f(*v))).collect(),
            faces: self.faces.iter().map(|(k, v)| (*k, f(*v))).collect(),
            entries: self.entries.iter().map(|(k, v)| (k.clone(), f(*v))).collect(),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = T> + '_ {
        self.cells.values().chain(self.faces.values()).chain(self.entries.values()).copied()
    }
}

/// Outcome of a measure check.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureCheck<T> {
    Measure,
    NonFinite { part: Part },
    /// `mu(a ∪ b) != mu(a) + mu(b)` for disjoint `a`, `b`.
    NonAdditive { a: Part, b: Part, union: T, sum: T },
}

impl<T> MeasureCheck<T> {
    pub fn is_measure(&self) -> bool {
        matches!(self, MeasureCheck::Measure)
    }
}

/// Walks the chain of prefixes of `part` to find a disjoint pair whose
/// values do not add up.
fn chain_witness<T: Scalar>(mu: &GridMeasure<T>, part: &Part, tol: T) -> Option<MeasureCheck<T>> {
    let atoms: Vec<Atom> = part.atoms().collect();
    let mut prefix = Part::empty();
    for a in atoms {
        let single = Part::atom(a);
        let next = prefix.union(&single);
        let union = mu.eval(&next);
        let sum = mu.eval(&prefix) + mu.eval(&single);
        if !union.close_to(sum, tol) {
            return Some(MeasureCheck::NonAdditive { a: prefix, b: single, union, sum });
        }
        prefix = next;
    }
    None
}

/// Whether `mu` is a finite additive set function on the parts of `host`.
///
/// Density-only measures are additive by construction; the check then only
/// looks for non-finite values. Tabulated entries are compared against the
/// atom values, and any mismatch is reported with a concrete disjoint pair.
pub fn is_measure<T: Scalar>(mu: &GridMeasure<T>, host: &Part, tol: T) -> MeasureCheck<T> {
    for (c, v) in &mu.cells {
        if !v.is_finite() {
            return MeasureCheck::NonFinite { part: Part::new([*c], []) };
        }
    }
    for (f, v) in &mu.faces {
        if !v.is_finite() {
            return MeasureCheck::NonFinite { part: Part::new([], [*f]) };
        }
    }
    for (p, v) in &mu.entries {
        if !v.is_finite() {
            return MeasureCheck::NonFinite { part: p.clone() };
        }
    }
    for (p, v) in &mu.entries {
        if p.is_empty() {
            if *v != T::zero() {
                return MeasureCheck::NonAdditive { a: Part::empty(), b: Part::empty(), union: *v, sum: *v + *v };
            }
            continue;
        }
        let probe = if p.len() == 1 {
            // a singleton override only conflicts with the parts containing it
            match host.atoms().find(|a| !p.contains(a)) {
                Some(other) => {
                    let mut q = p.clone();
                    q.insert(other);
                    q
                }
                None => continue,
            }
        } else {
            p.clone()
        };
        if let Some(w) = chain_witness(mu, &probe, tol) {
            return w;
        }
    }
    MeasureCheck::Measure
}

/// A real function of a part and a source region.
pub trait SetFunction<T> {
    fn value(&self, part: &Part, source: &Region) -> T;
}

impl<T, F: Fn(&Part, &Region) -> T> SetFunction<T> for F {
    fn value(&self, part: &Part, source: &Region) -> T {
        self(part, source)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SAdditivity<T> {
    Additive,
    /// No pairs to check.
    Vacuous,
    Violated { a: Region, c: Region, union: T, sum: T },
}

/// Checks `f(P, A ∪ C) = f(P, A) + f(P, C)` for every supplied pair.
///
/// Every pair must be separate, and `P` must be separate from both members.
pub fn is_s_additive<T: Scalar, F: SetFunction<T>>(
    f: &F,
    part: &Part,
    pairs: &[(Region, Region)],
    grid: &Grid<T>,
    tol: T,
) -> Result<SAdditivity<T>, MeasureError> {
    if pairs.is_empty() {
        return Ok(SAdditivity::Vacuous);
    }
    for (a, c) in pairs {
        let joined = a.union(c);
        if !is_separate(a, c, grid) || !part_separate_from(part, &grid.mask(&joined), grid) {
            return Err(MeasureError::NotSeparate);
        }
        let union = f.value(part, &joined);
        let sum = f.value(part, a) + f.value(part, c);
        if !union.close_to(sum, tol) {
            return Ok(SAdditivity::Violated { a: a.clone(), c: c.clone(), union, sum });
        }
    }
    Ok(SAdditivity::Additive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Axis;

    fn c(i: u32) -> CellId {
        CellId(i)
    }

    #[test]
    fn eval_examples() {
        let mu = GridMeasure::from_cells([(c(0), 2.0), (c(1), 3.0)]);
        assert_eq!(mu.eval(&Part::empty()), 0.0);
        assert_eq!(mu.eval(&Part::new([c(0), c(1)], [])), 5.0);

        let f = Face::new(Axis::X, [1, 0, 0]);
        let mut mixed = GridMeasure::new();
        mixed.set_cell(c(0), 4.0);
        mixed.set_face(f, -1.0);
        assert_eq!(mixed.eval(&Part::new([c(0)], [f])), 3.0);
    }

    #[test]
    fn eval_in_rejects_outside_parts() {
        let mu = GridMeasure::from_cells([(c(0), 1.0)]);
        let host = Part::new([c(0)], []);
        assert_eq!(mu.eval_in(&Part::new([c(1)], []), &host), Err(MeasureError::Domain));
        assert_eq!(mu.eval_in(&host, &host), Ok(1.0));
    }

    #[test]
    fn density_measure_is_measure() {
        let mu = GridMeasure::from_cells([(c(0), 2.0), (c(1), -3.0)]);
        let host = Part::new([c(0), c(1)], []);
        assert!(is_measure(&mu, &host, 1e-12).is_measure());
    }

    #[test]
    fn broken_table_has_witness() {
        let mut mu = GridMeasure::from_cells([(c(0), 2.0), (c(1), 3.0)]);
        let both = Part::new([c(0), c(1)], []);
        mu.set_entry(both.clone(), 6.0);
        match is_measure(&mu, &both, 1e-12) {
            MeasureCheck::NonAdditive { a, b, union, sum } => {
                assert!(a.is_disjoint(&b));
                assert_eq!(a.union(&b), both);
                assert_eq!(union, 6.0);
                assert_eq!(sum, 5.0);
            }
            other => panic!("expected witness, got {other:?}"),
        }
    }

    #[test]
    fn singleton_override_is_caught() {
        let mut mu = GridMeasure::from_cells([(c(0), 2.0), (c(1), 3.0)]);
        mu.set_entry(Part::new([c(0)], []), 2.5);
        let host = Part::new([c(0), c(1)], []);
        assert!(!is_measure(&mu, &host, 1e-12).is_measure());
        // with nothing else in the host the override is harmless
        assert!(is_measure(&mu, &Part::new([c(0)], []), 1e-12).is_measure());
    }

    #[test]
    fn consistent_table_passes() {
        let mut mu = GridMeasure::from_cells([(c(0), 2.0), (c(1), 3.0)]);
        mu.set_entry(Part::new([c(0), c(1)], []), 5.0);
        assert!(is_measure(&mu, &Part::new([c(0), c(1)], []), 1e-12).is_measure());
    }

    #[test]
    fn non_finite_fails() {
        let mu = GridMeasure::from_cells([(c(0), f64::INFINITY)]);
        assert!(matches!(
            is_measure(&mu, &Part::new([c(0)], []), 1e-12),
            MeasureCheck::NonFinite { .. }
        ));
    }

    fn line() -> Grid<f64> {
        Grid::new([5, 1, 1], 1.0).unwrap()
    }

    #[test]
    fn s_additivity() {
        let grid = line();
        let a = Region::from_cells([c(0)]);
        let b = Region::from_cells([c(4)]);
        let p = Part::new([c(2)], []);
        // flux as a sum of per-source contributions
        let weight = |d: &Region| d.iter().map(|x| x.0 as f64 + 1.0).sum::<f64>();
        let f = |_: &Part, d: &Region| weight(d);
        let pairs = vec![(a.clone(), b.clone())];
        assert_eq!(is_s_additive(&f, &p, &pairs, &grid, 1e-12), Ok(SAdditivity::Additive));

        let bumped = |q: &Part, d: &Region| f(q, d) + if d.len() == 2 { 1.0 } else { 0.0 };
        assert!(matches!(
            is_s_additive(&bumped, &p, &pairs, &grid, 1e-12),
            Ok(SAdditivity::Violated { .. })
        ));
        assert_eq!(is_s_additive(&f, &p, &[], &grid, 1e-12), Ok(SAdditivity::Vacuous));

        let touching = vec![(a.clone(), Region::from_cells([c(1)]))];
        assert_eq!(is_s_additive(&f, &p, &touching, &grid, 1e-12), Err(MeasureError::NotSeparate));
    }
}
