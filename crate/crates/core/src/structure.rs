//! The thermodynamic structure: a time grid, energy and entropy measures per
//! time sample, and heat/entropy flux families indexed by source region.
//!
//! Flux sign: `H(P, D) > 0` means heat flows from `D` into `P`.
//!
//! A flux family is stored either as a *kernel* (per-target-atom lists of
//! `(source cell, value)` contributions, so `H(·, D)` is the sum of the
//! contributions whose source lies in `D`) or as explicit per-source tables.
//! Tables take precedence over the kernel for the sources they name.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::{in_material_universe, Atom, CellId, GeometryError, Grid, Part, Region};
use crate::measure::GridMeasure;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StructureError {
    #[error("time grid is empty")]
    EmptyTime,
    #[error("time samples must be finite and strictly increasing (sample {0})")]
    NotIncreasing(usize),
    #[error("a derivative needs at least two time samples")]
    Underdetermined,
    #[error("time index {0} out of range")]
    TimeIndex(usize),
    #[error("source region is not in the material universe")]
    UnknownSource,
    #[error("part lies outside the function's domain")]
    Domain,
    #[error("{what} has {got} time slices, expected {expected}")]
    SliceCount { what: &'static str, got: usize, expected: usize },
    #[error("body must be nonempty")]
    EmptyBody,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Finite strictly increasing sample of the time interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<T> {
    samples: Vec<T>,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(samples: Vec<T>) -> Result<Self, StructureError> {
        if samples.is_empty() {
            return Err(StructureError::EmptyTime);
        }
        for (i, t) in samples.iter().enumerate() {
            if !t.is_finite() || (i > 0 && *t <= samples[i - 1]) {
                return Err(StructureError::NotIncreasing(i));
            }
        }
        Ok(TimeGrid { samples })
    }

    pub fn uniform(start: T, dt: T, count: usize) -> Result<Self, StructureError> {
        Self::new((0..count).map(|k| start + dt * T::lit(k as f64)).collect())
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Forward difference at `k`, backward difference at the last sample.
    pub fn derivative<F: Fn(usize) -> T>(&self, k: usize, value: F) -> Result<T, StructureError> {
        let n = self.samples.len();
        if n < 2 {
            return Err(StructureError::Underdetermined);
        }
        if k >= n {
            return Err(StructureError::TimeIndex(k));
        }
        let (a, b) = if k + 1 < n { (k, k + 1) } else { (k - 1, k) };
        Ok((value(b) - value(a)) / (self.samples[b] - self.samples[a]))
    }
}

/// Source-attributed flux contributions at one time sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FluxField<T> {
    by_atom: BTreeMap<Atom, Vec<(CellId, T)>>,
}

impl<T: Scalar> FluxField<T> {
    pub fn new() -> Self {
        FluxField { by_atom: BTreeMap::new() }
    }

    /// Adds a contribution from `source` to `atom`, merging repeated sources.
    pub fn add(&mut self, atom: Atom, source: CellId, value: T) {
        let list = self.by_atom.entry(atom).or_default();
        match list.iter_mut().find(|(s, _)| *s == source) {
            Some(e) => e.1 = e.1 + value,
            None => {
                list.push((source, value));
                list.sort_by_key(|e| e.0);
            }
        }
    }

    pub fn set(&mut self, atom: Atom, source: CellId, value: T) {
        let list = self.by_atom.entry(atom).or_default();
        match list.iter_mut().find(|(s, _)| *s == source) {
            Some(e) => e.1 = value,
            None => {
                list.push((source, value));
                list.sort_by_key(|e| e.0);
            }
        }
    }

    pub fn get(&self, atom: &Atom, source: CellId) -> Option<T> {
        self.by_atom.get(atom)?.iter().find(|e| e.0 == source).map(|e| e.1)
    }

    pub fn contributions(&self, atom: &Atom) -> &[(CellId, T)] {
        self.by_atom.get(atom).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Atom, CellId, T)> + '_ {
        self.by_atom.iter().flat_map(|(a, v)| v.iter().map(move |(s, x)| (*a, *s, *x)))
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> + '_ {
        self.by_atom.keys()
    }

    pub fn lists(&self) -> impl Iterator<Item = (&Atom, &[(CellId, T)])> + '_ {
        self.by_atom.iter().map(|(a, v)| (a, v.as_slice()))
    }

    /// Sum of contributions to `atom` whose source is set in `source_mask`.
    pub fn value(&self, atom: &Atom, source_mask: &[bool]) -> T {
        self.contributions(atom)
            .iter()
            .filter(|(s, _)| source_mask[s.index()])
            .map(|(_, v)| *v)
            .sum()
    }

    pub fn eval(&self, part: &Part, source_mask: &[bool]) -> T {
        let cells: T = part.cells.iter().map(|c| self.value(&Atom::Cell(*c), source_mask)).sum();
        let faces: T = part.faces.iter().map(|f| self.value(&Atom::Face(*f), source_mask)).sum();
        cells + faces
    }

    /// Materialises `F(·, D)` restricted to the parts of `host`.
    pub fn measure(&self, source_mask: &[bool], host: &Part) -> GridMeasure<T> {
        let mut m = GridMeasure::new();
        for (atom, list) in &self.by_atom {
            if !host.contains(atom) {
                continue;
            }
            let mut any = false;
            let mut v = T::zero();
            for (s, x) in list {
                if source_mask[s.index()] {
                    any = true;
                    v = v + *x;
                }
            }
            if any {
                m.add_atom(*atom, v);
            }
        }
        m
    }
}

/// A time-indexed family `D ↦ F(·, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxFamily<T> {
    pub(crate) kernel: Option<Vec<FluxField<T>>>,
    pub(crate) tables: Vec<BTreeMap<Region, GridMeasure<T>>>,
}

impl<T: Scalar> FluxFamily<T> {
    pub fn from_kernel(kernel: Vec<FluxField<T>>) -> Self {
        let n = kernel.len();
        FluxFamily { kernel: Some(kernel), tables: vec![BTreeMap::new(); n] }
    }

    pub fn from_tables(tables: Vec<BTreeMap<Region, GridMeasure<T>>>) -> Self {
        FluxFamily { kernel: None, tables }
    }

    pub fn kernel(&self) -> Option<&[FluxField<T>]> {
        self.kernel.as_deref()
    }

    pub fn tables(&self) -> &[BTreeMap<Region, GridMeasure<T>>] {
        &self.tables
    }

    pub fn table(&self, d: &Region, k: usize) -> Option<&GridMeasure<T>> {
        self.tables.get(k)?.get(d)
    }

    pub fn set_table(&mut self, d: Region, k: usize, m: GridMeasure<T>) {
        self.tables[k].insert(d, m);
    }

    pub fn kernel_mut(&mut self) -> Option<&mut Vec<FluxField<T>>> {
        self.kernel.as_mut()
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// True if `F(·, D)` is defined at `k`.
    pub fn defines(&self, d: &Region, k: usize) -> bool {
        self.kernel.is_some() || self.table(d, k).is_some()
    }

    /// Value with no domain checks. `None` when `D` has no entry at `k`.
    pub fn eval_raw(&self, part: &Part, d: &Region, d_mask: &[bool], k: usize) -> Option<T> {
        if let Some(t) = self.table(d, k) {
            return Some(t.eval(part));
        }
        self.kernel.as_ref().map(|kern| kern[k].eval(part, d_mask))
    }

    /// Atom value with no domain checks.
    pub fn atom_raw(&self, atom: Atom, d: &Region, d_mask: &[bool], k: usize) -> Option<T> {
        if let Some(t) = self.table(d, k) {
            return Some(t.atom(atom));
        }
        self.kernel.as_ref().map(|kern| kern[k].value(&atom, d_mask))
    }

    /// `F(·, D)` at `k` as an explicit measure on `host`.
    pub fn measure(&self, d: &Region, d_mask: &[bool], host: &Part, k: usize) -> Option<GridMeasure<T>> {
        if let Some(t) = self.table(d, k) {
            return Some(t.clone());
        }
        self.kernel.as_ref().map(|kern| kern[k].measure(d_mask, host))
    }
}

/// A finite model of the thermodynamic structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermoModel<T> {
    pub(crate) grid: Grid<T>,
    pub(crate) body: Region,
    pub(crate) time: TimeGrid<T>,
    pub(crate) energy: Vec<GridMeasure<T>>,
    pub(crate) entropy: Vec<GridMeasure<T>>,
    pub(crate) heat_flux: FluxFamily<T>,
    pub(crate) entropy_flux: FluxFamily<T>,
}

/// `mask` of cells in `body` but not in `d`.
fn complement_in(body_mask: &[bool], d_mask: &[bool]) -> Vec<bool> {
    body_mask.iter().zip(d_mask).map(|(b, d)| *b && !*d).collect()
}

/// Whether every atom of `part` lies in the closure of the cells in `mask`.
pub fn part_in_closure<T: Scalar>(part: &Part, mask: &[bool], grid: &Grid<T>) -> bool {
    part.cells.iter().all(|c| c.index() < mask.len() && mask[c.index()])
        && part.faces.iter().all(|f| grid.contains_face(f) && grid.touches(f, mask))
}

impl<T: Scalar> ThermoModel<T> {
    pub fn new(
        grid: Grid<T>,
        body: Region,
        time: TimeGrid<T>,
        energy: Vec<GridMeasure<T>>,
        entropy: Vec<GridMeasure<T>>,
        heat_flux: FluxFamily<T>,
        entropy_flux: FluxFamily<T>,
    ) -> Result<Self, StructureError> {
        if body.is_empty() {
            return Err(StructureError::EmptyBody);
        }
        grid.validate_region(&body)?;
        let n = time.len();
        let counts = [
            ("energy", energy.len()),
            ("entropy", entropy.len()),
            ("heat flux", heat_flux.tables.len()),
            ("entropy flux", entropy_flux.tables.len()),
            ("heat flux kernel", heat_flux.kernel.as_ref().map_or(n, |k| k.len())),
            ("entropy flux kernel", entropy_flux.kernel.as_ref().map_or(n, |k| k.len())),
        ];
        for (what, got) in counts {
            if got != n {
                return Err(StructureError::SliceCount { what, got, expected: n });
            }
        }
        for m in energy.iter().chain(&entropy) {
            grid.validate_part(&m.support())?;
        }
        for fam in [&heat_flux, &entropy_flux] {
            for slice in &fam.tables {
                for (d, m) in slice {
                    grid.validate_region(d)?;
                    if !in_material_universe(d, &body, &grid) {
                        return Err(StructureError::UnknownSource);
                    }
                    grid.validate_part(&m.support())?;
                }
            }
            for field in fam.kernel.iter().flatten() {
                for (atom, src, _) in field.iter() {
                    grid.validate_part(&Part::atom(atom))?;
                    if !grid.contains_cell(src) {
                        return Err(GeometryError::CellOutOfBounds(src.index()).into());
                    }
                }
            }
        }
        Ok(ThermoModel { grid, body, time, energy, entropy, heat_flux, entropy_flux })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn body(&self) -> &Region {
        &self.body
    }

    pub fn time(&self) -> &TimeGrid<T> {
        &self.time
    }

    pub fn energy(&self, k: usize) -> &GridMeasure<T> {
        &self.energy[k]
    }

    pub fn entropy(&self, k: usize) -> &GridMeasure<T> {
        &self.entropy[k]
    }

    pub fn energy_series(&self) -> &[GridMeasure<T>] {
        &self.energy
    }

    pub fn entropy_series(&self) -> &[GridMeasure<T>] {
        &self.entropy
    }

    pub fn heat_flux_family(&self) -> &FluxFamily<T> {
        &self.heat_flux
    }

    pub fn entropy_flux_family(&self) -> &FluxFamily<T> {
        &self.entropy_flux
    }

    pub fn body_closure(&self) -> Part {
        self.body.closure(&self.grid)
    }

    fn check_index(&self, k: usize) -> Result<(), StructureError> {
        if k >= self.time.len() {
            Err(StructureError::TimeIndex(k))
        } else {
            Ok(())
        }
    }

    fn check_body_part(&self, part: &Part) -> Result<(), StructureError> {
        if part_in_closure(part, &self.grid.mask(&self.body), &self.grid) {
            Ok(())
        } else {
            Err(StructureError::Domain)
        }
    }

    pub fn ddt_energy(&self, part: &Part, k: usize) -> Result<T, StructureError> {
        self.check_body_part(part)?;
        self.time.derivative(k, |j| self.energy[j].eval(part))
    }

    pub fn ddt_entropy(&self, part: &Part, k: usize) -> Result<T, StructureError> {
        self.check_body_part(part)?;
        self.time.derivative(k, |j| self.entropy[j].eval(part))
    }

    /// Mask of `D` and of `D^b`, after checking `D` is a universe element.
    fn source_masks(&self, d: &Region) -> Result<(Vec<bool>, Vec<bool>), StructureError> {
        self.grid.validate_region(d)?;
        if !in_material_universe(d, &self.body, &self.grid) {
            return Err(StructureError::UnknownSource);
        }
        let d_mask = self.grid.mask(d);
        let rest = complement_in(&self.grid.mask(&self.body), &d_mask);
        Ok((d_mask, rest))
    }

    fn family_eval(&self, fam: &FluxFamily<T>, part: &Part, d: &Region, k: usize) -> Result<T, StructureError> {
        self.check_index(k)?;
        let (d_mask, rest) = self.source_masks(d)?;
        if !part_in_closure(part, &rest, &self.grid) {
            return Err(StructureError::Domain);
        }
        fam.eval_raw(part, d, &d_mask, k).ok_or(StructureError::UnknownSource)
    }

    /// `H(P, D)` at sample `k`.
    pub fn heat_flux(&self, part: &Part, d: &Region, k: usize) -> Result<T, StructureError> {
        self.family_eval(&self.heat_flux, part, d, k)
    }

    /// `M(P, D)` at sample `k`.
    pub fn entropy_flux(&self, part: &Part, d: &Region, k: usize) -> Result<T, StructureError> {
        self.family_eval(&self.entropy_flux, part, d, k)
    }

    /// `K(P, D) = M(P - ∂D, D)`.
    pub fn radiative_flux(&self, part: &Part, d: &Region, k: usize) -> Result<T, StructureError> {
        let (rest, _) = part.split_boundary(&self.grid, &self.grid.mask(d));
        self.entropy_flux(&rest, d, k)
    }

    /// `J(P, D) = M(P ∩ ∂D, D)`.
    pub fn conductive_flux(&self, part: &Part, d: &Region, k: usize) -> Result<T, StructureError> {
        let (_, on) = part.split_boundary(&self.grid, &self.grid.mask(d));
        self.entropy_flux(&on, d, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_grid_invariants() {
        assert!(TimeGrid::<f64>::new(vec![]).is_err());
        assert_eq!(TimeGrid::new(vec![0.0, 0.0]), Err(StructureError::NotIncreasing(1)));
        assert_eq!(TimeGrid::new(vec![0.0, f64::NAN]), Err(StructureError::NotIncreasing(1)));
        let single = TimeGrid::new(vec![1.0]).unwrap();
        assert_eq!(single.derivative(0, |_| 0.0), Err(StructureError::Underdetermined));
    }

    #[test]
    fn derivative_of_linear_is_exact() {
        let t = TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let s = t.samples().to_vec();
        for k in 0..3 {
            assert_eq!(t.derivative(k, |j| s[j]).unwrap(), 1.0);
            assert_eq!(t.derivative(k, |_| 7.0).unwrap(), 0.0);
        }
        assert_eq!(t.derivative(3, |_| 0.0), Err(StructureError::TimeIndex(3)));
    }

    #[test]
    fn nonuniform_spacing_uses_actual_steps() {
        let t = TimeGrid::new(vec![0.0, 0.1, 0.4]).unwrap();
        let v = [0.0f64, 1.0, 4.0];
        assert!((t.derivative(1, |j| v[j]).unwrap() - 10.0).abs() < 1e-12);
        assert!((t.derivative(2, |j| v[j]).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn flux_field_sums_sources_in_mask() {
        let mut f = FluxField::new();
        let a = Atom::Cell(CellId(1));
        f.add(a, CellId(0), 2.0);
        f.add(a, CellId(2), 3.0);
        f.add(a, CellId(0), 1.0);
        assert_eq!(f.value(&a, &[true, false, false]), 3.0);
        assert_eq!(f.value(&a, &[true, false, true]), 6.0);
        assert_eq!(f.value(&Atom::Cell(CellId(0)), &[true, true, true]), 0.0);
    }
}
