//! Reference models: explicit-Euler heat conduction on a voxel grid with
//! Clausius entropy accounting, plus targeted mutants that each break one
//! axiom.
//!
//! Temperature is internal to the generator. The model only exposes the
//! measures built from it: `E = c h³ θ`, `S = c h³ ln θ`, and flux kernels
//! attributing every exchange to its supplying cell.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{Atom, Axis, CellId, Face, Grid, Part, Region};
use crate::measure::GridMeasure;
use crate::structure::{FluxFamily, FluxField, StructureError, ThermoModel, TimeGrid};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefModelError {
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("time step {dt} exceeds the stability limit {limit}")]
    Unstable { dt: f64, limit: f64 },
    #[error("initial temperature must be positive and finite (cell {0})")]
    NonPositive(usize),
    #[error("mutation needs a kernel-backed flux family")]
    NoKernel,
    #[error("model has no configuration suitable for the {0} mutation: {1}")]
    Inapplicable(MutationTarget, &'static str),
    #[error("unknown mutation target {0:?}")]
    UnknownTarget(String),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialField<T> {
    /// Independent uniform draws in `[lo, hi)` per body cell.
    Random { lo: T, hi: T },
    Uniform(T),
    /// One value per body cell, in cell-index order.
    Values(Vec<T>),
}

/// A body cell with an enlarged heat capacity, standing in for a bath.
#[derive(Debug, Clone, PartialEq)]
pub struct Bath<T> {
    pub cell: [usize; 3],
    pub capacity: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatParams<T> {
    pub dims: [usize; 3],
    pub spacing: T,
    pub heat_capacity: T,
    pub conductivity: T,
    pub radiative: T,
    /// Pairs of non-adjacent cells exchanging heat volumetrically.
    pub radiators: Vec<([usize; 3], [usize; 3])>,
    pub bath: Option<Bath<T>>,
    /// Body cells; `None` means the whole grid.
    pub body: Option<Vec<[usize; 3]>>,
    pub dt: T,
    /// Number of time samples.
    pub steps: usize,
    pub seed: u64,
    pub initial: InitialField<T>,
}

impl<T: Scalar> HeatParams<T> {
    /// Unit material on a grid with random initial temperatures in `[1, 2)`.
    pub fn new(dims: [usize; 3], dt: T, steps: usize, seed: u64) -> Self {
        HeatParams {
            dims,
            spacing: T::one(),
            heat_capacity: T::one(),
            conductivity: T::one(),
            radiative: T::zero(),
            radiators: Vec::new(),
            bath: None,
            body: None,
            dt,
            steps,
            seed,
            initial: InitialField::Random { lo: T::one(), hi: T::lit(2.0) },
        }
    }

    /// The 3×3×1 plate used for mutation testing: two diagonal radiator pairs.
    pub fn mutation_scenario(seed: u64) -> Self {
        let mut p = Self::new([3, 3, 1], T::lit(0.05), 4, seed);
        p.radiative = T::lit(0.5);
        p.radiators = vec![([0, 0, 0], [2, 2, 0]), ([2, 0, 0], [0, 2, 0])];
        p
    }

    /// Two-cell bar, hot cell at 2 and cold cell at 1, one explicit step of 0.1.
    pub fn bar_example() -> Self {
        let mut p = Self::new([1, 1, 2], T::lit(0.1), 2, 0);
        p.initial = InitialField::Values(vec![T::lit(2.0), T::one()]);
        p
    }

    /// Largest time step keeping the explicit scheme stable.
    pub fn stability_limit(&self) -> T {
        self.heat_capacity * self.spacing * self.spacing / (T::lit(6.0) * self.conductivity)
    }
}

struct Setup<T> {
    grid: Grid<T>,
    body: Region,
    mask: Vec<bool>,
    capacity: Vec<T>,
    /// Conductive links `(i, j, shared face)` with `i < j`.
    links: Vec<(CellId, CellId, Face)>,
    radiators: Vec<(CellId, CellId)>,
}

fn positive<T: Scalar>(v: T, name: &str) -> Result<(), RefModelError> {
    if v.is_finite() && v > T::zero() {
        Ok(())
    } else {
        Err(RefModelError::BadParam(format!("{name} must be positive and finite")))
    }
}

fn setup<T: Scalar>(p: &HeatParams<T>) -> Result<Setup<T>, RefModelError> {
    let grid = Grid::new(p.dims, p.spacing).map_err(|e| RefModelError::BadParam(e.to_string()))?;
    positive(p.heat_capacity, "heat capacity")?;
    positive(p.conductivity, "conductivity")?;
    positive(p.dt, "dt")?;
    if !(p.radiative.is_finite() && p.radiative >= T::zero()) {
        return Err(RefModelError::BadParam("radiative coupling must be nonnegative".into()));
    }
    if p.steps < 2 {
        return Err(RefModelError::BadParam("at least two time samples are required".into()));
    }
    let bad = |c: [usize; 3]| RefModelError::BadParam(format!("cell {c:?} outside the grid"));
    let body = match &p.body {
        None => grid.full_region(),
        Some(cells) => grid.region_at(cells).map_err(|_| bad(cells[0]))?,
    };
    if body.is_empty() {
        return Err(RefModelError::BadParam("body must be nonempty".into()));
    }
    let mask = grid.mask(&body);
    let in_body = |c: [usize; 3]| -> Result<CellId, RefModelError> {
        let id = grid.cell(c).ok_or_else(|| bad(c))?;
        if mask[id.index()] {
            Ok(id)
        } else {
            Err(RefModelError::BadParam(format!("cell {c:?} is not in the body")))
        }
    };
    let h3 = grid.cell_volume();
    let mut capacity = vec![p.heat_capacity * h3; grid.num_cells()];
    if let Some(b) = &p.bath {
        positive(b.capacity, "bath capacity")?;
        capacity[in_body(b.cell)?.index()] = b.capacity * h3;
    }
    let mut links = Vec::new();
    for i in body.iter() {
        for j in grid.neighbors(i) {
            if i < j && mask[j.index()] {
                links.push((i, j, grid.shared_face(i, j).expect("neighbours share a face")));
            }
        }
    }
    let mut radiators = Vec::new();
    let mut seen = BTreeSet::new();
    for &(a, b) in &p.radiators {
        let (i, j) = (in_body(a)?, in_body(b)?);
        if i == j || grid.shared_face(i, j).is_some() {
            return Err(RefModelError::BadParam(format!(
                "radiator cells {a:?} and {b:?} must be distinct and not face-adjacent"
            )));
        }
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(RefModelError::BadParam(format!("radiator pair {a:?}, {b:?} repeated")));
        }
        radiators.push((i, j));
    }
    // positivity of the explicit update at every cell
    let (kc, h, r) = (p.conductivity, p.spacing, p.radiative);
    let limit = p.stability_limit();
    if p.dt > limit {
        return Err(RefModelError::Unstable { dt: p.dt.as_f64(), limit: limit.as_f64() });
    }
    for i in body.iter() {
        let n_links = grid.neighbors(i).filter(|j| mask[j.index()]).count();
        let n_rad = radiators.iter().filter(|(a, b)| *a == i || *b == i).count();
        let outflow = T::lit(n_links as f64) * kc * h + T::lit(n_rad as f64) * r;
        if p.dt * outflow > capacity[i.index()] {
            let lim = capacity[i.index()] / outflow;
            return Err(RefModelError::Unstable { dt: p.dt.as_f64(), limit: lim.as_f64() });
        }
    }
    Ok(Setup { grid, body, mask, capacity, links, radiators })
}

fn initial_field<T: Scalar>(p: &HeatParams<T>, s: &Setup<T>) -> Result<Vec<T>, RefModelError> {
    let mut theta = vec![T::zero(); s.grid.num_cells()];
    match &p.initial {
        InitialField::Uniform(v) => {
            for c in s.body.iter() {
                theta[c.index()] = *v;
            }
        }
        InitialField::Random { lo, hi } => {
            if !(lo.is_finite() && hi.is_finite() && *lo > T::zero() && hi >= lo) {
                return Err(RefModelError::BadParam("random range must satisfy 0 < lo <= hi".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            let (lo64, hi64) = (lo.as_f64(), hi.as_f64());
            for c in s.body.iter() {
                let u: f64 = rng.gen();
                theta[c.index()] = T::lit(lo64 + (hi64 - lo64) * u);
            }
        }
        InitialField::Values(vals) => {
            if vals.len() != s.body.len() {
                return Err(RefModelError::BadParam(format!(
                    "expected {} initial values, got {}",
                    s.body.len(),
                    vals.len()
                )));
            }
            for (c, v) in s.body.iter().zip(vals) {
                theta[c.index()] = *v;
            }
        }
    }
    for c in s.body.iter() {
        let v = theta[c.index()];
        if !(v.is_finite() && v > T::zero()) {
            return Err(RefModelError::NonPositive(c.index()));
        }
    }
    Ok(theta)
}

/// Heat and entropy flux kernels for one temperature field.
fn flux_fields<T: Scalar>(p: &HeatParams<T>, s: &Setup<T>, theta: &[T]) -> (FluxField<T>, FluxField<T>) {
    let mut heat = FluxField::new();
    let mut ent = FluxField::new();
    let g = p.conductivity * p.spacing;
    for &(i, j, f) in &s.links {
        let (ti, tj) = (theta[i.index()], theta[j.index()]);
        let into_i = g * (tj - ti);
        let into_j = g * (ti - tj);
        heat.add(Atom::Face(f), j, into_i);
        heat.add(Atom::Face(f), i, into_j);
        ent.add(Atom::Face(f), j, into_i / tj);
        ent.add(Atom::Face(f), i, into_j / ti);
    }
    for &(i, j) in &s.radiators {
        let (ti, tj) = (theta[i.index()], theta[j.index()]);
        let into_i = p.radiative * (tj - ti);
        let into_j = p.radiative * (ti - tj);
        heat.add(Atom::Cell(i), j, into_i);
        heat.add(Atom::Cell(j), i, into_j);
        ent.add(Atom::Cell(i), j, into_i / tj);
        ent.add(Atom::Cell(j), i, into_j / ti);
    }
    (heat, ent)
}

/// Net heat received per cell under a flux kernel.
fn net_inflow<T: Scalar>(s: &Setup<T>, heat: &FluxField<T>) -> Vec<T> {
    let mut net = vec![T::zero(); s.grid.num_cells()];
    for &(i, j, f) in &s.links {
        net[i.index()] = net[i.index()] + heat.get(&Atom::Face(f), j).unwrap_or_else(T::zero);
        net[j.index()] = net[j.index()] + heat.get(&Atom::Face(f), i).unwrap_or_else(T::zero);
    }
    for &(i, j) in &s.radiators {
        net[i.index()] = net[i.index()] + heat.get(&Atom::Cell(i), j).unwrap_or_else(T::zero);
        net[j.index()] = net[j.index()] + heat.get(&Atom::Cell(j), i).unwrap_or_else(T::zero);
    }
    net
}

/// Temperature history `θ⁰ … θⁿ⁻¹` of the explicit scheme.
pub fn temperatures<T: Scalar>(p: &HeatParams<T>) -> Result<Vec<Vec<T>>, RefModelError> {
    let s = setup(p)?;
    let mut history = vec![initial_field(p, &s)?];
    for _ in 1..p.steps {
        let prev = history.last().expect("nonempty history");
        let (heat, _) = flux_fields(p, &s, prev);
        let net = net_inflow(&s, &heat);
        let next: Vec<T> = prev
            .iter()
            .enumerate()
            .map(|(i, t)| if s.mask[i] { *t + p.dt * net[i] / s.capacity[i] } else { *t })
            .collect();
        history.push(next);
    }
    Ok(history)
}

/// Builds the reference model.
///
/// Fluxes at sample `k` are those driving the step `k → k+1`; the final
/// sample repeats the last step's fluxes, matching the backward difference
/// used there, so the energy balance closes at every sample.
pub fn generate_heat_grid<T: Scalar>(p: &HeatParams<T>) -> Result<ThermoModel<T>, RefModelError> {
    let s = setup(p)?;
    let history = temperatures(p)?;
    let time = TimeGrid::uniform(T::zero(), p.dt, p.steps)?;
    let mut energy = Vec::with_capacity(p.steps);
    let mut entropy = Vec::with_capacity(p.steps);
    let mut heat = Vec::with_capacity(p.steps);
    let mut ent = Vec::with_capacity(p.steps);
    for (k, theta) in history.iter().enumerate() {
        let mut e = GridMeasure::new();
        let mut sm = GridMeasure::new();
        for c in s.body.iter() {
            let cap = s.capacity[c.index()];
            e.set_cell(c, cap * theta[c.index()]);
            sm.set_cell(c, cap * theta[c.index()].ln());
        }
        energy.push(e);
        entropy.push(sm);
        let driver = if k + 1 < history.len() { theta } else { &history[k - 1] };
        let (h, m) = flux_fields(p, &s, driver);
        heat.push(h);
        ent.push(m);
    }
    Ok(ThermoModel::new(
        s.grid,
        s.body,
        time,
        energy,
        entropy,
        FluxFamily::from_kernel(heat),
        FluxFamily::from_kernel(ent),
    )?)
}

/// Axiom a mutation is built to violate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MutationTarget {
    T4,
    T6,
    T8,
    T9,
    T10,
    T13,
    T15,
    T16_1,
    T16_2,
    Decomp,
}

impl MutationTarget {
    pub const ALL: [MutationTarget; 10] = [
        MutationTarget::T4,
        MutationTarget::T6,
        MutationTarget::T8,
        MutationTarget::T9,
        MutationTarget::T10,
        MutationTarget::T13,
        MutationTarget::T15,
        MutationTarget::T16_1,
        MutationTarget::T16_2,
        MutationTarget::Decomp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MutationTarget::T4 => "T4",
            MutationTarget::T6 => "T6",
            MutationTarget::T8 => "T8",
            MutationTarget::T9 => "T9",
            MutationTarget::T10 => "T10",
            MutationTarget::T13 => "T13",
            MutationTarget::T15 => "T15",
            MutationTarget::T16_1 => "T16.1",
            MutationTarget::T16_2 => "T16.2",
            MutationTarget::Decomp => "DECOMP",
        }
    }

    /// The check expected to fail.
    pub fn axiom(self) -> crate::axioms::AxiomId {
        use crate::axioms::AxiomId;
        match self {
            MutationTarget::T4 => AxiomId::T4,
            MutationTarget::T6 => AxiomId::T6,
            MutationTarget::T8 => AxiomId::T8,
            MutationTarget::T9 => AxiomId::T9,
            MutationTarget::T10 => AxiomId::T10,
            MutationTarget::T13 => AxiomId::T13,
            MutationTarget::T15 => AxiomId::T15,
            MutationTarget::T16_1 | MutationTarget::T16_2 => AxiomId::T16,
            MutationTarget::Decomp => AxiomId::Decomp,
        }
    }
}

impl fmt::Display for MutationTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MutationTarget {
    type Err = RefModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MutationTarget::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| RefModelError::UnknownTarget(s.to_string()))
    }
}

/// Returns a copy of `model` perturbed so that the target check fails while
/// the others keep their verdicts.
pub fn mutate<T: Scalar>(model: &ThermoModel<T>, target: MutationTarget) -> Result<ThermoModel<T>, RefModelError> {
    let mut m = model.clone();
    let first = model.body.iter().next().expect("body is nonempty");
    match target {
        MutationTarget::T4 => {
            let part = Part::new([first], []);
            let v = m.energy[0].eval(&part) + T::lit(0.5);
            m.energy[0].set_entry(part, v);
        }
        MutationTarget::T6 => {
            let f = low_x_face(model, first);
            for e in &mut m.energy {
                e.add_face(f, T::lit(0.25));
            }
        }
        MutationTarget::T13 => {
            let f = low_x_face(model, first);
            for s in &mut m.entropy {
                s.add_face(f, T::lit(0.25));
            }
        }
        MutationTarget::T10 => {
            m.energy[1].add_cell(first, T::lit(0.1));
        }
        MutationTarget::T8 | MutationTarget::T15 => offset_pair(&mut m, target)?,
        MutationTarget::T9 => stray_boundary_flux(&mut m)?,
        MutationTarget::T16_1 => reverse_entropy_flux(&mut m)?,
        MutationTarget::T16_2 => isolated_entropy_flux(&mut m)?,
        MutationTarget::Decomp => split_mismatch(&mut m)?,
    }
    Ok(m)
}

fn low_x_face<T: Scalar>(model: &ThermoModel<T>, cell: CellId) -> Face {
    Face::new(Axis::X, model.grid.coords(cell))
}

fn kernel_at<T: Scalar>(fam: &FluxFamily<T>, k: usize) -> Result<&FluxField<T>, RefModelError> {
    fam.kernel().map(|kern| &kern[k]).ok_or(RefModelError::NoKernel)
}

/// Radiatively coupled cells `(s, x)` read off the heat kernel.
fn radiator_pairs<T: Scalar>(m: &ThermoModel<T>) -> Result<Vec<(CellId, CellId)>, RefModelError> {
    let kern = kernel_at(&m.heat_flux, 0)?;
    let mut out = Vec::new();
    for (atom, src, _) in kern.iter() {
        if let Atom::Cell(x) = atom {
            out.push((src, x));
        }
    }
    Ok(out)
}

/// Tables `F(·, {s, u})` at sample 0 shifted by `+δ` on a cell `x` receiving
/// radiation from `s` and by `-δ` on a face of `∂D`, so that totals over
/// closed parts (and hence the balance laws) are unchanged while additivity
/// over the separate sources `{s}`, `{u}` breaks.
fn offset_pair<T: Scalar>(m: &mut ThermoModel<T>, target: MutationTarget) -> Result<(), RefModelError> {
    let grid = m.grid.clone();
    let pairs = radiator_pairs(m)?;
    let delta = T::lit(0.5);
    let body_mask = grid.mask(&m.body);
    for (s, x) in pairs {
        for u in m.body.iter() {
            if u == s || u == x || grid.shared_face(u, s).is_some() || grid.shared_face(u, x).is_some() {
                continue;
            }
            let d = Region::from_cells([s, u]);
            let d_mask = grid.mask(&d);
            let rest_mask: Vec<bool> = body_mask.iter().zip(&d_mask).map(|(b, d)| *b && !*d).collect();
            let host = m.body.difference(&d).closure(&grid);
            let h = |a: Atom| m.heat_flux.atom_raw(a, &d, &d_mask, 0).unwrap_or_else(T::zero);
            if h(Atom::Cell(x)) == T::zero() || h(Atom::Cell(x)) + delta == T::zero() {
                continue;
            }
            let y = host.faces.iter().copied().find(|f| {
                grid.on_boundary(f, &d_mask)
                    && grid.touches(f, &rest_mask)
                    && h(Atom::Face(*f)) != T::zero()
                    && h(Atom::Face(*f)) - delta != T::zero()
            });
            let Some(y) = y else { continue };
            let fam = if target == MutationTarget::T8 { &mut m.heat_flux } else { &mut m.entropy_flux };
            let mut table = fam.measure(&d, &d_mask, &host, 0).ok_or(RefModelError::NoKernel)?;
            table.add_cell(x, delta);
            table.add_face(y, -delta);
            fam.set_table(d, 0, table);
            return Ok(());
        }
    }
    Err(RefModelError::Inapplicable(target, "needs a radiator pair and a third cell separate from both"))
}

/// Heat attributed to the first body cell appears on a grid-border face of
/// another cell `p` and is withdrawn from `p`'s volume at every sample.
fn stray_boundary_flux<T: Scalar>(m: &mut ThermoModel<T>) -> Result<(), RefModelError> {
    let grid = m.grid.clone();
    let s = m.body.iter().next().expect("nonempty body");
    let radiating: BTreeSet<CellId> = radiator_pairs(m)?.into_iter().flat_map(|(a, b)| [a, b]).collect();
    let found = m.body.iter().filter(|p| *p != s && !radiating.contains(p)).find_map(|p| {
        grid.cell_faces(p)
            .into_iter()
            .map(|f| f.face)
            .find(|f| grid.face_cells(f).iter().any(|c| c.is_none()))
            .map(|g| (p, g))
    });
    let (p, g) = found.ok_or(RefModelError::Inapplicable(MutationTarget::T9, "needs a non-radiating cell on the grid border"))?;
    let delta = T::lit(0.3125);
    for field in m.heat_flux.kernel_mut().ok_or(RefModelError::NoKernel)? {
        field.add(Atom::Face(g), s, delta);
        field.add(Atom::Cell(p), s, -delta);
    }
    Ok(())
}

/// Flips the sign of the conductive entropy flux on one face at sample 0,
/// choosing the face that drives the receiving cell's entropy production
/// most negative.
fn reverse_entropy_flux<T: Scalar>(m: &mut ThermoModel<T>) -> Result<(), RefModelError> {
    let grid = m.grid.clone();
    let kern = kernel_at(&m.entropy_flux, 0)?;
    let mut best: Option<(T, Face, CellId)> = None;
    for (atom, src, v) in kern.iter() {
        let Atom::Face(f) = atom else { continue };
        if v >= T::zero() {
            continue;
        }
        let Some(i) = grid.face_cells(&f).into_iter().flatten().find(|c| *c != src) else { continue };
        if !m.body.contains(i) {
            continue;
        }
        let a = Region::from_cells([i]);
        let ext = grid.full_region().difference(&a);
        let cl = a.closure(&grid);
        let slack = m.ddt_entropy(&cl, 0)? - m.entropy_flux(&cl, &ext, 0)?;
        let after = slack + T::lit(2.0) * v;
        if best.as_ref().is_none_or(|b| after < b.0) {
            best = Some((after, f, src));
        }
    }
    match best {
        Some((after, f, src)) if after < -T::lit(1e-9) => {
            let field = &mut m.entropy_flux.kernel_mut().ok_or(RefModelError::NoKernel)?[0];
            let v = field.get(&Atom::Face(f), src).expect("entry exists");
            field.set(Atom::Face(f), src, -v);
            Ok(())
        }
        _ => Err(RefModelError::Inapplicable(MutationTarget::T16_1, "no face flux large enough to reverse production")),
    }
}

/// Entropy flux from the first body cell into a cell that receives no heat
/// from it.
fn isolated_entropy_flux<T: Scalar>(m: &mut ThermoModel<T>) -> Result<(), RefModelError> {
    let s = m.body.iter().next().expect("nonempty body");
    let coupled: BTreeSet<CellId> = radiator_pairs(m)?
        .into_iter()
        .filter(|(a, _)| *a == s)
        .map(|(_, b)| b)
        .collect();
    let p = m
        .body
        .iter()
        .find(|p| *p != s && !coupled.contains(p))
        .ok_or(RefModelError::Inapplicable(MutationTarget::T16_2, "needs a second body cell"))?;
    for field in m.entropy_flux.kernel_mut().ok_or(RefModelError::NoKernel)? {
        field.add(Atom::Cell(p), s, T::lit(-0.25));
    }
    Ok(())
}

/// Tabulated `M(·, {s})` at sample 0 whose value on one mixed cell+face part
/// disagrees with its volumetric and surface pieces.
fn split_mismatch<T: Scalar>(m: &mut ThermoModel<T>) -> Result<(), RefModelError> {
    let grid = m.grid.clone();
    let s = m.body.iter().next().expect("nonempty body");
    let d = Region::from_cells([s]);
    let d_mask = grid.mask(&d);
    let host = m.body.difference(&d).closure(&grid);
    let pick = grid.neighbors(s).filter(|x| m.body.contains(*x)).find_map(|x| {
        let y = grid.shared_face(s, x)?;
        let h = m.heat_flux.atom_raw(Atom::Face(y), &d, &d_mask, 0)?;
        (h != T::zero()).then_some((x, y))
    });
    let (x, y) = pick.ok_or(RefModelError::Inapplicable(MutationTarget::Decomp, "needs a neighbour exchanging heat"))?;
    let mut table = m.entropy_flux.measure(&d, &d_mask, &host, 0).ok_or(RefModelError::NoKernel)?;
    let part = Part::new([x], [y]);
    let v = table.eval(&part) + T::lit(0.5);
    table.set_entry(part, v);
    m.entropy_flux.set_table(d, 0, table);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bar_example_one_step() {
        let hist = temperatures(&HeatParams::<f64>::bar_example()).unwrap();
        assert_eq!(hist[0], vec![2.0, 1.0]);
        assert!((hist[1][0] - 1.9).abs() < 1e-15);
        assert!((hist[1][1] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_unstable_step() {
        let p = HeatParams::<f64>::new([2, 2, 2], 0.2, 3, 0);
        assert!(matches!(generate_heat_grid(&p), Err(RefModelError::Unstable { .. })));
    }

    #[test]
    fn rejects_nonpositive_temperature() {
        let mut p = HeatParams::<f64>::bar_example();
        p.initial = InitialField::Values(vec![1.0, 0.0]);
        assert!(matches!(generate_heat_grid(&p), Err(RefModelError::NonPositive(1))));
    }

    #[test]
    fn rejects_adjacent_radiators() {
        let mut p = HeatParams::<f64>::new([3, 1, 1], 0.05, 3, 0);
        p.radiative = 0.1;
        p.radiators = vec![([0, 0, 0], [1, 0, 0])];
        assert!(matches!(generate_heat_grid(&p), Err(RefModelError::BadParam(_))));
    }

    #[test]
    fn uniform_field_is_static() {
        let mut p = HeatParams::<f64>::new([2, 2, 1], 0.1, 4, 0);
        p.initial = InitialField::Uniform(1.5);
        let hist = temperatures(&p).unwrap();
        assert!(hist.iter().all(|t| t.iter().all(|v| *v == 1.5)));
        let m = generate_heat_grid(&p).unwrap();
        for kern in m.heat_flux_family().kernel().unwrap() {
            assert!(kern.iter().all(|(_, _, v)| v == 0.0));
        }
    }

    #[test]
    fn insulated_grid_conserves_energy() {
        let mut p = HeatParams::<f64>::new([3, 3, 3], 0.1, 16, 7);
        p.radiative = 0.2;
        p.radiators = vec![([0, 0, 0], [2, 2, 2])];
        let hist = temperatures(&p).unwrap();
        let total = |t: &Vec<f64>| t.iter().sum::<f64>();
        let start = total(&hist[0]);
        for t in &hist {
            assert!((total(t) - start).abs() < 1e-12);
            assert!(t.iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let p = HeatParams::<f64>::mutation_scenario(3);
        assert_eq!(generate_heat_grid(&p).unwrap(), generate_heat_grid(&p).unwrap());
    }

    #[test]
    fn target_names_round_trip() {
        for t in MutationTarget::ALL {
            assert_eq!(t.name().parse::<MutationTarget>().unwrap(), t);
        }
        assert!("T99".parse::<MutationTarget>().is_err());
    }

    #[test]
    fn every_mutation_applies_to_the_scenario() {
        let m = generate_heat_grid(&HeatParams::<f64>::mutation_scenario(1)).unwrap();
        for t in MutationTarget::ALL {
            let mutated = mutate(&m, t).unwrap();
            assert_ne!(mutated, m, "{t} left the model unchanged");
        }
    }
}
