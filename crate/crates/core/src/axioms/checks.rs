use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AxiomId, BoundWitness, CheckConfig, CheckReport, CheckResult, Clause, Verdict, Witness};
use crate::enumerate::{self, Coverage, Enumerated};
use crate::geometry::{
    all_boxes, check_exterior_identity, in_material_universe, is_separate, part_separate_from, Atom, Grid, Part,
    Region, SubbodyClass,
};
use crate::measure::{is_measure, GridMeasure, MeasureCheck};
use crate::structure::{part_in_closure, FluxFamily, ThermoModel};
use crate::Scalar;

/// A source region with its cell mask and the mask of `D^b`.
struct Source {
    d: Region,
    mask: Vec<bool>,
    rest: Vec<bool>,
}

/// A kernel atom with its adjacent cells and contributions, for mask tests
/// without geometry lookups.
struct FlatAtom<T> {
    atom: Atom,
    adj: [Option<usize>; 2],
    contribs: Vec<(usize, T)>,
}

impl<T> FlatAtom<T> {
    fn touches(&self, mask: &[bool]) -> bool {
        self.adj.iter().flatten().any(|c| mask[*c])
    }
}

type AtomValues<T> = Vec<(Atom, T)>;

fn lookup<T: Scalar>(values: &AtomValues<T>, atom: &Atom) -> Option<T> {
    values.binary_search_by(|(a, _)| a.cmp(atom)).ok().map(|i| values[i].1)
}

fn flatten<T: Scalar>(grid: &Grid<T>, fam: &FluxFamily<T>) -> Option<Vec<Vec<FlatAtom<T>>>> {
    let kern = fam.kernel()?;
    Some(
        kern.iter()
            .map(|field| {
                field
                    .lists()
                    .map(|(atom, list)| {
                        let adj = match atom {
                            Atom::Cell(c) => [Some(c.index()), None],
                            Atom::Face(fc) => grid.face_cells(fc).map(|c| c.map(|c| c.index())),
                        };
                        FlatAtom { atom: *atom, adj, contribs: list.iter().map(|(s, v)| (s.index(), *v)).collect() }
                    })
                    .collect()
            })
            .collect(),
    )
}

/// Runs axiom checks against one model, sharing the enumerated subbodies and
/// universe between checks.
pub struct Checker<'a, T> {
    model: &'a ThermoModel<T>,
    cfg: CheckConfig,
    grid_region: Region,
    body_closure: Part,
    subbodies: Enumerated<Region>,
    universe: Enumerated<Region>,
    sources: Vec<Source>,
    flat_heat: Option<Vec<Vec<FlatAtom<T>>>>,
    flat_entropy: Option<Vec<Vec<FlatAtom<T>>>>,
}

fn mark(result: &mut CheckResult, witness: Witness) {
    if result.verdict != Verdict::Fail {
        result.verdict = Verdict::Fail;
        result.witness = Some(witness);
    }
}

fn f(v: impl Scalar) -> f64 {
    v.as_f64()
}

impl<'a, T: Scalar> Checker<'a, T> {
    pub fn new(model: &'a ThermoModel<T>, cfg: &CheckConfig) -> Self {
        let grid = model.grid();
        let grid_region = grid.full_region();
        let body = model.body();
        let subbodies = enumerate::subbodies(body, &cfg.enumeration);
        let universe = enumerate::universe(&subbodies, &grid_region, body.len() == grid.num_cells());
        let mut regions: BTreeSet<Region> = universe.items.iter().cloned().collect();
        for fam in [model.heat_flux_family(), model.entropy_flux_family()] {
            for slice in fam.tables() {
                regions.extend(slice.keys().cloned());
            }
        }
        let mut regions: Vec<Region> = regions.into_iter().collect();
        regions.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        let body_mask = grid.mask(body);
        let sources = regions
            .into_iter()
            .map(|d| {
                let mask = grid.mask(&d);
                let rest = body_mask.iter().zip(&mask).map(|(b, m)| *b && !*m).collect();
                Source { d, mask, rest }
            })
            .collect();
        Checker {
            model,
            cfg: *cfg,
            grid_region,
            body_closure: model.body_closure(),
            subbodies,
            universe,
            sources,
            flat_heat: flatten(grid, model.heat_flux_family()),
            flat_entropy: flatten(grid, model.entropy_flux_family()),
        }
    }

    fn flat(&self, fam: &FluxFamily<T>, k: usize) -> Option<&[FlatAtom<T>]> {
        let flat = if std::ptr::eq(fam, self.model.heat_flux_family()) { &self.flat_heat } else { &self.flat_entropy };
        flat.as_ref().map(|v| v[k].as_slice())
    }

    fn grid(&self) -> &Grid<T> {
        self.model.grid()
    }

    fn eps(&self) -> T {
        T::lit(self.cfg.tol.eps_balance)
    }

    fn samples(&self) -> usize {
        self.model.time().len()
    }

    pub fn check_all(&self) -> CheckReport {
        CheckReport { results: AxiomId::ALL.iter().map(|id| self.check(*id)).collect() }
    }

    pub fn check(&self, id: AxiomId) -> CheckResult {
        let m = self.model;
        match id {
            AxiomId::T1 => self.space(),
            AxiomId::T2 => self.subbody_closure(),
            AxiomId::T3 => self.time_axiom(),
            AxiomId::T4 => self.measure_series(id, m.energy_series()),
            AxiomId::T11 => self.measure_series(id, m.entropy_series()),
            AxiomId::T5 => self.differentiable(id, m.energy_series()),
            AxiomId::T12 => self.differentiable(id, m.entropy_series()),
            AxiomId::T6 => self.volume_bound(id, m.energy_series(), "alpha"),
            AxiomId::T13 => self.volume_bound(id, m.entropy_series(), "delta"),
            AxiomId::T7 => self.flux_family(id, m.heat_flux_family(), false),
            AxiomId::T14 => self.flux_family(id, m.entropy_flux_family(), true),
            AxiomId::T8 => self.s_additive(id, m.heat_flux_family()),
            AxiomId::T15 => self.s_additive(id, m.entropy_flux_family()),
            AxiomId::T9 => self.surface_bound(id, m.heat_flux_family(), true),
            AxiomId::T17 => self.surface_bound(id, m.entropy_flux_family(), false),
            AxiomId::T10 => self.first_law(),
            AxiomId::T16 => self.second_law(),
            AxiomId::Thm1 => self.exterior_identity(),
            AxiomId::Decomp => self.decomposition(),
        }
    }

    fn in_host(&self, atom: &Atom, rest: &[bool]) -> bool {
        match atom {
            Atom::Cell(c) => rest[c.index()],
            Atom::Face(f) => self.grid().touches(f, rest),
        }
    }

    /// Atom values of `F(·, D)` at `k` within the closure of `D^b`, sorted by
    /// atom. `None` if the family has no entry for `D`.
    fn atom_map(&self, fam: &FluxFamily<T>, src: &Source, k: usize) -> Option<AtomValues<T>> {
        if let Some(table) = fam.table(&src.d, k) {
            let mut out = BTreeMap::new();
            for c in table.cell_densities().keys() {
                out.insert(Atom::Cell(*c), table.atom(Atom::Cell(*c)));
            }
            for fc in table.face_densities().keys() {
                out.insert(Atom::Face(*fc), table.atom(Atom::Face(*fc)));
            }
            for p in table.entries().keys().filter(|p| p.len() == 1) {
                let a = p.atoms().next().expect("singleton");
                out.insert(a, table.atom(a));
            }
            return Some(out.into_iter().collect());
        }
        let flat = self.flat(fam, k)?;
        let mut out = Vec::new();
        for fa in flat {
            if !fa.touches(&src.rest) {
                continue;
            }
            let mut any = false;
            let mut v = T::zero();
            for (s, x) in &fa.contribs {
                if src.mask[*s] {
                    any = true;
                    v = v + *x;
                }
            }
            if any {
                out.push((fa.atom, v));
            }
        }
        Some(out)
    }

    /// Single atom value of `F(·, D)` at `k`; zero where undefined.
    fn atom_value(&self, fam: &FluxFamily<T>, atom: Atom, src: &Source, k: usize) -> T {
        if let Some(table) = fam.table(&src.d, k) {
            return table.atom(atom);
        }
        let Some(flat) = self.flat(fam, k) else { return T::zero() };
        match flat.binary_search_by(|fa| fa.atom.cmp(&atom)) {
            Ok(i) => flat[i].contribs.iter().filter(|(s, _)| src.mask[*s]).map(|(_, x)| *x).sum(),
            Err(_) => T::zero(),
        }
    }

    /// `mu` on the closure of the cells in `a_mask`.
    fn measure_on_closure(&self, mu: &GridMeasure<T>, a: &Region, a_mask: &[bool]) -> T {
        if !mu.entries().is_empty() {
            return mu.eval(&a.closure(self.grid()));
        }
        let cells: T = mu.cell_densities().iter().filter(|(c, _)| a_mask[c.index()]).map(|(_, v)| *v).sum();
        let faces: T =
            mu.face_densities().iter().filter(|(fc, _)| self.grid().touches(fc, a_mask)).map(|(_, v)| *v).sum();
        cells + faces
    }

    /// `F(cl A, A^e)` at `k`.
    fn flux_into_closure(&self, fam: &FluxFamily<T>, a: &Region, a_mask: &[bool], k: usize) -> Option<T> {
        let ext = self.grid_region.difference(a);
        if ext.is_empty() {
            // nothing lies outside, so nothing flows in
            return Some(T::zero());
        }
        if let Some(table) = fam.table(&ext, k) {
            return Some(self.measure_on_closure(table, a, a_mask));
        }
        let flat = self.flat(fam, k)?;
        let mut cells = T::zero();
        let mut faces = T::zero();
        for fa in flat {
            if !fa.touches(a_mask) {
                continue;
            }
            let v: T = fa.contribs.iter().filter(|(s, _)| !a_mask[*s]).map(|(_, x)| *x).sum();
            match fa.atom {
                Atom::Cell(_) => cells = cells + v,
                Atom::Face(_) => faces = faces + v,
            }
        }
        Some(cells + faces)
    }

    fn universe_coverage(&self) -> Coverage {
        Coverage::from(&self.universe)
    }

    fn space(&self) -> CheckResult {
        let mut r = CheckResult::new(AxiomId::T1);
        let g = self.grid();
        if g.dims().contains(&0) || !(g.spacing() > T::zero()) {
            mark(&mut r, Witness { detail: "grid is not a three-dimensional lattice".into(), ..Default::default() });
        }
        r
    }

    fn subbody_closure(&self) -> CheckResult {
        let mut r = CheckResult::new(AxiomId::T2);
        let body = self.model.body();
        let class = SubbodyClass::new(body);
        let grid = self.grid();
        let items = &self.subbodies.items;
        let render = |a: &Region| grid.render_region(a);

        let subset = items.iter().find(|a| !a.is_subset(body));
        let nonempty = items.iter().find(|a| a.is_empty());
        let mut union_fail = None;
        let cap = items.len().min(64);
        'outer: for a in &items[..cap] {
            for c in &items[..cap] {
                if !class.contains(&a.union(c)) {
                    union_fail = Some((a.clone(), c.clone()));
                    break 'outer;
                }
            }
        }
        let box_fail = all_boxes(grid)
            .into_iter()
            .take(4096)
            .map(|b| b.region(grid).intersection(body))
            .find(|cut| !cut.is_empty() && !class.contains(cut));
        let mut shift_fail = None;
        let shifts = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];
        'shift: for a in items {
            for s in shifts {
                if let Some(t) = a.translated(grid, s) {
                    if t.is_subset(body) && !class.contains(&t) {
                        shift_fail = Some(t);
                        break 'shift;
                    }
                }
            }
        }
        let verdict = |bad: bool| if bad { Verdict::Fail } else { Verdict::Pass };
        r.clauses = vec![
            Clause { name: "T2.1".into(), verdict: verdict(subset.is_some()) },
            Clause { name: "T2.2".into(), verdict: verdict(nonempty.is_some()) },
            Clause { name: "T2.3".into(), verdict: verdict(union_fail.is_some()) },
            Clause { name: "T2.4".into(), verdict: verdict(box_fail.is_some()) },
            Clause { name: "T2.5".into(), verdict: Verdict::SatisfiedByDeclaration },
            Clause { name: "T2.6".into(), verdict: verdict(shift_fail.is_some()) },
        ];
        if let Some(a) = subset {
            mark(&mut r, Witness { region: Some(render(a)), detail: "subbody not contained in the body".into(), ..Default::default() });
        }
        if nonempty.is_some() {
            mark(&mut r, Witness { detail: "empty subbody".into(), ..Default::default() });
        }
        if let Some((a, c)) = union_fail {
            mark(
                &mut r,
                Witness {
                    region: Some(render(&a)),
                    other_region: Some(render(&c)),
                    detail: "union of subbodies is not a subbody".into(),
                    ..Default::default()
                },
            );
        }
        if let Some(cut) = box_fail {
            mark(&mut r, Witness { region: Some(render(&cut)), detail: "box section is not a subbody".into(), ..Default::default() });
        }
        if let Some(t) = shift_fail {
            mark(&mut r, Witness { region: Some(render(&t)), detail: "translated subbody is not a subbody".into(), ..Default::default() });
        }
        r.coverage = Some(Coverage::from(&self.subbodies));
        r
    }

    fn time_axiom(&self) -> CheckResult {
        let mut r = CheckResult::new(AxiomId::T3);
        let s = self.model.time().samples();
        if s.len() < 2 {
            mark(&mut r, Witness { detail: "time must contain at least two samples".into(), ..Default::default() });
        } else if let Some(i) = (1..s.len()).find(|i| !(s[*i] > s[*i - 1])) {
            mark(&mut r, Witness { time_index: Some(i), detail: "time samples not strictly increasing".into(), ..Default::default() });
        }
        r
    }

    fn measure_series(&self, id: AxiomId, series: &[GridMeasure<T>]) -> CheckResult {
        let mut r = CheckResult::new(id);
        let grid = self.grid();
        for (k, mu) in series.iter().enumerate() {
            if !mu.support_within(&self.body_closure) {
                let outside = mu.support().difference(&self.body_closure);
                mark(
                    &mut r,
                    Witness {
                        part: Some(grid.render_part(&outside)),
                        time_index: Some(k),
                        detail: "measure is supported outside the body".into(),
                        ..Default::default()
                    },
                );
                continue;
            }
            match is_measure(mu, &self.body_closure, self.eps()) {
                MeasureCheck::Measure => {}
                MeasureCheck::NonFinite { part } => mark(
                    &mut r,
                    Witness {
                        part: Some(grid.render_part(&part)),
                        time_index: Some(k),
                        detail: "non-finite value".into(),
                        ..Default::default()
                    },
                ),
                MeasureCheck::NonAdditive { a, b, union, sum } => {
                    r.max_residual = r.max_residual.max(f(union - sum).abs());
                    mark(
                        &mut r,
                        Witness {
                            part: Some(grid.render_part(&a)),
                            other_region: Some(grid.render_part(&b)),
                            time_index: Some(k),
                            observed: Some(f(union)),
                            expected: Some(f(sum)),
                            detail: "value on a disjoint union differs from the sum of the values".into(),
                            ..Default::default()
                        },
                    )
                }
            }
        }
        r
    }

    fn differentiable(&self, id: AxiomId, series: &[GridMeasure<T>]) -> CheckResult {
        let mut r = CheckResult::new(id);
        let time = self.model.time();
        if time.len() < 2 {
            mark(&mut r, Witness { detail: "derivative needs at least two time samples".into(), ..Default::default() });
            return r;
        }
        let mut parts: BTreeSet<Part> = self.body_closure.atoms().map(Part::atom).collect();
        for mu in series {
            parts.extend(mu.entries().keys().cloned());
        }
        for k in 0..time.len() {
            for p in &parts {
                let d = time.derivative(k, |j| series[j].eval(p));
                if !matches!(d, Ok(v) if v.is_finite()) {
                    mark(
                        &mut r,
                        Witness {
                            part: Some(self.grid().render_part(p)),
                            time_index: Some(k),
                            detail: "derivative is not finite".into(),
                            ..Default::default()
                        },
                    );
                    return r;
                }
            }
        }
        r
    }

    fn volume_bound(&self, id: AxiomId, series: &[GridMeasure<T>], name: &str) -> CheckResult {
        let mut r = CheckResult::new(id);
        let grid = self.grid();
        let time = self.model.time();
        let vol = grid.cell_volume();
        let mut values = Vec::new();
        let mut attained = Vec::new();
        for (k, mu) in series.iter().enumerate() {
            for (fc, v) in mu.face_densities() {
                if *v != T::zero() {
                    mark(
                        &mut r,
                        Witness {
                            part: Some(fc.to_string()),
                            time_index: Some(k),
                            observed: Some(f(*v)),
                            expected: Some(0.0),
                            detail: "nonzero value on a zero-volume part".into(),
                            ..Default::default()
                        },
                    );
                }
            }
            for (p, v) in mu.entries() {
                if p.cells.is_empty() && *v != T::zero() {
                    mark(
                        &mut r,
                        Witness {
                            part: Some(grid.render_part(p)),
                            time_index: Some(k),
                            observed: Some(f(*v)),
                            expected: Some(0.0),
                            detail: "nonzero value on a zero-volume part".into(),
                            ..Default::default()
                        },
                    );
                }
            }
            let mut best = T::zero();
            let mut at: Option<String> = None;
            let mut consider = |p: &Part, ratio: T| {
                if !ratio.is_finite() || ratio > best {
                    best = ratio;
                    at = Some(grid.render_part(p));
                }
            };
            let deriv = |p: &Part| -> T {
                if time.len() < 2 {
                    T::zero()
                } else {
                    time.derivative(k, |j| series[j].eval(p)).unwrap_or_else(|_| T::nan())
                }
            };
            for c in self.model.body().iter() {
                let p = Part::new([c], []);
                let v = mu.eval(&p).abs().max(deriv(&p).abs());
                consider(&p, v / vol);
            }
            for p in mu.entries().keys().filter(|p| !p.cells.is_empty()) {
                let v = mu.eval(p).abs().max(deriv(p).abs());
                consider(p, v / p.volume(grid));
            }
            if !best.is_finite() {
                mark(
                    &mut r,
                    Witness { part: at.clone(), time_index: Some(k), detail: "unbounded ratio".into(), ..Default::default() },
                );
            }
            values.push(f(best));
            attained.push(at);
        }
        r.bounds.push(BoundWitness { name: name.to_string(), values, attained_at: attained });
        r
    }

    fn flux_family(&self, id: AxiomId, fam: &FluxFamily<T>, pure: bool) -> CheckResult {
        let mut r = CheckResult::new(id);
        let grid = self.grid();
        if let Some(kern) = fam.kernel() {
            for (k, field) in kern.iter().enumerate() {
                if let Some((atom, _, v)) = field.iter().find(|(_, _, v)| !v.is_finite()) {
                    mark(
                        &mut r,
                        Witness {
                            part: Some(grid.render_atom(&atom)),
                            time_index: Some(k),
                            observed: Some(f(v)),
                            detail: "non-finite flux".into(),
                            ..Default::default()
                        },
                    );
                }
            }
        }
        for src in &self.sources {
            let host = || self.model.body().difference(&src.d).closure(grid);
            for k in 0..self.samples() {
                if !fam.defines(&src.d, k) {
                    mark(
                        &mut r,
                        Witness {
                            region: Some(grid.render_region(&src.d)),
                            time_index: Some(k),
                            detail: "no flux entry for this universe element".into(),
                            ..Default::default()
                        },
                    );
                    continue;
                }
                let Some(table) = fam.table(&src.d, k) else { continue };
                let host = host();
                if !table.support_within(&host) {
                    mark(
                        &mut r,
                        Witness {
                            part: Some(grid.render_part(&table.support().difference(&host))),
                            region: Some(grid.render_region(&src.d)),
                            time_index: Some(k),
                            detail: "flux supported outside the closure of the relative exterior".into(),
                            ..Default::default()
                        },
                    );
                    continue;
                }
                let checked = if pure { table.pure_entries() } else { table.clone() };
                match is_measure(&checked, &host, self.eps()) {
                    MeasureCheck::Measure => {}
                    MeasureCheck::NonFinite { part } => mark(
                        &mut r,
                        Witness {
                            part: Some(grid.render_part(&part)),
                            region: Some(grid.render_region(&src.d)),
                            time_index: Some(k),
                            detail: "non-finite flux".into(),
                            ..Default::default()
                        },
                    ),
                    MeasureCheck::NonAdditive { a, b, union, sum } => {
                        r.max_residual = r.max_residual.max(f(union - sum).abs());
                        mark(
                            &mut r,
                            Witness {
                                part: Some(grid.render_part(&a.union(&b))),
                                region: Some(grid.render_region(&src.d)),
                                time_index: Some(k),
                                observed: Some(f(union)),
                                expected: Some(f(sum)),
                                detail: format!(
                                    "not additive: {} and {}",
                                    grid.render_part(&a),
                                    grid.render_part(&b)
                                ),
                                ..Default::default()
                            },
                        )
                    }
                }
            }
        }
        r.coverage = Some(self.universe_coverage());
        r
    }

    fn source(&self, d: Region) -> Source {
        let grid = self.grid();
        let body_mask = grid.mask(self.model.body());
        let mask = grid.mask(&d);
        let rest = body_mask.iter().zip(&mask).map(|(b, m)| *b && !*m).collect();
        Source { d, mask, rest }
    }

    /// Separate source pairs `(A, C)` whose union is a universe element.
    fn separate_pairs(&self) -> (Vec<(Region, Region)>, usize) {
        let grid = self.grid();
        let body = self.model.body();
        let mut pairs: BTreeSet<(Region, Region)> = BTreeSet::new();
        let mut candidates = 0usize;
        let push = |pairs: &mut BTreeSet<(Region, Region)>, a: &Region, c: &Region| {
            if is_separate(a, c, grid) && in_material_universe(&a.union(c), body, grid) {
                pairs.insert(if a < c { (a.clone(), c.clone()) } else { (c.clone(), a.clone()) });
            }
        };
        if self.sources.len() <= 64 {
            for (i, a) in self.sources.iter().enumerate() {
                for c in &self.sources[i + 1..] {
                    push(&mut pairs, &a.d, &c.d);
                }
            }
            candidates = pairs.len();
        } else {
            let singles: Vec<&Region> = self.sources.iter().map(|s| &s.d).filter(|d| d.len() == 1).collect();
            let mut taken = 0;
            for (i, a) in singles.iter().enumerate() {
                for c in &singles[i + 1..] {
                    if is_separate(a, c, grid) {
                        candidates += 1;
                        if taken < self.cfg.pair_cap {
                            push(&mut pairs, a, c);
                            taken += 1;
                        }
                    }
                }
            }
        }
        // every tabulated source is split into separate pieces in all ways
        let mut tabled: BTreeSet<&Region> = BTreeSet::new();
        for fam in [self.model.heat_flux_family(), self.model.entropy_flux_family()] {
            for slice in fam.tables() {
                tabled.extend(slice.keys());
            }
        }
        for d in tabled {
            let cells: Vec<_> = d.iter().collect();
            if cells.len() < 2 || cells.len() > 12 {
                continue;
            }
            let n = cells.len();
            for m in 1u32..(1u32 << (n - 1)) {
                let mask = m << 1 | 1;
                let a = Region::from_cells((0..n).filter(|i| mask >> i & 1 == 1).map(|i| cells[i]));
                let c = d.difference(&a);
                if c.is_empty() || !in_material_universe(&a, body, grid) || !in_material_universe(&c, body, grid) {
                    continue;
                }
                let before = pairs.len();
                push(&mut pairs, &a, &c);
                candidates += pairs.len() - before;
            }
        }
        (pairs.into_iter().collect(), candidates.max(1))
    }

    fn s_additive(&self, id: AxiomId, fam: &FluxFamily<T>) -> CheckResult {
        let mut r = CheckResult::new(id);
        let grid = self.grid();
        let (pairs, candidates) = self.separate_pairs();
        r.coverage = Some(Coverage {
            enumerated: pairs.len(),
            total: candidates as f64,
            fraction: (pairs.len() as f64 / candidates as f64).min(1.0),
            exhaustive: self.universe.exhaustive && pairs.len() >= candidates,
        });
        if pairs.is_empty() {
            r.verdict = Verdict::Vacuous;
            return r;
        }
        for (a, c) in &pairs {
            let j = self.source(a.union(c));
            let sa = self.source(a.clone());
            let sc = self.source(c.clone());
            for k in 0..self.samples() {
                let (Some(mj), Some(ma), Some(mc)) =
                    (self.atom_map(fam, &j, k), self.atom_map(fam, &sa, k), self.atom_map(fam, &sc, k))
                else {
                    continue;
                };
                let atoms: BTreeSet<Atom> = mj.iter().chain(&ma).chain(&mc).map(|(a, _)| *a).collect();
                let get = |m: &AtomValues<T>, at: &Atom| lookup(m, at).unwrap_or_else(T::zero);
                let compare = |p: &Part, union: T, sum: T, r: &mut CheckResult| {
                    r.max_residual = r.max_residual.max(f(union - sum).abs());
                    if !union.close_to(sum, self.eps()) {
                        mark(
                            r,
                            Witness {
                                part: Some(grid.render_part(p)),
                                region: Some(grid.render_region(a)),
                                other_region: Some(grid.render_region(c)),
                                time_index: Some(k),
                                observed: Some(f(union)),
                                expected: Some(f(sum)),
                                detail: "flux from the union of separate sources differs from the sum".into(),
                            },
                        );
                    }
                };
                for at in atoms {
                    let p = Part::atom(at);
                    if !self.in_host(&at, &j.rest) || !part_separate_from(&p, &j.mask, grid) {
                        continue;
                    }
                    compare(&p, get(&mj, &at), get(&ma, &at) + get(&mc, &at), &mut r);
                }
                let mut entry_parts: BTreeSet<&Part> = BTreeSet::new();
                for s in [&j, &sa, &sc] {
                    if let Some(t) = fam.table(&s.d, k) {
                        entry_parts.extend(t.entries().keys());
                    }
                }
                for p in entry_parts {
                    if p.is_empty() || !part_in_closure(p, &j.rest, grid) || !part_separate_from(p, &j.mask, grid) {
                        continue;
                    }
                    let ev = |s: &Source| fam.eval_raw(p, &s.d, &s.mask, k).unwrap_or_else(T::zero);
                    compare(p, ev(&j), ev(&sa) + ev(&sc), &mut r);
                }
            }
        }
        r
    }

    /// T9 for the heat flux, T17 for the entropy flux: face values must sit
    /// on `∂D`; reports the volumetric and areal bounds.
    fn surface_bound(&self, id: AxiomId, fam: &FluxFamily<T>, heat: bool) -> CheckResult {
        let mut r = CheckResult::new(id);
        let grid = self.grid();
        let (vol, area) = (grid.cell_volume(), grid.face_area());
        let n = self.samples();
        let mut vol_bound = vec![(T::zero(), None::<String>); n];
        let mut area_bound = vec![(T::zero(), None::<String>); n];
        let detail = if heat {
            "heat flux on a zero-volume part off the boundary of the source"
        } else {
            "radiative entropy flux on a zero-volume part"
        };
        for src in &self.sources {
            for k in 0..n {
                let Some(map) = self.atom_map(fam, src, k) else { continue };
                for (atom, v) in &map {
                    if !v.is_finite() {
                        mark(
                            &mut r,
                            Witness {
                                part: Some(grid.render_atom(atom)),
                                region: Some(grid.render_region(&src.d)),
                                time_index: Some(k),
                                detail: "non-finite flux".into(),
                                ..Default::default()
                            },
                        );
                        continue;
                    }
                    match atom {
                        Atom::Cell(_) => {
                            let ratio = v.abs() / vol;
                            if ratio > vol_bound[k].0 {
                                vol_bound[k] = (ratio, Some(grid.render_atom(atom)));
                            }
                        }
                        Atom::Face(fc) => {
                            if grid.on_boundary(fc, &src.mask) {
                                let ratio = v.abs() / area;
                                if ratio > area_bound[k].0 {
                                    area_bound[k] = (ratio, Some(grid.render_atom(atom)));
                                }
                            } else if *v != T::zero() {
                                mark(
                                    &mut r,
                                    Witness {
                                        part: Some(grid.render_atom(atom)),
                                        region: Some(grid.render_region(&src.d)),
                                        time_index: Some(k),
                                        observed: Some(f(*v)),
                                        expected: Some(0.0),
                                        detail: detail.into(),
                                        ..Default::default()
                                    },
                                );
                            }
                        }
                    }
                }
                if let Some(table) = fam.table(&src.d, k) {
                    for (p, v) in table.entries() {
                        let on_boundary = p.faces.iter().any(|fc| grid.on_boundary(fc, &src.mask));
                        if p.cells.is_empty() && !on_boundary && *v != T::zero() {
                            mark(
                                &mut r,
                                Witness {
                                    part: Some(grid.render_part(p)),
                                    region: Some(grid.render_region(&src.d)),
                                    time_index: Some(k),
                                    observed: Some(f(*v)),
                                    expected: Some(0.0),
                                    detail: detail.into(),
                                    ..Default::default()
                                },
                            );
                        }
                    }
                }
            }
        }
        let names = if heat { ("beta", "gamma") } else { ("delta", "epsilon") };
        for (name, b) in [(names.0, vol_bound), (names.1, area_bound)] {
            r.bounds.push(BoundWitness {
                name: name.into(),
                values: b.iter().map(|x| f(x.0)).collect(),
                attained_at: b.into_iter().map(|x| x.1).collect(),
            });
        }
        r.coverage = Some(self.universe_coverage());
        r
    }

    fn first_law(&self) -> CheckResult {
        let mut r = CheckResult::new(AxiomId::T10);
        let grid = self.grid();
        let time = self.model.time();
        let energy = self.model.energy_series();
        if time.len() < 2 {
            mark(&mut r, Witness { detail: "energy derivative undefined with one time sample".into(), ..Default::default() });
            return r;
        }
        let masks: Vec<Vec<bool>> = self.subbodies.items.iter().map(|a| grid.mask(a)).collect();
        for k in 0..time.len() {
            for (a, a_mask) in self.subbodies.items.iter().zip(&masks) {
                let lhs = time
                    .derivative(k, |j| self.measure_on_closure(&energy[j], a, a_mask))
                    .unwrap_or_else(|_| T::nan());
                let Some(rhs) = self.flux_into_closure(self.model.heat_flux_family(), a, a_mask, k) else {
                    mark(
                        &mut r,
                        Witness {
                            part: Some(grid.render_region(a)),
                            time_index: Some(k),
                            detail: "no heat flux from the exterior".into(),
                            ..Default::default()
                        },
                    );
                    continue;
                };
                let residual = f((lhs - rhs).abs());
                if residual.is_nan() || residual > r.max_residual {
                    r.max_residual = if residual.is_nan() { f64::INFINITY } else { residual };
                }
                if !(residual <= self.cfg.tol.eps_balance) {
                    mark(
                        &mut r,
                        Witness {
                            part: Some(grid.render_region(a)),
                            region: Some("exterior".into()),
                            time_index: Some(k),
                            observed: Some(f(lhs)),
                            expected: Some(f(rhs)),
                            detail: "energy rate differs from heat flux from the exterior".into(),
                            ..Default::default()
                        },
                    );
                }
            }
        }
        r.coverage = Some(Coverage::from(&self.subbodies));
        r
    }

    fn second_law(&self) -> CheckResult {
        let mut r = CheckResult::new(AxiomId::T16);
        let grid = self.grid();
        let time = self.model.time();
        let entropy = self.model.entropy_series();
        let eps_ineq = self.cfg.tol.eps_ineq;

        let mut first_clause = Verdict::Pass;
        let mut production = Vec::new();
        let mut production_at = Vec::new();
        if time.len() < 2 {
            first_clause = Verdict::Fail;
            mark(&mut r, Witness { detail: "entropy derivative undefined with one time sample".into(), ..Default::default() });
        } else {
            let masks: Vec<Vec<bool>> = self.subbodies.items.iter().map(|a| grid.mask(a)).collect();
            for k in 0..time.len() {
                let mut low = f64::INFINITY;
                let mut low_at = None;
                for (a, a_mask) in self.subbodies.items.iter().zip(&masks) {
                    let rate = time
                        .derivative(k, |j| self.measure_on_closure(&entropy[j], a, a_mask))
                        .unwrap_or_else(|_| T::nan());
                    let inflow = self
                        .flux_into_closure(self.model.entropy_flux_family(), a, a_mask, k)
                        .unwrap_or_else(T::nan);
                    let slack = f(rate - inflow);
                    if slack.is_nan() || slack < low {
                        low = if slack.is_nan() { f64::NEG_INFINITY } else { slack };
                        low_at = Some(grid.render_region(a));
                    }
                    r.max_residual = r.max_residual.max(-slack).max(if slack.is_nan() { f64::INFINITY } else { 0.0 });
                    if !(slack >= -eps_ineq) {
                        first_clause = Verdict::Fail;
                        mark(
                            &mut r,
                            Witness {
                                part: Some(grid.render_region(a)),
                                region: Some("exterior".into()),
                                time_index: Some(k),
                                observed: Some(f(rate)),
                                expected: Some(f(inflow)),
                                detail: "entropy rate is below the entropy flux from the exterior".into(),
                                ..Default::default()
                            },
                        );
                    }
                }
                production.push(low);
                production_at.push(low_at);
            }
        }

        let mut second_clause = Verdict::Pass;
        let heat = self.model.heat_flux_family();
        let ent = self.model.entropy_flux_family();
        for src in &self.sources {
            for k in 0..self.samples() {
                let Some(mm) = self.atom_map(ent, src, k) else { continue };
                if !heat.defines(&src.d, k) {
                    continue;
                }
                let h_zero = |at: &Atom| self.atom_value(heat, *at, src, k) == T::zero();
                for (at, v) in &mm {
                    if h_zero(at) && !(f(v.abs()) <= self.cfg.tol.eps_balance) {
                        second_clause = Verdict::Fail;
                        mark(
                            &mut r,
                            Witness {
                                part: Some(grid.render_atom(at)),
                                region: Some(grid.render_region(&src.d)),
                                time_index: Some(k),
                                observed: Some(f(*v)),
                                expected: Some(0.0),
                                detail: "entropy flux into a part thermally isolated from the source".into(),
                                ..Default::default()
                            },
                        );
                    }
                }
                if let Some(table) = ent.table(&src.d, k) {
                    for (p, v) in table.entries() {
                        let isolated = p.atoms().all(|at| h_zero(&at))
                            && heat.table(&src.d, k).is_none_or(|ht| {
                                ht.entries().iter().all(|(q, hv)| !q.is_subset(p) || *hv == T::zero())
                            });
                        if isolated && !(f(v.abs()) <= self.cfg.tol.eps_balance) {
                            second_clause = Verdict::Fail;
                            mark(
                                &mut r,
                                Witness {
                                    part: Some(grid.render_part(p)),
                                    region: Some(grid.render_region(&src.d)),
                                    time_index: Some(k),
                                    observed: Some(f(*v)),
                                    expected: Some(0.0),
                                    detail: "entropy flux into a part thermally isolated from the source".into(),
                                    ..Default::default()
                                },
                            );
                        }
                    }
                }
            }
        }
        r.clauses = vec![
            Clause { name: "T16.1".into(), verdict: first_clause },
            Clause { name: "T16.2".into(), verdict: second_clause },
        ];
        r.bounds.push(BoundWitness { name: "min_production".into(), values: production, attained_at: production_at });
        r.coverage = Some(self.universe_coverage());
        r
    }

    fn exterior_identity(&self) -> CheckResult {
        let mut r = CheckResult::new(AxiomId::Thm1);
        let grid = self.grid();
        let body = self.model.body();
        let empty = Region::empty();
        for a in std::iter::once(&empty).chain(&self.subbodies.items) {
            if check_exterior_identity(a, body, grid) != Ok(true) {
                mark(
                    &mut r,
                    Witness {
                        region: Some(grid.render_region(a)),
                        detail: "exterior differs from relative exterior joined with the body's exterior".into(),
                        ..Default::default()
                    },
                );
                break;
            }
        }
        r.coverage = Some(Coverage::from(&self.subbodies));
        r
    }

    fn decomposition(&self) -> CheckResult {
        let mut r = CheckResult::new(AxiomId::Decomp);
        let grid = self.grid();
        let ent = self.model.entropy_flux_family();
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.enumeration.seed);
        let limit = self.cfg.decomp_sources.max(1);
        let stride = self.sources.len().div_ceil(limit).max(1);
        let chosen: Vec<&Source> = self
            .sources
            .iter()
            .enumerate()
            .filter(|(i, s)| i % stride == 0 || (0..self.samples()).any(|k| ent.table(&s.d, k).is_some()))
            .map(|(_, s)| s)
            .collect();
        for src in &chosen {
            let host = self.model.body().difference(&src.d).closure(grid);
            let atoms: Vec<Atom> = host.atoms().collect();
            for k in 0..self.samples() {
                let mut parts = vec![host.clone(), host.cells_only(), host.faces_only()];
                if let Some(t) = ent.table(&src.d, k) {
                    parts.extend(t.entries().keys().cloned());
                }
                for _ in 0..2 {
                    parts.push(Part::from_atoms(atoms.iter().copied().filter(|_| rng.gen_bool(0.5))));
                }
                for p in &parts {
                    let (rest, on) = p.split_boundary(grid, &src.mask);
                    let eval = |q: &Part| ent.eval_raw(q, &src.d, &src.mask, k);
                    let (Some(m), Some(kk), Some(jj)) = (eval(p), eval(&rest), eval(&on)) else { continue };
                    let split = kk + jj;
                    r.max_residual = r.max_residual.max(f(m - split).abs());
                    if m != split {
                        mark(
                            &mut r,
                            Witness {
                                part: Some(grid.render_part(p)),
                                region: Some(grid.render_region(&src.d)),
                                time_index: Some(k),
                                observed: Some(f(m)),
                                expected: Some(f(split)),
                                detail: "entropy flux differs from radiative plus conductive parts".into(),
                                ..Default::default()
                            },
                        );
                    }
                }
            }
        }
        let total = self.sources.len() as f64;
        r.coverage = Some(Coverage {
            enumerated: chosen.len(),
            total: self.universe.total.max(total),
            fraction: (chosen.len() as f64 / self.universe.total.max(total)).min(1.0),
            exhaustive: self.universe.exhaustive && chosen.len() == self.sources.len(),
        });
        r
    }
}
