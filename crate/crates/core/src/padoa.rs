//! Padoa's method on finite models.
//!
//! The interpretation of a primitive is its extensional graph: the set of
//! (source, argument, time, value) tuples of the function table, with cells
//! and faces keyed by their position and size in space rather than by grid
//! index. Two interpretations are the same when the sets are equal.
//!
//! [`define_time`] reads time off the last component of the graphs alone.
//! [`independence_search`] looks for two models of the axioms that agree on
//! every primitive but one. For time the search comes back empty with a
//! projection argument attached: any model with the same graphs of E, H, S, M
//! has the time [`define_time`] extracts from them. A dummy control constant,
//! which no axiom mentions, shows the search does find pairs when they exist.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ordered_float::OrderedFloat;
use serde::Serialize;
use thiserror::Error;

use crate::axioms::{check_all, AxiomId, CheckConfig, CheckReport};
use crate::enumerate::{self, EnumConfig};
use crate::geometry::{Atom, Axis, CellId, Face, Grid, Part, Region};
use crate::measure::GridMeasure;
use crate::structure::{FluxFamily, FluxField, ThermoModel, TimeGrid};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrimitiveId {
    Space,
    Time,
    E,
    H,
    S,
    M,
}

impl PrimitiveId {
    pub const ALL: [PrimitiveId; 6] =
        [PrimitiveId::Space, PrimitiveId::Time, PrimitiveId::E, PrimitiveId::H, PrimitiveId::S, PrimitiveId::M];

    pub fn name(self) -> &'static str {
        match self {
            PrimitiveId::Space => "SPACE",
            PrimitiveId::Time => "TIME",
            PrimitiveId::E => "E",
            PrimitiveId::H => "H",
            PrimitiveId::S => "S",
            PrimitiveId::M => "M",
        }
    }
}

impl fmt::Display for PrimitiveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for PrimitiveId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// What the search tries to vary: one of the six primitives, or the control
/// constant `g` that appears in no axiom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    Primitive(PrimitiveId),
    Control,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Primitive(p) => p.name(),
            Target::Control => "CONTROL",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Target {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown primitive {0:?}; expected SPACE, TIME, E, H, S, M or CONTROL")]
pub struct UnknownPrimitive(pub String);

impl FromStr for Target {
    type Err = UnknownPrimitive;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.to_ascii_uppercase();
        if up == "CONTROL" || up == "G" {
            return Ok(Target::Control);
        }
        PrimitiveId::ALL
            .into_iter()
            .find(|p| p.name() == up)
            .map(Target::Primitive)
            .ok_or_else(|| UnknownPrimitive(s.to_string()))
    }
}

impl FromStr for PrimitiveId {
    type Err = UnknownPrimitive;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.parse::<Target>()? {
            Target::Primitive(p) => Ok(p),
            Target::Control => Err(UnknownPrimitive(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PadoaError {
    #[error("the graphs define no time: {0} is empty")]
    Empty(&'static str),
    #[error("ill-formed model: the last component of {0} disagrees with that of E")]
    IllFormed(&'static str),
    #[error("extracted time is not a valid time grid: {0}")]
    BadTime(String),
    #[error("search found a candidate with the base graphs but a different time; the projection argument is broken")]
    Inconsistent,
}

type Key = OrderedFloat<f64>;

/// A cell or face located in space: kind 0 is a cell, 1..=3 a face normal
/// to x, y, z; `corner` is the low corner, `size` the edge length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GeoAtom {
    pub kind: u8,
    pub corner: [Key; 3],
    pub size: Key,
}

pub fn geo_atom<T: Scalar>(grid: &Grid<T>, atom: Atom) -> GeoAtom {
    let h = grid.spacing();
    let (kind, pos) = match atom {
        Atom::Cell(c) => (0, grid.coords(c)),
        Atom::Face(f) => (1 + f.axis.index() as u8, f.coords()),
    };
    let corner = pos.map(|i| OrderedFloat((T::lit(i as f64) * h).as_f64()));
    GeoAtom { kind, corner, size: OrderedFloat(h.as_f64()) }
}

pub fn geo_cells<T: Scalar>(grid: &Grid<T>, region: &Region) -> BTreeSet<GeoAtom> {
    region.iter().map(|c| geo_atom(grid, Atom::Cell(c))).collect()
}

fn geo_part<T: Scalar>(grid: &Grid<T>, part: &Part) -> Arc<[GeoAtom]> {
    let mut v: Vec<GeoAtom> = part.atoms().map(|a| geo_atom(grid, a)).collect();
    v.sort();
    v.into()
}

fn geo_region<T: Scalar>(grid: &Grid<T>, region: &Region) -> Arc<[GeoAtom]> {
    let v: Vec<GeoAtom> = geo_cells(grid, region).into_iter().collect();
    v.into()
}

/// One tuple of a function's graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Row {
    /// Second argument of a flux; `None` for energy and entropy.
    pub source: Option<Arc<[GeoAtom]>>,
    pub arg: Arc<[GeoAtom]>,
    pub time: Key,
    pub value: Key,
}

/// The remaining components of a row once its source is fixed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Entry {
    arg: Arc<[GeoAtom]>,
    time: Key,
    value: Key,
}

type SourceKey = Option<Arc<[GeoAtom]>>;

/// A set of rows, grouped by source so that long source keys are compared
/// once per group rather than once per row.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Graph {
    groups: BTreeMap<SourceKey, BTreeSet<Entry>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, row: Row) -> bool {
        let Row { source, arg, time, value } = row;
        self.groups.entry(source).or_default().insert(Entry { arg, time, value })
    }

    pub fn contains(&self, row: &Row) -> bool {
        self.groups.get(&row.source).is_some_and(|g| {
            g.contains(&Entry { arg: row.arg.clone(), time: row.time, value: row.value })
        })
    }

    pub fn len(&self) -> usize {
        self.groups.values().map(|g| g.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.values().all(|g| g.is_empty())
    }

    pub fn iter(&self) -> impl Iterator<Item = Row> + '_ {
        self.groups.iter().flat_map(|(src, g)| {
            g.iter().map(move |e| Row { source: src.clone(), arg: e.arg.clone(), time: e.time, value: e.value })
        })
    }

    fn times(&self) -> BTreeSet<Key> {
        self.groups.values().flat_map(|g| g.iter().map(|e| e.time)).collect()
    }
}

/// Receives rows source by source; returns false to stop the walk.
type Visitor<'a> = dyn FnMut(&SourceKey, Entry) -> bool + 'a;

fn same_source(a: &SourceKey, b: &SourceKey) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => Arc::ptr_eq(x, y),
        _ => false,
    }
}

fn collect(walk: impl FnOnce(&mut Visitor<'_>) -> bool) -> Graph {
    let mut g = Graph::new();
    let mut current: Option<(SourceKey, BTreeSet<Entry>)> = None;
    walk(&mut |src: &SourceKey, e: Entry| {
        match &mut current {
            Some((k, set)) if same_source(k, src) => {
                set.insert(e);
            }
            _ => {
                if let Some((k, set)) = current.take() {
                    g.groups.entry(k).or_default().extend(set);
                }
                current = Some((src.clone(), BTreeSet::from([e])));
            }
        }
        true
    });
    if let Some((k, set)) = current {
        g.groups.entry(k).or_default().extend(set);
    }
    g
}

/// True when every row produced by `walk` lies in `base`; stops at the
/// first row that does not.
fn rows_within(base: &Graph, walk: impl FnOnce(&mut Visitor<'_>) -> bool) -> bool {
    let mut current: Option<(SourceKey, Option<&BTreeSet<Entry>>)> = None;
    walk(&mut |src: &SourceKey, e: Entry| {
        let group = match &current {
            Some((k, g)) if same_source(k, src) => *g,
            _ => {
                let g = base.groups.get(src);
                current = Some((src.clone(), g));
                g
            }
        };
        group.is_some_and(|g| g.contains(&e))
    })
}

fn closure_keys<T: Scalar>(model: &ThermoModel<T>) -> Vec<(Atom, Arc<[GeoAtom]>)> {
    let grid = model.grid();
    model.body_closure().atoms().map(|a| (a, geo_part(grid, &Part::atom(a)))).collect()
}

fn walk_measure<T: Scalar>(model: &ThermoModel<T>, series: &[GridMeasure<T>], f: &mut Visitor<'_>) -> bool {
    let grid = model.grid();
    let atoms = closure_keys(model);
    for (k, mu) in series.iter().enumerate() {
        let time = OrderedFloat(model.time().samples()[k].as_f64());
        for (a, key) in &atoms {
            if !f(&None, Entry { arg: key.clone(), time, value: OrderedFloat(mu.atom(*a).as_f64()) }) {
                return false;
            }
        }
        for (p, v) in mu.entries() {
            if !f(&None, Entry { arg: geo_part(grid, p), time, value: OrderedFloat(v.as_f64()) }) {
                return false;
            }
        }
    }
    true
}

/// Flux sources used for the graphs: every explicit table source, then the
/// first `max_sources` enumerated subbodies together with their exteriors.
/// Exteriors are what tie the flux graphs to the extent of space.
pub fn graph_sources<T: Scalar>(model: &ThermoModel<T>, cfg: &TableConfig) -> Vec<Region> {
    let grid = model.grid();
    let all = grid.full_region();
    let sub = enumerate::subbodies(model.body(), &cfg.enumeration);
    let mut set: BTreeSet<Region> = BTreeSet::new();
    for fam in [model.heat_flux_family(), model.entropy_flux_family()] {
        for slice in fam.tables() {
            set.extend(slice.keys().cloned());
        }
    }
    for a in sub.items.into_iter().take(cfg.max_sources) {
        let ext = all.difference(&a);
        if !ext.is_empty() {
            set.insert(ext);
        }
        set.insert(a);
    }
    set.into_iter().collect()
}

fn walk_flux<T: Scalar>(model: &ThermoModel<T>, fam: &FluxFamily<T>, sources: &[Region], f: &mut Visitor<'_>) -> bool {
    let grid = model.grid();
    let atoms = closure_keys(model);
    for d in sources {
        let mask = grid.mask(d);
        let src = Some(geo_region(grid, d));
        for k in 0..fam.len() {
            if !fam.defines(d, k) {
                continue;
            }
            let time = OrderedFloat(model.time().samples()[k].as_f64());
            for (a, key) in &atoms {
                if let Some(v) = fam.atom_raw(*a, d, &mask, k) {
                    if !f(&src, Entry { arg: key.clone(), time, value: OrderedFloat(v.as_f64()) }) {
                        return false;
                    }
                }
            }
            if let Some(t) = fam.table(d, k) {
                for (p, v) in t.entries() {
                    if !f(&src, Entry { arg: geo_part(grid, p), time, value: OrderedFloat(v.as_f64()) }) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

fn walk<T: Scalar>(model: &ThermoModel<T>, p: PrimitiveId, cfg: &TableConfig, f: &mut Visitor<'_>) -> bool {
    match p {
        PrimitiveId::E => walk_measure(model, model.energy_series(), f),
        PrimitiveId::S => walk_measure(model, model.entropy_series(), f),
        PrimitiveId::H => walk_flux(model, model.heat_flux_family(), &graph_sources(model, cfg), f),
        PrimitiveId::M => walk_flux(model, model.entropy_flux_family(), &graph_sources(model, cfg), f),
        PrimitiveId::Space | PrimitiveId::Time => true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableConfig {
    /// Subbodies whose exteriors and selves serve as flux sources.
    pub enumeration: EnumConfig,
    /// Largest number of subbodies used as flux sources, besides explicit
    /// table sources; each brings its exterior along.
    pub max_sources: usize,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig { enumeration: EnumConfig::default(), max_sources: 32 }
    }
}

/// The six primitives as extensional tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    pub space: BTreeSet<GeoAtom>,
    pub time: BTreeSet<Key>,
    pub energy: Graph,
    pub heat_flux: Graph,
    pub entropy: Graph,
    pub entropy_flux: Graph,
}

pub fn space_table<T: Scalar>(model: &ThermoModel<T>) -> BTreeSet<GeoAtom> {
    geo_cells(model.grid(), &model.grid().full_region())
}

pub fn time_table<T: Scalar>(model: &ThermoModel<T>) -> BTreeSet<Key> {
    model.time().samples().iter().map(|t| OrderedFloat(t.as_f64())).collect()
}

/// Graph of one of the four functions.
pub fn graph<T: Scalar>(model: &ThermoModel<T>, p: PrimitiveId, cfg: &TableConfig) -> Option<Graph> {
    match p {
        PrimitiveId::Space | PrimitiveId::Time => None,
        _ => Some(collect(|f| walk(model, p, cfg, f))),
    }
}

pub fn tables<T: Scalar>(model: &ThermoModel<T>, cfg: &TableConfig) -> Tables {
    let sources = graph_sources(model, cfg);
    Tables {
        space: space_table(model),
        time: time_table(model),
        energy: collect(|f| walk_measure(model, model.energy_series(), f)),
        heat_flux: collect(|f| walk_flux(model, model.heat_flux_family(), &sources, f)),
        entropy: collect(|f| walk_measure(model, model.entropy_series(), f)),
        entropy_flux: collect(|f| walk_flux(model, model.entropy_flux_family(), &sources, f)),
    }
}

fn last_component(g: &Graph) -> BTreeSet<Key> {
    g.times()
}

/// Time as the last component of E's graph, checked against H, S and M. The
/// `time` field of the tables is not read.
pub fn define_time<T: Scalar>(t: &Tables) -> Result<TimeGrid<T>, PadoaError> {
    let points = last_component(&t.energy);
    if points.is_empty() {
        return Err(PadoaError::Empty("E"));
    }
    for (name, g) in [("H", &t.heat_flux), ("S", &t.entropy), ("M", &t.entropy_flux)] {
        if last_component(g) != points {
            return Err(PadoaError::IllFormed(name));
        }
    }
    let samples = points.into_iter().map(|k| T::from_f64(k.0).unwrap_or_else(T::nan)).collect();
    TimeGrid::new(samples).map_err(|e| PadoaError::BadTime(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefinedSpace {
    pub cells: BTreeSet<GeoAtom>,
    pub warning: Option<&'static str>,
}

/// Cells occurring in the first argument of any of the four functions. The
/// `space` field of the tables is not read.
pub fn define_space(t: &Tables) -> DefinedSpace {
    let cells: BTreeSet<GeoAtom> = [&t.energy, &t.heat_flux, &t.entropy, &t.entropy_flux]
        .into_iter()
        .flat_map(|g| g.groups.values().flat_map(|set| set.iter().flat_map(|e| e.arg.iter().filter(|a| a.kind == 0).copied())))
        .collect();
    let warning = cells.is_empty().then_some("function tables are empty; no cells to extract");
    DefinedSpace { cells, warning }
}

/// A finite family of candidate models around a base model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFamily<T> {
    pub base: ThermoModel<T>,
    /// Time labels tried besides the base samples.
    pub time_pool: Vec<T>,
    /// Largest number of samples in a relabeled time.
    pub max_samples: usize,
    /// Factors `1 + λ` applied to the target function.
    pub scales: Vec<T>,
    /// Volume densities `λ` added to every body cell of E or S at every time.
    pub shifts: Vec<T>,
    /// Values tried for the control constant.
    pub control_values: Vec<T>,
    pub tables: TableConfig,
    pub checks: CheckConfig,
}

impl<T: Scalar> ModelFamily<T> {
    /// Default family: two extra labels outside the sampled interval and one
    /// between the first two samples, one extra sample, four scalings, two
    /// shifts, control values 0 and 1.
    pub fn around(base: ThermoModel<T>) -> Self {
        let s = base.time().samples();
        let first = s[0];
        let last = s[s.len() - 1];
        let mut pool = vec![first - T::one(), last + T::one()];
        if s.len() >= 2 {
            pool.push((s[0] + s[1]) / T::lit(2.0));
        }
        let max_samples = s.len() + 1;
        ModelFamily {
            base,
            time_pool: pool,
            max_samples,
            scales: [-0.5, -0.1, 0.1, 0.5].map(T::lit).to_vec(),
            shifts: [0.5, 1.0].map(T::lit).to_vec(),
            control_values: vec![T::zero(), T::one()],
            tables: TableConfig::default(),
            checks: CheckConfig::default(),
        }
    }

    fn pool(&self) -> Vec<T> {
        let mut v: Vec<T> = self.base.time().samples().to_vec();
        v.extend(self.time_pool.iter().copied().filter(|t| t.is_finite()));
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        v.dedup();
        v
    }

    /// Number of candidates for `target`, saturating.
    pub fn size(&self, target: Target) -> u64 {
        match target {
            Target::Primitive(PrimitiveId::Time) => {
                let n = self.base.time().len() as u128;
                let m = self.pool().len() as u128;
                let mut total: u128 = 0;
                for c in 1..=self.max_samples as u128 {
                    total = total.saturating_add(binomial(m, c).saturating_mul(n.saturating_pow(c as u32)));
                }
                // the base itself is not a candidate
                total.saturating_sub(1).min(u64::MAX as u128) as u64
            }
            Target::Primitive(PrimitiveId::Space) => space_moves().len() as u64,
            Target::Primitive(PrimitiveId::E | PrimitiveId::S) => (self.scales.len() + self.shifts.len()) as u64,
            Target::Primitive(PrimitiveId::H | PrimitiveId::M) => self.scales.len() as u64,
            Target::Control => {
                let k = self.control_values.len() as u64;
                k * k.saturating_sub(1) / 2
            }
        }
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

/// Why a candidate does not complete a witness pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    /// A primitive other than the target changed interpretation.
    GraphDiffers { primitive: PrimitiveId },
    /// The target's interpretation is the base's.
    TargetUnchanged,
    /// The candidate tables do not form a model.
    NotAModel { error: String },
    /// One of the two models violates an axiom.
    AxiomsFail { model: &'static str, axioms: Vec<AxiomId> },
}

impl Rejection {
    fn key(&self) -> String {
        match self {
            Rejection::GraphDiffers { primitive } => format!("graph_differs:{primitive}"),
            Rejection::TargetUnchanged => "target_unchanged".into(),
            Rejection::NotAModel { .. } => "not_a_model".into(),
            Rejection::AxiomsFail { model, .. } => format!("axioms_fail:{model}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateOutcome {
    pub candidate: String,
    #[serde(flatten)]
    pub rejection: Rejection,
}

/// Record of a search that produced no pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub target: Target,
    pub family_size: u64,
    pub examined: u64,
    /// Every candidate of the family was examined.
    pub exhaustive: bool,
    /// An argument covering all models, not just the family, when one applies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proof: Option<String>,
    /// Rejection counts by reason.
    pub rejections: BTreeMap<String, u64>,
    /// The first few rejected candidates.
    pub examples: Vec<CandidateOutcome>,
}

/// Two models of the axioms that agree on every primitive but the target.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessPair<T> {
    pub target: Target,
    pub candidate: String,
    pub first: ThermoModel<T>,
    pub second: ThermoModel<T>,
    /// Control constant in each model, when the target is the control.
    pub control: Option<(T, T)>,
    /// Primitives verified to have equal graphs.
    pub equal: Vec<PrimitiveId>,
}

impl<T: Scalar> WitnessPair<T> {
    /// Re-checks the pair from scratch: equal non-target graphs, different
    /// target, both models pass every axiom.
    pub fn verify(&self, tables: &TableConfig, checks: &CheckConfig) -> bool {
        let non_target_equal = PrimitiveId::ALL
            .into_iter()
            .filter(|p| Target::Primitive(*p) != self.target)
            .all(|p| same_interpretation(&self.first, &self.second, p, tables, false));
        let differs = match self.target {
            Target::Primitive(p) => !same_interpretation(&self.first, &self.second, p, tables, false),
            Target::Control => self.control.is_some_and(|(a, b)| a != b),
        };
        non_target_equal
            && differs
            && check_all(&self.first, checks).passed()
            && check_all(&self.second, checks).passed()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchOutcome<T> {
    Found(Box<WitnessPair<T>>),
    /// No pair in the family, or none anywhere when a proof is attached.
    NoneFound(Certificate),
    /// Budget ran out before the family was exhausted.
    Inconclusive(Certificate),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSummary {
    pub candidate: String,
    pub equal_primitives: Vec<PrimitiveId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control: Option<[f64; 2]>,
}

/// Serializable view of an outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeSummary {
    pub target: Target,
    pub outcome: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<PairSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
}

impl<T: Scalar> SearchOutcome<T> {
    pub fn summary(&self, target: Target) -> OutcomeSummary {
        match self {
            SearchOutcome::Found(w) => OutcomeSummary {
                target,
                outcome: "found",
                witness: Some(PairSummary {
                    candidate: w.candidate.clone(),
                    equal_primitives: w.equal.clone(),
                    control: w.control.map(|(a, b)| [a.as_f64(), b.as_f64()]),
                }),
                certificate: None,
            },
            SearchOutcome::NoneFound(c) => {
                OutcomeSummary { target, outcome: "none_found", witness: None, certificate: Some(c.clone()) }
            }
            SearchOutcome::Inconclusive(c) => {
                OutcomeSummary { target, outcome: "inconclusive", witness: None, certificate: Some(c.clone()) }
            }
        }
    }
}

/// Same interpretation of `p` in both models. With `shortcut`, identical
/// inputs are accepted without building the graphs, since a graph is a
/// function of those inputs.
pub fn same_interpretation<T: Scalar>(
    a: &ThermoModel<T>,
    b: &ThermoModel<T>,
    p: PrimitiveId,
    cfg: &TableConfig,
    shortcut: bool,
) -> bool {
    same_cached(a, &mut BTreeMap::new(), b, p, cfg, shortcut)
}

/// As [`same_interpretation`], memoizing the graphs of `a` in `cache`.
fn same_cached<T: Scalar>(
    a: &ThermoModel<T>,
    cache: &mut BTreeMap<PrimitiveId, Graph>,
    b: &ThermoModel<T>,
    p: PrimitiveId,
    cfg: &TableConfig,
    shortcut: bool,
) -> bool {
    match p {
        PrimitiveId::Space => return space_table(a) == space_table(b),
        PrimitiveId::Time => return time_table(a) == time_table(b),
        _ => {}
    }
    if shortcut && a.grid() == b.grid() && a.body() == b.body() && a.time() == b.time() {
        let same_inputs = match p {
            PrimitiveId::E => a.energy_series() == b.energy_series(),
            PrimitiveId::S => a.entropy_series() == b.entropy_series(),
            PrimitiveId::H => a.heat_flux_family() == b.heat_flux_family(),
            PrimitiveId::M => a.entropy_flux_family() == b.entropy_flux_family(),
            PrimitiveId::Space | PrimitiveId::Time => unreachable!(),
        };
        if same_inputs {
            return true;
        }
    }
    let ga = cache.entry(p).or_insert_with(|| graph(a, p, cfg).expect("function primitive"));
    // most candidates differ early; only a full match pays for the whole graph
    rows_within(ga, |f| walk(b, p, cfg, f)) && *ga == graph(b, p, cfg).expect("function primitive")
}

struct Candidate<T> {
    label: String,
    model: Result<ThermoModel<T>, String>,
    control: Option<(T, T)>,
}

/// Rigid moves and rescalings of space: pad one layer on either side of each
/// axis, swap two axes, halve or double the spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
enum SpaceMove {
    Pad { axis: usize, high: bool },
    Swap(usize, usize),
    Scale(f64),
}

fn space_moves() -> Vec<SpaceMove> {
    let mut v = Vec::new();
    for axis in 0..3 {
        for high in [false, true] {
            v.push(SpaceMove::Pad { axis, high });
        }
    }
    v.extend([SpaceMove::Swap(0, 1), SpaceMove::Swap(1, 2), SpaceMove::Swap(0, 2)]);
    v.extend([SpaceMove::Scale(0.5), SpaceMove::Scale(2.0)]);
    v
}

/// Carries every table of `model` to a grid of `dims` and spacing `h`: cell
/// coordinate `i` along old axis `a` lands at `i + offset[perm[a]]` along new
/// axis `perm[a]`.
fn transport<T: Scalar>(
    model: &ThermoModel<T>,
    dims: [usize; 3],
    h: T,
    perm: [usize; 3],
    offset: [usize; 3],
) -> Result<ThermoModel<T>, String> {
    let old = model.grid();
    let grid = Grid::new(dims, h).map_err(|e| e.to_string())?;
    let place = |p: [usize; 3]| {
        let mut q = [0usize; 3];
        for a in 0..3 {
            q[perm[a]] = p[a] + offset[perm[a]];
        }
        q
    };
    let cell = |c: CellId| grid.cell(place(old.coords(c))).expect("transported cell in grid");
    let axes = [Axis::X, Axis::Y, Axis::Z];
    let face = |f: Face| Face::new(axes[perm[f.axis.index()]], place(f.coords()));
    let atom = |a: Atom| match a {
        Atom::Cell(c) => Atom::Cell(cell(c)),
        Atom::Face(f) => Atom::Face(face(f)),
    };
    let region = |r: &Region| Region::from_cells(r.iter().map(cell));
    let part = |p: &Part| Part::from_atoms(p.atoms().map(atom));
    let measure = |m: &GridMeasure<T>| {
        let mut out = GridMeasure::new();
        for (c, v) in m.cell_densities() {
            out.set_cell(cell(*c), *v);
        }
        for (f, v) in m.face_densities() {
            out.set_face(face(*f), *v);
        }
        for (p, v) in m.entries() {
            out.set_entry(part(p), *v);
        }
        out
    };
    let family = |fam: &FluxFamily<T>| {
        let tables = fam
            .tables()
            .iter()
            .map(|slice| slice.iter().map(|(d, m)| (region(d), measure(m))).collect())
            .collect();
        let mut out = FluxFamily::from_tables(tables);
        if let Some(kern) = fam.kernel() {
            out.kernel = Some(
                kern.iter()
                    .map(|field| {
                        let mut f = FluxField::new();
                        for (a, s, v) in field.iter() {
                            f.set(atom(a), cell(s), v);
                        }
                        f
                    })
                    .collect(),
            );
        }
        out
    };
    ThermoModel::new(
        grid.clone(),
        region(model.body()),
        model.time().clone(),
        model.energy_series().iter().map(measure).collect(),
        model.entropy_series().iter().map(measure).collect(),
        family(model.heat_flux_family()),
        family(model.entropy_flux_family()),
    )
    .map_err(|e| e.to_string())
}

fn space_candidate<T: Scalar>(model: &ThermoModel<T>, mv: SpaceMove) -> Candidate<T> {
    let dims = model.grid().dims();
    let h = model.grid().spacing();
    let (label, result) = match mv {
        SpaceMove::Pad { axis, high } => {
            let mut d = dims;
            d[axis] += 1;
            let mut offset = [0; 3];
            if !high {
                offset[axis] = 1;
            }
            let side = if high { "high" } else { "low" };
            (format!("pad {side} {}", ["x", "y", "z"][axis]), transport(model, d, h, [0, 1, 2], offset))
        }
        SpaceMove::Swap(a, b) => {
            let mut perm = [0, 1, 2];
            perm.swap(a, b);
            let mut d = dims;
            d.swap(a, b);
            (format!("swap {} {}", ["x", "y", "z"][a], ["x", "y", "z"][b]), transport(model, d, h, perm, [0; 3]))
        }
        SpaceMove::Scale(f) => (format!("spacing x{f}"), transport(model, dims, h * T::lit(f), [0, 1, 2], [0; 3])),
    };
    Candidate { label, model: result, control: None }
}

/// Relabeled times: strictly increasing label sets drawn from the pool, each
/// label carrying the tables of some base sample. Generated lazily, at most
/// `limit` of them.
fn time_candidates<T: Scalar>(family: &ModelFamily<T>, limit: u64) -> Vec<Candidate<T>> {
    let base = &family.base;
    let n = base.time().len();
    let pool = family.pool();
    let mut out = Vec::new();
    for c in 1..=family.max_samples.min(pool.len()) {
        let mut subset: Vec<usize> = (0..c).collect();
        loop {
            let labels: Vec<T> = subset.iter().map(|i| pool[*i]).collect();
            let mut slices = vec![0usize; c];
            loop {
                let is_base = labels == base.time().samples() && slices.iter().enumerate().all(|(i, s)| *s == i);
                if !is_base {
                    if out.len() as u64 >= limit {
                        return out;
                    }
                    out.push(Candidate {
                        label: format!("time {:?} carrying samples {:?}", labels, slices),
                        model: relabel(base, &labels, &slices),
                        control: None,
                    });
                }
                // odometer over slice assignments
                let mut i = c;
                loop {
                    if i == 0 {
                        break;
                    }
                    i -= 1;
                    slices[i] += 1;
                    if slices[i] < n {
                        break;
                    }
                    slices[i] = 0;
                    if i == 0 {
                        i = usize::MAX;
                        break;
                    }
                }
                if i == usize::MAX || c == 0 {
                    break;
                }
            }
            // next c-subset of pool indices
            let m = pool.len();
            let mut j = c;
            while j > 0 && subset[j - 1] == m - c + j - 1 {
                j -= 1;
            }
            if j == 0 {
                break;
            }
            subset[j - 1] += 1;
            for l in j..c {
                subset[l] = subset[l - 1] + 1;
            }
        }
    }
    out
}

fn relabel<T: Scalar>(base: &ThermoModel<T>, labels: &[T], slices: &[usize]) -> Result<ThermoModel<T>, String> {
    let time = TimeGrid::new(labels.to_vec()).map_err(|e| e.to_string())?;
    let pick = |series: &[GridMeasure<T>]| slices.iter().map(|k| series[*k].clone()).collect::<Vec<_>>();
    let family = |fam: &FluxFamily<T>| {
        let mut out = FluxFamily::from_tables(slices.iter().map(|k| fam.tables()[*k].clone()).collect());
        if let Some(kern) = fam.kernel() {
            out.kernel = Some(slices.iter().map(|k| kern[*k].clone()).collect());
        }
        out
    };
    ThermoModel::new(
        base.grid().clone(),
        base.body().clone(),
        time,
        pick(base.energy_series()),
        pick(base.entropy_series()),
        family(base.heat_flux_family()),
        family(base.entropy_flux_family()),
    )
    .map_err(|e| e.to_string())
}

fn scale_family<T: Scalar>(fam: &FluxFamily<T>, f: T) -> FluxFamily<T> {
    let tables = fam.tables().iter().map(|slice| slice.iter().map(|(d, m)| (d.clone(), m.map(|v| v * f))).collect()).collect();
    let mut out = FluxFamily::from_tables(tables);
    if let Some(kern) = fam.kernel() {
        out.kernel = Some(
            kern.iter()
                .map(|field| {
                    let mut g = FluxField::new();
                    for (a, s, v) in field.iter() {
                        g.set(a, s, v * f);
                    }
                    g
                })
                .collect(),
        );
    }
    out
}

fn rebuild<T: Scalar>(
    base: &ThermoModel<T>,
    energy: Option<Vec<GridMeasure<T>>>,
    entropy: Option<Vec<GridMeasure<T>>>,
    heat: Option<FluxFamily<T>>,
    ent_flux: Option<FluxFamily<T>>,
) -> Result<ThermoModel<T>, String> {
    ThermoModel::new(
        base.grid().clone(),
        base.body().clone(),
        base.time().clone(),
        energy.unwrap_or_else(|| base.energy_series().to_vec()),
        entropy.unwrap_or_else(|| base.entropy_series().to_vec()),
        heat.unwrap_or_else(|| base.heat_flux_family().clone()),
        ent_flux.unwrap_or_else(|| base.entropy_flux_family().clone()),
    )
    .map_err(|e| e.to_string())
}

fn function_candidates<T: Scalar>(family: &ModelFamily<T>, p: PrimitiveId) -> Vec<Candidate<T>> {
    let base = &family.base;
    let mut out = Vec::new();
    let series = |p: PrimitiveId| match p {
        PrimitiveId::E => base.energy_series(),
        _ => base.entropy_series(),
    };
    for lam in &family.scales {
        let f = T::one() + *lam;
        let model = match p {
            PrimitiveId::E => rebuild(base, Some(series(p).iter().map(|m| m.map(|v| v * f)).collect()), None, None, None),
            PrimitiveId::S => rebuild(base, None, Some(series(p).iter().map(|m| m.map(|v| v * f)).collect()), None, None),
            PrimitiveId::H => rebuild(base, None, None, Some(scale_family(base.heat_flux_family(), f)), None),
            PrimitiveId::M => rebuild(base, None, None, None, Some(scale_family(base.entropy_flux_family(), f))),
            _ => unreachable!(),
        };
        out.push(Candidate { label: format!("scale {p} by {f:?}"), model, control: None });
    }
    if matches!(p, PrimitiveId::E | PrimitiveId::S) {
        let vol = base.grid().cell_volume();
        for lam in &family.shifts {
            let shifted: Vec<GridMeasure<T>> = series(p)
                .iter()
                .map(|m| {
                    let mut m = m.clone();
                    for c in base.body().iter() {
                        m.add_cell(c, *lam * vol);
                    }
                    m
                })
                .collect();
            let model = if p == PrimitiveId::E {
                rebuild(base, Some(shifted), None, None, None)
            } else {
                rebuild(base, None, Some(shifted), None, None)
            };
            out.push(Candidate { label: format!("add {lam:?} per unit volume to {p}"), model, control: None });
        }
    }
    out
}

fn candidates<T: Scalar>(family: &ModelFamily<T>, target: Target, limit: u64) -> Vec<Candidate<T>> {
    let mut v = match target {
        Target::Primitive(PrimitiveId::Time) => return time_candidates(family, limit),
        Target::Primitive(PrimitiveId::Space) => {
            space_moves().into_iter().map(|mv| space_candidate(&family.base, mv)).collect()
        }
        Target::Primitive(p) => function_candidates(family, p),
        Target::Control => {
            let vals = &family.control_values;
            let mut v = Vec::new();
            for i in 0..vals.len() {
                for j in i + 1..vals.len() {
                    v.push(Candidate {
                        label: format!("control g = {:?} versus {:?}", vals[i], vals[j]),
                        model: Ok(family.base.clone()),
                        control: Some((vals[i], vals[j])),
                    });
                }
            }
            v
        }
    };
    v.truncate(limit.min(usize::MAX as u64) as usize);
    v
}

const TIME_PROOF: &str = "define_time recovers the time as the last component of the graph of E and checks \
that H, S and M project to the same set; a model whose graphs of E, H, S and M equal the base's therefore \
has the base's time, so no reinterpretation of TIME keeps the other primitives fixed";

/// Searches `family` for a witness pair on `target`, examining at most
/// `budget` candidates. Candidates are tried in a fixed order and the first
/// pair found is returned.
pub fn independence_search<T: Scalar>(
    family: &ModelFamily<T>,
    target: Target,
    budget: u64,
) -> Result<SearchOutcome<T>, PadoaError> {
    let base = &family.base;
    let cfg = &family.tables;
    let family_size = family.size(target);
    let mut proof = None;
    if target == Target::Primitive(PrimitiveId::Time) {
        let t = tables(base, cfg);
        let extracted: TimeGrid<T> = define_time(&t)?;
        if extracted.samples() != base.time().samples() {
            return Err(PadoaError::Inconsistent);
        }
        proof = Some(TIME_PROOF.to_string());
    }
    let mut base_report: Option<CheckReport> = None;
    let mut cache = BTreeMap::new();
    let mut rejections: BTreeMap<String, u64> = BTreeMap::new();
    let mut examples = Vec::new();
    let mut examined = 0u64;
    let mut reject = |cand: &str, r: Rejection, examples: &mut Vec<CandidateOutcome>| {
        *rejections.entry(r.key()).or_default() += 1;
        if examples.len() < 8 {
            examples.push(CandidateOutcome { candidate: cand.to_string(), rejection: r });
        }
    };
    for cand in candidates(family, target, budget) {
        examined += 1;
        let model = match cand.model {
            Ok(m) => m,
            Err(error) => {
                reject(&cand.label, Rejection::NotAModel { error }, &mut examples);
                continue;
            }
        };
        let others: Vec<PrimitiveId> =
            PrimitiveId::ALL.into_iter().filter(|p| Target::Primitive(*p) != target).collect();
        if let Some(p) = others.iter().find(|p| !same_cached(base, &mut cache, &model, **p, cfg, true)) {
            reject(&cand.label, Rejection::GraphDiffers { primitive: *p }, &mut examples);
            continue;
        }
        if let Target::Primitive(p) = target {
            if same_cached(base, &mut cache, &model, p, cfg, true) {
                reject(&cand.label, Rejection::TargetUnchanged, &mut examples);
                continue;
            }
            if p == PrimitiveId::Time {
                return Err(PadoaError::Inconsistent);
            }
        }
        let base_ok = base_report.get_or_insert_with(|| check_all(base, &family.checks));
        if !base_ok.passed() {
            let axioms = base_ok.failed();
            reject(&cand.label, Rejection::AxiomsFail { model: "base", axioms }, &mut examples);
            continue;
        }
        let r = check_all(&model, &family.checks);
        if !r.passed() {
            reject(&cand.label, Rejection::AxiomsFail { model: "candidate", axioms: r.failed() }, &mut examples);
            continue;
        }
        return Ok(SearchOutcome::Found(Box::new(WitnessPair {
            target,
            candidate: cand.label,
            first: base.clone(),
            second: model,
            control: cand.control,
            equal: others,
        })));
    }
    let exhaustive = examined >= family_size;
    let cert = Certificate { target, family_size, examined, exhaustive, proof, rejections, examples };
    if exhaustive || cert.proof.is_some() {
        Ok(SearchOutcome::NoneFound(cert))
    } else {
        Ok(SearchOutcome::Inconclusive(cert))
    }
}
