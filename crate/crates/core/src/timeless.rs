//! The structure with time removed as a primitive.
//!
//! A [`TimelessModel`] keeps space, the body, and the four functions, but each
//! function is stored as its graph over an unlabeled last component. Nothing in
//! the type names that component; it is recovered by projecting the graphs
//! ([`TimelessModel::last_component`]), and every check runs on what the
//! projection reconstructs, except the component and derivative axioms, which
//! are evaluated directly on the graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::axioms::{check_axiom, AxiomId, CheckConfig, CheckReport, CheckResult, Verdict, Witness};
use crate::geometry::{Grid, Part, Region};
use crate::measure::GridMeasure;
use crate::structure::{FluxFamily, FluxField, StructureError, ThermoModel, TimeGrid};
use crate::Scalar;

/// Values taken by the last argument of the functions, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Component<T> {
    points: Vec<T>,
}

impl<T: Scalar> Component<T> {
    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Difference quotient along the component at its `i`-th point: forward,
    /// or backward at the last point. `None` with fewer than two points.
    pub fn derivative<F: Fn(usize) -> T>(&self, i: usize, value: F) -> Option<T> {
        let n = self.points.len();
        if n < 2 || i >= n {
            return None;
        }
        let (a, b) = if i + 1 < n { (i, i + 1) } else { (i - 1, i) };
        Some((value(b) - value(a)) / (self.points[b] - self.points[a]))
    }
}

/// One value of a flux function's last argument: the flux as a function of
/// (part, source).
#[derive(Debug, Clone, PartialEq)]
pub struct FluxSlice<T> {
    pub kernel: Option<FluxField<T>>,
    pub tables: BTreeMap<Region, GridMeasure<T>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimelessError {
    #[error("{function} is defined at no point of its last component")]
    Empty { function: &'static str },
    #[error("{function} takes two values at the same point of its last component")]
    NotAFunction { function: &'static str },
    #[error("{function} disagrees with the energy on the last component")]
    Disagree { function: &'static str },
    #[error("flux slices mix kernel and table-only representations")]
    MixedKernel,
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// The 5-tuple (space, energy, heat flux, entropy, entropy flux), with the
/// body carried alongside space.
#[derive(Debug, Clone, PartialEq)]
pub struct TimelessModel<T> {
    space: Grid<T>,
    body: Region,
    energy: Vec<(T, GridMeasure<T>)>,
    heat_flux: Vec<(T, FluxSlice<T>)>,
    entropy: Vec<(T, GridMeasure<T>)>,
    entropy_flux: Vec<(T, FluxSlice<T>)>,
}

fn slices<T: Scalar>(points: &[T], fam: &FluxFamily<T>) -> Vec<(T, FluxSlice<T>)> {
    points
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let kernel = fam.kernel().map(|kern| kern[k].clone());
            (*t, FluxSlice { kernel, tables: fam.tables()[k].clone() })
        })
        .collect()
}

pub fn to_timeless<T: Scalar>(model: &ThermoModel<T>) -> TimelessModel<T> {
    let points = model.time().samples();
    let graph = |series: &[GridMeasure<T>]| points.iter().copied().zip(series.iter().cloned()).collect();
    TimelessModel {
        space: model.grid().clone(),
        body: model.body().clone(),
        energy: graph(model.energy_series()),
        heat_flux: slices(points, model.heat_flux_family()),
        entropy: graph(model.entropy_series()),
        entropy_flux: slices(points, model.entropy_flux_family()),
    }
}

fn projection<T: Scalar, V>(function: &'static str, graph: &[(T, V)]) -> Result<Vec<T>, TimelessError> {
    if graph.is_empty() {
        return Err(TimelessError::Empty { function });
    }
    let mut points: Vec<T> = graph.iter().map(|(t, _)| *t).collect();
    points.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    if points.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(TimelessError::NotAFunction { function });
    }
    Ok(points)
}

/// Graph entries ordered along the last component.
fn sorted<T: Scalar, V: Clone>(graph: &[(T, V)]) -> Vec<V> {
    let mut g: Vec<&(T, V)> = graph.iter().collect();
    g.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    g.into_iter().map(|(_, v)| v.clone()).collect()
}

impl<T: Scalar> TimelessModel<T> {
    /// Builds the view from raw graphs. Consistency of the last components is
    /// checked only when projecting.
    pub fn from_graphs(
        space: Grid<T>,
        body: Region,
        energy: Vec<(T, GridMeasure<T>)>,
        heat_flux: Vec<(T, FluxSlice<T>)>,
        entropy: Vec<(T, GridMeasure<T>)>,
        entropy_flux: Vec<(T, FluxSlice<T>)>,
    ) -> Self {
        TimelessModel { space, body, energy, heat_flux, entropy, entropy_flux }
    }

    pub fn space(&self) -> &Grid<T> {
        &self.space
    }

    pub fn body(&self) -> &Region {
        &self.body
    }

    pub fn energy_graph(&self) -> &[(T, GridMeasure<T>)] {
        &self.energy
    }

    pub fn heat_flux_graph(&self) -> &[(T, FluxSlice<T>)] {
        &self.heat_flux
    }

    pub fn entropy_graph(&self) -> &[(T, GridMeasure<T>)] {
        &self.entropy
    }

    pub fn entropy_flux_graph(&self) -> &[(T, FluxSlice<T>)] {
        &self.entropy_flux
    }

    /// Projection of the energy graph onto its last component, checked
    /// against the projections of the other three functions.
    pub fn last_component(&self) -> Result<Component<T>, TimelessError> {
        let points = projection("energy", &self.energy)?;
        let others = [
            ("heat flux", projection("heat flux", &self.heat_flux)?),
            ("entropy", projection("entropy", &self.entropy)?),
            ("entropy flux", projection("entropy flux", &self.entropy_flux)?),
        ];
        for (function, p) in others {
            if p != points {
                return Err(TimelessError::Disagree { function });
            }
        }
        Ok(Component { points })
    }

    /// Rebuilds the model with the projected last component as its time.
    pub fn project(&self) -> Result<ThermoModel<T>, TimelessError> {
        let points = self.last_component()?.points;
        let family = |graph: &[(T, FluxSlice<T>)]| -> Result<FluxFamily<T>, TimelessError> {
            let slices = sorted(graph);
            let with_kernel = slices.iter().filter(|s| s.kernel.is_some()).count();
            if with_kernel != 0 && with_kernel != slices.len() {
                return Err(TimelessError::MixedKernel);
            }
            let tables = slices.iter().map(|s| s.tables.clone()).collect();
            let mut fam = FluxFamily::from_tables(tables);
            if with_kernel > 0 {
                fam.kernel = Some(slices.into_iter().map(|s| s.kernel.expect("counted")).collect());
            }
            Ok(fam)
        };
        Ok(ThermoModel::new(
            self.space.clone(),
            self.body.clone(),
            TimeGrid::new(points)?,
            sorted(&self.energy),
            sorted(&self.entropy),
            family(&self.heat_flux)?,
            family(&self.entropy_flux)?,
        )?)
    }
}

/// Axioms of the timeless system. `NT3` and `NT4` carry several clauses of
/// the timed system each and are split accordingly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NtId {
    NT1,
    NT2,
    /// Energy is a measure in its first component.
    NT3,
    /// The functions share a last component with at least two points.
    NT3Components,
    NT4Energy,
    NT4Entropy,
    NT5,
    NT6,
    NT7,
    NT8,
    NT9,
    NT10,
    NT11,
    NT12,
    NT13,
    NT14,
    NT15,
    Thm1,
    Decomp,
}

impl NtId {
    pub const ALL: [NtId; 19] = [
        NtId::NT1,
        NtId::NT2,
        NtId::NT3,
        NtId::NT3Components,
        NtId::NT4Energy,
        NtId::NT4Entropy,
        NtId::NT5,
        NtId::NT6,
        NtId::NT7,
        NtId::NT8,
        NtId::NT9,
        NtId::NT10,
        NtId::NT11,
        NtId::NT12,
        NtId::NT13,
        NtId::NT14,
        NtId::NT15,
        NtId::Thm1,
        NtId::Decomp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NtId::NT1 => "NT1",
            NtId::NT2 => "NT2",
            NtId::NT3 => "NT3",
            NtId::NT3Components => "NT3.components",
            NtId::NT4Energy => "NT4.E",
            NtId::NT4Entropy => "NT4.S",
            NtId::NT5 => "NT5",
            NtId::NT6 => "NT6",
            NtId::NT7 => "NT7",
            NtId::NT8 => "NT8",
            NtId::NT9 => "NT9",
            NtId::NT10 => "NT10",
            NtId::NT11 => "NT11",
            NtId::NT12 => "NT12",
            NtId::NT13 => "NT13",
            NtId::NT14 => "NT14",
            NtId::NT15 => "NT15",
            NtId::Thm1 => "THM1",
            NtId::Decomp => "DECOMP",
        }
    }

    /// The axiom of the timed system with the same content.
    pub fn counterpart(self) -> AxiomId {
        match self {
            NtId::NT1 => AxiomId::T1,
            NtId::NT2 => AxiomId::T2,
            NtId::NT3 => AxiomId::T4,
            NtId::NT3Components => AxiomId::T3,
            NtId::NT4Energy => AxiomId::T5,
            NtId::NT4Entropy => AxiomId::T12,
            NtId::NT5 => AxiomId::T6,
            NtId::NT6 => AxiomId::T7,
            NtId::NT7 => AxiomId::T8,
            NtId::NT8 => AxiomId::T9,
            NtId::NT9 => AxiomId::T10,
            NtId::NT10 => AxiomId::T11,
            NtId::NT11 => AxiomId::T13,
            NtId::NT12 => AxiomId::T14,
            NtId::NT13 => AxiomId::T15,
            NtId::NT14 => AxiomId::T16,
            NtId::NT15 => AxiomId::T17,
            NtId::Thm1 => AxiomId::Thm1,
            NtId::Decomp => AxiomId::Decomp,
        }
    }

    pub fn for_axiom(id: AxiomId) -> NtId {
        NtId::ALL.into_iter().find(|n| n.counterpart() == id).expect("mapping is a bijection")
    }
}

impl fmt::Display for NtId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NtId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NtId::ALL.into_iter().find(|n| n.name().eq_ignore_ascii_case(s)).ok_or_else(|| format!("unknown id {s:?}"))
    }
}

impl Serialize for NtId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimelessResult {
    pub id: NtId,
    /// Carries the counterpart axiom id in `axiom`.
    pub result: CheckResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimelessReport {
    pub results: Vec<TimelessResult>,
}

impl TimelessReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| !r.result.verdict.is_fail())
    }

    pub fn verdict(&self, id: NtId) -> Option<Verdict> {
        self.results.iter().find(|r| r.id == id).map(|r| r.result.verdict)
    }

    /// Ids whose verdict differs from the counterpart's verdict in `report`.
    pub fn mismatches(&self, report: &CheckReport) -> Vec<NtId> {
        self.results
            .iter()
            .filter(|r| report.verdict(r.id.counterpart()) != Some(r.result.verdict))
            .map(|r| r.id)
            .collect()
    }
}

fn failed(axiom: AxiomId, detail: String) -> CheckResult {
    let mut r = CheckResult::new(axiom);
    r.verdict = Verdict::Fail;
    r.witness = Some(Witness { detail, ..Default::default() });
    r
}

fn components(tm: &TimelessModel<impl Scalar>) -> CheckResult {
    match tm.last_component() {
        Ok(c) if c.len() >= 2 => CheckResult::new(AxiomId::T3),
        Ok(_) => failed(AxiomId::T3, "the last component needs at least two points".into()),
        Err(e) => failed(AxiomId::T3, e.to_string()),
    }
}

fn differentiable<T: Scalar>(tm: &TimelessModel<T>, graph: &[(T, GridMeasure<T>)], axiom: AxiomId) -> CheckResult {
    let c = match tm.last_component() {
        Ok(c) => c,
        Err(e) => return failed(axiom, e.to_string()),
    };
    if c.len() < 2 {
        return failed(axiom, "derivative needs at least two points in the last component".into());
    }
    let series = sorted(graph);
    let mut parts: BTreeSet<Part> = tm.body.closure(&tm.space).atoms().map(Part::atom).collect();
    for mu in &series {
        parts.extend(mu.entries().keys().cloned());
    }
    for i in 0..c.len() {
        for p in &parts {
            match c.derivative(i, |j| series[j].eval(p)) {
                Some(v) if v.is_finite() => {}
                _ => {
                    let mut r = failed(axiom, "derivative is not finite".into());
                    if let Some(w) = r.witness.as_mut() {
                        w.part = Some(tm.space.render_part(p));
                        w.time_index = Some(i);
                    }
                    return r;
                }
            }
        }
    }
    CheckResult::new(axiom)
}

/// Runs the timeless suite. Results are in [`NtId::ALL`] order.
pub fn check_all_nt<T: Scalar>(tm: &TimelessModel<T>, cfg: &CheckConfig) -> TimelessReport {
    let projected = tm.project();
    let results = NtId::ALL
        .into_iter()
        .map(|id| {
            let result = match id {
                NtId::NT3Components => components(tm),
                NtId::NT4Energy => differentiable(tm, &tm.energy, AxiomId::T5),
                NtId::NT4Entropy => differentiable(tm, &tm.entropy, AxiomId::T12),
                _ => match &projected {
                    Ok(m) => check_axiom(m, id.counterpart(), cfg),
                    Err(e) => failed(id.counterpart(), format!("cannot project the last component: {e}")),
                },
            };
            TimelessResult { id, result }
        })
        .collect();
    TimelessReport { results }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refmodels::{generate_heat_grid, HeatParams};

    #[test]
    fn projection_rebuilds_the_model() {
        let m = generate_heat_grid(&HeatParams::<f64>::mutation_scenario(3)).unwrap();
        let tm = to_timeless(&m);
        assert_eq!(tm.last_component().unwrap().points(), m.time().samples());
        assert_eq!(tm.project().unwrap(), m);
    }

    #[test]
    fn graph_order_does_not_matter() {
        let m = generate_heat_grid(&HeatParams::<f64>::mutation_scenario(3)).unwrap();
        let tm = to_timeless(&m);
        let mut rev = tm.clone();
        rev.energy.reverse();
        rev.entropy_flux.reverse();
        assert_eq!(rev.project().unwrap(), m);
    }

    #[test]
    fn disagreeing_components_are_detected() {
        let m = generate_heat_grid(&HeatParams::<f64>::mutation_scenario(3)).unwrap();
        let mut tm = to_timeless(&m);
        tm.entropy[0].0 = -1.0;
        assert_eq!(tm.last_component(), Err(TimelessError::Disagree { function: "entropy" }));
        let r = check_all_nt(&tm, &CheckConfig::default());
        assert_eq!(r.verdict(NtId::NT3Components), Some(Verdict::Fail));
        assert_eq!(r.verdict(NtId::NT9), Some(Verdict::Fail));
    }

    #[test]
    fn repeated_point_is_not_a_function() {
        let m = generate_heat_grid(&HeatParams::<f64>::mutation_scenario(3)).unwrap();
        let mut tm = to_timeless(&m);
        let t0 = tm.energy[0].0;
        tm.energy[1].0 = t0;
        assert_eq!(tm.last_component(), Err(TimelessError::NotAFunction { function: "energy" }));
    }

    #[test]
    fn ids_map_one_to_one() {
        let mapped: BTreeSet<AxiomId> = NtId::ALL.iter().map(|n| n.counterpart()).collect();
        assert_eq!(mapped.len(), AxiomId::ALL.len());
        for id in AxiomId::ALL {
            assert_eq!(NtId::for_axiom(id).counterpart(), id);
        }
        assert_eq!("nt4.e".parse::<NtId>().unwrap(), NtId::NT4Energy);
    }
}
