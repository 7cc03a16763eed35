//! Executable checks, one per axiom, plus the exterior identity and the
//! radiative/conductive split of the entropy flux.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::enumerate::{Coverage, EnumConfig};
use crate::structure::ThermoModel;
use crate::Scalar;

mod checks;

pub use checks::Checker;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AxiomId {
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
    T7,
    T8,
    T9,
    T10,
    T11,
    T12,
    T13,
    T14,
    T15,
    T16,
    T17,
    Thm1,
    Decomp,
}

impl AxiomId {
    pub const ALL: [AxiomId; 19] = [
        AxiomId::T1,
        AxiomId::T2,
        AxiomId::T3,
        AxiomId::T4,
        AxiomId::T5,
        AxiomId::T6,
        AxiomId::T7,
        AxiomId::T8,
        AxiomId::T9,
        AxiomId::T10,
        AxiomId::T11,
        AxiomId::T12,
        AxiomId::T13,
        AxiomId::T14,
        AxiomId::T15,
        AxiomId::T16,
        AxiomId::T17,
        AxiomId::Thm1,
        AxiomId::Decomp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AxiomId::T1 => "T1",
            AxiomId::T2 => "T2",
            AxiomId::T3 => "T3",
            AxiomId::T4 => "T4",
            AxiomId::T5 => "T5",
            AxiomId::T6 => "T6",
            AxiomId::T7 => "T7",
            AxiomId::T8 => "T8",
            AxiomId::T9 => "T9",
            AxiomId::T10 => "T10",
            AxiomId::T11 => "T11",
            AxiomId::T12 => "T12",
            AxiomId::T13 => "T13",
            AxiomId::T14 => "T14",
            AxiomId::T15 => "T15",
            AxiomId::T16 => "T16",
            AxiomId::T17 => "T17",
            AxiomId::Thm1 => "THM1",
            AxiomId::Decomp => "DECOMP",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            AxiomId::T1 => "space",
            AxiomId::T2 => "subbodies of a body",
            AxiomId::T3 => "time",
            AxiomId::T4 => "internal energy is a measure",
            AxiomId::T5 => "differentiability of energy",
            AxiomId::T6 => "volume and energy",
            AxiomId::T7 => "heat flux",
            AxiomId::T8 => "heat flux is separately additive",
            AxiomId::T9 => "surface and heat flux",
            AxiomId::T10 => "first law",
            AxiomId::T11 => "internal entropy is a measure",
            AxiomId::T12 => "differentiability of entropy",
            AxiomId::T13 => "volume and entropy",
            AxiomId::T14 => "entropy flux",
            AxiomId::T15 => "entropy flux is separately additive",
            AxiomId::T16 => "second law",
            AxiomId::T17 => "heat conduction inequalities",
            AxiomId::Thm1 => "exterior identity",
            AxiomId::Decomp => "radiative/conductive decomposition",
        }
    }
}

impl fmt::Display for AxiomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown axiom id {0:?}")]
pub struct UnknownAxiom(pub String);

impl FromStr for AxiomId {
    type Err = UnknownAxiom;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AxiomId::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownAxiom(s.to_string()))
    }
}

impl Serialize for AxiomId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    /// Nothing to check (e.g. no separate pairs).
    Vacuous,
    /// Not decidable at finite resolution; accepted as declared.
    SatisfiedByDeclaration,
    Fail,
}

impl Verdict {
    pub fn is_fail(self) -> bool {
        self == Verdict::Fail
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Vacuous => "vacuous",
            Verdict::SatisfiedByDeclaration => "satisfied-by-declaration",
            Verdict::Fail => "fail",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clause {
    pub name: String,
    pub verdict: Verdict,
}

/// A concrete violation: which part, source region and time, and the numbers
/// that disagree.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub part: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other_region: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    pub detail: String,
}

/// Smallest admissible value of an existentially quantified bound, per sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundWitness {
    pub name: String,
    pub values: Vec<f64>,
    /// Part attaining the maximum at each sample, if any.
    pub attained_at: Vec<Option<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub axiom: AxiomId,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub clauses: Vec<Clause>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub max_residual: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub bounds: Vec<BoundWitness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<Coverage>,
}

impl CheckResult {
    pub(crate) fn new(axiom: AxiomId) -> Self {
        CheckResult {
            axiom,
            verdict: Verdict::Pass,
            clauses: Vec::new(),
            witness: None,
            max_residual: 0.0,
            bounds: Vec::new(),
            coverage: None,
        }
    }

    pub fn clause(&self, name: &str) -> Option<Verdict> {
        self.clauses.iter().find(|c| c.name == name).map(|c| c.verdict)
    }

    pub fn bound(&self, name: &str) -> Option<&BoundWitness> {
        self.bounds.iter().find(|b| b.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub results: Vec<CheckResult>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| !r.verdict.is_fail())
    }

    pub fn failed(&self) -> Vec<AxiomId> {
        self.results.iter().filter(|r| r.verdict.is_fail()).map(|r| r.axiom).collect()
    }

    pub fn get(&self, id: AxiomId) -> Option<&CheckResult> {
        self.results.iter().find(|r| r.axiom == id)
    }

    pub fn verdict(&self, id: AxiomId) -> Option<Verdict> {
        self.get(id).map(|r| r.verdict)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerance {
    /// Cap on the first-law residual and on equality comparisons.
    pub eps_balance: f64,
    /// Allowed negative entropy production.
    pub eps_ineq: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { eps_balance: 1e-9, eps_ineq: 1e-12 }
    }
}

impl Tolerance {
    pub fn is_valid(&self) -> bool {
        self.eps_balance >= 0.0 && self.eps_ineq >= 0.0 && self.eps_balance.is_finite() && self.eps_ineq.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckConfig {
    pub tol: Tolerance,
    pub enumeration: EnumConfig,
    /// Largest number of separate source pairs tried per additivity check.
    pub pair_cap: usize,
    /// Largest number of source regions used by the decomposition check.
    pub decomp_sources: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { tol: Tolerance::default(), enumeration: EnumConfig::default(), pair_cap: 128, decomp_sources: 16 }
    }
}

impl CheckConfig {
    pub fn with_tolerance(tol: Tolerance) -> Self {
        CheckConfig { tol, ..Self::default() }
    }
}

pub fn check_axiom<T: Scalar>(model: &ThermoModel<T>, id: AxiomId, cfg: &CheckConfig) -> CheckResult {
    Checker::new(model, cfg).check(id)
}

/// Runs every check; results are sorted by axiom id.
pub fn check_all<T: Scalar>(model: &ThermoModel<T>, cfg: &CheckConfig) -> CheckReport {
    Checker::new(model, cfg).check_all()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in AxiomId::ALL {
            assert_eq!(id.name().parse::<AxiomId>().unwrap(), id);
        }
        assert_eq!("thm1".parse::<AxiomId>().unwrap(), AxiomId::Thm1);
        assert!("T18".parse::<AxiomId>().is_err());
    }

    #[test]
    fn ids_sort_in_declaration_order() {
        let mut v = AxiomId::ALL.to_vec();
        v.reverse();
        v.sort();
        assert_eq!(v, AxiomId::ALL.to_vec());
    }
}
