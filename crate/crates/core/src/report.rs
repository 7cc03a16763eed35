//! Text and JSON renderings of check reports.
//!
//! JSON output is byte-stable: field order follows the struct declarations,
//! results are sorted by axiom id, maps are ordered, and floats use the
//! shortest round-trip representation.

use std::fmt::Write as _;

use serde::Serialize;

use crate::axioms::{CheckReport, CheckResult, Tolerance, Verdict};
use crate::padoa::OutcomeSummary;
use crate::structure::ThermoModel;
use crate::timeless::{TimelessReport, TimelessResult};
use crate::Scalar;

pub const SCHEMA: &str = "thermo-axioms/report/v1";
pub const TIMELESS_SCHEMA: &str = "thermo-axioms/timeless-report/v1";
pub const PADOA_SCHEMA: &str = "thermo-axioms/padoa/v1";

/// Facts about the model that a report is about.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub body_cells: usize,
    pub time_samples: usize,
}

impl ModelSummary {
    pub fn of<T: Scalar>(model: &ThermoModel<T>) -> Self {
        ModelSummary {
            dims: model.grid().dims(),
            spacing: model.grid().spacing().as_f64(),
            body_cells: model.body().len(),
            time_samples: model.time().len(),
        }
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema: &'static str,
    model: &'a ModelSummary,
    tolerance: &'a Tolerance,
    passed: bool,
    failed: Vec<String>,
    results: &'a [CheckResult],
}

pub fn json(report: &CheckReport, model: &ModelSummary, tol: &Tolerance) -> String {
    let doc = JsonReport {
        schema: SCHEMA,
        model,
        tolerance: tol,
        passed: report.passed(),
        failed: report.failed().iter().map(|a| a.name().to_string()).collect(),
        results: &report.results,
    };
    serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
}

#[derive(Serialize)]
struct JsonTimeless<'a> {
    schema: &'static str,
    model: &'a ModelSummary,
    tolerance: &'a Tolerance,
    passed: bool,
    failed: Vec<String>,
    results: &'a [TimelessResult],
}

pub fn timeless_json(report: &TimelessReport, model: &ModelSummary, tol: &Tolerance) -> String {
    let doc = JsonTimeless {
        schema: TIMELESS_SCHEMA,
        model,
        tolerance: tol,
        passed: report.passed(),
        failed: report.results.iter().filter(|r| r.result.verdict.is_fail()).map(|r| r.id.name().to_string()).collect(),
        results: &report.results,
    };
    serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
}

#[derive(Serialize)]
struct JsonPadoa<'a> {
    schema: &'static str,
    model: &'a ModelSummary,
    #[serde(flatten)]
    outcome: &'a OutcomeSummary,
}

pub fn padoa_json(outcome: &OutcomeSummary, model: &ModelSummary) -> String {
    let doc = JsonPadoa { schema: PADOA_SCHEMA, model, outcome };
    serde_json::to_string_pretty(&doc).expect("outcome serializes") + "\n"
}

fn header(out: &mut String, model: &ModelSummary, tol: &Tolerance) {
    let [x, y, z] = model.dims;
    let _ = writeln!(
        out,
        "model: {x}x{y}x{z} grid, spacing {}, {} body cells, {} time samples",
        model.spacing, model.body_cells, model.time_samples
    );
    let _ = writeln!(out, "tolerance: balance {:e}, inequality {:e}", tol.eps_balance, tol.eps_ineq);
}

fn result_lines(out: &mut String, id: &str, r: &CheckResult) {
    let verdict = if r.verdict == Verdict::Fail { "FAIL".to_string() } else { r.verdict.label().to_string() };
    let _ = write!(out, "{id:<15} {verdict:<25} {}", r.axiom.title());
    if r.max_residual != 0.0 {
        let _ = write!(out, "  (max residual {})", r.max_residual);
    }
    let _ = writeln!(out);
    for c in &r.clauses {
        if c.verdict != Verdict::Pass {
            let _ = writeln!(out, "    clause {}: {}", c.name, c.verdict.label());
        }
    }
    if let Some(cov) = &r.coverage {
        if !cov.exhaustive {
            let _ = writeln!(out, "    coverage: {} of {} candidates sampled", cov.enumerated, cov.total);
        }
    }
    for b in &r.bounds {
        let lo = b.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = b.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !b.values.is_empty() {
            let _ = writeln!(out, "    bound {}: from {lo} to {hi} across {} samples", b.name, b.values.len());
        }
    }
    if let Some(w) = &r.witness {
        let mut parts = Vec::new();
        if let Some(p) = &w.part {
            parts.push(format!("part {p}"));
        }
        if let Some(d) = &w.region {
            parts.push(format!("source {d}"));
        }
        if let Some(d) = &w.other_region {
            parts.push(format!("other source {d}"));
        }
        if let Some(k) = w.time_index {
            parts.push(format!("time index {k}"));
        }
        if let Some(v) = w.observed {
            parts.push(format!("observed {v}"));
        }
        if let Some(v) = w.expected {
            parts.push(format!("expected {v}"));
        }
        let _ = writeln!(out, "    witness: {}", w.detail);
        if !parts.is_empty() {
            let _ = writeln!(out, "      {}", parts.join(", "));
        }
    }
}

fn footer(out: &mut String, total: usize, failed: &[String]) {
    if failed.is_empty() {
        let _ = writeln!(out, "result: all {total} checks pass");
    } else {
        let _ = writeln!(out, "result: {} of {total} checks failed: {}", failed.len(), failed.join(", "));
    }
}

pub fn text(report: &CheckReport, model: &ModelSummary, tol: &Tolerance) -> String {
    let mut out = String::new();
    header(&mut out, model, tol);
    for r in &report.results {
        result_lines(&mut out, r.axiom.name(), r);
    }
    let failed: Vec<String> = report.failed().iter().map(|a| a.name().to_string()).collect();
    footer(&mut out, report.results.len(), &failed);
    out
}

pub fn timeless_text(report: &TimelessReport, model: &ModelSummary, tol: &Tolerance) -> String {
    let mut out = String::new();
    header(&mut out, model, tol);
    for r in &report.results {
        let id = format!("{} ({})", r.id.name(), r.id.counterpart().name());
        result_lines(&mut out, &id, &r.result);
    }
    let failed: Vec<String> =
        report.results.iter().filter(|r| r.result.verdict.is_fail()).map(|r| r.id.name().to_string()).collect();
    footer(&mut out, report.results.len(), &failed);
    out
}

pub fn padoa_text(outcome: &OutcomeSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "target: {}", outcome.target);
    let _ = writeln!(out, "outcome: {}", outcome.outcome.replace('_', "-"));
    if let Some(w) = &outcome.witness {
        let _ = writeln!(out, "witness pair: base model and \"{}\"", w.candidate);
        let eq: Vec<&str> = w.equal_primitives.iter().map(|p| p.name()).collect();
        let _ = writeln!(out, "equal interpretations: {}", eq.join(", "));
        if let Some([a, b]) = w.control {
            let _ = writeln!(out, "control values: {a} and {b}");
        }
    }
    if let Some(c) = &outcome.certificate {
        let _ = writeln!(
            out,
            "examined {} of {} candidates{}",
            c.examined,
            c.family_size,
            if c.exhaustive { " (exhaustive)" } else { "" }
        );
        for (reason, n) in &c.rejections {
            let _ = writeln!(out, "  rejected {n}: {reason}");
        }
        if let Some(p) = &c.proof {
            let _ = writeln!(out, "proof: {p}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axioms::{check_all, CheckConfig};
    use crate::refmodels::{generate_heat_grid, mutate, HeatParams, MutationTarget};

    #[test]
    fn json_is_stable_and_tagged() {
        let m = generate_heat_grid(&HeatParams::<f64>::mutation_scenario(1)).unwrap();
        let cfg = CheckConfig::default();
        let s = ModelSummary::of(&m);
        let a = json(&check_all(&m, &cfg), &s, &cfg.tol);
        let b = json(&check_all(&m, &cfg), &s, &cfg.tol);
        assert_eq!(a, b);
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["schema"], SCHEMA);
        assert_eq!(v["passed"], true);
        assert_eq!(v["results"].as_array().unwrap().len(), 19);
        assert_eq!(v["results"][1]["clauses"][4]["verdict"], "satisfied_by_declaration");
    }

    #[test]
    fn text_names_the_failing_axiom() {
        let m = generate_heat_grid(&HeatParams::<f64>::mutation_scenario(1)).unwrap();
        let m = mutate(&m, MutationTarget::T10).unwrap();
        let cfg = CheckConfig::default();
        let t = text(&check_all(&m, &cfg), &ModelSummary::of(&m), &cfg.tol);
        assert!(t.contains("T10             FAIL"), "{t}");
        assert!(t.ends_with("result: 1 of 19 checks failed: T10\n"), "{t}");
    }
}
