//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Runs without the libtest harness so the
//! lines always show up in `cargo test` output.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermo_axioms::format::{emit_model, parse_model};
use thermo_axioms::geometry::{check_exterior_identity, material_universe};
use thermo_axioms::padoa::{define_time, independence_search, tables, ModelFamily, PrimitiveId, SearchOutcome, TableConfig, Target};
use thermo_axioms::report::{self, ModelSummary};
use thermo_axioms::timeless::{check_all_nt, to_timeless};
use thermo_axioms::{
    check_all, generate_heat_grid, mutate, Atom, AxiomId, CheckConfig, Grid, HeatParams, Model, MutationTarget, Part,
    Region, Verdict,
};

/// First-law residual allowed on reference models.
const EPS_BALANCE: f64 = 1e-9;
/// Most negative entropy production allowed on reference models.
const EPS_INEQ: f64 = 1e-12;
/// Tolerance on the hand-derived entropy rate of the bar.
const EPS_WORKED: f64 = 1e-4;

const SOUNDNESS_BUDGET: Duration = Duration::from_secs(10);
const KILL_BUDGET: Duration = Duration::from_secs(5);
const DEFINABILITY_BUDGET: Duration = Duration::from_secs(10);

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn cfg() -> CheckConfig {
    CheckConfig::default()
}

fn reference_soundness() -> Outcome {
    let shapes = [[1, 1, 2], [2, 1, 1], [2, 2, 1], [2, 2, 2], [3, 2, 1], [3, 3, 1], [2, 2, 3], [3, 3, 3], [4, 4, 2], [4, 4, 4]];
    let start = Instant::now();
    let mut worst_residual = 0.0f64;
    let mut min_production = f64::INFINITY;
    for seed in 0..20u64 {
        let dims = shapes[seed as usize % shapes.len()];
        let steps = if seed % 2 == 1 { 32 } else { 8 + seed as usize };
        let p = HeatParams::<f64>::new(dims, 0.05, steps, seed);
        let m = generate_heat_grid(&p).unwrap();
        let rep = check_all(&m, &cfg());
        if !rep.passed() {
            return outcome(false, format!("seed {seed} on {dims:?} fails {:?}", rep.failed()));
        }
        if rep.get(AxiomId::T2).and_then(|r| r.clause("T2.5")) != Some(Verdict::SatisfiedByDeclaration) {
            return outcome(false, format!("seed {seed}: T2.5 is not satisfied by declaration"));
        }
        worst_residual = worst_residual.max(rep.get(AxiomId::T10).unwrap().max_residual);
        if let Some(b) = rep.get(AxiomId::T16).unwrap().bound("min_production") {
            min_production = b.values.iter().copied().fold(min_production, f64::min);
        }
    }
    let took = start.elapsed();
    let ok = worst_residual <= EPS_BALANCE && min_production >= -EPS_INEQ && took < SOUNDNESS_BUDGET;
    outcome(
        ok,
        format!(
            "20 models up to 4x4x4 with 32 samples, first-law residual {worst_residual:e}, min production {min_production:e}, {:.2} s",
            took.as_secs_f64()
        ),
    )
}

fn kill_matrix() -> Outcome {
    let start = Instant::now();
    let base = generate_heat_grid(&HeatParams::<f64>::mutation_scenario(1)).unwrap();
    if !check_all(&base, &cfg()).passed() {
        return outcome(false, "scenario model fails before mutation");
    }
    let mut off_diagonal = Vec::new();
    for target in MutationTarget::ALL {
        let failed = check_all(&mutate(&base, target).unwrap(), &cfg()).failed();
        if failed != vec![target.axiom()] {
            off_diagonal.push(format!("{target} fails {failed:?}"));
        }
    }
    let took = start.elapsed();
    outcome(
        off_diagonal.is_empty() && took < KILL_BUDGET,
        if off_diagonal.is_empty() {
            format!("10x19 matrix diagonal, {:.2} s", took.as_secs_f64())
        } else {
            off_diagonal.join("; ")
        },
    )
}

fn exterior_identity() -> Outcome {
    let g = Grid::<f64>::new([2, 2, 2], 1.0).unwrap();
    let region = |bits: u32| Region::from_cells(g.cells().filter(|c| bits >> c.index() & 1 == 1));
    let full = (1u32 << 8) - 1;
    let (mut pairs, mut failures) = (0, 0);
    for b in 0..=full {
        // walk every submask of b
        let mut a = b;
        loop {
            pairs += 1;
            // bitmask oracle: (b - a) ∪ (grid - b) must equal grid - a
            let oracle = ((b & !a) | (full & !b)) == (full & !a);
            let got = check_exterior_identity(&region(a), &region(b), &g).unwrap();
            if !got || !oracle {
                failures += 1;
            }
            if a == 0 {
                break;
            }
            a = (a - 1) & b;
        }
    }
    outcome(pairs == 6561 && failures == 0, format!("{pairs} pairs on 2x2x2, {failures} failures"))
}

/// Every part of the host when it is small, otherwise every combination of
/// the atoms carrying flux with a few fixed fillers of the remaining atoms.
fn decomposition_parts(host: &Part, active: &[Atom], rng: &mut ChaCha8Rng) -> Vec<Part> {
    let atoms: Vec<Atom> = host.atoms().collect();
    let subsets = |xs: &[Atom]| -> Vec<Part> {
        (0u32..1 << xs.len())
            .map(|m| Part::from_atoms(xs.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, a)| *a)))
            .collect()
    };
    if atoms.len() <= 16 {
        return subsets(&atoms);
    }
    let inactive: Vec<Atom> = atoms.iter().copied().filter(|a| !active.contains(a)).collect();
    let mut fillers = vec![Part::empty(), Part::from_atoms(inactive.iter().copied())];
    for _ in 0..8 {
        fillers.push(Part::from_atoms(inactive.iter().copied().filter(|_| rng.gen_bool(0.5))));
    }
    let mut out = Vec::new();
    for core in subsets(active) {
        for f in &fillers {
            out.push(core.union(f));
        }
    }
    out
}

fn decomposition_on(m: &Model) -> (usize, usize) {
    let g = m.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut checked, mut failures) = (0, 0);
    for d in material_universe(m.body(), g, 4096).unwrap() {
        let host = m.body().difference(&d).closure(g);
        for k in 0..m.time().len() {
            let active: Vec<Atom> = host
                .atoms()
                .filter(|a| m.entropy_flux(&Part::atom(*a), &d, k).map(|v| v != 0.0).unwrap_or(false))
                .collect();
            for p in decomposition_parts(&host, &active, &mut rng) {
                let (Ok(total), Ok(rad), Ok(cond)) =
                    (m.entropy_flux(&p, &d, k), m.radiative_flux(&p, &d, k), m.conductive_flux(&p, &d, k))
                else {
                    failures += 1;
                    continue;
                };
                checked += 1;
                if total != rad + cond {
                    failures += 1;
                }
            }
        }
    }
    (checked, failures)
}

fn decomposition() -> Outcome {
    let bar = generate_heat_grid(&HeatParams::<f64>::bar_example()).unwrap();
    let mut p = HeatParams::<f64>::new([2, 2, 1], 0.05, 4, 11);
    p.radiative = 0.5;
    p.radiators = vec![([0, 0, 0], [1, 1, 0])];
    let plate = generate_heat_grid(&p).unwrap();
    let (c1, f1) = decomposition_on(&bar);
    let (c2, f2) = decomposition_on(&plate);
    outcome(
        f1 == 0 && f2 == 0 && c1 > 0 && c2 > 0,
        format!("{c1} triples on 1x1x2 and {c2} on 2x2x1, {} inexact", f1 + f2),
    )
}

fn definability() -> Outcome {
    let start = Instant::now();
    let tc = TableConfig::default();
    let mut recovered = 0;
    for seed in 0..100u64 {
        let dims = [1 + (seed % 3) as usize, 1 + (seed / 3 % 2) as usize, 1 + (seed % 2) as usize];
        let p = HeatParams::<f64>::new(dims, 0.01 + 0.002 * (seed % 5) as f64, 2 + (seed % 5) as usize, seed);
        let m = generate_heat_grid(&p).unwrap();
        if define_time::<f64>(&tables(&m, &tc)).map(|t| t.samples() == m.time().samples()).unwrap_or(false) {
            recovered += 1;
        }
    }
    let family = ModelFamily::around(generate_heat_grid(&HeatParams::<f64>::bar_example()).unwrap());
    let time = Target::Primitive(PrimitiveId::Time);
    let size = family.size(time);
    let time_ok = matches!(
        independence_search(&family, time, size),
        Ok(SearchOutcome::NoneFound(ref c)) if c.exhaustive && c.examined == size
    );
    let control_ok = match independence_search(&family, Target::Control, 16) {
        Ok(SearchOutcome::Found(pair)) => pair.verify(&family.tables, &family.checks),
        _ => false,
    };
    let took = start.elapsed();
    outcome(
        recovered == 100 && time_ok && control_ok && took < DEFINABILITY_BUDGET,
        format!(
            "time recovered for {recovered}/100 models, TIME {} over {size} candidates, control pair {}, {:.2} s",
            if time_ok { "none-found exhaustively" } else { "NOT settled" },
            if control_ok { "found" } else { "missing" },
            took.as_secs_f64()
        ),
    )
}

fn timeless_equivalence() -> Outcome {
    let base = generate_heat_grid(&HeatParams::<f64>::mutation_scenario(1)).unwrap();
    let mut models = vec![base.clone()];
    models.extend(MutationTarget::ALL.iter().map(|t| mutate(&base, *t).unwrap()));
    let (mut compared, mut mismatched) = (0, 0);
    for m in &models {
        let timed = check_all(m, &cfg());
        let nt = check_all_nt(&to_timeless(m), &cfg());
        compared += nt.results.len();
        mismatched += nt.mismatches(&timed).len();
    }
    outcome(compared == 11 * 19 && mismatched == 0, format!("{compared} comparisons, {mismatched} mismatches"))
}

fn worked_example() -> Outcome {
    let m = generate_heat_grid(&HeatParams::<f64>::bar_example()).unwrap();
    let g = m.grid();
    let a = g.region_at(&[[0, 0, 0]]).unwrap();
    let pb = g.region_at(&[[0, 0, 1]]).unwrap().closure(g);
    let ddt_e = m.ddt_energy(&pb, 0).unwrap();
    let flux = m.heat_flux(&pb, &a, 0).unwrap();
    let sflux = m.entropy_flux(&pb, &a, 0).unwrap();
    let ddt_s = m.ddt_entropy(&pb, 0).unwrap();
    let production = ddt_s - sflux;
    let ok = (ddt_e - 1.0).abs() < 1e-12
        && (flux - 1.0).abs() < 1e-12
        && (sflux - 0.5).abs() < 1e-12
        && (ddt_s - 0.9531).abs() < EPS_WORKED
        && (production - 0.4531).abs() < EPS_WORKED
        && production >= 0.0;
    outcome(
        ok,
        format!("ddt_E {ddt_e}, heat flux {flux}, entropy flux {sflux}, ddt_S {ddt_s:.6}, production {production:.6}"),
    )
}

fn round_trip() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut files: Vec<PathBuf> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    let mut broken = Vec::new();
    for f in &files {
        let text = fs::read_to_string(f).unwrap();
        let same = parse_model::<f64>(&text).ok().and_then(|m| {
            let emitted = emit_model(&m);
            let back = parse_model::<f64>(&emitted).ok()?;
            Some(back == m && emit_model(&back) == emitted)
        });
        if same != Some(true) {
            broken.push(f.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    let m = mutate(&generate_heat_grid(&HeatParams::<f64>::mutation_scenario(3)).unwrap(), MutationTarget::T10).unwrap();
    let c = cfg();
    let s = ModelSummary::of(&m);
    let run = || {
        let mut out = report::json(&check_all(&m, &c), &s, &c.tol);
        out += &report::timeless_json(&check_all_nt(&to_timeless(&m), &c), &s, &c.tol);
        let family = ModelFamily::around(m.clone());
        let e = Target::Primitive(PrimitiveId::E);
        out += &report::padoa_json(&independence_search(&family, e, 32).unwrap().summary(e), &s);
        out
    };
    let identical = run() == run();
    outcome(
        broken.is_empty() && identical,
        format!(
            "{} fixtures round trip{}, reports {}",
            files.len() - broken.len(),
            if broken.is_empty() { String::new() } else { format!(" ({} broken: {})", broken.len(), broken.join(", ")) },
            if identical { "byte-identical" } else { "differ between runs" }
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("reference soundness", reference_soundness),
        ("mutation kill matrix", kill_matrix),
        ("exterior identity", exterior_identity),
        ("decomposition exactness", decomposition),
        ("definability of time", definability),
        ("timeless equivalence", timeless_equivalence),
        ("worked bar example", worked_example),
        ("round trip and determinism", round_trip),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += usize::from(!o.ok);
        println!("{} {}. {name}: {}", if o.ok { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
