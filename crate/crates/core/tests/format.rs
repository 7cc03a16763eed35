use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;
use thermo_axioms::format::{emit_generator, emit_model, parse_document, parse_model};
use thermo_axioms::refmodels::InitialField;
use thermo_axioms::{check_all, generate_heat_grid, CheckConfig, HeatParams, Model};

fn fixtures() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn every_fixture_round_trips() {
    let files = fixtures();
    assert!(files.len() >= 4);
    for path in files {
        let text = fs::read_to_string(&path).unwrap();
        let m: Model = parse_model(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let emitted = emit_model(&m);
        let again: Model = parse_model(&emitted).unwrap();
        assert_eq!(again, m, "{}", path.display());
        assert_eq!(emit_model(&again), emitted, "{}", path.display());
    }
}

#[test]
fn kernel_and_table_fixtures_describe_the_same_bar() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let kernel: Model = parse_model(&fs::read_to_string(dir.join("bar.tm")).unwrap()).unwrap();
    let table: Model = parse_model(&fs::read_to_string(dir.join("bar_tables.tm")).unwrap()).unwrap();
    let g = kernel.grid();
    let a = g.region_at(&[[0, 0, 0]]).unwrap();
    let b = g.region_at(&[[0, 0, 1]]).unwrap();
    for k in 0..2 {
        for (src, part) in [(&a, b.closure(g)), (&b, a.closure(g))] {
            let x = kernel.heat_flux(&part, src, k).unwrap();
            let y = table.heat_flux(&part, src, k).unwrap();
            assert!((x - y).abs() < 1e-12, "{x} {y}");
            let x = kernel.entropy_flux(&part, src, k).unwrap();
            let y = table.entropy_flux(&part, src, k).unwrap();
            assert!((x - y).abs() < 1e-12, "{x} {y}");
        }
    }
    let cfg = CheckConfig::default();
    assert!(check_all(&kernel, &cfg).passed());
    assert!(check_all(&table, &cfg).passed());
}

#[test]
fn generator_block_round_trips() {
    let mut p = HeatParams::<f64>::mutation_scenario(17);
    p.initial = InitialField::Uniform(1.25);
    let doc = parse_document::<f64>(&emit_generator(&p)).unwrap();
    assert_eq!(doc.generator.as_ref(), Some(&p));
    assert_eq!(doc.model, generate_heat_grid(&p).unwrap());
}

#[test]
fn diagnostics_point_at_the_offending_token() {
    let text = "thermo-model 1\ngrid 1 1 1 1\ntime 0 0.5 0.5\nbody all\n";
    let err = parse_model::<f64>(text).unwrap_err();
    let d = &err.diagnostics[0];
    assert_eq!((d.line, d.col), (3, 12));
    assert!(d.message.starts_with("time"), "{}", d.message);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Floats must survive the text form bit for bit.
    #[test]
    fn emitted_floats_are_exact(
        values in proptest::collection::vec(1e-3f64..1e6, 4),
        spacing in 0.01f64..10.0,
        seed in any::<u64>(),
    ) {
        let mut p = HeatParams::<f64>::new([2, 2, 1], 0.0, 3, seed);
        p.spacing = spacing;
        p.dt = p.stability_limit() * 0.5;
        p.initial = InitialField::Values(values);
        let m = generate_heat_grid(&p).unwrap();
        let text = emit_model(&m);
        let back: Model = parse_model(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(emit_model(&back), text);
    }
}
