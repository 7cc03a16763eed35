use thermo_axioms::padoa::{
    define_space, define_time, geo_cells, independence_search, tables, ModelFamily, PrimitiveId, SearchOutcome,
    TableConfig, Target,
};
use thermo_axioms::{generate_heat_grid, CheckConfig, HeatParams, Model};

fn bar() -> Model {
    generate_heat_grid(&HeatParams::<f64>::bar_example()).unwrap()
}

#[test]
fn define_time_recovers_generator_time() {
    let cfg = TableConfig::default();
    for seed in 0..100u64 {
        let dims = [1 + (seed % 2) as usize, 1 + (seed / 2 % 2) as usize, 2];
        let dt = 0.01 + 0.001 * (seed % 7) as f64;
        let steps = 2 + (seed % 4) as usize;
        let m = generate_heat_grid(&HeatParams::<f64>::new(dims, dt, steps, seed)).unwrap();
        let t = define_time::<f64>(&tables(&m, &cfg)).unwrap();
        assert_eq!(t.samples(), m.time().samples(), "seed {seed}");
    }
}

#[test]
fn time_is_not_independent_on_the_bar() {
    let family = ModelFamily::around(bar());
    let size = family.size(Target::Primitive(PrimitiveId::Time));
    match independence_search(&family, Target::Primitive(PrimitiveId::Time), size).unwrap() {
        SearchOutcome::NoneFound(c) => {
            assert!(c.exhaustive);
            assert_eq!(c.examined, size);
            assert!(c.proof.is_some());
        }
        other => panic!("expected none found, got {:?}", other.summary(Target::Primitive(PrimitiveId::Time))),
    }
}

#[test]
fn dummy_control_has_a_witness_pair() {
    let family = ModelFamily::around(bar());
    let SearchOutcome::Found(pair) = independence_search(&family, Target::Control, 16).unwrap() else {
        panic!("control should be independent");
    };
    let (a, b) = pair.control.unwrap();
    assert_ne!(a, b);
    assert_eq!(pair.equal.len(), PrimitiveId::ALL.len());
    assert!(pair.verify(&family.tables, &family.checks));
}

#[test]
fn energy_scaling_gives_a_witness_pair() {
    let family = ModelFamily::around(bar());
    let SearchOutcome::Found(pair) = independence_search(&family, Target::Primitive(PrimitiveId::E), 64).unwrap() else {
        panic!("E should be independent in the finite family");
    };
    assert!(!pair.equal.contains(&PrimitiveId::E));
    assert!(pair.verify(&TableConfig::default(), &CheckConfig::default()));
}

#[test]
fn space_moves_are_all_rejected() {
    let family = ModelFamily::around(bar());
    let target = Target::Primitive(PrimitiveId::Space);
    let size = family.size(target);
    let SearchOutcome::NoneFound(c) = independence_search(&family, target, size).unwrap() else {
        panic!("no space move should keep every other graph");
    };
    assert!(c.exhaustive);
    assert_eq!(c.rejections.values().sum::<u64>(), c.examined);
}

#[test]
fn small_budget_is_inconclusive() {
    let m = generate_heat_grid(&HeatParams::<f64>::new([2, 1, 1], 0.05, 3, 4)).unwrap();
    let family = ModelFamily::around(m);
    let out = independence_search(&family, Target::Primitive(PrimitiveId::H), 1).unwrap();
    assert!(matches!(out, SearchOutcome::Inconclusive(ref c) if c.examined == 1 && !c.exhaustive));
}

#[test]
fn defined_space_misses_cells_outside_the_body() {
    let mut p = HeatParams::<f64>::new([3, 1, 1], 0.05, 3, 9);
    p.body = Some(vec![[0, 0, 0], [1, 0, 0]]);
    let m = generate_heat_grid(&p).unwrap();
    let t = tables(&m, &TableConfig::default());
    let defined = define_space(&t);
    assert!(defined.warning.is_none());
    assert_eq!(defined.cells, geo_cells(m.grid(), m.body()));
    // the grid has a third cell no function ever mentions
    assert_eq!(t.space.iter().filter(|a| a.kind == 0).count(), 3);
    assert_eq!(defined.cells.len(), 2);
}
