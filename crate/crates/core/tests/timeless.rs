use thermo_axioms::timeless::{check_all_nt, to_timeless, NtId};
use thermo_axioms::{check_all, generate_heat_grid, mutate, AxiomId, CheckConfig, HeatParams, MutationTarget};

#[test]
fn verdicts_agree_with_the_timed_suite() {
    let cfg = CheckConfig::default();
    let base = generate_heat_grid(&HeatParams::<f64>::mutation_scenario(1)).unwrap();
    let mut models = vec![base.clone()];
    models.extend(MutationTarget::ALL.iter().map(|t| mutate(&base, *t).unwrap()));
    for m in &models {
        let timed = check_all(m, &cfg);
        let nt = check_all_nt(&to_timeless(m), &cfg);
        assert_eq!(nt.results.len(), timed.results.len());
        assert!(nt.mismatches(&timed).is_empty(), "{:?}", nt.mismatches(&timed));
        assert_eq!(nt.passed(), timed.passed());
    }
}

#[test]
fn projection_restores_the_model() {
    let m = generate_heat_grid(&HeatParams::<f64>::new([2, 1, 2], 0.02, 5, 3)).unwrap();
    let tm = to_timeless(&m);
    assert_eq!(tm.last_component().unwrap().points(), m.time().samples());
    assert_eq!(tm.project().unwrap(), m);
}

#[test]
fn id_mapping_is_one_to_one() {
    let mut seen: Vec<AxiomId> = NtId::ALL.iter().map(|n| n.counterpart()).collect();
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), NtId::ALL.len());
    for n in NtId::ALL {
        assert_eq!(NtId::for_axiom(n.counterpart()), n);
        assert_eq!(n.name().parse::<NtId>().unwrap(), n);
    }
}
