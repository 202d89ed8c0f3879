use std::sync::Arc;

use bellspace_core::feasibility::fine_feasible;
use bellspace_core::inequality::{
    chsh_01, chsh_pm1_table, core_inequality, frequency_inequality, inequality1, inequality2, inequality3,
    pm1_from_01, CounterfactualRow,
};
use bellspace_core::models::{table_of, table_from_assignments, DeterministicMixture, HypothesisFlags, LhvModel, SettingDistribution};
use bellspace_core::prob::{Event, Measure, RandomVariable, SampleSpace};
use bellspace_core::rational::{int, ratio, Rational};
use bellspace_core::spaces::{BellMeasure, BellSpace, LambdaSupport, Settings, SpaceId};
use proptest::prelude::*;

fn normalized(raw: &[u32]) -> Vec<Rational> {
    let total: u32 = raw.iter().sum();
    if total == 0 {
        let mut w = vec![int(0); raw.len()];
        w[0] = int(1);
        return w;
    }
    raw.iter().map(|&x| ratio(x as i64, total as i64)).collect()
}

fn unit() -> impl Strategy<Value = Rational> {
    (0i64..=60).prop_map(|n| ratio(n, 60))
}

fn small_space() -> Arc<SampleSpace> {
    Arc::new(SampleSpace::new([("x", vec!["0", "1", "2"]), ("y", vec!["0", "1"]), ("z", vec!["0", "1"])]).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kolmogorov_axioms(raw in prop::collection::vec(0u32..10, 12), a in prop::collection::vec(any::<bool>(), 12), b in prop::collection::vec(any::<bool>(), 12)) {
        let space = small_space();
        let m = Measure::from_outcome_weights(space.clone(), normalized(&raw)).unwrap();
        let ea = Event::from_indices(12, (0..12).filter(|&k| a[k]).collect::<Vec<_>>());
        let eb = Event::from_indices(12, (0..12).filter(|&k| b[k]).collect::<Vec<_>>());
        prop_assert_eq!(m.probability(&Event::full(12)).unwrap(), int(1));
        prop_assert_eq!(m.probability(&Event::empty(12)).unwrap(), int(0));
        let pa = m.probability(&ea).unwrap();
        prop_assert!(pa >= int(0) && pa <= int(1));
        prop_assert_eq!(&pa + m.probability(&ea.complement()).unwrap(), int(1));
        // Inclusion-exclusion.
        let lhs = m.probability(&ea.union(&eb)).unwrap() + m.probability(&ea.intersection(&eb)).unwrap();
        prop_assert_eq!(lhs, pa.clone() + m.probability(&eb).unwrap());
        let pb = m.probability(&eb).unwrap();
        if pb > int(0) {
            let c = m.conditional(&ea, &eb).unwrap();
            prop_assert!(c >= int(0) && c <= int(1));
            prop_assert_eq!(c * pb, m.probability(&ea.intersection(&eb)).unwrap());
        } else {
            prop_assert!(m.conditional(&ea, &eb).is_err());
        }
    }

    #[test]
    fn marginals_and_expectations(raw in prop::collection::vec(0u32..10, 12)) {
        let space = small_space();
        let m = Measure::from_outcome_weights(space.clone(), normalized(&raw)).unwrap();
        let mx = m.marginal(&["x"]).unwrap();
        for (k, label) in ["0", "1", "2"].iter().enumerate() {
            let e = space.event_where(&[("x", label)]).unwrap();
            prop_assert_eq!(&mx.weights()[k], &m.probability(&e).unwrap());
        }
        let x = RandomVariable::numeric(&space, "x").unwrap();
        let direct: Rational = (0..3).map(|k| int(k) * &mx.weights()[k as usize]).sum();
        prop_assert_eq!(m.expectation(&x).unwrap(), direct);
    }

    #[test]
    fn core_bound_holds(a in unit(), b in unit(), ap in unit(), bp in unit()) {
        let v = core_inequality(a, b, ap, bp).unwrap();
        prop_assert!(v.within_bounds);
        prop_assert!(v.value >= int(-1) && v.value <= int(0));
    }

    #[test]
    fn conversion_identity(raw in prop::collection::vec(0u32..20, 16)) {
        let w: [Rational; 16] = normalized(&raw).try_into().unwrap();
        let t = table_from_assignments(Settings::default(), &w);
        let v = chsh_01(&t).unwrap().exact_value().unwrap();
        prop_assert_eq!(pm1_from_01(v), chsh_pm1_table(&t).unwrap().exact_value().unwrap());
    }

    #[test]
    fn inequality2_on_space2(raw in prop::collection::vec(0u32..12, 32)) {
        let space = BellSpace::build(SpaceId::Two, Settings::default(), LambdaSupport::uniform(2).unwrap()).unwrap();
        let m = BellMeasure::new(space, normalized(&raw)).unwrap();
        let r = inequality2(&m).unwrap();
        prop_assert!(!r.violated);
    }

    #[test]
    fn lhv_inequalities(n in 1usize..=4, resp in prop::collection::vec(0i64..=6, 16), prior in prop::collection::vec(1u32..5, 4)) {
        let lambda = LambdaSupport::new((0..n).map(|k| format!("l{k}")).collect(), normalized(&prior[..n])).unwrap();
        let r = |s: usize| -> Vec<Rational> { (0..n).map(|k| ratio(resp[4 * k + s], 6)).collect() };
        let m = LhvModel::new(Settings::default(), lambda, [r(0), r(1)], [r(2), r(3)], HypothesisFlags::BOTH).unwrap();
        prop_assert!(!inequality1(&m).unwrap().violated);
        let m3 = m.to_space3(&SettingDistribution::uniform()).unwrap();
        let s = m.settings;
        let r3 = inequality3(&m3, HypothesisFlags::BOTH, s.alice[0], s.alice[1], s.bob[0], s.bob[1]).unwrap();
        prop_assert!(!r3.violated);
        // All three spaces agree on the observable table.
        prop_assert_eq!(table_of(&m3).unwrap().p11, m.table().p11);
        prop_assert_eq!(table_of(&m.to_space1(&SettingDistribution::uniform()).unwrap()).unwrap().p11, m.table().p11);
        prop_assert_eq!(table_of(&m.to_space2().unwrap()).unwrap().p11, m.table().p11);
    }

    #[test]
    fn mixture_round_trip(raw in prop::collection::vec(0u32..20, 16)) {
        let w: [Rational; 16] = normalized(&raw).try_into().unwrap();
        let d = DeterministicMixture::new(Settings::default(), w).unwrap();
        let t = table_of(&d.to_space2().unwrap()).unwrap();
        let c = fine_feasible(&t).unwrap();
        prop_assert!(c.feasible);
        let witness: [Rational; 16] = c.witness.unwrap().try_into().unwrap();
        let back = table_from_assignments(t.settings, &witness);
        prop_assert_eq!(back.p11, t.p11);
        prop_assert_eq!(back.pa, t.pa);
        prop_assert_eq!(back.pb, t.pb);
    }

    #[test]
    fn frequency_form_bounded(rows in prop::collection::vec(prop::array::uniform4(any::<bool>()), 1..60)) {
        let rows: Vec<CounterfactualRow> = rows.into_iter().map(|[a, b, c, d]| CounterfactualRow::complete(a, b, c, d)).collect();
        prop_assert!(!frequency_inequality(&rows).unwrap().violated);
    }
}
