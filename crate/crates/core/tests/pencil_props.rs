mod common;

use common::IntModel;
use dynsec::pencil::{invariant_zeros, normalrank, rank_at, PencilSelection};
use dynsec::scalar::Settings;
use dynsec::sim::{generate_random_instance, Dims};
use itertools::Itertools;
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = Dims> {
    (1usize..=3).prop_flat_map(|n| {
        (1usize..=n).prop_flat_map(move |p| (0usize..=2.min(n + p - 1), 1usize..=3.min(n + p)).prop_map(move |(o, m)| Dims::new(n, o, m, p)))
    })
}

fn supports(m: usize) -> Vec<Vec<usize>> {
    (0..=m).flat_map(|k| (0..m).combinations(k)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn zeros_drop_rank_and_pair_up(d in dims(), seed in 0u64..10_000) {
        let model = generate_random_instance::<f64>(d, seed, None).unwrap();
        let settings = Settings::default();
        for s in supports(model.m()) {
            let sel = PencilSelection::new(&model, s).unwrap();
            let zs = invariant_zeros(&sel, &settings).unwrap();
            for z in &zs.zeros {
                prop_assert!(rank_at(&sel.assemble(z.z), &settings.tol).unwrap() < zs.normalrank);
                prop_assert!(z.verified);
                let has_conj = zs.zeros.iter().any(|w| (w.z - z.z.conj()).norm() <= 1e-8 * z.z.norm().max(1.0));
                prop_assert!(has_conj, "{:?} lacks its conjugate", z.z);
            }
        }
    }

    #[test]
    fn normalrank_ignores_seed(d in dims(), seed in 0u64..10_000) {
        let model = generate_random_instance::<f64>(d, seed, None).unwrap();
        let a = Settings::default().with_seed(1);
        let b = Settings::default().with_seed(0xdead_beef);
        for s in supports(model.m()) {
            let sel = PencilSelection::new(&model, s).unwrap();
            prop_assert_eq!(normalrank(&sel, &a).unwrap(), normalrank(&sel, &b).unwrap());
        }
    }

    #[test]
    fn zeros_match_exact_minor_roots(d in dims(), seed in 0u64..10_000) {
        let model = generate_random_instance::<f64>(d, seed, None).unwrap();
        let oracle = IntModel::from(&model);
        let settings = Settings::default();
        for s in supports(model.m()) {
            let sel = PencilSelection::new(&model, s.clone()).unwrap();
            let zs = invariant_zeros(&sel, &settings).unwrap();
            let exact_rank = oracle.normalrank(&s);
            prop_assert_eq!(zs.normalrank, exact_rank);
            if zs.generically_rank_deficient {
                prop_assert!(exact_rank < sel.cols());
                continue;
            }
            let roots = oracle.minor_gcd(&s, exact_rank).square_free().roots();
            prop_assert_eq!(roots.len(), zs.zeros.len(), "support {:?}: {:?} vs {:?}", s, roots, zs.zeros);
            for r in &roots {
                prop_assert!(zs.zeros.iter().any(|z| (z.z - r).norm() <= 1e-6 * r.norm().max(1.0)));
            }
        }
    }
}
