use nfold::SolverConfig;
use nfold_apps::closest_string as cs;
use nfold_apps::imbalance as im;
use nfold_apps::scheduling::{self as sched, Objective, SchedulingConfig};
use num_rational::Ratio;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scheduling_matches_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = sched::random_instance(&mut rng, 8, 3, 5, 3);
        let cfg = SchedulingConfig::default();
        for objective in [Objective::Cmax, Objective::Cmin] {
            let s = sched::solve_objective(&inst, objective, &cfg).unwrap();
            prop_assert!(s.verify(&inst, objective));
            prop_assert_eq!(s.objective, sched::brute_force(&inst, objective));
        }
    }

    #[test]
    fn cmin_loads_stay_near_the_optimum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = sched::random_instance(&mut rng, 8, 3, 5, 3);
        let s = sched::solve_cmin(&inst, &SchedulingConfig::default()).unwrap();
        for (&load, &speed) in s.loads.iter().zip(&inst.machine_speeds()) {
            prop_assert!(Ratio::from_integer(load) >= s.objective * speed);
            prop_assert!(Ratio::from_integer(load) <= s.objective * speed + inst.p_max());
        }
    }

    #[test]
    fn big_machine_path_matches_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = sched::random_instance(&mut rng, 12, 2, 2, 2);
        for objective in [Objective::Cmax, Objective::Cmin] {
            let cfg = SchedulingConfig {
                small_threshold_override: Some(sched::sound_threshold(&inst, objective)),
                ..SchedulingConfig::default()
            };
            let s = sched::solve_objective(&inst, objective, &cfg).unwrap();
            prop_assert_eq!(s.objective, sched::brute_force(&inst, objective));
        }
    }

    #[test]
    fn closest_string_matches_enumeration(seed in any::<u64>(), k in 1usize..=4, len in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let strings = cs::random_strings(&mut rng, k, len, 3);
        let r = cs::solve_closest(&strings, None, &SolverConfig::default()).unwrap().unwrap();
        prop_assert_eq!(r.d, cs::brute_force(&strings, None));
        prop_assert_eq!(cs::radius_of(&r.center, &strings), r.d);
        // the decision version agrees at the optimum and one below it
        prop_assert!(cs::solve_closest(&strings, Some(r.d), &SolverConfig::default()).unwrap().is_some());
        if r.d > 0 {
            prop_assert!(cs::solve_closest(&strings, Some(r.d - 1), &SolverConfig::default()).unwrap().is_none());
        }
    }

    #[test]
    fn closest_string_ignores_string_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut strings = cs::random_strings(&mut rng, 3, 5, 3);
        let a = cs::solve_closest(&strings, None, &SolverConfig::default()).unwrap().unwrap();
        strings.reverse();
        let b = cs::solve_closest(&strings, None, &SolverConfig::default()).unwrap().unwrap();
        prop_assert_eq!(a.d, b.d);
    }

    #[test]
    fn imbalance_matches_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = im::random_graph(&mut rng, 7, 3);
        let r = im::solve_imbalance(&g, &im::ImbalanceConfig::default()).unwrap();
        prop_assert_eq!(r.imbalance, im::brute_force(&g));
        prop_assert_eq!(im::imbalance_of(&g, &r.ordering), r.imbalance);
    }

    #[test]
    fn imbalance_ignores_relabeling(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = im::random_graph(&mut rng, 7, 3);
        let flip = |v: usize| g.n - 1 - v;
        let h = im::GraphInstance::new(
            g.n,
            g.edges.iter().map(|&[u, v]| [flip(u), flip(v)]).collect(),
        );
        let cfg = im::ImbalanceConfig::default();
        prop_assert_eq!(
            im::solve_imbalance(&g, &cfg).unwrap().imbalance,
            im::solve_imbalance(&h, &cfg).unwrap().imbalance
        );
    }
}
