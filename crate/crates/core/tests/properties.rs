use std::collections::BTreeMap;

use nfold::dp::convolve;
use nfold::format::{instance_to_json, parse_instance, read_instance, write_instance};
use nfold::oracle::{oracle_solve, OracleBudget};
use nfold::plan::{closed_form_m, iteration_count, lower_rhs_schedule};
use nfold::reduction::{map_back, reduce};
use nfold::table::{Grid, Link, PointTable, TableBuilder};
use nfold::{
    solve_validated, verify_solution, EngineConfig, Matrix, Mode, NFoldInstance, Solution,
    SolverConfig,
};
use proptest::prelude::*;

fn table(points: &[(i64, i64, i128)]) -> PointTable {
    let grid = Grid::new(vec![0, 0], vec![8, 8]).unwrap();
    let mut b = TableBuilder::new(grid, 1 << 10);
    for (i, &(x, y, v)) in points.iter().enumerate() {
        b.insert(&[x, y], v, Link::new(i, 0)).unwrap();
    }
    b.finish()
}

fn cells(t: &PointTable) -> BTreeMap<Vec<i64>, i128> {
    (0..t.len()).map(|i| (t.point(i).to_vec(), t.value(i))).collect()
}

fn point_list() -> impl Strategy<Value = Vec<(i64, i64, i128)>> {
    prop::collection::vec((0i64..=8, 0i64..=8, 0i128..=10), 1..6)
}

/// Small instances with `r = 1`, 0/1 entries and lower right-hand sides
/// large enough to need several doubling iterations.
fn deep_instance() -> impl Strategy<Value = NFoldInstance> {
    (1usize..=2)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(prop::collection::vec(0i64..=1, 1..=3), n),
                prop::collection::vec(0i64..=100, n),
                0i64..=200,
                any::<bool>(),
                any::<u64>(),
            )
        })
        .prop_map(|(rows, b_low, b_up, planted, salt)| {
            let blocks: Vec<Matrix> = rows
                .iter()
                .map(|r| Matrix::from_rows(std::slice::from_ref(r), r.len()).unwrap())
                .collect();
            let target = if planted {
                // put all of each brick on one column chosen from the salt
                rows.iter()
                    .zip(&b_low)
                    .enumerate()
                    .map(|(k, (r, &b))| r[(salt as usize >> k) % r.len()] * b)
                    .sum()
            } else {
                b_up
            };
            let c: Vec<i64> = rows
                .iter()
                .flatten()
                .enumerate()
                .map(|(j, _)| ((salt >> (j % 60)) % 6) as i64)
                .collect();
            NFoldInstance::new(blocks, vec![target], b_low).with_objective(c)
        })
}

proptest! {
    #[test]
    fn schedule_closed_form_and_count_agree(b in 0i64..5_000_000, k in 1u64..64) {
        let s = lower_rhs_schedule(b, k);
        prop_assert_eq!(s.iterations, iteration_count(b, k));
        for i in 1..=s.iterations {
            prop_assert_eq!(closed_form_m(b, k, s.iterations, i), s.m[i - 1]);
            prop_assert_eq!(s.m[i - 1], s.tilm[i - 1] + s.hatm[i - 1]);
            prop_assert!(s.hatm[i - 1] % 2 == 0);
            prop_assert!(s.tilm[i - 1] <= k as i64);
            if i > 1 {
                prop_assert_eq!(s.m[i - 2] * 2, s.hatm[i - 1]);
            }
        }
    }

    #[test]
    fn convolve_is_associative(a in point_list(), b in point_list(), c in point_list()) {
        let cfg = EngineConfig::default();
        let (a, b, c) = (table(&a), table(&b), table(&c));
        let left = convolve(&convolve(&a, &b, 8, &cfg).unwrap(), &c, 8, &cfg).unwrap();
        let right = convolve(&a, &convolve(&b, &c, 8, &cfg).unwrap(), 8, &cfg).unwrap();
        prop_assert_eq!(cells(&left), cells(&right));
    }

    #[test]
    fn convolve_matches_pairwise_sums(a in point_list(), b in point_list()) {
        let (ta, tb) = (table(&a), table(&b));
        let got = cells(&convolve(&ta, &tb, 8, &EngineConfig::default()).unwrap());
        let mut want: BTreeMap<Vec<i64>, i128> = BTreeMap::new();
        for (p, pv) in cells(&ta) {
            for (q, qv) in cells(&tb) {
                let s = vec![p[0] + q[0], p[1] + q[1]];
                if s.iter().all(|&v| v <= 8) {
                    let e = want.entry(s).or_insert(pv + qv);
                    *e = (*e).max(pv + qv);
                }
            }
        }
        prop_assert_eq!(got, want);
    }

    #[test]
    fn sequential_and_default_engines_agree(a in point_list(), b in point_list()) {
        let (ta, tb) = (table(&a), table(&b));
        let seq = convolve(&ta, &tb, 8, &EngineConfig::sequential()).unwrap();
        let par = convolve(&ta, &tb, 8, &EngineConfig::default()).unwrap();
        prop_assert_eq!(seq, par);
    }

    #[test]
    fn instance_json_round_trips(inst in deep_instance()) {
        let back = parse_instance(&instance_to_json(&inst)).unwrap();
        prop_assert_eq!(&back, &inst);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        write_instance(&path, &inst).unwrap();
        prop_assert_eq!(read_instance(&path).unwrap(), inst);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn deep_instances_match_oracle(inst in deep_instance()) {
        let v = inst.clone().validate().unwrap();
        for mode in [Mode::Feasibility, Mode::Optimization] {
            let (out, _) = solve_validated(&v, mode, &SolverConfig::default()).unwrap();
            let expected = oracle_solve(&inst, mode, &OracleBudget::default()).unwrap();
            prop_assert_eq!(out.status, expected.status);
            if mode == Mode::Optimization {
                prop_assert_eq!(out.objective(), expected.objective());
            }
            if let Some(sol) = &out.solution {
                prop_assert!(verify_solution(&v, sol).unwrap());
            }
        }
    }

    #[test]
    fn reduction_preserves_solutions(
        rows in prop::collection::vec(prop::collection::vec(-2i64..=2, 1..=3), 1..=3),
        picks in prop::collection::vec((0usize..3, 0i64..=6), 1..=3),
    ) {
        // plant a solution: brick k puts its whole sum on one column
        let n = rows.len();
        let widths: Vec<usize> = rows.iter().map(Vec::len).collect();
        let mut x = Vec::new();
        let mut b_low = Vec::with_capacity(n);
        for k in 0..n {
            let (col, amount) = picks[k % picks.len()];
            let mut brick = vec![0; widths[k]];
            brick[col % widths[k]] = amount;
            b_low.push(amount);
            x.extend(brick);
        }
        let b_up = vec![rows
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let (col, amount) = picks[k % picks.len()];
                r[col % r.len()] * amount
            })
            .sum()];
        let blocks = rows
            .iter()
            .map(|r| Matrix::from_rows(std::slice::from_ref(r), r.len()).unwrap())
            .collect();
        let v = NFoldInstance::new(blocks, b_up, b_low).validate().unwrap();
        let planted = Solution::new(x);
        prop_assert!(verify_solution(&v, &planted).unwrap());
        let red = reduce(&v).unwrap();
        prop_assert!(red.inst.blocks().iter().all(|b| b.min_entry().unwrap_or(0) >= 0));
        prop_assert!(verify_solution(&red.inst, &planted).unwrap());
        prop_assert!(verify_solution(&v, &map_back(&v, &planted)).unwrap());
        let (out, _) = solve_validated(&v, Mode::Feasibility, &SolverConfig::default()).unwrap();
        prop_assert!(out.is_feasible());
    }
}
