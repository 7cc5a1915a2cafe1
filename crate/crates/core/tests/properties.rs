use std::collections::HashSet;

use proptest::prelude::*;

use gencol_core::cost::{column_cost, column_cost_bruteforce, column_cost_dense, pair_marginal};
use gencol_core::gencol::seeded_rng;
use gencol_core::rmp::solve_rmp;
use gencol_core::state_space::{column_count, enumerate_columns, mutate};
use gencol_core::{Column, CostMatrix, Grid, Marginal, RestrictedProblem};

fn column_from_sites(len: usize, sites: &[usize]) -> Column {
    let mut occ = vec![0u32; len];
    for &s in sites {
        occ[s] += 1;
    }
    Column::new(occ).unwrap()
}

fn instance(max_len: usize, max_n: usize) -> impl Strategy<Value = (Column, CostMatrix)> {
    (1..=max_len, 2..=max_n).prop_flat_map(|(len, n)| {
        (prop::collection::vec(0..len, n), prop::collection::vec(-5.0f64..5.0, len * len)).prop_map(
            move |(sites, raw)| {
                let entries = (0..len * len)
                    .map(|k| {
                        let (i, j) = (k / len, k % len);
                        raw[i.min(j) * len + i.max(j)]
                    })
                    .collect();
                (column_from_sites(len, &sites), CostMatrix::from_entries(len, entries).unwrap())
            },
        )
    })
}

fn w1_on_chain(a: &[f64], b: &[f64], spacing: f64) -> f64 {
    let mut cum = 0.0;
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        cum += x - y;
        total += cum.abs();
    }
    total * spacing
}

proptest! {
    #[test]
    fn cost_routes_agree((col, c) in instance(40, 15)) {
        let fast = column_cost(&col, &c).unwrap();
        let brute = column_cost_bruteforce(&col, &c).unwrap();
        let dense = column_cost_dense(&col, &c).unwrap();
        prop_assert!((fast - brute).abs() <= 1e-10 * (1.0 + brute.abs()));
        prop_assert!((dense - brute).abs() <= 1e-10 * (1.0 + brute.abs()));
    }

    #[test]
    fn cost_invariant_under_relabelling((col, c) in instance(12, 8), seed in any::<u64>()) {
        let len = col.len();
        let mut perm: Vec<usize> = (0..len).collect();
        let mut rng = seeded_rng(seed);
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        // Relabelled column: new site i holds what old site perm[i] held.
        let occ: Vec<u32> = perm.iter().map(|&p| col.occupancy()[p]).collect();
        let relabelled = Column::new(occ).unwrap();
        let a = column_cost(&col, &c).unwrap();
        let b = column_cost(&relabelled, &c.permuted(&perm)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn pair_marginal_identities((col, _) in instance(30, 15)) {
        let m = pair_marginal(&col).unwrap();
        let len = col.len();
        let lambda = col.to_probability();
        for i in 0..len {
            for j in 0..len {
                prop_assert_eq!(m.get(i, j), m.get(j, i));
                prop_assert!(m.get(i, j) >= 0.0);
            }
        }
        prop_assert!((m.total() - 1.0).abs() <= 1e-12);
        for (r, l) in m.row_sums().iter().zip(&lambda) {
            prop_assert!((r - l).abs() <= 1e-12);
        }
    }

    #[test]
    fn mutation_moves_one_particle_one_step(len in 2usize..30, n in 1u32..15, spacing in 0.1f64..3.0, seed in any::<u64>()) {
        let grid = Grid::uniform_1d(len, spacing).unwrap();
        let mut rng = seeded_rng(seed);
        let parent = gencol_core::state_space::random_column(len, n, &mut rng);
        let child = mutate(&parent, &grid, &mut rng);
        prop_assert_eq!(child.n_particles(), n);
        prop_assert_eq!(child.occupancy().iter().sum::<u32>(), n);
        let diff: u32 = parent.occupancy().iter().zip(child.occupancy()).map(|(a, b)| a.abs_diff(*b)).sum();
        prop_assert_eq!(diff, 2);
        let w1 = w1_on_chain(&parent.to_probability(), &child.to_probability(), spacing);
        prop_assert!((w1 - spacing / f64::from(n)).abs() <= 1e-12 * spacing);
    }

    #[test]
    fn mutation_is_reproducible(len in 2usize..30, n in 1u32..15, seed in any::<u64>()) {
        let grid = Grid::uniform_1d(len, 1.0).unwrap();
        let parent = gencol_core::state_space::random_column(len, n, &mut seeded_rng(seed ^ 1));
        let mut a = seeded_rng(seed);
        let mut b = seeded_rng(seed);
        for _ in 0..20 {
            prop_assert_eq!(mutate(&parent, &grid, &mut a), mutate(&parent, &grid, &mut b));
        }
    }

    #[test]
    fn enumeration_is_complete_and_distinct(len in 1usize..8, n in 1u32..6) {
        let cols = enumerate_columns(len, n, u128::MAX).unwrap();
        prop_assert_eq!(cols.len() as u128, column_count(len, n).unwrap());
        let distinct: HashSet<&Column> = cols.iter().collect();
        prop_assert_eq!(distinct.len(), cols.len());
        prop_assert!(cols.iter().all(|c| c.n_particles() == n && c.len() == len));
    }

    #[test]
    fn adding_a_column_never_raises_the_optimum(len in 2usize..7, n in 2u32..4, seed in any::<u64>()) {
        let grid = Grid::uniform_1d(len, 1.0).unwrap();
        let c = gencol_core::cost::build_cost_matrix(&grid, &gencol_core::PairPotential::coulomb(0.1)).unwrap();
        let mut rng = seeded_rng(seed);
        let mut cols: Vec<Column> = (0..len).map(|i| Column::stacked(len, i, n)).collect();
        cols.extend((0..len).map(|_| gencol_core::state_space::random_column(len, n, &mut rng)));
        let mut problem = RestrictedProblem::with_cost_matrix(cols, &c, Marginal::uniform(len)).unwrap();
        let before = solve_rmp(&problem, 1e-9).unwrap();
        let extra = gencol_core::state_space::random_column(len, n, &mut rng);
        let cost = column_cost(&extra, &c).unwrap();
        problem.push(extra, cost).unwrap();
        let after = solve_rmp(&problem, 1e-9).unwrap();
        prop_assert!(after.value <= before.value + 1e-8);
        prop_assert!(after.certificate(&problem).holds(1e-8));
    }
}
