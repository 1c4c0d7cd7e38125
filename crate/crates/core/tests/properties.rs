mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{oracle_resistance, random_case, random_subset};
use reslab::network::{spectral, KilledSystem};
use reslab::realtree::{ball_volume_bounds, build_coded_tree, correspondence_embedding, ghp_bound, random_excursion};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn resistance_matches_dense_inverse(seed in any::<u64>()) {
        let case = random_case(&mut ChaCha8Rng::seed_from_u64(seed));
        let want = oracle_resistance(case.n, &case.edges);
        let got = case.net.resistance_matrix();
        for x in 0..case.n {
            for y in 0..case.n {
                let scale = 1.0 + want[(x, y)];
                prop_assert!((got[x * case.n + y] - want[(x, y)]).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn resistance_is_a_metric(seed in any::<u64>()) {
        let case = random_case(&mut ChaCha8Rng::seed_from_u64(seed));
        let (n, r) = (case.n, case.net.resistance_matrix());
        for x in 0..n {
            prop_assert_eq!(r[x * n + x], 0.0);
            for y in 0..n {
                prop_assert!((r[x * n + y] - r[y * n + x]).abs() <= 1e-14);
                for z in 0..n {
                    prop_assert!(r[x * n + z] <= r[x * n + y] + r[y * n + z] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn green_function_is_symmetric_and_dominated(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let case = random_case(&mut rng);
        let set = random_subset(&mut rng, case.n);
        let killed = KilledSystem::new(&case.net, &case.mu, &set).unwrap();
        for &y in killed.free_vertices() {
            let gyy = killed.green_function(y, y).unwrap();
            for &z in killed.free_vertices() {
                let gyz = killed.green_function(y, z).unwrap();
                prop_assert!((gyz - killed.green_function(z, y).unwrap()).abs() <= 1e-10 * (1.0 + gyy));
                prop_assert!(gyz >= -1e-12 && gyz <= gyy * (1.0 + 1e-10));
            }
        }
    }

    #[test]
    fn heat_kernel_rows_are_probability_densities(seed in any::<u64>(), t in 0.01f64..5.0) {
        let case = random_case(&mut ChaCha8Rng::seed_from_u64(seed));
        let spec = spectral(&case.net, &case.mu).unwrap();
        for x in 0..case.n {
            let row = spec.heat_kernel_row(t, x).unwrap();
            let mass: f64 = row.iter().zip(&case.mu.mass).map(|(p, m)| p * m).sum();
            prop_assert!((mass - 1.0).abs() <= 1e-9);
            prop_assert!(row.iter().all(|&p| p >= -1e-9));
        }
    }

    #[test]
    fn ball_volume_sits_between_its_bounds(seed in any::<u64>(), m in 1usize..30, u in 0.0f64..=1.0, r in 0.01f64..1.5) {
        let f = random_excursion(m, &mut ChaCha8Rng::seed_from_u64(seed));
        let b = ball_volume_bounds(&f, u * f.sigma(), r).unwrap();
        prop_assert!(b.lower <= b.measured * (1.0 + 1e-12) + 1e-15, "{:?}", b);
        prop_assert!(b.measured <= b.upper * (1.0 + 1e-12) + 1e-15, "{:?}", b);
    }

    #[test]
    fn coded_trees_are_zero_hyperbolic(seed in any::<u64>(), m in 1usize..12) {
        let f = random_excursion(m, &mut ChaCha8Rng::seed_from_u64(seed));
        let tree = build_coded_tree(&f).unwrap();
        prop_assert!(tree.four_point_defect() <= 1e-10);
        prop_assert!((tree.total_mass() - f.sigma()).abs() <= 1e-12);
    }
}

#[test]
fn embedding_never_beats_the_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 0..40 {
        let f = random_excursion(2 + k % 9, &mut rng);
        let g = random_excursion(2 + (k * 5) % 11, &mut rng);
        let bound = ghp_bound(&f, &g, 1.0).unwrap();
        let emb = correspondence_embedding(&f, &g, 1e-9, 1.0).unwrap();
        assert!(emb.achieved <= bound * (1.0 + 1e-9), "pair {k}: {} > {bound}", emb.achieved);
    }
}
