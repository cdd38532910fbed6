mod common;

use meshdiff::diffuse::DiffusionSystem;
use meshdiff::{NeighborGraph, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn check(rng: &mut ChaCha8Rng, with_fixed: bool) {
    let n = rng.random_range(2..=12);
    let p = rng.random_range(0.1..0.6);
    let lists = common::random_graph(rng, n, p);
    let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.1)).collect();
    let mut fixed = vec![false; n];
    if with_fixed {
        let count = rng.random_range(1..n);
        fixed[..count].fill(true);
        // Shuffle which vertices are fixed.
        for i in (1..n).rev() {
            fixed.swap(i, rng.random_range(0..=i));
        }
    }
    let rhs: Vec<Vec3> = (0..n)
        .map(|_| meshdiff::synth::random_vector(rng, 2.0))
        .collect();

    let graph = NeighborGraph::from_lists(lists.clone()).unwrap();
    let members: Vec<usize> = (0..n).collect();
    let system = DiffusionSystem::for_subset(&graph, &members, &fixed, &lambda).unwrap();
    let ours = system.diffuse(&rhs).unwrap();
    let oracle = common::dense_least_squares(&lists, &lambda, &fixed, &rhs);
    assert_eq!(ours.offsets.len(), oracle.len());
    for (a, b) in ours.offsets.iter().zip(&oracle) {
        assert!((a - b).abs().max() < 1e-8, "{a:?} vs {b:?}");
    }
}

#[test]
fn square_systems_match_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..200 {
        check(&mut rng, false);
    }
}

#[test]
fn systems_with_fixed_vertices_match_dense_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..200 {
        check(&mut rng, true);
    }
}

#[test]
fn coefficient_matrix_matches_dense_assembly() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let n = 9;
    let lists = common::random_graph(&mut rng, n, 0.4);
    let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.1)).collect();
    let graph = NeighborGraph::from_lists(lists.clone()).unwrap();
    let members: Vec<usize> = (0..n).collect();
    let system = DiffusionSystem::for_subset(&graph, &members, &vec![false; n], &lambda).unwrap();
    let dense = common::dense_coefficient(&lists, &lambda);
    let b = system.coefficient().to_dense();
    for r in 0..n {
        for c in 0..n {
            assert!((b[[r, c]] - dense[(r, c)]).abs() < 1e-15);
        }
    }
}
