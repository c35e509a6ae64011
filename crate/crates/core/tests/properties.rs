//! Cross-module invariants: algebraic properties via proptest plus seeded
//! fuzzing of the planner operations over random rigs and maps.

use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use curtain_core::belief::{covered_cells, OccupancyBelief, SensingReport};
use curtain_core::geometry::{
    build_constraint_graph, build_lattice, is_feasible, laser_angle, CameraModel, ConstraintGraph,
    LaserModel, Point2,
};
use curtain_core::planner::{
    brute_force_oracle, fixed_depth, frontoparallel_uncertainty, greedy, objective, optimize_dp,
    random_frontoparallel, CurtainPlacement, GreedyTieBreak,
};
use curtain_core::uncertainty::{
    binary_entropy, entropy_map, lookup_entropy, ConfidenceGrid, EntropyMap, GridSpec,
};

proptest! {
    #[test]
    fn entropy_symmetry(p in 0.0f64..=1.0) {
        let a = binary_entropy(p).unwrap();
        let b = binary_entropy(1.0 - p).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn entropy_bounded_and_peaked(p in 0.0f64..=1.0) {
        let h = binary_entropy(p).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
        if (p - 0.5).abs() > 1e-12 {
            prop_assert!(h < 1.0);
        }
    }

    #[test]
    fn laser_angle_scale_invariant(
        x in -20.0f64..20.0,
        z in 0.1f64..50.0,
        lx in -0.5f64..0.5,
        scale in 0.01f64..100.0,
    ) {
        let laser = LaserModel::from_angle_step(Point2::new(lx, 0.0), 0.1).unwrap();
        let p = Point2::new(x + lx, z);
        let scaled = Point2::new(lx + (p.x - lx) * scale, (p.z) * scale);
        // scaling the offset vector from the laser by a positive factor
        let a = laser_angle(&laser, p).unwrap();
        let b = laser_angle(&laser, scaled).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn lookup_is_piecewise_constant(
        px in -1.9f64..1.9,
        pz in 0.1f64..3.9,
        ex in -0.49f64..0.49,
        ez in -0.49f64..0.49,
    ) {
        let spec = GridSpec::new(-2.0, 2.0, 0.0, 4.0, 4, 4).unwrap();
        let values: Vec<f64> = (0..16).map(|i| (i as f64) / 16.0).collect();
        let map = entropy_map(&ConfidenceGrid::new(spec, values).unwrap());
        let p = Point2::new(px, pz);
        // stay away from cell boundaries so the perturbation cannot cross one
        let dx = spec.dx();
        let dz = spec.dz();
        let fx = ((px - spec.x_min) / dx).fract();
        let fz = ((pz - spec.z_min) / dz).fract();
        prop_assume!(fx > 0.02 && fx < 0.98 && fz > 0.02 && fz < 0.98);
        let margin_x = dx * (fx.min(1.0 - fx)) * 0.9;
        let margin_z = dz * (fz.min(1.0 - fz)) * 0.9;
        let q = Point2::new(px + ex * margin_x / 0.49, pz + ez * margin_z / 0.49);
        prop_assert_eq!(lookup_entropy(&map, p), lookup_entropy(&map, q));
    }

    #[test]
    fn grid_csv_roundtrip(values in proptest::collection::vec(0.0f64..=1.0, 6)) {
        let spec = GridSpec::new(-1.0, 1.0, 0.0, 2.0, 3, 2).unwrap();
        let grid = ConfidenceGrid::new(spec, values).unwrap();
        let csv = grid.to_csv_string();
        let back = ConfidenceGrid::from_csv_str(&csv).unwrap();
        prop_assert_eq!(back.values(), grid.values());
        prop_assert_eq!(back.to_csv_string(), csv);
    }
}

/// Random rig generator shared by the fuzz tests. The angular bound is kept
/// above the worst per-step angle change any nearest-z frontoparallel
/// placement can need, so every strategy's output must be feasible.
struct FuzzInstance {
    graph: ConstraintGraph,
    map: EntropyMap,
    spec: GridSpec,
    z_range: (f64, f64),
}

fn random_instance(rng: &mut ChaCha8Rng) -> FuzzInstance {
    let t_count = rng.gen_range(2..=10usize);
    let n = rng.gen_range(2..=12usize);
    let fov: f64 = rng.gen_range(10.0..100.0);
    let lx: f64 = rng.gen_range(-0.3..0.3);
    let r_min: f64 = rng.gen_range(0.5..3.0);
    let r_max: f64 = r_min + rng.gen_range(2.0..40.0);

    let half_fov = (fov / 2.0).to_radians();
    let az_step = fov.to_radians() / (t_count - 1) as f64;
    let range_step = (r_max - r_min) / (n - 1) as f64;
    let z_lo = r_min * half_fov.cos();
    let sec2 = 1.0 / (half_fov.cos() * half_fov.cos());
    // bound on the laser-angle change between consecutive rays for any
    // nearest-z (and any same-index) transition; see the derivative bound on
    // atan(tan(az) - lx/z)
    let bound = sec2 * az_step + lx.abs() * (range_step + r_max * az_step) / (z_lo * z_lo);
    let dmax = bound * rng.gen_range(1.1..3.0);

    let cam = CameraModel::new(t_count, fov).unwrap();
    let laser = LaserModel::from_angle_step(Point2::new(lx, 0.0), dmax).unwrap();
    let lattice = build_lattice(&cam, &laser, n, r_min, r_max).unwrap();
    let graph = build_constraint_graph(lattice, &laser);

    let nx = rng.gen_range(2..=12usize);
    let nz = rng.gen_range(2..=12usize);
    let spec = GridSpec::new(
        -(r_max * half_fov.sin() + 1.0),
        r_max * half_fov.sin() + 1.0,
        0.0,
        r_max + 1.0,
        nx,
        nz,
    )
    .unwrap();
    let conf: Vec<f64> = (0..spec.cell_count())
        .map(|_| rng.gen_range(0.0..1.0))
        .collect();
    let map = entropy_map(&ConfidenceGrid::new(spec, conf).unwrap());
    let z_range = (r_min, r_max * half_fov.cos());
    FuzzInstance {
        graph,
        map,
        spec,
        z_range,
    }
}

/// Every operation's output is feasible, and the DP dominates every baseline
/// on total entropy, across >= 10^4 placements.
#[test]
fn fuzz_feasibility_and_dominance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut produced = 0usize;
    for case in 0..2000 {
        let inst = random_instance(&mut rng);
        let lattice = inst.graph.lattice();

        let (dp_placement, dp_score, _) = optimize_dp(&inst.graph, &inst.map)
            .unwrap_or_else(|e| panic!("case {case}: dp failed: {e}"));
        let mut placements: Vec<(&str, CurtainPlacement)> = vec![("dp", dp_placement)];
        placements.push((
            "greedy-random",
            greedy(
                &inst.graph,
                &inst.map,
                GreedyTieBreak::Random { seed: case },
            )
            .unwrap_or_else(|e| panic!("case {case}: greedy-random failed: {e}")),
        ));
        placements.push((
            "greedy-minangle",
            greedy(&inst.graph, &inst.map, GreedyTieBreak::MinAngleChange)
                .unwrap_or_else(|e| panic!("case {case}: greedy-minangle failed: {e}")),
        ));
        placements.push((
            "random",
            random_frontoparallel(case, inst.z_range.0, inst.z_range.1, lattice).unwrap(),
        ));
        let z_mid = 0.5 * (inst.z_range.0 + inst.z_range.1);
        placements.push(("fixed", fixed_depth(z_mid, lattice)));
        placements.push((
            "fp-uncertainty",
            frontoparallel_uncertainty(&inst.map, lattice),
        ));

        for (name, p) in &placements {
            assert!(
                is_feasible(&inst.graph, p).unwrap(),
                "case {case}: {name} produced an infeasible placement"
            );
            produced += 1;
            let score = objective(p, &inst.map);
            assert!(
                score.total_entropy <= dp_score.total_entropy + 1e-9,
                "case {case}: {name} beat the dp ({} > {})",
                score.total_entropy,
                dp_score.total_entropy
            );
        }
    }
    assert!(produced >= 10_000, "only {produced} placements fuzzed");
}

/// Bumping one cell's entropy never lowers the DP optimum.
#[test]
fn fuzz_dp_monotone_in_entropy_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    for case in 0..200 {
        let inst = random_instance(&mut rng);
        // confidences on the low branch so moving toward 1/2 raises entropy
        let mut conf: Vec<f64> = (0..inst.spec.cell_count())
            .map(|_| rng.gen_range(0.0..0.5))
            .collect();
        let base = ConfidenceGrid::new(inst.spec, conf.clone()).unwrap();
        let (_, s_base, _) = optimize_dp(&inst.graph, &entropy_map(&base)).unwrap();

        let cell = rng.gen_range(0..inst.spec.cell_count());
        conf[cell] += (0.5 - conf[cell]) * rng.gen_range(0.1..1.0);
        let bumped = ConfidenceGrid::new(inst.spec, conf).unwrap();
        let (_, s_bumped, _) = optimize_dp(&inst.graph, &entropy_map(&bumped)).unwrap();
        assert!(
            s_bumped.total_entropy >= s_base.total_entropy - 1e-9,
            "case {case}: bump lowered the optimum"
        );
    }
}

/// Sampled random feasible paths never beat the DP smoothness on uniform
/// maps, and the oracle agrees exactly where it can run.
#[test]
fn fuzz_uniform_smoothness() {
    let mut rng = ChaCha8Rng::seed_from_u64(31337);
    for case in 0..60 {
        let inst = random_instance(&mut rng);
        let lattice = inst.graph.lattice();
        let t_count = lattice.num_rays();
        let n = lattice.points_per_ray();
        let map = entropy_map(
            &ConfidenceGrid::new(inst.spec, vec![0.37; inst.spec.cell_count()]).unwrap(),
        );
        let (_, dp_score, table) = optimize_dp(&inst.graph, &map).unwrap();

        for _ in 0..200 {
            // random feasible path via nodes that still reach the last ray
            let starts: Vec<usize> = (0..n).filter(|&i| table.has_path(0, i)).collect();
            let mut cur = starts[rng.gen_range(0..starts.len())];
            let mut indices = vec![cur];
            for t in 0..t_count - 1 {
                let (lo, hi) = inst.graph.successor_range(t, cur);
                let options: Vec<usize> = (lo..hi).filter(|&j| table.has_path(t + 1, j)).collect();
                cur = options[rng.gen_range(0..options.len())];
                indices.push(cur);
            }
            let p = CurtainPlacement::from_indices(lattice, indices).unwrap();
            assert!(is_feasible(&inst.graph, &p).unwrap());
            let s = objective(&p, &map);
            assert!(
                dp_score.smoothness_penalty <= s.smoothness_penalty + 1e-12,
                "case {case}: sampled path smoother than dp"
            );
        }

        if (n as f64).powi(t_count as i32) <= 1e6 {
            let (_, oracle) = brute_force_oracle(&inst.graph, &map).unwrap();
            assert!((dp_score.total_entropy - oracle.total_entropy).abs() < 1e-9);
            assert!((dp_score.smoothness_penalty - oracle.smoothness_penalty).abs() < 1e-9);
        }
    }
}

/// Edge membership matches the pairwise angle test exhaustively up to
/// N * T = 200 nodes.
#[test]
fn edge_set_matches_pairwise_angle_test() {
    for (t_count, n, lx, dmax_deg) in [
        (10usize, 20usize, 0.2f64, 1.0f64),
        (10, 20, -0.25, 2.5),
        (5, 40, 0.0, 1.5),
        (4, 7, 0.1, 0.7),
    ] {
        let cam = CameraModel::new(t_count, 30.0).unwrap();
        let laser =
            LaserModel::from_angle_step(Point2::new(lx, 0.0), dmax_deg.to_radians()).unwrap();
        let lattice = build_lattice(&cam, &laser, n, 1.0, 40.0).unwrap();
        let graph = build_constraint_graph(lattice.clone(), &laser);
        for t in 0..t_count - 1 {
            for i in 0..n {
                for j in 0..n {
                    let expected = (lattice.candidate(t + 1, j).laser_angle
                        - lattice.candidate(t, i).laser_angle)
                        .abs()
                        <= laser.delta_theta_max();
                    assert_eq!(
                        graph.is_edge(t, i, j),
                        expected,
                        "T={t_count} N={n} t={t} i={i} j={j}"
                    );
                }
            }
        }
    }
}

/// Graph edges grow monotonically with the angular bound, and edge paths are
/// exactly the placements is_feasible accepts.
#[test]
fn edge_monotonicity_and_path_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..50 {
        let t_count = rng.gen_range(2..=5usize);
        let n = rng.gen_range(2..=6usize);
        let fov: f64 = rng.gen_range(10.0..60.0);
        let lx: f64 = rng.gen_range(-0.3..0.3);
        let cam = CameraModel::new(t_count, fov).unwrap();
        let d1: f64 = rng.gen_range(0.001..0.1);
        let d2: f64 = d1 * rng.gen_range(1.0..5.0);
        let l1 = LaserModel::from_angle_step(Point2::new(lx, 0.0), d1).unwrap();
        let l2 = LaserModel::from_angle_step(Point2::new(lx, 0.0), d2).unwrap();
        let lat1 = build_lattice(&cam, &l1, n, 1.0, 10.0).unwrap();
        let lat2 = build_lattice(&cam, &l2, n, 1.0, 10.0).unwrap();
        let g1 = build_constraint_graph(lat1, &l1);
        let g2 = build_constraint_graph(lat2, &l2);
        for t in 0..t_count - 1 {
            for i in 0..n {
                for j in 0..n {
                    if g1.is_edge(t, i, j) {
                        assert!(g2.is_edge(t, i, j), "edge lost when widening the bound");
                    }
                }
            }
        }

        // exhaustive path <-> is_feasible equivalence on the tighter graph
        if (n as f64).powi(t_count as i32) <= 10_000.0 {
            let mut stack = vec![vec![]];
            while let Some(prefix) = stack.pop() {
                if prefix.len() == t_count {
                    let along_edges = prefix
                        .windows(2)
                        .enumerate()
                        .all(|(t, w)| g1.is_edge(t, w[0], w[1]));
                    let p = CurtainPlacement::from_indices(g1.lattice(), prefix.clone()).unwrap();
                    assert_eq!(is_feasible(&g1, &p).unwrap(), along_edges);
                    continue;
                }
                for i in 0..n {
                    let mut next = prefix.clone();
                    next.push(i);
                    stack.push(next);
                }
            }
        }
    }
}

/// Appendix-style identity: information gain equals the summed entropy of
/// the distinct covered cells.
#[test]
fn information_gain_matches_covered_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    for _ in 0..300 {
        let inst = random_instance(&mut rng);
        let conf: Vec<f64> = (0..inst.spec.cell_count())
            .map(|_| rng.gen_range(0.001..0.999))
            .collect();
        let mut belief = OccupancyBelief::new(inst.spec, 0.5).unwrap();
        // shape the belief with a noisy update pattern so cells differ
        let all: std::collections::BTreeSet<usize> = (0..inst.spec.cell_count()).collect();
        let hits: std::collections::BTreeSet<usize> =
            all.iter().copied().filter(|c| conf[*c] > 0.5).collect();
        belief = belief
            .noisy_update(&SensingReport::new(all, hits).unwrap(), 0.9, 0.3)
            .unwrap();

        let (placement, _, _) =
            optimize_dp(&inst.graph, &entropy_map(&belief.confidence_grid())).unwrap();
        let covered = covered_cells(&inst.spec, &placement);
        let expected: f64 = covered
            .iter()
            .map(|&c| binary_entropy(belief.probabilities()[c]).unwrap())
            .sum();
        let gain = belief.expected_information_gain(&placement);
        assert!(
            (gain - expected).abs() < 1e-9,
            "gain {gain} vs covered-sum {expected}"
        );
    }
}

/// Ideal updates collapse covered cells and leave the rest bit-identical.
#[test]
fn ideal_update_is_local() {
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    let spec = GridSpec::new(-4.0, 4.0, 0.0, 8.0, 8, 8).unwrap();
    for _ in 0..200 {
        let mut belief = OccupancyBelief::new(spec, rng.gen_range(0.05..0.95)).unwrap();
        // scramble with a couple of noisy updates
        for _ in 0..3 {
            let covered: std::collections::BTreeSet<usize> =
                (0..64).filter(|_| rng.gen_bool(0.3)).collect();
            let hits: std::collections::BTreeSet<usize> = covered
                .iter()
                .copied()
                .filter(|_| rng.gen_bool(0.5))
                .collect();
            belief = belief
                .noisy_update(&SensingReport::new(covered, hits).unwrap(), 0.8, 0.2)
                .unwrap();
        }
        let covered: std::collections::BTreeSet<usize> =
            (0..64).filter(|_| rng.gen_bool(0.25)).collect();
        let hits: std::collections::BTreeSet<usize> = covered
            .iter()
            .copied()
            .filter(|_| rng.gen_bool(0.5))
            .collect();
        let report = SensingReport::new(covered.clone(), hits.clone()).unwrap();
        let after = belief.ideal_update(&report);
        for c in 0..64 {
            if hits.contains(&c) {
                assert_eq!(after.probabilities()[c], 1.0);
            } else if covered.contains(&c) {
                assert_eq!(after.probabilities()[c], 0.0);
            } else {
                assert_eq!(
                    after.probabilities()[c].to_bits(),
                    belief.probabilities()[c].to_bits()
                );
            }
        }
        assert!(after.total_entropy() <= belief.total_entropy());
    }
}
