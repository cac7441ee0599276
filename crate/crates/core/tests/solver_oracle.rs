//! The projection solver against exact small-scale oracles.

mod common;

use common::{cell_rows, min_norm_nonneg, parse_columns, partition_rows, project_affine_oracle};
use musrover_core::features::{feature_partition, parse_feature, pushforward, FeatureTable};
use musrover_core::student::{
    project_onto_partition_constraint, project_onto_simplex, solve_student_unigram, Objective,
    Rule, RuleSet, RuleTarget, SolveOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn partition_projection_matches_least_squares_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        // omega of size 8: two voices with two pitches, one with two
        let corpus = parse_columns(&[vec![
            [60, 55, 52, 48],
            [61, 56, 53, 48],
            [60, 56, 52, 48],
            [61, 55, 53, 48],
        ]]);
        assert_eq!(corpus.omega.len(), 8);
        let features = musrover_core::features::enumerate_features();
        let f = features[rng.gen_range(0..features.len())];
        let part = feature_partition(f, &corpus.omega);

        let point: Vec<f64> = (0..8).map(|_| rng.gen_range(-0.5..1.5)).collect();
        // a feasible random target: cell masses of a random distribution
        let raw: Vec<f64> = {
            let v: Vec<f64> = (0..8).map(|_| rng.gen_range(0.05..1.0)).collect();
            let t: f64 = v.iter().sum();
            v.into_iter().map(|x| x / t).collect()
        };
        let target = pushforward(&raw, &part);

        let ours = project_onto_partition_constraint(&point, &part, &target).unwrap();
        let (rows, rhs) = partition_rows(&part, target.mass());
        let oracle = project_affine_oracle(&point, &rows, &rhs).unwrap();
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "projection disagrees with oracle");
        }
    }
}

#[test]
fn simplex_projection_matches_grid_oracle() {
    let v = [0.9, -0.1, 0.4];
    let ours = project_onto_simplex(&v);

    // brute-force minimization over the simplex grid at resolution 1e-3
    let steps = 1000usize;
    let mut best = (f64::INFINITY, [0.0f64; 3]);
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            let x = [
                i as f64 / steps as f64,
                j as f64 / steps as f64,
                (steps - i - j) as f64 / steps as f64,
            ];
            let d: f64 = x.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, x);
            }
        }
    }
    for (a, b) in ours.iter().zip(&best.1) {
        assert!((a - b).abs() <= 2e-3, "grid oracle disagrees: {ours:?} vs {:?}", best.1);
    }
    // and ours is at least as close as the best grid point
    let ours_d: f64 = ours.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
    assert!(ours_d <= best.0 + 1e-12);
}

#[test]
fn two_overlapping_rules_match_brute_force() {
    let corpus = parse_columns(&[vec![
        [60, 55, 52, 48],
        [61, 56, 53, 48],
        [60, 56, 52, 48],
        [61, 55, 53, 48],
        [60, 55, 53, 48],
    ]]);
    assert_eq!(corpus.omega.len(), 8);
    let table = FeatureTable::build(&corpus.omega);

    let raw: Vec<f64> = {
        let counts = [5.0, 1.0, 3.0, 2.0, 4.0, 1.0, 2.0, 2.0];
        let t: f64 = counts.iter().sum();
        counts.iter().map(|c| c / t).collect()
    };

    let mut rules = RuleSet::new();
    // interv12@1,2 cuts across pitch@1's cells, so the constraints overlap
    for (k, name) in ["pitch@1", "interv12@1,2"].iter().enumerate() {
        let f = parse_feature(name).unwrap();
        let part = table.partition(table.position(f).unwrap());
        rules
            .push(Rule {
                feature: f,
                target: RuleTarget::Unigram(pushforward(&raw, part)),
                learned_at: k + 1,
            })
            .unwrap();
    }
    let opts = SolveOptions {
        objective: Objective::Tsallis2,
        tol: 1e-10,
        max_sweeps: 50_000,
    };
    let student = solve_student_unigram(&table, &rules, opts).unwrap();
    assert!(student.stats.converged);

    // assemble the oracle's constraint rows: cells of both rules + total mass
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for rule in rules.rules() {
        let part = table.partition(table.position(rule.feature).unwrap());
        let RuleTarget::Unigram(target) = &rule.target else {
            unreachable!()
        };
        let (r, b) = partition_rows(part, target.mass());
        rows.extend(r);
        rhs.extend(b);
    }
    rows.push(vec![1.0; 8]);
    rhs.push(1.0);

    let oracle = min_norm_nonneg(&rows, &rhs).expect("feasible by construction");
    for (a, b) in student.p.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-5, "{:?} vs {:?}", student.p, oracle);
    }
    let ours: f64 = student.p.iter().map(|x| x * x).sum();
    let thei: f64 = oracle.iter().map(|x| x * x).sum();
    assert!(ours <= thei + 1e-8, "solver is not optimal");
}

#[test]
fn random_cell_constraints_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let n = rng.gen_range(3..=8);
        let raw: Vec<f64> = {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            let t: f64 = v.iter().sum();
            v.into_iter().map(|x| x / t).collect()
        };
        let k = rng.gen_range(1..=3);
        let mut constraints = Vec::new();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for _ in 0..k {
            let cells = rng.gen_range(2..=3.min(n));
            let cell_of: Vec<u32> = (0..n).map(|_| rng.gen_range(0..cells) as u32).collect();
            let mut target = vec![0.0; cells];
            for (i, &c) in cell_of.iter().enumerate() {
                target[c as usize] += raw[i];
            }
            let (r, b) = cell_rows(&cell_of, cells, &target);
            rows.extend(r);
            rhs.extend(b);
            constraints.push(musrover_core::student::MassConstraint { cell_of, target });
        }
        rows.push(vec![1.0; n]);
        rhs.push(1.0);

        let names: Vec<(String, Vec<String>)> = (0..k)
            .map(|i| (format!("c{i}"), Vec::new()))
            .collect();
        let opts = SolveOptions {
            objective: Objective::Tsallis2,
            tol: 1e-10,
            max_sweeps: 50_000,
        };
        let solved =
            musrover_core::student::solve_constrained(n, &constraints, &names, opts, None)
                .unwrap();
        assert!(solved.stats.converged);
        let oracle = min_norm_nonneg(&rows, &rhs).expect("feasible by construction");
        for (a, b) in solved.p.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-5);
        }
    }
}

#[test]
fn shannon_single_rule_matches_within_cell_uniform() {
    // with one partition constraint the max-entropy point spreads each
    // cell's mass uniformly, which is also the min-norm point
    let corpus = parse_columns(&[vec![
        [60, 55, 52, 48],
        [61, 55, 52, 48],
        [62, 55, 52, 48],
        [63, 55, 52, 48],
    ]]);
    let table = FeatureTable::build(&corpus.omega);
    let f = parse_feature("pitch12@1").unwrap();
    let part = table.partition(table.position(f).unwrap());
    let raw = [0.4, 0.3, 0.2, 0.1];
    let mut rules = RuleSet::new();
    rules
        .push(Rule {
            feature: f,
            target: RuleTarget::Unigram(pushforward(&raw, part)),
            learned_at: 1,
        })
        .unwrap();
    let mut solutions = Vec::new();
    for objective in [Objective::Tsallis2, Objective::Shannon] {
        let opts = SolveOptions {
            objective,
            ..SolveOptions::default()
        };
        solutions.push(solve_student_unigram(&table, &rules, opts).unwrap().p);
    }
    for (a, b) in solutions[0].iter().zip(&solutions[1]) {
        assert!((a - b).abs() < 1e-8);
    }
}
