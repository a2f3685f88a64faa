mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swarmcl::experts::{generate_dataset, navigation_expert, passage_expert, ExpertConfig, GenerationConfig};
use swarmcl::world::{compute_adjacency, Task, Wall, WorldSpec};

#[test]
fn generation_is_deterministic() {
    let cfg = GenerationConfig::<f64>::new(Task::Navigation, 2, 3, 50, 7);
    let a = generate_dataset(&cfg).unwrap();
    let b = generate_dataset(&cfg).unwrap();
    assert_eq!(a, b);
    let bits = |d: &swarmcl::Dataset| {
        d.trajectories()
            .iter()
            .flat_map(|t| t.samples.iter().flat_map(|s| s.as_slice().iter().map(|v| v.to_bits())))
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn long_navigation_demonstrations_have_full_length() {
    let ds = generate_dataset(&GenerationConfig::<f64>::new(Task::Navigation, 6, 10, 200, 3)).unwrap();
    assert_eq!(ds.len(), 10);
    for t in ds.trajectories() {
        assert_eq!(t.samples.len(), 201);
        for s in &t.samples {
            let a = compute_adjacency(s, &t.world);
            for i in 0..s.n() {
                assert!(a.get(i, i));
                for j in 0..s.n() {
                    assert_eq!(a.get(i, j), a.get(j, i));
                }
            }
        }
    }
}

#[test]
fn passage_starts_below_and_goals_above() {
    let ds = generate_dataset(&GenerationConfig::<f64>::new(Task::Passage, 4, 10, 300, 11)).unwrap();
    let wall = ds.world().wall.unwrap();
    let (lower, upper) = wall.faces(0.0);
    for t in ds.trajectories() {
        assert!(t.samples[0].positions().iter().all(|p| p[1] < lower));
        assert!(t.world.goals.iter().all(|g| g[1] > upper));
        // the wall is never penetrated outside the gap
        let r = t.world.robot_radius;
        for s in &t.samples {
            for p in s.positions() {
                let in_slab = p[1] > lower - r + 1e-12 && p[1] < upper + r - 1e-12;
                if in_slab {
                    assert!((p[0] - wall.gap_center).abs() <= wall.gap_half_width - r + 1e-12, "{p:?}");
                }
            }
        }
    }
}

#[test]
fn expert_controls_are_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = ExpertConfig::default();
    for _ in 0..500 {
        let x = common::random_state(&mut rng, 5, 2.3);
        let goals = common::spaced_positions(&mut rng, 5, 2.3, 0.1);
        let nav = WorldSpec::navigation(goals.clone());
        let pas = WorldSpec::passage(Wall::centered(0.4), goals);
        for u in [navigation_expert(&x, &nav, &cfg).unwrap(), passage_expert(&x, &pas, &cfg).unwrap()] {
            assert!(u.iter().all(|v| v.abs() <= 1.0 && v.is_finite()));
        }
    }
}

#[test]
fn infeasible_generation_is_reported() {
    let cfg = GenerationConfig::<f64>::new(Task::Navigation, 3, 2, 2, 1);
    assert!(matches!(generate_dataset(&cfg), Err(swarmcl::Error::Infeasible(_))));
}
