use coevo_core::challenges::{
    build_env, default_spec, default_specs, evaluate_batch, evaluate_batch_sequential, move_target,
    run_episode, score_move, ChallengeId, FrameCapture, Goal, Placement,
};
use coevo_core::physics::BodyTag;
use coevo_core::shape::random_chain;
use coevo_core::{BrickChain, Vec2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 7;

fn chain(steps: &[i32]) -> BrickChain {
    BrickChain::from_steps(steps).unwrap()
}

fn score(id: ChallengeId, design: &BrickChain) -> f64 {
    run_episode(&default_spec(id), design, SEED, FrameCapture::Off)
        .unwrap()
        .score
}

fn bowl() -> BrickChain {
    chain(&[-6, 0, 6, 0, 0, 0, 6, 0])
}

fn twelve_gon() -> BrickChain {
    let mut steps = vec![0];
    steps.extend([2; 11]);
    chain(&steps)
}

#[test]
fn move_world_has_ground_and_design_only() {
    let env = build_env(&default_spec(ChallengeId::Move), &chain(&[0])).unwrap();
    assert_eq!(env.world.bodies.len(), 2);
    assert_eq!(env.world.bodies[env.design].tag, BodyTag::Design);
    assert!(!env.world.bodies[env.design].is_static());
}

#[test]
fn collect_balls_appear_on_schedule() {
    let spec = default_spec(ChallengeId::Collect);
    let mut env = build_env(&spec, &bowl()).unwrap();
    assert!(env.world.bodies[env.design].is_static());
    let before = env.world.bodies.len();
    assert!(env.spawn_due(0).unwrap().len() == 1);
    assert!(env.spawn_due(29).unwrap().is_empty());
    assert_eq!(env.spawn_due(30).unwrap().len(), 1);
    assert_eq!(env.world.bodies.len(), before + 2);
}

#[test]
fn protect_zone_is_a_sensor() {
    let env = build_env(&default_spec(ChallengeId::Protect), &chain(&[0])).unwrap();
    let zone = env.zone.clone().unwrap();
    let sensor = env
        .world
        .bodies
        .iter()
        .position(|b| b.tag == BodyTag::Sensor)
        .unwrap();
    assert!(!env.world.query_region(&zone).contains(&sensor));
    assert!(env
        .world
        .detect_contacts()
        .iter()
        .all(|m| m.body_pair.0 != sensor && m.body_pair.1 != sensor));
}

#[test]
fn scores_stay_in_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for id in ChallengeId::ALL {
        let spec = default_spec(id);
        for _ in 0..25 {
            let design = random_chain(&mut rng, 1, 32).unwrap();
            let r = run_episode(&spec, &design, SEED, FrameCapture::Off).unwrap();
            assert!((0.0..=1.0).contains(&r.score), "{id}: {}", r.score);
        }
    }
}

#[test]
fn episodes_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for id in ChallengeId::ALL {
        let spec = default_spec(id);
        for _ in 0..3 {
            let design = random_chain(&mut rng, 1, 32).unwrap();
            let a = run_episode(&spec, &design, SEED, FrameCapture::Off).unwrap();
            let b = run_episode(&spec, &design, SEED, FrameCapture::Off).unwrap();
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }
    }
}

#[test]
fn only_spawn_challenges_depend_on_seed() {
    let design = twelve_gon();
    for id in [ChallengeId::Move, ChallengeId::Cut] {
        let spec = default_spec(id);
        let a = run_episode(&spec, &design, 1, FrameCapture::Off).unwrap();
        let b = run_episode(&spec, &design, 99, FrameCapture::Off).unwrap();
        assert_eq!(a.score, b.score);
        assert_eq!(a.metrics, b.metrics);
    }
    let spec = default_spec(ChallengeId::Collect);
    let a = build_env(&spec, &bowl()).unwrap();
    let (mut x, mut y) = (a.clone(), a);
    x.jitter_spawns(1);
    y.jitter_spawns(2);
    assert_ne!(x.pending, y.pending);
}

#[test]
fn bowl_collects_more_than_bar() {
    assert!(score(ChallengeId::Collect, &bowl()) > score(ChallengeId::Collect, &chain(&[0; 8])));
}

#[test]
fn design_far_from_rain_collects_nothing() {
    let mut spec = default_spec(ChallengeId::Collect);
    spec.design_placement = Placement::Pinned {
        center: Vec2::new(15.0, 2.0),
    };
    let r = run_episode(&spec, &bowl(), SEED, FrameCapture::Off).unwrap();
    assert_eq!(r.score, 0.0);
    assert_eq!(r.metrics["balls_spawned"], 10.0);
}

#[test]
fn wall_blocks_every_projectile() {
    assert_eq!(score(ChallengeId::Protect, &chain(&[6, 0, 0])), 1.0);
}

#[test]
fn distant_decoy_blocks_nothing() {
    let mut spec = default_spec(ChallengeId::Protect);
    spec.design_placement = Placement::Pinned {
        center: Vec2::new(-15.0, 10.0),
    };
    let r = run_episode(&spec, &chain(&[0]), SEED, FrameCapture::Off).unwrap();
    assert_eq!(r.metrics["hits"], 10.0);
    assert_eq!(r.score, 0.0);
}

#[test]
fn polygon_rolls_further_than_bar() {
    assert!(score(ChallengeId::Move, &twelve_gon()) > score(ChallengeId::Move, &chain(&[0; 12])));
}

#[test]
fn resting_design_on_level_ground_scores_zero() {
    let mut spec = default_spec(ChallengeId::Move);
    if let Goal::Move { incline_angle, .. } = &mut spec.goal {
        *incline_angle = 0.0;
    }
    spec.arena[0].vertices = vec![
        Vec2::new(-20.0, -1.0),
        Vec2::new(20.0, -1.0),
        Vec2::new(20.0, 0.0),
        Vec2::new(-20.0, 0.0),
    ];
    spec.design_placement = Placement::Dropped {
        x: 0.0,
        surface_point: Vec2::ZERO,
        normal: Vec2::new(0.0, 1.0),
        clearance: 0.0,
    };
    let r = run_episode(&spec, &chain(&[0; 4]), SEED, FrameCapture::Off).unwrap();
    assert_eq!(r.score, 0.0);
}

#[test]
fn move_score_is_recomputable_from_frames() {
    let spec = default_spec(ChallengeId::Move);
    for design in [twelve_gon(), chain(&[0, 3, -2, 5])] {
        let r = run_episode(&spec, &design, SEED, FrameCapture::Every(1)).unwrap();
        let frames = r.frames.unwrap();
        assert_eq!(frames.len() as u64, spec.episode_steps + 1);
        let trajectory: Vec<Vec2> = frames
            .iter()
            .map(|f| f.bodies.iter().find(|b| b.tag == BodyTag::Design).unwrap().pos)
            .collect();
        let target = move_target(&spec, trajectory[0]).unwrap();
        assert_eq!(score_move(&trajectory, target).unwrap(), r.score);
    }
}

#[test]
fn blade_cuts_deeper_than_flat() {
    let spec = default_spec(ChallengeId::Cut);
    let blade = run_episode(&spec, &chain(&[-6, 0, 0, 0]), SEED, FrameCapture::Off).unwrap();
    let flat = run_episode(&spec, &chain(&[0, 0, 0, 0]), SEED, FrameCapture::Off).unwrap();
    assert!(blade.metrics["depth_reached"] > flat.metrics["depth_reached"]);
    // The blade passes the whole medium.
    assert_eq!(blade.score, 1.0);
}

#[test]
fn batch_matches_sequential() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let designs: Vec<BrickChain> = (0..6).map(|_| random_chain(&mut rng, 1, 12).unwrap()).collect();
    for spec in default_specs().values() {
        assert_eq!(
            evaluate_batch(spec, &designs, SEED),
            evaluate_batch_sequential(spec, &designs, SEED)
        );
    }
}

#[test]
fn frames_are_sampled_at_interval() {
    let spec = default_spec(ChallengeId::Cut);
    let r = run_episode(&spec, &chain(&[0]), SEED, FrameCapture::Every(2)).unwrap();
    let frames = r.frames.unwrap();
    assert_eq!(frames.len() as u64, spec.episode_steps / 2 + 1);
    assert_eq!(frames[0].t, 0.0);
}
