//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::io::{BufRead, BufReader};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Child, Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use coevo_core::challenges::{
    default_spec, evaluate_batch, move_target, run_episode, score_move, ChallengeId, FrameCapture, Goal,
    Placement, DEFAULT_SEED,
};
use coevo_core::evolve::{
    init_run, inject, next_generation, random_action, rng_fingerprint, EvoParams, RunState,
};
use coevo_core::physics::{BodyTag, Material, Polygon, RigidBody, World, DEFAULT_DT};
use coevo_core::shape::{genotype_distance, random_chain, replay, ActionLog};
use coevo_core::{Action, ActorId, Angle, BrickChain, ChainEnd, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn chain(steps: &[i32]) -> BrickChain {
    BrickChain::from_steps(steps).unwrap()
}

fn bowl8() -> BrickChain {
    chain(&[-6, 0, 6, 0, 0, 0, 6, 0])
}

fn polygon12() -> BrickChain {
    let mut steps = vec![0];
    steps.extend([2; 11]);
    chain(&steps)
}

fn score(id: ChallengeId, design: &BrickChain, seed: u64) -> f64 {
    run_episode(&default_spec(id), design, seed, FrameCapture::Off)
        .unwrap()
        .score
}

fn evolve(id: ChallengeId, params: EvoParams, generations: u64) -> RunState {
    let mut state = init_run(default_spec(id), params).unwrap();
    for _ in 0..generations {
        state = next_generation(state).unwrap();
    }
    state
}

fn determinism() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for id in ChallengeId::ALL {
        let spec = default_spec(id);
        for i in 0..20 {
            let design = random_chain(&mut rng, 1, 12).unwrap();
            let seed = rng.random::<u64>();
            let a = run_episode(&spec, &design, seed, FrameCapture::Off).unwrap();
            let b = run_episode(&spec, &design, seed, FrameCapture::Off).unwrap();
            let (a, b) = (serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
            ensure!(a == b, "{id} design {i}: {a} != {b}");
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("160 result pairs byte-identical in {:.1}s (< 60s)", elapsed.as_secs_f64()))
}

fn score_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut ranges = Vec::new();
    for id in ChallengeId::ALL {
        let designs: Vec<BrickChain> = (0..200).map(|_| random_chain(&mut rng, 1, 16).unwrap()).collect();
        let scores: Vec<f64> = evaluate_batch(&default_spec(id), &designs, DEFAULT_SEED)
            .into_iter()
            .map(|r| r.unwrap().score)
            .collect();
        ensure!(
            scores.iter().all(|s| (0.0..=1.0).contains(s)),
            "{id}: score outside [0,1]"
        );
        let lo = scores.iter().copied().fold(f64::MAX, f64::min);
        let hi = scores.iter().copied().fold(f64::MIN, f64::max);
        ranges.push(format!("{id} [{lo:.3},{hi:.3}]"));
    }

    // Move: a design that never leaves its start.
    let spec = default_spec(ChallengeId::Move);
    let start = Vec2::new(0.0, 1.0);
    let still = vec![start; spec.episode_steps as usize + 1];
    let target = move_target(&spec, start).unwrap();
    ensure!(score_move(&still, target).unwrap() == 0.0, "motionless trajectory scores nonzero");
    let mut level = spec.clone();
    if let Goal::Move { incline_angle, .. } = &mut level.goal {
        *incline_angle = 0.0;
    }
    level.arena[0].vertices = vec![
        Vec2::new(-20.0, -1.0),
        Vec2::new(20.0, -1.0),
        Vec2::new(20.0, 0.0),
        Vec2::new(-20.0, 0.0),
    ];
    level.design_placement = Placement::Dropped {
        x: 0.0,
        surface_point: Vec2::ZERO,
        normal: Vec2::new(0.0, 1.0),
        clearance: 0.0,
    };
    let resting = run_episode(&level, &chain(&[0; 4]), DEFAULT_SEED, FrameCapture::Off).unwrap();
    ensure!(resting.score == 0.0, "resting bar scored {}", resting.score);

    // Collect: designs that hold no ball.
    let hook = run_episode(&default_spec(ChallengeId::Collect), &chain(&[6, -6]), DEFAULT_SEED, FrameCapture::Off).unwrap();
    ensure!(hook.score == 0.0, "hook scored {}", hook.score);
    let mut away = default_spec(ChallengeId::Collect);
    away.design_placement = Placement::Pinned {
        center: Vec2::new(15.0, 2.0),
    };
    let far = run_episode(&away, &bowl8(), DEFAULT_SEED, FrameCapture::Off).unwrap();
    ensure!(far.score == 0.0, "distant bowl scored {}", far.score);
    Ok(format!("800 scores in [0,1] ({}); 4 boundary designs score exactly 0", ranges.join(", ")))
}

fn unit_box(center: Vec2, material: Material) -> RigidBody {
    RigidBody::dynamic(vec![Polygon::rect(center, 0.5, 0.5).unwrap()], 1.0, material, BodyTag::Ball).unwrap()
}

fn physics_oracles() -> Outcome {
    // Free fall: v_k = sum of g dt, y_k = y_0 + sum of v_i dt, bit for bit.
    let mut world = World::default();
    world.add_body(unit_box(Vec2::new(0.0, 100.0), Material::new(0.5, 0.0)));
    let (mut v, mut y) = (0.0, 100.0);
    for _ in 0..120 {
        v += world.gravity.y * DEFAULT_DT;
        y += v * DEFAULT_DT;
        world.step();
    }
    let body = &world.bodies[0];
    ensure!(body.linear_velocity.y == v && body.position.y == y, "free fall drifted: {} vs {v}", body.linear_velocity.y);

    // Equal masses, restitution 1: velocities swap.
    let mut world = World::new(Vec2::ZERO, DEFAULT_DT, 10);
    let bouncy = Material::new(0.0, 1.0);
    let mut a = unit_box(Vec2::new(-1.0, 0.0), bouncy);
    let mut b = unit_box(Vec2::new(1.0, 0.0), bouncy);
    a.linear_velocity = Vec2::new(1.0, 0.0);
    b.linear_velocity = Vec2::new(-1.0, 0.0);
    world.add_body(a);
    world.add_body(b);
    for _ in 0..120 {
        world.step();
    }
    let (va, vb) = (world.bodies[0].linear_velocity.x, world.bodies[1].linear_velocity.x);
    let swap_err = ((va + 1.0).abs()).max((vb - 1.0).abs());
    ensure!(swap_err <= 0.02, "swap error {swap_err}");

    // Zero gravity: total momentum conserved through a glancing collision.
    let mut world = World::new(Vec2::ZERO, DEFAULT_DT, 10);
    let mut a = RigidBody::dynamic(vec![Polygon::rect(Vec2::new(-2.0, 0.1), 0.5, 0.3).unwrap()], 2.0, bouncy, BodyTag::Ball).unwrap();
    let mut b = RigidBody::dynamic(vec![Polygon::regular(Vec2::new(1.0, -0.2), 16, 0.4).unwrap()], 1.0, bouncy, BodyTag::Ball).unwrap();
    a.linear_velocity = Vec2::new(2.0, 0.3);
    b.linear_velocity = Vec2::new(-1.5, 0.0);
    b.angular_velocity = 1.0;
    world.add_body(a);
    world.add_body(b);
    let momentum = |w: &World| w.bodies.iter().fold(Vec2::ZERO, |acc, b| acc + b.linear_velocity * b.mass());
    let before = momentum(&world);
    for _ in 0..180 {
        world.step();
    }
    ensure!(world.bodies[0].linear_velocity != Vec2::new(2.0, 0.3), "bodies never collided");
    let drift = (momentum(&world) - before).length() / before.length();
    ensure!(drift < 1e-6, "momentum drift {drift}");

    // Resting box: penetration within slop from step 300 on.
    let mut world = World::default();
    let grippy = Material::new(0.6, 0.2);
    world.add_body(RigidBody::fixed(vec![Polygon::rect(Vec2::new(0.0, -0.5), 20.0, 0.5).unwrap()], grippy, BodyTag::Ground).unwrap());
    world.add_body(unit_box(Vec2::new(0.0, 2.0), grippy));
    let slop = world.config.slop;
    let mut worst: f64 = 0.0;
    for step in 1..=600 {
        world.step();
        if step >= 300 {
            let pen = world.detect_contacts().iter().map(|m| m.penetration).fold(0.0, f64::max);
            worst = worst.max(pen);
        }
    }
    ensure!(worst <= slop, "penetration {worst} > slop {slop}");
    Ok(format!(
        "free fall exact; swap error {swap_err:.2e} (<= 2%); momentum drift {drift:.2e} (< 1e-6); rest penetration {worst:.2e} <= slop {slop}"
    ))
}

fn replay_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let actors = [ActorId::human("h"), ActorId::agent("a")];
    let mut total = 0;
    for case in 0..500 {
        let mut log = ActionLog::new(format!("s-{case}"), "move");
        let mut current: Option<BrickChain> = None;
        for _ in 0..rng.random_range(1..=40) {
            let action = match &current {
                None => Action::Add {
                    end: if rng.random_bool(0.5) { ChainEnd::Head } else { ChainEnd::Tail },
                    rel_angle: Angle::random(&mut rng),
                },
                Some(c) => random_action(&mut rng, c, EvoParams::with_seed(0).mutation_weights),
            };
            let actor = actors[rng.random_range(0..2)].clone();
            current = log.append(current.as_ref(), actor, action).unwrap().1;
        }
        total += log.entries.len();
        let stored: ActionLog = serde_json::from_str(&serde_json::to_string(&log).unwrap()).unwrap();
        let rebuilt = replay(&stored).unwrap();
        ensure!(rebuilt == current, "case {case}: replay diverged");
    }
    Ok(format!("500 logs ({total} actions) replay to the incremental chain exactly"))
}

fn elitism(runs: &mut Vec<RunState>) -> Outcome {
    let mut improved = 0;
    for seed in 1..=20 {
        let params = EvoParams {
            population_size: 16,
            ..EvoParams::with_seed(seed)
        };
        let state = evolve(ChallengeId::Move, params, 20);
        let bests: Vec<f64> = state.history.iter().map(|h| h.best).collect();
        ensure!(bests.len() == 21, "seed {seed}: {} history rows", bests.len());
        ensure!(bests.windows(2).all(|w| w[1] >= w[0]), "seed {seed}: best decreased {bests:?}");
        if bests[20] > bests[0] {
            improved += 1;
        }
        runs.push(state);
    }
    ensure!(improved >= 19, "improved in {improved}/20 runs (need >= 19)");
    Ok(format!("best non-decreasing in 20/20 runs; improved in {improved}/20 (>= 19)"))
}

fn bowl_beats_bar() -> Outcome {
    let bowl = score(ChallengeId::Collect, &bowl8(), DEFAULT_SEED);
    let bar = score(ChallengeId::Collect, &chain(&[0; 8]), DEFAULT_SEED);
    ensure!(bowl > bar, "bowl {bowl} <= bar {bar}");
    Ok(format!("collect, seed {DEFAULT_SEED}: bowl {bowl:.3} > bar {bar:.3}"))
}

fn movers(runs: &mut Vec<RunState>) -> Outcome {
    let started = Instant::now();
    let wheel = score(ChallengeId::Move, &polygon12(), DEFAULT_SEED);
    let bar = score(ChallengeId::Move, &chain(&[0; 12]), DEFAULT_SEED);
    ensure!(wheel > bar, "12-gon {wheel} <= bar {bar}");
    let params = EvoParams {
        population_size: 32,
        ..EvoParams::with_seed(DEFAULT_SEED)
    };
    let state = evolve(ChallengeId::Move, params, 40);
    let evolved = score(ChallengeId::Move, &state.best_ever.genotype, DEFAULT_SEED);
    let elapsed = started.elapsed();
    runs.push(state);
    ensure!(evolved > bar, "evolved {evolved} <= bar {bar}");
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    Ok(format!(
        "move: 12-gon {wheel:.3} > bar {bar:.3}; evolved (pop 32, 40 gens) {evolved:.3} > bar; {:.1}s (< 300s)",
        elapsed.as_secs_f64()
    ))
}

fn injection(runs: &mut Vec<RunState>) -> Outcome {
    let params = EvoParams {
        population_size: 16,
        ..EvoParams::with_seed(77)
    };
    let before = evolve(ChallengeId::Move, params, 5);
    let candidate = polygon12();
    let pre = run_episode(&before.challenge, &candidate, before.best_ever.eval_seed, FrameCapture::Off)
        .unwrap()
        .score;
    let old_best = before.best_ever.fitness.unwrap();
    ensure!(pre > old_best, "candidate {pre} does not beat best {old_best}");

    let after = inject(before.clone(), Some(candidate), ActorId::human("tester")).unwrap();
    ensure!(after.best_ever.fitness == Some(pre), "best_ever is {:?}, expected {pre}", after.best_ever.fitness);
    ensure!(after.history.last().unwrap().best == pre, "history not updated");
    ensure!(rng_fingerprint(&after) == rng_fingerprint(&before), "injection touched the generator");

    // Undo the slot swap: the continuation must match the uninjected run draw for draw.
    let slot = (0..after.population.len())
        .find(|&i| after.population[i] != before.population[i])
        .unwrap();
    let mut restored = after.clone();
    restored.population[slot] = before.population[slot].clone();
    let (mut x, mut y) = (before, restored);
    for _ in 0..3 {
        x = next_generation(x).unwrap();
        y = next_generation(y).unwrap();
        let gx: Vec<_> = x.population.iter().map(|i| &i.genotype).collect();
        let gy: Vec<_> = y.population.iter().map(|i| &i.genotype).collect();
        ensure!(gx == gy && rng_fingerprint(&x) == rng_fingerprint(&y), "continuations diverged");
    }
    let mut continued = after;
    for _ in 0..3 {
        continued = next_generation(continued).unwrap();
    }
    ensure!(continued.best_ever.fitness.unwrap() >= pre, "best_ever fell after injection");
    runs.push(continued);
    Ok(format!("best_ever {old_best:.3} -> {pre:.3} on injection; generator untouched; 3 continued generations identical"))
}

fn archive_soundness(runs: &[RunState]) -> Outcome {
    let mut members = 0;
    for state in runs {
        let p = &state.params;
        for (i, a) in state.archive.iter().enumerate() {
            let stored = a.fitness.ok_or("unevaluated archive member")?;
            let rescored = run_episode(&state.challenge, &a.genotype, a.eval_seed, FrameCapture::Off)
                .unwrap()
                .score;
            ensure!(stored == rescored, "{}: stored {stored} != rescored {rescored}", state.run_id);
            ensure!(rescored >= p.archive_score_min, "{}: {rescored} < {}", state.run_id, p.archive_score_min);
            for b in &state.archive[i + 1..] {
                let d = genotype_distance(&a.genotype, &b.genotype);
                ensure!(d >= p.archive_distance_min, "{}: pair distance {d}", state.run_id);
            }
            members += 1;
        }
    }
    ensure!(members > 0, "archives are empty");
    Ok(format!("{} runs, {members} archive members re-scored and pairwise checked", runs.len()))
}

struct Service {
    child: Child,
    base: String,
    agent: ureq::Agent,
    schema: Value,
    codes_seen: std::collections::BTreeSet<String>,
    checked: usize,
    _dir: tempfile::TempDir,
}

impl Drop for Service {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Service {
    fn start() -> Self {
        let dir = tempfile::TempDir::new().unwrap();
        let mut child = Command::new(env!("CARGO_BIN_EXE_coevo"))
            .env_remove("COEVO_DATA_DIR")
            .arg("--data-dir")
            .arg(dir.path())
            .args(["serve", "--addr", "127.0.0.1:0"])
            .stdout(Stdio::piped())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let base = line.trim().strip_prefix("listening on ").unwrap().to_string();
        Service {
            child,
            base,
            agent: ureq::Agent::config_builder().http_status_as_error(false).build().into(),
            schema: serde_json::from_str(coevo_service::API_SCHEMA).unwrap(),
            codes_seen: Default::default(),
            checked: 0,
            _dir: dir,
        }
    }

    fn valid(&mut self, def: &str, value: &Value) -> Result<(), String> {
        let mut schema = self.schema.clone();
        schema["$ref"] = json!(format!("#/$defs/{def}"));
        let validator = jsonschema::validator_for(&schema).map_err(|e| e.to_string())?;
        let errors: Vec<String> = validator.iter_errors(value).map(|e| e.to_string()).collect();
        ensure!(errors.is_empty(), "{def} invalid: {errors:?}");
        self.checked += 1;
        Ok(())
    }

    fn call(&mut self, method: &str, path: &str, body: Option<Value>) -> Result<(u16, Value), String> {
        let url = format!("{}{path}", self.base);
        let resp = match (method, body) {
            ("GET", _) => self.agent.get(&url).call(),
            (_, Some(b)) => self.agent.post(&url).send_json(&b),
            (_, None) => self.agent.post(&url).send_empty(),
        };
        let mut resp = resp.map_err(|e| format!("{method} {path}: {e}"))?;
        let status = resp.status().as_u16();
        let value: Value = resp.body_mut().read_json().map_err(|e| format!("{method} {path}: {e}"))?;
        Ok((status, value))
    }

    /// Expects a success status and a body matching `def`.
    fn ok(&mut self, method: &str, path: &str, body: Option<Value>, status: u16, def: &str) -> Result<Value, String> {
        let (got, value) = self.call(method, path, body)?;
        ensure!(got == status, "{method} {path}: status {got}, expected {status}: {value}");
        self.valid(def, &value)?;
        Ok(value)
    }

    /// Expects an error body with the given code and its mapped status.
    fn err(&mut self, method: &str, path: &str, body: Option<Value>, code: &str) -> Result<(), String> {
        let (got, value) = self.call(method, path, body)?;
        self.valid("ApiError", &value)?;
        ensure!(value["code"] == code, "{method} {path}: code {}, expected {code}", value["code"]);
        ensure!(value["http_status"] == got, "{method} {path}: status mismatch");
        self.codes_seen.insert(code.to_string());
        Ok(())
    }

    fn wait_idle(&mut self, run: &str, generation: u64) -> Result<Value, String> {
        let deadline = Instant::now() + Duration::from_secs(120);
        loop {
            let view = self.ok("GET", &format!("/v1/runs/{run}"), None, 200, "Run")?;
            if view["generation"].as_u64() >= Some(generation) && view["busy"] == false {
                return Ok(view);
            }
            ensure!(Instant::now() < deadline, "run {run} stalled");
            std::thread::sleep(Duration::from_millis(20));
        }
    }
}

fn api_contract() -> Outcome {
    let mut s = Service::start();
    let actor = json!({"kind": "human", "id": "acc"});
    let bar = json!({"angles": [0.0, 0.0, 0.0]});

    s.ok("GET", "/v1/health", None, 200, "Health")?;
    let list = s.ok("GET", "/v1/challenges", None, 200, "ChallengeList")?;
    let mut ids: Vec<&str> = list.as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    ids.sort();
    ensure!(ids == ["collect", "cut", "move", "protect"], "challenges {ids:?}");
    for id in ["collect", "protect", "move", "cut"] {
        s.ok("GET", &format!("/v1/challenges/{id}"), None, 200, "ChallengeSpec")?;
    }
    s.err("GET", "/v1/challenges/nope", None, "unknown_challenge")?;

    let result = s.ok("POST", "/v1/evaluate", Some(json!({"challenge_id": "collect", "design": bar, "frames": true})), 200, "EpisodeResult")?;
    let frames_ref = result["frames_ref"].as_str().ok_or("no frames_ref")?.to_string();
    s.ok("GET", &frames_ref, None, 200, "Frames")?;
    s.err("GET", "/v1/frames/f-000000000000000000000000", None, "unknown_frames")?;
    s.err("POST", "/v1/evaluate", Some(json!({"challenge_id": "move", "design": {"angles": [0.1]}})), "invalid_design")?;
    s.err("POST", "/v1/evaluate", Some(json!({"challenge_id": "move"})), "invalid_request")?;

    let created = s.ok("POST", "/v1/sessions", Some(json!({"actor": actor, "challenge_id": "move"})), 201, "SessionCreated")?;
    let sid = created["session_id"].as_str().unwrap().to_string();
    for action in [
        json!({"type": "add", "end": "tail", "rel_angle": 0.0}),
        json!({"type": "add", "end": "head", "rel_angle": std::f64::consts::FRAC_PI_6}),
        json!({"type": "rotate", "index": 0, "new_rel_angle": 0.0}),
        json!({"type": "remove", "end": "tail"}),
    ] {
        s.ok("POST", &format!("/v1/sessions/{sid}/actions"), Some(json!({"action": action})), 200, "ActionApplied")?;
    }
    s.err("POST", &format!("/v1/sessions/{sid}/actions"), Some(json!({"action": {"type": "rotate", "index": 7, "new_rel_angle": 0.0}})), "invalid_action")?;
    s.ok("GET", &format!("/v1/sessions/{sid}"), None, 200, "Session")?;
    let replayed = s.ok("GET", &format!("/v1/sessions/{sid}/replay?upto=1"), None, 200, "Replay")?;
    ensure!(replayed["chain"]["angles"].as_array().unwrap().len() == 2, "replay prefix wrong");
    s.err("GET", &format!("/v1/sessions/{sid}/replay?upto=50"), None, "seq_out_of_range")?;
    s.ok("POST", &format!("/v1/sessions/{sid}/evaluate"), Some(json!({})), 200, "SessionEvaluated")?;
    s.err("GET", "/v1/sessions/s-none", None, "unknown_session")?;

    let agent = json!({"kind": "agent", "id": "acc-agent"});
    s.ok("POST", "/v1/leaderboard/move", Some(json!({"actor": agent, "design": bar})), 200, "Submitted")?;
    let board = s.ok("GET", "/v1/leaderboard/move", None, 200, "Leaderboard")?;
    ensure!(board.as_array().unwrap().len() == 2, "leaderboard has {} entries", board.as_array().unwrap().len());

    let params = json!({"population_size": 8, "master_seed": 3});
    let run = s.ok("POST", "/v1/runs", Some(json!({"challenge_id": "move", "params": params})), 201, "Run")?;
    let rid = run["run_id"].as_str().unwrap().to_string();
    s.ok("POST", &format!("/v1/runs/{rid}/advance"), Some(json!({"generations": 2})), 202, "Run")?;
    s.wait_idle(&rid, 2)?;
    s.ok("GET", "/v1/runs", None, 200, "RunList")?;
    s.ok("POST", &format!("/v1/runs/{rid}/inject"), Some(json!({"design": bar, "actor": actor})), 200, "Injected")?;
    s.ok("GET", &format!("/v1/runs/{rid}/archive"), None, 200, "Archive")?;
    s.ok("POST", &format!("/v1/runs/{rid}/pause"), None, 200, "Run")?;
    s.err("POST", &format!("/v1/runs/{rid}/pause"), None, "illegal_transition")?;
    s.ok("POST", &format!("/v1/runs/{rid}/resume"), None, 200, "Run")?;
    s.ok("POST", &format!("/v1/runs/{rid}/stop"), None, 200, "Run")?;
    s.err("POST", &format!("/v1/runs/{rid}/advance"), Some(json!({"generations": 1})), "run_done")?;
    s.err("GET", "/v1/runs/r-none", None, "unknown_run")?;
    s.err("POST", "/v1/runs", Some(json!({"challenge_id": "move", "params": {"population_size": 1, "master_seed": 0}})), "invalid_params")?;
    s.err("GET", "/v1/unknown", None, "not_found")?;

    let closed: Vec<String> = coevo_service::ErrorCode::ALL.iter().map(|c| c.as_str().to_string()).collect();
    let listed: Vec<String> = s.schema["$defs"]["ApiError"]["properties"]["code"]["enum"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    ensure!(closed == listed, "schema code set differs from server");
    ensure!(s.codes_seen.iter().all(|c| closed.contains(c)), "code outside closed set");
    Ok(format!(
        "19 routes exercised; {} bodies schema-valid; {} of {} error codes observed; 4 challenges listed",
        s.checked,
        s.codes_seen.len(),
        closed.len()
    ))
}

fn report(name: &str, check: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
        let msg = panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into());
        Err(msg)
    });
    let secs = started.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("PASS  {name}: {detail} [{secs:.1}s]");
            true
        }
        Err(detail) => {
            println!("FAIL  {name}: {detail} [{secs:.1}s]");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut runs = Vec::new();
    let results = [
        report("determinism", determinism),
        report("score-bounds", score_bounds),
        report("physics-oracles", physics_oracles),
        report("replay-fidelity", replay_fidelity),
        report("elitism", || elitism(&mut runs)),
        report("bowl-vs-bar", bowl_beats_bar),
        report("movers", || movers(&mut runs)),
        report("injection", || injection(&mut runs)),
        report("archive-soundness", || archive_soundness(&runs)),
        report("api-contract", api_contract),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
