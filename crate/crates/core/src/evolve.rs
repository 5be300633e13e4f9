//! Generational evolutionary search over brick chains.
//!
//! Variation uses the same [`Action`] vocabulary as human editors, so every
//! mutation is an edit a person could have made. Human designs can be
//! injected into a live run without disturbing its random stream.

use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::challenges::{evaluate_batch, ChallengeError, ChallengeSpec};
use crate::shape::{
    apply_action, genotype_distance, random_chain, Action, ActorId, Angle, Brick, BrickChain,
    ChainEnd, ShapeError, MAX_BRICKS,
};

pub const FORMAT_VERSION: u32 = 1;
/// Chain lengths drawn for the initial population.
pub const INIT_LENGTHS: (usize, usize) = (1, 8);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolveError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("run is done")]
    RunDone,
    #[error("design must contain at least one brick")]
    EmptyChain,
    #[error("individual has not been evaluated")]
    Unevaluated,
    #[error("cannot {command} a run that is {from}")]
    IllegalTransition { from: RunStatus, command: RunCommand },
    #[error("unsupported run format version {0}")]
    UnsupportedFormat(u32),
    #[error(transparent)]
    Challenge(#[from] ChallengeError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Random,
    Mutation,
    Crossover,
    Injected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genotype: BrickChain,
    /// `None` until evaluated.
    pub fitness: Option<f64>,
    pub origin: Origin,
    pub eval_seed: u64,
    pub design_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<ActorId>,
}

impl Individual {
    pub fn new(genotype: BrickChain, origin: Origin, eval_seed: u64) -> Self {
        Self {
            design_hash: genotype.content_hash(),
            genotype,
            fitness: None,
            origin,
            eval_seed,
            actor: None,
        }
    }

    pub fn fitness_or_err(&self) -> Result<f64, EvolveError> {
        self.fitness.ok_or(EvolveError::Unevaluated)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationWeights {
    pub add: f64,
    pub remove: f64,
    pub rotate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: u32,
    pub max: u32,
}

fn default_population() -> usize {
    32
}
fn default_k() -> usize {
    3
}
fn default_elites() -> usize {
    1
}
fn default_p_crossover() -> f64 {
    0.5
}
fn default_weights() -> MutationWeights {
    MutationWeights {
        add: 1.0,
        remove: 1.0,
        rotate: 1.0,
    }
}
fn default_mutations() -> CountRange {
    CountRange { min: 1, max: 3 }
}
fn default_score_min() -> f64 {
    0.5
}
fn default_distance_min() -> f64 {
    1.0
}

/// Search parameters. Everything except `master_seed` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvoParams {
    #[serde(default = "default_population")]
    pub population_size: usize,
    #[serde(default = "default_k")]
    pub tournament_k: usize,
    #[serde(default = "default_elites")]
    pub elite_count: usize,
    #[serde(default = "default_p_crossover")]
    pub p_crossover: f64,
    #[serde(default = "default_weights")]
    pub mutation_weights: MutationWeights,
    #[serde(default = "default_mutations")]
    pub mutations_per_child: CountRange,
    #[serde(default = "default_score_min")]
    pub archive_score_min: f64,
    #[serde(default = "default_distance_min")]
    pub archive_distance_min: f64,
    pub master_seed: u64,
}

impl EvoParams {
    pub fn with_seed(master_seed: u64) -> Self {
        Self {
            population_size: default_population(),
            tournament_k: default_k(),
            elite_count: default_elites(),
            p_crossover: default_p_crossover(),
            mutation_weights: default_weights(),
            mutations_per_child: default_mutations(),
            archive_score_min: default_score_min(),
            archive_distance_min: default_distance_min(),
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<(), EvolveError> {
        let bad = |m: &str| Err(EvolveError::InvalidParams(m.to_string()));
        if self.population_size < 2 {
            return bad("population_size must be at least 2");
        }
        if self.elite_count < 1 || self.elite_count >= self.population_size {
            return bad("elite_count must be in [1, population_size)");
        }
        if self.tournament_k < 1 {
            return bad("tournament_k must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.p_crossover) {
            return bad("p_crossover must be in [0, 1]");
        }
        let w = self.mutation_weights;
        let weights = [w.add, w.remove, w.rotate];
        if weights.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
            return bad("mutation weights must be non-negative and not all zero");
        }
        if self.mutations_per_child.min > self.mutations_per_child.max {
            return bad("mutations_per_child min exceeds max");
        }
        if !(self.archive_score_min.is_finite() && self.archive_distance_min.is_finite()) {
            return bad("archive thresholds must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Paused,
    Done,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Running => "running",
            RunStatus::Paused => "paused",
            RunStatus::Done => "done",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunCommand {
    Pause,
    Resume,
    Stop,
}

impl fmt::Display for RunCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunCommand::Pause => "pause",
            RunCommand::Resume => "resume",
            RunCommand::Stop => "stop",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub generation: u64,
    pub best: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub format_version: u32,
    pub run_id: String,
    pub challenge: ChallengeSpec,
    pub params: EvoParams,
    pub generation: u64,
    pub population: Vec<Individual>,
    pub best_ever: Individual,
    pub archive: Vec<Individual>,
    #[serde(with = "rng_hex")]
    pub rng_state: ChaCha8Rng,
    pub status: RunStatus,
    pub history: Vec<HistoryRow>,
}

/// ChaCha8 state as hex: 32-byte seed, 8-byte stream, 16-byte word position.
mod rng_hex {
    use super::*;

    pub fn encode(rng: &ChaCha8Rng) -> String {
        let mut bytes = rng.get_seed().to_vec();
        bytes.extend(rng.get_stream().to_le_bytes());
        bytes.extend(rng.get_word_pos().to_le_bytes());
        hex::encode(bytes)
    }

    pub fn decode(s: &str) -> Result<ChaCha8Rng, String> {
        let bytes = hex::decode(s).map_err(|e| e.to_string())?;
        if bytes.len() != 56 {
            return Err(format!("rng state must be 56 bytes, got {}", bytes.len()));
        }
        let seed: [u8; 32] = bytes[..32].try_into().expect("length checked");
        let stream = u64::from_le_bytes(bytes[32..40].try_into().expect("length checked"));
        let pos = u128::from_le_bytes(bytes[40..56].try_into().expect("length checked"));
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }

    pub fn serialize<S: Serializer>(rng: &ChaCha8Rng, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&encode(rng))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ChaCha8Rng, D::Error> {
        let s = String::deserialize(d)?;
        decode(&s).map_err(serde::de::Error::custom)
    }
}

/// Hex form of the run's generator state, as stored in `rng_state`.
pub fn rng_fingerprint(state: &RunState) -> String {
    rng_hex::encode(&state.rng_state)
}

/// The evaluation seed shared by every individual of a run.
pub fn eval_seed_for(master_seed: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(1);
    rng.next_u64()
}

fn evaluate(spec: &ChallengeSpec, individuals: &mut [Individual]) -> Result<(), EvolveError> {
    let pending: Vec<usize> = (0..individuals.len())
        .filter(|&i| individuals[i].fitness.is_none())
        .collect();
    if pending.is_empty() {
        return Ok(());
    }
    let seed = individuals[pending[0]].eval_seed;
    let designs: Vec<BrickChain> = pending.iter().map(|&i| individuals[i].genotype.clone()).collect();
    for (i, result) in pending.into_iter().zip(evaluate_batch(spec, &designs, seed)) {
        individuals[i].fitness = Some(result?.score);
    }
    Ok(())
}

fn population_stats(population: &[Individual]) -> (f64, f64) {
    let fits: Vec<f64> = population.iter().filter_map(|i| i.fitness).collect();
    let best = fits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = fits.iter().sum::<f64>() / fits.len().max(1) as f64;
    (best, mean)
}

/// Index of the fittest individual; ties go to the lowest index.
fn best_index(population: &[Individual]) -> usize {
    let mut best = 0;
    for (i, ind) in population.iter().enumerate() {
        if ind.fitness > population[best].fitness {
            best = i;
        }
    }
    best
}

/// Index of the least fit individual; ties go to the lowest index.
fn worst_index(population: &[Individual]) -> usize {
    let mut worst = 0;
    for (i, ind) in population.iter().enumerate() {
        if ind.fitness < population[worst].fitness {
            worst = i;
        }
    }
    worst
}

fn record_best(state: &mut RunState, candidate: &Individual) {
    if candidate.fitness > state.best_ever.fitness {
        state.best_ever = candidate.clone();
    }
}

/// Offers `candidate` to the archive; returns whether the archive changed.
pub fn archive_update(
    archive: &mut Vec<Individual>,
    candidate: &Individual,
    score_min: f64,
    distance_min: f64,
) -> Result<bool, EvolveError> {
    let fitness = candidate.fitness_or_err()?;
    if fitness < score_min {
        return Ok(false);
    }
    let close: Vec<usize> = archive
        .iter()
        .enumerate()
        .filter(|(_, m)| genotype_distance(&m.genotype, &candidate.genotype) < distance_min)
        .map(|(i, _)| i)
        .collect();
    match close.as_slice() {
        [] => {
            archive.push(candidate.clone());
            Ok(true)
        }
        [only] if archive[*only].fitness.is_some_and(|f| fitness > f) => {
            archive[*only] = candidate.clone();
            Ok(true)
        }
        _ => Ok(false),
    }
}

/// Creates and evaluates a random initial population.
pub fn init_run(challenge: ChallengeSpec, params: EvoParams) -> Result<RunState, EvolveError> {
    params.validate()?;
    challenge.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.master_seed);
    let eval_seed = eval_seed_for(params.master_seed);
    let mut population = (0..params.population_size)
        .map(|_| {
            random_chain(&mut rng, INIT_LENGTHS.0, INIT_LENGTHS.1)
                .map(|g| Individual::new(g, Origin::Random, eval_seed))
        })
        .collect::<Result<Vec<_>, _>>()?;
    evaluate(&challenge, &mut population)?;

    let (best, mean) = population_stats(&population);
    let best_ever = population[best_index(&population)].clone();
    let mut archive = Vec::new();
    for ind in &population {
        archive_update(&mut archive, ind, params.archive_score_min, params.archive_distance_min)?;
    }
    Ok(RunState {
        format_version: FORMAT_VERSION,
        run_id: format!("{}-{:016x}", challenge.id, params.master_seed),
        challenge,
        params,
        generation: 0,
        population,
        best_ever,
        archive,
        rng_state: rng,
        status: RunStatus::Running,
        history: vec![HistoryRow {
            generation: 0,
            best,
            mean,
        }],
    })
}

fn tournament<'a>(rng: &mut ChaCha8Rng, population: &'a [Individual], k: usize) -> &'a Individual {
    let mut winner = &population[rng.random_range(0..population.len())];
    for _ in 1..k {
        let challenger = &population[rng.random_range(0..population.len())];
        if challenger.fitness > winner.fitness {
            winner = challenger;
        }
    }
    winner
}

/// Prefix of `a` up to a cut uniform in `1..=min(len)`, then the rest of `b`.
pub fn crossover<R: Rng + ?Sized>(rng: &mut R, a: &BrickChain, b: &BrickChain) -> BrickChain {
    let shorter = a.len().min(b.len());
    let cut = rng.random_range(1..=shorter);
    let bricks: Vec<Brick> = a.bricks()[..cut]
        .iter()
        .chain(&b.bricks()[cut..])
        .take(MAX_BRICKS)
        .copied()
        .collect();
    BrickChain::new(bricks, a.anchor(), a.brick_length(), a.brick_thickness())
        .expect("prefix is non-empty and clamped")
}

/// A random action that is legal for `chain`: no removal from a single
/// brick and no addition to a full chain.
pub fn random_action<R: Rng + ?Sized>(rng: &mut R, chain: &BrickChain, weights: MutationWeights) -> Action {
    let can_add = chain.len() < MAX_BRICKS;
    let can_remove = chain.len() > 1;
    let (mut add, mut remove, mut rotate) = (
        if can_add { weights.add } else { 0.0 },
        if can_remove { weights.remove } else { 0.0 },
        weights.rotate,
    );
    if add + remove + rotate <= 0.0 {
        // Only illegal kinds carry weight; fall back to uniform over legal ones.
        add = f64::from(u8::from(can_add));
        remove = f64::from(u8::from(can_remove));
        rotate = 1.0;
    }
    let total = add + remove + rotate;
    let pick = rng.random_range(0.0..total);
    let end = |rng: &mut R| if rng.random_bool(0.5) { ChainEnd::Head } else { ChainEnd::Tail };
    if pick < add {
        Action::Add {
            end: end(rng),
            rel_angle: Angle::random(rng),
        }
    } else if pick < add + remove {
        Action::Remove { end: end(rng) }
    } else {
        let index = rng.random_range(0..chain.len());
        let current = chain.bricks()[index].rel_angle;
        // Uniform over the 23 other angles.
        let offset = rng.random_range(1..crate::shape::ANGLE_STEPS_PER_TURN);
        Action::Rotate {
            index,
            new_rel_angle: Angle::from_steps(current.steps() + offset),
        }
    }
}

/// Applies `count` random legal actions.
pub fn mutate<R: Rng + ?Sized>(
    rng: &mut R,
    chain: &BrickChain,
    count: u32,
    weights: MutationWeights,
) -> BrickChain {
    let mut current = chain.clone();
    for _ in 0..count {
        let action = random_action(rng, &current, weights);
        current = apply_action(Some(&current), &action)
            .expect("action is legal by construction")
            .expect("legal actions never empty the chain");
    }
    current
}

fn ensure_active(state: &RunState) -> Result<(), EvolveError> {
    if state.status == RunStatus::Done {
        Err(EvolveError::RunDone)
    } else {
        Ok(())
    }
}

/// Breeds, evaluates and installs the next generation.
pub fn next_generation(mut state: RunState) -> Result<RunState, EvolveError> {
    ensure_active(&state)?;
    let params = state.params.clone();
    let eval_seed = state.best_ever.eval_seed;
    let rng = &mut state.rng_state;

    let mut order: Vec<usize> = (0..state.population.len()).collect();
    // Stable sort keeps ties in population order.
    order.sort_by(|&a, &b| {
        state.population[b]
            .fitness
            .partial_cmp(&state.population[a].fitness)
            .expect("fitness values are finite")
    });
    let mut next: Vec<Individual> = order[..params.elite_count]
        .iter()
        .map(|&i| state.population[i].clone())
        .collect();

    while next.len() < params.population_size {
        let (genotype, origin) = if rng.random_bool(params.p_crossover) {
            let a = tournament(rng, &state.population, params.tournament_k).genotype.clone();
            let b = tournament(rng, &state.population, params.tournament_k).genotype.clone();
            (crossover(rng, &a, &b), Origin::Crossover)
        } else {
            let parent = tournament(rng, &state.population, params.tournament_k);
            (parent.genotype.clone(), Origin::Mutation)
        };
        let range = params.mutations_per_child;
        let count = rng.random_range(range.min..=range.max);
        let child = mutate(rng, &genotype, count, params.mutation_weights);
        next.push(Individual::new(child, origin, eval_seed));
    }

    evaluate(&state.challenge, &mut next)?;
    for ind in &next[params.elite_count..] {
        record_best(&mut state, ind);
        archive_update(
            &mut state.archive,
            ind,
            params.archive_score_min,
            params.archive_distance_min,
        )?;
    }
    state.population = next;
    state.generation += 1;
    let (best, mean) = population_stats(&state.population);
    state.history.push(HistoryRow {
        generation: state.generation,
        best,
        mean,
    });
    Ok(state)
}

/// Evaluates a human-edited design and swaps it in for the current worst
/// individual. The run's random stream is not touched.
pub fn inject(mut state: RunState, design: Option<BrickChain>, actor: ActorId) -> Result<RunState, EvolveError> {
    ensure_active(&state)?;
    let design = design.ok_or(EvolveError::EmptyChain)?;
    let mut individual = Individual::new(design, Origin::Injected, state.best_ever.eval_seed);
    individual.actor = Some(actor);
    evaluate(&state.challenge, std::slice::from_mut(&mut individual))?;

    let worst = worst_index(&state.population);
    state.population[worst] = individual.clone();
    record_best(&mut state, &individual);
    archive_update(
        &mut state.archive,
        &individual,
        state.params.archive_score_min,
        state.params.archive_distance_min,
    )?;
    let (best, mean) = population_stats(&state.population);
    if let Some(row) = state.history.last_mut() {
        row.best = best;
        row.mean = mean;
    }
    Ok(state)
}

pub fn run_control(mut state: RunState, command: RunCommand) -> Result<RunState, EvolveError> {
    let next = match (state.status, command) {
        (RunStatus::Running, RunCommand::Pause) => RunStatus::Paused,
        (RunStatus::Paused, RunCommand::Resume) => RunStatus::Running,
        (RunStatus::Running | RunStatus::Paused, RunCommand::Stop) => RunStatus::Done,
        (from, command) => return Err(EvolveError::IllegalTransition { from, command }),
    };
    state.status = next;
    Ok(state)
}

/// Parses a saved run, rejecting unknown format versions.
pub fn load_run(json: &str) -> Result<RunState, EvolveError> {
    #[derive(Deserialize)]
    struct Version {
        format_version: u32,
    }
    let version: Version =
        serde_json::from_str(json).map_err(|e| EvolveError::InvalidParams(e.to_string()))?;
    if version.format_version != FORMAT_VERSION {
        return Err(EvolveError::UnsupportedFormat(version.format_version));
    }
    serde_json::from_str(json).map_err(|e| EvolveError::InvalidParams(e.to_string()))
}

/// `generation,best,mean` rows with a header line.
pub fn history_csv(history: &[HistoryRow]) -> String {
    let mut out = String::from("generation,best,mean\n");
    for row in history {
        out.push_str(&format!("{},{},{}\n", row.generation, row.best, row.mean));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::challenges::{default_spec, ChallengeId};

    fn small(seed: u64) -> EvoParams {
        EvoParams {
            population_size: 6,
            ..EvoParams::with_seed(seed)
        }
    }

    #[test]
    fn params_validation() {
        assert!(EvoParams::with_seed(1).validate().is_ok());
        let bad = [
            EvoParams {
                population_size: 1,
                ..EvoParams::with_seed(1)
            },
            EvoParams {
                elite_count: 0,
                ..EvoParams::with_seed(1)
            },
            EvoParams {
                elite_count: 32,
                ..EvoParams::with_seed(1)
            },
            EvoParams {
                p_crossover: 1.5,
                ..EvoParams::with_seed(1)
            },
            EvoParams {
                mutation_weights: MutationWeights {
                    add: 0.0,
                    remove: 0.0,
                    rotate: 0.0,
                },
                ..EvoParams::with_seed(1)
            },
        ];
        for p in bad {
            assert!(matches!(p.validate(), Err(EvolveError::InvalidParams(_))));
        }
    }

    #[test]
    fn master_seed_is_required_in_json() {
        assert!(serde_json::from_str::<EvoParams>("{}").is_err());
        let p: EvoParams = serde_json::from_str(r#"{"master_seed": 5}"#).unwrap();
        assert_eq!(p, EvoParams::with_seed(5));
    }

    #[test]
    fn rng_hex_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        rng.next_u64();
        rng.next_u32();
        let back = rng_hex::decode(&rng_hex::encode(&rng)).unwrap();
        assert_eq!(back, rng);
        assert!(rng_hex::decode("abcd").is_err());
    }

    #[test]
    fn run_control_transitions() {
        let state = init_run(default_spec(ChallengeId::Cut), small(1)).unwrap();
        let paused = run_control(state, RunCommand::Pause).unwrap();
        assert_eq!(paused.status, RunStatus::Paused);
        assert!(run_control(paused.clone(), RunCommand::Pause).is_err());
        let running = run_control(paused, RunCommand::Resume).unwrap();
        assert_eq!(running.status, RunStatus::Running);
        let done = run_control(running, RunCommand::Stop).unwrap();
        assert!(matches!(
            run_control(done.clone(), RunCommand::Resume),
            Err(EvolveError::IllegalTransition {
                from: RunStatus::Done,
                command: RunCommand::Resume
            })
        ));
        assert_eq!(next_generation(done.clone()).unwrap_err(), EvolveError::RunDone);
        let design = BrickChain::from_steps(&[0]).unwrap();
        assert_eq!(
            inject(done, Some(design), ActorId::human("h")).unwrap_err(),
            EvolveError::RunDone
        );
    }

    #[test]
    fn history_csv_format() {
        let rows = [
            HistoryRow {
                generation: 0,
                best: 0.5,
                mean: 0.25,
            },
            HistoryRow {
                generation: 1,
                best: 0.75,
                mean: 0.5,
            },
        ];
        assert_eq!(history_csv(&rows), "generation,best,mean\n0,0.5,0.25\n1,0.75,0.5\n");
    }
}
