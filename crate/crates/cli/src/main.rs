mod svg;

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use coevo_core::challenges::{default_spec, run_episode, ChallengeId, FrameCapture};
use coevo_core::evolve::{
    history_csv, init_run, inject, load_run, next_generation, EvoParams, EvolveError, Individual,
};
use coevo_core::physics::{Frame, DEFAULT_FRAME_INTERVAL};
use coevo_core::shape::{design_to_wire, DesignWire};
use coevo_core::store::{Store, StoreError};
use coevo_core::{ActorId, BrickChain};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "coevo", version, about = "Brick-chain design challenges, evolution and replay")]
struct Cli {
    /// Data directory; COEVO_DATA_DIR takes precedence when set.
    #[arg(long, global = true, default_value = "coevo-data")]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scores one design on a challenge.
    Eval {
        #[arg(long)]
        challenge: ChallengeId,
        /// Design file: {"angles": [...]} in radians.
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Writes the episode frames to this file.
        #[arg(long)]
        frames: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "human")]
        format: Format,
    },
    /// Runs a seeded evolutionary search and prints its history as CSV.
    Evolve {
        #[arg(long)]
        challenge: ChallengeId,
        #[arg(long)]
        pop: usize,
        #[arg(long)]
        gens: u64,
        #[arg(long)]
        seed: u64,
        /// Remaining parameters as JSON; --pop and --seed win.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Also writes the final run state here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Injects a design at a generation boundary: design.json@gen.
        #[arg(long = "inject", value_parser = parse_injection)]
        injections: Vec<Injection>,
    },
    /// Rebuilds a session's design from its action log.
    Replay {
        #[arg(long)]
        session: String,
        #[arg(long)]
        upto: Option<u64>,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "human")]
        format: Format,
    },
    /// Writes the best distinct designs of a saved run as SVG files.
    Gallery {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        top: usize,
        #[arg(long)]
        svg_dir: PathBuf,
    },
    /// Runs the HTTP service until interrupted.
    Serve {
        #[arg(long, default_value = coevo_service::DEFAULT_ADDR)]
        addr: SocketAddr,
    },
}

#[derive(Debug, Clone)]
struct Injection {
    path: PathBuf,
    generation: u64,
}

fn parse_injection(raw: &str) -> Result<Injection, String> {
    let (path, generation) = raw
        .rsplit_once('@')
        .ok_or_else(|| format!("expected design.json@generation, got {raw:?}"))?;
    let generation = generation
        .parse()
        .map_err(|_| format!("invalid generation in {raw:?}"))?;
    Ok(Injection {
        path: PathBuf::from(path),
        generation,
    })
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(2),
            CliError::Internal(_) => ExitCode::from(1),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownSession(_)
            | StoreError::UnknownRun(_)
            | StoreError::UnknownFrames(_)
            | StoreError::SeqOutOfRange { .. }
            | StoreError::InvalidAction(_) => CliError::Input(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<EvolveError> for CliError {
    fn from(e: EvolveError) -> Self {
        match e {
            EvolveError::Challenge(_) => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

fn read_design(path: &Path) -> Result<BrickChain, CliError> {
    let text = read_input(path)?;
    let wire: DesignWire = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if wire.angles.is_empty() {
        return Err(CliError::Input(format!("{}: design has no bricks", path.display())));
    }
    BrickChain::from_wire(&wire).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Writes to stdout; a closed pipe downstream is not an error.
fn emit(text: &str) -> Result<(), CliError> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Internal(e.to_string())),
        _ => Ok(()),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))
}

fn open_store(data_dir: &Path) -> Result<Store, CliError> {
    Store::open(data_dir).map_err(|e| CliError::Internal(format!("cannot open {}: {e}", data_dir.display())))
}

#[derive(Serialize)]
struct FramesFile<'a> {
    frames: &'a [Frame],
}

fn eval(
    challenge: ChallengeId,
    design: &Path,
    seed: u64,
    frames: Option<&Path>,
    format: Format,
) -> Result<(), CliError> {
    let chain = read_design(design)?;
    let spec = default_spec(challenge);
    let capture = match frames {
        Some(_) => FrameCapture::Every(DEFAULT_FRAME_INTERVAL),
        None => FrameCapture::Off,
    };
    let mut result = run_episode(&spec, &chain, seed, capture).map_err(|e| CliError::Internal(e.to_string()))?;
    if let (Some(path), Some(captured)) = (frames, result.frames.take()) {
        write_output(path, &to_json(&FramesFile { frames: &captured })?)?;
    }
    let text = match format {
        Format::Json => format!("{}\n", to_json(&result)?),
        Format::Human => {
            let mut text = format!(
                "score: {}\nchallenge: {challenge}\nseed: {}\ndesign_hash: {}\n",
                result.score, result.seed, result.design_hash
            );
            for (name, value) in &result.metrics {
                text.push_str(&format!("{name}: {value}\n"));
            }
            text
        }
    };
    emit(&text)
}

#[allow(clippy::too_many_arguments)]
fn evolve(
    data_dir: &Path,
    challenge: ChallengeId,
    pop: usize,
    gens: u64,
    seed: u64,
    params: Option<&Path>,
    out: Option<&Path>,
    injections: &[Injection],
) -> Result<(), CliError> {
    let mut evo: EvoParams = match params {
        Some(path) => serde_json::from_str(&read_input(path)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        None => EvoParams::with_seed(seed),
    };
    evo.master_seed = seed;
    evo.population_size = pop;
    evo.validate()?;
    if let Some(late) = injections.iter().find(|i| i.generation > gens) {
        return Err(CliError::Input(format!(
            "injection at generation {} is past the last generation {gens}",
            late.generation
        )));
    }
    let designs = injections
        .iter()
        .map(|i| Ok((i.generation, read_design(&i.path)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let actor = ActorId::human("cli");

    let store = open_store(data_dir)?;
    let mut state = init_run(default_spec(challenge), evo)?;
    for generation in 0..=gens {
        if generation > 0 {
            state = next_generation(state)?;
        }
        for (_, design) in designs.iter().filter(|(g, _)| *g == generation) {
            state = inject(state, Some(design.clone()), actor.clone())?;
        }
    }
    store.save_run(&state)?;
    if let Some(path) = out {
        write_output(path, &to_json(&state)?)?;
    }
    emit(&history_csv(&state.history))
}

#[derive(Serialize)]
struct ReplayOutput {
    log: coevo_core::ActionLog,
    chain: DesignWire,
}

fn replay(
    data_dir: &Path,
    session: &str,
    upto: Option<u64>,
    svg_path: Option<&Path>,
    format: Format,
) -> Result<(), CliError> {
    let store = open_store(data_dir)?;
    let (log, chain) = store.get_replay(session, upto)?;
    if let Some(path) = svg_path {
        let chain = chain
            .as_ref()
            .ok_or_else(|| CliError::Input("design is empty at this point of the log".into()))?;
        write_output(path, &svg::render_chain(chain, session))?;
    }
    let text = match format {
        Format::Json => format!(
            "{}\n",
            to_json(&ReplayOutput {
                chain: design_to_wire(chain.as_ref()),
                log,
            })?
        ),
        Format::Human => {
            let steps: Vec<String> = chain
                .as_ref()
                .map(|c| c.angles().iter().map(|a| a.steps().to_string()).collect())
                .unwrap_or_default();
            format!(
                "session: {session}\nactions: {}\nbricks: {}\nangle_steps: [{}]\n",
                log.entries.len(),
                steps.len(),
                steps.join(", ")
            )
        }
    };
    emit(&text)
}

/// Evaluated individuals of a run, best first, one per distinct design.
fn ranked_designs(state: &coevo_core::evolve::RunState) -> Vec<Individual> {
    let mut all: Vec<Individual> = state
        .archive
        .iter()
        .chain(&state.population)
        .chain(std::iter::once(&state.best_ever))
        .filter(|i| i.fitness.is_some())
        .cloned()
        .collect();
    all.sort_by(|a, b| {
        b.fitness
            .partial_cmp(&a.fitness)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.design_hash.cmp(&b.design_hash))
    });
    let mut seen = std::collections::HashSet::new();
    all.retain(|i| seen.insert(i.design_hash.clone()));
    all
}

fn gallery(run: &Path, top: usize, svg_dir: &Path) -> Result<(), CliError> {
    let state = load_run(&read_input(run)?)?;
    fs::create_dir_all(svg_dir)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", svg_dir.display())))?;
    let mut listing = String::new();
    for (rank, individual) in ranked_designs(&state).iter().take(top).enumerate() {
        let fitness = individual.fitness.unwrap_or(0.0);
        let name = format!("{:02}-{}.svg", rank + 1, &individual.design_hash[..12]);
        let path = svg_dir.join(name);
        let title = format!("{} #{} score {fitness:.4}", state.run_id, rank + 1);
        write_output(&path, &svg::render_chain(&individual.genotype, &title))?;
        listing.push_str(&format!("{}\t{fitness}\t{}\n", path.display(), individual.design_hash));
    }
    emit(&listing)
}

fn serve(data_dir: &Path, addr: SocketAddr) -> Result<(), CliError> {
    let store = open_store(data_dir)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Input(format!("cannot bind {addr}: {e}")))?;
        let bound = listener.local_addr().map_err(|e| CliError::Internal(e.to_string()))?;
        emit(&format!("listening on http://{bound}\n"))?;
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
        let state = coevo_service::AppState::new(store, workers);
        coevo_service::serve_until(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Internal(e.to_string()))
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let data_dir = std::env::var_os("COEVO_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or(cli.data_dir);
    match cli.command {
        Command::Eval {
            challenge,
            design,
            seed,
            frames,
            format,
        } => eval(challenge, &design, seed, frames.as_deref(), format),
        Command::Evolve {
            challenge,
            pop,
            gens,
            seed,
            params,
            out,
            injections,
        } => evolve(
            &data_dir,
            challenge,
            pop,
            gens,
            seed,
            params.as_deref(),
            out.as_deref(),
            &injections,
        ),
        Command::Replay {
            session,
            upto,
            svg,
            format,
        } => replay(&data_dir, &session, upto, svg.as_deref(), format),
        Command::Gallery { run, top, svg_dir } => gallery(&run, top, &svg_dir),
        Command::Serve { addr } => serve(&data_dir, addr),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
