//! Command-line harness: generate worlds and scenarios, run episodes,
//! sweep the clique-cost benchmark, compare navigation methods, and
//! compute one-shot posteriors from evidence files.
//!
//! Every command is deterministic for a given seed, with one exception:
//! `benchmark --timing wall` records wall-clock propagation times, which
//! no machine reproduces exactly. Use `--timing none` (zeros in the time
//! column) for byte-reproducible files.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mapex::belief::BeliefState;
use mapex::benchmark::{
    benchmark_clique_costs, benchmark_csv, compare_csv, compare_methods, BenchmarkConfig,
};
use mapex::episode::run_episode;
use mapex::explorer::NavigationMethod;
use mapex::grid::{Direction, GridSpec, Intersection};
use mapex::scenario::{
    GridConfig, HierarchyConfig, NoiseConfig, Scenario, TaskConfig, TimeScaleConfig,
};
use mapex::sensing::{Detector, Evidence, Feature, SensorReading, Wedge};
use mapex::world::sample_map;

#[derive(Parser)]
#[command(name = "mapex", about = "Grid-corridor exploration under map uncertainty", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a world map or a scenario file.
    #[command(subcommand)]
    Generate(GenerateCmd),
    /// Run one episode from a scenario file.
    Simulate(SimulateArgs),
    /// Sweep hypothesis sizes against exploration lengths.
    Benchmark(BenchmarkArgs),
    /// Compare navigation methods on a scenario.
    Compare(CompareArgs),
    /// One-shot posterior from an evidence file.
    Infer(InferArgs),
}

#[derive(Subcommand)]
enum GenerateCmd {
    /// Sample a corridor world and write its map text.
    World(GenerateWorldArgs),
    /// Write a scenario file with randomly drawn tasks.
    Scenario(GenerateScenarioArgs),
}

#[derive(Args)]
struct GenerateWorldArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    nx: usize,
    #[arg(long, default_value_t = 4)]
    ny: usize,
    /// Disable the medium-density sampling preference.
    #[arg(long, default_value_t = false)]
    uniform: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateScenarioArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    nx: usize,
    #[arg(long, default_value_t = 3)]
    ny: usize,
    #[arg(long, default_value_t = 5)]
    hypotheses: usize,
    #[arg(long, default_value_t = 0.10)]
    false_negative: f64,
    #[arg(long, default_value_t = 0.05)]
    false_positive: f64,
    #[arg(long, default_value = "multiply")]
    structure: String,
    #[arg(long, default_value = "weighted_path")]
    method: String,
    /// Number of random tasks to draw.
    #[arg(long, default_value_t = 2)]
    tasks: usize,
    #[arg(long, default_value_t = false)]
    hierarchy: bool,
    #[arg(long, default_value_t = 64)]
    descend_threshold: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TimingMode {
    Wall,
    None,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long, default_value_t = 4)]
    nx: usize,
    #[arg(long, default_value_t = 4)]
    ny: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![10, 20, 30])]
    sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![4, 6, 8, 10])]
    lengths: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Wall-clock times are informational and not reproducible; `none`
    /// zeroes the column for byte-identical outputs.
    #[arg(long, value_enum, default_value_t = TimingMode::Wall)]
    timing: TimingMode,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "weighted_path,shortest_ignoring_unknown,avoid_known,random_walk")]
    methods: Vec<String>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InferArgs {
    /// Scenario supplying grid, hypothesis count, noise, and seed.
    #[arg(long)]
    scenario: PathBuf,
    /// Evidence file: `reading x y feature wedge result step` and
    /// `edge x y direction present step` lines.
    #[arg(long)]
    evidence: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Generate(GenerateCmd::World(a)) => generate_world(a),
        Command::Generate(GenerateCmd::Scenario(a)) => generate_scenario(a),
        Command::Simulate(a) => simulate(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Compare(a) => compare(a),
        Command::Infer(a) => infer(a),
    }
}

fn write_out(path: &PathBuf, content: &str) -> Result<(), String> {
    fs::write(path, content).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn generate_world(a: GenerateWorldArgs) -> Result<(), String> {
    let grid = GridSpec::new(a.nx, a.ny).map_err(|e| e.to_string())?;
    let world = sample_map(grid, a.seed, !a.uniform);
    write_out(&a.out, &world.to_text())?;
    println!("world {}x{} with {} corridors -> {}", a.nx, a.ny, world.edge_count(), a.out.display());
    Ok(())
}

fn generate_scenario(a: GenerateScenarioArgs) -> Result<(), String> {
    let grid = GridSpec::new(a.nx, a.ny).map_err(|e| e.to_string())?;
    // The seed fully determines the world an episode will sample, so draw
    // task endpoints among that world's LDPs: generated tasks are then
    // mostly completable instead of pointing at corridor-less corners.
    let world = mapex::episode::derive_world(a.seed, grid);
    let ldps = world.ldps();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    rng.set_stream(7);
    let pick = |rng: &mut ChaCha8Rng| -> Intersection {
        if ldps.is_empty() {
            Intersection::new(rng.random_range(0..grid.nx), rng.random_range(0..grid.ny))
        } else {
            ldps[rng.random_range(0..ldps.len())]
        }
    };
    let mut tasks = Vec::with_capacity(a.tasks);
    let mut previous = if ldps.is_empty() { Intersection::new(0, 0) } else { ldps[0] };
    let start = previous;
    for id in 0..a.tasks {
        // Chain origins so the episode travels coherently.
        let mut dest = previous;
        let mut guard = 0;
        while dest == previous && guard < 64 {
            dest = pick(&mut rng);
            guard += 1;
        }
        tasks.push(TaskConfig {
            id,
            origin: [previous.x, previous.y],
            destination: [dest.x, dest.y],
            expected_count: (rng.random::<f64>() * 2.0 + 0.5 * 4.0).round() / 4.0,
        });
        previous = dest;
    }
    let scenario = Scenario {
        seed: a.seed,
        grid: GridConfig { nx: a.nx, ny: a.ny },
        hypotheses: a.hypotheses,
        noise: NoiseConfig { false_negative: a.false_negative, false_positive: a.false_positive },
        structure: a.structure,
        method: a.method,
        hierarchy: HierarchyConfig { enabled: a.hierarchy, descend_threshold: a.descend_threshold },
        time_scale: TimeScaleConfig::default(),
        enumeration_budget: mapex::world::DEFAULT_ENUMERATION_BUDGET,
        start: Some([start.x, start.y]),
        task_draws: None,
        tasks,
    };
    scenario.validate().map_err(|e| e.to_string())?;
    write_out(&a.out, &scenario.to_toml())?;
    println!("scenario seed={} -> {}", a.seed, a.out.display());
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<(), String> {
    let text = fs::read_to_string(&a.scenario)
        .map_err(|e| format!("cannot read {}: {e}", a.scenario.display()))?;
    let mut scenario = Scenario::from_toml(&text).map_err(|e| e.to_string())?;
    if let Some(seed) = a.seed {
        scenario.seed = seed;
    }
    let log = run_episode(&scenario).map_err(|e| e.to_string())?;
    write_out(&a.out, &log.to_text())?;
    let m = &log.metrics;
    println!(
        "episode done: {}/{} tasks, {} attempts, {} sensing actions, {:.1} simulated minutes -> {}",
        m.tasks_completed,
        m.tasks_total,
        m.attempts,
        m.sensing_actions,
        m.simulated_minutes,
        a.out.display()
    );
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> Result<(), String> {
    let grid = GridSpec::new(a.nx, a.ny).map_err(|e| e.to_string())?;
    let cfg = BenchmarkConfig {
        grid,
        hypothesis_sizes: a.sizes,
        exploration_lengths: a.lengths,
        runs: a.runs,
        seed: a.seed,
        measure_time: a.timing == TimingMode::Wall,
    };
    let rows = benchmark_clique_costs(&cfg);
    write_out(&a.out, &benchmark_csv(&rows))?;
    println!("benchmark: {} cells x {} runs -> {}", rows.len(), cfg.runs, a.out.display());
    Ok(())
}

fn compare(a: CompareArgs) -> Result<(), String> {
    let text = fs::read_to_string(&a.scenario)
        .map_err(|e| format!("cannot read {}: {e}", a.scenario.display()))?;
    let scenario = Scenario::from_toml(&text).map_err(|e| e.to_string())?;
    let methods: Vec<NavigationMethod> = a
        .methods
        .iter()
        .map(|m| NavigationMethod::from_name(m).ok_or(format!("unknown method `{m}`")))
        .collect::<Result<_, _>>()?;
    let rows = compare_methods(&scenario, &methods, a.trials).map_err(|e| e.to_string())?;
    write_out(&a.out, &compare_csv(&rows))?;
    println!("compared {} methods over {} trials -> {}", rows.len(), a.trials, a.out.display());
    Ok(())
}

fn parse_evidence(text: &str) -> Result<Vec<Evidence>, String> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let bad = |what: &str| format!("evidence line {}: {what}", lineno + 1);
        match parts.next() {
            Some("reading") => {
                let x: usize = parts.next().and_then(|s| s.parse().ok()).ok_or(bad("bad x"))?;
                let y: usize = parts.next().and_then(|s| s.parse().ok()).ok_or(bad("bad y"))?;
                let feature = parts
                    .next()
                    .and_then(Feature::from_name)
                    .ok_or(bad("bad feature"))?;
                let wedge: u8 =
                    parts.next().and_then(|s| s.parse().ok()).ok_or(bad("bad wedge"))?;
                if wedge >= 8 {
                    return Err(bad("wedge out of range"));
                }
                let result: u8 =
                    parts.next().and_then(|s| s.parse().ok()).ok_or(bad("bad result"))?;
                let step: u64 =
                    parts.next().and_then(|s| s.parse().ok()).ok_or(bad("bad step"))?;
                out.push(Evidence::Sensor(SensorReading {
                    location: Intersection::new(x, y),
                    detector: Detector::new(feature, Wedge(wedge)),
                    result: result != 0,
                    step,
                }));
            }
            Some("edge") => {
                let x: usize = parts.next().and_then(|s| s.parse().ok()).ok_or(bad("bad x"))?;
                let y: usize = parts.next().and_then(|s| s.parse().ok()).ok_or(bad("bad y"))?;
                let d = parts
                    .next()
                    .and_then(|s| s.chars().next())
                    .and_then(Direction::from_letter)
                    .ok_or(bad("bad direction"))?;
                let present: u8 =
                    parts.next().and_then(|s| s.parse().ok()).ok_or(bad("bad presence"))?;
                let step: u64 =
                    parts.next().and_then(|s| s.parse().ok()).ok_or(bad("bad step"))?;
                out.push(Evidence::Edge {
                    from: Intersection::new(x, y),
                    direction: d,
                    present: present != 0,
                    step,
                });
            }
            Some(other) => return Err(bad(&format!("unknown record `{other}`"))),
            None => {}
        }
    }
    Ok(out)
}

fn infer(a: InferArgs) -> Result<(), String> {
    let text = fs::read_to_string(&a.scenario)
        .map_err(|e| format!("cannot read {}: {e}", a.scenario.display()))?;
    let scenario = Scenario::from_toml(&text).map_err(|e| e.to_string())?;
    let grid = scenario.grid_spec().map_err(|e| e.to_string())?;
    let noise = scenario.noise_model().ok_or("invalid noise")?;
    let evidence_text = fs::read_to_string(&a.evidence)
        .map_err(|e| format!("cannot read {}: {e}", a.evidence.display()))?;
    let items = parse_evidence(&evidence_text)?;
    for item in &items {
        let loc = match item {
            Evidence::Sensor(r) => r.location,
            Evidence::Edge { from, .. } => *from,
        };
        if !grid.contains(loc) {
            return Err(format!("evidence references {loc} outside the {grid} grid"));
        }
    }

    let mut master = ChaCha8Rng::seed_from_u64(scenario.seed);
    let _world_seed: u64 = master.random();
    let belief_seed: u64 = master.random();
    let belief = BeliefState::init(
        grid,
        scenario.hypotheses,
        noise,
        belief_seed,
        scenario.enumeration_budget,
    )
    .map_err(|e| e.to_string())?;
    let posterior = belief.update_batch(&items).map_err(|e| e.to_string())?;

    let mut out = String::new();
    use std::fmt::Write as _;
    writeln!(
        out,
        "posterior seed={} grid={}x{} k={} evidence={}",
        scenario.seed,
        grid.nx,
        grid.ny,
        posterior.hypotheses().len(),
        items.len()
    )
    .unwrap();
    for (i, p) in posterior.map_probs().iter().enumerate() {
        writeln!(out, "map {i} {p:.9}").unwrap();
    }
    writeln!(out, "nota {:.9}", posterior.nota_prob()).unwrap();
    writeln!(out, "nota_triggered {}", posterior.nota_triggered() as u8).unwrap();
    write_out(&a.out, &out)?;
    println!("posterior over {} maps -> {}", posterior.hypotheses().len(), a.out.display());
    Ok(())
}
