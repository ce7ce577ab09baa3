//! `hlmdp` — exact solves, learning runs and benchmark sweeps for
//! hierarchical LMDPs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use hlmdp::bench::{ground_truth, run_benchmark, Algorithm, BenchmarkConfig, EnvSpec};
use hlmdp::envs::{RoomsConfig, TaxiConfig};
use hlmdp::hierarchy::{decomposition_size, solve_hierarchical, write_partition};
use hlmdp::learner::{train, train_flat, LearnConfig, StartDistribution, Variant};
use hlmdp::lmdp::{solve_flat_detailed, SolveConfig};
use hlmdp::{Decomposition64, Error};

#[derive(Parser, Debug)]
#[command(name = "hlmdp", version, about = "Hierarchical linearly-solvable MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact solve, flat and/or hierarchical.
    Solve(SolveArgs),
    /// One learning run, printing its MAE trace.
    Train(TrainArgs),
    /// Multi-seed sweep over algorithms.
    Bench(BenchArgs),
    /// Storage and cost report of a decomposition.
    Inspect(InspectArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum EnvKind {
    Rooms,
    Taxi,
    Map,
}

#[derive(Args, Debug)]
struct EnvArgs {
    #[arg(long, value_enum, default_value = "rooms")]
    env: EnvKind,

    #[arg(long, default_value_t = 2)]
    rooms_x: usize,
    #[arg(long, default_value_t = 2)]
    rooms_y: usize,
    #[arg(long, default_value_t = 5)]
    room_w: usize,
    #[arg(long, default_value_t = 5)]
    room_h: usize,
    /// Local row of doorways in vertical walls [default: room_h / 2].
    #[arg(long)]
    door_row: Option<usize>,
    /// Local column of doorways in horizontal walls [default: room_w / 2].
    #[arg(long)]
    door_col: Option<usize>,
    /// Goal room as `X,Y` [default: top-right].
    #[arg(long, value_parser = parse_pair)]
    goal_room: Option<(usize, usize)>,
    /// Goal-adjacent cell inside the goal room as `X,Y` [default: top-right corner].
    #[arg(long, value_parser = parse_pair)]
    goal_cell: Option<(usize, usize)>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    goal_reward: f64,
    /// Group rooms by doorway pattern instead of padding them into one class.
    #[arg(long)]
    strict: bool,

    #[arg(long, default_value_t = 5)]
    grid_w: usize,
    #[arg(long, default_value_t = 5)]
    grid_h: usize,
    /// Taxi landmarks as `X,Y;X,Y;...` [default: the four corners].
    #[arg(long)]
    landmarks: Option<String>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    success_reward: f64,
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    failure_reward: f64,

    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    interior_reward: f64,

    /// ASCII map file (for `--env map`).
    #[arg(long)]
    map: Option<PathBuf>,
    /// Partition file for the map [default: one partition].
    #[arg(long)]
    partition: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
}

#[derive(Args, Debug)]
struct LearnArgs {
    #[arg(long, default_value_t = 30.0)]
    c_base: f64,
    #[arg(long, default_value_t = 30.0)]
    c_exit: f64,
    #[arg(long, default_value_t = 5000)]
    episodes: usize,
    /// Step cap per episode [default: 10 * states].
    #[arg(long)]
    max_steps: Option<usize>,
    /// Overall sample budget.
    #[arg(long)]
    total_steps: Option<usize>,
    #[arg(long, default_value_t = 100)]
    eval_period: usize,
    /// Start every episode from this state instead of a uniform draw.
    #[arg(long)]
    start_state: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Flat,
    Hier,
    Both,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_enum, default_value = "both")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write values here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    learn: LearnArgs,
    /// V1, V2, V3 or Z-IS.
    #[arg(long, default_value = "V3")]
    algorithm: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[command(flatten)]
    learn: LearnArgs,
    /// Comma-separated algorithms.
    #[arg(long, default_value = "V1,V2,V3,Z-IS")]
    algorithms: String,
    /// Seeds as `a..b` or a comma-separated list.
    #[arg(long, default_value = "0..10")]
    seeds: String,
    /// Comma-separated learning-rate constants to search (same at both levels).
    #[arg(long)]
    c_grid: Option<String>,
    /// Shorthand for a single-seed sweep.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Long-form CSV destination; the summary goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// Also print the partition listing.
    #[arg(long)]
    list: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Bad input rather than a failed computation.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `X,Y`, got `{s}`"))?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    Ok((p(a)?, p(b)?))
}

fn parse_seeds(s: &str) -> anyhow::Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| config_err(format!("bad seed range `{s}`")))?;
        let b: u64 = b.trim().parse().map_err(|_| config_err(format!("bad seed range `{s}`")))?;
        return Ok((a..b).collect());
    }
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse().map_err(|_| config_err(format!("bad seed `{t}`"))))
        .collect()
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> anyhow::Result<Vec<T>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse().map_err(|_| config_err(format!("bad {what} `{t}`"))))
        .collect()
}

fn read_input(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))
}

impl EnvArgs {
    fn spec(&self) -> anyhow::Result<EnvSpec> {
        Ok(match self.env {
            EnvKind::Rooms => EnvSpec::Rooms(RoomsConfig {
                rooms_x: self.rooms_x,
                rooms_y: self.rooms_y,
                room_w: self.room_w,
                room_h: self.room_h,
                door_row: self.door_row,
                door_col: self.door_col,
                goal_room: self.goal_room,
                goal_cell: self.goal_cell,
                interior_reward: self.interior_reward,
                goal_reward: self.goal_reward,
                padded_equivalence: !self.strict,
            }),
            EnvKind::Taxi => {
                let landmarks = match &self.landmarks {
                    None => None,
                    Some(s) => Some(
                        s.split(';')
                            .filter(|t| !t.trim().is_empty())
                            .map(|t| parse_pair(t).map_err(config_err))
                            .collect::<anyhow::Result<Vec<_>>>()?,
                    ),
                };
                EnvSpec::Taxi(TaxiConfig {
                    grid_w: self.grid_w,
                    grid_h: self.grid_h,
                    landmarks,
                    interior_reward: self.interior_reward,
                    success_reward: self.success_reward,
                    failure_reward: self.failure_reward,
                })
            }
            EnvKind::Map => {
                let path = self.map.as_ref().ok_or_else(|| config_err("`--env map` needs `--map FILE`"))?;
                EnvSpec::Map {
                    map: read_input(path)?,
                    partition: self.partition.as_deref().map(read_input).transpose()?,
                }
            }
        })
    }

    fn build(&self) -> anyhow::Result<(EnvSpec, Decomposition64)> {
        let spec = self.spec()?;
        let d = spec.build()?;
        Ok((spec, d))
    }
}

impl SolverArgs {
    fn config(&self) -> SolveConfig<f64> {
        SolveConfig {
            lambda: self.lambda,
            tol: self.tol,
            max_iters: self.max_iters,
        }
    }
}

impl LearnArgs {
    fn start(&self) -> StartDistribution {
        match self.start_state {
            None => StartDistribution::Uniform,
            Some(s) => {
                let mut w = vec![0.0; s + 1];
                w[s] = 1.0;
                StartDistribution::Weights(w)
            }
        }
    }

    /// Pads a single-state start to the state count.
    fn start_for(&self, n_states: usize) -> anyhow::Result<StartDistribution> {
        match self.start() {
            StartDistribution::Weights(mut w) => {
                if w.len() > n_states {
                    return Err(config_err(format!("start state {} out of range", w.len() - 1)));
                }
                w.resize(n_states, 0.0);
                Ok(StartDistribution::Weights(w))
            }
            other => Ok(other),
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn solve(args: SolveArgs) -> anyhow::Result<()> {
    let (_, d) = args.env.build()?;
    let cfg = args.solver.config();
    cfg.check()?;
    let n = d.lmdp.n_states();
    let flat = match args.mode {
        Mode::Flat | Mode::Both => Some(solve_flat_detailed(&d.lmdp, &cfg)?),
        Mode::Hier => None,
    };
    let hier = match args.mode {
        Mode::Hier | Mode::Both => Some(solve_hierarchical(&d.lmdp, &d.spec, &d.templates, &cfg)?),
        Mode::Flat => None,
    };
    let v_flat = flat.as_ref().map(|(z, _)| z.to_values(cfg.lambda));
    let v_hier = hier.as_ref().map(|h| h.z.to_values(cfg.lambda));

    let mut table = String::new();
    let header: Vec<&str> = ["state"]
        .into_iter()
        .chain(v_flat.is_some().then_some("v_flat"))
        .chain(v_hier.is_some().then_some("v_hier"))
        .collect();
    let sep = if args.format == Format::Csv { "," } else { "\t" };
    let _ = writeln!(table, "{}", header.join(sep));
    for s in 0..d.lmdp.n_total() {
        let mut row = vec![s.to_string()];
        row.extend(v_flat.as_ref().map(|v| v[s].to_string()));
        row.extend(v_hier.as_ref().map(|v| v[s].to_string()));
        let _ = writeln!(table, "{}", row.join(sep));
    }
    emit(args.out.as_deref(), &table)?;

    if let Some((_, conv)) = &flat {
        eprintln!("flat: {} iterations, residual {:.3e}", conv.iterations, conv.residual);
    }
    if let (Some(a), Some(b)) = (&v_flat, &v_hier) {
        let max_dv = a[..n]
            .iter()
            .zip(&b[..n])
            .filter(|(x, y)| x.is_finite() || y.is_finite())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let line = format!("max |dv| = {max_dv:.3e}");
        if args.out.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
    Ok(())
}

fn train_cmd(args: TrainArgs) -> anyhow::Result<()> {
    let (_, d) = args.env.build()?;
    let algorithm: Algorithm = args.algorithm.parse()?;
    let solver = args.solver.config();
    solver.check()?;
    let truth = ground_truth(&d.lmdp, &solver)?;
    let cfg = LearnConfig {
        lambda: solver.lambda,
        c_base: args.learn.c_base,
        c_exit: args.learn.c_exit,
        variant: match algorithm {
            Algorithm::Hierarchical(v) => v,
            Algorithm::ZIs => Variant::V1,
        },
        max_episodes: args.learn.episodes,
        max_steps_per_episode: args.learn.max_steps,
        max_total_steps: args.learn.total_steps,
        seed: args.seed,
        evaluation_period: args.learn.eval_period,
        start: args.learn.start_for(d.lmdp.n_states())?,
    };
    let trace = match algorithm {
        Algorithm::Hierarchical(_) => train(&d.lmdp, &d.spec, &d.templates, &cfg, &truth)?.trace,
        Algorithm::ZIs => train_flat(&d.lmdp, &cfg, &truth)?.trace,
    };
    let label = algorithm.to_string();
    let text = match args.format {
        Format::Csv => trace.to_csv(&label, args.seed),
        Format::Text => {
            let mut t = format!("{:>10} {:>8} {:>12}\n", "steps", "episode", "mae");
            for p in &trace.points {
                let _ = writeln!(t, "{:>10} {:>8} {:>12.6}", p.steps, p.episode, p.mae);
            }
            t
        }
    };
    emit(args.out.as_deref(), &text)?;
    if let Some(m) = trace.final_mae() {
        eprintln!("{label} seed {}: final mae {m:.6}", args.seed);
    }
    Ok(())
}

fn bench_cmd(args: BenchArgs) -> anyhow::Result<()> {
    let env = args.env.spec()?;
    let d: Decomposition64 = env.build()?;
    let seeds = match args.seed {
        Some(s) => vec![s],
        None => parse_seeds(&args.seeds)?,
    };
    let cfg = BenchmarkConfig {
        env,
        algorithms: parse_list(&args.algorithms, "algorithm")?,
        seeds,
        lambda: args.lambda,
        c_base: args.learn.c_base,
        c_exit: args.learn.c_exit,
        c_grid: args.c_grid.as_deref().map(|g| parse_list(g, "constant")).transpose()?,
        max_episodes: args.learn.episodes,
        max_steps_per_episode: args.learn.max_steps,
        max_total_steps: args.learn.total_steps,
        evaluation_period: args.learn.eval_period,
        start: args.learn.start_for(d.lmdp.n_states())?,
    };
    let result = run_benchmark(&cfg)?;
    match args.out {
        Some(p) => {
            emit(Some(&p), &result.to_csv())?;
            print!("{}", result.summary_table());
        }
        None if args.format == Format::Csv => {
            print!("{}", result.to_csv());
            eprint!("{}", result.summary_table());
        }
        None => print!("{}", result.summary_table()),
    }
    Ok(())
}

fn inspect(args: InspectArgs) -> anyhow::Result<()> {
    let (_, d) = args.env.build()?;
    let size = decomposition_size(&d.spec, &d.templates, &d.lmdp);
    let fields = [
        ("states", size.flat_states),
        ("terminals", d.lmdp.n_terminal()),
        ("partitions", d.spec.n_partitions()),
        ("classes", size.classes),
        ("max_local", size.max_local),
        ("max_slots", size.max_slots),
        ("support", size.support),
        ("exits", size.exit_count),
        ("bases", size.n_bases),
        ("stored_values", size.stored_values),
        ("periter_cost", size.periter_cost),
        ("flat_cost", size.flat_cost),
    ];
    let mut text = String::new();
    match args.format {
        Format::Csv => {
            let _ = writeln!(text, "{}", fields.iter().map(|f| f.0).collect::<Vec<_>>().join(","));
            let _ = writeln!(text, "{}", fields.iter().map(|f| f.1.to_string()).collect::<Vec<_>>().join(","));
        }
        Format::Text => {
            for (k, v) in fields {
                let _ = writeln!(text, "{k}={v}");
            }
        }
    }
    if args.list {
        text.push_str(&write_partition(&d.spec));
    }
    emit(args.out.as_deref(), &text)
}

fn is_config_error(e: &anyhow::Error) -> bool {
    if e.downcast_ref::<ConfigError>().is_some() {
        return true;
    }
    matches!(
        e.downcast_ref::<Error>(),
        Some(
            Error::Config(_)
                | Error::Geometry(_)
                | Error::Parse { .. }
                | Error::InvalidPartition(_)
                | Error::InvalidLmdp(_)
                | Error::NotEquivalent { .. }
                | Error::DanglingSuccessor { .. }
                | Error::DimensionMismatch { .. }
        )
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Train(a) => train_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Inspect(a) => inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_config_error(&e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
