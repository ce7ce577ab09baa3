//! Multi-seed learning benchmarks against exact ground truth.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::envs::{build_rooms, build_taxi, load_map, Decomposition, RoomsConfig, TaxiConfig};
use crate::error::{Error, Result};
use crate::learner::{train, train_flat, LearnConfig, StartDistribution, Trace, Variant};
use crate::lmdp::{solve_flat, Lmdp, SolveConfig};
use crate::scalar::Scalar;

pub use crate::learner::mae;

/// Optimal values of the non-terminal states.
pub fn ground_truth<T: Scalar>(lmdp: &Lmdp<T>, cfg: &SolveConfig<T>) -> Result<Vec<T>> {
    let z = solve_flat(lmdp, cfg)?;
    let mut v = z.to_values(cfg.lambda);
    v.truncate(lmdp.n_states());
    Ok(v)
}

/// Ground truth keyed by problem fingerprint and temperature.
#[derive(Debug, Default)]
pub struct GroundTruthCache<T> {
    entries: Mutex<HashMap<(u64, u64), Arc<Vec<T>>>>,
}

impl<T: Scalar> GroundTruthCache<T> {
    pub fn new() -> Self {
        GroundTruthCache {
            entries: Mutex::new(HashMap::new()),
        }
    }

    pub fn get(&self, lmdp: &Lmdp<T>, cfg: &SolveConfig<T>) -> Result<Arc<Vec<T>>> {
        let key = (lmdp.fingerprint(), cfg.lambda.to_f64().unwrap_or(f64::NAN).to_bits());
        if let Some(v) = self.entries.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(v));
        }
        let v = Arc::new(ground_truth(lmdp, cfg)?);
        self.entries.lock().expect("cache lock").insert(key, Arc::clone(&v));
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Problem to benchmark on.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    Rooms(RoomsConfig),
    Taxi(TaxiConfig),
    Map { map: String, partition: Option<String> },
}

impl EnvSpec {
    pub fn build<T: Scalar>(&self) -> Result<Decomposition<T>> {
        match self {
            EnvSpec::Rooms(c) => build_rooms(c),
            EnvSpec::Taxi(c) => build_taxi(c),
            EnvSpec::Map { map, partition } => load_map(map, partition.as_deref()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Hierarchical(Variant),
    /// Flat Z-learning with importance sampling.
    ZIs,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Hierarchical(Variant::V1),
        Algorithm::Hierarchical(Variant::V2),
        Algorithm::Hierarchical(Variant::V3),
        Algorithm::ZIs,
    ];

    /// `(algorithm, variant)` CSV columns.
    pub fn columns(self) -> (&'static str, String) {
        match self {
            Algorithm::Hierarchical(v) => ("hierarchical", v.to_string()),
            Algorithm::ZIs => ("z-is", "none".into()),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Hierarchical(v) => write!(f, "{v}"),
            Algorithm::ZIs => f.write_str("Z-IS"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "Z-IS" | "ZIS" | "FLAT" => Ok(Algorithm::ZIs),
            other => other
                .parse()
                .map(Algorithm::Hierarchical)
                .map_err(|_| Error::Config(format!("unknown algorithm `{s}` (expected V1, V2, V3 or Z-IS)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig<T> {
    pub env: EnvSpec,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    pub lambda: T,
    pub c_base: T,
    pub c_exit: T,
    /// Candidate constants; when set, each algorithm uses the one with the
    /// lowest mean final MAE (same constant at both levels).
    pub c_grid: Option<Vec<T>>,
    pub max_episodes: usize,
    pub max_steps_per_episode: Option<usize>,
    pub max_total_steps: Option<usize>,
    pub evaluation_period: usize,
    pub start: StartDistribution,
}

impl<T: Scalar> BenchmarkConfig<T> {
    pub fn new(env: EnvSpec) -> Self {
        let d = LearnConfig::<T>::default();
        BenchmarkConfig {
            env,
            algorithms: Algorithm::ALL.to_vec(),
            seeds: (0..10).collect(),
            lambda: d.lambda,
            c_base: d.c_base,
            c_exit: d.c_exit,
            c_grid: None,
            max_episodes: d.max_episodes,
            max_steps_per_episode: d.max_steps_per_episode,
            max_total_steps: d.max_total_steps,
            evaluation_period: d.evaluation_period,
            start: d.start,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms selected".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds given".into()));
        }
        if let Some(grid) = &self.c_grid {
            if grid.is_empty() || grid.iter().any(|c| !(*c > T::zero())) {
                return Err(Error::Config("learning-rate grid must be nonempty and positive".into()));
            }
        }
        self.learn_config(Variant::V1, 0, self.c_base, self.c_exit).check()
    }

    fn learn_config(&self, variant: Variant, seed: u64, c_base: T, c_exit: T) -> LearnConfig<T> {
        LearnConfig {
            lambda: self.lambda,
            c_base,
            c_exit,
            variant,
            max_episodes: self.max_episodes,
            max_steps_per_episode: self.max_steps_per_episode,
            max_total_steps: self.max_total_steps,
            seed,
            evaluation_period: self.evaluation_period,
            start: self.start.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult<T> {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub c_base: T,
    pub c_exit: T,
    pub trace: Trace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub runs: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult<T> {
    /// One cell per (algorithm, seed), algorithms outermost in config order.
    pub cells: Vec<CellResult<T>>,
}

impl<T: Scalar> BenchmarkResult<T> {
    /// Long-form CSV: `steps,episode,algorithm,variant,seed,mae`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("steps,episode,algorithm,variant,seed,mae\n");
        for cell in &self.cells {
            let (alg, variant) = cell.algorithm.columns();
            for p in &cell.trace.points {
                out.push_str(&format!("{},{},{alg},{variant},{},{}\n", p.steps, p.episode, cell.seed, p.mae));
            }
        }
        out
    }

    /// Final MAE mean and sample standard deviation per algorithm.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut order: Vec<Algorithm> = Vec::new();
        let mut finals: HashMap<Algorithm, Vec<f64>> = HashMap::new();
        for cell in &self.cells {
            if !finals.contains_key(&cell.algorithm) {
                order.push(cell.algorithm);
            }
            let list = finals.entry(cell.algorithm).or_default();
            if let Some(m) = cell.trace.final_mae() {
                list.push(m);
            }
        }
        order
            .into_iter()
            .map(|a| {
                let xs = &finals[&a];
                let (mean, sd) = mean_sd(xs);
                SummaryRow {
                    algorithm: a,
                    runs: xs.len(),
                    mean,
                    sd,
                }
            })
            .collect()
    }

    pub fn summary_table(&self) -> String {
        let mut out = format!("{:<6} {:>5} {:>12} {:>12} {:>10} {:>10}\n", "algo", "runs", "mean_mae", "sd", "c_base", "c_exit");
        for row in self.summary() {
            let cell = self.cells.iter().find(|c| c.algorithm == row.algorithm).expect("row has cells");
            out.push_str(&format!(
                "{:<6} {:>5} {:>12.6} {:>12.6} {:>10} {:>10}\n",
                row.algorithm.to_string(),
                row.runs,
                row.mean,
                row.sd,
                cell.c_base,
                cell.c_exit
            ));
        }
        out
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn run_cells<T: Scalar>(
    cfg: &BenchmarkConfig<T>,
    d: &Decomposition<T>,
    truth: &[T],
    algorithms: &[(Algorithm, T, T)],
) -> Result<Vec<CellResult<T>>> {
    let jobs: Vec<(Algorithm, T, T, u64)> = algorithms
        .iter()
        .flat_map(|&(a, cb, ce)| cfg.seeds.iter().map(move |&s| (a, cb, ce, s)))
        .collect();
    jobs.par_iter()
        .map(|&(algorithm, c_base, c_exit, seed)| {
            let trace = match algorithm {
                Algorithm::Hierarchical(v) => {
                    let lc = cfg.learn_config(v, seed, c_base, c_exit);
                    train(&d.lmdp, &d.spec, &d.templates, &lc, truth)?.trace
                }
                Algorithm::ZIs => {
                    let lc = cfg.learn_config(Variant::V1, seed, c_base, c_exit);
                    train_flat(&d.lmdp, &lc, truth)?.trace
                }
            };
            Ok(CellResult {
                algorithm,
                seed,
                c_base,
                c_exit,
                trace,
            })
        })
        .collect()
}

/// Runs every (algorithm, seed) cell in parallel; output order and content
/// depend only on the config.
pub fn run_benchmark<T: Scalar>(cfg: &BenchmarkConfig<T>) -> Result<BenchmarkResult<T>> {
    run_benchmark_with(cfg, &GroundTruthCache::new())
}

pub fn run_benchmark_with<T: Scalar>(cfg: &BenchmarkConfig<T>, cache: &GroundTruthCache<T>) -> Result<BenchmarkResult<T>> {
    cfg.check()?;
    let d: Decomposition<T> = cfg.env.build()?;
    let truth = cache.get(&d.lmdp, &SolveConfig::with_lambda(cfg.lambda))?;

    let Some(grid) = &cfg.c_grid else {
        let algs: Vec<_> = cfg.algorithms.iter().map(|&a| (a, cfg.c_base, cfg.c_exit)).collect();
        return Ok(BenchmarkResult {
            cells: run_cells(cfg, &d, &truth, &algs)?,
        });
    };

    let mut best: Vec<Option<(f64, Vec<CellResult<T>>)>> = vec![None; cfg.algorithms.len()];
    for &c in grid {
        let algs: Vec<_> = cfg.algorithms.iter().map(|&a| (a, c, c)).collect();
        let cells = run_cells(cfg, &d, &truth, &algs)?;
        for (slot, chunk) in best.iter_mut().zip(cells.chunks(cfg.seeds.len())) {
            let finals: Vec<f64> = chunk.iter().filter_map(|c| c.trace.final_mae()).collect();
            let (mean, _) = mean_sd(&finals);
            if slot.as_ref().map_or(true, |(m, _)| mean < *m) {
                *slot = Some((mean, chunk.to_vec()));
            }
        }
    }
    Ok(BenchmarkResult {
        cells: best.into_iter().flat_map(|b| b.map(|(_, c)| c).unwrap_or_default()).collect(),
    })
}
