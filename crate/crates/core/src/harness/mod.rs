//! Experiment runner: collect, learn, determinize and plan across seeds,
//! data fractions and methods; predicate and heuristic ablations.

mod output;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{self, DatagenConfig, DatagenError, Dataset};
use crate::determinize::{determinize, P_MIN};
use crate::domains::{Domain, DomainConfig, DomainId, Problem, ProblemSize};
use crate::learner::{learn_operators, LearnerConfig};
use crate::planner::{self, Heuristic, PlannerConfig, SolveResult};

pub use output::{
    plot_learning_curve, summarize, write_csv, write_csv_file, write_summary_csv, SummaryRow,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("plot: {0}")]
    Plot(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Oracle,
    Loft,
    B5,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Loft => "loft",
            Method::B5 => "b5",
        }
    }

    fn tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "oracle" => Ok(Method::Oracle),
            "loft" => Ok(Method::Loft),
            "b5" => Ok(Method::B5),
            _ => Err(format!(
                "unknown method {s:?} (expected oracle, loft or b5)"
            )),
        }
    }
}

/// Evaluation problems per seed when the config does not say.
pub fn default_eval_problems(id: DomainId) -> usize {
    match id {
        DomainId::Cover | DomainId::Painting => 30,
        DomainId::Blocks => 10,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainId,
    pub methods: Vec<Method>,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub eval_problems: Option<usize>,
    /// Predicates withheld from parsing, chosen per seed.
    pub n_withheld: usize,
    pub planner: PlannerConfig,
    pub learner: LearnerConfig,
    pub datagen: DatagenConfig,
    pub domains: DomainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            domain: DomainId::Cover,
            methods: vec![Method::Oracle, Method::Loft, Method::B5],
            fractions: vec![0.1, 0.25, 0.5, 0.75, 1.0],
            seeds: (0..5).collect(),
            eval_problems: None,
            n_withheld: 0,
            planner: PlannerConfig::default(),
            learner: LearnerConfig::default(),
            datagen: DatagenConfig::default(),
            domains: DomainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn for_domain(domain: DomainId) -> Self {
        Self {
            domain,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn eval_problems(&self) -> usize {
        self.eval_problems
            .unwrap_or_else(|| default_eval_problems(self.domain))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }
        if self.fractions.is_empty() {
            return bad("fractions must not be empty".into());
        }
        if let Some(f) = self.fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return bad(format!("fraction {f} outside [0, 1]"));
        }
        if self.planner.n_samples == 0 {
            return bad("planner.n_samples must be at least 1".into());
        }
        self.learner.validate().map_err(HarnessError::Config)?;
        self.domains
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let domain = Domain::from_id(self.domain, &self.domains);
        let withholdable = withholdable_predicates(&domain).len();
        if self.n_withheld > withholdable {
            return bad(format!(
                "n_withheld {} exceeds the {withholdable} non-goal predicates of {}",
                self.n_withheld, self.domain
            ));
        }
        Ok(())
    }
}

/// One experiment cell: a method evaluated on one seed's problems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub domain: DomainId,
    pub method: Method,
    pub heuristic: Heuristic,
    pub fraction: f64,
    pub seed: u64,
    pub n_withheld: usize,
    pub solved_percent: f64,
    pub mean_wall_ms: f64,
    pub mean_nodes: f64,
    pub mean_sampler_calls: f64,
    pub learn_seconds: f64,
    pub n_operators: usize,
    pub error: String,
}

pub const STREAM_DATA: u64 = 1;
pub const STREAM_EVAL: u64 = 2;
pub const STREAM_SUBSAMPLE: u64 = 3;
pub const STREAM_PLAN: u64 = 4;
pub const STREAM_WITHHOLD: u64 = 5;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with stream identifiers so that every cell draws
/// from its own generator.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix(base), |h, p| splitmix(h ^ splitmix(*p)))
}

/// Generator for one stream of one base seed.
pub fn rng_for(base: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, parts))
}

/// Predicates that may be withheld: everything not used in goals.
pub fn withholdable_predicates(domain: &Domain) -> Vec<String> {
    domain
        .spec()
        .predicates
        .iter()
        .map(|p| p.name().to_string())
        .filter(|n| !domain.spec().goal_predicates.iter().any(|g| g == n))
        .collect()
}

/// The domain as seen by a learner that is missing `n` predicates, chosen
/// uniformly per seed.
pub fn withheld_domain(domain: &Domain, n: usize, seed: u64) -> Result<Domain, HarnessError> {
    if n == 0 {
        return Ok(domain.clone());
    }
    let mut names = withholdable_predicates(domain);
    names.shuffle(&mut rng_for(seed, &[STREAM_WITHHOLD]));
    names.truncate(n);
    domain
        .with_withheld(names)
        .map_err(|e| HarnessError::Config(e.to_string()))
}

pub fn eval_problems(domain: &Domain, n: usize, seed: u64) -> Result<Vec<Problem>, HarnessError> {
    let mut rng = rng_for(seed, &[STREAM_EVAL]);
    (0..n)
        .map(|_| {
            domain
                .generate_problem(ProblemSize::Eval, &mut rng)
                .map_err(|e| HarnessError::Datagen(e.into()))
        })
        .collect()
}

pub fn collect_for_seed(
    cfg: &ExperimentConfig,
    domain: &Domain,
    seed: u64,
) -> Result<Dataset, HarnessError> {
    let mut rng = rng_for(seed, &[STREAM_DATA]);
    Ok(datagen::collect_dataset(
        domain,
        cfg.domain,
        &cfg.datagen,
        seed,
        &mut rng,
    )?)
}

struct Cell {
    seed: u64,
    fraction: f64,
    method: Method,
}

fn empty_row(cfg: &ExperimentConfig, cell: &Cell) -> ResultRow {
    ResultRow {
        domain: cfg.domain,
        method: cell.method,
        heuristic: cfg.planner.heuristic,
        fraction: cell.fraction,
        seed: cell.seed,
        n_withheld: if cell.method == Method::Loft {
            cfg.n_withheld
        } else {
            0
        },
        solved_percent: 0.0,
        mean_wall_ms: 0.0,
        mean_nodes: 0.0,
        mean_sampler_calls: 0.0,
        learn_seconds: 0.0,
        n_operators: 0,
        error: String::new(),
    }
}

fn run_cell(
    cfg: &ExperimentConfig,
    domain: &Domain,
    cell: &Cell,
    data: Option<&Result<Dataset, String>>,
    problems: &[Problem],
) -> ResultRow {
    let mut row = empty_row(cfg, cell);
    let view = match cell.method {
        Method::Loft => match withheld_domain(domain, cfg.n_withheld, cell.seed) {
            Ok(d) => d,
            Err(e) => {
                row.error = e.to_string();
                return row;
            }
        },
        _ => domain.clone(),
    };
    let ops = match cell.method {
        Method::Oracle => Some(domain.oracle_operators().to_vec()),
        Method::B5 => None,
        Method::Loft => {
            let dataset = match data {
                Some(Ok(d)) => d,
                Some(Err(e)) => {
                    row.error = e.clone();
                    return row;
                }
                None => {
                    row.error = "no dataset".into();
                    return row;
                }
            };
            let mut rng = rng_for(cell.seed, &[STREAM_SUBSAMPLE, cell.fraction.to_bits()]);
            let sub = datagen::subsample(dataset, cell.fraction, &mut rng);
            let symbolic = datagen::to_symbolic(&view, &sub);
            let start = Instant::now();
            let learned = learn_operators(&symbolic, &cfg.learner);
            row.learn_seconds = start.elapsed().as_secs_f64();
            let det = determinize(&learned, P_MIN);
            row.n_operators = det.len();
            // with no operators the planner degenerates to enumeration
            (!det.is_empty()).then_some(det)
        }
    };
    let mut solved = 0;
    for (i, problem) in problems.iter().enumerate() {
        // the operator-free fallback draws exactly what B5 would
        let key = match &ops {
            Some(_) => [cell.method.tag(), cell.fraction.to_bits()],
            None => [Method::B5.tag(), 1.0f64.to_bits()],
        };
        let mut rng = rng_for(cell.seed, &[STREAM_PLAN, key[0], key[1], i as u64]);
        let result: SolveResult = match &ops {
            Some(ops) => planner::solve(&view, ops, problem, &cfg.planner, &mut rng),
            None => planner::solve_no_operators(&view, problem, &cfg.planner, &mut rng),
        };
        if let Some(plan) = &result.plan {
            assert!(
                planner::replay_reaches_goal(domain, problem, plan),
                "reported plan does not reach the goal"
            );
            solved += 1;
        }
        row.mean_wall_ms += result.stats.wall_ms;
        row.mean_nodes += result.stats.expansions as f64;
        row.mean_sampler_calls += result.stats.sampler_calls as f64;
    }
    let n = problems.len().max(1) as f64;
    row.solved_percent = 100.0 * solved as f64 / n;
    row.mean_wall_ms /= n;
    row.mean_nodes /= n;
    row.mean_sampler_calls /= n;
    row
}

type SeedInputs = (
    u64,
    Option<Result<Dataset, String>>,
    Result<Vec<Problem>, String>,
);

/// Runs every (seed, fraction, method) cell. Non-learning methods do not
/// depend on the fraction and are run once per seed at fraction 1.0.
/// Rows are ordered by seed, then method, then fraction.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, HarnessError> {
    cfg.validate()?;
    let domain = Domain::from_id(cfg.domain, &cfg.domains);
    let needs_data = cfg.methods.contains(&Method::Loft);
    let per_seed: Vec<SeedInputs> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let data =
                needs_data.then(|| collect_for_seed(cfg, &domain, seed).map_err(|e| e.to_string()));
            let problems =
                eval_problems(&domain, cfg.eval_problems(), seed).map_err(|e| e.to_string());
            (seed, data, problems)
        })
        .collect();
    let mut cells: Vec<(usize, Cell)> = Vec::new();
    for (k, (seed, _, _)) in per_seed.iter().enumerate() {
        let mut methods = cfg.methods.clone();
        methods.sort();
        methods.dedup();
        for method in methods {
            let fractions: Vec<f64> = if method == Method::Loft {
                cfg.fractions.clone()
            } else {
                vec![1.0]
            };
            for fraction in fractions {
                cells.push((
                    k,
                    Cell {
                        seed: *seed,
                        fraction,
                        method,
                    },
                ));
            }
        }
    }
    let rows = cells
        .par_iter()
        .map(|(k, cell)| {
            let (_, data, problems) = &per_seed[*k];
            match problems {
                Ok(problems) => run_cell(cfg, &domain, cell, data.as_ref(), problems),
                Err(e) => ResultRow {
                    error: e.clone(),
                    ..empty_row(cfg, cell)
                },
            }
        })
        .collect();
    Ok(rows)
}

/// LOFT only, with `n_withheld` predicates removed from parsing.
pub fn run_predicate_ablation(
    cfg: &ExperimentConfig,
    n_withheld: usize,
) -> Result<Vec<ResultRow>, HarnessError> {
    let cfg = ExperimentConfig {
        methods: vec![Method::Loft],
        n_withheld,
        ..cfg.clone()
    };
    run_experiment(&cfg)
}

/// Mean solved percent per (method, fraction), over seeds.
pub fn mean_solved(rows: &[ResultRow]) -> BTreeMap<(Method, u64), f64> {
    let mut acc: BTreeMap<(Method, u64), (f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = acc
            .entry((r.method, r.fraction.to_bits()))
            .or_insert((0.0, 0));
        e.0 += r.solved_percent;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect()
}
