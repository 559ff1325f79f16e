use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use loft_core::datagen::{self, Dataset};
use loft_core::determinize::{
    determinize, export_domain, export_probabilistic_domain, export_problem, PddlOptions, P_MIN,
};
use loft_core::harness::{self, ExperimentConfig, Method, ResultRow};
use loft_core::learner::learn_operators;
use loft_core::operators::{
    read_deterministic, read_probabilistic, write_deterministic, write_probabilistic,
    PROBABILISTIC_HEADER,
};
use loft_core::planner::{self, Heuristic};
use loft_core::{DeterministicOperator, Domain, DomainId, ProbabilisticOperator};

#[derive(Parser, Debug)]
#[command(
    name = "loft",
    version,
    about = "Learn symbolic operators from demonstrations and plan with them"
)]
struct Cli {
    /// Base seed; overrides the seed list of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    domain: Option<DomainId>,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Collect demonstrations and negative transitions into a dataset file.
    Collect {
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Learn probabilistic operators from a dataset.
    Learn {
        /// Dataset file; defaults to the one `collect` writes.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        fraction: f64,
    },
    /// Solve freshly generated evaluation problems.
    Plan {
        #[arg(long, default_value = "loft")]
        method: Method,
        /// Operator file (deterministic or probabilistic) for `--method loft`.
        #[arg(long)]
        operators: Option<PathBuf>,
        #[arg(long)]
        problems: Option<usize>,
        #[arg(long)]
        heuristic: Option<Heuristic>,
    },
    /// Write PDDL domain and problem files.
    ExportPddl {
        /// Operator file; the oracle operators are exported when omitted.
        #[arg(long)]
        operators: Option<PathBuf>,
        /// Untyped parameters with type predicates.
        #[arg(long)]
        strict_pddl: bool,
        #[arg(long, default_value_t = 1)]
        problems: usize,
    },
    /// Learning curves over data fractions for every configured method.
    Experiment {
        #[arg(long)]
        heuristic: Option<Heuristic>,
    },
    /// LOFT with 0..=max predicates withheld from parsing.
    AblatePredicates {
        #[arg(long, default_value_t = 3)]
        max_withheld: usize,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(d) = cli.domain {
        cfg.domain = d;
    }
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dataset_path(out: &Path, cfg: &ExperimentConfig, seed: u64) -> PathBuf {
    out.join(format!("{}-seed{seed}.jsonl", cfg.domain))
}

fn operators_path(out: &Path, cfg: &ExperimentConfig) -> PathBuf {
    out.join(format!("{}-operators.txt", cfg.domain))
}

enum LoadedOperators {
    Deterministic(Vec<DeterministicOperator>),
    Probabilistic(Vec<ProbabilisticOperator>),
}

impl LoadedOperators {
    fn deterministic(&self) -> Vec<DeterministicOperator> {
        match self {
            LoadedOperators::Deterministic(ops) => ops.clone(),
            LoadedOperators::Probabilistic(ops) => determinize(ops, P_MIN),
        }
    }
}

fn read_operators(path: &Path, domain: &Domain) -> Result<LoadedOperators> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let ops = if text.starts_with(PROBABILISTIC_HEADER) {
        LoadedOperators::Probabilistic(read_probabilistic(&text, domain.spec())?)
    } else {
        LoadedOperators::Deterministic(read_deterministic(&text, domain.spec())?)
    };
    Ok(ops)
}

fn write_rows(out: &Path, stem: &str, title: &str, rows: &[ResultRow]) -> Result<()> {
    let csv = out.join(format!("{stem}.csv"));
    harness::write_csv_file(rows, &csv)?;
    let summary = harness::summarize(rows);
    harness::write_summary_csv(&summary, &out.join(format!("{stem}-summary.csv")))?;
    harness::plot_learning_curve(rows, title, &out.join(format!("{stem}.svg")))?;
    for s in &summary {
        println!(
            "{:<7} {:<6} withheld={} fraction={:<5} solved={:>6.1}% (sd {:.1}) learn={:.3}s",
            s.method.name(),
            s.heuristic.name(),
            s.n_withheld,
            s.fraction,
            s.mean_solved_percent,
            s.std_solved_percent,
            s.mean_learn_seconds
        );
    }
    for r in rows.iter().filter(|r| !r.error.is_empty()) {
        log::warn!(
            "{} seed {} fraction {}: {}",
            r.method,
            r.seed,
            r.fraction,
            r.error
        );
    }
    println!("wrote {}", csv.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    let seed = cfg.seeds[0];
    let domain = Domain::from_id(cfg.domain, &cfg.domains);
    let out = &cli.out_dir;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match cli.command {
        Command::Collect { output } => {
            let path = output.unwrap_or_else(|| dataset_path(out, &cfg, seed));
            let dataset = harness::collect_for_seed(&cfg, &domain, seed)?;
            datagen::write_dataset(&dataset, BufWriter::new(File::create(&path)?))?;
            println!(
                "{} transitions -> {}",
                dataset.transitions.len(),
                path.display()
            );
        }
        Command::Learn { data, fraction } => {
            if !(0.0..=1.0).contains(&fraction) {
                bail!("fraction {fraction} outside [0, 1]");
            }
            let path = data.unwrap_or_else(|| dataset_path(out, &cfg, seed));
            let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
            let dataset: Dataset = datagen::read_dataset(BufReader::new(file), domain.spec())?;
            let view = harness::withheld_domain(&domain, cfg.n_withheld, seed)?;
            let mut rng = harness::rng_for(seed, &[harness::STREAM_SUBSAMPLE, fraction.to_bits()]);
            let sub = datagen::subsample(&dataset, fraction, &mut rng);
            let symbolic = datagen::to_symbolic(&view, &sub);
            let start = Instant::now();
            let learned = learn_operators(&symbolic, &cfg.learner);
            let secs = start.elapsed().as_secs_f64();
            let det = determinize(&learned, P_MIN);
            let prob_path = operators_path(out, &cfg);
            let det_path = out.join(format!("{}-operators-det.txt", cfg.domain));
            fs::write(&prob_path, write_probabilistic(&learned))?;
            fs::write(&det_path, write_deterministic(&det))?;
            println!(
                "learned {} operators ({} deterministic) from {} transitions in {secs:.3}s",
                learned.len(),
                det.len(),
                sub.transitions.len()
            );
            println!("wrote {} and {}", prob_path.display(), det_path.display());
        }
        Command::Plan {
            method,
            operators,
            problems,
            heuristic,
        } => {
            if let Some(h) = heuristic {
                cfg.planner.heuristic = h;
            }
            let ops = match method {
                Method::Oracle => Some(domain.oracle_operators().to_vec()),
                Method::B5 => None,
                Method::Loft => {
                    let path = operators.unwrap_or_else(|| operators_path(out, &cfg));
                    Some(read_operators(&path, &domain)?.deterministic())
                }
            };
            let n = problems.unwrap_or_else(|| cfg.eval_problems());
            let problems = harness::eval_problems(&domain, n, seed)?;
            let path = out.join(format!("{}-{method}-plans.jsonl", cfg.domain));
            let mut w = BufWriter::new(File::create(&path)?);
            let mut solved = 0;
            for (i, problem) in problems.iter().enumerate() {
                let mut rng = harness::rng_for(seed, &[harness::STREAM_PLAN, i as u64]);
                let result = match &ops {
                    Some(ops) => planner::solve(&domain, ops, problem, &cfg.planner, &mut rng),
                    None => planner::solve_no_operators(&domain, problem, &cfg.planner, &mut rng),
                };
                solved += usize::from(result.solved());
                let plan: Option<Vec<_>> = result
                    .plan
                    .as_ref()
                    .map(|p| p.iter().map(|a| a.to_record()).collect());
                let line = json!({ "problem": i, "solved": result.solved(), "stats": result.stats, "plan": plan });
                writeln!(w, "{line}")?;
            }
            w.flush()?;
            println!(
                "{method}: solved {solved}/{} ({:.1}%) -> {}",
                problems.len(),
                100.0 * solved as f64 / problems.len().max(1) as f64,
                path.display()
            );
        }
        Command::ExportPddl {
            operators,
            strict_pddl,
            problems,
        } => {
            let opts = PddlOptions {
                strict: strict_pddl,
            };
            let domain_text = match &operators {
                None => export_domain(domain.oracle_operators(), domain.spec(), opts)?,
                Some(path) => match read_operators(path, &domain)? {
                    LoadedOperators::Deterministic(ops) => {
                        export_domain(&ops, domain.spec(), opts)?
                    }
                    LoadedOperators::Probabilistic(ops) => {
                        let ppddl = out.join(format!("{}-domain-probabilistic.pddl", cfg.domain));
                        fs::write(
                            &ppddl,
                            export_probabilistic_domain(&ops, domain.spec(), opts)?,
                        )?;
                        println!("wrote {}", ppddl.display());
                        export_domain(&determinize(&ops, P_MIN), domain.spec(), opts)?
                    }
                },
            };
            let domain_path = out.join(format!("{}-domain.pddl", cfg.domain));
            fs::write(&domain_path, domain_text)?;
            println!("wrote {}", domain_path.display());
            for (i, problem) in harness::eval_problems(&domain, problems, seed)?
                .iter()
                .enumerate()
            {
                let name = format!("{}-problem{i}", cfg.domain);
                let text = export_problem(
                    domain.spec(),
                    &name,
                    &problem.objects,
                    &domain.parse(&problem.x0),
                    &problem.goal,
                    opts,
                )?;
                let path = out.join(format!("{name}.pddl"));
                fs::write(&path, text)?;
                println!("wrote {}", path.display());
            }
        }
        Command::Experiment { heuristic } => {
            if let Some(h) = heuristic {
                cfg.planner.heuristic = h;
            }
            let rows = harness::run_experiment(&cfg)?;
            let stem = format!("{}-{}", cfg.domain, cfg.planner.heuristic.name());
            write_rows(out, &stem, cfg.domain.name(), &rows)?;
        }
        Command::AblatePredicates { max_withheld } => {
            let limit = harness::withholdable_predicates(&domain).len();
            if max_withheld > limit {
                bail!(
                    "{} has only {limit} predicates that can be withheld",
                    cfg.domain
                );
            }
            let mut rows = Vec::new();
            for n in 0..=max_withheld {
                rows.extend(harness::run_predicate_ablation(&cfg, n)?);
            }
            let stem = format!("{}-ablation", cfg.domain);
            write_rows(
                out,
                &stem,
                &format!("{} predicate ablation", cfg.domain),
                &rows,
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
