//! Command-line front end for the lagged causal discovery toolkit.
//!
//! Every randomized stage takes an explicit seed, parallelism never changes
//! outputs (results are merged in canonical order before writing), and
//! failures exit nonzero with a machine-readable error JSON on stderr.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use lagcausal::baselines::{baseline_mvgc, baseline_pairwise_granger, baseline_var, BaselineResult};
use lagcausal::data::{enumerate_candidates, reshape_lagged};
use lagcausal::descriptors::{read_feature_csv, write_feature_csv, Extractor};
use lagcausal::dsep::{asymmetry_table, REFERENCE_BACKWARD, REFERENCE_FORWARD};
use lagcausal::metrics::{confusion, metrics};
use lagcausal::pipeline::{
    self, labels_for, LabeledExample, ScoredEdge, ThresholdCriterion, TrainingSet,
};
use lagcausal::stats::average_ranks;
use lagcausal::synth::{generate, GeneratedInstance, NoiseKind};
use lagcausal::{
    CandidateLink, DescriptorConfig, Error, ForestConfig, ForestModel, GenConfig, TemporalGraph,
    TimeSeriesMatrix,
};

const SEED_STRIDE: u64 = 0x9e3779b97f4a7c15;

#[derive(Parser)]
#[command(name = "lagcausal", version, about = "Lagged causal link discovery toolkit")]
struct Cli {
    /// Flat key=value config file; command-line flags win over config values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed; required by `generate` and `train`
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker count; affects wall time only, never outputs
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory (generate, predict, evaluate) or file (others)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate nonlinear autoregressive series with ground-truth graphs
    Generate {
        #[arg(long)]
        process: u8,
        /// Number of variables
        #[arg(long, default_value_t = 5)]
        n: usize,
        /// Number of timesteps
        #[arg(long, default_value_t = 250)]
        t: usize,
        /// gaussian | laplace | uniform
        #[arg(long, default_value = "gaussian")]
        noise: String,
        #[arg(long, default_value_t = 1.0)]
        noise_scale: f64,
        #[arg(long, default_value_t = 2)]
        max_parents: usize,
        /// How many independent series to generate
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Compute the per-link feature table for one series
    Featurize {
        /// Series CSV (header row of variable names)
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        max_lag: Option<usize>,
        /// Ground-truth graph JSON; adds a 0/1 label column
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Nearest-neighbor count for the information estimators
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Train the balanced random forest
    Train {
        /// Labeled feature CSV, or a directory of series + *_truth.json pairs
        #[arg(long)]
        input: PathBuf,
        /// Required in directory mode
        #[arg(long)]
        max_lag: Option<usize>,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        /// 0 = unlimited
        #[arg(long, default_value_t = 0)]
        max_depth: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Score every candidate link of a series and threshold into a graph
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        max_lag: Option<usize>,
        /// Decision threshold; edges require probability strictly above it
        #[arg(long)]
        threshold: Option<f64>,
        /// Drop i -> i candidates from the outputs
        #[arg(long)]
        skip_self_links: bool,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Score a predicted graph (or a baseline's) against a ground truth
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        max_lag: Option<usize>,
        /// Predicted-edges JSON; mutually exclusive with --baseline
        #[arg(long)]
        pred: Option<PathBuf>,
        /// Series CSV to run a baseline on
        #[arg(long)]
        series: Option<PathBuf>,
        /// var | pairwise-granger | mvgc
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Coefficient-magnitude gate for the var baseline
        #[arg(long, default_value_t = 0.1)]
        coef_min: f64,
        /// Attribute pairwise-Granger rejections to lag 1 only
        #[arg(long)]
        lag1_only: bool,
    },
    /// Leave-one-process-out threshold selection on labeled feature tables
    Threshold {
        /// Directory of labeled feature CSVs named p<process>_*.csv
        #[arg(long)]
        input: PathBuf,
        /// max-f1 | pr-break-even | youden | roc-distance
        #[arg(long, default_value = "roc-distance")]
        criterion: String,
        #[arg(long, default_value_t = 100)]
        trees: usize,
    },
    /// Friedman + pairwise Wilcoxon/Holm comparison of a methods-by-runs score table
    Stattest {
        /// CSV with one column per method and one row per run
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Open d-connecting path counts for the forward/backward query pair
    Pathcount {
        #[arg(long)]
        scenario: u8,
        #[arg(long, default_value_t = 9)]
        k_max: usize,
    },
    /// Feature importances of a trained model
    Importance {
        #[arg(long)]
        model: PathBuf,
        /// Keep only the highest-ranked features
        #[arg(long)]
        top: Option<usize>,
    },
}

/// Flat key=value config; '#' starts a comment.
struct Config(BTreeMap<String, String>);

impl Config {
    fn load(path: Option<&Path>) -> Result<Self, Error> {
        let mut map = BTreeMap::new();
        if let Some(p) = path {
            let text = fs::read_to_string(p)?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap().trim();
                if line.is_empty() {
                    continue;
                }
                let Some((k, v)) = line.split_once('=') else {
                    return Err(Error::InvalidConfig(format!(
                        "config line {}: expected key=value, got '{line}'",
                        lineno + 1
                    )));
                };
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(Self(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, Error> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                Error::InvalidConfig(format!("config key '{key}': cannot parse '{raw}'"))
            }),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, class) = classify(&e);
            let payload = serde_json::json!({
                "error": class,
                "code": code,
                "message": e.to_string(),
            });
            eprintln!("{payload}");
            ExitCode::from(code)
        }
    }
}

/// Distinct exit code per error class.
fn classify(e: &Error) -> (u8, &'static str) {
    match e {
        Error::Io(_) => (3, "io"),
        Error::Csv(_) | Error::Json(_) | Error::Deserialize { .. } => (4, "schema"),
        Error::InvalidConfig(_)
        | Error::InvalidLag(_)
        | Error::InvalidTrainingSet(_)
        | Error::ShapeMismatch(_) => (5, "invalid"),
        Error::Incompatibility(_) | Error::Inconsistent(_) | Error::ColumnNotFound { .. } => {
            (6, "incompatible")
        }
        Error::DegenerateInput(_)
        | Error::InsufficientSamples { .. }
        | Error::InsufficientHistory { .. }
        | Error::UnstableProcess(_) => (7, "data"),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let cfg = Config::load(cli.config.as_deref())?;
    let seed = match cli.seed {
        Some(s) => Some(s),
        None => cfg.get("seed")?,
    };
    let jobs: usize = match cli.jobs {
        Some(j) => j,
        None => cfg.get("jobs")?.unwrap_or(1),
    };
    if jobs < 1 {
        return Err(Error::InvalidConfig("--jobs must be >= 1".into()));
    }
    let out = match cli.out {
        Some(o) => Some(o),
        None => cfg.get::<String>("out")?.map(PathBuf::from),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;

    let need_seed = || seed.ok_or_else(|| Error::InvalidConfig("--seed is required".into()));
    let max_lag_or = |flag: Option<usize>| -> Result<usize, Error> {
        match flag {
            Some(l) => Ok(l),
            None => cfg
                .get("max-lag")?
                .ok_or_else(|| Error::InvalidConfig("--max-lag is required".into())),
        }
    };

    match cli.cmd {
        Cmd::Generate {
            process,
            n,
            t,
            noise,
            noise_scale,
            max_parents,
            count,
        } => {
            let seed = need_seed()?;
            let dir = out.unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&dir)?;
            let noise_kind = NoiseKind::parse(&noise)?;
            let mut files = Vec::new();
            for idx in 0..count {
                let mut gc = GenConfig::new(process, noise_kind, 0);
                gc.n_vars = n;
                gc.timesteps = t;
                gc.noise_scale = noise_scale;
                gc.max_parents = max_parents;
                gc.seed = seed.wrapping_add((idx as u64).wrapping_mul(SEED_STRIDE));
                let inst = generate(&gc)?;
                let stem = format!("p{process}_{}_{idx}", noise_kind.name());
                let series_path = dir.join(format!("{stem}.csv"));
                let truth_path = dir.join(format!("{stem}_truth.json"));
                inst.series.write_csv(fs::File::create(&series_path)?)?;
                fs::write(&truth_path, inst.truth.to_json()?)?;
                files.push(series_path.display().to_string());
                files.push(truth_path.display().to_string());
            }
            println!("{}", serde_json::json!({ "generated": files }));
        }

        Cmd::Featurize {
            input,
            max_lag,
            truth,
            k,
        } => {
            let max_lag = max_lag_or(max_lag)?;
            let ts = TimeSeriesMatrix::read_csv_path(&input)?;
            let dcfg = DescriptorConfig {
                k_neighbors: k,
                ..Default::default()
            };
            let ex = Extractor::new(reshape_lagged(&ts, max_lag)?, dcfg)?;
            let mut vectors = ex.compute_all()?;
            vectors.sort_by_key(|v| (v.link.cause, v.link.lag, v.link.effect));
            let labels = match truth {
                Some(tp) => {
                    let g = TemporalGraph::from_json(&fs::read_to_string(tp)?)?;
                    let universe: Vec<CandidateLink> = vectors.iter().map(|v| v.link).collect();
                    Some(labels_for(&g, &universe))
                }
                None => None,
            };
            let out_path = out.unwrap_or_else(|| PathBuf::from("features.csv"));
            write_feature_csv(fs::File::create(&out_path)?, &vectors, labels.as_deref())?;
            println!(
                "{}",
                serde_json::json!({ "features": out_path.display().to_string(), "rows": vectors.len() })
            );
        }

        Cmd::Train {
            input,
            max_lag,
            trees,
            max_depth,
            k,
        } => {
            let seed = need_seed()?;
            let dcfg = DescriptorConfig {
                k_neighbors: k,
                ..Default::default()
            };
            let fcfg = ForestConfig {
                n_trees: trees,
                max_depth,
                seed,
                ..Default::default()
            };
            let set = if input.is_dir() {
                let max_lag = max_lag_or(max_lag)?;
                let instances = load_instance_dir(&input)?;
                pipeline::build_training_set(&instances, max_lag, &dcfg)?
            } else {
                let (vectors, labels) = read_feature_csv(fs::File::open(&input)?)?;
                let labels = labels.ok_or_else(|| {
                    Error::InvalidTrainingSet("feature csv has no label column".into())
                })?;
                TrainingSet {
                    examples: vectors
                        .into_iter()
                        .zip(labels)
                        .map(|(vector, label)| LabeledExample {
                            vector,
                            label,
                            process_id: 0,
                            series_index: 0,
                        })
                        .collect(),
                    skipped: Vec::new(),
                }
            };
            if !set.skipped.is_empty() {
                eprintln!(
                    "warning: {} degenerate instance(s) skipped: {:?}",
                    set.skipped.len(),
                    set.skipped
                );
            }
            let model = pipeline::train_classifier(&set, &fcfg, &dcfg)?;
            let out_path = out.unwrap_or_else(|| PathBuf::from("model.bin"));
            model.save_path(&out_path)?;
            println!(
                "{}",
                serde_json::json!({
                    "model": out_path.display().to_string(),
                    "examples": set.examples.len(),
                    "positives": set.examples.iter().filter(|e| e.label == 1).count(),
                    "skipped_instances": set.skipped.len(),
                })
            );
        }

        Cmd::Predict {
            model,
            input,
            max_lag,
            threshold,
            skip_self_links,
            k,
        } => {
            let max_lag = max_lag_or(max_lag)?;
            let tau = match threshold {
                Some(t) => t,
                None => cfg.get("threshold")?.unwrap_or(0.5),
            };
            let model = ForestModel::load_path(&model)?;
            let ts = TimeSeriesMatrix::read_csv_path(&input)?;
            let dcfg = DescriptorConfig {
                k_neighbors: k,
                ..Default::default()
            };
            let (mut scored, graph) = pipeline::infer(&model, &ts, max_lag, tau, skip_self_links, &dcfg)?;
            scored.sort_by_key(|s| (s.cause, s.lag, s.effect));
            let dir = out.unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&dir)?;
            let edges_path = dir.join("edges.json");
            let scores_path = dir.join("scores.csv");
            fs::write(&edges_path, graph.to_json()?)?;
            write_scores_csv(&scores_path, &scored)?;
            println!(
                "{}",
                serde_json::json!({
                    "edges": edges_path.display().to_string(),
                    "scores": scores_path.display().to_string(),
                    "n_edges": graph.len(),
                    "threshold": tau,
                })
            );
        }

        Cmd::Evaluate {
            truth,
            max_lag,
            pred,
            series,
            baseline,
            alpha,
            coef_min,
            lag1_only,
        } => {
            let max_lag = max_lag_or(max_lag)?;
            let truth_graph = TemporalGraph::from_json(&fs::read_to_string(&truth)?)?;
            let (predicted, meta) = match (pred, series, baseline) {
                (Some(p), None, None) => {
                    let g = TemporalGraph::from_json(&fs::read_to_string(&p)?)?;
                    (g, serde_json::json!({ "method": "model" }))
                }
                (None, Some(s), Some(b)) => {
                    let ts = TimeSeriesMatrix::read_csv_path(&s)?;
                    let BaselineResult {
                        graph,
                        used_ridge_fallback,
                    } = match b.as_str() {
                        "var" => baseline_var(&ts, max_lag, alpha, coef_min)?,
                        "pairwise-granger" => {
                            baseline_pairwise_granger(&ts, max_lag, alpha, lag1_only)?
                        }
                        "mvgc" => baseline_mvgc(&ts, max_lag, alpha)?,
                        other => {
                            return Err(Error::InvalidConfig(format!(
                                "unknown baseline '{other}'"
                            )))
                        }
                    };
                    if used_ridge_fallback {
                        eprintln!("warning: singular regression, ridge fallback used");
                    }
                    (
                        graph,
                        serde_json::json!({
                            "method": b,
                            "alpha": alpha,
                            "coef_min": coef_min,
                            "lag1_only": lag1_only,
                            "used_ridge_fallback": used_ridge_fallback,
                            // test forms not fixed upstream; what this build does:
                            "var_test": "two-sided t-test per OLS coefficient",
                            "granger_test": "F-test on the lag-block restriction",
                        }),
                    )
                }
                _ => {
                    return Err(Error::InvalidConfig(
                        "pass either --pred, or --series with --baseline".into(),
                    ))
                }
            };
            let universe = enumerate_candidates(truth_graph.n_vars, max_lag);
            let counts = confusion(&predicted, &truth_graph, &universe)?;
            let m = metrics(&counts);
            let report = serde_json::json!({
                "counts": counts,
                "metrics": m,
                "metadata": meta,
            });
            let dir = out.unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&dir)?;
            let json_path = dir.join("metrics.json");
            let csv_path = dir.join("metrics.csv");
            fs::write(&json_path, serde_json::to_string_pretty(&report)?)?;
            let mut w = csv::Writer::from_path(&csv_path)?;
            w.write_record([
                "precision",
                "recall",
                "f1",
                "accuracy",
                "balanced_accuracy",
                "tp",
                "fp",
                "tn",
                "fn",
            ])?;
            w.write_record([
                format!("{:.17e}", m.precision),
                format!("{:.17e}", m.recall),
                format!("{:.17e}", m.f1),
                format!("{:.17e}", m.accuracy),
                format!("{:.17e}", m.balanced_accuracy),
                counts.tp.to_string(),
                counts.fp.to_string(),
                counts.tn.to_string(),
                counts.fn_.to_string(),
            ])?;
            w.flush()?;
            println!("{report}");
        }

        Cmd::Threshold {
            input,
            criterion,
            trees,
        } => {
            let seed = need_seed()?;
            let criterion = ThresholdCriterion::parse(&criterion)?;
            let examples = load_labeled_feature_dir(&input)?;
            let fcfg = ForestConfig {
                n_trees: trees,
                seed,
                ..Default::default()
            };
            let report = pipeline::select_threshold(&examples, &fcfg, criterion)?;
            let text = serde_json::to_string_pretty(&report)?;
            let out_path = out.unwrap_or_else(|| PathBuf::from("threshold.json"));
            fs::write(&out_path, &text)?;
            println!("{text}");
        }

        Cmd::Stattest { scores, alpha } => {
            let (names, table) = read_scores_csv(&scores)?;
            let summary = average_ranks(&table, &names, alpha)?;
            let text = serde_json::to_string_pretty(&summary)?;
            let out_path = out.unwrap_or_else(|| PathBuf::from("cd_diagram.json"));
            fs::write(&out_path, &text)?;
            println!("{text}");
        }

        Cmd::Pathcount { scenario, k_max } => {
            let rows = asymmetry_table(scenario, k_max)?;
            let out_path = out.unwrap_or_else(|| PathBuf::from("pathcounts.csv"));
            let mut w = csv::Writer::from_path(&out_path)?;
            w.write_record([
                "k",
                "forward",
                "backward",
                "delta",
                "ref_forward",
                "ref_backward",
                "ref_delta",
            ])?;
            let mut mismatch = false;
            for row in &rows {
                let (rf, rb) = reference_counts(scenario, row.k);
                let (rf_s, rb_s, rd_s) = match (rf, rb) {
                    (Some(f), Some(b)) => {
                        mismatch |= f != row.forward || b != row.backward;
                        (f.to_string(), b.to_string(), (f as i64 - b as i64).to_string())
                    }
                    _ => (String::new(), String::new(), String::new()),
                };
                w.write_record([
                    row.k.to_string(),
                    row.forward.to_string(),
                    row.backward.to_string(),
                    row.delta.to_string(),
                    rf_s,
                    rb_s,
                    rd_s,
                ])?;
            }
            w.flush()?;
            println!(
                "{}",
                serde_json::json!({
                    "table": out_path.display().to_string(),
                    "scenario": scenario,
                    "matches_reference": !mismatch,
                })
            );
        }

        Cmd::Importance { model, top } => {
            let model = ForestModel::load_path(&model)?;
            let mut pairs: Vec<(String, f64)> = model
                .feature_names
                .iter()
                .cloned()
                .zip(model.feature_importances().iter().copied())
                .collect();
            pairs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            if let Some(n) = top {
                pairs.truncate(n);
            }
            let items: Vec<serde_json::Value> = pairs
                .iter()
                .map(|(name, imp)| serde_json::json!({ "feature": name, "importance": imp }))
                .collect();
            let text = serde_json::to_string_pretty(&items)?;
            if let Some(p) = out {
                fs::write(&p, &text)?;
            }
            println!("{text}");
        }
    }
    Ok(())
}

/// Reference counts for the forward/backward queries of the three template
/// structures, published by the study this tool replicates; lag k in 1..=9.
fn reference_counts(scenario: u8, k: usize) -> (Option<u64>, Option<u64>) {
    if !(1..=9).contains(&k) || !(1..=3).contains(&scenario) {
        return (None, None);
    }
    let s = scenario as usize - 1;
    (
        Some(REFERENCE_FORWARD[s][k - 1]),
        Some(REFERENCE_BACKWARD[s][k - 1]),
    )
}

fn write_scores_csv(path: &Path, scored: &[ScoredEdge]) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cause", "lag", "effect", "probability"])?;
    for s in scored {
        w.write_record([
            s.cause.to_string(),
            s.lag.to_string(),
            s.effect.to_string(),
            format!("{:.17e}", s.probability),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Methods-by-runs score table: one column per method, one row per run.
fn read_scores_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), Error> {
    let mut rdr = csv::Reader::from_path(path)?;
    let names: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
    let mut table: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for record in rdr.records() {
        let record = record?;
        if record.len() != names.len() {
            return Err(Error::ShapeMismatch(format!(
                "score row has {} fields, expected {}",
                record.len(),
                names.len()
            )));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::ShapeMismatch(format!("score '{field}' is not a number"))
            })?;
            table[j].push(v);
        }
    }
    Ok((names, table))
}

/// Process id from a file name shaped p<digits>_... .
fn process_id_of(path: &Path) -> Result<u8, Error> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    let digits: String = stem
        .strip_prefix('p')
        .unwrap_or("")
        .chars()
        .take_while(|c| c.is_ascii_digit())
        .collect();
    digits.parse().map_err(|_| {
        Error::InvalidConfig(format!(
            "cannot read a process id from file name '{stem}': expected p<digits>_..."
        ))
    })
}

/// Pairs every *_truth.json in the directory with its series CSV.
fn load_instance_dir(dir: &Path) -> Result<Vec<GeneratedInstance>, Error> {
    let mut truth_files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with("_truth.json"))
        })
        .collect();
    truth_files.sort();
    if truth_files.is_empty() {
        return Err(Error::InvalidTrainingSet(format!(
            "no *_truth.json files in {}",
            dir.display()
        )));
    }
    let mut instances = Vec::new();
    for truth_path in truth_files {
        let name = truth_path.file_name().unwrap().to_str().unwrap();
        let stem = name.strip_suffix("_truth.json").unwrap();
        let series_path = dir.join(format!("{stem}.csv"));
        let series = TimeSeriesMatrix::read_csv_path(&series_path)?;
        let truth = TemporalGraph::from_json(&fs::read_to_string(&truth_path)?)?;
        let mut config = GenConfig::new(process_id_of(&truth_path)?, NoiseKind::Gaussian, 0);
        config.n_vars = series.n_vars();
        config.timesteps = series.timesteps();
        instances.push(GeneratedInstance {
            series,
            truth,
            parent_sets: Vec::new(),
            config,
        });
    }
    Ok(instances)
}

/// Reads every labeled feature CSV in the directory, grouping by the
/// process id encoded in the file name (p<digits>_...).
fn load_labeled_feature_dir(dir: &Path) -> Result<Vec<LabeledExample>, Error> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidTrainingSet(format!(
            "no feature CSVs in {}",
            dir.display()
        )));
    }
    let mut examples = Vec::new();
    for (idx, path) in files.iter().enumerate() {
        let process_id = process_id_of(path)?;
        let (vectors, labels) = read_feature_csv(fs::File::open(path)?)?;
        let labels = labels.ok_or_else(|| {
            Error::InvalidTrainingSet(format!("{} has no label column", path.display()))
        })?;
        examples.extend(vectors.into_iter().zip(labels).map(|(vector, label)| {
            LabeledExample {
                vector,
                label,
                process_id,
                series_index: idx,
            }
        }));
    }
    Ok(examples)
}
