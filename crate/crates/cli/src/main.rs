use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use yellowcast::dataset::{load_dataset, write_atomic, write_dataset};
use yellowcast::eval::{
    evaluate_intention, evaluate_trajectory, intention_plot_csv, prediction_plot_csv,
    trajectory_plot_csv, EvaluationReport,
};
use yellowcast::intention::BnModel;
use yellowcast::irl::IrlModel;
use yellowcast::online::{PredictionLog, RollingConfig};
use yellowcast::oracle::{check_bn, check_gradient, check_softmin, seeded_rng};
use yellowcast::pipeline::{predict_records, train_bn, train_irl, BnConfig, IrlPipelineConfig};
use yellowcast::sim::{generate_batch, reference_model, BatchSpec, ScenarioConfig, ScenarioRecord};
use yellowcast::types::Intention;

const EXIT_VALIDATION: u8 = 2;
const EXIT_INGESTION: u8 = 3;
const EXIT_NONCONVERGENCE: u8 = 4;
const EXIT_ORACLE: u8 = 1;

#[derive(Parser)]
#[command(
    name = "yellowcast",
    version,
    about = "Yellow-light intention and trajectory prediction"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Base random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON file overriding any part of the default configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic train, test and intention datasets.
    Simulate {
        /// Which sets to generate.
        #[arg(long, value_delimiter = ',', default_values_t = [Set::Train, Set::Test, Set::Intention])]
        sets: Vec<Set>,
    },
    /// Fit the intention network on a dataset directory.
    TrainBn {
        #[arg(long)]
        data: PathBuf,
    },
    /// Learn pass and stop weights on a dataset directory.
    TrainIrl {
        #[arg(long)]
        data: PathBuf,
        /// Exit 0 even if training stops before the gap tolerance is met.
        #[arg(long)]
        allow_nonconverged: bool,
    },
    /// Rolling-horizon prediction over every record of a dataset.
    Predict {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        bn: PathBuf,
        /// Trained weights; omit together with --reference to use the
        /// simulator's own driver model.
        #[arg(long, required_unless_present = "reference")]
        irl: Option<PathBuf>,
        #[arg(long, conflicts_with = "irl")]
        reference: bool,
        /// Only predict this vehicle.
        #[arg(long)]
        vehicle: Option<String>,
    },
    /// Score an intention network and/or prediction logs against a dataset.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        bn: Option<PathBuf>,
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Brute-force checks of inference, normalization and the likelihood gradient.
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum Set {
    Train,
    Test,
    Intention,
}

impl std::fmt::Display for Set {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Set::Train => "train",
            Set::Test => "test",
            Set::Intention => "intention",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Batches {
    train: BatchSpec,
    test: BatchSpec,
    intention: BatchSpec,
}

impl Default for Batches {
    fn default() -> Self {
        Self {
            train: BatchSpec::train(),
            test: BatchSpec::test(),
            intention: BatchSpec::intention(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Config {
    scenario: ScenarioConfig,
    batches: Batches,
    bn: BnConfig,
    irl: IrlPipelineConfig,
    rolling: RollingConfig,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

type Outcome<T = ()> = Result<T, Failure>;

impl From<yellowcast::Error> for Failure {
    fn from(e: yellowcast::Error) -> Self {
        let code = if e.is_validation() {
            EXIT_VALIDATION
        } else {
            EXIT_INGESTION
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

trait Coded<T> {
    fn code(self, code: u8, what: impl FnOnce() -> String) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Coded<T> for Result<T, E> {
    fn code(self, code: u8, what: impl FnOnce() -> String) -> Outcome<T> {
        self.map_err(|e| Failure {
            code,
            error: e.into().context(what()),
        })
    }
}

fn load_config(path: Option<&Path>) -> Outcome<Config> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = std::fs::read_to_string(path)
        .code(EXIT_INGESTION, || format!("reading {}", path.display()))?;
    let cfg: Config = serde_json::from_str(&text)
        .code(EXIT_VALIDATION, || format!("parsing {}", path.display()))?;
    cfg.scenario.validate()?;
    cfg.irl.train.validate()?;
    Ok(cfg)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Outcome<T> {
    let f = File::open(path).code(EXIT_INGESTION, || format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f))
        .code(EXIT_INGESTION, || format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let mut bytes =
        serde_json::to_vec_pretty(value).code(EXIT_VALIDATION, || "serializing".into())?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)?;
    Ok(())
}

fn load_records(dir: &Path) -> Outcome<Vec<ScenarioRecord>> {
    let ds = load_dataset(dir)?;
    for d in &ds.diagnostics {
        eprintln!("warning: {d}");
    }
    Ok(ds.records)
}

fn count(records: &[ScenarioRecord], i: Intention) -> usize {
    records.iter().filter(|r| r.intention == i).count()
}

fn run(cli: Cli) -> Outcome {
    let cfg = load_config(cli.common.config.as_deref())?;
    let out = &cli.common.out;
    std::fs::create_dir_all(out).code(EXIT_INGESTION, || format!("creating {}", out.display()))?;

    match cli.command {
        Command::Simulate { sets } => {
            for set in sets {
                let (spec, offset) = match set {
                    Set::Train => (&cfg.batches.train, 0),
                    Set::Test => (&cfg.batches.test, 1),
                    Set::Intention => (&cfg.batches.intention, 2),
                };
                let records =
                    generate_batch(&cfg.scenario, spec, cli.common.seed.wrapping_add(offset))?;
                write_dataset(&out.join(set.to_string()), &records)?;
                println!(
                    "{set}: {} records ({} pass, {} stop)",
                    records.len(),
                    count(&records, Intention::Pass),
                    count(&records, Intention::Stop)
                );
            }
        }
        Command::TrainBn { data } => {
            let records = load_records(&data)?;
            let bn = train_bn(&records, &cfg.bn)?;
            write_json(&out.join("bn.json"), &bn)?;
            println!("bn: {} records, {} bins", records.len(), bn.k_bins());
        }
        Command::TrainIrl {
            data,
            allow_nonconverged,
        } => {
            let records = load_records(&data)?;
            let model = train_irl(&records, &cfg.irl)?;
            write_json(&out.join("irl.json"), &model)?;

            let mut gaps = String::from("maneuver,epoch,gap\n");
            for m in [Intention::Pass, Intention::Stop] {
                let w = model.for_maneuver(m);
                for (k, g) in w.meta.gap_history.iter().enumerate() {
                    gaps.push_str(&format!("{m},{k},{g}\n"));
                }
                println!(
                    "{m}: {} demos, {} epochs, gap {:.4}{}",
                    w.meta.demos,
                    w.meta.epochs,
                    w.meta.final_gap,
                    if w.meta.converged {
                        ""
                    } else {
                        " (not converged)"
                    }
                );
            }
            write_atomic(&out.join("irl_gap.csv"), gaps.as_bytes())?;

            let stalled: Vec<String> = [Intention::Pass, Intention::Stop]
                .into_iter()
                .filter(|m| !model.for_maneuver(*m).meta.converged)
                .map(|m| m.to_string())
                .collect();
            if !stalled.is_empty() && !allow_nonconverged {
                return Err(Failure {
                    code: EXIT_NONCONVERGENCE,
                    error: anyhow!(
                        "{} weights did not reach grad_tol {}; best iterate written",
                        stalled.join(" and "),
                        cfg.irl.train.grad_tol
                    ),
                });
            }
        }
        Command::Predict {
            data,
            bn,
            irl,
            vehicle,
            ..
        } => {
            let mut records = load_records(&data)?;
            if let Some(id) = &vehicle {
                records.retain(|r| &r.vehicle_id == id);
                if records.is_empty() {
                    return Err(Failure {
                        code: EXIT_VALIDATION,
                        error: anyhow!("no vehicle {id} in {}", data.display()),
                    });
                }
            }
            let bn: BnModel = read_json(&bn)?;
            let irl: IrlModel = match &irl {
                Some(p) => read_json(p)?,
                None => reference_model(),
            };
            let logs = predict_records(&records, &bn, &irl, &cfg.rolling)?;
            let mut lines = Vec::new();
            for log in &logs {
                log.write_json_lines(&mut lines)?;
            }
            write_atomic(&out.join("predictions.jsonl"), &lines)?;
            write_atomic(
                &out.join("prediction_plot.csv"),
                &prediction_plot_csv(&logs, &records)?,
            )?;
            let cycles: usize = logs.iter().map(|l| l.cycles.len()).sum();
            let fallbacks: usize = logs
                .iter()
                .flat_map(|l| &l.cycles)
                .filter(|c| c.fallback.is_some())
                .count();
            println!(
                "predict: {} vehicles, {cycles} cycles, {fallbacks} fallbacks",
                logs.len()
            );
        }
        Command::Evaluate {
            data,
            bn,
            predictions,
        } => {
            if bn.is_none() && predictions.is_none() {
                return Err(Failure {
                    code: EXIT_VALIDATION,
                    error: anyhow!("evaluate needs --bn, --predictions or both"),
                });
            }
            let records = load_records(&data)?;
            let mut report = EvaluationReport::default();
            if let Some(p) = &bn {
                let model: BnModel = read_json(p)?;
                let r = evaluate_intention(&model, &records)?;
                write_atomic(&out.join("intention_plot.csv"), &intention_plot_csv(&r)?)?;
                println!(
                    "intention: accuracy {:.4}, naive {:.4} over {} points",
                    r.accuracy,
                    r.naive_accuracy,
                    r.confusion.total()
                );
                report.intention = Some(r);
            }
            if let Some(p) = &predictions {
                let f =
                    File::open(p).code(EXIT_INGESTION, || format!("opening {}", p.display()))?;
                let logs = PredictionLog::read_json_lines(BufReader::new(f))?;
                let r = evaluate_trajectory(&logs, &records)?;
                for d in &r.diagnostics {
                    eprintln!("warning: {d}");
                }
                write_atomic(&out.join("trajectory_plot.csv"), &trajectory_plot_csv(&r)?)?;
                println!(
                    "trajectory: mean ED {:.3} m, baseline {:.3} m, win rate {:.3} over {} cycles",
                    r.mean_ed, r.baseline_mean_ed, r.win_rate, r.cycles
                );
                report.trajectory = Some(r);
            }
            write_json(&out.join("report.json"), &report)?;
        }
        Command::Oracle => {
            let mut rng = seeded_rng(cli.common.seed);
            let bn = check_bn(&mut rng, 100, 3)?;
            let softmin = check_softmin(&mut rng, 100, 1e3)?;
            let gradient = check_gradient(&mut rng, 5)?;
            let ok = [
                ("bn", bn.max_abs_error <= 1e-12),
                (
                    "softmin",
                    softmin.all_finite && softmin.max_sum_error <= 1e-12,
                ),
                ("gradient", gradient.max_rel_error <= 1e-4),
            ];
            write_json(
                &out.join("oracle.json"),
                &serde_json::json!({ "bn": bn, "softmin": softmin, "gradient": gradient }),
            )?;
            println!(
                "bn: max error {:e} over {} models",
                bn.max_abs_error, bn.models
            );
            println!(
                "softmin: max sum error {:e} over {} sets",
                softmin.max_sum_error, softmin.sets
            );
            println!(
                "gradient: max relative error {:e} over {} instances",
                gradient.max_rel_error, gradient.instances
            );
            let failed: Vec<&str> = ok
                .iter()
                .filter(|(_, pass)| !pass)
                .map(|(n, _)| *n)
                .collect();
            if !failed.is_empty() {
                return Err(Failure {
                    code: EXIT_ORACLE,
                    error: anyhow!("oracle mismatch: {}", failed.join(", ")),
                });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
