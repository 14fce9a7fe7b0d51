//! Command-line front end: `ingest`, `pretest`, `train`, `evaluate`,
//! `synth` and `report`.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors. Every
//! output file is written to a temporary sibling and renamed into place,
//! and each run leaves a JSON manifest next to its outputs.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::behavior::{EgoModelConfig, FilteredEgo};
use crate::calldata::{parse_call_log, parse_instant, summarize, Dataset, TimeZone, Window};
use crate::classifier::TrainConfig;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_dataset, EvalConfig, DEFAULT_GRID_STEP};
use crate::model::EgoModel;
use crate::report;
use crate::stats::pretest::pretest_dataset;
use crate::synth::{generate, GeneratorConfig};

type ReportWriter = fn(&mut dyn Write, &crate::evaluation::EvaluationReport) -> Result<()>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "callpred", version, about = "Next-call prediction from call logs")]
pub struct Cli {
    /// Worker threads for per-ego work (0 = one per core). Never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a call log and write dataset summaries.
    Ingest {
        #[command(flatten)]
        input: InputArgs,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Ljung–Box tests per ego–alter pair and exponential KS tests per ego.
    Pretest {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Largest autocorrelation lag in the Q test.
        #[arg(long, default_value_t = crate::stats::DEFAULT_MAX_LAG)]
        max_lag: usize,
    },
    /// Train one model per eligible ego and save the model files.
    Train {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Train and evaluate against the baselines; writes the report CSVs.
    Evaluate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated list lengths.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10,11,12,13,14,15")]
        k: Vec<usize>,
        /// Comma-separated time-deviation thresholds (e.g. 15m,1h,10h,24h).
        #[arg(long, value_delimiter = ',', default_value = "15m,1h,10h,24h")]
        eps: Vec<String>,
        /// Spacing of the query grid for the deviation metric.
        #[arg(long, default_value = "15m")]
        grid_step: String,
    },
    /// Generate a synthetic call log with known structure.
    Synth {
        /// Call-log CSV to write.
        #[arg(long)]
        out: PathBuf,
        /// Where to write `ego_id,alter_id,regime`; defaults to
        /// `<out stem>_ground_truth.csv` next to the log.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        egos: usize,
        #[arg(long, default_value_t = 5)]
        alters: usize,
        #[arg(long, default_value_t = 8)]
        weeks: u32,
        #[arg(long, value_enum, default_value_t = RegimeArg::Periodic)]
        regime: RegimeArg,
        /// Expected Poisson-regime calls per ego per day.
        #[arg(long, default_value_t = 22.0)]
        base_rate: f64,
        /// Peak sharpness for periodic alters.
        #[arg(long, default_value_t = 3.0)]
        sharpness: f64,
        #[arg(long, default_value_t = 0.0)]
        incoming_fraction: f64,
        #[arg(long, default_value_t = 0.0)]
        missed_fraction: f64,
        /// Fixed UTC offset of the generated local clock, in seconds.
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        utc_offset: i32,
    },
    /// Render the evaluation CSVs in a directory as text tables.
    Report {
        /// Directory holding the `evaluate` outputs.
        #[arg(long = "in", default_value = ".")]
        dir: PathBuf,
        /// Also write the tables to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Deterministic,
    Periodic,
    Uniform,
    /// Alternating periodic and uniform-noise alters.
    Mixed,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Call-log CSV (`ego_id,alter_id,timestamp,direction`).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Dataset timezone as a fixed UTC offset in seconds.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub utc_offset: i32,
    /// Drop events before this instant (epoch seconds or YYYY-MM-DDTHH:MM:SS).
    #[arg(long, requires = "window_end")]
    pub window_start: Option<String>,
    /// Drop events at or after this instant.
    #[arg(long, requires = "window_start")]
    pub window_end: Option<String>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Egos with fewer events are not predicted.
    #[arg(long, default_value_t = 50)]
    pub min_events: usize,
    /// Leading fraction of each ego's events used for training.
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub reg_lambda: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    /// Stop when an accepted step lowers the loss by less than this.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

impl ModelArgs {
    fn configs(&self) -> (EgoModelConfig, TrainConfig) {
        (
            EgoModelConfig {
                min_events: self.min_events,
                train_fraction: self.train_fraction,
            },
            TrainConfig {
                reg_lambda: self.reg_lambda,
                max_iters: self.max_iters,
                tol: self.tol,
            },
        )
    }
}

impl InputArgs {
    fn load(&self) -> Result<Dataset> {
        let tz = TimeZone::from_offset_secs(self.utc_offset)?;
        let window = match (&self.window_start, &self.window_end) {
            (Some(s), Some(e)) => Some(Window::new(parse_instant(s, tz)?, parse_instant(e, tz)?)?),
            _ => None,
        };
        parse_call_log(&self.input, window, tz)
    }
}

/// Writes `path` through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidConfig(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        write(&mut w)?;
        w.flush()?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn file_digest(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut file = File::open(path)?;
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = io::Read::read(&mut file, &mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn write_manifest(
    path: &Path,
    argv: &[String],
    subcommand: &str,
    input: Option<&Path>,
    seed: Option<u64>,
    outputs: &[PathBuf],
) -> Result<()> {
    let input = match input {
        Some(p) => json!({ "path": p.display().to_string(), "sha256": file_digest(p)? }),
        None => serde_json::Value::Null,
    };
    let manifest = json!({
        "tool": "callpred",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand,
        "argv": argv,
        "seed": seed,
        "input": input,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest).map_err(io::Error::other)?;
        writeln!(w)?;
        Ok(())
    })
}

fn ensure_distinct(input: &Path, outputs: &[PathBuf]) -> Result<()> {
    let canon = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    let input = canon(input);
    if outputs.iter().any(|o| canon(o) == input) {
        return Err(Error::InvalidConfig("an output path equals the input path".into()));
    }
    Ok(())
}

/// File name for an ego's model; characters outside `[A-Za-z0-9._-]` become `_`.
pub fn model_file_name(ego_id: &str) -> String {
    let safe: String = ego_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect();
    format!("{safe}.model")
}

type Output = (PathBuf, Box<dyn FnOnce(&mut dyn Write) -> Result<()>>);

fn write_outputs(outputs: Vec<Output>) -> Result<Vec<PathBuf>> {
    let mut written = Vec::with_capacity(outputs.len());
    for (path, f) in outputs {
        write_atomic(&path, f)?;
        written.push(path);
    }
    Ok(written)
}

fn execute(cli: Cli, argv: &[String]) -> Result<()> {
    match cli.command {
        Command::Ingest { input, out_dir } => {
            let ds = input.load()?;
            fs::create_dir_all(&out_dir)?;
            let summary = summarize(&ds.egos)?;
            let dropped = ds.dropped_outside_window;
            let (s1, s2) = (summary.clone(), summary.clone());
            let outputs: Vec<Output> = vec![
                (
                    out_dir.join("summary.csv"),
                    Box::new(move |w| report::write_summary(w, &summary, dropped)),
                ),
                (
                    out_dir.join("calls_per_day_pdf.csv"),
                    Box::new(move |w| report::write_histogram(w, &s1.calls_per_day_pdf)),
                ),
                (
                    out_dir.join("mean_calls_per_contact_hist.csv"),
                    Box::new(move |w| report::write_histogram(w, &s2.mean_calls_per_contact_hist)),
                ),
            ];
            finish(&input.input, outputs, &out_dir, argv, "ingest")
        }
        Command::Pretest {
            input,
            out_dir,
            max_lag,
        } => {
            if max_lag == 0 {
                return Err(Error::InvalidConfig("max lag must be at least 1".into()));
            }
            let ds = input.load()?;
            fs::create_dir_all(&out_dir)?;
            let rep = std::sync::Arc::new(pretest_dataset(&ds, max_lag));
            let (r1, r2, r3) = (rep.clone(), rep.clone(), rep);
            let outputs: Vec<Output> = vec![
                (
                    out_dir.join("pretest_pairs.csv"),
                    Box::new(move |w| report::write_pretest_pairs(w, &r1)),
                ),
                (
                    out_dir.join("pretest_ks.csv"),
                    Box::new(move |w| report::write_pretest_ks(w, &r2)),
                ),
                (
                    out_dir.join("pretest_aggregate.csv"),
                    Box::new(move |w| report::write_pretest_aggregate(w, &r3)),
                ),
            ];
            finish(&input.input, outputs, &out_dir, argv, "pretest")
        }
        Command::Train {
            input,
            out_dir,
            model,
        } => {
            let (ego_cfg, train_cfg) = model.configs();
            ego_cfg.validate()?;
            let ds = input.load()?;
            fs::create_dir_all(&out_dir)?;
            let tz = ds.timezone;
            let results: Vec<(String, Result<EgoModel>)> = ds
                .egos
                .par_iter()
                .map(|log| {
                    let r = FilteredEgo::prepare(log, &ego_cfg).and_then(|ego| {
                        if !ego.is_eligible() {
                            return Err(Error::NoTestCalls);
                        }
                        EgoModel::fit(&ego, tz, &train_cfg)
                    });
                    (log.ego_id.clone(), r)
                })
                .collect();
            let mut outputs: Vec<Output> = Vec::new();
            let mut index = Vec::new();
            for (ego_id, r) in results {
                match r {
                    Ok(m) => {
                        let file = model_file_name(&ego_id);
                        let meta = m.weights.train_meta;
                        index.push(vec![
                            ego_id,
                            file.clone(),
                            m.class_set.len().to_string(),
                            meta.n_train.to_string(),
                            meta.iterations.to_string(),
                            format!("{:.9}", meta.final_loss),
                            String::new(),
                        ]);
                        let text = m.to_text();
                        outputs.push((out_dir.join(file), Box::new(move |w| Ok(w.write_all(text.as_bytes())?))));
                    }
                    Err(e) => index.push(vec![
                        ego_id,
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        e.to_string(),
                    ]),
                }
            }
            outputs.push((
                out_dir.join("models.csv"),
                Box::new(move |w| {
                    let mut wtr = csv::Writer::from_writer(w);
                    wtr.write_record(["ego_id", "file", "n_classes", "n_train", "iterations", "final_loss", "skipped"])
                        .map_err(crate::calldata::csv_io)?;
                    for row in &index {
                        wtr.write_record(row).map_err(crate::calldata::csv_io)?;
                    }
                    wtr.flush()?;
                    Ok(())
                }),
            ));
            finish(&input.input, outputs, &out_dir, argv, "train")
        }
        Command::Evaluate {
            input,
            out_dir,
            model,
            k,
            eps,
            grid_step,
        } => {
            let (ego_cfg, train_cfg) = model.configs();
            let config = EvalConfig {
                model: ego_cfg,
                train: train_cfg,
                ks: k,
                epsilons: eps
                    .iter()
                    .map(|e| report::parse_duration(e))
                    .collect::<Result<_>>()?,
                grid_step: if grid_step.is_empty() {
                    DEFAULT_GRID_STEP
                } else {
                    report::parse_duration(&grid_step)?
                },
            };
            config.validate()?;
            let ds = input.load()?;
            fs::create_dir_all(&out_dir)?;
            let rep = std::sync::Arc::new(evaluate_dataset(&ds, &config)?);
            let writers: [(&str, ReportWriter); 5] = [
                (report::EPSILON_ACCURACY_CSV, |w, r| report::write_epsilon_accuracy(w, r)),
                (report::METHOD_COMPARISON_CSV, |w, r| report::write_method_comparison(w, r)),
                (report::K_SWEEP_CSV, |w, r| report::write_k_sweep(w, r)),
                (report::PER_EGO_CSV, |w, r| report::write_per_ego(w, r)),
                (report::EVALUATION_SUMMARY_CSV, |w, r| report::write_evaluation_summary(w, r)),
            ];
            let outputs: Vec<Output> = writers
                .into_iter()
                .map(|(name, f)| {
                    let r = rep.clone();
                    (out_dir.join(name), Box::new(move |w: &mut dyn Write| f(w, &r)) as Box<_>)
                })
                .collect();
            finish(&input.input, outputs, &out_dir, argv, "evaluate")
        }
        Command::Synth {
            out,
            ground_truth,
            seed,
            egos,
            alters,
            weeks,
            regime,
            base_rate,
            sharpness,
            incoming_fraction,
            missed_fraction,
            utc_offset,
        } => {
            let mut cfg = match regime {
                RegimeArg::Deterministic => GeneratorConfig::deterministic(egos, alters, weeks, seed)?,
                RegimeArg::Periodic => GeneratorConfig::periodic(egos, alters, weeks, sharpness, seed),
                RegimeArg::Uniform => GeneratorConfig::uniform_noise(egos, alters, weeks, seed),
                RegimeArg::Mixed => {
                    let mut c = GeneratorConfig::periodic(egos, alters, weeks, sharpness, seed);
                    for (j, r) in c.alter_regimes.iter_mut().enumerate() {
                        if j % 2 == 1 {
                            *r = crate::synth::Regime::UniformNoise;
                        }
                    }
                    c
                }
            };
            cfg.base_rate = base_rate;
            cfg.incoming_fraction = incoming_fraction;
            cfg.missed_fraction = missed_fraction;
            cfg.timezone = TimeZone::from_offset_secs(utc_offset)?;
            let data = std::sync::Arc::new(generate(&cfg)?);
            let gt_path = ground_truth.unwrap_or_else(|| {
                let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                out.with_file_name(format!("{stem}_ground_truth.csv"))
            });
            if gt_path == out {
                return Err(Error::InvalidConfig("ground truth path equals output path".into()));
            }
            let (d1, d2) = (data.clone(), data);
            let written = write_outputs(vec![
                (out.clone(), Box::new(move |w| d1.write_call_log(w))),
                (gt_path, Box::new(move |w| d2.write_ground_truth(w))),
            ])?;
            let mut manifest = out.clone().into_os_string();
            manifest.push(".manifest.json");
            write_manifest(Path::new(&manifest), argv, "synth", None, Some(seed), &written)
        }
        Command::Report { dir, out } => {
            let open = |name: &str| File::open(dir.join(name));
            let text = report::render_tables(
                open(report::EPSILON_ACCURACY_CSV)?,
                open(report::METHOD_COMPARISON_CSV)?,
                open(report::K_SWEEP_CSV)?,
            )?;
            print!("{text}");
            if let Some(path) = out {
                write_atomic(&path, |w| Ok(w.write_all(text.as_bytes())?))?;
            }
            Ok(())
        }
    }
}

fn finish(input: &Path, outputs: Vec<Output>, out_dir: &Path, argv: &[String], name: &str) -> Result<()> {
    let paths: Vec<PathBuf> = outputs.iter().map(|(p, _)| p.clone()).collect();
    ensure_distinct(input, &paths)?;
    let written = write_outputs(outputs)?;
    write_manifest(&out_dir.join("manifest.json"), argv, name, Some(input), None, &written)
}

/// Runs the CLI on `argv` (including the program name) and returns the
/// process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| execute(cli, &argv)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            }
        }
    }
}
