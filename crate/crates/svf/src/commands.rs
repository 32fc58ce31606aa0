//! Subcommand implementations behind the `svf` binary.

use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;
use svf_core::blind::{check_panel, filter_benchmark, is_filterable, judge_blind, Judge, JudgeVerdict, BlindQuery};
use svf_core::eval::{evaluate, oracle_predictions, Prediction, SceneDepth};
use svf_core::qa::{generate_frame, plan_dataset, to_json_line, Convention};
use svf_core::synth::{generate_synthetic_scene, SynthError, SynthSpec};
use svf_core::{GenerationConfig, QaRecord, Split};
use thiserror::Error;

use crate::config::{apply_key, load_config, ConfigError};
use crate::judges::{build_judge, parse_panel, query_digest, VerdictCache};
use crate::jsonl::{read_jsonl, write_jsonl, write_lines, JsonlError};
use crate::manifest::{sha256_hex, RunManifest};
use crate::scene_io::{load_scenes, save_scene, SceneIoError};
use crate::service::DepthService;

#[derive(Debug, Parser)]
#[command(name = "svf", version, about = "Spatial VQA dataset generation, filtering and scoring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic scene directory.
    Synth(SynthArgs),
    /// Generate QA records from scene directories.
    Generate(GenerateArgs),
    /// Remove records that text-only judges answer correctly.
    Filter(FilterArgs),
    /// Score a predictions file against a benchmark.
    Eval(EvalArgs),
    /// Write predictions that copy the ground truth (for pipeline checks).
    Oracle(OracleArgs),
    /// Serve depth tool calls over TCP.
    DepthServe(DepthServeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub objects: usize,
    #[arg(long, default_value_t = 20)]
    pub frames: usize,
    #[arg(long, default_value_t = 1.0)]
    pub fps: f64,
    /// Objects are placed inside [-h, h] on both horizontal axes.
    #[arg(long, default_value_t = 2.0)]
    pub room_half_extent: f64,
    #[arg(long)]
    pub video_id: Option<String>,
    /// Also write perturbed arkit and mono depth maps.
    #[arg(long)]
    pub noisy_sources: bool,
    #[arg(long)]
    pub eval_split: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// A scene directory or a directory of scene directories.
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for dataset.jsonl, skipped.jsonl and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub convention: Option<Convention>,
    #[arg(long)]
    pub target_fps: Option<f64>,
    /// Comma-separated category names.
    #[arg(long)]
    pub categories: Option<String>,
    /// `lo,hi` or `none`.
    #[arg(long)]
    pub scale_aug: Option<String>,
    #[arg(long)]
    pub max_per_category: Option<usize>,
    /// Comma-separated labels added to the negative-sampling vocabulary.
    #[arg(long)]
    pub extra_vocabulary: Option<String>,
    #[arg(long)]
    pub no_cot: bool,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub benchmark: PathBuf,
    /// Judge descriptors `local:<policy>` or `http:<url>`, optionally
    /// prefixed with `name=`. Repeat the flag or separate with commas.
    #[arg(long, required = true, num_args = 1..)]
    pub judges: Vec<String>,
    #[arg(long, default_value_t = 3)]
    pub threshold: usize,
    /// Records the majority-class policy learns from; defaults to the benchmark.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = 30.0)]
    pub timeout_s: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub benchmark: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
    /// Output directory for report.json, report.txt and manifest.json.
    #[arg(long)]
    pub report: PathBuf,
    /// Scene directories used to score predicted depth steps.
    #[arg(long)]
    pub scenes: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub benchmark: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DepthServeArgs {
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub listen: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<SceneIoError> for CliError {
    fn from(e: SceneIoError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<JsonlError> for CliError {
    fn from(e: JsonlError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn make_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn manifest(command: &str, config: &str, seed: Option<u64>, inputs: &[&Path], outputs: &[PathBuf], start: Instant) -> RunManifest {
    RunManifest {
        command: command.into(),
        args: std::env::args().skip(1).collect(),
        config_sha256: sha256_hex(config.as_bytes()),
        seed,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Filter(a) => cmd_filter(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::DepthServe(a) => cmd_depth_serve(a),
    }
}

pub fn cmd_synth(a: SynthArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let spec = SynthSpec {
        video_id: a.video_id.clone().unwrap_or_else(|| format!("synth-{}", a.seed)),
        objects: a.objects,
        frames: a.frames,
        fps: a.fps,
        room_half_extent: a.room_half_extent,
        orbit_radius: SynthSpec::default().orbit_radius.max(a.room_half_extent * 2.0),
        noisy_sources: a.noisy_sources,
        split: if a.eval_split { Split::Eval } else { Split::Train },
        ..SynthSpec::default()
    };
    let scene = generate_synthetic_scene(a.seed, &spec).map_err(|e| match e {
        SynthError::SpecInfeasible { .. } | SynthError::InvalidSpec(_) => CliError::Usage(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    })?;
    make_dir(&a.out)?;
    save_scene(&scene, &a.out)?;
    let config = format!("{spec:?}");
    manifest("synth", &config, Some(a.seed), &[], &[a.out.clone()], start).write(&a.out)?;
    log::info!("wrote {} frames, {} objects to {}", scene.frames.len(), scene.objects.len(), a.out.display());
    Ok(())
}

/// Config file values with command-line overrides applied.
pub fn effective_config(a: &GenerateArgs) -> Result<GenerationConfig, CliError> {
    let mut config = match &a.config {
        Some(p) => load_config(p)?,
        None => GenerationConfig::default(),
    };
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(c) = a.convention {
        config.convention = c;
    }
    if let Some(f) = a.target_fps {
        config.target_fps = f;
    }
    if let Some(n) = a.max_per_category {
        config.max_questions_per_frame_per_category = n;
    }
    if let Some(c) = &a.categories {
        apply_key(&mut config, "categories", c)?;
    }
    if let Some(s) = &a.scale_aug {
        apply_key(&mut config, "scale_aug", s)?;
    }
    if let Some(v) = &a.extra_vocabulary {
        apply_key(&mut config, "extra_vocabulary", v)?;
    }
    if a.no_cot {
        config.cot = false;
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

pub fn cmd_generate(a: GenerateArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let config = effective_config(&a)?;
    let scenes = load_scenes(&a.scenes)?;
    let plan = plan_dataset(&scenes, &config).map_err(|e| CliError::Usage(e.to_string()))?;
    let frames = pool(a.jobs)?.install(|| {
        plan.units
            .par_iter()
            .map(|&(s, f)| generate_frame(&scenes[s], f, &config, &plan.vocabulary))
            .collect::<Vec<_>>()
    });
    make_dir(&a.out)?;
    let dataset = a.out.join("dataset.jsonl");
    let skipped = a.out.join("skipped.jsonl");
    write_lines(&dataset, frames.iter().flat_map(|f| f.records.iter().map(to_json_line)))?;
    write_lines(
        &skipped,
        frames.iter().flat_map(|f| {
            f.skipped.iter().map(|s| {
                json!({
                    "video_id": s.video_id,
                    "frame_id": s.frame_id,
                    "category": s.category,
                    "reason": s.reason.to_string(),
                })
                .to_string()
            })
        }),
    )?;
    let n: usize = frames.iter().map(|f| f.records.len()).sum();
    let config_text = serde_json::to_string(&config).expect("config serializes");
    manifest("generate", &config_text, Some(config.seed), &[&a.scenes], &[dataset, skipped], start).write(&a.out)?;
    log::info!("generated {n} records from {} frames", plan.units.len());
    Ok(())
}

fn read_records(path: &Path) -> Result<Vec<QaRecord>, CliError> {
    Ok(read_jsonl(path)?)
}

pub fn cmd_filter(a: FilterArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let panel = parse_panel(&a.judges).map_err(|e| CliError::Usage(e.to_string()))?;
    let ids: Vec<String> = panel.iter().map(|(id, _)| id.clone()).collect();
    check_panel(&ids, a.threshold).map_err(|e| CliError::Usage(e.to_string()))?;
    let records = read_records(&a.benchmark)?;
    let reference = match &a.reference {
        Some(p) => read_records(p)?,
        None => records.clone(),
    };
    let timeout = Duration::from_secs_f64(a.timeout_s.max(0.001));
    let judges: Vec<Box<dyn Judge + Send + Sync>> = panel
        .iter()
        .map(|(id, d)| build_judge(id, d, &records, &reference, timeout))
        .collect();
    make_dir(&a.out)?;
    let cache = VerdictCache::open(&VerdictCache::location(&a.out.join("cache")))?;
    let reused = cache.len();

    let jobs: Vec<(&QaRecord, usize)> = records
        .iter()
        .filter(|r| is_filterable(r))
        .flat_map(|r| (0..judges.len()).map(move |j| (r, j)))
        .collect();
    let epoch = Instant::now();
    let clock = move || epoch.elapsed().as_secs_f64();
    let results: Vec<Result<JudgeVerdict, String>> = pool(a.jobs)?.install(|| {
        jobs.par_iter()
            .map(|&(r, j)| {
                let judge = &judges[j];
                let digest = query_digest(&BlindQuery::from_record(r));
                if let Some(v) = cache.get(&r.record_id, judge.judge_id(), &digest) {
                    return Ok(v.clone());
                }
                let v = judge_blind(r, judge.as_ref(), &clock)
                    .map_err(|e| format!("{} on {}: {e}", judge.judge_id(), r.record_id))?;
                cache.append(&digest, &v).map_err(|e| e.to_string())?;
                Ok(v)
            })
            .collect()
    });
    let mut verdicts = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(v) => verdicts.push(v),
            Err(e) => log::warn!("judge query failed: {e}"),
        }
    }
    let outcome = filter_benchmark(&records, &verdicts, &ids, a.threshold).map_err(|e| CliError::Usage(e.to_string()))?;
    let kept = a.out.join("kept.jsonl");
    let removed = a.out.join("removed.jsonl");
    let log_path = a.out.join("verdicts.jsonl");
    write_lines(&kept, outcome.kept.iter().map(to_json_line))?;
    write_lines(&removed, outcome.removed.iter().map(to_json_line))?;
    write_jsonl(&log_path, &verdicts)?;
    let summary = json!({
        "panel": ids,
        "threshold": a.threshold,
        "records": records.len(),
        "kept": outcome.kept.len(),
        "removed": outcome.removed.len(),
        "incomplete": outcome.incomplete,
        "cached_verdicts_reused": reused,
    });
    let summary_path = a.out.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary).expect("json") + "\n")?;
    let config_text = format!("{:?} threshold={}", a.judges, a.threshold);
    manifest(
        "filter",
        &config_text,
        None,
        &[&a.benchmark],
        &[kept, removed, log_path, summary_path],
        start,
    )
    .write(&a.out)?;
    log::info!(
        "kept {}, removed {}, incomplete {}",
        outcome.kept.len(),
        outcome.removed.len(),
        outcome.incomplete.len()
    );
    Ok(())
}

pub fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let records = read_records(&a.benchmark)?;
    let predictions: Vec<Prediction> = read_jsonl(&a.predictions)?;
    let scenes = match &a.scenes {
        Some(p) => load_scenes(p)?,
        None => Vec::new(),
    };
    let lookup = SceneDepth(&scenes);
    let report = evaluate(&records, &predictions, a.scenes.as_ref().map(|_| &lookup as _));
    make_dir(&a.report)?;
    let json_path = a.report.join("report.json");
    let text_path = a.report.join("report.txt");
    fs::write(&json_path, serde_json::to_string_pretty(&report).expect("report serializes") + "\n")?;
    let table = report.to_table();
    fs::write(&text_path, &table)?;
    print!("{table}");
    manifest("eval", "", None, &[&a.benchmark, &a.predictions], &[json_path, text_path], start).write(&a.report)?;
    Ok(())
}

pub fn cmd_oracle(a: OracleArgs) -> Result<(), CliError> {
    let records = read_records(&a.benchmark)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        make_dir(dir)?;
    }
    write_jsonl(&a.out, &oracle_predictions(&records))?;
    Ok(())
}

pub fn cmd_depth_serve(a: DepthServeArgs) -> Result<(), CliError> {
    let scenes = load_scenes(&a.scenes)?;
    let listener = TcpListener::bind(&a.listen).map_err(|e| CliError::Usage(format!("cannot listen on {}: {e}", a.listen)))?;
    let addr = listener.local_addr()?;
    println!("listening on {addr}");
    use std::io::Write;
    std::io::stdout().flush()?;
    Arc::new(DepthService::new(scenes)).serve(listener)?;
    Ok(())
}

