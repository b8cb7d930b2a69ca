//! Run orchestration: seeded sweeps over (k, seed), run-directory artifacts,
//! evaluation, distillation, ablation variants, and the census dump.
//!
//! Every run directory is self-sufficient: resolved config snapshot, split
//! manifest, checkpoint, prediction file, and report are enough to re-run
//! evaluation standalone.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use umeg_core::data::{
    generate_synthetic, load_dataset, make_split, num_classes, save_dataset, select_clips,
    EntityLayout, FewShotSplit, KeypointClip, SynthConfig,
};
use umeg_core::distill::{
    distill, load_student_spotter, save_student, save_student_spotter, StudentModel,
    StudentSpotter, train_student_spotter,
};
use umeg_core::graph::{build_topology, EntityConfig, SportProfile};
use umeg_core::metrics::{edit_score, match_events, seconds_to_frames, EvalReport, MatchResult};
use umeg_core::net::UmegModel;
use umeg_core::predfile::{read_predictions, write_predictions};
use umeg_core::spot::{
    load_spotter, predict_events, save_spotter, train, EventSequence, SpotterModel,
};

use crate::config::RunConfig;

/// One evaluated run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub k: usize,
    pub seed: u64,
    pub f1_evt: f64,
    pub edit: f64,
    pub per_class_f1: BTreeMap<usize, f64>,
    pub clips: usize,
    pub delta_frames: usize,
    pub model_kind: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub k: usize,
    pub mean_f1: f64,
    pub mean_edit: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub label: String,
    pub rows: Vec<SummaryRow>,
    pub runs: Vec<RunReport>,
}

impl Summary {
    fn from_runs(label: &str, runs: Vec<RunReport>, k_list: &[usize]) -> Self {
        let rows = k_list
            .iter()
            .filter_map(|&k| {
                let of_k: Vec<&RunReport> = runs.iter().filter(|r| r.k == k).collect();
                if of_k.is_empty() {
                    return None;
                }
                let n = of_k.len() as f64;
                Some(SummaryRow {
                    k,
                    mean_f1: of_k.iter().map(|r| r.f1_evt).sum::<f64>() / n,
                    mean_edit: of_k.iter().map(|r| r.edit).sum::<f64>() / n,
                    seeds: of_k.len(),
                })
            })
            .collect();
        Self {
            label: label.to_string(),
            rows,
            runs,
        }
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("method\tk\tmean_f1_evt\tmean_edit\tseeds\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{:.4}\t{:.2}\t{}\n",
                self.label, row.k, row.mean_f1, row.mean_edit, row.seeds
            ));
        }
        out
    }
}

pub struct SweepOutcome {
    pub summary: Summary,
    pub failed: Vec<(usize, u64, String)>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn run_dir(out: &Path, k: usize, seed: u64) -> PathBuf {
    out.join(format!("k{k}_seed{seed}"))
}

/// Tolerance in frames for one clip, honoring a seconds-based override.
fn delta_for_clip(config: &RunConfig, clip: &KeypointClip) -> usize {
    match config.data.delta_seconds {
        Some(seconds) => seconds_to_frames(seconds, clip.fps),
        None => config.data.delta_tolerance,
    }
}

/// Evaluates any clip-to-events predictor over the eval split.
pub fn evaluate_predictor(
    config: &RunConfig,
    dataset: &[KeypointClip],
    eval_ids: &[String],
    mut predict: impl FnMut(&KeypointClip) -> Result<EventSequence>,
) -> Result<(Vec<(String, EventSequence)>, EvalReport)> {
    let eval_clips = select_clips(dataset, eval_ids);
    if eval_clips.is_empty() {
        bail!("evaluation set is empty");
    }
    let mut predictions = Vec::with_capacity(eval_clips.len());
    let mut per_clip: Vec<(MatchResult, f64)> = Vec::with_capacity(eval_clips.len());
    for clip in eval_clips {
        let events = predict(clip)?;
        let delta = delta_for_clip(config, clip);
        per_clip.push((
            match_events(&events, &clip.labels, delta),
            edit_score(&events, &clip.labels),
        ));
        predictions.push((clip.clip_id.clone(), events));
    }
    let report = umeg_core::metrics::aggregate(&per_clip)?;
    Ok((predictions, report))
}

/// Trains one teacher run and writes its artifacts.
pub fn run_one_training(
    config: &RunConfig,
    dataset: &[KeypointClip],
    k: usize,
    seed: u64,
    dir: &Path,
) -> Result<RunReport> {
    fs::create_dir_all(dir)?;
    let classes = num_classes(dataset).max(1);
    let split = make_split(dataset, k, seed, config.data.eval_fraction)?;
    let layout = dataset[0].layout;
    let topology = build_topology(&layout, config.profile()?, config.entity_config()?)?;
    let encoder = UmegModel::new(&topology, &config.model, seed)?;
    let mut model = SpotterModel::new(encoder, classes, seed);

    let mut train_cfg = config.train.clone();
    train_cfg.seed = seed;
    let history = train(&mut model, dataset, &split, &train_cfg)?;

    let (predictions, report) =
        evaluate_predictor(config, dataset, &split.eval_ids, |clip| {
            Ok(predict_events(&model, clip, &train_cfg, &config.decode)?)
        })?;

    fs::write(dir.join("config.toml"), config.to_toml())?;
    write_json(&dir.join("split.json"), &split)?;
    save_spotter(&dir.join("checkpoint.json"), &model)?;
    write_predictions(&dir.join("predictions.jsonl"), &predictions)?;
    fs::write(dir.join("history.txt"), history.to_table())?;
    let run_report = RunReport {
        k,
        seed,
        f1_evt: report.f1_evt,
        edit: report.edit,
        per_class_f1: report.per_class_f1,
        clips: report.clips,
        delta_frames: config.data.delta_tolerance,
        model_kind: "umeg_spotter".into(),
    };
    write_json(&dir.join("report.json"), &run_report)?;
    Ok(run_report)
}

/// Full training sweep over the configured (k, seed) grid.
pub fn train_sweep(config: &RunConfig, dataset: &[KeypointClip], out: &Path) -> Result<SweepOutcome> {
    fs::create_dir_all(out)?;
    let mut runs = Vec::new();
    let mut failed = Vec::new();
    for &k in &config.sweep.k {
        for &seed in &config.sweep.seeds {
            let dir = run_dir(out, k, seed);
            match run_one_training(config, dataset, k, seed, &dir) {
                Ok(report) => {
                    println!(
                        "run k={k} seed={seed}: F1@{}={:.4} Edit={:.2}",
                        report.delta_frames, report.f1_evt, report.edit
                    );
                    runs.push(report);
                }
                Err(e) => {
                    eprintln!("run k={k} seed={seed} FAILED: {e:#}");
                    failed.push((k, seed, format!("{e:#}")));
                }
            }
        }
    }
    let summary = Summary::from_runs(&config.sweep.label, runs, &config.sweep.k);
    write_json(&out.join("summary.json"), &summary)?;
    fs::write(out.join("summary.txt"), summary.to_table())?;
    Ok(SweepOutcome { summary, failed })
}

/// Distills each teacher run into a raster student, fine-tunes heads, and
/// evaluates end to end from raster input. With `with_scratch`, also trains
/// an identical student from scratch on labels alone for comparison.
pub fn distill_sweep(
    config: &RunConfig,
    dataset: &[KeypointClip],
    teachers: &Path,
    out: &Path,
    with_scratch: bool,
) -> Result<SweepOutcome> {
    fs::create_dir_all(out)?;
    let classes = num_classes(dataset).max(1);
    let mut runs = Vec::new();
    let mut failed = Vec::new();
    for &k in &config.sweep.k {
        for &seed in &config.sweep.seeds {
            let dir = run_dir(out, k, seed);
            let result = (|| -> Result<RunReport> {
                fs::create_dir_all(&dir)?;
                let teacher_dir = run_dir(teachers, k, seed);
                let teacher = load_spotter(&teacher_dir.join("checkpoint.json"))
                    .with_context(|| format!("no teacher checkpoint under {}", teacher_dir.display()))?;
                let split: FewShotSplit =
                    serde_json::from_str(&fs::read_to_string(teacher_dir.join("split.json"))?)
                        .context("teacher split manifest unreadable")?;

                let mut distill_cfg = config.distill.clone();
                distill_cfg.seed = seed;
                let mut train_cfg = config.train.clone();
                train_cfg.seed = seed;

                // Distill on labeled + unlabeled clips; never on eval.
                let mut pool: Vec<String> = split
                    .labeled_ids
                    .iter()
                    .chain(&split.unlabeled_ids)
                    .cloned()
                    .collect();
                pool.sort();
                let mut student = StudentModel::new(&distill_cfg.student, seed);
                let distill_history =
                    distill(&teacher, &mut student, dataset, &pool, &train_cfg, &distill_cfg)?;
                save_student(&dir.join("student.json"), &student)?;

                let spotter = umeg_core::distill::finetune_student(
                    student,
                    dataset,
                    &split,
                    &train_cfg,
                    &distill_cfg,
                    classes,
                )?;
                save_student_spotter(&dir.join("checkpoint.json"), &spotter)?;

                let (predictions, report) =
                    evaluate_predictor(config, dataset, &split.eval_ids, |clip| {
                        Ok(spotter.predict_events(clip, &train_cfg, &config.decode))
                    })?;
                write_predictions(&dir.join("predictions.jsonl"), &predictions)?;

                let mut history = String::from("phase\tepoch\tval_loss\n");
                for (i, loss) in distill_history.iter().enumerate() {
                    history.push_str(&format!("distill\t{i}\t{loss:.6}\n"));
                }

                if with_scratch {
                    let scratch_epochs = config.distill.epochs.max(config.distill.finetune_epochs);
                    let mut scratch = StudentSpotter::new(
                        StudentModel::new(&distill_cfg.student, seed ^ 0x5C1A),
                        classes,
                        seed ^ 0x5C1A,
                    );
                    let scratch_history = train_student_spotter(
                        &mut scratch,
                        dataset,
                        &split,
                        &train_cfg,
                        scratch_epochs,
                        config.distill.finetune_lr,
                        distill_cfg.batch_size,
                        true,
                        seed ^ 0x5C1A,
                    )?;
                    for (i, loss) in scratch_history.iter().enumerate() {
                        history.push_str(&format!("scratch\t{i}\t{loss:.6}\n"));
                    }
                    save_student_spotter(&dir.join("scratch_checkpoint.json"), &scratch)?;
                    let (_, scratch_report) =
                        evaluate_predictor(config, dataset, &split.eval_ids, |clip| {
                            Ok(scratch.predict_events(clip, &train_cfg, &config.decode))
                        })?;
                    let scratch_run = RunReport {
                        k,
                        seed,
                        f1_evt: scratch_report.f1_evt,
                        edit: scratch_report.edit,
                        per_class_f1: scratch_report.per_class_f1,
                        clips: scratch_report.clips,
                        delta_frames: config.data.delta_tolerance,
                        model_kind: "umeg_student_scratch".into(),
                    };
                    write_json(&dir.join("scratch_report.json"), &scratch_run)?;
                }

                fs::write(dir.join("config.toml"), config.to_toml())?;
                write_json(&dir.join("split.json"), &split)?;
                fs::write(dir.join("history.txt"), history)?;
                let run_report = RunReport {
                    k,
                    seed,
                    f1_evt: report.f1_evt,
                    edit: report.edit,
                    per_class_f1: report.per_class_f1,
                    clips: report.clips,
                    delta_frames: config.data.delta_tolerance,
                    model_kind: "umeg_student_spotter".into(),
                };
                write_json(&dir.join("report.json"), &run_report)?;
                Ok(run_report)
            })();
            match result {
                Ok(report) => {
                    println!(
                        "distill k={k} seed={seed}: F1@{}={:.4} Edit={:.2}",
                        report.delta_frames, report.f1_evt, report.edit
                    );
                    runs.push(report);
                }
                Err(e) => {
                    eprintln!("distill k={k} seed={seed} FAILED: {e:#}");
                    failed.push((k, seed, format!("{e:#}")));
                }
            }
        }
    }
    let label = format!("{}_distill", config.sweep.label);
    let summary = Summary::from_runs(&label, runs, &config.sweep.k);
    write_json(&out.join("summary.json"), &summary)?;
    fs::write(out.join("summary.txt"), summary.to_table())?;
    Ok(SweepOutcome { summary, failed })
}

/// Re-evaluates a finished run from its own artifacts. Returns the freshly
/// computed report and the one recorded at train time.
pub fn eval_run(dir: &Path, dataset_override: Option<&Path>) -> Result<(RunReport, RunReport)> {
    let mut config = RunConfig::load(&dir.join("config.toml"))?;
    config.resolve().map_err(|e| anyhow::anyhow!("{e}"))?;
    let dataset_path = dataset_override
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.data.dataset.clone());
    let dataset = load_dataset(&dataset_path)?;
    let split: FewShotSplit =
        serde_json::from_str(&fs::read_to_string(dir.join("split.json"))?)?;
    let recorded: RunReport =
        serde_json::from_str(&fs::read_to_string(dir.join("report.json"))?)?;

    let mut train_cfg = config.train.clone();
    train_cfg.seed = recorded.seed;

    let checkpoint = dir.join("checkpoint.json");
    let (predictions, report) = match recorded.model_kind.as_str() {
        "umeg_spotter" => {
            let model = load_spotter(&checkpoint)?;
            evaluate_predictor(&config, &dataset, &split.eval_ids, |clip| {
                Ok(predict_events(&model, clip, &train_cfg, &config.decode)?)
            })?
        }
        "umeg_student_spotter" => {
            let model = load_student_spotter(&checkpoint)?;
            evaluate_predictor(&config, &dataset, &split.eval_ids, |clip| {
                Ok(model.predict_events(clip, &train_cfg, &config.decode))
            })?
        }
        other => bail!("run holds an unknown model kind `{other}`"),
    };

    // The prediction file must agree with a fresh decoding pass.
    let stored = read_predictions(&dir.join("predictions.jsonl"))?;
    if stored != predictions {
        bail!("stored predictions do not match a fresh evaluation pass");
    }

    let fresh = RunReport {
        k: recorded.k,
        seed: recorded.seed,
        f1_evt: report.f1_evt,
        edit: report.edit,
        per_class_f1: report.per_class_f1,
        clips: report.clips,
        delta_frames: recorded.delta_frames,
        model_kind: recorded.model_kind.clone(),
    };
    write_json(&dir.join("eval_report.json"), &fresh)?;
    Ok((fresh, recorded))
}

/// Ablation sweep: one training sweep per entity-config / delta-set variant,
/// all on identical splits, plus a combined comparison table.
pub fn ablate(
    config: &RunConfig,
    dataset: &[KeypointClip],
    out: &Path,
    entity_configs: &[String],
    delta_sets: &[Vec<usize>],
) -> Result<(Vec<Summary>, Vec<(usize, u64, String)>)> {
    fs::create_dir_all(out)?;
    let mut summaries = Vec::new();
    let mut failed = Vec::new();
    for entity in entity_configs {
        for deltas in delta_sets {
            let tag = format!(
                "{}_d{}",
                entity.replace('+', "-"),
                deltas.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("")
            );
            let mut variant = config.clone();
            variant.data.entity_config = entity.clone();
            variant.model.deltas = deltas.clone();
            variant.sweep.label = tag.clone();
            variant.resolve().map_err(|e| anyhow::anyhow!("{e}"))?;
            let outcome = train_sweep(&variant, dataset, &out.join(&tag))?;
            failed.extend(outcome.failed);
            summaries.push(outcome.summary);
        }
    }
    let mut table = String::from("method\tk\tmean_f1_evt\tmean_edit\tseeds\n");
    for summary in &summaries {
        for row in &summary.rows {
            table.push_str(&format!(
                "{}\t{}\t{:.4}\t{:.2}\t{}\n",
                summary.label, row.k, row.mean_f1, row.mean_edit, row.seeds
            ));
        }
    }
    fs::write(out.join("ablation.txt"), table)?;
    Ok((summaries, failed))
}

/// Writes a synthetic dataset and prints its census.
pub fn synth(cfg: &SynthConfig, out: &Path, force: bool) -> Result<()> {
    if out.exists() && out.read_dir().map(|mut d| d.next().is_some()).unwrap_or(false) {
        if !force {
            bail!(
                "output directory {} exists and is not empty (use --force to overwrite)",
                out.display()
            );
        }
        fs::remove_dir_all(out)?;
    }
    let clips = generate_synthetic(cfg)?;
    save_dataset(&clips, out)?;
    let events: usize = clips.iter().map(|c| c.labels.len()).sum();
    let mut per_class: BTreeMap<usize, usize> = BTreeMap::new();
    for clip in &clips {
        for label in &clip.labels {
            *per_class.entry(label.class_id).or_default() += 1;
        }
    }
    println!(
        "wrote {} clips ({} frames each) with {} events to {}",
        clips.len(),
        cfg.frames_per_clip,
        events,
        out.display()
    );
    println!(
        "events per class: {}",
        per_class
            .iter()
            .map(|(c, n)| format!("{c}:{n}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    Ok(())
}

/// Edge-family census dump for a profile and entity configuration.
pub fn census_text(
    persons: usize,
    profile: SportProfile,
    entity_config: EntityConfig,
) -> Result<String> {
    let layout = EntityLayout::new(
        persons,
        umeg_core::graph::coco::NUM_JOINTS,
        entity_config.wants_ball(),
        if entity_config.wants_court() { 4 } else { 0 },
    )?;
    let topology = build_topology(&layout, profile, entity_config)?;
    let census = topology.census;
    Ok(format!(
        "profile: {profile}\nentity_config: {entity_config}\npersons: {persons}\n\
         nodes: {}\nintra: {}\nperson_ball: {}\nperson_court: {}\ncourt_court: {}\ntotal: {}\n",
        topology.node_count,
        census.intra,
        census.person_ball,
        census.person_court,
        census.court_court,
        census.total()
    ))
}
