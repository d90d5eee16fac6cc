//! The verbs, as library functions over typed options.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use resil_core::features::{assemble_feature_vector_with, FeatureConfig};
use resil_core::fi::{parse_bindings, Bindings, Campaign, CampaignError, GOLDEN_STEP_LIMIT};
use resil_core::ir::{parse_program, Program};
use resil_core::par::{map_slice, Schedule};
use resil_core::trace::{parse_trace, Trace};
use resil_learn::{
    train_pipeline, CvConfig, Dataset, MiBins, ModelKind, PipelineConfig, Target, TrainedPredictor,
    TrainingReport,
};
use sha2::{Digest, Sha256};

use crate::formats::{
    self, dataset_text, format_verifier, labels_text, manifest_text, parse_verifier, read_labels,
    read_manifest, read_text, write_atomic, LabelRow, ManifestEntry, ReportRow,
};
use crate::generate::generate_corpus;
use crate::{CliError, Result};

pub const LABELS_FILE: &str = "labels.csv";
pub const UNUSABLE_FILE: &str = "unusable.txt";
pub const DATASET_FILE: &str = "dataset.csv";

pub fn trace_path(out_dir: &Path, id: &str) -> PathBuf {
    out_dir.join("traces").join(format!("{id}.trace"))
}

pub fn model_path(out_dir: &Path, target: Target) -> PathBuf {
    out_dir.join(format!("model-{target}.json"))
}

pub fn training_report_path(out_dir: &Path, target: Target) -> PathBuf {
    out_dir.join(format!("report-{target}.json"))
}

fn load_program(path: &Path) -> Result<Program> {
    parse_program(&read_text(path)?).map_err(|e| CliError::data(path, e))
}

fn load_bindings(path: &Path) -> Result<Bindings> {
    parse_bindings(&read_text(path)?).map_err(|e| CliError::data(path, e))
}

pub fn load_trace(path: &Path) -> Result<Trace> {
    let file = fs::File::open(path).map_err(|e| CliError::data(path, e))?;
    parse_trace(BufReader::new(file)).map_err(|e| CliError::data(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedPredictor> {
    TrainedPredictor::from_json(&read_text(path)?).map_err(|e| CliError::data(path, e))
}

pub struct GenOptions {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub count: usize,
    pub n: Option<usize>,
    pub tolerance: String,
}

/// Writes `kernels/<name>.ir`, `kernels/<name>.inputs` and `manifest.csv`.
pub fn gen_corpus(o: &GenOptions) -> Result<()> {
    if o.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let verifier = parse_verifier(&o.tolerance).map_err(CliError::Usage)?;
    let n = o.n.unwrap_or(resil_core::fi::DEFAULT_CAMPAIGN_SIZE);
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let kernels = generate_corpus(o.seed, o.count);
    let mut rows = Vec::new();
    for k in &kernels {
        let program = format!("kernels/{}.ir", k.name);
        let inputs = format!("kernels/{}.inputs", k.name);
        write_atomic(&o.out_dir.join(&program), k.program.as_bytes())?;
        write_atomic(&o.out_dir.join(&inputs), k.inputs.as_bytes())?;
        rows.push((program, inputs, verifier, n, o.seed));
    }
    write_atomic(
        &o.out_dir.join("manifest.csv"),
        manifest_text(&rows).as_bytes(),
    )
}

pub struct LabelOptions {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub budget: Option<u64>,
}

/// Per-entry cache record under `labels/`.
#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct LabelCache {
    hash: String,
    /// `None` when the golden run failed.
    counts: Option<[u64; 3]>,
    reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LabelOutcome {
    Labelled(LabelRow),
    Unusable { id: String, reason: String },
}

fn entry_hash(program: &str, inputs: &str, e: &ManifestEntry, budget: Option<u64>) -> String {
    let mut h = Sha256::new();
    for part in [
        program,
        inputs,
        &format_verifier(e.verifier),
        &e.n.to_string(),
        &e.seed.to_string(),
        &format!("{budget:?}"),
    ] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn label_entry(e: &ManifestEntry, out_dir: &Path, budget: Option<u64>) -> Result<LabelOutcome> {
    let program_text = read_text(&e.program)?;
    let inputs_text = read_text(&e.inputs)?;
    let hash = entry_hash(&program_text, &inputs_text, e, budget);
    let cache_path = out_dir.join("labels").join(format!("{}.json", e.id));
    let trace_file = trace_path(out_dir, &e.id);

    let cached = fs::read_to_string(&cache_path)
        .ok()
        .and_then(|t| serde_json::from_str::<LabelCache>(&t).ok())
        .filter(|c| c.hash == hash);
    if let Some(c) = cached {
        match (c.counts, c.reason) {
            (Some(counts), _) if trace_file.is_file() => {
                return Ok(LabelOutcome::Labelled(LabelRow::new(&e.id, counts)))
            }
            (None, Some(reason)) => {
                return Ok(LabelOutcome::Unusable {
                    id: e.id.clone(),
                    reason,
                })
            }
            _ => {}
        }
    }

    let program = parse_program(&program_text).map_err(|err| CliError::data(&e.program, err))?;
    let inputs = parse_bindings(&inputs_text).map_err(|err| CliError::data(&e.inputs, err))?;
    let outcome = match Campaign::new(&program, &inputs, budget, e.verifier) {
        Ok(campaign) => {
            write_atomic(&trace_file, campaign.golden_trace().to_text().as_bytes())?;
            match campaign.run(e.n, e.seed, Schedule::default()) {
                Ok(rates) => LabelOutcome::Labelled(LabelRow::new(&e.id, rates.counts)),
                Err(CampaignError::EmptyTrace) => LabelOutcome::Unusable {
                    id: e.id.clone(),
                    reason: CampaignError::EmptyTrace.to_string(),
                },
                Err(err) => return Err(CliError::Internal(format!("{}: {err}", e.id))),
            }
        }
        Err(err @ CampaignError::GoldenFailed(_)) => LabelOutcome::Unusable {
            id: e.id.clone(),
            reason: err.to_string(),
        },
        Err(err) => return Err(CliError::data(&e.program, err)),
    };
    let cache = match &outcome {
        LabelOutcome::Labelled(r) => LabelCache {
            hash,
            counts: Some([r.success_count, r.sdc_count, r.interruption_count]),
            reason: None,
        },
        LabelOutcome::Unusable { reason, .. } => LabelCache {
            hash,
            counts: None,
            reason: Some(reason.clone()),
        },
    };
    write_atomic(
        &cache_path,
        serde_json::to_string(&cache)
            .expect("plain struct")
            .as_bytes(),
    )?;
    Ok(outcome)
}

/// Labels every entry, writing `traces/<id>.trace`, `labels.csv` in
/// manifest order and `unusable.txt`. Entries whose inputs and settings
/// are unchanged since the last run are not re-injected.
pub fn label(o: &LabelOptions) -> Result<Vec<LabelOutcome>> {
    let entries = read_manifest(&o.manifest, o.seed)?;
    if entries.is_empty() {
        return Err(CliError::data(&o.manifest, "manifest has no entries"));
    }
    let outcomes = map_slice(&entries, Schedule::default(), |e| {
        label_entry(e, &o.out_dir, o.budget)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut unusable = String::new();
    for outcome in &outcomes {
        match outcome {
            LabelOutcome::Labelled(r) => rows.push(r.clone()),
            LabelOutcome::Unusable { id, reason } => {
                eprintln!("resil: {id} is unusable: {reason}");
                unusable += &format!("{id}\n");
            }
        }
    }
    write_atomic(&o.out_dir.join(LABELS_FILE), labels_text(&rows).as_bytes())?;
    write_atomic(&o.out_dir.join(UNUSABLE_FILE), unusable.as_bytes())?;
    if rows.is_empty() {
        return Err(CliError::Data("every manifest entry is unusable".into()));
    }
    Ok(outcomes)
}

/// Manifest entries joined with their label rows and traces, skipping the
/// ids `label` recorded as unusable.
fn join_corpus(manifest: &Path, out_dir: &Path, seed: u64) -> Result<Vec<(LabelRow, PathBuf)>> {
    let entries = read_manifest(manifest, seed)?;
    let labels_path = out_dir.join(LABELS_FILE);
    let labels: BTreeMap<String, LabelRow> = read_labels(&labels_path)?
        .into_iter()
        .map(|r| (r.id.clone(), r))
        .collect();
    let unusable: HashSet<String> = fs::read_to_string(out_dir.join(UNUSABLE_FILE))
        .unwrap_or_default()
        .lines()
        .map(str::to_string)
        .collect();
    let mut out = Vec::new();
    for e in entries.iter().filter(|e| !unusable.contains(&e.id)) {
        let trace = trace_path(out_dir, &e.id);
        if !trace.is_file() {
            return Err(CliError::Data(format!(
                "{}: no trace at {}",
                e.id,
                trace.display()
            )));
        }
        let row = labels.get(&e.id).ok_or_else(|| {
            CliError::Data(format!(
                "{}: no label row in {}",
                e.id,
                labels_path.display()
            ))
        })?;
        out.push((row.clone(), trace));
    }
    Ok(out)
}

fn feature_rows(traces: &[PathBuf], n_self: usize) -> Result<Vec<Vec<f64>>> {
    let config = FeatureConfig {
        n_self,
        schedule: Schedule::Sequential,
    };
    map_slice(traces, Schedule::default(), |p| {
        load_trace(p).map(|t| {
            assemble_feature_vector_with(&t, &config)
                .as_slice()
                .to_vec()
        })
    })
    .into_iter()
    .collect()
}

/// Extracts one 30-wide row per labelled trace into `dataset.csv`.
pub fn features(manifest: &Path, out_dir: &Path, seed: u64, n_self: usize) -> Result<Dataset> {
    let joined = join_corpus(manifest, out_dir, seed)?;
    if joined.is_empty() {
        return Err(CliError::data(manifest, "no usable entries"));
    }
    let traces: Vec<PathBuf> = joined.iter().map(|(_, t)| t.clone()).collect();
    let x = feature_rows(&traces, n_self)?;
    let dataset = Dataset::new(
        joined.iter().map(|(r, _)| r.id.clone()).collect(),
        x,
        joined.iter().map(|(r, _)| r.success).collect(),
        joined.iter().map(|(r, _)| r.interruption).collect(),
    )?;
    write_atomic(
        &out_dir.join(DATASET_FILE),
        dataset_text(&dataset).as_bytes(),
    )?;
    Ok(dataset)
}

pub struct TrainOptions {
    pub dataset: PathBuf,
    pub target: Target,
    pub kind: ModelKind,
    pub k_cv: usize,
    pub bags: usize,
    pub mi_bins: MiBins,
    pub out_dir: PathBuf,
    pub seed: u64,
}

/// Runs the training pipeline and writes `model-<target>.json` and
/// `report-<target>.json`.
pub fn train(o: &TrainOptions) -> Result<(TrainedPredictor, TrainingReport)> {
    if o.k_cv < 2 {
        return Err(CliError::Usage("--k-cv must be at least 2".into()));
    }
    if o.bags == 0 {
        return Err(CliError::Usage("--bags must be at least 1".into()));
    }
    let dataset = formats::read_dataset(&o.dataset)?;
    let config = PipelineConfig {
        kind: o.kind,
        grid: None,
        cv: CvConfig {
            k: o.k_cv,
            ..CvConfig::default()
        },
        bags: o.bags,
        mi_bins: o.mi_bins,
        seed: o.seed,
    };
    let (model, report) = train_pipeline(&dataset, o.target, &config)?;
    write_atomic(
        &model_path(&o.out_dir, o.target),
        model.to_json().as_bytes(),
    )?;
    let report_text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Internal(e.to_string()))?
        + "\n";
    write_atomic(
        &training_report_path(&o.out_dir, o.target),
        report_text.as_bytes(),
    )?;
    Ok((model, report))
}

pub enum PredictSource {
    Trace(PathBuf),
    /// Run fault-free to obtain the trace.
    Program {
        program: PathBuf,
        inputs: PathBuf,
    },
}

pub struct PredictOptions {
    pub model_sr: PathBuf,
    pub model_ir: PathBuf,
    pub sources: Vec<PredictSource>,
    pub n_self: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub success: f64,
    pub sdc: f64,
    pub interruption: f64,
}

/// Loads both predictors and checks that they are the pair they claim to be.
pub fn load_model_pair(sr: &Path, ir: &Path) -> Result<(TrainedPredictor, TrainedPredictor)> {
    let (a, b) = (load_model(sr)?, load_model(ir)?);
    if a.target != Target::Success {
        return Err(CliError::data(
            sr,
            format!("model predicts {}, expected success", a.target),
        ));
    }
    if b.target != Target::Interruption {
        return Err(CliError::data(
            ir,
            format!("model predicts {}, expected interruption", b.target),
        ));
    }
    if a.width() != b.width() {
        return Err(CliError::Data(format!(
            "models disagree on feature width: {} vs {}",
            a.width(),
            b.width()
        )));
    }
    Ok((a, b))
}

pub fn predict_features(
    sr: &TrainedPredictor,
    ir: &TrainedPredictor,
    id: &str,
    x: &[f64],
) -> Result<Prediction> {
    let s = sr.predict(x)?;
    let i = ir.predict(x)?;
    Ok(Prediction {
        id: id.to_string(),
        success: s,
        sdc: (1.0 - s - i).max(0.0),
        interruption: i,
    })
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn source_trace(source: &PredictSource) -> Result<(String, Trace)> {
    match source {
        PredictSource::Trace(p) => Ok((stem(p), load_trace(p)?)),
        PredictSource::Program { program, inputs } => {
            let prog = load_program(program)?;
            let bindings = load_bindings(inputs)?;
            let outcome = resil_core::fi::execute(&prog, &bindings, GOLDEN_STEP_LIMIT)
                .map_err(|e| CliError::data(program, e))?;
            if outcome.status != resil_core::fi::Status::Completed {
                return Err(CliError::data(
                    program,
                    format!("fault-free run did not complete: {:?}", outcome.status),
                ));
            }
            Ok((
                stem(program),
                outcome.trace.expect("execute records a trace"),
            ))
        }
    }
}

/// Predicted rates for each source, models loaded once. Never injects a
/// fault.
pub fn predict(o: &PredictOptions) -> Result<Vec<Prediction>> {
    let (sr, ir) = load_model_pair(&o.model_sr, &o.model_ir)?;
    let config = FeatureConfig {
        n_self: o.n_self,
        schedule: Schedule::Sequential,
    };
    map_slice(&o.sources, Schedule::default(), |source| {
        let (id, trace) = source_trace(source)?;
        let x = assemble_feature_vector_with(&trace, &config);
        predict_features(&sr, &ir, &id, x.as_slice())
    })
    .into_iter()
    .collect()
}

pub fn prediction_text(predictions: &[Prediction]) -> String {
    let mut out = String::from("id,success,sdc,interruption\n");
    for p in predictions {
        out += &format!(
            "{},{},{},{}\n",
            p.id,
            formats::sig9(p.success),
            formats::sig9(p.sdc),
            formats::sig9(p.interruption)
        );
    }
    out
}

pub struct EvaluateOptions {
    pub model_sr: PathBuf,
    pub model_ir: PathBuf,
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub n_self: usize,
}

/// Scores both predictors on a labelled corpus; writes `report.csv` and
/// `report.txt`.
pub fn evaluate(o: &EvaluateOptions) -> Result<Vec<ReportRow>> {
    let (sr, ir) = load_model_pair(&o.model_sr, &o.model_ir)?;
    let joined = join_corpus(&o.manifest, &o.out_dir, o.seed)?;
    if joined.is_empty() {
        return Err(CliError::data(&o.manifest, "held-out set is empty"));
    }
    let traces: Vec<PathBuf> = joined.iter().map(|(_, t)| t.clone()).collect();
    let xs = feature_rows(&traces, o.n_self)?;
    let mut rows = Vec::new();
    for ((label, _), x) in joined.iter().zip(&xs) {
        let p = predict_features(&sr, &ir, &label.id, x)?;
        rows.push(ReportRow::new(
            &label.id,
            [label.success, label.sdc, label.interruption],
            p.success,
            p.interruption,
        ));
    }
    write_atomic(
        &o.out_dir.join("report.csv"),
        formats::report_csv(&rows).as_bytes(),
    )?;
    write_atomic(
        &o.out_dir.join("report.txt"),
        formats::report_table(&rows).as_bytes(),
    )?;
    Ok(rows)
}

pub struct FiRunOptions {
    pub program: PathBuf,
    pub inputs: PathBuf,
    pub n: usize,
    pub seed: u64,
    pub budget: Option<u64>,
    pub tolerance: String,
}

/// One campaign on one program.
pub fn fi_run(o: &FiRunOptions) -> Result<LabelRow> {
    if o.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let verifier = parse_verifier(&o.tolerance).map_err(CliError::Usage)?;
    let program = load_program(&o.program)?;
    let inputs = load_bindings(&o.inputs)?;
    let campaign = Campaign::new(&program, &inputs, o.budget, verifier)
        .map_err(|e| CliError::data(&o.program, e))?;
    let rates = campaign
        .run(o.n, o.seed, Schedule::default())
        .map_err(|e| CliError::data(&o.program, e))?;
    Ok(LabelRow::new(&stem(&o.program), rates.counts))
}
