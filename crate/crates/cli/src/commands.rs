use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use notescreen_core::adapt::{evaluate_notes, train, Checkpoint, TrainConfig, TrainedModel};
use notescreen_core::corpus::{
    generate_synthetic, ingest, stratified_split, write_jsonl, Cohort, DataSplit, Format, Label, SplitManifest,
    SplitSpec, SynthConfig,
};
use notescreen_core::eval::{metric_report, DEFAULT_N_BOOT};
use notescreen_core::experiment::{run_sweep, sweep_csv, PreparedData, SweepKind};
use notescreen_core::explain::{category_scores_csv, explain_notes, ExplainConfig, LexiconTagger};
use notescreen_core::model::Prediction;
use notescreen_core::textproc::{encode_cohort, EncodedNote};
use notescreen_core::Exec;
use notescreen_review::{AssistPayload, CaseRecord, EventLog, RegisterCohort, ReviewService};

use crate::config::{echo_config, read_json, write_json, write_text};
use crate::error::{io_error, CliError};

/// MIMIC-IV cohort prevalence: 2651 epilepsy of 3451 notes.
pub const MIMIC_EPILEPSY_FRACTION: f64 = 2651.0 / 3451.0;

fn require<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Usage(format!("missing required --{what}")))
}

fn parse_format(format: Option<&str>, path: &Path) -> Result<Format, CliError> {
    let name = match format {
        Some(f) => f.to_ascii_lowercase(),
        None => path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("jsonl")
            .to_ascii_lowercase(),
    };
    match name.as_str() {
        "csv" => Ok(Format::Csv),
        "jsonl" | "json" => Ok(Format::Jsonl),
        other => Err(CliError::Usage(format!("unknown cohort format {other:?} (jsonl or csv)"))),
    }
}

pub fn load_cohort(path: &Path) -> Result<Cohort, CliError> {
    if !path.exists() {
        return Err(CliError::Data(format!("cohort file {} does not exist", path.display())));
    }
    ingest(path, parse_format(None, path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn label_counts(cohort: &Cohort) -> serde_json::Value {
    let e = cohort.notes().iter().filter(|n| n.label == Label::Epilepsy).count();
    serde_json::json!({"n": cohort.len(), "epilepsy": e, "pnes": cohort.len() - e})
}

// ---------------------------------------------------------------- ingest

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub input: Option<PathBuf>,
    /// `jsonl` or `csv`; inferred from the extension when absent.
    pub format: Option<String>,
}

pub fn ingest_cmd(cfg: &IngestConfig, dir: &Path) -> Result<String, CliError> {
    echo_config(dir, "ingest", cfg)?;
    let input = require(&cfg.input, "input")?;
    let format = parse_format(cfg.format.as_deref(), input)?;
    let cohort = ingest(input, format).map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
    write_jsonl(&cohort, dir.join("cohort.jsonl"))?;
    let counts = label_counts(&cohort);
    write_json(&dir.join("summary.json"), &counts)?;
    Ok(format!("ingested {counts}"))
}

// ---------------------------------------------------------------- split

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub cohort: Option<PathBuf>,
    /// Relative weights for train, validation and test.
    pub ratios: [f64; 3],
    pub seed: u64,
    pub stratify: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            cohort: None,
            ratios: [7.0, 1.0, 2.0],
            seed: 0,
            stratify: true,
        }
    }
}

impl SplitConfig {
    pub fn spec(&self) -> Result<SplitSpec, CliError> {
        let mut spec = SplitSpec::from_weights(self.ratios, self.seed)?;
        spec.stratify = self.stratify;
        Ok(spec)
    }
}

pub fn split_cmd(cfg: &SplitConfig, dir: &Path) -> Result<String, CliError> {
    echo_config(dir, "split", cfg)?;
    let cohort = load_cohort(require(&cfg.cohort, "cohort")?)?;
    let spec = cfg.spec()?;
    let manifest = SplitManifest::new(stratified_split(&cohort, &spec)?, spec);
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(format!(
        "split sizes train {} / val {} / test {}",
        manifest.train.len(),
        manifest.val.len(),
        manifest.test.len()
    ))
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthCmdConfig {
    pub n: usize,
    pub epilepsy_fraction: f64,
    pub seed: u64,
    /// Weak, partly contradictory signal.
    pub hard: bool,
    pub signal_strength: Option<f64>,
}

impl Default for SynthCmdConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            epilepsy_fraction: MIMIC_EPILEPSY_FRACTION,
            seed: 0,
            hard: false,
            signal_strength: None,
        }
    }
}

impl SynthCmdConfig {
    pub fn synth_config(&self) -> SynthConfig {
        let mut c = if self.hard {
            SynthConfig::hard(self.n, self.epilepsy_fraction, self.seed)
        } else {
            SynthConfig {
                n: self.n,
                epilepsy_fraction: self.epilepsy_fraction,
                seed: self.seed,
                ..SynthConfig::default()
            }
        };
        if let Some(s) = self.signal_strength {
            c.signal_strength = s;
        }
        c
    }
}

pub fn synth_cmd(cfg: &SynthCmdConfig, dir: &Path) -> Result<String, CliError> {
    echo_config(dir, "synth", cfg)?;
    let (cohort, planted) = generate_synthetic(&cfg.synth_config())?;
    write_jsonl(&cohort, dir.join("cohort.jsonl"))?;
    write_json(&dir.join("planted.json"), &planted)?;
    let counts = label_counts(&cohort);
    write_json(&dir.join("summary.json"), &counts)?;
    Ok(format!("synthesized {counts}"))
}

// ---------------------------------------------------------------- shared data selection

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    All,
    Train,
    Val,
    Test,
}

fn load_split(
    cohort: &Cohort,
    manifest: Option<&Path>,
    ratios: [f64; 3],
    seed: u64,
) -> Result<(DataSplit, SplitSpec), CliError> {
    match manifest {
        Some(p) => {
            let m: SplitManifest = read_json(p)?;
            Ok((m.split(), m.spec))
        }
        None => {
            let spec = SplitSpec::from_weights(ratios, seed)?;
            Ok((stratified_split(cohort, &spec)?, spec))
        }
    }
}

/// The notes of `partition`; without a manifest only `all` is available.
fn select(cohort: &Cohort, manifest: Option<&Path>, partition: Option<Partition>) -> Result<Cohort, CliError> {
    let partition = partition.unwrap_or(if manifest.is_some() { Partition::Test } else { Partition::All });
    if partition == Partition::All {
        return Ok(cohort.clone());
    }
    let Some(path) = manifest else {
        return Err(CliError::Usage(format!("--partition {partition:?} needs --split")));
    };
    let m: SplitManifest = read_json(path)?;
    let ids = match partition {
        Partition::Train => &m.train,
        Partition::Val => &m.val,
        Partition::Test => &m.test,
        Partition::All => unreachable!(),
    };
    Ok(cohort.subset(ids)?)
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    if !path.exists() {
        return Err(CliError::Data(format!("checkpoint {} does not exist", path.display())));
    }
    Ok(Checkpoint::load(path)?)
}

fn encode_for(ckpt: &Checkpoint, cohort: &Cohort, exec: Exec) -> Result<Vec<EncodedNote>, CliError> {
    Ok(encode_cohort(cohort, &ckpt.vocab, ckpt.windows, exec)?)
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainCmdConfig {
    pub cohort: Option<PathBuf>,
    /// Split manifest; when absent the cohort is split with `ratios` and `split_seed`.
    pub split: Option<PathBuf>,
    pub ratios: [f64; 3],
    pub split_seed: u64,
    pub train: TrainConfig,
}

impl Default for TrainCmdConfig {
    fn default() -> Self {
        Self {
            cohort: None,
            split: None,
            ratios: [7.0, 1.0, 2.0],
            split_seed: 0,
            train: TrainConfig::default(),
        }
    }
}

pub fn train_cmd(cfg: &TrainCmdConfig, dir: &Path, exec: Exec) -> Result<String, CliError> {
    echo_config(dir, "train", cfg)?;
    cfg.train.validate()?;
    let cohort = load_cohort(require(&cfg.cohort, "cohort")?)?;
    let (split, spec) = load_split(&cohort, cfg.split.as_deref(), cfg.ratios, cfg.split_seed)?;
    write_json(&dir.join("split.json"), &SplitManifest::new(split.clone(), spec))?;
    let data = PreparedData::from_data_split(&cohort, &split)?;
    let w = cfg.train.windows;
    let train_notes = encode_cohort(&data.train, &data.vocab, w, exec)?;
    let val_notes = encode_cohort(&data.val, &data.vocab, w, exec)?;
    let model = TrainedModel::initial(data.vocab.size(), &cfg.train)?;
    let (model, history) = train(model, &train_notes, &val_notes, &cfg.train, exec)?;
    Checkpoint::new(model, data.vocab, cfg.train.clone())?.save(dir.join("checkpoint.json"))?;
    write_text(&dir.join("history.csv"), &history.to_csv())?;
    let last = history.epochs.last().expect("at least one epoch");
    Ok(format!(
        "trained {} epochs (selected epoch {}), final loss {:.4}, val AUC {}",
        history.epochs.len(),
        history.selected_epoch,
        last.train_loss,
        last.val_auc.map_or("undefined".to_string(), |a| format!("{a:.4}"))
    ))
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub checkpoint: Option<PathBuf>,
    pub cohort: Option<PathBuf>,
    pub split: Option<PathBuf>,
    /// Defaults to `test` with a split manifest, `all` without.
    pub partition: Option<Partition>,
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            checkpoint: None,
            cohort: None,
            split: None,
            partition: None,
            n_boot: DEFAULT_N_BOOT,
            seed: 0,
        }
    }
}

fn predictions_csv(notes: &[EncodedNote], preds: &[Prediction]) -> String {
    let mut out = String::from("note_id,label,p_epilepsy,predicted_label\n");
    for (n, p) in notes.iter().zip(preds) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            n.id,
            n.label.as_str(),
            p.p_epilepsy,
            p.predicted_label.as_str()
        ));
    }
    out
}

pub fn eval_cmd(cfg: &EvalConfig, dir: &Path, exec: Exec) -> Result<String, CliError> {
    echo_config(dir, "eval", cfg)?;
    let ckpt = load_checkpoint(require(&cfg.checkpoint, "checkpoint")?)?;
    let cohort = load_cohort(require(&cfg.cohort, "cohort")?)?;
    let cohort = select(&cohort, cfg.split.as_deref(), cfg.partition)?;
    let notes = encode_for(&ckpt, &cohort, exec)?;
    let preds = evaluate_notes(&ckpt.params()?, &notes, exec)?;
    let scores: Vec<f64> = preds.iter().map(|p| p.p_epilepsy).collect();
    let labels: Vec<Label> = notes.iter().map(|n| n.label).collect();
    let report = metric_report(&scores, &labels, cfg.n_boot, cfg.seed, exec)?;
    write_json(&dir.join("metrics.json"), &report)?;
    write_text(&dir.join("predictions.csv"), &predictions_csv(&notes, &preds))?;
    write_text(&dir.join("confusion.csv"), &report.confusion.to_csv())?;
    Ok(format!(
        "n {} AUC {:.4} [{:.4}, {:.4}] accuracy {:.4} [{:.4}, {:.4}]",
        report.n,
        report.auc,
        report.ci_auc[0],
        report.ci_auc[1],
        report.accuracy,
        report.ci_accuracy[0],
        report.ci_accuracy[1]
    ))
}

// ---------------------------------------------------------------- explain

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainCmdConfig {
    pub checkpoint: Option<PathBuf>,
    pub cohort: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub partition: Option<Partition>,
    /// Explain only the first `limit` selected notes.
    pub limit: Option<usize>,
    pub explain: ExplainConfig,
    /// Sentences included in each review-service assist payload.
    pub assist_k: usize,
}

impl Default for ExplainCmdConfig {
    fn default() -> Self {
        Self {
            checkpoint: None,
            cohort: None,
            split: None,
            partition: None,
            limit: None,
            explain: ExplainConfig::default(),
            assist_k: 10,
        }
    }
}

pub fn explain_cmd(cfg: &ExplainCmdConfig, dir: &Path, exec: Exec) -> Result<String, CliError> {
    echo_config(dir, "explain", cfg)?;
    let ckpt = load_checkpoint(require(&cfg.checkpoint, "checkpoint")?)?;
    let cohort = load_cohort(require(&cfg.cohort, "cohort")?)?;
    let cohort = select(&cohort, cfg.split.as_deref(), cfg.partition)?;
    let mut notes = encode_for(&ckpt, &cohort, exec)?;
    if let Some(limit) = cfg.limit {
        notes.truncate(limit);
    }
    let params = ckpt.params()?;
    let preds = evaluate_notes(&params, &notes, exec)?;
    let reports = explain_notes(&params, &notes, &LexiconTagger::builtin(), &cfg.explain, exec)?;

    let mut jsonl = String::new();
    for r in &reports {
        jsonl.push_str(&serde_json::to_string(r).expect("serializable"));
        jsonl.push('\n');
    }
    write_text(&dir.join("reports.jsonl"), &jsonl)?;
    write_text(&dir.join("category_scores.csv"), &category_scores_csv(&reports))?;
    let assist: BTreeMap<String, AssistPayload> = reports
        .iter()
        .zip(&preds)
        .map(|(r, p)| (r.note_id.clone(), AssistPayload::from_report(p, r, cfg.assist_k)))
        .collect();
    write_json(&dir.join("assist.json"), &assist)?;
    let worst = reports
        .iter()
        .map(|r| r.completeness_residual)
        .fold(0.0f64, f64::max);
    Ok(format!(
        "explained {} notes (m = {}), max completeness residual {worst:.2e}",
        reports.len(),
        cfg.explain.m_steps
    ))
}

// ---------------------------------------------------------------- experiment

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub kind: Option<SweepKind>,
    /// Defaults to the standard sweep for `kind`.
    pub values: Option<Vec<f64>>,
    /// Cohort file; a synthetic cohort from `synth` is used when absent.
    pub cohort: Option<PathBuf>,
    pub synth: SynthCmdConfig,
    pub ratios: [f64; 3],
    pub split_seed: u64,
    pub train: TrainConfig,
    pub n_boot: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: None,
            values: None,
            cohort: None,
            synth: SynthCmdConfig::default(),
            ratios: [7.0, 1.0, 2.0],
            split_seed: 0,
            train: TrainConfig::default(),
            n_boot: DEFAULT_N_BOOT,
        }
    }
}

pub fn experiment_cmd(cfg: &ExperimentConfig, dir: &Path, exec: Exec) -> Result<String, CliError> {
    echo_config(dir, "experiment", cfg)?;
    let kind = cfg
        .kind
        .ok_or_else(|| CliError::Usage("missing required --kind (imbalance, ratio or scale)".into()))?;
    cfg.train.validate()?;
    let values = cfg.values.clone().unwrap_or_else(|| kind.default_values());
    if values.is_empty() {
        return Err(CliError::Usage("empty sweep".into()));
    }
    let cohort = match &cfg.cohort {
        Some(p) => load_cohort(p)?,
        None => generate_synthetic(&cfg.synth.synth_config())?.0,
    };
    let data = PreparedData::from_split(&cohort, &SplitSpec::from_weights(cfg.ratios, cfg.split_seed)?)?;
    let rows = run_sweep(&data, kind, &values, &cfg.train, cfg.n_boot, exec);

    // one subdirectory per point, merged in sweep order
    let points = dir.join("points");
    for (i, row) in rows.iter().enumerate() {
        let sub = points.join(format!("{i:02}-{}-{}", kind.name(), row.value));
        std::fs::create_dir_all(&sub).map_err(|e| io_error(format!("cannot create {}", sub.display()), e))?;
        write_json(&sub.join("row.json"), row)?;
    }
    write_text(&dir.join("sweep.csv"), &sweep_csv(&rows))?;
    let failed = rows.iter().filter(|r| r.report.is_none()).count();
    let summary: Vec<String> = rows
        .iter()
        .map(|r| match r.auc() {
            Some(a) => format!("{}={:.4}", r.value, a),
            None => format!("{}=failed", r.value),
        })
        .collect();
    Ok(format!(
        "{} sweep AUC: {} ({failed} failed)",
        kind.name(),
        summary.join(" ")
    ))
}

// ---------------------------------------------------------------- serve

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServeConfig {
    pub host: String,
    pub port: u16,
    /// Cohorts registered at startup; the cohort id is the file stem.
    pub cohort: Vec<PathBuf>,
    /// `assist.json` from `explain`, attached to the first cohort.
    pub attributions: Option<PathBuf>,
    /// Event log; reusing a log restores every session.
    pub log: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            cohort: Vec::new(),
            attributions: None,
            log: None,
        }
    }
}

pub fn register_request(
    cohort_id: &str,
    cohort: &Cohort,
    attributions: Option<BTreeMap<String, AssistPayload>>,
) -> RegisterCohort {
    // attributions may cover a subset (e.g. the test partition): keep only
    // the notes that have them so assisted sessions stay possible
    let cases: Vec<CaseRecord> = cohort
        .notes()
        .iter()
        .filter(|n| attributions.as_ref().is_none_or(|a| a.contains_key(&n.id)))
        .map(|n| CaseRecord {
            case_id: n.id.clone(),
            text: n.text.clone(),
            label: n.label,
        })
        .collect();
    RegisterCohort {
        cohort_id: cohort_id.to_string(),
        cases,
        attributions,
    }
}

pub fn build_service(cfg: &ServeConfig, dir: &Path) -> Result<ReviewService, CliError> {
    let log_path = cfg.log.clone().unwrap_or_else(|| dir.join("events.jsonl"));
    let service = ReviewService::new(EventLog::open(&log_path)?, notescreen_review::system_clock())?;
    let mut attributions = match &cfg.attributions {
        Some(p) => Some(read_json::<BTreeMap<String, AssistPayload>>(p)?),
        None => None,
    };
    for path in &cfg.cohort {
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CliError::Usage(format!("cannot derive a cohort id from {}", path.display())))?
            .to_string();
        if service.has_cohort(&id) {
            continue;
        }
        let cohort = load_cohort(path)?;
        service.register_cohort(register_request(&id, &cohort, attributions.take()))?;
    }
    Ok(service)
}

pub fn serve_cmd(cfg: &ServeConfig, dir: &Path) -> Result<String, CliError> {
    echo_config(dir, "serve", cfg)?;
    let service = Arc::new(build_service(cfg, dir)?);
    let addr = format!("{}:{}", cfg.host, cfg.port);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| io_error("cannot start runtime", e))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| io_error(format!("cannot bind {addr}"), e))?;
        eprintln!("review service listening on http://{addr}");
        notescreen_review::serve(listener, service)
            .await
            .map_err(|e| io_error("server stopped", e))
    })?;
    Ok("server stopped".into())
}
