//! End-to-end runs: split → (resample) → train → evaluate, and the
//! robustness sweeps over imbalance ratio, training-data fraction and model
//! width.

use serde::{Deserialize, Serialize};

use crate::adapt::{evaluate_notes, train, TrainConfig, TrainHistory, TrainedModel};
use crate::corpus::{rebalance_training, stratified_split, subsample_training, Cohort, DataSplit, Label, SplitSpec};
use crate::error::{Error, Result};
use crate::eval::{metric_report, MetricReport};
use crate::exec::Exec;
use crate::model::Prediction;
use crate::textproc::{build_vocab, encode_cohort, EncodedNote, Vocabulary};

/// A fixed train/validation/test partition with a vocabulary built from the
/// full training partition, so validation and test encodings never change
/// across sweep points.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Cohort,
    pub val: Cohort,
    pub test: Cohort,
    pub vocab: Vocabulary,
}

impl PreparedData {
    pub fn from_split(cohort: &Cohort, spec: &SplitSpec) -> Result<Self> {
        Self::from_data_split(cohort, &stratified_split(cohort, spec)?)
    }

    /// Uses an existing partition (e.g. one read back from a manifest).
    pub fn from_data_split(cohort: &Cohort, split: &DataSplit) -> Result<Self> {
        let train = cohort.subset(&split.train)?;
        let vocab = build_vocab(&train, 1, usize::MAX)?;
        Ok(Self {
            val: cohort.subset(&split.val)?,
            test: cohort.subset(&split.test)?,
            train,
            vocab,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub model: TrainedModel,
    pub history: TrainHistory,
    pub test_notes: Vec<EncodedNote>,
    pub predictions: Vec<Prediction>,
    pub report: MetricReport,
}

/// Trains on `train` (a subset of `data.train` or the whole of it) and
/// evaluates on the fixed test partition.
pub fn run_once(
    data: &PreparedData,
    train_cohort: &Cohort,
    config: &TrainConfig,
    n_boot: usize,
    exec: Exec,
) -> Result<RunOutcome> {
    let w = config.windows;
    let train_notes = encode_cohort(train_cohort, &data.vocab, w, exec)?;
    let val_notes = encode_cohort(&data.val, &data.vocab, w, exec)?;
    let test_notes = encode_cohort(&data.test, &data.vocab, w, exec)?;
    let model = TrainedModel::initial(data.vocab.size(), config)?;
    let (model, history) = train(model, &train_notes, &val_notes, config, exec)?;
    let params = model.params()?;
    let predictions = evaluate_notes(&params, &test_notes, exec)?;
    let scores: Vec<f64> = predictions.iter().map(|p| p.p_epilepsy).collect();
    let labels: Vec<Label> = test_notes.iter().map(|n| n.label).collect();
    let report = metric_report(&scores, &labels, n_boot, config.seed, exec)?;
    Ok(RunOutcome {
        model,
        history,
        test_notes,
        predictions,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Epilepsy:PNES ratio α of a training set resampled to `2t`.
    Imbalance,
    /// Fraction of the training data kept, class ratio preserved.
    Ratio,
    /// Embedding width `d`; hidden width is `2d`.
    Scale,
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "imbalance" => Ok(Self::Imbalance),
            "ratio" => Ok(Self::Ratio),
            "scale" => Ok(Self::Scale),
            _ => Err(Error::InvalidArgument(format!("unknown sweep kind {s:?}"))),
        }
    }
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Imbalance => "imbalance",
            Self::Ratio => "ratio",
            Self::Scale => "scale",
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            Self::Imbalance => vec![1.0, 5.0, 10.0, 15.0, 20.0],
            Self::Ratio => vec![0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0],
            Self::Scale => vec![8.0, 16.0, 32.0, 64.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: SweepKind,
    pub value: f64,
    pub n_train: usize,
    /// `None` when the point could not run (e.g. infeasible rebalance).
    pub report: Option<MetricReport>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn auc(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.auc)
    }
}

fn sweep_point(
    data: &PreparedData,
    kind: SweepKind,
    value: f64,
    config: &TrainConfig,
    n_boot: usize,
    exec: Exec,
) -> Result<(usize, RunOutcome)> {
    let mut config = config.clone();
    let train_cohort = match kind {
        SweepKind::Imbalance => rebalance_training(&data.train, value, config.seed)?,
        SweepKind::Ratio => subsample_training(&data.train, value, config.seed)?,
        SweepKind::Scale => {
            if !(value >= 1.0 && value.fract() == 0.0) {
                return Err(Error::InvalidArgument(format!("model width must be a positive integer, got {value}")));
            }
            config.embed_dim = value as usize;
            config.hidden_dim = 2 * value as usize;
            data.train.clone()
        }
    };
    let n = train_cohort.len();
    Ok((n, run_once(data, &train_cohort, &config, n_boot, exec)?))
}

/// Runs every sweep point against the same validation and test sets.
/// Points run concurrently under `Exec::Parallel`; rows come back in sweep
/// order. A failing point is reported in its row and the sweep continues.
pub fn run_sweep(
    data: &PreparedData,
    kind: SweepKind,
    values: &[f64],
    config: &TrainConfig,
    n_boot: usize,
    exec: Exec,
) -> Vec<SweepRow> {
    exec.map(values, |&value| match sweep_point(data, kind, value, config, n_boot, Exec::Sequential) {
        Ok((n_train, outcome)) => SweepRow {
            kind,
            value,
            n_train,
            report: Some(outcome.report),
            error: None,
        },
        Err(e) => SweepRow {
            kind,
            value,
            n_train: 0,
            report: None,
            error: Some(e.to_string()),
        },
    })
}

/// Long-format CSV: one row per sweep point and metric.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("sweep,value,n_train,metric,estimate,bootstrap_mean,ci_lo,ci_hi,status\n");
    for r in rows {
        match &r.report {
            Some(m) => {
                for (metric, est, mean, ci) in [
                    ("auc", m.auc, m.mean_auc, m.ci_auc),
                    ("accuracy", m.accuracy, m.mean_accuracy, m.ci_accuracy),
                ] {
                    out.push_str(&format!(
                        "{},{},{},{metric},{est},{mean},{},{},ok\n",
                        r.kind.name(),
                        r.value,
                        r.n_train,
                        ci[0],
                        ci[1]
                    ));
                }
            }
            None => {
                for metric in ["auc", "accuracy"] {
                    out.push_str(&format!("{},{},0,{metric},,,,,failed\n", r.kind.name(), r.value));
                }
            }
        }
    }
    out
}
