//! Surrogate quality measures and the batch evaluation protocol.
//!
//! Regressors are judged by how often they order a pair of individuals the
//! same way as the true evaluator (`a <= b` on both sides). Classifiers are
//! judged by accuracy and support-weighted precision and recall.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{self, DatasetError, DatasetLog, Example};
use crate::evaluation::Label;
use crate::surrogate::{FeatureScale, Hyperparameters, SurrogateError, SurrogateModel, Task};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("need at least {needed} examples, got {found}")]
    TooFewExamples { needed: usize, found: usize },
    #[error("lengths differ ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("no batch had enough examples to score")]
    NoScoredBatch,
    #[error("report line {line}: {message}")]
    Report { line: usize, message: String },
    #[error("reports have different columns: '{0}' and '{1}'")]
    SchemaMismatch(String, String),
    #[error("dataset '{0}' appears twice in {1} mode")]
    DuplicateRow(String, Mode),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
}

/// 1 when `a <= b`, else 0.
pub fn compare(a: f64, b: f64) -> u8 {
    u8::from(a <= b)
}

/// Fraction of the `n(n-1)/2` unordered pairs on which `predicted` orders the
/// two items like `truth`.
pub fn comparison_accuracy(truth: &[f64], predicted: &[f64]) -> Result<f64, MetricsError> {
    if truth.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch(truth.len(), predicted.len()));
    }
    let n = truth.len();
    if n < 2 {
        return Err(MetricsError::TooFewExamples {
            needed: 2,
            found: n,
        });
    }
    let agree: u64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let (ti, pi) = (truth[i], predicted[i]);
            (i + 1..n)
                .filter(|&j| compare(ti, truth[j]) == compare(pi, predicted[j]))
                .count() as u64
        })
        .sum();
    Ok(agree as f64 / pair_count(n) as f64)
}

pub fn pair_count(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

/// Comparison accuracy of a fitted regressor on `examples`.
pub fn model_comparison_accuracy(
    model: &SurrogateModel,
    examples: &[&Example],
) -> Result<f64, MetricsError> {
    let truth: Vec<f64> = examples.iter().map(|e| e.fitness as f64).collect();
    let predicted = examples
        .iter()
        .map(|e| model.predict_fitness(&e.features))
        .collect::<Result<Vec<_>, _>>()?;
    comparison_accuracy(&truth, &predicted)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Accuracy plus precision and recall averaged over both classes, weighted by
/// class support. A class that is never predicted has precision 0.
pub fn classification_report(
    predictions: &[Label],
    labels: &[Label],
) -> Result<ClassificationReport, MetricsError> {
    if predictions.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(
            predictions.len(),
            labels.len(),
        ));
    }
    if labels.is_empty() {
        return Err(MetricsError::TooFewExamples {
            needed: 1,
            found: 0,
        });
    }
    let n = labels.len() as f64;
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count() as f64;
    let mut precision = 0.0;
    let mut recall = 0.0;
    for class in [Label::Feasible, Label::NonFeasible] {
        let support = labels.iter().filter(|&&l| l == class).count() as f64;
        if support == 0.0 {
            continue;
        }
        let predicted = predictions.iter().filter(|&&p| p == class).count() as f64;
        let hits = predictions
            .iter()
            .zip(labels)
            .filter(|(&p, &l)| p == class && l == class)
            .count() as f64;
        let weight = support / n;
        if predicted > 0.0 {
            precision += weight * hits / predicted;
        }
        recall += weight * hits / support;
    }
    Ok(ClassificationReport {
        accuracy: correct / n,
        precision,
        recall,
    })
}

pub fn model_classification_report(
    model: &SurrogateModel,
    examples: &[&Example],
) -> Result<ClassificationReport, MetricsError> {
    let predictions = examples
        .iter()
        .map(|e| model.predict_feasible(&e.features))
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<Label> = examples.iter().map(|e| e.label).collect();
    classification_report(&predictions, &labels)
}

/// Per-batch scores with their minimum, maximum and mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub scores: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl BatchReport {
    pub fn from_scores(scores: Vec<f64>) -> Result<Self, MetricsError> {
        if scores.is_empty() {
            return Err(MetricsError::NoScoredBatch);
        }
        let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        Ok(Self {
            scores,
            min,
            max,
            mean,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Traditional,
    Incremental,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Traditional => "traditional",
            Mode::Incremental => "incremental",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "traditional" => Ok(Mode::Traditional),
            "incremental" => Ok(Mode::Incremental),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub batch_size: usize,
    pub train_fraction: f64,
    /// Batch `i` is split with seed `split_seed + i`.
    pub split_seed: u64,
    pub hyper: Hyperparameters,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            batch_size: 10_000,
            train_fraction: 0.7,
            split_seed: 0,
            hyper: Hyperparameters::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    pub task: Task,
    pub mode: Mode,
    /// Comparison accuracy (regression) or accuracy (classification) per
    /// scored batch.
    pub report: BatchReport,
    /// Per-batch classification reports; empty for regression.
    pub classification: Vec<ClassificationReport>,
    /// Model after the last scored batch.
    pub model: SurrogateModel,
    pub batches: usize,
    pub skipped: usize,
}

impl ProtocolOutcome {
    /// Mean accuracy, precision and recall over the scored batches.
    pub fn mean_classification(&self) -> Option<ClassificationReport> {
        if self.classification.is_empty() {
            return None;
        }
        let n = self.classification.len() as f64;
        let sum = |f: fn(&ClassificationReport) -> f64| {
            self.classification.iter().map(f).sum::<f64>() / n
        };
        Some(ClassificationReport {
            accuracy: sum(|c| c.accuracy),
            precision: sum(|c| c.precision),
            recall: sum(|c| c.recall),
        })
    }

    pub fn row(&self, dataset: &str) -> ReportRow {
        let values = match self.mean_classification() {
            Some(c) => [c.accuracy, c.precision, c.recall],
            None => [self.report.min, self.report.max, self.report.mean],
        };
        ReportRow {
            dataset: dataset.to_owned(),
            task: self.task,
            mode: self.mode,
            batches: self.report.scores.len(),
            values,
        }
    }
}

/// Splits each consecutive batch of the log into training and test parts,
/// fits a fresh model (traditional) or updates one persistent model
/// (incremental) on the training part, and scores the test part.
///
/// Batches whose training or test part would hold fewer than two examples
/// are skipped.
pub fn batch_protocol(
    log: &DatasetLog,
    mode: Mode,
    task: Task,
    config: &ProtocolConfig,
) -> Result<ProtocolOutcome, MetricsError> {
    let scale = FeatureScale::for_alleles(log.n_features(), log.n_alleles())?;
    if log.len() < config.batch_size {
        log::warn!(
            "dataset holds {} examples, fewer than one batch of {}; using a single block",
            log.len(),
            config.batch_size
        );
    }
    let mut persistent = SurrogateModel::new(task, scale.clone(), config.hyper)?;
    let mut last = None;
    let mut scores = Vec::new();
    let mut classification = Vec::new();
    let mut batches = 0;
    let mut skipped = 0;
    for (i, block) in dataset::batches(log.examples(), config.batch_size)?.enumerate() {
        batches += 1;
        let split = dataset::split(
            block,
            config.train_fraction,
            config.split_seed.wrapping_add(i as u64),
        )?;
        if split.train.len() < 2 || split.test.len() < 2 {
            log::warn!("skipping batch {i} with {} examples", block.len());
            skipped += 1;
            continue;
        }
        let model = match mode {
            Mode::Traditional => {
                SurrogateModel::train(task, &split.train, scale.clone(), config.hyper)?
            }
            Mode::Incremental => {
                persistent.partial_fit(&split.train)?;
                persistent.clone()
            }
        };
        match task {
            Task::Regression => scores.push(model_comparison_accuracy(&model, &split.test)?),
            Task::Classification => {
                let c = model_classification_report(&model, &split.test)?;
                scores.push(c.accuracy);
                classification.push(c);
            }
        }
        last = Some(model);
    }
    Ok(ProtocolOutcome {
        task,
        mode,
        report: BatchReport::from_scores(scores)?,
        classification,
        model: last.ok_or(MetricsError::NoScoredBatch)?,
        batches,
        skipped,
    })
}

/// One dataset and mode in a report file.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub task: Task,
    pub mode: Mode,
    pub batches: usize,
    /// Min, max, mean (regression) or accuracy, precision, recall
    /// (classification).
    pub values: [f64; 3],
}

pub fn report_header(task: Task) -> &'static str {
    match task {
        Task::Regression => "dataset,task,mode,batches,min,max,mean",
        Task::Classification => "dataset,task,mode,batches,accuracy,precision,recall",
    }
}

fn column_names(task: Task) -> [&'static str; 3] {
    match task {
        Task::Regression => ["Min", "Max", "Mean"],
        Task::Classification => ["A", "P", "R"],
    }
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    if let Some(first) = rows.first() {
        out.push_str(report_header(first.task));
        out.push('\n');
    }
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.6},{:.6}\n",
            r.dataset, r.task, r.mode, r.batches, r.values[0], r.values[1], r.values[2]
        ));
    }
    out
}

pub fn parse_report(text: &str) -> Result<Vec<ReportRow>, MetricsError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(MetricsError::Report {
        line: 1,
        message: "empty report".into(),
    })?;
    let header = header.trim();
    let task = [Task::Regression, Task::Classification]
        .into_iter()
        .find(|&t| report_header(t) == header)
        .ok_or_else(|| MetricsError::Report {
            line: 1,
            message: format!("unrecognised header '{header}'"),
        })?;
    let mut rows = Vec::new();
    for (i, line) in lines {
        let bad = |message: String| MetricsError::Report {
            line: i + 1,
            message,
        };
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 7 {
            return Err(bad(format!("expected 7 fields, found {}", f.len())));
        }
        let row_task: Task = f[1].parse().map_err(bad)?;
        if row_task != task {
            return Err(bad(format!("task '{row_task}' under a {task} header")));
        }
        let mode: Mode = f[2].parse().map_err(bad)?;
        let batches = f[3]
            .parse()
            .map_err(|_| bad(format!("bad batch count '{}'", f[3])))?;
        let mut values = [0.0; 3];
        for (v, s) in values.iter_mut().zip(&f[4..]) {
            *v = s.parse().map_err(|_| bad(format!("bad value '{s}'")))?;
        }
        rows.push(ReportRow {
            dataset: f[0].to_owned(),
            task,
            mode,
            batches,
            values,
        });
    }
    Ok(rows)
}

/// Aligned table with one line per dataset and the incremental and
/// traditional columns side by side.
pub fn merge_reports(reports: &[Vec<ReportRow>]) -> Result<String, MetricsError> {
    let mut task = None;
    let mut order: Vec<String> = Vec::new();
    let mut cells: HashMap<(String, Mode), [f64; 3]> = HashMap::new();
    for row in reports.iter().flatten() {
        match task {
            None => task = Some(row.task),
            Some(t) if t != row.task => {
                return Err(MetricsError::SchemaMismatch(
                    report_header(t).into(),
                    report_header(row.task).into(),
                ))
            }
            Some(_) => {}
        }
        if !order.contains(&row.dataset) {
            order.push(row.dataset.clone());
        }
        if cells
            .insert((row.dataset.clone(), row.mode), row.values)
            .is_some()
        {
            return Err(MetricsError::DuplicateRow(row.dataset.clone(), row.mode));
        }
    }
    let Some(task) = task else {
        return Ok(String::new());
    };
    let names = column_names(task);
    let width = order
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(0)
        .max("dataset".len());
    let block = |cells: [String; 3]| format!("  {:>6} {:>6} {:>6}", cells[0], cells[1], cells[2]);
    let mut out = format!(
        "{:width$}  {:<20}  {}\n",
        "", "Incremental learning", "Traditional learning"
    );
    let heading = names.map(str::to_owned);
    out.push_str(&format!(
        "{:width$}{}{}\n",
        "dataset",
        block(heading.clone()),
        block(heading)
    ));
    for dataset in &order {
        let mut line = format!("{dataset:width$}");
        for mode in [Mode::Incremental, Mode::Traditional] {
            let cells = match cells.get(&(dataset.clone(), mode)) {
                Some(v) => v.map(|x| format!("{x:.2}")),
                None => ["-", "-", "-"].map(str::to_owned),
            };
            line.push_str(&block(cells));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use Label::{Feasible as F, NonFeasible as NF};

    #[test]
    fn comparison_rule() {
        assert_eq!(compare(5.0, 7.0), 1);
        assert_eq!(compare(4.0, 4.0), 1);
        assert_eq!(compare(10.0, 3.0), 0);
    }

    #[test]
    fn reversed_order_scores_zero() {
        assert_eq!(pair_count(3), 3);
        assert_eq!(
            comparison_accuracy(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(),
            0.0
        );
        assert_eq!(
            comparison_accuracy(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(),
            1.0
        );
        assert!(comparison_accuracy(&[1.0], &[1.0]).is_err());
        assert!(comparison_accuracy(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn ties_count_for_the_first_ordering() {
        // truth tie: i <= j holds, so only a prediction with p_i <= p_j agrees
        assert_eq!(comparison_accuracy(&[2.0, 2.0], &[1.0, 5.0]).unwrap(), 1.0);
        assert_eq!(comparison_accuracy(&[2.0, 2.0], &[5.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn four_example_classification() {
        let r = classification_report(&[F, NF, NF, NF], &[F, F, NF, NF]).unwrap();
        assert_eq!(r.accuracy, 0.75);
        assert!((r.precision - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(r.recall, 0.75);
        let perfect = classification_report(&[F, NF, F], &[F, NF, F]).unwrap();
        assert_eq!(
            (perfect.accuracy, perfect.precision, perfect.recall),
            (1.0, 1.0, 1.0)
        );
        assert!(classification_report(&[], &[]).is_err());
        assert!(classification_report(&[F], &[F, NF]).is_err());
    }

    #[test]
    fn never_predicted_class_has_zero_precision() {
        let r = classification_report(&[F, F, F, F], &[F, F, F, NF]).unwrap();
        assert_eq!(r.precision, 0.75 * 0.75);
        assert_eq!(r.recall, 0.75);
    }

    #[test]
    fn aggregation() {
        let r = BatchReport::from_scores(vec![0.8, 0.9, 1.0]).unwrap();
        assert_eq!((r.min, r.max), (0.8, 1.0));
        assert!((r.mean - 0.9).abs() < 1e-12);
        assert!(BatchReport::from_scores(vec![]).is_err());
    }

    fn synthetic_log(n: usize, seed: u64) -> DatasetLog {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut log = DatasetLog::new("syn", 4, Some(50));
        for _ in 0..n {
            let genes: Vec<usize> = (0..4).map(|_| rng.gen_range(0..50)).collect();
            let fitness = genes.iter().map(|&g| g as u64 * 3).sum::<u64>();
            let label = if fitness < 300 { F } else { NF };
            log.record_evaluation(&genes, fitness, label).unwrap();
        }
        log
    }

    #[test]
    fn protocol_batches_and_modes() {
        let log = synthetic_log(2_500, 1);
        let config = ProtocolConfig {
            batch_size: 1_000,
            ..ProtocolConfig::default()
        };
        for mode in [Mode::Traditional, Mode::Incremental] {
            let out = batch_protocol(&log, mode, Task::Regression, &config).unwrap();
            assert_eq!(out.batches, 3);
            assert_eq!(out.report.scores.len(), 3);
            assert!(out.report.min <= out.report.mean && out.report.mean <= out.report.max);
            assert!(out.classification.is_empty());
        }
        let out = batch_protocol(&log, Mode::Traditional, Task::Classification, &config).unwrap();
        assert_eq!(out.classification.len(), 3);
        for c in &out.classification {
            assert!((c.recall - c.accuracy).abs() < 1e-12);
        }
        let row = out.row("syn");
        assert_eq!(row.values[0], out.mean_classification().unwrap().accuracy);
    }

    #[test]
    fn protocol_small_dataset_uses_one_block() {
        let log = synthetic_log(30, 2);
        let out = batch_protocol(
            &log,
            Mode::Traditional,
            Task::Regression,
            &ProtocolConfig::default(),
        )
        .unwrap();
        assert_eq!(out.batches, 1);
        assert_eq!(out.report.scores.len(), 1);
    }

    #[test]
    fn protocol_skips_tiny_tail() {
        let log = synthetic_log(1_002, 3);
        let config = ProtocolConfig {
            batch_size: 1_000,
            ..ProtocolConfig::default()
        };
        let out = batch_protocol(&log, Mode::Incremental, Task::Regression, &config).unwrap();
        assert_eq!((out.batches, out.skipped), (2, 1));
    }

    #[test]
    fn report_round_trip_and_merge() {
        let row = |dataset: &str, mode, values| ReportRow {
            dataset: dataset.into(),
            task: Task::Regression,
            mode,
            batches: 3,
            values,
        };
        let trad = vec![row("comp01", Mode::Traditional, [0.62, 0.98, 0.93])];
        let inc = vec![row("comp01", Mode::Incremental, [0.6, 0.95, 0.82])];
        let text = report_csv(&trad);
        assert!(text.starts_with("dataset,task,mode,batches,min,max,mean\n"));
        assert_eq!(parse_report(&text).unwrap(), trad);

        let table = merge_reports(&[trad.clone(), inc]).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(
            lines[0].contains("Incremental learning") && lines[0].contains("Traditional learning")
        );
        assert!(lines[0].find("Incremental").unwrap() < lines[0].find("Traditional").unwrap());
        assert_eq!(
            lines[2].split_whitespace().collect::<Vec<_>>(),
            ["comp01", "0.60", "0.95", "0.82", "0.62", "0.98", "0.93"]
        );

        let other = vec![row("comp02", Mode::Traditional, [0.5, 0.7, 0.6])];
        let table = merge_reports(&[trad.clone(), other]).unwrap();
        assert_eq!(table.lines().count(), 4);

        let class = vec![ReportRow {
            task: Task::Classification,
            ..trad[0].clone()
        }];
        assert!(matches!(
            merge_reports(&[trad.clone(), class]),
            Err(MetricsError::SchemaMismatch(..))
        ));
        assert!(matches!(
            merge_reports(&[trad.clone(), trad]),
            Err(MetricsError::DuplicateRow(..))
        ));
    }

    #[test]
    fn report_parse_errors() {
        assert!(matches!(
            parse_report(""),
            Err(MetricsError::Report { line: 1, .. })
        ));
        let text = "dataset,task,mode,batches,min,max,mean\nx,regression,sideways,1,0,0,0\n";
        assert!(matches!(
            parse_report(text),
            Err(MetricsError::Report { line: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn true_evaluator_is_perfect(truth in prop::collection::vec(0u32..100, 2..60)) {
            let t: Vec<f64> = truth.iter().map(|&x| f64::from(x)).collect();
            prop_assert_eq!(comparison_accuracy(&t, &t).unwrap(), 1.0);
        }

        #[test]
        fn monotone_transform_invariance(
            truth in prop::collection::vec(-50i32..50, 2..40),
            predicted in prop::collection::vec(-50i32..50, 40),
        ) {
            let t: Vec<f64> = truth.iter().map(|&x| f64::from(x)).collect();
            let p: Vec<f64> = predicted[..t.len()].iter().map(|&x| f64::from(x)).collect();
            let q: Vec<f64> = p.iter().map(|x| (x / 10.0).exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(comparison_accuracy(&t, &p).unwrap(), comparison_accuracy(&t, &q).unwrap());
        }

        #[test]
        fn weighted_recall_is_accuracy(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..80)) {
            let to = |b: bool| if b { F } else { NF };
            let p: Vec<Label> = pairs.iter().map(|x| to(x.0)).collect();
            let l: Vec<Label> = pairs.iter().map(|x| to(x.1)).collect();
            let r = classification_report(&p, &l).unwrap();
            prop_assert!((r.recall - r.accuracy).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&r.precision));
        }
    }
}
