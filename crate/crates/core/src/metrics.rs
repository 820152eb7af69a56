//! Evaluation metrics for a trained codebook.
//!
//! Class order is (lcl, kl, lcr) in every table. Entropies are in bits.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::codebook::{usage_stats, Codebook, UsageStats};
use crate::data::{BehaviorClass, Dataset, Normalization, FEATURES, NUM_CLASSES, N_MAX, T_OBS};
use crate::error::{Error, Result};
use crate::nn::{ClassifierInput, ModelParams};
use crate::train::design_matrix;

const CHUNK: usize = 256;

/// Relative frequency of every codebook entry over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryDistribution {
    pub probabilities: Vec<f64>,
    /// Source counts; empty when the distribution was given as raw
    /// probabilities.
    #[serde(default)]
    pub counts: Vec<usize>,
}

impl CategoryDistribution {
    /// Validates a raw probability vector. Entries must be finite and
    /// non-negative and sum to one within 1e-9; the result is renormalized.
    pub fn from_probabilities(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::Invalid("empty probability vector".into()));
        }
        if let Some(p) = probabilities.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::Invalid(format!("invalid probability {p}")));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("probabilities sum to {total}, expected 1")));
        }
        Ok(Self {
            probabilities: probabilities.iter().map(|p| p / total).collect(),
            counts: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Writes `entry,count,probability`. `count` is empty for raw vectors.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["entry", "count", "probability"]).map_err(|e| csv_err(path, e))?;
        for (q, p) in self.probabilities.iter().enumerate() {
            let count = self.counts.get(q).map(|c| c.to_string()).unwrap_or_default();
            w.write_record([q.to_string(), count, format!("{p:?}")])
                .map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    /// Reads a distribution from `.json` (object or bare array), `.csv` with a
    /// `probability` column, or any other file holding whitespace- or
    /// comma-separated numbers.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        match ext {
            "json" => {
                #[derive(Deserialize)]
                #[serde(untagged)]
                enum Json {
                    Full(CategoryDistribution),
                    Raw(Vec<f64>),
                }
                let parsed: Json = serde_json::from_str(&text).map_err(|e| Error::Parse {
                    path: path.into(),
                    line: e.line() as u64,
                    message: e.to_string(),
                })?;
                match parsed {
                    Json::Full(d) if !d.counts.is_empty() => Self::from_counts(d.counts)
                        .and_then(|c| (c.probabilities.len() == d.probabilities.len()).then_some(c).ok_or_else(
                            || Error::Invalid("counts and probabilities differ in length".into()),
                        )),
                    Json::Full(d) => Self::from_probabilities(d.probabilities),
                    Json::Raw(p) => Self::from_probabilities(p),
                }
            }
            "csv" => read_distribution_csv(path),
            _ => {
                let mut probs = Vec::new();
                for (i, line) in text.lines().enumerate() {
                    for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
                        probs.push(tok.parse::<f64>().map_err(|_| Error::Parse {
                            path: path.into(),
                            line: i as u64 + 1,
                            message: format!("not a number: {tok:?}"),
                        })?);
                    }
                }
                Self::from_probabilities(probs)
            }
        }
    }

    fn from_counts(counts: Vec<usize>) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::Invalid("no assignments to count".into()));
        }
        Ok(Self {
            probabilities: counts.iter().map(|&n| n as f64 / total as f64).collect(),
            counts,
        })
    }
}

fn read_distribution_csv(path: &Path) -> Result<CategoryDistribution> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let p_col = col("probability").ok_or_else(|| Error::Parse {
        path: path.into(),
        line: 1,
        message: "missing column `probability`".into(),
    })?;
    let count_col = col("count");
    let mut probs = Vec::new();
    let mut counts = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = i as u64 + 2;
        let field = |c: usize| rec.get(c).unwrap_or("");
        probs.push(field(p_col).parse::<f64>().map_err(|_| Error::Parse {
            path: path.into(),
            line,
            message: format!("bad probability {:?}", field(p_col)),
        })?);
        if let Some(c) = count_col.map(field).filter(|c| !c.is_empty()) {
            counts.push(c.parse::<usize>().map_err(|_| Error::Parse {
                path: path.into(),
                line,
                message: format!("bad count {c:?}"),
            })?);
        }
    }
    if !counts.is_empty() && counts.len() == probs.len() {
        CategoryDistribution::from_counts(counts)
    } else {
        CategoryDistribution::from_probabilities(probs)
    }
}

/// `p_q = n_q / Σ n`, with `n_q` the number of scenarios assigned to entry q.
pub fn occurrence_probabilities(assignments: &[usize], codebook_size: usize) -> Result<CategoryDistribution> {
    if assignments.is_empty() {
        return Err(Error::Invalid("cannot compute occurrence probabilities of an empty dataset".into()));
    }
    let mut counts = vec![0usize; codebook_size];
    for &q in assignments {
        *counts.get_mut(q).ok_or_else(|| {
            Error::Invalid(format!("assignment {q} outside codebook of size {codebook_size}"))
        })? += 1;
    }
    CategoryDistribution::from_counts(counts)
}

/// Shannon entropy in bits; `0·log 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.log2()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyMode {
    /// Ground-truth class frequencies of the scenarios in each entry.
    #[default]
    Empirical,
    /// Mean classifier probabilities of the scenarios in each entry.
    Predicted,
}

/// What the class composition of an entry is computed from.
#[derive(Debug, Clone, Copy)]
pub enum ClassEvidence<'a> {
    Labels(&'a [BehaviorClass]),
    Probabilities(ArrayView2<'a, f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurityReport {
    pub mode: EntropyMode,
    /// `None` for entries without assignments.
    pub entropies: Vec<Option<f64>>,
    pub assigned: Vec<usize>,
    /// Mean over entries with at least one assignment.
    pub h_avg: Option<f64>,
}

impl PurityReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["entry", "assigned", "entropy"]).map_err(|e| csv_err(path, e))?;
        for (q, (h, n)) in self.entropies.iter().zip(&self.assigned).enumerate() {
            let h = h.map(|h| format!("{h:?}")).unwrap_or_default();
            w.write_record([q.to_string(), n.to_string(), h]).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn entropy_per_entry(
    assignments: &[usize],
    evidence: ClassEvidence<'_>,
    codebook_size: usize,
) -> Result<PurityReport> {
    let n = match evidence {
        ClassEvidence::Labels(l) => l.len(),
        ClassEvidence::Probabilities(p) => {
            if p.ncols() != NUM_CLASSES {
                return Err(Error::DimensionMismatch {
                    expected: NUM_CLASSES,
                    actual: p.ncols(),
                });
            }
            p.nrows()
        }
    };
    if n != assignments.len() {
        return Err(Error::DimensionMismatch {
            expected: assignments.len(),
            actual: n,
        });
    }
    let mut mass = vec![[0.0; NUM_CLASSES]; codebook_size];
    let mut assigned = vec![0usize; codebook_size];
    for (i, &q) in assignments.iter().enumerate() {
        if q >= codebook_size {
            return Err(Error::Invalid(format!("assignment {q} outside codebook of size {codebook_size}")));
        }
        assigned[q] += 1;
        match evidence {
            ClassEvidence::Labels(l) => mass[q][l[i].index()] += 1.0,
            ClassEvidence::Probabilities(p) => {
                for c in 0..NUM_CLASSES {
                    mass[q][c] += p[[i, c]];
                }
            }
        }
    }
    let entropies: Vec<Option<f64>> = mass
        .iter()
        .zip(&assigned)
        .map(|(m, &count)| {
            (count > 0).then(|| {
                let total: f64 = m.iter().sum();
                let p: Vec<f64> = m.iter().map(|v| v / total).collect();
                shannon_entropy(&p).max(0.0)
            })
        })
        .collect();
    let used: Vec<f64> = entropies.iter().flatten().copied().collect();
    let h_avg = (!used.is_empty()).then(|| used.iter().sum::<f64>() / used.len() as f64);
    Ok(PurityReport {
        mode: match evidence {
            ClassEvidence::Labels(_) => EntropyMode::Empirical,
            ClassEvidence::Probabilities(_) => EntropyMode::Predicted,
        },
        entropies,
        assigned,
        h_avg,
    })
}

/// Row-normalized confusion matrix; rows are true classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; NUM_CLASSES]; NUM_CLASSES],
    /// `None` when the class never occurs in the ground truth.
    pub rows: [Option<[f64; NUM_CLASSES]>; NUM_CLASSES],
}

impl ConfusionMatrix {
    /// Per-class recall.
    pub fn diagonal(&self) -> [Option<f64>; NUM_CLASSES] {
        std::array::from_fn(|c| self.rows[c].map(|r| r[c]))
    }

    pub fn accuracy(&self) -> Option<f64> {
        let total: usize = self.counts.iter().flatten().sum();
        let hits: usize = (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum();
        (total > 0).then(|| hits as f64 / total as f64)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        let mut header = vec!["true".to_string()];
        header.extend(BehaviorClass::ALL.iter().map(|c| c.short_name().to_string()));
        header.push("count".into());
        w.write_record(&header).map_err(|e| csv_err(path, e))?;
        for c in BehaviorClass::ALL {
            let mut rec = vec![c.short_name().to_string()];
            match self.rows[c.index()] {
                Some(r) => rec.extend(r.iter().map(|v| format!("{v:?}"))),
                None => rec.extend(std::iter::repeat_n(String::new(), NUM_CLASSES)),
            }
            rec.push(self.counts[c.index()].iter().sum::<usize>().to_string());
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn confusion_matrix(truth: &[BehaviorClass], predicted: &[BehaviorClass]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: predicted.len(),
        });
    }
    let mut counts = [[0usize; NUM_CLASSES]; NUM_CLASSES];
    for (t, p) in truth.iter().zip(predicted) {
        counts[t.index()][p.index()] += 1;
    }
    let rows = std::array::from_fn(|r| {
        let n: usize = counts[r].iter().sum();
        (n > 0).then(|| std::array::from_fn(|c| counts[r][c] as f64 / n as f64))
    });
    Ok(ConfusionMatrix { counts, rows })
}

/// Everything a forward pass through the quantizer yields per scenario.
#[derive(Debug, Clone)]
pub struct Assignment {
    pub indices: Vec<usize>,
    pub probabilities: Array2<f64>,
    /// `‖x − decode(z_q)‖²` per scenario.
    pub squared_errors: Vec<f64>,
}

impl Assignment {
    pub fn predicted(&self) -> Vec<BehaviorClass> {
        self.probabilities
            .rows()
            .into_iter()
            .map(|r| {
                let mut best = 0;
                for c in 1..NUM_CLASSES {
                    if r[c] > r[best] {
                        best = c;
                    }
                }
                BehaviorClass::from_index(best).expect("class index")
            })
            .collect()
    }
}

/// Encodes, quantizes, classifies and reconstructs every row of `data`.
pub fn assign(
    params: &ModelParams,
    codebook: &Codebook,
    data: &Array2<f64>,
    classifier_input: ClassifierInput,
) -> Result<Assignment> {
    let mut indices = Vec::with_capacity(data.nrows());
    let mut probabilities = Array2::zeros((0, params.dims.classes));
    let mut squared_errors = Vec::with_capacity(data.nrows());
    for chunk in data.axis_chunks_iter(Axis(0), CHUNK) {
        let z = params.encode_batch(chunk)?;
        let q = codebook.quantize(z.view())?;
        let recon = params.decode_batch(q.vectors.view())?;
        let probs = match classifier_input {
            ClassifierInput::Latent => params.classify_batch(z.view())?,
            ClassifierInput::Quantized => params.classify_batch(q.vectors.view())?,
        };
        for (x, r) in chunk.rows().into_iter().zip(recon.rows()) {
            squared_errors.push(x.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum());
        }
        probabilities
            .append(Axis(0), probs.view())
            .expect("matching class count");
        indices.extend(q.indices);
    }
    Ok(Assignment {
        indices,
        probabilities,
        squared_errors,
    })
}

/// Mean over the dataset of `‖x − x̂‖²`, reconstructing from the quantized latent.
pub fn reconstruction_loss(data: &Array2<f64>, params: &ModelParams, codebook: &Codebook) -> Result<f64> {
    if data.nrows() == 0 {
        return Err(Error::Invalid("cannot evaluate an empty dataset".into()));
    }
    let a = assign(params, codebook, data, ClassifierInput::Latent)?;
    Ok(a.squared_errors.iter().sum::<f64>() / a.squared_errors.len() as f64)
}

/// Metrics of one dataset split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub scenarios: usize,
    pub usage: UsageStats,
    pub purity: PurityReport,
    pub confusion: ConfusionMatrix,
    pub reconstruction: f64,
}

pub fn evaluate_split(
    dataset: &Dataset,
    params: &ModelParams,
    codebook: &Codebook,
    classifier_input: ClassifierInput,
    mode: EntropyMode,
) -> Result<(SplitMetrics, Vec<usize>)> {
    if dataset.is_empty() {
        return Err(Error::Invalid("cannot evaluate an empty dataset".into()));
    }
    let data = design_matrix(dataset);
    let a = assign(params, codebook, &data, classifier_input)?;
    let labels = dataset.labels();
    let evidence = match mode {
        EntropyMode::Empirical => ClassEvidence::Labels(&labels),
        EntropyMode::Predicted => ClassEvidence::Probabilities(a.probabilities.view()),
    };
    let metrics = SplitMetrics {
        scenarios: dataset.len(),
        usage: usage_stats(&a.indices, &labels, codebook.len())?,
        purity: entropy_per_entry(&a.indices, evidence, codebook.len())?,
        confusion: confusion_matrix(&labels, &a.predicted())?,
        reconstruction: a.squared_errors.iter().sum::<f64>() / a.squared_errors.len() as f64,
    };
    Ok((metrics, a.indices))
}

/// Scalar metrics for the JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub codebook_size: usize,
    pub used_train: usize,
    pub used_test: Option<usize>,
    pub h_avg_train: Option<f64>,
    pub h_avg_test: Option<f64>,
    pub reconstruction_train: f64,
    pub reconstruction_test: Option<f64>,
    pub accuracy_train: Option<f64>,
    pub accuracy_test: Option<f64>,
    pub recall_test: Option<[Option<f64>; NUM_CLASSES]>,
    pub entropy_mode: EntropyMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub train: SplitMetrics,
    pub test: Option<SplitMetrics>,
    /// Occurrence probabilities over train and test together.
    pub distribution: CategoryDistribution,
}

impl Evaluation {
    pub fn summary(&self) -> MetricsSummary {
        MetricsSummary {
            codebook_size: self.train.usage.codebook_size,
            used_train: self.train.usage.used,
            used_test: self.test.as_ref().map(|t| t.usage.used),
            h_avg_train: self.train.purity.h_avg,
            h_avg_test: self.test.as_ref().and_then(|t| t.purity.h_avg),
            reconstruction_train: self.train.reconstruction,
            reconstruction_test: self.test.as_ref().map(|t| t.reconstruction),
            accuracy_train: self.train.confusion.accuracy(),
            accuracy_test: self.test.as_ref().and_then(|t| t.confusion.accuracy()),
            recall_test: self.test.as_ref().map(|t| t.confusion.diagonal()),
            entropy_mode: self.train.purity.mode,
        }
    }
}

pub fn evaluate(
    params: &ModelParams,
    codebook: &Codebook,
    train: &Dataset,
    test: Option<&Dataset>,
    classifier_input: ClassifierInput,
    mode: EntropyMode,
) -> Result<Evaluation> {
    let (train_metrics, mut all) = evaluate_split(train, params, codebook, classifier_input, mode)?;
    let test_metrics = match test {
        Some(t) => {
            let (m, idx) = evaluate_split(t, params, codebook, classifier_input, mode)?;
            all.extend(idx);
            Some(m)
        }
        None => None,
    };
    Ok(Evaluation {
        train: train_metrics,
        test: test_metrics,
        distribution: occurrence_probabilities(&all, codebook.len())?,
    })
}

/// Writes `entry,total,lcl,kl,lcr`, one row per codebook entry.
pub fn write_usage_csv(path: &Path, usage: &UsageStats) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["entry".to_string(), "total".into()];
    header.extend(BehaviorClass::ALL.iter().map(|c| c.short_name().to_string()));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (q, (n, by_class)) in usage.counts.iter().zip(&usage.class_counts).enumerate() {
        let mut rec = vec![q.to_string(), n.to_string()];
        rec.extend(by_class.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One decoded grid value in physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeRow {
    pub entry: usize,
    pub slot: usize,
    pub t: usize,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepresentativesManifest {
    pub exported: Vec<usize>,
    pub omitted: Vec<usize>,
    pub rows: usize,
}

/// Decoded representative of each used entry, mapped back through
/// `normalization`.
pub fn representatives(
    codebook: &Codebook,
    params: &ModelParams,
    used: &[bool],
    normalization: &Normalization,
) -> Result<(Vec<RepresentativeRow>, RepresentativesManifest)> {
    if used.len() != codebook.len() {
        return Err(Error::DimensionMismatch {
            expected: codebook.len(),
            actual: used.len(),
        });
    }
    let exported: Vec<usize> = (0..codebook.len()).filter(|&q| used[q]).collect();
    let omitted: Vec<usize> = (0..codebook.len()).filter(|&q| !used[q]).collect();
    let mut rows = Vec::with_capacity(exported.len() * N_MAX * T_OBS);
    if !exported.is_empty() {
        let z = codebook.entries().select(Axis(0), &exported);
        let decoded = params.decode_batch(z.view())?;
        if decoded.ncols() != N_MAX * FEATURES * T_OBS {
            return Err(Error::DimensionMismatch {
                expected: N_MAX * FEATURES * T_OBS,
                actual: decoded.ncols(),
            });
        }
        for (&entry, grid) in exported.iter().zip(decoded.rows()) {
            for slot in 0..N_MAX {
                for t in 0..T_OBS {
                    let v = |f: usize| normalization.invert_value(f, grid[crate::data::grid_index(slot, f, t)]);
                    rows.push(RepresentativeRow {
                        entry,
                        slot,
                        t,
                        x: v(0),
                        y: v(1),
                        vx: v(2),
                        vy: v(3),
                    });
                }
            }
        }
    }
    let manifest = RepresentativesManifest {
        rows: rows.len(),
        exported,
        omitted,
    };
    Ok((rows, manifest))
}

/// Writes the representatives CSV and returns the manifest.
pub fn export_representatives(
    path: &Path,
    codebook: &Codebook,
    params: &ModelParams,
    used: &[bool],
    normalization: &Normalization,
) -> Result<RepresentativesManifest> {
    let (rows, manifest) = representatives(codebook, params, used, normalization)?;
    let mut w = csv_writer(path)?;
    for r in &rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    if rows.is_empty() {
        w.write_record(["entry", "slot", "t", "x", "y", "vx", "vy"])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(manifest)
}

pub fn read_representatives(path: &Path) -> Result<Vec<RepresentativeRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Invalid(e.to_string()))?;
    text.push('\n');
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        path: path.into(),
        line,
        message: e.to_string(),
    }
}
