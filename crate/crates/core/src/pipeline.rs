//! End-to-end orchestration: data → training → evaluation → completeness →
//! summary. Every step reads and writes plain files below one output
//! directory so the command-line tool can run the steps separately.
//!
//! Output layout:
//!
//! ```text
//! dataset.bin  train.bin  test.bin
//! q{Q}/checkpoint.bin  train_report.json  train_log.csv  codebook.csv
//! q{Q}/metrics.json  usage_{split}.csv  purity_{split}.csv  confusion_{split}.csv
//! q{Q}/distribution.{csv,json}  representatives.csv  representatives_manifest.json
//! q{Q}/completeness/report.json  summary.csv  samples_p{p_new}.csv
//! summary.json  models.csv  completeness.csv  manifest.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::Checkpoint;
use crate::codebook::write_codebook_csv;
use crate::completeness::{completeness_report, CompletenessConfig, CompletenessReport};
use crate::data::highd::ingest_tracks;
use crate::data::io::{read_dataset, write_dataset};
use crate::data::synth::{into_dataset, synth_clustered, synth_generate, ClusteredSynthConfig, SynthConfig};
use crate::data::{balance_dataset, split, Dataset, Normalization, SplitTag};
use crate::error::{Error, Result};
use crate::metrics::{
    evaluate, export_representatives, write_json, write_usage_csv, CategoryDistribution, EntropyMode, Evaluation,
    MetricsSummary, SplitMetrics,
};
use crate::train::{train_with_observer, TrainConfig, TrainReport};

pub const DATASET_FILE: &str = "dataset.bin";
pub const TRAIN_FILE: &str = "train.bin";
pub const TEST_FILE: &str = "test.bin";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const METRICS_FILE: &str = "metrics.json";
pub const DISTRIBUTION_FILE: &str = "distribution.json";
pub const COMPLETENESS_DIR: &str = "completeness";
pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    #[default]
    Synth,
    Clustered,
    Ingest,
}

/// One highD recording: a tracks file and its meta file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recording {
    pub tracks: PathBuf,
    pub meta: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub seed: u64,
    pub balance: bool,
    pub train_fraction: f64,
    pub synth: SynthConfig,
    pub clustered: ClusteredSynthConfig,
    pub recordings: Vec<Recording>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synth,
            seed: 0,
            balance: true,
            train_fraction: 0.7,
            synth: SynthConfig::default(),
            clustered: ClusteredSynthConfig::default(),
            recordings: Vec::new(),
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        match self.source {
            DataSource::Synth => self.synth.validate(),
            DataSource::Clustered => self.clustered.validate(),
            DataSource::Ingest => {
                if self.recordings.is_empty() {
                    return Err(Error::Config("ingest source needs at least one recording".into()));
                }
                for r in &self.recordings {
                    for p in [&r.tracks, &r.meta] {
                        if !p.is_file() {
                            return Err(Error::Config(format!("input file not found: {}", p.display())));
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub entropy_mode: EntropyMode,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            entropy_mode: EntropyMode::Empirical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub out_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub train: TrainConfig,
    /// One model is trained per codebook size.
    pub codebook_sizes: Vec<usize>,
    pub evaluate: EvaluateConfig,
    pub completeness: CompletenessConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            out_dir: None,
            data: DataConfig::default(),
            train: TrainConfig::default(),
            codebook_sizes: vec![64, 128, 256],
            evaluate: EvaluateConfig::default(),
            completeness: CompletenessConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Uses `seed` for data preparation, training and simulation alike.
    pub fn set_seed(&mut self, seed: u64) {
        self.data.seed = seed;
        self.train.seed = seed;
        self.completeness.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        validate_codebook_sizes(&self.codebook_sizes, &self.train)?;
        self.completeness.validate()
    }
}

/// Every requested size must be positive and give a valid training config.
pub fn validate_codebook_sizes(sizes: &[usize], train: &TrainConfig) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::Config("at least one codebook size is required".into()));
    }
    for &q in sizes {
        if q == 0 {
            return Err(Error::Config("codebook size q must be positive, got 0".into()));
        }
        TrainConfig {
            codebook_size: q,
            ..train.clone()
        }
        .validate()?;
    }
    Ok(())
}

/// Produces the unsplit dataset from the configured source.
pub fn load_source(config: &DataConfig) -> Result<Dataset> {
    config.validate()?;
    match config.source {
        DataSource::Synth => synth_generate(&config.synth, config.seed),
        DataSource::Clustered => Ok(into_dataset(synth_clustered(&config.clustered, config.seed)?)),
        DataSource::Ingest => ingest_recordings(&config.recordings),
    }
}

pub fn ingest_recordings(recordings: &[Recording]) -> Result<Dataset> {
    let mut scenarios = Vec::new();
    for r in recordings {
        let ingested = ingest_tracks(&r.tracks, &r.meta)?;
        log::info!("{}: {:?}", r.tracks.display(), ingested.stats);
        scenarios.extend(ingested.dataset.scenarios);
    }
    Ok(Dataset::new(scenarios, SplitTag::All))
}

/// Balances (optionally), splits and fits normalization on the train part.
/// Both returned datasets carry the fitted statistics and physical values.
pub fn prepare(dataset: &Dataset, config: &DataConfig) -> Result<(Dataset, Dataset)> {
    let balanced = if config.balance {
        balance_dataset(dataset, config.seed)?
    } else {
        dataset.clone()
    };
    let (mut train, mut test) = split(&balanced, config.train_fraction, config.seed)?;
    let norm = Normalization::fit(&train)?;
    train.normalization = Some(norm);
    test.normalization = Some(norm);
    log::info!(
        "prepared {} train / {} test scenarios, class counts {:?} / {:?}",
        train.len(),
        test.len(),
        train.class_counts(),
        test.class_counts()
    );
    Ok((train, test))
}

pub fn model_dir(out: &Path, q: usize) -> PathBuf {
    out.join(format!("q{q}"))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn normalization_of(dataset: &Dataset) -> Result<Normalization> {
    dataset
        .normalization
        .ok_or_else(|| Error::Invalid("dataset carries no normalization statistics; prepare it first".into()))
}

/// Trains one model per codebook size and writes its checkpoint, report,
/// epoch log and codebook table. Returns the model directories.
pub fn train_models(train: &Dataset, config: &TrainConfig, sizes: &[usize], out: &Path) -> Result<Vec<PathBuf>> {
    validate_codebook_sizes(sizes, config)?;
    let norm = normalization_of(train)?;
    let normalized = train.normalized(&norm);
    let mut dirs = Vec::with_capacity(sizes.len());
    for &q in sizes {
        let cfg = TrainConfig {
            codebook_size: q,
            ..config.clone()
        };
        let dir = model_dir(out, q);
        create_dir(&dir)?;
        log::info!("training Q = {q} for up to {} epochs on {} scenarios", cfg.epochs, train.len());
        let outcome = train_with_observer(&normalized, &cfg, |e| {
            log::debug!(
                "Q={q} epoch {}: rec {:.5} vq {:.5} commit {:.5} cl {:.5} total {:.5} active {}",
                e.epoch,
                e.reconstruction,
                e.vq,
                e.commitment,
                e.classification,
                e.total,
                e.active_entries
            );
        })?;
        log::info!(
            "Q = {q}: {} of {} entries used after {} epochs ({:.1} s)",
            outcome.report.final_usage,
            q,
            outcome.report.epochs.len(),
            outcome.report.wall_clock_secs
        );
        let ckpt = Checkpoint {
            config: cfg,
            normalization: norm,
            params: outcome.params,
            codebook: outcome.codebook,
        };
        ckpt.write(&dir.join(CHECKPOINT_FILE))?;
        write_json(&dir.join("train_report.json"), &outcome.report)?;
        outcome.report.write_csv(&dir.join("train_log.csv"))?;
        let assigned = crate::train::assign_all(
            &ckpt.params,
            &ckpt.codebook,
            &crate::train::design_matrix(&normalized),
        )?;
        let mut counts = vec![0usize; q];
        for a in assigned {
            counts[a] += 1;
        }
        write_codebook_csv(&dir.join("codebook.csv"), &ckpt.codebook, &counts)?;
        dirs.push(dir);
    }
    Ok(dirs)
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub codebook_size: usize,
    pub scenarios: usize,
    pub summary: MetricsSummary,
    pub evaluation: Evaluation,
}

fn write_split(dir: &Path, name: &str, m: &SplitMetrics) -> Result<()> {
    write_usage_csv(&dir.join(format!("usage_{name}.csv")), &m.usage)?;
    m.purity.write_csv(&dir.join(format!("purity_{name}.csv")))?;
    m.confusion.write_csv(&dir.join(format!("confusion_{name}.csv")))
}

/// Evaluates a checkpoint on physical-unit datasets and writes the metrics
/// bundle next to it (or into `out`).
pub fn evaluate_checkpoint(
    checkpoint: &Checkpoint,
    train: &Dataset,
    test: Option<&Dataset>,
    mode: EntropyMode,
    out: &Path,
) -> Result<MetricsFile> {
    create_dir(out)?;
    let norm = checkpoint.normalization;
    let train_n = train.normalized(&norm);
    let test_n = test.map(|t| t.normalized(&norm));
    let evaluation = evaluate(
        &checkpoint.params,
        &checkpoint.codebook,
        &train_n,
        test_n.as_ref(),
        checkpoint.config.classifier_input,
        mode,
    )?;
    write_split(out, "train", &evaluation.train)?;
    if let Some(t) = &evaluation.test {
        write_split(out, "test", t)?;
    }
    evaluation.distribution.write_csv(&out.join("distribution.csv"))?;
    evaluation.distribution.write_json(&out.join(DISTRIBUTION_FILE))?;
    let used: Vec<bool> = evaluation.train.usage.counts.iter().map(|&c| c > 0).collect();
    let manifest = export_representatives(
        &out.join("representatives.csv"),
        &checkpoint.codebook,
        &checkpoint.params,
        &used,
        &norm,
    )?;
    write_json(&out.join("representatives_manifest.json"), &manifest)?;
    let file = MetricsFile {
        codebook_size: checkpoint.codebook.len(),
        scenarios: train.len() + test.map_or(0, Dataset::len),
        summary: evaluation.summary(),
        evaluation,
    };
    write_json(&out.join(METRICS_FILE), &file)?;
    log::info!(
        "Q = {}: usage {}/{}, H_avg train {:?}, L_R train {:.5}",
        file.codebook_size,
        file.summary.used_train,
        file.codebook_size,
        file.summary.h_avg_train,
        file.summary.reconstruction_train
    );
    Ok(file)
}

fn p_new_label(p: f64) -> String {
    format!("{p:e}")
}

/// Runs the completeness analysis and writes `report.json`, `summary.csv`
/// and one `samples_p{p_new}.csv` per injected probability into `out`.
pub fn run_completeness(
    distribution: &CategoryDistribution,
    config: &CompletenessConfig,
    out: &Path,
) -> Result<CompletenessReport> {
    config.validate()?;
    create_dir(out)?;
    let report = completeness_report(distribution, config)?;
    write_json(&out.join(REPORT_FILE), &report)?;
    report.write_summary_csv(&out.join("summary.csv"))?;
    for run in &report.runs {
        run.write_samples_csv(&out.join(format!("samples_p{}.csv", p_new_label(run.p_new))))?;
        for t in &run.results {
            log::info!(
                "p_new = {}, tau = {}: S_min = {} from {} simulations{}",
                run.p_new,
                t.tau,
                t.s_min,
                run.executed_sims,
                if run.cap_applied { " (capped)" } else { "" }
            );
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletenessRow {
    pub p_new: f64,
    pub tau: f64,
    pub s_min: u64,
    pub executed_sims: u64,
    pub cap_applied: bool,
    /// Dataset size is at least `S_min`.
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub codebook_size: usize,
    pub scenarios: usize,
    pub metrics: MetricsSummary,
    pub completeness: Vec<CompletenessRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub models: Vec<ModelSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else if p != root.join(MANIFEST_FILE) {
            out.push(p);
        }
    }
    Ok(())
}

/// Checksums of every file below `out` except the manifest itself.
pub fn manifest(out: &Path) -> Result<Vec<ManifestEntry>> {
    let mut files = Vec::new();
    collect_files(out, out, &mut files)?;
    files
        .into_iter()
        .map(|p| {
            let rel = p.strip_prefix(out).expect("below root");
            let path = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            let bytes = fs::metadata(&p).map_err(|e| Error::io(&p, e))?.len();
            Ok(ManifestEntry {
                path,
                bytes,
                sha256: sha256_file(&p)?,
            })
        })
        .collect()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.into(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

/// Collects every `q*/metrics.json` and matching completeness report below
/// `out` into `summary.json`, `models.csv` and `completeness.csv`, then
/// writes `manifest.json`.
pub fn report(out: &Path) -> Result<Summary> {
    let mut dirs: Vec<(usize, PathBuf)> = fs::read_dir(out)
        .map_err(|e| Error::io(out, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(METRICS_FILE).is_file())
        .filter_map(|p| {
            let q = p.file_name()?.to_str()?.strip_prefix('q')?.parse().ok()?;
            Some((q, p))
        })
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Invalid(format!("no evaluated models found in {}", out.display())));
    }
    let mut models = Vec::new();
    for (_, dir) in dirs {
        let m: MetricsFile = read_json(&dir.join(METRICS_FILE))?;
        let report_path = dir.join(COMPLETENESS_DIR).join(REPORT_FILE);
        let completeness = if report_path.is_file() {
            let r: CompletenessReport = read_json(&report_path)?;
            r.runs
                .iter()
                .flat_map(|run| {
                    run.results.iter().map(|t| CompletenessRow {
                        p_new: run.p_new,
                        tau: t.tau,
                        s_min: t.s_min,
                        executed_sims: run.executed_sims,
                        cap_applied: run.cap_applied,
                        complete: m.scenarios as u64 >= t.s_min,
                    })
                })
                .collect()
        } else {
            Vec::new()
        };
        models.push(ModelSummary {
            codebook_size: m.codebook_size,
            scenarios: m.scenarios,
            metrics: m.summary,
            completeness,
        });
    }
    let summary = Summary { models };
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    write_tables(out, &summary)?;
    write_json(&out.join(MANIFEST_FILE), &manifest(out)?)?;
    Ok(summary)
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

fn write_tables(out: &Path, summary: &Summary) -> Result<()> {
    let mut models = String::from("codebook_size,used_train,used_test,h_avg_train,h_avg_test,reconstruction_train,reconstruction_test,accuracy_test\n");
    let mut comp = String::from("codebook_size,scenarios,p_new,tau,s_min,executed_sims,cap_applied,complete\n");
    for m in &summary.models {
        let s = &m.metrics;
        models.push_str(&format!(
            "{},{},{},{},{},{:?},{},{}\n",
            m.codebook_size,
            s.used_train,
            s.used_test.map(|u| u.to_string()).unwrap_or_default(),
            opt(s.h_avg_train),
            opt(s.h_avg_test),
            s.reconstruction_train,
            opt(s.reconstruction_test),
            opt(s.accuracy_test)
        ));
        for c in &m.completeness {
            comp.push_str(&format!(
                "{},{},{:?},{:?},{},{},{},{}\n",
                m.codebook_size, m.scenarios, c.p_new, c.tau, c.s_min, c.executed_sims, c.cap_applied, c.complete
            ));
        }
    }
    let p = out.join("models.csv");
    fs::write(&p, models).map_err(|e| Error::io(&p, e))?;
    let p = out.join("completeness.csv");
    fs::write(&p, comp).map_err(|e| Error::io(&p, e))
}

/// Outcome of [`run_all`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Summary,
    pub train_reports: Vec<TrainReport>,
}

/// Runs every step in order into `out`.
pub fn run_all(config: &PipelineConfig, out: &Path) -> Result<RunOutcome> {
    config.validate()?;
    create_dir(out)?;
    let dataset = load_source(&config.data)?;
    write_dataset(&out.join(DATASET_FILE), &dataset)?;
    let (train, test) = prepare(&dataset, &config.data)?;
    write_dataset(&out.join(TRAIN_FILE), &train)?;
    write_dataset(&out.join(TEST_FILE), &test)?;

    let dirs = train_models(&train, &config.train, &config.codebook_sizes, out)?;
    let mut train_reports = Vec::with_capacity(dirs.len());
    for dir in &dirs {
        let ckpt = Checkpoint::read(&dir.join(CHECKPOINT_FILE))?;
        train_reports.push(read_json(&dir.join("train_report.json"))?);
        let m = evaluate_checkpoint(&ckpt, &train, Some(&test), config.evaluate.entropy_mode, dir)?;
        run_completeness(&m.evaluation.distribution, &config.completeness, &dir.join(COMPLETENESS_DIR))?;
    }
    let summary = report(out)?;
    Ok(RunOutcome { summary, train_reports })
}

/// Reads a dataset file and checks its split tag when `expect` is given.
pub fn read_split(path: &Path, expect: Option<SplitTag>) -> Result<Dataset> {
    let d = read_dataset(path)?;
    if let Some(tag) = expect {
        if d.split != tag {
            return Err(Error::Invalid(format!(
                "{} holds the {} split, expected {tag}",
                path.display(),
                d.split
            )));
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> PipelineConfig {
        let mut c = PipelineConfig {
            codebook_sizes: vec![4],
            ..Default::default()
        };
        c.data.synth.per_class = [6, 6, 6];
        c.train = TrainConfig {
            epochs: 2,
            batch_size: 4,
            hidden: vec![8],
            latent_dim: 3,
            ..Default::default()
        };
        c.completeness = CompletenessConfig {
            p_new: vec![0.01],
            pilot: 20,
            max_sims: 50,
            ..Default::default()
        };
        c
    }

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let c = tiny_config();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), c);
        assert!(PipelineConfig::from_toml("bogus = 1").is_err());
        let partial = PipelineConfig::from_toml("codebook_sizes = [8]\n[data]\nsource = \"clustered\"\n").unwrap();
        assert_eq!(partial.codebook_sizes, vec![8]);
        assert_eq!(partial.data.source, DataSource::Clustered);
        assert_eq!(partial.train, TrainConfig::default());
    }

    #[test]
    fn zero_codebook_size_is_rejected() {
        let mut c = tiny_config();
        c.codebook_sizes = vec![4, 0];
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.codebook_sizes.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn missing_recording_is_a_config_error() {
        let mut c = tiny_config();
        c.data.source = DataSource::Ingest;
        c.data.recordings = vec![Recording {
            tracks: "/nonexistent/01_tracks.csv".into(),
            meta: "/nonexistent/01_tracksMeta.csv".into(),
        }];
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("/nonexistent/01_tracks.csv"), "{err}");
    }

    #[test]
    fn tiny_run_writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path();
        let outcome = run_all(&tiny_config(), out).unwrap();
        for f in [DATASET_FILE, TRAIN_FILE, TEST_FILE, SUMMARY_FILE, MANIFEST_FILE, "models.csv", "completeness.csv"] {
            assert!(out.join(f).is_file(), "{f}");
        }
        let q = model_dir(out, 4);
        for f in [
            CHECKPOINT_FILE,
            METRICS_FILE,
            "train_report.json",
            "train_log.csv",
            "codebook.csv",
            "usage_train.csv",
            "usage_test.csv",
            "purity_train.csv",
            "confusion_test.csv",
            "distribution.csv",
            DISTRIBUTION_FILE,
            "representatives.csv",
            "representatives_manifest.json",
        ] {
            assert!(q.join(f).is_file(), "{f}");
        }
        assert!(q.join(COMPLETENESS_DIR).join(REPORT_FILE).is_file());
        assert!(q.join(COMPLETENESS_DIR).join("samples_p1e-2.csv").is_file());

        let usage = fs::read_to_string(q.join("usage_train.csv")).unwrap();
        assert_eq!(usage.lines().count(), 1 + 4);
        let m = &outcome.summary.models[0];
        assert_eq!(m.scenarios, 18);
        let row = &m.completeness[0];
        assert_eq!(row.complete, 18 >= row.s_min);

        let entries = manifest(out).unwrap();
        assert!(entries.iter().any(|e| e.path == "q4/checkpoint.bin"));
        assert!(!entries.iter().any(|e| e.path == MANIFEST_FILE));
    }
}
