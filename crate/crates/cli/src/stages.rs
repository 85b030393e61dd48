//! One function per subcommand. Every stage reads the outputs of earlier
//! stages from the output directory and writes into its own subdirectory.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use log::info;
use serde::{Deserialize, Serialize};

use dyntopic::corpus::{load_corpus, CorpusFormat, DocTermMatrix, TimeWindowSpec, TokenizedDocument};
use dyntopic::pipeline::{fit_second_layer, fit_windows, prepare, stack_windows};
use dyntopic::synth::{generate, PlantedSpec};
use dyntopic::validation::{parse_taxonomy, subjects_at_depth, write_recall_csv};
use dyntopic::{
    cluster_topics, collect_speeches, match_taxonomy, recall_curve, topic_time_series, train_skipgram,
    DynamicModel, EmbeddingSpace, WindowTopicModel,
};

use crate::config::{EmbeddingSource, NormalizerChoice, PipelineConfig};
use crate::manifest::{sha256_file, write_timings, Manifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Preprocess,
    Embed,
    WindowTopics,
    DynamicTopics,
    Timeseries,
    Validate,
    Synth,
}

impl Stage {
    /// The modeling stages in the order `pipeline` runs them.
    pub const PIPELINE: [Stage; 6] = [
        Stage::Preprocess,
        Stage::Embed,
        Stage::WindowTopics,
        Stage::DynamicTopics,
        Stage::Timeseries,
        Stage::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Preprocess => "preprocess",
            Stage::Embed => "embed",
            Stage::WindowTopics => "window-topics",
            Stage::DynamicTopics => "dynamic-topics",
            Stage::Timeseries => "timeseries",
            Stage::Validate => "validate",
            Stage::Synth => "synth",
        }
    }

    fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Preprocess | Stage::Synth => &[],
            Stage::Embed => &[Stage::Preprocess],
            Stage::WindowTopics => &[Stage::Preprocess, Stage::Embed],
            Stage::DynamicTopics => &[Stage::WindowTopics, Stage::Embed],
            Stage::Timeseries => &[Stage::Preprocess, Stage::WindowTopics, Stage::DynamicTopics],
            Stage::Validate => &[Stage::Preprocess, Stage::DynamicTopics],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub struct Runner {
    pub config: PipelineConfig,
    /// Recompute even when the stage manifest says the outputs are current.
    pub force: bool,
    /// Planted spec for `synth`; the standard spec when absent.
    pub synth_spec: Option<PathBuf>,
    hash: String,
}

#[derive(Serialize, Deserialize)]
struct WindowRecord {
    id: usize,
    label: String,
    start: NaiveDate,
    end: NaiveDate,
    speeches: usize,
    empty: bool,
    /// A TF-IDF matrix was written for this window.
    modeled: bool,
    rows: usize,
    terms: usize,
    dropped: usize,
}

#[derive(Serialize, Deserialize)]
struct FittedWindow {
    window_id: usize,
    label: String,
    k_selected: usize,
    speeches: usize,
}

#[derive(Serialize)]
struct DynamicSpeeches {
    topic: usize,
    speeches: Vec<String>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn window_stem(id: usize) -> String {
    format!("window_{id:03}")
}

impl Runner {
    pub fn new(config: PipelineConfig) -> Self {
        let hash = config.hash();
        Runner {
            config,
            force: false,
            synth_spec: None,
            hash,
        }
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.config.output.join(stage.name())
    }

    fn external_inputs(&self, stage: Stage) -> Vec<PathBuf> {
        let c = &self.config;
        match stage {
            Stage::Preprocess => {
                let mut files: Vec<PathBuf> = [&c.corpus, &c.stopwords, &c.extra_stopwords, &c.blocked_names]
                    .into_iter()
                    .flatten()
                    .cloned()
                    .collect();
                if let NormalizerChoice::Lemma(p) = &c.normalizer {
                    files.push(p.clone());
                }
                files
            }
            Stage::Embed => match &c.embedding {
                EmbeddingSource::Load(p) => vec![p.clone()],
                EmbeddingSource::Train => vec![],
            },
            Stage::Validate => c.taxonomy.iter().cloned().collect(),
            Stage::Synth => self.synth_spec.iter().cloned().collect(),
            _ => vec![],
        }
    }

    /// Digests of everything `stage` reads. Fails with a pointer to the
    /// subcommand to run when an upstream stage has no output yet.
    fn inputs(&self, stage: Stage) -> Result<BTreeMap<String, String>> {
        let mut inputs = BTreeMap::new();
        for &up in stage.upstream() {
            let manifest = self.stage_dir(up).join(crate::manifest::MANIFEST);
            if !manifest.is_file() {
                bail!(
                    "`{stage}` needs the output of `{up}`, but {} does not exist; run `dyntopic {up}` first",
                    manifest.display()
                );
            }
            inputs.insert(format!("{up}/{}", crate::manifest::MANIFEST), sha256_file(&manifest)?.0);
        }
        for path in self.external_inputs(stage) {
            let (sha, _) = sha256_file(&path).with_context(|| format!("`{stage}` input {}", path.display()))?;
            inputs.insert(path.display().to_string(), sha);
        }
        Ok(inputs)
    }

    pub fn run(&self, stage: Stage) -> Result<()> {
        let dir = self.stage_dir(stage);
        let inputs = self.inputs(stage)?;
        if !self.force {
            if let Ok(m) = Manifest::read(&dir) {
                if m.config_hash == self.hash && m.inputs == inputs && m.artifacts_intact(&dir) {
                    info!("{stage}: outputs are up to date, skipping");
                    return Ok(());
                }
            }
        }
        if dir.exists() {
            std::fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
        }
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let started = SystemTime::now();
        let clock = Instant::now();
        info!("{stage}: running");
        match stage {
            Stage::Preprocess => self.preprocess(&dir),
            Stage::Embed => self.embed(&dir),
            Stage::WindowTopics => self.window_topics(&dir),
            Stage::DynamicTopics => self.dynamic_topics(&dir),
            Stage::Timeseries => self.timeseries(&dir),
            Stage::Validate => self.validate(&dir),
            Stage::Synth => self.synth(&dir),
        }
        .with_context(|| format!("stage `{stage}` failed"))?;
        Manifest::collect(stage.name(), &self.hash, inputs, &dir)?.write(&dir)?;
        write_timings(&dir, stage.name(), started, clock.elapsed())?;
        info!("{stage}: done in {:.2?}", clock.elapsed());
        Ok(())
    }

    pub fn run_pipeline(&self) -> Result<()> {
        for stage in Stage::PIPELINE {
            self.run(stage)?;
        }
        Ok(())
    }

    fn window_spec(&self, corpus: &dyntopic::Corpus) -> Result<TimeWindowSpec> {
        let c = &self.config;
        let covering = TimeWindowSpec::covering(corpus, c.granularity)?;
        Ok(TimeWindowSpec::new(
            c.granularity,
            c.window_start.unwrap_or(covering.start),
            c.window_end.unwrap_or(covering.end),
        )?)
    }

    fn preprocess(&self, dir: &Path) -> Result<()> {
        let path = self
            .config
            .corpus
            .as_ref()
            .context("no corpus configured; set `corpus = <file>` in the config or pass --set corpus=<file>")?;
        let corpus = load_corpus(path, CorpusFormat::JsonLines)?;
        let spec = self.window_spec(&corpus)?;
        let prepared = prepare(&corpus, &spec, &self.config.preprocess()?)?;
        let mut records = Vec::new();
        for w in &prepared.windows {
            let p = &w.partition;
            if let Some(m) = &w.matrix {
                m.save(dir, &window_stem(p.window.id))?;
            }
            records.push(WindowRecord {
                id: p.window.id,
                label: p.window.label.clone(),
                start: p.window.start,
                end: p.window.end,
                speeches: p.speech_ids.len(),
                empty: p.empty,
                modeled: w.matrix.is_some(),
                rows: w.matrix.as_ref().map_or(0, DocTermMatrix::n_docs),
                terms: w.matrix.as_ref().map_or(0, DocTermMatrix::n_terms),
                dropped: w.matrix.as_ref().map_or(p.speech_ids.len(), |m| m.dropped.len()),
            });
        }
        write_json(&dir.join("windows.json"), &records)?;
        let mut out = BufWriter::new(std::fs::File::create(dir.join("documents.jsonl"))?);
        for doc in &prepared.documents {
            serde_json::to_writer(&mut out, doc)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        info!(
            "preprocess: {} speeches in {} windows, {} with matrices",
            corpus.len(),
            records.len(),
            records.iter().filter(|r| r.modeled).count()
        );
        Ok(())
    }

    fn embed(&self, dir: &Path) -> Result<()> {
        let space = match &self.config.embedding {
            EmbeddingSource::Train => {
                let path = self.stage_dir(Stage::Preprocess).join("documents.jsonl");
                let file = std::fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
                let docs = std::io::BufReader::new(file)
                    .lines()
                    .map(|line| Ok(serde_json::from_str::<TokenizedDocument>(&line?)?))
                    .collect::<Result<Vec<_>>>()?;
                train_skipgram(&docs, &self.config.skipgram())?
            }
            EmbeddingSource::Load(path) => EmbeddingSpace::load(path)?,
        };
        info!("embed: {} terms x {} dimensions", space.vocab_size(), space.dims());
        space.save(&dir.join("embedding.txt"))?;
        Ok(())
    }

    fn load_space(&self) -> Result<EmbeddingSpace> {
        Ok(EmbeddingSpace::load(&self.stage_dir(Stage::Embed).join("embedding.txt"))?)
    }

    fn load_window_models(&self) -> Result<(Vec<FittedWindow>, Vec<WindowTopicModel>)> {
        let dir = self.stage_dir(Stage::WindowTopics);
        let index: Vec<FittedWindow> = read_json(&dir.join("index.json"))?;
        let models = index
            .iter()
            .map(|w| WindowTopicModel::load(&dir, w.window_id))
            .collect::<dyntopic::Result<Vec<_>>>()?;
        Ok((index, models))
    }

    fn window_topics(&self, dir: &Path) -> Result<()> {
        let pre = self.stage_dir(Stage::Preprocess);
        let records: Vec<WindowRecord> = read_json(&pre.join("windows.json"))?;
        let matrices = records
            .iter()
            .filter(|r| r.modeled)
            .map(|r| DocTermMatrix::load(&pre, &window_stem(r.id)))
            .collect::<dyntopic::Result<Vec<_>>>()?;
        if matrices.is_empty() {
            bail!("no window has a usable document-term matrix");
        }
        let space = self.load_space()?;
        let refs: Vec<&DocTermMatrix> = matrices.iter().collect();
        let models = fit_windows(&refs, &self.config.models(), &space)?;
        let labels: BTreeMap<usize, &str> = records.iter().map(|r| (r.id, r.label.as_str())).collect();
        let mut index = Vec::new();
        for m in &models {
            m.save(dir)?;
            info!("window-topics: {} k = {}", labels[&m.window_id], m.k_selected);
            index.push(FittedWindow {
                window_id: m.window_id,
                label: labels[&m.window_id].to_string(),
                k_selected: m.k_selected,
                speeches: m.speech_ids.len(),
            });
        }
        write_json(&dir.join("index.json"), &index)
    }

    fn dynamic_topics(&self, dir: &Path) -> Result<()> {
        let (_, models) = self.load_window_models()?;
        if models.is_empty() {
            bail!("no window topic models to stack");
        }
        let settings = self.config.models();
        let b = stack_windows(&models, &settings)?;
        b.save(dir, "topic_documents")?;
        let space = self.load_space()?;
        let dynamic = fit_second_layer(&b, &settings, &space)?;
        info!(
            "dynamic-topics: {} window topics over {} terms, k' = {}",
            b.matrix.n_rows(),
            b.matrix.n_cols(),
            dynamic.k
        );
        dynamic.save(dir)?;
        Ok(())
    }

    fn timeseries(&self, dir: &Path) -> Result<()> {
        let records: Vec<WindowRecord> = read_json(&self.stage_dir(Stage::Preprocess).join("windows.json"))?;
        let labels: BTreeMap<usize, String> = records.into_iter().map(|r| (r.id, r.label)).collect();
        let (_, models) = self.load_window_models()?;
        let dynamic = DynamicModel::load(&self.stage_dir(Stage::DynamicTopics))?;
        let series = topic_time_series(&dynamic, &models);
        let mut csv = BufWriter::new(std::fs::File::create(dir.join("timeseries.csv"))?);
        series.write_csv(&mut csv, |id| labels.get(&id).cloned().unwrap_or_default())?;
        csv.flush()?;
        write_json(&dir.join("timeseries.json"), &series)?;
        let speeches: Vec<DynamicSpeeches> = (0..dynamic.k)
            .map(|d| DynamicSpeeches {
                topic: d,
                speeches: collect_speeches(&dynamic, d, &models).into_iter().collect(),
            })
            .collect();
        write_json(&dir.join("dynamic_speeches.json"), &speeches)
    }

    fn validate(&self, dir: &Path) -> Result<()> {
        let dynamic = DynamicModel::load(&self.stage_dir(Stage::DynamicTopics))?;
        if dynamic.k >= 2 {
            let dendrogram = cluster_topics(&dynamic.factors.h)?;
            write_json(&dir.join("dendrogram.json"), &dendrogram)?;
            let newick = dendrogram.to_newick(|d| format!("topic_{d}"));
            std::fs::write(dir.join("dendrogram.nwk"), newick + "\n")?;
        } else {
            log::warn!("validate: a single dynamic topic, no dendrogram to build");
        }
        if let Some(path) = &self.config.taxonomy {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let roots = parse_taxonomy(&text)?;
            let subjects = subjects_at_depth(&roots, self.config.taxonomy_depth)?;
            let matches = match_taxonomy(
                &dynamic.descriptors,
                &subjects,
                self.config.taxonomy_top_t,
                &self.config.preprocess()?,
            )?;
            write_json(&dir.join("taxonomy_matches.json"), &matches)?;
            let curve = recall_curve(&matches, &self.config.recall_thresholds);
            let mut csv = BufWriter::new(std::fs::File::create(dir.join("recall.csv"))?);
            write_recall_csv(&mut csv, &curve)?;
            csv.flush()?;
        }
        Ok(())
    }

    fn synth(&self, dir: &Path) -> Result<()> {
        let spec = match &self.synth_spec {
            Some(path) => read_json::<PlantedSpec>(path)?,
            None => PlantedSpec::standard(self.config.seed),
        };
        let (corpus, truth) = generate(&spec)?;
        let mut out = BufWriter::new(std::fs::File::create(dir.join("corpus.jsonl"))?);
        corpus.write_jsonl(&mut out)?;
        out.flush()?;
        write_json(&dir.join("truth.json"), &truth)?;
        write_json(&dir.join("spec.json"), &spec)?;
        info!("synth: {} speeches over {} windows", corpus.len(), spec.n_windows);
        Ok(())
    }
}
