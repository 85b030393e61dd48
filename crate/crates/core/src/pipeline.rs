//! The two-layer model fitted end to end, stage by stage.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    build_matrix, partition_windows, preprocess, Corpus, DocTermMatrix, PreprocessConfig,
    TimeWindowSpec, TokenizedDocument, WindowPartition,
};
use crate::dynamic_topics::{
    build_topic_document_matrix, fit_dynamic, topic_time_series, DynamicModel, TimeSeries,
    TopicDocumentMatrix,
};
use crate::embedding::{train_skipgram, EmbeddingSpace, SkipgramConfig};
use crate::error::{Error, Result};
use crate::nmf::NmfConfig;
use crate::window_topics::{select_k, KRange, WindowTopicModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub window_k: KRange,
    pub dynamic_k: KRange,
    /// Top terms per topic when scoring coherence.
    pub t_coherence: usize,
    /// Top terms per window topic kept in the topic-document matrix.
    pub t_stack: usize,
    pub normalize_b: bool,
    pub nmf: NmfConfig,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            window_k: KRange { min: 10, max: 25 },
            dynamic_k: KRange { min: 25, max: 90 },
            t_coherence: 10,
            t_stack: 20,
            normalize_b: true,
            nmf: NmfConfig::default(),
        }
    }
}

/// Documents and matrices of one time window.
#[derive(Debug, Clone)]
pub struct PreparedWindow {
    pub partition: WindowPartition,
    /// `None` for empty or degenerate windows.
    pub matrix: Option<DocTermMatrix>,
}

#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub windows: Vec<PreparedWindow>,
    /// Every speech after token filtering, in corpus order.
    pub documents: Vec<TokenizedDocument>,
}

/// Partitions the corpus and builds one TF-IDF matrix per window.
pub fn prepare(corpus: &Corpus, spec: &TimeWindowSpec, config: &PreprocessConfig) -> Result<PreparedCorpus> {
    config.validate()?;
    let partitions = partition_windows(corpus, spec)?;
    let documents = preprocess(&corpus.speeches, config);
    let index: std::collections::HashMap<&str, usize> =
        documents.iter().enumerate().map(|(i, d)| (d.id.as_str(), i)).collect();
    let windows = partitions
        .into_par_iter()
        .map(|partition| {
            let docs: Vec<TokenizedDocument> = partition
                .speech_ids
                .iter()
                .map(|id| documents[index[id.as_str()]].clone())
                .collect();
            let matrix = if partition.empty {
                None
            } else {
                match build_matrix(&docs, config, partition.window.id) {
                    Ok(m) => Some(m),
                    Err(Error::DegenerateWindow { window_id }) => {
                        log::warn!("window {window_id} is degenerate and will not be modeled");
                        None
                    }
                    Err(e) => return Err(e),
                }
            };
            Ok(PreparedWindow { partition, matrix })
        })
        .collect::<Result<_>>()?;
    Ok(PreparedCorpus { windows, documents })
}

pub fn train_embeddings(prepared: &PreparedCorpus, config: &SkipgramConfig) -> Result<EmbeddingSpace> {
    train_skipgram(&prepared.documents, config)
}

/// Fits every window that has a matrix. The topic range is lowered to the
/// matrix rank bound where needed; windows too small for two topics are skipped.
pub fn fit_windows(
    matrices: &[&DocTermMatrix],
    settings: &ModelSettings,
    space: &EmbeddingSpace,
) -> Result<Vec<WindowTopicModel>> {
    let fitted: Vec<Option<WindowTopicModel>> = matrices
        .par_iter()
        .map(|m| {
            let bound = m.n_docs().min(m.n_terms());
            let Some(range) = settings.window_k.clamped(bound) else {
                log::warn!("window {} is too small ({}x{}) to model", m.window_id, m.n_docs(), m.n_terms());
                return Ok(None);
            };
            if range != settings.window_k {
                log::warn!("window {}: topic range lowered to [{}, {}]", m.window_id, range.min, range.max);
            }
            select_k(m, range, settings.t_coherence, space, &settings.nmf).map(Some)
        })
        .collect::<Result<_>>()?;
    Ok(fitted.into_iter().flatten().collect())
}

pub fn stack_windows(models: &[WindowTopicModel], settings: &ModelSettings) -> Result<TopicDocumentMatrix> {
    build_topic_document_matrix(models, settings.t_stack, settings.normalize_b)
}

/// Second-layer fit, with the topic range lowered to the rank bound of `b`.
pub fn fit_second_layer(
    b: &TopicDocumentMatrix,
    settings: &ModelSettings,
    space: &EmbeddingSpace,
) -> Result<DynamicModel> {
    let bound = b.matrix.n_rows().min(b.matrix.n_cols());
    let range = settings.dynamic_k.clamped(bound).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "topic-document matrix {}x{} cannot hold {} dynamic topics",
            b.matrix.n_rows(),
            b.matrix.n_cols(),
            settings.dynamic_k.min
        ))
    })?;
    if range != settings.dynamic_k {
        log::warn!("dynamic topic range lowered to [{}, {}]", range.min, range.max);
    }
    fit_dynamic(b, range, settings.t_coherence, space, &settings.nmf)
}

#[derive(Debug, Clone)]
pub struct TwoLayerModel {
    pub prepared: PreparedCorpus,
    pub window_models: Vec<WindowTopicModel>,
    pub topic_documents: TopicDocumentMatrix,
    pub dynamic: DynamicModel,
    pub time_series: TimeSeries,
}

/// Runs both layers on `corpus` with an already built embedding space.
pub fn fit_two_layer(
    corpus: &Corpus,
    spec: &TimeWindowSpec,
    preprocess_config: &PreprocessConfig,
    settings: &ModelSettings,
    space: &EmbeddingSpace,
) -> Result<TwoLayerModel> {
    let prepared = prepare(corpus, spec, preprocess_config)?;
    fit_prepared(prepared, settings, space)
}

pub fn fit_prepared(
    prepared: PreparedCorpus,
    settings: &ModelSettings,
    space: &EmbeddingSpace,
) -> Result<TwoLayerModel> {
    let matrices: Vec<&DocTermMatrix> = prepared.windows.iter().filter_map(|w| w.matrix.as_ref()).collect();
    let window_models = fit_windows(&matrices, settings, space)?;
    let topic_documents = stack_windows(&window_models, settings)?;
    let dynamic = fit_second_layer(&topic_documents, settings, space)?;
    let time_series = topic_time_series(&dynamic, &window_models);
    Ok(TwoLayerModel {
        prepared,
        window_models,
        topic_documents,
        dynamic,
        time_series,
    })
}
