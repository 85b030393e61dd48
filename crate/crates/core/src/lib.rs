//! Two-layer NMF dynamic topic modeling for timestamped speech corpora.
//!
//! Each time window gets its own topic model, with the number of topics picked
//! by word-embedding coherence. The window topics are then stacked into a
//! topic-document matrix and factorized again, which yields dynamic topics
//! that can be followed across windows.

pub mod corpus;
pub mod dynamic_topics;
pub mod embedding;
pub mod error;
pub mod nmf;
pub mod pipeline;
pub mod sparse;
pub mod svd;
pub mod synth;
pub mod validation;
pub mod window_topics;

pub use corpus::{
    build_matrix, load_corpus, partition_windows, preprocess, Corpus, CorpusFormat, DocTermMatrix,
    Granularity, Normalizer, PreprocessConfig, Speech, TimeWindowSpec, TokenizedDocument,
    WindowPartition,
};
pub use dynamic_topics::{
    build_topic_document_matrix, collect_speeches, fit_dynamic, topic_frequency, topic_time_series,
    DynamicModel, TimeSeries, TopicDocumentMatrix, WindowTopicRef,
};
pub use embedding::{
    model_coherence, topic_coherence, train_skipgram, EmbeddingSpace, SkipgramConfig,
};
pub use error::{Error, Result};
pub use nmf::{factorize, factorize_from, nndsvd_init, reconstruction_error, NmfConfig, TopicModelFactors};
pub use sparse::CsrMatrix;
pub use synth::{generate, GroundTruth, PlantedSpec, PlantedTopic};
pub use validation::{cluster_topics, match_taxonomy, recall_curve, Dendrogram, TaxonomySubject};
pub use window_topics::{select_k, top_terms, Assignment, Descriptor, KRange, WindowTopicModel};
