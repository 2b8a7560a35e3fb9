//! Evaluation metrics for generated comics.
//!
//! * [`storyscore`]: blended embedding similarity of a story summary against
//!   a target story and a reference corpus.
//! * [`ssim`]: Gaussian-window structural similarity over image batches.
//! * [`fid`]: Fréchet distance between Gaussian fits of deep-feature batches.
//!
//! Embeddings and deep features come from outside: [`embed`] talks to an
//! embedding service or a lookup file, [`features_io`] reads feature matrices
//! exported by an extractor, and [`image_io`] decodes images for SSIM.

pub mod embed;
pub mod error;
pub mod features_io;
pub mod fid;
pub mod image_io;
pub mod linalg;
pub mod report;
pub mod ssim;
pub mod storyscore;

pub use embed::{content_hash, embed_texts, EmbeddingProvider, ProviderConfig, ProviderKind};
pub use error::{Error, ErrorKind, Result};
pub use features_io::{read_features, write_features, FeatureFormat};
pub use fid::{fid, frechet_distance, gaussian_stats, CovarianceMode, FeatureMatrix, FidOptions, GaussianStats};
pub use image_io::{load_batch, load_gray, ImageBatch, ResizePolicy};
pub use linalg::{Matrix, Vector};
pub use report::{merge_reports, MetricKind, ReportFormat, ReportRow, ScoreReport};
pub use ssim::{batch_ssim, ssim, BatchSsim, GrayImage, Pairing, SsimParams, SsimResult};
pub use storyscore::{evaluate_manifest, plot_score, sim, story_score, StoryCorpusManifest, StoryDoc, StoryScoreRow};
