//! Story score: a blend of similarity to a target story and the average
//! similarity to a corpus of reference stories.
//!
//! ```text
//! story(x; t, M) = gamma * sim(x, t) + (1 - gamma) * plot(x; M)
//! plot(x; M)     = mean over m in M of sim(x, m)
//! ```
//!
//! All texts are summaries prepared upstream; `sim` is the cosine similarity
//! of their embeddings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::{content_hash, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::linalg::{cosine_similarity, Vector};

pub const DEFAULT_GAMMA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryDoc {
    pub id: String,
    pub title: String,
    pub summary_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryCorpusManifest {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub candidate: StoryDoc,
    pub target: StoryDoc,
    pub references: Vec<StoryDoc>,
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryScoreRow {
    pub label: String,
    pub similarity: f64,
    pub plot: f64,
    pub story: f64,
}

fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        pointer: pointer.into(),
        message: message.into(),
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    Ok(())
}

impl StoryCorpusManifest {
    /// Parses and validates a manifest; violations carry a JSON pointer.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let manifest: StoryCorpusManifest =
            serde_path_to_error::deserialize(de).map_err(|e| {
                let pointer = json_pointer(e.path());
                schema(pointer, e.inner().to_string())
            })?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        StoryCorpusManifest::from_json(&text)
    }

    pub fn documents(&self) -> impl Iterator<Item = (String, &StoryDoc)> {
        [
            ("/candidate".to_owned(), &self.candidate),
            ("/target".to_owned(), &self.target),
        ]
        .into_iter()
        .chain(
            self.references
                .iter()
                .enumerate()
                .map(|(i, d)| (format!("/references/{i}"), d)),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(schema("/gamma", format!("{} is outside [0, 1]", self.gamma)));
        }
        if self.references.is_empty() {
            return Err(schema("/references", "at least one reference story is required"));
        }
        let mut dim = None;
        for (pointer, doc) in self.documents() {
            if doc.summary_text.is_empty() {
                return Err(schema(format!("{pointer}/summary_text"), "must be non-empty"));
            }
            if let Some(e) = &doc.embedding {
                match dim {
                    None => dim = Some(e.dim()),
                    Some(d) if d != e.dim() => {
                        return Err(schema(
                            format!("{pointer}/embedding"),
                            format!("has dim {}, other embeddings have dim {d}", e.dim()),
                        ))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } | Segment::Enum { variant: key } => {
                out.push_str(&key.replace('~', "~0").replace('/', "~1"))
            }
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

/// Similarity of a story to the target story.
pub fn sim(candidate: &Vector, target: &Vector) -> Result<f64> {
    cosine_similarity(candidate, target)
}

/// Mean similarity of a story to each reference story.
pub fn plot_score(candidate: &Vector, references: &[Vector]) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::invalid("plot score needs at least one reference"));
    }
    let total = references
        .iter()
        .map(|r| sim(candidate, r))
        .sum::<Result<f64>>()?;
    Ok(total / references.len() as f64)
}

/// `gamma * similarity + (1 - gamma) * plot`.
pub fn story_score(similarity: f64, plot: f64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(gamma * similarity + (1.0 - gamma) * plot)
}

/// Scores a manifest, embedding any document that does not carry a vector.
pub fn evaluate_manifest(
    manifest: &StoryCorpusManifest,
    provider: &dyn EmbeddingProvider,
) -> Result<StoryScoreRow> {
    manifest.validate()?;
    let docs: Vec<&StoryDoc> = manifest.documents().map(|(_, d)| d).collect();
    let pending: Vec<&StoryDoc> = docs.iter().copied().filter(|d| d.embedding.is_none()).collect();

    let mut fetched = Vec::new();
    if !pending.is_empty() {
        let texts: Vec<&str> = pending.iter().map(|d| d.summary_text.as_str()).collect();
        fetched = provider.embed_texts(&texts).map_err(|e| {
            let id = match &e {
                Error::NotFound { hash } => pending
                    .iter()
                    .find(|d| content_hash(&d.summary_text) == *hash)
                    .map(|d| d.id.clone()),
                _ => None,
            }
            .unwrap_or_else(|| {
                pending
                    .iter()
                    .map(|d| d.id.as_str())
                    .collect::<Vec<_>>()
                    .join(",")
            });
            Error::Provider {
                id,
                source: Box::new(e),
            }
        })?;
    }

    let mut fetched = fetched.into_iter();
    let embeddings: Vec<Vector> = docs
        .iter()
        .map(|d| match &d.embedding {
            Some(e) => e.clone(),
            None => fetched.next().expect("one fetched embedding per pending document"),
        })
        .collect();
    let dim = embeddings[0].dim();
    if let Some((doc, e)) = docs.iter().zip(&embeddings).find(|(_, e)| e.dim() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "embedding of '{}' has dim {}, corpus dim is {dim}",
            doc.id,
            e.dim()
        )));
    }

    let similarity = sim(&embeddings[0], &embeddings[1])?;
    let plot = plot_score(&embeddings[0], &embeddings[2..])?;
    let story = story_score(similarity, plot, manifest.gamma)?;
    Ok(StoryScoreRow {
        label: manifest.candidate.id.clone(),
        similarity,
        plot,
        story,
    })
}
