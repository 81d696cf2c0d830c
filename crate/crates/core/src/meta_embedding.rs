//! Concatenation meta-embedding: `[contextual features ‖ emotion vector]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::FeatureVector;
use crate::emotion_encoder::EmotionVector;

/// Width of the emotion block appended to every feature vector.
pub const EMOTION_DIM: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetaError {
    #[error("cannot build a sentence meta-embedding from zero words")]
    EmptyInput,
    #[error("word feature dims differ: {expected} vs {found}")]
    DimMismatch { expected: usize, found: usize },
}

/// The first `feat_dim` values are contextual features, the trailing eight
/// the emotion block. For a single word the block holds 0/1 flags; after a
/// sentence-level mean it holds per-emotion token fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaEmbedding {
    pub values: Vec<f64>,
    pub feat_dim: usize,
}

impl MetaEmbedding {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn features(&self) -> &[f64] {
        &self.values[..self.feat_dim]
    }

    pub fn emotions(&self) -> &[f64] {
        &self.values[self.feat_dim..]
    }
}

impl AsRef<[f64]> for MetaEmbedding {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

pub fn meta_word(feat: &FeatureVector, emo: &EmotionVector) -> MetaEmbedding {
    let mut values = Vec::with_capacity(feat.dim() + EMOTION_DIM);
    values.extend_from_slice(&feat.values);
    values.extend(emo.to_f64());
    MetaEmbedding {
        values,
        feat_dim: feat.dim(),
    }
}

/// Per-word meta-embeddings averaged over the sentence.
pub fn meta_sentence(words: &[(FeatureVector, EmotionVector)]) -> Result<MetaEmbedding, MetaError> {
    let (first, _) = words.first().ok_or(MetaError::EmptyInput)?;
    let feat_dim = first.dim();
    let mut acc = vec![0.0f64; feat_dim + EMOTION_DIM];
    for (feat, emo) in words {
        if feat.dim() != feat_dim {
            return Err(MetaError::DimMismatch {
                expected: feat_dim,
                found: feat.dim(),
            });
        }
        for (a, v) in acc.iter_mut().zip(meta_word(feat, emo).values) {
            *a += v;
        }
    }
    let n = words.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(MetaEmbedding { values: acc, feat_dim })
}

/// Appends the mean emotion vector of a tweet to an already pooled sentence
/// feature (used with sentence-start pooling, which has no per-word features).
pub fn meta_pooled(feat: &FeatureVector, emotions: &[EmotionVector]) -> Result<MetaEmbedding, MetaError> {
    if emotions.is_empty() {
        return Err(MetaError::EmptyInput);
    }
    let mut block = [0.0f64; EMOTION_DIM];
    for emo in emotions {
        for (b, v) in block.iter_mut().zip(emo.to_f64()) {
            *b += v;
        }
    }
    let n = emotions.len() as f64;
    let mut values = feat.values.clone();
    values.extend(block.iter().map(|b| b / n));
    Ok(MetaEmbedding {
        values,
        feat_dim: feat.dim(),
    })
}
