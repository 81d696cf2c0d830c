//! Transformer hidden-state features.
//!
//! A [`HiddenStateRecord`] holds every encoder layer's activations for one
//! sentence. Pooling turns it into a single [`FeatureVector`] under a
//! [`PoolingSpec`]: either the sentence-start token's vector (`Cls`) or the
//! mean of per-word vectors (`Token`), taken from one or more layers and
//! combined by concatenation, averaging, or summation.

mod chsf;
mod fvec;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chsf::{read_chsf, write_chsf, ChsfHeader, ChsfReader, ChsfWriter, CHSF_MAGIC, CHSF_VERSION};
pub use fvec::{read_fvec, write_fvec, FvecFile, FvecRecord, FVEC_MAGIC};

/// Longest supported subword sequence, specials included.
pub const MAX_TOKENS: usize = 512;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("bad magic bytes {found:?}")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("header truncated")]
    TruncatedHeader,
    #[error("record {record} starting at byte {offset} is truncated")]
    TruncatedRecord { record: u64, offset: u64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite activation in record {id:?}")]
    NonFinite { id: String },
    #[error("layer selection needs {requested} layers but only {available} exist")]
    LayerOutOfRange { requested: usize, available: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("record {id:?} has no content tokens")]
    NoContentTokens { id: String },
    #[error("nothing to combine")]
    EmptyInput,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubwordToken {
    pub piece: String,
    /// Index of the word this piece belongs to, -1 for special tokens.
    pub word_index: i32,
}

impl SubwordToken {
    pub fn new(piece: impl Into<String>, word_index: i32) -> Self {
        Self {
            piece: piece.into(),
            word_index,
        }
    }
}

/// Activations of all encoder layers for one sentence, stored layer-major
/// (`layer`, then `token`, then `dim`). Layers are numbered 1..=L.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStateRecord {
    sentence_id: String,
    layer_count: usize,
    hidden_dim: usize,
    subword_tokens: Vec<SubwordToken>,
    activations: Vec<f32>,
}

impl HiddenStateRecord {
    pub fn new(
        sentence_id: impl Into<String>,
        layer_count: usize,
        hidden_dim: usize,
        subword_tokens: Vec<SubwordToken>,
        activations: Vec<f32>,
    ) -> Result<Self, EmbeddingError> {
        let sentence_id = sentence_id.into();
        let t = subword_tokens.len();
        if layer_count == 0 || hidden_dim == 0 {
            return Err(EmbeddingError::ShapeMismatch(format!(
                "record {sentence_id:?}: layer count and hidden dim must be positive"
            )));
        }
        if t == 0 || t > MAX_TOKENS {
            return Err(EmbeddingError::ShapeMismatch(format!(
                "record {sentence_id:?}: token count {t} outside 1..={MAX_TOKENS}"
            )));
        }
        if subword_tokens[0].word_index != -1 {
            return Err(EmbeddingError::ShapeMismatch(format!(
                "record {sentence_id:?}: token 0 must be the sentence-start special token"
            )));
        }
        if let Some(bad) = subword_tokens.iter().find(|s| s.word_index < -1) {
            return Err(EmbeddingError::ShapeMismatch(format!(
                "record {sentence_id:?}: invalid word index {}",
                bad.word_index
            )));
        }
        let expected = layer_count * t * hidden_dim;
        if activations.len() != expected {
            return Err(EmbeddingError::ShapeMismatch(format!(
                "record {sentence_id:?}: expected {expected} activations ({layer_count}x{t}x{hidden_dim}), got {}",
                activations.len()
            )));
        }
        if !activations.iter().all(|v| v.is_finite()) {
            return Err(EmbeddingError::NonFinite { id: sentence_id });
        }
        Ok(Self {
            sentence_id,
            layer_count,
            hidden_dim,
            subword_tokens,
            activations,
        })
    }

    pub fn sentence_id(&self) -> &str {
        &self.sentence_id
    }

    pub fn layer_count(&self) -> usize {
        self.layer_count
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn token_count(&self) -> usize {
        self.subword_tokens.len()
    }

    pub fn subword_tokens(&self) -> &[SubwordToken] {
        &self.subword_tokens
    }

    pub fn activations(&self) -> &[f32] {
        &self.activations
    }

    /// The `T x D` block of a 1-based layer.
    pub fn layer(&self, layer: usize) -> &[f32] {
        assert!((1..=self.layer_count).contains(&layer), "layer {layer} out of range");
        let block = self.token_count() * self.hidden_dim;
        &self.activations[(layer - 1) * block..layer * block]
    }

    /// Vector of one subword token in a 1-based layer.
    pub fn vector(&self, layer: usize, token: usize) -> &[f32] {
        let d = self.hidden_dim;
        &self.layer(layer)[token * d..(token + 1) * d]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scope {
    ClsSentence,
    TokenLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LayerSelection {
    LastOnly,
    LastK(usize),
    AllLayers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Combine {
    Concatenate,
    Average,
    Sum,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WordMerge {
    #[default]
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PoolingSpec {
    pub scope: Scope,
    pub layers: LayerSelection,
    pub combine: Combine,
    pub word_merge: WordMerge,
}

impl PoolingSpec {
    /// Builds a spec in canonical form (single-layer selections use `Sum`).
    pub fn new(scope: Scope, layers: LayerSelection, combine: Combine) -> Self {
        PoolingSpec {
            scope,
            layers,
            combine,
            word_merge: WordMerge::Mean,
        }
        .canonical()
    }

    pub fn canonical(mut self) -> Self {
        if matches!(self.layers, LayerSelection::LastOnly | LayerSelection::LastK(1)) {
            self.layers = LayerSelection::LastOnly;
            self.combine = Combine::Sum;
        }
        self
    }

    /// Output dimension for a model with `layers` layers of width `dim`.
    pub fn output_dim(&self, layers: usize, dim: usize) -> usize {
        let m = match self.layers {
            LayerSelection::LastOnly => 1,
            LayerSelection::LastK(k) => k,
            LayerSelection::AllLayers => layers,
        };
        match self.combine {
            Combine::Concatenate => m * dim,
            Combine::Average | Combine::Sum => dim,
        }
    }
}

/// The comparison grid: both scopes, last layer alone plus
/// {all, last 4, last 2} layers under each combine function.
pub fn standard_grid() -> Vec<PoolingSpec> {
    let mut grid = Vec::new();
    for scope in [Scope::ClsSentence, Scope::TokenLevel] {
        grid.push(PoolingSpec::new(scope, LayerSelection::LastOnly, Combine::Sum));
        for layers in [
            LayerSelection::AllLayers,
            LayerSelection::LastK(4),
            LayerSelection::LastK(2),
        ] {
            for combine in [Combine::Concatenate, Combine::Average, Combine::Sum] {
                grid.push(PoolingSpec::new(scope, layers, combine));
            }
        }
    }
    grid
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::ClsSentence => "cls",
            Scope::TokenLevel => "token",
        })
    }
}

impl FromStr for Scope {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "cls" | "sentence" => Ok(Scope::ClsSentence),
            "token" | "word" | "tokens" => Ok(Scope::TokenLevel),
            other => Err(format!("unknown scope {other:?} (use cls|token)")),
        }
    }
}

impl fmt::Display for LayerSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSelection::LastOnly => f.write_str("last"),
            LayerSelection::LastK(k) => write!(f, "last{k}"),
            LayerSelection::AllLayers => f.write_str("all"),
        }
    }
}

impl FromStr for LayerSelection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_lowercase();
        match s.as_str() {
            "last" => Ok(LayerSelection::LastOnly),
            "all" => Ok(LayerSelection::AllLayers),
            _ => match s.strip_prefix("last").map(str::parse::<usize>) {
                Some(Ok(k)) if k >= 1 => Ok(LayerSelection::LastK(k)),
                _ => Err(format!("unknown layer selection {s:?} (use last|lastK|all)")),
            },
        }
    }
}

impl fmt::Display for Combine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Combine::Concatenate => "concat",
            Combine::Average => "avg",
            Combine::Sum => "sum",
        })
    }
}

impl FromStr for Combine {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "concat" | "concatenate" => Ok(Combine::Concatenate),
            "avg" | "average" | "mean" => Ok(Combine::Average),
            "sum" => Ok(Combine::Sum),
            other => Err(format!("unknown combine {other:?} (use concat|avg|sum)")),
        }
    }
}

/// `scope/layers/combine`, e.g. `token/last4/sum`.
impl fmt::Display for PoolingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.scope, self.layers, self.combine)
    }
}

impl FromStr for PoolingSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split('/').collect();
        match parts[..] {
            [scope, layers] => Ok(PoolingSpec::new(scope.parse()?, layers.parse()?, Combine::Sum)),
            [scope, layers, combine] => Ok(PoolingSpec::new(scope.parse()?, layers.parse()?, combine.parse()?)),
            _ => Err(format!("pooling spec {s:?} must look like scope/layers/combine")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

impl From<&[f32]> for FeatureVector {
    fn from(v: &[f32]) -> Self {
        FeatureVector::new(v.iter().map(|&x| f64::from(x)).collect())
    }
}

/// A selected layer: its 1-based index and `T x D` block.
#[derive(Debug, Clone, Copy)]
pub struct LayerView<'a> {
    pub index: usize,
    pub data: &'a [f32],
}

/// Selected layers in ascending index order.
pub fn select_layers(rec: &HiddenStateRecord, layers: LayerSelection) -> Result<Vec<LayerView<'_>>, EmbeddingError> {
    let l = rec.layer_count();
    let first = match layers {
        LayerSelection::LastOnly => l,
        LayerSelection::AllLayers => 1,
        LayerSelection::LastK(k) if k >= 1 && k <= l => l - k + 1,
        LayerSelection::LastK(k) => {
            return Err(EmbeddingError::LayerOutOfRange {
                requested: k,
                available: l,
            })
        }
    };
    Ok((first..=l)
        .map(|index| LayerView {
            index,
            data: rec.layer(index),
        })
        .collect())
}

/// Combines per-layer vectors; concatenation keeps ascending layer order.
pub fn combine_layers<V: AsRef<[f64]>>(vectors: &[V], combine: Combine) -> Result<FeatureVector, EmbeddingError> {
    let first = vectors.first().ok_or(EmbeddingError::EmptyInput)?.as_ref();
    let d = first.len();
    if let Some(bad) = vectors.iter().find(|v| v.as_ref().len() != d) {
        return Err(EmbeddingError::DimMismatch {
            expected: d,
            found: bad.as_ref().len(),
        });
    }
    let values = match combine {
        Combine::Concatenate => vectors.iter().flat_map(|v| v.as_ref().iter().copied()).collect(),
        Combine::Sum | Combine::Average => {
            let mut acc = vec![0.0f64; d];
            for v in vectors {
                for (a, x) in acc.iter_mut().zip(v.as_ref()) {
                    *a += x;
                }
            }
            if combine == Combine::Average {
                let m = vectors.len() as f64;
                acc.iter_mut().for_each(|a| *a /= m);
            }
            acc
        }
    };
    Ok(FeatureVector::new(values))
}

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

/// Sentence-start token vector from each selected layer, combined.
pub fn pool_cls(rec: &HiddenStateRecord, spec: &PoolingSpec) -> Result<FeatureVector, EmbeddingError> {
    let d = rec.hidden_dim();
    let per_layer: Vec<Vec<f64>> = select_layers(rec, spec.layers)?
        .iter()
        .map(|view| widen(&view.data[..d]))
        .collect();
    combine_layers(&per_layer, spec.combine)
}

/// Per-word vectors, ordered by word index. Within each layer a word is the
/// mean of its subword vectors; layers are then combined per word. Special
/// tokens (word index -1) are skipped.
pub fn word_vectors(
    rec: &HiddenStateRecord,
    spec: &PoolingSpec,
) -> Result<Vec<(usize, FeatureVector)>, EmbeddingError> {
    let d = rec.hidden_dim();
    let mut words: Vec<usize> = rec
        .subword_tokens()
        .iter()
        .filter(|s| s.word_index >= 0)
        .map(|s| s.word_index as usize)
        .collect();
    words.sort_unstable();
    words.dedup();
    if words.is_empty() {
        return Err(EmbeddingError::NoContentTokens {
            id: rec.sentence_id().to_string(),
        });
    }
    let layers = select_layers(rec, spec.layers)?;

    // word -> per-layer mean vectors
    let mut per_word: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(layers.len()); words.len()];
    for view in &layers {
        let mut sums = vec![vec![0.0f64; d]; words.len()];
        let mut counts = vec![0usize; words.len()];
        for (t, sub) in rec.subword_tokens().iter().enumerate() {
            if sub.word_index < 0 {
                continue;
            }
            let slot = words
                .binary_search(&(sub.word_index as usize))
                .expect("word collected above");
            for (a, &x) in sums[slot].iter_mut().zip(&view.data[t * d..(t + 1) * d]) {
                *a += f64::from(x);
            }
            counts[slot] += 1;
        }
        for ((sum, count), target) in sums.into_iter().zip(counts).zip(per_word.iter_mut()) {
            let n = count as f64;
            target.push(sum.into_iter().map(|a| a / n).collect());
        }
    }

    words
        .into_iter()
        .zip(per_word)
        .map(|(w, vectors)| Ok((w, combine_layers(&vectors, spec.combine)?)))
        .collect()
}

/// Elementwise mean of word vectors.
pub fn sentence_from_words<V: AsRef<[f64]>>(words: &[V]) -> Result<FeatureVector, EmbeddingError> {
    let mut mean = combine_layers(words, Combine::Sum)?;
    let n = words.len() as f64;
    mean.values.iter_mut().for_each(|v| *v /= n);
    Ok(mean)
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Pools one record into a sentence feature vector.
pub fn pool_record(rec: &HiddenStateRecord, spec: &PoolingSpec) -> Result<FeatureVector, EmbeddingError> {
    match spec.scope {
        Scope::ClsSentence => pool_cls(rec, spec),
        Scope::TokenLevel => {
            let words: Vec<FeatureVector> = word_vectors(rec, spec)?.into_iter().map(|(_, v)| v).collect();
            sentence_from_words(&words)
        }
    }
}
