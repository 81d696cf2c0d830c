//! Emotion-aware sentence features for tweet emotion classification.
//!
//! Tweets are cleaned ([`preprocess`]), each token gets an 8-bit emotion
//! vector from a synonym-expanded lexicon ([`lexicon`], [`emotion_encoder`]),
//! transformer hidden states are pooled into sentence features
//! ([`embeddings`]), the two are concatenated ([`meta_embedding`]) and a small
//! MLP head is trained on top ([`classifier`]). [`experiment`] runs the whole
//! pooling grid.

pub mod classifier;
pub mod config;
pub mod datasets;
pub mod embeddings;
pub mod emotion_encoder;
pub mod experiment;
pub mod lexicon;
pub mod meta_embedding;
pub mod preprocess;
