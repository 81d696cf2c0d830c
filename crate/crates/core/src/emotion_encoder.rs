//! Per-token binary emotion vectors.

use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::lexicon::{EmoSynLexicon, Emotion, EmotionSet};
use crate::preprocess::{CleanTweet, PreprocessError, Token};

/// Eight 0/1 flags in canonical `Emotion` order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmotionVector([u8; 8]);

impl EmotionVector {
    pub const ZERO: EmotionVector = EmotionVector([0; 8]);

    pub fn from_set(set: EmotionSet) -> Self {
        let mut bits = [0u8; 8];
        for e in set.iter() {
            bits[e.index()] = 1;
        }
        EmotionVector(bits)
    }

    /// Panics if any entry is not 0 or 1.
    pub fn from_bits(bits: [u8; 8]) -> Self {
        assert!(bits.iter().all(|&b| b <= 1), "emotion bits must be 0 or 1");
        EmotionVector(bits)
    }

    pub fn bits(&self) -> [u8; 8] {
        self.0
    }

    pub fn to_set(self) -> EmotionSet {
        Emotion::ALL.into_iter().filter(|e| self.0[e.index()] == 1).collect()
    }

    pub fn to_f64(self) -> [f64; 8] {
        self.0.map(f64::from)
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 8]
    }
}

impl fmt::Display for EmotionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEmotionMatrix {
    pub tweet_id: String,
    pub rows: Vec<(Token, EmotionVector)>,
}

impl TokenEmotionMatrix {
    pub fn vectors(&self) -> impl Iterator<Item = EmotionVector> + '_ {
        self.rows.iter().map(|(_, v)| *v)
    }

    /// Writes `tweet_id<TAB>token_index<TAB>token<TAB>bits8` rows.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (i, (token, vector)) in self.rows.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}\t{}", self.tweet_id, i, token.surface, vector)?;
        }
        Ok(())
    }
}

pub fn encode_token(token: &Token, lexicon: &EmoSynLexicon) -> EmotionVector {
    EmotionVector::from_set(lexicon.lookup(&token.lookup_form, token.kind))
}

pub fn encode_tweet(tweet: &CleanTweet, lexicon: &EmoSynLexicon) -> Result<TokenEmotionMatrix, PreprocessError> {
    if tweet.tokens.is_empty() {
        return Err(PreprocessError::EmptyTweet { id: tweet.id.clone() });
    }
    Ok(TokenEmotionMatrix {
        tweet_id: tweet.id.clone(),
        rows: tweet
            .tokens
            .iter()
            .map(|t| (t.clone(), encode_token(t, lexicon)))
            .collect(),
    })
}

/// Fraction of tokens across `matrices` whose vector is all zeros.
pub fn zero_vector_rate<'a>(matrices: impl IntoIterator<Item = &'a TokenEmotionMatrix>) -> f64 {
    let (zeros, total) = matrices
        .into_iter()
        .flat_map(|m| m.vectors())
        .fold((0usize, 0usize), |(z, n), v| (z + usize::from(v.is_zero()), n + 1));
    if total == 0 {
        0.0
    } else {
        zeros as f64 / total as f64
    }
}
