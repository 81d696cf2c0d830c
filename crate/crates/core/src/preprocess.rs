//! Tweet normalization and word-level tokenization.
//!
//! Tweets are stripped of URLs, @-mentions and emoji, split on whitespace,
//! and trimmed of surrounding punctuation. Hashtags survive as their own
//! token kind so the emotion encoder can route them to the hashtag table.
//! Tokens that are not in a reference word list can then be repaired by
//! shrinking runs of repeated characters ("coooool" -> "cool").

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Literal used by the implicit-emotion corpus to mask the trigger word.
pub const MASK_LITERAL: &str = "[#TRIGGERWORD#]";

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("tweet {id:?} has no tokens left after cleaning")]
    EmptyTweet { id: String },
    #[error("failed to read word list {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTweet {
    pub id: String,
    pub text: String,
    pub label: Option<String>,
}

impl RawTweet {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            label: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TokenKind {
    Word,
    Hashtag,
}

impl TokenKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenKind::Word => "word",
            TokenKind::Hashtag => "hashtag",
        }
    }
}

/// A cleaned token. `surface` keeps the original casing (and the leading `#`
/// for hashtags); `lookup_form` is what lexicon lookups use.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lookup_form: String,
    pub kind: TokenKind,
}

impl Token {
    pub fn word(surface: impl Into<String>) -> Self {
        let surface = surface.into();
        let lookup_form = surface.to_lowercase();
        Self {
            surface,
            lookup_form,
            kind: TokenKind::Word,
        }
    }

    /// Builds a hashtag token from its body; a leading `#` is optional.
    pub fn hashtag(body: impl AsRef<str>) -> Self {
        let body = body.as_ref().trim_start_matches('#');
        Self {
            surface: format!("#{body}"),
            lookup_form: body.to_lowercase(),
            kind: TokenKind::Hashtag,
        }
    }

    /// Surface text without the hashtag marker.
    fn body(&self) -> &str {
        match self.kind {
            TokenKind::Word => &self.surface,
            TokenKind::Hashtag => self.surface.strip_prefix('#').unwrap_or(&self.surface),
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanTweet {
    pub id: String,
    pub tokens: Vec<Token>,
    pub original: String,
}

impl CleanTweet {
    /// Space-joined surfaces; feeding this back through `normalize_tweet`
    /// yields the same tokens.
    pub fn rendered(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.surface.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Reference dictionary of valid lowercase words.
#[derive(Debug, Clone, Default)]
pub struct WordList {
    words: HashSet<String>,
}

impl WordList {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PreprocessError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| PreprocessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::from_lines(&text))
    }

    pub fn from_lines(text: &str) -> Self {
        text.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl<S: AsRef<str>> FromIterator<S> for WordList {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self {
            words: iter.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }
}

/// True for codepoints in the pictographic emoji blocks, plus the joiners,
/// variation selectors and tag characters that glue emoji sequences together.
pub fn is_emoji(c: char) -> bool {
    matches!(
        c as u32,
        0x1F000..=0x1FAFF
            | 0x2600..=0x27BF
            | 0x231A..=0x231B
            | 0x2328
            | 0x23CF
            | 0x23E9..=0x23F3
            | 0x23F8..=0x23FA
            | 0x2194..=0x2199
            | 0x21A9..=0x21AA
            | 0x25AA..=0x25AB
            | 0x25B6
            | 0x25C0
            | 0x25FB..=0x25FE
            | 0x2934..=0x2935
            | 0x2B05..=0x2B07
            | 0x2B1B..=0x2B1C
            | 0x2B50
            | 0x2B55
            | 0x00A9
            | 0x00AE
            | 0x203C
            | 0x2049
            | 0x2122
            | 0x2139
            | 0x3030
            | 0x303D
            | 0x3297
            | 0x3299
            | 0x200D
            | 0x20E3
            | 0xFE0E..=0xFE0F
            | 0xE0020..=0xE007F
    )
}

fn is_url(chunk: &str) -> bool {
    let lower = chunk.to_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

fn trim_edges(chunk: &str) -> &str {
    chunk
        .trim_start_matches(|c: char| !c.is_alphanumeric() && c != '#' && c != '@')
        .trim_end_matches(|c: char| !c.is_alphanumeric())
}

fn tokenize_chunk(chunk: &str) -> Option<Token> {
    let chunk = trim_edges(chunk);
    if chunk.is_empty() || chunk.starts_with('@') || is_url(chunk) {
        return None;
    }
    if let Some(rest) = chunk.strip_prefix('#') {
        let body = rest.trim_matches(|c: char| !c.is_alphanumeric());
        return (!body.is_empty()).then(|| Token::hashtag(body));
    }
    Some(Token::word(chunk))
}

/// Cleans a raw tweet into ordered word and hashtag tokens.
pub fn normalize_tweet(raw: &RawTweet) -> Result<CleanTweet, PreprocessError> {
    let text: String = raw
        .text
        .replace(MASK_LITERAL, " ")
        .chars()
        .map(|c| if is_emoji(c) { ' ' } else { c })
        .collect();
    let tokens: Vec<Token> = text.split_whitespace().filter_map(tokenize_chunk).collect();
    if tokens.is_empty() {
        return Err(PreprocessError::EmptyTweet { id: raw.id.clone() });
    }
    Ok(CleanTweet {
        id: raw.id.clone(),
        tokens,
        original: raw.text.clone(),
    })
}

/// Start index and length of every run of identical characters.
fn runs(chars: &[char]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=chars.len() {
        if i == chars.len() || chars[i] != chars[start] {
            out.push((start, i - start));
            start = i;
        }
    }
    out
}

/// Shrinks repeated-character runs until the lookup form hits the dictionary.
///
/// Each step considers every run of the current maximal length, shrinks it by
/// one character, and tests the candidates left to right. On a miss the
/// leftmost candidate is carried into the next step. The loop ends at the
/// first hit or once no run longer than one character is left.
pub fn reduce_repeats(token: &Token, dictionary: &WordList) -> Token {
    if dictionary.contains(&token.lookup_form) {
        return token.clone();
    }
    let mut lookup: Vec<char> = token.lookup_form.chars().collect();
    let surface_chars: Vec<char> = token.body().chars().collect();
    // Case mapping can change length for a few scripts; the surface then
    // follows the lookup form instead of being shrunk in parallel.
    let mut surface = (surface_chars.len() == lookup.len()).then_some(surface_chars);

    loop {
        let all_runs = runs(&lookup);
        let longest = all_runs.iter().map(|&(_, len)| len).max().unwrap_or(0);
        if longest <= 1 {
            break;
        }
        let mut first: Option<usize> = None;
        let mut hit: Option<usize> = None;
        for &(start, _) in all_runs.iter().filter(|&&(_, len)| len == longest) {
            first.get_or_insert(start);
            let candidate: String = lookup
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != start)
                .map(|(_, c)| c)
                .collect();
            if dictionary.contains(&candidate) {
                hit = Some(start);
                break;
            }
        }
        let cut = hit.or(first).expect("a run of maximal length exists");
        lookup.remove(cut);
        if let Some(s) = surface.as_mut() {
            s.remove(cut);
        }
        if hit.is_some() {
            break;
        }
    }

    let lookup_form: String = lookup.into_iter().collect();
    let body = surface.map_or_else(|| lookup_form.clone(), |s| s.into_iter().collect());
    let surface = match token.kind {
        TokenKind::Word => body,
        TokenKind::Hashtag => format!("#{body}"),
    };
    Token {
        surface,
        lookup_form,
        kind: token.kind,
    }
}

/// Word tokens missing from the dictionary go through `reduce_repeats`;
/// hashtags are left for the emotion encoder.
pub fn check_token(token: &Token, dictionary: &WordList) -> Token {
    match token.kind {
        TokenKind::Hashtag => token.clone(),
        TokenKind::Word if dictionary.contains(&token.lookup_form) => token.clone(),
        TokenKind::Word => reduce_repeats(token, dictionary),
    }
}

/// Normalizes a tweet and, when a dictionary is given, checks every token.
pub fn preprocess(raw: &RawTweet, dictionary: Option<&WordList>) -> Result<CleanTweet, PreprocessError> {
    let mut clean = normalize_tweet(raw)?;
    if let Some(dict) = dictionary {
        clean.tokens = clean.tokens.iter().map(|t| check_token(t, dict)).collect();
    }
    Ok(clean)
}
