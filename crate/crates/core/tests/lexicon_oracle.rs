mod support;

use cefer::emotion_encoder::encode_token;
use cefer::lexicon::{build_emosyn, EmotionSet, LexiconEntry, Source, SynonymGraph};
use cefer::preprocess::{Token, TokenKind};

#[test]
fn want_any_vectors() {
    support::want_any_exactness().unwrap();
}

#[test]
fn random_graphs_match_bfs_union() {
    support::lexicon_monotonicity_and_oracle(100, 7).unwrap();
}

#[test]
fn fixture_expansion_depths() {
    let lex = support::want_any_lexicon();
    assert_eq!(lex.depth_of("desert", TokenKind::Word), Some(1));
    assert_eq!(lex.depth_of("go", TokenKind::Word), Some(3));
    assert_eq!(lex.depth_of("depart", TokenKind::Word), None);
    assert_eq!(encode_token(&Token::word("go"), &lex).to_string(), "01001000");
}

#[test]
fn fixture_hashtags() {
    let lex = support::want_any_lexicon();
    // score must exceed the threshold strictly
    assert_eq!(lex.lookup("longday", TokenKind::Hashtag), EmotionSet::EMPTY);
    assert_eq!(encode_token(&Token::hashtag("fuming"), &lex).to_string(), "10000000");
    // hashtag lookups fall back to words
    assert_eq!(encode_token(&Token::hashtag("want"), &lex).to_string(), "11011001");
    // hashtag seeds are never expanded into the word table
    assert_eq!(lex.lookup("blessed", TokenKind::Word), EmotionSet::EMPTY);
}

#[test]
fn saved_lexicon_is_sorted_and_reloads() {
    let lex = support::want_any_lexicon();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emosyn.tsv");
    lex.save(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let keys: Vec<(String, String)> = text
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].to_string(), f[1].to_string())
        })
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(text.ends_with('\n') && !text.contains('\r'));
    let back = cefer::lexicon::EmoSynLexicon::load(&path).unwrap();
    assert_eq!(back.word_table(), lex.word_table());
    assert_eq!(back.hashtag_table(), lex.hashtag_table());
}

#[test]
fn cycle_does_not_loop() {
    let mut g = SynonymGraph::new();
    for (a, b) in [("a", "b"), ("b", "c"), ("c", "a")] {
        g.add_pair(a, b);
    }
    let seed = LexiconEntry::seed("a", EmotionSet::from_bits(1), Source::NrcEmotion);
    let lex = build_emosyn(&[seed], &g, 10).unwrap();
    assert_eq!(lex.len(), 3);
}
