//! Canonicalization, tokenization, phrase merging and character n-grams.
//!
//! Everything downstream (string similarity, triplet generation, the
//! embedding model) sees text only through the functions in this module, so
//! the rules here decide what counts as "the same value".

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Joiner used when a multi-word phrase is collapsed into one token.
pub const PHRASE_JOINER: char = '_';

/// Start-of-token sentinel used when boundary markers are enabled.
pub const BOW: char = '\u{27E8}';
/// End-of-token sentinel used when boundary markers are enabled.
pub const EOW: char = '\u{27E9}';

/// A lowercase, whitespace-free unit of text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(String);

impl Token {
    /// Wraps an already-canonical string. Returns `None` for empty input or
    /// input containing whitespace.
    pub fn new(text: impl Into<String>) -> Option<Self> {
        let text = text.into();
        if text.is_empty() || text.chars().any(char::is_whitespace) {
            None
        } else {
            Some(Token(text))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}'
                | '\u{2019}'
                | '\u{201C}'
                | '\u{201D}'
                | '\u{2013}'
                | '\u{2014}'
                | '\u{2026}'
                | '\u{00AB}'
                | '\u{00BB}'
                | '\u{00BF}'
                | '\u{00A1}'
        )
}

/// Lowercases, splits on Unicode whitespace, and strips leading/trailing
/// punctuation from every piece. Internal punctuation survives, so
/// `"v4.4.2"` and `"9-12"` stay intact.
pub fn canonicalize(raw: &str) -> Vec<Token> {
    raw.split(char::is_whitespace)
        .filter_map(|piece| {
            let trimmed = piece.trim_matches(is_punct);
            if trimmed.is_empty() {
                return None;
            }
            let lowered: String = trimmed.chars().flat_map(char::to_lowercase).collect();
            Token::new(lowered)
        })
        .collect()
}

/// Canonical tokens re-joined with single spaces.
pub fn canonical_string(raw: &str) -> String {
    join_tokens(&canonicalize(raw))
}

/// Space-joins a token sequence.
pub fn join_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t.as_str());
    }
    out
}

/// Set of multi-word phrases that get collapsed into single tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhraseLexicon {
    phrases: BTreeSet<Vec<String>>,
    max_phrase_len: usize,
}

/// Knobs for [`build_phrase_lexicon_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LexiconOptions {
    /// A multi-word value must occur at least this many times to become a phrase.
    pub min_count: usize,
    /// Values with more words than this are ignored.
    pub max_phrase_len: usize,
}

impl Default for LexiconOptions {
    fn default() -> Self {
        LexiconOptions {
            min_count: 1,
            max_phrase_len: 6,
        }
    }
}

impl PhraseLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a phrase. Single-word sequences are ignored.
    pub fn insert<S: AsRef<str>>(&mut self, words: &[S]) -> bool {
        if words.len() < 2 {
            return false;
        }
        let words: Vec<String> = words.iter().map(|w| w.as_ref().to_owned()).collect();
        self.max_phrase_len = self.max_phrase_len.max(words.len());
        self.phrases.insert(words)
    }

    pub fn contains<S: AsRef<str>>(&self, words: &[S]) -> bool {
        // BTreeSet lookup needs an owned key of the same type.
        let key: Vec<String> = words.iter().map(|w| w.as_ref().to_owned()).collect();
        self.phrases.contains(&key)
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    /// Length in words of the longest phrase (0 when empty).
    pub fn max_phrase_len(&self) -> usize {
        self.max_phrase_len
    }

    pub fn iter(&self) -> impl Iterator<Item = &[String]> {
        self.phrases.iter().map(Vec::as_slice)
    }

    /// Writes one phrase per line, words space-separated, sorted by line.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut lines: Vec<String> = self.phrases.iter().map(|p| p.join(" ")).collect();
        lines.sort();
        for line in lines {
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lex = PhraseLexicon::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let words: Vec<&str> = line.split(' ').collect();
            if words.len() < 2 || words.iter().any(|w| w.is_empty()) {
                return Err(Error::parse(i + 1, "phrase must have at least two space-separated words"));
            }
            lex.insert(&words);
        }
        Ok(lex)
    }
}

/// Every distinct multi-token value becomes a phrase.
pub fn build_phrase_lexicon<T: AsRef<[Token]>>(values: &[T]) -> PhraseLexicon {
    build_phrase_lexicon_with(values, LexiconOptions::default())
}

pub fn build_phrase_lexicon_with<T: AsRef<[Token]>>(values: &[T], opts: LexiconOptions) -> PhraseLexicon {
    let mut counts: HashMap<Vec<&str>, usize> = HashMap::new();
    for v in values {
        let v = v.as_ref();
        if v.len() < 2 || v.len() > opts.max_phrase_len {
            continue;
        }
        *counts.entry(v.iter().map(Token::as_str).collect()).or_default() += 1;
    }
    let mut lex = PhraseLexicon::new();
    for (words, n) in counts {
        if n >= opts.min_count.max(1) {
            lex.insert(&words);
        }
    }
    lex
}

/// Greedy longest-match, left to right. Matched spans are joined with `_`.
pub fn apply_phrases(tokens: &[Token], lexicon: &PhraseLexicon) -> Vec<Token> {
    if lexicon.is_empty() {
        return tokens.to_vec();
    }
    let words: Vec<&str> = tokens.iter().map(Token::as_str).collect();
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let longest = lexicon.max_phrase_len().min(tokens.len() - i);
        let matched = (2..=longest).rev().find(|&len| lexicon.contains(&words[i..i + len]));
        match matched {
            Some(len) => {
                let joined = words[i..i + len].join(&PHRASE_JOINER.to_string());
                out.push(Token(joined));
                i += len;
            }
            None => {
                out.push(tokens[i].clone());
                i += 1;
            }
        }
    }
    out
}

/// Which substrings [`char_ngrams`] extracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NgramSpec {
    n_min: usize,
    n_max: usize,
    add_boundary_markers: bool,
}

impl NgramSpec {
    pub fn new(n_min: usize, n_max: usize, add_boundary_markers: bool) -> Result<Self> {
        if n_min == 0 || n_min > n_max {
            return Err(Error::Config(format!(
                "invalid n-gram range {n_min}..={n_max}: need 1 <= n_min <= n_max"
            )));
        }
        Ok(NgramSpec {
            n_min,
            n_max,
            add_boundary_markers,
        })
    }

    /// Plain 1..=5 grams, as used by the token-based string similarities.
    pub fn string_similarity() -> Self {
        NgramSpec {
            n_min: 1,
            n_max: 5,
            add_boundary_markers: false,
        }
    }

    /// Marked 2..=4 grams, the embedding model default.
    pub fn embedding_default() -> Self {
        NgramSpec {
            n_min: 2,
            n_max: 4,
            add_boundary_markers: true,
        }
    }

    pub fn n_min(&self) -> usize {
        self.n_min
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn add_boundary_markers(&self) -> bool {
        self.add_boundary_markers
    }
}

/// All contiguous character substrings of lengths `n_min..=n_max` (with
/// repetition). A token shorter than `n_min` yields itself as the only gram.
pub fn char_ngrams(token: &str, spec: NgramSpec) -> Vec<String> {
    let mut chars: Vec<char> = Vec::with_capacity(token.len() + 2);
    if spec.add_boundary_markers {
        chars.push(BOW);
    }
    chars.extend(token.chars());
    if spec.add_boundary_markers {
        chars.push(EOW);
    }
    let len = chars.len();
    if len == 0 {
        return Vec::new();
    }
    if len < spec.n_min {
        return vec![chars.into_iter().collect()];
    }
    let mut out = Vec::new();
    for n in spec.n_min..=spec.n_max.min(len) {
        for start in 0..=len - n {
            out.push(chars[start..start + n].iter().collect());
        }
    }
    out
}
