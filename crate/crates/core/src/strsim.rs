//! Nine fuzzy string similarities in three families, all normalized to
//! `[0, 1]` with identity scoring exactly 1.
//!
//! | family   | algorithms                                         |
//! |----------|----------------------------------------------------|
//! | edit     | hamming, levenshtein, jaro_winkler                 |
//! | sequence | lcs_subsequence, lcs_substring, ratcliff_obershelp |
//! | token    | jaccard, sorensen_dice, ngram_cosine               |
//!
//! Distances are turned into similarities as `1 - dist / max(|a|, |b|)`.
//! The token family works on character n-grams (1..=5 by default) of the
//! whole string, spaces included. Jaccard and Dice use set semantics, cosine
//! uses n-gram counts.
//!
//! Lengths are counted in `char`s, not bytes.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::text::{char_ngrams, NgramSpec};

const WINKLER_PREFIX_SCALE: f64 = 0.1;
const WINKLER_MAX_PREFIX: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Edit,
    Sequence,
    Token,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Hamming,
    Levenshtein,
    JaroWinkler,
    LcsSubsequence,
    LcsSubstring,
    RatcliffObershelp,
    Jaccard,
    SorensenDice,
    NgramCosine,
}

impl Algorithm {
    pub const ALL: [Algorithm; 9] = [
        Algorithm::Hamming,
        Algorithm::Levenshtein,
        Algorithm::JaroWinkler,
        Algorithm::LcsSubsequence,
        Algorithm::LcsSubstring,
        Algorithm::RatcliffObershelp,
        Algorithm::Jaccard,
        Algorithm::SorensenDice,
        Algorithm::NgramCosine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Hamming => "hamming",
            Algorithm::Levenshtein => "levenshtein",
            Algorithm::JaroWinkler => "jaro_winkler",
            Algorithm::LcsSubsequence => "lcs_subsequence",
            Algorithm::LcsSubstring => "lcs_substring",
            Algorithm::RatcliffObershelp => "ratcliff_obershelp",
            Algorithm::Jaccard => "jaccard",
            Algorithm::SorensenDice => "sorensen_dice",
            Algorithm::NgramCosine => "ngram_cosine",
        }
    }

    pub fn family(self) -> Family {
        match self {
            Algorithm::Hamming | Algorithm::Levenshtein | Algorithm::JaroWinkler => Family::Edit,
            Algorithm::LcsSubsequence | Algorithm::LcsSubstring | Algorithm::RatcliffObershelp => Family::Sequence,
            Algorithm::Jaccard | Algorithm::SorensenDice | Algorithm::NgramCosine => Family::Token,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    /// Accepts the canonical names plus `cosine` as shorthand for `ngram_cosine`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "cosine" {
            return Ok(Algorithm::NgramCosine);
        }
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::UnknownAlgorithm(s.to_owned()))
    }
}

/// An algorithm together with the n-gram settings used by the token family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StringSimilarity {
    algorithm: Algorithm,
    ngram_spec: NgramSpec,
}

impl StringSimilarity {
    pub fn new(algorithm: Algorithm) -> Self {
        StringSimilarity {
            algorithm,
            ngram_spec: NgramSpec::string_similarity(),
        }
    }

    pub fn with_ngram_spec(mut self, spec: NgramSpec) -> Self {
        self.ngram_spec = spec;
        self
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn ngram_spec(&self) -> NgramSpec {
        self.ngram_spec
    }

    pub fn similarity(&self, a: &str, b: &str) -> f64 {
        if a == b {
            return 1.0;
        }
        if a.is_empty() || b.is_empty() {
            return 0.0;
        }
        // Order the arguments so algorithms with internal tie-breaking
        // (Jaro matching, Ratcliff-Obershelp anchor choice) stay symmetric.
        let (a, b) = if (a.len(), a) <= (b.len(), b) { (a, b) } else { (b, a) };
        let ac: Vec<char> = a.chars().collect();
        let bc: Vec<char> = b.chars().collect();
        let longest = ac.len().max(bc.len()) as f64;
        let sim = match self.algorithm {
            Algorithm::Hamming => 1.0 - hamming_distance(&ac, &bc) as f64 / longest,
            Algorithm::Levenshtein => 1.0 - levenshtein_distance(&ac, &bc) as f64 / longest,
            Algorithm::JaroWinkler => jaro_winkler(&ac, &bc),
            Algorithm::LcsSubsequence => lcs_subsequence_len(&ac, &bc) as f64 / longest,
            Algorithm::LcsSubstring => lcs_substring_len(&ac, &bc) as f64 / longest,
            Algorithm::RatcliffObershelp => {
                2.0 * ratcliff_obershelp_matches(&ac, &bc) as f64 / (ac.len() + bc.len()) as f64
            }
            Algorithm::Jaccard | Algorithm::SorensenDice | Algorithm::NgramCosine => {
                let ga = ngram_counts(a, self.ngram_spec);
                let gb = ngram_counts(b, self.ngram_spec);
                match self.algorithm {
                    Algorithm::Jaccard => {
                        let inter = ga.keys().filter(|g| gb.contains_key(*g)).count();
                        let union = ga.len() + gb.len() - inter;
                        inter as f64 / union as f64
                    }
                    Algorithm::SorensenDice => {
                        let inter = ga.keys().filter(|g| gb.contains_key(*g)).count();
                        2.0 * inter as f64 / (ga.len() + gb.len()) as f64
                    }
                    _ => count_cosine(&ga, &gb),
                }
            }
        };
        sim.clamp(0.0, 1.0)
    }

    /// Scores every canonical and sorts descending. Ties keep list order.
    pub fn rank_canonicals<S: AsRef<str>>(&self, surface: &str, canonicals: &[S]) -> Result<Vec<(String, f64)>> {
        if canonicals.is_empty() {
            return Err(Error::EmptyCanonicals);
        }
        let mut ranked: Vec<(String, f64)> = canonicals
            .iter()
            .map(|c| (c.as_ref().to_owned(), self.similarity(surface, c.as_ref())))
            .collect();
        ranked.sort_by(|x, y| y.1.total_cmp(&x.1));
        Ok(ranked)
    }
}

impl From<Algorithm> for StringSimilarity {
    fn from(alg: Algorithm) -> Self {
        StringSimilarity::new(alg)
    }
}

/// `alg` with its default n-gram settings.
pub fn similarity(alg: Algorithm, a: &str, b: &str) -> f64 {
    StringSimilarity::new(alg).similarity(a, b)
}

pub fn rank_canonicals<S: AsRef<str>>(alg: Algorithm, surface: &str, canonicals: &[S]) -> Result<Vec<(String, f64)>> {
    StringSimilarity::new(alg).rank_canonicals(surface, canonicals)
}

/// Positional mismatches over the shorter length plus the length difference.
pub fn hamming_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mismatches = a.iter().zip(b).filter(|(x, y)| x != y).count();
    mismatches + a.len().abs_diff(b.len())
}

pub fn levenshtein_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn jaro<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut a_matched = vec![false; a.len()];
    let mut b_matched = vec![false; b.len()];
    let mut matches = 0usize;
    for (i, x) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_matched[j] && b[j] == *x {
                a_matched[i] = true;
                b_matched[j] = true;
                matches += 1;
                break;
            }
        }
    }
    if matches == 0 {
        return 0.0;
    }
    let a_seq = a.iter().zip(&a_matched).filter(|(_, &m)| m).map(|(x, _)| x);
    let b_seq = b.iter().zip(&b_matched).filter(|(_, &m)| m).map(|(y, _)| y);
    let half_transpositions = a_seq.zip(b_seq).filter(|(x, y)| x != y).count();
    let m = matches as f64;
    let t = (half_transpositions / 2) as f64;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

pub fn jaro_winkler<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    let j = jaro(a, b);
    let prefix = a
        .iter()
        .zip(b)
        .take(WINKLER_MAX_PREFIX)
        .take_while(|(x, y)| x == y)
        .count();
    j + prefix as f64 * WINKLER_PREFIX_SCALE * (1.0 - j)
}

pub fn lcs_subsequence_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Longest common substring as `(start_in_a, start_in_b, len)`; among
/// equally long candidates the smallest `start_in_a`, then `start_in_b`, wins.
pub fn longest_common_substring<T: PartialEq>(a: &[T], b: &[T]) -> (usize, usize, usize) {
    let mut best = (0, 0, 0);
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { 0 };
            let len = cur[j + 1];
            if len > 0 {
                let cand = (i + 1 - len, j + 1 - len, len);
                if len > best.2 || (len == best.2 && (cand.0, cand.1) < (best.0, best.1)) {
                    best = cand;
                }
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

pub fn lcs_substring_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    longest_common_substring(a, b).2
}

/// Total characters matched by recursive longest-common-substring anchoring.
pub fn ratcliff_obershelp_matches<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (i, j, len) = longest_common_substring(a, b);
    if len == 0 {
        return 0;
    }
    len + ratcliff_obershelp_matches(&a[..i], &b[..j]) + ratcliff_obershelp_matches(&a[i + len..], &b[j + len..])
}

fn ngram_counts(s: &str, spec: NgramSpec) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for g in char_ngrams(s, spec) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

fn count_cosine(a: &HashMap<String, usize>, b: &HashMap<String, usize>) -> f64 {
    let dot: usize = a.iter().filter_map(|(g, &x)| b.get(g).map(|&y| x * y)).sum();
    if dot == 0 {
        return 0.0;
    }
    let na: usize = a.values().map(|x| x * x).sum();
    let nb: usize = b.values().map(|x| x * x).sum();
    dot as f64 / ((na as f64).sqrt() * (nb as f64).sqrt())
}
