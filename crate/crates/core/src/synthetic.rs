//! Synthetic attribute corpora with known ground truth.
//!
//! Each attribute lives in its own product category and has a handful of
//! canonical forms. Every canonical has two kinds of surface forms:
//! *typos* (one character edit away) and *synonyms* (no character in common
//! with the canonical, so only co-occurrence can link them). Product titles
//! mention the canonical form, never the surface form, which is what the
//! triplet objective has to exploit. Junk values appear with titles that
//! mention no canonical and are labeled OTHER.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CanonicalRegistry, Label, LabeledExample, RawRecord};
use crate::strsim::levenshtein_distance;

const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz";

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub attributes: usize,
    pub canonicals_per_attribute: usize,
    pub typos_per_canonical: usize,
    pub synonyms_per_canonical: usize,
    pub junk_per_attribute: usize,
    pub records: usize,
    /// Share of records whose value is a junk value.
    pub junk_rate: f64,
    /// Share of non-junk records whose value is the canonical form itself.
    pub canonical_value_rate: f64,
    pub fillers_per_category: usize,
    pub shared_fillers: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    /// 5 attributes × 4 canonicals × 10 surface forms, 20,000 records.
    fn default() -> Self {
        SyntheticConfig {
            attributes: 5,
            canonicals_per_attribute: 4,
            typos_per_canonical: 5,
            synonyms_per_canonical: 5,
            junk_per_attribute: 10,
            records: 20_000,
            junk_rate: 0.15,
            canonical_value_rate: 0.2,
            fillers_per_category: 30,
            shared_fillers: 15,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfaceKind {
    /// One edit away from the canonical.
    Typo,
    /// Shares no character with the canonical.
    Synonym,
    /// Maps to no canonical.
    Junk,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub registry: CanonicalRegistry,
    pub records: Vec<RawRecord>,
    pub labeled: Vec<LabeledExample>,
    /// Parallel to `labeled`.
    pub kinds: Vec<SurfaceKind>,
}

struct Attribute {
    name: String,
    category: String,
    canonicals: Vec<String>,
    /// Per canonical: (surface, kind).
    surfaces: Vec<Vec<(String, SurfaceKind)>>,
    junk: Vec<String>,
    fillers: Vec<String>,
}

struct WordSource {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl WordSource {
    fn fresh_from(&mut self, letters: &[u8], len: std::ops::RangeInclusive<usize>) -> String {
        loop {
            let n = self.rng.gen_range(len.clone());
            let w: String = (0..n).map(|_| *letters.choose(&mut self.rng).unwrap() as char).collect();
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn fresh(&mut self, len: std::ops::RangeInclusive<usize>) -> String {
        self.fresh_from(ALPHABET, len)
    }

    /// A single-edit variant of `word` that is not yet in use.
    fn typo(&mut self, word: &str) -> String {
        let chars: Vec<char> = word.chars().collect();
        loop {
            let mut c = chars.clone();
            let pos = self.rng.gen_range(0..c.len());
            if c[pos] == ' ' {
                continue;
            }
            let letter = *ALPHABET.choose(&mut self.rng).unwrap() as char;
            match self.rng.gen_range(0..3) {
                0 => c[pos] = letter,
                1 if c.len() > 4 => {
                    c.remove(pos);
                }
                1 => continue,
                _ => c.insert(pos, letter),
            }
            let w: String = c.into_iter().collect();
            if w.starts_with(' ') || w.ends_with(' ') || w.contains("  ") {
                continue;
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

pub fn generate(config: &SyntheticConfig) -> SyntheticDataset {
    let mut words = WordSource {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        used: HashSet::new(),
    };

    let shared: Vec<String> = (0..config.shared_fillers).map(|_| words.fresh(3..=6)).collect();
    let mut attributes = Vec::with_capacity(config.attributes);
    for a in 0..config.attributes {
        let mut canonicals: Vec<String> = Vec::new();
        while canonicals.len() < config.canonicals_per_attribute {
            // every fourth canonical is a two-word phrase
            let cand = if canonicals.len() % 4 == 3 {
                format!("{} {}", words.fresh(4..=5), words.fresh(3..=4))
            } else {
                words.fresh(6..=8)
            };
            let cc: Vec<char> = cand.chars().collect();
            let far_enough = canonicals.iter().all(|c| {
                let other: Vec<char> = c.chars().collect();
                levenshtein_distance(&cc, &other) >= 4
            });
            if far_enough {
                canonicals.push(cand);
            }
        }
        let mut surfaces = Vec::new();
        for canonical in &canonicals {
            let mut forms = Vec::new();
            for _ in 0..config.typos_per_canonical {
                forms.push((words.typo(canonical), SurfaceKind::Typo));
            }
            let banned: HashSet<u8> = canonical.bytes().collect();
            let allowed: Vec<u8> = ALPHABET.iter().copied().filter(|b| !banned.contains(b)).collect();
            for s in 0..config.synonyms_per_canonical {
                let syn = if s % 5 == 4 {
                    format!("{} {}", words.fresh_from(&allowed, 3..=5), words.fresh_from(&allowed, 3..=4))
                } else {
                    words.fresh_from(&allowed, 4..=7)
                };
                forms.push((syn, SurfaceKind::Synonym));
            }
            surfaces.push(forms);
        }
        let junk = (0..config.junk_per_attribute).map(|_| words.fresh(4..=7)).collect();
        let fillers = (0..config.fillers_per_category).map(|_| words.fresh(3..=7)).collect();
        attributes.push(Attribute {
            name: format!("attr{a}"),
            category: format!("category{a}"),
            canonicals,
            surfaces,
            junk,
            fillers,
        });
    }

    let mut rng = words.rng;
    let mut records = Vec::with_capacity(config.records);
    for r in 0..config.records {
        let attr = &attributes[r % attributes.len()];
        let mut title: Vec<String> = (0..rng.gen_range(3..=6))
            .map(|_| {
                if rng.gen_bool(0.3) {
                    shared.choose(&mut rng).unwrap().clone()
                } else {
                    attr.fillers.choose(&mut rng).unwrap().clone()
                }
            })
            .collect();
        let value = if rng.gen_bool(config.junk_rate) {
            attr.junk.choose(&mut rng).unwrap().clone()
        } else {
            let c = rng.gen_range(0..attr.canonicals.len());
            let pos = rng.gen_range(0..=title.len());
            title.insert(pos, attr.canonicals[c].clone());
            if rng.gen_bool(config.canonical_value_rate) {
                attr.canonicals[c].clone()
            } else {
                attr.surfaces[c].choose(&mut rng).unwrap().0.clone()
            }
        };
        let value = if rng.gen_bool(0.2) { value.to_uppercase() } else { value };
        records.push(RawRecord {
            attribute: attr.name.clone(),
            category: attr.category.clone(),
            title: title.join(" "),
            value,
        });
    }

    let mut registry = CanonicalRegistry::new();
    let mut labeled = Vec::new();
    let mut kinds = Vec::new();
    for attr in &attributes {
        registry
            .insert(attr.name.clone(), attr.canonicals.iter().cloned())
            .expect("generated canonicals are distinct");
        for (c, forms) in attr.canonicals.iter().zip(&attr.surfaces) {
            for (surface, kind) in forms {
                labeled.push(LabeledExample::new(&attr.name, surface, Label::Canonical(c.clone())));
                kinds.push(*kind);
            }
        }
        for j in &attr.junk {
            labeled.push(LabeledExample::new(&attr.name, j, Label::Other));
            kinds.push(SurfaceKind::Junk);
        }
    }

    SyntheticDataset {
        registry,
        records,
        labeled,
        kinds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_invariants() {
        let cfg = SyntheticConfig {
            records: 500,
            ..Default::default()
        };
        let ds = generate(&cfg);
        assert_eq!(ds.records.len(), 500);
        assert_eq!(ds.registry.len(), 5);
        assert_eq!(ds.labeled.len(), 5 * (4 * 10 + 10));
        assert_eq!(ds.kinds.len(), ds.labeled.len());
        ds.registry.validate_labels(&ds.labeled).unwrap();
        for (e, k) in ds.labeled.iter().zip(&ds.kinds) {
            match (k, &e.gold) {
                (SurfaceKind::Synonym, Label::Canonical(c)) => {
                    assert!(!e.surface.chars().any(|ch| ch != ' ' && c.contains(ch)), "{} vs {c}", e.surface);
                }
                (SurfaceKind::Typo, Label::Canonical(c)) => {
                    let a: Vec<char> = e.surface.chars().collect();
                    let b: Vec<char> = c.chars().collect();
                    assert_eq!(levenshtein_distance(&a, &b), 1, "{} vs {c}", e.surface);
                }
                (SurfaceKind::Junk, Label::Other) => {}
                other => panic!("inconsistent {other:?}"),
            }
        }
    }

    #[test]
    fn deterministic() {
        let cfg = SyntheticConfig {
            records: 200,
            ..Default::default()
        };
        assert_eq!(generate(&cfg).records, generate(&cfg).records);
    }
}
