//! Product-record ingestion, labeled data, and self-supervised triplet
//! generation with same-category negatives.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{apply_phrases, build_phrase_lexicon_with, canonicalize, join_tokens, LexiconOptions, PhraseLexicon, Token};

/// Gold label spelling for the catch-all class in labeled files.
pub const OTHER_LABEL: &str = "__OTHER__";

/// Default number of negative draws before a record is given up on.
pub const DEFAULT_MAX_RETRIES: usize = 10;

/// One line of the corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub attribute: String,
    pub category: String,
    pub title: String,
    pub value: String,
}

/// A record after canonicalization and phrase merging.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeRecord {
    pub attribute: String,
    pub category: String,
    pub title: Vec<Token>,
    pub value: Vec<Token>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub read: usize,
    pub accepted: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub records: Vec<AttributeRecord>,
    pub lexicon: PhraseLexicon,
    pub report: IngestReport,
}

/// Parses line-delimited JSON records. Blank lines are ignored; a line that
/// is not a valid record object is a hard error.
pub fn read_raw_records<R: BufRead>(r: R) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RawRecord = serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_raw_records<W: Write>(mut w: W, records: &[RawRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Canonicalizes and phrase-merges each record, skipping any with an empty
/// field after canonicalization.
pub fn ingest_with_lexicon(raw: &[RawRecord], lexicon: &PhraseLexicon) -> (Vec<AttributeRecord>, IngestReport) {
    let mut report = IngestReport::default();
    let mut records = Vec::with_capacity(raw.len());
    for r in raw {
        report.read += 1;
        let attribute = r.attribute.trim();
        let category = r.category.trim();
        let title = canonicalize(&r.title);
        let value = canonicalize(&r.value);
        if attribute.is_empty() || category.is_empty() || title.is_empty() || value.is_empty() {
            report.skipped += 1;
            continue;
        }
        records.push(AttributeRecord {
            attribute: attribute.to_owned(),
            category: category.to_owned(),
            title: apply_phrases(&title, lexicon),
            value: apply_phrases(&value, lexicon),
        });
        report.accepted += 1;
    }
    (records, report)
}

/// Reads a corpus, builds the phrase lexicon from its attribute values, and
/// applies it to every title and value.
pub fn ingest<R: BufRead>(r: R, opts: LexiconOptions) -> Result<Ingested> {
    let raw = read_raw_records(r)?;
    Ok(ingest_raw(&raw, opts))
}

pub fn ingest_raw(raw: &[RawRecord], opts: LexiconOptions) -> Ingested {
    let values: Vec<Vec<Token>> = raw.iter().map(|r| canonicalize(&r.value)).collect();
    let lexicon = build_phrase_lexicon_with(&values, opts);
    let (records, report) = ingest_with_lexicon(raw, &lexicon);
    Ingested {
        records,
        lexicon,
        report,
    }
}

/// Anchor value, its own title, and a screened same-category title.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triplet {
    pub q: Vec<Token>,
    pub a_pos: Vec<Token>,
    pub a_neg: Vec<Token>,
}

impl Triplet {
    /// True when some anchor token appears in the negative title.
    pub fn violates_screening(&self) -> bool {
        mentions_any(&self.a_neg, &self.q)
    }

    pub fn to_tsv_line(&self) -> String {
        format!("{}\t{}\t{}", join_tokens(&self.q), join_tokens(&self.a_pos), join_tokens(&self.a_neg))
    }
}

fn mentions_any(title: &[Token], q: &[Token]) -> bool {
    title.iter().any(|t| q.contains(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    /// The category holds no other record.
    EmptyPool,
    /// Every draw mentioned the anchor.
    Screened { draws: usize },
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::EmptyPool => f.write_str("no other record in category"),
            Rejection::Screened { draws } => write!(f, "all {draws} candidate negatives mention the anchor"),
        }
    }
}

/// Draws titles uniformly from one category, never returning the excluded member.
pub struct CategorySampler<'a> {
    records: &'a [AttributeRecord],
    members: &'a [usize],
    excluded: Option<usize>,
}

impl<'a> CategorySampler<'a> {
    /// `members` are indices into `records`; `excluded` is a position in `members`.
    pub fn new(records: &'a [AttributeRecord], members: &'a [usize], excluded: Option<usize>) -> Self {
        CategorySampler {
            records,
            members,
            excluded,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len() - usize::from(self.excluded.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&'a [Token]> {
        if self.is_empty() {
            return None;
        }
        let mut pos = rng.gen_range(0..self.len());
        if let Some(ex) = self.excluded {
            if pos >= ex {
                pos += 1;
            }
        }
        Some(&self.records[self.members[pos]].title)
    }
}

/// Draws up to `max_retries` negatives and keeps the first that does not
/// mention any anchor token.
pub fn generate_triplet<R: Rng + ?Sized>(
    record: &AttributeRecord,
    sampler: &CategorySampler<'_>,
    max_retries: usize,
    rng: &mut R,
) -> Result<Triplet, Rejection> {
    if sampler.is_empty() {
        return Err(Rejection::EmptyPool);
    }
    for _ in 0..max_retries {
        let Some(candidate) = sampler.draw(rng) else {
            return Err(Rejection::EmptyPool);
        };
        if !mentions_any(candidate, &record.value) {
            return Ok(Triplet {
                q: record.value.clone(),
                a_pos: record.title.clone(),
                a_neg: candidate.to_vec(),
            });
        }
    }
    Err(Rejection::Screened { draws: max_retries })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GenerationReport {
    pub attempted: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub rejected_empty_pool: usize,
    pub rejected_screened: usize,
}

/// One triplet attempt per record, in input order. Each category uses its
/// own generator seeded from `(seed, category)`, so sharding across `jobs`
/// workers does not change the output.
pub fn generate_triplets(
    records: &[AttributeRecord],
    max_retries: usize,
    seed: u64,
    jobs: usize,
) -> (Vec<Triplet>, GenerationReport) {
    let mut by_category: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_category.entry(r.category.as_str()).or_default().push(i);
    }
    let shards: Vec<(&str, Vec<usize>)> = by_category.into_iter().collect();

    let run_shard = |(category, members): &(&str, Vec<usize>)| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, category));
        members
            .iter()
            .enumerate()
            .map(|(pos, &idx)| {
                let sampler = CategorySampler::new(records, members, Some(pos));
                (idx, generate_triplet(&records[idx], &sampler, max_retries, &mut rng))
            })
            .collect::<Vec<_>>()
    };

    let per_shard: Vec<Vec<(usize, Result<Triplet, Rejection>)>> = if jobs > 1 {
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(|| shards.par_iter().map(run_shard).collect()),
            Err(_) => shards.iter().map(run_shard).collect(),
        }
    } else {
        shards.iter().map(run_shard).collect()
    };

    let mut outcomes: Vec<(usize, Result<Triplet, Rejection>)> = per_shard.into_iter().flatten().collect();
    outcomes.sort_by_key(|(idx, _)| *idx);

    let mut report = GenerationReport::default();
    let mut triplets = Vec::new();
    for (_, outcome) in outcomes {
        report.attempted += 1;
        match outcome {
            Ok(t) => {
                report.accepted += 1;
                triplets.push(t);
            }
            Err(rej) => {
                report.rejected += 1;
                match rej {
                    Rejection::EmptyPool => report.rejected_empty_pool += 1,
                    Rejection::Screened { .. } => report.rejected_screened += 1,
                }
            }
        }
    }
    (triplets, report)
}

/// Stable per-key seed: FNV-1a over the key, mixed with the global seed.
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(h ^ splitmix64(seed))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn write_triplets<W: Write>(mut w: W, triplets: &[Triplet]) -> Result<()> {
    for t in triplets {
        writeln!(w, "{}", t.to_tsv_line())?;
    }
    Ok(())
}

/// Reads the triplet TSV. Lines starting with `#` are comments.
pub fn read_triplets<R: BufRead>(r: R) -> Result<Vec<Triplet>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(i + 1, format!("expected 3 tab-separated columns, found {}", cols.len())));
        }
        let leg = |s: &str, name: &str| -> Result<Vec<Token>> {
            let tokens: Vec<Token> = s.split(' ').filter(|w| !w.is_empty()).filter_map(Token::new).collect();
            if tokens.is_empty() {
                Err(Error::parse(i + 1, format!("empty {name}")))
            } else {
                Ok(tokens)
            }
        };
        out.push(Triplet {
            q: leg(cols[0], "q")?,
            a_pos: leg(cols[1], "a_pos")?,
            a_neg: leg(cols[2], "a_neg")?,
        });
    }
    Ok(out)
}

/// A gold label: a canonical form or the catch-all class.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Label {
    Other,
    Canonical(String),
}

impl Label {
    pub fn parse(s: &str) -> Label {
        if s == OTHER_LABEL {
            Label::Other
        } else {
            Label::Canonical(s.to_owned())
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Label::Other => OTHER_LABEL,
            Label::Canonical(c) => c,
        }
    }

    pub fn is_other(&self) -> bool {
        matches!(self, Label::Other)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An attribute value to be normalized. `line` is the 1-based source line
/// (0 when built in memory).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceForm {
    pub attribute: String,
    pub surface: String,
    pub line: usize,
}

impl SurfaceForm {
    pub fn new(attribute: impl Into<String>, surface: impl Into<String>) -> Self {
        SurfaceForm {
            attribute: attribute.into(),
            surface: surface.into(),
            line: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub attribute: String,
    pub surface: String,
    pub gold: Label,
    pub line: usize,
}

impl LabeledExample {
    pub fn new(attribute: impl Into<String>, surface: impl Into<String>, gold: Label) -> Self {
        LabeledExample {
            attribute: attribute.into(),
            surface: surface.into(),
            gold,
            line: 0,
        }
    }

    pub fn surface_form(&self) -> SurfaceForm {
        SurfaceForm {
            attribute: self.attribute.clone(),
            surface: self.surface.clone(),
            line: self.line,
        }
    }
}

fn is_header(cols: &[&str]) -> bool {
    cols.first() == Some(&"attribute") && cols.get(1) == Some(&"surface")
}

/// Reads `attribute<TAB>surface<TAB>gold`. An optional header row and `#`
/// comments are skipped.
pub fn read_labeled<R: BufRead>(r: R) -> Result<Vec<LabeledExample>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if is_header(&cols) {
            continue;
        }
        if cols.len() != 3 {
            return Err(Error::parse(i + 1, format!("expected 3 tab-separated columns, found {}", cols.len())));
        }
        if cols[0].is_empty() || cols[2].is_empty() {
            return Err(Error::parse(i + 1, "empty attribute or gold label"));
        }
        out.push(LabeledExample {
            attribute: cols[0].to_owned(),
            surface: cols[1].to_owned(),
            gold: Label::parse(cols[2]),
            line: i + 1,
        });
    }
    Ok(out)
}

pub fn write_labeled<W: Write>(mut w: W, examples: &[LabeledExample]) -> Result<()> {
    for e in examples {
        writeln!(w, "{}\t{}\t{}", e.attribute, e.surface, e.gold)?;
    }
    Ok(())
}

/// Reads `attribute<TAB>surface`, ignoring any further columns (so a labeled
/// file works as normalization input).
pub fn read_surface_forms<R: BufRead>(r: R) -> Result<Vec<SurfaceForm>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if is_header(&cols) {
            continue;
        }
        if cols.len() < 2 || cols[0].is_empty() {
            return Err(Error::parse(i + 1, "expected at least `attribute<TAB>surface`"));
        }
        out.push(SurfaceForm {
            attribute: cols[0].to_owned(),
            surface: cols[1].to_owned(),
            line: i + 1,
        });
    }
    Ok(out)
}

/// Attribute → ordered canonical forms. The catch-all class is implicit.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CanonicalRegistry {
    entries: Vec<(String, Vec<String>)>,
    index: HashMap<String, usize>,
}

impl CanonicalRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert<S: Into<String>>(&mut self, attribute: impl Into<String>, canonicals: impl IntoIterator<Item = S>) -> Result<()> {
        let attribute = attribute.into();
        let canonicals: Vec<String> = canonicals.into_iter().map(Into::into).collect();
        if canonicals.is_empty() {
            return Err(Error::Config(format!("attribute `{attribute}` has no canonical forms")));
        }
        let mut seen = HashSet::new();
        for c in &canonicals {
            if c == OTHER_LABEL {
                return Err(Error::Config(format!("`{OTHER_LABEL}` cannot be a canonical form")));
            }
            if c.is_empty() {
                return Err(Error::Config(format!("attribute `{attribute}` has an empty canonical form")));
            }
            if !seen.insert(c.as_str()) {
                return Err(Error::Config(format!("duplicate canonical `{c}` for attribute `{attribute}`")));
            }
        }
        if self.index.contains_key(&attribute) {
            return Err(Error::Config(format!("attribute `{attribute}` listed twice")));
        }
        self.index.insert(attribute.clone(), self.entries.len());
        self.entries.push((attribute, canonicals));
        Ok(())
    }

    pub fn get(&self, attribute: &str) -> Option<&[String]> {
        self.index.get(attribute).map(|&i| self.entries[i].1.as_slice())
    }

    pub fn attributes(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(a, _)| a.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(a, c)| (a.as_str(), c.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks that every gold label is OTHER or listed for its attribute.
    pub fn validate_labels(&self, examples: &[LabeledExample]) -> Result<()> {
        for e in examples {
            let canonicals = self.get(&e.attribute).ok_or_else(|| Error::UnknownAttribute {
                attribute: e.attribute.clone(),
                line: Some(e.line),
            })?;
            if let Label::Canonical(c) = &e.gold {
                if !canonicals.contains(c) {
                    return Err(Error::parse(
                        e.line,
                        format!("gold `{c}` is not a canonical form of `{}`", e.attribute),
                    ));
                }
            }
        }
        Ok(())
    }

    /// One line per attribute: `attribute<TAB>c1|c2|...`.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut reg = CanonicalRegistry::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (attr, list) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(i + 1, "expected `attribute<TAB>canonical1|canonical2|...`"))?;
            reg.insert(attr, list.split('|'))
                .map_err(|e| Error::parse(i + 1, e.to_string()))?;
        }
        Ok(reg)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for (attr, canonicals) in &self.entries {
            writeln!(w, "{attr}\t{}", canonicals.join("|"))?;
        }
        Ok(())
    }
}

/// Stratified split: each attribute contributes `round(n * dev_fraction)`
/// examples to dev (none when it has a single example). Both halves keep
/// the input order.
pub fn split_dev_test(
    examples: &[LabeledExample],
    dev_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>)> {
    if !(dev_fraction > 0.0 && dev_fraction < 1.0) {
        return Err(Error::Config(format!("dev fraction must lie in (0, 1), got {dev_fraction}")));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in examples.iter().enumerate() {
        groups.entry(e.attribute.as_str()).or_default().push(i);
    }
    let mut in_dev = vec![false; examples.len()];
    for (attr, mut idx) in groups {
        let n = idx.len();
        let n_dev = if n <= 1 {
            0
        } else {
            ((n as f64 * dev_fraction).round() as usize).min(n - 1)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, attr));
        idx.shuffle(&mut rng);
        for &i in &idx[..n_dev] {
            in_dev[i] = true;
        }
    }
    let (dev, test): (Vec<_>, Vec<_>) = examples.iter().cloned().zip(in_dev).partition(|(_, d)| *d);
    Ok((dev.into_iter().map(|(e, _)| e).collect(), test.into_iter().map(|(e, _)| e).collect()))
}
