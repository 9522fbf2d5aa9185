//! Mapping a surface form to one of its attribute's canonical forms, to the
//! catch-all class, or (with two thresholds) to no decision at all.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::corpus::{CanonicalRegistry, SurfaceForm, OTHER_LABEL};
use crate::error::{Error, Result};
use crate::model::{cosine, EmbeddingModel};
use crate::strsim::{Algorithm, StringSimilarity};
use crate::text::{apply_phrases, canonical_string, canonicalize, PhraseLexicon};

/// Output spelling for abstentions.
pub const ABSTAIN_LABEL: &str = "__ABSTAIN__";

/// Something that scores a surface form against a canonical form.
#[derive(Debug, Clone)]
pub enum Scorer {
    /// A string similarity over the canonicalized strings; range `[0, 1]`.
    String(StringSimilarity),
    /// Cosine between composed embeddings of the canonicalized,
    /// phrase-merged texts; range `[-1, 1]`.
    Embedding {
        model: EmbeddingModel,
        lexicon: PhraseLexicon,
    },
}

impl Scorer {
    pub fn string(algorithm: Algorithm) -> Self {
        Scorer::String(StringSimilarity::new(algorithm))
    }

    pub fn embedding(model: EmbeddingModel, lexicon: PhraseLexicon) -> Self {
        Scorer::Embedding { model, lexicon }
    }

    /// Closed range of possible scores.
    pub fn range(&self) -> (f64, f64) {
        match self {
            Scorer::String(_) => (0.0, 1.0),
            Scorer::Embedding { .. } => (-1.0, 1.0),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Scorer::String(s) => s.algorithm().name().to_owned(),
            Scorer::Embedding { .. } => "embedding".to_owned(),
        }
    }

    fn embed(&self, text: &str) -> Option<Vec<f64>> {
        let Scorer::Embedding { model, lexicon } = self else {
            return None;
        };
        let tokens = apply_phrases(&canonicalize(text), lexicon);
        if tokens.is_empty() {
            return None;
        }
        model.embed_text(&tokens).ok()
    }

    /// Scores `surface` against each canonical, in registry order.
    pub fn scores<S: AsRef<str>>(&self, surface: &str, canonicals: &[S]) -> Vec<f64> {
        match self {
            Scorer::String(sim) => {
                let s = canonical_string(surface);
                canonicals
                    .iter()
                    .map(|c| sim.similarity(&s, &canonical_string(c.as_ref())))
                    .collect()
            }
            Scorer::Embedding { .. } => {
                let surface_vec = self.embed(surface);
                canonicals
                    .iter()
                    .map(|c| {
                        surface_vec
                            .as_deref()
                            .zip(self.embed(c.as_ref()))
                            .and_then(|(a, b)| cosine(a, &b))
                            .unwrap_or(0.0)
                    })
                    .collect()
            }
        }
    }
}

/// Decision thresholds: predict OTHER below `x1`; with `x2`, abstain in `[x1, x2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub x1: f64,
    pub x2: Option<f64>,
}

impl Thresholds {
    pub fn single(x1: f64) -> Self {
        Thresholds { x1, x2: None }
    }

    pub fn band(x1: f64, x2: f64) -> Self {
        Thresholds { x1, x2: Some(x2) }
    }

    /// Checks ordering and that both values lie in `range`.
    pub fn validate(&self, range: (f64, f64)) -> Result<()> {
        let inside = |x: f64| x >= range.0 && x <= range.1;
        if !inside(self.x1) {
            return Err(Error::Config(format!("x1 = {} outside scorer range {:?}", self.x1, range)));
        }
        if let Some(x2) = self.x2 {
            if !inside(x2) {
                return Err(Error::Config(format!("x2 = {x2} outside scorer range {range:?}")));
            }
            if x2 < self.x1 {
                return Err(Error::Config(format!("x2 = {x2} is below x1 = {}", self.x1)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Canonical { form: String, score: f64 },
    Other,
    Abstain,
}

impl Outcome {
    pub fn label(&self) -> &str {
        match self {
            Outcome::Canonical { form, .. } => form,
            Outcome::Other => OTHER_LABEL,
            Outcome::Abstain => ABSTAIN_LABEL,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub outcome: Outcome,
    pub top_score: f64,
    /// Every canonical with its score, best first.
    pub ranking: Vec<(String, f64)>,
}

impl Prediction {
    /// The highest-ranked canonical, regardless of thresholds.
    pub fn argmax(&self) -> &str {
        &self.ranking[0].0
    }
}

/// Scores every canonical of `attribute`, best first; ties keep registry order.
pub fn score_all(
    scorer: &Scorer,
    surface: &str,
    attribute: &str,
    registry: &CanonicalRegistry,
) -> Result<Vec<(String, f64)>> {
    let canonicals = registry.get(attribute).ok_or_else(|| Error::UnknownAttribute {
        attribute: attribute.to_owned(),
        line: None,
    })?;
    let scores = scorer.scores(surface, canonicals);
    let mut ranking: Vec<(String, f64)> = canonicals.iter().cloned().zip(scores).collect();
    ranking.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(ranking)
}

/// Applies the threshold rule to a ranking. Scores equal to a threshold
/// fall on the confident side.
pub fn decide(ranking: Vec<(String, f64)>, thresholds: Thresholds) -> Prediction {
    let (form, top) = ranking[0].clone();
    let outcome = if top < thresholds.x1 {
        Outcome::Other
    } else if thresholds.x2.is_some_and(|x2| top < x2) {
        Outcome::Abstain
    } else {
        Outcome::Canonical { form, score: top }
    };
    Prediction {
        outcome,
        top_score: top,
        ranking,
    }
}

pub fn normalize(
    scorer: &Scorer,
    surface: &str,
    attribute: &str,
    registry: &CanonicalRegistry,
    thresholds: Thresholds,
) -> Result<Prediction> {
    Ok(decide(score_all(scorer, surface, attribute, registry)?, thresholds))
}

/// Normalizes every item, preserving order. Fails on the first item whose
/// attribute is missing from the registry.
pub fn normalize_batch(
    scorer: &Scorer,
    items: &[SurfaceForm],
    registry: &CanonicalRegistry,
    thresholds: Thresholds,
    jobs: usize,
) -> Result<Vec<Prediction>> {
    if let Some(bad) = items.iter().find(|it| registry.get(&it.attribute).is_none()) {
        return Err(Error::UnknownAttribute {
            attribute: bad.attribute.clone(),
            line: Some(bad.line),
        });
    }
    let one = |it: &SurfaceForm| normalize(scorer, &it.surface, &it.attribute, registry, thresholds);
    if jobs > 1 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            return pool.install(|| items.par_iter().map(one).collect());
        }
    }
    items.iter().map(one).collect()
}

/// Writes `attribute<TAB>surface<TAB>prediction<TAB>top_score` rows.
pub fn write_predictions<W: Write>(mut w: W, items: &[SurfaceForm], predictions: &[Prediction]) -> Result<()> {
    if items.len() != predictions.len() {
        return Err(Error::LengthMismatch(predictions.len(), items.len()));
    }
    for (it, p) in items.iter().zip(predictions) {
        writeln!(w, "{}\t{}\t{}\t{:.6}", it.attribute, it.surface, p.outcome, p.top_score)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::NgramSpec;

    fn registry() -> CanonicalRegistry {
        let mut r = CanonicalRegistry::new();
        r.insert("color", ["blue", "red", "light green"]).unwrap();
        r
    }

    #[test]
    fn exact_match_ranks_first() {
        let s = Scorer::string(Algorithm::Levenshtein);
        let ranking = score_all(&s, "Red", "color", &registry()).unwrap();
        assert_eq!(ranking[0], ("red".to_owned(), 1.0));
        assert_eq!(ranking.len(), 3);
    }

    #[test]
    fn unknown_attribute() {
        let s = Scorer::string(Algorithm::Jaccard);
        assert!(matches!(
            score_all(&s, "x", "size", &registry()),
            Err(Error::UnknownAttribute { .. })
        ));
        let items = vec![SurfaceForm::new("color", "red"), SurfaceForm { line: 7, ..SurfaceForm::new("size", "xl") }];
        match normalize_batch(&s, &items, &registry(), Thresholds::single(0.0), 1) {
            Err(Error::UnknownAttribute { line, .. }) => assert_eq!(line, Some(7)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_embedding_scores_zero() {
        let model = EmbeddingModel::new_subword(4, NgramSpec::embedding_default());
        let s = Scorer::embedding(model, PhraseLexicon::new());
        let ranking = score_all(&s, "anything", "color", &registry()).unwrap();
        assert!(ranking.iter().all(|(_, x)| *x == 0.0));
        let names: Vec<&str> = ranking.iter().map(|(c, _)| c.as_str()).collect();
        assert_eq!(names, vec!["blue", "red", "light green"]);
    }

    #[test]
    fn threshold_rules() {
        let ranking = |top: f64| vec![("a".to_owned(), top), ("b".to_owned(), top / 2.0)];
        let p = decide(ranking(0.95), Thresholds::single(0.5));
        assert_eq!(p.outcome, Outcome::Canonical { form: "a".into(), score: 0.95 });
        assert_eq!(decide(ranking(0.2), Thresholds::single(0.5)).outcome, Outcome::Other);
        assert_eq!(decide(ranking(0.6), Thresholds::band(0.5, 0.8)).outcome, Outcome::Abstain);
        // boundary values sit on the confident side
        assert!(matches!(decide(ranking(0.5), Thresholds::single(0.5)).outcome, Outcome::Canonical { .. }));
        assert!(matches!(decide(ranking(0.8), Thresholds::band(0.5, 0.8)).outcome, Outcome::Canonical { .. }));
        assert_eq!(decide(ranking(0.5), Thresholds::band(0.5, 0.8)).outcome, Outcome::Abstain);
    }

    #[test]
    fn threshold_validation() {
        assert!(Thresholds::band(0.2, 0.8).validate((0.0, 1.0)).is_ok());
        assert!(Thresholds::band(0.8, 0.2).validate((0.0, 1.0)).is_err());
        assert!(Thresholds::single(-0.5).validate((0.0, 1.0)).is_err());
        assert!(Thresholds::single(-0.5).validate((-1.0, 1.0)).is_ok());
    }

    #[test]
    fn batch_is_pure_and_ordered() {
        let s = Scorer::string(Algorithm::NgramCosine);
        assert!(normalize_batch(&s, &[], &registry(), Thresholds::single(0.3), 1).unwrap().is_empty());
        let items = vec![
            SurfaceForm::new("color", "light blue"),
            SurfaceForm::new("color", "xyz"),
            SurfaceForm::new("color", "light blue"),
        ];
        let preds = normalize_batch(&s, &items, &registry(), Thresholds::single(0.3), 1).unwrap();
        assert_eq!(preds.len(), 3);
        assert_eq!(preds[0], preds[2]);
        assert_eq!(preds[1].outcome, Outcome::Other);
        assert_eq!(preds, normalize_batch(&s, &items, &registry(), Thresholds::single(0.3), 3).unwrap());

        let mut out = Vec::new();
        write_predictions(&mut out, &items, &preds).unwrap();
        let text = String::from_utf8(out).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("color\tlight blue\t"));
        assert_eq!(first.rsplit('\t').next().unwrap().split('.').nth(1).unwrap().len(), 6);
        assert!(text.lines().nth(1).unwrap().contains(OTHER_LABEL));
    }

    #[test]
    fn range_minimum_never_other() {
        let s = Scorer::string(Algorithm::Hamming);
        for surf in ["", "zzz", "blu"] {
            let p = normalize(&s, surf, "color", &registry(), Thresholds::single(0.0)).unwrap();
            assert!(matches!(p.outcome, Outcome::Canonical { .. }));
        }
    }
}
