//! Library-level pipeline checks on generated corpora.

use attrnorm::corpus::{generate_triplets, ingest_raw, CanonicalRegistry, RawRecord};
use attrnorm::model::{train, TrainConfig};
use attrnorm::norm::{score_all, Scorer};
use attrnorm::synthetic::{generate, SyntheticConfig};
use attrnorm::text::LexiconOptions;

#[test]
fn separable_corpus_loss_decreases() {
    let data = generate(&SyntheticConfig {
        attributes: 3,
        records: 4000,
        ..Default::default()
    });
    let ingested = ingest_raw(&data.records, LexiconOptions::default());
    let (triplets, _) = generate_triplets(&ingested.records, 10, 0, 1);
    let config = TrainConfig {
        dimension: 32,
        ..Default::default()
    };
    let mut model = config.initial_model(&triplets);
    let report = train(&mut model, &triplets, &config).unwrap();
    let l = &report.epoch_losses;
    assert!(l[0] > l[1] && l[1] > l[2], "{l:?}");
}

/// Titles pair `720p` values with `hd` mentions and `2160p` values with
/// `uhd` mentions; after training `720p` should sit closest to `hd`.
#[test]
fn co_occurrence_links_value_to_canonical() {
    let fillers = ["smart", "led", "tv", "inch", "panel", "slim", "black", "wall", "mount", "remote"];
    let mut raw = Vec::new();
    for i in 0..600 {
        let (value, mention) = match i % 3 {
            0 => ("720p", "hd"),
            1 => ("2160p", "uhd"),
            _ => ("1080p", "fhd"),
        };
        let title = format!(
            "{} {} {mention} {}",
            fillers[i % fillers.len()],
            fillers[(i / 3) % fillers.len()],
            fillers[(i / 7) % fillers.len()]
        );
        raw.push(RawRecord {
            attribute: "resolution".into(),
            category: "tv".into(),
            title,
            value: value.into(),
        });
    }
    let ingested = ingest_raw(&raw, LexiconOptions::default());
    let (triplets, _) = generate_triplets(&ingested.records, 10, 0, 1);
    let config = TrainConfig {
        dimension: 32,
        ..Default::default()
    };
    let mut model = config.initial_model(&triplets);
    train(&mut model, &triplets, &config).unwrap();

    let mut registry = CanonicalRegistry::new();
    registry.insert("resolution", ["uhd", "hd", "fhd"]).unwrap();
    let scorer = Scorer::embedding(model, ingested.lexicon);
    let ranking = score_all(&scorer, "720p", "resolution", &registry).unwrap();
    assert_eq!(ranking[0].0, "hd", "{ranking:?}");
}
