// Trains a small subword embedding model on a generated corpus and shows
// that a synonym sharing no letters with its canonical form ends up close
// to it.

use std::error::Error;

use attrnorm::corpus::{generate_triplets, ingest_raw};
use attrnorm::model::{cosine, train, EmbeddingModel, TrainConfig};
use attrnorm::synthetic::{generate, SurfaceKind, SyntheticConfig};
use attrnorm::text::{apply_phrases, canonicalize, LexiconOptions, PhraseLexicon};

fn embed(model: &EmbeddingModel, lexicon: &PhraseLexicon, text: &str) -> Result<Vec<f64>, attrnorm::Error> {
    model.embed_text(&apply_phrases(&canonicalize(text), lexicon))
}

fn main() -> Result<(), Box<dyn Error>> {
    let data = generate(&SyntheticConfig {
        attributes: 2,
        records: 3000,
        ..Default::default()
    });
    let ingested = ingest_raw(&data.records, LexiconOptions::default());
    let (triplets, _) = generate_triplets(&ingested.records, 10, 0, 1);

    let config = TrainConfig {
        dimension: 32,
        epochs: 3,
        ..Default::default()
    };
    let mut model = config.initial_model(&triplets);
    let report = train(&mut model, &triplets, &config)?;
    println!("{} n-grams, epoch losses {:?}", report.table_size, report.epoch_losses);

    let (example, _) = data
        .labeled
        .iter()
        .zip(&data.kinds)
        .find(|(_, k)| **k == SurfaceKind::Synonym)
        .expect("the generator emits synonyms");
    let canonicals = data.registry.get(&example.attribute).expect("registered attribute");
    let surface = embed(&model, &ingested.lexicon, &example.surface)?;
    println!("`{}` (gold `{}`):", example.surface, example.gold);
    for c in canonicals {
        let score = cosine(&surface, &embed(&model, &ingested.lexicon, c)?).unwrap_or(0.0);
        println!("  {c:<12} {score:+.3}");
    }

    let mut bytes = Vec::new();
    model.write_to(&mut bytes)?;
    let restored = EmbeddingModel::read_from(bytes.as_slice())?;
    assert_eq!(restored, model);
    println!("model file: {} bytes", bytes.len());
    Ok(())
}
