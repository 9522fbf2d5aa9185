// End-to-end run on a generated corpus: build triplets, train embeddings,
// select thresholds on a dev split and compare against string scorers and
// baselines on the test split, broken down by typo and synonym surfaces.
//
// Pass a record count to shrink the run, e.g. `-- 4000`.

use std::error::Error;
use std::time::Instant;

use attrnorm::corpus::{generate_triplets, ingest_raw, split_dev_test, Label, LabeledExample, SurfaceForm};
use attrnorm::eval::{accuracy_single, baseline_random, evaluate_labels, select_thresholds, Scored, DEFAULT_GRID_STEP};
use attrnorm::model::{train, TrainConfig};
use attrnorm::norm::{normalize_batch, Scorer, Thresholds};
use attrnorm::strsim::Algorithm;
use attrnorm::synthetic::{generate, SurfaceKind, SyntheticConfig};
use attrnorm::text::LexiconOptions;

fn main() -> Result<(), Box<dyn Error>> {
    let records = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20_000);
    let cfg = SyntheticConfig { records, ..Default::default() };
    let data = generate(&cfg);
    let start = Instant::now();

    let ingested = ingest_raw(&data.records, LexiconOptions::default());
    let (triplets, report) = generate_triplets(&ingested.records, 10, 1, 1);
    println!("triplets: {} accepted, {} rejected", report.accepted, report.rejected);

    let config = TrainConfig::default();
    let untrained = config.initial_model(&triplets);
    let mut model = untrained.clone();
    let train_report = train(&mut model, &triplets, &config)?;
    println!("epoch losses: {:?}", train_report.epoch_losses);
    println!("trained {} n-grams in {:.1?}", model.len(), start.elapsed());

    // Keep the kind of each example by tagging its position.
    let tagged: Vec<LabeledExample> =
        data.labeled.iter().enumerate().map(|(i, e)| LabeledExample { line: i, ..e.clone() }).collect();
    let (dev, test) = split_dev_test(&tagged, 0.2, 3)?;
    let gold = |set: &[LabeledExample]| set.iter().map(|e| e.gold.clone()).collect::<Vec<Label>>();
    let (dev_gold, test_gold) = (gold(&dev), gold(&test));

    let mut scorers = vec![
        Scorer::embedding(model, ingested.lexicon.clone()),
        Scorer::embedding(untrained, ingested.lexicon.clone()),
    ];
    scorers.extend(Algorithm::ALL.iter().map(|&a| Scorer::string(a)));

    println!("{:<22} {:>6} {:>8} {:>8} {:>8}", "scorer", "x1", "test", "typo", "synonym");
    for (i, scorer) in scorers.iter().enumerate() {
        let score = |set: &[LabeledExample]| -> Result<Vec<Scored>, attrnorm::Error> {
            let items: Vec<SurfaceForm> = set.iter().map(LabeledExample::surface_form).collect();
            let preds = normalize_batch(scorer, &items, &data.registry, Thresholds::single(scorer.range().0), 1)?;
            Ok(preds.iter().map(Scored::from).collect())
        };
        let selection = select_thresholds(&score(&dev)?, &dev_gold, scorer.range(), DEFAULT_GRID_STEP)?;
        let x1 = selection.single.x1.unwrap_or(scorer.range().0);
        let test_scores = score(&test)?;
        let overall = accuracy_single(&test_scores, &test_gold, x1)?;
        let subset = |kind: SurfaceKind| -> Result<f64, attrnorm::Error> {
            let idx: Vec<usize> = (0..test.len()).filter(|&k| data.kinds[test[k].line] == kind).collect();
            let s: Vec<Scored> = idx.iter().map(|&k| test_scores[k].clone()).collect();
            let g: Vec<Label> = idx.iter().map(|&k| test_gold[k].clone()).collect();
            Ok(accuracy_single(&s, &g, x1)?.accuracy.unwrap_or(0.0))
        };
        let name = match i {
            0 => "embedding".to_owned(),
            1 => "embedding (untrained)".to_owned(),
            _ => scorer.name(),
        };
        println!(
            "{name:<22} {x1:>6.2} {:>8.3} {:>8.3} {:>8.3}",
            overall.accuracy.unwrap_or(0.0),
            subset(SurfaceKind::Typo)?,
            subset(SurfaceKind::Synonym)?
        );
    }

    let random = baseline_random(&test, &data.registry, 5)?;
    println!("{:<22} {:>6} {:>8.3}", "random", "-", evaluate_labels(&random, &test_gold)?.accuracy.unwrap_or(0.0));
    Ok(())
}
