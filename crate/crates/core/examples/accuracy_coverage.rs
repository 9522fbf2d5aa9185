// Selects thresholds on a dev split and traces the accuracy–coverage
// trade-off on the test split.

use std::error::Error;

use attrnorm::corpus::{split_dev_test, Label, LabeledExample, SurfaceForm};
use attrnorm::eval::{
    accuracy_coverage, baseline_majority, baseline_random, evaluate_labels, select_thresholds, sweep_curve,
    write_curve_csv, Scored,
};
use attrnorm::norm::{normalize_batch, Scorer, Thresholds};
use attrnorm::strsim::Algorithm;
use attrnorm::synthetic::{generate, SyntheticConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let data = generate(&SyntheticConfig {
        records: 100,
        ..Default::default()
    });
    let (dev, test) = split_dev_test(&data.labeled, 0.3, 11)?;
    let scorer = Scorer::string(Algorithm::Levenshtein);
    let score = |set: &[LabeledExample]| -> Result<Vec<Scored>, attrnorm::Error> {
        let items: Vec<SurfaceForm> = set.iter().map(LabeledExample::surface_form).collect();
        let preds = normalize_batch(&scorer, &items, &data.registry, Thresholds::single(0.0), 1)?;
        Ok(preds.iter().map(Scored::from).collect())
    };
    let gold = |set: &[LabeledExample]| set.iter().map(|e| e.gold.clone()).collect::<Vec<Label>>();

    let selection = select_thresholds(&score(&dev)?, &gold(&dev), scorer.range(), 0.01)?;
    println!("dev single: {:?}", selection.single);
    let test_scores = score(&test)?;
    if let Some(band) = &selection.band {
        let (x1, x2) = (band.x1.unwrap(), band.x2.unwrap());
        println!("test band:  {:?}", accuracy_coverage(&test_scores, &gold(&test), x1, x2)?);
    }

    let random = baseline_random(&test, &data.registry, 1)?;
    let majority = baseline_majority(&dev, &test, &data.registry);
    println!("random:   {:?}", evaluate_labels(&random, &gold(&test))?.accuracy);
    println!("majority: {:?}", evaluate_labels(&majority, &gold(&test))?.accuracy);

    let curve = sweep_curve(&test_scores, &gold(&test), scorer.range(), 0.05)?;
    println!("{} curve points, frontier:", curve.points.len());
    let mut csv = Vec::new();
    write_curve_csv(&mut csv, &curve.frontier)?;
    print!("{}", String::from_utf8(csv)?);
    Ok(())
}
