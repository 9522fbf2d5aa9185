// Normalizes a batch of surface forms with a string scorer, first with a
// single OTHER threshold and then with an abstention band.

use std::error::Error;

use attrnorm::corpus::{CanonicalRegistry, SurfaceForm};
use attrnorm::norm::{normalize_batch, write_predictions, Scorer, Thresholds};
use attrnorm::strsim::Algorithm;

fn main() -> Result<(), Box<dyn Error>> {
    let mut registry = CanonicalRegistry::new();
    registry.insert("operating_system", ["windows 10", "windows 8", "mac os", "android"])?;
    registry.insert("color", ["black", "white", "blue"])?;

    let items = vec![
        SurfaceForm::new("operating_system", "Win 10 Pro"),
        SurfaceForm::new("operating_system", "Android Oreo"),
        SurfaceForm::new("operating_system", "DOS"),
        SurfaceForm::new("color", "Jet Black"),
        SurfaceForm::new("color", "Blu"),
        SurfaceForm::new("color", "Multicolor"),
    ];
    let scorer = Scorer::string(Algorithm::NgramCosine);

    for thresholds in [Thresholds::single(0.3), Thresholds::band(0.3, 0.6)] {
        println!("{thresholds:?}");
        let predictions = normalize_batch(&scorer, &items, &registry, thresholds, 2)?;
        let mut out = Vec::new();
        write_predictions(&mut out, &items, &predictions)?;
        print!("{}", String::from_utf8(out)?);
    }
    Ok(())
}
