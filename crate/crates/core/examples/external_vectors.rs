// Loads word vectors in the common `count dim` text format and uses them as
// a token-lookup scorer.

use std::error::Error;

use attrnorm::corpus::CanonicalRegistry;
use attrnorm::model::load_external_vectors;
use attrnorm::norm::{normalize, Scorer, Thresholds};
use attrnorm::text::PhraseLexicon;

const VECTORS: &str = "\
4 3
hd 1.0 0.1 0.0
720p 0.9 0.2 0.0
4k 0.0 1.0 0.1
uhd 0.1 0.9 0.2
";

fn main() -> Result<(), Box<dyn Error>> {
    let model = load_external_vectors(VECTORS.as_bytes())?;
    println!("{} vectors of dimension {}", model.len(), model.dim());

    let mut registry = CanonicalRegistry::new();
    registry.insert("resolution", ["hd", "uhd"])?;
    let scorer = Scorer::embedding(model, PhraseLexicon::new());
    for surface in ["720p", "4K", "8k"] {
        let p = normalize(&scorer, surface, "resolution", &registry, Thresholds::single(0.5))?;
        println!("{surface:>5} -> {} ({:+.3})", p.outcome, p.top_score);
    }
    Ok(())
}
