// Scores a few surface forms against canonical forms with every string
// similarity and prints the rankings.

use std::error::Error;

use attrnorm::strsim::{rank_canonicals, similarity, Algorithm};

fn main() -> Result<(), Box<dyn Error>> {
    let pairs = [("kitten", "sitting"), ("martha", "marhta"), ("wikimedia", "wikimania")];
    for (a, b) in pairs {
        println!("{a} / {b}");
        for alg in Algorithm::ALL {
            println!("  {:<20} {:.4}", alg.name(), similarity(alg, a, b));
        }
    }

    let canonicals = ["windows 10", "windows 8", "mac os", "linux"];
    for surface in ["win 10 pro", "macos", "ubuntu linux"] {
        let ranking = rank_canonicals(Algorithm::NgramCosine, surface, &canonicals)?;
        let (best, score) = &ranking[0];
        println!("{surface:>14} -> {best} ({score:.3})");
    }
    Ok(())
}
