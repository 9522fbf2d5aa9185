// Builds training triplets from a small product corpus: the value is the
// anchor, its own title the positive, and a same-category title that does
// not mention the value the negative.

use std::error::Error;

use attrnorm::corpus::{generate_triplets, ingest_raw, write_triplets, RawRecord};
use attrnorm::text::{join_tokens, LexiconOptions};

fn record(category: &str, title: &str, value: &str) -> RawRecord {
    RawRecord {
        attribute: "display".into(),
        category: category.into(),
        title: title.into(),
        value: value.into(),
    }
}

fn main() -> Result<(), Box<dyn Error>> {
    let raw = vec![
        record("tv", "Acme 32 inch HD Ready LED TV", "720p"),
        record("tv", "Zenith 55 inch 4K UHD smart TV", "2160p"),
        record("tv", "Orbit 43 inch Full HD TV", "1080p"),
        record("tv", "Acme 40 inch full hd LED", "FHD"),
        record("monitor", "Vista 24 inch monitor", "1080p"),
    ];
    let ingested = ingest_raw(&raw, LexiconOptions::default());
    println!("{:?}", ingested.report);

    let (triplets, report) = generate_triplets(&ingested.records, 10, 42, 1);
    println!("{report:?}");
    for t in &triplets {
        println!("q={:<8} pos=[{}] neg=[{}]", join_tokens(&t.q), join_tokens(&t.a_pos), join_tokens(&t.a_neg));
        assert!(!t.violates_screening());
    }

    let mut tsv = Vec::new();
    write_triplets(&mut tsv, &triplets)?;
    print!("{}", String::from_utf8(tsv)?);
    Ok(())
}
