// Canonicalizes raw values, learns multi-word phrases from them, and shows
// the subword units a token is built from.

use std::error::Error;

use attrnorm::text::{apply_phrases, build_phrase_lexicon, canonicalize, char_ngrams, join_tokens, NgramSpec};

fn main() -> Result<(), Box<dyn Error>> {
    let values = ["Back Cover", "back cover", "Screen Guard", "\"Flip\" Cover!"];
    let tokenized: Vec<_> = values.iter().map(|v| canonicalize(v)).collect();
    let lexicon = build_phrase_lexicon(&tokenized);
    let phrases: Vec<String> = lexicon.iter().map(|p| p.join(" ")).collect();
    println!("phrases: {phrases:?}");

    let title = canonicalize("Premium back cover, with screen guard (pack of 2)");
    let merged = apply_phrases(&title, &lexicon);
    println!("tokens:  {}", join_tokens(&title));
    println!("merged:  {}", join_tokens(&merged));

    let spec = NgramSpec::embedding_default();
    println!("n-grams of `cover`: {:?}", char_ngrams("cover", spec));
    println!("n-grams of `5mp` (1-3, no markers): {:?}", char_ngrams("5mp", NgramSpec::new(1, 3, false)?));
    Ok(())
}
