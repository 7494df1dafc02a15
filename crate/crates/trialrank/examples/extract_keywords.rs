//! Reduce verbose admission notes to keyword queries with embedding
//! similarity and maximal marginal relevance.
//!
//! Run: `cargo run -p trialrank --example extract_keywords`

use std::path::Path;

use trialrank::keywords::{extract_keywords, HashedBowProvider, KeywordConfig};
use trialrank::pipeline::load_topics;
use trialrank::textproc::{remove_stopwords, tokenize, Stoplist};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let topics = load_topics(Path::new(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/fixtures/topics.tsv"
    )))?;
    let stoplist = Stoplist::default_english();
    // deterministic offline provider; swap in an HTTP provider for real
    // transformer embeddings
    let provider = HashedBowProvider::default();

    for lambda in [1.0, 0.5] {
        let config = KeywordConfig {
            lambda,
            ..KeywordConfig::default()
        };
        println!("=== lambda = {lambda} ===");
        for topic in &topics {
            let filtered = remove_stopwords(tokenize(&topic.qd_text), &stoplist);
            let terms = extract_keywords(&topic.qd_text, &stoplist, &provider, &config)?;
            println!(
                "topic {}: {} content tokens -> {} keywords",
                topic.query_id,
                filtered.len(),
                terms.len()
            );
            println!("  Qd: {}...", &topic.qd_text[..topic.qd_text.len().min(90)]);
            println!("  Qk: {}\n", terms.join(" "));
        }
    }
    Ok(())
}
