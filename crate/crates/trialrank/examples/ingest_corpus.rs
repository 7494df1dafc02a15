//! Parse a directory of registry XML records into the intermediate corpus
//! file and look at the derived field views.
//!
//! Run: `cargo run -p trialrank --example ingest_corpus`

use std::path::Path;

use trialrank::corpus::{ingest_corpus, read_corpus, split_eligibility, EligibilityMarkers};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let input = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/mini_corpus"));
    let dir = tempfile::tempdir()?;
    let output = dir.path().join("corpus.jsonl");

    let stats = ingest_corpus(input, &EligibilityMarkers::default(), &output)?;
    println!(
        "ingested {} records ({} skipped as unparseable)\n",
        stats.written, stats.skipped
    );

    let first = read_corpus(&output)?.next().expect("corpus non-empty")?;
    println!("doc_id      : {}", first.doc_id);
    println!("i_main      : {}", &first.views.i_main[..first.views.i_main.len().min(100)]);
    println!("i_comb_star : {}", &first.views.i_comb_star[..first.views.i_comb_star.len().min(100)]);
    println!("i_in        : {}", &first.views.i_in[..first.views.i_in.len().min(100)]);
    println!("i_ex        : {}", &first.views.i_ex[..first.views.i_ex.len().min(100)]);

    println!("\neligibility splitting:");
    for text in [
        "Inclusion Criteria: age over 18 Exclusion Criteria: pregnancy",
        "Patients must be ambulatory.",
        "Inclusion Criteria: adults only",
    ] {
        let split = split_eligibility(text);
        println!(
            "  {:?} ->\n    inclusion ({}): {:?}\n    exclusion ({}): {:?}",
            text,
            if split.inclusion_found { "marker" } else { "fallback" },
            split.inclusion,
            if split.exclusion_found { "marker" } else { "fallback" },
            split.exclusion,
        );
    }
    Ok(())
}
