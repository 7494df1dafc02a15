//! Score a TREC run file against qrels and compare per-query values to
//! published medians.
//!
//! Run: `cargo run -p trialrank --example evaluate_run`

use std::collections::BTreeMap;
use std::path::Path;

use trialrank::eval::{compare_to_median, evaluate_runs, EvalConfig, QrelSet};
use trialrank::retrieval::read_trec_run;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"));
    let runs = read_trec_run(&fixtures.join("metric_fixture.run"))?;
    let qrels = QrelSet::from_file(&fixtures.join("metric_fixture.qrels"))?;

    let report = evaluate_runs(&runs, &qrels, EvalConfig::default());
    println!("{report}\n");

    // medians here are synthetic; with a real collection this is the
    // track's published per-topic median file
    let medians: BTreeMap<String, f64> = [
        ("1".to_string(), 0.25),
        ("2".to_string(), 0.30),
        ("3".to_string(), 0.20),
    ]
    .into();
    let per_query: BTreeMap<String, f64> = report
        .per_query
        .iter()
        .map(|(q, m)| (q.clone(), m.ndcg10))
        .collect();
    let cmp = compare_to_median(&per_query, &medians);
    println!(
        "queries improved over median NDCG@10: {}/{} ({:.0}%)",
        cmp.improved,
        cmp.total,
        cmp.fraction() * 100.0
    );
    Ok(())
}
