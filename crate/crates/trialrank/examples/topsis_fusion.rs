//! Fuse three per-view relevance score lists with TOPSIS, step by step:
//! decision matrix, vector normalization and weighting, ideal solutions,
//! distances, closeness.
//!
//! Run: `cargo run -p trialrank --example topsis_fusion`

use trialrank::fusion::{
    build_decision_matrix, ideal_solutions, normalize_and_weight, topsis_rank, FusionWeights,
};
use trialrank::retrieval::ScoredRun;

fn run(scored: Vec<(&str, f64)>) -> ScoredRun {
    ScoredRun::from_scores(
        "q1",
        "demo",
        scored.into_iter().map(|(d, s)| (d.to_string(), s)).collect(),
    )
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // BM25 scores of four trials against the same query, one run per view:
    // inclusion criteria and main sections count positively, exclusion
    // criteria count negatively
    let run_in = run(vec![("NCT0001", 7.2), ("NCT0002", 4.1), ("NCT0003", 5.0)]);
    let run_ex = run(vec![("NCT0002", 6.3), ("NCT0003", 1.2), ("NCT0004", 2.0)]);
    let run_main = run(vec![("NCT0001", 5.5), ("NCT0002", 5.9), ("NCT0004", 3.3)]);

    let weights = FusionWeights::default();
    let matrix = build_decision_matrix(&run_in, &run_ex, &run_main, 1000, &weights)?;
    println!("decision matrix (r_in, r_ex, r_main), zero-filled:");
    for row in &matrix.rows {
        println!("  {}  {:?}", row.doc_id, row.scores);
    }

    let weighted = normalize_and_weight(&matrix)?;
    println!("\nweighted normalized matrix:");
    for row in &weighted {
        println!(
            "  {}  [{:.4}, {:.4}, {:.4}]",
            row.doc_id, row.scores[0], row.scores[1], row.scores[2]
        );
    }

    let (positive, negative) = ideal_solutions(&weighted, &matrix.criteria)?;
    println!("\npositive ideal (max benefit, min cost): {positive:.4?}");
    println!("negative ideal (min benefit, max cost): {negative:.4?}");

    let ranking = topsis_rank(&matrix)?;
    println!("\ncloseness ranking:");
    for entry in &ranking.entries {
        println!(
            "  {}  d+ {:.4}  d- {:.4}  closeness {:.4}",
            entry.doc_id, entry.d_plus, entry.d_minus, entry.closeness
        );
    }
    println!(
        "\nNCT0002 matched the exclusion criteria hardest, so it sinks \
         despite strong inclusion/main scores."
    );

    let fused = ranking.to_scored_run("demo_fused");
    println!("\nas a TREC run:");
    let mut buf = Vec::new();
    trialrank::retrieval::write_trec_run(&[fused], &mut buf)?;
    print!("{}", String::from_utf8(buf)?);
    Ok(())
}
