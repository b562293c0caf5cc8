//! Sparse retrieval baseline: inverted index with BM25 ranking.
//!
//! ```bash
//! cargo run -p spyrja --example bm25_search
//! ```

use spyrja::bm25::{bm25_score, bm25_top_k, build_inverted_index, Bm25Params};
use spyrja::corpus::Document;

fn main() {
    let documents: Vec<Document> = [
        ("d0", "do you quarrel sir"),
        ("d1", "quarrel sir no sir"),
        ("d2", "if you do sir i am for you i serve as good a man as you"),
        ("d3", "no better"),
        ("d4", "well sir"),
    ]
    .iter()
    .map(|(id, text)| Document {
        id: (*id).to_string(),
        title: String::new(),
        text: (*text).to_string(),
        lang: "en".into(),
    })
    .collect();

    let index = build_inverted_index(&documents);
    let params = Bm25Params::default();
    println!(
        "{} docs, avgdl {:.1}, df(sir) = {}, df(quarrel) = {}\n",
        index.n_docs(),
        index.avgdl(),
        index.df("sir"),
        index.df("quarrel")
    );

    let query = "quarrel sir";
    println!("query: {query:?}");
    for (rank, (ordinal, score)) in bm25_top_k(&index, &params, query, 5).iter().enumerate() {
        println!(
            "  {}. {}  {:.4}  {:?}",
            rank + 1,
            index.doc_id(*ordinal as usize),
            score,
            documents[*ordinal as usize].text
        );
    }

    // the closed form, spelled out for one document
    let terms = vec!["quarrel".to_string(), "sir".to_string()];
    let score = bm25_score(&index, &params, &terms, 1);
    println!("\nbm25(d1, {terms:?}) = {score:.4}");
    println!("length normalization off (b = 0) removes the short-doc advantage:");
    let flat = Bm25Params { k1: 1.2, b: 0.0 };
    for doc in [1u32, 2] {
        println!("  b=0 score d{doc}: {:.4}", bm25_score(&index, &flat, &terms, doc));
    }
}
