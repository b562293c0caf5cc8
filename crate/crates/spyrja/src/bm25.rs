//! Inverted index with Okapi BM25 ranking, the sparse retrieval baseline.
//!
//! Scoring uses the Lucene-style non-negative IDF:
//!
//! ```text
//! score(q, d) = sum over t in q of
//!     ln(1 + (N - df + 0.5) / (df + 0.5))
//!     * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))
//! ```
//!
//! with `k1 = 1.2`, `b = 0.75` by default. Terms absent from a document
//! contribute zero.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// Immutable after build; postings lists are sorted by document ordinal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvertedIndex {
    /// term -> [(doc ordinal, term frequency)]
    postings: BTreeMap<String, Vec<(u32, u32)>>,
    doc_lengths: Vec<u32>,
    doc_ids: Vec<String>,
    avgdl: f64,
    n_docs: usize,
}

/// Lowercase and split on anything that is not alphanumeric.
pub fn analyze(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Build an index over `documents` in the given order.
pub fn build_inverted_index(documents: &[Document]) -> InvertedIndex {
    let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
    let mut doc_lengths = Vec::with_capacity(documents.len());
    let mut doc_ids = Vec::with_capacity(documents.len());
    for (ordinal, doc) in documents.iter().enumerate() {
        let terms = analyze(&doc.text);
        doc_lengths.push(terms.len() as u32);
        doc_ids.push(doc.id.clone());
        let mut freqs: BTreeMap<&str, u32> = BTreeMap::new();
        for t in &terms {
            *freqs.entry(t.as_str()).or_insert(0) += 1;
        }
        for (term, tf) in freqs {
            postings
                .entry(term.to_string())
                .or_default()
                .push((ordinal as u32, tf));
        }
    }
    let n_docs = documents.len();
    let avgdl = if n_docs == 0 {
        0.0
    } else {
        doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / n_docs as f64
    };
    InvertedIndex {
        postings,
        doc_lengths,
        doc_ids,
        avgdl,
        n_docs,
    }
}

impl InvertedIndex {
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_length(&self, ordinal: usize) -> u32 {
        self.doc_lengths[ordinal]
    }

    pub fn doc_id(&self, ordinal: usize) -> &str {
        &self.doc_ids[ordinal]
    }

    /// Document frequency of a term.
    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// Term frequency of `term` in the document at `ordinal`.
    pub fn tf(&self, term: &str, ordinal: u32) -> u32 {
        self.postings
            .get(term)
            .and_then(|list| {
                list.binary_search_by_key(&ordinal, |&(d, _)| d)
                    .ok()
                    .map(|i| list[i].1)
            })
            .unwrap_or(0)
    }

    fn idf(&self, term: &str) -> f64 {
        let df = self.df(term) as f64;
        let n = self.n_docs as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }
}

/// BM25 score of one document for the given query terms.
pub fn bm25_score(
    index: &InvertedIndex,
    params: &Bm25Params,
    query_terms: &[String],
    ordinal: u32,
) -> f64 {
    let dl = index.doc_length(ordinal as usize) as f64;
    let norm = if index.avgdl > 0.0 {
        params.k1 * (1.0 - params.b + params.b * dl / index.avgdl)
    } else {
        params.k1
    };
    let mut score = 0.0;
    for term in query_terms {
        let tf = index.tf(term, ordinal) as f64;
        if tf == 0.0 {
            continue;
        }
        score += index.idf(term) * tf * (params.k1 + 1.0) / (tf + norm);
    }
    score
}

/// Score every document and return the top `k`, descending score with ties
/// broken by ascending ordinal.
pub fn bm25_top_k(
    index: &InvertedIndex,
    params: &Bm25Params,
    query: &str,
    k: usize,
) -> Vec<(u32, f64)> {
    let query_terms = analyze(query);
    if query_terms.is_empty() {
        return Vec::new();
    }
    let mut scored: Vec<(u32, f64)> = (0..index.n_docs as u32)
        .map(|d| (d, bm25_score(index, params, &query_terms, d)))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn docs(texts: &[&str]) -> Vec<Document> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document {
                id: format!("d{i}"),
                title: String::new(),
                text: (*t).to_string(),
                lang: "en".into(),
            })
            .collect()
    }

    #[test]
    fn index_statistics() {
        let idx = build_inverted_index(&docs(&["a b a", "b c"]));
        assert_eq!(idx.df("a"), 1);
        assert_eq!(idx.df("b"), 2);
        assert_eq!(idx.df("zzz"), 0);
        assert_eq!(idx.avgdl(), 2.5);
        assert_eq!(idx.tf("a", 0), 2);
        assert_eq!(idx.tf("a", 1), 0);
    }

    #[test]
    fn empty_document_counts_toward_avgdl() {
        let idx = build_inverted_index(&docs(&["a b", ""]));
        assert_eq!(idx.doc_length(1), 0);
        assert_eq!(idx.avgdl(), 1.0);
    }

    #[test]
    fn hand_derived_score() {
        // IDF(a) = ln(1 + (2 - 1 + 0.5)/(1 + 0.5)) = ln 2
        // tf = 2, dl = 3, avgdl = 2.5
        // score = ln2 * 2*2.2 / (2 + 1.2*(0.25 + 0.75*3/2.5)) = 0.90233...
        let idx = build_inverted_index(&docs(&["a b a", "b c"]));
        let score = bm25_score(&idx, &Bm25Params::default(), &["a".into()], 0);
        let expected = (2.0f64).ln() * (2.0 * 2.2) / (2.0 + 1.2 * (0.25 + 0.75 * 3.0 / 2.5));
        assert!((score - expected).abs() < 1e-12);
        assert!((score - 0.9023).abs() < 1e-3);
    }

    #[test]
    fn absent_term_contributes_zero() {
        let idx = build_inverted_index(&docs(&["a b a", "b c"]));
        let s = bm25_score(&idx, &Bm25Params::default(), &["c".into()], 0);
        assert_eq!(s, 0.0);
    }

    #[test]
    fn b_zero_removes_length_normalization() {
        let idx = build_inverted_index(&docs(&["a", "a x y z w v u t s r q"]));
        let p = Bm25Params { k1: 1.2, b: 0.0 };
        let s0 = bm25_score(&idx, &p, &["a".into()], 0);
        let s1 = bm25_score(&idx, &p, &["a".into()], 1);
        assert_eq!(s0, s1);
    }

    #[test]
    fn top_k_basics() {
        let idx = build_inverted_index(&docs(&["a b a", "b c"]));
        let top = bm25_top_k(&idx, &Bm25Params::default(), "a", 10);
        assert_eq!(top.len(), 2); // k larger than corpus: all docs
        assert_eq!(top[0].0, 0);
        assert!(bm25_top_k(&idx, &Bm25Params::default(), "", 10).is_empty());
    }

    #[test]
    fn single_doc_ranks_first_on_match() {
        let idx = build_inverted_index(&docs(&["quarrel sir"]));
        let top = bm25_top_k(&idx, &Bm25Params::default(), "sir", 1);
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].0, 0);
        assert!(top[0].1 > 0.0);
    }

    /// Naive recount of index statistics, independent of the build path.
    fn recount(documents: &[Document], term: &str) -> (usize, Vec<u32>) {
        let mut df = 0usize;
        let mut tfs = Vec::new();
        for doc in documents {
            let terms = analyze(&doc.text);
            let tf = terms.iter().filter(|t| *t == term).count() as u32;
            if tf > 0 {
                df += 1;
            }
            tfs.push(tf);
        }
        (df, tfs)
    }

    proptest! {
        #[test]
        fn statistics_match_recount_oracle(
            texts in proptest::collection::vec("[a-d ]{0,20}", 1..8),
        ) {
            let documents = docs(&texts.iter().map(String::as_str).collect::<Vec<_>>());
            let idx = build_inverted_index(&documents);
            for term in ["a", "b", "c", "d"] {
                let (df, tfs) = recount(&documents, term);
                prop_assert_eq!(idx.df(term), df);
                for (ordinal, tf) in tfs.iter().enumerate() {
                    prop_assert_eq!(idx.tf(term, ordinal as u32), *tf);
                }
            }
            let lens: Vec<u32> = documents.iter().map(|d| analyze(&d.text).len() as u32).collect();
            let avg = lens.iter().map(|&l| l as f64).sum::<f64>() / lens.len() as f64;
            prop_assert!((idx.avgdl() - avg).abs() < 1e-12);
        }

        #[test]
        fn top_k_equals_score_all_oracle(
            texts in proptest::collection::vec("[a-d ]{0,20}", 1..8),
            query in "[a-d ]{1,8}",
            k in 1usize..10,
        ) {
            let documents = docs(&texts.iter().map(String::as_str).collect::<Vec<_>>());
            let idx = build_inverted_index(&documents);
            let params = Bm25Params::default();
            let got = bm25_top_k(&idx, &params, &query, k);
            // independent oracle: score every doc, stable sort, truncate
            let terms = analyze(&query);
            let mut all: Vec<(u32, f64)> = if terms.is_empty() {
                Vec::new()
            } else {
                (0..documents.len() as u32)
                    .map(|d| (d, bm25_score(&idx, &params, &terms, d)))
                    .collect()
            };
            all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            all.truncate(k);
            prop_assert_eq!(got, all);
        }
    }
}
