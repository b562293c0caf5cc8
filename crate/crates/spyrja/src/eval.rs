//! Extractive QA scoring: answer normalization, exact match, bag-of-tokens
//! F1, and their top-k variants.
//!
//! Normalization lowercases, strips punctuation and collapses whitespace.
//! English article removal ("a", "an", "the") is off by default — Icelandic
//! has no freestanding articles and stripping them corrupts Icelandic tokens
//! by coincidence — and can be switched on for English-side evaluation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::QARecord;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction references unknown question id {0}")]
    UnknownQuestionId(String),
    #[error("duplicate prediction for question id {0}")]
    DuplicatePrediction(String),
    #[error("k must be at least 1")]
    BadK,
    #[error("prediction file line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One ranked answer with its provenance span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedAnswer {
    pub text: String,
    pub score: f64,
    pub doc_id: String,
    pub char_start: usize,
    pub char_end: usize,
}

/// Ranked system output for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub question_id: String,
    /// Descending score.
    pub answers: Vec<PredictedAnswer>,
}

/// Aggregate report; all metrics are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub k: usize,
    pub em: f64,
    pub f1: f64,
    pub em_at_k: f64,
    pub f1_at_k: f64,
}

impl EvalReport {
    /// One table row in the shape of the usual open-QA result tables.
    pub fn render_table(&self) -> String {
        format!(
            "{:>8} {:>8} {:>12} {:>12}\n{:>8.1} {:>8.1} {:>12.1} {:>12.1}\n",
            "EM",
            "F1",
            format!("EM top {}", self.k),
            format!("F1 top {}", self.k),
            self.em,
            self.f1,
            self.em_at_k,
            self.f1_at_k
        )
    }
}

/// Lowercase, drop punctuation, collapse whitespace; optionally drop English
/// articles.
pub fn normalize_answer(text: &str, strip_articles: bool) -> String {
    let lowered: String = text
        .chars()
        .flat_map(|c| c.to_lowercase())
        .map(|c| {
            if c.is_alphanumeric() || c.is_whitespace() {
                c
            } else {
                ' '
            }
        })
        .collect();
    lowered
        .split_whitespace()
        .filter(|t| !strip_articles || !matches!(*t, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// 1 iff the normalized prediction equals any normalized gold.
pub fn exact_match(pred_text: &str, gold_texts: &[String], strip_articles: bool) -> bool {
    let pred = normalize_answer(pred_text, strip_articles);
    gold_texts
        .iter()
        .any(|g| normalize_answer(g, strip_articles) == pred)
}

fn token_counts(text: &str) -> HashMap<&str, usize> {
    let mut counts = HashMap::new();
    for t in text.split_whitespace() {
        *counts.entry(t).or_insert(0) += 1;
    }
    counts
}

fn f1_single(pred_norm: &str, gold_norm: &str) -> f64 {
    let pred_tokens = token_counts(pred_norm);
    let gold_tokens = token_counts(gold_norm);
    let n_pred: usize = pred_tokens.values().sum();
    let n_gold: usize = gold_tokens.values().sum();
    if n_pred == 0 && n_gold == 0 {
        return 1.0;
    }
    if n_pred == 0 || n_gold == 0 {
        return 0.0;
    }
    // multiset overlap
    let common: usize = pred_tokens
        .iter()
        .map(|(t, &c)| c.min(*gold_tokens.get(t).unwrap_or(&0)))
        .sum();
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / n_pred as f64;
    let recall = common as f64 / n_gold as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Max over golds of the harmonic mean of token precision and recall, on
/// normalized whitespace tokens with multiset overlap.
pub fn token_f1(pred_text: &str, gold_texts: &[String], strip_articles: bool) -> f64 {
    let pred = normalize_answer(pred_text, strip_articles);
    gold_texts
        .iter()
        .map(|g| f1_single(&pred, &normalize_answer(g, strip_articles)))
        .fold(0.0, f64::max)
}

/// Score `predictions` against answerable gold records. Rank-1 answers feed
/// `em`/`f1`; the best among the top `k` answers feeds `em_at_k`/`f1_at_k`.
/// A gold question with no prediction scores zero; a prediction whose id is
/// not in the gold set is an error.
pub fn evaluate(
    predictions: &[Prediction],
    gold_records: &[QARecord],
    k: usize,
    strip_articles: bool,
) -> Result<EvalReport, EvalError> {
    if k == 0 {
        return Err(EvalError::BadK);
    }
    let answerable: Vec<&QARecord> = gold_records
        .iter()
        .filter(|r| !r.is_impossible && !r.answers.is_empty())
        .collect();
    let gold_ids: HashMap<&str, &QARecord> =
        answerable.iter().map(|r| (r.id.as_str(), *r)).collect();

    let mut by_id: HashMap<&str, &Prediction> = HashMap::new();
    for p in predictions {
        if !gold_ids.contains_key(p.question_id.as_str()) {
            return Err(EvalError::UnknownQuestionId(p.question_id.clone()));
        }
        if by_id.insert(p.question_id.as_str(), p).is_some() {
            return Err(EvalError::DuplicatePrediction(p.question_id.clone()));
        }
    }

    let n = answerable.len();
    let mut em_sum = 0.0;
    let mut f1_sum = 0.0;
    let mut em_k_sum = 0.0;
    let mut f1_k_sum = 0.0;
    for record in &answerable {
        let golds: Vec<String> = record.answers.iter().map(|a| a.text.clone()).collect();
        let Some(pred) = by_id.get(record.id.as_str()) else {
            continue; // counts as zero
        };
        if let Some(first) = pred.answers.first() {
            em_sum += f64::from(exact_match(&first.text, &golds, strip_articles));
            f1_sum += token_f1(&first.text, &golds, strip_articles);
        }
        let top_k = pred.answers.iter().take(k);
        let mut best_em = 0.0f64;
        let mut best_f1 = 0.0f64;
        for ans in top_k {
            best_em = best_em.max(f64::from(exact_match(&ans.text, &golds, strip_articles)));
            best_f1 = best_f1.max(token_f1(&ans.text, &golds, strip_articles));
        }
        em_k_sum += best_em;
        f1_k_sum += best_f1;
    }

    let pct = |x: f64| if n == 0 { 0.0 } else { x / n as f64 * 100.0 };
    Ok(EvalReport {
        n,
        k,
        em: pct(em_sum),
        f1: pct(f1_sum),
        em_at_k: pct(em_k_sum),
        f1_at_k: pct(f1_k_sum),
    })
}

/// Parse predictions from JSONL, one [`Prediction`] per line.
pub fn read_predictions_jsonl(bytes: &[u8]) -> Result<Vec<Prediction>, EvalError> {
    let text = String::from_utf8_lossy(bytes);
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(line).map_err(|e| EvalError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(p);
    }
    Ok(out)
}
