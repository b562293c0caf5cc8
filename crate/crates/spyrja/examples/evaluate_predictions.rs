//! Score ranked predictions with exact match and token F1, rank-1 and top-k.
//!
//! ```bash
//! cargo run -p spyrja --example evaluate_predictions
//! ```

use spyrja::corpus::{Answer, QARecord};
use spyrja::eval::{evaluate, exact_match, normalize_answer, token_f1, PredictedAnswer, Prediction};

fn gold(id: &str, answers: &[&str]) -> QARecord {
    QARecord {
        id: id.into(),
        question: String::new(),
        context_ref: "d".into(),
        answers: answers.iter().map(|a| Answer { text: (*a).to_string(), char_start: 0 }).collect(),
        is_impossible: false,
    }
}

fn pred(id: &str, answers: &[&str]) -> Prediction {
    Prediction {
        question_id: id.into(),
        answers: answers
            .iter()
            .enumerate()
            .map(|(rank, a)| PredictedAnswer {
                text: (*a).to_string(),
                score: 10.0 - rank as f64,
                doc_id: "d".into(),
                char_start: 0,
                char_end: 1,
            })
            .collect(),
    }
}

fn main() {
    println!("normalization (articles kept by default):");
    for text in ["The  Cat!", "1990.", "Þórður á  Strönd?"] {
        println!("  {:?} -> {:?}", text, normalize_answer(text, false));
    }
    println!("  {:?} -> {:?} (with --strip-articles)\n", "the cat", normalize_answer("the cat", true));

    let golds = vec!["the cat sat".to_string()];
    println!("exact_match(\"The cat sat!\") = {}", exact_match("The cat sat!", &golds, false));
    println!("token_f1(\"cat sat\")       = {:.2} (P=1.0, R=2/3)\n", token_f1("cat sat", &golds, false));

    // a small prediction set with hits at different ranks
    let gold_records = vec![
        gold("q1", &["the cat sat"]),
        gold("q2", &["1990"]),
        gold("q3", &["Reykjavík"]),
        gold("q4", &["blue whale", "whale"]),
        gold("q5", &["aldrei"]),
    ];
    let predictions = vec![
        pred("q1", &["cat sat", "the cat sat"]),
        pred("q2", &["1990."]),
        pred("q3", &["Akureyri", "Reykjavík"]),
        pred("q4", &["blue whale"]),
        // q5 left unanswered
    ];
    let report = evaluate(&predictions, &gold_records, 10, false).unwrap();
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    println!("\n{}", report.render_table());
}
