//! Answer-span alignment: locate translated answers inside independently
//! translated contexts, exactly or fuzzily.
//!
//! ```bash
//! cargo run -p spyrja --example align_answers
//! ```

use std::collections::HashMap;

use spyrja::align::{align_answer, align_dataset, normalized_similarity, AlignmentConfig};
use spyrja::corpus::{Answer, QARecord};

fn main() {
    let config = AlignmentConfig::default();
    println!("threshold {} | window deltas {:?}\n", config.threshold, config.window_deltas);

    // exact hit: the translated answer appears verbatim
    let context = "Reykjavík er höfuðborg Íslands og þar búa flestir";
    let result = align_answer(context, "höfuðborg Íslands", "capital of Iceland", &config).unwrap();
    println!("context: {context}");
    println!("  translated answer {:?} -> {:?} at {:?}\n", "höfuðborg Íslands", result.status, result.span);

    // fuzzy hit: the translation lost the accent, so no exact match exists,
    // but the window search still finds the right span
    let result = align_answer(context, "höfuðborg Islands", "capital of Iceland", &config).unwrap();
    println!("  translated answer {:?} -> {:?}", "höfuðborg Islands", result.status);
    println!(
        "  matched {:?} with similarity {:.4} (= {:.4} recomputed directly)\n",
        result.matched_text.as_deref().unwrap(),
        result.similarity.unwrap(),
        normalized_similarity("höfuðborg islands", "höfuðborg íslands"),
    );

    // nothing reaches the threshold: the pair is discarded from training
    let result = align_answer(context, "allt annað svar", "something else", &config).unwrap();
    println!("  translated answer {:?} -> {:?}\n", "allt annað svar", result.status);

    // whole-dataset alignment with per-status stats
    let records: Vec<QARecord> = (0..4)
        .map(|i| QARecord {
            id: format!("q{i}"),
            question: format!("spurning {i}"),
            context_ref: "d0".into(),
            answers: vec![Answer { text: "1990".into(), char_start: 0 }],
            is_impossible: false,
        })
        .collect();
    let contexts: HashMap<String, String> = [
        ("q0", "Jón fæddist árið 1990"),          // exact
        ("q1", "Jón fæddist árið  1990-ish"),     // fuzzy
        ("q2", "ekkert ártal hér"),               // discarded
        ("q3", "árið var 1990 að sögn"),          // exact
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    let answers: HashMap<String, Vec<String>> = contexts
        .keys()
        .map(|k| (k.clone(), vec!["1990".to_string()]))
        .collect();

    let (aligned, stats) = align_dataset(&records, &contexts, &answers, &config);
    println!("dataset alignment: {stats}");
    for rec in &aligned {
        println!(
            "  kept {} with answer {:?} at offset {}",
            rec.id, rec.answers[0].text, rec.answers[0].char_start
        );
    }
}
