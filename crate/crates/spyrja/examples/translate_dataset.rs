//! Build questions-only and fully translated datasets through the stub MT
//! client, with the persistent cache making reruns free.
//!
//! ```bash
//! cargo run -p spyrja --example translate_dataset
//! ```

use spyrja::align::AlignmentConfig;
use spyrja::corpus::{Answer, Document, QARecord};
use spyrja::translate::{
    build_translated_dataset, DatasetMode, StubClient, StubFallback, TranslateOptions,
    TranslationCache,
};

fn main() {
    let documents = vec![Document {
        id: "d0".into(),
        title: "Birth years".into(),
        text: "jon was born in the year 1990".into(),
        lang: "en".into(),
    }];
    let records = vec![QARecord {
        id: "q0".into(),
        question: "when was jon born".into(),
        context_ref: "d0".into(),
        answers: vec![Answer { text: "1990".into(), char_start: 25 }],
        is_impossible: false,
    }];

    let dir = std::env::temp_dir().join("spyrja-translate-example");
    std::fs::create_dir_all(&dir).unwrap();
    let cache_path = dir.join("cache.jsonl");
    let _ = std::fs::remove_file(&cache_path);

    // the stub uppercases text, standing in for a real MT endpoint; swap in
    // translate::HttpClient::from_env() for MT_ENDPOINT-backed translation
    let opts = TranslateOptions::default();
    let align = AlignmentConfig::default();

    let client = StubClient::new(StubFallback::Uppercase);
    let mut cache = TranslationCache::open(&cache_path).unwrap();
    let (docs_isq, recs_isq, _) = build_translated_dataset(
        &documents, &records, &client, &mut cache,
        DatasetMode::QuestionsOnly, &align, &opts,
    )
    .unwrap();
    println!("questions-only: context untouched, question translated");
    println!("  context:  {:?}", docs_isq[0].text);
    println!("  question: {:?}\n", recs_isq[0].question);

    let (docs_is, recs_is, stats) = build_translated_dataset(
        &documents, &records, &client, &mut cache,
        DatasetMode::Full, &align, &opts,
    )
    .unwrap();
    println!("full translation: context and answers translated, spans re-anchored");
    println!("  context:  {:?}", docs_is[0].text);
    println!("  answer:   {:?} at offset {}", recs_is[0].answers[0].text, recs_is[0].answers[0].char_start);
    println!("  stats:    {stats}");
    println!("  client calls so far: {}\n", client.calls());

    // warm rerun: every unit is served from the cache
    let rerun_client = StubClient::new(StubFallback::Uppercase);
    let mut cache = TranslationCache::open(&cache_path).unwrap();
    let (_, rerun_records, _) = build_translated_dataset(
        &documents, &records, &rerun_client, &mut cache,
        DatasetMode::Full, &align, &opts,
    )
    .unwrap();
    println!(
        "warm rerun: {} client calls, identical output: {}",
        rerun_client.calls(),
        rerun_records == recs_is
    );
    println!("cache file: {} ({} entries)", cache_path.display(), cache.len());
}
