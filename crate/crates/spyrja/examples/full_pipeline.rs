//! The whole toy pipeline in one run: translate a dataset, enumerate and
//! embed phrase spans, index them, train the query projection, and serve
//! answers over HTTP.
//!
//! ```bash
//! cargo run -p spyrja --example full_pipeline
//! ```

use std::sync::{Arc, RwLock};

use spyrja::align::AlignmentConfig;
use spyrja::corpus::{cp_slice, enumerate_spans};
use spyrja::embed::{toy_world, HashEmbedder};
use spyrja::phrase_index::{save_index, FlatIndex, PhraseEntry, PhraseIndex};
use spyrja::qtrain::{top1_accuracy, train, QueryProjection, TrainBatch, TrainConfig};
use spyrja::serve::{spawn_server, QaService};
use spyrja::translate::{
    build_translated_dataset, DatasetMode, StubClient, StubFallback, TranslateOptions,
    TranslationCache,
};

fn main() {
    let dim = 64;
    let dir = std::env::temp_dir().join("spyrja-pipeline");
    std::fs::create_dir_all(&dir).unwrap();

    // step 1: machine-translate a QA dataset (stub engine, cached)
    let world = toy_world(50);
    let records: Vec<spyrja::corpus::QARecord> = world
        .questions
        .iter()
        .map(|q| {
            let doc = world.documents.iter().find(|d| d.id == q.gold_doc_id).unwrap();
            let start = doc.text.find(&q.gold_phrase_text).unwrap();
            let char_start = doc.text[..start].chars().count();
            spyrja::corpus::QARecord {
                id: q.id.clone(),
                question: q.text.clone(),
                context_ref: q.gold_doc_id.clone(),
                answers: vec![spyrja::corpus::Answer {
                    text: q.gold_phrase_text.clone(),
                    char_start,
                }],
                is_impossible: false,
            }
        })
        .collect();
    let client = StubClient::new(StubFallback::Echo);
    let mut cache = TranslationCache::open(&dir.join("cache.jsonl")).unwrap();
    let (documents, _records, stats) = build_translated_dataset(
        &world.documents,
        &records,
        &client,
        &mut cache,
        DatasetMode::Full,
        &AlignmentConfig::default(),
        &TranslateOptions::default(),
    )
    .unwrap();
    println!("1. translated {} documents, alignment: {stats}", documents.len());

    // step 2: enumerate and embed phrase spans (1..=3 words)
    let embedder = HashEmbedder::new(dim, 0);
    let mut flat = FlatIndex::new();
    let mut next_id = 0u64;
    for doc in &documents {
        for span in enumerate_spans(doc, 1, 3) {
            let text = cp_slice(&doc.text, span.char_start, span.char_end);
            flat.add(PhraseEntry {
                phrase_id: next_id,
                doc_id: doc.id.clone(),
                char_start: span.char_start,
                char_end: span.char_end,
                text: text.clone(),
                vector: embedder.embed(&text),
            })
            .unwrap();
            next_id += 1;
        }
    }
    println!("2. embedded {} phrase spans (dim {dim})", flat.len());

    // step 3: persist the index
    let index_path = dir.join("toy.dpix");
    let index = PhraseIndex { flat, ivf: None };
    save_index(&index, &index_path).unwrap();
    println!("3. wrote {} ({} bytes)", index_path.display(), std::fs::metadata(&index_path).unwrap().len());

    // step 4: train the query projection on the first 20 questions
    let train_questions = &world.questions[..20];
    let gold_ordinals: Vec<usize> = train_questions
        .iter()
        .map(|q| {
            (0..index.flat.len())
                .find(|&i| {
                    index.flat.meta(i).doc_id == q.gold_doc_id
                        && index.flat.meta(i).text == q.gold_phrase_text
                })
                .unwrap()
        })
        .collect();
    let batch = TrainBatch {
        question_vectors: train_questions
            .iter()
            .map(|q| embedder.embed(&q.text).iter().map(|&x| x as f64).collect())
            .collect(),
        candidate_vectors: gold_ordinals
            .iter()
            .map(|&o| index.flat.vector(o).iter().map(|&x| x as f64).collect())
            .collect(),
        gold_index: (0..train_questions.len()).collect(),
        teacher_scores: None,
    };
    let config = TrainConfig {
        learning_rate: 2.0,
        epochs: 200,
        distill_weight: 0.0,
        ..Default::default()
    };
    let outcome = train(
        std::slice::from_ref(&batch),
        &config,
        QueryProjection::identity_with_noise(dim, dim, 0.01, 7),
    )
    .unwrap();
    let proj_path = dir.join("toy.dpqw");
    outcome.projection.save(&proj_path).unwrap();
    println!(
        "4. trained projection: loss {:.3} -> {:.3}, pool top-1 {:.0}%, wrote {}",
        outcome.epoch_mean_loss.first().unwrap(),
        outcome.epoch_mean_loss.last().unwrap(),
        100.0 * top1_accuracy(&outcome.projection, &batch).unwrap(),
        proj_path.display()
    );

    // step 5: serve the persisted artifacts
    let service = QaService::load(&index_path, Some(&proj_path), 10, true, 0).unwrap();
    let state = Arc::new(RwLock::new(Some(Arc::new(service))));
    let server = spawn_server("127.0.0.1:0", Arc::clone(&state), 4).unwrap();
    let base = format!("http://{}", server.addr);
    println!("5. serving {base}");

    // step 6: every trained question retrieves its gold phrase
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into();
    let mut hits = 0;
    for q in train_questions {
        let mut resp = agent
            .post(format!("{base}/v1/query"))
            .send_json(serde_json::json!({"question": q.text, "embedder": "hash", "k": 10}))
            .unwrap();
        let body: serde_json::Value = resp.body_mut().read_json().unwrap();
        let found = body["answers"].as_array().unwrap().iter().any(|a| {
            a["doc_id"].as_str() == Some(q.gold_doc_id.as_str())
                && a["text"].as_str() == Some(q.gold_phrase_text.as_str())
        });
        if found {
            hits += 1;
        }
    }
    println!("6. retrieval: {hits}/{} gold phrases in the top 10", train_questions.len());
    server.stop();
}
