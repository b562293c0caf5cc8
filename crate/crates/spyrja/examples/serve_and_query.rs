//! Start the HTTP query service on an ephemeral port and talk to it:
//! readiness probe, vector queries, text queries through the hash embedder.
//!
//! ```bash
//! cargo run -p spyrja --example serve_and_query
//! ```

use std::sync::{Arc, RwLock};

use spyrja::embed::HashEmbedder;
use spyrja::phrase_index::{FlatIndex, PhraseEntry, PhraseIndex};
use spyrja::serve::{spawn_server, QaService};

fn main() {
    // a handful of phrases embedded with the built-in hash embedder
    let embedder = HashEmbedder::new(32, 0);
    let mut flat = FlatIndex::new();
    for (id, text) in [
        (1u64, "Reykjavík er höfuðborg Íslands"),
        (2, "Akureyri er bær á Norðurlandi"),
        (3, "Esjan er fjall nálægt Reykjavík"),
    ] {
        flat.add(PhraseEntry {
            phrase_id: id,
            doc_id: format!("d{id}"),
            char_start: 0,
            char_end: text.chars().count(),
            text: text.to_string(),
            vector: embedder.embed(text),
        })
        .unwrap();
    }
    let service = QaService::from_parts(PhraseIndex { flat, ivf: None }, None, 3, true, 0);

    // spawn with deferred readiness to show the 503 -> 200 transition
    let state = Arc::new(RwLock::new(None));
    let server = spawn_server("127.0.0.1:0", Arc::clone(&state), 4).unwrap();
    let base = format!("http://{}", server.addr);
    println!("listening on {base}");

    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into();

    let resp = agent.get(format!("{base}/healthz")).call().unwrap();
    println!("healthz before load: {}", resp.status());

    *state.write().unwrap() = Some(Arc::new(service));
    let resp = agent.get(format!("{base}/healthz")).call().unwrap();
    println!("healthz after load:  {}\n", resp.status());

    let mut resp = agent
        .post(format!("{base}/v1/query"))
        .send_json(serde_json::json!({
            "question": "hvað er höfuðborg Íslands",
            "embedder": "hash",
            "k": 3
        }))
        .unwrap();
    let body: serde_json::Value = resp.body_mut().read_json().unwrap();
    println!("query: hvað er höfuðborg Íslands");
    for answer in body["answers"].as_array().unwrap() {
        println!(
            "  {:.3}  {} ({})",
            answer["score"].as_f64().unwrap(),
            answer["text"].as_str().unwrap(),
            answer["doc_id"].as_str().unwrap()
        );
    }
    println!("latency: {:.2} ms", body["latency_ms"].as_f64().unwrap());

    // dimension mismatches come back as 422, not a crash
    let resp = agent
        .post(format!("{base}/v1/query"))
        .send_json(serde_json::json!({"question_vector": [1.0, 2.0]}))
        .unwrap();
    println!("\nwrong-dimension vector -> {}", resp.status());

    server.stop();
}
