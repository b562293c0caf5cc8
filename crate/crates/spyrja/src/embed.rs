//! Deterministic feature-hashing embedder and a synthetic toy corpus.
//!
//! Real sentence encoders are out of scope; the hash embedder gives tests,
//! demos and the query service a fixed, dependency-free way to turn text
//! into vectors. Identical text always embeds to identical vectors.

use crate::corpus::Document;

/// Number of hash slots each token spreads over.
const SLOTS: u64 = 4;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Feature-hashing text embedder: each lowercased whitespace token scatters
/// a few signed units over the dimensions, and the sum is L2-normalized.
#[derive(Debug, Clone, Copy)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedder dimension must be positive");
        HashEmbedder { dim, seed }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embed(&self, text: &str) -> Vec<f32> {
        let mut acc = vec![0.0f32; self.dim];
        for token in text.split_whitespace() {
            let lowered = token.to_lowercase();
            let h = fnv1a64(lowered.as_bytes()) ^ self.seed;
            for s in 0..SLOTS {
                let x = splitmix64(h.wrapping_add(s));
                let idx = (x % self.dim as u64) as usize;
                let sign = if (x >> 63) & 1 == 0 { 1.0 } else { -1.0 };
                acc[idx] += sign;
            }
        }
        let norm: f32 = acc.iter().map(|v| v * v).sum::<f32>().sqrt();
        if norm > 0.0 {
            for v in &mut acc {
                *v /= norm;
            }
        }
        acc
    }
}

/// One training question of the toy world, with the phrase it must retrieve.
#[derive(Debug, Clone)]
pub struct ToyQuestion {
    pub id: String,
    pub text: String,
    pub gold_doc_id: String,
    /// Exact surface text of the gold phrase inside the document.
    pub gold_phrase_text: String,
}

/// A synthetic corpus where each document states a unique fact and each
/// question asks for it. Question tokens deliberately share nothing with the
/// gold phrase, so retrieval only works once a projection has been trained.
#[derive(Debug, Clone)]
pub struct ToyWorld {
    pub documents: Vec<Document>,
    pub questions: Vec<ToyQuestion>,
}

/// Build `n_docs` documents with one question each.
pub fn toy_world(n_docs: usize) -> ToyWorld {
    let mut documents = Vec::with_capacity(n_docs);
    let mut questions = Vec::with_capacity(n_docs);
    for i in 0..n_docs {
        let entity = format!("vera{i:02}nafn");
        let place = format!("stadur{i:02}heim");
        let landmark = format!("fjall{i:02}tind");
        let doc_id = format!("toy-d{i:03}");
        let text = format!("{entity} byr i {place} hja {landmark} um vetur");
        documents.push(Document {
            id: doc_id.clone(),
            title: format!("Entry {i}"),
            text,
            lang: "is".into(),
        });
        questions.push(ToyQuestion {
            id: format!("toy-q{i:03}"),
            text: format!("hvar heldur {entity} til"),
            gold_doc_id: doc_id,
            gold_phrase_text: place,
        });
    }
    ToyWorld {
        documents,
        questions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_is_deterministic_and_normalized() {
        let e = HashEmbedder::new(64, 7);
        let a = e.embed("hvar er stadur");
        let b = e.embed("hvar er stadur");
        assert_eq!(a, b);
        let norm: f32 = a.iter().map(|v| v * v).sum::<f32>().sqrt();
        assert!((norm - 1.0).abs() < 1e-5);
    }

    #[test]
    fn empty_text_embeds_to_zero() {
        let e = HashEmbedder::new(16, 0);
        assert!(e.embed("").iter().all(|&v| v == 0.0));
    }

    #[test]
    fn case_insensitive_tokens() {
        let e = HashEmbedder::new(32, 3);
        assert_eq!(e.embed("Reykjavík"), e.embed("reykjavík"));
    }

    #[test]
    fn distinct_words_embed_differently() {
        let e = HashEmbedder::new(64, 1);
        assert_ne!(e.embed("stadur00heim"), e.embed("stadur01heim"));
    }

    #[test]
    fn toy_world_golds_are_present_in_documents() {
        let world = toy_world(10);
        assert_eq!(world.documents.len(), 10);
        for q in &world.questions {
            let doc = world
                .documents
                .iter()
                .find(|d| d.id == q.gold_doc_id)
                .unwrap();
            assert!(doc.text.contains(&q.gold_phrase_text));
        }
    }
}
