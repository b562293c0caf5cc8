//! The phrase store: fixed phrase embeddings searched by maximum inner
//! product, exactly (flat scan) or through an IVF coarse quantizer.
//!
//! Scores are raw inner products; the retrieval objective is trained for
//! inner product, so no cosine normalization is applied anywhere.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binio;

mod ivf;
mod kmeans;

pub use ivf::{build_ivf, mips_search_ivf, IvfIndex};
pub use kmeans::{kmeans, KMeansOutcome};

const MAGIC: &[u8; 4] = b"DPIX";
const VERSION: u32 = 1;
const FLAG_IVF: u32 = 1;

/// Everything known about an indexed phrase except its vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseMeta {
    pub phrase_id: u64,
    pub doc_id: String,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
}

/// One ingestion record: metadata plus the embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhraseEntry {
    pub phrase_id: u64,
    pub doc_id: String,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
    pub vector: Vec<f32>,
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("phrase {phrase_id}: vector dimension {got} does not match index dimension {expected}")]
    DimensionMismatch {
        phrase_id: u64,
        expected: usize,
        got: usize,
    },
    #[error("phrase {phrase_id}: vector contains a non-finite value")]
    NonFinite { phrase_id: u64 },
    #[error("query dimension {got} does not match index dimension {expected}")]
    QueryDimension { expected: usize, got: usize },
    #[error("vectors file line {line}: {message}")]
    Ingest { line: usize, message: String },
    #[error("nprobe {nprobe} out of range 1..={n_centroids}")]
    NprobeOutOfRange { nprobe: usize, n_centroids: usize },
    #[error("k-means needs 1 <= k <= n: k={k}, n={n}")]
    BadClusterCount { k: usize, n: usize },
    #[error("not a phrase index file (bad magic)")]
    BadMagic,
    #[error("unsupported container version {0}")]
    BadVersion(u32),
    #[error("corrupt index metadata: {0}")]
    CorruptMetadata(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense store of vectors with parallel metadata, scanned exhaustively.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlatIndex {
    dim: Option<usize>,
    vectors: Vec<f32>,
    meta: Vec<PhraseMeta>,
}

/// One search result.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPhrase {
    /// Position of the entry in the index.
    pub ordinal: usize,
    pub phrase_id: u64,
    pub score: f32,
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = 0.0f32;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

impl FlatIndex {
    pub fn new() -> Self {
        FlatIndex::default()
    }

    pub fn len(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    /// Dimension fixed by the first added vector.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn meta(&self, ordinal: usize) -> &PhraseMeta {
        &self.meta[ordinal]
    }

    pub fn vector(&self, ordinal: usize) -> &[f32] {
        let d = self.dim.expect("non-empty index has a dimension");
        &self.vectors[ordinal * d..(ordinal + 1) * d]
    }

    pub fn entries(&self) -> impl Iterator<Item = (&PhraseMeta, &[f32])> {
        (0..self.len()).map(move |i| (self.meta(i), self.vector(i)))
    }

    pub(crate) fn raw_vectors(&self) -> &[f32] {
        &self.vectors
    }

    pub fn add(&mut self, entry: PhraseEntry) -> Result<(), IndexError> {
        if entry.vector.iter().any(|v| !v.is_finite()) {
            return Err(IndexError::NonFinite {
                phrase_id: entry.phrase_id,
            });
        }
        match self.dim {
            None => self.dim = Some(entry.vector.len()),
            Some(d) if d != entry.vector.len() => {
                return Err(IndexError::DimensionMismatch {
                    phrase_id: entry.phrase_id,
                    expected: d,
                    got: entry.vector.len(),
                })
            }
            Some(_) => {}
        }
        self.vectors.extend_from_slice(&entry.vector);
        self.meta.push(PhraseMeta {
            phrase_id: entry.phrase_id,
            doc_id: entry.doc_id,
            char_start: entry.char_start,
            char_end: entry.char_end,
            text: entry.text,
        });
        Ok(())
    }

    /// Find an entry's ordinal by phrase id (linear scan).
    pub fn ordinal_of(&self, phrase_id: u64) -> Option<usize> {
        self.meta.iter().position(|m| m.phrase_id == phrase_id)
    }
}

/// Read JSONL phrase entries into a flat index. The dimension is fixed by
/// the first record.
pub fn ingest_vectors<R: BufRead>(reader: R) -> Result<FlatIndex, IndexError> {
    let mut index = FlatIndex::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: PhraseEntry = serde_json::from_str(&line).map_err(|e| IndexError::Ingest {
            line: i + 1,
            message: e.to_string(),
        })?;
        index.add(entry)?;
    }
    Ok(index)
}

/// Exact top-`k` by inner product, descending, ties broken by ascending
/// phrase id. Scores are raw f32 inner products.
pub fn mips_search_flat(
    index: &FlatIndex,
    query: &[f32],
    k: usize,
) -> Result<Vec<ScoredPhrase>, IndexError> {
    if index.is_empty() {
        return Ok(Vec::new());
    }
    let dim = index.dim().unwrap();
    if query.len() != dim {
        return Err(IndexError::QueryDimension {
            expected: dim,
            got: query.len(),
        });
    }
    let mut scored: Vec<ScoredPhrase> = (0..index.len())
        .map(|ordinal| ScoredPhrase {
            ordinal,
            phrase_id: index.meta(ordinal).phrase_id,
            score: dot(index.vector(ordinal), query),
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.phrase_id.cmp(&b.phrase_id))
    });
    scored.truncate(k);
    Ok(scored)
}

/// A flat store plus an optional IVF accelerator, persisted together.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhraseIndex {
    pub flat: FlatIndex,
    pub ivf: Option<IvfIndex>,
}

impl PhraseIndex {
    /// Search with the accelerator when present (probing `nprobe` lists) or
    /// exhaustively otherwise.
    pub fn search(
        &self,
        query: &[f32],
        k: usize,
        nprobe: Option<usize>,
    ) -> Result<Vec<ScoredPhrase>, IndexError> {
        match (&self.ivf, nprobe) {
            (Some(ivf), Some(np)) => mips_search_ivf(ivf, &self.flat, query, k, np),
            (Some(ivf), None) => mips_search_ivf(ivf, &self.flat, query, k, ivf.n_centroids()),
            (None, _) => mips_search_flat(&self.flat, query, k),
        }
    }
}

/// Container layout, all integers little-endian:
/// magic "DPIX" | version u32 | flags u32 | dim u32 | count u64 |
/// count*dim f32 | meta_len u64 | meta JSON | optional IVF block.
pub fn save_index(index: &PhraseIndex, path: &Path) -> Result<(), IndexError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    binio::write_u32(&mut w, VERSION)?;
    let flags = if index.ivf.is_some() { FLAG_IVF } else { 0 };
    binio::write_u32(&mut w, flags)?;
    binio::write_u32(&mut w, index.flat.dim().unwrap_or(0) as u32)?;
    binio::write_u64(&mut w, index.flat.len() as u64)?;
    binio::write_f32_slice(&mut w, index.flat.raw_vectors())?;
    let meta = serde_json::to_vec(&index.flat.meta).expect("metadata serializes");
    binio::write_u64(&mut w, meta.len() as u64)?;
    w.write_all(&meta)?;
    if let Some(ivf) = &index.ivf {
        ivf.write_block(&mut w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<PhraseIndex, IndexError> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(IndexError::BadMagic);
    }
    let version = binio::read_u32(&mut r)?;
    if version != VERSION {
        return Err(IndexError::BadVersion(version));
    }
    let flags = binio::read_u32(&mut r)?;
    let dim = binio::read_u32(&mut r)? as usize;
    let count = binio::read_u64(&mut r)? as usize;
    let n_floats = count
        .checked_mul(dim)
        .ok_or_else(|| IndexError::CorruptMetadata("vector block size overflows".into()))?;
    let vectors = binio::read_f32_vec(&mut r, n_floats)?;
    let meta_len = binio::read_u64(&mut r)? as usize;
    let meta_bytes = binio::read_exact_bytes(&mut r, meta_len)?;
    let meta: Vec<PhraseMeta> = serde_json::from_slice(&meta_bytes)
        .map_err(|e| IndexError::CorruptMetadata(e.to_string()))?;
    if meta.len() != count {
        return Err(IndexError::CorruptMetadata(format!(
            "metadata holds {} entries, header says {}",
            meta.len(),
            count
        )));
    }
    let flat = FlatIndex {
        dim: if count == 0 && dim == 0 { None } else { Some(dim) },
        vectors,
        meta,
    };
    let ivf = if flags & FLAG_IVF != 0 {
        Some(IvfIndex::read_block(&mut r, dim, count)?)
    } else {
        None
    };
    binio::expect_eof(&mut r)?;
    Ok(PhraseIndex { flat, ivf })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn entry(id: u64, vector: Vec<f32>) -> PhraseEntry {
        PhraseEntry {
            phrase_id: id,
            doc_id: format!("d{id}"),
            char_start: 0,
            char_end: 1,
            text: format!("p{id}"),
            vector,
        }
    }

    #[test]
    fn ingest_basics() {
        let jsonl = concat!(
            r#"{"phrase_id":1,"doc_id":"d","char_start":0,"char_end":2,"text":"ab","vector":[1.0,0.0]}"#,
            "\n",
            r#"{"phrase_id":2,"doc_id":"d","char_start":2,"char_end":4,"text":"cd","vector":[0.0,1.0]}"#,
            "\n",
            r#"{"phrase_id":3,"doc_id":"d","char_start":4,"char_end":6,"text":"ef","vector":[1.0,1.0]}"#,
            "\n",
        );
        let idx = ingest_vectors(jsonl.as_bytes()).unwrap();
        assert_eq!(idx.len(), 3);
        assert_eq!(idx.dim(), Some(2));
    }

    #[test]
    fn ingest_empty_has_unset_dim() {
        let idx = ingest_vectors("".as_bytes()).unwrap();
        assert!(idx.is_empty());
        assert_eq!(idx.dim(), None);
    }

    #[test]
    fn ingest_rejects_dimension_mismatch() {
        let jsonl = concat!(
            r#"{"phrase_id":1,"doc_id":"d","char_start":0,"char_end":1,"text":"a","vector":[1.0,0.0]}"#,
            "\n",
            r#"{"phrase_id":7,"doc_id":"d","char_start":1,"char_end":2,"text":"b","vector":[1.0]}"#,
            "\n",
        );
        match ingest_vectors(jsonl.as_bytes()).unwrap_err() {
            IndexError::DimensionMismatch { phrase_id, .. } => assert_eq!(phrase_id, 7),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn ingest_rejects_nan() {
        let jsonl = r#"{"phrase_id":9,"doc_id":"d","char_start":0,"char_end":1,"text":"a","vector":[null]}"#;
        // serde_json parses null as f32? It does not; this is an ingest error.
        assert!(ingest_vectors(jsonl.as_bytes()).is_err());
        let mut idx = FlatIndex::new();
        let err = idx.add(entry(9, vec![f32::NAN])).unwrap_err();
        assert!(matches!(err, IndexError::NonFinite { phrase_id: 9 }));
    }

    #[test]
    fn flat_search_hand_fixture() {
        let mut idx = FlatIndex::new();
        idx.add(entry(1, vec![1.0, 0.0])).unwrap();
        idx.add(entry(2, vec![0.0, 1.0])).unwrap();
        idx.add(entry(3, vec![1.0, 1.0])).unwrap();
        let hits = mips_search_flat(&idx, &[2.0, 1.0], 3).unwrap();
        let ids: Vec<u64> = hits.iter().map(|h| h.phrase_id).collect();
        let scores: Vec<f32> = hits.iter().map(|h| h.score).collect();
        assert_eq!(ids, vec![3, 1, 2]);
        assert_eq!(scores, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn flat_search_k_truncation_and_overflow() {
        let mut idx = FlatIndex::new();
        idx.add(entry(1, vec![1.0])).unwrap();
        idx.add(entry(2, vec![2.0])).unwrap();
        assert_eq!(mips_search_flat(&idx, &[1.0], 1).unwrap().len(), 1);
        assert_eq!(mips_search_flat(&idx, &[1.0], 99).unwrap().len(), 2);
    }

    #[test]
    fn flat_search_dimension_check() {
        let mut idx = FlatIndex::new();
        idx.add(entry(1, vec![1.0, 0.0])).unwrap();
        assert!(matches!(
            mips_search_flat(&idx, &[1.0], 1),
            Err(IndexError::QueryDimension { .. })
        ));
    }

    #[test]
    fn ties_break_by_phrase_id() {
        let mut idx = FlatIndex::new();
        idx.add(entry(5, vec![1.0, 0.0])).unwrap();
        idx.add(entry(2, vec![1.0, 0.0])).unwrap();
        idx.add(entry(9, vec![1.0, 0.0])).unwrap();
        let hits = mips_search_flat(&idx, &[1.0, 1.0], 3).unwrap();
        let ids: Vec<u64> = hits.iter().map(|h| h.phrase_id).collect();
        assert_eq!(ids, vec![2, 5, 9]);
    }

    pub(crate) fn random_index(n: usize, dim: usize, seed: u64) -> FlatIndex {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = FlatIndex::new();
        for i in 0..n {
            let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            idx.add(entry(i as u64, v)).unwrap();
        }
        idx
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn flat_matches_bruteforce(seed in 0u64..500, k in 1usize..20) {
            let idx = random_index(50, 8, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdead);
            let q: Vec<f32> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let got = mips_search_flat(&idx, &q, k).unwrap();
            // brute force: same accumulation order, explicit sort
            let mut all: Vec<(u64, f32)> = (0..idx.len())
                .map(|o| {
                    let v = idx.vector(o);
                    let mut s = 0.0f32;
                    for (x, y) in v.iter().zip(&q) { s += x * y; }
                    (idx.meta(o).phrase_id, s)
                })
                .collect();
            all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            all.truncate(k);
            let got_pairs: Vec<(u64, f32)> = got.iter().map(|h| (h.phrase_id, h.score)).collect();
            prop_assert_eq!(got_pairs, all);
        }
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx.dpix");
        let idx = PhraseIndex {
            flat: random_index(10, 4, 7),
            ivf: None,
        };
        save_index(&idx, &path).unwrap();
        let loaded = load_index(&path).unwrap();
        assert_eq!(idx, loaded);
        // bit-exact: saving the loaded index reproduces the file
        let path2 = dir.path().join("idx2.dpix");
        save_index(&loaded, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx.dpix");
        let idx = PhraseIndex {
            flat: random_index(10, 4, 7),
            ivf: None,
        };
        save_index(&idx, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        for cut in [3, 10, bytes.len() / 2, bytes.len() - 1] {
            let path_cut = dir.path().join("cut.dpix");
            std::fs::write(&path_cut, &bytes[..cut]).unwrap();
            assert!(load_index(&path_cut).is_err(), "cut at {cut} must fail");
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.dpix");
        std::fs::write(&path, b"NOPE0000000000000000000000").unwrap();
        assert!(matches!(load_index(&path), Err(IndexError::BadMagic)));
    }

    #[test]
    fn file_size_arithmetic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx.dpix");
        let idx = PhraseIndex {
            flat: random_index(6, 3, 1),
            ivf: None,
        };
        save_index(&idx, &path).unwrap();
        let meta = serde_json::to_vec(&idx.flat.meta).unwrap();
        // header: magic 4 + version 4 + flags 4 + dim 4 + count 8 = 24
        let expected = 24 + 6 * 3 * 4 + 8 + meta.len();
        assert_eq!(std::fs::read(&path).unwrap().len(), expected);
    }
}
