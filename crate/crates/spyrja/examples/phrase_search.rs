//! Phrase-vector store: exact inner-product search, the IVF accelerator, and
//! binary persistence.
//!
//! ```bash
//! cargo run -p spyrja --example phrase_search
//! ```

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spyrja::phrase_index::{
    build_ivf, load_index, mips_search_flat, mips_search_ivf, save_index, FlatIndex, PhraseEntry,
    PhraseIndex,
};

fn main() {
    // tiny hand-built index first
    let mut flat = FlatIndex::new();
    for (id, vector, text) in [
        (1u64, vec![1.0f32, 0.0], "fyrsta"),
        (2, vec![0.0, 1.0], "annað"),
        (3, vec![1.0, 1.0], "bæði"),
    ] {
        flat.add(PhraseEntry {
            phrase_id: id,
            doc_id: "d0".into(),
            char_start: 0,
            char_end: text.chars().count(),
            text: text.into(),
            vector,
        })
        .unwrap();
    }
    println!("query (2, 1) against three phrases:");
    for hit in mips_search_flat(&flat, &[2.0, 1.0], 3).unwrap() {
        println!("  phrase {} {:?} score {}", hit.phrase_id, flat.meta(hit.ordinal).text, hit.score);
    }

    // larger random index: IVF probes a fraction of the lists
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut big = FlatIndex::new();
    for i in 0..5_000u64 {
        let v: Vec<f32> = (0..32).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        big.add(PhraseEntry {
            phrase_id: i,
            doc_id: format!("d{}", i / 50),
            char_start: 0,
            char_end: 1,
            text: format!("phrase{i}"),
            vector: v,
        })
        .unwrap();
    }
    let ivf = build_ivf(&big, 16, 3).unwrap();
    let query: Vec<f32> = (0..32).map(|_| rng.random_range(-1.0f32..1.0)).collect();

    let exact = mips_search_flat(&big, &query, 5).unwrap();
    let probed = mips_search_ivf(&ivf, &big, &query, 5, 4).unwrap();
    let full = mips_search_ivf(&ivf, &big, &query, 5, 16).unwrap();
    println!("\n5k random vectors, 16 centroids:");
    println!("  flat top-5 ids:        {:?}", exact.iter().map(|h| h.phrase_id).collect::<Vec<_>>());
    println!("  ivf nprobe=4 top-5:    {:?}", probed.iter().map(|h| h.phrase_id).collect::<Vec<_>>());
    println!("  ivf nprobe=16 == flat: {}", full == exact);

    // persistence roundtrip
    let path = std::env::temp_dir().join("spyrja-example.dpix");
    let index = PhraseIndex { flat: big, ivf: Some(ivf) };
    save_index(&index, &path).unwrap();
    let loaded = load_index(&path).unwrap();
    println!(
        "\nsaved {} phrases to {} ({} bytes), reload identical: {}",
        loaded.flat.len(),
        path.display(),
        std::fs::metadata(&path).unwrap().len(),
        loaded == index
    );
}
