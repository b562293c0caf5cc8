//! IVF accelerator: k-means codebook over the stored vectors, searching only
//! the `nprobe` centroid lists with the largest inner product against the
//! query. With `nprobe` equal to the centroid count the scan covers every
//! list and the result is identical to the flat search.

use std::io::{Read, Write};

use crate::binio;

use super::kmeans::kmeans;
use super::{dot, FlatIndex, IndexError, ScoredPhrase};

#[derive(Debug, Clone, PartialEq)]
pub struct IvfIndex {
    dim: usize,
    /// n_centroids * dim, row-major.
    centroids: Vec<f32>,
    /// Entry ordinals per centroid; every ordinal appears in exactly one list.
    lists: Vec<Vec<u32>>,
    /// Probe count used when the caller does not specify one.
    pub default_nprobe: usize,
}

impl IvfIndex {
    pub fn n_centroids(&self) -> usize {
        self.lists.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn list(&self, centroid: usize) -> &[u32] {
        &self.lists[centroid]
    }

    pub(super) fn write_block<W: Write>(&self, w: &mut W) -> Result<(), IndexError> {
        binio::write_u32(w, self.n_centroids() as u32)?;
        binio::write_u32(w, self.default_nprobe as u32)?;
        binio::write_f32_slice(w, &self.centroids)?;
        for list in &self.lists {
            binio::write_u64(w, list.len() as u64)?;
            for &ordinal in list {
                binio::write_u32(w, ordinal)?;
            }
        }
        Ok(())
    }

    pub(super) fn read_block<R: Read>(
        r: &mut R,
        dim: usize,
        count: usize,
    ) -> Result<IvfIndex, IndexError> {
        let n_centroids = binio::read_u32(r)? as usize;
        let default_nprobe = binio::read_u32(r)? as usize;
        let centroids = binio::read_f32_vec(r, n_centroids * dim)?;
        let mut lists = Vec::with_capacity(n_centroids);
        let mut seen = 0usize;
        for _ in 0..n_centroids {
            let len = binio::read_u64(r)? as usize;
            let mut list = Vec::with_capacity(len);
            for _ in 0..len {
                let ordinal = binio::read_u32(r)?;
                if ordinal as usize >= count {
                    return Err(IndexError::CorruptMetadata(format!(
                        "ivf list entry {ordinal} out of range for {count} vectors"
                    )));
                }
                list.push(ordinal);
            }
            seen += len;
            lists.push(list);
        }
        if seen != count {
            return Err(IndexError::CorruptMetadata(format!(
                "ivf lists cover {seen} of {count} vectors"
            )));
        }
        Ok(IvfIndex {
            dim,
            centroids,
            lists,
            default_nprobe,
        })
    }
}

/// Cluster the flat index into `n_centroids` lists.
pub fn build_ivf(flat: &FlatIndex, n_centroids: usize, seed: u64) -> Result<IvfIndex, IndexError> {
    let dim = flat.dim().ok_or(IndexError::BadClusterCount {
        k: n_centroids,
        n: 0,
    })?;
    if flat.len() > u32::MAX as usize {
        return Err(IndexError::CorruptMetadata(
            "index too large for ivf ordinals".into(),
        ));
    }
    let outcome = kmeans(flat.raw_vectors(), dim, n_centroids, 25, seed)?;
    let mut lists = vec![Vec::new(); n_centroids];
    for (ordinal, &c) in outcome.assignments.iter().enumerate() {
        lists[c].push(ordinal as u32);
    }
    Ok(IvfIndex {
        dim,
        centroids: outcome.centroids,
        lists,
        default_nprobe: n_centroids,
    })
}

/// Top-`k` restricted to the `nprobe` centroid lists with the largest
/// centroid inner product. Same ordering contract as the flat search.
pub fn mips_search_ivf(
    ivf: &IvfIndex,
    flat: &FlatIndex,
    query: &[f32],
    k: usize,
    nprobe: usize,
) -> Result<Vec<ScoredPhrase>, IndexError> {
    if flat.is_empty() {
        return Ok(Vec::new());
    }
    let dim = flat.dim().unwrap();
    if query.len() != dim {
        return Err(IndexError::QueryDimension {
            expected: dim,
            got: query.len(),
        });
    }
    let n_centroids = ivf.n_centroids();
    if nprobe == 0 || nprobe > n_centroids {
        return Err(IndexError::NprobeOutOfRange {
            nprobe,
            n_centroids,
        });
    }
    let mut ranked: Vec<(usize, f32)> = (0..n_centroids)
        .map(|c| (c, dot(&ivf.centroids[c * dim..(c + 1) * dim], query)))
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));

    let mut scored = Vec::new();
    for &(c, _) in ranked.iter().take(nprobe) {
        for &ordinal in &ivf.lists[c] {
            let ordinal = ordinal as usize;
            scored.push(ScoredPhrase {
                ordinal,
                phrase_id: flat.meta(ordinal).phrase_id,
                score: dot(flat.vector(ordinal), query),
            });
        }
    }
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.phrase_id.cmp(&b.phrase_id))
    });
    scored.truncate(k);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::super::tests::random_index;
    use super::super::{load_index, mips_search_flat, save_index, PhraseIndex};
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_probe_equals_flat() {
        let flat = random_index(200, 8, 21);
        let ivf = build_ivf(&flat, 10, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let q: Vec<f32> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = mips_search_ivf(&ivf, &flat, &q, 10, 10).unwrap();
            let b = mips_search_flat(&flat, &q, 10).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn single_centroid_equals_flat() {
        let flat = random_index(50, 4, 2);
        let ivf = build_ivf(&flat, 1, 0).unwrap();
        let q = vec![0.3, -0.2, 0.9, 0.1];
        assert_eq!(
            mips_search_ivf(&ivf, &flat, &q, 5, 1).unwrap(),
            mips_search_flat(&flat, &q, 5).unwrap()
        );
    }

    #[test]
    fn every_ordinal_in_exactly_one_list() {
        let flat = random_index(123, 6, 9);
        let ivf = build_ivf(&flat, 7, 1).unwrap();
        let mut seen = vec![0usize; flat.len()];
        for c in 0..ivf.n_centroids() {
            for &o in ivf.list(c) {
                seen[o as usize] += 1;
            }
        }
        assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn nprobe_bounds_checked() {
        let flat = random_index(20, 4, 3);
        let ivf = build_ivf(&flat, 4, 0).unwrap();
        let q = vec![0.0; 4];
        assert!(matches!(
            mips_search_ivf(&ivf, &flat, &q, 3, 0),
            Err(IndexError::NprobeOutOfRange { .. })
        ));
        assert!(matches!(
            mips_search_ivf(&ivf, &flat, &q, 3, 5),
            Err(IndexError::NprobeOutOfRange { .. })
        ));
    }

    #[test]
    fn ivf_persists_with_flat() {
        let flat = random_index(64, 4, 13);
        let ivf = build_ivf(&flat, 6, 2).unwrap();
        let index = PhraseIndex {
            flat,
            ivf: Some(ivf),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("with_ivf.dpix");
        save_index(&index, &path).unwrap();
        let loaded = load_index(&path).unwrap();
        assert_eq!(index, loaded);
    }
}
