//! Query-projection training: fit a linear map from question-embedding space
//! to phrase-embedding space so that the inner product with the gold phrase
//! dominates the in-batch negatives, optionally pulling the score
//! distribution toward ingested teacher scores.
//!
//! The combined objective is `L = (1 - lambda) * CE + lambda * KL` where CE
//! is softmax cross-entropy of the gold candidate and KL is
//! `KL(softmax(teacher / tau) || softmax(student / tau))`. Training math runs
//! in f64; the on-disk projection container stores f32.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binio;

const MAGIC: &[u8; 4] = b"DPQW";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dimension mismatch: {context}")]
    Dimension { context: String },
    #[error("gold index {gold} out of range for pool of {pool}")]
    GoldOutOfRange { gold: usize, pool: usize },
    #[error("teacher scores length {got} does not match pool size {pool}")]
    TeacherLength { got: usize, pool: usize },
    #[error("loss became non-finite at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("not a projection file (bad magic)")]
    BadMagic,
    #[error("unsupported projection container version {0}")]
    BadVersion(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Trainable linear map, `rows x cols` = phrase dim x question dim.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryProjection {
    pub rows: usize,
    pub cols: usize,
    /// Row-major weights.
    pub weights: Vec<f64>,
}

impl QueryProjection {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        QueryProjection {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
        }
    }

    /// Identity on the leading diagonal plus seeded uniform noise.
    pub fn identity_with_noise(rows: usize, cols: usize, noise: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = vec![0.0f64; rows * cols];
        for (i, w) in weights.iter_mut().enumerate() {
            let (r, c) = (i / cols, i % cols);
            let diag = if r == c { 1.0 } else { 0.0 };
            *w = diag + rng.random_range(-noise..=noise);
        }
        QueryProjection {
            rows,
            cols,
            weights,
        }
    }

    /// `W q`: project a question vector into phrase space.
    pub fn project(&self, q: &[f64]) -> Result<Vec<f64>, TrainError> {
        if q.len() != self.cols {
            return Err(TrainError::Dimension {
                context: format!(
                    "question vector has {} entries, projection expects {}",
                    q.len(),
                    self.cols
                ),
            });
        }
        let mut out = vec![0.0f64; self.rows];
        for (r, slot) in out.iter_mut().enumerate() {
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (w, x) in row.iter().zip(q) {
                acc += w * x;
            }
            *slot = acc;
        }
        Ok(out)
    }

    /// Container layout: magic "DPQW" | version u32 | rows u32 | cols u32 |
    /// rows*cols f32 LE row-major.
    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let file = File::create(path)?;
        let mut w = BufWriter::new(file);
        w.write_all(MAGIC)?;
        binio::write_u32(&mut w, VERSION)?;
        binio::write_u32(&mut w, self.rows as u32)?;
        binio::write_u32(&mut w, self.cols as u32)?;
        let f32s: Vec<f32> = self.weights.iter().map(|&x| x as f32).collect();
        binio::write_f32_slice(&mut w, &f32s)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let file = File::open(path)?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(TrainError::BadMagic);
        }
        let version = binio::read_u32(&mut r)?;
        if version != VERSION {
            return Err(TrainError::BadVersion(version));
        }
        let rows = binio::read_u32(&mut r)? as usize;
        let cols = binio::read_u32(&mut r)? as usize;
        let f32s = binio::read_f32_vec(&mut r, rows * cols)?;
        binio::expect_eof(&mut r)?;
        Ok(QueryProjection {
            rows,
            cols,
            weights: f32s.iter().map(|&x| x as f64).collect(),
        })
    }
}

/// A training batch: questions, a shared candidate pool (the in-batch
/// negatives), the gold candidate per question and optional teacher scores
/// over the pool.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBatch {
    pub question_vectors: Vec<Vec<f64>>,
    pub candidate_vectors: Vec<Vec<f64>>,
    pub gold_index: Vec<usize>,
    pub teacher_scores: Option<Vec<Vec<f64>>>,
}

impl TrainBatch {
    pub fn validate(&self, proj: &QueryProjection) -> Result<(), TrainError> {
        let pool = self.candidate_vectors.len();
        if self.gold_index.len() != self.question_vectors.len() {
            return Err(TrainError::Dimension {
                context: format!(
                    "{} questions but {} gold indices",
                    self.question_vectors.len(),
                    self.gold_index.len()
                ),
            });
        }
        for q in &self.question_vectors {
            if q.len() != proj.cols {
                return Err(TrainError::Dimension {
                    context: format!("question dim {} != projection cols {}", q.len(), proj.cols),
                });
            }
        }
        for p in &self.candidate_vectors {
            if p.len() != proj.rows {
                return Err(TrainError::Dimension {
                    context: format!("candidate dim {} != projection rows {}", p.len(), proj.rows),
                });
            }
        }
        for &g in &self.gold_index {
            if g >= pool {
                return Err(TrainError::GoldOutOfRange { gold: g, pool });
            }
        }
        if let Some(teacher) = &self.teacher_scores {
            if teacher.len() != self.question_vectors.len() {
                return Err(TrainError::Dimension {
                    context: format!(
                        "{} teacher rows for {} questions",
                        teacher.len(),
                        self.question_vectors.len()
                    ),
                });
            }
            for t in teacher {
                if t.len() != pool {
                    return Err(TrainError::TeacherLength {
                        got: t.len(),
                        pool,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Questions per batch when batches are assembled from flat inputs.
    pub batch_size: usize,
    /// Weight of the distillation term; only applied when teacher scores are
    /// present.
    pub distill_weight: f64,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 100,
            batch_size: 32,
            distill_weight: 0.5,
            temperature: 1.0,
            seed: 0,
        }
    }
}

/// Scores for every question in the batch: `s[i][j] = <W q_i, p_j>`.
pub fn score_matrix(
    proj: &QueryProjection,
    batch: &TrainBatch,
) -> Result<Vec<Vec<f64>>, TrainError> {
    batch.validate(proj)?;
    let mut out = Vec::with_capacity(batch.question_vectors.len());
    for q in &batch.question_vectors {
        let projected = proj.project(q)?;
        let scores: Vec<f64> = batch
            .candidate_vectors
            .iter()
            .map(|p| projected.iter().zip(p).map(|(a, b)| a * b).sum())
            .collect();
        out.push(scores);
    }
    Ok(out)
}

fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    scores.iter().map(|s| s - max - log_sum).collect()
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    log_softmax(scores).iter().map(|l| l.exp()).collect()
}

/// `-log softmax(scores)[gold]`, max-shifted for stability.
pub fn loss_contrastive(scores: &[f64], gold_index: usize) -> f64 {
    -log_softmax(scores)[gold_index]
}

/// `KL(softmax(teacher/tau) || softmax(student/tau))`; non-negative, zero iff
/// the two distributions coincide.
pub fn loss_distill(student: &[f64], teacher: &[f64], tau: f64) -> f64 {
    assert!(tau > 0.0, "temperature must be positive");
    assert_eq!(student.len(), teacher.len());
    let t_scaled: Vec<f64> = teacher.iter().map(|s| s / tau).collect();
    let s_scaled: Vec<f64> = student.iter().map(|s| s / tau).collect();
    let log_p = log_softmax(&t_scaled);
    let log_q = log_softmax(&s_scaled);
    log_p
        .iter()
        .zip(&log_q)
        .map(|(&lp, &lq)| {
            let p = lp.exp();
            if p == 0.0 {
                0.0
            } else {
                p * (lp - lq)
            }
        })
        .sum()
}

fn effective_lambda(batch: &TrainBatch, config: &TrainConfig) -> f64 {
    if batch.teacher_scores.is_some() {
        config.distill_weight
    } else {
        0.0
    }
}

/// Mean combined loss over the batch.
pub fn batch_loss(
    proj: &QueryProjection,
    batch: &TrainBatch,
    config: &TrainConfig,
) -> Result<f64, TrainError> {
    let scores = score_matrix(proj, batch)?;
    let lambda = effective_lambda(batch, config);
    let n = scores.len().max(1);
    let mut total = 0.0;
    for (i, s) in scores.iter().enumerate() {
        let ce = loss_contrastive(s, batch.gold_index[i]);
        let kl = match &batch.teacher_scores {
            Some(teacher) => loss_distill(s, &teacher[i], config.temperature),
            None => 0.0,
        };
        total += (1.0 - lambda) * ce + lambda * kl;
    }
    Ok(total / n as f64)
}

/// Analytic gradient of the mean combined loss with respect to W.
///
/// Per question, d L / d s_j is `(1-lambda) * (softmax(s)_j - [j = gold])`
/// plus `lambda / tau * (softmax(s/tau)_j - softmax(t/tau)_j)`; scores are
/// bilinear so the weight gradient is the outer product of the
/// score-gradient-weighted candidate sum with the question vector.
pub fn gradient(
    proj: &QueryProjection,
    batch: &TrainBatch,
    config: &TrainConfig,
) -> Result<Vec<f64>, TrainError> {
    let scores = score_matrix(proj, batch)?;
    let lambda = effective_lambda(batch, config);
    let tau = config.temperature;
    let n = scores.len().max(1);
    let mut grad = vec![0.0f64; proj.rows * proj.cols];
    for (i, s) in scores.iter().enumerate() {
        let probs = softmax(s);
        let distill_probs = match &batch.teacher_scores {
            Some(teacher) => {
                let s_scaled: Vec<f64> = s.iter().map(|x| x / tau).collect();
                let t_scaled: Vec<f64> = teacher[i].iter().map(|x| x / tau).collect();
                Some((softmax(&s_scaled), softmax(&t_scaled)))
            }
            None => None,
        };
        // gradient w.r.t. the score vector
        let g_s: Vec<f64> = (0..s.len())
            .map(|j| {
                let hard = probs[j] - if j == batch.gold_index[i] { 1.0 } else { 0.0 };
                let soft = match &distill_probs {
                    Some((qs, pt)) => (qs[j] - pt[j]) / tau,
                    None => 0.0,
                };
                (1.0 - lambda) * hard + lambda * soft
            })
            .collect();
        // u = sum_j g_s[j] * p_j, then grad += u q^T
        let mut u = vec![0.0f64; proj.rows];
        for (j, p) in batch.candidate_vectors.iter().enumerate() {
            let g = g_s[j];
            if g == 0.0 {
                continue;
            }
            for (r, &pv) in p.iter().enumerate() {
                u[r] += g * pv;
            }
        }
        let q = &batch.question_vectors[i];
        for r in 0..proj.rows {
            let ur = u[r];
            if ur == 0.0 {
                continue;
            }
            let row = &mut grad[r * proj.cols..(r + 1) * proj.cols];
            for (c, &qv) in q.iter().enumerate() {
                row[c] += ur * qv;
            }
        }
    }
    for g in &mut grad {
        *g /= n as f64;
    }
    Ok(grad)
}

/// Training outcome: the fitted projection and mean loss per epoch.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub projection: QueryProjection,
    pub epoch_mean_loss: Vec<f64>,
}

/// Plain gradient descent over the given batches; deterministic for a fixed
/// starting projection.
pub fn train(
    batches: &[TrainBatch],
    config: &TrainConfig,
    initial: QueryProjection,
) -> Result<TrainOutcome, TrainError> {
    let mut proj = initial;
    for batch in batches {
        batch.validate(&proj)?;
    }
    let mut epoch_mean_loss = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut epoch_loss = 0.0;
        for batch in batches {
            let loss = batch_loss(&proj, batch, config)?;
            if !loss.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            epoch_loss += loss;
            let grad = gradient(&proj, batch, config)?;
            for (w, g) in proj.weights.iter_mut().zip(&grad) {
                *w -= config.learning_rate * g;
            }
        }
        epoch_mean_loss.push(epoch_loss / batches.len().max(1) as f64);
    }
    Ok(TrainOutcome {
        projection: proj,
        epoch_mean_loss,
    })
}

/// Fraction of questions whose gold candidate gets the highest score.
pub fn top1_accuracy(proj: &QueryProjection, batch: &TrainBatch) -> Result<f64, TrainError> {
    let scores = score_matrix(proj, batch)?;
    if scores.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (i, s) in scores.iter().enumerate() {
        let argmax = s
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
            .map(|(j, _)| j)
            .unwrap();
        if argmax == batch.gold_index[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / scores.len() as f64)
}

/// Softened gold one-hot plus seeded noise: a stand-in for an ingested
/// reading-comprehension teacher.
pub fn synthetic_teacher_scores(
    pool_size: usize,
    gold_index: usize,
    sharpness: f64,
    noise: f64,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..pool_size)
        .map(|j| {
            let base = if j == gold_index { sharpness } else { 0.0 };
            base + rng.random_range(-noise..=noise)
        })
        .collect()
}

/// Side-by-side report of top-1 retrieval accuracy with and without the
/// distillation term. No ordering is asserted; the effect is data-dependent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationReport {
    pub distill_weight: f64,
    pub top1_with_distillation: f64,
    pub top1_without_distillation: f64,
    pub difference: f64,
}

/// Train twice, with `lambda = 0` and with the configured weight, and report
/// both accuracies on `eval_batch`.
pub fn ablate_distillation(
    train_batches: &[TrainBatch],
    eval_batch: &TrainBatch,
    config: &TrainConfig,
    initial: &QueryProjection,
) -> Result<AblationReport, TrainError> {
    let without_cfg = TrainConfig {
        distill_weight: 0.0,
        ..config.clone()
    };
    let without = train(train_batches, &without_cfg, initial.clone())?;
    let with = train(train_batches, config, initial.clone())?;
    let acc_without = top1_accuracy(&without.projection, eval_batch)?;
    let acc_with = top1_accuracy(&with.projection, eval_batch)?;
    Ok(AblationReport {
        distill_weight: config.distill_weight,
        top1_with_distillation: acc_with,
        top1_without_distillation: acc_without,
        difference: acc_with - acc_without,
    })
}
