//! Fit the query projection on a separable toy set, check the gradient
//! against finite differences, and run the distillation ablation.
//!
//! ```bash
//! cargo run -p spyrja --example train_projection
//! ```

use spyrja::qtrain::{
    ablate_distillation, batch_loss, gradient, synthetic_teacher_scores, top1_accuracy, train,
    QueryProjection, TrainBatch, TrainConfig,
};

fn basis(dim: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn main() {
    let dim = 8;
    let batch = TrainBatch {
        question_vectors: basis(dim),
        candidate_vectors: basis(dim), // 8 orthogonal gold phrases
        gold_index: (0..dim).collect(),
        teacher_scores: None,
    };
    let config = TrainConfig {
        learning_rate: 2.0,
        epochs: 200,
        distill_weight: 0.0,
        ..Default::default()
    };
    let init = QueryProjection::identity_with_noise(dim, dim, 0.05, 42);

    // sanity: the analytic gradient against a one-sided numeric probe
    let g = gradient(&init, &batch, &config).unwrap();
    let mut probe = init.clone();
    let h = 1e-6;
    probe.weights[0] += h;
    let numeric = (batch_loss(&probe, &batch, &config).unwrap()
        - batch_loss(&init, &batch, &config).unwrap())
        / h;
    println!("gradient[0] analytic {:.6} vs numeric {:.6}", g[0], numeric);

    let outcome = train(std::slice::from_ref(&batch), &config, init.clone()).unwrap();
    println!(
        "\ncontrastive training: loss {:.4} -> {:.4} over {} epochs, top-1 accuracy {:.0}%",
        outcome.epoch_mean_loss.first().unwrap(),
        outcome.epoch_mean_loss.last().unwrap(),
        config.epochs,
        100.0 * top1_accuracy(&outcome.projection, &batch).unwrap()
    );

    // distillation: train against a soft teacher and compare
    let teacher: Vec<Vec<f64>> = (0..dim)
        .map(|i| synthetic_teacher_scores(dim, i, 8.0, 0.5, i as u64))
        .collect();
    let distill_batch = TrainBatch {
        teacher_scores: Some(teacher),
        ..batch.clone()
    };
    let distill_config = TrainConfig {
        distill_weight: 0.5,
        ..config.clone()
    };
    let report = ablate_distillation(&[distill_batch], &batch, &distill_config, &init).unwrap();
    println!("\ndistillation ablation (lambda = {}):", report.distill_weight);
    println!("  top-1 without distillation: {:.1}%", 100.0 * report.top1_without_distillation);
    println!("  top-1 with distillation:    {:.1}%", 100.0 * report.top1_with_distillation);
    println!("  difference:                 {:+.1} points", 100.0 * report.difference);

    // persist and reload
    let path = std::env::temp_dir().join("spyrja-example.dpqw");
    outcome.projection.save(&path).unwrap();
    let loaded = QueryProjection::load(&path).unwrap();
    println!(
        "\nprojection saved to {} ({}x{}), reload matches: {}",
        path.display(),
        loaded.rows,
        loaded.cols,
        loaded.rows == outcome.projection.rows && loaded.cols == outcome.projection.cols
    );
}
