//! spyrja — a desk-scale cross-lingual QA toolkit.
//!
//! The crate covers the full life cycle of a translated extractive-QA system:
//! building machine-translated datasets with fuzzy answer-span alignment,
//! indexing phrase embeddings for maximum-inner-product search (exact or
//! IVF-accelerated), fitting a linear query projection with contrastive and
//! distillation losses, and serving and scoring answers with EM/F1 metrics.
//!
//! Start with the runnable examples, one per capability:
//!
//! ```text
//! cargo run -p spyrja --example align_answers          # fuzzy answer-span alignment
//! cargo run -p spyrja --example translate_dataset      # MT pipeline with a stub client and cache
//! cargo run -p spyrja --example bm25_search            # sparse BM25 baseline
//! cargo run -p spyrja --example phrase_search          # flat + IVF inner-product search
//! cargo run -p spyrja --example train_projection       # contrastive + distillation training
//! cargo run -p spyrja --example evaluate_predictions   # EM/F1 and top-k reports
//! cargo run -p spyrja --example serve_and_query        # HTTP query service
//! cargo run -p spyrja --example full_pipeline          # end-to-end toy build
//! ```
//!
//! A thin `spyrja` binary exposes the same operations as subcommands
//! (`align`, `translate`, `bm25`, `index`, `qtrain`, `eval`, `query`,
//! `serve`); see the README for the file formats involved.

pub mod align;
pub mod binio;
pub mod bm25;
pub mod cli;
pub mod corpus;
pub mod embed;
pub mod eval;
pub mod phrase_index;
pub mod qtrain;
pub mod serve;
pub mod translate;
