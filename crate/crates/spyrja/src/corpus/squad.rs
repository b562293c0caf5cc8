//! SQuAD v1.1 / v2.0 JSON parsing and writing.
//!
//! Paragraph contexts become [`Document`]s with synthetic ids
//! (`{dataset}-p{ordinal}`); `answer_start` offsets are validated against the
//! context and records that fail validation are skipped and reported rather
//! than aborting the parse — translated corpora are expected to be noisy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{validate_record, Answer, Document, QARecord};

#[derive(Debug, Error)]
pub enum SquadError {
    #[error("malformed SQuAD JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("record {record_id} references unknown context {context_ref}")]
    UnknownContextRef {
        record_id: String,
        context_ref: String,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct SquadFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    version: Option<String>,
    data: Vec<SquadArticle>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SquadArticle {
    #[serde(default)]
    title: String,
    paragraphs: Vec<SquadParagraph>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SquadParagraph {
    context: String,
    qas: Vec<SquadQa>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SquadQa {
    id: String,
    question: String,
    answers: Vec<SquadAnswer>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    is_impossible: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct SquadAnswer {
    text: String,
    answer_start: usize,
}

/// A record dropped during parsing, with the reason it failed validation.
#[derive(Debug, Clone, Serialize)]
pub struct SkippedRecord {
    pub id: String,
    pub reason: String,
}

/// Parse result: validated records plus a report of what was skipped.
#[derive(Debug)]
pub struct ParsedSquad {
    pub documents: Vec<Document>,
    pub records: Vec<QARecord>,
    pub skipped: Vec<SkippedRecord>,
}

impl ParsedSquad {
    pub fn skipped_count(&self) -> usize {
        self.skipped.len()
    }
}

/// Parse SQuAD-schema JSON. `dataset_name` seeds the synthetic document ids,
/// `lang` is recorded on every produced document.
pub fn parse_squad_json(
    bytes: &[u8],
    dataset_name: &str,
    lang: &str,
) -> Result<ParsedSquad, SquadError> {
    let file: SquadFile = serde_json::from_slice(bytes).map_err(|e| SquadError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut documents = Vec::new();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut paragraph_ordinal = 0usize;

    for article in file.data {
        for paragraph in article.paragraphs {
            let doc_id = format!("{dataset_name}-p{paragraph_ordinal}");
            paragraph_ordinal += 1;
            for qa in paragraph.qas {
                let record = QARecord {
                    id: qa.id,
                    question: qa.question,
                    context_ref: doc_id.clone(),
                    answers: qa
                        .answers
                        .iter()
                        .map(|a| Answer {
                            text: a.text.clone(),
                            char_start: a.answer_start,
                        })
                        .collect(),
                    is_impossible: qa.is_impossible,
                };
                match validate_record(&record, &paragraph.context) {
                    Ok(()) => records.push(record),
                    Err(e) => skipped.push(SkippedRecord {
                        id: record.id.clone(),
                        reason: e.to_string(),
                    }),
                }
            }
            documents.push(Document {
                id: doc_id,
                title: article.title.clone(),
                text: paragraph.context,
                lang: lang.to_string(),
            });
        }
    }

    Ok(ParsedSquad {
        documents,
        records,
        skipped,
    })
}

/// Write documents and records back to SQuAD-schema JSON. Documents keep
/// their input order so a re-parse with the same dataset name regenerates
/// identical synthetic ids; consecutive documents sharing a title fold into
/// one article.
pub fn write_squad_json(
    documents: &[Document],
    records: &[QARecord],
) -> Result<Vec<u8>, SquadError> {
    for rec in records {
        if !documents.iter().any(|d| d.id == rec.context_ref) {
            return Err(SquadError::UnknownContextRef {
                record_id: rec.id.clone(),
                context_ref: rec.context_ref.clone(),
            });
        }
    }

    let mut articles: Vec<SquadArticle> = Vec::new();
    for doc in documents {
        let qas: Vec<SquadQa> = records
            .iter()
            .filter(|r| r.context_ref == doc.id)
            .map(|r| SquadQa {
                id: r.id.clone(),
                question: r.question.clone(),
                answers: r
                    .answers
                    .iter()
                    .map(|a| SquadAnswer {
                        text: a.text.clone(),
                        answer_start: a.char_start,
                    })
                    .collect(),
                is_impossible: r.is_impossible,
            })
            .collect();
        let paragraph = SquadParagraph {
            context: doc.text.clone(),
            qas,
        };
        match articles.last_mut() {
            Some(last) if last.title == doc.title => last.paragraphs.push(paragraph),
            _ => articles.push(SquadArticle {
                title: doc.title.clone(),
                paragraphs: vec![paragraph],
            }),
        }
    }

    let file = SquadFile {
        version: None,
        data: articles,
    };
    let mut bytes = serde_json::to_vec_pretty(&file).expect("squad file serializes");
    bytes.push(b'\n');
    Ok(bytes)
}
