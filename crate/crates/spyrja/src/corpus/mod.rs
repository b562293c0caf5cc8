//! QA data model shared by every other module: documents, question records,
//! word tokenization and phrase-span enumeration.
//!
//! All character offsets in this crate are counted in Unicode code points,
//! never bytes. Translated Icelandic text is full of multi-byte characters
//! and code points keep offsets encoding-independent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod squad;

pub use squad::{parse_squad_json, write_squad_json, ParsedSquad, SkippedRecord};

/// A corpus document: the unit contexts and phrases are extracted from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub text: String,
    /// BCP-47-ish language tag, e.g. "is" or "en".
    pub lang: String,
}

/// One gold answer: its surface text and where it starts in the context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    /// Offset of the first answer code point within the context.
    pub char_start: usize,
}

/// One question tied to a context document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QARecord {
    pub id: String,
    pub question: String,
    /// Id of the [`Document`] holding the context.
    pub context_ref: String,
    pub answers: Vec<Answer>,
    pub is_impossible: bool,
}

/// A word produced by [`tokenize_words`], with code-point offsets into the
/// source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordToken {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

/// A contiguous word window inside a document, the unit that gets embedded
/// and indexed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseSpan {
    pub doc_id: String,
    /// Token window, inclusive-exclusive.
    pub word_start: usize,
    pub word_end: usize,
    /// Code-point offsets of the window in the document text.
    pub char_start: usize,
    pub char_end: usize,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("record {record_id}: answer {answer_idx} does not match context at offset {char_start}: expected {expected:?}, found {found:?}")]
    AnswerMismatch {
        record_id: String,
        answer_idx: usize,
        char_start: usize,
        expected: String,
        found: String,
    },
    #[error("record {record_id}: answerable record has no answers")]
    MissingAnswers { record_id: String },
    #[error("record {record_id}: answer {answer_idx} overruns context ({end} > {len} code points)")]
    AnswerOutOfBounds {
        record_id: String,
        answer_idx: usize,
        end: usize,
        len: usize,
    },
    #[error("line {line}: {source}")]
    Jsonl {
        line: usize,
        source: serde_json::Error,
    },
}

/// Length of a string in code points.
pub fn cp_len(s: &str) -> usize {
    s.chars().count()
}

/// Substring by code-point offsets, `start` inclusive, `end` exclusive.
/// Out-of-range offsets clamp to the end of the string.
pub fn cp_slice(s: &str, start: usize, end: usize) -> String {
    s.chars().skip(start).take(end.saturating_sub(start)).collect()
}

/// Check every answer of `record` against its context: the substring at
/// `[char_start, char_start + len)` must reproduce the answer text exactly.
pub fn validate_record(record: &QARecord, context: &str) -> Result<(), CorpusError> {
    if !record.is_impossible && record.answers.is_empty() {
        return Err(CorpusError::MissingAnswers {
            record_id: record.id.clone(),
        });
    }
    let ctx_len = cp_len(context);
    for (idx, ans) in record.answers.iter().enumerate() {
        let ans_len = cp_len(&ans.text);
        let end = ans.char_start + ans_len;
        if end > ctx_len {
            return Err(CorpusError::AnswerOutOfBounds {
                record_id: record.id.clone(),
                answer_idx: idx,
                end,
                len: ctx_len,
            });
        }
        let found = cp_slice(context, ans.char_start, end);
        if found != ans.text {
            return Err(CorpusError::AnswerMismatch {
                record_id: record.id.clone(),
                answer_idx: idx,
                char_start: ans.char_start,
                expected: ans.text.clone(),
                found,
            });
        }
    }
    Ok(())
}

/// Split `text` into words on runs of Unicode whitespace. Punctuation stays
/// attached to its word; the fuzzy matcher is responsible for absorbing that
/// noise. Total on any input; empty input gives an empty list.
pub fn tokenize_words(text: &str) -> Vec<WordToken> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0usize;
    for (i, ch) in text.chars().enumerate() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                tokens.push(WordToken {
                    text: std::mem::take(&mut current),
                    char_start: start,
                    char_end: i,
                });
            }
        } else {
            if current.is_empty() {
                start = i;
            }
            current.push(ch);
        }
    }
    if !current.is_empty() {
        let end = start + current.chars().count();
        tokens.push(WordToken {
            text: current,
            char_start: start,
            char_end: end,
        });
    }
    tokens
}

/// Enumerate every contiguous word window of `document` whose length in
/// words lies in `[min_words, max_words]`.
pub fn enumerate_spans(document: &Document, min_words: usize, max_words: usize) -> Vec<PhraseSpan> {
    assert!(
        1 <= min_words && min_words <= max_words,
        "span bounds must satisfy 1 <= min_words <= max_words"
    );
    let tokens = tokenize_words(&document.text);
    spans_from_tokens(&document.id, &tokens, min_words, max_words)
}

/// Same as [`enumerate_spans`] but over pre-tokenized text.
pub fn spans_from_tokens(
    doc_id: &str,
    tokens: &[WordToken],
    min_words: usize,
    max_words: usize,
) -> Vec<PhraseSpan> {
    assert!(1 <= min_words && min_words <= max_words);
    let n = tokens.len();
    let mut spans = Vec::new();
    for start in 0..n {
        let max_end = usize::min(n, start + max_words);
        for end in (start + min_words)..=max_end {
            spans.push(PhraseSpan {
                doc_id: doc_id.to_string(),
                word_start: start,
                word_end: end,
                char_start: tokens[start].char_start,
                char_end: tokens[end - 1].char_end,
            });
        }
    }
    spans
}

/// Read documents from JSONL, one `{id, title, text, lang}` object per line.
pub fn read_documents_jsonl(bytes: &[u8]) -> Result<Vec<Document>, CorpusError> {
    let text = String::from_utf8_lossy(bytes);
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document =
            serde_json::from_str(line).map_err(|source| CorpusError::Jsonl { line: i + 1, source })?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Write documents as JSONL.
pub fn write_documents_jsonl(docs: &[Document]) -> Vec<u8> {
    let mut out = Vec::new();
    for doc in docs {
        // serialization of a plain struct cannot fail
        let line = serde_json::to_string(doc).expect("document serializes");
        out.extend_from_slice(line.as_bytes());
        out.push(b'\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenize_empty_is_empty() {
        assert!(tokenize_words("").is_empty());
    }

    #[test]
    fn tokenize_icelandic_offsets() {
        // "Jón fæddist árið 1990": offsets counted in code points, so the
        // multi-byte ó/æ/á/ð each count once.
        let tokens = tokenize_words("Jón fæddist árið 1990");
        assert_eq!(tokens.len(), 4);
        assert_eq!(tokens[3].text, "1990");
        assert_eq!(tokens[3].char_start, 17);
        assert_eq!(tokens[3].char_end, 21);
    }

    #[test]
    fn tokenize_collapses_whitespace_runs() {
        let tokens = tokenize_words("a  b");
        assert_eq!(tokens.len(), 2);
        assert_eq!(tokens[0].text, "a");
        assert_eq!(tokens[1].text, "b");
        assert_eq!(tokens[1].char_start, 3);
    }

    #[test]
    fn tokenize_keeps_punctuation_attached() {
        let tokens = tokenize_words("halló, heimur!");
        assert_eq!(tokens[0].text, "halló,");
        assert_eq!(tokens[1].text, "heimur!");
    }

    fn doc(text: &str) -> Document {
        Document {
            id: "d0".into(),
            title: String::new(),
            text: text.into(),
            lang: "is".into(),
        }
    }

    #[test]
    fn spans_three_words_max_two() {
        let spans = enumerate_spans(&doc("a b c"), 1, 2);
        assert_eq!(spans.len(), 5); // 3 unigrams + 2 bigrams
    }

    #[test]
    fn spans_three_words_max_twenty() {
        let spans = enumerate_spans(&doc("a b c"), 1, 20);
        assert_eq!(spans.len(), 6); // n(n+1)/2
    }

    #[test]
    fn spans_empty_document() {
        assert!(enumerate_spans(&doc(""), 1, 20).is_empty());
    }

    #[test]
    fn validate_accepts_exact_answer() {
        let rec = QARecord {
            id: "q0".into(),
            question: "Hvenær fæddist Jón?".into(),
            context_ref: "d0".into(),
            answers: vec![Answer {
                text: "1990".into(),
                char_start: 17,
            }],
            is_impossible: false,
        };
        validate_record(&rec, "Jón fæddist árið 1990").unwrap();
    }

    #[test]
    fn validate_rejects_shifted_offset() {
        let rec = QARecord {
            id: "q0".into(),
            question: String::new(),
            context_ref: "d0".into(),
            answers: vec![Answer {
                text: "1990".into(),
                char_start: 16,
            }],
            is_impossible: false,
        };
        assert!(matches!(
            validate_record(&rec, "Jón fæddist árið 1990"),
            Err(CorpusError::AnswerMismatch { .. })
        ));
    }

    #[test]
    fn validate_accepts_impossible_without_answers() {
        let rec = QARecord {
            id: "q0".into(),
            question: String::new(),
            context_ref: "d0".into(),
            answers: vec![],
            is_impossible: true,
        };
        validate_record(&rec, "whatever").unwrap();
    }

    /// Brute-force double loop the span enumeration is checked against.
    fn spans_oracle(n: usize, min_w: usize, max_w: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for s in 0..n {
            for e in (s + 1)..=n {
                let w = e - s;
                if w >= min_w && w <= max_w {
                    out.push((s, e));
                }
            }
        }
        out.sort();
        out
    }

    proptest! {
        #[test]
        fn tokens_reconstruct_source(text in "\\PC{0,60}") {
            let tokens = tokenize_words(&text);
            // each token matches its code-point slice and tokens are ordered
            let mut prev_end = 0usize;
            for t in &tokens {
                prop_assert!(t.char_start >= prev_end);
                prop_assert!(t.char_start < t.char_end);
                prop_assert_eq!(&cp_slice(&text, t.char_start, t.char_end), &t.text);
                prev_end = t.char_end;
            }
            // everything outside tokens is whitespace
            let chars: Vec<char> = text.chars().collect();
            let mut covered = vec![false; chars.len()];
            for t in &tokens {
                for c in covered.iter_mut().take(t.char_end).skip(t.char_start) {
                    *c = true;
                }
            }
            for (i, ch) in chars.iter().enumerate() {
                if !covered[i] {
                    prop_assert!(ch.is_whitespace());
                }
            }
        }

        #[test]
        fn span_enumeration_matches_oracle(
            words in proptest::collection::vec("[a-zð]{1,5}", 0..12),
            min_w in 1usize..3,
            extra in 0usize..20,
        ) {
            let max_w = min_w + extra;
            let text = words.join(" ");
            let d = doc(&text);
            let spans = enumerate_spans(&d, min_w, max_w);
            let got: Vec<(usize, usize)> = {
                let mut v: Vec<_> = spans.iter().map(|s| (s.word_start, s.word_end)).collect();
                v.sort();
                v
            };
            prop_assert_eq!(got, spans_oracle(words.len(), min_w, max_w));
            // offset consistency: char slice equals the joined tokens with
            // original separators, which for single spaces is the join
            for s in &spans {
                let sliced = cp_slice(&text, s.char_start, s.char_end);
                let joined = words[s.word_start..s.word_end].join(" ");
                prop_assert_eq!(sliced, joined);
            }
        }
    }
}
