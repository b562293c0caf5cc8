//! Answer-span alignment: locate a translated answer inside an independently
//! translated context.
//!
//! The cascade tries, in order: exact search for the translated answer, exact
//! search for the original answer, fuzzy sliding-window search for the
//! translated answer, fuzzy search for the original answer. If nothing
//! reaches the similarity threshold the pair is discarded.
//!
//! The fuzzy stage slides windows of `w`, `w-1` and `w+1` words over the
//! context (where `w` is the word count of the answer) and scores each window
//! with a normalized Levenshtein similarity; a window is accepted when the
//! similarity reaches the threshold (0.9 by default, inclusive).

use std::collections::BTreeSet;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{cp_slice, tokenize_words, Answer, QARecord, WordToken};

/// How a record's answer was located, ordered by cascade priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    ExactTranslated,
    ExactOriginal,
    FuzzyTranslated,
    FuzzyOriginal,
    Discarded,
}

/// Outcome of aligning one answer against one context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub status: MatchKind,
    /// Code-point span in the context; absent iff discarded.
    pub span: Option<(usize, usize)>,
    /// Context substring at `span`.
    pub matched_text: Option<String>,
    /// 1.0 for exact matches, the window similarity for fuzzy ones.
    pub similarity: Option<f64>,
}

impl AlignmentResult {
    fn discarded() -> Self {
        AlignmentResult {
            status: MatchKind::Discarded,
            span: None,
            matched_text: None,
            similarity: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignmentConfig {
    /// Minimum normalized similarity a fuzzy window must reach (inclusive).
    pub threshold: f64,
    /// Window length offsets relative to the answer word count.
    pub window_deltas: Vec<i64>,
    /// Case-fold both sides before fuzzy comparison. Exact search stays
    /// case-sensitive.
    pub case_fold_fuzzy: bool,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig {
            threshold: 0.9,
            window_deltas: vec![0, -1, 1],
            case_fold_fuzzy: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("nothing to align: both translated and original answers are empty")]
    EmptyAnswers,
    #[error("threshold {0} outside [0, 1]")]
    BadThreshold(f64),
}

/// Unit-cost Levenshtein edit distance over code points.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let av: Vec<char> = a.chars().collect();
    let bv: Vec<char> = b.chars().collect();
    levenshtein_chars(&av, &bv, None).expect("unbounded distance always present")
}

/// Distance with the early-exit bound: `Some(d)` when `d <= bound`, `None`
/// otherwise. Decisions agree exactly with the unbounded DP.
pub fn levenshtein_within(a: &str, b: &str, bound: usize) -> Option<usize> {
    let av: Vec<char> = a.chars().collect();
    let bv: Vec<char> = b.chars().collect();
    levenshtein_chars(&av, &bv, Some(bound))
}

/// Two-row DP over the shorter string. With `bound = Some(k)` rows whose
/// minimum exceeds `k` abort early and distances above `k` come back as
/// `None`; decisions must match the unbounded DP exactly.
pub(crate) fn levenshtein_chars(a: &[char], b: &[char], bound: Option<usize>) -> Option<usize> {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if let Some(k) = bound {
        if long.len() - short.len() > k {
            return None;
        }
    }
    if short.is_empty() {
        return Some(long.len());
    }
    let n = short.len();
    let mut row: Vec<usize> = (0..=n).collect();
    for (j, &cb) in long.iter().enumerate() {
        let mut prev_diag = row[0];
        row[0] = j + 1;
        let mut row_min = row[0];
        for (i, &ca) in short.iter().enumerate() {
            let prev_here = row[i + 1];
            let subst = if ca == cb { prev_diag } else { prev_diag + 1 };
            let val = subst.min(prev_here + 1).min(row[i] + 1);
            row[i + 1] = val;
            prev_diag = prev_here;
            if val < row_min {
                row_min = val;
            }
        }
        if let Some(k) = bound {
            if row_min > k {
                return None;
            }
        }
    }
    let d = row[n];
    match bound {
        Some(k) if d > k => None,
        _ => Some(d),
    }
}

/// Normalized similarity `1 - d / max(|a|, |b|)` with lengths in code
/// points. Both strings empty is the degenerate identity, 1.0.
///
/// Computed as `(m - d) / m` so that rational values like 9/10 round to the
/// same f64 as the literal they are compared against.
pub fn normalized_similarity(a: &str, b: &str) -> f64 {
    let av: Vec<char> = a.chars().collect();
    let bv: Vec<char> = b.chars().collect();
    let m = av.len().max(bv.len());
    if m == 0 {
        return 1.0;
    }
    let d = levenshtein_chars(&av, &bv, None).unwrap();
    (m - d) as f64 / m as f64
}

fn similarity_from_distance(d: usize, m: usize) -> f64 {
    if m == 0 {
        1.0
    } else {
        (m - d) as f64 / m as f64
    }
}

/// Leftmost occurrence of `needle` in `context` as code-point offsets.
/// Empty needles never match.
pub fn find_exact(context: &str, needle: &str) -> Option<(usize, usize)> {
    if needle.is_empty() {
        return None;
    }
    let byte_idx = context.find(needle)?;
    let start = context[..byte_idx].chars().count();
    Some((start, start + needle.chars().count()))
}

fn fold_chars(chars: &[char]) -> Vec<char> {
    chars.iter().flat_map(|c| c.to_lowercase()).collect()
}

/// A fuzzy window hit: the context span and its similarity to the answer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuzzyMatch {
    pub char_start: usize,
    pub char_end: usize,
    pub similarity: f64,
}

/// Slide windows of the configured word counts over `tokens` and return the
/// best window whose similarity to `answer` reaches the threshold. Ties break
/// on higher similarity, then smaller start, then shorter window.
pub fn fuzzy_window_search(
    context: &str,
    tokens: &[WordToken],
    answer: &str,
    config: &AlignmentConfig,
) -> Option<FuzzyMatch> {
    let answer_words = tokenize_words(answer).len();
    if answer_words == 0 {
        return None;
    }
    let ctx_chars: Vec<char> = context.chars().collect();
    let answer_chars: Vec<char> = answer.chars().collect();
    let answer_cmp = if config.case_fold_fuzzy {
        fold_chars(&answer_chars)
    } else {
        answer_chars
    };

    let lengths: BTreeSet<usize> = config
        .window_deltas
        .iter()
        .filter_map(|&d| {
            let len = answer_words as i64 + d;
            (len >= 1).then_some(len as usize)
        })
        .collect();

    let mut best: Option<FuzzyMatch> = None;
    for &win_words in &lengths {
        if win_words > tokens.len() {
            continue;
        }
        for start_tok in 0..=(tokens.len() - win_words) {
            let char_start = tokens[start_tok].char_start;
            let char_end = tokens[start_tok + win_words - 1].char_end;
            let window = &ctx_chars[char_start..char_end];
            let folded;
            let window_cmp: &[char] = if config.case_fold_fuzzy {
                folded = fold_chars(window);
                &folded
            } else {
                window
            };
            let m = answer_cmp.len().max(window_cmp.len());
            if m == 0 {
                continue;
            }
            // any distance beyond this bound cannot reach the threshold
            let k = ((1.0 - config.threshold) * m as f64).ceil() as usize;
            let Some(d) = levenshtein_chars(&answer_cmp, window_cmp, Some(k)) else {
                continue;
            };
            let sim = similarity_from_distance(d, m);
            if sim < config.threshold {
                continue;
            }
            let candidate = FuzzyMatch {
                char_start,
                char_end,
                similarity: sim,
            };
            let better = match &best {
                None => true,
                Some(b) => {
                    candidate.similarity > b.similarity
                        || (candidate.similarity == b.similarity
                            && (candidate.char_start < b.char_start
                                || (candidate.char_start == b.char_start
                                    && (candidate.char_end - candidate.char_start)
                                        < (b.char_end - b.char_start))))
                }
            };
            if better {
                best = Some(candidate);
            }
        }
    }
    best
}

/// Run the full cascade for one answer pair against a context.
pub fn align_answer(
    context: &str,
    translated_answer: &str,
    original_answer: &str,
    config: &AlignmentConfig,
) -> Result<AlignmentResult, AlignError> {
    if translated_answer.is_empty() && original_answer.is_empty() {
        return Err(AlignError::EmptyAnswers);
    }
    if !(0.0..=1.0).contains(&config.threshold) {
        return Err(AlignError::BadThreshold(config.threshold));
    }

    if let Some((s, e)) = find_exact(context, translated_answer) {
        return Ok(AlignmentResult {
            status: MatchKind::ExactTranslated,
            span: Some((s, e)),
            matched_text: Some(cp_slice(context, s, e)),
            similarity: Some(1.0),
        });
    }
    if let Some((s, e)) = find_exact(context, original_answer) {
        return Ok(AlignmentResult {
            status: MatchKind::ExactOriginal,
            span: Some((s, e)),
            matched_text: Some(cp_slice(context, s, e)),
            similarity: Some(1.0),
        });
    }

    let tokens = tokenize_words(context);
    if !translated_answer.is_empty() {
        if let Some(m) = fuzzy_window_search(context, &tokens, translated_answer, config) {
            return Ok(AlignmentResult {
                status: MatchKind::FuzzyTranslated,
                span: Some((m.char_start, m.char_end)),
                matched_text: Some(cp_slice(context, m.char_start, m.char_end)),
                similarity: Some(m.similarity),
            });
        }
    }
    if !original_answer.is_empty() {
        if let Some(m) = fuzzy_window_search(context, &tokens, original_answer, config) {
            return Ok(AlignmentResult {
                status: MatchKind::FuzzyOriginal,
                span: Some((m.char_start, m.char_end)),
                matched_text: Some(cp_slice(context, m.char_start, m.char_end)),
                similarity: Some(m.similarity),
            });
        }
    }
    Ok(AlignmentResult::discarded())
}

/// Per-status counters for a dataset alignment run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentStats {
    pub total: usize,
    pub exact_translated: usize,
    pub exact_original: usize,
    pub fuzzy_translated: usize,
    pub fuzzy_original: usize,
    pub discarded: usize,
    /// Records whose translations were never supplied.
    pub missing: usize,
}

impl AlignmentStats {
    /// Discard rate in percent.
    pub fn discard_rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.discarded as f64 / self.total as f64 * 100.0
        }
    }

    pub fn count(&mut self, kind: MatchKind) {
        match kind {
            MatchKind::ExactTranslated => self.exact_translated += 1,
            MatchKind::ExactOriginal => self.exact_original += 1,
            MatchKind::FuzzyTranslated => self.fuzzy_translated += 1,
            MatchKind::FuzzyOriginal => self.fuzzy_original += 1,
            MatchKind::Discarded => self.discarded += 1,
        }
    }

    pub fn merge(&mut self, other: &AlignmentStats) {
        self.total += other.total;
        self.exact_translated += other.exact_translated;
        self.exact_original += other.exact_original;
        self.fuzzy_translated += other.fuzzy_translated;
        self.fuzzy_original += other.fuzzy_original;
        self.discarded += other.discarded;
        self.missing += other.missing;
    }

    /// Report object for the stats JSON file, rate included.
    pub fn to_report_json(&self) -> serde_json::Value {
        serde_json::json!({
            "total": self.total,
            "exact_translated": self.exact_translated,
            "exact_original": self.exact_original,
            "fuzzy_translated": self.fuzzy_translated,
            "fuzzy_original": self.fuzzy_original,
            "discarded": self.discarded,
            "missing": self.missing,
            "discard_rate": self.discard_rate(),
        })
    }
}

impl std::fmt::Display for AlignmentStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "total {} | exact-translated {} | exact-original {} | fuzzy-translated {} | fuzzy-original {} | missing {} | discarded {} ({:.1}%)",
            self.total,
            self.exact_translated,
            self.exact_original,
            self.fuzzy_translated,
            self.fuzzy_original,
            self.missing,
            self.discarded,
            self.discard_rate()
        )
    }
}

/// Align a whole dataset. `translated_contexts` maps record id to the
/// translated context text, `translated_answers` maps record id to the
/// translated answer texts, parallel to each record's answers.
///
/// Answers are aligned independently; a record survives when at least one
/// answer aligns and its stats category is the best status among them.
/// Records with no answers (unanswerable) pass through unchanged and only
/// count toward `total`.
pub fn align_dataset(
    records: &[QARecord],
    translated_contexts: &HashMap<String, String>,
    translated_answers: &HashMap<String, Vec<String>>,
    config: &AlignmentConfig,
) -> (Vec<QARecord>, AlignmentStats) {
    let mut stats = AlignmentStats::default();
    let mut out = Vec::new();
    for record in records {
        stats.total += 1;
        let Some(context) = translated_contexts.get(&record.id) else {
            stats.missing += 1;
            continue;
        };
        if record.answers.is_empty() {
            out.push(record.clone());
            continue;
        }
        let Some(answers_tr) = translated_answers.get(&record.id) else {
            stats.missing += 1;
            continue;
        };

        let mut best_status = MatchKind::Discarded;
        let mut aligned_answers = Vec::new();
        for (i, original) in record.answers.iter().enumerate() {
            let translated = answers_tr.get(i).map(String::as_str).unwrap_or("");
            let result = match align_answer(context, translated, &original.text, config) {
                Ok(r) => r,
                Err(_) => AlignmentResult::discarded(),
            };
            if result.status != MatchKind::Discarded {
                let (s, _) = result.span.unwrap();
                aligned_answers.push(Answer {
                    text: result.matched_text.clone().unwrap(),
                    char_start: s,
                });
                if result.status < best_status {
                    best_status = result.status;
                }
            }
        }
        stats.count(best_status);
        if best_status != MatchKind::Discarded {
            out.push(QARecord {
                id: record.id.clone(),
                question: record.question.clone(),
                context_ref: record.context_ref.clone(),
                answers: aligned_answers,
                is_impossible: record.is_impossible,
            });
        }
    }
    (out, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn levenshtein_classic() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
    }

    #[test]
    fn levenshtein_identity_and_empty() {
        assert_eq!(levenshtein("höfuðborg", "höfuðborg"), 0);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", ""), 3);
        assert_eq!(levenshtein("", ""), 0);
    }

    #[test]
    fn levenshtein_symmetric() {
        assert_eq!(levenshtein("flaw", "lawn"), levenshtein("lawn", "flaw"));
    }

    #[test]
    fn bounded_agrees_with_unbounded() {
        let a: Vec<char> = "kitten".chars().collect();
        let b: Vec<char> = "sitting".chars().collect();
        assert_eq!(levenshtein_chars(&a, &b, Some(3)), Some(3));
        assert_eq!(levenshtein_chars(&a, &b, Some(2)), None);
    }

    #[test]
    fn similarity_icelandic_fixture() {
        // one insertion over 17 code points
        let sim = normalized_similarity("höfuðborg Ísland", "höfuðborg Íslands");
        assert!((sim - 16.0 / 17.0).abs() < 1e-12);
        assert!(sim > 0.9);
    }

    #[test]
    fn similarity_trivial_cases() {
        assert_eq!(normalized_similarity("abc", "abc"), 1.0);
        assert_eq!(normalized_similarity("abcd", "wxyz"), 0.0);
        assert_eq!(normalized_similarity("", ""), 1.0);
    }

    #[test]
    fn similarity_exact_tenths_hits_point_nine() {
        // distance 1 over max length 10 must compare equal to literal 0.9
        let sim = normalized_similarity("0123456789", "012345678X");
        assert!(sim >= 0.9);
        assert_eq!(sim, 0.9);
    }

    #[test]
    fn find_exact_leftmost() {
        assert_eq!(find_exact("Jón fæddist árið 1990", "1990"), Some((17, 21)));
        assert_eq!(find_exact("abc", "zzz"), None);
        assert_eq!(find_exact("ab ab", "ab"), Some((0, 2)));
        assert_eq!(find_exact("abc", ""), None);
    }

    fn cfg() -> AlignmentConfig {
        AlignmentConfig::default()
    }

    #[test]
    fn fuzzy_finds_icelandic_window() {
        let context = "Reykjavík er höfuðborg Íslands";
        let tokens = tokenize_words(context);
        let m = fuzzy_window_search(context, &tokens, "höfuðborg Ísland", &cfg()).unwrap();
        assert_eq!(cp_slice(context, m.char_start, m.char_end), "höfuðborg Íslands");
        assert!((m.similarity - 16.0 / 17.0).abs() < 1e-12);
    }

    #[test]
    fn fuzzy_rejects_disjoint_alphabets() {
        let context = "a b c d";
        let tokens = tokenize_words(context);
        assert!(fuzzy_window_search(context, &tokens, "x y", &cfg()).is_none());
    }

    #[test]
    fn fuzzy_single_word_answer_window_lengths() {
        // w=1 gives candidate lengths {1, 2}; length 0 is excluded
        let context = "aa bb cc";
        let tokens = tokenize_words(context);
        let m = fuzzy_window_search(context, &tokens, "bb", &cfg()).unwrap();
        assert_eq!(cp_slice(context, m.char_start, m.char_end), "bb");
        assert_eq!(m.similarity, 1.0);
    }

    #[test]
    fn fuzzy_is_case_folded_by_default() {
        let context = "REYKJAVIKK er stor";
        let tokens = tokenize_words(context);
        let m = fuzzy_window_search(context, &tokens, "reykjavik", &cfg()).unwrap();
        assert_eq!(cp_slice(context, m.char_start, m.char_end), "REYKJAVIKK");
        let mut no_fold = cfg();
        no_fold.case_fold_fuzzy = false;
        assert!(fuzzy_window_search(context, &tokens, "reykjavik", &no_fold).is_none());
    }

    #[test]
    fn cascade_prefers_exact_translated() {
        let r = align_answer("x 1990 y", "1990", "1990", &cfg()).unwrap();
        assert_eq!(r.status, MatchKind::ExactTranslated);
        assert_eq!(r.similarity, Some(1.0));
        assert_eq!(r.matched_text.as_deref(), Some("1990"));
    }

    #[test]
    fn cascade_falls_back_to_exact_original() {
        let r = align_answer("the year 1990 was", "árið", "1990", &cfg()).unwrap();
        assert_eq!(r.status, MatchKind::ExactOriginal);
        assert_eq!(r.span, Some((9, 13)));
    }

    #[test]
    fn cascade_discards_when_nothing_matches() {
        let r = align_answer("a b c d", "x y", "z w", &cfg()).unwrap();
        assert_eq!(r.status, MatchKind::Discarded);
        assert!(r.span.is_none());
        assert!(r.matched_text.is_none());
    }

    #[test]
    fn cascade_rejects_two_empty_answers() {
        assert!(matches!(
            align_answer("ctx", "", "", &cfg()),
            Err(AlignError::EmptyAnswers)
        ));
    }

    #[test]
    fn dataset_alignment_counts_and_rewrites() {
        let records = vec![
            QARecord {
                id: "a".into(),
                question: "q".into(),
                context_ref: "d".into(),
                answers: vec![Answer { text: "1990".into(), char_start: 0 }],
                is_impossible: false,
            },
            QARecord {
                id: "b".into(),
                question: "q".into(),
                context_ref: "d".into(),
                answers: vec![Answer { text: "zzz".into(), char_start: 0 }],
                is_impossible: false,
            },
        ];
        let mut contexts = HashMap::new();
        contexts.insert("a".to_string(), "Jón fæddist árið 1990".to_string());
        contexts.insert("b".to_string(), "a b c d".to_string());
        let mut answers = HashMap::new();
        answers.insert("a".to_string(), vec!["1990".to_string()]);
        answers.insert("b".to_string(), vec!["qqq".to_string()]);
        let (aligned, stats) = align_dataset(&records, &contexts, &answers, &cfg());
        assert_eq!(aligned.len(), 1);
        assert_eq!(aligned[0].id, "a");
        assert_eq!(aligned[0].answers[0].char_start, 17);
        assert_eq!(stats.total, 2);
        assert_eq!(stats.exact_translated, 1);
        assert_eq!(stats.discarded, 1);
        assert_eq!(stats.discard_rate(), 50.0);
    }

    #[test]
    fn dataset_alignment_counts_missing() {
        let records = vec![QARecord {
            id: "a".into(),
            question: "q".into(),
            context_ref: "d".into(),
            answers: vec![Answer { text: "x".into(), char_start: 0 }],
            is_impossible: false,
        }];
        let (aligned, stats) = align_dataset(&records, &HashMap::new(), &HashMap::new(), &cfg());
        assert!(aligned.is_empty());
        assert_eq!(stats.missing, 1);
    }

    #[test]
    fn stats_render_matches_reported_shape() {
        let stats = AlignmentStats {
            total: 119_562,
            discarded: 11_478,
            ..Default::default()
        };
        assert_eq!(format!("{:.1}%", stats.discard_rate()), "9.6%");
        let squad = AlignmentStats {
            total: 143_604,
            discarded: 6_893,
            ..Default::default()
        };
        assert_eq!(format!("{:.1}%", squad.discard_rate()), "4.8%");
    }

    #[test]
    fn empty_dataset_stats_are_zero() {
        let (aligned, stats) =
            align_dataset(&[], &HashMap::new(), &HashMap::new(), &cfg());
        assert!(aligned.is_empty());
        assert_eq!(stats, AlignmentStats::default());
        assert_eq!(stats.discard_rate(), 0.0);
    }

    /// Full-DP oracle used by the property tests.
    #[allow(clippy::needless_range_loop)] // textbook DP indexing, on purpose
    fn lev_oracle(a: &str, b: &str) -> usize {
        let av: Vec<char> = a.chars().collect();
        let bv: Vec<char> = b.chars().collect();
        let mut table = vec![vec![0usize; bv.len() + 1]; av.len() + 1];
        for (i, row) in table.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=bv.len() {
            table[0][j] = j;
        }
        for i in 1..=av.len() {
            for j in 1..=bv.len() {
                let cost = usize::from(av[i - 1] != bv[j - 1]);
                table[i][j] = (table[i - 1][j] + 1)
                    .min(table[i][j - 1] + 1)
                    .min(table[i - 1][j - 1] + cost);
            }
        }
        table[av.len()][bv.len()]
    }

    proptest! {
        #[test]
        fn levenshtein_matches_full_table(a in "[a-dðþ ]{0,24}", b in "[a-dðþ ]{0,24}") {
            prop_assert_eq!(levenshtein(&a, &b), lev_oracle(&a, &b));
        }

        #[test]
        fn bounded_decisions_match_oracle(a in "[a-c]{0,16}", b in "[a-c]{0,16}", k in 0usize..8) {
            let av: Vec<char> = a.chars().collect();
            let bv: Vec<char> = b.chars().collect();
            let d = lev_oracle(&a, &b);
            let got = levenshtein_chars(&av, &bv, Some(k));
            if d <= k {
                prop_assert_eq!(got, Some(d));
            } else {
                prop_assert_eq!(got, None);
            }
        }

        #[test]
        fn lowering_threshold_never_discards(
            ctx_words in proptest::collection::vec("[a-e]{1,6}", 1..10),
            ans_words in proptest::collection::vec("[a-e]{1,6}", 1..4),
            t1 in 0.3f64..0.9,
        ) {
            let context = ctx_words.join(" ");
            let answer = ans_words.join(" ");
            let high = AlignmentConfig { threshold: 0.9, ..Default::default() };
            let low = AlignmentConfig { threshold: t1, ..Default::default() };
            let r_high = align_answer(&context, &answer, "", &high).unwrap();
            let r_low = align_answer(&context, &answer, "", &low).unwrap();
            if r_high.status != MatchKind::Discarded {
                prop_assert_ne!(r_low.status, MatchKind::Discarded);
            }
        }
    }
}
