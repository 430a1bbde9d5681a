//! Task-quality metrics: exact match, sentence BLEU, and ROUGE-1/2/L.
//!
//! All metrics are bounded in `[0, 1]` with higher-is-better, so pairing can
//! always take an argmax. Tokenization is case-folded whitespace splitting
//! with no stemming.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Which metric a task uses for scoring. `RougeAvg` is the arithmetic mean
/// of ROUGE-1, ROUGE-2, and ROUGE-L, the convention for structure-to-text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    ExactMatch,
    Bleu,
    Rouge1,
    Rouge2,
    RougeL,
    RougeAvg,
}

impl MetricKind {
    pub fn parse(name: &str) -> Option<MetricKind> {
        match name {
            "exact_match" | "em" => Some(MetricKind::ExactMatch),
            "bleu" => Some(MetricKind::Bleu),
            "rouge1" => Some(MetricKind::Rouge1),
            "rouge2" => Some(MetricKind::Rouge2),
            "rouge_l" => Some(MetricKind::RougeL),
            "rouge_avg" => Some(MetricKind::RougeAvg),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::ExactMatch => "exact_match",
            MetricKind::Bleu => "bleu",
            MetricKind::Rouge1 => "rouge1",
            MetricKind::Rouge2 => "rouge2",
            MetricKind::RougeL => "rouge_l",
            MetricKind::RougeAvg => "rouge_avg",
        }
    }
}

/// Case-folded whitespace tokenization shared by BLEU and ROUGE.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase().split_whitespace().map(str::to_string).collect()
}

/// 1.0 iff the two strings are equal after trimming outer whitespace and
/// case-folding, else 0.0.
pub fn exact_match(prediction: &str, reference: &str) -> f64 {
    if prediction.trim().to_lowercase() == reference.trim().to_lowercase() {
        1.0
    } else {
        0.0
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut counts: BTreeMap<&[String], usize> = BTreeMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

fn clipped_overlap(pred: &BTreeMap<&[String], usize>, reference: &BTreeMap<&[String], usize>) -> usize {
    pred.iter()
        .map(|(gram, &count)| count.min(reference.get(gram).copied().unwrap_or(0)))
        .sum()
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// ROUGE-N F1 over clipped n-gram overlap, `n` in `{1, 2}`.
pub fn rouge_n(prediction: &[String], reference: &[String], n: usize) -> f64 {
    assert!(n == 1 || n == 2, "rouge_n supports n in {{1, 2}}");
    let pred = ngram_counts(prediction, n);
    let refs = ngram_counts(reference, n);
    let pred_total: usize = pred.values().sum();
    let ref_total: usize = refs.values().sum();
    if pred_total == 0 || ref_total == 0 {
        return 0.0;
    }
    let overlap = clipped_overlap(&pred, &refs) as f64;
    f1(overlap / pred_total as f64, overlap / ref_total as f64)
}

fn lcs_length(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            cur[j + 1] = if ai == bj {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L: F1 of longest-common-subsequence precision and recall.
pub fn rouge_l(prediction: &[String], reference: &[String]) -> f64 {
    if prediction.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let lcs = lcs_length(prediction, reference) as f64;
    f1(lcs / prediction.len() as f64, lcs / reference.len() as f64)
}

/// Sentence-level BLEU-4. Precisions above unigram get add-one smoothing;
/// the brevity penalty is `exp(1 - |ref| / |pred|)` when the prediction is
/// shorter than the reference. An empty prediction scores 0.
pub fn bleu(prediction: &[String], reference: &[String]) -> f64 {
    if prediction.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let pred = ngram_counts(prediction, n);
        let refs = ngram_counts(reference, n);
        let total: usize = pred.values().sum();
        let overlap = clipped_overlap(&pred, &refs);
        let precision = if n == 1 {
            if total == 0 {
                return 0.0;
            }
            overlap as f64 / total as f64
        } else {
            (overlap as f64 + 1.0) / (total as f64 + 1.0)
        };
        if precision == 0.0 {
            return 0.0;
        }
        log_sum += precision.ln();
    }
    let brevity = if prediction.len() < reference.len() {
        (1.0 - reference.len() as f64 / prediction.len() as f64).exp()
    } else {
        1.0
    };
    brevity * (log_sum / 4.0).exp()
}

/// Score a prediction against a reference under the given metric.
pub fn score(metric: MetricKind, prediction: &str, reference: &str) -> f64 {
    match metric {
        MetricKind::ExactMatch => exact_match(prediction, reference),
        _ => {
            let pred = tokenize(prediction);
            let refs = tokenize(reference);
            match metric {
                MetricKind::Bleu => bleu(&pred, &refs),
                MetricKind::Rouge1 => rouge_n(&pred, &refs, 1),
                MetricKind::Rouge2 => rouge_n(&pred, &refs, 2),
                MetricKind::RougeL => rouge_l(&pred, &refs),
                MetricKind::RougeAvg => {
                    (rouge_n(&pred, &refs, 1) + rouge_n(&pred, &refs, 2) + rouge_l(&pred, &refs))
                        / 3.0
                }
                MetricKind::ExactMatch => unreachable!(),
            }
        }
    }
}
