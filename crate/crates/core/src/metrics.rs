//! BLEU-4, ROUGE-1/2/L and throughput accounting.
//!
//! Text is NFC-normalized, lowercased and split on whitespace, so bracketed
//! tokens such as `[Maneuver]` stay whole.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{domain, Result};

pub const BLEU_ORDER: usize = 4;

pub fn tokenize(text: &str) -> Vec<String> {
    let normalized: String = text.nfc().collect();
    normalized.to_lowercase().split_whitespace().map(str::to_owned).collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Clipped overlap `Σ min(count_hyp, count_ref)` of n-grams.
pub fn clipped_matches(hyp: &[String], reference: &[String], n: usize) -> usize {
    let r = ngram_counts(reference, n);
    ngram_counts(hyp, n).iter().map(|(g, c)| (*c).min(r.get(g).copied().unwrap_or(0))).sum()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Smoothing {
    /// Zero-match orders score zero.
    None,
    /// Zero-match orders use `(m + 1) / (t + 1)`.
    #[default]
    AddOne,
}

/// Sufficient statistics for BLEU. Adding stats of two corpora gives the
/// stats of their concatenation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuStats {
    pub matches: [usize; BLEU_ORDER],
    pub totals: [usize; BLEU_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn from_tokens(hyp: &[String], reference: &[String]) -> Self {
        let mut s = BleuStats { hyp_len: hyp.len(), ref_len: reference.len(), ..Default::default() };
        for n in 1..=BLEU_ORDER {
            s.matches[n - 1] = clipped_matches(hyp, reference, n);
            s.totals[n - 1] = hyp.len().saturating_sub(n - 1);
        }
        s
    }

    pub fn add(&mut self, other: &BleuStats) {
        for i in 0..BLEU_ORDER {
            self.matches[i] += other.matches[i];
            self.totals[i] += other.totals[i];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    pub fn brevity_penalty(&self) -> f64 {
        if self.hyp_len == 0 {
            0.0
        } else if self.hyp_len > self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        }
    }

    /// Percent in `[0, 100]`; an empty hypothesis scores 0.
    pub fn score(&self, smoothing: Smoothing) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for i in 0..BLEU_ORDER {
            let (m, t) = (self.matches[i] as f64, self.totals[i] as f64);
            let p = if m > 0.0 {
                m / t
            } else {
                match smoothing {
                    Smoothing::None => return 0.0,
                    Smoothing::AddOne => 1.0 / (t + 1.0),
                }
            };
            log_sum += p.ln();
        }
        (100.0 * self.brevity_penalty() * (log_sum / BLEU_ORDER as f64).exp()).clamp(0.0, 100.0)
    }
}

pub fn bleu4(hypothesis: &str, reference: &str, smoothing: Smoothing) -> f64 {
    BleuStats::from_tokens(&tokenize(hypothesis), &tokenize(reference)).score(smoothing)
}

pub fn corpus_bleu4<'a, I>(pairs: I, smoothing: Smoothing) -> f64
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut total = BleuStats::default();
    for (h, r) in pairs {
        total.add(&BleuStats::from_tokens(&tokenize(h), &tokenize(r)));
    }
    total.score(smoothing)
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn f1(overlap: usize, hyp_total: usize, ref_total: usize) -> f64 {
    if overlap == 0 || hyp_total == 0 || ref_total == 0 {
        return 0.0;
    }
    let p = overlap as f64 / hyp_total as f64;
    let r = overlap as f64 / ref_total as f64;
    100.0 * 2.0 * p * r / (p + r)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RougeScores {
    pub r1: f64,
    pub r2: f64,
    #[serde(rename = "rL")]
    pub rl: f64,
}

pub fn rouge_tokens(hyp: &[String], reference: &[String]) -> RougeScores {
    let n_f1 = |n: usize| {
        f1(
            clipped_matches(hyp, reference, n),
            hyp.len().saturating_sub(n - 1),
            reference.len().saturating_sub(n - 1),
        )
    };
    RougeScores { r1: n_f1(1), r2: n_f1(2), rl: f1(lcs_len(hyp, reference), hyp.len(), reference.len()) }
}

pub fn rouge(hypothesis: &str, reference: &str) -> RougeScores {
    rouge_tokens(&tokenize(hypothesis), &tokenize(reference))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu4: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
}

/// Corpus BLEU-4 plus ROUGE averaged over pairs.
pub fn score_corpus(pairs: &[(String, String)], smoothing: Smoothing) -> MetricReport {
    let mut stats = BleuStats::default();
    let (mut r1, mut r2, mut rl) = (0.0, 0.0, 0.0);
    for (h, r) in pairs {
        let (h, r) = (tokenize(h), tokenize(r));
        stats.add(&BleuStats::from_tokens(&h, &r));
        let s = rouge_tokens(&h, &r);
        r1 += s.r1;
        r2 += s.r2;
        rl += s.rl;
    }
    let n = pairs.len().max(1) as f64;
    MetricReport { bleu4: stats.score(smoothing), rouge1: r1 / n, rouge2: r2 / n, rouge_l: rl / n }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub prediction: String,
    pub reference: String,
}

pub fn read_predictions<R: BufRead>(reader: R) -> Result<Vec<Prediction>> {
    crate::granularity::read_jsonl(reader)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub model_prep_time: f64,
    pub runtime: f64,
    pub n_samples: usize,
    pub n_steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub sam_per_s: f64,
    pub steps_per_s: f64,
}

pub fn throughput(stats: &RunStats) -> Result<Throughput> {
    if !(stats.runtime > 0.0) || !stats.runtime.is_finite() {
        return Err(domain(format!("runtime must be positive, got {}", stats.runtime)));
    }
    if stats.n_samples == 0 {
        return Err(domain("no samples"));
    }
    Ok(Throughput {
        sam_per_s: stats.n_samples as f64 / stats.runtime,
        steps_per_s: stats.n_steps as f64 / stats.runtime,
    })
}

pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Column names of the evaluation summary.
pub const REPORT_COLUMNS: [&str; 8] = [
    "predict_bleu-4",
    "predict_rouge-1",
    "predict_rouge-2",
    "predict_rouge-l",
    "predict_model_preparation_time",
    "predict_runtime",
    "predict_samples_per_second",
    "predict_steps_per_second",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_pairs: usize,
    pub smoothing: Smoothing,
    pub metrics: MetricReport,
    pub run: Option<RunStats>,
    pub throughput: Option<Throughput>,
}

impl EvalReport {
    pub fn new(pairs: &[(String, String)], smoothing: Smoothing, run: Option<RunStats>) -> Result<Self> {
        let throughput = run.as_ref().map(throughput).transpose()?;
        Ok(Self { n_pairs: pairs.len(), smoothing, metrics: score_corpus(pairs, smoothing), run, throughput })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(REPORT_COLUMNS)?;
        let m = &self.metrics;
        let mut row = vec![
            format!("{:.4}", m.bleu4),
            format!("{:.4}", m.rouge1),
            format!("{:.4}", m.rouge2),
            format!("{:.4}", m.rouge_l),
        ];
        match (&self.run, &self.throughput) {
            (Some(r), Some(t)) => row.extend([
                format!("{:.4}", r.model_prep_time),
                format!("{:.4}", r.runtime),
                format!("{:.3}", t.sam_per_s),
                format!("{:.3}", t.steps_per_s),
            ]),
            _ => row.extend(std::iter::repeat_n(String::new(), 4)),
        }
        w.write_record(&row)?;
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn identity_is_100() {
        let s = "click the red ground unit icon";
        assert_eq!(bleu4(s, s, Smoothing::AddOne), 100.0);
        let r = rouge(s, s);
        assert_eq!((r.r1, r.r2, r.rl), (100.0, 100.0, 100.0));
    }

    #[test]
    fn brevity_penalty_applies() {
        let s = BleuStats::from_tokens(&toks("a b c d e"), &toks("a b c d e f g"));
        assert!((s.brevity_penalty() - (1.0f64 - 7.0 / 5.0).exp()).abs() < 1e-15);
        assert!((s.score(Smoothing::None) - 100.0 * s.brevity_penalty()).abs() < 1e-9);
    }

    #[test]
    fn rouge_l_hand_example() {
        let r = rouge("a b c d", "a c d e");
        assert!((r.rl - 75.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_and_empty() {
        let r = rouge("x y z", "a b c");
        assert_eq!((r.r1, r.r2, r.rl), (0.0, 0.0, 0.0));
        assert_eq!(bleu4("", "a b", Smoothing::AddOne), 0.0);
        assert_eq!(rouge("", "").r1, 0.0);
    }

    #[test]
    fn tokenizer_keeps_brackets_and_normalizes() {
        assert_eq!(tokenize("Click  [Maneuver]\tNOW"), vec!["click", "[maneuver]", "now"]);
        assert_eq!(tokenize("Cafe\u{301}"), tokenize("Caf\u{e9}"));
    }

    #[test]
    fn throughput_table6_row() {
        let t = throughput(&RunStats { model_prep_time: 0.0, runtime: 177.7917, n_samples: 201, n_steps: 101 }).unwrap();
        assert_eq!(round3(t.sam_per_s), 1.131);
        assert!(throughput(&RunStats { model_prep_time: 0.0, runtime: 0.0, n_samples: 1, n_steps: 1 }).is_err());
    }

    #[test]
    fn csv_header() {
        let pairs = vec![("a b".to_string(), "a b".to_string())];
        let rep = EvalReport::new(&pairs, Smoothing::AddOne, None).unwrap();
        let mut out = Vec::new();
        rep.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("predict_bleu-4,predict_rouge-1"));
        assert!(text.lines().nth(1).unwrap().starts_with("100.0000,100.0000,100.0000,100.0000"));
    }
}
