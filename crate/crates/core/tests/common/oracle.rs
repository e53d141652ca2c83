//! Brute-force reference implementations used by the test suites.
#![allow(dead_code)]

/// Occurrences of `gram` in `seq`, by direct scan.
pub fn occurrences(seq: &[String], gram: &[String]) -> usize {
    if gram.is_empty() || seq.len() < gram.len() {
        return 0;
    }
    (0..=seq.len() - gram.len()).filter(|&i| &seq[i..i + gram.len()] == gram).count()
}

pub fn clipped(hyp: &[String], reference: &[String], n: usize) -> usize {
    if hyp.len() < n {
        return 0;
    }
    let mut seen: Vec<&[String]> = Vec::new();
    let mut total = 0;
    for i in 0..=hyp.len() - n {
        let g = &hyp[i..i + n];
        if seen.contains(&g) {
            continue;
        }
        seen.push(g);
        total += occurrences(hyp, g).min(occurrences(reference, g));
    }
    total
}

/// Sentence BLEU-4 with add-one smoothing on zero-match orders.
pub fn bleu(hyp: &[String], reference: &[String]) -> f64 {
    if hyp.is_empty() {
        return 0.0;
    }
    let mut logp = 0.0;
    for n in 1..=4 {
        let t = hyp.len().saturating_sub(n - 1) as f64;
        let m = clipped(hyp, reference, n) as f64;
        logp += if m > 0.0 { (m / t).ln() } else { (1.0 / (t + 1.0)).ln() };
    }
    let (c, r) = (hyp.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    100.0 * bp * (logp / 4.0).exp()
}

fn f1(m: f64, h: f64, r: f64) -> f64 {
    if m == 0.0 {
        0.0
    } else {
        200.0 * m / (h + r)
    }
}

/// ROUGE-1, ROUGE-2 and ROUGE-L (with `lcs` supplied) as F1 percentages.
pub fn rouge(hyp: &[String], reference: &[String], lcs: usize) -> [f64; 3] {
    let c = |n: usize| hyp.len().saturating_sub(n - 1) as f64;
    let rc = |n: usize| reference.len().saturating_sub(n - 1) as f64;
    [
        f1(clipped(hyp, reference, 1) as f64, c(1), rc(1)),
        f1(clipped(hyp, reference, 2) as f64, c(2), rc(2)),
        f1(lcs as f64, c(1), rc(1)),
    ]
}

/// Every sequence over `alphabet` letters of length `0..=max_len`, shortest
/// first, with a bitset of the indices of its subsequences. The LCS of two
/// sequences is the length of the highest index set in both bitsets.
pub struct SubsequenceTable {
    pub seqs: Vec<Vec<u8>>,
    pub subs: Vec<Vec<u64>>,
}

impl SubsequenceTable {
    pub fn new(alphabet: u8, max_len: usize) -> Self {
        let mut seqs: Vec<Vec<u8>> = vec![Vec::new()];
        let mut start = 0;
        for _ in 0..max_len {
            let end = seqs.len();
            for i in start..end {
                for a in 0..alphabet {
                    let mut s = seqs[i].clone();
                    s.push(a);
                    seqs.push(s);
                }
            }
            start = end;
        }
        let index: std::collections::HashMap<Vec<u8>, usize> =
            seqs.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let words = seqs.len().div_ceil(64);
        let subs = seqs
            .iter()
            .map(|s| {
                let mut bits = vec![0u64; words];
                for mask in 0u32..(1 << s.len()) {
                    let sub: Vec<u8> = (0..s.len()).filter(|i| mask >> i & 1 == 1).map(|i| s[i]).collect();
                    let k = index[&sub];
                    bits[k / 64] |= 1 << (k % 64);
                }
                bits
            })
            .collect();
        Self { seqs, subs }
    }

    pub fn lcs(&self, a: usize, b: usize) -> usize {
        let (x, y) = (&self.subs[a], &self.subs[b]);
        for w in (0..x.len()).rev() {
            let both = x[w] & y[w];
            if both != 0 {
                let k = w * 64 + 63 - both.leading_zeros() as usize;
                return self.seqs[k].len();
            }
        }
        0
    }

    pub fn tokens(&self, i: usize) -> Vec<String> {
        self.seqs[i].iter().map(|c| ((b'a' + c) as char).to_string()).collect()
    }
}

/// Mean, sample standard deviation and one-sample t by two-pass sums.
pub fn t_stats(xs: &[f64], mu0: f64) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mut sum = 0.0;
    for x in xs {
        sum += x;
    }
    let mean = sum / n;
    let mut ss = 0.0;
    for x in xs {
        ss += (x - mean) * (x - mean);
    }
    let sd = (ss / (n - 1.0)).sqrt();
    (mean, sd, (mean - mu0) / (sd / n.sqrt()))
}
