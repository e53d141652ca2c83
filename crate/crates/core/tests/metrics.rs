mod common;

use cgran_core::metrics::*;
use common::oracle;
use rand::{Rng, SeedableRng};

#[test]
fn exhaustive_small_alphabet() {
    let table = oracle::SubsequenceTable::new(3, 6);
    assert_eq!(table.seqs.len(), 1093);
    let toks: Vec<Vec<String>> = (0..table.seqs.len()).map(|i| table.tokens(i)).collect();
    for a in 0..toks.len() {
        for b in 0..toks.len() {
            let (h, r) = (&toks[a], &toks[b]);
            assert_eq!(lcs_len(h, r), table.lcs(a, b), "{h:?} {r:?}");
        }
        // clipped counts against every shorter-or-equal reference in a stride
        for b in (0..toks.len()).step_by(7) {
            let (h, r) = (&toks[a], &toks[b]);
            for n in 1..=4 {
                assert_eq!(clipped_matches(h, r, n), oracle::clipped(h, r, n));
            }
        }
    }
}

fn random_sentence(rng: &mut impl Rng, vocab: &[&str]) -> String {
    let len = rng.random_range(0..25);
    (0..len).map(|_| vocab[rng.random_range(0..vocab.len())]).collect::<Vec<_>>().join(" ")
}

#[test]
fn seeded_random_pairs() {
    let vocab = ["click", "the", "[maneuver]", "unit", "red", "blue", "attack", "select", "f1", "then"];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let h = random_sentence(&mut rng, &vocab);
        let r = random_sentence(&mut rng, &vocab);
        let (ht, rt) = (tokenize(&h), tokenize(&r));
        let expected = oracle::bleu(&ht, &rt);
        assert!((bleu4(&h, &r, Smoothing::AddOne) - expected).abs() < 1e-9, "{h:?} / {r:?}");
        let [r1, r2, rl] = oracle::rouge(&ht, &rt, lcs_len(&ht, &rt));
        let got = rouge(&h, &r);
        assert!((got.r1 - r1).abs() < 1e-9 && (got.r2 - r2).abs() < 1e-9 && (got.rl - rl).abs() < 1e-9);
    }
}

#[test]
fn identity_corpus_is_perfect() {
    let pairs: Vec<(String, String)> = ["Click [Maneuver]", "Press the hotkey F1 to open the panel", "Click the red [Ground Unit] now"]
        .iter()
        .map(|s| (s.to_string(), s.to_string()))
        .collect();
    let r = score_corpus(&pairs, Smoothing::AddOne);
    for v in [r.bleu4, r.rouge1, r.rouge2, r.rouge_l] {
        assert!((v - 100.0).abs() < 1e-9, "{r:?}");
    }
}

#[test]
fn corpus_of_one_equals_sentence() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let vocab = ["a", "b", "c", "d"];
    for _ in 0..50 {
        let h = random_sentence(&mut rng, &vocab);
        let r = random_sentence(&mut rng, &vocab);
        let pair = [(h.clone(), r.clone())];
        let c = score_corpus(&pair, Smoothing::AddOne);
        assert!((c.bleu4 - bleu4(&h, &r, Smoothing::AddOne)).abs() < 1e-12);
        assert!((c.rouge_l - rouge(&h, &r).rl).abs() < 1e-12);
    }
}

#[test]
fn tokenizer_normalizes() {
    assert_eq!(tokenize("Cafe\u{301}  CLICK"), tokenize("café click"));
}
