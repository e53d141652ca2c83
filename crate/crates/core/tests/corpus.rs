use cgran_core::granularity::{build_dataset, parse_expr, sliding_windows, term_cardinality, Modality, Sample};
use cgran_core::modal::{validate_corpus, ConstraintId, Corpus, SceneFeatures};
use cgran_core::synth;
use proptest::prelude::*;

fn reference_corpus() -> Corpus {
    Corpus::decompose(synth::reference_videos(7).unwrap()).unwrap()
}

#[test]
fn reference_cardinalities() {
    let c = reference_corpus();
    assert_eq!(c.scene_count(), 180);
    assert_eq!(c.statics.len(), 1002);
    for (expr, n) in [
        ("S", 1002),
        ("M", 180),
        ("V", 180),
        ("S*M", 180),
        ("S*V", 180),
        ("M*V", 180),
        ("S*M*V", 180),
        ("M*V+S", 1182),
        ("S+M", 1182),
        ("S*V+M", 360),
        ("S*V+M*V", 360),
    ] {
        let d = build_dataset(&parse_expr(expr).unwrap(), &c).unwrap();
        assert_eq!(d.len(), n, "{expr}");
    }
}

#[test]
fn window_counts_match_closed_form() {
    let c = reference_corpus();
    for w in 1..=6 {
        let expected: usize = c.videos.iter().map(|v| (v.key_count() + 1).saturating_sub(w)).sum();
        assert_eq!(sliding_windows(&c, w).unwrap().len(), expected, "w = {w}");
    }
    assert_eq!(sliding_windows(&c, 1).unwrap().len(), 1002);
}

#[test]
fn reference_corpus_passes_constraints() {
    let r = validate_corpus(&reference_corpus()).unwrap();
    assert!(r.passed, "{:?}", r.violations);
}

#[test]
fn swapped_frame_is_one_derivation_violation() {
    let mut c = reference_corpus();
    c.multis[10].frames.swap(0, 1);
    let r = validate_corpus(&c).unwrap();
    assert_eq!(r.violations.len(), 1, "{:?}", r.violations);
    assert_eq!(r.violations[0].constraint, ConstraintId::DerivationConsistency);
}

#[test]
fn relabeled_static_is_one_label_violation() {
    let mut c = reference_corpus();
    c.statics[500].label = "click [Somewhere Else]".into();
    let r = validate_corpus(&c).unwrap();
    assert_eq!(r.violations.len(), 1, "{:?}", r.violations);
    assert_eq!(r.violations[0].constraint, ConstraintId::LabelConsistency);
}

#[test]
fn heavy_overlap_is_one_independence_violation() {
    let mut videos = synth::reference_videos(7).unwrap();
    let donor: Vec<String> = videos[2].features.iter().map(str::to_owned).collect();
    let own: Vec<String> = videos[3].features.iter().map(str::to_owned).collect();
    let mixed: Vec<String> = donor[..6].iter().chain(&own[..4]).cloned().collect();
    videos[3].features = SceneFeatures::new(mixed);
    let c = Corpus::decompose(videos).unwrap();
    let r = validate_corpus(&c).unwrap();
    assert_eq!(r.violations.len(), 1, "{:?}", r.violations);
    assert_eq!(r.violations[0].constraint, ConstraintId::SceneIndependence);
    assert_eq!(r.violations[0].scene_ids, vec!["scene_002".to_string(), "scene_003".to_string()]);
}

fn scene_set(samples: &[Sample]) -> std::collections::BTreeSet<String> {
    samples.iter().map(|s| s.scene_id.clone()).collect()
}

fn arb_expr() -> impl Strategy<Value = String> {
    let term = proptest::sample::subsequence(vec!['S', 'M', 'V'], 1..=3)
        .prop_shuffle()
        .prop_map(|t| t.into_iter().map(String::from).collect::<Vec<_>>().join("*"));
    proptest::collection::vec(term, 1..=3).prop_map(|ts| ts.join("+"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cardinality_law(n_pairs in 1usize..12, extra in 0usize..40, seed in any::<u64>(), expr in arb_expr()) {
        let n = 2 * n_pairs;
        let total = 2 * (n_pairs * 3 + extra.min(n_pairs * 3));
        let c = Corpus::decompose(synth::corpus_videos(n, total, seed).unwrap()).unwrap();
        let e = match parse_expr(&expr) { Ok(e) => e, Err(_) => return Ok(()) };
        let d = build_dataset(&e, &c).unwrap();
        let expected: usize = e.terms().iter().map(|t| {
            if t.modalities() == [Modality::S] { total } else { n }
        }).sum();
        prop_assert_eq!(d.len(), expected);
        let by_term: usize = e.terms().iter().map(|t| term_cardinality(t, &c)).sum();
        prop_assert_eq!(d.len(), by_term);
    }

    #[test]
    fn mixing_keeps_each_term(seed in any::<u64>(), a in arb_expr(), b in arb_expr()) {
        let c = Corpus::decompose(synth::corpus_videos(6, 24, seed).unwrap()).unwrap();
        let (Ok(ea), Ok(eb)) = (parse_expr(&a), parse_expr(&b)) else { return Ok(()) };
        let Ok(mixed) = parse_expr(&format!("{a}+{b}")) else { return Ok(()) };
        let da = build_dataset(&ea, &c).unwrap();
        let db = build_dataset(&eb, &c).unwrap();
        let dm = build_dataset(&mixed, &c).unwrap();
        prop_assert_eq!(dm.len(), da.len() + db.len());
        prop_assert_eq!(scene_set(&dm.samples), scene_set(&da.samples));
    }

    #[test]
    fn fusion_order_is_irrelevant(seed in any::<u64>()) {
        let c = Corpus::decompose(synth::corpus_videos(4, 16, seed).unwrap()).unwrap();
        let a = build_dataset(&parse_expr("S*V*M").unwrap(), &c).unwrap();
        let b = build_dataset(&parse_expr("M*S*V").unwrap(), &c).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.samples.iter().zip(&b.samples) {
            let mut px: Vec<String> = x.parts.iter().map(|p| format!("{p:?}")).collect();
            let mut py: Vec<String> = y.parts.iter().map(|p| format!("{p:?}")).collect();
            px.sort();
            py.sort();
            prop_assert_eq!(px, py);
            prop_assert_eq!(&x.target, &y.target);
        }
    }
}
