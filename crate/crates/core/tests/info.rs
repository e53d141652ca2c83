use cgran_core::info::*;
use cgran_core::synth::{self, FeatureNoise};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn bivariate(rho: f64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    (
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]),
    )
}

#[test]
fn bivariate_closed_form() {
    let rhos: Vec<f64> = (-9..=9).map(|k| k as f64 / 10.0).collect();
    assert_eq!(rhos.len(), 19);
    for rho in rhos {
        let (x, y, xy) = bivariate(rho);
        let r = gaussian_mi(&x, &y, &xy, 0.0).unwrap();
        let closed = -0.5 * (1.0 - rho * rho).log2();
        assert!((r.i_bits - closed).abs() < 1e-9, "ρ = {rho}");
    }
}

#[test]
fn overlap_correction_factor() {
    let (x, y, xy) = bivariate(0.6);
    let r = gaussian_mi(&x, &y, &xy, 0.3).unwrap();
    assert_eq!(r.correction, 0.85);
    assert!((r.i_bits - 0.85 * r.raw_bits).abs() < 1e-15);
}

#[test]
fn ordering_on_chained_corpora() {
    let ordered = (0..100u64)
        .filter(|&seed| {
            let t = synth::feature_chain(200, 8, FeatureNoise::default(), seed);
            check_ordering(&t, 0.0).unwrap().ordered
        })
        .count();
    assert!(ordered >= 95, "{ordered}/100");
}

#[test]
fn independent_statics_are_degenerate() {
    let t = synth::independent_features(400, 4, 3);
    let r = check_ordering(&t, 0.0).unwrap();
    assert!(r.degenerate && !r.ordered, "{r:?}");
}

fn random_spd(seed: u64, d: usize) -> DMatrix<f64> {
    use rand::Rng;
    let mut rng = synth::rng(seed);
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(d, d) * 0.1
}

proptest! {
    #[test]
    fn agrees_with_lu_determinants(seed in any::<u64>(), dx in 1usize..4, dy in 1usize..4) {
        let joint = random_spd(seed, dx + dy);
        let sx = joint.view((0, 0), (dx, dx)).into_owned();
        let sy = joint.view((dx, dx), (dy, dy)).into_owned();
        let r = gaussian_mi(&sx, &sy, &joint, 0.0).unwrap();
        let oracle = 0.5 * (sx.determinant() * sy.determinant() / joint.determinant()).log2();
        prop_assert!((r.raw_bits - oracle).abs() < 1e-8 * oracle.abs().max(1.0));
    }
}
