//! Native entry points behind the browser exports.

use mfteam_wasm_demo::{gain_curve_native, policy_gap_curve_native, riccati_curve_native};

#[test]
fn curves_have_matching_lengths() {
    let g = gain_curve_native(true, 3.0, 1.0, 1.0, 1.0, 1.0, 500).unwrap();
    let r = riccati_curve_native(0.9, 1.0, 1.0, 1.0, 40).unwrap();
    let p = policy_gap_curve_native(1.0, 1.0, 1.0, 1.0, 100, 200, 3).unwrap();
    for c in [&g, &r, &p] {
        assert_eq!(c.xs().len(), c.ys().len());
        assert_eq!(c.xs().len(), c.aux().len());
        assert!(!c.xs().is_empty());
    }
    assert_eq!(r.xs().len(), 40);
}

#[test]
fn state_coupled_gap_decays_as_inverse_square() {
    let c = gain_curve_native(false, 2.0, 1.0, 0.0, 1.0, 1.0, 1000).unwrap();
    let (xs, gaps) = (c.xs(), c.aux());
    let k = xs.len();
    let slope = (gaps[k - 1] / gaps[k - 5]).ln() / (xs[k - 1] / xs[k - 5]).ln();
    assert!((slope + 2.0).abs() < 0.05, "slope {slope}");
}

#[test]
fn riccati_gap_shrinks_with_horizon() {
    let c = riccati_curve_native(1.2, 1.0, 1.0, 1.0, 100).unwrap();
    let aux = c.aux();
    assert!(aux[99] < aux[9]);
    assert!((c.ys()[99] - c.limit()).abs() < 1e-8 * c.limit());
}

#[test]
fn policy_gap_is_reproducible_per_seed() {
    let a = policy_gap_curve_native(1.0, 1.0, 1.0, 1.0, 100, 300, 7).unwrap();
    let b = policy_gap_curve_native(1.0, 1.0, 1.0, 1.0, 100, 300, 7).unwrap();
    let c = policy_gap_curve_native(1.0, 1.0, 1.0, 1.0, 100, 300, 8).unwrap();
    assert_eq!(a.ys(), b.ys());
    assert_ne!(a.ys(), c.ys());
}
