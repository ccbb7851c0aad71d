use std::sync::Arc;

use rkhs_conv::nonlinearity::apply_eta;
use rkhs_conv::{Axis, Center, DomainOp, Grid, Kernel, RkhsSignal, Term};

fn two_centers(k: &Arc<Kernel>, terms: &[(f64, f64)]) -> RkhsSignal {
    RkhsSignal::new(
        k.clone(),
        DomainOp::Translation1d,
        terms.iter().map(|&(c, w)| Term::new(Center::Scalar(c), w)).collect(),
    )
    .unwrap()
}

#[test]
fn eta_is_continuous_as_centers_merge() {
    let k = Arc::new(Kernel::gaussian1d(1.0).unwrap());
    let grid = Grid::Line(Axis::span(-3.0, 3.0, 601).unwrap());
    let (v1, a, b) = (0.3, 0.7, 1.2);
    let limit = apply_eta(&two_centers(&k, &[(v1, a + b)])).unwrap().evaluate_grid(&grid).unwrap();
    let mut last = f64::INFINITY;
    for gap in [1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
        let f = two_centers(&k, &[(v1, a), (v1 + gap, b)]);
        let g = apply_eta(&f).unwrap().evaluate_grid(&grid).unwrap();
        let err = g.max_abs_diff(&limit).unwrap();
        assert!(err < last, "gap {gap}: {err} vs {last}");
        last = err;
    }
    assert!(last < 1e-4);
}

#[test]
fn eta_fixes_self_normalized_expansions() {
    // α_v = g(v) / Σ_r K(r, v) with g(v) ≥ 0 is a fixed point.
    let k = Arc::new(Kernel::gaussian1d(0.8).unwrap());
    let centers: [f64; 3] = [-1.0, 0.2, 1.5];
    let sums: Vec<f64> = centers
        .iter()
        .map(|v| centers.iter().map(|r| (-0.8 * (r - v) * (r - v)).exp()).sum())
        .collect();
    // Equal weights w give g(v) = w·Σ_r K(r, v), so α_v = w.
    let g = two_centers(&k, &centers.iter().map(|&c| (c, 0.9)).collect::<Vec<_>>());
    let h = apply_eta(&g).unwrap();
    for (t, s) in h.terms().iter().zip(&sums) {
        assert!((t.weight - 0.9).abs() <= 1e-12, "{} with normalizer {s}", t.weight);
    }
}
