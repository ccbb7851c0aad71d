//! Generators and law checks shared by the property tests and the acceptance
//! harness.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rkhs_conv::graphon::Graphon;
use rkhs_conv::{Center, DomainOp, Kernel, RkhsSignal, Term};

pub mod training_cases;

pub const LAW_TOL: f64 = 1e-8;

/// A domain operation paired with a kernel defined on its centers.
#[derive(Clone, Debug)]
pub struct Setup {
    pub op: DomainOp,
    pub kernel: Arc<Kernel>,
}

pub fn setup(op: DomainOp) -> Setup {
    let kernel = match op {
        DomainOp::Translation1d | DomainOp::CyclicSum { .. } => Kernel::gaussian1d(1.0),
        DomainOp::ComponentwiseProduct2d => Kernel::gaussian2d(0.5),
        DomainOp::Translation2d => Kernel::gaussian2d(1.0),
        DomainOp::UnitIntervalProduct | DomainOp::ModularSum01 => Kernel::graphon_box(Graphon::DirichletGreen, 64),
        DomainOp::SphereRotation => Kernel::sphere_poly(3),
    }
    .unwrap();
    Setup {
        op,
        kernel: Arc::new(kernel),
    }
}

pub fn all_setups() -> Vec<Setup> {
    DomainOp::ALL.iter().map(|&op| setup(op)).collect()
}

pub fn center(op: DomainOp) -> BoxedStrategy<Center> {
    match op {
        DomainOp::Translation1d => (-2.0..2.0f64).prop_map(Center::Scalar).boxed(),
        DomainOp::CyclicSum { sup } => (0.0..=sup).prop_map(Center::Scalar).boxed(),
        DomainOp::ComponentwiseProduct2d => (0.5..1.5f64, 0.5..1.5f64)
            .prop_map(|(x, y)| Center::Planar([x, y]))
            .boxed(),
        DomainOp::Translation2d => (-2.0..2.0f64, -2.0..2.0f64)
            .prop_map(|(x, y)| Center::Planar([x, y]))
            .boxed(),
        DomainOp::UnitIntervalProduct | DomainOp::ModularSum01 => (1e-3..=1.0f64)
            .prop_map(|t| Center::unit(t).unwrap())
            .boxed(),
        DomainOp::SphereRotation => (-PI..PI, -PI..PI, -PI..PI)
            .prop_map(|(a, b, c)| {
                Center::rotation(Rotation3::from_scaled_axis(Vector3::new(a, b, c) / 2.0).into_inner()).unwrap()
            })
            .boxed(),
    }
}

pub fn signal(s: &Setup, max_terms: usize) -> BoxedStrategy<RkhsSignal> {
    let kernel = s.kernel.clone();
    let op = s.op;
    prop::collection::vec((center(op), -1.0..1.0f64), 1..=max_terms)
        .prop_map(move |ts| {
            RkhsSignal::new(
                kernel.clone(),
                op,
                ts.into_iter().map(|(c, w)| Term::new(c, w)).collect(),
            )
            .unwrap()
        })
        .boxed()
}

/// Three signals, a scalar and evaluation points.
pub type LawCase = (RkhsSignal, RkhsSignal, RkhsSignal, f64, Vec<Center>);

pub fn law_case(s: &Setup) -> BoxedStrategy<LawCase> {
    (
        signal(s, 3),
        signal(s, 3),
        signal(s, 3),
        -2.0..2.0f64,
        prop::collection::vec(center(s.op), 8),
    )
        .boxed()
}

pub fn max_gap(a: &RkhsSignal, b: &RkhsSignal, points: &[Center]) -> f64 {
    points
        .iter()
        .map(|p| (a.evaluate(p).unwrap() - b.evaluate(p).unwrap()).abs())
        .fold(0.0, f64::max)
}

/// Largest violation of associativity, both bilinearity laws and both unit
/// laws for one case.
pub fn law_errors(s: &Setup, case: &LawCase) -> [f64; 3] {
    let (f, g, h, a, pts) = case;
    let assoc = max_gap(
        &f.convolve(g).unwrap().convolve(h).unwrap(),
        &f.convolve(&g.convolve(h).unwrap()).unwrap(),
        pts,
    );
    let lin_left = max_gap(
        &f.scale(*a).add(g).unwrap().convolve(h).unwrap(),
        &f.convolve(h).unwrap().scale(*a).add(&g.convolve(h).unwrap()).unwrap(),
        pts,
    );
    let lin_right = max_gap(
        &h.convolve(&f.scale(*a).add(g).unwrap()).unwrap(),
        &h.convolve(f).unwrap().scale(*a).add(&h.convolve(g).unwrap()).unwrap(),
        pts,
    );
    let unit = RkhsSignal::unit(s.kernel.clone(), s.op).unwrap();
    let unit_err = max_gap(&unit.convolve(f).unwrap(), f, pts).max(max_gap(&f.convolve(&unit).unwrap(), f, pts));
    [assoc, lin_left.max(lin_right), unit_err]
}

pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

/// Runs `cases` random law checks for `s`. Returns the worst error per law
/// or the first failing case.
pub fn check_laws(s: &Setup, cases: u32) -> Result<[f64; 3], String> {
    let worst = std::cell::Cell::new([0.0f64; 3]);
    runner(cases)
        .run(&law_case(s), |case| {
            let e = law_errors(s, &case);
            let mut w = worst.get();
            for i in 0..3 {
                w[i] = w[i].max(e[i]);
            }
            worst.set(w);
            if e.iter().any(|v| *v > LAW_TOL) {
                return Err(TestCaseError::fail(format!("errors {e:?}")));
            }
            Ok(())
        })
        .map_err(|e| format!("{:?}: {e}", s.op))?;
    Ok(worst.get())
}

/// Kernel values written out independently of the library.
pub fn oracle_kernel(k: &Kernel, u: &Center, v: &Center) -> f64 {
    match (k, u, v) {
        (Kernel::Gaussian1d { b }, Center::Scalar(x), Center::Scalar(y)) => (-b * (x - y).powi(2)).exp(),
        (Kernel::Gaussian2d { sigma }, Center::Planar(p), Center::Planar(q)) => {
            let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
            (-d2 / (2.0 * sigma * sigma)).exp()
        }
        (Kernel::Sinc { b }, Center::Scalar(x), Center::Scalar(y)) => {
            let d = x - y;
            if d.abs() < 1e-12 {
                b / PI
            } else {
                (b * d).sin() / (PI * d)
            }
        }
        (Kernel::SpherePoly { d }, _, _) => {
            let e = Vector3::z();
            let (pu, pv) = match (u, v) {
                (Center::Rotation3(a), Center::Rotation3(b)) => (a * e, b * e),
                _ => unreachable!(),
            };
            pu.dot(&pv).powi(*d as i32)
        }
        (Kernel::GraphonBox(g), Center::UnitInterval(x), Center::UnitInterval(y)) => {
            let n = g.n_quad();
            let h = 1.0 / n as f64;
            (0..=n)
                .map(|i| {
                    let z = i as f64 * h;
                    let w = if i == 0 || i == n { 0.5 * h } else { h };
                    w * g.graphon().eval(*x, z) * g.graphon().eval(z, *y)
                })
                .sum()
        }
        _ => unreachable!("oracle for {k:?}"),
    }
}

/// `∫₀¹ W(u,z) W(z,v) dz` in closed form for `W = min(u,v)(1 − max(u,v))`.
pub fn dirichlet_box_exact(u: f64, v: f64) -> f64 {
    let (u, v) = if u <= v { (u, v) } else { (v, u) };
    let prim = |z: f64| z * z / 2.0 - z * z * z / 3.0;
    (1.0 - u) * (1.0 - v) * u.powi(3) / 3.0 + u * (1.0 - v) * (prim(v) - prim(u)) + u * v * (1.0 - v).powi(3) / 3.0
}

/// One kernel per family for the reproducing-property check.
pub fn reproducing_kernels() -> Vec<(Arc<Kernel>, DomainOp)> {
    vec![
        (Arc::new(Kernel::gaussian1d(0.7).unwrap()), DomainOp::Translation1d),
        (Arc::new(Kernel::gaussian2d(10.0).unwrap()), DomainOp::Translation2d),
        (Arc::new(Kernel::sinc(PI).unwrap()), DomainOp::Translation1d),
        (Arc::new(Kernel::sphere_poly(4).unwrap()), DomainOp::SphereRotation),
        (
            Arc::new(Kernel::graphon_box(Graphon::DirichletGreen, 2000).unwrap()),
            DomainOp::UnitIntervalProduct,
        ),
    ]
}

/// Worst `|⟨k_v, k_u⟩ − K(u, v)|` over `pairs` random pairs per kernel.
pub fn reproducing_gap(pairs: u32) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for (kernel, op) in reproducing_kernels() {
        let s = Setup { op, kernel };
        let strat = (center(op), center(op));
        let mut r = runner(pairs);
        let mut gap: f64 = 0.0;
        for _ in 0..pairs {
            let (u, v) = strat.new_tree(&mut r).unwrap().current();
            let ku = RkhsSignal::section(s.kernel.clone(), op, u.clone(), 1.0).unwrap();
            let kv = RkhsSignal::section(s.kernel.clone(), op, v.clone(), 1.0).unwrap();
            gap = gap.max((kv.inner(&ku).unwrap() - oracle_kernel(&s.kernel, &u, &v)).abs());
            gap = gap.max((kv.evaluate(&u).unwrap() - oracle_kernel(&s.kernel, &u, &v)).abs());
        }
        if gap > 1e-10 {
            return Err(format!("{:?}: gap {gap:e}", s.kernel));
        }
        worst = worst.max(gap);
    }
    Ok(worst)
}
