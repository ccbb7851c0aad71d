//! Small self-checking demonstrations that write figure data.
//!
//! Every demo writes its curves or surfaces as grid CSVs into
//! `<out_dir>/<name>/` together with `summary.json`, a [`DemoSummary`] whose
//! `pass` flag records whether the demo's metric met its threshold.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::domain::{Center, DomainOp};
use crate::error::{Error, Result};
use crate::graphon::{graphon_kernel, spectral_decompose, Graphon};
use crate::kernels::Kernel;
use crate::nonlinearity::apply_eta;
use crate::signal::{classic_convolve_grid, Axis, Grid, GridField, RkhsSignal, Term};

/// Quadrature settings for the classical sinc convolution. The sinc tails
/// decay like `1/τ`, so the integration window has to be wide.
pub const SINC_QUAD_HALFWIDTH: f64 = 600.0;
pub const SINC_QUAD_STEP: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Demo {
    SincEquivalence,
    GaussianConv,
    GraphonSpectrum,
    SphereRotation,
    NonlinearityFigure,
}

impl Demo {
    pub const ALL: [Demo; 5] = [
        Demo::SincEquivalence,
        Demo::GaussianConv,
        Demo::GraphonSpectrum,
        Demo::SphereRotation,
        Demo::NonlinearityFigure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Demo::SincEquivalence => "sinc_equivalence",
            Demo::GaussianConv => "gaussian_conv",
            Demo::GraphonSpectrum => "graphon_spectrum",
            Demo::SphereRotation => "sphere_rotation",
            Demo::NonlinearityFigure => "nonlinearity_figure",
        }
    }
}

impl fmt::Display for Demo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Demo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Demo::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown demo {s:?}")))
    }
}

/// What a demo measured.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DemoSummary {
    pub name: String,
    pub metric: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub details: serde_json::Value,
    pub files: Vec<String>,
}

/// Runs `demo` and writes its artifacts. Returns the summary that was written.
pub fn run_demo(demo: Demo, out_dir: &Path, seed: u64) -> Result<DemoSummary> {
    let dir = out_dir.join(demo.name());
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut w = Writer { dir: dir.clone(), files: Vec::new() };
    let mut summary = match demo {
        Demo::SincEquivalence => sinc_equivalence(&mut w, seed, 20)?,
        Demo::GaussianConv => gaussian_conv(&mut w)?,
        Demo::GraphonSpectrum => graphon_spectrum(&mut w, 2000)?,
        Demo::SphereRotation => sphere_rotation(&mut w)?,
        Demo::NonlinearityFigure => nonlinearity_figure(&mut w)?,
    };
    summary.files = w.files;
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

struct Writer {
    dir: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn field(&mut self, name: &str, f: &GridField) -> Result<()> {
        f.save_csv(self.dir.join(name))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn text(&mut self, name: &str, s: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, s).map_err(|e| Error::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn summary(name: &str, metric: &str, value: f64, threshold: f64, details: serde_json::Value) -> DemoSummary {
    DemoSummary {
        name: name.into(),
        metric: metric.into(),
        value,
        threshold,
        pass: value <= threshold,
        details,
        files: Vec::new(),
    }
}

fn line_signal(kernel: &Arc<Kernel>, terms: &[(f64, f64)]) -> Result<RkhsSignal> {
    RkhsSignal::new(
        kernel.clone(),
        DomainOp::Translation1d,
        terms.iter().map(|&(c, w)| Term::new(Center::Scalar(c), w)).collect(),
    )
}

/// Random 3-term sinc signal with centers in `[−5, 5]` and weights in `[−1, 1]`.
pub fn random_sinc_signal<R: Rng>(kernel: &Arc<Kernel>, rng: &mut R) -> Result<RkhsSignal> {
    let terms: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(-5.0..5.0), rng.gen_range(-1.0..1.0)))
        .collect();
    line_signal(kernel, &terms)
}

/// Max-abs gap between `f ∗ g` and the quadrature `f ⋆ g` on `grid`.
pub fn sinc_gap(f: &RkhsSignal, g: &RkhsSignal, grid: &Grid) -> Result<(f64, GridField, GridField)> {
    let rkhs = f.convolve(g)?.evaluate_grid(grid)?;
    let classic = classic_convolve_grid(f, g, grid, SINC_QUAD_HALFWIDTH, SINC_QUAD_STEP)?;
    Ok((rkhs.max_abs_diff(&classic)?, rkhs, classic))
}

pub fn sinc_grid() -> Result<Grid> {
    Ok(Grid::Line(Axis::new(-20.0, SINC_QUAD_STEP, 4001)?))
}

fn sinc_equivalence(w: &mut Writer, seed: u64, pairs: usize) -> Result<DemoSummary> {
    let kernel = Arc::new(Kernel::sinc(PI)?);
    let grid = sinc_grid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gaps = Vec::with_capacity(pairs);
    for i in 0..pairs {
        let f = random_sinc_signal(&kernel, &mut rng)?;
        let g = random_sinc_signal(&kernel, &mut rng)?;
        let (gap, rkhs, classic) = sinc_gap(&f, &g, &grid)?;
        if i == 0 {
            w.field("f.csv", &f.evaluate_grid(&grid)?)?;
            w.field("g.csv", &g.evaluate_grid(&grid)?)?;
            w.field("rkhs_conv.csv", &rkhs)?;
            w.field("classic_conv.csv", &classic)?;
        }
        gaps.push(gap);
    }
    let worst = gaps.iter().cloned().fold(0.0, f64::max);
    Ok(summary(
        "sinc_equivalence",
        "max_abs_gap",
        worst,
        1e-3,
        json!({ "B": PI, "pairs": pairs, "gaps": gaps, "quad_halfwidth": SINC_QUAD_HALFWIDTH }),
    ))
}

fn gaussian_conv(w: &mut Writer) -> Result<DemoSummary> {
    let b = 4.0;
    let kernel = Arc::new(Kernel::gaussian1d(b)?);
    let grid = Grid::Line(Axis::new(-4.0, 0.01, 801)?);
    let f = line_signal(&kernel, &[(-1.0, 1.0)])?;
    let g = line_signal(&kernel, &[(2.0, 1.0)])?;
    let rkhs = f.convolve(&g)?.evaluate_grid(&grid)?;
    let classic = classic_convolve_grid(&f, &g, &grid, 10.0, 0.01)?;
    // ∫ e^{−Bτ²} e^{−B(x−τ)²} dτ = √(π/2B) e^{−Bx²/2}
    let closed: Vec<f64> = match &grid {
        Grid::Line(a) => a
            .coords()
            .iter()
            .map(|x| (PI / (2.0 * b)).sqrt() * (-b * (x - 1.0).powi(2) / 2.0).exp())
            .collect(),
        Grid::Plane { .. } => unreachable!(),
    };
    let closed = GridField::new(grid.clone(), closed)?;
    w.field("f.csv", &f.evaluate_grid(&grid)?)?;
    w.field("g.csv", &g.evaluate_grid(&grid)?)?;
    w.field("rkhs_conv.csv", &rkhs)?;
    w.field("classic_conv.csv", &classic)?;
    let peak_ratio = classic.max_abs() / rkhs.max_abs();
    Ok(summary(
        "gaussian_conv",
        "classic_to_rkhs_peak_ratio",
        peak_ratio,
        1.0,
        json!({
            "B": b,
            "rkhs_peak": rkhs.max_abs(),
            "classic_peak": classic.max_abs(),
            "classic_vs_closed_form": classic.max_abs_diff(&closed)?,
        }),
    ))
}

/// `λ_k = (kπ)⁻⁴` for the Dirichlet Green's graphon kernel.
pub fn dirichlet_kernel_eigenvalue(k: usize) -> f64 {
    (k as f64 * PI).powi(-4)
}

/// Rows `(k, computed, analytic, relative error)` for `k = 1..=k_max`.
pub fn graphon_spectrum_rows(n: usize, k_max: usize) -> Result<Vec<(usize, f64, f64, f64)>> {
    let kernel = graphon_kernel(&Graphon::DirichletGreen, n)?;
    let pairs = spectral_decompose(&kernel, k_max)?;
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let analytic = dirichlet_kernel_eigenvalue(i + 1);
            (i + 1, p.value, analytic, (p.value - analytic).abs() / analytic)
        })
        .collect())
}

fn graphon_spectrum(w: &mut Writer, n: usize) -> Result<DemoSummary> {
    let rows = graphon_spectrum_rows(n, 5)?;
    let mut csv = String::from("k,computed_lambda,analytic_lambda,relative_error\n");
    for (k, c, a, e) in &rows {
        csv.push_str(&format!("{k},{c:e},{a:e},{e:e}\n"));
    }
    w.text("spectrum.csv", &csv)?;

    // k_{0.5} ∗ k_{0.8} = k_{0.4} under the unit-interval product.
    let kernel = Arc::new(Kernel::graphon_box(Graphon::DirichletGreen, 400)?);
    let op = DomainOp::UnitIntervalProduct;
    let grid = Grid::Line(Axis::span(0.005, 1.0, 200)?);
    let a = RkhsSignal::section(kernel.clone(), op, Center::unit(0.5)?, 1.0)?;
    let b = RkhsSignal::section(kernel.clone(), op, Center::unit(0.8)?, 1.0)?;
    let ab = a.convolve(&b)?;
    w.field("k_0.5.csv", &a.evaluate_grid(&grid)?)?;
    w.field("k_0.8.csv", &b.evaluate_grid(&grid)?)?;
    w.field("k_0.5_conv_k_0.8.csv", &ab.evaluate_grid(&grid)?)?;

    let worst = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    Ok(summary(
        "graphon_spectrum",
        "max_relative_eigenvalue_error",
        worst,
        0.01,
        json!({
            "graphon": "dirichlet_green",
            "n": n,
            "product_center": ab.terms()[0].center.to_vec(),
        }),
    ))
}

/// Rotation taking the base point `(0,0,1)` to the point with polar angle
/// `theta` and azimuth `phi`.
pub fn sphere_center(theta: f64, phi: f64) -> Result<Center> {
    let r = Rotation3::from_axis_angle(&Vector3::z_axis(), phi)
        * Rotation3::from_axis_angle(&Vector3::y_axis(), theta);
    Center::rotation(r.into_inner())
}

fn sphere_field(f: &RkhsSignal, grid: &Grid) -> Result<GridField> {
    let (ax, ay) = match grid {
        Grid::Plane { x, y } => (x, y),
        Grid::Line(_) => unreachable!(),
    };
    let mut values = Vec::with_capacity(grid.len());
    for theta in ay.coords() {
        for phi in ax.coords() {
            values.push(f.evaluate(&sphere_center(theta, phi)?)?);
        }
    }
    GridField::new(grid.clone(), values)
}

fn sphere_rotation(w: &mut Writer) -> Result<DemoSummary> {
    let kernel = Arc::new(Kernel::sphere_poly(4)?);
    let op = DomainOp::SphereRotation;
    let pre = vec![
        Term::new(sphere_center(PI / 3.0, 0.0)?, 1.0),
        Term::new(sphere_center(PI / 2.0, PI / 3.0)?, 0.5),
    ];
    let f = RkhsSignal::new(kernel.clone(), op, pre)?;
    let v3 = Center::rotation_z(PI / 4.0);
    let h = RkhsSignal::section(kernel.clone(), op, v3.clone(), 1.0)?;
    let out = h.convolve(&f)?;

    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), PI / 4.0);
    let mut worst: f64 = 0.0;
    let mut rows = String::from("signal,x,y,z,weight\n");
    for (label, s) in [("pre", &f), ("post", &out)] {
        for t in s.terms() {
            let p = t.center.sphere_point().expect("rotation center");
            rows.push_str(&format!("{label},{},{},{},{}\n", p.x, p.y, p.z, t.weight));
        }
    }
    for (a, b) in f.terms().iter().zip(out.terms()) {
        let want = rz * a.center.sphere_point().expect("rotation center");
        let got = b.center.sphere_point().expect("rotation center");
        worst = worst.max((want - got).amax());
    }
    w.text("centers.csv", &rows)?;

    let grid = Grid::Plane {
        x: Axis::span(0.0, 2.0 * PI, 73)?,
        y: Axis::span(0.0, PI, 37)?,
    };
    w.field("pre.csv", &sphere_field(&f, &grid)?)?;
    w.field("post.csv", &sphere_field(&out, &grid)?)?;
    Ok(summary(
        "sphere_rotation",
        "max_center_error",
        worst,
        1e-12,
        json!({ "d": 4, "v3": v3.to_vec(), "grid": "x = azimuth, y = polar angle" }),
    ))
}

fn nonlinearity_figure(w: &mut Writer) -> Result<DemoSummary> {
    let b = 1.0;
    let (v, eps) = (0.0, 0.5);
    let kernel = Arc::new(Kernel::gaussian1d(b)?);
    let grid = Grid::Line(Axis::new(-4.0, 0.01, 801)?);
    let g1 = line_signal(&kernel, &[(v - eps, 1.0), (v + eps, 1.0)])?;
    let g2 = line_signal(&kernel, &[(v - eps, 1.0), (v + eps, -1.0)])?;
    let e1 = apply_eta(&g1)?;
    let e2 = apply_eta(&g2)?;
    let fixed_gap = e1.sub_structural(&g1)?.norm();
    let (a, c) = (Center::Scalar(v - eps), Center::Scalar(v + eps));
    let kaa = kernel.eval(&a, &a)?;
    let kca = kernel.eval(&c, &a)?;
    let beta = (kaa - kca) / (kaa + kca);
    let beta_gap = (e2.terms()[0].weight - beta).abs();
    for (name, s) in [("g1.csv", &g1), ("eta_g1.csv", &e1), ("g2.csv", &g2), ("eta_g2.csv", &e2)] {
        w.field(name, &s.evaluate_grid(&grid)?)?;
    }
    Ok(summary(
        "nonlinearity_figure",
        "max_identity_gap",
        fixed_gap.max(beta_gap),
        1e-12,
        json!({
            "B": b,
            "epsilon": eps,
            "eta_g1_minus_g1_norm": fixed_gap,
            "beta_closed_form": beta,
            "beta_computed": e2.terms()[0].weight,
            "g2_norm": g2.norm(),
            "eta_g2_norm": e2.norm(),
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for d in Demo::ALL {
            assert_eq!(d.name().parse::<Demo>().unwrap(), d);
        }
        assert!("nope".parse::<Demo>().is_err());
    }

    #[test]
    fn cheap_demos_pass_and_write_files() {
        let dir = tempfile::tempdir().unwrap();
        for d in [Demo::GaussianConv, Demo::SphereRotation, Demo::NonlinearityFigure] {
            let s = run_demo(d, dir.path(), 0).unwrap();
            assert!(s.pass, "{d}: {s:?}");
            for f in &s.files {
                assert!(dir.path().join(d.name()).join(f).exists());
            }
        }
    }

    #[test]
    fn gaussian_classic_peak_is_lower() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_demo(Demo::GaussianConv, dir.path(), 0).unwrap();
        assert!(s.details["classic_vs_closed_form"].as_f64().unwrap() < 1e-9);
        let back = GridField::load_csv(dir.path().join("gaussian_conv/classic_conv.csv")).unwrap();
        assert!((back.max_abs() - (PI / 8.0).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn sinc_pair_within_tolerance() {
        let kernel = Arc::new(Kernel::sinc(PI).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_sinc_signal(&kernel, &mut rng).unwrap();
        let g = random_sinc_signal(&kernel, &mut rng).unwrap();
        let (gap, _, _) = sinc_gap(&f, &g, &sinc_grid().unwrap()).unwrap();
        assert!(gap <= 1e-3, "gap {gap}");
    }
}
