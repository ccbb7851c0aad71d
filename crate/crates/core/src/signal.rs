//! Signals `f = Σ_v α_v k_v` and the convolution algebra on them.
//!
//! A signal stores its kernel, the domain operation and a finite list of
//! `(center, weight)` terms. The product `k_v ∗ k_u = k_{v∘u}` extends
//! bilinearly to [`RkhsSignal::convolve`], which makes the signals a unital
//! algebra with unit `k_δ`.
//!
//! Zero-weight terms are meaningful: the pointwise nonlinearity normalizes
//! each coefficient by a sum over the *center set*, so two representations of
//! the same function can behave differently under it. Operations that only
//! merge coincident centers (see [`Tolerances::STRUCTURAL`]) keep those terms.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::domain::{Center, CenterKind, DomainOp};
use crate::error::{Error, Result};
use crate::kernels::Kernel;

/// Maximum number of terms a convolution may produce unless raised.
pub const DEFAULT_TERM_CAP: usize = 50_000;

/// One kernel section `weight · k_center`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub center: Center,
    pub weight: f64,
}

impl Term {
    pub fn new(center: Center, weight: f64) -> Self {
        Term { center, weight }
    }
}

/// Merge and drop tolerances for [`RkhsSignal::prune`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Centers closer than this (in the domain operation's metric) are merged.
    pub merge: f64,
    /// Terms with `|weight| < drop` are removed.
    pub drop: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        merge: 1e-9,
        drop: 1e-12,
    };

    /// Merge coincident centers but keep every center, including zero weights.
    pub const STRUCTURAL: Tolerances = Tolerances {
        merge: 1e-9,
        drop: 0.0,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances::DEFAULT
    }
}

/// Bounds on how much a prune changed the signal, in sup norm.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PruneReport {
    pub dropped_terms: usize,
    pub merged_terms: usize,
    /// `Σ_dropped |w| · sup_x |k_c(x)|`.
    pub drop_bound: f64,
    /// `Σ_merged |w| · sup_x |k_c(x) − k_rep(x)|`, bounded through the RKHS norm.
    pub merge_bound: f64,
}

impl PruneReport {
    pub fn total_bound(&self) -> f64 {
        self.drop_bound + self.merge_bound
    }
}

/// A finite kernel expansion `Σ_v α_v k_v` in an RKHS.
#[derive(Clone, Debug)]
pub struct RkhsSignal {
    kernel: Arc<Kernel>,
    op: DomainOp,
    terms: Vec<Term>,
    cap: usize,
}

impl RkhsSignal {
    /// Builds a signal, checking every center against the kernel and operation.
    pub fn new(kernel: impl Into<Arc<Kernel>>, op: DomainOp, terms: Vec<Term>) -> Result<Self> {
        let kernel = kernel.into();
        op.validate()?;
        if kernel.center_kind() != op.center_kind() {
            return Err(Error::Domain(format!(
                "kernel on {} centers paired with {:?}, which composes {} centers",
                kernel.center_kind(),
                op,
                op.center_kind()
            )));
        }
        for t in &terms {
            op.check(&t.center)?;
            if !t.weight.is_finite() {
                return Err(Error::Invalid(format!("non-finite weight at center {}", t.center)));
            }
        }
        Ok(RkhsSignal {
            kernel,
            op,
            terms,
            cap: DEFAULT_TERM_CAP,
        })
    }

    /// The zero signal, with no terms.
    pub fn zero(kernel: impl Into<Arc<Kernel>>, op: DomainOp) -> Result<Self> {
        Self::new(kernel, op, Vec::new())
    }

    /// `weight · k_center`.
    pub fn section(
        kernel: impl Into<Arc<Kernel>>,
        op: DomainOp,
        center: Center,
        weight: f64,
    ) -> Result<Self> {
        Self::new(kernel, op, vec![Term::new(center, weight)])
    }

    /// `k_δ`, the unit of the convolution.
    pub fn unit(kernel: impl Into<Arc<Kernel>>, op: DomainOp) -> Result<Self> {
        Self::section(kernel, op, op.identity(), 1.0)
    }

    /// A signal in the same space as `self` with the given terms.
    pub fn with_terms(&self, terms: Vec<Term>) -> Result<Self> {
        let mut s = Self::new(self.kernel.clone(), self.op, terms)?;
        s.cap = self.cap;
        Ok(s)
    }

    /// Same as [`RkhsSignal::with_terms`] for terms built from this space's centers.
    pub(crate) fn with_terms_unchecked(&self, terms: Vec<Term>) -> Self {
        RkhsSignal {
            kernel: self.kernel.clone(),
            op: self.op,
            terms,
            cap: self.cap,
        }
    }

    /// Zero signal in the same space.
    pub fn zero_like(&self) -> Self {
        self.with_terms_unchecked(Vec::new())
    }

    /// Raises or lowers the term cap used by [`RkhsSignal::convolve`].
    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn kernel_arc(&self) -> &Arc<Kernel> {
        &self.kernel
    }

    pub fn op(&self) -> DomainOp {
        self.op
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn centers(&self) -> Vec<Center> {
        self.terms.iter().map(|t| t.center).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.weight).collect()
    }

    /// Errors unless both signals live in the same space.
    pub fn check_same_space(&self, other: &RkhsSignal) -> Result<()> {
        let same_kernel = Arc::ptr_eq(&self.kernel, &other.kernel) || *self.kernel == *other.kernel;
        if !same_kernel {
            return Err(Error::Mismatch(format!(
                "kernels differ: {:?} vs {:?}",
                self.kernel, other.kernel
            )));
        }
        if self.op != other.op {
            return Err(Error::Mismatch(format!(
                "domain operations differ: {:?} vs {:?}",
                self.op, other.op
            )));
        }
        Ok(())
    }

    /// `f(x) = Σ_v α_v K(x, v)`.
    pub fn evaluate(&self, x: &Center) -> Result<f64> {
        self.kernel.check(x)?;
        Ok(self.eval_unchecked(x))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &Center) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight * self.kernel.k(x, &t.center))
            .sum()
    }

    /// `⟨f, g⟩_H = Σ_{v,u} α_v β_u K(u, v)`.
    pub fn inner(&self, other: &RkhsSignal) -> Result<f64> {
        self.check_same_space(other)?;
        Ok(self.inner_unchecked(other))
    }

    pub(crate) fn inner_unchecked(&self, other: &RkhsSignal) -> f64 {
        let k = &*self.kernel;
        let mut acc = 0.0;
        for a in &self.terms {
            if a.weight == 0.0 {
                continue;
            }
            let mut row = 0.0;
            for b in &other.terms {
                row += b.weight * k.k(&a.center, &b.center);
            }
            acc += a.weight * row;
        }
        acc
    }

    /// `⟨f, f⟩_H`, using the symmetry of the Gram matrix.
    pub fn norm_sq(&self) -> f64 {
        let k = &*self.kernel;
        let t = &self.terms;
        let mut acc = 0.0;
        for i in 0..t.len() {
            if t[i].weight == 0.0 {
                continue;
            }
            acc += t[i].weight * t[i].weight * k.k(&t[i].center, &t[i].center);
            let mut row = 0.0;
            for j in (i + 1)..t.len() {
                row += t[j].weight * k.k(&t[i].center, &t[j].center);
            }
            acc += 2.0 * t[i].weight * row;
        }
        acc
    }

    /// `‖f‖_H = √max(⟨f, f⟩, 0)`.
    pub fn norm(&self) -> f64 {
        self.norm_sq().max(0.0).sqrt()
    }

    /// `f + g`, pruned with the default tolerances.
    pub fn add(&self, other: &RkhsSignal) -> Result<Self> {
        self.add_with(other, Tolerances::DEFAULT)
    }

    pub fn add_with(&self, other: &RkhsSignal, tol: Tolerances) -> Result<Self> {
        self.check_same_space(other)?;
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Ok(self.with_terms_unchecked(terms).prune_with(tol).0)
    }

    /// `f + c·g` with structural tolerances (coincident centers merged, nothing dropped).
    pub(crate) fn axpy(&self, c: f64, other: &RkhsSignal) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|t| Term::new(t.center, c * t.weight)));
        self.with_terms_unchecked(terms).prune_with(Tolerances::STRUCTURAL).0
    }

    /// `f − g` with structural tolerances.
    pub fn sub_structural(&self, other: &RkhsSignal) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(self.axpy(-1.0, other))
    }

    /// `c · f`, pruned with the default tolerances (so `0 · f` has no terms).
    pub fn scale(&self, c: f64) -> Self {
        self.scale_with(c, Tolerances::DEFAULT)
    }

    pub fn scale_with(&self, c: f64, tol: Tolerances) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term::new(t.center, c * t.weight))
            .collect();
        self.with_terms_unchecked(terms).prune_with(tol).0
    }

    /// The convolution `f ∗ g = Σ_{v,u} α_v β_u k_{v∘u}`, pruned with the
    /// default tolerances.
    pub fn convolve(&self, other: &RkhsSignal) -> Result<Self> {
        self.convolve_with(other, Tolerances::DEFAULT)
    }

    pub fn convolve_with(&self, other: &RkhsSignal, tol: Tolerances) -> Result<Self> {
        self.check_same_space(other)?;
        let requested = self.len() * other.len();
        let cap = self.cap.min(other.cap);
        if requested > cap {
            return Err(Error::TermCap { requested, cap });
        }
        let mut terms = Vec::with_capacity(requested);
        for a in &self.terms {
            for b in &other.terms {
                terms.push(Term::new(
                    self.op.compose_unchecked(&a.center, &b.center),
                    a.weight * b.weight,
                ));
            }
        }
        Ok(self.with_terms_unchecked(terms).prune_with(tol).0)
    }

    /// Merges centers within `merge_tol` (keeping the first occurrence) and drops
    /// terms with `|weight| < drop_tol`.
    pub fn prune(&self, merge_tol: f64, drop_tol: f64) -> Result<(Self, PruneReport)> {
        if !(merge_tol >= 0.0 && drop_tol >= 0.0) {
            return Err(Error::Invalid(format!(
                "prune tolerances must be nonnegative, got {merge_tol}, {drop_tol}"
            )));
        }
        Ok(self.prune_with(Tolerances {
            merge: merge_tol,
            drop: drop_tol,
        }))
    }

    pub(crate) fn prune_with(&self, tol: Tolerances) -> (Self, PruneReport) {
        let k = &*self.kernel;
        let sup = k.diag_sup();
        let mut report = PruneReport::default();
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            match self.find_rep(&out, &t.center, tol.merge) {
                Some(i) => {
                    let rep = out[i].center;
                    if rep != t.center {
                        let gap = (k.k(&rep, &rep) + k.k(&t.center, &t.center)
                            - 2.0 * k.k(&rep, &t.center))
                        .max(0.0)
                        .sqrt();
                        report.merge_bound += t.weight.abs() * gap * sup.sqrt();
                    }
                    report.merged_terms += 1;
                    out[i].weight += t.weight;
                }
                None => out.push(*t),
            }
        }
        if tol.drop > 0.0 {
            out.retain(|t| {
                let keep = t.weight.abs() >= tol.drop;
                if !keep {
                    report.dropped_terms += 1;
                    report.drop_bound +=
                        t.weight.abs() * (k.k(&t.center, &t.center) * sup).max(0.0).sqrt();
                }
                keep
            });
        }
        (self.with_terms_unchecked(out), report)
    }

    fn find_rep(&self, reps: &[Term], c: &Center, merge: f64) -> Option<usize> {
        match (self.op, c) {
            // Fast exact comparison for the common planar translation case.
            (DomainOp::Translation2d, Center::Planar(p)) => reps.iter().position(|r| match r.center {
                Center::Planar(q) => {
                    let (dx, dy) = (p[0] - q[0], p[1] - q[1]);
                    dx * dx + dy * dy <= merge * merge
                }
                _ => false,
            }),
            _ => reps
                .iter()
                .position(|r| self.op.distance(&r.center, c) <= merge),
        }
    }

    /// Appends zero-weight terms for the given centers not already present.
    pub fn pad_to(&self, centers: &[Center]) -> Result<Self> {
        for c in centers {
            self.op.check(c)?;
        }
        Ok(self.pad_unchecked(centers))
    }

    pub(crate) fn pad_unchecked(&self, centers: &[Center]) -> Self {
        let mut terms = self.terms.clone();
        for c in centers {
            if self.find_rep(&terms, c, Tolerances::STRUCTURAL.merge).is_none() {
                terms.push(Term::new(*c, 0.0));
            }
        }
        self.with_terms_unchecked(terms)
    }

    /// Evaluates the signal at every lattice point.
    pub fn evaluate_grid(&self, grid: &Grid) -> Result<GridField> {
        let kind = self.kernel.center_kind();
        let values = grid
            .points()
            .iter()
            .map(|p| grid.center_for(kind, p).map(|c| self.eval_unchecked(&c)))
            .collect::<Result<Vec<_>>>()?;
        GridField::new(grid.clone(), values)
    }

    /// Serializable form.
    pub fn to_file(&self) -> SignalFile {
        SignalFile {
            kernel: (*self.kernel).clone(),
            op: self.op,
            terms: self
                .terms
                .iter()
                .map(|t| TermFile {
                    center: t.center.to_vec(),
                    weight: t.weight,
                })
                .collect(),
        }
    }

    pub fn from_file(file: SignalFile) -> Result<Self> {
        let kind = file.op.center_kind();
        let terms = file
            .terms
            .into_iter()
            .map(|t| Ok(Term::new(Center::from_slice(kind, &t.center)?, t.weight)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.kernel, file.op, terms)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

impl fmt::Display for RkhsSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for t in &self.terms {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "{}·k[{}]", t.weight, t.center)?;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// JSON form of a signal: `{"kernel": …, "op": …, "terms": [{"center": […], "weight": w}]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SignalFile {
    pub kernel: Kernel,
    pub op: DomainOp,
    pub terms: Vec<TermFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermFile {
    pub center: Vec<f64>,
    pub weight: f64,
}

/// Uniformly spaced coordinates `start + i·step`, `i < n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(start: f64, step: f64, n: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) || n == 0 || !start.is_finite() {
            return Err(Error::Invalid(format!(
                "axis needs step > 0 and n > 0, got step {step}, n {n}"
            )));
        }
        Ok(Axis { start, step, n })
    }

    /// `n` points from `lo` to `hi` inclusive.
    pub fn span(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            return Err(Error::Invalid(format!("axis span [{lo}, {hi}] with {n} points")));
        }
        Axis::new(lo, (hi - lo) / (n - 1) as f64, n)
    }

    pub fn at(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.at(i)).collect()
    }
}

/// A rectangular evaluation lattice in one or two dimensions.
#[derive(Clone, Debug, PartialEq)]
pub enum Grid {
    Line(Axis),
    Plane { x: Axis, y: Axis },
}

impl Grid {
    pub fn len(&self) -> usize {
        match self {
            Grid::Line(a) => a.n,
            Grid::Plane { x, y } => x.n * y.n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match self {
            Grid::Line(_) => 1,
            Grid::Plane { .. } => 2,
        }
    }

    /// Lattice points, row-major: `y` is the slow index, `x` the fast one.
    pub fn points(&self) -> Vec<Vec<f64>> {
        match self {
            Grid::Line(a) => a.coords().into_iter().map(|x| vec![x]).collect(),
            Grid::Plane { x, y } => {
                let xs = x.coords();
                y.coords()
                    .into_iter()
                    .flat_map(|yv| xs.iter().map(move |&xv| vec![xv, yv]))
                    .collect()
            }
        }
    }

    fn center_for(&self, kind: CenterKind, p: &[f64]) -> Result<Center> {
        match (kind, p) {
            (CenterKind::Scalar, [x]) => Ok(Center::Scalar(*x)),
            (CenterKind::UnitInterval, [x]) => Center::unit(*x),
            (CenterKind::Planar, [x, y]) => Ok(Center::Planar([*x, *y])),
            _ => Err(Error::Domain(format!(
                "{}-dimensional grid cannot hold {kind} centers",
                p.len()
            ))),
        }
    }
}

/// Values of a signal sampled on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::Invalid(format!(
                "grid has {} points but {} values",
                grid.len(),
                values.len()
            )));
        }
        Ok(GridField { grid, values })
    }

    pub fn max_abs_diff(&self, other: &GridField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Mismatch("grid fields on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Squared Frobenius norm of the sampled values.
    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// CSV with header `x,value` or `x,y,value`, one row per lattice point.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(if self.grid.dim() == 1 { "x,value\n" } else { "x,y,value\n" });
        for (p, v) in self.grid.points().iter().zip(&self.values) {
            for c in p {
                s.push_str(&format!("{c},"));
            }
            s.push_str(&format!("{v}\n"));
        }
        s
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Parses the CSV written by [`GridField::to_csv`], recovering the lattice.
    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| parse_err(path, 1, e))?.clone();
        let dim = match headers.iter().collect::<Vec<_>>().as_slice() {
            ["x", "value"] => 1,
            ["x", "y", "value"] => 2,
            other => {
                return Err(Error::Parse {
                    path: path.into(),
                    line: 1,
                    msg: format!("expected header x[,y],value, got {}", other.join(",")),
                })
            }
        };
        let mut pts: Vec<Vec<f64>> = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| parse_err(path, line, e))?;
            let nums = rec
                .iter()
                .map(|f| f.trim().parse::<f64>().map_err(|e| parse_err(path, line, e)))
                .collect::<Result<Vec<_>>>()?;
            if nums.len() != dim + 1 {
                return Err(parse_err(path, line, "wrong number of fields"));
            }
            values.push(nums[dim]);
            pts.push(nums[..dim].to_vec());
        }
        let axis_of = |k: usize| -> Result<Axis> {
            let mut cs: Vec<f64> = pts.iter().map(|p| p[k]).collect();
            cs.sort_by(f64::total_cmp);
            cs.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
            if cs.len() == 1 {
                return Axis::new(cs[0], 1.0, 1);
            }
            Axis::new(cs[0], (cs[cs.len() - 1] - cs[0]) / (cs.len() - 1) as f64, cs.len())
        };
        if pts.is_empty() {
            return Err(parse_err(path, 2, "no grid rows"));
        }
        let grid = if dim == 1 {
            Grid::Line(axis_of(0)?)
        } else {
            Grid::Plane {
                x: axis_of(0)?,
                y: axis_of(1)?,
            }
        };
        let field = GridField::new(grid, values)
            .map_err(|e| parse_err(path, 0, e))?;
        for (p, q) in field.grid.points().iter().zip(&pts) {
            if p.iter().zip(q).any(|(a, b)| (a - b).abs() > 1e-6 * (1.0 + a.abs())) {
                return Err(parse_err(path, 0, "rows are not a row-major lattice"));
            }
        }
        Ok(field)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, path)
    }
}

pub(crate) fn parse_err(path: &Path, line: usize, e: impl fmt::Display) -> Error {
    Error::Parse {
        path: path.into(),
        line,
        msg: e.to_string(),
    }
}

/// Classical convolution `(f ⋆ g)(x) = ∫ f(τ) g(x − τ) dτ` on a 1D grid, by the
/// trapezoid rule over `τ ∈ [x − halfwidth, x + halfwidth]` with spacing `step`.
///
/// When the grid spacing equals `step` the quadrature nodes of all grid points
/// share one lattice and the sum is evaluated as a single FFT convolution.
pub fn classic_convolve_grid(
    f: &RkhsSignal,
    g: &RkhsSignal,
    grid: &Grid,
    quad_halfwidth: f64,
    quad_step: f64,
) -> Result<GridField> {
    f.check_same_space(g)?;
    if f.kernel().center_kind() != CenterKind::Scalar {
        return Err(Error::Domain("classical convolution needs a 1D kernel on the line".into()));
    }
    let axis = match grid {
        Grid::Line(a) => *a,
        Grid::Plane { .. } => return Err(Error::Domain("classical convolution needs a 1D grid".into())),
    };
    if !(quad_step > 0.0 && quad_halfwidth > 0.0) {
        return Err(Error::Invalid("quadrature step and halfwidth must be positive".into()));
    }
    let m = (2.0 * quad_halfwidth / quad_step).round() as usize;
    let weight = |j: usize| if j == 0 || j == m { 0.5 * quad_step } else { quad_step };
    let ev = |s: &RkhsSignal, x: f64| s.eval_unchecked(&Center::Scalar(x));

    let values = if (axis.step - quad_step).abs() <= 1e-12 * quad_step {
        // τ_{n,j} = x₀ − L + (n + j)·s, so f is sampled once on a shared lattice
        // and y_n = Σ_j a_{n+j} c_j is a correlation.
        let lo = axis.start - quad_halfwidth;
        let a: Vec<f64> = (0..axis.n + m).map(|i| ev(f, lo + i as f64 * quad_step)).collect();
        let c_rev: Vec<f64> = (0..=m)
            .map(|j| {
                let jj = m - j;
                weight(jj) * ev(g, quad_halfwidth - jj as f64 * quad_step)
            })
            .collect();
        let full = fft_convolve(&a, &c_rev);
        (0..axis.n).map(|n| full[n + m]).collect()
    } else {
        axis.coords()
            .into_iter()
            .map(|x| {
                (0..=m)
                    .map(|j| {
                        let tau = x - quad_halfwidth + j as f64 * quad_step;
                        weight(j) * ev(f, tau) * ev(g, x - tau)
                    })
                    .sum()
            })
            .collect()
    };
    GridField::new(grid.clone(), values)
}

fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = (a.len() + b.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let pad = |x: &[f64]| {
        let mut v: Vec<Complex<f64>> = x.iter().map(|&r| Complex::new(r, 0.0)).collect();
        v.resize(len, Complex::new(0.0, 0.0));
        v
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / len as f64;
    fa.iter().map(|c| c.re * scale).collect()
}
