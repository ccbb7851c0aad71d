//! Kernel-ridge fit of a signal to scattered samples.
//!
//! The coefficients are `α = (KᵀK + λK)⁺ K y` with `K` the Gram matrix of the
//! sample points, so the fitted signal has exactly one term per sample.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;

use crate::domain::{Center, CenterKind, DomainOp};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::linalg::symmetric_pinv;
use crate::signal::{parse_err, RkhsSignal, Term};

/// Relative eigenvalue cutoff of the pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-12;

/// Measured values `y_i = f(v_i)` at distinct points.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    points: Vec<Center>,
    values: Vec<f64>,
}

impl SampleSet {
    pub fn new(points: Vec<Center>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::Invalid(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite value in row {i}")));
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i].kind() == points[j].kind() && points[i].euclidean(&points[j]) <= 1e-9 {
                    return Err(Error::Invalid(format!("duplicate sample points at rows {i} and {j}")));
                }
            }
        }
        Ok(SampleSet { points, values })
    }

    pub fn points(&self) -> &[Center] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV with header `x,value` or `x,y,value`.
    pub fn to_csv(&self) -> Result<String> {
        let planar = matches!(self.points.first(), Some(Center::Planar(_)));
        let mut s = String::from(if planar { "x,y,value\n" } else { "x,value\n" });
        for (p, v) in self.points.iter().zip(&self.values) {
            match p {
                Center::Scalar(x) | Center::UnitInterval(x) => s.push_str(&format!("{x},{v}\n")),
                Center::Planar([x, y]) => s.push_str(&format!("{x},{y},{v}\n")),
                Center::Rotation3(_) => {
                    return Err(Error::Invalid("rotation samples have no CSV form".into()))
                }
            }
        }
        Ok(s)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }
}

/// Reads samples from a CSV with header `x,value` (line) or `x,y,value` (plane).
pub fn load_samples_csv(path: impl AsRef<Path>) -> Result<SampleSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_samples_csv(&text, path)
}

pub fn parse_samples_csv(text: &str, path: &Path) -> Result<SampleSet> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let dim = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["x", "value"] => 1,
        ["x", "y", "value"] => 2,
        _ => return Err(parse_err(path, 1, format!("expected header x[,y],value, got {}", header.join(",")))),
    };
    let mut points = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(path, line, e))?;
        if rec.len() != dim + 1 {
            return Err(parse_err(path, line, format!("expected {} fields", dim + 1)));
        }
        let nums = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| parse_err(path, line, e)))
            .collect::<Result<Vec<_>>>()?;
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(path, line, format!("non-finite entry in sample row {i}")));
        }
        points.push(if dim == 1 { Center::Scalar(nums[0]) } else { Center::Planar([nums[0], nums[1]]) });
        values.push(nums[dim]);
    }
    if points.is_empty() {
        return Err(parse_err(path, 2, "no samples"));
    }
    SampleSet::new(points, values).map_err(|e| parse_err(path, 0, e))
}

fn adapt(c: &Center, kind: CenterKind) -> Result<Center> {
    match (c, kind) {
        (Center::Scalar(x), CenterKind::UnitInterval) => Center::unit(*x),
        (c, k) if c.kind() == k => Ok(*c),
        (c, k) => Err(Error::Domain(format!("sample point {c} cannot be a {k} center"))),
    }
}

/// Ridge fit `α = (KᵀK + λK)⁺ K y`, one term per sample.
///
/// ```
/// use rkhs_conv::{fitting::{fit_ridge, SampleSet}, Center, DomainOp, Kernel};
///
/// let s = SampleSet::new(vec![Center::Scalar(0.5)], vec![2.0])?;
/// let f = fit_ridge(&s, Kernel::gaussian1d(1.0)?, DomainOp::Translation1d, 0.0)?;
/// assert!((f.evaluate(&Center::Scalar(0.5))? - 2.0).abs() < 1e-12);
/// # Ok::<(), rkhs_conv::Error>(())
/// ```
pub fn fit_ridge(
    samples: &SampleSet,
    kernel: impl Into<Arc<Kernel>>,
    op: DomainOp,
    lambda: f64,
) -> Result<RkhsSignal> {
    let kernel = kernel.into();
    if samples.is_empty() {
        return Err(Error::Invalid("no samples".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Invalid(format!("ridge parameter must be ≥ 0, got {lambda}")));
    }
    let kind = op.center_kind();
    let points = samples
        .points
        .iter()
        .map(|c| adapt(c, kind))
        .collect::<Result<Vec<_>>>()?;
    let k = kernel.gram(&points)?;
    if k.amax() == 0.0 {
        return Err(Error::DegenerateKernel("Gram matrix of the samples is zero".into()));
    }
    let y = DVector::from_column_slice(&samples.values);
    let m = k.transpose() * &k + &k * lambda;
    let alpha = symmetric_pinv(&m, PINV_CUTOFF) * (&k * y);
    let terms = points
        .iter()
        .zip(alpha.iter())
        .map(|(c, a)| Term::new(*c, *a))
        .collect();
    RkhsSignal::new(kernel, op, terms)
}

/// `‖[f(v_i)] − y‖₂` over the sample points.
pub fn sample_residual(f: &RkhsSignal, samples: &SampleSet) -> Result<f64> {
    let kind = f.kernel().center_kind();
    let mut acc = 0.0;
    for (p, y) in samples.points.iter().zip(&samples.values) {
        let r = f.evaluate(&adapt(p, kind)?)? - y;
        acc += r * r;
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn planar_samples(rng: &mut ChaCha8Rng, n: usize) -> SampleSet {
        let pts = (0..n)
            .map(|_| Center::Planar([rng.gen_range(-40.0..40.0), rng.gen_range(-40.0..40.0)]))
            .collect();
        let vals = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
        SampleSet::new(pts, vals).unwrap()
    }

    #[test]
    fn single_sample() {
        let k = Kernel::gaussian1d(2.0).unwrap();
        let s = SampleSet::new(vec![Center::Scalar(1.5)], vec![3.0]).unwrap();
        let f = fit_ridge(&s, k, DomainOp::Translation1d, 0.0).unwrap();
        assert_eq!(f.len(), 1);
        assert!((f.terms()[0].weight - 3.0).abs() < 1e-12);
    }

    #[test]
    fn small_lambda_interpolates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = planar_samples(&mut rng, 9);
        let f = fit_ridge(&s, Kernel::gaussian2d(10.0).unwrap(), DomainOp::Translation2d, 1e-9).unwrap();
        for (p, y) in s.points().iter().zip(s.values()) {
            let v = f.evaluate(p).unwrap();
            assert!((v - y).abs() <= 1e-6 * y.abs().max(1.0), "{v} vs {y}");
        }
    }

    #[test]
    fn regularization_shrinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = planar_samples(&mut rng, 9);
        let k = Arc::new(Kernel::gaussian2d(10.0).unwrap());
        let lo = fit_ridge(&s, k.clone(), DomainOp::Translation2d, 1e-9).unwrap();
        let hi = fit_ridge(&s, k, DomainOp::Translation2d, 1e-3).unwrap();
        assert!(sample_residual(&hi, &s).unwrap() > sample_residual(&lo, &s).unwrap());
        let l2 = |f: &RkhsSignal| f.weights().iter().map(|w| w * w).sum::<f64>();
        assert!(l2(&hi) < l2(&lo));
    }

    #[test]
    fn residual_is_monotone_in_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = planar_samples(&mut rng, 9);
        let k = Arc::new(Kernel::gaussian2d(10.0).unwrap());
        let mut last = 0.0;
        for lambda in [1e-9, 1e-6, 1e-3, 1e-1, 1.0, 10.0] {
            let r = sample_residual(&fit_ridge(&s, k.clone(), DomainOp::Translation2d, lambda).unwrap(), &s).unwrap();
            assert!(last <= r + 1e-10);
            last = r;
        }
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = planar_samples(&mut rng, 6);
        let kernel = Kernel::gaussian2d(10.0).unwrap();
        let f = fit_ridge(&s, kernel.clone(), DomainOp::Translation2d, 1e-3).unwrap();
        let k = kernel.gram(s.points()).unwrap();
        // Minimizer of ‖Kα − y‖² + λ αᵀKα solves (KᵀK + λK) α = K y.
        let m: DMatrix<f64> = k.transpose() * &k + &k * 1e-3;
        let rhs = &k * DVector::from_column_slice(s.values());
        let direct = m.lu().solve(&rhs).unwrap();
        for (a, b) in f.weights().iter().zip(direct.iter()) {
            assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn csv_parsing() {
        let p = Path::new("s.csv");
        assert!(matches!(parse_samples_csv("x,value\n", p), Err(Error::Parse { msg, .. }) if msg == "no samples"));
        let s = parse_samples_csv("x,value\n0.5,1\n1.5,2\n", p).unwrap();
        assert_eq!(parse_samples_csv(&s.to_csv().unwrap(), p).unwrap(), s);
        let dup = parse_samples_csv("x,y,value\n1,1,1\n1,1,2\n", p).unwrap_err();
        assert!(dup.to_string().contains("rows 0 and 1"));
        let bad = parse_samples_csv("x,value\n1,2\nfoo,3\n", p).unwrap_err();
        assert!(matches!(bad, Error::Parse { line: 3, .. }));
        assert!(parse_samples_csv("x,value\n1,NaN\n", p).is_err());
    }

    #[test]
    fn zero_gram_is_degenerate() {
        let k = Kernel::graphon_box(crate::graphon::Graphon::ConstantP(0.0), 64).unwrap();
        let s = SampleSet::new(vec![Center::Scalar(0.5)], vec![1.0]).unwrap();
        assert!(matches!(
            fit_ridge(&s, k, DomainOp::UnitIntervalProduct, 0.0),
            Err(Error::DegenerateKernel(_))
        ));
    }
}
