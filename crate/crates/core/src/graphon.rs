//! Graphons, their box product and polynomial graphon filters on a
//! quadrature grid.
//!
//! A graphon `W : [0,1]² → [0,1]` acts as a continuum adjacency. The box
//! product `(S₁□S₂)(u,v) = ∫ S₁(u,z) S₂(z,v) dz` is the continuum matrix
//! product, and `K = W□W` is a reproducing kernel on `[0,1]`.
//!
//! Kernels are sampled at the midpoints `(i + ½)/n` and the integral is the
//! midpoint rule, so a discretized kernel with values `M` represents the
//! integral operator `h·M` with `h = 1/n`. All spectral quantities below are
//! those of `h·M`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Built-in graphons.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Graphon {
    /// `W(u,v) = min(u,v)·(1 − max(u,v))`, the Green's function of `−d²/dx²`
    /// with Dirichlet boundary conditions. Its integral operator has
    /// eigenpairs `((kπ)⁻², √2 sin(kπx))`.
    DirichletGreen,
    /// `W ≡ p`.
    ConstantP(f64),
}

impl Graphon {
    pub fn validate(&self) -> Result<()> {
        match self {
            Graphon::ConstantP(p) if !(0.0..=1.0).contains(p) => {
                Err(Error::Invalid(format!("constant graphon needs p in [0, 1], got {p}")))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        match self {
            Graphon::DirichletGreen => u.min(v) * (1.0 - u.max(v)),
            Graphon::ConstantP(p) => *p,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Graphon::DirichletGreen => "dirichlet_green",
            Graphon::ConstantP(_) => "constant_p",
        }
    }
}

/// A symmetric kernel sampled on the midpoint grid of `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizedKernel {
    values: DMatrix<f64>,
}

impl DiscretizedKernel {
    /// Wraps a sampled kernel. The matrix must be square, finite and symmetric.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() || values.nrows() == 0 {
            return Err(Error::Invalid(format!(
                "discretized kernel must be square and nonempty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("discretized kernel has non-finite entries".into()));
        }
        let asym = (&values - values.transpose()).amax();
        if asym > 1e-12 * values.amax().max(1.0) {
            return Err(Error::Invalid(format!("discretized kernel is not symmetric ({asym:e})")));
        }
        Ok(DiscretizedKernel { values })
    }

    /// Samples a graphon itself on the grid.
    pub fn sample(w: &Graphon, n: usize) -> Self {
        let x = midpoints(n);
        DiscretizedKernel {
            values: DMatrix::from_fn(n, n, |i, j| w.eval(x[i], x[j])),
        }
    }

    /// The quadrature delta `(1/h)·I`, the unit of the box product.
    pub fn delta(n: usize) -> Self {
        DiscretizedKernel {
            values: DMatrix::identity(n, n) * n as f64,
        }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n() as f64
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// The integral operator `h·M` as a matrix.
    pub fn operator(&self) -> DMatrix<f64> {
        &self.values * self.spacing()
    }

    /// Value at grid nodes `(i, j)`.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }
}

/// Grid nodes `(i + ½)/n`.
pub fn midpoints(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}

/// `(A□B)(u,v) = ∫ A(u,z) B(z,v) dz` by the midpoint rule.
pub fn box_product(a: &DiscretizedKernel, b: &DiscretizedKernel) -> Result<DiscretizedKernel> {
    if a.n() != b.n() {
        return Err(Error::Mismatch(format!(
            "box product of grids of size {} and {}",
            a.n(),
            b.n()
        )));
    }
    let mut values = &a.values * &b.values * a.spacing();
    // Round-off can break exact symmetry of A·B when A = B; restore it.
    if a == b {
        values = (&values + values.transpose()) * 0.5;
    }
    Ok(DiscretizedKernel { values })
}

/// The kernel `K = W□W` induced by a graphon.
pub fn graphon_kernel(w: &Graphon, n: usize) -> Result<DiscretizedKernel> {
    if n < 64 {
        return Err(Error::Invalid(format!("graphon grid needs n >= 64, got {n}")));
    }
    w.validate()?;
    let s = DiscretizedKernel::sample(w, n);
    box_product(&s, &s)
}

/// `K^r = K □ K^{r−1}`, with `K¹ = K`.
pub fn box_power(k: &DiscretizedKernel, r: usize) -> Result<DiscretizedKernel> {
    if r == 0 {
        return Err(Error::Invalid("box power needs r >= 1".into()));
    }
    let mut acc = k.clone();
    for _ in 1..r {
        let mut values = &k.values * &acc.values * k.spacing();
        values = (&values + values.transpose()) * 0.5;
        acc = DiscretizedKernel { values };
    }
    Ok(acc)
}

/// One eigenpair of the integral operator of a discretized kernel.
#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    /// Grid samples of the eigenfunction, normalized so that `h Σ φ² = 1`.
    pub function: DVector<f64>,
}

/// Leading `k_max` eigenpairs of the integral operator, largest first.
///
/// Each eigenfunction's sign is fixed so that its largest-magnitude sample
/// is positive.
pub fn spectral_decompose(k: &DiscretizedKernel, k_max: usize) -> Result<Vec<Eigenpair>> {
    if k_max > k.n() {
        return Err(Error::Invalid(format!(
            "k_max = {k_max} exceeds the grid size {}",
            k.n()
        )));
    }
    let scale = 1.0 / k.spacing().sqrt();
    Ok(linalg::top_eigenpairs(&k.operator(), k_max)
        .into_iter()
        .map(|(value, v)| {
            let imax = v.iamax();
            let sign = if v[imax] < 0.0 { -1.0 } else { 1.0 };
            Eigenpair {
                value,
                function: v * (sign * scale),
            }
        })
        .collect())
}

/// Applies the polynomial filter `p_K = Σ_r a_r K^{r+1}` to a grid signal.
///
/// The output is `y(v) = ⟨p_K(·, v), x⟩_H`, computed in the eigenbasis as
/// `Σ_k p(λ_k) ⟨φ_k, x⟩_{L₂} φ_k` truncated to the given eigenpairs. With
/// `p ≡ 1` this is the projection of `x` onto their span.
pub fn poly_filter_spectral(
    coeffs: &[f64],
    spectrum: &[Eigenpair],
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = spectrum.first().map_or(x.len(), |e| e.function.len());
    if x.len() != n {
        return Err(Error::Mismatch(format!(
            "signal has {} samples, kernel grid has {n}",
            x.len()
        )));
    }
    let h = 1.0 / n as f64;
    let mut y = DVector::zeros(n);
    for pair in spectrum {
        let p = eval_poly(coeffs, pair.value);
        let proj = h * pair.function.dot(x);
        y.axpy(p * proj, &pair.function, 1.0);
    }
    Ok(y)
}

/// Convenience wrapper that decomposes `k` to `k_max` pairs first.
pub fn poly_filter_apply(
    coeffs: &[f64],
    k: &DiscretizedKernel,
    x: &DVector<f64>,
    k_max: usize,
) -> Result<DVector<f64>> {
    let spectrum = spectral_decompose(k, k_max)?;
    poly_filter_spectral(coeffs, &spectrum, x)
}

fn eval_poly(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, a| acc * t + a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn delta_is_box_unit() {
        let a = DiscretizedKernel::sample(&Graphon::DirichletGreen, 100);
        let id = DiscretizedKernel::delta(100);
        let prod = box_product(&a, &id).unwrap();
        assert!((prod.values() - a.values()).amax() < 1e-10);
    }

    #[test]
    fn constant_graphons_multiply() {
        let p = DiscretizedKernel::sample(&Graphon::ConstantP(0.3), 80);
        let q = DiscretizedKernel::sample(&Graphon::ConstantP(0.5), 80);
        let pq = box_product(&p, &q).unwrap();
        assert!(pq.values().iter().all(|v| (v - 0.15).abs() < 1e-12));
        let k = graphon_kernel(&Graphon::ConstantP(0.3), 80).unwrap();
        assert!(k.values().iter().all(|v| (v - 0.09).abs() < 1e-12));
        let k3 = box_power(&DiscretizedKernel::sample(&Graphon::ConstantP(0.3), 80), 3).unwrap();
        assert!(k3.values().iter().all(|v| (v - 0.027).abs() < 1e-12));
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let a = DiscretizedKernel::delta(64);
        let b = DiscretizedKernel::delta(65);
        assert!(box_product(&a, &b).is_err());
        assert!(graphon_kernel(&Graphon::DirichletGreen, 10).is_err());
        assert!(box_power(&a, 0).is_err());
    }

    #[test]
    fn box_power_one_is_identity() {
        let k = graphon_kernel(&Graphon::DirichletGreen, 64).unwrap();
        assert_eq!(box_power(&k, 1).unwrap(), k);
    }

    #[test]
    fn constant_kernel_has_one_flat_mode() {
        let k = graphon_kernel(&Graphon::ConstantP(0.4), 100).unwrap();
        let s = spectral_decompose(&k, 3).unwrap();
        assert!((s[0].value - 0.16).abs() < 1e-12);
        assert!(s[1].value.abs() < 1e-12);
        assert!(s[0].function.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn eigenfunction_input_is_scaled() {
        let k = graphon_kernel(&Graphon::DirichletGreen, 300).unwrap();
        let s = spectral_decompose(&k, 20).unwrap();
        let coeffs = [0.5, -2.0, 30.0];
        for m in [0, 3, 7] {
            let y = poly_filter_spectral(&coeffs, &s, &s[m].function).unwrap();
            let want = &s[m].function * eval_poly(&coeffs, s[m].value);
            assert!((y - want).amax() < 1e-8);
        }
    }

    #[test]
    fn identity_filter_reproduces_smooth_signal() {
        let n = 400;
        let k = graphon_kernel(&Graphon::DirichletGreen, n).unwrap();
        let x = DVector::from_iterator(n, midpoints(n).into_iter().map(|u| u * (1.0 - u)));
        let y = poly_filter_apply(&[1.0], &k, &x, 50).unwrap();
        assert!((y - &x).amax() < 1e-3);
        let z = poly_filter_apply(&[0.0, 0.0], &k, &x, 50).unwrap();
        assert_eq!(z.amax(), 0.0);
    }

    #[test]
    fn spectrum_is_squared_green_spectrum() {
        let k = graphon_kernel(&Graphon::DirichletGreen, 400).unwrap();
        let s = spectral_decompose(&k, 5).unwrap();
        for (i, e) in s.iter().enumerate() {
            let want = ((i + 1) as f64 * PI).powi(-4);
            assert!((e.value - want).abs() / want < 1e-2);
        }
    }
}
