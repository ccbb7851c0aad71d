//! The pointwise nonlinearity `η` acting on kernel-expansion coefficients.
//!
//! For `g = Σ_v α_v k_v` with center set `𝒱`,
//!
//! ```text
//! η(g) = Σ_v  σ(g(v)) / Σ_{r∈𝒱} K(r, v) · k_v,     σ(x) = max(0, x).
//! ```
//!
//! The normalizer depends on the center set, not only on the function `g`, so
//! the input is merged (coincident centers combined) but zero-weight terms are
//! kept. Fréchet derivatives are taken with the center set fixed; see
//! [`eta_frechet`].

use crate::domain::Center;
use crate::error::{Error, Result};
use crate::signal::{RkhsSignal, Term, Tolerances};

#[inline]
pub(crate) fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Subgradient of ReLU, taking `σ'(0) = 0`.
#[inline]
pub(crate) fn relu_prime(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Values `g(u)` and normalizers `Σ_r K(r, u)` over the given centers.
pub(crate) fn values_and_normalizers(g: &RkhsSignal, centers: &[Center]) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = g.kernel();
    let n = centers.len();
    let mut den = vec![0.0; n];
    for i in 0..n {
        den[i] += k.k(&centers[i], &centers[i]);
        for j in (i + 1)..n {
            let v = k.k(&centers[i], &centers[j]);
            den[i] += v;
            den[j] += v;
        }
    }
    for (c, d) in centers.iter().zip(&den) {
        if !(*d > 0.0) {
            return Err(Error::Degenerate {
                center: c.to_string(),
                value: *d,
            });
        }
    }
    let vals = centers.iter().map(|c| g.eval_unchecked(c)).collect();
    Ok((vals, den))
}

/// `η(g)`. The output has the merged center set of `g`, with every weight `≥ 0`.
///
/// ```
/// use rkhs_conv::{nonlinearity::apply_eta, Center, DomainOp, Kernel, RkhsSignal, Term};
///
/// let k = Kernel::gaussian1d(1.0)?;
/// let g = RkhsSignal::new(k, DomainOp::Translation1d, vec![
///     Term::new(Center::Scalar(-0.5), 1.0),
///     Term::new(Center::Scalar(0.5), 1.0),
/// ])?;
/// let h = apply_eta(&g)?;
/// assert!(h.terms().iter().zip(g.terms()).all(|(a, b)| (a.weight - b.weight).abs() < 1e-12));
/// # Ok::<(), rkhs_conv::Error>(())
/// ```
pub fn apply_eta(g: &RkhsSignal) -> Result<RkhsSignal> {
    let g = g.prune_with(Tolerances::STRUCTURAL).0;
    let centers = g.centers();
    let (vals, den) = values_and_normalizers(&g, &centers)?;
    let terms = centers
        .iter()
        .zip(vals.iter().zip(&den))
        .map(|(c, (v, d))| Term::new(*c, relu(*v) / d))
        .collect();
    Ok(g.with_terms_unchecked(terms))
}

/// Fréchet derivative of `η` at `w` in direction `d`.
///
/// Both signals are placed on the union `𝒰` of their centers (zero weights where
/// absent), and the result is `Σ_{u∈𝒰} σ'(w(u))·d(u) / Σ_{r∈𝒰} K(r,u) · k_u`.
/// This is the derivative of `h ↦ η(w + h·d)` at `h = 0`, whose center set is
/// `𝒰` for every `h ≠ 0`.
pub fn eta_frechet(w: &RkhsSignal, d: &RkhsSignal) -> Result<RkhsSignal> {
    w.check_same_space(d)?;
    let union = w
        .prune_with(Tolerances::STRUCTURAL)
        .0
        .pad_unchecked(&d.centers());
    let centers = union.centers();
    let (wv, den) = values_and_normalizers(&union, &centers)?;
    let terms = centers
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let s = relu_prime(wv[i]);
            let dv = if s == 0.0 { 0.0 } else { d.eval_unchecked(c) };
            Term::new(*c, s * dv / den[i])
        })
        .collect();
    Ok(union.with_terms_unchecked(terms))
}
