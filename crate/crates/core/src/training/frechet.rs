//! Directional derivatives of the network map `w ↦ F(w)`.

use crate::algnn::{forward_layer, AlgNet, ForwardTrace};
use crate::error::Result;
use crate::nonlinearity::eta_frechet;
use crate::signal::{RkhsSignal, Tolerances};

use super::Direction;

/// Derivative of `w ↦ w ∗ f` in direction `d`, which is `d ∗ f`.
pub fn conv_frechet(f: &RkhsSignal, d: &RkhsSignal) -> Result<RkhsSignal> {
    forward_layer(d, f)
}

fn sum(parts: Vec<RkhsSignal>, like: &RkhsSignal) -> RkhsSignal {
    let terms = parts.iter().flat_map(|s| s.terms().iter().copied()).collect();
    like.with_terms_unchecked(terms).prune_with(Tolerances::STRUCTURAL).0
}

/// Forward-mode derivative through a cached forward pass:
///
/// ```text
/// ȧ_j = d_j ∗ f                       ḣ_j = Dη(a_j){ȧ_j}
/// ḃ_i = Σ_j d_ij ∗ h_j + w_ij ∗ ḣ_j   ȯ_i = Dη(b_i){ḃ_i}
/// Ḟ   = Σ_i ȯ_i
/// ```
pub(crate) fn jvp(net: &AlgNet, tr: &ForwardTrace, f: &RkhsSignal, d: &Direction) -> Result<RkhsSignal> {
    let zero = f.zero_like();
    let mut hdot = Vec::with_capacity(net.n1());
    for (j, dj) in d.layer1.iter().enumerate() {
        if dj.is_empty() {
            hdot.push(zero.clone());
            continue;
        }
        let adot = conv_frechet(f, dj)?;
        hdot.push(eta_frechet(&tr.a[j], &adot)?);
    }
    let mut odot = Vec::with_capacity(net.n2());
    for (i, row) in net.layer2().iter().enumerate() {
        let mut parts = Vec::new();
        for (j, w) in row.iter().enumerate() {
            let dij = &d.layer2[i][j];
            if !dij.is_empty() {
                parts.push(forward_layer(dij, &tr.h[j])?);
            }
            if !hdot[j].is_empty() {
                parts.push(forward_layer(w, &hdot[j])?);
            }
        }
        if parts.is_empty() {
            continue;
        }
        let bdot = sum(parts, f);
        odot.push(eta_frechet(&tr.b[i], &bdot)?);
    }
    Ok(sum(odot, f))
}

/// `D_F(w){d}` for a full direction.
pub fn frechet_full(net: &AlgNet, f: &RkhsSignal, d: &Direction) -> Result<RkhsSignal> {
    d.check_shape(net)?;
    let tr = net.forward_trace(f)?;
    jvp(net, &tr, f, d)
}

/// Derivative with respect to the layer-1 filter `j` alone.
pub fn frechet_f1(net: &AlgNet, f: &RkhsSignal, j: usize, d: &RkhsSignal) -> Result<RkhsSignal> {
    frechet_full(net, f, &Direction::layer1_only(net, j, d)?)
}

/// Derivative with respect to the layer-2 filter in row `i`, column `j` alone.
pub fn frechet_f2(net: &AlgNet, f: &RkhsSignal, i: usize, j: usize, d: &RkhsSignal) -> Result<RkhsSignal> {
    frechet_full(net, f, &Direction::layer2_only(net, i, j, d)?)
}

/// Derivative of `½‖r − F(w)‖²` along `d`: `−⟨D_F(w){d}, r − F(w)⟩`.
pub fn loss_frechet(net: &AlgNet, f: &RkhsSignal, r: &RkhsSignal, d: &Direction) -> Result<f64> {
    d.check_shape(net)?;
    let tr = net.forward_trace(f)?;
    let res = r.sub_structural(&tr.out)?;
    Ok(-jvp(net, &tr, f, d)?.inner(&res)?)
}
