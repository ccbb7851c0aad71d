//! Conjugate-gradient direction solve and backtracking line search.

use crate::algnn::{AlgNet, ForwardTrace};
use crate::error::{Error, Result};
use crate::signal::RkhsSignal;

use super::frechet::jvp;
use super::{apply_direction, pad_with, total_loss, Direction, Pair, TrainConfig};

/// Why the conjugate-gradient loop stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CgStatus {
    Converged,
    MaxIterations,
    /// `⟨p, A p⟩ ≤ 1e−14·‖p‖²`: the operator is not positive along `p`.
    Breakdown,
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub direction: Direction,
    /// `‖Σ_l (r_l − F_l) − Σ_l D_F{d}‖_H`, recomputed from the returned direction.
    pub residual_norm: f64,
    pub iterations: usize,
    pub status: CgStatus,
}

struct Operator<'a> {
    net: &'a AlgNet,
    data: &'a [Pair],
    traces: Vec<ForwardTrace>,
}

impl<'a> Operator<'a> {
    fn new(net: &'a AlgNet, data: &'a [Pair]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Invalid("empty dataset".into()));
        }
        let traces = data
            .iter()
            .map(|p| net.forward_trace(&p.input))
            .collect::<Result<Vec<_>>>()?;
        Ok(Operator { net, data, traces })
    }

    /// `Σ_l (r_l − F(f_l))`.
    fn residual(&self) -> Result<RkhsSignal> {
        let mut s = self.data[0].input.zero_like();
        for (p, tr) in self.data.iter().zip(&self.traces) {
            s = s.axpy(1.0, &p.target.sub_structural(&tr.out)?);
        }
        Ok(s)
    }

    /// `Σ_l D_F(w; f_l){d}`.
    fn apply(&self, d: &Direction) -> Result<RkhsSignal> {
        let mut acc = self.data[0].input.zero_like();
        for (p, tr) in self.data.iter().zip(&self.traces) {
            acc = acc.axpy(1.0, &jvp(self.net, tr, &p.input, d)?);
        }
        Ok(acc)
    }

    /// The square operator `p ↦ D_F{(p, p, …, p)}` on signals.
    fn apply_broadcast(&self, p: &RkhsSignal) -> Result<RkhsSignal> {
        self.apply(&Direction::broadcast(self.net, p))
    }
}

/// Solves `D_F(w){d} = r − F(w)` by conjugate gradients in `H`.
///
/// The unknown is a single signal `p` placed in every filter block, which makes
/// the operator square. Multiple pairs use the summed residual and the summed
/// operator. The iterate with the smallest tracked residual is returned.
pub fn cg_solve_direction(net: &AlgNet, data: &[Pair], cfg: &TrainConfig) -> Result<CgOutcome> {
    cfg.validate()?;
    let a = Operator::new(net, data)?;
    let rhs = a.residual()?;
    let mut d = rhs.zero_like();
    let mut s = rhs.clone();
    let mut p = s.clone();
    let mut ss = s.norm_sq();
    let mut best = (ss.sqrt(), d.clone());
    let mut status = CgStatus::MaxIterations;
    let mut k = 0;
    while k < cfg.cg_max_iter {
        if ss.sqrt() < cfg.cg_tol {
            status = CgStatus::Converged;
            break;
        }
        let ap = a.apply_broadcast(&p)?;
        let pap = p.inner_unchecked(&ap);
        if pap <= 1e-14 * p.norm_sq() {
            status = CgStatus::Breakdown;
            break;
        }
        let gamma = ss / pap;
        d = d.axpy(gamma, &p);
        s = s.axpy(-gamma, &ap);
        let ss_next = s.norm_sq();
        let beta = ss_next / ss;
        p = s.axpy(beta, &p);
        ss = ss_next;
        k += 1;
        if ss.sqrt() < best.0 {
            best = (ss.sqrt(), d.clone());
        }
    }
    if status == CgStatus::MaxIterations && ss.sqrt() < cfg.cg_tol {
        status = CgStatus::Converged;
    }
    let d = best.1;
    let residual_norm = rhs.sub_structural(&a.apply_broadcast(&d)?)?.norm();
    Ok(CgOutcome {
        direction: Direction::broadcast(net, &d),
        residual_norm,
        iterations: k,
        status,
    })
}

/// Result of [`wolfe_backtrack`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearch {
    /// Accepted step, or 0 if no trial passed.
    pub alpha: f64,
    /// Loss of the network padded with the direction's centers.
    pub base_loss: f64,
    /// `Σ_l ⟨D_F(w){d}, r_l − F_l(w)⟩` at the padded network.
    pub slope: f64,
    /// Loss at the accepted step (equal to `base_loss` when `alpha = 0`).
    pub loss: f64,
    pub reductions: usize,
}

/// Number of step reductions tried before giving up.
pub const MAX_REDUCTIONS: usize = 60;

/// Backtracking from `ᾱ` by factors `ρ` until
/// `ℓ(w + α d) ≤ ℓ(w) − c·α·⟨D_F(w){d}, r − F(w)⟩`.
///
/// `w` here is the network padded with `d`'s centers, so both sides of the test
/// use the same center sets.
pub fn wolfe_backtrack(net: &AlgNet, data: &[Pair], d: &Direction, cfg: &TrainConfig) -> Result<LineSearch> {
    cfg.validate()?;
    let base = pad_with(net, d)?;
    let a = Operator::new(&base, data)?;
    let mut base_loss = 0.0;
    let mut slope = 0.0;
    for (p, tr) in data.iter().zip(&a.traces) {
        let res = p.target.sub_structural(&tr.out)?;
        base_loss += 0.5 * res.norm_sq().max(0.0);
        slope += jvp(&base, tr, &p.input, d)?.inner_unchecked(&res);
    }
    let mut alpha = cfg.wolfe_alpha_bar;
    for m in 0..=MAX_REDUCTIONS {
        let trial = total_loss(&apply_direction(&base, d, alpha)?, data)?;
        if trial <= base_loss - cfg.wolfe_c * alpha * slope {
            return Ok(LineSearch {
                alpha,
                base_loss,
                slope,
                loss: trial,
                reductions: m,
            });
        }
        alpha *= cfg.wolfe_rho;
    }
    Ok(LineSearch {
        alpha: 0.0,
        base_loss,
        slope,
        loss: base_loss,
        reductions: MAX_REDUCTIONS,
    })
}

/// `w_{k+1} = w_k + α_k d_k` with `d_k` from [`cg_solve_direction`], normalized
/// to unit aggregate norm, and `α_k` from [`wolfe_backtrack`].
///
/// If the solved direction points uphill it is reversed. Training stops early
/// when the direction vanishes or the line search stalls. The trace holds the
/// total loss after each accepted step.
pub fn steepest_descent_train(net: &AlgNet, data: &[Pair], cfg: &TrainConfig) -> Result<(AlgNet, Vec<f64>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Invalid("empty dataset".into()));
    }
    let mut net = net.clone();
    let mut trace = Vec::new();
    for _ in 0..cfg.iterations {
        let cg = cg_solve_direction(&net, data, cfg)?;
        let norm = cg.direction.norm();
        if !(norm > 0.0) {
            break;
        }
        let mut d = cg.direction.scale(1.0 / norm);
        let mut ls = wolfe_backtrack(&net, data, &d, cfg)?;
        if ls.slope < 0.0 {
            d = d.scale(-1.0);
            ls = wolfe_backtrack(&net, data, &d, cfg)?;
        }
        if ls.alpha == 0.0 {
            break;
        }
        net = apply_direction(&pad_with(&net, &d)?, &d, ls.alpha)?;
        trace.push(ls.loss);
    }
    Ok((net, trace))
}
