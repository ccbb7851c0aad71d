//! Gradient of the total loss with respect to the flat parameter vector.
//!
//! Two routes give the same numbers:
//!
//! * the reference route takes weight components from [`loss_frechet`] with a
//!   one-hot direction `k_v` and center components from central differences;
//! * the adjoint route runs one reverse sweep through the cached forward pass.
//!   It needs closed-form kernel gradients and a smooth domain operation, and
//!   a forward pass in which no two centers merged; otherwise the reference
//!   route is used.

use serde::{Deserialize, Serialize};

use crate::algnn::{AlgNet, ForwardTrace};
use crate::domain::{Center, DomainOp};
use crate::error::Result;
use crate::kernels::Kernel;
use crate::nonlinearity::{relu, relu_prime};
use crate::signal::RkhsSignal;

use super::frechet::jvp;
use super::{total_loss, Direction, Pair, TrainConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    /// Reverse sweep when available, reference route otherwise.
    #[default]
    Adjoint,
    /// One-hot Fréchet derivatives for weights, central differences for centers.
    FiniteDifference,
}

/// Gradient of `Σ_l ½‖r_l − F(f_l)‖²` in [`AlgNet::collect_params`] order.
pub fn parametric_gradient(net: &AlgNet, data: &[Pair], cfg: &TrainConfig) -> Result<Vec<f64>> {
    Ok(loss_and_gradient(net, data, cfg)?.1)
}

/// Total loss and its gradient.
pub(crate) fn loss_and_gradient(net: &AlgNet, data: &[Pair], cfg: &TrainConfig) -> Result<(f64, Vec<f64>)> {
    if cfg.gradient == GradientMethod::Adjoint && adjoint_supported(net) {
        let mut total = 0.0;
        let mut grad = vec![0.0; net.param_len()];
        let mut ok = true;
        for p in data {
            match adjoint_pair(net, &p.input, &p.target)? {
                Some((l, g)) => {
                    total += l;
                    grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Ok((total, grad));
        }
    }
    Ok((total_loss(net, data)?, reference_gradient(net, data, cfg.fd_step_centers)?))
}

/// Weight components through one-hot directions, centers by central differences.
pub fn reference_gradient(net: &AlgNet, data: &[Pair], fd_step: f64) -> Result<Vec<f64>> {
    let mut grad = amplitude_gradient(net, data)?;
    let params = net.collect_params();
    for (i, kind) in net.param_kinds().iter().enumerate() {
        if *kind != crate::algnn::ParamKind::Center {
            continue;
        }
        let mut p = params.clone();
        p[i] = params[i] + fd_step;
        let up = total_loss(&net.set_params(&p)?, data)?;
        p[i] = params[i] - fd_step;
        let down = total_loss(&net.set_params(&p)?, data)?;
        grad[i] = (up - down) / (2.0 * fd_step);
    }
    Ok(grad)
}

/// Weight components of the gradient, `Σ_l −⟨D_F{k_v in one block}, r_l − F_l⟩`,
/// with zeros in the center slots.
pub fn amplitude_gradient(net: &AlgNet, data: &[Pair]) -> Result<Vec<f64>> {
    let traces = data
        .iter()
        .map(|p| {
            let tr = net.forward_trace(&p.input)?;
            let res = p.target.sub_structural(&tr.out)?;
            Ok((tr, res))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grad = vec![0.0; net.param_len()];
    let mut pos = 0;
    let filters: Vec<&RkhsSignal> = net.filters().collect();
    for (idx, w) in filters.iter().enumerate() {
        for t in w.terms() {
            let kv = w.with_terms_unchecked(vec![crate::signal::Term::new(t.center, 1.0)]);
            let d = one_hot(net, idx, &kv);
            let mut g = 0.0;
            for (p, (tr, res)) in data.iter().zip(&traces) {
                g -= jvp(net, tr, &p.input, &d)?.inner_unchecked(res);
            }
            grad[pos] = g;
            pos += 1 + t.center.param_len();
        }
    }
    Ok(grad)
}

fn one_hot(net: &AlgNet, idx: usize, d: &RkhsSignal) -> Direction {
    let mut out = Direction::zeros(net);
    if idx < net.n1() {
        out.layer1[idx] = d.clone();
    } else {
        let k = idx - net.n1();
        out.layer2[k / net.n1()][k % net.n1()] = d.clone();
    }
    out
}

fn adjoint_supported(net: &AlgNet) -> bool {
    let probe = net.op().identity();
    net.kernel().has_gradient() && net.op().jacobians(&probe, &probe).is_some()
}

/// Adjoints of a signal's term weights and center coordinates.
struct Adj {
    w: Vec<f64>,
    c: Vec<[f64; 2]>,
}

impl Adj {
    fn zeros(n: usize) -> Self {
        Adj {
            w: vec![0.0; n],
            c: vec![[0.0; 2]; n],
        }
    }
}

/// Loss and gradient for one pair, or `None` if some centers merged in the
/// forward pass (the term bookkeeping below assumes they did not).
fn adjoint_pair(net: &AlgNet, f: &RkhsSignal, r: &RkhsSignal) -> Result<Option<(f64, Vec<f64>)>> {
    let tr = net.forward_trace(f)?;
    if !unmerged(net, f, &tr) {
        return Ok(None);
    }
    let k = net.kernel();
    let op = net.op();

    let (loss, out_adj) = loss_backward(k, &tr.out, r);

    // Layer 2 and the outer η.
    let mut grads1: Vec<Adj> = net.layer1().iter().map(|w| Adj::zeros(w.len())).collect();
    let mut grads2: Vec<Vec<Adj>> = net
        .layer2()
        .iter()
        .map(|row| row.iter().map(|w| Adj::zeros(w.len())).collect())
        .collect();
    let mut h_adj: Vec<Adj> = tr.h.iter().map(|h| Adj::zeros(h.len())).collect();
    let mut off = 0;
    for (i, row) in net.layer2().iter().enumerate() {
        let n = tr.o[i].len();
        let o_adj = Adj {
            w: out_adj.w[off..off + n].to_vec(),
            c: out_adj.c[off..off + n].to_vec(),
        };
        off += n;
        let b_adj = eta_backward(k, &tr.b[i], &tr.o[i], &o_adj);
        let mut boff = 0;
        for (j, w) in row.iter().enumerate() {
            let m = w.len() * tr.h[j].len();
            conv_backward(op, w, &tr.h[j], &b_adj, boff, &mut grads2[i][j], &mut h_adj[j]);
            boff += m;
        }
    }

    // Layer 1 and the inner η.
    for (j, w) in net.layer1().iter().enumerate() {
        let a_adj = eta_backward(k, &tr.a[j], &tr.h[j], &h_adj[j]);
        let mut f_adj = Adj::zeros(f.len());
        conv_backward(op, w, f, &a_adj, 0, &mut grads1[j], &mut f_adj);
    }

    let mut grad = Vec::with_capacity(net.param_len());
    for (w, g) in net
        .filters()
        .zip(grads1.iter().chain(grads2.iter().flatten()))
    {
        for (t, (gw, gc)) in w.terms().iter().zip(g.w.iter().zip(&g.c)) {
            grad.push(*gw);
            grad.extend_from_slice(&gc[..t.center.param_len()]);
        }
    }
    Ok(Some((loss, grad)))
}

fn unmerged(net: &AlgNet, f: &RkhsSignal, tr: &ForwardTrace) -> bool {
    for (j, w) in net.layer1().iter().enumerate() {
        if tr.a[j].len() != w.len() * f.len() || tr.h[j].len() != tr.a[j].len() {
            return false;
        }
    }
    for (i, row) in net.layer2().iter().enumerate() {
        let n: usize = row.iter().zip(&tr.h).map(|(w, h)| w.len() * h.len()).sum();
        if tr.b[i].len() != n || tr.o[i].len() != n {
            return false;
        }
    }
    tr.out.len() == tr.o.iter().map(|o| o.len()).sum::<usize>()
}

fn grad1(k: &Kernel, u: &Center, v: &Center, kuv: f64) -> [f64; 2] {
    k.grad_first(u, v, kuv).unwrap_or([0.0; 2])
}

/// `L = ½‖r − F‖²`: returns `L` and its adjoints on `F`'s terms,
/// `∂L/∂y_q = −res(Q_q)` and `∂L/∂Q_q = −y_q ∇res(Q_q)`.
fn loss_backward(k: &Kernel, out: &RkhsSignal, r: &RkhsSignal) -> (f64, Adj) {
    let q = out.terms();
    let n = q.len();
    let mut adj = Adj::zeros(n);
    let mut loss = 0.5 * r.norm_sq();
    for (a, ta) in q.iter().enumerate() {
        let mut res = 0.0;
        let mut gres = [0.0; 2];
        for tr in r.terms() {
            let kv = k.k(&ta.center, &tr.center);
            res += tr.weight * kv;
            let g = grad1(k, &ta.center, &tr.center, kv);
            gres[0] += tr.weight * g[0];
            gres[1] += tr.weight * g[1];
        }
        let mut fval = 0.0;
        for tb in q {
            let kv = k.k(&ta.center, &tb.center);
            fval += tb.weight * kv;
            let g = grad1(k, &ta.center, &tb.center, kv);
            gres[0] -= tb.weight * g[0];
            gres[1] -= tb.weight * g[1];
        }
        // ½‖r − F‖² = ½‖r‖² − Σ y r(Q) + ½ Σ y F(Q)
        loss += ta.weight * (0.5 * fval - res);
        res -= fval;
        adj.w[a] = -res;
        adj.c[a] = [-ta.weight * gres[0], -ta.weight * gres[1]];
    }
    (loss.max(0.0), adj)
}

/// Backward through `A = η(g)`: `A_p = σ(e_p)/D_p`, `e_p = Σ_q w_q K_pq`,
/// `D_p = Σ_q K_pq`. The output adjoint's center part passes straight through.
fn eta_backward(k: &Kernel, g: &RkhsSignal, out: &RkhsSignal, out_adj: &Adj) -> Adj {
    let t = g.terms();
    let n = t.len();
    let mut kmat = vec![0.0; n * n];
    for p in 0..n {
        for q in p..n {
            let v = k.k(&t[p].center, &t[q].center);
            kmat[p * n + q] = v;
            kmat[q * n + p] = v;
        }
    }
    let mut e = vec![0.0; n];
    let mut den = vec![0.0; n];
    for p in 0..n {
        for q in 0..n {
            e[p] += t[q].weight * kmat[p * n + q];
            den[p] += kmat[p * n + q];
        }
    }
    let mut ebar = vec![0.0; n];
    let mut dbar = vec![0.0; n];
    for p in 0..n {
        let a = relu(e[p]) / den[p];
        debug_assert!((a - out.terms()[p].weight).abs() <= 1e-9 * (1.0 + a.abs()));
        ebar[p] = out_adj.w[p] * relu_prime(e[p]) / den[p];
        dbar[p] = -out_adj.w[p] * a / den[p];
    }
    let mut adj = Adj {
        w: vec![0.0; n],
        c: out_adj.c.clone(),
    };
    for q in 0..n {
        adj.w[q] = (0..n).map(|p| ebar[p] * kmat[p * n + q]).sum();
    }
    for p in 0..n {
        for q in 0..n {
            if q == p {
                continue;
            }
            let coef = ebar[p] * t[q].weight + ebar[q] * t[p].weight + dbar[p] + dbar[q];
            if coef == 0.0 {
                continue;
            }
            let g = grad1(k, &t[p].center, &t[q].center, kmat[p * n + q]);
            adj.c[p][0] += coef * g[0];
            adj.c[p][1] += coef * g[1];
        }
    }
    adj
}

/// Backward through `w ∗ x`, whose term `(t, s)` sits at `offset + t·|x| + s`
/// of `out_adj`. Adds into the adjoints of `w` and `x`.
fn conv_backward(
    op: DomainOp,
    w: &RkhsSignal,
    x: &RkhsSignal,
    out_adj: &Adj,
    offset: usize,
    w_adj: &mut Adj,
    x_adj: &mut Adj,
) {
    let nx = x.len();
    for (ti, tw) in w.terms().iter().enumerate() {
        for (si, sx) in x.terms().iter().enumerate() {
            let idx = offset + ti * nx + si;
            let aw = out_adj.w[idx];
            let ac = out_adj.c[idx];
            w_adj.w[ti] += aw * sx.weight;
            x_adj.w[si] += aw * tw.weight;
            if let Some((ja, jb)) = op.jacobians(&tw.center, &sx.center) {
                w_adj.c[ti][0] += ja[0] * ac[0];
                w_adj.c[ti][1] += ja[1] * ac[1];
                x_adj.c[si][0] += jb[0] * ac[0];
                x_adj.c[si][1] += jb[1] * ac[1];
            }
        }
    }
}
