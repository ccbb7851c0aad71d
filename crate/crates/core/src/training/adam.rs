//! Adam on the flat parameter vector of a network.

use crate::algnn::{AlgNet, ParamKind};
use crate::domain::DomainOp;
use crate::error::{Error, Result};

use super::gradient::loss_and_gradient;
use super::{Pair, TrainConfig};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// First and second moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u32,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Bias-corrected step `m̂ / (√v̂ + ε)` for gradient `g`, before the learning rate.
    pub fn step(&mut self, g: &[f64]) -> Vec<f64> {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t as i32);
        let c2 = 1.0 - BETA2.powi(self.t as i32);
        self.m
            .iter_mut()
            .zip(self.v.iter_mut())
            .zip(g)
            .map(|((m, v), g)| {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                (*m / c1) / ((*v / c2).sqrt() + EPS)
            })
            .collect()
    }
}

/// Minimizes `Σ_l ‖r_l − F(f_l)‖²_H` over term weights and center coordinates.
///
/// Center coordinates move `center_step_scale` times faster than weights (the
/// kernel length scale by default). The trace holds the loss at the start of
/// each iteration, so it has exactly `cfg.iterations` entries.
pub fn adam_train(net: &AlgNet, data: &[Pair], cfg: &TrainConfig) -> Result<(AlgNet, Vec<f64>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Invalid("empty dataset".into()));
    }
    let mut net = net.clone();
    let kinds = net.param_kinds();
    let center_scale = cfg.center_step_scale.unwrap_or_else(|| net.kernel().length_scale());
    let mut params = net.collect_params();
    let mut state = AdamState::new(params.len());
    let mut trace = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let (loss, grad) = loss_and_gradient(&net, data, cfg)?;
        // The trace and the objective use the un-halved squared norm.
        trace.push(2.0 * loss);
        if !loss.is_finite() {
            return Err(Error::Invalid(format!("loss became {loss}")));
        }
        if cfg.learning_rate == 0.0 {
            continue;
        }
        let step = state.step(&grad);
        for ((p, s), kind) in params.iter_mut().zip(&step).zip(&kinds) {
            let scale = match kind {
                ParamKind::Weight => 1.0,
                ParamKind::Center => center_scale,
            };
            *p -= cfg.learning_rate * scale * s;
        }
        project(net.op(), &kinds, &mut params);
        net = net.set_params(&params)?;
    }
    Ok((net, trace))
}

/// Keeps center coordinates inside the domain of bounded operations.
fn project(op: DomainOp, kinds: &[ParamKind], params: &mut [f64]) {
    for (p, k) in params.iter_mut().zip(kinds) {
        if *k != ParamKind::Center {
            continue;
        }
        match op {
            DomainOp::UnitIntervalProduct | DomainOp::ModularSum01 => {
                *p = p.clamp(f64::MIN_POSITIVE, 1.0);
            }
            DomainOp::CyclicSum { sup } => *p = p.rem_euclid(sup),
            _ => {}
        }
    }
}
