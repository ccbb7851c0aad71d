//! Loss, Fréchet derivatives of the network map and the optimizers built on them.
//!
//! Two families of training live here. [`steepest_descent_train`] treats every
//! filter as a full element of the signal algebra: a conjugate-gradient solve
//! finds a direction `d` with `D_F(w){d} ≈ r − F(w)`, and a backtracking line
//! search picks the step. [`adam_train`] instead optimizes the flat vector of
//! term weights and center coordinates returned by
//! [`AlgNet::collect_params`](crate::AlgNet::collect_params).
//!
//! The normalizer of `η` depends on center sets, so a derivative along `d` is
//! the derivative of `h ↦ F(w + h·d)` *with `d`'s centers already present in `w`
//! at weight zero*. [`pad_with`] builds that network; the derivative functions
//! themselves differentiate the network they are given.

mod adam;
mod descent;
mod frechet;
mod gradient;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algnn::AlgNet;
use crate::error::{Error, Result};
use crate::signal::{RkhsSignal, Tolerances};

pub use adam::{adam_train, AdamState};
pub use descent::{
    cg_solve_direction, steepest_descent_train, wolfe_backtrack, CgOutcome, CgStatus, LineSearch,
};
pub use frechet::{conv_frechet, frechet_f1, frechet_f2, frechet_full, loss_frechet};
pub use gradient::{amplitude_gradient, parametric_gradient, reference_gradient, GradientMethod};

/// One training example: an input signal and the target the network should produce.
#[derive(Clone, Debug)]
pub struct Pair {
    pub input: RkhsSignal,
    pub target: RkhsSignal,
}

impl Pair {
    pub fn new(input: RkhsSignal, target: RkhsSignal) -> Result<Self> {
        input.check_same_space(&target)?;
        Ok(Pair { input, target })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    SteepestDescent,
    Adam,
}

/// Training hyperparameters. Missing JSON fields take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub iterations: usize,
    pub learning_rate: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub wolfe_alpha_bar: f64,
    pub wolfe_rho: f64,
    pub wolfe_c: f64,
    pub fd_step_centers: f64,
    pub seed: u64,
    /// How [`parametric_gradient`] gets center derivatives.
    pub gradient: GradientMethod,
    /// Multiplier on Adam's step for center coordinates. `None` uses the
    /// kernel's length scale, so a unit learning rate moves centers by about
    /// one kernel width.
    pub center_step_scale: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::Adam,
            iterations: 2000,
            learning_rate: 0.01,
            cg_tol: 1e-6,
            cg_max_iter: 200,
            wolfe_alpha_bar: 1.0,
            wolfe_rho: 0.5,
            wolfe_c: 1e-4,
            fd_step_centers: 1e-5,
            seed: 0,
            gradient: GradientMethod::Adjoint,
            center_step_scale: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Invalid(format!("{what} out of range: {v}")));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", self.learning_rate);
        }
        if !(self.cg_tol > 0.0) {
            return bad("cg_tol", self.cg_tol);
        }
        if !(self.wolfe_alpha_bar > 0.0) {
            return bad("wolfe_alpha_bar", self.wolfe_alpha_bar);
        }
        if !(self.wolfe_rho > 0.0 && self.wolfe_rho < 1.0) {
            return bad("wolfe_rho", self.wolfe_rho);
        }
        if !(self.wolfe_c > 0.0 && self.wolfe_c < 1.0) {
            return bad("wolfe_c", self.wolfe_c);
        }
        if !(self.fd_step_centers > 0.0) {
            return bad("fd_step_centers", self.fd_step_centers);
        }
        if let Some(s) = self.center_step_scale {
            if !(s >= 0.0 && s.is_finite()) {
                return bad("center_step_scale", s);
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: TrainConfig = serde_json::from_str(&s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A perturbation of every filter, shaped like the network's filter bank.
#[derive(Clone, Debug)]
pub struct Direction {
    pub layer1: Vec<RkhsSignal>,
    pub layer2: Vec<Vec<RkhsSignal>>,
}

impl Direction {
    pub fn zeros(net: &AlgNet) -> Self {
        let z = net.layer1()[0].zero_like();
        Direction {
            layer1: vec![z.clone(); net.n1()],
            layer2: vec![vec![z; net.n1()]; net.n2()],
        }
    }

    /// The same signal `p` in every block.
    pub fn broadcast(net: &AlgNet, p: &RkhsSignal) -> Self {
        Direction {
            layer1: vec![p.clone(); net.n1()],
            layer2: vec![vec![p.clone(); net.n1()]; net.n2()],
        }
    }

    /// `d` in the layer-1 block `j`, zero elsewhere.
    pub fn layer1_only(net: &AlgNet, j: usize, d: &RkhsSignal) -> Result<Self> {
        let mut out = Self::zeros(net);
        *out.layer1
            .get_mut(j)
            .ok_or_else(|| Error::Invalid(format!("no layer-1 filter {j}")))? = d.clone();
        Ok(out)
    }

    /// `d` in the layer-2 block `(i, j)`, zero elsewhere.
    pub fn layer2_only(net: &AlgNet, i: usize, j: usize, d: &RkhsSignal) -> Result<Self> {
        let mut out = Self::zeros(net);
        *out.layer2
            .get_mut(i)
            .and_then(|row| row.get_mut(j))
            .ok_or_else(|| Error::Invalid(format!("no layer-2 filter ({i}, {j})")))? = d.clone();
        Ok(out)
    }

    /// Blocks in [`AlgNet::filters`] order.
    pub fn blocks(&self) -> impl Iterator<Item = &RkhsSignal> {
        self.layer1.iter().chain(self.layer2.iter().flatten())
    }

    pub fn check_shape(&self, net: &AlgNet) -> Result<()> {
        let ok = self.layer1.len() == net.n1()
            && self.layer2.len() == net.n2()
            && self.layer2.iter().all(|r| r.len() == net.n1());
        if !ok {
            return Err(Error::Invalid("direction shape differs from the network".into()));
        }
        for d in self.blocks() {
            net.layer1()[0].check_same_space(d)?;
        }
        Ok(())
    }

    /// Aggregate norm `√(Σ_blocks ‖d_block‖²_H)`.
    pub fn norm(&self) -> f64 {
        self.blocks().map(|d| d.norm_sq().max(0.0)).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        let s = |d: &RkhsSignal| d.scale_with(c, Tolerances::STRUCTURAL);
        Direction {
            layer1: self.layer1.iter().map(s).collect(),
            layer2: self.layer2.iter().map(|r| r.iter().map(s).collect()).collect(),
        }
    }
}

/// `w + α·d`, filter by filter, with coincident centers merged and zero
/// weights kept.
pub fn apply_direction(net: &AlgNet, d: &Direction, alpha: f64) -> Result<AlgNet> {
    d.check_shape(net)?;
    let blocks: Vec<&RkhsSignal> = d.blocks().collect();
    net.map_filters(|i, w| Ok(w.axpy(alpha, blocks[i])))
}

/// The network with every direction center added to its filter at weight zero.
/// It computes the same function as `net`, but `η` normalizes over the larger
/// center sets, which is the limit of `net + h·d` as `h → 0`.
pub fn pad_with(net: &AlgNet, d: &Direction) -> Result<AlgNet> {
    apply_direction(net, d, 0.0)
}

/// `½‖r − F(f)‖²_H`.
pub fn loss(net: &AlgNet, f: &RkhsSignal, r: &RkhsSignal) -> Result<f64> {
    let out = net.forward(f)?;
    Ok(0.5 * r.sub_structural(&out)?.norm_sq().max(0.0))
}

/// `Σ_l ½‖r_l − F(f_l)‖²_H`.
pub fn total_loss(net: &AlgNet, data: &[Pair]) -> Result<f64> {
    data.iter().map(|p| loss(net, &p.input, &p.target)).sum()
}

/// Writes a loss trace as CSV `iteration,loss`, one row per entry.
pub fn write_loss_csv(trace: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::from("iteration,loss\n");
    for (i, l) in trace.iter().enumerate() {
        s.push_str(&format!("{i},{l}\n"));
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Reads a CSV written by [`write_loss_csv`].
pub fn read_loss_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| crate::signal::parse_err(path, line, e))?;
        let v = rec
            .get(1)
            .ok_or_else(|| crate::signal::parse_err(path, line, "missing loss column"))?
            .trim()
            .parse::<f64>()
            .map_err(|e| crate::signal::parse_err(path, line, e))?;
        out.push(v);
    }
    Ok(out)
}
