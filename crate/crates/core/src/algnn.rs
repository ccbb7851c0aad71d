//! Two-layer convolutional network on RKHS signals.
//!
//! ```text
//! f_out = Σ_{i<N₂} η( Σ_{j<N₁} w_i^{(2,j)} ∗ η(w_j^{(1)} ∗ f) )
//! ```
//!
//! Every intermediate is merged but never thresholded, so a zero-weight term
//! stays in place; that keeps the center sets (and thus the normalizers of `η`)
//! fixed while weights move.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Center, DomainOp};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::nonlinearity::apply_eta;
use crate::signal::{RkhsSignal, Term, TermFile, Tolerances};

/// One filtering step `filter ∗ input`, merged.
pub fn forward_layer(filter: &RkhsSignal, input: &RkhsSignal) -> Result<RkhsSignal> {
    filter.convolve_with(input, Tolerances::STRUCTURAL)
}

/// The filter bank of a two-layer network.
#[derive(Clone, Debug)]
pub struct AlgNet {
    kernel: Arc<Kernel>,
    op: DomainOp,
    layer1: Vec<RkhsSignal>,
    layer2: Vec<Vec<RkhsSignal>>,
}

/// Intermediate signals of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// `w_j^{(1)} ∗ f`
    pub a: Vec<RkhsSignal>,
    /// `η(a_j)`
    pub h: Vec<RkhsSignal>,
    /// `Σ_j w_i^{(2,j)} ∗ h_j`
    pub b: Vec<RkhsSignal>,
    /// `η(b_i)`
    pub o: Vec<RkhsSignal>,
    pub out: RkhsSignal,
}

/// Whether a flat parameter is a term weight or a center coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Center,
}

impl AlgNet {
    pub fn new(layer1: Vec<RkhsSignal>, layer2: Vec<Vec<RkhsSignal>>) -> Result<Self> {
        let first = layer1
            .first()
            .ok_or_else(|| Error::Invalid("network needs at least one layer-1 filter".into()))?;
        if layer2.is_empty() {
            return Err(Error::Invalid("network needs at least one layer-2 row".into()));
        }
        for row in &layer2 {
            if row.len() != layer1.len() {
                return Err(Error::Invalid(format!(
                    "layer-2 rows need {} filters, found {}",
                    layer1.len(),
                    row.len()
                )));
            }
        }
        for w in layer1.iter().chain(layer2.iter().flatten()) {
            first.check_same_space(w)?;
        }
        Ok(AlgNet {
            kernel: first.kernel_arc().clone(),
            op: first.op(),
            layer1,
            layer2,
        })
    }

    /// Filters with `terms` sections each, weight 1, centered at the identity
    /// plus a uniform jitter of up to `jitter` per center coordinate.
    pub fn init<R: Rng>(
        kernel: impl Into<Arc<Kernel>>,
        op: DomainOp,
        n1: usize,
        n2: usize,
        terms: usize,
        jitter: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let kernel = kernel.into();
        let filter = |rng: &mut R| -> Result<RkhsSignal> {
            let id = op.identity();
            let base = id.params();
            let ts = (0..terms)
                .map(|_| {
                    let shift: Vec<f64> = base.iter().map(|_| rng.gen_range(-jitter..=jitter)).collect();
                    Ok(Term::new(jittered(op, &id, &base, &shift)?, 1.0))
                })
                .collect::<Result<Vec<_>>>()?;
            RkhsSignal::new(kernel.clone(), op, ts)
        };
        let layer1 = (0..n1).map(|_| filter(rng)).collect::<Result<Vec<_>>>()?;
        let layer2 = (0..n2)
            .map(|_| (0..n1).map(|_| filter(rng)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        AlgNet::new(layer1, layer2)
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn op(&self) -> DomainOp {
        self.op
    }

    pub fn n1(&self) -> usize {
        self.layer1.len()
    }

    pub fn n2(&self) -> usize {
        self.layer2.len()
    }

    pub fn layer1(&self) -> &[RkhsSignal] {
        &self.layer1
    }

    pub fn layer2(&self) -> &[Vec<RkhsSignal>] {
        &self.layer2
    }

    /// All filters, layer 1 first, then layer 2 row by row.
    pub fn filters(&self) -> impl Iterator<Item = &RkhsSignal> {
        self.layer1.iter().chain(self.layer2.iter().flatten())
    }

    /// Applies `f` to every filter, in [`AlgNet::filters`] order.
    pub fn map_filters(
        &self,
        mut f: impl FnMut(usize, &RkhsSignal) -> Result<RkhsSignal>,
    ) -> Result<AlgNet> {
        let mut idx = 0;
        let mut next = |w: &RkhsSignal| {
            let r = f(idx, w);
            idx += 1;
            r
        };
        let layer1 = self.layer1.iter().map(&mut next).collect::<Result<Vec<_>>>()?;
        let layer2 = self
            .layer2
            .iter()
            .map(|row| row.iter().map(&mut next).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        AlgNet::new(layer1, layer2)
    }

    pub fn forward(&self, f: &RkhsSignal) -> Result<RkhsSignal> {
        Ok(self.forward_trace(f)?.out)
    }

    /// Forward pass keeping every intermediate signal.
    pub fn forward_trace(&self, f: &RkhsSignal) -> Result<ForwardTrace> {
        self.layer1[0].check_same_space(f)?;
        let a = self
            .layer1
            .iter()
            .map(|w| forward_layer(w, f))
            .collect::<Result<Vec<_>>>()?;
        let h = a.iter().map(apply_eta).collect::<Result<Vec<_>>>()?;
        let mut b = Vec::with_capacity(self.n2());
        for row in &self.layer2 {
            let mut terms = Vec::new();
            for (w, hj) in row.iter().zip(&h) {
                terms.extend_from_slice(forward_layer(w, hj)?.terms());
            }
            b.push(f.with_terms_unchecked(terms).prune_with(Tolerances::STRUCTURAL).0);
        }
        let o = b.iter().map(apply_eta).collect::<Result<Vec<_>>>()?;
        let terms: Vec<Term> = o.iter().flat_map(|s| s.terms().iter().copied()).collect();
        let out = f.with_terms_unchecked(terms).prune_with(Tolerances::STRUCTURAL).0;
        Ok(ForwardTrace { a, h, b, o, out })
    }

    /// Flat parameters: for each filter in [`AlgNet::filters`] order, for each
    /// term, its weight followed by its center coordinates.
    pub fn collect_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for w in self.filters() {
            for t in w.terms() {
                out.push(t.weight);
                out.extend(t.center.params());
            }
        }
        out
    }

    pub fn param_kinds(&self) -> Vec<ParamKind> {
        let mut out = Vec::new();
        for w in self.filters() {
            for t in w.terms() {
                out.push(ParamKind::Weight);
                out.extend(std::iter::repeat(ParamKind::Center).take(t.center.param_len()));
            }
        }
        out
    }

    pub fn param_len(&self) -> usize {
        self.filters()
            .flat_map(|w| w.terms())
            .map(|t| 1 + t.center.param_len())
            .sum()
    }

    /// Inverse of [`AlgNet::collect_params`] on a network of the same shape.
    pub fn set_params(&self, params: &[f64]) -> Result<AlgNet> {
        if params.len() != self.param_len() {
            return Err(Error::Invalid(format!(
                "expected {} parameters, got {}",
                self.param_len(),
                params.len()
            )));
        }
        let mut pos = 0;
        self.map_filters(|_, w| {
            let mut terms = Vec::with_capacity(w.len());
            for t in w.terms() {
                let n = t.center.param_len();
                let center = t.center.with_params(&params[pos + 1..pos + 1 + n])?;
                terms.push(Term::new(center, params[pos]));
                pos += 1 + n;
            }
            w.with_terms(terms)
        })
    }

    pub fn to_file(&self) -> NetFile {
        let terms = |w: &RkhsSignal| w.to_file().terms;
        NetFile {
            kernel: (*self.kernel).clone(),
            op: self.op,
            n1: self.n1(),
            n2: self.n2(),
            layer1: self.layer1.iter().map(terms).collect(),
            layer2: self.layer2.iter().map(|row| row.iter().map(terms).collect()).collect(),
        }
    }

    pub fn from_file(file: NetFile) -> Result<Self> {
        if file.layer1.len() != file.n1 || file.layer2.len() != file.n2 {
            return Err(Error::Invalid(format!(
                "N1 = {}, N2 = {} disagree with {} layer-1 filters and {} layer-2 rows",
                file.n1,
                file.n2,
                file.layer1.len(),
                file.layer2.len()
            )));
        }
        let kernel = Arc::new(file.kernel);
        let kind = file.op.center_kind();
        let signal = |ts: Vec<TermFile>| -> Result<RkhsSignal> {
            let terms = ts
                .into_iter()
                .map(|t| Ok(Term::new(Center::from_slice(kind, &t.center)?, t.weight)))
                .collect::<Result<Vec<_>>>()?;
            RkhsSignal::new(kernel.clone(), file.op, terms)
        };
        let layer1 = file.layer1.into_iter().map(signal).collect::<Result<Vec<_>>>()?;
        let layer2 = file
            .layer2
            .into_iter()
            .map(|row| row.into_iter().map(signal).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        AlgNet::new(layer1, layer2)
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

fn jittered(op: DomainOp, id: &Center, base: &[f64], shift: &[f64]) -> Result<Center> {
    // Identities on a boundary (the unit-interval ones, cyclic 0) only admit
    // shifts in one direction, so try the mirrored shift before giving up.
    for sign in [1.0, -1.0] {
        let p: Vec<f64> = base.iter().zip(shift).map(|(b, s)| b + sign * s).collect();
        if let Ok(c) = id.with_params(&p) {
            if op.check(&c).is_ok() {
                return Ok(c);
            }
        }
    }
    Ok(*id)
}

/// JSON form: `{"kernel", "op", "N1", "N2", "layer1": [[terms]…], "layer2": [[[terms]…]…]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetFile {
    pub kernel: Kernel,
    pub op: DomainOp,
    #[serde(rename = "N1")]
    pub n1: usize,
    #[serde(rename = "N2")]
    pub n2: usize,
    pub layer1: Vec<Vec<TermFile>>,
    pub layer2: Vec<Vec<Vec<TermFile>>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn k() -> Arc<Kernel> {
        Arc::new(Kernel::gaussian1d(0.5).unwrap())
    }

    fn sig(pairs: &[(f64, f64)]) -> RkhsSignal {
        RkhsSignal::new(
            k(),
            DomainOp::Translation1d,
            pairs.iter().map(|&(c, w)| Term::new(Center::Scalar(c), w)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn layer_examples() {
        let input = sig(&[(0.5, 1.0), (-1.0, 2.0)]);
        let unit = sig(&[(0.0, 1.0)]);
        assert_eq!(forward_layer(&unit, &input).unwrap().terms(), input.terms());
        let two = sig(&[(0.0, 2.0)]);
        assert_eq!(forward_layer(&two, &input).unwrap().weights(), vec![2.0, 4.0]);
        let ka = sig(&[(1.0, 1.0)]);
        let kb = sig(&[(2.0, 1.0)]);
        assert_eq!(forward_layer(&ka, &kb).unwrap().centers(), vec![Center::Scalar(3.0)]);
    }

    #[test]
    fn unit_filters_apply_eta_twice() {
        let unit = sig(&[(0.0, 1.0)]);
        let net = AlgNet::new(vec![unit.clone()], vec![vec![unit]]).unwrap();
        let f = sig(&[(0.0, 1.0), (0.8, -0.5), (2.0, 0.7)]);
        let out = net.forward(&f).unwrap();
        let want = apply_eta(&apply_eta(&f).unwrap()).unwrap();
        assert!(out.sub_structural(&want).unwrap().norm() < 1e-14);
    }

    #[test]
    fn zero_input_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = AlgNet::init(k(), DomainOp::Translation1d, 2, 2, 3, 0.1, &mut rng).unwrap();
        assert_eq!(net.forward(&sig(&[])).unwrap().norm(), 0.0);
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = AlgNet::init(Kernel::gaussian2d(10.0).unwrap(), DomainOp::Translation2d, 2, 2, 3, 0.1, &mut rng)
            .unwrap();
        let p = net.collect_params();
        assert_eq!(p.len(), 6 * 3 * 3);
        assert_eq!(net.param_kinds().len(), p.len());
        let back = net.set_params(&p).unwrap();
        assert_eq!(back.collect_params(), p);
        let mut bumped = p.clone();
        bumped[3] += 1.0;
        let moved = net.set_params(&bumped).unwrap();
        assert_eq!(moved.layer1()[0].terms()[1].weight, 2.0);
        assert!(net.set_params(&p[1..]).is_err());
    }

    #[test]
    fn init_respects_boundary_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let kernel = Kernel::graphon_box(crate::graphon::Graphon::DirichletGreen, 64).unwrap();
        let net = AlgNet::init(kernel, DomainOp::UnitIntervalProduct, 1, 1, 3, 0.1, &mut rng).unwrap();
        for w in net.filters() {
            for t in w.terms() {
                assert!(matches!(t.center, Center::UnitInterval(x) if x > 0.85 && x <= 1.0));
            }
        }
    }

    #[test]
    fn positive_homogeneity() {
        let f = sig(&[(0.0, 1.0), (0.3, 0.5)]);
        let w = sig(&[(0.1, 1.0), (-0.2, 0.5)]);
        let net = AlgNet::new(vec![w.clone(), w.clone()], vec![vec![w.clone(), w.clone()]]).unwrap();
        let tr = net.forward_trace(&f).unwrap();
        for s in tr.a.iter().chain(&tr.b) {
            assert!(s.centers().iter().all(|c| s.evaluate(c).unwrap() > 0.0));
        }
        let scaled = net.forward(&f.scale(3.0)).unwrap();
        assert!(scaled.sub_structural(&tr.out.scale(3.0)).unwrap().norm() < 1e-12);
    }

    #[test]
    fn json_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = AlgNet::init(k(), DomainOp::Translation1d, 2, 2, 3, 0.1, &mut rng).unwrap();
        let json = net.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["N1"], 2);
        assert_eq!(v["layer2"].as_array().unwrap().len(), 2);
        let back = AlgNet::from_json(&json).unwrap();
        assert_eq!(back.collect_params(), net.collect_params());
    }
}
