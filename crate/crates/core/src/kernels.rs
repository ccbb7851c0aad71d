//! Reproducing kernels and Gram matrices.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::{Center, CenterKind};
use crate::error::{Error, Result};
use crate::graphon::Graphon;

/// A reproducing kernel `K(u, v)` together with its hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec", into = "KernelSpec")]
pub enum Kernel {
    /// `exp(−B (u − v)²)` on the line.
    Gaussian1d { b: f64 },
    /// `exp(−‖u − v‖² / (2σ²))` on the plane.
    Gaussian2d { sigma: f64 },
    /// `(B/π) sinc((B/π)(u − v))` with the normalized `sinc(t) = sin(πt)/(πt)`,
    /// i.e. `sin(B(u−v)) / (π(u−v))`, the kernel of signals bandlimited to `B`.
    Sinc { b: f64 },
    /// `⟨R_u e₀, R_v e₀⟩^d` for rotation centers, `e₀ = (0, 0, 1)`.
    SpherePoly { d: u32 },
    /// `∫₀¹ W(u,z) W(z,v) dz` by the composite trapezoid rule.
    GraphonBox(GraphonBox),
}

/// Quadrature state for the graphon box-product kernel.
#[derive(Clone, Debug)]
pub struct GraphonBox {
    graphon: Graphon,
    n_quad: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    diag_sup: f64,
}

impl PartialEq for GraphonBox {
    fn eq(&self, other: &Self) -> bool {
        self.graphon == other.graphon && self.n_quad == other.n_quad
    }
}

impl GraphonBox {
    /// `n_quad` uniform intervals on `[0, 1]`, so `n_quad + 1` nodes.
    pub fn new(graphon: Graphon, n_quad: usize) -> Result<Self> {
        if n_quad < 64 {
            return Err(Error::Invalid(format!("graphon quadrature needs n_quad >= 64, got {n_quad}")));
        }
        graphon.validate()?;
        let h = 1.0 / n_quad as f64;
        let nodes: Vec<f64> = (0..=n_quad).map(|i| i as f64 * h).collect();
        let weights: Vec<f64> = (0..=n_quad)
            .map(|i| if i == 0 || i == n_quad { 0.5 * h } else { h })
            .collect();
        let mut gb = GraphonBox {
            graphon,
            n_quad,
            nodes,
            weights,
            diag_sup: 0.0,
        };
        gb.diag_sup = gb
            .nodes
            .iter()
            .map(|&u| gb.eval(u, u))
            .fold(0.0, f64::max);
        Ok(gb)
    }

    pub fn graphon(&self) -> Graphon {
        self.graphon
    }

    pub fn n_quad(&self) -> usize {
        self.n_quad
    }

    #[inline]
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * self.graphon.eval(u, z) * self.graphon.eval(z, v))
            .sum()
    }

    /// Samples the kernel on the points `xs` with one matrix product,
    /// using the same quadrature as [`GraphonBox::eval`].
    pub fn sample(&self, xs: &[f64]) -> DMatrix<f64> {
        let w = DMatrix::from_fn(xs.len(), self.nodes.len(), |i, k| {
            self.graphon.eval(xs[i], self.nodes[k])
        });
        let mut wq = w.clone();
        for (k, &q) in self.weights.iter().enumerate() {
            wq.column_mut(k).scale_mut(q);
        }
        let m = &wq * w.transpose();
        (&m + m.transpose()) * 0.5
    }
}

impl Kernel {
    pub fn gaussian1d(b: f64) -> Result<Self> {
        positive("B", b)?;
        Ok(Kernel::Gaussian1d { b })
    }

    pub fn gaussian2d(sigma: f64) -> Result<Self> {
        positive("sigma", sigma)?;
        Ok(Kernel::Gaussian2d { sigma })
    }

    /// The planar Gaussian in the `exp(−B‖u−v‖²)` form, i.e. `σ = 1/√(2B)`.
    pub fn gaussian2d_from_b(b: f64) -> Result<Self> {
        positive("B", b)?;
        Ok(Kernel::Gaussian2d {
            sigma: (0.5 / b).sqrt(),
        })
    }

    pub fn sinc(b: f64) -> Result<Self> {
        positive("B", b)?;
        Ok(Kernel::Sinc { b })
    }

    pub fn sphere_poly(d: u32) -> Result<Self> {
        if d == 0 {
            return Err(Error::Invalid("sphere polynomial degree must be positive".into()));
        }
        Ok(Kernel::SpherePoly { d })
    }

    pub fn graphon_box(graphon: Graphon, n_quad: usize) -> Result<Self> {
        Ok(Kernel::GraphonBox(GraphonBox::new(graphon, n_quad)?))
    }

    /// The kind of center this kernel is defined on.
    pub fn center_kind(&self) -> CenterKind {
        match self {
            Kernel::Gaussian1d { .. } | Kernel::Sinc { .. } => CenterKind::Scalar,
            Kernel::Gaussian2d { .. } => CenterKind::Planar,
            Kernel::SpherePoly { .. } => CenterKind::Rotation3,
            Kernel::GraphonBox(_) => CenterKind::UnitInterval,
        }
    }

    pub fn check(&self, c: &Center) -> Result<()> {
        if c.kind() == self.center_kind() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{} kernel evaluated at {} center {c}",
                self.center_kind(),
                c.kind()
            )))
        }
    }

    /// `K(u, v)`.
    pub fn eval(&self, u: &Center, v: &Center) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.k(u, v))
    }

    /// `K(u, v)` for centers already checked against this kernel.
    #[inline]
    pub(crate) fn k(&self, u: &Center, v: &Center) -> f64 {
        match (self, u, v) {
            (Kernel::Gaussian1d { b }, Center::Scalar(x), Center::Scalar(y)) => {
                let d = x - y;
                (-b * d * d).exp()
            }
            (Kernel::Gaussian2d { sigma }, Center::Planar(p), Center::Planar(q)) => {
                let dx = p[0] - q[0];
                let dy = p[1] - q[1];
                (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
            }
            (Kernel::Sinc { b }, Center::Scalar(x), Center::Scalar(y)) => {
                let r = b / PI;
                r * sinc(r * (x - y))
            }
            (Kernel::SpherePoly { d }, Center::Rotation3(a), Center::Rotation3(b)) => {
                // ⟨R_a e₀, R_b e₀⟩ is the (2,2) entry of R_aᵀ R_b.
                let (ma, mb) = (a.matrix(), b.matrix());
                let dot = ma[(0, 2)] * mb[(0, 2)] + ma[(1, 2)] * mb[(1, 2)] + ma[(2, 2)] * mb[(2, 2)];
                dot.powi(*d as i32)
            }
            (Kernel::GraphonBox(g), Center::UnitInterval(x), Center::UnitInterval(y)) => {
                g.eval(*x, *y)
            }
            _ => f64::NAN,
        }
    }

    /// `∂K(u, v)/∂u` in parameter coordinates, for kernels with a closed form.
    #[inline]
    pub(crate) fn grad_first(&self, u: &Center, v: &Center, kuv: f64) -> Option<[f64; 2]> {
        match (self, u, v) {
            (Kernel::Gaussian1d { b }, Center::Scalar(x), Center::Scalar(y)) => {
                Some([-2.0 * b * (x - y) * kuv, 0.0])
            }
            (Kernel::Gaussian2d { sigma }, Center::Planar(p), Center::Planar(q)) => {
                let s2 = sigma * sigma;
                Some([-(p[0] - q[0]) / s2 * kuv, -(p[1] - q[1]) / s2 * kuv])
            }
            (Kernel::Sinc { b }, Center::Scalar(x), Center::Scalar(y)) => {
                let t = x - y;
                let bt = b * t;
                let g = if bt.abs() < 1e-4 {
                    // Series of (B t cos(Bt) − sin(Bt)) / (π t²).
                    -b * b * b * t / (3.0 * PI) * (1.0 - bt * bt / 10.0)
                } else {
                    (bt * bt.cos() - bt.sin()) / (PI * t * t)
                };
                Some([g, 0.0])
            }
            _ => None,
        }
    }

    /// Whether [`Kernel::grad_first`] is available.
    pub(crate) fn has_gradient(&self) -> bool {
        matches!(
            self,
            Kernel::Gaussian1d { .. } | Kernel::Gaussian2d { .. } | Kernel::Sinc { .. }
        )
    }

    /// Upper bound on `K(x, x)` over the domain; `|k_v(x)| ≤ √(K(v,v)·diag_sup)`.
    pub fn diag_sup(&self) -> f64 {
        match self {
            Kernel::Gaussian1d { .. } | Kernel::Gaussian2d { .. } | Kernel::SpherePoly { .. } => 1.0,
            Kernel::Sinc { b } => b / PI,
            Kernel::GraphonBox(g) => g.diag_sup,
        }
    }

    /// Natural length scale of the kernel in center coordinates.
    pub fn length_scale(&self) -> f64 {
        match self {
            Kernel::Gaussian1d { b } => (0.5 / b).sqrt(),
            Kernel::Gaussian2d { sigma } => *sigma,
            Kernel::Sinc { b } => PI / b,
            Kernel::SpherePoly { .. } | Kernel::GraphonBox(_) => 1.0,
        }
    }

    /// The Gram matrix `[K(v_i, v_j)]`.
    pub fn gram(&self, centers: &[Center]) -> Result<DMatrix<f64>> {
        if centers.is_empty() {
            return Err(Error::Invalid("gram matrix of an empty center set".into()));
        }
        for c in centers {
            self.check(c)?;
        }
        Ok(self.gram_unchecked(centers))
    }

    pub(crate) fn gram_unchecked(&self, centers: &[Center]) -> DMatrix<f64> {
        let n = centers.len();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.k(&centers[i], &centers[j]);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }
}

/// Normalized sinc `sin(πt)/(πt)`.
pub fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-8 {
        let x = PI * t;
        1.0 - x * x / 6.0
    } else {
        let x = PI * t;
        x.sin() / x
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("kernel parameter {name} must be positive, got {x}")))
    }
}

/// JSON form of a kernel.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    Gaussian1d {
        #[serde(rename = "B")]
        b: f64,
    },
    Gaussian2d {
        sigma: f64,
    },
    Sinc {
        #[serde(rename = "B")]
        b: f64,
    },
    SpherePoly {
        d: u32,
    },
    GraphonBox {
        graphon: GraphonName,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
        n_quad: usize,
    },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphonName {
    DirichletGreen,
    ConstantP,
}

impl TryFrom<KernelSpec> for Kernel {
    type Error = Error;

    fn try_from(spec: KernelSpec) -> Result<Self> {
        match spec {
            KernelSpec::Gaussian1d { b } => Kernel::gaussian1d(b),
            KernelSpec::Gaussian2d { sigma } => Kernel::gaussian2d(sigma),
            KernelSpec::Sinc { b } => Kernel::sinc(b),
            KernelSpec::SpherePoly { d } => Kernel::sphere_poly(d),
            KernelSpec::GraphonBox { graphon, p, n_quad } => {
                let g = match (graphon, p) {
                    (GraphonName::DirichletGreen, _) => Graphon::DirichletGreen,
                    (GraphonName::ConstantP, Some(p)) => Graphon::ConstantP(p),
                    (GraphonName::ConstantP, None) => {
                        return Err(Error::Invalid("constant_p graphon needs \"p\"".into()))
                    }
                };
                Kernel::graphon_box(g, n_quad)
            }
        }
    }
}

impl From<Kernel> for KernelSpec {
    fn from(k: Kernel) -> Self {
        match k {
            Kernel::Gaussian1d { b } => KernelSpec::Gaussian1d { b },
            Kernel::Gaussian2d { sigma } => KernelSpec::Gaussian2d { sigma },
            Kernel::Sinc { b } => KernelSpec::Sinc { b },
            Kernel::SpherePoly { d } => KernelSpec::SpherePoly { d },
            Kernel::GraphonBox(g) => match g.graphon {
                Graphon::DirichletGreen => KernelSpec::GraphonBox {
                    graphon: GraphonName::DirichletGreen,
                    p: None,
                    n_quad: g.n_quad,
                },
                Graphon::ConstantP(p) => KernelSpec::GraphonBox {
                    graphon: GraphonName::ConstantP,
                    p: Some(p),
                    n_quad: g.n_quad,
                },
            },
        }
    }
}
