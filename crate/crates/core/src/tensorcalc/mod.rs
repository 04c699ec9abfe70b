//! Tensor fields over a single chart and the pointwise differential
//! operators taken with respect to a supplied background metric.
//!
//! Everything is stored fully covariant; indices are raised explicitly with
//! the inverse metric at evaluation time. Vector fields (ζ in particular) are
//! the one exception: they are rank-1 component arrays interpreted
//! contravariantly by the operations that consume them.

mod fields;
mod map;
mod ops;

pub use fields::{
    arc, check_symmetry, ConstTensor, ExprScalar, ExprTensor, FnScalar, FnTensor, GradVectorField,
    LieDerivativeTensor, LinCombTensor, ScalarTimesTensor,
};
pub use map::{
    pullback_at, ArcMap, ComposedMap, ComposedScalar, IdentityMap, PointMap, PullbackTensor,
};
pub use ops::{
    christoffel, cov_derivative, cov_derivative_vector, cov_divergence, curvature,
    hessian_laplacian, invert_rank2, lie_derivative, trace,
};

use std::sync::Arc;

use thiserror::Error;

use crate::expr::{EvalError, Jet, JetError, JetShape};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("singular metric: {0}")]
    SingularMetric(String),
    #[error("rank/dimension mismatch: {0}")]
    Shape(String),
    #[error("point outside chart domain: {0}")]
    ChartDomain(String),
    #[error("degenerate surface: {0}")]
    DegenerateSurface(String),
    #[error("{0}")]
    Unsupported(String),
}

/// Declared component symmetry of a rank-2 field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Symmetry {
    #[default]
    None,
    Symmetric,
    Antisymmetric,
}

/// A tensor field evaluable to component jets at chart points.
pub trait TensorField: Send + Sync {
    fn dim(&self) -> usize;
    fn rank(&self) -> usize;
    fn eval(&self, point: &[f64], order: usize) -> Result<TensorJets, FieldError>;
    fn symmetry(&self) -> Symmetry {
        Symmetry::None
    }
}

/// A scalar field evaluable to a jet at chart points.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn jet(&self, point: &[f64], order: usize) -> Result<Jet, FieldError>;
}

/// All component jets of a tensor at one point, row-major over indices.
#[derive(Debug, Clone)]
pub struct TensorJets {
    dim: usize,
    rank: usize,
    jets: Vec<Jet>,
}

impl TensorJets {
    pub fn new(dim: usize, rank: usize, jets: Vec<Jet>) -> TensorJets {
        assert_eq!(jets.len(), dim.pow(rank as u32), "component count mismatch");
        TensorJets { dim, rank, jets }
    }

    pub fn from_fn(
        dim: usize,
        rank: usize,
        mut f: impl FnMut(&[usize]) -> Jet,
    ) -> TensorJets {
        let count = dim.pow(rank as u32);
        let mut idx = vec![0usize; rank];
        let mut jets = Vec::with_capacity(count);
        for flat in 0..count {
            unflatten(flat, dim, &mut idx);
            jets.push(f(&idx));
        }
        TensorJets { dim, rank, jets }
    }

    pub fn zeros(dim: usize, rank: usize, order: usize) -> Result<TensorJets, JetError> {
        let shape = JetShape::get(dim, order)?;
        let count = dim.pow(rank as u32);
        Ok(TensorJets {
            dim,
            rank,
            jets: vec![Jet::constant(shape, 0.0); count],
        })
    }

    pub fn scalar(jet: Jet) -> TensorJets {
        TensorJets {
            dim: jet.dim(),
            rank: 0,
            jets: vec![jet],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn order(&self) -> usize {
        self.jets[0].order()
    }

    pub fn jets(&self) -> &[Jet] {
        &self.jets
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn jet(&self, idx: &[usize]) -> &Jet {
        &self.jets[self.flat_index(idx)]
    }

    pub fn value(&self, idx: &[usize]) -> f64 {
        self.jet(idx).value()
    }

    pub fn as_scalar(&self) -> &Jet {
        assert_eq!(self.rank, 0, "not a scalar");
        &self.jets[0]
    }

    pub fn map(&self, f: impl Fn(&Jet) -> Jet) -> TensorJets {
        TensorJets {
            dim: self.dim,
            rank: self.rank,
            jets: self.jets.iter().map(f).collect(),
        }
    }

    pub fn add(&self, other: &TensorJets) -> TensorJets {
        self.zip(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &TensorJets) -> TensorJets {
        self.zip(other, |a, b| a.sub(b))
    }

    pub fn add_scaled(&self, s: f64, other: &TensorJets) -> TensorJets {
        self.zip(other, |a, b| a.add_scaled(s, b))
    }

    pub fn scale(&self, s: f64) -> TensorJets {
        self.map(|j| j.scale(s))
    }

    pub fn scale_jet(&self, s: &Jet) -> TensorJets {
        self.map(|j| j.mul(s))
    }

    pub fn neg(&self) -> TensorJets {
        self.map(|j| j.neg())
    }

    fn zip(&self, other: &TensorJets, f: impl Fn(&Jet, &Jet) -> Jet) -> TensorJets {
        assert_eq!(self.dim, other.dim, "tensor dim mismatch");
        assert_eq!(self.rank, other.rank, "tensor rank mismatch");
        TensorJets {
            dim: self.dim,
            rank: self.rank,
            jets: self
                .jets
                .iter()
                .zip(other.jets.iter())
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }

    pub fn truncated(&self, order: usize) -> Result<TensorJets, JetError> {
        let mut jets = Vec::with_capacity(self.jets.len());
        for j in &self.jets {
            jets.push(j.truncated(order)?);
        }
        Ok(TensorJets {
            dim: self.dim,
            rank: self.rank,
            jets,
        })
    }

    /// Coordinate derivative, new first index: (∂_a t)_{a I}. One order lower.
    pub fn partial_derivative(&self) -> Result<TensorJets, JetError> {
        let dim = self.dim;
        let mut jets = Vec::with_capacity(dim * self.jets.len());
        for a in 0..dim {
            for j in &self.jets {
                jets.push(j.partial_jet(a)?);
            }
        }
        Ok(TensorJets {
            dim,
            rank: self.rank + 1,
            jets,
        })
    }

    /// Largest |value| over components.
    pub fn max_abs_value(&self) -> f64 {
        self.jets.iter().fold(0.0, |m, j| m.max(j.value().abs()))
    }

    /// Symmetrize over the two given covariant slots.
    pub fn symmetrized(&self, s1: usize, s2: usize) -> TensorJets {
        let dim = self.dim;
        let rank = self.rank;
        TensorJets::from_fn(dim, rank, |idx| {
            let mut swapped = idx.to_vec();
            swapped.swap(s1, s2);
            self.jet(idx)
                .add(self.jet(&swapped))
                .scale(0.5)
        })
    }
}

fn unflatten(mut flat: usize, dim: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = flat % dim;
        flat /= dim;
    }
}

/// Metric component jets together with inverse-metric jets.
#[derive(Debug, Clone)]
pub struct MetricJets {
    pub g: TensorJets,
    pub inv: TensorJets,
}

impl MetricJets {
    pub fn new(g: TensorJets) -> Result<MetricJets, FieldError> {
        let inv = invert_rank2(&g)?;
        Ok(MetricJets { g, inv })
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn order(&self) -> usize {
        self.g.order()
    }

    /// Full contraction of two covariant tensors of equal rank, all indices
    /// raised with the inverse metric. Returns a jet.
    pub fn inner(&self, a: &TensorJets, b: &TensorJets) -> Jet {
        assert_eq!(a.rank(), b.rank(), "inner product rank mismatch");
        let raised = self.raise_all(a);
        contract_all(&raised, b)
    }

    /// Pointwise g₀-norm sqrt(⟨t,t⟩₀) of a covariant tensor (value level).
    pub fn norm_value(&self, t: &TensorJets) -> f64 {
        self.inner(t, t).value().max(0.0).sqrt()
    }

    /// Raise every index of a covariant tensor.
    pub fn raise_all(&self, t: &TensorJets) -> TensorJets {
        let mut current = t.clone();
        for slot in 0..t.rank() {
            current = self.raise_slot(&current, slot);
        }
        current
    }

    /// Raise one covariant slot with the inverse metric.
    pub fn raise_slot(&self, t: &TensorJets, slot: usize) -> TensorJets {
        let dim = t.dim();
        TensorJets::from_fn(dim, t.rank(), |idx| {
            let mut acc: Option<Jet> = None;
            let mut src = idx.to_vec();
            for m in 0..dim {
                src[slot] = m;
                let term = self.inv.jet(&[idx[slot], m]).mul(t.jet(&src));
                acc = Some(match acc {
                    Some(a) => a.add(&term),
                    None => term,
                });
            }
            acc.expect("dim >= 1")
        })
    }

    /// Lower the single index of a contravariant vector.
    pub fn lower_vector(&self, v: &TensorJets) -> TensorJets {
        let dim = v.dim();
        assert_eq!(v.rank(), 1);
        TensorJets::from_fn(dim, 1, |idx| {
            let mut acc: Option<Jet> = None;
            for m in 0..dim {
                let term = self.g.jet(&[idx[0], m]).mul(v.jet(&[m]));
                acc = Some(match acc {
                    Some(a) => a.add(&term),
                    None => term,
                });
            }
            acc.expect("dim >= 1")
        })
    }

    /// Raise the single index of a covariant 1-form.
    pub fn raise_vector(&self, alpha: &TensorJets) -> TensorJets {
        self.raise_slot(alpha, 0)
    }
}

/// Σ_I a^I b_I for tensors of identical rank (one already raised).
fn contract_all(raised: &TensorJets, cov: &TensorJets) -> Jet {
    let mut acc: Option<Jet> = None;
    for (a, b) in raised.jets().iter().zip(cov.jets().iter()) {
        let term = a.mul(b);
        acc = Some(match acc {
            Some(s) => s.add(&term),
            None => term,
        });
    }
    acc.expect("tensors have at least one component")
}

/// Christoffel symbols and the metric data they came from.
#[derive(Debug, Clone)]
pub struct Connection {
    /// Γ^k_{ij}, indexed [k, i, j], symmetric in (i, j).
    pub gamma: TensorJets,
    pub metric: MetricJets,
}

/// Riemann, Ricci and scalar curvature jets at a point.
#[derive(Debug, Clone)]
pub struct Curvature {
    /// R^l_{ijk}, indexed [l, i, j, k].
    pub riemann: TensorJets,
    pub ricci: TensorJets,
    pub scalar: Jet,
}

/// Evaluate a `TensorField` trait object, asserting the expected rank.
pub fn eval_rank(
    field: &dyn TensorField,
    rank: usize,
    point: &[f64],
    order: usize,
) -> Result<TensorJets, FieldError> {
    let t = field.eval(point, order)?;
    if t.rank() != rank {
        return Err(FieldError::Shape(format!(
            "expected rank {rank}, field has rank {}",
            t.rank()
        )));
    }
    Ok(t)
}

pub type ArcTensor = Arc<dyn TensorField>;
pub type ArcScalar = Arc<dyn ScalarField>;
