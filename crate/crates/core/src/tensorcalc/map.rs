//! Chart maps and pullbacks. A [`PointMap`] is a map between chart domains
//! whose component jets are available at any point; pullback of covariant
//! tensors and composition of scalar fields are generic over it.

use std::sync::Arc;

use crate::expr::Jet;

use super::{ArcScalar, ArcTensor, FieldError, ScalarField, Symmetry, TensorField, TensorJets};

/// A differentiable map between chart domains of the same dimension.
pub trait PointMap: Send + Sync {
    fn dim(&self) -> usize;

    /// Image point.
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, FieldError>;

    /// Jets of the image coordinates at `x`, one per output coordinate.
    fn jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>, FieldError>;
}

pub type ArcMap = Arc<dyn PointMap>;

/// Pull a fully covariant tensor back through a map at one point:
/// (Ψ*t)_{i..j}(x) = ∂_iΨ^{a} ⋯ ∂_jΨ^{b} t_{a..b}(Ψ(x)), as jets of the
/// requested order (consumes map jets at order+1 and t jets at order).
pub fn pullback_at(
    map: &dyn PointMap,
    field: &dyn TensorField,
    x: &[f64],
    order: usize,
) -> Result<TensorJets, FieldError> {
    let n = map.dim();
    let map_jets = map.jets(x, order + 1)?;
    let y: Vec<f64> = map_jets.iter().map(|j| j.value()).collect();
    let rank = field.rank();
    let outer = field.eval(&y, order)?;
    // Components of t composed with the map.
    let composed = TensorJets::from_fn(n, rank, |idx| {
        Jet::compose(outer.jet(idx), &map_jets).expect("jet composition dims agree")
    });
    if rank == 0 {
        return Ok(composed);
    }
    // Jacobian jets ∂_i Ψ^a at the requested order.
    let mut jac = Vec::with_capacity(n * n); // [i][a]
    for i in 0..n {
        for mj in &map_jets {
            jac.push(mj.partial_jet(i)?);
        }
    }
    let jac_at = |i: usize, a: usize| &jac[i * n + a];
    Ok(TensorJets::from_fn(n, rank, |idx| {
        let mut acc: Option<Jet> = None;
        // Sum over all source index tuples.
        let count = n.pow(rank as u32);
        let mut src = vec![0usize; rank];
        for flat in 0..count {
            let mut f = flat;
            for slot in src.iter_mut().rev() {
                *slot = f % n;
                f /= n;
            }
            let mut term = composed.jet(&src).clone();
            for (slot, &i) in idx.iter().enumerate() {
                term = term.mul(jac_at(i, src[slot]));
            }
            acc = Some(match acc {
                Some(s) => s.add(&term),
                None => term,
            });
        }
        acc.expect("rank >= 1")
    }))
}

/// Field-level pullback Ψ*t.
pub struct PullbackTensor {
    map: ArcMap,
    field: ArcTensor,
}

impl PullbackTensor {
    pub fn new(map: ArcMap, field: ArcTensor) -> PullbackTensor {
        assert_eq!(map.dim(), field.dim());
        PullbackTensor { map, field }
    }
}

impl TensorField for PullbackTensor {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn rank(&self) -> usize {
        self.field.rank()
    }

    fn eval(&self, point: &[f64], order: usize) -> Result<TensorJets, FieldError> {
        pullback_at(self.map.as_ref(), self.field.as_ref(), point, order)
    }

    fn symmetry(&self) -> Symmetry {
        self.field.symmetry()
    }
}

/// Scalar composition f ∘ Ψ.
pub struct ComposedScalar {
    map: ArcMap,
    f: ArcScalar,
}

impl ComposedScalar {
    pub fn new(map: ArcMap, f: ArcScalar) -> ComposedScalar {
        assert_eq!(map.dim(), f.dim());
        ComposedScalar { map, f }
    }
}

impl ScalarField for ComposedScalar {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn jet(&self, point: &[f64], order: usize) -> Result<Jet, FieldError> {
        let map_jets = self.map.jets(point, order)?;
        let y: Vec<f64> = map_jets.iter().map(|j| j.value()).collect();
        let outer = self.f.jet(&y, order)?;
        Ok(Jet::compose(&outer, &map_jets)?)
    }
}

/// Identity map on a chart.
pub struct IdentityMap {
    dim: usize,
}

impl IdentityMap {
    pub fn new(dim: usize) -> IdentityMap {
        IdentityMap { dim }
    }
}

impl PointMap for IdentityMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        Ok(x.to_vec())
    }

    fn jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>, FieldError> {
        let shape = crate::expr::JetShape::get(self.dim, order)?;
        Ok((0..self.dim)
            .map(|i| Jet::variable(shape.clone(), i, x[i]))
            .collect())
    }
}

/// Composition Ψ₁ ∘ Ψ₂ (apply Ψ₂ first).
pub struct ComposedMap {
    outer: ArcMap,
    inner: ArcMap,
}

impl ComposedMap {
    pub fn new(outer: ArcMap, inner: ArcMap) -> ComposedMap {
        assert_eq!(outer.dim(), inner.dim());
        ComposedMap { outer, inner }
    }
}

impl PointMap for ComposedMap {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        self.outer.apply(&self.inner.apply(x)?)
    }

    fn jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>, FieldError> {
        let inner = self.inner.jets(x, order)?;
        let y: Vec<f64> = inner.iter().map(|j| j.value()).collect();
        let outer = self.outer.jets(&y, order)?;
        outer
            .iter()
            .map(|oj| Ok(Jet::compose(oj, &inner)?))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::tensorcalc::{ConstTensor, ExprTensor};

    struct LinearMap {
        scale: f64,
    }

    impl PointMap for LinearMap {
        fn dim(&self) -> usize {
            3
        }

        fn apply(&self, x: &[f64]) -> Result<Vec<f64>, FieldError> {
            Ok(x.iter().map(|&c| self.scale * c).collect())
        }

        fn jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>, FieldError> {
            let shape = crate::expr::JetShape::get(3, order)?;
            Ok((0..3)
                .map(|i| Jet::variable(shape.clone(), i, x[i]).scale(self.scale))
                .collect())
        }
    }

    #[test]
    fn identity_pullback_is_identity() {
        let t = ExprTensor::new(
            3,
            2,
            (0..9)
                .map(|k| parse(&format!("x{}*x{}", k / 3 + 1, k % 3 + 1), 3).unwrap())
                .collect(),
            Symmetry::Symmetric,
        )
        .unwrap();
        let x = [0.4, -1.1, 2.0];
        let direct = t.eval(&x, 2).unwrap();
        let pulled = pullback_at(&IdentityMap::new(3), &t, &x, 2).unwrap();
        for (a, b) in direct.jets().iter().zip(pulled.jets().iter()) {
            for (ca, cb) in a.coeffs().iter().zip(b.coeffs().iter()) {
                assert!((ca - cb).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn dilation_pullback_of_flat_metric() {
        // Ψ: x ↦ 2x pulls δ back to 4δ.
        let delta = ConstTensor::euclidean(3);
        let pulled = pullback_at(&LinearMap { scale: 2.0 }, &delta, &[1.0, 0.5, -2.0], 1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 4.0 } else { 0.0 };
                assert!((pulled.value(&[i, j]) - expect).abs() < 1e-14);
            }
        }
    }
}
