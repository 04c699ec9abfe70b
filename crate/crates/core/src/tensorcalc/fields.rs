//! Field-level combinators: expression-backed tensors, linear combinations,
//! Lie-derivative fields, gradients. Combinators request whatever jet order
//! they need from their inputs, so a derived field evaluable to order q may
//! consume order q+1 of its ingredients.

use std::sync::Arc;

use crate::expr::{Expression, Jet};

use super::ops::lie_derivative;
use super::{ArcScalar, ArcTensor, FieldError, ScalarField, Symmetry, TensorField, TensorJets};

/// Tensor with one expression per component, row-major.
pub struct ExprTensor {
    dim: usize,
    rank: usize,
    comps: Vec<Expression>,
    symmetry: Symmetry,
}

impl ExprTensor {
    pub fn new(
        dim: usize,
        rank: usize,
        comps: Vec<Expression>,
        symmetry: Symmetry,
    ) -> Result<ExprTensor, FieldError> {
        if comps.len() != dim.pow(rank as u32) {
            return Err(FieldError::Shape(format!(
                "rank-{rank} tensor over dim {dim} needs {} components, got {}",
                dim.pow(rank as u32),
                comps.len()
            )));
        }
        for c in &comps {
            if c.dim() != dim {
                return Err(FieldError::Shape(format!(
                    "component expression over {} variables in a dim-{dim} tensor",
                    c.dim()
                )));
            }
        }
        Ok(ExprTensor {
            dim,
            rank,
            comps,
            symmetry,
        })
    }

    /// Diagonal rank-2 tensor from per-axis expressions.
    pub fn diagonal(dim: usize, diag: Vec<Expression>) -> Result<ExprTensor, FieldError> {
        if diag.len() != dim {
            return Err(FieldError::Shape("diagonal length mismatch".into()));
        }
        let mut comps = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                if i == j {
                    comps.push(diag[i].clone());
                } else {
                    comps.push(Expression::constant(0.0, dim));
                }
            }
        }
        ExprTensor::new(dim, 2, comps, Symmetry::Symmetric)
    }
}

impl TensorField for ExprTensor {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rank(&self) -> usize {
        self.rank
    }

    fn eval(&self, point: &[f64], order: usize) -> Result<TensorJets, FieldError> {
        let mut jets = Vec::with_capacity(self.comps.len());
        for c in &self.comps {
            jets.push(c.eval_jet(point, order)?);
        }
        Ok(TensorJets::new(self.dim, self.rank, jets))
    }

    fn symmetry(&self) -> Symmetry {
        self.symmetry
    }
}

/// Constant-component tensor.
pub struct ConstTensor {
    dim: usize,
    rank: usize,
    comps: Vec<f64>,
    symmetry: Symmetry,
}

impl ConstTensor {
    pub fn new(dim: usize, rank: usize, comps: Vec<f64>, symmetry: Symmetry) -> ConstTensor {
        assert_eq!(comps.len(), dim.pow(rank as u32));
        ConstTensor {
            dim,
            rank,
            comps,
            symmetry,
        }
    }

    /// The Euclidean metric δ.
    pub fn euclidean(dim: usize) -> ConstTensor {
        let mut comps = vec![0.0; dim * dim];
        for i in 0..dim {
            comps[i * dim + i] = 1.0;
        }
        ConstTensor::new(dim, 2, comps, Symmetry::Symmetric)
    }
}

impl TensorField for ConstTensor {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rank(&self) -> usize {
        self.rank
    }

    fn eval(&self, point: &[f64], order: usize) -> Result<TensorJets, FieldError> {
        debug_assert_eq!(point.len(), self.dim);
        let shape = crate::expr::JetShape::get(self.dim, order)?;
        Ok(TensorJets::new(
            self.dim,
            self.rank,
            self.comps
                .iter()
                .map(|&c| Jet::constant(shape.clone(), c))
                .collect(),
        ))
    }

    fn symmetry(&self) -> Symmetry {
        self.symmetry
    }
}

impl ScalarField for Expression {
    fn dim(&self) -> usize {
        Expression::dim(self)
    }

    fn jet(&self, point: &[f64], order: usize) -> Result<Jet, FieldError> {
        Ok(self.eval_jet(point, order)?)
    }
}

/// Expression-backed scalar field (alias kept for readability at call sites).
pub type ExprScalar = Expression;

/// Scalar field from a closure, mostly for tests and oracles.
pub struct FnScalar<F> {
    dim: usize,
    f: F,
}

impl<F> FnScalar<F>
where
    F: Fn(&[f64], usize) -> Result<Jet, FieldError> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> FnScalar<F> {
        FnScalar { dim, f }
    }
}

impl<F> ScalarField for FnScalar<F>
where
    F: Fn(&[f64], usize) -> Result<Jet, FieldError> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, point: &[f64], order: usize) -> Result<Jet, FieldError> {
        (self.f)(point, order)
    }
}

/// Tensor field from a closure.
pub struct FnTensor<F> {
    dim: usize,
    rank: usize,
    f: F,
}

impl<F> FnTensor<F>
where
    F: Fn(&[f64], usize) -> Result<TensorJets, FieldError> + Send + Sync,
{
    pub fn new(dim: usize, rank: usize, f: F) -> FnTensor<F> {
        FnTensor { dim, rank, f }
    }
}

impl<F> TensorField for FnTensor<F>
where
    F: Fn(&[f64], usize) -> Result<TensorJets, FieldError> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn rank(&self) -> usize {
        self.rank
    }

    fn eval(&self, point: &[f64], order: usize) -> Result<TensorJets, FieldError> {
        (self.f)(point, order)
    }
}

/// Linear combination Σ cᵢ tᵢ of same-shape tensor fields.
pub struct LinCombTensor {
    terms: Vec<(f64, ArcTensor)>,
}

impl LinCombTensor {
    pub fn new(terms: Vec<(f64, ArcTensor)>) -> LinCombTensor {
        assert!(!terms.is_empty(), "linear combination needs a term");
        let (dim, rank) = (terms[0].1.dim(), terms[0].1.rank());
        for (_, t) in &terms {
            assert_eq!(t.dim(), dim);
            assert_eq!(t.rank(), rank);
        }
        LinCombTensor { terms }
    }

    pub fn difference(a: ArcTensor, b: ArcTensor) -> LinCombTensor {
        LinCombTensor::new(vec![(1.0, a), (-1.0, b)])
    }
}

impl TensorField for LinCombTensor {
    fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }

    fn rank(&self) -> usize {
        self.terms[0].1.rank()
    }

    fn eval(&self, point: &[f64], order: usize) -> Result<TensorJets, FieldError> {
        let mut acc = self.terms[0].1.eval(point, order)?.scale(self.terms[0].0);
        for (c, t) in &self.terms[1..] {
            acc = acc.add_scaled(*c, &t.eval(point, order)?);
        }
        Ok(acc)
    }
}

/// The field 𝓛_ζ t for a contravariant vector field ζ; consumes jets of ζ
/// and t at one order above the requested one.
pub struct LieDerivativeTensor {
    zeta: ArcTensor,
    t: ArcTensor,
}

impl LieDerivativeTensor {
    pub fn new(zeta: ArcTensor, t: ArcTensor) -> LieDerivativeTensor {
        assert_eq!(zeta.rank(), 1, "ζ must be a vector field");
        assert_eq!(zeta.dim(), t.dim());
        LieDerivativeTensor { zeta, t }
    }
}

impl TensorField for LieDerivativeTensor {
    fn dim(&self) -> usize {
        self.t.dim()
    }

    fn rank(&self) -> usize {
        self.t.rank()
    }

    fn eval(&self, point: &[f64], order: usize) -> Result<TensorJets, FieldError> {
        let z = self.zeta.eval(point, order + 1)?;
        let t = self.t.eval(point, order + 1)?;
        lie_derivative(&z, &t)
    }

    fn symmetry(&self) -> Symmetry {
        // 𝓛_ζ preserves rank-2 symmetry.
        self.t.symmetry()
    }
}

/// f · t for a scalar field f.
pub struct ScalarTimesTensor {
    f: ArcScalar,
    t: ArcTensor,
}

impl ScalarTimesTensor {
    pub fn new(f: ArcScalar, t: ArcTensor) -> ScalarTimesTensor {
        assert_eq!(f.dim(), t.dim());
        ScalarTimesTensor { f, t }
    }
}

impl TensorField for ScalarTimesTensor {
    fn dim(&self) -> usize {
        self.t.dim()
    }

    fn rank(&self) -> usize {
        self.t.rank()
    }

    fn eval(&self, point: &[f64], order: usize) -> Result<TensorJets, FieldError> {
        let f = self.f.jet(point, order)?;
        Ok(self.t.eval(point, order)?.scale_jet(&f))
    }

    fn symmetry(&self) -> Symmetry {
        self.t.symmetry()
    }
}

/// Contravariant gradient field g₀⁻¹ df of a scalar field, with the metric
/// supplied as a plain tensor field.
pub struct GradVectorField {
    f: ArcScalar,
    metric: ArcTensor,
}

impl GradVectorField {
    pub fn new(f: ArcScalar, metric: ArcTensor) -> GradVectorField {
        assert_eq!(f.dim(), metric.dim());
        assert_eq!(metric.rank(), 2);
        GradVectorField { f, metric }
    }
}

impl TensorField for GradVectorField {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn rank(&self) -> usize {
        1
    }

    fn eval(&self, point: &[f64], order: usize) -> Result<TensorJets, FieldError> {
        let n = self.dim();
        let fj = self.f.jet(point, order + 1)?;
        let df = TensorJets::new(
            n,
            1,
            (0..n)
                .map(|i| fj.partial_jet(i))
                .collect::<Result<_, _>>()?,
        );
        let g = self.metric.eval(point, order)?;
        let metric = super::MetricJets::new(g)?;
        Ok(metric.raise_vector(&df))
    }
}

/// Spot-check a declared symmetry tag at sample points.
pub fn check_symmetry(
    field: &dyn TensorField,
    points: &[Vec<f64>],
    tol: f64,
) -> Result<(), FieldError> {
    if field.rank() != 2 || field.symmetry() == Symmetry::None {
        return Ok(());
    }
    for p in points {
        let t = field.eval(p, 0)?;
        for i in 0..field.dim() {
            for j in 0..i {
                let (a, b) = (t.value(&[i, j]), t.value(&[j, i]));
                let residual = match field.symmetry() {
                    Symmetry::Symmetric => (a - b).abs(),
                    Symmetry::Antisymmetric => (a + b).abs(),
                    Symmetry::None => 0.0,
                };
                let scale = 1.0 + a.abs().max(b.abs());
                if residual > tol * scale {
                    return Err(FieldError::Shape(format!(
                        "declared {:?} symmetry violated at {p:?}: t[{i}{j}]={a}, t[{j}{i}]={b}",
                        field.symmetry()
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Helper: wrap a tensor field in an Arc.
pub fn arc<T: TensorField + 'static>(t: T) -> Arc<dyn TensorField> {
    Arc::new(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn lie_field_matches_pointwise_operator() {
        let delta: ArcTensor = Arc::new(ConstTensor::euclidean(3));
        let zeta: ArcTensor = Arc::new(
            ExprTensor::new(
                3,
                1,
                vec![
                    parse("x2^2", 3).unwrap(),
                    parse("0", 3).unwrap(),
                    parse("0", 3).unwrap(),
                ],
                Symmetry::None,
            )
            .unwrap(),
        );
        let lie = LieDerivativeTensor::new(zeta, delta);
        let jets = lie.eval(&[0.3, 1.5, -0.2], 1).unwrap();
        assert!((jets.value(&[0, 1]) - 3.0).abs() < 1e-14);
        assert!((jets.jet(&[0, 1]).d(1) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn gradient_field_on_flat_background() {
        let delta: ArcTensor = Arc::new(ConstTensor::euclidean(3));
        let f: ArcScalar = Arc::new(parse("x1^2 + 3*x2", 3).unwrap());
        let grad = GradVectorField::new(f, delta);
        let jets = grad.eval(&[2.0, 0.0, 1.0], 1).unwrap();
        assert!((jets.value(&[0]) - 4.0).abs() < 1e-14);
        assert!((jets.value(&[1]) - 3.0).abs() < 1e-14);
        assert!(jets.value(&[2]).abs() < 1e-14);
        assert!((jets.jet(&[0]).d(0) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn symmetry_spot_check() {
        let asym = ExprTensor::new(
            3,
            2,
            vec![
                parse("0", 3).unwrap(),
                parse("x1", 3).unwrap(),
                parse("0", 3).unwrap(),
                parse("x2", 3).unwrap(),
                parse("0", 3).unwrap(),
                parse("0", 3).unwrap(),
                parse("0", 3).unwrap(),
                parse("0", 3).unwrap(),
                parse("0", 3).unwrap(),
            ],
            Symmetry::Symmetric,
        )
        .unwrap();
        let points = vec![vec![1.0, 2.0, 0.0]];
        assert!(check_symmetry(&asym, &points, 1e-9).is_err());
    }
}
