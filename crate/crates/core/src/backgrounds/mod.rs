//! The model reference data h₀ = (g₀, k₀): flat and hyperbolic backgrounds
//! with their kernel bases, exponential maps, constant Φ₀ values and
//! isometry actions. k₀, when used, has the supported form λ₀·g₀ with λ₀
//! constant.

pub mod hyperboloid;
mod isometry;

pub use isometry::{Isometry, IsometryMap};

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::{parse, Jet, JetShape};
use crate::tensorcalc::{
    christoffel, ArcScalar, ArcTensor, ConstTensor, Connection, Curvature, ExprTensor,
    FieldError, MetricJets, ScalarField, TensorField, TensorJets,
};

/// Which charge-density operator a computation runs with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// Scalar curvature.
    Scal,
    /// Hamiltonian and momentum constraints on (g, k).
    Constraints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackgroundKind {
    Flat,
    Hyperbolic,
}

/// Reference data on a single chart at infinity.
#[derive(Clone)]
pub struct Background {
    kind: BackgroundKind,
    dim: usize,
    lambda0: f64,
    r_min: f64,
    g0: ArcTensor,
}

impl Background {
    pub fn flat(dim: usize) -> Background {
        assert!(dim >= 2, "flat background needs dimension >= 2");
        Background {
            kind: BackgroundKind::Flat,
            dim,
            lambda0: 0.0,
            r_min: 1e-3,
            g0: Arc::new(ConstTensor::euclidean(dim)),
        }
    }

    pub fn hyperbolic(dim: usize) -> Background {
        assert!(dim >= 3, "hyperbolic polar chart implemented for dimension >= 3");
        let g0 = Arc::new(hyperbolic_metric_field(dim));
        Background {
            kind: BackgroundKind::Hyperbolic,
            dim,
            lambda0: 0.0,
            r_min: 1e-3,
            g0,
        }
    }

    pub fn with_lambda0(mut self, lambda0: f64) -> Background {
        self.lambda0 = lambda0;
        self
    }

    pub fn with_r_min(mut self, r_min: f64) -> Background {
        self.r_min = r_min;
        self
    }

    pub fn kind(&self) -> BackgroundKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn g0(&self) -> &ArcTensor {
        &self.g0
    }

    /// k₀ = λ₀ g₀ as a field (zero tensor when λ₀ = 0).
    pub fn k0(&self) -> ArcTensor {
        let lambda = self.lambda0;
        let g0 = self.g0.clone();
        Arc::new(crate::tensorcalc::LinCombTensor::new(vec![(lambda, g0)]))
    }

    /// Background scalar curvature (constant).
    pub fn scal0(&self) -> f64 {
        match self.kind {
            BackgroundKind::Flat => 0.0,
            BackgroundKind::Hyperbolic => {
                -((self.dim * (self.dim - 1)) as f64)
            }
        }
    }

    /// The constant value Φ(h₀): for scal the background scalar curvature,
    /// for constraints (Φ₀^H, 0) with Φ₀^H = Scal₀ + n(n−1)λ₀².
    pub fn phi0(&self, kind: OperatorKind) -> f64 {
        match kind {
            OperatorKind::Scal => self.scal0(),
            OperatorKind::Constraints => {
                let n = self.dim as f64;
                self.scal0() + n * (n - 1.0) * self.lambda0 * self.lambda0
            }
        }
    }

    /// |sectional curvature| bound of g₀.
    pub fn kappa_sup(&self) -> f64 {
        match self.kind {
            BackgroundKind::Flat => 0.0,
            BackgroundKind::Hyperbolic => 1.0,
        }
    }

    /// Check that a point lies in the working chart domain.
    pub fn check_domain(&self, point: &[f64]) -> Result<(), FieldError> {
        if point.len() != self.dim {
            return Err(FieldError::Shape(format!(
                "point has {} coordinates, chart has {}",
                point.len(),
                self.dim
            )));
        }
        let r = self.radius(point);
        if r < self.r_min {
            return Err(FieldError::ChartDomain(format!(
                "radius {r} below r_min {}",
                self.r_min
            )));
        }
        Ok(())
    }

    /// Chart radius of a point (Euclidean |x| or the polar r coordinate).
    pub fn radius(&self, point: &[f64]) -> f64 {
        match self.kind {
            BackgroundKind::Flat => point.iter().map(|c| c * c).sum::<f64>().sqrt(),
            BackgroundKind::Hyperbolic => point[0],
        }
    }

    pub fn metric_jets(&self, point: &[f64], order: usize) -> Result<MetricJets, FieldError> {
        MetricJets::new(self.g0.eval(point, order)?)
    }

    /// Levi-Civita connection of g₀ with Christoffel jets of `gamma_order`.
    pub fn connection(&self, point: &[f64], gamma_order: usize) -> Result<Connection, FieldError> {
        christoffel(self.g0.eval(point, gamma_order + 1)?)
    }

    /// Background curvature jets of the given order.
    pub fn curvature(&self, point: &[f64], order: usize) -> Result<Curvature, FieldError> {
        crate::tensorcalc::curvature(self.g0.eval(point, order + 2)?)
    }

    /// Exponential map exp_x(v), value level. Flat: x + v. Hyperbolic: the
    /// hyperboloid geodesic formula, projected back to the polar chart.
    pub fn exp_map(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>, FieldError> {
        self.check_domain(x)?;
        match self.kind {
            BackgroundKind::Flat => Ok(x.iter().zip(v.iter()).map(|(a, b)| a + b).collect()),
            BackgroundKind::Hyperbolic => {
                let jets = self.exp_map_jets(
                    x,
                    &constant_jets(self.dim, v, 0)?,
                )?;
                Ok(jets.iter().map(|j| j.value()).collect())
            }
        }
    }

    /// Jets of x ↦ exp_x(ζ(x)) given the jets of the vector-field components
    /// ζ^i at x. The output order is the order of the ζ jets.
    pub fn exp_map_jets(&self, x: &[f64], zeta_jets: &[Jet]) -> Result<Vec<Jet>, FieldError> {
        self.check_domain(x)?;
        let order = zeta_jets.iter().map(|j| j.order()).min().unwrap_or(0);
        match self.kind {
            BackgroundKind::Flat => {
                let shape = JetShape::get(self.dim, order)?;
                Ok((0..self.dim)
                    .map(|i| Jet::variable(shape.clone(), i, x[i]).add(&zeta_jets[i]))
                    .collect())
            }
            BackgroundKind::Hyperbolic => {
                let seeds = hyperboloid::chart_seeds(x, order + 1)?;
                let lifted = hyperboloid::lift_jets(&seeds);
                // Z^μ = Σ_i ∂X^μ/∂x^i ζ^i: the pushforward of ζ.
                let mut z = Vec::with_capacity(self.dim + 1);
                for l in &lifted {
                    let mut acc: Option<Jet> = None;
                    for (i, zj) in zeta_jets.iter().enumerate() {
                        let term = l.partial_jet(i)?.mul(zj);
                        acc = Some(match acc {
                            Some(s) => s.add(&term),
                            None => term,
                        });
                    }
                    z.push(acc.expect("dim >= 1"));
                }
                let x_low: Vec<Jet> = lifted
                    .iter()
                    .map(|j| j.truncated(order))
                    .collect::<Result<_, _>>()?;
                let moved = hyperboloid::exp_embedded(&x_low, &z)?;
                hyperboloid::project_jets(&moved, self.r_min)
            }
        }
    }

    /// Kernel basis 𝒩₀ for the requested operator kind.
    pub fn kernel_basis(&self, kind: OperatorKind) -> Result<Vec<StaticPotential>, FieldError> {
        match (kind, self.kind) {
            (OperatorKind::Scal, BackgroundKind::Flat) => {
                let mut out = vec![StaticPotential::flat_affine(self.dim, 1.0, vec![0.0; self.dim], "1")];
                for i in 0..self.dim {
                    let mut a = vec![0.0; self.dim];
                    a[i] = 1.0;
                    out.push(StaticPotential::flat_affine(
                        self.dim,
                        0.0,
                        a,
                        &format!("x{}", i + 1),
                    ));
                }
                Ok(out)
            }
            (OperatorKind::Scal, BackgroundKind::Hyperbolic) => {
                let mut out = Vec::with_capacity(self.dim + 1);
                for mu in 0..=self.dim {
                    let mut c = vec![0.0; self.dim + 1];
                    c[mu] = 1.0;
                    out.push(StaticPotential::hyperboloid_linear(self.dim, c));
                }
                Ok(out)
            }
            (OperatorKind::Constraints, BackgroundKind::Flat) if self.lambda0 == 0.0 => {
                let n = self.dim;
                let mut out = Vec::new();
                out.push(StaticPotential::flat_constraints(
                    n,
                    Some((1.0, vec![0.0; n])),
                    None,
                    "f=1",
                ));
                for i in 0..n {
                    let mut a = vec![0.0; n];
                    a[i] = 1.0;
                    out.push(StaticPotential::flat_constraints(
                        n,
                        Some((0.0, a)),
                        None,
                        &format!("f=x{}", i + 1),
                    ));
                }
                for i in 0..n {
                    let mut c = vec![0.0; n];
                    c[i] = 1.0;
                    out.push(StaticPotential::flat_constraints(
                        n,
                        None,
                        Some((c, vec![vec![0.0; n]; n])),
                        &format!("alpha=dx{}", i + 1),
                    ));
                }
                for i in 0..n {
                    for j in i + 1..n {
                        // α = x^i dx^j − x^j dx^i: ω_{ij} = 1, ω_{ji} = −1.
                        let mut omega = vec![vec![0.0; n]; n];
                        omega[i][j] = 1.0;
                        omega[j][i] = -1.0;
                        out.push(StaticPotential::flat_constraints(
                            n,
                            None,
                            Some((vec![0.0; n], omega)),
                            &format!("alpha=x{}dx{}-x{}dx{}", i + 1, j + 1, j + 1, i + 1),
                        ));
                    }
                }
                Ok(out)
            }
            (OperatorKind::Constraints, _) => Err(FieldError::Unsupported(format!(
                "unsupported kernel basis: constraints operator on {:?} background with λ₀ = {}",
                self.kind, self.lambda0
            ))),
        }
    }

    /// Bind an isometry descriptor to this chart.
    pub fn isometry_map(&self, iso: &Isometry) -> Result<IsometryMap, FieldError> {
        match (self.kind, iso) {
            (BackgroundKind::Flat, Isometry::Euclidean { .. })
            | (BackgroundKind::Hyperbolic, Isometry::Lorentz { .. }) => Ok(IsometryMap {
                iso: iso.clone(),
                dim: self.dim,
                r_min: self.r_min,
            }),
            _ => Err(FieldError::Unsupported(
                "not an isometry of this background kind".into(),
            )),
        }
    }

    /// Pull a potential back along an isometry: A*V = V ∘ A. Basis members
    /// transform exactly in their basis; other potentials are composed
    /// generically.
    pub fn isometry_action(
        &self,
        iso: &Isometry,
        v: &StaticPotential,
    ) -> Result<StaticPotential, FieldError> {
        let map = self.isometry_map(iso)?;
        match (&v.coords, iso) {
            (Some(PotentialCoords::FlatAffine { constant, linear }), Isometry::Euclidean { rotation, translation }) => {
                let a = DMatrix::from_column_slice(self.dim, 1, linear);
                let new_linear = rotation.transpose() * &a;
                let shift: f64 = linear
                    .iter()
                    .zip(translation.iter())
                    .map(|(x, y)| x * y)
                    .sum();
                Ok(StaticPotential::flat_affine(
                    self.dim,
                    constant + shift,
                    new_linear.column(0).iter().copied().collect(),
                    &format!("{}∘A", v.label),
                ))
            }
            (Some(PotentialCoords::HyperboloidLinear { coeffs }), Isometry::Lorentz { matrix }) => {
                // V = Σ c_μ X^μ, V∘A = Σ (Λᵀ c)_ν X^ν.
                let c = DMatrix::from_column_slice(self.dim + 1, 1, coeffs);
                let new = matrix.transpose() * c;
                let mut p = StaticPotential::hyperboloid_linear(
                    self.dim,
                    new.column(0).iter().copied().collect(),
                );
                p.label = format!("{}∘A", v.label);
                Ok(p)
            }
            (
                Some(PotentialCoords::FlatConstraints { f, alpha }),
                Isometry::Euclidean { rotation, translation },
            ) => {
                let new_f = f.as_ref().map(|(c, a)| {
                    let av = DMatrix::from_column_slice(self.dim, 1, a);
                    let shift: f64 = a.iter().zip(translation.iter()).map(|(x, y)| x * y).sum();
                    (
                        c + shift,
                        (rotation.transpose() * av).column(0).iter().copied().collect(),
                    )
                });
                let new_alpha = alpha.as_ref().map(|(c, omega)| {
                    let n = self.dim;
                    // c'_k = R^a_k (c_a + ω_{ia} T^i); ω' = Rᵀ ω R.
                    let om = DMatrix::from_fn(n, n, |i, a| omega[i][a]);
                    let cv = DMatrix::from_column_slice(n, 1, c);
                    let tv = DMatrix::from_column_slice(n, 1, translation);
                    let cprime = rotation.transpose() * (cv + om.transpose() * tv);
                    let oprime = rotation.transpose() * om * rotation;
                    let omega_new: Vec<Vec<f64>> = (0..n)
                        .map(|i| (0..n).map(|a| oprime[(i, a)]).collect())
                        .collect();
                    (cprime.column(0).iter().copied().collect(), omega_new)
                });
                Ok(StaticPotential::flat_constraints(
                    self.dim,
                    new_f,
                    new_alpha,
                    &format!("{}∘A", v.label),
                ))
            }
            _ => {
                // Generic composition through the chart map.
                let map: crate::tensorcalc::ArcMap = Arc::new(map);
                let f = v
                    .f
                    .as_ref()
                    .map(|f| -> ArcScalar {
                        Arc::new(crate::tensorcalc::ComposedScalar::new(map.clone(), f.clone()))
                    });
                let alpha = v.alpha.as_ref().map(|alpha| -> ArcTensor {
                    Arc::new(crate::tensorcalc::PullbackTensor::new(
                        map.clone(),
                        alpha.clone(),
                    ))
                });
                Ok(StaticPotential {
                    label: format!("{}∘A", v.label),
                    f,
                    alpha,
                    coords: None,
                })
            }
        }
    }

    /// Deterministic random chart points in an annulus, away from angular
    /// poles on the hyperbolic chart.
    pub fn random_points(&self, spec: &SampleSpec) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut out = Vec::with_capacity(spec.count);
        for _ in 0..spec.count {
            let r = rng.random_range(spec.r_range.0..spec.r_range.1);
            match self.kind {
                BackgroundKind::Flat => {
                    // Gaussian direction, normalized.
                    let mut v: Vec<f64> = (0..self.dim)
                        .map(|_| {
                            let u1: f64 = rng.random_range(1e-12..1.0);
                            let u2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                            (-2.0 * u1.ln()).sqrt() * u2.cos()
                        })
                        .collect();
                    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-12);
                    for c in v.iter_mut() {
                        *c *= r / norm;
                    }
                    out.push(v);
                }
                BackgroundKind::Hyperbolic => {
                    let mut p = Vec::with_capacity(self.dim);
                    p.push(r);
                    for _ in 0..self.dim - 2 {
                        p.push(rng.random_range(0.2..std::f64::consts::PI - 0.2));
                    }
                    p.push(rng.random_range(0.0..std::f64::consts::TAU));
                    out.push(p);
                }
            }
        }
        out
    }
}

/// Deterministic sampling specification.
#[derive(Debug, Clone)]
pub struct SampleSpec {
    pub count: usize,
    pub seed: u64,
    pub r_range: (f64, f64),
}

impl SampleSpec {
    pub fn new(count: usize, seed: u64, r_range: (f64, f64)) -> SampleSpec {
        SampleSpec {
            count,
            seed,
            r_range,
        }
    }
}

fn constant_jets(dim: usize, values: &[f64], order: usize) -> Result<Vec<Jet>, FieldError> {
    let shape = JetShape::get(dim, order)?;
    Ok(values
        .iter()
        .map(|&v| Jet::constant(shape.clone(), v))
        .collect())
}

/// Exact basis coordinates of a potential, enabling exact isometry actions.
#[derive(Debug, Clone)]
pub enum PotentialCoords {
    /// f = constant + linear·x on flat space.
    FlatAffine { constant: f64, linear: Vec<f64> },
    /// V = Σ c_μ V₍μ₎ in the embedding-coordinate basis of Hⁿ.
    HyperboloidLinear { coeffs: Vec<f64> },
    /// Constraints couple (f, α) with affine f and α_k = c_k + ω_{ik} x^i.
    FlatConstraints {
        f: Option<(f64, Vec<f64>)>,
        alpha: Option<(Vec<f64>, Vec<Vec<f64>>)>,
    },
}

/// A test section V: a function for the scal operator, a couple (f, α) for
/// the constraints operator.
#[derive(Clone)]
pub struct StaticPotential {
    pub label: String,
    pub f: Option<ArcScalar>,
    pub alpha: Option<ArcTensor>,
    pub coords: Option<PotentialCoords>,
}

impl StaticPotential {
    pub fn flat_affine(dim: usize, constant: f64, linear: Vec<f64>, label: &str) -> StaticPotential {
        let field = AffineScalar {
            dim,
            constant,
            linear: linear.clone(),
        };
        StaticPotential {
            label: label.to_string(),
            f: Some(Arc::new(field)),
            alpha: None,
            coords: Some(PotentialCoords::FlatAffine { constant, linear }),
        }
    }

    /// Σ c_μ V₍μ₎ with V₍₀₎ = cosh r and V₍ᵢ₎ = sinh r ξ^i.
    pub fn hyperboloid_linear(dim: usize, coeffs: Vec<f64>) -> StaticPotential {
        assert_eq!(coeffs.len(), dim + 1);
        let label = {
            let named: Vec<String> = coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(mu, c)| {
                    if (*c - 1.0).abs() < 1e-14 {
                        format!("V({mu})")
                    } else {
                        format!("{c}·V({mu})")
                    }
                })
                .collect();
            if named.is_empty() {
                "0".to_string()
            } else {
                named.join("+")
            }
        };
        StaticPotential {
            label,
            f: Some(Arc::new(EmbeddingLinearScalar {
                dim,
                coeffs: coeffs.clone(),
            })),
            alpha: None,
            coords: Some(PotentialCoords::HyperboloidLinear { coeffs }),
        }
    }

    pub fn flat_constraints(
        dim: usize,
        f: Option<(f64, Vec<f64>)>,
        alpha: Option<(Vec<f64>, Vec<Vec<f64>>)>,
        label: &str,
    ) -> StaticPotential {
        let f_field: Option<ArcScalar> = f.as_ref().map(|(c, a)| -> ArcScalar {
            Arc::new(AffineScalar {
                dim,
                constant: *c,
                linear: a.clone(),
            })
        });
        let alpha_field: Option<ArcTensor> = alpha.as_ref().map(|(c, omega)| -> ArcTensor {
            Arc::new(AffineFormField {
                dim,
                constant: c.clone(),
                omega: omega.clone(),
            })
        });
        StaticPotential {
            label: label.to_string(),
            f: f_field,
            alpha: alpha_field,
            coords: Some(PotentialCoords::FlatConstraints { f, alpha }),
        }
    }

    /// Potential from arbitrary fields (no exact basis coordinates).
    pub fn from_fields(
        label: &str,
        f: Option<ArcScalar>,
        alpha: Option<ArcTensor>,
    ) -> StaticPotential {
        StaticPotential {
            label: label.to_string(),
            f,
            alpha,
            coords: None,
        }
    }
}

/// f = c + a·x with exact jets.
struct AffineScalar {
    dim: usize,
    constant: f64,
    linear: Vec<f64>,
}

impl ScalarField for AffineScalar {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, point: &[f64], order: usize) -> Result<Jet, FieldError> {
        let shape = JetShape::get(self.dim, order)?;
        let mut acc = Jet::constant(shape.clone(), self.constant);
        for (i, &a) in self.linear.iter().enumerate() {
            if a != 0.0 {
                acc = acc.add_scaled(a, &Jet::variable(shape.clone(), i, point[i]));
            }
        }
        Ok(acc)
    }
}

/// α_k = c_k + ω_{ik} x^i with exact jets (covariant components).
struct AffineFormField {
    dim: usize,
    constant: Vec<f64>,
    omega: Vec<Vec<f64>>,
}

impl TensorField for AffineFormField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rank(&self) -> usize {
        1
    }

    fn eval(&self, point: &[f64], order: usize) -> Result<TensorJets, FieldError> {
        let shape = JetShape::get(self.dim, order)?;
        let jets = (0..self.dim)
            .map(|k| {
                let mut acc = Jet::constant(shape.clone(), self.constant[k]);
                for i in 0..self.dim {
                    let w = self.omega[i][k];
                    if w != 0.0 {
                        acc = acc.add_scaled(w, &Jet::variable(shape.clone(), i, point[i]));
                    }
                }
                acc
            })
            .collect();
        Ok(TensorJets::new(self.dim, 1, jets))
    }
}

/// Σ c_μ X^μ of the hyperboloid embedding coordinates, as a scalar field on
/// the polar chart.
struct EmbeddingLinearScalar {
    dim: usize,
    coeffs: Vec<f64>,
}

impl ScalarField for EmbeddingLinearScalar {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, point: &[f64], order: usize) -> Result<Jet, FieldError> {
        let seeds = hyperboloid::chart_seeds(point, order)?;
        let lifted = hyperboloid::lift_jets(&seeds);
        let mut acc = lifted[0].scale(self.coeffs[0]);
        for (c, l) in self.coeffs.iter().zip(lifted.iter()).skip(1) {
            acc = acc.add_scaled(*c, l);
        }
        Ok(acc)
    }
}

/// Polar-chart hyperbolic metric diag(1, sinh²r, sinh²r sin²θ₁, …).
fn hyperbolic_metric_field(dim: usize) -> ExprTensor {
    let mut diag = Vec::with_capacity(dim);
    diag.push("1".to_string());
    let mut prefix = "sinh(x1)^2".to_string();
    for k in 0..dim - 1 {
        diag.push(prefix.clone());
        if k < dim - 2 {
            prefix = format!("{prefix}*sin(x{})^2", k + 2);
        }
    }
    let exprs: Vec<_> = diag
        .iter()
        .map(|t| parse(t, dim).expect("builtin metric expression parses"))
        .collect();
    ExprTensor::diagonal(dim, exprs).expect("builtin metric is well-formed")
}
