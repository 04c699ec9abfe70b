//! Diffeomorphisms asymptotic to the identity, Ψ = exp∘ζ: pullback of
//! sections, the remainders R₁ = (Ψ*−Id−𝓛_ζ)h₀ + (Ψ*−Id)e₁ and R₂ = 𝕌(V,R₁),
//! sup-norms along connecting geodesics, and the quasi-isometry certificate.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::backgrounds::{Background, BackgroundKind, OperatorKind, SampleSpec, StaticPotential};
use crate::charge::{charge_integrand, Perturbation};
use crate::expr::Jet;
use crate::tensorcalc::{
    cov_derivative, cov_derivative_vector, pullback_at, ArcTensor, FieldError,
    PointMap, TensorField, TensorJets,
};

/// Ψ(x) = exp_x(ζ(x)) with ζ a vector field given by its chart components.
#[derive(Clone)]
pub struct DiffeoAtInfinity {
    zeta: ArcTensor,
    bg: Background,
    certificate: Option<Certificate>,
}

impl DiffeoAtInfinity {
    pub fn new(bg: Background, zeta: ArcTensor) -> DiffeoAtInfinity {
        assert_eq!(zeta.rank(), 1, "ζ must be a vector field");
        assert_eq!(zeta.dim(), bg.dim());
        DiffeoAtInfinity {
            zeta,
            bg,
            certificate: None,
        }
    }

    pub fn zeta(&self) -> &ArcTensor {
        &self.zeta
    }

    pub fn background(&self) -> &Background {
        &self.bg
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        self.certificate.as_ref()
    }

    /// Scale the field: Ψ_t = exp∘(tζ).
    pub fn scaled(&self, t: f64) -> DiffeoAtInfinity {
        DiffeoAtInfinity {
            zeta: Arc::new(crate::tensorcalc::LinCombTensor::new(vec![(
                t,
                self.zeta.clone(),
            )])),
            bg: self.bg.clone(),
            certificate: None,
        }
    }

    /// Run the quasi-isometry check and store the certificate.
    pub fn certify(mut self, spec: &SampleSpec) -> Result<DiffeoAtInfinity, FieldError> {
        let cert = check_quasi_isometry(&self, spec)?;
        if !cert.certified {
            return Err(FieldError::Unsupported(format!(
                "certification failed: eigenvalues of Ψ*g₀ against g₀ in [{:.4}, {:.4}] at {:?}",
                cert.eig_min, cert.eig_max, cert.worst_point
            )));
        }
        self.certificate = Some(cert);
        Ok(self)
    }
}

impl PointMap for DiffeoAtInfinity {
    fn dim(&self) -> usize {
        self.bg.dim()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        let z = self.zeta.eval(x, 0)?;
        let v: Vec<f64> = z.jets().iter().map(|j| j.value()).collect();
        self.bg.exp_map(x, &v)
    }

    fn jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>, FieldError> {
        let z = self.zeta.eval(x, order)?;
        self.bg.exp_map_jets(x, z.jets())
    }
}

/// The section h₀ + e as a pair of fields (g-part mandatory).
#[derive(Clone)]
pub struct SectionFields {
    pub g: ArcTensor,
    pub k: Option<ArcTensor>,
}

impl SectionFields {
    /// h₀ + e over a background (k-part included for the constraints kind).
    pub fn background_plus(
        bg: &Background,
        e: &Perturbation,
        kind: OperatorKind,
    ) -> SectionFields {
        let g = Arc::new(crate::tensorcalc::LinCombTensor::new(vec![
            (1.0, bg.g0().clone()),
            (1.0, e.gdot.clone()),
        ])) as ArcTensor;
        let k = match kind {
            OperatorKind::Scal => None,
            OperatorKind::Constraints => {
                let mut terms: Vec<(f64, ArcTensor)> = vec![(bg.lambda0(), bg.g0().clone())];
                if let Some(kdot) = &e.kdot {
                    terms.push((1.0, kdot.clone()));
                }
                Some(Arc::new(crate::tensorcalc::LinCombTensor::new(terms)) as ArcTensor)
            }
        };
        SectionFields { g, k }
    }
}

/// e₂ = Ψ*(h₀ + e₁) − h₀ as perturbation fields.
pub fn pullback_perturbation(
    psi: &Arc<DiffeoAtInfinity>,
    e1: &Perturbation,
    kind: OperatorKind,
) -> Perturbation {
    let bg = psi.background();
    let h = SectionFields::background_plus(bg, e1, kind);
    let map: crate::tensorcalc::ArcMap = psi.clone();
    let gdot = Arc::new(crate::tensorcalc::LinCombTensor::new(vec![
        (
            1.0,
            Arc::new(crate::tensorcalc::PullbackTensor::new(map.clone(), h.g)) as ArcTensor,
        ),
        (-1.0, bg.g0().clone()),
    ])) as ArcTensor;
    let kdot = h.k.map(|k| {
        Arc::new(crate::tensorcalc::LinCombTensor::new(vec![
            (
                1.0,
                Arc::new(crate::tensorcalc::PullbackTensor::new(map.clone(), k)) as ArcTensor,
            ),
            (-bg.lambda0(), bg.g0().clone()),
        ])) as ArcTensor
    });
    Perturbation::pullback(gdot, kdot, "psi-pullback")
}

/// 𝓛_ζ h₀ as perturbation fields: (𝓛_ζ g₀, λ₀ 𝓛_ζ g₀).
pub fn lie_h0_perturbation(bg: &Background, zeta: &ArcTensor, kind: OperatorKind) -> Perturbation {
    let lie_g = Arc::new(crate::tensorcalc::LieDerivativeTensor::new(
        zeta.clone(),
        bg.g0().clone(),
    )) as ArcTensor;
    let kdot = match kind {
        OperatorKind::Scal => None,
        OperatorKind::Constraints => Some(Arc::new(crate::tensorcalc::LinCombTensor::new(vec![
            (bg.lambda0(), lie_g.clone()),
        ])) as ArcTensor),
    };
    Perturbation::explicit(lie_g, kdot)
}

/// R₁ = Ψ*(h₀+e₁) − (h₀+e₁) − 𝓛_ζ h₀ as perturbation fields, computed
/// exactly from pullbacks and the Lie derivative (no truncation).
pub fn r1_perturbation(
    psi: &Arc<DiffeoAtInfinity>,
    e1: &Perturbation,
    kind: OperatorKind,
) -> Perturbation {
    let bg = psi.background();
    let e2 = pullback_perturbation(psi, e1, kind);
    let lie = lie_h0_perturbation(bg, psi.zeta(), kind);
    let gdot = Arc::new(crate::tensorcalc::LinCombTensor::new(vec![
        (1.0, e2.gdot.clone()),
        (-1.0, e1.gdot.clone()),
        (-1.0, lie.gdot.clone()),
    ])) as ArcTensor;
    let kdot = match kind {
        OperatorKind::Scal => None,
        OperatorKind::Constraints => {
            let mut terms: Vec<(f64, ArcTensor)> = vec![(1.0, e2.kdot.clone().expect("kind"))];
            if let Some(k1) = &e1.kdot {
                terms.push((-1.0, k1.clone()));
            }
            terms.push((-1.0, lie.kdot.clone().expect("kind")));
            Some(Arc::new(crate::tensorcalc::LinCombTensor::new(terms)) as ArcTensor)
        }
    };
    Perturbation::explicit(gdot, kdot)
}

/// The flat-cartesian coordinate expression for R₁ (g-part):
/// Σ_k ∂_iζ^k ∂_jζ^k + e(x+ζ)-terms, used as a cross-check of the pullback
/// path.
pub fn r1_flat_coordinate_gpart(
    bg: &Background,
    zeta: &ArcTensor,
    e1_gdot: &ArcTensor,
    point: &[f64],
    order: usize,
) -> Result<TensorJets, FieldError> {
    assert_eq!(bg.kind(), BackgroundKind::Flat);
    let n = bg.dim();
    let z = zeta.eval(point, order + 1)?;
    let dz = z.partial_derivative()?; // [i, k] = ∂_i ζ^k
    // Map jets x + ζ for composing e at the shifted point.
    let shape = crate::expr::JetShape::get(n, order + 1)?;
    let map_jets: Vec<Jet> = (0..n)
        .map(|i| Jet::variable(shape.clone(), i, point[i]).add(z.jet(&[i])))
        .collect();
    let y: Vec<f64> = map_jets.iter().map(|j| j.value()).collect();
    let e_at_y = e1_gdot.eval(&y, order)?;
    let e_shift = TensorJets::from_fn(n, 2, |idx| {
        Jet::compose(e_at_y.jet(idx), &map_jets).expect("composition dims agree")
    });
    let e_here = e1_gdot.eval(point, order)?;
    Ok(TensorJets::from_fn(n, 2, |idx| {
        let (i, j) = (idx[0], idx[1]);
        // Σ_k ∂_iζ^k ∂_jζ^k
        let mut acc: Option<Jet> = None;
        for k in 0..n {
            let term = dz.jet(&[i, k]).mul(dz.jet(&[j, k]));
            acc = Some(match acc {
                Some(s) => s.add(&term),
                None => term,
            });
        }
        let mut acc = acc.expect("dim >= 1");
        // e_{ij}(x+ζ) − e_{ij}(x)
        acc = acc.add(&e_shift.jet(&[i, j]).sub(e_here.jet(&[i, j])));
        // e_{aj}(x+ζ)∂_iζ^a + e_{ib}(x+ζ)∂_jζ^b
        for a in 0..n {
            acc = acc.add(&e_shift.jet(&[a, j]).mul(dz.jet(&[i, a])));
            acc = acc.add(&e_shift.jet(&[i, a]).mul(dz.jet(&[j, a])));
        }
        // e_{ab}(x+ζ)∂_iζ^a∂_jζ^b
        for a in 0..n {
            for b in 0..n {
                acc = acc.add(
                    &e_shift
                        .jet(&[a, b])
                        .mul(dz.jet(&[i, a]))
                        .mul(dz.jet(&[j, b])),
                );
            }
        }
        acc
    }))
}

/// R₂ = 𝕌(V, R₁) at a point, together with the pointwise linearity identity
/// 𝕌(V,e₂) − 𝕌(V,e₁) = 𝕌(V,𝓛_ζh₀) + R₂ (returned as a relative residual).
pub struct R2Value {
    pub covector: Vec<f64>,
    pub identity_residual: f64,
}

pub fn remainder_r2(
    psi: &Arc<DiffeoAtInfinity>,
    e1: &Perturbation,
    v: &StaticPotential,
    kind: OperatorKind,
    point: &[f64],
) -> Result<R2Value, FieldError> {
    let bg = psi.background();
    let r1 = r1_perturbation(psi, e1, kind);
    let u_r1 = charge_integrand(kind, bg, v, &r1, point, 0)?;
    let e2 = pullback_perturbation(psi, e1, kind);
    let u_e2 = charge_integrand(kind, bg, v, &e2, point, 0)?;
    let u_e1 = charge_integrand(kind, bg, v, e1, point, 0)?;
    let lie = lie_h0_perturbation(bg, psi.zeta(), kind);
    let u_lie = charge_integrand(kind, bg, v, &lie, point, 0)?;
    let n = bg.dim();
    let mut residual = 0.0f64;
    let mut scale = 1e-30f64;
    for j in 0..n {
        let lhs = u_e2.value(&[j]) - u_e1.value(&[j]);
        let rhs = u_lie.value(&[j]) + u_r1.value(&[j]);
        residual = residual.max((lhs - rhs).abs());
        scale = scale
            .max(u_e2.value(&[j]).abs())
            .max(u_e1.value(&[j]).abs())
            .max(rhs.abs())
            .max(1.0);
    }
    Ok(R2Value {
        covector: (0..n).map(|j| u_r1.value(&[j])).collect(),
        identity_residual: residual / scale,
    })
}

/// ‖t‖_ℓ(x): the maximum of |t|_ℓ = Σ_{j≤ℓ} |∇^j t|₀ over sample times of the
/// geodesic t ↦ exp_x(t ζ(x)).
pub fn sup_norm_along_geodesic(
    bg: &Background,
    t: &dyn TensorField,
    x: &[f64],
    zeta_at_x: &[f64],
    ell: usize,
    samples: usize,
) -> Result<f64, FieldError> {
    let mut sup = f64::NEG_INFINITY;
    for k in 0..=samples {
        let s = k as f64 / samples as f64;
        let scaled: Vec<f64> = zeta_at_x.iter().map(|z| s * z).collect();
        let y = bg.exp_map(x, &scaled)?;
        sup = sup.max(pointwise_norm_ell(bg, t, &y, ell)?);
    }
    Ok(sup)
}

/// |t|_ℓ(x) = Σ_{j≤ℓ} |∇^j t|₀(x).
pub fn pointwise_norm_ell(
    bg: &Background,
    t: &dyn TensorField,
    x: &[f64],
    ell: usize,
) -> Result<f64, FieldError> {
    let jets = t.eval(x, ell)?;
    let metric = bg.metric_jets(x, 0)?;
    let mut total = metric.norm_value(&jets.truncated(0)?);
    if ell == 0 {
        return Ok(total);
    }
    let conn = bg.connection(x, ell - 1)?;
    let mut current = jets;
    for _ in 1..=ell {
        current = cov_derivative(&current, &conn)?;
        total += metric.norm_value(&current.truncated(0)?);
    }
    Ok(total)
}

/// |ζ|_ℓ for a contravariant vector field: the first covariant derivative
/// uses the vector rule, the remaining ones act on the mixed tensor stored
/// with the contravariant slot lowered (metric compatibility makes the norm
/// agree).
pub fn vector_norm_ell(
    bg: &Background,
    zeta: &dyn TensorField,
    x: &[f64],
    ell: usize,
) -> Result<f64, FieldError> {
    let jets = zeta.eval(x, ell)?;
    let metric = bg.metric_jets(x, ell)?;
    let lowered = metric.lower_vector(&jets);
    pointwise_norm_from_jets(bg, lowered, x, ell)
}

fn pointwise_norm_from_jets(
    bg: &Background,
    jets: TensorJets,
    x: &[f64],
    ell: usize,
) -> Result<f64, FieldError> {
    let metric = bg.metric_jets(x, 0)?;
    let mut total = metric.norm_value(&jets.truncated(0)?);
    if ell == 0 {
        return Ok(total);
    }
    let conn = bg.connection(x, ell - 1)?;
    let mut current = jets;
    for _ in 1..=ell {
        current = cov_derivative(&current, &conn)?;
        total += metric.norm_value(&current.truncated(0)?);
    }
    Ok(total)
}

/// Quasi-isometry certificate: generalized eigenvalues of Ψ*g₀ against g₀
/// over a sample, plus the hypothesis quantities κ₀|ζ|₀² and |∇ζ|₀.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub certified: bool,
    pub eig_min: f64,
    pub eig_max: f64,
    pub worst_point: Vec<f64>,
    pub sup_kappa_zeta_sq: f64,
    pub sup_grad_zeta: f64,
    pub samples: usize,
}

pub fn check_quasi_isometry(
    psi: &DiffeoAtInfinity,
    spec: &SampleSpec,
) -> Result<Certificate, FieldError> {
    let bg = psi.background();
    let n = bg.dim();
    let points = bg.random_points(spec);
    let mut eig_min = f64::INFINITY;
    let mut eig_max = f64::NEG_INFINITY;
    let mut worst_point = Vec::new();
    let mut worst_defect = -1.0f64;
    let mut sup_kappa = 0.0f64;
    let mut sup_grad = 0.0f64;
    for x in &points {
        let pulled = pullback_at(psi, bg.g0().as_ref(), x, 0)?;
        let metric = bg.metric_jets(x, 1)?;
        let a = DMatrix::from_fn(n, n, |i, j| pulled.value(&[i, j]));
        let b = DMatrix::from_fn(n, n, |i, j| metric.g.value(&[i, j]));
        let chol = b
            .cholesky()
            .ok_or_else(|| FieldError::SingularMetric("g₀ not positive definite".into()))?;
        let l_inv = chol
            .l()
            .try_inverse()
            .ok_or_else(|| FieldError::SingularMetric("Cholesky factor singular".into()))?;
        let m = &l_inv * a * l_inv.transpose();
        let sym = nalgebra::SymmetricEigen::new(m);
        for &lambda in sym.eigenvalues.iter() {
            eig_min = eig_min.min(lambda);
            eig_max = eig_max.max(lambda);
            let defect = (lambda - 1.0).abs();
            if defect > worst_defect {
                worst_defect = defect;
                worst_point = x.clone();
            }
        }
        // Hypothesis quantities.
        let z = psi.zeta().eval(x, 1)?;
        let z_low = metric.lower_vector(&z.truncated(1)?);
        let normz2 = metric.inner(&z_low, &z_low).value().max(0.0);
        sup_kappa = sup_kappa.max(bg.kappa_sup() * normz2);
        let conn = bg.connection(x, 0)?;
        let grad = cov_derivative_vector(&z, &conn)?; // [a, j] = ∇_a ζ^j
        // |∇ζ|² = g^{ab} g_{jk} ∇_aζ^j ∇_bζ^k.
        let grad_low = TensorJets::from_fn(n, 2, |idx| {
            let (aa, j) = (idx[0], idx[1]);
            let mut acc: Option<Jet> = None;
            for kk in 0..n {
                let term = metric
                    .g
                    .jet(&[j, kk])
                    .truncated(0)
                    .expect("downward")
                    .mul(grad.jet(&[aa, kk]));
                acc = Some(match acc {
                    Some(s) => s.add(&term),
                    None => term,
                });
            }
            acc.expect("dim >= 1")
        });
        let g2 = metric.inner(&grad_low.truncated(0)?, &grad_low.truncated(0)?).value();
        sup_grad = sup_grad.max(g2.max(0.0).sqrt());
    }
    let certified = eig_min >= 0.25 - 1e-12 && eig_max <= 4.0 + 1e-12;
    Ok(Certificate {
        certified,
        eig_min,
        eig_max,
        worst_point,
        sup_kappa_zeta_sq: sup_kappa,
        sup_grad_zeta: sup_grad,
        samples: points.len(),
    })
}

/// Per-draw measurement of the R₁ control inequality
/// |∇^ℓ R₁|₀ ≤ C |ζ|_{ℓ+1} (|ζ|_{ℓ+1} ‖h₀‖_{ℓ+2} + ‖e₁‖_{ℓ+1}):
/// returns (|∇^ℓ R₁|₀, bound expression).
pub fn r1_bound_sample(
    psi: &Arc<DiffeoAtInfinity>,
    e1: &Perturbation,
    kind: OperatorKind,
    x: &[f64],
    ell: usize,
    geodesic_samples: usize,
) -> Result<(f64, f64), FieldError> {
    let bg = psi.background();
    let r1 = r1_perturbation(psi, e1, kind);
    // |∇^ℓ R₁|₀ of the g-part (the k-part repeats the same structure for
    // k₀ = λ₀ g₀ and is dominated by the g-part bound).
    let jets = r1.gdot.eval(x, ell)?;
    let lhs = if ell == 0 {
        bg.metric_jets(x, 0)?.norm_value(&jets)
    } else {
        let conn = bg.connection(x, ell - 1)?;
        let mut current = jets;
        for _ in 1..=ell {
            current = cov_derivative(&current, &conn)?;
        }
        bg.metric_jets(x, 0)?.norm_value(&current.truncated(0)?)
    };
    let zeta_norm = vector_norm_ell(bg, psi.zeta().as_ref(), x, ell + 1)?;
    let z = psi.zeta().eval(x, 0)?;
    let zeta_at_x: Vec<f64> = z.jets().iter().map(|j| j.value()).collect();
    let h0_norm = sup_norm_along_geodesic(
        bg,
        bg.g0().as_ref(),
        x,
        &zeta_at_x,
        ell + 2,
        geodesic_samples,
    )?;
    let e1_norm = sup_norm_along_geodesic(
        bg,
        e1.gdot.as_ref(),
        x,
        &zeta_at_x,
        ell + 1,
        geodesic_samples,
    )?;
    let bound = zeta_norm * (zeta_norm * h0_norm + e1_norm);
    Ok((lhs, bound))
}
