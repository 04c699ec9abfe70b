//! The operator stack: Φ for both kinds, its linearization at h₀, the formal
//! adjoint, the charge integrand 𝕌 (full and reduced paths) and the exact
//! quadratic remainder Q.
//!
//! Conventions: all tensors fully covariant; traces, divergences and index
//! raising with respect to g₀ unless a moving metric is stated; geometric
//! Laplacian Δ₀ = −∇^i∇_i; (A∘B)_{ij} = g₀^{kl} A_{ik} B_{lj}.

use crate::backgrounds::{Background, OperatorKind, StaticPotential};
use crate::expr::Jet;
use crate::tensorcalc::{
    christoffel, cov_derivative, cov_divergence, curvature, lie_derivative, trace, Connection,
    FieldError, MetricJets, TensorField, TensorJets,
};

use super::Perturbation;

/// Φ output at a point: a scalar jet plus, for the constraints kind, the
/// momentum covector jets.
#[derive(Debug, Clone)]
pub struct PhiValue {
    pub h: Jet,
    pub m: Option<TensorJets>,
}

/// DΦ₀* output at a point: symmetric 2-tensor jets; the constraints kind has
/// a second component (the k-slot adjoint).
#[derive(Debug, Clone)]
pub struct AdjointValue {
    pub g_part: TensorJets,
    pub k_part: Option<TensorJets>,
}

impl AdjointValue {
    /// Pointwise g₀-norm of the full adjoint (value level).
    pub fn norm(&self, metric: &MetricJets) -> f64 {
        let mut s = metric.inner(&self.g_part, &self.g_part).value();
        if let Some(k) = &self.k_part {
            s += metric.inner(k, k).value();
        }
        s.max(0.0).sqrt()
    }
}

/// Jets of a potential V = (f, α) at a point; missing parts are zero.
pub struct PotentialJets {
    pub f: Jet,
    pub alpha: Option<TensorJets>,
}

pub fn potential_jets(
    v: &StaticPotential,
    bg: &Background,
    point: &[f64],
    order: usize,
) -> Result<PotentialJets, FieldError> {
    let shape = crate::expr::JetShape::get(bg.dim(), order)?;
    let f = match &v.f {
        Some(field) => field.jet(point, order)?,
        None => Jet::constant(shape, 0.0),
    };
    let alpha = match &v.alpha {
        Some(field) => Some(field.eval(point, order)?),
        None => None,
    };
    Ok(PotentialJets { f, alpha })
}

/// ⟨V, Φ-type output⟩₀ = f·h + g₀⁻¹(α, m).
pub fn pair_potential_phi(v: &PotentialJets, phi: &PhiValue, metric: &MetricJets) -> Jet {
    let mut acc = v.f.mul(&phi.h);
    if let (Some(alpha), Some(m)) = (&v.alpha, &phi.m) {
        acc = acc.add(&metric.inner(alpha, m));
    }
    acc
}

/// Φ of data (g, k) at a point, to jet order `order`:
/// scal: Scal(g); constraints: (Scal^g + (tr_g k)² − |k|²_g, 2(div_g k − d tr_g k)),
/// every trace and divergence with respect to g itself.
pub fn evaluate_phi(
    kind: OperatorKind,
    g: &dyn TensorField,
    k: Option<&dyn TensorField>,
    point: &[f64],
    order: usize,
) -> Result<PhiValue, FieldError> {
    let g_jets = g.eval(point, order + 2)?;
    let k_jets = match (kind, k) {
        (OperatorKind::Scal, _) => None,
        (OperatorKind::Constraints, Some(k)) => Some(k.eval(point, order + 1)?),
        (OperatorKind::Constraints, None) => {
            return Err(FieldError::Shape(
                "constraints operator needs the second fundamental form".into(),
            ));
        }
    };
    phi_from_jets(kind, g_jets, k_jets, order)
}

/// Φ from raw jets: g at order+2, k at order+1.
pub fn phi_from_jets(
    kind: OperatorKind,
    g_jets: TensorJets,
    k_jets: Option<TensorJets>,
    order: usize,
) -> Result<PhiValue, FieldError> {
    let curv = curvature(g_jets.clone())?;
    let scal = curv.scalar.truncated(order)?;
    match kind {
        OperatorKind::Scal => Ok(PhiValue { h: scal, m: None }),
        OperatorKind::Constraints => {
            let k = k_jets.expect("checked by caller");
            let conn = christoffel(g_jets.truncated(order + 1)?)?;
            let metric = &conn.metric;
            let tr_k = trace(&k, metric);
            let k_up = metric.raise_all(&k.truncated(metric.order())?);
            let norm2_k = {
                let mut acc: Option<Jet> = None;
                for (a, b) in k_up.jets().iter().zip(k.jets().iter()) {
                    let term = a.mul(b);
                    acc = Some(match acc {
                        Some(s) => s.add(&term),
                        None => term,
                    });
                }
                acc.expect("nonempty")
            };
            let h = scal
                .add(&tr_k.mul(&tr_k).truncated(order)?)
                .sub(&norm2_k.truncated(order)?);
            // Momentum: 2(div_g k − d tr_g k).
            let div_k = cov_divergence(&k, &conn)?; // order: order
            let d_tr = gradient_covector(&tr_k)?;
            let m = div_k.sub(&d_tr.truncated(div_k.order())?).scale(2.0);
            Ok(PhiValue {
                h,
                m: Some(m.truncated(order)?),
            })
        }
    }
}

/// Covector of first derivatives of a scalar jet (one order lower).
fn gradient_covector(f: &Jet) -> Result<TensorJets, FieldError> {
    let n = f.dim();
    Ok(TensorJets::new(
        n,
        1,
        (0..n)
            .map(|i| f.partial_jet(i))
            .collect::<Result<_, _>>()?,
    ))
}

/// Background data shared by the linear-level operators.
struct BackgroundJets {
    conn: Connection,
    ricci: TensorJets,
    k0: Option<TensorJets>,
    div_k0: Option<TensorJets>,
}

fn background_jets(
    kind: OperatorKind,
    bg: &Background,
    point: &[f64],
    order: usize,
) -> Result<BackgroundJets, FieldError> {
    // Christoffel jets at order+1 (two divergences may stack on top),
    // curvature at `order`; g₀ jets at order+2 feed both.
    let g0 = bg.g0().eval(point, order + 2)?;
    let curv = curvature(g0.clone())?;
    let conn = christoffel(g0)?;
    let (k0, div_k0) = match kind {
        OperatorKind::Scal => (None, None),
        OperatorKind::Constraints => {
            let k0 = conn.metric.g.scale(bg.lambda0());
            let div_k0 = cov_divergence(&k0, &conn)?;
            (Some(k0), Some(div_k0))
        }
    };
    Ok(BackgroundJets {
        conn,
        ricci: curv.ricci.truncated(order)?,
        k0,
        div_k0,
    })
}

/// P := Ric₀ − 2 k₀∘k₀ + 2 (tr k₀) k₀ (the ġ-coupling tensor).
fn coupling_tensor(b: &BackgroundJets) -> TensorJets {
    let mut p = b.ricci.clone();
    if let Some(k0) = &b.k0 {
        let metric = &b.conn.metric;
        let k0k0 = compose2(k0, k0, metric);
        let trk0 = trace(k0, metric);
        p = p
            .add_scaled(-2.0, &k0k0.truncated(p.order()).expect("downward"))
            .add(&k0.scale_jet(&trk0).scale(2.0).truncated(p.order()).expect("downward"));
    }
    p
}

/// (A∘B)_{ij} = g⁻¹^{kl} A_{ik} B_{lj}.
fn compose2(a: &TensorJets, b: &TensorJets, metric: &MetricJets) -> TensorJets {
    let n = a.dim();
    let b_up = metric.raise_slot(b, 0); // B^l_j in slot layout [l, j]
    TensorJets::from_fn(n, 2, |idx| {
        let (i, j) = (idx[0], idx[1]);
        let mut acc: Option<Jet> = None;
        for l in 0..n {
            let term = a.jet(&[i, l]).mul(b_up.jet(&[l, j]));
            acc = Some(match acc {
                Some(s) => s.add(&term),
                None => term,
            });
        }
        acc.expect("dim >= 1")
    })
}

/// ι_w t for a contravariant w: (ι_w t)_{J} = w^i t_{i J}.
fn iota(w_up: &TensorJets, t: &TensorJets) -> TensorJets {
    let n = t.dim();
    let rank = t.rank() - 1;
    TensorJets::from_fn(n, rank, |rest| {
        let mut idx = vec![0usize; rest.len() + 1];
        idx[1..].copy_from_slice(rest);
        let mut acc: Option<Jet> = None;
        for i in 0..n {
            idx[0] = i;
            let term = w_up.jet(&[i]).mul(t.jet(&idx));
            acc = Some(match acc {
                Some(s) => s.add(&term),
                None => term,
            });
        }
        acc.expect("dim >= 1")
    })
}

/// DΦ₀(e) at a point, to jet order `order`.
pub fn linearized_phi(
    kind: OperatorKind,
    bg: &Background,
    e: &Perturbation,
    point: &[f64],
    order: usize,
) -> Result<PhiValue, FieldError> {
    let b = background_jets(kind, bg, point, order)?;
    let metric = &b.conn.metric;
    let gdot = e.gdot.eval(point, order + 2)?;
    let tr_g = trace(&gdot, metric);
    let div_g = cov_divergence(&gdot, &b.conn)?; // order+1
    let divdiv = cov_divergence(&div_g, &b.conn)?.as_scalar().clone(); // order
    let p = coupling_tensor(&b);
    let inner_pg = metric.inner(&p, &gdot.truncated(p.order())?);
    match kind {
        OperatorKind::Scal => {
            // div₀(div₀ e − d tr e) − ⟨Ric₀, e⟩₀.
            let dtr = gradient_covector(&tr_g)?;
            let div_dtr = cov_divergence(&dtr, &b.conn)?.as_scalar().clone();
            let h = divdiv
                .sub(&div_dtr.truncated(order)?)
                .sub(&inner_pg.truncated(order)?);
            Ok(PhiValue {
                h: h.truncated(order)?,
                m: None,
            })
        }
        OperatorKind::Constraints => {
            let kdot = match &e.kdot {
                Some(k) => k.eval(point, order + 1)?,
                None => TensorJets::zeros(bg.dim(), 2, order + 1)?,
            };
            let k0 = b.k0.as_ref().expect("constraints kind");
            let tr_k0 = trace(k0, metric);
            let tr_kdot = trace(&kdot, metric);
            let inner_k0_kdot = metric.inner(&k0.truncated(kdot.order())?, &kdot);
            // Hamiltonian part:
            // div div ġ + Δ tr ġ − ⟨P, ġ⟩ − 2⟨k₀, k̇⟩ + 2 tr k₀ tr k̇,
            // with the geometric Laplacian: Δ f = −∇^i∂_i f = −div₀ df.
            let dtr = gradient_covector(&tr_g)?;
            let lap_tr = cov_divergence(&dtr, &b.conn)?.as_scalar().neg();
            let h = divdiv
                .add(&lap_tr.truncated(order)?)
                .sub(&inner_pg.truncated(order)?)
                .add_scaled(-2.0, &inner_k0_kdot.truncated(order)?)
                .add(
                    &tr_k0
                        .mul(&tr_kdot)
                        .scale(2.0)
                        .truncated(order)?,
                );
            // Momentum part:
            // ι_{∇tr ġ} k₀ − k₀^{ij} ∇ġ_{ij} − 2(div(ġ∘k₀) − d⟨k₀,ġ⟩) + 2(div k̇ − d tr k̇).
            let ord1 = order; // covector jets order
            let grad_tr_up = metric.raise_vector(&gradient_covector(&tr_g)?);
            let term1 = iota(&grad_tr_up, &k0.truncated(grad_tr_up.order())?);
            let nabla_g = cov_derivative(&gdot, &b.conn)?; // [a, i, j], order+1
            let k0_up = metric.raise_all(k0);
            let n = bg.dim();
            let term2 = TensorJets::from_fn(n, 1, |idx| {
                let a = idx[0];
                let mut acc: Option<Jet> = None;
                for i in 0..n {
                    for j in 0..n {
                        let term = k0_up.jet(&[i, j]).mul(nabla_g.jet(&[a, i, j]));
                        acc = Some(match acc {
                            Some(s) => s.add(&term),
                            None => term,
                        });
                    }
                }
                acc.expect("dim >= 1")
            });
            let g_comp_k0 = compose2(&gdot, k0, metric);
            let div_gk0 = cov_divergence(&g_comp_k0.truncated(order + 1)?, &b.conn)?;
            let inner_k0_g = metric.inner(k0, &gdot.truncated(k0.order())?);
            let d_inner = gradient_covector(&inner_k0_g)?;
            let div_kdot = cov_divergence(&kdot, &b.conn)?;
            let d_tr_kdot = gradient_covector(&tr_kdot)?;
            let m = term1
                .truncated(ord1)?
                .sub(&term2.truncated(ord1)?)
                .add_scaled(-2.0, &div_gk0.truncated(ord1)?)
                .add_scaled(2.0, &d_inner.truncated(ord1)?)
                .add_scaled(2.0, &div_kdot.truncated(ord1)?)
                .add_scaled(-2.0, &d_tr_kdot.truncated(ord1)?);
            Ok(PhiValue {
                h: h.truncated(order)?,
                m: Some(m),
            })
        }
    }
}

/// DΦ₀*(V) at a point, to jet order `order`.
pub fn adjoint_phi(
    kind: OperatorKind,
    bg: &Background,
    v: &StaticPotential,
    point: &[f64],
    order: usize,
) -> Result<AdjointValue, FieldError> {
    let b = background_jets(kind, bg, point, order)?;
    let metric = &b.conn.metric;
    let n = bg.dim();
    let vj = potential_jets(v, bg, point, order + 2)?;
    // Hessian and geometric Laplacian of f.
    let (hess, lap) = crate::tensorcalc::hessian_laplacian(&vj.f, &b.conn)?;
    let p = coupling_tensor(&b);
    let g_low = metric.g.truncated(order)?;
    let mut g_part = hess
        .truncated(order)?
        .add(&g_low.scale_jet(&lap.truncated(order)?))
        .sub(&p.truncated(order)?.scale_jet(&vj.f.truncated(order)?));
    match kind {
        OperatorKind::Scal => Ok(AdjointValue {
            g_part,
            k_part: None,
        }),
        OperatorKind::Constraints => {
            let k0 = b.k0.as_ref().expect("constraints kind");
            let alpha = match &vj.alpha {
                Some(a) => a.clone(),
                None => TensorJets::zeros(n, 1, order + 2)?,
            };
            let alpha_up = metric.raise_vector(&alpha);
            // α-terms of the g-part:
            // 𝓛_α k₀ − (div α) k₀ − (⟨∇α, k₀⟩ + ⟨α, div k₀⟩) g₀.
            let lie_k0 = lie_derivative(&alpha_up.truncated(order + 1)?, &k0.truncated(order + 1)?)?;
            let div_alpha = cov_divergence(&alpha, &b.conn)?.as_scalar().clone();
            let nabla_alpha = cov_derivative(&alpha, &b.conn)?;
            let inner_na_k0 = metric.inner(&nabla_alpha, &k0.truncated(nabla_alpha.order())?);
            let inner_a_divk0 = metric.inner(
                &alpha.truncated(order + 1)?,
                b.div_k0.as_ref().expect("constraints kind"),
            );
            let scalar_coeff = inner_na_k0.add(&inner_a_divk0.truncated(inner_na_k0.order())?);
            g_part = g_part
                .add(&lie_k0.truncated(order)?)
                .sub(&k0.truncated(order)?.scale_jet(&div_alpha.truncated(order)?))
                .sub(&g_low.scale_jet(&scalar_coeff.truncated(order)?));
            // k-part: −2 f (k₀ − tr k₀ g₀) − 𝓛_α g₀ + 2(div α) g₀.
            let tr_k0 = trace(k0, metric);
            let k0_minus = k0
                .truncated(order)?
                .sub(&g_low.scale_jet(&tr_k0.truncated(order)?));
            let lie_g0 = lie_derivative(
                &alpha_up.truncated(order + 1)?,
                &metric.g.truncated(order + 1)?,
            )?;
            let k_part = k0_minus
                .scale_jet(&vj.f.truncated(order)?)
                .scale(-2.0)
                .sub(&lie_g0.truncated(order)?)
                .add(&g_low.scale_jet(&div_alpha.truncated(order)?).scale(2.0));
            Ok(AdjointValue {
                g_part,
                k_part: Some(k_part),
            })
        }
    }
}

/// The charge integrand 𝕌(V, e) as covector jets of the requested order.
/// Consumes jets of V and e at order+1 only (the operator is first order in
/// each argument).
///
/// scal: 𝕌 = V(div₀e − d tr e) − ι_{∇V}e + (tr e) dV.
/// constraints: the full display including the k₀ couplings; with
/// k₀ = λ₀ g₀ the reduced path below is algebraically identical.
pub fn charge_integrand(
    kind: OperatorKind,
    bg: &Background,
    v: &StaticPotential,
    e: &Perturbation,
    point: &[f64],
    order: usize,
) -> Result<TensorJets, FieldError> {
    let g0 = bg.g0().eval(point, order + 1)?;
    let conn = christoffel(g0)?;
    let metric = &conn.metric;
    let vj = potential_jets(v, bg, point, order + 1)?;
    let gdot = e.gdot.eval(point, order + 1)?;
    let scal_part = scal_integrand(&vj.f, &gdot, &conn, order)?;
    match kind {
        OperatorKind::Scal => Ok(scal_part),
        OperatorKind::Constraints => {
            let n = bg.dim();
            let kdot = match &e.kdot {
                Some(k) => k.eval(point, order + 1)?,
                None => TensorJets::zeros(n, 2, order + 1)?,
            };
            let alpha = match &vj.alpha {
                Some(a) => a.clone(),
                None => TensorJets::zeros(n, 1, order + 1)?,
            };
            let alpha_up = metric.raise_vector(&alpha);
            let k0 = metric.g.scale(bg.lambda0());
            let tr_kdot = trace(&kdot, metric);
            let tr_gdot = trace(&gdot, metric);
            // 2(ι_α k̇ − (tr k̇) α) + (tr ġ) ι_α k₀ + ⟨k₀, ġ⟩ α − 2 ι_α (ġ∘k₀).
            let term_kdot = iota(&alpha_up, &kdot)
                .sub(&alpha.scale_jet(&tr_kdot))
                .scale(2.0);
            let term_trg = iota(&alpha_up, &k0).scale_jet(&tr_gdot);
            let inner_k0_g = metric.inner(&k0, &gdot);
            let term_inner = alpha.scale_jet(&inner_k0_g);
            let g_comp_k0 = compose2(&gdot, &k0, metric);
            let term_comp = iota(&alpha_up, &g_comp_k0).scale(2.0);
            let momentum = term_kdot
                .add(&term_trg)
                .add(&term_inner)
                .sub(&term_comp);
            Ok(scal_part.add(&momentum.truncated(order)?))
        }
    }
}

/// The scal-type block f(div₀ t − d tr t) − ι_{∇f}t + (tr t) df.
fn scal_integrand(
    f: &Jet,
    t: &TensorJets,
    conn: &Connection,
    order: usize,
) -> Result<TensorJets, FieldError> {
    let metric = &conn.metric;
    let div_t = cov_divergence(t, conn)?;
    let tr_t = trace(t, metric);
    let dtr = gradient_covector(&tr_t)?;
    let df = gradient_covector(f)?;
    let grad_f_up = metric.raise_vector(&df);
    let iota_grad = iota(&grad_f_up.truncated(order)?, &t.truncated(order)?);
    Ok(div_t
        .sub(&dtr.truncated(div_t.order())?)
        .scale_jet(&f.truncated(div_t.order())?)
        .truncated(order)?
        .sub(&iota_grad)
        .add(&df.truncated(order)?.scale_jet(&tr_t.truncated(order)?)))
}

/// Reduced constraints integrand, valid when k₀ = λ₀ g₀:
/// 𝕌 = (f div₀ − ι_{∇f})(ġ − (tr ġ) g₀) + 2 ι_α(k̇ − λ₀ ġ − tr(k̇ − λ₀ ġ) g₀).
pub fn charge_integrand_reduced(
    bg: &Background,
    v: &StaticPotential,
    e: &Perturbation,
    point: &[f64],
    order: usize,
) -> Result<TensorJets, FieldError> {
    let n = bg.dim();
    let g0 = bg.g0().eval(point, order + 1)?;
    let conn = christoffel(g0)?;
    let metric = &conn.metric;
    let vj = potential_jets(v, bg, point, order + 1)?;
    let gdot = e.gdot.eval(point, order + 1)?;
    let kdot = match &e.kdot {
        Some(k) => k.eval(point, order + 1)?,
        None => TensorJets::zeros(n, 2, order + 1)?,
    };
    // First block: (f div₀ − ι_{∇f}) applied to ġ − (tr ġ) g₀,
    // written without the +(tr t) df term (the trace of the argument is
    // handled by the subtraction itself).
    let tr_g = trace(&gdot, metric);
    let pi = gdot.sub(&metric.g.scale_jet(&tr_g));
    let div_pi = cov_divergence(&pi, &conn)?;
    let df = gradient_covector(&vj.f)?;
    let grad_f_up = metric.raise_vector(&df);
    let first = div_pi
        .scale_jet(&vj.f.truncated(div_pi.order())?)
        .truncated(order)?
        .sub(&iota(&grad_f_up.truncated(order)?, &pi.truncated(order)?));
    // Second block: 2 ι_α(π_k) with π_k = k̇ − λ₀ ġ − tr(k̇ − λ₀ ġ) g₀.
    let alpha = match &vj.alpha {
        Some(a) => a.clone(),
        None => TensorJets::zeros(n, 1, order + 1)?,
    };
    let alpha_up = metric.raise_vector(&alpha);
    let kd = kdot.add_scaled(-bg.lambda0(), &gdot);
    let tr_kd = trace(&kd, metric);
    let pik = kd.sub(&metric.g.scale_jet(&tr_kd));
    let second = iota(&alpha_up, &pik).scale(2.0).truncated(order)?;
    Ok(first.add(&second))
}

/// div₀ 𝕌(V, e) at a point (value); consumes order-1 jets of 𝕌.
pub fn div_charge_integrand(
    kind: OperatorKind,
    bg: &Background,
    v: &StaticPotential,
    e: &Perturbation,
    point: &[f64],
) -> Result<f64, FieldError> {
    let u = charge_integrand(kind, bg, v, e, point, 1)?;
    let conn = bg.connection(point, 0)?;
    Ok(cov_divergence(&u, &conn)?.as_scalar().value())
}

/// Q(V, e) = ⟨V, Φ(h₀+e) − Φ₀ − DΦ₀(e)⟩₀ at a point, by full nonlinear
/// evaluation minus the linear model; exact up to roundoff.
pub fn quadratic_remainder(
    kind: OperatorKind,
    bg: &Background,
    v: &StaticPotential,
    e: &Perturbation,
    point: &[f64],
) -> Result<f64, FieldError> {
    let n = bg.dim();
    let g_full = {
        let g0 = bg.g0().eval(point, 2)?;
        g0.add(&e.gdot.eval(point, 2)?)
    };
    let k_full = match kind {
        OperatorKind::Scal => None,
        OperatorKind::Constraints => {
            let k0 = bg.g0().eval(point, 1)?.scale(bg.lambda0());
            let kd = match &e.kdot {
                Some(k) => k.eval(point, 1)?,
                None => TensorJets::zeros(n, 2, 1)?,
            };
            Some(k0.add(&kd))
        }
    };
    let phi_full = phi_from_jets(kind, g_full, k_full, 0)?;
    let linear = linearized_phi(kind, bg, e, point, 0)?;
    let metric = bg.metric_jets(point, 0)?;
    let vj = potential_jets(v, bg, point, 0)?;
    // Φ(h₀+e) − Φ₀ − DΦ₀(e): the background momentum Φ₀^M vanishes for the
    // supported k₀ = λ₀ g₀ backgrounds.
    let shape = crate::expr::JetShape::get(n, 0)?;
    let h_rem = phi_full
        .h
        .sub(&Jet::constant(shape, bg.phi0(kind)))
        .sub(&linear.h);
    let m_rem = match (&phi_full.m, &linear.m) {
        (Some(full), Some(lin)) => Some(full.sub(&lin.truncated(0)?)),
        _ => None,
    };
    let q = pair_potential_phi(
        &vj,
        &PhiValue {
            h: h_rem,
            m: m_rem,
        },
        &metric,
    );
    Ok(q.value())
}

/// Pointwise residual of the defining identity of 𝕌:
/// ⟨V, DΦ₀(η)⟩ − div₀𝕌(V, η) − ⟨DΦ₀*V, η⟩, normalized by the magnitude of
/// the three terms. Returns (residual, scale).
pub fn definition_identity_residual(
    kind: OperatorKind,
    bg: &Background,
    v: &StaticPotential,
    e: &Perturbation,
    point: &[f64],
) -> Result<(f64, f64), FieldError> {
    let metric = bg.metric_jets(point, 0)?;
    let vj = potential_jets(v, bg, point, 0)?;
    let lin = linearized_phi(kind, bg, e, point, 0)?;
    let lhs = pair_potential_phi(&vj, &lin, &metric).value();
    let div_u = div_charge_integrand(kind, bg, v, e, point)?;
    let adj = adjoint_phi(kind, bg, v, point, 0)?;
    let gdot = e.gdot.eval(point, 0)?;
    let mut rhs2 = metric.inner(&adj.g_part, &gdot).value();
    if let Some(k_part) = &adj.k_part {
        let kdot = match &e.kdot {
            Some(k) => k.eval(point, 0)?,
            None => TensorJets::zeros(bg.dim(), 2, 0)?,
        };
        rhs2 += metric.inner(k_part, &kdot).value();
    }
    let residual = lhs - div_u - rhs2;
    let scale = 1.0 + lhs.abs() + div_u.abs() + rhs2.abs();
    Ok((residual, scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backgrounds::Background;
    use crate::expr::parse;
    use crate::tensorcalc::{ExprTensor, Symmetry};
    use std::sync::Arc;

    fn schwarzschild_like(dim: usize, expr: &str) -> Perturbation {
        let exprs: Vec<_> = (0..dim * dim)
            .map(|k| {
                if k % (dim + 1) == 0 {
                    parse(expr, dim).unwrap()
                } else {
                    parse("0", dim).unwrap()
                }
            })
            .collect();
        Perturbation::explicit(
            Arc::new(ExprTensor::new(dim, 2, exprs, Symmetry::Symmetric).unwrap()),
            None,
        )
    }

    #[test]
    fn phi_values_on_backgrounds() {
        // Flat: Scal(δ) = 0.
        let flat = Background::flat(3);
        let phi = evaluate_phi(OperatorKind::Scal, flat.g0().as_ref(), None, &[1.0, 2.0, 0.5], 0)
            .unwrap();
        assert!(phi.h.value().abs() < 1e-12);
        // Hyperbolic: Scal(g₀) = −6 with n = 3.
        let hyp = Background::hyperbolic(3);
        let phi = evaluate_phi(
            OperatorKind::Scal,
            hyp.g0().as_ref(),
            None,
            &[1.1, 0.7, 0.2],
            0,
        )
        .unwrap();
        assert!((phi.h.value() + 6.0).abs() < 1e-9);
    }

    #[test]
    fn constraints_phi_with_constant_lambda() {
        // (g, k) = (δ, λ₀ δ): Φ^H = 9λ₀² − 3λ₀² = 6λ₀², Φ^M = 0.
        let lambda = 0.7;
        let flat = Background::flat(3).with_lambda0(lambda);
        let k0 = flat.k0();
        let phi = evaluate_phi(
            OperatorKind::Constraints,
            flat.g0().as_ref(),
            Some(k0.as_ref()),
            &[0.3, -1.0, 2.0],
            0,
        )
        .unwrap();
        assert!((phi.h.value() - 6.0 * lambda * lambda).abs() < 1e-11);
        assert!(phi.m.unwrap().max_abs_value() < 1e-11);
        assert!((flat.phi0(OperatorKind::Constraints) - 6.0 * lambda * lambda).abs() < 1e-14);
    }

    #[test]
    fn linearized_scal_examples() {
        let flat = Background::flat(3);
        // e = c·δ constant: all terms vanish.
        let e = schwarzschild_like(3, "0.37");
        let lin = linearized_phi(OperatorKind::Scal, &flat, &e, &[1.0, 0.0, 2.0], 0).unwrap();
        assert!(lin.h.value().abs() < 1e-13);
        // e = (2m/r)δ against the directional finite-difference oracle
        // d/dt Scal(δ + t e)|₀ at (2,0,0).
        let e = schwarzschild_like(3, "2/r");
        let point = [2.0, 0.0, 0.0];
        let lin = linearized_phi(OperatorKind::Scal, &flat, &e, &point, 0)
            .unwrap()
            .h
            .value();
        let scal_of = |t: f64| -> f64 {
            let exprs: Vec<_> = (0..9)
                .map(|k| {
                    if k % 4 == 0 {
                        parse(&format!("1 + {t}*(2/r)"), 3).unwrap()
                    } else {
                        parse("0", 3).unwrap()
                    }
                })
                .collect();
            let g = ExprTensor::new(3, 2, exprs, Symmetry::Symmetric).unwrap();
            evaluate_phi(OperatorKind::Scal, &g, None, &point, 0)
                .unwrap()
                .h
                .value()
        };
        let h = 1e-4;
        let fd = (scal_of(h) - scal_of(-h)) / (2.0 * h);
        assert!((lin - fd).abs() < 1e-6, "DScal {lin} vs fd {fd}");
    }

    #[test]
    fn adjoint_annihilates_kernel_members() {
        let flat = Background::flat(3);
        let point = [1.3, -0.4, 0.9];
        let metric = flat.metric_jets(&point, 0).unwrap();
        for v in flat.kernel_basis(OperatorKind::Scal).unwrap() {
            let adj = adjoint_phi(OperatorKind::Scal, &flat, &v, &point, 0).unwrap();
            assert!(adj.norm(&metric) < 1e-12, "{} not annihilated", v.label);
        }
        let hyp = Background::hyperbolic(3);
        let point = [0.9, 1.0, 0.3];
        let metric = hyp.metric_jets(&point, 0).unwrap();
        for v in hyp.kernel_basis(OperatorKind::Scal).unwrap() {
            let adj = adjoint_phi(OperatorKind::Scal, &hyp, &v, &point, 0).unwrap();
            assert!(
                adj.norm(&metric) < 1e-8,
                "{} residual {}",
                v.label,
                adj.norm(&metric)
            );
        }
        // Non-member detection: V = x1² has ∇²V ≠ 0.
        let bad = StaticPotential::from_fields(
            "x1^2",
            Some(Arc::new(parse("x1^2", 3).unwrap())),
            None,
        );
        let adj = adjoint_phi(OperatorKind::Scal, &flat, &bad, &point, 0).unwrap();
        let metric = flat.metric_jets(&point, 0).unwrap();
        assert!(adj.norm(&metric) > 1.0);
    }

    #[test]
    fn constraints_kernel_members_annihilated() {
        let flat = Background::flat(3);
        let point = [0.8, 1.7, -0.6];
        let metric = flat.metric_jets(&point, 0).unwrap();
        for v in flat.kernel_basis(OperatorKind::Constraints).unwrap() {
            let adj = adjoint_phi(OperatorKind::Constraints, &flat, &v, &point, 0).unwrap();
            assert!(
                adj.norm(&metric) < 1e-12,
                "{} residual {}",
                v.label,
                adj.norm(&metric)
            );
        }
    }

    #[test]
    fn scal_integrand_closed_form() {
        // V = 1, e = (2m/r)δ: 𝕌_j = 4 m x_j / r³; at (2,0,0) with m = 1: (1,0,0).
        let flat = Background::flat(3);
        let v = &flat.kernel_basis(OperatorKind::Scal).unwrap()[0];
        let e = schwarzschild_like(3, "2/r");
        let u = charge_integrand(OperatorKind::Scal, &flat, v, &e, &[2.0, 0.0, 0.0], 0).unwrap();
        assert!((u.value(&[0]) - 1.0).abs() < 1e-12);
        assert!(u.value(&[1]).abs() < 1e-13);
        assert!(u.value(&[2]).abs() < 1e-13);
        // e = 0 gives the zero covector for any kind.
        let zero = Perturbation::explicit(
            Arc::new(crate::tensorcalc::ConstTensor::new(
                3,
                2,
                vec![0.0; 9],
                Symmetry::Symmetric,
            )),
            None,
        );
        let u = charge_integrand(OperatorKind::Scal, &flat, v, &zero, &[1.0, 1.0, 1.0], 0).unwrap();
        assert!(u.max_abs_value() < 1e-15);
    }

    #[test]
    fn momentum_integrand_matches_abbott_deser_form() {
        // constraints flat λ₀ = 0, V = (0, dx¹), e = (0, k̇):
        // 𝕌 = 2(ι_{dx¹} k̇ − (tr k̇) dx¹).
        let flat = Background::flat(3);
        let basis = flat.kernel_basis(OperatorKind::Constraints).unwrap();
        let v = basis
            .iter()
            .find(|p| p.label == "alpha=dx1")
            .expect("dx1 potential");
        let kdot_exprs: Vec<_> = [
            "x2", "1", "0", //
            "1", "x1*x3", "0", //
            "0", "0", "x3^2",
        ]
        .iter()
        .map(|t| parse(t, 3).unwrap())
        .collect();
        let e = Perturbation::explicit(
            Arc::new(crate::tensorcalc::ConstTensor::new(
                3,
                2,
                vec![0.0; 9],
                Symmetry::Symmetric,
            )),
            Some(Arc::new(
                ExprTensor::new(3, 2, kdot_exprs, Symmetry::Symmetric).unwrap(),
            )),
        );
        let point = [1.2, 0.4, -0.7];
        let u = charge_integrand(OperatorKind::Constraints, &flat, v, &e, &point, 0).unwrap();
        let kdot = e.kdot.as_ref().unwrap().eval(&point, 0).unwrap();
        let tr: f64 = (0..3).map(|i| kdot.value(&[i, i])).sum();
        for j in 0..3 {
            let expect = 2.0 * (kdot.value(&[0, j]) - if j == 0 { tr } else { 0.0 });
            assert!((u.value(&[j]) - expect).abs() < 1e-12);
        }
        // The (f, ġ) block with (f, 0) matches the scal integrand exactly.
        let vf = basis.iter().find(|p| p.label == "f=x2").unwrap();
        let e_g = schwarzschild_like(3, "1/(1+r^2)");
        let scal_v = StaticPotential::from_fields("x2", vf.f.clone(), None);
        let u_constraints =
            charge_integrand(OperatorKind::Constraints, &flat, vf, &e_g, &point, 0).unwrap();
        let u_scal = charge_integrand(OperatorKind::Scal, &flat, &scal_v, &e_g, &point, 0).unwrap();
        for j in 0..3 {
            assert!((u_constraints.value(&[j]) - u_scal.value(&[j])).abs() < 1e-13);
        }
    }

    #[test]
    fn reduced_and_full_constraints_integrands_agree() {
        for lambda in [0.0, 0.45] {
            let bg = Background::hyperbolic(3).with_lambda0(lambda);
            let v = StaticPotential::from_fields(
                "test",
                Some(Arc::new(parse("cosh(x1)*sin(x2)", 3).unwrap())),
                Some(Arc::new(
                    ExprTensor::new(
                        3,
                        1,
                        vec![
                            parse("sin(x2)", 3).unwrap(),
                            parse("cos(x1)", 3).unwrap(),
                            parse("x1", 3).unwrap(),
                        ],
                        Symmetry::None,
                    )
                    .unwrap(),
                )),
            );
            let gdot: Vec<_> = [
                "exp(-x1)", "sin(x2)*0.1", "0", //
                "sin(x2)*0.1", "x1*exp(-x1)", "0.05", //
                "0", "0.05", "exp(-2*x1)",
            ]
            .iter()
            .map(|t| parse(t, 3).unwrap())
            .collect();
            let kdot: Vec<_> = [
                "exp(-2*x1)", "0", "0.2", //
                "0", "sin(x3)*exp(-x1)", "0", //
                "0.2", "0", "exp(-x1)",
            ]
            .iter()
            .map(|t| parse(t, 3).unwrap())
            .collect();
            let e = Perturbation::explicit(
                Arc::new(ExprTensor::new(3, 2, gdot, Symmetry::Symmetric).unwrap()),
                Some(Arc::new(ExprTensor::new(3, 2, kdot, Symmetry::Symmetric).unwrap())),
            );
            let point = [1.4, 1.1, 0.6];
            let full =
                charge_integrand(OperatorKind::Constraints, &bg, &v, &e, &point, 0).unwrap();
            let reduced = charge_integrand_reduced(&bg, &v, &e, &point, 0).unwrap();
            for j in 0..3 {
                assert!(
                    (full.value(&[j]) - reduced.value(&[j])).abs()
                        < 1e-10 * (1.0 + full.value(&[j]).abs()),
                    "λ₀={lambda}, slot {j}: {} vs {}",
                    full.value(&[j]),
                    reduced.value(&[j])
                );
            }
        }
    }

    #[test]
    fn quadratic_remainder_examples() {
        let flat = Background::flat(3);
        let v = &flat.kernel_basis(OperatorKind::Scal).unwrap()[0];
        // e = 0 → Q = 0.
        let zero = Perturbation::explicit(
            Arc::new(crate::tensorcalc::ConstTensor::new(
                3,
                2,
                vec![0.0; 9],
                Symmetry::Symmetric,
            )),
            None,
        );
        assert!(
            quadratic_remainder(OperatorKind::Scal, &flat, v, &zero, &[1.0, 0.5, 0.0])
                .unwrap()
                .abs()
                < 1e-14
        );
        // Q(1, tη)/t² approaches a finite limit.
        let point = [5.0, 0.0, 0.0];
        let q_at = |t: f64| {
            let e = schwarzschild_like(3, &format!("{t}*(2*0.1/r)"));
            quadratic_remainder(OperatorKind::Scal, &flat, v, &e, &point).unwrap()
        };
        let r1 = q_at(1e-2) / 1e-4;
        let r2 = q_at(1e-3) / 1e-6;
        assert!(
            (r1 - r2).abs() < 0.05 * r2.abs().max(1e-12),
            "Q/t² not stabilizing: {r1} vs {r2}"
        );
    }

    #[test]
    fn definition_identity_pointwise() {
        // The integration-by-parts identity pointwise, scal kind, both
        // backgrounds, with a generic non-kernel V.
        let cases: Vec<(Background, &str)> = vec![
            (Background::flat(3), "exp(-0.3*r)*x1 + sin(x2)"),
            (Background::hyperbolic(3), "cosh(x1)*sin(x2)*cos(x3)"),
        ];
        for (bg, vexpr) in cases {
            let dim = bg.dim();
            let v = StaticPotential::from_fields(
                "generic",
                Some(Arc::new(parse(vexpr, dim).unwrap())),
                None,
            );
            let e = match bg.kind() {
                crate::backgrounds::BackgroundKind::Flat => schwarzschild_like(3, "1/(1+r^2)"),
                _ => schwarzschild_like(3, "exp(-x1)*(2+sin(x2))"),
            };
            for point in bg.random_points(&crate::backgrounds::SampleSpec::new(25, 7, (1.0, 4.0))) {
                let (residual, scale) =
                    definition_identity_residual(OperatorKind::Scal, &bg, &v, &e, &point).unwrap();
                assert!(
                    residual.abs() / scale < 1e-9,
                    "identity residual {residual} (scale {scale}) at {point:?}"
                );
            }
        }
    }

    #[test]
    fn definition_identity_pointwise_constraints() {
        // Same identity for the constraints operator, including the k₀
        // couplings (λ₀ ≠ 0), with generic non-kernel (f, α) and (ġ, k̇).
        for bg in [
            Background::flat(3).with_lambda0(0.3),
            Background::hyperbolic(3).with_lambda0(0.45),
            Background::flat(3),
        ] {
            let mk = |exprs: [&str; 9]| -> crate::tensorcalc::ArcTensor {
                Arc::new(
                    ExprTensor::new(
                        3,
                        2,
                        exprs.iter().map(|t| parse(t, 3).unwrap()).collect(),
                        Symmetry::Symmetric,
                    )
                    .unwrap(),
                )
            };
            let e = Perturbation::explicit(
                mk([
                    "1/(1+x1^2)", "0.1*sin(x2)", "0.05", //
                    "0.1*sin(x2)", "x1/(2+x1^2)", "0", //
                    "0.05", "0", "cos(x3)*0.2",
                ]),
                Some(mk([
                    "0.3", "0.1*x1", "0", //
                    "0.1*x1", "sin(x3)*0.2", "0.07", //
                    "0", "0.07", "0.4/(1+x1^2)",
                ])),
            );
            let v = StaticPotential::from_fields(
                "generic-pair",
                Some(Arc::new(parse("sin(x1)*cos(x2) + 0.3*x1", 3).unwrap())),
                Some(Arc::new(
                    ExprTensor::new(
                        3,
                        1,
                        vec![
                            parse("cos(x2)", 3).unwrap(),
                            parse("0.2*x1", 3).unwrap(),
                            parse("sin(x3)", 3).unwrap(),
                        ],
                        Symmetry::None,
                    )
                    .unwrap(),
                )),
            );
            for point in bg.random_points(&crate::backgrounds::SampleSpec::new(25, 11, (1.0, 3.0)))
            {
                let (residual, scale) = definition_identity_residual(
                    OperatorKind::Constraints,
                    &bg,
                    &v,
                    &e,
                    &point,
                )
                .unwrap();
                assert!(
                    residual.abs() / scale < 1e-9,
                    "constraints identity residual {residual} (scale {scale}) at {point:?} on {:?}",
                    bg.kind()
                );
            }
        }
    }
}
