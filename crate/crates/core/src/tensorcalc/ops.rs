//! Pointwise differential operators on tensor jets.

use nalgebra::DMatrix;

use crate::expr::{Jet, JetShape};

use super::{Connection, Curvature, FieldError, MetricJets, TensorJets};

/// Invert a rank-2 jet matrix by Newton iteration seeded with the numeric
/// inverse of the value part: X <- X (2I - G X) doubles the valid Taylor
/// order each step.
pub fn invert_rank2(g: &TensorJets) -> Result<TensorJets, FieldError> {
    let n = g.dim();
    assert_eq!(g.rank(), 2, "metric must be rank 2");
    let order = g.order();
    let values = DMatrix::from_fn(n, n, |i, j| g.value(&[i, j]));
    let inv0 = values.clone().try_inverse().ok_or_else(|| {
        FieldError::SingularMetric(format!("matrix with det {:.3e}", values.determinant()))
    })?;
    // Guard against nearly singular values poisoning the Newton steps.
    let cond_proxy = values.norm() * inv0.norm();
    if !cond_proxy.is_finite() || cond_proxy > 1e12 {
        return Err(FieldError::SingularMetric(format!(
            "condition proxy {cond_proxy:.3e}"
        )));
    }
    let shape = JetShape::get(n, order)?;
    let mut x = TensorJets::from_fn(n, 2, |idx| {
        Jet::constant(shape.clone(), inv0[(idx[0], idx[1])])
    });
    if order == 0 {
        return Ok(x);
    }
    let steps = usize::BITS as usize - order.leading_zeros() as usize; // ceil(log2(order+1))
    for _ in 0..steps {
        // X (2I - G X)
        let gx = mat_mul(g, &x);
        let two_i_minus = TensorJets::from_fn(n, 2, |idx| {
            let c = if idx[0] == idx[1] { 2.0 } else { 0.0 };
            Jet::constant(shape.clone(), c).sub(gx.jet(idx))
        });
        x = mat_mul(&x, &two_i_minus);
    }
    Ok(x)
}

fn mat_mul(a: &TensorJets, b: &TensorJets) -> TensorJets {
    let n = a.dim();
    TensorJets::from_fn(n, 2, |idx| {
        let mut acc: Option<Jet> = None;
        for m in 0..n {
            let term = a.jet(&[idx[0], m]).mul(b.jet(&[m, idx[1]]));
            acc = Some(match acc {
                Some(s) => s.add(&term),
                None => term,
            });
        }
        acc.expect("dim >= 1")
    })
}

/// Levi-Civita connection of a metric given as jets of order >= 1.
/// Γ^k_{ij} = ½ g^{kl} (∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij}); the returned
/// Christoffel jets are one order lower than the metric jets.
pub fn christoffel(g: TensorJets) -> Result<Connection, FieldError> {
    let n = g.dim();
    let metric = MetricJets::new(g)?;
    let dg = metric.g.partial_derivative()?; // [a, i, j] = ∂_a g_{ij}
    let inv_low = metric.inv.truncated(dg.order())?;
    let gamma = TensorJets::from_fn(n, 3, |idx| {
        let (k, i, j) = (idx[0], idx[1], idx[2]);
        let mut acc: Option<Jet> = None;
        for l in 0..n {
            let sum = dg
                .jet(&[i, j, l])
                .add(dg.jet(&[j, i, l]))
                .sub(dg.jet(&[l, i, j]));
            let term = inv_low.jet(&[k, l]).mul(&sum);
            acc = Some(match acc {
                Some(s) => s.add(&term),
                None => term,
            });
        }
        acc.expect("dim >= 1").scale(0.5)
    });
    Ok(Connection { gamma, metric })
}

/// Curvature of a metric given as jets of order >= 2, with the sign
/// convention that makes the unit round sphere have scalar +n(n-1) and
/// hyperbolic space -n(n-1):
/// R^l_{ijk} = ∂_i Γ^l_{jk} − ∂_j Γ^l_{ik} + Γ^l_{im}Γ^m_{jk} − Γ^l_{jm}Γ^m_{ik}.
pub fn curvature(g: TensorJets) -> Result<Curvature, FieldError> {
    let n = g.dim();
    let conn = christoffel(g)?;
    let dgamma = conn.gamma.partial_derivative()?; // [a, l, i, j] = ∂_a Γ^l_{ij}
    let order = dgamma.order();
    let gamma = conn.gamma.truncated(order)?;
    let riemann = TensorJets::from_fn(n, 4, |idx| {
        let (l, i, j, k) = (idx[0], idx[1], idx[2], idx[3]);
        let mut acc = dgamma.jet(&[i, l, j, k]).sub(dgamma.jet(&[j, l, i, k]));
        for m in 0..n {
            let plus = gamma.jet(&[l, i, m]).mul(gamma.jet(&[m, j, k]));
            let minus = gamma.jet(&[l, j, m]).mul(gamma.jet(&[m, i, k]));
            acc = acc.add(&plus).sub(&minus);
        }
        acc
    });
    let ricci = TensorJets::from_fn(n, 2, |idx| {
        let (j, k) = (idx[0], idx[1]);
        let mut acc: Option<Jet> = None;
        for i in 0..n {
            let term = riemann.jet(&[i, i, j, k]).clone();
            acc = Some(match acc {
                Some(s) => s.add(&term),
                None => term,
            });
        }
        acc.expect("dim >= 1")
    });
    let inv_low = conn.metric.inv.truncated(order)?;
    let mut scalar: Option<Jet> = None;
    for j in 0..n {
        for k in 0..n {
            let term = inv_low.jet(&[j, k]).mul(ricci.jet(&[j, k]));
            scalar = Some(match scalar {
                Some(s) => s.add(&term),
                None => term,
            });
        }
    }
    Ok(Curvature {
        riemann,
        ricci,
        scalar: scalar.expect("dim >= 1"),
    })
}

/// Covariant derivative of a fully covariant tensor, new first index:
/// (∇t)_{a I} = ∂_a t_I − Σ_s Γ^b_{a i_s} t_{..b..}. One order lower than the
/// input; the connection must be available at that order.
pub fn cov_derivative(t: &TensorJets, conn: &Connection) -> Result<TensorJets, FieldError> {
    let n = t.dim();
    let dt = t.partial_derivative()?;
    let order = dt.order().min(conn.gamma.order());
    let dt = dt.truncated(order)?;
    let gamma = conn.gamma.truncated(order)?;
    let t_low = t.truncated(order)?;
    let rank = t.rank();
    Ok(TensorJets::from_fn(n, rank + 1, |idx| {
        let a = idx[0];
        let inner = &idx[1..];
        let mut acc = dt.jet(idx).clone();
        let mut src = inner.to_vec();
        for (s, &is) in inner.iter().enumerate() {
            for b in 0..n {
                src.copy_from_slice(inner);
                src[s] = b;
                let term = gamma.jet(&[b, a, is]).mul(t_low.jet(&src));
                acc = acc.sub(&term);
            }
        }
        acc
    }))
}

/// Covariant derivative of a contravariant vector:
/// (∇v)^j_a = ∂_a v^j + Γ^j_{a b} v^b, indexed [a, j].
pub fn cov_derivative_vector(v: &TensorJets, conn: &Connection) -> Result<TensorJets, FieldError> {
    let n = v.dim();
    assert_eq!(v.rank(), 1);
    let dv = v.partial_derivative()?; // [a, j]
    let order = dv.order().min(conn.gamma.order());
    let dv = dv.truncated(order)?;
    let gamma = conn.gamma.truncated(order)?;
    let v_low = v.truncated(order)?;
    Ok(TensorJets::from_fn(n, 2, |idx| {
        let (a, j) = (idx[0], idx[1]);
        let mut acc = dv.jet(&[a, j]).clone();
        for b in 0..n {
            acc = acc.add(&gamma.jet(&[j, a, b]).mul(v_low.jet(&[b])));
        }
        acc
    }))
}

/// g₀-divergence on the first slot: (div t)_J = g^{ai} (∇t)_{a i J}.
pub fn cov_divergence(t: &TensorJets, conn: &Connection) -> Result<TensorJets, FieldError> {
    let n = t.dim();
    assert!(t.rank() >= 1, "divergence needs at least one slot");
    let grad = cov_derivative(t, conn)?;
    let order = grad.order();
    let inv = conn.metric.inv.truncated(order)?;
    Ok(TensorJets::from_fn(n, t.rank() - 1, |rest| {
        let mut acc: Option<Jet> = None;
        let mut idx = vec![0usize; rest.len() + 2];
        idx[2..].copy_from_slice(rest);
        for a in 0..n {
            for i in 0..n {
                idx[0] = a;
                idx[1] = i;
                let term = inv.jet(&[a, i]).mul(grad.jet(&idx));
                acc = Some(match acc {
                    Some(s) => s.add(&term),
                    None => term,
                });
            }
        }
        acc.expect("dim >= 1")
    }))
}

/// Metric trace of a rank-2 covariant tensor: g^{ij} t_{ij}.
pub fn trace(t: &TensorJets, metric: &MetricJets) -> Jet {
    assert_eq!(t.rank(), 2);
    let n = t.dim();
    let order = t.order().min(metric.order());
    let inv = metric.inv.truncated(order).expect("truncation is downward");
    let mut acc: Option<Jet> = None;
    for i in 0..n {
        for j in 0..n {
            let term = inv
                .jet(&[i, j])
                .mul(&t.jet(&[i, j]).truncated(order).expect("downward"));
            acc = Some(match acc {
                Some(s) => s.add(&term),
                None => term,
            });
        }
    }
    acc.expect("dim >= 1")
}

/// Lie derivative along a contravariant vector field:
/// (𝓛_ζ t)_I = ζ^m ∂_m t_I + Σ_s t_{..m..} ∂_{i_s} ζ^m. One order lower than
/// the inputs.
pub fn lie_derivative(zeta: &TensorJets, t: &TensorJets) -> Result<TensorJets, FieldError> {
    let n = t.dim();
    assert_eq!(zeta.rank(), 1, "ζ must be a vector field");
    let dt = t.partial_derivative()?;
    let dz = zeta.partial_derivative()?; // [i, m] = ∂_i ζ^m
    let order = dt.order().min(dz.order());
    let dt = dt.truncated(order)?;
    let dz = dz.truncated(order)?;
    let z = zeta.truncated(order)?;
    let t_low = t.truncated(order)?;
    let rank = t.rank();
    Ok(TensorJets::from_fn(n, rank, |idx| {
        let mut acc: Option<Jet> = None;
        let mut didx = vec![0usize; rank + 1];
        didx[1..].copy_from_slice(idx);
        for m in 0..n {
            didx[0] = m;
            let term = z.jet(&[m]).mul(dt.jet(&didx));
            acc = Some(match acc {
                Some(s) => s.add(&term),
                None => term,
            });
        }
        let mut acc = acc.expect("dim >= 1");
        let mut src = idx.to_vec();
        for (s, &is) in idx.iter().enumerate() {
            for m in 0..n {
                src.copy_from_slice(idx);
                src[s] = m;
                acc = acc.add(&t_low.jet(&src).mul(dz.jet(&[is, m])));
            }
        }
        acc
    }))
}

/// Covariant Hessian and geometric Laplacian of a scalar jet:
/// (∇²f)_{ij} = ∂_i∂_j f − Γ^k_{ij} ∂_k f and Δ₀f = −g^{ij}(∇²f)_{ij}.
pub fn hessian_laplacian(f: &Jet, conn: &Connection) -> Result<(TensorJets, Jet), FieldError> {
    let n = f.dim();
    let df = TensorJets::new(
        n,
        1,
        (0..n).map(|i| f.partial_jet(i)).collect::<Result<_, _>>()?,
    );
    let hess = cov_derivative(&df, conn)?;
    let order = hess.order();
    let metric_low = MetricJets {
        g: conn.metric.g.truncated(order)?,
        inv: conn.metric.inv.truncated(order)?,
    };
    let lap = trace(&hess, &metric_low).neg();
    Ok((hess, lap))
}
