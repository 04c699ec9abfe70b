//! The hyperboloid model of hyperbolic n-space inside Minkowski R^{1,n}.
//!
//! The polar chart is (r, θ₁, …, θ_{n-2}, φ) with metric
//! dr² + sinh²r (dθ₁² + sin²θ₁ dθ₂² + …). The embedding is
//! X⁰ = cosh r, X^i = sinh r · ξ^i with ξ the unit-sphere cascade
//! ξ¹ = cosθ₁, ξ² = sinθ₁cosθ₂, …, ξⁿ = sinθ₁⋯sinθ_{n-2} sinφ.
//! Everything here is jet-traced so that exponential maps and Lorentz
//! actions have honest derivatives in the chart.

use crate::expr::{Jet, JetShape};
use crate::tensorcalc::FieldError;

/// ξ components as jets from the angle jets (cascade convention).
pub fn unit_vector_jets(angles: &[Jet]) -> Vec<Jet> {
    let n = angles.len() + 1;
    let mut xi = Vec::with_capacity(n);
    // Running product of sines.
    let mut sines = angles[0].sin();
    xi.push(angles[0].cos());
    for k in 1..angles.len() {
        xi.push(sines.mul(&angles[k].cos()));
        sines = sines.mul(&angles[k].sin());
    }
    xi.push(sines);
    xi
}

/// Lift a polar-chart point to hyperboloid coordinates, as jets:
/// input chart jets (r, θ…, φ), output (X⁰, …, Xⁿ).
pub fn lift_jets(chart: &[Jet]) -> Vec<Jet> {
    let r = &chart[0];
    let xi = unit_vector_jets(&chart[1..]);
    let sh = r.sinh();
    let mut out = Vec::with_capacity(chart.len() + 1);
    out.push(r.cosh());
    for x in &xi {
        out.push(sh.mul(x));
    }
    out
}

/// Minkowski inner product ⟨A, B⟩ = −A⁰B⁰ + Σ AⁱBⁱ, as jets.
pub fn minkowski_inner(a: &[Jet], b: &[Jet]) -> Jet {
    let mut acc = a[0].mul(&b[0]).neg();
    for (x, y) in a[1..].iter().zip(b[1..].iter()) {
        acc = acc.add(&x.mul(y));
    }
    acc
}

/// cosh(√u) as an entire function of u (safe through u = 0).
pub fn cosh_sqrt(u: &Jet) -> Result<Jet, FieldError> {
    if u.value() > 1e-12 {
        Ok(u.sqrt()?.cosh())
    } else {
        // Σ u^k / (2k)!; exact Taylor coefficients at u = 0.
        let taylor: Vec<f64> = (0..=u.order()).map(|k| 1.0 / fact(2 * k)).collect();
        Ok(u.compose_univariate(&taylor))
    }
}

/// sinh(√u)/√u as an entire function of u (safe through u = 0).
pub fn sinhc_sqrt(u: &Jet) -> Result<Jet, FieldError> {
    if u.value() > 1e-12 {
        let s = u.sqrt()?;
        Ok(s.sinh().div(&s)?)
    } else {
        let taylor: Vec<f64> = (0..=u.order()).map(|k| 1.0 / fact(2 * k + 1)).collect();
        Ok(u.compose_univariate(&taylor))
    }
}

fn fact(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Project hyperboloid jets back to the polar chart. Fails near the chart's
/// singular locus (r = 0 or an angular pole).
pub fn project_jets(embedded: &[Jet], r_min: f64) -> Result<Vec<Jet>, FieldError> {
    let n = embedded.len() - 1;
    let x0 = &embedded[0];
    if x0.value() <= 1.0 + 1e-14 {
        return Err(FieldError::ChartDomain(format!(
            "projected point at r ≈ 0 (X⁰ = {})",
            x0.value()
        )));
    }
    let r = x0.acosh().map_err(chart_err)?;
    if r.value() < r_min {
        return Err(FieldError::ChartDomain(format!(
            "projected radius {} below r_min {r_min}",
            r.value()
        )));
    }
    let mut out = Vec::with_capacity(n);
    out.push(r);
    // Angle cascade on the (un-normalized) spatial tail.
    // θ_k = atan2(|tail beyond k|, component k); φ = atan2(last, second-last).
    let spatial = &embedded[1..];
    for k in 0..n - 2 {
        let mut tail2: Option<Jet> = None;
        for t in &spatial[k + 1..] {
            let sq = t.mul(t);
            tail2 = Some(match tail2 {
                Some(a) => a.add(&sq),
                None => sq,
            });
        }
        let tail2 = tail2.expect("n >= 3 has a tail");
        if tail2.value() <= 1e-28 {
            return Err(FieldError::ChartDomain(
                "projected point on an angular pole".into(),
            ));
        }
        let tail = tail2.sqrt().map_err(chart_err)?;
        out.push(Jet::atan2(&tail, &spatial[k]).map_err(chart_err)?);
    }
    let phi = Jet::atan2(&spatial[n - 1], &spatial[n - 2]).map_err(chart_err)?;
    out.push(phi);
    Ok(out)
}

fn chart_err(e: crate::expr::JetError) -> FieldError {
    FieldError::ChartDomain(e.to_string())
}

/// Geodesic exponential in the embedding, all jets:
/// exp_X(Z) = cosh(|Z|) X + sinh(|Z|)/|Z| · Z with |Z|² = ⟨Z,Z⟩.
pub fn exp_embedded(x: &[Jet], z: &[Jet]) -> Result<Vec<Jet>, FieldError> {
    let u = minkowski_inner(z, z);
    let c = cosh_sqrt(&u)?;
    let s = sinhc_sqrt(&u)?;
    Ok(x.iter()
        .zip(z.iter())
        .map(|(xc, zc)| c.mul(xc).add(&s.mul(zc)))
        .collect())
}

/// Seed jets for the chart coordinates at a point.
pub fn chart_seeds(point: &[f64], order: usize) -> Result<Vec<Jet>, FieldError> {
    let shape = JetShape::get(point.len(), order)?;
    Ok((0..point.len())
        .map(|i| Jet::variable(shape.clone(), i, point[i]))
        .collect())
}

/// Value-level polar → embedding lift.
pub fn lift_values(point: &[f64]) -> Vec<f64> {
    let n = point.len();
    let r = point[0];
    let mut xi = vec![0.0; n];
    let mut sines = 1.0;
    for k in 0..n - 1 {
        xi[k] = sines * point[1 + k].cos();
        sines *= point[1 + k].sin();
    }
    xi[n - 1] = sines;
    let mut out = Vec::with_capacity(n + 1);
    out.push(r.cosh());
    let sh = r.sinh();
    out.extend(xi.iter().map(|&x| sh * x));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lift_lands_on_hyperboloid() {
        for point in [
            vec![0.7, 1.1, 0.3],
            vec![2.0, 0.4, -1.0],
            vec![1.0, std::f64::consts::FRAC_PI_2, 0.0],
        ] {
            let seeds = chart_seeds(&point, 2).unwrap();
            let x = lift_jets(&seeds);
            let norm = minkowski_inner(&x, &x);
            assert!((norm.value() + 1.0).abs() < 1e-13);
            // ⟨X, X⟩ = −1 identically, so all derivative slots vanish too.
            assert!(norm.max_abs_coeff() - 1.0 < 1e-12);
            for (a, b) in x
                .iter()
                .map(|j| j.value())
                .zip(lift_values(&point).iter())
            {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn project_inverts_lift() {
        let point = vec![1.3, 0.8, 2.2];
        let seeds = chart_seeds(&point, 3).unwrap();
        let x = lift_jets(&seeds);
        let back = project_jets(&x, 1e-3).unwrap();
        for (orig, rec) in seeds.iter().zip(back.iter()) {
            for (a, b) in orig.coeffs().iter().zip(rec.coeffs().iter()) {
                assert!((a - b).abs() < 1e-11, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn exp_preserves_hyperboloid_and_zero_is_identity() {
        let point = vec![0.9, 1.2, 0.5];
        let seeds = chart_seeds(&point, 2).unwrap();
        let x = lift_jets(&seeds);
        let zero: Vec<Jet> = x
            .iter()
            .map(|j| Jet::constant(j.shape().clone(), 0.0))
            .collect();
        let same = exp_embedded(&x, &zero).unwrap();
        for (a, b) in x.iter().zip(same.iter()) {
            assert!((a.value() - b.value()).abs() < 1e-14);
        }
        // A radial tangent vector: Z = sinh r ∂/∂X⁰-direction lift of ∂_r.
        // d/dr of (cosh r, sinh r ξ) is (sinh r, cosh r ξ): spacelike unit.
        let shape = x[0].shape().clone();
        let xi = unit_vector_jets(&seeds[1..]);
        let mut z = vec![seeds[0].sinh()];
        for c in &xi {
            z.push(seeds[0].cosh().mul(c));
        }
        let _ = shape;
        let moved = exp_embedded(&x, &z.iter().map(|j| j.scale(0.5)).collect::<Vec<_>>()).unwrap();
        let norm = minkowski_inner(&moved, &moved);
        assert!((norm.value() + 1.0).abs() < 1e-12);
        // Radial geodesics are rays: new radius = 1.4, same angles.
        let chart = project_jets(&moved, 1e-3).unwrap();
        assert!((chart[0].value() - 1.4).abs() < 1e-12);
        assert!((chart[1].value() - 1.2).abs() < 1e-12);
        assert!((chart[2].value() - 0.5).abs() < 1e-12);
    }
}
