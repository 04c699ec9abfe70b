//! Closed-hypersurface machinery: coordinate/geodesic spheres and
//! user-parametrized closed surfaces (n = 3), with g₀-outer normals, induced
//! area elements and quadrature of 1-forms.
//!
//! Angular quadrature on S² is Gauss-Legendre in cos θ × periodic trapezoid
//! in φ; in other dimensions, tensor products of Gauss-Legendre rules per
//! angle with the sin-power Jacobian folded into the weight. Error estimates
//! come from comparing the base rule against the order-doubled rule, keeping
//! node sets deterministic.

use rayon::prelude::*;
use thiserror::Error;

use crate::backgrounds::{Background, BackgroundKind};
use crate::numeric::{gauss_legendre, pairwise_sum};
use crate::tensorcalc::{ArcScalar, FieldError};

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("bad radius schedule: {0}")]
    BadSchedule(String),
    #[error("degenerate surface: {0}")]
    DegenerateSurface(String),
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),
}

/// Per-surface quadrature orders. `polar` is the Gauss-Legendre point count
/// per polar axis, `phi` the periodic-trapezoid count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOrders {
    pub polar: usize,
    pub phi: usize,
}

impl Default for QuadratureOrders {
    fn default() -> Self {
        QuadratureOrders { polar: 24, phi: 48 }
    }
}

#[derive(Clone)]
pub enum SurfaceKind {
    /// Euclidean sphere |x| = r in the cartesian chart.
    CoordSphere { radius: f64 },
    /// Distance sphere r = const in the hyperbolic polar chart.
    GeodesicSphere { radius: f64 },
    /// Closed parametrized surface in flat R³: embedding components as
    /// scalar fields of the parameters (x1 = u polar-like, x2 = v periodic).
    Parametrized {
        label: String,
        comps: Vec<ArcScalar>,
        u_range: (f64, f64),
        v_range: (f64, f64),
        center: [f64; 3],
    },
}

#[derive(Clone)]
pub struct ClosedSurface {
    pub kind: SurfaceKind,
    pub orders: QuadratureOrders,
}

/// A quadrature node: chart point, outward g₀-unit normal (covariant), and
/// the surface-measure weight (area element times quadrature weight).
#[derive(Debug, Clone)]
pub struct SurfaceNode {
    pub point: Vec<f64>,
    pub nu: Vec<f64>,
    pub weight: f64,
}

/// Value plus nested-order error estimate of a surface integral.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    pub nodes: usize,
}

impl ClosedSurface {
    pub fn coord_sphere(radius: f64, orders: QuadratureOrders) -> ClosedSurface {
        ClosedSurface {
            kind: SurfaceKind::CoordSphere { radius },
            orders,
        }
    }

    pub fn geodesic_sphere(radius: f64, orders: QuadratureOrders) -> ClosedSurface {
        ClosedSurface {
            kind: SurfaceKind::GeodesicSphere { radius },
            orders,
        }
    }

    pub fn parametrized(
        label: &str,
        comps: Vec<ArcScalar>,
        u_range: (f64, f64),
        v_range: (f64, f64),
        center: [f64; 3],
        orders: QuadratureOrders,
    ) -> ClosedSurface {
        ClosedSurface {
            kind: SurfaceKind::Parametrized {
                label: label.to_string(),
                comps,
                u_range,
                v_range,
                center,
            },
            orders,
        }
    }

    pub fn radius(&self) -> Option<f64> {
        match &self.kind {
            SurfaceKind::CoordSphere { radius } | SurfaceKind::GeodesicSphere { radius } => {
                Some(*radius)
            }
            SurfaceKind::Parametrized { .. } => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            SurfaceKind::CoordSphere { radius } => format!("sphere r={radius}"),
            SurfaceKind::GeodesicSphere { radius } => format!("geodesic sphere r={radius}"),
            SurfaceKind::Parametrized { label, .. } => label.clone(),
        }
    }

    /// Quadrature nodes at `refine` times the configured orders.
    pub fn nodes(&self, bg: &Background, refine: usize) -> Result<Vec<SurfaceNode>, SurfaceError> {
        let polar = self.orders.polar * refine;
        let phi = self.orders.phi * refine;
        match &self.kind {
            SurfaceKind::CoordSphere { radius } => {
                if bg.kind() != BackgroundKind::Flat {
                    return Err(SurfaceError::Field(FieldError::Unsupported(
                        "coordinate spheres live on the flat background".into(),
                    )));
                }
                let n = bg.dim();
                Ok(angular_nodes(n, polar, phi)
                    .into_iter()
                    .map(|(xi, w)| {
                        let point: Vec<f64> = xi.iter().map(|&c| radius * c).collect();
                        let nu: Vec<f64> = xi.clone();
                        SurfaceNode {
                            point,
                            nu,
                            weight: w * radius.powi(n as i32 - 1),
                        }
                    })
                    .collect())
            }
            SurfaceKind::GeodesicSphere { radius } => {
                if bg.kind() != BackgroundKind::Hyperbolic {
                    return Err(SurfaceError::Field(FieldError::Unsupported(
                        "geodesic r-spheres live on the hyperbolic polar chart".into(),
                    )));
                }
                let n = bg.dim();
                let density = radius.sinh().powi(n as i32 - 1);
                Ok(angular_parameter_nodes(n, polar, phi)
                    .into_iter()
                    .map(|(angles, w)| {
                        let mut point = Vec::with_capacity(n);
                        point.push(*radius);
                        point.extend_from_slice(&angles);
                        let mut nu = vec![0.0; n];
                        nu[0] = 1.0;
                        SurfaceNode {
                            point,
                            nu,
                            weight: w * density,
                        }
                    })
                    .collect())
            }
            SurfaceKind::Parametrized {
                comps,
                u_range,
                v_range,
                center,
                ..
            } => {
                if bg.kind() != BackgroundKind::Flat || bg.dim() != 3 {
                    return Err(SurfaceError::Field(FieldError::Unsupported(
                        "parametrized surfaces are implemented for flat n = 3".into(),
                    )));
                }
                let (gl_x, gl_w) = gauss_legendre(polar);
                let mut nodes = Vec::with_capacity(polar * phi);
                let du = 0.5 * (u_range.1 - u_range.0);
                for (t, wu) in gl_x.iter().zip(gl_w.iter()) {
                    let u = u_range.0 + du * (t + 1.0);
                    for k in 0..phi {
                        let v =
                            v_range.0 + (v_range.1 - v_range.0) * k as f64 / phi as f64;
                        let wv = (v_range.1 - v_range.0) / phi as f64;
                        let node =
                            self.normal_and_measure(bg, &[u, v])?;
                        nodes.push(SurfaceNode {
                            point: node.point,
                            nu: node.nu,
                            weight: node.weight * wu * du * wv,
                        });
                        let _ = (comps, center);
                    }
                }
                Ok(nodes)
            }
        }
    }

    /// Point, outward unit normal and area-element density at one parameter
    /// point (parametrized surfaces; for spheres the analytic data is used
    /// directly by `nodes`). The returned weight is the density with respect
    /// to the parameter measure, without quadrature weights.
    pub fn normal_and_measure(
        &self,
        bg: &Background,
        param: &[f64],
    ) -> Result<SurfaceNode, SurfaceError> {
        match &self.kind {
            SurfaceKind::Parametrized { comps, center, .. } => {
                let jets: Vec<_> = comps
                    .iter()
                    .map(|c| c.jet(param, 1))
                    .collect::<Result<_, _>>()?;
                let point: Vec<f64> = jets.iter().map(|j| j.value()).collect();
                let tu: Vec<f64> = jets.iter().map(|j| j.d(0)).collect();
                let tv: Vec<f64> = jets.iter().map(|j| j.d(1)).collect();
                // Flat metric: induced first fundamental form.
                let e = dot(&tu, &tu);
                let f = dot(&tu, &tv);
                let g = dot(&tv, &tv);
                let det = e * g - f * f;
                if det <= 1e-24 {
                    return Err(SurfaceError::DegenerateSurface(format!(
                        "rank-deficient tangent map at parameters {param:?}"
                    )));
                }
                // ν ∝ T_u × T_v, oriented outward from the center.
                let mut nu = cross(&tu, &tv);
                let norm = dot(&nu, &nu).sqrt();
                for c in nu.iter_mut() {
                    *c /= norm;
                }
                let radial: Vec<f64> = point
                    .iter()
                    .zip(center.iter())
                    .map(|(p, c)| p - c)
                    .collect();
                if dot(&nu, &radial) < 0.0 {
                    for c in nu.iter_mut() {
                        *c = -*c;
                    }
                }
                Ok(SurfaceNode {
                    point,
                    nu,
                    weight: det.sqrt(),
                })
            }
            _ => {
                // Spheres: param is the angle tuple; reuse the nodes math.
                let n = bg.dim();
                let angles = param;
                let xi = unit_vector_values(angles);
                match (&self.kind, bg.kind()) {
                    (SurfaceKind::CoordSphere { radius }, BackgroundKind::Flat) => {
                        let point: Vec<f64> = xi.iter().map(|&c| radius * c).collect();
                        Ok(SurfaceNode {
                            point,
                            nu: xi,
                            weight: radius.powi(n as i32 - 1) * angular_density(n, angles),
                        })
                    }
                    (SurfaceKind::GeodesicSphere { radius }, BackgroundKind::Hyperbolic) => {
                        let mut point = Vec::with_capacity(n);
                        point.push(*radius);
                        point.extend_from_slice(angles);
                        let mut nu = vec![0.0; n];
                        nu[0] = 1.0;
                        Ok(SurfaceNode {
                            point,
                            nu,
                            weight: radius.sinh().powi(n as i32 - 1)
                                * angular_density(n, angles),
                        })
                    }
                    _ => Err(SurfaceError::Field(FieldError::Unsupported(
                        "surface kind does not match background".into(),
                    ))),
                }
            }
        }
    }

    /// ∮ ω(ν) dS for a covariant 1-form ω given pointwise, with a nested
    /// error estimate (base orders vs doubled orders).
    pub fn integrate_oneform<F>(&self, bg: &Background, omega: F) -> Result<Integral, SurfaceError>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>, FieldError> + Sync,
    {
        let coarse = self.flux_at(bg, 1, &omega)?;
        let fine = self.flux_at(bg, 2, &omega)?;
        Ok(Integral {
            value: fine.0,
            error_estimate: (fine.0 - coarse.0).abs(),
            nodes: fine.1,
        })
    }

    fn flux_at<F>(
        &self,
        bg: &Background,
        refine: usize,
        omega: &F,
    ) -> Result<(f64, usize), SurfaceError>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>, FieldError> + Sync,
    {
        let nodes = self.nodes(bg, refine)?;
        let contributions: Result<Vec<f64>, FieldError> = nodes
            .par_iter()
            .map(|node| {
                let w = omega(&node.point)?;
                let minv = bg.metric_jets(&node.point, 0)?;
                let n = bg.dim();
                let mut flux = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        flux += minv.inv.value(&[i, j]) * w[i] * node.nu[j];
                    }
                }
                Ok(flux * node.weight)
            })
            .collect();
        let contributions = contributions?;
        Ok((pairwise_sum(&contributions), contributions.len()))
    }

    /// ∮ f dS for a pointwise scalar (used for |𝕌|₀ normalizations, areas,
    /// and sup-norm diagnostics).
    pub fn integrate_scalar<F>(&self, bg: &Background, f: F) -> Result<Integral, SurfaceError>
    where
        F: Fn(&[f64]) -> Result<f64, FieldError> + Sync,
    {
        let run = |refine: usize| -> Result<f64, SurfaceError> {
            let nodes = self.nodes(bg, refine)?;
            let contributions: Result<Vec<f64>, FieldError> = nodes
                .par_iter()
                .map(|node| Ok(f(&node.point)? * node.weight))
                .collect();
            Ok(pairwise_sum(&contributions?))
        };
        let coarse = run(1)?;
        let fine = run(2)?;
        let nodes = self.nodes(bg, 2)?.len();
        Ok(Integral {
            value: fine,
            error_estimate: (fine - coarse).abs(),
            nodes,
        })
    }

    /// Max of a pointwise scalar over the base node set.
    pub fn sup_over_nodes<F>(&self, bg: &Background, f: F) -> Result<f64, SurfaceError>
    where
        F: Fn(&[f64]) -> Result<f64, FieldError> + Sync,
    {
        let nodes = self.nodes(bg, 1)?;
        let values: Result<Vec<f64>, FieldError> =
            nodes.par_iter().map(|node| f(&node.point)).collect();
        Ok(values?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// Total area with respect to g₀.
    pub fn area(&self, bg: &Background) -> Result<Integral, SurfaceError> {
        self.integrate_scalar(bg, |_| Ok(1.0))
    }

    /// Seam-consistency check for parametrized surfaces: the embedding must
    /// agree at the periodic boundary of the v axis.
    pub fn validate_closedness(&self, tol: f64) -> Result<(), SurfaceError> {
        if let SurfaceKind::Parametrized {
            comps,
            u_range,
            v_range,
            ..
        } = &self.kind
        {
            for k in 1..8 {
                let u = u_range.0 + (u_range.1 - u_range.0) * k as f64 / 8.0;
                for comp in comps {
                    let a = comp.jet(&[u, v_range.0], 0)?.value();
                    let b = comp.jet(&[u, v_range.1], 0)?.value();
                    if (a - b).abs() > tol {
                        return Err(SurfaceError::DegenerateSurface(format!(
                            "seam mismatch {} at u = {u}",
                            (a - b).abs()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Unit-sphere direction from the angle cascade (θ₁ … θ_{n−2}, φ).
fn unit_vector_values(angles: &[f64]) -> Vec<f64> {
    let n = angles.len() + 1;
    let mut xi = Vec::with_capacity(n);
    let mut sines = 1.0;
    for k in 0..angles.len() {
        xi.push(sines * angles[k].cos());
        sines *= angles[k].sin();
    }
    xi.push(sines);
    xi
}

/// Angular measure density Π sin^{n−1−k}(θ_k) of S^{n−1}.
fn angular_density(n: usize, angles: &[f64]) -> f64 {
    let mut d = 1.0;
    for k in 0..n - 2 {
        d *= angles[k].sin().powi((n - 2 - k) as i32);
    }
    d
}

/// Quadrature nodes over the angle parameters with the measure folded into
/// the weights: Σ w ≈ ω_{n−1}. For n = 3 the polar axis is Gauss-Legendre in
/// cos θ (no Jacobian); otherwise Gauss-Legendre per θ axis.
fn angular_parameter_nodes(n: usize, polar: usize, phi: usize) -> Vec<(Vec<f64>, f64)> {
    assert!(n >= 2);
    let phi_w = std::f64::consts::TAU / phi as f64;
    let mut out = Vec::new();
    if n == 2 {
        for k in 0..phi {
            out.push((vec![std::f64::consts::TAU * k as f64 / phi as f64], phi_w));
        }
        return out;
    }
    if n == 3 {
        let (u, w) = gauss_legendre(polar);
        for (ui, wi) in u.iter().zip(w.iter()) {
            let theta = ui.acos();
            for k in 0..phi {
                let v = std::f64::consts::TAU * k as f64 / phi as f64;
                out.push((vec![theta, v], wi * phi_w));
            }
        }
        return out;
    }
    // General n: tensor Gauss-Legendre in each θ ∈ (0, π) with sin powers.
    let (x, w) = gauss_legendre(polar);
    let thetas: Vec<(f64, f64)> = x
        .iter()
        .zip(w.iter())
        .map(|(t, wt)| {
            (
                std::f64::consts::FRAC_PI_2 * (t + 1.0),
                wt * std::f64::consts::FRAC_PI_2,
            )
        })
        .collect();
    let axes = n - 2;
    let mut idx = vec![0usize; axes];
    loop {
        let mut angles = Vec::with_capacity(axes + 1);
        let mut weight = phi_w;
        for (k, &i) in idx.iter().enumerate() {
            let (theta, wt) = thetas[i];
            angles.push(theta);
            weight *= wt * theta.sin().powi((n - 2 - k) as i32);
        }
        for k in 0..phi {
            let mut a = angles.clone();
            a.push(std::f64::consts::TAU * k as f64 / phi as f64);
            out.push((a, weight));
        }
        // Advance the mixed-radix counter.
        let mut carry = true;
        for slot in idx.iter_mut() {
            if carry {
                *slot += 1;
                if *slot == thetas.len() {
                    *slot = 0;
                } else {
                    carry = false;
                }
            }
        }
        if carry {
            break;
        }
    }
    out
}

/// Angular nodes as unit vectors ξ with measure weights (flat spheres).
fn angular_nodes(n: usize, polar: usize, phi: usize) -> Vec<(Vec<f64>, f64)> {
    angular_parameter_nodes(n, polar, phi)
        .into_iter()
        .map(|(angles, w)| (unit_vector_values(&angles), w))
        .collect()
}

/// Coordinate spheres (flat) or geodesic spheres (hyperbolic) at strictly
/// increasing radii above r_min.
pub fn radius_schedule(
    bg: &Background,
    radii: &[f64],
    orders: QuadratureOrders,
) -> Result<Vec<ClosedSurface>, SurfaceError> {
    if radii.is_empty() {
        return Err(SurfaceError::BadSchedule("empty radius list".into()));
    }
    for pair in radii.windows(2) {
        if pair[1] <= pair[0] {
            return Err(SurfaceError::BadSchedule(format!(
                "radii must be strictly increasing, got {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    if radii[0] <= bg.r_min() {
        return Err(SurfaceError::BadSchedule(format!(
            "radius {} not above r_min {}",
            radii[0],
            bg.r_min()
        )));
    }
    Ok(radii
        .iter()
        .map(|&r| match bg.kind() {
            BackgroundKind::Flat => ClosedSurface::coord_sphere(r, orders),
            BackgroundKind::Hyperbolic => ClosedSurface::geodesic_sphere(r, orders),
        })
        .collect())
}

/// ∫ f dvol₀ over the annulus r ∈ [r0, r1] by tensor-product quadrature:
/// Gauss-Legendre radially × the angular rule (full volume density folded
/// into the weights).
pub fn integrate_annulus<F>(
    bg: &Background,
    r0: f64,
    r1: f64,
    radial_order: usize,
    orders: QuadratureOrders,
    f: F,
) -> Result<f64, SurfaceError>
where
    F: Fn(&[f64]) -> Result<f64, FieldError> + Sync,
{
    let n = bg.dim();
    let (gx, gw) = gauss_legendre(radial_order);
    let half = 0.5 * (r1 - r0);
    let mut slices = Vec::new();
    for (t, wr) in gx.iter().zip(gw.iter()) {
        let r = r0 + half * (t + 1.0);
        let density = match bg.kind() {
            BackgroundKind::Flat => r.powi(n as i32 - 1),
            BackgroundKind::Hyperbolic => r.sinh().powi(n as i32 - 1),
        };
        slices.push((r, wr * half * density));
    }
    let angular = angular_parameter_nodes(n, orders.polar, orders.phi);
    let work: Vec<(Vec<f64>, f64)> = slices
        .iter()
        .flat_map(|(r, wr)| {
            angular.iter().map(move |(angles, wa)| {
                let point = match bg.kind() {
                    BackgroundKind::Flat => {
                        unit_vector_values(angles).iter().map(|&c| r * c).collect()
                    }
                    BackgroundKind::Hyperbolic => {
                        let mut p = Vec::with_capacity(n);
                        p.push(*r);
                        p.extend_from_slice(angles);
                        p
                    }
                };
                (point, wr * wa)
            })
        })
        .collect();
    let contributions: Result<Vec<f64>, FieldError> = work
        .par_iter()
        .map(|(point, w)| Ok(f(point)? * w))
        .collect();
    Ok(pairwise_sum(&contributions?))
}

/// Convenience: the ellipsoid x²/a² + y²/b² + z²/c² = 1 as a parametrized
/// surface (flat n = 3).
pub fn ellipsoid(a: f64, b: f64, c: f64, orders: QuadratureOrders) -> ClosedSurface {
    use crate::expr::parse;
    use std::sync::Arc;
    let comps: Vec<ArcScalar> = vec![
        Arc::new(parse(&format!("{a}*cos(x1)"), 2).expect("builtin")),
        Arc::new(parse(&format!("{b}*sin(x1)*cos(x2)"), 2).expect("builtin")),
        Arc::new(parse(&format!("{c}*sin(x1)*sin(x2)"), 2).expect("builtin")),
    ];
    ClosedSurface::parametrized(
        &format!("ellipsoid ({a},{b},{c})"),
        comps,
        (0.0, std::f64::consts::PI),
        (0.0, std::f64::consts::TAU),
        [0.0; 3],
        orders,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::numeric::unit_sphere_area;

    #[test]
    fn sphere_area_flat_and_hyperbolic() {
        let flat = Background::flat(3);
        let s = ClosedSurface::coord_sphere(2.0, QuadratureOrders::default());
        let area = s.area(&flat).unwrap();
        let exact = 4.0 * std::f64::consts::PI * 4.0;
        assert!((area.value - exact).abs() < 1e-10 * exact);

        let hyp = Background::hyperbolic(3);
        let s = ClosedSurface::geodesic_sphere(1.0, QuadratureOrders::default());
        let area = s.area(&hyp).unwrap();
        let exact = 4.0 * std::f64::consts::PI * 1.0f64.sinh().powi(2);
        assert!((area.value - exact).abs() < 1e-10 * exact);

        let flat4 = Background::flat(4);
        let s = ClosedSurface::coord_sphere(1.5, QuadratureOrders { polar: 16, phi: 32 });
        let area = s.area(&flat4).unwrap();
        let exact = unit_sphere_area(4) * 1.5f64.powi(3);
        assert!((area.value - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn radial_flux_reproduces_total_charge() {
        // ω_j = 4 x_j / r³ integrates to 16π at every radius.
        let flat = Background::flat(3);
        for r in [2.0, 10.0] {
            let s = ClosedSurface::coord_sphere(r, QuadratureOrders::default());
            let result = s
                .integrate_oneform(&flat, |p| {
                    let r3 = p.iter().map(|c| c * c).sum::<f64>().powf(1.5);
                    Ok(p.iter().map(|&c| 4.0 * c / r3).collect())
                })
                .unwrap();
            let exact = 16.0 * std::f64::consts::PI;
            assert!(
                (result.value - exact).abs() < 1e-10 * exact,
                "r={r}: {} vs {exact}",
                result.value
            );
            assert!(result.error_estimate < 1e-9);
        }
    }

    #[test]
    fn constant_covector_has_zero_flux() {
        let flat = Background::flat(3);
        for surface in [
            ClosedSurface::coord_sphere(3.0, QuadratureOrders::default()),
            ellipsoid(2.0, 1.0, 1.0, QuadratureOrders::default()),
        ] {
            let result = surface
                .integrate_oneform(&flat, |_| Ok(vec![1.0, 0.0, 0.0]))
                .unwrap();
            assert!(
                result.value.abs() < 1e-9,
                "{}: {}",
                surface.label(),
                result.value
            );
        }
    }

    #[test]
    fn ellipsoid_area_against_refined_oracle() {
        let flat = Background::flat(3);
        let base = ellipsoid(2.0, 1.0, 1.0, QuadratureOrders { polar: 32, phi: 64 });
        let fine = ellipsoid(2.0, 1.0, 1.0, QuadratureOrders { polar: 96, phi: 128 });
        let a = base.area(&flat).unwrap().value;
        let b = fine.area(&flat).unwrap().value;
        assert!(
            ((a - b) / b).abs() < 1e-8,
            "area {a} vs refined {b}"
        );
        // Sanity: between the areas of the inscribed and circumscribed spheres.
        let lo = 4.0 * std::f64::consts::PI;
        let hi = 4.0 * std::f64::consts::PI * 4.0;
        assert!(a > lo && a < hi);
    }

    #[test]
    fn parametrized_sphere_matches_coord_sphere() {
        let flat = Background::flat(3);
        let param = ellipsoid(2.0, 2.0, 2.0, QuadratureOrders::default());
        let coord = ClosedSurface::coord_sphere(2.0, QuadratureOrders::default());
        let omega = |p: &[f64]| -> Result<Vec<f64>, FieldError> {
            let r2 = p.iter().map(|c| c * c).sum::<f64>();
            Ok(vec![
                p[0] / r2 + 0.3 * p[1],
                p[1] / r2,
                p[2] / r2 - 0.1 * p[0] * p[1],
            ])
        };
        let a = param.integrate_oneform(&flat, omega).unwrap().value;
        let b = coord.integrate_oneform(&flat, omega).unwrap().value;
        assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
    }

    #[test]
    fn schedule_validation() {
        let flat = Background::flat(3);
        assert_eq!(
            radius_schedule(&flat, &[50.0, 100.0, 200.0, 400.0], QuadratureOrders::default())
                .unwrap()
                .len(),
            4
        );
        assert!(matches!(
            radius_schedule(&flat, &[10.0, 10.0], QuadratureOrders::default()),
            Err(SurfaceError::BadSchedule(_))
        ));
        let hyp = Background::hyperbolic(3);
        let surfaces =
            radius_schedule(&hyp, &[4.0, 6.0, 8.0, 10.0], QuadratureOrders::default()).unwrap();
        assert_eq!(surfaces.len(), 4);
        assert!(matches!(
            surfaces[0].kind,
            SurfaceKind::GeodesicSphere { .. }
        ));
    }

    #[test]
    fn annulus_volume() {
        let flat = Background::flat(3);
        let vol = integrate_annulus(
            &flat,
            1.0,
            2.0,
            16,
            QuadratureOrders { polar: 8, phi: 16 },
            |_| Ok(1.0),
        )
        .unwrap();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * (8.0 - 1.0);
        assert!((vol - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn closedness_seam_check() {
        let good = ellipsoid(2.0, 1.0, 1.0, QuadratureOrders::default());
        assert!(good.validate_closedness(1e-10).is_ok());
        use crate::expr::parse;
        use std::sync::Arc;
        let bad = ClosedSurface::parametrized(
            "open strip",
            vec![
                Arc::new(parse("cos(x1)", 2).unwrap()),
                Arc::new(parse("sin(x1)*cos(x2)", 2).unwrap()),
                Arc::new(parse("x2", 2).unwrap()),
            ],
            (0.0, std::f64::consts::PI),
            (0.0, std::f64::consts::TAU),
            [0.0; 3],
            QuadratureOrders::default(),
        );
        assert!(bad.validate_closedness(1e-10).is_err());
    }
}
