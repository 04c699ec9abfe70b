//! Bundled test fields: the ζ families, perturbations and potentials used by
//! the verification drivers, the bundled configs and the acceptance suite.
//! Everything is smooth on the working region; decay classes are realized
//! with powers of (1+r²) (flat) or exponentials in the polar radius
//! (hyperbolic) so jets stay valid on all chart points.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backgrounds::{Background, BackgroundKind, OperatorKind};
use crate::charge::Perturbation;
use crate::expr::parse;
use crate::tensorcalc::{
    ArcScalar, ArcTensor, ExprTensor, GradVectorField, LieDerivativeTensor, LinCombTensor,
    ScalarTimesTensor, Symmetry, TensorField,
};

/// A named vector field.
pub struct NamedField {
    pub label: String,
    pub field: ArcTensor,
}

fn expr_vector(bg: &Background, comps: &[&str], label: &str) -> NamedField {
    let dim = bg.dim();
    let field = Arc::new(
        ExprTensor::new(
            dim,
            1,
            comps.iter().map(|t| parse(t, dim).expect("corpus expression")).collect(),
            Symmetry::None,
        )
        .expect("corpus vector"),
    );
    NamedField {
        label: label.to_string(),
        field,
    }
}

/// The cancellation ζ corpus: five non-Killing, non-gradient smooth fields
/// per background. The first flat entry has 𝕌(1, 𝓛_ζδ) constant, so
/// sup|𝕌|·Area grows like r² — the slow-decay regime.
pub fn cancellation_zetas(bg: &Background) -> Vec<NamedField> {
    match bg.kind() {
        BackgroundKind::Flat => vec![
            expr_vector(bg, &["x2^2", "0", "0"], "(x2^2,0,0)"),
            expr_vector(bg, &["x1*x2", "-x3", "x1^2"], "(x1x2,-x3,x1^2)"),
            expr_vector(
                bg,
                &["sin(x2)", "cos(x3)", "x1/(1+r^2)"],
                "(sin x2, cos x3, x1/(1+r^2))",
            ),
            expr_vector(
                bg,
                &[
                    "-x2*(1+r^2)^(-0.25)",
                    "x1*(1+r^2)^(-0.25)",
                    "x1*x2*(1+r^2)^(-0.75)",
                ],
                "twisted rotation (τ=1/2 class)",
            ),
            expr_vector(
                bg,
                &["x3^2/(1+r^2)", "x1^2/(1+r^2)", "x2^2/(1+r^2)"],
                "cyclic squares /(1+r^2)",
            ),
        ],
        BackgroundKind::Hyperbolic => {
            // f ∇g built from the embedding functions V₍μ₎: globally smooth
            // (restrictions of polynomials on R^{1,n}), non-gradient since
            // ∇f ∧ ∇g ≠ 0, non-Killing.
            let basis = bg
                .kernel_basis(OperatorKind::Scal)
                .expect("hyperbolic scal basis");
            let v: Vec<ArcScalar> = basis
                .iter()
                .map(|p| p.f.clone().expect("scal potentials have f"))
                .collect();
            let pairs = [(0usize, 1usize), (1, 2), (2, 3), (3, 1), (0, 2)];
            pairs
                .iter()
                .map(|&(i, j)| {
                    let grad = Arc::new(GradVectorField::new(v[j].clone(), bg.g0().clone()));
                    let field =
                        Arc::new(ScalarTimesTensor::new(v[i].clone(), grad)) as ArcTensor;
                    NamedField {
                        label: format!("V({i})·∇V({j})"),
                        field,
                    }
                })
                .collect()
        }
    }
}

/// ζ of decay class τ on the flat background: ζ^i = amp·x^i (1+r²)^{−τ/2},
/// so |ζ| = O(r^{1−τ}), |∂ζ| = O(r^{−τ}).
pub fn flat_decay_zeta(bg: &Background, tau: f64, amplitude: f64) -> NamedField {
    let comps: Vec<String> = (1..=bg.dim())
        .map(|i| format!("{amplitude}*x{i}*(1+r^2)^({})", -tau / 2.0))
        .collect();
    let refs: Vec<&str> = comps.iter().map(|s| s.as_str()).collect();
    expr_vector(bg, &refs, &format!("radial τ={tau} amp={amplitude}"))
}

/// Isotropic Schwarzschild-type perturbation centered at `center`:
/// e_{ij} = ((1 + m/(2|x−c|))⁴ − 1) δ_{ij}.
pub fn schwarzschild_perturbation(bg: &Background, m: f64, center: &[f64]) -> Perturbation {
    let dim = bg.dim();
    let rho = {
        let terms: Vec<String> = (0..dim)
            .map(|i| {
                if center[i] == 0.0 {
                    format!("x{}^2", i + 1)
                } else {
                    format!("(x{} - {})^2", i + 1, center[i])
                }
            })
            .collect();
        format!("sqrt({})", terms.join(" + "))
    };
    let diag = format!("(1 + {m}/(2*{rho}))^4 - 1");
    let exprs: Vec<_> = (0..dim * dim)
        .map(|k| {
            if k % (dim + 1) == 0 {
                parse(&diag, dim).expect("corpus expression")
            } else {
                parse("0", dim).expect("zero")
            }
        })
        .collect();
    Perturbation::explicit(
        Arc::new(ExprTensor::new(dim, 2, exprs, Symmetry::Symmetric).expect("corpus")),
        None,
    )
}

/// The bundled hyperbolic perturbation of decay class τ = 2:
/// e = 𝓛_ζ g₀ + a·e^{−3r} g₀ with |ζ|₀ = O(e^{−2r}). The Lie part has
/// exactly vanishing charge integrals over every sphere; the conformal part
/// carries a finite V₍₀₎ charge.
pub fn hyperbolic_bundled_perturbation(bg: &Background, a: f64) -> Perturbation {
    let zeta = hyperbolic_bundled_zeta(bg);
    let lie = Arc::new(LieDerivativeTensor::new(zeta.field, bg.g0().clone())) as ArcTensor;
    let conf = Arc::new(ScalarTimesTensor::new(
        Arc::new(parse(&format!("{a}*exp(-3*x1)"), bg.dim()).expect("corpus")) as ArcScalar,
        bg.g0().clone(),
    )) as ArcTensor;
    Perturbation::explicit(
        Arc::new(LinCombTensor::new(vec![(1.0, lie), (1.0, conf)])),
        None,
    )
}

/// The ζ inside the bundled hyperbolic perturbation (chart components sized
/// so that |ζ|₀ and |∇ζ|₀ are O(e^{−2r})).
pub fn hyperbolic_bundled_zeta(bg: &Background) -> NamedField {
    expr_vector(
        bg,
        &[
            "exp(-2*x1)*(1 + 0.5*sin(x2)*cos(x3))",
            "exp(-3*x1)*cos(x2)*sin(x2)",
            "exp(-3*x1)*(1 + 0.3*cos(x2))",
        ],
        "hyperbolic τ=2 chart shift",
    )
}

/// Momentum-carrying extrinsic perturbation k̇_{ij} = (A_i x_j + x_i A_j)/r³
/// whose Abbott-Deser momentum integrand is exactly radius-independent:
/// with α = dx^a the flux is (16π/3)·A_a at every radius.
pub fn momentum_kdot(bg: &Background, a_vec: &[f64]) -> ArcTensor {
    let dim = bg.dim();
    let mut exprs = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut terms = Vec::new();
            if a_vec[i] != 0.0 {
                terms.push(format!("{}*x{}", a_vec[i], j + 1));
            }
            if a_vec[j] != 0.0 {
                terms.push(format!("{}*x{}", a_vec[j], i + 1));
            }
            let text = if terms.is_empty() {
                "0".to_string()
            } else {
                format!("({})/r^3", terms.join(" + "))
            };
            exprs.push(parse(&text, dim).expect("corpus"));
        }
    }
    Arc::new(ExprTensor::new(dim, 2, exprs, Symmetry::Symmetric).expect("corpus"))
}

/// Deterministic random smooth symmetric 2-tensors with an overall size
/// control: small bounded entries on flat charts, e^{−2r}-enveloped on
/// hyperbolic charts (so norms stay O(scale) on the working region).
pub fn random_perturbation_family(
    bg: &Background,
    seed: u64,
    count: usize,
    scale: f64,
    with_kdot: bool,
) -> Vec<Perturbation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let gdot = random_symmetric(bg, &mut rng, scale);
            let kdot = if with_kdot {
                Some(random_symmetric(bg, &mut rng, scale))
            } else {
                None
            };
            Perturbation::explicit(gdot, kdot)
        })
        .collect()
}

fn random_symmetric(bg: &Background, rng: &mut ChaCha8Rng, scale: f64) -> ArcTensor {
    let dim = bg.dim();
    let envelope = match bg.kind() {
        BackgroundKind::Flat => "1/(1+r^2)".to_string(),
        BackgroundKind::Hyperbolic => "exp(-2*x1)".to_string(),
    };
    let mut comps = vec![String::new(); dim * dim];
    for i in 0..dim {
        for j in i..dim {
            let c1: f64 = rng.random_range(-1.0..1.0);
            let c2: f64 = rng.random_range(-1.0..1.0);
            let c3: f64 = rng.random_range(-1.0..1.0);
            let (w1, w2) = (rng.random_range(1..=2), rng.random_range(1..=dim));
            let text = format!(
                "{scale}*({envelope})*({c1:.6} + {c2:.6}*sin({w1}*x{w2}) + {c3:.6}*cos(x{}))",
                (i % dim) + 1
            );
            comps[i * dim + j] = text.clone();
            comps[j * dim + i] = text;
        }
    }
    // The hyperbolic metric blows up chart components of fixed g₀-norm, so
    // scale the angular slots down to keep |e|₀ of order `scale`.
    if bg.kind() == BackgroundKind::Hyperbolic {
        for i in 0..dim {
            for j in 0..dim {
                let mut damp = String::new();
                if i > 0 {
                    damp.push_str("*exp(-x1)");
                }
                if j > 0 {
                    damp.push_str("*exp(-x1)");
                }
                if !damp.is_empty() {
                    comps[i * dim + j] = format!("({}){damp}", comps[i * dim + j]);
                }
            }
        }
    }
    let exprs: Vec<_> = comps
        .iter()
        .map(|t| parse(t, dim).expect("corpus expression"))
        .collect();
    Arc::new(ExprTensor::new(dim, 2, exprs, Symmetry::Symmetric).expect("corpus"))
}

/// Deterministic random smooth small vector fields for the bound checks
/// (|∇ζ| stays well under the certification threshold on the sampling
/// annulus).
pub fn random_zeta_family(bg: &Background, seed: u64, count: usize, scale: f64) -> Vec<NamedField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = bg.dim();
    (0..count)
        .map(|k| {
            let comps: Vec<String> = (0..dim)
                .map(|slot| {
                    let c1: f64 = rng.random_range(-1.0..1.0);
                    let c2: f64 = rng.random_range(-1.0..1.0);
                    let w = rng.random_range(1..=dim);
                    let envelope = match bg.kind() {
                        BackgroundKind::Flat => "1/(1+r^2)^0.5".to_string(),
                        BackgroundKind::Hyperbolic => {
                            if slot == 0 {
                                "exp(-x1)".to_string()
                            } else {
                                "exp(-2*x1)".to_string()
                            }
                        }
                    };
                    format!("{scale}*({envelope})*({c1:.6} + {c2:.6}*sin(x{w}))")
                })
                .collect();
            let refs: Vec<&str> = comps.iter().map(|s| s.as_str()).collect();
            expr_vector(bg, &refs, &format!("random ζ #{k}"))
        })
        .collect()
}

/// Smooth compactly-localized symmetric tensor for the volume
/// integration-by-parts check: bump(r)·(smooth profile), with the C⁵ bump
/// ((1−s²)₊)⁶ supported on r ∈ (r0, r1).
pub fn bump_perturbation(bg: &Background, r0: f64, r1: f64, seed: u64) -> Perturbation {
    let dim = bg.dim();
    let mid = 0.5 * (r0 + r1);
    let half = 0.5 * (r1 - r0);
    let svar = match bg.kind() {
        BackgroundKind::Flat => "r".to_string(),
        BackgroundKind::Hyperbolic => "x1".to_string(),
    };
    // (1 − s²)⁶ with s = (r − mid)/half: vanishes to sixth order at r0 and
    // r1, so boundary fluxes of 𝕌(V, η) drop out of the annulus identity.
    // Only evaluated inside [r0, r1] (the annulus integrator never samples
    // outside), where it is a plain smooth expression.
    let bump = format!("(1 - (({svar} - {mid})/{half})^2)^6");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut comps = vec![String::new(); dim * dim];
    for i in 0..dim {
        for j in i..dim {
            let c1: f64 = rng.random_range(-1.0..1.0);
            let c2: f64 = rng.random_range(-1.0..1.0);
            let text = format!("({bump})*({c1:.6} + {c2:.6}*sin(x{}))", (j % dim) + 1);
            comps[i * dim + j] = text.clone();
            comps[j * dim + i] = text;
        }
    }
    let exprs: Vec<_> = comps
        .iter()
        .map(|t| parse(t, dim).expect("corpus expression"))
        .collect();
    Perturbation::explicit(
        Arc::new(ExprTensor::new(dim, 2, exprs, Symmetry::Symmetric).expect("corpus")),
        None,
    )
}

/// Verify a field is genuinely active (not identically zero) on a surface:
/// used to rule out vacuous cancellation passes.
pub fn field_is_nontrivial(
    field: &dyn TensorField,
    points: &[Vec<f64>],
    floor: f64,
) -> bool {
    points.iter().any(|p| {
        field
            .eval(p, 0)
            .map(|jets| jets.max_abs_value() > floor)
            .unwrap_or(false)
    })
}
