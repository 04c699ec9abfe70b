//! Run configuration: JSON schema, validation with JSON-pointer diagnostics,
//! and construction of the runtime objects.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::backgrounds::{Background, BackgroundKind, Isometry, OperatorKind, StaticPotential};
use crate::charge::{ExtrapolationConfig, Normalization, Perturbation};
use crate::expr::parse_with_params;
use crate::surface::{radius_schedule, ClosedSurface, QuadratureOrders};
use crate::tensorcalc::{
    ArcScalar, ArcTensor, ExprTensor, LieDerivativeTensor, LinCombTensor, Symmetry,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(String),
    #[error("config schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("config error at {pointer}: {message}")]
    Invalid { pointer: String, message: String },
}

fn invalid(pointer: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub background: BackgroundConfig,
    pub operator: OperatorConfig,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub potential: Option<PotentialConfig>,
    #[serde(default)]
    pub zeta: Option<ZetaConfig>,
    #[serde(default)]
    pub surfaces: Option<SurfacesConfig>,
    #[serde(default)]
    pub isometry: Option<IsometryConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub samples: Option<SamplesConfig>,
    #[serde(default)]
    pub bounds: Option<BoundsConfig>,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundConfig {
    pub kind: BackgroundKindConfig,
    pub dimension: usize,
    #[serde(default)]
    pub lambda0: f64,
    #[serde(default)]
    pub r_min: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundKindConfig {
    Flat,
    Hyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorConfig {
    Scal,
    Constraints,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Perturbation components e_{ij} (n×n expression matrix)…
    #[serde(default)]
    pub e: Option<Vec<Vec<String>>>,
    /// …or the full metric g (e := g − g₀ is formed internally).
    #[serde(default)]
    pub g: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub kdot: Option<Vec<Vec<String>>>,
    /// Adds 𝓛_ζ h₀ to the perturbation for the given ζ components.
    #[serde(default)]
    pub add_lie_of: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// "all" selects the whole kernel basis; a label selects one member.
    #[serde(default)]
    pub basis: Option<String>,
    #[serde(default)]
    pub f: Option<String>,
    #[serde(default)]
    pub alpha: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZetaConfig {
    pub components: Vec<String>,
    /// Declared decay rate (reported, not enforced pointwise).
    #[serde(default)]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfacesConfig {
    pub radii: Vec<f64>,
    #[serde(default)]
    pub polar_order: Option<usize>,
    #[serde(default)]
    pub phi_order: Option<usize>,
    /// Optional (a, b, c) ellipsoid appended to the schedule (flat n = 3).
    #[serde(default)]
    pub ellipsoid: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum IsometryConfig {
    Rotation { plane: [usize; 2], angle: f64 },
    Translation { vector: Vec<f64> },
    Boost { axis: usize, rapidity: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_kid")]
    pub kid: f64,
    #[serde(default = "default_cancellation")]
    pub cancellation: f64,
    #[serde(default = "default_invariance_rtol")]
    pub invariance_rtol: f64,
    /// Absolute invariance tolerance in units of c_n.
    #[serde(default = "default_invariance_atol_cn")]
    pub invariance_atol_cn: f64,
    #[serde(default = "default_equivariance_rtol")]
    pub equivariance_rtol: f64,
    #[serde(default = "default_extr_rtol")]
    pub extrapolation_rtol: f64,
    #[serde(default = "default_extr_rtol")]
    pub fit_rtol: f64,
}

fn default_kid() -> f64 {
    1e-8
}
fn default_cancellation() -> f64 {
    1e-7
}
fn default_invariance_rtol() -> f64 {
    1e-2
}
fn default_invariance_atol_cn() -> f64 {
    1e-3
}
fn default_equivariance_rtol() -> f64 {
    1e-6
}
fn default_extr_rtol() -> f64 {
    1e-3
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            kid: default_kid(),
            cancellation: default_cancellation(),
            invariance_rtol: default_invariance_rtol(),
            invariance_atol_cn: default_invariance_atol_cn(),
            equivariance_rtol: default_equivariance_rtol(),
            extrapolation_rtol: default_extr_rtol(),
            fit_rtol: default_extr_rtol(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplesConfig {
    pub count: usize,
    pub seed: u64,
    pub r_range: [f64; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_geodesic_samples")]
    pub geodesic_samples: usize,
}

fn default_draws() -> usize {
    100
}
fn default_seed() -> u64 {
    2024
}
fn default_geodesic_samples() -> usize {
    16
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default)]
    pub formats: Option<Vec<String>>,
    #[serde(default)]
    pub normalize: Option<String>,
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<RunConfig, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig =
            serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
                pointer: format!("/{}", e.path().to_string().replace('.', "/")),
                message: e.inner().to_string(),
            })?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        RunConfig::from_str(&text)
    }
}

/// Runtime objects built from a validated configuration.
pub struct BuiltRun {
    pub bg: Background,
    pub kind: OperatorKind,
    pub perturbation: Option<Perturbation>,
    pub potentials: Vec<StaticPotential>,
    pub zeta: Option<(ArcTensor, Option<f64>, String)>,
    pub surfaces: Vec<ClosedSurface>,
    pub ellipsoid: Option<ClosedSurface>,
    pub isometry: Option<Isometry>,
    pub tolerances: Tolerances,
    pub extrapolation: ExtrapolationConfig,
    pub normalization: Normalization,
    pub samples: Option<crate::backgrounds::SampleSpec>,
    pub bounds: BoundsConfig,
}

impl RunConfig {
    /// Validate everything that does not need computation and build the
    /// runtime objects.
    pub fn build(&self) -> Result<BuiltRun, ConfigError> {
        let n = self.background.dimension;
        if n < 2 || n > 6 {
            return Err(invalid(
                "/background/dimension",
                format!("dimension {n} outside the supported range 2..=6"),
            ));
        }
        let mut bg = match self.background.kind {
            BackgroundKindConfig::Flat => Background::flat(n),
            BackgroundKindConfig::Hyperbolic => {
                if n < 3 {
                    return Err(invalid(
                        "/background/dimension",
                        "the hyperbolic polar chart needs dimension >= 3",
                    ));
                }
                Background::hyperbolic(n)
            }
        }
        .with_lambda0(self.background.lambda0);
        if let Some(r_min) = self.background.r_min {
            if r_min <= 0.0 {
                return Err(invalid("/background/r_min", "r_min must be positive"));
            }
            bg = bg.with_r_min(r_min);
        }
        let kind = match self.operator {
            OperatorConfig::Scal => OperatorKind::Scal,
            OperatorConfig::Constraints => OperatorKind::Constraints,
        };

        let perturbation = match &self.data {
            None => None,
            Some(data) => Some(self.build_perturbation(&bg, data)?),
        };
        let potentials = match &self.potential {
            None => Vec::new(),
            Some(p) => self.build_potentials(&bg, kind, p)?,
        };
        let zeta = match &self.zeta {
            None => None,
            Some(z) => {
                if z.components.len() != n {
                    return Err(invalid(
                        "/zeta/components",
                        format!("expected {n} components, got {}", z.components.len()),
                    ));
                }
                let field = self
                    .expr_tensor(&bg, &z.components, 1, Symmetry::None, "/zeta/components")?;
                let label = format!(
                    "ζ = ({})",
                    z.components.join(", ")
                );
                Some((field, z.tau, label))
            }
        };
        let orders = QuadratureOrders {
            polar: self
                .surfaces
                .as_ref()
                .and_then(|s| s.polar_order)
                .unwrap_or(24),
            phi: self
                .surfaces
                .as_ref()
                .and_then(|s| s.phi_order)
                .unwrap_or(48),
        };
        let (surfaces, ellipsoid) = match &self.surfaces {
            None => (Vec::new(), None),
            Some(s) => {
                let schedule = radius_schedule(&bg, &s.radii, orders).map_err(|e| {
                    invalid("/surfaces/radii", e.to_string())
                })?;
                let ellipsoid = match s.ellipsoid {
                    None => None,
                    Some([a, b, c]) => {
                        if bg.kind() != BackgroundKind::Flat || n != 3 {
                            return Err(invalid(
                                "/surfaces/ellipsoid",
                                "parametrized surfaces are flat n = 3 only",
                            ));
                        }
                        Some(crate::surface::ellipsoid(a, b, c, orders))
                    }
                };
                (schedule, ellipsoid)
            }
        };
        let isometry = match &self.isometry {
            None => None,
            Some(IsometryConfig::Rotation { plane, angle }) => {
                let [i, j] = *plane;
                if i >= n || j >= n || i == j {
                    return Err(invalid("/isometry/plane", "plane indices out of range"));
                }
                Some(match bg.kind() {
                    BackgroundKind::Flat => Isometry::plane_rotation(n, i, j, *angle),
                    BackgroundKind::Hyperbolic => Isometry::lorentz_rotation(n, i, j, *angle),
                })
            }
            Some(IsometryConfig::Translation { vector }) => {
                if bg.kind() != BackgroundKind::Flat {
                    return Err(invalid(
                        "/isometry",
                        "translations are flat-background isometries",
                    ));
                }
                if vector.len() != n {
                    return Err(invalid("/isometry/vector", "length mismatch"));
                }
                Some(Isometry::translation(vector.clone()))
            }
            Some(IsometryConfig::Boost { axis, rapidity }) => {
                if bg.kind() != BackgroundKind::Hyperbolic {
                    return Err(invalid("/isometry", "boosts act on the hyperbolic model"));
                }
                if *axis < 1 || *axis > n {
                    return Err(invalid("/isometry/axis", "axis must be in 1..=n"));
                }
                Some(Isometry::boost(n, *axis, *rapidity))
            }
        };
        let normalization = match self
            .output
            .as_ref()
            .and_then(|o| o.normalize.as_deref())
            .unwrap_or("raw")
        {
            "raw" => Normalization::Raw,
            "adm" => Normalization::Adm,
            other => {
                return Err(invalid(
                    "/output/normalize",
                    format!("unknown normalization `{other}` (raw|adm)"),
                ));
            }
        };
        Ok(BuiltRun {
            bg,
            kind,
            perturbation,
            potentials,
            zeta,
            surfaces,
            ellipsoid,
            isometry,
            tolerances: self.tolerances.clone(),
            extrapolation: ExtrapolationConfig {
                rtol: self.tolerances.extrapolation_rtol,
                fit_rtol: self.tolerances.fit_rtol,
            },
            normalization,
            samples: self.samples.as_ref().map(|s| {
                crate::backgrounds::SampleSpec::new(s.count, s.seed, (s.r_range[0], s.r_range[1]))
            }),
            bounds: self.bounds.clone().unwrap_or(BoundsConfig {
                draws: default_draws(),
                seed: default_seed(),
                geodesic_samples: default_geodesic_samples(),
            }),
        })
    }

    fn expr_tensor(
        &self,
        bg: &Background,
        comps: &[String],
        rank: usize,
        symmetry: Symmetry,
        pointer: &str,
    ) -> Result<ArcTensor, ConfigError> {
        let n = bg.dim();
        let mut exprs = Vec::with_capacity(comps.len());
        for (k, text) in comps.iter().enumerate() {
            let e = parse_with_params(text, n, &self.params).map_err(|err| {
                invalid(
                    &format!("{pointer}/{k}"),
                    format!("`{text}`: {err} (byte offset {})", err.offset()),
                )
            })?;
            exprs.push(e);
        }
        Ok(Arc::new(
            ExprTensor::new(n, rank, exprs, symmetry)
                .map_err(|e| invalid(pointer, e.to_string()))?,
        ))
    }

    fn matrix_field(
        &self,
        bg: &Background,
        rows: &[Vec<String>],
        pointer: &str,
    ) -> Result<ArcTensor, ConfigError> {
        let n = bg.dim();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(invalid(pointer, format!("expected an {n}×{n} matrix")));
        }
        for i in 0..n {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(invalid(
                        &format!("{pointer}/{i}/{j}"),
                        "matrix must be written symmetrically",
                    ));
                }
            }
        }
        let flat: Vec<String> = rows.iter().flatten().cloned().collect();
        self.expr_tensor(bg, &flat, 2, Symmetry::Symmetric, pointer)
    }

    fn build_perturbation(
        &self,
        bg: &Background,
        data: &DataConfig,
    ) -> Result<Perturbation, ConfigError> {
        let mut g_terms: Vec<(f64, ArcTensor)> = Vec::new();
        match (&data.e, &data.g) {
            (Some(_), Some(_)) => {
                return Err(invalid("/data", "give either `e` or `g`, not both"));
            }
            (Some(rows), None) => {
                g_terms.push((1.0, self.matrix_field(bg, rows, "/data/e")?));
            }
            (None, Some(rows)) => {
                g_terms.push((1.0, self.matrix_field(bg, rows, "/data/g")?));
                g_terms.push((-1.0, bg.g0().clone()));
            }
            (None, None) => {
                if data.add_lie_of.is_none() {
                    return Err(invalid("/data", "needs `e`, `g`, or `add_lie_of`"));
                }
            }
        }
        let mut k_lie: Option<ArcTensor> = None;
        if let Some(zc) = &data.add_lie_of {
            if zc.len() != bg.dim() {
                return Err(invalid("/data/add_lie_of", "component count mismatch"));
            }
            let zeta = self.expr_tensor(bg, zc, 1, Symmetry::None, "/data/add_lie_of")?;
            let lie = Arc::new(LieDerivativeTensor::new(zeta, bg.g0().clone())) as ArcTensor;
            g_terms.push((1.0, lie.clone()));
            if bg.lambda0() != 0.0 {
                k_lie = Some(Arc::new(LinCombTensor::new(vec![(bg.lambda0(), lie)])) as ArcTensor);
            }
        }
        let gdot: ArcTensor = Arc::new(LinCombTensor::new(g_terms));
        let kdot = match &data.kdot {
            Some(rows) => {
                let explicit = self.matrix_field(bg, rows, "/data/kdot")?;
                Some(match k_lie {
                    Some(lie) => Arc::new(LinCombTensor::new(vec![(1.0, explicit), (1.0, lie)]))
                        as ArcTensor,
                    None => explicit,
                })
            }
            None => k_lie,
        };
        Ok(Perturbation::explicit(gdot, kdot))
    }

    fn build_potentials(
        &self,
        bg: &Background,
        kind: OperatorKind,
        p: &PotentialConfig,
    ) -> Result<Vec<StaticPotential>, ConfigError> {
        if let Some(selector) = &p.basis {
            let basis = bg
                .kernel_basis(kind)
                .map_err(|e| invalid("/potential/basis", e.to_string()))?;
            if selector == "all" {
                return Ok(basis);
            }
            return basis
                .into_iter()
                .find(|v| &v.label == selector)
                .map(|v| vec![v])
                .ok_or_else(|| {
                    invalid(
                        "/potential/basis",
                        format!("no basis member labeled `{selector}`"),
                    )
                });
        }
        let n = bg.dim();
        let f: Option<ArcScalar> = match &p.f {
            Some(text) => Some(Arc::new(
                parse_with_params(text, n, &self.params)
                    .map_err(|e| invalid("/potential/f", e.to_string()))?,
            )),
            None => None,
        };
        let alpha = match &p.alpha {
            Some(comps) => Some(
                self.expr_tensor(bg, comps, 1, Symmetry::None, "/potential/alpha")?,
            ),
            None => None,
        };
        if f.is_none() && alpha.is_none() {
            return Err(invalid(
                "/potential",
                "needs `basis`, `f`, or `alpha`",
            ));
        }
        let label = p.f.clone().unwrap_or_else(|| "custom".to_string());
        Ok(vec![StaticPotential::from_fields(&label, f, alpha)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "background": {"kind": "flat", "dimension": 3},
        "operator": "scal",
        "params": {"m": 1.0},
        "data": {"e": [["(1 + m/(2*r))^4 - 1", "0", "0"],
                        ["0", "(1 + m/(2*r))^4 - 1", "0"],
                        ["0", "0", "(1 + m/(2*r))^4 - 1"]]},
        "potential": {"basis": "1"},
        "surfaces": {"radii": [50, 100, 200, 400]}
    }"#;

    #[test]
    fn minimal_config_builds() {
        let cfg = RunConfig::from_str(MINIMAL).unwrap();
        let built = cfg.build().unwrap();
        assert_eq!(built.potentials.len(), 1);
        assert_eq!(built.surfaces.len(), 4);
        assert!(built.perturbation.is_some());
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = MINIMAL.replace("\"operator\"", "\"nonsense\": 1, \"operator\"");
        match RunConfig::from_str(&bad) {
            Err(ConfigError::Schema { message, .. }) => {
                assert!(message.contains("unknown field"), "{message}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn bad_radii_pointer() {
        let bad = MINIMAL.replace("[50, 100, 200, 400]", "[50, 50]");
        let cfg = RunConfig::from_str(&bad).unwrap();
        match cfg.build() {
            Err(ConfigError::Invalid { pointer, .. }) => {
                assert_eq!(pointer, "/surfaces/radii");
            }
            other => panic!("expected invalid radii, got {:?}", other.err().map(|e| e.to_string())),
        }
    }

    #[test]
    fn bad_expression_offset() {
        let bad = MINIMAL.replace("(1 + m/(2*r))^4 - 1\", \"0\", \"0", "x1 +\", \"0\", \"0");
        let cfg = RunConfig::from_str(&bad).unwrap();
        match cfg.build() {
            Err(ConfigError::Invalid { pointer, message }) => {
                assert_eq!(pointer, "/data/e/0");
                assert!(message.contains("offset"), "{message}");
            }
            other => panic!("expected expression error, got {:?}", other.err().map(|e| e.to_string())),
        }
    }
}
