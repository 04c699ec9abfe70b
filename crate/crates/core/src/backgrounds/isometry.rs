//! Isometries of the model backgrounds as chart maps: Euclidean motions of
//! flat space, Lorentz transforms of the hyperboloid in the polar chart.

use nalgebra::DMatrix;

use crate::expr::{Jet, JetShape};
use crate::tensorcalc::{FieldError, PointMap};

use super::hyperboloid;

/// An isometry descriptor of a model background.
#[derive(Debug, Clone)]
pub enum Isometry {
    /// x ↦ R x + T with R ∈ O(n).
    Euclidean { rotation: DMatrix<f64>, translation: Vec<f64> },
    /// Orthochronous Lorentz transform of R^{1,n} preserving the hyperboloid.
    Lorentz { matrix: DMatrix<f64> },
}

impl Isometry {
    pub fn euclidean(rotation: DMatrix<f64>, translation: Vec<f64>) -> Result<Isometry, FieldError> {
        let n = translation.len();
        if rotation.nrows() != n || rotation.ncols() != n {
            return Err(FieldError::Shape("rotation matrix size mismatch".into()));
        }
        let defect = (rotation.transpose() * &rotation - DMatrix::identity(n, n)).norm();
        if defect > 1e-10 {
            return Err(FieldError::Unsupported(format!(
                "not an isometry: RᵀR − I has norm {defect:.3e}"
            )));
        }
        Ok(Isometry::Euclidean { rotation, translation })
    }

    pub fn lorentz(matrix: DMatrix<f64>) -> Result<Isometry, FieldError> {
        let m = matrix.nrows();
        if matrix.ncols() != m || m < 2 {
            return Err(FieldError::Shape("Lorentz matrix size mismatch".into()));
        }
        let mut eta = DMatrix::identity(m, m);
        eta[(0, 0)] = -1.0;
        let defect = (matrix.transpose() * &eta * &matrix - eta).norm();
        if defect > 1e-10 {
            return Err(FieldError::Unsupported(format!(
                "not an isometry: ΛᵀηΛ − η has norm {defect:.3e}"
            )));
        }
        if matrix[(0, 0)] <= 0.0 {
            return Err(FieldError::Unsupported(
                "not an isometry of the upper hyperboloid (Λ⁰₀ ≤ 0)".into(),
            ));
        }
        Ok(Isometry::Lorentz { matrix })
    }

    /// Rotation by `angle` in the (i, j) coordinate plane of flat n-space.
    pub fn plane_rotation(n: usize, i: usize, j: usize, angle: f64) -> Isometry {
        let mut r = DMatrix::identity(n, n);
        let (c, s) = (angle.cos(), angle.sin());
        r[(i, i)] = c;
        r[(j, j)] = c;
        r[(i, j)] = -s;
        r[(j, i)] = s;
        Isometry::Euclidean {
            rotation: r,
            translation: vec![0.0; n],
        }
    }

    pub fn translation(t: Vec<f64>) -> Isometry {
        let n = t.len();
        Isometry::Euclidean {
            rotation: DMatrix::identity(n, n),
            translation: t,
        }
    }

    /// Boost of rapidity `s` in the (0, i) plane of R^{1,n} (1 ≤ i ≤ n).
    pub fn boost(n: usize, i: usize, s: f64) -> Isometry {
        let mut m = DMatrix::identity(n + 1, n + 1);
        m[(0, 0)] = s.cosh();
        m[(i, i)] = s.cosh();
        m[(0, i)] = s.sinh();
        m[(i, 0)] = s.sinh();
        Isometry::Lorentz { matrix: m }
    }

    /// Rotation acting on the spatial block of R^{1,n} (hyperbolic rotation
    /// about the chart origin).
    pub fn lorentz_rotation(n: usize, i: usize, j: usize, angle: f64) -> Isometry {
        let mut m = DMatrix::identity(n + 1, n + 1);
        let (c, s) = (angle.cos(), angle.sin());
        m[(i + 1, i + 1)] = c;
        m[(j + 1, j + 1)] = c;
        m[(i + 1, j + 1)] = -s;
        m[(j + 1, i + 1)] = s;
        Isometry::Lorentz { matrix: m }
    }

    pub fn inverse(&self) -> Isometry {
        match self {
            Isometry::Euclidean { rotation, translation } => {
                let rt = rotation.transpose();
                let t = -&rt * DMatrix::from_column_slice(translation.len(), 1, translation);
                Isometry::Euclidean {
                    rotation: rt,
                    translation: t.column(0).iter().copied().collect(),
                }
            }
            Isometry::Lorentz { matrix } => {
                let m = matrix.nrows();
                let mut eta = DMatrix::identity(m, m);
                eta[(0, 0)] = -1.0;
                Isometry::Lorentz {
                    matrix: &eta * matrix.transpose() * &eta,
                }
            }
        }
    }

    /// The Lorentz matrix when this is a hyperboloid isometry.
    pub fn lorentz_matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            Isometry::Lorentz { matrix } => Some(matrix),
            _ => None,
        }
    }
}

/// An isometry bound to a chart so it can act as a point map. The chart
/// dimension must match the flat dimension (Euclidean) or n for a Lorentz
/// transform acting on the polar chart of Hⁿ.
pub struct IsometryMap {
    pub iso: Isometry,
    pub dim: usize,
    pub r_min: f64,
}

impl PointMap for IsometryMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        // Jets at order 0 carry exactly the value computation.
        Ok(self.jets(x, 0)?.iter().map(|j| j.value()).collect())
    }

    fn jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>, FieldError> {
        match &self.iso {
            Isometry::Euclidean { rotation, translation } => {
                let shape = JetShape::get(self.dim, order)?;
                let seeds: Vec<Jet> = (0..self.dim)
                    .map(|i| Jet::variable(shape.clone(), i, x[i]))
                    .collect();
                Ok((0..self.dim)
                    .map(|a| {
                        let mut acc = Jet::constant(shape.clone(), translation[a]);
                        for (i, seed) in seeds.iter().enumerate() {
                            acc = acc.add_scaled(rotation[(a, i)], seed);
                        }
                        acc
                    })
                    .collect())
            }
            Isometry::Lorentz { matrix } => {
                let seeds = hyperboloid::chart_seeds(x, order)?;
                let lifted = hyperboloid::lift_jets(&seeds);
                let m = matrix.nrows();
                let moved: Vec<Jet> = (0..m)
                    .map(|a| {
                        let mut acc = lifted[0].scale(matrix[(a, 0)]);
                        for (b, l) in lifted.iter().enumerate().skip(1) {
                            acc = acc.add_scaled(matrix[(a, b)], l);
                        }
                        acc
                    })
                    .collect();
                hyperboloid::project_jets(&moved, self.r_min)
            }
        }
    }
}
