//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] carries the value and all partial derivatives of a scalar
//! quantity up to a fixed order at a chart point. Internally the slots hold
//! Taylor coefficients `∂^α f / α!` indexed by multi-indices in graded
//! lexicographic order; the partial-derivative view multiplies back by `α!`.
//!
//! Because the ordering is graded (degree-major), the coefficient list of an
//! order-`J` jet is a prefix-compatible extension of the order-`J-1` list:
//! truncation is a vector truncation and no reindexing is ever needed.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

/// Largest jet order the shape tables support. Orders above this are refused
/// early instead of silently blowing up table sizes.
pub const MAX_ORDER: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JetError {
    #[error("jet order {0} exceeds supported maximum {MAX_ORDER}")]
    OrderTooLarge(usize),
    #[error("jet dimension must be at least 1")]
    ZeroDimension,
    #[error("singular jet operation: {op} ({reason})")]
    Singular { op: &'static str, reason: String },
    #[error("jet shape mismatch: {0}")]
    ShapeMismatch(String),
}

fn singular(op: &'static str, reason: impl Into<String>) -> JetError {
    JetError::Singular {
        op,
        reason: reason.into(),
    }
}

/// Precomputed index tables for jets in `dim` variables truncated at `order`.
pub struct JetShape {
    dim: usize,
    order: usize,
    /// Multi-indices in graded lexicographic order.
    indices: Vec<Vec<u8>>,
    /// α! per slot, as f64.
    factorials: Vec<f64>,
    /// Multiplication table: all (a, b, target) with |α_a| + |α_b| <= order.
    prod_triples: Vec<(u32, u32, u32)>,
    /// `succ[pos * dim + i]` = slot of α + e_i (valid when |α| < order).
    succ: Vec<u32>,
    /// Number of slots of degree <= d, for d = 0..=order.
    counts_by_degree: Vec<usize>,
}

impl fmt::Debug for JetShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JetShape(dim={}, order={})", self.dim, self.order)
    }
}

fn enumerate_indices(dim: usize, order: usize) -> Vec<Vec<u8>> {
    let mut all = Vec::new();
    let mut current = vec![0u8; dim];
    for degree in 0..=order {
        fill_degree(&mut all, &mut current, dim, 0, degree as u8);
    }
    all
}

fn fill_degree(out: &mut Vec<Vec<u8>>, current: &mut Vec<u8>, dim: usize, pos: usize, left: u8) {
    if pos == dim - 1 {
        current[pos] = left;
        out.push(current.clone());
        return;
    }
    // Lexicographic within a degree class: larger first component earlier.
    for k in (0..=left).rev() {
        current[pos] = k;
        fill_degree(out, current, dim, pos + 1, left - k);
    }
}

impl JetShape {
    fn build(dim: usize, order: usize) -> Result<Arc<JetShape>, JetError> {
        if dim == 0 {
            return Err(JetError::ZeroDimension);
        }
        if order > MAX_ORDER {
            return Err(JetError::OrderTooLarge(order));
        }
        let indices = enumerate_indices(dim, order);
        let mut lookup: HashMap<Vec<u8>, u32> = HashMap::with_capacity(indices.len());
        for (pos, idx) in indices.iter().enumerate() {
            lookup.insert(idx.clone(), pos as u32);
        }
        let degrees: Vec<u8> = indices
            .iter()
            .map(|idx| idx.iter().map(|&k| k as u16).sum::<u16>() as u8)
            .collect();
        let factorials: Vec<f64> = indices
            .iter()
            .map(|idx| idx.iter().map(|&k| fact(k as usize)).product())
            .collect();
        let mut counts_by_degree = vec![0usize; order + 1];
        for &d in &degrees {
            for slot in counts_by_degree.iter_mut().skip(d as usize) {
                *slot += 1;
            }
        }
        let mut prod_triples = Vec::new();
        for (a, ia) in indices.iter().enumerate() {
            for (b, ib) in indices.iter().enumerate() {
                if degrees[a] as usize + degrees[b] as usize > order {
                    continue;
                }
                let sum: Vec<u8> = ia.iter().zip(ib.iter()).map(|(x, y)| x + y).collect();
                let target = lookup[&sum];
                prod_triples.push((a as u32, b as u32, target));
            }
        }
        let mut succ = vec![u32::MAX; indices.len() * dim];
        for (pos, idx) in indices.iter().enumerate() {
            if degrees[pos] as usize >= order {
                continue;
            }
            for i in 0..dim {
                let mut next = idx.clone();
                next[i] += 1;
                succ[pos * dim + i] = lookup[&next];
            }
        }
        Ok(Arc::new(JetShape {
            dim,
            order,
            indices,
            factorials,
            prod_triples,
            succ,
            counts_by_degree,
        }))
    }

    pub fn get(dim: usize, order: usize) -> Result<Arc<JetShape>, JetError> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetShape>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet shape cache poisoned");
        if let Some(shape) = guard.get(&(dim, order)) {
            return Ok(shape.clone());
        }
        let shape = JetShape::build(dim, order)?;
        guard.insert((dim, order), shape.clone());
        Ok(shape)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn indices(&self) -> &[Vec<u8>] {
        &self.indices
    }

    fn position(&self, alpha: &[u8]) -> Option<usize> {
        self.indices.iter().position(|idx| idx == alpha)
    }
}

fn fact(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Value plus partial derivatives up to a fixed order at a point.
#[derive(Clone)]
pub struct Jet {
    shape: Arc<JetShape>,
    /// Taylor coefficients ∂^α f / α!, one per multi-index slot.
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Jet(dim={}, order={}, value={})",
            self.dim(),
            self.order(),
            self.value()
        )
    }
}

impl Jet {
    pub fn constant(shape: Arc<JetShape>, value: f64) -> Jet {
        let mut coeffs = vec![0.0; shape.len()];
        coeffs[0] = value;
        Jet { shape, coeffs }
    }

    /// Coordinate seed: value `x_i`, first derivative 1 in slot `i`.
    pub fn variable(shape: Arc<JetShape>, i: usize, value: f64) -> Jet {
        assert!(i < shape.dim(), "variable index out of range");
        let mut jet = Jet::constant(shape, value);
        if jet.order() >= 1 {
            let pos = jet.shape.succ[i]; // slot of e_i = 0-index successor
            jet.coeffs[pos as usize] = 1.0;
        }
        jet
    }

    pub fn from_coeffs(shape: Arc<JetShape>, coeffs: Vec<f64>) -> Jet {
        assert_eq!(shape.len(), coeffs.len(), "coefficient count mismatch");
        Jet { shape, coeffs }
    }

    pub fn shape(&self) -> &Arc<JetShape> {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim
    }

    pub fn order(&self) -> usize {
        self.shape.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Partial derivative ∂^α f (Taylor coefficient times α!).
    pub fn partial(&self, alpha: &[u8]) -> f64 {
        let pos = self
            .shape
            .position(alpha)
            .expect("multi-index outside jet shape");
        self.coeffs[pos] * self.shape.factorials[pos]
    }

    /// First derivative ∂_i f.
    pub fn d(&self, i: usize) -> f64 {
        assert!(self.order() >= 1, "jet order too low for a first derivative");
        self.coeffs[self.shape.succ[i] as usize]
    }

    /// Taylor coefficients in graded-lex slot order.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Maximum |coefficient| over all slots; a cheap magnitude proxy.
    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn truncated(&self, order: usize) -> Result<Jet, JetError> {
        if order > self.order() {
            return Err(JetError::ShapeMismatch(format!(
                "cannot raise jet order {} to {order}",
                self.order()
            )));
        }
        if order == self.order() {
            return Ok(self.clone());
        }
        let shape = JetShape::get(self.dim(), order)?;
        let coeffs = self.coeffs[..shape.len()].to_vec();
        Ok(Jet { shape, coeffs })
    }

    fn common_shape(&self, other: &Jet) -> Result<Arc<JetShape>, JetError> {
        if self.dim() != other.dim() {
            return Err(JetError::ShapeMismatch(format!(
                "dimension {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        let order = self.order().min(other.order());
        JetShape::get(self.dim(), order)
    }

    pub fn add(&self, other: &Jet) -> Jet {
        let shape = self.common_shape(other).expect("jet dims must agree");
        let n = shape.len();
        let coeffs = (0..n).map(|k| self.coeffs[k] + other.coeffs[k]).collect();
        Jet { shape, coeffs }
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        let shape = self.common_shape(other).expect("jet dims must agree");
        let n = shape.len();
        let coeffs = (0..n).map(|k| self.coeffs[k] - other.coeffs[k]).collect();
        Jet { shape, coeffs }
    }

    pub fn neg(&self) -> Jet {
        Jet {
            shape: self.shape.clone(),
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            shape: self.shape.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_scaled(&self, s: f64, other: &Jet) -> Jet {
        let shape = self.common_shape(other).expect("jet dims must agree");
        let n = shape.len();
        let coeffs = (0..n)
            .map(|k| self.coeffs[k] + s * other.coeffs[k])
            .collect();
        Jet { shape, coeffs }
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        let shape = self.common_shape(other).expect("jet dims must agree");
        let mut coeffs = vec![0.0; shape.len()];
        for &(a, b, t) in &shape.prod_triples {
            coeffs[t as usize] += self.coeffs[a as usize] * other.coeffs[b as usize];
        }
        Jet { shape, coeffs }
    }

    /// Strip the constant term: the nilpotent part w with f = f(x) + w.
    fn nilpotent(&self) -> Jet {
        let mut w = self.clone();
        w.coeffs[0] = 0.0;
        w
    }

    /// Compose a univariate analytic function: given the Taylor coefficients
    /// `taylor[k] = φ^(k)(value) / k!`, returns the jet of φ∘f.
    pub fn compose_univariate(&self, taylor: &[f64]) -> Jet {
        debug_assert!(taylor.len() >= self.order() + 1);
        let w = self.nilpotent();
        let mut acc = Jet::constant(self.shape.clone(), taylor[self.order()]);
        // Horner in the nilpotent part.
        for k in (0..self.order()).rev() {
            acc = acc.mul(&w);
            acc.coeffs[0] += taylor[k];
        }
        acc
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        let v = self.value();
        if v == 0.0 || !v.is_finite() {
            return Err(singular("recip", format!("value {v}")));
        }
        let mut taylor = vec![0.0; self.order() + 1];
        // d^k/dx^k (1/x) / k! = (-1)^k / x^{k+1}
        let mut c = 1.0 / v;
        for t in taylor.iter_mut() {
            *t = c;
            c *= -1.0 / v;
        }
        Ok(self.compose_univariate(&taylor))
    }

    pub fn div(&self, other: &Jet) -> Result<Jet, JetError> {
        Ok(self.mul(&other.recip()?))
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let taylor: Vec<f64> = (0..=self.order()).map(|k| e / fact(k)).collect();
        self.compose_univariate(&taylor)
    }

    pub fn ln(&self) -> Result<Jet, JetError> {
        let v = self.value();
        if !(v > 0.0) {
            return Err(singular("log", format!("non-positive argument {v}")));
        }
        let mut taylor = vec![0.0; self.order() + 1];
        taylor[0] = v.ln();
        // log^(k)(v) = (-1)^{k-1} (k-1)! / v^k  =>  /k! = (-1)^{k-1} / (k v^k)
        let mut vk = v;
        for (k, t) in taylor.iter_mut().enumerate().skip(1) {
            *t = if k % 2 == 1 { 1.0 } else { -1.0 } / (k as f64 * vk);
            vk *= v;
        }
        Ok(self.compose_univariate(&taylor))
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        let v = self.value();
        if v < 0.0 || (v == 0.0 && self.order() >= 1) {
            return Err(singular("sqrt", format!("argument {v}")));
        }
        if v == 0.0 {
            return Ok(Jet::constant(self.shape.clone(), 0.0));
        }
        self.powf(0.5)
    }

    /// Real power with explicit singularity detection. Integer exponents go
    /// through repeated multiplication so that negative bases stay exact.
    pub fn powf(&self, p: f64) -> Result<Jet, JetError> {
        let rounded = p.round();
        if (p - rounded).abs() < 1e-12 && rounded.abs() <= 512.0 {
            return self.powi(rounded as i64);
        }
        let v = self.value();
        if !(v > 0.0) {
            return Err(singular(
                "pow",
                format!("non-integer exponent {p} with base {v}"),
            ));
        }
        let mut taylor = vec![0.0; self.order() + 1];
        // d^k x^p / k! = p (p-1) ... (p-k+1) x^{p-k} / k!
        let mut coef = 1.0;
        for (k, t) in taylor.iter_mut().enumerate() {
            *t = coef * v.powf(p - k as f64);
            coef *= (p - k as f64) / (k as f64 + 1.0);
        }
        Ok(self.compose_univariate(&taylor))
    }

    pub fn powi(&self, p: i64) -> Result<Jet, JetError> {
        if p < 0 {
            let pos = self.powi(-p)?;
            return pos.recip();
        }
        let mut acc = Jet::constant(self.shape.clone(), 1.0);
        let mut base = self.clone();
        let mut k = p;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        Ok(acc)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let taylor: Vec<f64> = (0..=self.order()).map(|k| cycle[k % 4] / fact(k)).collect();
        self.compose_univariate(&taylor)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let taylor: Vec<f64> = (0..=self.order()).map(|k| cycle[k % 4] / fact(k)).collect();
        self.compose_univariate(&taylor)
    }

    pub fn tan(&self) -> Result<Jet, JetError> {
        let c = self.cos();
        if c.value().abs() < 1e-300 {
            return Err(singular("tan", "argument at a pole of tan"));
        }
        self.sin().div(&c)
    }

    pub fn sinh(&self) -> Jet {
        let s = self.value().sinh();
        let c = self.value().cosh();
        let cycle = [s, c];
        let taylor: Vec<f64> = (0..=self.order()).map(|k| cycle[k % 2] / fact(k)).collect();
        self.compose_univariate(&taylor)
    }

    pub fn cosh(&self) -> Jet {
        let s = self.value().sinh();
        let c = self.value().cosh();
        let cycle = [c, s];
        let taylor: Vec<f64> = (0..=self.order()).map(|k| cycle[k % 2] / fact(k)).collect();
        self.compose_univariate(&taylor)
    }

    pub fn tanh(&self) -> Jet {
        self.sinh().div(&self.cosh()).expect("cosh never vanishes")
    }

    pub fn atan(&self) -> Jet {
        let v = self.value();
        // atan^(k)(v) = (-1)^{k-1} (k-1)! rho^{-k} sin(k theta),
        // rho = sqrt(1+v^2), theta = atan2(1, v).
        let rho = (1.0 + v * v).sqrt();
        let theta = 1.0f64.atan2(v);
        let mut taylor = vec![0.0; self.order() + 1];
        taylor[0] = v.atan();
        let mut rk = rho;
        for (k, t) in taylor.iter_mut().enumerate().skip(1) {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            *t = sign * (k as f64 * theta).sin() / (k as f64 * rk);
            rk *= rho;
        }
        self.compose_univariate(&taylor)
    }

    /// Quadrant-aware arctangent of a jet pair, smooth wherever (x, y) != 0.
    pub fn atan2(y: &Jet, x: &Jet) -> Result<Jet, JetError> {
        let xv = x.value();
        let yv = y.value();
        if xv == 0.0 && yv == 0.0 {
            return Err(singular("atan2", "both arguments vanish"));
        }
        // Two-branch form: constants drop out of all derivatives.
        if xv.abs() >= yv.abs() {
            let base = y.div(x)?.atan();
            let offset = yv.atan2(xv) - (yv / xv).atan();
            Ok(base.add(&Jet::constant(base.shape.clone(), offset)))
        } else {
            let base = x.div(y)?.atan().neg();
            let offset = yv.atan2(xv) + (xv / yv).atan();
            Ok(base.add(&Jet::constant(base.shape.clone(), offset)))
        }
    }

    /// Inverse hyperbolic cosine, valid for value > 1.
    pub fn acosh(&self) -> Result<Jet, JetError> {
        let v = self.value();
        if v <= 1.0 {
            return Err(singular("acosh", format!("argument {v} <= 1")));
        }
        let inner = self.mul(self).sub(&Jet::constant(self.shape.clone(), 1.0));
        self.add(&inner.sqrt()?).ln()
    }

    /// arccos via atan2(sqrt(1-u^2), u); singular at u = ±1.
    pub fn acos(&self) -> Result<Jet, JetError> {
        let v = self.value();
        if v.abs() >= 1.0 {
            return Err(singular("acos", format!("argument {v} at or past ±1")));
        }
        let one = Jet::constant(self.shape.clone(), 1.0);
        let s = one.sub(&self.mul(self)).sqrt()?;
        Jet::atan2(&s, self)
    }

    /// Derivative jet ∂_i f, one order lower.
    pub fn partial_jet(&self, i: usize) -> Result<Jet, JetError> {
        if self.order() == 0 {
            return Err(JetError::ShapeMismatch(
                "cannot differentiate an order-0 jet".into(),
            ));
        }
        let shape = JetShape::get(self.dim(), self.order() - 1)?;
        let dim = self.dim();
        let coeffs = (0..shape.len())
            .map(|pos| {
                let src = self.shape.succ[pos * dim + i] as usize;
                let mult = self.shape.indices[pos][i] as f64 + 1.0;
                self.coeffs[src] * mult
            })
            .collect();
        Ok(Jet { shape, coeffs })
    }

    /// Composition with an inner map: `outer` is a jet in `m` variables at the
    /// point `inner[..].value()`, and `inner` gives the jets of the m inner
    /// coordinates in the final variables. Truncates at the minimum order.
    pub fn compose(outer: &Jet, inner: &[Jet]) -> Result<Jet, JetError> {
        if inner.len() != outer.dim() {
            return Err(JetError::ShapeMismatch(format!(
                "outer expects {} inner jets, got {}",
                outer.dim(),
                inner.len()
            )));
        }
        let order = inner
            .iter()
            .map(|j| j.order())
            .min()
            .unwrap_or(0)
            .min(outer.order());
        let dim = inner[0].dim();
        let shape = JetShape::get(dim, order)?;
        // Displacement jets: inner minus its value, nilpotent.
        let disp: Vec<Jet> = inner
            .iter()
            .map(|j| {
                let mut d = j.truncated(order).expect("truncation cannot fail here");
                d.coeffs[0] = 0.0;
                d
            })
            .collect();
        // Powers disp[i]^k for k = 0..=order.
        let mut powers: Vec<Vec<Jet>> = Vec::with_capacity(disp.len());
        for d in &disp {
            let mut col = Vec::with_capacity(order + 1);
            col.push(Jet::constant(shape.clone(), 1.0));
            for k in 1..=order {
                let prev = &col[k - 1];
                col.push(prev.mul(d));
            }
            powers.push(col);
        }
        let mut acc = Jet::constant(shape.clone(), 0.0);
        let outer_trunc = outer.truncated(order)?;
        for (pos, alpha) in outer_trunc.shape.indices.iter().enumerate() {
            let c = outer_trunc.coeffs[pos];
            if c == 0.0 {
                continue;
            }
            let mut term = Jet::constant(shape.clone(), c);
            for (i, &k) in alpha.iter().enumerate() {
                if k > 0 {
                    term = term.mul(&powers[i][k as usize]);
                }
            }
            acc = acc.add(&term);
        }
        Ok(acc)
    }

    /// Number of coefficient slots of degree <= d.
    pub fn slots_up_to_degree(&self, d: usize) -> usize {
        self.shape.counts_by_degree[d.min(self.order())]
    }
}
