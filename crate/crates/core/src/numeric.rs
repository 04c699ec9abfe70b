//! Small numeric utilities: Gauss-Legendre rules, deterministic summation,
//! unit-sphere constants and least-squares decay fits.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1], by
/// Newton iteration on the Legendre recurrence. Cached per order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    static CACHE: OnceLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("gl cache poisoned").get(&n) {
        return rule.clone();
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_and_derivative(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    let rule = (nodes, weights);
    cache
        .lock()
        .expect("gl cache poisoned")
        .insert(n, rule.clone());
    rule
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    if n == 1 {
        return (x, 1.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Deterministic pairwise summation (order-independent of worker counts as
/// long as the slice itself is deterministic).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        return neumaier_sum(values);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Neumaier-compensated sequential summation.
pub fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Γ(n/2) for positive integer n.
fn gamma_half_integer(n: usize) -> f64 {
    if n % 2 == 0 {
        // Γ(k) = (k-1)!
        let k = n / 2;
        (1..k).map(|i| i as f64).product()
    } else {
        // Γ(m + 1/2) = (2m)! √π / (4^m m!)
        let m = n / 2;
        let fact = |k: usize| -> f64 { (1..=k).map(|i| i as f64).product() };
        fact(2 * m) * std::f64::consts::PI.sqrt() / (4.0f64.powi(m as i32) * fact(m))
    }
}

/// Area ω_{n−1} of the unit (n−1)-sphere in Rⁿ: 2 π^{n/2} / Γ(n/2).
pub fn unit_sphere_area(n: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / gamma_half_integer(n)
}

/// ADM-convention normalization constant c_n = 2(n−1)ω_{n−1} (16π for n=3).
pub fn adm_constant(n: usize) -> f64 {
    2.0 * (n as f64 - 1.0) * unit_sphere_area(n)
}

/// Least-squares fit of `y ≈ a + b·φ(x; p)` over a 1-parameter family of
/// decay profiles, scanning p on a grid and refining by golden section.
/// Returns (a, b, p, rms_residual).
pub fn fit_decay(
    xs: &[f64],
    ys: &[f64],
    profile: impl Fn(f64, f64) -> f64,
    p_range: (f64, f64),
) -> (f64, f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 3, "decay fit needs at least 3 samples");
    let eval = |p: f64| -> (f64, f64, f64) {
        // Linear least squares for (a, b) at fixed p.
        let phis: Vec<f64> = xs.iter().map(|&x| profile(x, p)).collect();
        let n = xs.len() as f64;
        let sp: f64 = phis.iter().sum();
        let spp: f64 = phis.iter().map(|v| v * v).sum();
        let sy: f64 = ys.iter().sum();
        let spy: f64 = phis.iter().zip(ys.iter()).map(|(u, v)| u * v).sum();
        let det = n * spp - sp * sp;
        if det.abs() < 1e-300 {
            return (sy / n, 0.0, f64::INFINITY);
        }
        let a = (spp * sy - sp * spy) / det;
        let b = (n * spy - sp * sy) / det;
        let rms = (xs
            .iter()
            .zip(ys.iter())
            .zip(phis.iter())
            .map(|((_, &y), &ph)| {
                let r = y - a - b * ph;
                r * r
            })
            .sum::<f64>()
            / n)
            .sqrt();
        (a, b, rms)
    };
    // Coarse grid then golden-section refinement, deterministic.
    let grid = 64;
    let mut best_p = p_range.0;
    let mut best_rms = f64::INFINITY;
    for k in 0..=grid {
        let p = p_range.0 + (p_range.1 - p_range.0) * k as f64 / grid as f64;
        let (_, _, rms) = eval(p);
        if rms < best_rms {
            best_rms = rms;
            best_p = p;
        }
    }
    let step = (p_range.1 - p_range.0) / grid as f64;
    let (mut lo, mut hi) = (
        (best_p - step).max(p_range.0),
        (best_p + step).min(p_range.1),
    );
    let inv_phi = 0.618_033_988_749_894_9;
    for _ in 0..60 {
        let m1 = hi - inv_phi * (hi - lo);
        let m2 = lo + inv_phi * (hi - lo);
        if eval(m1).2 <= eval(m2).2 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let p = 0.5 * (lo + hi);
    let (a, b, rms) = eval(p);
    (a, b, p, rms)
}
