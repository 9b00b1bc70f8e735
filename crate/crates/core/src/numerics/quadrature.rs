use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[a, b]`.
///
/// Nodes are found by Newton iteration on the Legendre polynomial from the
/// usual cosine initial guesses; the rule is exact for polynomials of degree
/// up to `2·order − 1`.
pub fn gauss_legendre(order: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if order < 1 {
        return Err(Error::arg("quadrature order must be at least 1"));
    }
    if !(a <= b) {
        return Err(Error::arg(format!("invalid interval [{a}, {b}]")));
    }
    let (x, w) = reference_rule(order);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    Ok((
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|wi| half * wi).collect(),
    ))
}

/// Rule on `[-1, 1]`, nodes ascending.
fn reference_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// A Gauss–Legendre rule on `[0, 1]`, shared between map components.
#[derive(Debug)]
pub struct UnitRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Cached unit-interval rule of the given order.
pub fn unit_rule(order: usize) -> Arc<UnitRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<UnitRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(order.max(1))
        .or_insert_with(|| {
            let (nodes, weights) = gauss_legendre(order.max(1), 0.0, 1.0).expect("valid order");
            Arc::new(UnitRule { nodes, weights })
        })
        .clone()
}
