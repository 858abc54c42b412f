//! Gauss-Legendre rules on the unit interval.
//!
//! Nodes are computed once in `f64` by Newton iteration on the Legendre
//! three-term recurrence and then converted to the working scalar.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default number of nodes per integration axis.
pub const DEFAULT_NODES: usize = 21;

/// An `n`-point Gauss-Legendre rule mapped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> GaussLegendre<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("quadrature needs at least one node".into()));
        }
        let (x, w) = legendre_nodes(n);
        // [-1, 1] -> [0, 1]
        let nodes = x.iter().map(|&xi| T::lit(0.5 * (xi + 1.0))).collect();
        let weights = w.iter().map(|&wi| T::lit(0.5 * wi)).collect();
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes on `[0, 1]`, ascending.
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Weights summing to one.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Nodes and weights for `[0, upper]`.
    pub fn scaled(&self, upper: T) -> impl Iterator<Item = (T, T)> + '_ {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (x * upper, w * upper))
    }

    /// `∫_a^b f`.
    pub fn integrate<F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        let len = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(a + len * x))
            .fold(T::zero(), |acc, v| acc + v)
            * len
    }
}

/// Adaptive bisection on top of a fixed rule: a panel is accepted when the
/// one-panel and two-half-panel estimates agree to `tol`.
pub fn integrate_adaptive<T, F>(rule: &GaussLegendre<T>, a: T, b: T, tol: T, f: &F) -> Result<T>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    fn recurse<T: Scalar, F: Fn(T) -> T>(
        rule: &GaussLegendre<T>,
        a: T,
        b: T,
        whole: T,
        tol: T,
        f: &F,
        depth: usize,
    ) -> Result<T> {
        let mid = (a + b) / T::lit(2.0);
        let left = rule.integrate(a, mid, f);
        let right = rule.integrate(mid, b, f);
        let split = left + right;
        if (split - whole).abs() <= tol || (b - a).abs() <= T::epsilon() * T::lit(16.0) {
            return Ok(split);
        }
        if depth >= 60 {
            return Err(Error::Numerical(format!(
                "adaptive quadrature did not converge on [{a}, {b}]"
            )));
        }
        // Stop tightening deep in the tree so endpoint singularities converge.
        let half_tol = if depth < 12 { tol / T::lit(2.0) } else { tol };
        Ok(recurse(rule, a, mid, left, half_tol, f, depth + 1)?
            + recurse(rule, mid, b, right, half_tol, f, depth + 1)?)
    }
    let whole = rule.integrate(a, b, f);
    recurse(rule, a, b, whole, tol, f, 0)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th largest root.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
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
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}
