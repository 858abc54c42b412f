//! Censored vine loglikelihood over clusters of event times.
//!
//! Each cluster contributes the log of the mixed partial derivative of the
//! vine CDF with respect to its observed coordinates. Contributions are
//! evaluated in parallel and reduced with an exact sum, so the total does
//! not depend on cluster order or on the thread schedule.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::scalar::Scalar;
use crate::vine::{CensoringPattern, DVineModel, Tree1Grid};

/// Pseudo-observations are kept this far away from 0 and 1.
pub const PSEUDO_CLAMP: f64 = 1e-5;

/// Smallest value a contribution is allowed to take before the log.
pub const LOG_FLOOR: f64 = 1e-300;

/// One cluster as recorded: observed times and event indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedCluster {
    pub id: String,
    pub y: Vec<f64>,
    pub delta: Vec<u8>,
}

impl ObservedCluster {
    pub fn new(id: impl Into<String>, y: Vec<f64>, delta: Vec<u8>) -> Result<Self> {
        let id = id.into();
        if y.len() != delta.len() {
            return Err(Error::Data(format!(
                "cluster {id}: {} times but {} indicators",
                y.len(),
                delta.len()
            )));
        }
        if let Some(bad) = y.iter().find(|t| !t.is_finite() || **t < 0.0) {
            return Err(Error::Data(format!("cluster {id}: invalid time {bad}")));
        }
        if let Some(bad) = delta.iter().find(|&&d| d > 1) {
            return Err(Error::Data(format!(
                "cluster {id}: event indicator must be 0 or 1, got {bad}"
            )));
        }
        Ok(Self { id, y, delta })
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    pub fn pattern(&self) -> CensoringPattern {
        CensoringPattern::new(self.delta.iter().map(|&d| d == 1).collect())
    }
}

/// A cluster on the copula scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoCluster<T> {
    pub id: String,
    pub u: Vec<T>,
    pub delta: Vec<u8>,
    /// Whether any coordinate had to be pulled into `[1e-5, 1 - 1e-5]`.
    pub clamped: bool,
}

impl<T: Scalar> PseudoCluster<T> {
    pub fn new(id: impl Into<String>, u: Vec<T>, delta: Vec<u8>) -> Result<Self> {
        let id = id.into();
        if u.len() != delta.len() {
            return Err(Error::Data(format!(
                "cluster {id}: {} values but {} indicators",
                u.len(),
                delta.len()
            )));
        }
        if let Some(bad) = delta.iter().find(|&&d| d > 1) {
            return Err(Error::Data(format!(
                "cluster {id}: event indicator must be 0 or 1, got {bad}"
            )));
        }
        let lo = T::lit(PSEUDO_CLAMP);
        let hi = T::one() - lo;
        let mut clamped = false;
        let mut out = Vec::with_capacity(u.len());
        for v in u {
            if v.is_nan() {
                return Err(Error::Data(format!("cluster {id}: pseudo-observation is NaN")));
            }
            let c = v.max(lo).min(hi);
            clamped |= c != v;
            out.push(c);
        }
        Ok(Self {
            id,
            u: out,
            delta,
            clamped,
        })
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn pattern(&self) -> CensoringPattern {
        CensoringPattern::new(self.delta.iter().map(|&d| d == 1).collect())
    }
}

/// Joint censoring indicator of a vector of event indicators.
pub fn censoring_pattern(delta: &[u8]) -> Result<CensoringPattern> {
    CensoringPattern::from_indicators(delta)
}

fn log_contribution<T: Scalar>(value: T, id: &str) -> Result<T> {
    if value.is_nan() || value < T::zero() {
        return Err(Error::Numerical(format!(
            "cluster {id}: likelihood contribution {value} is not a nonnegative number"
        )));
    }
    Ok(value.max(T::lit(LOG_FLOOR)).ln())
}

/// Loglikelihood contribution of a single cluster.
pub fn cluster_loglik<T: Scalar>(
    m: &DVineModel<T>,
    pc: &PseudoCluster<T>,
    rule: &GaussLegendre<T>,
) -> Result<T> {
    if pc.dim() != m.dim() {
        return Err(Error::Structure(format!(
            "cluster {} has dimension {} but the model has {}",
            pc.id,
            pc.dim(),
            m.dim()
        )));
    }
    let pattern = pc.pattern();
    if pattern.is_complete() {
        let v = m.ln_density(&pc.u)?;
        if v.is_nan() {
            return Err(Error::Numerical(format!("cluster {}: log density is NaN", pc.id)));
        }
        return Ok(v.max(T::lit(LOG_FLOOR).ln()));
    }
    let value = m
        .partial_derivative(&pattern, &pc.u, rule)
        .map_err(|e| Error::Numerical(format!("cluster {}: {e}", pc.id)))?;
    log_contribution(value, &pc.id)
}

/// Censored loglikelihood of a dataset.
pub fn total_loglik<T: Scalar>(
    m: &DVineModel<T>,
    data: &[PseudoCluster<T>],
    rule: &GaussLegendre<T>,
) -> Result<T> {
    if data.is_empty() {
        return Err(Error::Data("no clusters".into()));
    }
    let terms: Vec<Result<T>> = data
        .par_iter()
        .map(|pc| cluster_loglik(m, pc, rule))
        .collect();
    sum_terms(terms)
}

fn sum_terms<T: Scalar>(terms: Vec<Result<T>>) -> Result<T> {
    let mut values = Vec::with_capacity(terms.len());
    for (i, t) in terms.into_iter().enumerate() {
        values.push(t.map_err(|e| annotate(e, i))?.to_f64_lossy());
    }
    Ok(T::lit(exact_sum(&values)))
}

fn annotate(e: Error, index: usize) -> Error {
    match e {
        Error::Numerical(msg) => Error::Numerical(format!("at index {index}: {msg}")),
        Error::Structure(msg) => Error::Structure(format!("at index {index}: {msg}")),
        Error::Domain(msg) => Error::Domain(format!("at index {index}: {msg}")),
        Error::Data(msg) => Error::Data(format!("at index {index}: {msg}")),
    }
}

/// Correctly rounded sum of `f64` values (Shewchuk's partials, with the
/// half-way correction used by Python's `math.fsum`). The result does not
/// depend on the order of `xs`.
pub fn exact_sum(xs: &[f64]) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    let mut special = 0.0;
    for &x0 in xs {
        if !x0.is_finite() {
            special += x0;
            continue;
        }
        let mut x = x0;
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    if special != 0.0 || special.is_nan() {
        return special;
    }
    let Some(mut hi) = partials.pop() else {
        return 0.0;
    };
    let mut lo = 0.0;
    while let Some(y) = partials.pop() {
        let x = hi;
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if let Some(&next) = partials.last() {
        if (lo < 0.0 && next < 0.0) || (lo > 0.0 && next > 0.0) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
    }
    hi
}

/// Tree-1 grids of a dataset, fixed once the first-tree copulas are fixed.
/// Evaluating the likelihood for new higher-tree parameters then only
/// touches the higher-tree copulas.
#[derive(Debug, Clone)]
pub struct Tree1Cache<T> {
    ids: Vec<String>,
    grids: Vec<Tree1Grid<T>>,
}

impl<T: Scalar> Tree1Cache<T> {
    pub fn new(m: &DVineModel<T>, data: &[PseudoCluster<T>], rule: &GaussLegendre<T>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Data("no clusters".into()));
        }
        let grids = data
            .par_iter()
            .map(|pc| {
                if pc.dim() != m.dim() {
                    return Err(Error::Structure(format!(
                        "cluster {} has dimension {} but the model has {}",
                        pc.id,
                        pc.dim(),
                        m.dim()
                    )));
                }
                m.tree1_grid(&pc.pattern(), &pc.u, rule)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            ids: data.iter().map(|pc| pc.id.clone()).collect(),
            grids,
        })
    }

    pub fn len(&self) -> usize {
        self.grids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grids.is_empty()
    }

    /// Total loglikelihood under `m`, whose first-tree copulas must be the
    /// ones the cache was built with.
    pub fn loglik(&self, m: &DVineModel<T>) -> Result<T> {
        let terms: Vec<Result<T>> = self
            .grids
            .par_iter()
            .zip(self.ids.par_iter())
            .map(|(g, id)| log_contribution(m.upper_trees(g), id))
            .collect();
        sum_terms(terms)
    }
}
