//! Marginal survival functions: Kaplan-Meier and Weibull.

use log::warn;

use crate::error::{Error, Result};
use crate::likelihood::{ObservedCluster, PseudoCluster};

/// Right-continuous product-limit step function.
#[derive(Debug, Clone, PartialEq)]
pub struct KaplanMeierCurve {
    /// Distinct event times, increasing.
    pub times: Vec<f64>,
    /// Survival just after each event time.
    pub surv: Vec<f64>,
    /// Largest time in the input, event or not.
    pub max_time: f64,
}

/// Product-limit estimate from `(time, event)` pairs. At a tied time the
/// events are processed before the censorings, i.e. units censored at `t`
/// are still at risk at `t`.
pub fn km_fit(pairs: &[(f64, u8)]) -> Result<KaplanMeierCurve> {
    if pairs.is_empty() {
        return Err(Error::Data("no observations for Kaplan-Meier fit".into()));
    }
    if let Some((t, _)) = pairs.iter().find(|(t, _)| !t.is_finite() || *t < 0.0) {
        return Err(Error::Data(format!("invalid time {t}")));
    }
    let mut sorted = pairs.to_vec();
    // events first among equal times
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let n = sorted.len();
    let mut times = Vec::new();
    let mut surv = Vec::new();
    let mut s = 1.0;
    let mut i = 0;
    while i < n {
        let t = sorted[i].0;
        let at_risk = n - i;
        let mut events = 0usize;
        let mut j = i;
        while j < n && sorted[j].0 == t {
            if sorted[j].1 == 1 {
                events += 1;
            }
            j += 1;
        }
        if events > 0 {
            s *= 1.0 - events as f64 / at_risk as f64;
            times.push(t);
            surv.push(s);
        }
        i = j;
    }
    if times.is_empty() {
        warn!("Kaplan-Meier fit on fully censored input; survival is identically 1");
    }
    Ok(KaplanMeierCurve {
        times,
        surv,
        max_time: sorted[n - 1].0,
    })
}

impl KaplanMeierCurve {
    /// `Ŝ(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            1.0
        } else {
            self.surv[k - 1]
        }
    }

    /// Generalized inverse: the smallest `t` with `Ŝ(t) ≤ p`. Levels below
    /// the last step map to the largest observed time.
    pub fn inverse(&self, p: f64) -> f64 {
        if p >= 1.0 {
            return 0.0;
        }
        let k = self.surv.partition_point(|&s| s > p);
        if k < self.times.len() {
            self.times[k]
        } else {
            self.max_time
        }
    }

    /// `Ŝ(t−)`, the level just before `t`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&x| x < t);
        if k == 0 {
            1.0
        } else {
            self.surv[k - 1]
        }
    }

    /// Pseudo-observation at `t`: `Ŝ(t)`, except that where the curve has
    /// dropped to zero the midpoint of the final step, `Ŝ(t−)/2`, is used.
    /// A zero would otherwise sit on the copula boundary, where a single
    /// cluster can dominate the likelihood.
    pub fn pseudo(&self, t: f64) -> f64 {
        let s = self.eval(t);
        if s > 0.0 {
            s
        } else {
            0.5 * self.left_limit(t.min(self.times.last().copied().unwrap_or(t)))
        }
    }

    /// Survival level after the last event.
    pub fn final_level(&self) -> f64 {
        self.surv.last().copied().unwrap_or(1.0)
    }
}

pub fn km_eval(curve: &KaplanMeierCurve, t: f64) -> f64 {
    curve.eval(t)
}

pub fn km_inverse(curve: &KaplanMeierCurve, p: f64) -> f64 {
    curve.inverse(p)
}

/// `S(t) = exp(-(t/λ)^α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullMargin {
    pub alpha: f64,
    pub lambda: f64,
}

impl WeibullMargin {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!(
                "weibull needs positive finite shape and scale, got alpha={alpha}, lambda={lambda}"
            )));
        }
        Ok(Self { alpha, lambda })
    }

    pub fn surv(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        (-(t / self.lambda).powf(self.alpha)).exp()
    }

    /// Time with survival `p`; `p = 1` gives 0 and `p ≤ 0` gives infinity.
    pub fn inv(&self, p: f64) -> f64 {
        if p >= 1.0 {
            0.0
        } else if p <= 0.0 {
            f64::INFINITY
        } else {
            self.lambda * (-p.ln()).powf(1.0 / self.alpha)
        }
    }

    /// Right-censored loglikelihood `Σ δ log f(t) + (1-δ) log S(t)`.
    pub fn loglik(&self, pairs: &[(f64, u8)]) -> f64 {
        let (a, l) = (self.alpha, self.lambda);
        pairs
            .iter()
            .map(|&(t, d)| {
                let z = (t / l).powf(a);
                if d == 1 {
                    a.ln() - l.ln() + (a - 1.0) * (t / l).ln() - z
                } else {
                    -z
                }
            })
            .sum()
    }
}

pub fn weibull_surv(m: &WeibullMargin, t: f64) -> f64 {
    m.surv(t)
}

pub fn weibull_inv(m: &WeibullMargin, p: f64) -> f64 {
    m.inv(p)
}

fn check_weibull_input(pairs: &[(f64, u8)], min_events: usize) -> Result<usize> {
    let events = pairs.iter().filter(|p| p.1 == 1).count();
    if events < min_events {
        return Err(Error::Data(format!(
            "weibull fit needs at least {min_events} events, got {events}"
        )));
    }
    for &(t, d) in pairs {
        if !t.is_finite() || t < 0.0 || (d == 1 && t == 0.0) {
            return Err(Error::Data(format!("invalid weibull observation ({t}, {d})")));
        }
    }
    Ok(events)
}

/// Scale MLE for a known shape: `λ = (Σ t^α / r)^{1/α}`.
pub fn weibull_mle_fixed_shape(pairs: &[(f64, u8)], alpha: f64) -> Result<WeibullMargin> {
    let r = check_weibull_input(pairs, 1)? as f64;
    let s: f64 = pairs.iter().map(|&(t, _)| t.powf(alpha)).sum();
    WeibullMargin::new(alpha, (s / r).powf(1.0 / alpha))
}

/// Right-censored Weibull MLE. The scale is profiled out and Newton's
/// method runs on `log α` with the analytic first and second derivatives.
pub fn weibull_mle(pairs: &[(f64, u8)]) -> Result<WeibullMargin> {
    let r = check_weibull_input(pairs, 2)? as f64;
    // Work with t / max t so that t^α stays bounded.
    let scale = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    let xs: Vec<(f64, f64, bool)> = pairs
        .iter()
        .map(|&(t, d)| {
            let x = t / scale;
            (x, if x > 0.0 { x.ln() } else { 0.0 }, d == 1)
        })
        .collect();
    let sum_log_events: f64 = xs.iter().filter(|p| p.2).map(|p| p.1).sum();

    // profile loglik in β = ln α, with first and second derivatives in β
    let profile = |beta: f64| -> (f64, f64, f64) {
        let a = beta.exp();
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &(x, lx, _) in &xs {
            if x > 0.0 {
                let p = x.powf(a);
                s0 += p;
                s1 += p * lx;
                s2 += p * lx * lx;
            }
        }
        let m1 = s1 / s0;
        let var = s2 / s0 - m1 * m1;
        let value = r * a.ln() + (a - 1.0) * sum_log_events - r * (s0 / r).ln() - r;
        let d_alpha = r / a + sum_log_events - r * m1;
        let dd_alpha = -r / (a * a) - r * var;
        (value, a * d_alpha, a * d_alpha + a * a * dd_alpha)
    };

    let mut beta = 0.0;
    let (mut value, mut grad, mut hess) = profile(beta);
    let mut converged = false;
    for _ in 0..200 {
        if grad.abs() < 1e-10 * r.max(1.0) {
            converged = true;
            break;
        }
        let mut step = if hess < 0.0 { -grad / hess } else { grad.signum() * 0.5 };
        step = step.clamp(-2.0, 2.0);
        let mut accepted = false;
        for _ in 0..60 {
            let (v, g, h) = profile(beta + step);
            if v.is_finite() && v >= value - 1e-12 * value.abs().max(1.0) {
                beta += step;
                value = v;
                grad = g;
                hess = h;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !converged && grad.abs() >= 1e-6 {
        return Err(Error::Numerical(format!(
            "weibull MLE did not converge (log-shape {beta}, gradient {grad})"
        )));
    }
    let alpha = beta.exp();
    let s0: f64 = xs.iter().filter(|p| p.0 > 0.0).map(|p| p.0.powf(alpha)).sum();
    WeibullMargin::new(alpha, scale * (s0 / r).powf(1.0 / alpha))
}

/// How margins are turned into pseudo-observations.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginMethod {
    Kme,
    WeibullMle,
    Known(Vec<WeibullMargin>),
}

/// A fitted marginal survival function.
#[derive(Debug, Clone, PartialEq)]
pub enum Margin {
    KaplanMeier(KaplanMeierCurve),
    Weibull(WeibullMargin),
}

impl Margin {
    pub fn surv(&self, t: f64) -> f64 {
        match self {
            Margin::KaplanMeier(c) => c.eval(t),
            Margin::Weibull(w) => w.surv(t),
        }
    }

    /// Value used as a pseudo-observation; differs from [`Margin::surv`]
    /// only where a Kaplan-Meier curve reaches zero.
    pub fn pseudo(&self, t: f64) -> f64 {
        match self {
            Margin::KaplanMeier(c) => c.pseudo(t),
            Margin::Weibull(w) => w.surv(t),
        }
    }

    pub fn inverse(&self, p: f64) -> f64 {
        match self {
            Margin::KaplanMeier(c) => c.inverse(p),
            Margin::Weibull(w) => w.inv(p),
        }
    }
}

/// Column `j` of a dataset as `(time, event)` pairs.
pub fn column(data: &[ObservedCluster], j: usize) -> Vec<(f64, u8)> {
    data.iter().map(|c| (c.y[j], c.delta[j])).collect()
}

/// Fit one margin per coordinate.
pub fn fit_margins(data: &[ObservedCluster], method: &MarginMethod) -> Result<Vec<Margin>> {
    let d = check_clusters(data)?;
    match method {
        MarginMethod::Known(ms) => {
            if ms.len() != d {
                return Err(Error::Data(format!(
                    "{} known margins supplied for {d}-dimensional data",
                    ms.len()
                )));
            }
            Ok(ms.iter().copied().map(Margin::Weibull).collect())
        }
        MarginMethod::Kme => (0..d)
            .map(|j| km_fit(&column(data, j)).map(Margin::KaplanMeier))
            .collect(),
        MarginMethod::WeibullMle => (0..d)
            .map(|j| weibull_mle(&column(data, j)).map(Margin::Weibull))
            .collect(),
    }
}

fn check_clusters(data: &[ObservedCluster]) -> Result<usize> {
    let first = data.first().ok_or_else(|| Error::Data("no clusters".into()))?;
    let d = first.dim();
    if let Some(c) = data.iter().find(|c| c.dim() != d || c.delta.len() != d) {
        return Err(Error::Data(format!(
            "cluster {} has dimension {} but the first cluster has {d}",
            c.id,
            c.dim()
        )));
    }
    Ok(d)
}

/// `u_ij = S_j(y_ij)` for fitted margins. Clusters whose Kaplan-Meier
/// value was zero are marked `clamped`, like those moved by the clamp.
pub fn apply_margins(data: &[ObservedCluster], margins: &[Margin]) -> Result<Vec<PseudoCluster<f64>>> {
    data.iter()
        .map(|c| {
            if c.dim() != margins.len() {
                return Err(Error::Data(format!(
                    "cluster {} has dimension {} but {} margins were given",
                    c.id,
                    c.dim(),
                    margins.len()
                )));
            }
            let u: Vec<f64> = c.y.iter().zip(margins).map(|(&t, m)| m.pseudo(t)).collect();
            let tail = c.y.iter().zip(margins).any(|(&t, m)| m.surv(t) == 0.0);
            let mut pc = PseudoCluster::new(c.id.clone(), u, c.delta.clone())?;
            pc.clamped |= tail;
            Ok(pc)
        })
        .collect()
}

/// Pseudo-observations under the chosen marginal method.
pub fn pseudo_observations(
    data: &[ObservedCluster],
    method: &MarginMethod,
) -> Result<Vec<PseudoCluster<f64>>> {
    let margins = fit_margins(data, method)?;
    apply_margins(data, &margins)
}
