//! Simulation of censored clustered event times and replication studies.

use std::fmt::Write as _;

use log::warn;
use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::copula::Family;
use crate::error::{Error, Result};
use crate::estimation::{fit, replicate_seed, template, FitMethod, FitOptions, FitResult};
use crate::likelihood::{exact_sum, ObservedCluster};
use crate::margins::{pseudo_observations, MarginMethod, WeibullMargin};
use crate::vine::DVineModel;

/// Event-time margins of the three-dimensional design.
pub const EVENT_MARGINS: [(f64, f64); 3] = [(3.39, 3.32), (4.20, 2.21), (3.53, 2.68)];

/// Fourth event-time margin used for four-dimensional designs.
pub const FOURTH_MARGIN: (f64, f64) = (4.0, 2.5);

/// Common censoring margin of the lightly censored design.
pub const CENSOR_LIGHT: (f64, f64) = (6.72, 3.11);

/// Common censoring margin of the heavily censored design.
pub const CENSOR_HEAVY: (f64, f64) = (6.72, 2.17);

/// Weibull margins from `(shape, scale)` pairs.
pub fn weibulls(spec: &[(f64, f64)]) -> Vec<WeibullMargin> {
    spec.iter()
        .map(|&(a, l)| WeibullMargin { alpha: a, lambda: l })
        .collect()
}

/// Three-dimensional event margins, plus [`FOURTH_MARGIN`] when `d = 4`.
pub fn event_margins(d: usize) -> Vec<WeibullMargin> {
    let mut m = weibulls(&EVENT_MARGINS);
    if d == 4 {
        m.push(weibulls(&[FOURTH_MARGIN])[0]);
    }
    m.truncate(d);
    m
}

/// Clayton–Clayton–Frank vine with Kendall's tau 0.6, 0.6, 0.3.
pub fn ccf_model() -> DVineModel<f64> {
    DVineModel::from_params(
        vec![0, 1, 2],
        &[Family::Clayton, Family::Clayton, Family::Frank],
        &[3.0, 3.0, 2.92],
    )
    .expect("valid preset")
}

/// Gumbel–Gumbel–Frank vine with Kendall's tau 0.6, 0.6, 0.3.
pub fn ggf_model() -> DVineModel<f64> {
    DVineModel::from_params(
        vec![0, 1, 2],
        &[Family::Gumbel, Family::Gumbel, Family::Frank],
        &[2.5, 2.5, 2.92],
    )
    .expect("valid preset")
}

/// Four-dimensional all-Frank D-vine along the path 1-3-4-2.
pub fn frank_path_model() -> DVineModel<f64> {
    DVineModel::from_params(
        vec![0, 2, 3, 1],
        &[Family::Frank; 6],
        &[6.5, 6.3, 7.0, 1.7, 2.8, 3.7],
    )
    .expect("valid preset")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginKind {
    /// The true event margins.
    Known,
    WeibullMle,
    Kme,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub model: DVineModel<f64>,
    pub margins: Vec<WeibullMargin>,
    /// Common censoring time distribution; `None` means complete data.
    pub censor: Option<WeibullMargin>,
    pub n: usize,
    pub replicates: usize,
    pub margin_method: MarginKind,
    pub method: FitMethod,
    pub seed: u64,
    pub fit: FitOptions,
}

impl StudyConfig {
    pub fn new(model: DVineModel<f64>, margins: Vec<WeibullMargin>, n: usize, replicates: usize) -> Self {
        Self {
            model,
            margins,
            censor: None,
            n,
            replicates,
            margin_method: MarginKind::Known,
            method: FitMethod::Global,
            seed: 1,
            fit: FitOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::Domain(format!("study needs n >= 10, got {}", self.n)));
        }
        if self.replicates < 1 {
            return Err(Error::Domain("study needs at least one replicate".into()));
        }
        if self.margins.len() != self.model.dim() {
            return Err(Error::Structure(format!(
                "{} margins for a {}-dimensional model",
                self.margins.len(),
                self.model.dim()
            )));
        }
        Ok(())
    }

    fn margin_method(&self) -> MarginMethod {
        match self.margin_method {
            MarginKind::Known => MarginMethod::Known(self.margins.clone()),
            MarginKind::WeibullMle => MarginMethod::WeibullMle,
            MarginKind::Kme => MarginMethod::Kme,
        }
    }
}

/// Simulated clusters of replicate `r`: vine draws pushed through the
/// inverse survival functions, then censored by one common time per
/// cluster.
pub fn generate_dataset(cfg: &StudyConfig, r: u64) -> Result<Vec<ObservedCluster>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(cfg.seed, r));
    let u = cfg.model.sample_with(cfg.n, &mut rng)?;
    u.iter()
        .enumerate()
        .map(|(i, ui)| {
            let c = match &cfg.censor {
                Some(g) => g.inv(rng.sample(Open01)),
                None => f64::INFINITY,
            };
            let mut y = Vec::with_capacity(ui.len());
            let mut delta = Vec::with_capacity(ui.len());
            for (m, &uij) in cfg.margins.iter().zip(ui) {
                let t = m.inv(uij);
                y.push(t.min(c));
                delta.push(u8::from(t <= c));
            }
            ObservedCluster::new((i + 1).to_string(), y, delta)
        })
        .collect()
}

/// Fraction of censored entries overall and per coordinate.
pub fn censoring_rates(data: &[ObservedCluster]) -> (f64, Vec<f64>) {
    let Some(first) = data.first() else {
        return (0.0, Vec::new());
    };
    let d = first.dim();
    let n = data.len() as f64;
    let marginal: Vec<f64> = (0..d)
        .map(|j| data.iter().filter(|c| c.delta[j] == 0).count() as f64 / n)
        .collect();
    let overall = marginal.iter().sum::<f64>() / d as f64;
    (overall, marginal)
}

/// Mean, bias, variance (divisor R) and mean squared error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measures {
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub s2: f64,
    pub mse: f64,
}

pub fn performance_measures(estimates: &[f64], truth: f64) -> Result<Measures> {
    if estimates.is_empty() {
        return Err(Error::Data("no estimates".into()));
    }
    let r = estimates.len() as f64;
    let mean = exact_sum(estimates) / r;
    let dev: Vec<f64> = estimates.iter().map(|x| (x - mean).powi(2)).collect();
    let s2 = exact_sum(&dev) / r;
    let bias = mean - truth;
    Ok(Measures {
        truth,
        mean,
        bias,
        s2,
        mse: bias * bias + s2,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub labels: Vec<String>,
    pub theta: Vec<Measures>,
    pub tau: Vec<Measures>,
    /// Successful replicate estimates, in replicate order.
    pub estimates: Vec<Vec<f64>>,
    pub failed: usize,
    pub seed: u64,
}

impl StudyResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "parameter,theta_true,theta_mean,theta_bias,theta_s2,theta_mse,tau_true,tau_mean,tau_bias,tau_s2,tau_mse\n",
        );
        for (k, label) in self.labels.iter().enumerate() {
            let (t, k2) = (&self.theta[k], &self.tau[k]);
            let _ = writeln!(
                out,
                "{label},{},{},{},{},{},{},{},{},{},{}",
                t.truth, t.mean, t.bias, t.s2, t.mse, k2.truth, k2.mean, k2.bias, k2.s2, k2.mse
            );
        }
        out
    }
}

/// Fit every replicate and aggregate. Global fits start from the
/// sequential estimate. More than 10% failed replicates is an error.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let families = cfg.model.families();
    let tmpl = template(cfg.model.order().to_vec(), &families)?;
    let method = cfg.margin_method();
    let outcomes: Vec<Result<FitResult>> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let data = generate_dataset(cfg, r)?;
            let pcs = pseudo_observations(&data, &method)?;
            fit(&tmpl, &pcs, cfg.method, &cfg.fit)
        })
        .collect();
    let mut fits = Vec::with_capacity(outcomes.len());
    let mut failed = 0;
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(f) => fits.push(f),
            Err(e) => {
                warn!("replicate {r} failed: {e}");
                failed += 1;
            }
        }
    }
    if failed * 10 > cfg.replicates {
        return Err(Error::Numerical(format!(
            "{failed} of {} replicates failed",
            cfg.replicates
        )));
    }
    let truth_theta = cfg.model.thetas();
    let truth_tau: Vec<f64> = cfg.model.edges().iter().map(|e| e.tau()).collect();
    let k = truth_theta.len();
    let theta = (0..k)
        .map(|e| performance_measures(&fits.iter().map(|f| f.theta_hat[e]).collect::<Vec<_>>(), truth_theta[e]))
        .collect::<Result<Vec<_>>>()?;
    let tau = (0..k)
        .map(|e| performance_measures(&fits.iter().map(|f| f.tau_hat[e]).collect::<Vec<_>>(), truth_tau[e]))
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyResult {
        labels: cfg.model.edge_labels().iter().map(|l| l.to_string()).collect(),
        theta,
        tau,
        estimates: fits.into_iter().map(|f| f.theta_hat).collect(),
        failed,
        seed: cfg.seed,
    })
}
