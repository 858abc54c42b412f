//! Copula parameter estimation: pairwise censored fits, first-tree
//! sequential and global likelihood maximization, parametric bootstrap.

use std::fmt::Write as _;

use log::{debug, warn};
use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::copula::{tau_to_theta, theta_to_tau, Family, PairCopula};
use crate::error::{Error, Result};
use crate::likelihood::{exact_sum, total_loglik, ObservedCluster, PseudoCluster, Tree1Cache};
use crate::margins::{column, km_fit, pseudo_observations, KaplanMeierCurve, MarginMethod};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::quadrature::{GaussLegendre, DEFAULT_NODES};
use crate::vine::DVineModel;

/// Kendall's tau used for pairwise starting values is floored here.
const START_TAU_FLOOR: f64 = 0.05;
const START_TAU_CAP: f64 = 0.9;

/// Starting Kendall's tau for higher-tree edges.
const UPPER_START_TAU: f64 = 0.1;

/// Unconstrained coordinate of a family parameter.
pub fn transform_params(family: Family, theta: f64) -> Result<f64> {
    match family {
        Family::Clayton if theta > 0.0 => Ok(theta.ln()),
        Family::Gumbel if theta >= 1.0 => Ok((theta - 1.0).ln()),
        Family::Frank => Ok(theta),
        Family::Independence => Ok(0.0),
        _ => Err(Error::Domain(format!("{family} parameter {theta} out of range"))),
    }
}

/// Inverse of [`transform_params`].
pub fn inverse_transform(family: Family, z: f64) -> f64 {
    match family {
        Family::Clayton => z.exp(),
        Family::Gumbel => 1.0 + z.exp(),
        Family::Frank => z,
        Family::Independence => 0.0,
    }
}

/// Sample Kendall's tau (no tie correction; continuous data assumed).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let mut s: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            let a = (x[i] - x[j]) * (y[i] - y[j]);
            if a > 0.0 {
                s += 1;
            } else if a < 0.0 {
                s -= 1;
            }
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}

/// Deterministic per-replicate seed (SplitMix64 of the master seed and the
/// index).
pub fn replicate_seed(master: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(master) ^ index)
}

/// One bivariate observation on the copula scale with its two indicators.
pub type CensoredPair = (f64, f64, u8, u8);

/// Bivariate censored loglikelihood: `C`, either h-function, or the
/// density, depending on which coordinates are observed.
pub fn pair_loglik(c: &PairCopula<f64>, pairs: &[CensoredPair]) -> f64 {
    let terms: Vec<f64> = pairs
        .iter()
        .map(|&(u, v, du, dv)| {
            let value = match (du, dv) {
                (1, 1) => return c.ln_pdf(u, v),
                (1, _) => c.h(v, u),
                (_, 1) => c.h(u, v),
                _ => c.cdf(u, v),
            };
            value.max(1e-300).ln()
        })
        .collect();
    exact_sum(&terms)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairFit {
    pub theta: f64,
    pub loglik: f64,
    pub evals: usize,
    /// The estimate sits at (or near) the edge of the family's range.
    pub boundary: bool,
}

/// Maximum likelihood fit of one bivariate copula to censored pairs.
pub fn fit_pair_censored(
    family: Family,
    pairs: &[CensoredPair],
    opts: &NelderMeadOptions,
) -> Result<PairFit> {
    if pairs.len() < 10 {
        return Err(Error::Data(format!("pairwise fit needs at least 10 pairs, got {}", pairs.len())));
    }
    let complete: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|p| p.2 == 1 && p.3 == 1)
        .map(|p| (p.0, p.1))
        .collect();
    if complete.is_empty() {
        return Err(Error::Data("pairwise fit needs at least one doubly-uncensored pair".into()));
    }
    if family == Family::Independence {
        let c = PairCopula::independence();
        return Ok(PairFit {
            theta: 0.0,
            loglik: pair_loglik(&c, pairs),
            evals: 0,
            boundary: false,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = complete.into_iter().unzip();
    let tau0 = kendall_tau(&xs, &ys).clamp(START_TAU_FLOOR, START_TAU_CAP);
    let theta0 = tau_to_theta(family, tau0)?;
    let z0 = transform_params(family, theta0)?;
    let objective = |z: &[f64]| match PairCopula::new(family, inverse_transform(family, z[0])) {
        Ok(c) => -pair_loglik(&c, pairs),
        Err(_) => f64::INFINITY,
    };
    let m = nelder_mead(objective, &[z0], opts);
    if !m.value.is_finite() {
        return Err(Error::Numerical(format!("pairwise {family} fit found no finite likelihood")));
    }
    let theta = inverse_transform(family, m.x[0]);
    let tau = theta_to_tau(family, theta).unwrap_or(0.0);
    let boundary = tau.abs() < 0.01 || tau.abs() > 0.98;
    if boundary {
        warn!("pairwise {family} fit at the boundary of the parameter range (tau {tau:.4})");
    }
    Ok(PairFit {
        theta,
        loglik: -m.value,
        evals: m.evals,
        boundary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    Pairwise,
    T1Sequential,
    Global,
}

impl FitMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FitMethod::Pairwise => "pairwise",
            FitMethod::T1Sequential => "seq",
            FitMethod::Global => "global",
        }
    }
}

impl std::str::FromStr for FitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pairwise" => Ok(FitMethod::Pairwise),
            "seq" | "sequential" | "t1" | "t1-sequential" => Ok(FitMethod::T1Sequential),
            "global" => Ok(FitMethod::Global),
            other => Err(Error::Domain(format!("unknown fit method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub quad_nodes: usize,
    pub optimizer: NelderMeadOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            quad_nodes: DEFAULT_NODES,
            optimizer: NelderMeadOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Likelihood evaluations of each optimization stage, in order.
    pub evals: Vec<usize>,
    pub converged: bool,
    /// Clusters with a pseudo-observation pulled off 0 or 1.
    pub clamped: usize,
    /// Edges whose pairwise fit hit the range boundary.
    pub boundary_edges: Vec<usize>,
}

/// Bootstrap standard errors, one per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSe {
    pub theta: Vec<f64>,
    pub tau: Vec<f64>,
    pub tail_lower: Vec<f64>,
    pub tail_upper: Vec<f64>,
    pub replicates: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: DVineModel<f64>,
    /// Families as requested; a Frank edge fitted at zero stays "frank" here.
    pub families: Vec<Family>,
    pub theta_hat: Vec<f64>,
    pub tau_hat: Vec<f64>,
    pub tail_dep: Vec<(f64, f64)>,
    pub loglik: f64,
    pub method: FitMethod,
    pub n: usize,
    pub se: Option<BootstrapSe>,
    pub diagnostics: Diagnostics,
}

impl FitResult {
    fn build(
        families: Vec<Family>,
        model: DVineModel<f64>,
        loglik: f64,
        method: FitMethod,
        n: usize,
        diagnostics: Diagnostics,
    ) -> Self {
        let theta_hat = model.thetas();
        let tau_hat = model.edges().iter().map(|e| e.tau()).collect();
        let tail_dep = model.edges().iter().map(|e| e.tail_dependence()).collect();
        Self {
            model,
            families,
            theta_hat,
            tau_hat,
            tail_dep,
            loglik,
            method,
            n,
            se: None,
            diagnostics,
        }
    }

    /// Number of free copula parameters.
    pub fn n_params(&self) -> usize {
        self.families.iter().filter(|f| f.is_parametric()).count()
    }

    pub fn aic(&self) -> f64 {
        2.0 * self.n_params() as f64 - 2.0 * self.loglik
    }

    pub fn bic(&self) -> f64 {
        self.n_params() as f64 * (self.n as f64).ln() - 2.0 * self.loglik
    }

    /// One row per edge:
    /// `edge,family,theta,tau,lambda_lower,lambda_upper,se_theta,se_tau`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("edge,family,theta,tau,lambda_lower,lambda_upper,se_theta,se_tau\n");
        for (k, label) in self.model.edge_labels().iter().enumerate() {
            let (se_t, se_tau) = match &self.se {
                Some(se) => (se.theta[k].to_string(), se.tau[k].to_string()),
                None => (String::new(), String::new()),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                label,
                self.families[k],
                self.theta_hat[k],
                self.tau_hat[k],
                self.tail_dep[k].0,
                self.tail_dep[k].1,
                se_t,
                se_tau
            );
        }
        out
    }

    /// Human-readable table.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "method: {}  clusters: {}  loglik: {:.4}  AIC: {:.4}  BIC: {:.4}",
            self.method.as_str(),
            self.n,
            self.loglik,
            self.aic(),
            self.bic()
        );
        let _ = writeln!(
            out,
            "{:<8} {:<8} {:>9} {:>8} {:>8} {:>8} {:>9} {:>8}",
            "edge", "family", "theta", "tau", "lam_L", "lam_U", "se_theta", "se_tau"
        );
        for (k, label) in self.model.edge_labels().iter().enumerate() {
            let (se_t, se_tau) = match &self.se {
                Some(se) => (format!("{:.4}", se.theta[k]), format!("{:.4}", se.tau[k])),
                None => ("-".into(), "-".into()),
            };
            let _ = writeln!(
                out,
                "{:<8} {:<8} {:>9.4} {:>8.4} {:>8.4} {:>8.4} {:>9} {:>8}",
                label.to_string(),
                self.families[k].as_str(),
                self.theta_hat[k],
                self.tau_hat[k],
                self.tail_dep[k].0,
                self.tail_dep[k].1,
                se_t,
                se_tau
            );
        }
        if self.diagnostics.clamped > 0 {
            let _ = writeln!(
                out,
                "note: {} cluster(s) had pseudo-observations moved off the boundary of (0, 1)",
                self.diagnostics.clamped
            );
        }
        out
    }
}

/// A model carrying only structure and families. Parameters are set to a
/// Kendall's tau of 0.5 so that no edge degenerates to independence.
pub fn template(order: Vec<usize>, families: &[Family]) -> Result<DVineModel<f64>> {
    let thetas = families
        .iter()
        .map(|&f| if f.is_parametric() { tau_to_theta(f, 0.5) } else { Ok(0.0) })
        .collect::<Result<Vec<f64>>>()?;
    DVineModel::from_params(order, families, &thetas)
}

fn check_data(template: &DVineModel<f64>, data: &[PseudoCluster<f64>]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Data("no clusters".into()));
    }
    if let Some(pc) = data.iter().find(|pc| pc.dim() != template.dim()) {
        return Err(Error::Structure(format!(
            "cluster {} has dimension {} but the model has {}",
            pc.id,
            pc.dim(),
            template.dim()
        )));
    }
    Ok(())
}

/// Censored pairs of the `k`-th first-tree edge.
pub fn tree1_pairs(template: &DVineModel<f64>, data: &[PseudoCluster<f64>], k: usize) -> Vec<CensoredPair> {
    let (a, b) = (template.order()[k], template.order()[k + 1]);
    data.iter()
        .map(|pc| (pc.u[a], pc.u[b], pc.delta[a], pc.delta[b]))
        .collect()
}

fn fit_tree1(
    template: &DVineModel<f64>,
    families: &[Family],
    data: &[PseudoCluster<f64>],
    opts: &FitOptions,
    diag: &mut Diagnostics,
) -> Result<Vec<f64>> {
    let mut thetas = vec![0.0; families.len()];
    for k in 0..template.tree1_len() {
        let fit = fit_pair_censored(families[k], &tree1_pairs(template, data, k), &opts.optimizer)
            .map_err(|e| match e {
                Error::Data(m) => Error::Data(format!("edge {k}: {m}")),
                other => other,
            })?;
        if fit.boundary {
            diag.boundary_edges.push(k);
        }
        diag.evals.push(fit.evals);
        thetas[k] = fit.theta;
    }
    for k in template.tree1_len()..families.len() {
        if families[k].is_parametric() {
            thetas[k] = tau_to_theta(families[k], UPPER_START_TAU)?;
        }
    }
    Ok(thetas)
}

/// Indices of edges with a free parameter, restricted to `range`.
fn free_edges(families: &[Family], range: std::ops::Range<usize>) -> Vec<usize> {
    range.filter(|&k| families[k].is_parametric()).collect()
}

fn set_free(families: &[Family], base: &[f64], free: &[usize], z: &[f64]) -> Vec<f64> {
    let mut thetas = base.to_vec();
    for (&k, &zk) in free.iter().zip(z) {
        thetas[k] = inverse_transform(families[k], zk);
    }
    thetas
}

fn transformed(families: &[Family], thetas: &[f64], free: &[usize]) -> Result<Vec<f64>> {
    free.iter().map(|&k| transform_params(families[k], thetas[k])).collect()
}

/// First-tree edges fitted pairwise; higher trees left at independence.
pub fn fit_pairwise(
    template: &DVineModel<f64>,
    data: &[PseudoCluster<f64>],
    opts: &FitOptions,
) -> Result<FitResult> {
    check_data(template, data)?;
    let families = template.families();
    let mut diag = Diagnostics {
        clamped: data.iter().filter(|pc| pc.clamped).count(),
        converged: true,
        ..Default::default()
    };
    let mut thetas = fit_tree1(template, &families, data, opts, &mut diag)?;
    let mut fams = families.clone();
    for k in template.tree1_len()..fams.len() {
        fams[k] = Family::Independence;
        thetas[k] = 0.0;
    }
    let model = DVineModel::from_params(template.order().to_vec(), &fams, &thetas)?;
    let rule = GaussLegendre::new(opts.quad_nodes)?;
    let loglik = total_loglik(&model, data, &rule)?;
    Ok(FitResult::build(fams, model, loglik, FitMethod::Pairwise, data.len(), diag))
}

/// First-tree copulas from pairwise fits, then the remaining parameters by
/// maximizing the censored vine likelihood with the first tree frozen.
pub fn fit_t1_sequential(
    template: &DVineModel<f64>,
    data: &[PseudoCluster<f64>],
    opts: &FitOptions,
) -> Result<FitResult> {
    check_data(template, data)?;
    let families = template.families();
    let mut diag = Diagnostics {
        clamped: data.iter().filter(|pc| pc.clamped).count(),
        ..Default::default()
    };
    let start = fit_tree1(template, &families, data, opts, &mut diag)?;
    let order = template.order().to_vec();
    let rule = GaussLegendre::new(opts.quad_nodes)?;
    let base = DVineModel::from_params(order.clone(), &families, &start)?;
    let cache = Tree1Cache::new(&base, data, &rule)?;
    let free = free_edges(&families, template.tree1_len()..families.len());
    let z0 = transformed(&families, &start, &free)?;
    let objective = |z: &[f64]| {
        let thetas = set_free(&families, &start, &free, z);
        match DVineModel::from_params(order.clone(), &families, &thetas) {
            Ok(m) => cache.loglik(&m).map(|v| -v).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    };
    let best = nelder_mead(objective, &z0, &opts.optimizer);
    if !best.value.is_finite() {
        return Err(Error::Numerical(format!(
            "sequential fit found no finite likelihood after {} evaluations",
            best.evals
        )));
    }
    if !best.converged {
        warn!("sequential fit stopped at the evaluation cap ({})", best.evals);
    }
    diag.evals.push(best.evals);
    diag.converged = best.converged;
    let thetas = set_free(&families, &start, &free, &best.x);
    let model = DVineModel::from_params(order, &families, &thetas)?;
    let loglik = total_loglik(&model, data, &rule)?;
    debug!("sequential fit: loglik {loglik}, {} evaluations", best.evals);
    Ok(FitResult::build(families, model, loglik, FitMethod::T1Sequential, data.len(), diag))
}

/// Joint maximization over all parameters. Starts from `start` when given,
/// otherwise from the sequential estimate. When the evaluation cap is hit
/// the best point so far is returned with `diagnostics.converged = false`.
pub fn fit_global(
    template: &DVineModel<f64>,
    data: &[PseudoCluster<f64>],
    start: Option<&[f64]>,
    opts: &FitOptions,
) -> Result<FitResult> {
    check_data(template, data)?;
    let families = template.families();
    let mut diag = Diagnostics {
        clamped: data.iter().filter(|pc| pc.clamped).count(),
        ..Default::default()
    };
    let start: Vec<f64> = match start {
        Some(s) => {
            if s.len() != families.len() {
                return Err(Error::Structure(format!(
                    "expected {} starting values, got {}",
                    families.len(),
                    s.len()
                )));
            }
            s.to_vec()
        }
        None => {
            let seq = fit_t1_sequential(template, data, opts)?;
            diag.evals.extend(&seq.diagnostics.evals);
            diag.boundary_edges = seq.diagnostics.boundary_edges.clone();
            seq.theta_hat
        }
    };
    let order = template.order().to_vec();
    let rule = GaussLegendre::new(opts.quad_nodes)?;
    let free = free_edges(&families, 0..families.len());
    let z0 = transformed(&families, &start, &free)?;
    let objective = |z: &[f64]| {
        let thetas = set_free(&families, &start, &free, z);
        match DVineModel::from_params(order.clone(), &families, &thetas) {
            Ok(m) => total_loglik(&m, data, &rule).map(|v| -v).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    };
    let best = nelder_mead(objective, &z0, &opts.optimizer);
    if !best.value.is_finite() {
        return Err(Error::Numerical(format!(
            "global fit found no finite likelihood after {} evaluations",
            best.evals
        )));
    }
    if !best.converged {
        warn!("global fit stopped at the evaluation cap ({})", best.evals);
    }
    diag.evals.push(best.evals);
    diag.converged = best.converged;
    let thetas = set_free(&families, &start, &free, &best.x);
    let model = DVineModel::from_params(order, &families, &thetas)?;
    Ok(FitResult::build(families, model, -best.value, FitMethod::Global, data.len(), diag))
}

/// Fit with the given method.
pub fn fit(
    template: &DVineModel<f64>,
    data: &[PseudoCluster<f64>],
    method: FitMethod,
    opts: &FitOptions,
) -> Result<FitResult> {
    match method {
        FitMethod::Pairwise => fit_pairwise(template, data, opts),
        FitMethod::T1Sequential => fit_t1_sequential(template, data, opts),
        FitMethod::Global => fit_global(template, data, None, opts),
    }
}

/// How replicate seeds are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedSchedule {
    /// Independent seed per replicate, derived from the master seed.
    Derived,
    /// Every replicate uses the master seed (all replicates identical).
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub seed: u64,
    pub method: FitMethod,
    pub schedule: SeedSchedule,
    pub fit: FitOptions,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            replicates: 100,
            seed: 1,
            method: FitMethod::T1Sequential,
            schedule: SeedSchedule::Derived,
            fit: FitOptions::default(),
        }
    }
}

/// Resampling ingredients: Kaplan-Meier margins of the event times and of
/// the common censoring time.
#[derive(Debug, Clone)]
pub struct BootstrapBasis {
    pub margins: Vec<KaplanMeierCurve>,
    pub censoring: KaplanMeierCurve,
}

impl BootstrapBasis {
    pub fn from_data(data: &[ObservedCluster]) -> Result<Self> {
        let d = data.first().ok_or_else(|| Error::Data("no clusters".into()))?.dim();
        let margins = (0..d).map(|j| km_fit(&column(data, j))).collect::<Result<Vec<_>>>()?;
        // the cluster's censoring time is seen when at least one coordinate is censored
        let cens: Vec<(f64, u8)> = data
            .iter()
            .map(|c| {
                let ymax = c.y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let all_events = c.delta.iter().all(|&d| d == 1);
                (ymax, u8::from(!all_events))
            })
            .collect();
        Ok(Self {
            margins,
            censoring: km_fit(&cens)?,
        })
    }

    /// One synthetic dataset from `model`.
    pub fn generate(&self, model: &DVineModel<f64>, n: usize, seed: u64) -> Result<Vec<ObservedCluster>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = model.sample_with(n, &mut rng)?;
        u.iter()
            .enumerate()
            .map(|(i, ui)| {
                let c = self.censoring.inverse(rng.sample(Open01));
                let mut y = Vec::with_capacity(ui.len());
                let mut delta = Vec::with_capacity(ui.len());
                for (j, &uij) in ui.iter().enumerate() {
                    let t = self.margins[j].inverse(uij);
                    y.push(t.min(c));
                    delta.push(u8::from(t <= c));
                }
                ObservedCluster::new((i + 1).to_string(), y, delta)
            })
            .collect()
    }
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = exact_sum(xs) / n as f64;
    let ss: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    (exact_sum(&ss) / (n - 1) as f64).sqrt()
}

/// Parametric bootstrap standard errors of a fitted model.
///
/// Each replicate samples copula data from `fitted`, maps it to event
/// times through the inverse Kaplan-Meier margins of `data`, draws one
/// censoring time per cluster from the Kaplan-Meier estimate of the
/// censoring distribution, recomputes Kaplan-Meier pseudo-observations and
/// refits. Replicates that fail are dropped; more than 20% failures is an
/// error.
pub fn bootstrap_se(
    fitted: &FitResult,
    data: &[ObservedCluster],
    opts: &BootstrapOptions,
) -> Result<BootstrapSe> {
    if opts.replicates < 2 {
        return Err(Error::Domain("bootstrap needs at least 2 replicates".into()));
    }
    let basis = BootstrapBasis::from_data(data)?;
    let n = data.len();
    let template = template(fitted.model.order().to_vec(), &fitted.families)?;
    let outcomes: Vec<Result<FitResult>> = (0..opts.replicates as u64)
        .into_par_iter()
        .map(|b| {
            let seed = match opts.schedule {
                SeedSchedule::Derived => replicate_seed(opts.seed, b),
                SeedSchedule::Fixed => opts.seed,
            };
            let sample = basis.generate(&fitted.model, n, seed)?;
            let pcs = pseudo_observations(&sample, &MarginMethod::Kme)?;
            fit(&template, &pcs, opts.method, &opts.fit)
        })
        .collect();
    let mut fits = Vec::with_capacity(outcomes.len());
    let mut failed = 0;
    for (b, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(f) => fits.push(f),
            Err(e) => {
                warn!("bootstrap replicate {b} failed: {e}");
                failed += 1;
            }
        }
    }
    if failed * 5 > opts.replicates {
        return Err(Error::Numerical(format!(
            "{failed} of {} bootstrap replicates failed",
            opts.replicates
        )));
    }
    let k = fitted.families.len();
    let column_sd = |get: &dyn Fn(&FitResult, usize) -> f64| -> Vec<f64> {
        (0..k)
            .map(|e| sample_sd(&fits.iter().map(|f| get(f, e)).collect::<Vec<_>>()))
            .collect()
    };
    Ok(BootstrapSe {
        theta: column_sd(&|f, e| f.theta_hat[e]),
        tau: column_sd(&|f, e| f.tau_hat[e]),
        tail_lower: column_sd(&|f, e| f.tail_dep[e].0),
        tail_upper: column_sd(&|f, e| f.tail_dep[e].1),
        replicates: fits.len(),
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs_from(c: &PairCopula<f64>, n: usize, seed: u64) -> Vec<CensoredPair> {
        c.sample(n, seed)
            .unwrap()
            .into_iter()
            .map(|(u, v)| (u, v, 1, 1))
            .collect()
    }

    #[test]
    fn transforms_round_trip() {
        assert!((transform_params(Family::Clayton, 3.0).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert!((inverse_transform(Family::Clayton, 3f64.ln()) - 3.0).abs() < 1e-12);
        assert_eq!(transform_params(Family::Gumbel, 2.0).unwrap(), 0.0);
        assert_eq!(inverse_transform(Family::Gumbel, 0.0), 2.0);
        assert_eq!(transform_params(Family::Frank, -4.0).unwrap(), -4.0);
        assert_eq!(inverse_transform(Family::Frank, -4.0), -4.0);
        assert!(transform_params(Family::Clayton, -1.0).is_err());
    }

    #[test]
    fn kendall_tau_small_cases() {
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 1.0);
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        assert!((kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn replicate_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| replicate_seed(7, i)).collect();
        assert_eq!(s.len(), 1000);
        assert_eq!(replicate_seed(7, 3), replicate_seed(7, 3));
    }

    #[test]
    fn pair_fit_complete_clayton() {
        let c = PairCopula::new(Family::Clayton, 3.0).unwrap();
        let fit = fit_pair_censored(Family::Clayton, &pairs_from(&c, 2000, 3), &NelderMeadOptions::default())
            .unwrap();
        assert!((fit.theta - 3.0).abs() < 0.3, "{fit:?}");
    }

    #[test]
    fn pair_fit_independence_with_frank() {
        let c = PairCopula::<f64>::independence();
        let fit = fit_pair_censored(Family::Frank, &pairs_from(&c, 2000, 4), &NelderMeadOptions::default())
            .unwrap();
        assert!(fit.theta.abs() < 0.3, "{fit:?}");
    }

    #[test]
    fn pair_fit_needs_complete_pairs() {
        let pairs = vec![(0.5, 0.5, 0u8, 1u8); 20];
        assert!(fit_pair_censored(Family::Clayton, &pairs, &NelderMeadOptions::default()).is_err());
        assert!(fit_pair_censored(Family::Clayton, &pairs[..5], &NelderMeadOptions::default()).is_err());
    }

    #[test]
    fn censored_pair_terms() {
        let c = PairCopula::new(Family::Gumbel, 2.0).unwrap();
        let ll = pair_loglik(&c, &[(0.3, 0.6, 1, 0), (0.3, 0.6, 0, 1), (0.3, 0.6, 0, 0)]);
        let want = c.h(0.6, 0.3).ln() + c.h(0.3, 0.6).ln() + c.cdf(0.3, 0.6).ln();
        assert!((ll - want).abs() < 1e-12);
    }

    #[test]
    fn method_names() {
        assert_eq!("seq".parse::<FitMethod>().unwrap(), FitMethod::T1Sequential);
        assert_eq!("global".parse::<FitMethod>().unwrap(), FitMethod::Global);
        assert!("bfgs".parse::<FitMethod>().is_err());
    }

    #[test]
    fn sample_sd_matches_definition() {
        assert!((sample_sd(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(sample_sd(&[2.0; 5]), 0.0);
    }
}
