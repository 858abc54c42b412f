use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use censvine::copula::{tau_to_theta, theta_to_tau};
use censvine::estimation::{bootstrap_se, fit, BootstrapOptions, FitMethod, FitResult};
use censvine::likelihood::total_loglik;
use censvine::margins::{apply_margins, column, km_fit, weibull_mle, Margin};
use censvine::simulation::{generate_dataset, run_study, StudyConfig, StudyResult};
use censvine::{Family, GaussLegendreF64, ObservedCluster, PseudoClusterF64};
use log::info;

use crate::config::{MarginSpec, ModelConfig};
use crate::error::{CliError, CliResult};

/// Pseudo-observations under the per-coordinate margin settings of `cfg`.
pub fn pseudo_data(cfg: &ModelConfig, data: &[ObservedCluster]) -> CliResult<Vec<PseudoClusterF64>> {
    let first = data.first().ok_or_else(|| CliError::Data("no clusters".into()))?;
    if first.dim() != cfg.dimension {
        return Err(CliError::Data(format!(
            "data has {} coordinates but the config has dimension {}",
            first.dim(),
            cfg.dimension
        )));
    }
    let margins = cfg
        .margins
        .iter()
        .enumerate()
        .map(|(j, spec)| {
            Ok(match spec {
                MarginSpec::Kme => Margin::KaplanMeier(km_fit(&column(data, j))?),
                MarginSpec::WeibullMle => Margin::Weibull(weibull_mle(&column(data, j))?),
                MarginSpec::Weibull(w) => Margin::Weibull(*w),
            })
        })
        .collect::<censvine::Result<Vec<_>>>()?;
    Ok(apply_margins(data, &margins)?)
}

/// Fit the configured structure; with `bootstrap = Some(b)` also attach
/// bootstrap standard errors from `b` replicates. Replicates are always
/// refitted sequentially, whatever `method` the point estimate used.
pub fn fit_model(
    cfg: &ModelConfig,
    data: &[ObservedCluster],
    method: FitMethod,
    bootstrap: Option<usize>,
) -> CliResult<FitResult> {
    let pcs = pseudo_data(cfg, data)?;
    let opts = cfg.fit_options();
    let mut result = fit(&cfg.template()?, &pcs, method, &opts)?;
    info!("{} fit: loglik {:.4}", method.as_str(), result.loglik);
    if let Some(replicates) = bootstrap {
        let bopts = BootstrapOptions {
            replicates,
            seed: cfg.seed,
            fit: opts,
            ..Default::default()
        };
        result.se = Some(bootstrap_se(&result, data, &bopts)?);
    }
    Ok(result)
}

/// Write `fit.csv`, `fit_summary.txt` and `fitted.cfg` into `dir`.
pub fn write_fit_report(dir: &Path, cfg: &ModelConfig, result: &FitResult) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("fit.csv"), result.to_csv())?;
    fs::write(dir.join("fit_summary.txt"), result.summary())?;
    fs::write(dir.join("fitted.cfg"), cfg.with_model(&result.model).to_string())?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub label: String,
    pub params: usize,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
}

/// Fit every config to the same data; rows sorted by loglik, best first.
pub fn compare(configs: &[(String, ModelConfig)], data: &[ObservedCluster], method: FitMethod) -> CliResult<Vec<CompareRow>> {
    let mut rows = configs
        .iter()
        .map(|(label, cfg)| {
            let r = fit_model(cfg, data, method, None)?;
            Ok(CompareRow {
                label: label.clone(),
                params: r.n_params(),
                loglik: r.loglik,
                aic: r.aic(),
                bic: r.bic(),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    rows.sort_by(|a, b| b.loglik.total_cmp(&a.loglik));
    Ok(rows)
}

pub fn format_compare(rows: &[CompareRow]) -> String {
    let mut out = format!("{:<24} {:>3} {:>12} {:>12} {:>12}\n", "model", "k", "loglik", "AIC", "BIC");
    for r in rows {
        let _ = writeln!(out, "{:<24} {:>3} {:>12.4} {:>12.4} {:>12.4}", r.label, r.params, r.loglik, r.aic, r.bic);
    }
    out
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from("model,k,loglik,aic,bic\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.label, r.params, r.loglik, r.aic, r.bic);
    }
    out
}

/// Kendall's tau to the copula parameter, or back.
pub fn convert(family: Family, tau: Option<f64>, theta: Option<f64>) -> CliResult<f64> {
    match (tau, theta) {
        (Some(t), None) => Ok(tau_to_theta(family, t)?),
        (None, Some(t)) => Ok(theta_to_tau(family, t)?),
        _ => Err(CliError::Usage("give exactly one of --tau or --theta".into())),
    }
}

/// Censored loglikelihood of the fully specified model in `cfg`.
pub fn loglik(cfg: &ModelConfig, data: &[ObservedCluster]) -> CliResult<f64> {
    let model = cfg.model()?;
    let pcs = pseudo_data(cfg, data)?;
    let rule = GaussLegendreF64::new(cfg.quad_nodes)?;
    Ok(total_loglik(&model, &pcs, &rule)?)
}

/// Run the replication study described by the `study.` keys. Returns the
/// aggregated result and the first replicate's dataset.
pub fn simulate(cfg: &ModelConfig, method: FitMethod) -> CliResult<(StudyResult, Vec<ObservedCluster>)> {
    let study = cfg
        .study
        .as_ref()
        .ok_or_else(|| CliError::Data("config has no study.n / study.replicates".into()))?;
    let margins = cfg
        .margins
        .iter()
        .enumerate()
        .map(|(j, m)| match m {
            MarginSpec::Weibull(w) => Ok(*w),
            _ => Err(CliError::Data(format!(
                "simulation needs margin.{} = weibull, alpha=.., lambda=..",
                j + 1
            ))),
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut sc = StudyConfig::new(cfg.model()?, margins, study.n, study.replicates);
    sc.censor = study.censor;
    sc.margin_method = study.margins;
    sc.method = method;
    sc.seed = cfg.seed;
    sc.fit = cfg.fit_options();
    let first = generate_dataset(&sc, 0)?;
    Ok((run_study(&sc)?, first))
}
