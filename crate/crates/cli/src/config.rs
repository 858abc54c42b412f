//! Plain-text model configuration.
//!
//! ```text
//! # four-dimensional D-vine, variables in path order 1-3-4-2
//! dimension = 4
//! order = 1,3,4,2
//! edge.13 = frank, theta=6.5
//! edge.34 = frank
//! edge.24 = frank
//! edge.14;3 = frank
//! edge.23;4 = frank
//! edge.12;34 = frank
//! margin.1 = kme
//! margin.2 = weibull, alpha=4.2, lambda=2.21
//! quad_nodes = 21
//! optimizer.max_evals = 2000
//! seed = 7
//! ```
//!
//! Variable indices and edge labels are 1-based; edge labels follow the
//! conditioned-pair/conditioning-set notation and may list digits in any
//! order. Omitted margins default to Kaplan-Meier. Keys under `study.`
//! configure `simulate` only.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;

use censvine::estimation::{template, FitOptions};
use censvine::optim::NelderMeadOptions;
use censvine::quadrature::DEFAULT_NODES;
use censvine::simulation::MarginKind;
use censvine::{DVineModelF64, Family, WeibullMargin};

use crate::error::{CliError, CliResult};

/// How one coordinate is turned into pseudo-observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginSpec {
    Kme,
    WeibullMle,
    Weibull(WeibullMargin),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    /// Canonical label, e.g. `14;3`.
    pub label: String,
    pub family: Family,
    pub theta: Option<f64>,
}

/// Replication-study settings.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySpec {
    pub n: usize,
    pub replicates: usize,
    pub censor: Option<WeibullMargin>,
    pub margins: MarginKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub dimension: usize,
    /// 0-based variable order along the first tree.
    pub order: Vec<usize>,
    /// One entry per edge, in the vine's edge order.
    pub edges: Vec<EdgeSpec>,
    pub margins: Vec<MarginSpec>,
    pub quad_nodes: usize,
    pub optimizer: NelderMeadOptions,
    pub seed: u64,
    pub study: Option<StudySpec>,
}

fn err(line: usize, msg: impl fmt::Display) -> CliError {
    CliError::Data(format!("line {line}: {msg}"))
}

/// Sort the digits on each side of the `;` so `41;3` and `14;3` agree.
fn canonical_label(raw: &str) -> Option<String> {
    let mut parts = raw.trim().splitn(2, ';');
    let sorted = |s: &str| -> Option<String> {
        if s.is_empty() || !s.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let mut cs: Vec<char> = s.chars().collect();
        cs.sort_unstable();
        Some(cs.into_iter().collect())
    };
    let head = sorted(parts.next()?)?;
    match parts.next() {
        Some(tail) => Some(format!("{head};{}", sorted(tail)?)),
        None => Some(head),
    }
}

/// `name, key=value, key=value` into the name and its options.
fn split_options(line: usize, value: &str) -> CliResult<(String, BTreeMap<String, f64>)> {
    let mut parts = value.split(',').map(str::trim);
    let name = parts.next().unwrap_or_default().to_ascii_lowercase();
    let mut opts = BTreeMap::new();
    for p in parts {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected key=value, got '{p}'")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| err(line, format!("'{}' is not a number", v.trim())))?;
        if opts.insert(k.trim().to_ascii_lowercase(), v).is_some() {
            return Err(err(line, format!("option '{}' given twice", k.trim())));
        }
    }
    Ok((name, opts))
}

fn take_only(line: usize, mut opts: BTreeMap<String, f64>, allowed: &[&str]) -> CliResult<Vec<Option<f64>>> {
    let out = allowed.iter().map(|k| opts.remove(*k)).collect();
    if let Some(k) = opts.keys().next() {
        return Err(err(line, format!("unknown option '{k}'")));
    }
    Ok(out)
}

fn parse_weibull(line: usize, opts: BTreeMap<String, f64>) -> CliResult<WeibullMargin> {
    match take_only(line, opts, &["alpha", "lambda"])?[..] {
        [Some(alpha), Some(lambda)] => WeibullMargin::new(alpha, lambda).map_err(|e| err(line, e)),
        _ => Err(err(line, "weibull needs alpha= and lambda=")),
    }
}

fn parse_margin(line: usize, value: &str) -> CliResult<MarginSpec> {
    let (name, opts) = split_options(line, value)?;
    match name.as_str() {
        "kme" | "km" | "kaplan-meier" => {
            take_only(line, opts, &[])?;
            Ok(MarginSpec::Kme)
        }
        "weibull-mle" | "mle" => {
            take_only(line, opts, &[])?;
            Ok(MarginSpec::WeibullMle)
        }
        "weibull" => Ok(MarginSpec::Weibull(parse_weibull(line, opts)?)),
        other => Err(err(line, format!("unknown margin method '{other}'"))),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| err(line, format!("invalid value '{value}' for {key}")))
}

impl ModelConfig {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut dimension = None;
        let mut order_raw: Option<(usize, String)> = None;
        let mut edges: BTreeMap<String, (usize, Family, Option<f64>)> = BTreeMap::new();
        let mut margins: BTreeMap<usize, (usize, MarginSpec)> = BTreeMap::new();
        let mut quad_nodes = DEFAULT_NODES;
        let mut optimizer = NelderMeadOptions::default();
        let mut seed = 1u64;
        let mut study_n = None;
        let mut study_r = None;
        let mut study_censor = None;
        let mut study_margins = None;
        let mut seen = std::collections::HashSet::new();

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or_default().trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected 'key = value', got '{content}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(line, format!("duplicate key '{key}'")));
            }
            if let Some(label) = key.strip_prefix("edge.") {
                let label = canonical_label(label).ok_or_else(|| err(line, format!("bad edge label '{label}'")))?;
                let (name, opts) = split_options(line, value)?;
                let family: Family = name.parse().map_err(|e| err(line, e))?;
                let [theta] = take_only(line, opts, &["theta"])?[..] else {
                    unreachable!()
                };
                if edges.insert(label.clone(), (line, family, theta)).is_some() {
                    return Err(err(line, format!("edge {label} given twice")));
                }
                continue;
            }
            if let Some(j) = key.strip_prefix("margin.") {
                let j: usize = parse_num(line, key, j)?;
                margins.insert(j, (line, parse_margin(line, value)?));
                continue;
            }
            match key {
                "dimension" => dimension = Some((line, parse_num::<usize>(line, key, value)?)),
                "order" => order_raw = Some((line, value.to_string())),
                "quad_nodes" => quad_nodes = parse_num(line, key, value)?,
                "optimizer.tol" => optimizer.tol = parse_num(line, key, value)?,
                "optimizer.max_evals" => optimizer.max_evals = parse_num(line, key, value)?,
                "optimizer.step" => optimizer.step = parse_num(line, key, value)?,
                "seed" => seed = parse_num(line, key, value)?,
                "study.n" => study_n = Some(parse_num::<usize>(line, key, value)?),
                "study.replicates" => study_r = Some(parse_num::<usize>(line, key, value)?),
                "study.censor" => {
                    let (name, opts) = split_options(line, value)?;
                    study_censor = match name.as_str() {
                        "none" => {
                            take_only(line, opts, &[])?;
                            Some(None)
                        }
                        "weibull" => Some(Some(parse_weibull(line, opts)?)),
                        other => return Err(err(line, format!("unknown censoring distribution '{other}'"))),
                    };
                }
                "study.margins" => {
                    study_margins = Some(match value.to_ascii_lowercase().as_str() {
                        "known" => MarginKind::Known,
                        "weibull-mle" | "mle" => MarginKind::WeibullMle,
                        "kme" | "ecdf" => MarginKind::Kme,
                        other => return Err(err(line, format!("unknown study margins '{other}'"))),
                    })
                }
                other => return Err(err(line, format!("unknown key '{other}'"))),
            }
        }

        let (dim_line, d) = dimension.ok_or_else(|| CliError::Data("missing key 'dimension'".into()))?;
        if !(2..=9).contains(&d) {
            return Err(err(dim_line, format!("dimension must be between 2 and 9, got {d}")));
        }
        let order: Vec<usize> = match order_raw {
            None => (0..d).collect(),
            Some((line, raw)) => {
                let idx = raw
                    .split(',')
                    .map(|s| parse_num::<usize>(line, "order", s.trim()))
                    .collect::<CliResult<Vec<_>>>()?;
                let mut sorted = idx.clone();
                sorted.sort_unstable();
                if sorted != (1..=d).collect::<Vec<_>>() {
                    return Err(err(line, format!("order must be a permutation of 1..{d}")));
                }
                idx.into_iter().map(|v| v - 1).collect()
            }
        };

        let skeleton = template(order.clone(), &vec![Family::Independence; d * (d - 1) / 2])?;
        let mut ordered = Vec::with_capacity(d * (d - 1) / 2);
        for label in skeleton.edge_labels() {
            let label = label.to_string();
            let (_, family, theta) = edges
                .remove(&label)
                .ok_or_else(|| CliError::Data(format!("missing edge.{label}")))?;
            ordered.push(EdgeSpec { label, family, theta });
        }
        if let Some((label, (line, ..))) = edges.into_iter().next() {
            return Err(err(line, format!("edge {label} is not part of this vine")));
        }

        let mut margin_specs = vec![MarginSpec::Kme; d];
        for (j, (line, spec)) in margins {
            if !(1..=d).contains(&j) {
                return Err(err(line, format!("margin index {j} outside 1..{d}")));
            }
            margin_specs[j - 1] = spec;
        }

        let study = match (study_n, study_r) {
            (None, None) if study_censor.is_none() && study_margins.is_none() => None,
            (Some(n), Some(replicates)) => Some(StudySpec {
                n,
                replicates,
                censor: study_censor.flatten(),
                margins: study_margins.unwrap_or(MarginKind::Kme),
            }),
            _ => return Err(CliError::Data("study settings need both study.n and study.replicates".into())),
        };

        let cfg = Self {
            dimension: d,
            order,
            edges: ordered,
            margins: margin_specs,
            quad_nodes,
            optimizer,
            seed,
            study,
        };
        // rejects parameters outside a family's range
        if cfg.edges.iter().all(|e| e.theta.is_some() || !e.family.is_parametric()) {
            cfg.model()?;
        }
        Ok(cfg)
    }

    pub fn families(&self) -> Vec<Family> {
        self.edges.iter().map(|e| e.family).collect()
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            quad_nodes: self.quad_nodes,
            optimizer: self.optimizer,
        }
    }

    /// Structure and families with placeholder parameters.
    pub fn template(&self) -> CliResult<DVineModelF64> {
        Ok(template(self.order.clone(), &self.families())?)
    }

    /// The fully specified model; every parametric edge needs a `theta`.
    pub fn model(&self) -> CliResult<DVineModelF64> {
        let thetas = self
            .edges
            .iter()
            .map(|e| match (e.family.is_parametric(), e.theta) {
                (false, _) => Ok(0.0),
                (true, Some(t)) => Ok(t),
                (true, None) => Err(CliError::Data(format!("edge.{} has no theta", e.label))),
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok(DVineModelF64::from_params(self.order.clone(), &self.families(), &thetas)?)
    }

    /// Copy with parameters taken from `model` (same structure).
    pub fn with_model(&self, model: &DVineModelF64) -> Self {
        let mut out = self.clone();
        for (e, t) in out.edges.iter_mut().zip(model.thetas()) {
            e.theta = e.family.is_parametric().then_some(t);
        }
        out
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        let _ = writeln!(s, "dimension = {}", self.dimension);
        let order: Vec<String> = self.order.iter().map(|v| (v + 1).to_string()).collect();
        let _ = writeln!(s, "order = {}", order.join(","));
        for e in &self.edges {
            match e.theta {
                Some(t) => {
                    let _ = writeln!(s, "edge.{} = {}, theta={t}", e.label, e.family);
                }
                None => {
                    let _ = writeln!(s, "edge.{} = {}", e.label, e.family);
                }
            }
        }
        for (j, m) in self.margins.iter().enumerate() {
            let _ = match m {
                MarginSpec::Kme => writeln!(s, "margin.{} = kme", j + 1),
                MarginSpec::WeibullMle => writeln!(s, "margin.{} = weibull-mle", j + 1),
                MarginSpec::Weibull(w) => writeln!(s, "margin.{} = weibull, alpha={}, lambda={}", j + 1, w.alpha, w.lambda),
            };
        }
        let _ = writeln!(s, "quad_nodes = {}", self.quad_nodes);
        let _ = writeln!(s, "optimizer.tol = {:e}", self.optimizer.tol);
        let _ = writeln!(s, "optimizer.max_evals = {}", self.optimizer.max_evals);
        let _ = writeln!(s, "optimizer.step = {}", self.optimizer.step);
        let _ = writeln!(s, "seed = {}", self.seed);
        if let Some(st) = &self.study {
            let _ = writeln!(s, "study.n = {}", st.n);
            let _ = writeln!(s, "study.replicates = {}", st.replicates);
            let _ = match st.censor {
                Some(w) => writeln!(s, "study.censor = weibull, alpha={}, lambda={}", w.alpha, w.lambda),
                None => writeln!(s, "study.censor = none"),
            };
            let m = match st.margins {
                MarginKind::Known => "known",
                MarginKind::WeibullMle => "weibull-mle",
                MarginKind::Kme => "kme",
            };
            let _ = writeln!(s, "study.margins = {m}");
        }
        f.write_str(&s)
    }
}
