//! Flat `key = value` experiment files.
//!
//! Grammar: one `key = value` per line; `#` starts a comment; blank lines are
//! ignored; lists are comma separated. Every problem in a file is reported at
//! once, before any training starts. See [`KEYS`] for the accepted keys.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{FoldScheme, SyntheticSpec};
use crate::train::{LossKind, TrainConfig};
use crate::{Error, Result};

/// Default α candidates for the grid search.
pub const DEFAULT_ALPHA_GRID: [f64; 5] = [0.001, 0.005, 0.01, 0.05, 0.1];

/// Accepted keys with a one-line description each.
pub const KEYS: &[(&str, &str)] = &[
    ("tau", "significance level, coverage target is 1 - tau"),
    ("alpha", "learning rate of the adaptive coefficient"),
    ("batch_size", "mini-batch size"),
    ("max_epochs", "epochs for the interval network"),
    ("point_epochs", "epochs for the point network"),
    ("loss_kind", "dualaqd | dualaqd_nobs | qd | qdplus | mcdropout_pi"),
    ("batch_sorting", "true | false"),
    ("mc_passes", "Monte Carlo dropout passes at evaluation"),
    ("seed", "training seed"),
    ("learning_rate", "Adam step size"),
    ("beta1", "Adam first-moment decay"),
    ("beta2", "Adam second-moment decay"),
    ("adam_eps", "Adam denominator epsilon"),
    ("dropout_rate", "dropout probability on hidden layers"),
    ("hidden_layers", "comma-separated hidden widths, e.g. 100,100"),
    ("activation", "relu | tanh | identity"),
    ("ensemble_size", "members of the QD-Ens / QD+ ensembles"),
    ("qd_delta", "QD-Ens coverage weight"),
    ("qd_lambda1", "QD+ weight in [0, 1]"),
    ("qd_lambda2", "QD+ weight in [0, 1]"),
    ("qd_xi", "QD+ hinge weight"),
    ("qd_soften", "sigmoid sharpness of the soft coverage"),
    ("qd_hinge", "violation | as_printed"),
    ("qd_search_trials", "random-search trials for the QD+ weights (0 = off)"),
    ("cv", "auto | kfold:K | Rx2"),
    ("target", "target column of the data file"),
    ("methods", "comma-separated methods for compare"),
    ("alphas", "comma-separated α grid"),
    ("n_points", "synthetic sample count"),
    ("x_min", "synthetic input lower bound"),
    ("x_max", "synthetic input upper bound"),
    ("data_seed", "synthetic generator seed"),
    ("noise", "synthetic noise on/off"),
];

/// A method as named on the command line: a loss plus the sorting switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Method {
    pub kind: LossKind,
    pub batch_sorting: bool,
}

impl Method {
    pub const fn new(kind: LossKind) -> Self {
        Method {
            kind,
            batch_sorting: true,
        }
    }

    pub fn name(&self) -> String {
        if self.batch_sorting {
            self.kind.to_string()
        } else {
            format!("{}_nobs", self.kind)
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (base, sorting) = match s.strip_suffix("_nobs") {
            Some(b) => (b, false),
            None => (s, true),
        };
        let kind: LossKind = base.parse().map_err(|_| {
            Error::Config(format!(
                "unknown method {s:?}; valid values are dualaqd, dualaqd_nobs, qd, qdplus, mcdropout_pi"
            ))
        })?;
        Ok(Method {
            kind,
            batch_sorting: sorting,
        })
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.name()
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Everything a command needs besides file paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    /// `None` picks 5×2 for data with ideal bounds and 10-fold otherwise.
    pub cv: Option<FoldScheme>,
    pub target: String,
    pub methods: Vec<Method>,
    pub alphas: Vec<f64>,
    pub synthetic: SyntheticSpec,
    pub qd_search_trials: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train: TrainConfig::default(),
            cv: None,
            target: "y".into(),
            methods: vec![
                Method::new(LossKind::DualAqd),
                Method::new(LossKind::QdPlus),
                Method::new(LossKind::Qd),
                Method::new(LossKind::McDropoutPi),
            ],
            alphas: DEFAULT_ALPHA_GRID.to_vec(),
            synthetic: SyntheticSpec::default(),
            qd_search_trials: 0,
        }
    }
}

/// One `key = value` assignment and where it came from (for diagnostics).
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub origin: String,
    pub key: String,
    pub value: String,
}

impl Setting {
    pub fn new(origin: impl Into<String>, key: impl Into<String>, value: impl Into<String>) -> Self {
        Setting {
            origin: origin.into(),
            key: key.into(),
            value: value.into(),
        }
    }
}

/// Splits a config file into settings. Syntax problems are collected, not fatal.
pub fn parse_settings(text: &str) -> (Vec<Setting>, Vec<String>) {
    let mut settings = Vec::new();
    let mut problems = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                settings.push(Setting::new(format!("line {}", n + 1), k.trim(), v.trim()));
            }
            _ => problems.push(format!("line {}: expected `key = value`, got {raw:?}", n + 1)),
        }
    }
    (settings, problems)
}

fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse {v:?} as a number"))
}

fn flag(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(format!("expected true or false, got {v:?}")),
    }
}

fn list<T: std::str::FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| format!("cannot parse list item {s:?}")))
        .collect()
}

fn config_err<T, E: std::fmt::Display>(r: std::result::Result<T, E>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

impl ExperimentConfig {
    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let t = &mut self.train;
        match key {
            "tau" => t.tau = num(v)?,
            "alpha" => t.alpha = num(v)?,
            "batch_size" => t.batch_size = num(v)?,
            "max_epochs" => t.max_epochs = num(v)?,
            "point_epochs" => t.point_epochs = num(v)?,
            "loss_kind" | "method" => {
                let m: Method = config_err(v.parse())?;
                t.loss_kind = m.kind;
                t.batch_sorting = m.batch_sorting;
            }
            "batch_sorting" => t.batch_sorting = flag(v)?,
            "mc_passes" => t.mc_passes = num(v)?,
            "seed" => t.seed = num(v)?,
            "learning_rate" => t.optimizer.learning_rate = num(v)?,
            "beta1" => t.optimizer.beta1 = num(v)?,
            "beta2" => t.optimizer.beta2 = num(v)?,
            "adam_eps" => t.optimizer.eps = num(v)?,
            "dropout_rate" => t.dropout_rate = num(v)?,
            "hidden_layers" => t.hidden_layers = list(v)?,
            "activation" => t.activation = config_err(v.parse())?,
            "ensemble_size" => t.ensemble_size = num(v)?,
            "qd_delta" => t.qd.delta = num(v)?,
            "qd_lambda1" => t.qd.lambda1 = num(v)?,
            "qd_lambda2" => t.qd.lambda2 = num(v)?,
            "qd_xi" => t.qd.xi_qd = num(v)?,
            "qd_soften" => t.qd.soften_s = num(v)?,
            "qd_hinge" => t.qd.hinge = config_err(v.parse())?,
            "qd_search_trials" => self.qd_search_trials = num(v)?,
            "cv" => self.cv = if v == "auto" { None } else { Some(config_err(v.parse())?) },
            "target" => self.target = v.to_string(),
            "methods" => {
                self.methods = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| config_err(s.parse::<Method>()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "alphas" => self.alphas = list(v)?,
            "n_points" => self.synthetic.n_points = num(v)?,
            "x_min" => self.synthetic.x_min = num(v)?,
            "x_max" => self.synthetic.x_max = num(v)?,
            "data_seed" => self.synthetic.seed = num(v)?,
            "noise" => self.synthetic.noise = flag(v)?,
            _ => {
                let known: Vec<&str> = KEYS.iter().map(|(k, _)| *k).collect();
                return Err(format!("unknown key; valid keys are {}", known.join(", ")));
            }
        }
        Ok(())
    }

    /// Applies settings in order (later ones win) and validates the result.
    /// All problems are reported together as one configuration error.
    pub fn from_settings(settings: &[Setting], mut problems: Vec<String>) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for s in settings {
            if let Err(msg) = cfg.set(&s.key, &s.value) {
                problems.push(format!("{}: {} = {:?}: {msg}", s.origin, s.key, s.value));
            }
        }
        if let Err(Error::Config(msg)) = cfg.train.validate() {
            problems.extend(msg.split("; ").map(String::from));
        }
        if cfg.methods.is_empty() {
            problems.push("methods must list at least one method".into());
        }
        if cfg.alphas.iter().any(|a| !(*a > 0.0)) {
            problems.push("every alpha in the grid must be positive".into());
        }
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(problems.join("\n  ")))
        }
    }

    /// Reads an optional config file and applies `overrides` after it.
    pub fn load(path: Option<&Path>, overrides: &[Setting]) -> Result<Self> {
        let (mut settings, problems) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    Error::Config(format!("cannot read config file {}: {e}", p.display()))
                })?;
                parse_settings(&text)
            }
            None => (Vec::new(), Vec::new()),
        };
        settings.extend_from_slice(overrides);
        Self::from_settings(&settings, problems)
    }
}
