//! TOML run configuration for the command-line driver.
//!
//! Every section is optional; missing values fall back to defaults that
//! depend on the problem. Unknown keys are rejected.
//!
//! ```toml
//! problem = "poisson_1d"
//!
//! [network]
//! dims = [1, 30, 30, 1]
//!
//! [train]
//! epochs = 5000
//! seed = 3
//!
//! [quadrature]
//! build_order = 200
//! fine_order = 400
//!
//! [solve]
//! beta = 200.0
//! r_list = "0:20:1"
//!
//! [time]
//! dt = 0.01
//! t_final = 1.0
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nitsche::DEFAULT_BETA;
use crate::problems::{lookup_with, ProblemKind, ProblemParams, ProblemSpec};
use crate::timestep::{SteadyConfig, TimeConfig};
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    #[serde(default)]
    pub params: ProblemParams,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub dims: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub n_collocation: Option<usize>,
    pub n_boundary: Option<usize>,
    pub boundary_weight: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    /// Gauss points per axis and patch for assembling and basis extraction.
    pub build_order: Option<usize>,
    /// Gauss points per axis and patch for error and residual norms.
    pub fine_order: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    pub beta: Option<f64>,
    pub r_list: Option<RankList>,
    /// Legendre degree of the reference solve for problems without an
    /// exact solution.
    pub reference_degree: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub tol: Option<f64>,
    pub startup_substeps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// Ranks to solve for: an explicit list or an inclusive `a:b:step` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RankList {
    List(Vec<usize>),
    Range(String),
}

impl RankList {
    pub fn ranks(&self) -> Result<Vec<usize>> {
        let ranks = match self {
            RankList::List(v) => v.clone(),
            RankList::Range(s) => parse_rank_range(s)?,
        };
        if ranks.is_empty() {
            return Err(Error::InvalidConfig("empty rank list".into()));
        }
        Ok(ranks)
    }
}

/// Parses `a:b:step` or `a:b` (step 1), inclusive of `b`.
pub fn parse_rank_range(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidConfig(format!("rank range must be a:b or a:b:step, got {s:?}"));
    let parts: Vec<usize> = s
        .split(':')
        .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (a, b, step) = match parts[..] {
        [a, b] => (a, b, 1),
        [a, b, step] => (a, b, step),
        _ => return Err(bad()),
    };
    if step == 0 || b < a {
        return Err(bad());
    }
    Ok((a..=b).step_by(step).collect())
}

/// Fully defaulted and validated settings.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub problem: ProblemSpec,
    pub dims: Vec<usize>,
    pub train: TrainConfig,
    pub build_order: usize,
    pub fine_order: usize,
    pub beta: f64,
    pub r_list: Option<Vec<usize>>,
    pub reference_degree: usize,
    pub steady: SteadyConfig,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Applies defaults for the configured problem and validates everything.
    pub fn resolve(&self) -> Result<Resolved> {
        let problem = lookup_with(&self.problem, &self.params)?;
        let domain = problem.domain();
        let dim = domain.dim();

        let dims = self.network.dims.clone().unwrap_or_else(|| match dim {
            1 => vec![1, 30, 30, 1],
            _ => vec![2, 60, 80, 1],
        });
        if dims.first() != Some(&dim) {
            return Err(Error::InvalidArchitecture(format!(
                "input width must equal the domain dimension {dim}, got {dims:?}"
            )));
        }

        let mut train = TrainConfig::for_domain(&domain);
        let t = &self.train;
        train.learning_rate = t.learning_rate.unwrap_or(train.learning_rate);
        train.epochs = t.epochs.unwrap_or(train.epochs);
        train.n_collocation = t.n_collocation.unwrap_or(train.n_collocation);
        train.n_boundary = t.n_boundary.unwrap_or(train.n_boundary);
        train.boundary_weight = t.boundary_weight.unwrap_or(train.boundary_weight);
        train.seed = t.seed.unwrap_or(train.seed);
        train.validate()?;

        let default_order = if dim == 1 { 200 } else { 60 };
        let build_order = self.quadrature.build_order.unwrap_or(default_order);
        let fine_order = self.quadrature.fine_order.unwrap_or(2 * build_order);
        if build_order < 2 || fine_order <= build_order {
            return Err(Error::InvalidConfig("need 2 <= build_order < fine_order".into()));
        }

        let beta = self.solve.beta.unwrap_or(DEFAULT_BETA);
        let r_list = self.solve.r_list.as_ref().map(RankList::ranks).transpose()?;

        let (dt, t_final) = match (&problem.kind, problem.id.as_str()) {
            (_, "burgers_steady") => (0.02, 1000.0),
            (_, "pb_steady") => (0.02, 100.0),
            _ => (1e-2, 1.0),
        };
        let time = TimeConfig {
            dt: self.time.dt.unwrap_or(dt),
            t_final: self.time.t_final.unwrap_or(t_final),
            beta,
            startup_substeps: self.time.startup_substeps,
            reassemble_each_step: false,
        };
        if let ProblemKind::Evolution(_) = problem.kind {
            time.validate()?;
        } else if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("penalty must be positive, got {beta}")));
        }
        let tol = self.time.tol.unwrap_or(1e-12);
        if !(tol > 0.0) {
            return Err(Error::InvalidConfig("steady tolerance must be positive".into()));
        }

        Ok(Resolved {
            problem,
            dims,
            train,
            build_order,
            fine_order,
            beta,
            r_list,
            reference_degree: self.solve.reference_degree.unwrap_or(48),
            steady: SteadyConfig { time, tol },
            out_dir: self.output.dir.clone().unwrap_or_else(|| PathBuf::from("out")),
        })
    }
}
