use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use qgraph::analysis::AnalysisError;
use qgraph::stats::StatsError;
use qgraph::suite::SuiteConfig;
use qgraph::{Family, FamilySpec, LengthSource, MetricGraph, Tolerances};

use crate::CommonArgs;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Assertion(String),
    Solver(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Assertion(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input: {m}"),
            CliError::Assertion(m) => write!(f, "assertion failed: {m}"),
            CliError::Solver(m) => write!(f, "solver: {m}"),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::HardBoundViolation { .. } => CliError::Assertion(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(format!("output: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(format!("output: {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Audit {
    Friedlander,
    LocalGlobal,
    Torus,
}

impl Audit {
    fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "friedlander" | "completeness" => Ok(Audit::Friedlander),
            "local-global" => Ok(Audit::LocalGlobal),
            "torus" => Ok(Audit::Torus),
            _ => Err(CliError::Input(format!("unknown audit '{name}'"))),
        }
    }
}

/// Fully resolved options of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub graph: MetricGraph,
    pub kmax: Option<f64>,
    pub count: Option<usize>,
    pub tol: Tolerances,
    pub suite: SuiteConfig,
    pub audits: Vec<Audit>,
    pub out: PathBuf,
    pub workers: usize,
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> Result<Self, CliError> {
        let graph = match (&args.graph, &args.family) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                MetricGraph::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
            }
            (None, Some(name)) => family_graph(name, args.params.as_deref(), args.lengths.as_deref(), args.seed)?,
            (None, None) => return Err(CliError::Input("either --graph or --family is required".into())),
        };
        if let Some(kmax) = args.kmax {
            if !(kmax > 0.0 && kmax.is_finite()) {
                return Err(CliError::Input(format!("--kmax must be positive, got {kmax}")));
            }
        }
        let (tol, suite) = parse_tolerances(&args.tolerances)?;
        let mut audits = args
            .audits
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| Audit::parse(s.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        audits.sort();
        audits.dedup();
        Ok(Self {
            graph,
            kmax: args.kmax,
            count: args.count,
            tol,
            suite,
            audits,
            out: args.out.clone(),
            workers: args.workers,
        })
    }

    pub fn audit(&self, a: Audit) -> bool {
        self.audits.contains(&a)
    }

    pub fn in_pool<T: Send>(&self, f: impl FnOnce() -> Result<T, CliError> + Send) -> Result<T, CliError> {
        pool(self.workers)?.install(f)
    }
}

pub fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    if workers == 0 {
        return Err(CliError::Input("--workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Input(e.to_string()))
}

/// Engine tolerances plus `identity`, `oracle`, `torus-sample` and `star-sample`.
pub fn parse_tolerances(items: &[String]) -> Result<(Tolerances, SuiteConfig), CliError> {
    let mut tol = Tolerances::default();
    let mut suite = SuiteConfig::default();
    for item in items {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("--tol expects NAME=VALUE, got '{item}'")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("--tol {name}: '{value}' is not a number")))?;
        if !(value >= 0.0 && value.is_finite()) {
            return Err(CliError::Input(format!("--tol {name}: value must be non-negative")));
        }
        match name.trim() {
            "identity" => suite.identity_tol = value,
            "oracle" => suite.oracle_rel = value,
            "torus-sample" => suite.torus_sample = value as usize,
            "star-sample" => suite.star_sample = value as usize,
            other => {
                if !tol.set(other, value) {
                    return Err(CliError::Input(format!("unknown tolerance '{other}'")));
                }
            }
        }
    }
    Ok((tol, suite))
}

fn parse_params(text: Option<&str>) -> Result<BTreeMap<String, usize>, CliError> {
    let mut out = BTreeMap::new();
    for item in text.unwrap_or("").split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("--params expects KEY=VALUE, got '{item}'")))?;
        let v = v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("--params {k}: '{v}' is not a non-negative integer")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

pub fn family_graph(name: &str, params: Option<&str>, lengths: Option<&str>, seed: u64) -> Result<MetricGraph, CliError> {
    let mut params = parse_params(params)?;
    let mut take = |key: &str| {
        params
            .remove(key)
            .ok_or_else(|| CliError::Input(format!("family {name} needs parameter '{key}'")))
    };
    let family = match name {
        "interval" => Family::Interval,
        "star" => Family::Star { tails: take("tails")? },
        "stower" => Family::Stower {
            loops: take("loops")?,
            tails: take("tails")?,
        },
        "mandarin" => Family::Mandarin { edges: take("edges")? },
        "tree31" => Family::Tree31 {
            interior: take("interior")?,
        },
        "random-regular" => Family::RandomRegular {
            degree: take("degree")?,
            vertices: take("vertices")?,
            seed,
        },
        _ => return Err(CliError::Input(format!("unknown family '{name}'"))),
    };
    if let Some(extra) = params.keys().next() {
        return Err(CliError::Input(format!("family {name} has no parameter '{extra}'")));
    }
    let source = match lengths {
        Some(text) => LengthSource::Explicit {
            lengths: text
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| CliError::Input(format!("--lengths: cannot parse '{text}'")))?,
        },
        None => LengthSource::uniform(seed),
    };
    FamilySpec::new(family, source)
        .generate()
        .map_err(|e| CliError::Input(e.to_string()))
}
