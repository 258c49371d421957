//! Run configuration: defaults, then a `key=value` config file, then flags.

use crate::failure::Failure;
use airga::airga::{ExpansionPointSet, SolverConfig, SolverMode};
use airga::model::io::parse_key_values;
use airga::model::{ModelFamily, ModelSpec};
use airga::solvers::PreconditionerKind;
use airga::transfer::FrequencyGrid;
use clap::Args;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Generated(ModelSpec),
    Directory(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSource,
    pub r_max: usize,
    pub point_count: usize,
    pub point_low: f64,
    pub point_high: f64,
    pub spacing: Spacing,
    pub outer_tol: f64,
    pub inner_tol: f64,
    pub max_outer: usize,
    pub solver: SolverConfig,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
    /// Compute the condition number and the `‖L⁻¹‖_{H∞}` check (expensive).
    pub kappa: bool,
    pub output_dir: PathBuf,
    pub tolerances: Vec<f64>,
}

impl RunConfig {
    pub fn initial_points(&self) -> airga::Result<ExpansionPointSet> {
        match self.spacing {
            Spacing::Linear => {
                ExpansionPointSet::linear(self.point_low, self.point_high, self.point_count)
            }
            Spacing::Log => {
                ExpansionPointSet::log(self.point_low, self.point_high, self.point_count)
            }
        }
    }

    pub fn grid(&self) -> airga::Result<FrequencyGrid> {
        FrequencyGrid::log(self.grid_lo, self.grid_hi, self.grid_points)
    }
}

/// Flags shared by `reduce` and `sweep`. Every flag may also appear in the
/// config file as `name=value` (dashes or underscores).
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Config file with `key=value` lines; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory holding a stored system (see `generate`).
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
    /// Generated model family: beam1d or spd-synthetic.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    /// Largest reduced order.
    #[arg(long)]
    pub r_max: Option<String>,
    /// Number of expansion points.
    #[arg(long)]
    pub points: Option<String>,
    #[arg(long)]
    pub low: Option<String>,
    #[arg(long)]
    pub high: Option<String>,
    /// Expansion point spacing: linear or log.
    #[arg(long)]
    pub spacing: Option<String>,
    #[arg(long)]
    pub outer_tol: Option<String>,
    #[arg(long)]
    pub inner_tol: Option<String>,
    #[arg(long)]
    pub max_outer: Option<String>,
    /// Linear solver: direct, cg or rcg.
    #[arg(long)]
    pub solver: Option<String>,
    /// Relative residual tolerance of the iterative solvers.
    #[arg(long)]
    pub rel_tol: Option<String>,
    /// Preconditioner: none, ichol0 or spai.
    #[arg(long)]
    pub precond: Option<String>,
    #[arg(long)]
    pub max_iter: Option<String>,
    /// Disable subspace recycling in rcg mode.
    #[arg(long)]
    pub no_recycling: bool,
    #[arg(long)]
    pub grid_lo: Option<String>,
    #[arg(long)]
    pub grid_hi: Option<String>,
    #[arg(long)]
    pub grid_points: Option<String>,
    /// Also compute the condition number and the `‖L⁻¹‖_{H∞}` check.
    #[arg(long)]
    pub kappa: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "model_dir",
    "family",
    "n",
    "seed",
    "alpha",
    "beta",
    "r_max",
    "points",
    "low",
    "high",
    "spacing",
    "outer_tol",
    "inner_tol",
    "max_outer",
    "solver",
    "rel_tol",
    "precond",
    "max_iter",
    "no_recycling",
    "grid_lo",
    "grid_hi",
    "grid_points",
    "kappa",
    "out",
    "tolerances",
];

impl RunArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut put = |k: &'static str, v: &Option<String>| {
            if let Some(v) = v {
                out.push((k, v.clone()));
            }
        };
        put("family", &self.family);
        put("n", &self.n);
        put("seed", &self.seed);
        put("alpha", &self.alpha);
        put("beta", &self.beta);
        put("r_max", &self.r_max);
        put("points", &self.points);
        put("low", &self.low);
        put("high", &self.high);
        put("spacing", &self.spacing);
        put("outer_tol", &self.outer_tol);
        put("inner_tol", &self.inner_tol);
        put("max_outer", &self.max_outer);
        put("solver", &self.solver);
        put("rel_tol", &self.rel_tol);
        put("precond", &self.precond);
        put("max_iter", &self.max_iter);
        put("grid_lo", &self.grid_lo);
        put("grid_hi", &self.grid_hi);
        put("grid_points", &self.grid_points);
        if let Some(p) = &self.model_dir {
            out.push(("model_dir", p.display().to_string()));
        }
        if let Some(p) = &self.out {
            out.push(("out", p.display().to_string()));
        }
        if self.no_recycling {
            out.push(("no_recycling", "true".into()));
        }
        if self.kappa {
            out.push(("kappa", "true".into()));
        }
        out
    }

    /// Merges defaults, the config file and flags. `tolerances` comes from the
    /// sweep subcommand and wins over the file.
    pub fn resolve(&self, tolerances: Option<&[f64]>) -> Result<RunConfig, Failure> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        if let Some(path) = &self.config {
            kv = read_config(path)?;
        }
        for (k, v) in self.overrides() {
            kv.insert(k.to_string(), v);
        }
        let mut cfg = build(&kv)?;
        if let Some(t) = tolerances {
            cfg.tolerances = t.to_vec();
        }
        Ok(cfg)
    }
}

fn read_config(path: &Path) -> Result<BTreeMap<String, String>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let raw = parse_key_values(&text, path).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut kv = BTreeMap::new();
    for (k, v) in raw {
        let key = k.replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(Failure::Usage(format!(
                "unknown config key `{k}` in {}",
                path.display()
            )));
        }
        kv.insert(key, v);
    }
    Ok(kv)
}

fn get<T: std::str::FromStr>(
    kv: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T, Failure>
where
    T::Err: std::fmt::Display,
{
    match kv.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|e| Failure::Usage(format!("invalid value `{v}` for {key}: {e}"))),
    }
}

fn flag(kv: &BTreeMap<String, String>, key: &str) -> Result<bool, Failure> {
    match kv.get(key).map(|v| v.to_ascii_lowercase()) {
        None => Ok(false),
        Some(v) if v == "true" || v == "1" || v == "yes" => Ok(true),
        Some(v) if v == "false" || v == "0" || v == "no" => Ok(false),
        Some(v) => Err(Failure::Usage(format!("invalid boolean `{v}` for {key}"))),
    }
}

pub fn parse_tolerances(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Failure::Usage(format!("invalid tolerance `{t}`: {e}")))
        })
        .collect()
}

fn build(kv: &BTreeMap<String, String>) -> Result<RunConfig, Failure> {
    let model = match kv.get("model_dir") {
        Some(dir) => ModelSource::Directory(PathBuf::from(dir)),
        None => {
            let family: ModelFamily = get(kv, "family", ModelFamily::Beam1d)?;
            let n = get(kv, "n", 200usize)?;
            let seed = get(kv, "seed", 0u64)?;
            let mut spec = match family {
                ModelFamily::Beam1d => ModelSpec::beam(n),
                ModelFamily::SpdSynthetic => ModelSpec::synthetic(n, seed),
            };
            spec.seed = seed;
            spec.alpha = get(kv, "alpha", spec.alpha)?;
            spec.beta = get(kv, "beta", spec.beta)?;
            spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            ModelSource::Generated(spec)
        }
    };

    let mode: SolverMode = get(kv, "solver", SolverMode::Direct)?;
    let rel_tol = get(kv, "rel_tol", 1e-10)?;
    let pc: PreconditionerKind = get(kv, "precond", PreconditionerKind::None)?;
    let mut solver = match mode {
        SolverMode::Direct => SolverConfig::direct(),
        SolverMode::Cg => SolverConfig::cg(rel_tol, pc),
        SolverMode::Rcg => SolverConfig::rcg(rel_tol, pc),
    };
    if let Some(v) = kv.get("max_iter") {
        solver.max_iter = Some(
            v.parse()
                .map_err(|e| Failure::Usage(format!("invalid max_iter `{v}`: {e}")))?,
        );
    }
    if flag(kv, "no_recycling")? {
        solver.recycling_enabled = false;
    }
    solver
        .validate()
        .map_err(|e| Failure::Usage(e.to_string()))?;

    let spacing = match kv.get("spacing").map(String::as_str) {
        None | Some("linear") => Spacing::Linear,
        Some("log") => Spacing::Log,
        Some(other) => {
            return Err(Failure::Usage(format!(
                "spacing must be linear or log, got `{other}`"
            )))
        }
    };
    let tolerances = match kv.get("tolerances") {
        Some(t) => parse_tolerances(t)?,
        None => vec![1e-6, 1e-10, 1e-14],
    };

    let cfg = RunConfig {
        model,
        r_max: get(kv, "r_max", 8usize)?,
        point_count: get(kv, "points", 3usize)?,
        point_low: get(kv, "low", 1.0)?,
        point_high: get(kv, "high", 500.0)?,
        spacing,
        outer_tol: get(kv, "outer_tol", 1e-4)?,
        inner_tol: get(kv, "inner_tol", 1e-6)?,
        max_outer: get(kv, "max_outer", 10usize)?,
        solver,
        grid_lo: get(kv, "grid_lo", 1e-2)?,
        grid_hi: get(kv, "grid_hi", 1e6)?,
        grid_points: get(kv, "grid_points", 400usize)?,
        kappa: flag(kv, "kappa")?,
        output_dir: PathBuf::from(kv.get("out").map(String::as_str).unwrap_or("airga-out")),
        tolerances,
    };
    cfg.initial_points()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    cfg.grid().map_err(|e| Failure::Usage(e.to_string()))?;
    if !(cfg.outer_tol > 0.0 && cfg.inner_tol > 0.0) || cfg.max_outer == 0 {
        return Err(Failure::Usage(
            "outer_tol, inner_tol and max_outer must be positive".into(),
        ));
    }
    Ok(cfg)
}
