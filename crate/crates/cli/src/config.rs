//! Run configuration: TOML file merged with command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use julia_thermo::family::{FamilyDef, FamilySpec, Relation};
use julia_thermo::pressure::default_depth;
use julia_thermo::transfer::DEFAULT_MESH_DENSITY;
use julia_thermo::wpmetric::{GridSpec, MetricOptions};
use julia_thermo::C64;
use serde::{Deserialize, Serialize};

/// Rejected configuration; maps to exit status 2.
#[derive(Debug)]
pub struct ValidationError(pub String);

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationError {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    ValidationError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Dimension,
    Pressure,
    JointPressure,
    TowerSpectrum,
    MetricField,
    Distance,
    Diagnostics,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Dimension => "dimension",
            Command::Pressure => "pressure",
            Command::JointPressure => "joint-pressure",
            Command::TowerSpectrum => "tower-spectrum",
            Command::MetricField => "metric-field",
            Command::Distance => "distance",
            Command::Diagnostics => "diagnostics",
        }
    }

    fn is_metric(self) -> bool {
        matches!(self, Command::MetricField | Command::Distance)
    }
}

/// Complex number as `[re, im]`.
pub type Pair = [f64; 2];

/// Contents of a config file. Every field is optional; flags override.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub family: Option<FamilyDef>,
    /// Parameter, one `[re, im]` per ambient coordinate.
    pub lambda: Option<Vec<Pair>>,
    /// Second parameter for joint pressure.
    pub mu: Option<Vec<Pair>>,
    /// Parameters for dimension and pressure scans.
    pub scan: Option<Vec<Vec<Pair>>>,
    /// Newton-solve the relations starting from `lambda`.
    pub solve: Option<bool>,
    /// Free complex coordinates used as chart coordinates.
    pub chart: Option<Vec<usize>>,
    pub t: Option<Vec<f64>>,
    pub t2: Option<Vec<f64>>,
    pub depth: Option<usize>,
    pub kmax: Option<usize>,
    pub chi_star: Option<f64>,
    pub mesh: Option<usize>,
    pub kappa: Option<f64>,
    pub grid: Option<String>,
    pub tol: Option<f64>,
    pub h: Option<f64>,
    pub from: Option<usize>,
    pub to: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(self, other: RunConfig) -> RunConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RunConfig { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            command, family, lambda, mu, scan, solve, chart, t, t2, depth, kmax, chi_star, mesh, kappa, grid, tol, h, from, to, seed,
            threads, out
        )
    }
}

/// Validated run with defaults filled in.
#[derive(Debug, Clone, Serialize)]
pub struct Run {
    pub command: Command,
    pub family: FamilyDef,
    #[serde(skip)]
    pub spec: FamilySpec,
    pub lambda: Vec<C64>,
    pub mu: Vec<C64>,
    pub scan: Vec<Vec<C64>>,
    pub solve: bool,
    pub chart: Vec<usize>,
    pub t: Vec<f64>,
    pub t2: Vec<f64>,
    pub depth: usize,
    pub kmax: usize,
    pub chi_star: f64,
    pub mesh: usize,
    pub kappa: f64,
    pub grid: Option<GridSpec>,
    pub tol: f64,
    pub h: f64,
    pub from: usize,
    pub to: Option<usize>,
    pub seed: u64,
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub out: PathBuf,
}

fn complexes(v: &[Pair]) -> Vec<C64> {
    v.iter().map(|p| C64::new(p[0], p[1])).collect()
}

fn check_finite(name: &str, xs: &[f64]) -> anyhow::Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite")))
    }
}

impl Run {
    pub fn resolve(cfg: RunConfig) -> anyhow::Result<Run> {
        let command = cfg.command.ok_or_else(|| invalid("no command given"))?;
        let family = cfg.family.unwrap_or(FamilyDef { name: "quadratic".into(), coeffs: vec![], ambient_dim: None, relations: vec![] });
        let spec = FamilySpec::from_def(&family).map_err(|e| invalid(format!("family: {e}")))?;
        let dim = spec.ambient_dim;
        let lambda = cfg.lambda.as_deref().map(complexes).unwrap_or_else(|| vec![C64::new(0.0, 0.0); dim]);
        let mu = cfg.mu.as_deref().map(complexes).unwrap_or_else(|| lambda.clone());
        let scan = match &cfg.scan {
            Some(s) => s.iter().map(|p| complexes(p)).collect(),
            None => vec![lambda.clone()],
        };
        for (name, p) in std::iter::once(("lambda", &lambda)).chain(std::iter::once(("mu", &mu))).chain(scan.iter().map(|p| ("scan", p))) {
            if p.len() != dim {
                return Err(invalid(format!("{name} has {} components, family expects {dim}", p.len())));
            }
            check_finite(name, &p.iter().flat_map(|z| [z.re, z.im]).collect::<Vec<_>>())?;
        }
        let metric = MetricOptions::default();
        let free = dim.saturating_sub(spec.relations.len());
        let chart = cfg.chart.unwrap_or_else(|| (0..free).collect());
        if chart.iter().any(|&i| i >= dim) {
            return Err(invalid(format!("chart index outside 0..{dim}")));
        }
        let t = cfg.t.unwrap_or_else(|| vec![1.0]);
        let t2 = cfg.t2.unwrap_or_else(|| t.clone());
        if t.is_empty() || t2.is_empty() {
            return Err(invalid("t list is empty"));
        }
        check_finite("t", &t)?;
        check_finite("t2", &t2)?;
        let (kmax_default, mesh_default) =
            if command.is_metric() { (metric.k_max, metric.mesh_density) } else { (18, DEFAULT_MESH_DENSITY) };
        let kmax = cfg.kmax.unwrap_or(kmax_default);
        let mesh = cfg.mesh.unwrap_or(mesh_default);
        let chi_star = cfg.chi_star.unwrap_or(metric.chi_star);
        let kappa = cfg.kappa.unwrap_or(metric.kappa);
        if !chi_star.is_finite() || chi_star <= 1.0 {
            return Err(invalid(format!("chi_star = {chi_star} must exceed 1")));
        }
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(invalid(format!("kappa = {kappa} must lie in (0, 1]")));
        }
        if mesh == 0 {
            return Err(invalid("mesh density must be positive"));
        }
        let grid = match &cfg.grid {
            Some(g) => Some(GridSpec::parse(g).map_err(|e| invalid(e.to_string()))?),
            None if command.is_metric() => return Err(invalid("--grid is required for metric commands")),
            None => None,
        };
        let tol = cfg.tol.unwrap_or(1e-8);
        let h = cfg.h.unwrap_or(metric.h);
        if !(tol > 0.0) || !(h > 0.0) {
            return Err(invalid("tol and h must be positive"));
        }
        Ok(Run {
            command,
            family: spec.to_def(),
            depth: cfg.depth.unwrap_or_else(|| default_depth(spec.degree())),
            spec,
            lambda,
            mu,
            scan,
            solve: cfg.solve.unwrap_or(false),
            chart,
            t,
            t2,
            kmax,
            chi_star,
            mesh,
            kappa,
            grid,
            tol,
            h,
            from: cfg.from.unwrap_or(0),
            to: cfg.to,
            seed: cfg.seed.unwrap_or(0),
            threads: cfg.threads,
            out: cfg.out.unwrap_or_else(|| PathBuf::from(".")),
        })
    }

    pub fn metric_options(&self) -> MetricOptions {
        MetricOptions {
            chi_star: self.chi_star,
            k_max: self.kmax,
            mesh_density: self.mesh,
            kappa: self.kappa,
            h: self.h,
            ..MetricOptions::default()
        }
    }
}

/// Parses `"re,im;re,im"`.
pub fn parse_lambda(s: &str) -> Result<Vec<Pair>, String> {
    s.split(';')
        .map(|z| {
            let parts: Vec<&str> = z.split(',').map(str::trim).collect();
            match parts.as_slice() {
                [re, im] => {
                    Ok([re.parse().map_err(|_| format!("bad number '{re}'"))?, im.parse().map_err(|_| format!("bad number '{im}'"))?])
                }
                [re] => Ok([re.parse().map_err(|_| format!("bad number '{re}'"))?, 0.0]),
                _ => Err(format!("'{z}' is not re,im")),
            }
        })
        .collect()
}

/// Parses `"critical_index,preperiod,period"`.
pub fn parse_relation(s: &str) -> Result<Relation, String> {
    let n: Vec<usize> = s.split(',').map(|x| x.trim().parse().map_err(|_| format!("bad relation '{s}'"))).collect::<Result<_, _>>()?;
    match n.as_slice() {
        [i, pre, per] => Ok(Relation::new(*i, *pre, *per)),
        _ => Err(format!("relation '{s}' is not index,preperiod,period")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_prefers_overrides() {
        let file = RunConfig { depth: Some(10), kappa: Some(0.3), ..Default::default() };
        let flags = RunConfig { depth: Some(12), ..Default::default() };
        let m = file.merge(flags);
        assert_eq!(m.depth, Some(12));
        assert_eq!(m.kappa, Some(0.3));
    }

    #[test]
    fn parses_toml() {
        let cfg: RunConfig = toml::from_str(
            r#"
            command = "dimension"
            lambda = [[-2.0, 0.0]]
            family = { name = "quadratic", relations = [{ critical_index = 0, preperiod = 2, period = 1 }] }
            "#,
        )
        .unwrap();
        let run = Run::resolve(cfg).unwrap();
        assert_eq!(run.command, Command::Dimension);
        assert_eq!(run.lambda, vec![C64::new(-2.0, 0.0)]);
        assert_eq!(run.spec.relations.len(), 1);
        assert!(run.chart.is_empty());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_knobs() {
        assert!(toml::from_str::<RunConfig>("dpeth = 3").is_err());
        let bad = RunConfig { command: Some(Command::Pressure), kappa: Some(1.5), ..Default::default() };
        assert!(Run::resolve(bad).unwrap_err().downcast_ref::<ValidationError>().is_some());
        let no_grid = RunConfig { command: Some(Command::MetricField), ..Default::default() };
        assert!(Run::resolve(no_grid).is_err());
    }

    #[test]
    fn lambda_and_relation_syntax() {
        assert_eq!(parse_lambda("1.5,0.3;-2").unwrap(), vec![[1.5, 0.3], [-2.0, 0.0]]);
        assert!(parse_lambda("x,1").is_err());
        assert_eq!(parse_relation("0,2,1").unwrap(), Relation::new(0, 2, 1));
        assert!(parse_relation("0,2").is_err());
    }
}
