//! `simulate`: sweep specification, config files, CSV output.
//!
//! Every option can come from a flag or from a `key=value` line in the file
//! given by `--config`; keys are the flag names without the leading dashes.
//! Flags win over the file.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use hierbvn::sim::{run_sweep, Mode, SimConfig, SweepPoint, DEFAULT_FRAME_CAP, DEFAULT_HORIZON, DEFAULT_WARMUP};
use hierbvn::traffic::is_admissible;
use hierbvn::{BlockShape, TrafficModel};

pub const CSV_HEADER: &str = "model,r0,balancing,seed,n,m,frames_observed,mean_frame_length,diverged";
pub const SEED_ENV: &str = "HIERBVN_SEED";

#[derive(Args, Debug, Default)]
pub struct SimulateArgs {
    /// key=value file with defaults for any of the options below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Traffic models, comma-separated: U, NU.
    #[arg(long)]
    model: Option<String>,
    /// Servers.
    #[arg(long)]
    n: Option<String>,
    /// GPUs per server.
    #[arg(long)]
    m: Option<String>,
    /// Explicit r0 values, comma-separated.
    #[arg(long, conflicts_with = "r0_grid")]
    r0: Option<String>,
    /// Inclusive r0 grid `start:stop:step`.
    #[arg(long)]
    r0_grid: Option<String>,
    /// Seeds, comma-separated (default 1,2,3,4,5).
    #[arg(long)]
    seeds: Option<String>,
    /// on, off or both.
    #[arg(long)]
    balancing: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    warmup: Option<String>,
    /// fast or verify.
    #[arg(long)]
    mode: Option<String>,
    /// Longest allowed frame before a run is flagged as diverged.
    #[arg(long)]
    frame_cap: Option<String>,
    /// Exit nonzero if any run diverged.
    #[arg(long)]
    strict: bool,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum R0Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
    /// The default sweep range of each model.
    PerModel,
}

impl R0Grid {
    fn values(&self, model: TrafficModel) -> Vec<f64> {
        match self {
            R0Grid::List(v) => v.clone(),
            &R0Grid::Range { start, stop, step } => grid(start, stop, step),
            R0Grid::PerModel => match model {
                TrafficModel::Uniform => grid(0.005, 0.07, 0.005),
                TrafficModel::Hotspot => grid(0.001, 0.035, 0.002),
            },
        }
    }
}

/// `start, start + step, ...` up to `stop` inclusive, rounded to 12 decimals
/// so grid points print cleanly.
fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=count)
        .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub models: Vec<TrafficModel>,
    pub r0: R0Grid,
    pub seeds: Vec<u64>,
    pub balancing: Vec<bool>,
    pub shape: BlockShape,
    pub horizon: u64,
    pub warmup: u64,
    pub mode: Mode,
    pub frame_cap: u64,
    pub master_seed: u64,
    pub strict: bool,
    pub out: Option<PathBuf>,
}

impl SweepPlan {
    /// Points in canonical order: model, r0, balancing (off first), seed.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut points = Vec::new();
        for &model in &self.models {
            for r0 in self.r0.values(model) {
                for &balancing in &self.balancing {
                    for &seed in &self.seeds {
                        points.push(SweepPoint { model, r0, balancing, seed });
                    }
                }
            }
        }
        points
    }

    pub fn base_config(&self) -> SimConfig {
        SimConfig {
            shape: self.shape,
            horizon: self.horizon,
            warmup: self.warmup,
            mode: self.mode,
            frame_cap: self.frame_cap,
            master_seed: self.master_seed,
            ..SimConfig::new(TrafficModel::Uniform, 0.0)
        }
    }
}

pub fn parse_config_file(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected key=value", i + 1))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn list<T>(s: &str, what: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| parse(t).with_context(|| format!("invalid {what} {t:?}")))
        .collect::<Result<Vec<_>>>()?;
    if items.is_empty() {
        bail!("{what} list is empty");
    }
    Ok(items)
}

fn number<T: std::str::FromStr>(s: &str) -> Result<T>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    Ok(s.trim().parse::<T>()?)
}

/// Integer counts, accepting forms like `1e5` as well.
fn count(s: &str) -> Result<u64> {
    if let Ok(v) = s.trim().parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = number(s)?;
    if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
        Ok(v as u64)
    } else {
        bail!("expected a nonnegative integer, got {s:?}")
    }
}

fn rate(s: &str) -> Result<f64> {
    let v: f64 = number(s)?;
    if !(v.is_finite() && v >= 0.0) {
        bail!("r0 must be nonnegative");
    }
    Ok(v)
}

impl SweepPlan {
    pub fn resolve(args: &SimulateArgs, file: &HashMap<String, String>, env_seed: Option<&str>) -> Result<Self> {
        let get = |flag: &Option<String>, key: &str| flag.clone().or_else(|| file.get(key).cloned());

        let models = match get(&args.model, "model") {
            Some(s) => list(&s, "model", |t| Ok(t.parse::<TrafficModel>()?))?,
            None => vec![TrafficModel::Uniform, TrafficModel::Hotspot],
        };
        let n = get(&args.n, "n").map_or(Ok(8), |s| number::<usize>(&s))?;
        let m = get(&args.m, "m").map_or(Ok(2), |s| number::<usize>(&s))?;
        let r0 = match (&args.r0, &args.r0_grid, file.get("r0"), file.get("r0-grid")) {
            (Some(s), ..) | (None, None, Some(s), _) => R0Grid::List(list(s, "r0", rate)?),
            (None, Some(g), ..) | (None, None, None, Some(g)) => parse_range(g)?,
            (None, None, None, None) => R0Grid::PerModel,
        };
        let seeds = match get(&args.seeds, "seeds") {
            Some(s) => list(&s, "seed", count)?,
            None => (1..=5).collect(),
        };
        let balancing = match get(&args.balancing, "balancing").as_deref().map(str::trim) {
            None | Some("both") => vec![false, true],
            Some("on") => vec![true],
            Some("off") => vec![false],
            Some(other) => bail!("balancing must be on, off or both, got {other:?}"),
        };
        let horizon = get(&args.horizon, "horizon").map_or(Ok(DEFAULT_HORIZON), |s| count(&s))?;
        let warmup = get(&args.warmup, "warmup").map_or(Ok(DEFAULT_WARMUP), |s| count(&s))?;
        let mode = match get(&args.mode, "mode").as_deref().map(str::trim) {
            None | Some("fast") => Mode::Fast,
            Some("verify") => Mode::Verify,
            Some(other) => bail!("mode must be fast or verify, got {other:?}"),
        };
        let frame_cap = get(&args.frame_cap, "frame-cap").map_or(Ok(DEFAULT_FRAME_CAP), |s| count(&s))?;
        let strict = args.strict
            || match file.get("strict").map(|s| s.trim()) {
                None | Some("false") | Some("off") => false,
                Some("true") | Some("on") => true,
                Some(other) => bail!("strict must be true or false, got {other:?}"),
            };
        let out = args.out.clone().or_else(|| file.get("out").map(PathBuf::from));
        let master_seed = env_seed.map_or(Ok(0), |s| count(s).with_context(|| format!("invalid {SEED_ENV}")))?;

        let plan = SweepPlan {
            models,
            r0,
            seeds,
            balancing,
            shape: BlockShape::new(m, n)?,
            horizon,
            warmup,
            mode,
            frame_cap,
            master_seed,
            strict,
            out,
        };
        plan.base_config().validate()?;
        Ok(plan)
    }
}

fn parse_range(s: &str) -> Result<R0Grid> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, step] = parts.as_slice() else {
        bail!("r0 grid must be start:stop:step, got {s:?}");
    };
    let (start, stop, step) = (rate(a)?, rate(b)?, rate(step)?);
    if step <= 0.0 || stop < start {
        bail!("r0 grid {s:?} is empty");
    }
    Ok(R0Grid::Range { start, stop, step })
}

pub fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let file = match &args.config {
        Some(path) => parse_config_file(&read(path)?)?,
        None => HashMap::new(),
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let plan = SweepPlan::resolve(&args, &file, env_seed.as_deref())?;
    let (csv, summary, diverged) = run_plan(&plan)?;
    match &plan.out {
        Some(path) => {
            fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
            print!("{summary}");
        }
        None => {
            print!("{csv}");
            eprint!("{summary}");
        }
    }
    if diverged > 0 {
        eprintln!("warning: {diverged} runs exceeded the frame cap");
        if plan.strict {
            return Ok(ExitCode::FAILURE);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Runs the sweep; returns the CSV text, a per-point summary averaged over
/// seeds, and the number of diverged runs.
pub fn run_plan(plan: &SweepPlan) -> Result<(String, String, usize)> {
    let points = plan.points();
    let results = run_sweep(&plan.base_config(), &points);
    let (n, m) = (plan.shape.n(), plan.shape.m());

    let mut csv = format!("{CSV_HEADER}\n");
    let mut groups: BTreeMap<(TrafficModel, u64, bool), Vec<f64>> = BTreeMap::new();
    let mut diverged = 0;
    for (p, result) in points.iter().zip(results) {
        let stats = result.with_context(|| format!("{} r0={} seed={}", p.model, p.r0, p.seed))?;
        diverged += usize::from(stats.diverged);
        writeln!(
            csv,
            "{},{},{},{},{n},{m},{},{:.6},{}",
            p.model,
            p.r0,
            if p.balancing { "on" } else { "off" },
            p.seed,
            stats.frames_observed,
            stats.mean_frame_length,
            stats.diverged
        )?;
        groups
            .entry((p.model, p.r0.to_bits(), p.balancing))
            .or_default()
            .push(stats.mean_frame_length);
    }

    let mut summary = String::from("model      r0  balancing  mean E[T_f] over seeds\n");
    for ((model, bits, balancing), means) in &groups {
        let r0 = f64::from_bits(*bits);
        let mean = means.iter().sum::<f64>() / means.len() as f64;
        let rates = model.rates(plan.shape, r0)?;
        let flag = if is_admissible(&rates).admissible { "" } else { "  (inadmissible)" };
        writeln!(
            summary,
            "{model:<5} {r0:>8} {:>10}  {mean:.4}{flag}",
            if *balancing { "on" } else { "off" }
        )?;
    }
    Ok((csv, summary, diverged))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(args: SimulateArgs, file: &str) -> Result<SweepPlan> {
        SweepPlan::resolve(&args, &parse_config_file(file)?, None)
    }

    #[test]
    fn defaults_follow_the_reference_protocol() {
        let plan = resolve(SimulateArgs::default(), "").unwrap();
        assert_eq!((plan.shape.n(), plan.shape.m()), (8, 2));
        assert_eq!(plan.horizon, 100_000);
        assert_eq!(plan.warmup, 10_000);
        assert_eq!(plan.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(plan.balancing, vec![false, true]);
        let u = plan.r0.values(TrafficModel::Uniform);
        assert_eq!((u[0], *u.last().unwrap(), u.len()), (0.005, 0.07, 14));
        let nu = plan.r0.values(TrafficModel::Hotspot);
        assert_eq!((nu[0], *nu.last().unwrap()), (0.001, 0.035));
    }

    #[test]
    fn flags_override_config_file() {
        let args = SimulateArgs {
            horizon: Some("5000".into()),
            r0: Some("0.01,0.02".into()),
            ..Default::default()
        };
        let plan = resolve(args, "horizon=1e4\nwarmup = 100\nr0-grid=0.01:0.03:0.01\nmodel=NU\nstrict=true\n").unwrap();
        assert_eq!(plan.horizon, 5000);
        assert_eq!(plan.warmup, 100);
        assert_eq!(plan.r0, R0Grid::List(vec![0.01, 0.02]));
        assert_eq!(plan.models, vec![TrafficModel::Hotspot]);
        assert!(plan.strict);

        let args = SimulateArgs {
            r0_grid: Some("0.01:0.02:0.005".into()),
            ..Default::default()
        };
        let plan = resolve(args, "r0=0.5\n").unwrap();
        assert_eq!(plan.r0.values(TrafficModel::Uniform), vec![0.01, 0.015, 0.02]);
    }

    #[test]
    fn invalid_values_are_rejected() {
        let bad = |args: SimulateArgs| resolve(args, "").is_err();
        assert!(bad(SimulateArgs { balancing: Some("maybe".into()), ..Default::default() }));
        assert!(bad(SimulateArgs { r0: Some("-0.1".into()), ..Default::default() }));
        assert!(bad(SimulateArgs { r0_grid: Some("0.1:0.01:0.01".into()), ..Default::default() }));
        assert!(bad(SimulateArgs { warmup: Some("200000".into()), ..Default::default() }));
        assert!(bad(SimulateArgs { model: Some("X".into()), ..Default::default() }));
        assert!(bad(SimulateArgs { seeds: Some("".into()), ..Default::default() }));
        assert!(resolve(SimulateArgs::default(), "no equals sign").is_err());
    }

    #[test]
    fn env_seed_sets_master_seed() {
        let plan = SweepPlan::resolve(&SimulateArgs::default(), &HashMap::new(), Some("42")).unwrap();
        assert_eq!(plan.master_seed, 42);
        assert!(SweepPlan::resolve(&SimulateArgs::default(), &HashMap::new(), Some("x")).is_err());
    }

    #[test]
    fn canonical_point_order() {
        let args = SimulateArgs {
            model: Some("NU,U".into()),
            r0: Some("0.02,0.01".into()),
            seeds: Some("7,3".into()),
            ..Default::default()
        };
        let points = resolve(args, "").unwrap().points();
        assert_eq!(points.len(), 16);
        assert_eq!(points[0].model, TrafficModel::Hotspot);
        assert_eq!((points[0].r0, points[0].balancing, points[0].seed), (0.02, false, 7));
        assert_eq!(points[1].seed, 3);
        assert!(points[2].balancing);
    }
}
