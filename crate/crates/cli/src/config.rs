//! Run configuration: flags over an optional TOML file over defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use robust_amput::measures::{
    measure_from_json, measures_from_put_curves, passes_atom_cap, Measure, MeasureKind, PutCurve, DEFAULT_GRID,
};
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TOL: f64 = 1e-6;

/// Flags shared by every subcommand. Each may also be set in `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML file with any of the keys below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Time-1 law: a JSON file or inline JSON such as '{"uniform":[-1,1]}'.
    #[arg(long)]
    pub mu: Option<String>,
    /// Time-2 law, same forms as --mu.
    #[arg(long)]
    pub nu: Option<String>,
    /// Time-1 put prices as a `strike,price` CSV.
    #[arg(long)]
    pub curve1: Option<PathBuf>,
    /// Time-2 put prices as a `strike,price` CSV.
    #[arg(long)]
    pub curve2: Option<PathBuf>,
    /// Bank-account growth factor to the first date (default 1).
    #[arg(long)]
    pub disc1: Option<f64>,
    /// Bank-account growth factor to the second date (default 1).
    #[arg(long)]
    pub disc2: Option<f64>,
    /// First-date strike, or `lo:hi` for region-map.
    #[arg(long, allow_hyphen_values = true)]
    pub k1: Option<String>,
    /// Second-date strike, or `lo:hi` for region-map.
    #[arg(long, allow_hyphen_values = true)]
    pub k2: Option<String>,
    /// region-map: strike cells per axis, `N` or `N1xN2` (default 50).
    /// verify: oracle size, `n` or `nxm` (default 100x200).
    #[arg(long)]
    pub grid: Option<String>,
    /// Duality tolerance for verify (default 1e-6).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed for sampled paths (default 42).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of sampled paths for simulate and verify (default 100000).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Grid size for parametric laws (default 1000).
    #[arg(long)]
    pub points: Option<usize>,
    /// Directory for output files; without it the main output goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// The same keys as [`Flags`], read from TOML. `mu` and `nu` may be tables.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    mu: Option<toml::Value>,
    nu: Option<toml::Value>,
    curve1: Option<PathBuf>,
    curve2: Option<PathBuf>,
    disc1: Option<f64>,
    disc2: Option<f64>,
    k1: Option<toml::Value>,
    k2: Option<toml::Value>,
    grid: Option<toml::Value>,
    tol: Option<f64>,
    seed: Option<u64>,
    samples: Option<usize>,
    points: Option<usize>,
    out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub enum Input {
    Measures { mu: String, nu: String },
    Curves { curve1: PathBuf, curve2: PathBuf, disc1: f64, disc2: f64 },
}

/// A strike or a strike range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strike {
    At(f64),
    Range(f64, f64),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: Input,
    pub k1: Option<Strike>,
    pub k2: Option<Strike>,
    pub grid: Option<(usize, usize)>,
    pub tol: f64,
    pub seed: u64,
    pub samples: usize,
    pub points: usize,
    pub out: Option<PathBuf>,
}

/// The two laws as the engine sees them.
#[derive(Debug, Clone)]
pub struct Laws {
    pub mu: Measure,
    pub nu: Measure,
    /// Width of the uniform kernel applied to both laws, if any.
    pub smoothed: Option<f64>,
    /// `μ` keeps its atoms: only the oracle and the discrete coupling apply.
    pub discrete: bool,
}

fn value_to_text(v: toml::Value) -> Result<String, CliError> {
    match v {
        toml::Value::String(s) => Ok(s),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        other => serde_json::to_string(&other).map_err(|e| CliError::Input(format!("config: {e}"))),
    }
}

fn parse_strike(s: &str) -> Result<Strike, CliError> {
    let bad = || CliError::Input(format!("strike `{s}` is neither a number nor `lo:hi`"));
    let num = |t: &str| t.trim().parse::<f64>().ok().filter(|v| v.is_finite());
    match s.split_once(':') {
        Some((a, b)) => match (num(a), num(b)) {
            (Some(a), Some(b)) if a < b => Ok(Strike::Range(a, b)),
            _ => Err(bad()),
        },
        None => num(s).map(Strike::At).ok_or_else(bad),
    }
}

fn parse_grid(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Input(format!("grid `{s}` must be `N` or `NxM` with positive integers"));
    let num = |t: &str| t.trim().parse::<usize>().ok().filter(|&v| v > 0);
    match s.split_once(['x', 'X']) {
        Some((a, b)) => Ok((num(a).ok_or_else(bad)?, num(b).ok_or_else(bad)?)),
        None => {
            let n = num(s).ok_or_else(bad)?;
            Ok((n, n))
        }
    }
}

/// Inline JSON when the text starts with `{`, a file path otherwise.
fn read_measure_text(arg: &str, base: &Path) -> Result<String, CliError> {
    if arg.trim_start().starts_with('{') {
        return Ok(arg.to_string());
    }
    let path = base.join(arg);
    std::fs::read_to_string(&path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<Self, CliError> {
        let (file, base) = match &flags.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Input(format!("cannot read {}: {e}", p.display())))?;
                let cfg: FileConfig =
                    toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
                (cfg, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (FileConfig::default(), PathBuf::new()),
        };
        let text = |flag: &Option<String>, file: Option<toml::Value>| -> Result<Option<String>, CliError> {
            match flag {
                Some(s) => Ok(Some(s.clone())),
                None => file.map(value_to_text).transpose(),
            }
        };
        // paths from the file are relative to the file
        let rebase = |p: Option<PathBuf>| p.map(|p| base.join(p));
        let mu = match &flags.mu {
            Some(m) => Some(read_measure_text(m, Path::new(""))?),
            None => file.mu.map(value_to_text).transpose()?.map(|m| read_measure_text(&m, &base)).transpose()?,
        };
        let nu = match &flags.nu {
            Some(m) => Some(read_measure_text(m, Path::new(""))?),
            None => file.nu.map(value_to_text).transpose()?.map(|m| read_measure_text(&m, &base)).transpose()?,
        };
        let curve1 = flags.curve1.clone().or_else(|| rebase(file.curve1));
        let curve2 = flags.curve2.clone().or_else(|| rebase(file.curve2));
        let input = match (mu, nu, curve1, curve2) {
            (Some(mu), Some(nu), None, None) => Input::Measures { mu, nu },
            (None, None, Some(curve1), Some(curve2)) => Input::Curves {
                curve1,
                curve2,
                disc1: flags.disc1.or(file.disc1).unwrap_or(1.0),
                disc2: flags.disc2.or(file.disc2).unwrap_or(1.0),
            },
            _ => {
                return Err(CliError::Input(
                    "give exactly one input source: --mu with --nu, or --curve1 with --curve2".into(),
                ))
            }
        };
        let k1 = text(&flags.k1, file.k1)?.map(|s| parse_strike(&s)).transpose()?;
        let k2 = text(&flags.k2, file.k2)?.map(|s| parse_strike(&s)).transpose()?;
        let grid = text(&flags.grid, file.grid)?.map(|s| parse_grid(&s)).transpose()?;
        let tol = flags.tol.or(file.tol).unwrap_or(DEFAULT_TOL);
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliError::Input(format!("tolerance must be positive, got {tol}")));
        }
        let points = flags.points.or(file.points).unwrap_or(DEFAULT_GRID);
        if points < 2 {
            return Err(CliError::Input("--points must be at least 2".into()));
        }
        Ok(RunConfig {
            input,
            k1,
            k2,
            grid,
            tol,
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            samples: flags.samples.or(file.samples).unwrap_or(DEFAULT_SAMPLES),
            points,
            out: flags.out.clone().or_else(|| rebase(file.out)),
        })
    }

    /// Read both laws, without any smoothing.
    pub fn raw_laws(&self) -> Result<(Measure, Measure), CliError> {
        match &self.input {
            Input::Measures { mu, nu } => Ok((measure_from_json(mu, self.points)?, measure_from_json(nu, self.points)?)),
            Input::Curves { curve1, curve2, disc1, disc2 } => {
                let read = |p: &PathBuf, label: &str, d: f64| -> Result<PutCurve, CliError> {
                    let text = std::fs::read_to_string(p)
                        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", p.display())))?;
                    Ok(PutCurve::from_csv_str(label, &text, d)?)
                };
                let c1 = read(curve1, "curve1", *disc1)?;
                let c2 = read(curve2, "curve2", *disc2)?;
                Ok(measures_from_put_curves(&c1, &c2)?)
            }
        }
    }

    /// Read both laws. An atomic `μ` on a fine grid that passes the atom cap
    /// is smoothed, together with `ν`, by the same uniform kernel (which keeps
    /// convex order); coarse atomic `μ` stays discrete.
    pub fn laws(&self) -> Result<Laws, CliError> {
        let (mu, nu) = self.raw_laws()?;
        if mu.max_atom().is_none() {
            return Ok(Laws { mu, nu, smoothed: None, discrete: false });
        }
        let fine = mu.kind() == MeasureKind::AtomicGrid && mu.len() >= 50 && passes_atom_cap(&mu);
        if fine && nu.kind() == MeasureKind::AtomicGrid {
            let (a, b) = mu.support().expect("atoms present");
            let h = (b - a) / (mu.len() - 1) as f64;
            return Ok(Laws { mu: mu.smoothed(h)?, nu: nu.smoothed(h)?, smoothed: Some(h), discrete: false });
        }
        Ok(Laws { mu, nu, smoothed: None, discrete: true })
    }

    pub fn strikes(&self) -> Result<(f64, f64), CliError> {
        match (self.k1, self.k2) {
            (Some(Strike::At(k1)), Some(Strike::At(k2))) => Ok((k1, k2)),
            _ => Err(CliError::Input("this command needs single strikes --k1 and --k2".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strikes_and_grids_parse() {
        assert_eq!(parse_strike("-0.5").unwrap(), Strike::At(-0.5));
        assert_eq!(parse_strike("-1:2").unwrap(), Strike::Range(-1.0, 2.0));
        assert!(parse_strike("2:1").is_err());
        assert!(parse_strike("abc").is_err());
        assert_eq!(parse_grid("50").unwrap(), (50, 50));
        assert_eq!(parse_grid("100x200").unwrap(), (100, 200));
        assert!(parse_grid("0").is_err());
    }

    #[test]
    fn flags_override_the_file() {
        let dir = std::env::temp_dir().join(format!("robust-amput-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        std::fs::write(&path, "mu = { uniform = [-1, 1] }\nnu = '{\"uniform\":[-2,2]}'\nk1 = 0.5\nk2 = 0.25\nseed = 7\n")
            .unwrap();
        let flags = Flags { config: Some(path), k2: Some("0.1".into()), ..Flags::default() };
        let cfg = RunConfig::resolve(&flags).unwrap();
        assert_eq!(cfg.strikes().unwrap(), (0.5, 0.1));
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.samples, DEFAULT_SAMPLES);
        let laws = cfg.laws().unwrap();
        assert!(!laws.discrete && laws.smoothed.is_none());
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn exactly_one_source() {
        let flags = Flags { mu: Some("{\"uniform\":[-1,1]}".into()), ..Flags::default() };
        assert!(matches!(RunConfig::resolve(&flags), Err(CliError::Input(_))));
    }
}
