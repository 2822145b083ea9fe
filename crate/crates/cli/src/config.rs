//! Command line, config files and their merge.
//!
//! Each subcommand has a config record that round-trips through JSON. A
//! `--config` file supplies a full or partial record; flags given on the
//! command line override it. The output directory is resolved as
//! `--out`, then `ETERNAL_OUT`, then the file's `out`, then `eternal-out`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use eternal::pde::InitialData;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const OUT_ENV: &str = "ETERNAL_OUT";
pub const DEFAULT_OUT: &str = "eternal-out";

#[derive(Debug, Parser)]
#[command(
    name = "eternal",
    version,
    about = "Eternal exponential self-similar solutions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Locate the critical exponent α* by shooting and bisection.
    FindAlphaStar(AlphaStarArgs),
    /// Integrate one profile and attach interface or far-field diagnostics.
    Profile(ProfileArgs),
    /// Critical points and a fan of phase-plane trajectories.
    PhasePortrait(PortraitArgs),
    /// Regularized radial PDE runs with barrier and ε checks.
    Simulate(SimulateArgs),
    /// Cross-module property checks with a machine-readable verdict.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Exponents {
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long = "N")]
    pub n: Option<i64>,
}

#[derive(Debug, Args)]
pub struct AlphaStarArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub exps: Exponents,
    /// Relative bracket width.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Origin constant K of the shooting family.
    #[arg(long = "K")]
    pub k: Option<f64>,
    #[arg(long)]
    pub xi_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub exps: Exponents,
    /// Explicit α; otherwise α* is read from --alpha-star-file or computed.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// An alpha_star.json written by find-alpha-star.
    #[arg(long)]
    pub alpha_star_file: Option<PathBuf>,
    #[arg(long)]
    pub xi_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PortraitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub exps: Exponents,
    /// α of the portrait; α* when omitted.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Seed `X,Y`; repeat for several trajectories.
    #[arg(long = "seed", value_parser = parse_pair)]
    pub seeds: Vec<[f64; 2]>,
    #[arg(long)]
    pub eta_max: Option<f64>,
    #[arg(long)]
    pub bound: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub exps: Exponents,
    /// Regularization parameters, e.g. `1,0.5,0.25`.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long = "T")]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long = "R-max")]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub cfl: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Option<Vec<f64>>,
    /// Initial data as JSON, e.g. `{"kind":"bump","params":{"height":1,"radius":1}}`.
    #[arg(long, value_parser = parse_u0)]
    pub u0: Option<InitialData>,
    /// Skip the barrier comparison.
    #[arg(long)]
    pub no_barrier: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub exps: Exponents,
    /// Comma-separated subset of eigenvalues, rescaling, mass-law, residual;
    /// an empty value runs nothing.
    #[arg(long, value_delimiter = ',')]
    pub checks: Option<Vec<String>>,
    /// Tabulated profile (xi,f,w) for the residual check.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// α of the tabulated profile; α* when omitted.
    #[arg(long)]
    pub alpha: Option<f64>,
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected X,Y")?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok([num(a)?, num(b)?])
}

fn parse_u0(s: &str) -> Result<InitialData, String> {
    let d: InitialData = serde_json::from_str(s).map_err(|e| e.to_string())?;
    d.validate().map_err(|e| e.to_string())?;
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaStarConfig {
    pub out: Option<PathBuf>,
    pub m: f64,
    pub p: f64,
    #[serde(rename = "N")]
    pub n: i64,
    pub tol: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub xi_max: Option<f64>,
}

impl Default for AlphaStarConfig {
    fn default() -> Self {
        AlphaStarConfig {
            out: None,
            m: 2.0,
            p: 1.5,
            n: 3,
            tol: 1e-8,
            k: 1.0,
            xi_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub out: Option<PathBuf>,
    pub m: f64,
    pub p: f64,
    #[serde(rename = "N")]
    pub n: i64,
    pub alpha: Option<f64>,
    pub alpha_star_file: Option<PathBuf>,
    pub xi_max: Option<f64>,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            out: None,
            m: 2.0,
            p: 1.5,
            n: 3,
            alpha: None,
            alpha_star_file: None,
            xi_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortraitConfig {
    pub out: Option<PathBuf>,
    pub m: f64,
    pub p: f64,
    #[serde(rename = "N")]
    pub n: i64,
    pub alpha: Option<f64>,
    /// Absolute `(X, Y)` seeds; a default fan scaled by β when empty.
    pub seeds: Vec<[f64; 2]>,
    pub eta_max: f64,
    pub bound: f64,
}

impl Default for PortraitConfig {
    fn default() -> Self {
        PortraitConfig {
            out: None,
            m: 2.0,
            p: 1.5,
            n: 3,
            alpha: None,
            seeds: Vec::new(),
            eta_max: 200.0,
            bound: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub out: Option<PathBuf>,
    pub m: f64,
    pub p: f64,
    #[serde(rename = "N")]
    pub n: i64,
    pub eps: Vec<f64>,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub cells: usize,
    #[serde(rename = "R_max")]
    pub r_max: Option<f64>,
    pub cfl: f64,
    /// Eleven equispaced times in `[0, T]` when absent.
    pub snapshots: Option<Vec<f64>>,
    pub u0: InitialData,
    pub barrier: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            out: None,
            m: 2.0,
            p: 1.5,
            n: 3,
            eps: vec![1.0, 0.5, 0.25],
            t_end: 1.0,
            cells: 512,
            r_max: None,
            cfl: 0.45,
            snapshots: None,
            u0: InitialData::Bump {
                height: 1.0,
                radius: 1.0,
            },
            barrier: true,
        }
    }
}

pub const ALL_CHECKS: [&str; 4] = ["eigenvalues", "rescaling", "mass-law", "residual"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub out: Option<PathBuf>,
    pub m: f64,
    pub p: f64,
    #[serde(rename = "N")]
    pub n: i64,
    pub checks: Vec<String>,
    pub profile: Option<PathBuf>,
    pub alpha: Option<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            out: None,
            m: 2.0,
            p: 1.5,
            n: 3,
            checks: ALL_CHECKS.iter().map(|s| s.to_string()).collect(),
            profile: None,
            alpha: None,
        }
    }
}

/// Reads `path` as a config record, or the defaults without a path.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

pub fn resolve_out(flag: Option<&Path>, file: Option<&Path>) -> PathBuf {
    if let Some(f) = flag {
        return f.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => file.map_or_else(|| PathBuf::from(DEFAULT_OUT), Path::to_path_buf),
    }
}

macro_rules! overlay {
    ($cfg:expr, $args:expr; $($field:ident),*) => {
        $( if let Some(v) = $args.$field.clone() { $cfg.$field = v; } )*
    };
}

macro_rules! overlay_opt {
    ($cfg:expr, $args:expr; $($field:ident),*) => {
        $( if $args.$field.is_some() { $cfg.$field = $args.$field.clone(); } )*
    };
}

fn overlay_exps(m: &mut f64, p: &mut f64, n: &mut i64, e: &Exponents) {
    if let Some(v) = e.m {
        *m = v;
    }
    if let Some(v) = e.p {
        *p = v;
    }
    if let Some(v) = e.n {
        *n = v;
    }
}

impl AlphaStarArgs {
    pub fn merge(&self) -> Result<(AlphaStarConfig, PathBuf), CliError> {
        let mut c: AlphaStarConfig = load(self.common.config.as_deref())?;
        overlay_exps(&mut c.m, &mut c.p, &mut c.n, &self.exps);
        overlay!(c, self; tol, k);
        overlay_opt!(c, self; xi_max);
        let out = resolve_out(self.common.out.as_deref(), c.out.as_deref());
        Ok((c, out))
    }
}

impl ProfileArgs {
    pub fn merge(&self) -> Result<(ProfileConfig, PathBuf), CliError> {
        let mut c: ProfileConfig = load(self.common.config.as_deref())?;
        overlay_exps(&mut c.m, &mut c.p, &mut c.n, &self.exps);
        overlay_opt!(c, self; alpha, alpha_star_file, xi_max);
        let out = resolve_out(self.common.out.as_deref(), c.out.as_deref());
        Ok((c, out))
    }
}

impl PortraitArgs {
    pub fn merge(&self) -> Result<(PortraitConfig, PathBuf), CliError> {
        let mut c: PortraitConfig = load(self.common.config.as_deref())?;
        overlay_exps(&mut c.m, &mut c.p, &mut c.n, &self.exps);
        overlay_opt!(c, self; alpha);
        overlay!(c, self; eta_max, bound);
        if !self.seeds.is_empty() {
            c.seeds = self.seeds.clone();
        }
        let out = resolve_out(self.common.out.as_deref(), c.out.as_deref());
        Ok((c, out))
    }
}

impl SimulateArgs {
    pub fn merge(&self) -> Result<(SimulateConfig, PathBuf), CliError> {
        let mut c: SimulateConfig = load(self.common.config.as_deref())?;
        overlay_exps(&mut c.m, &mut c.p, &mut c.n, &self.exps);
        overlay!(c, self; eps, t_end, cells, cfl, u0);
        overlay_opt!(c, self; r_max, snapshots);
        if self.no_barrier {
            c.barrier = false;
        }
        let out = resolve_out(self.common.out.as_deref(), c.out.as_deref());
        Ok((c, out))
    }
}

impl VerifyArgs {
    pub fn merge(&self) -> Result<(VerifyConfig, PathBuf), CliError> {
        let mut c: VerifyConfig = load(self.common.config.as_deref())?;
        overlay_exps(&mut c.m, &mut c.p, &mut c.n, &self.exps);
        overlay_opt!(c, self; profile, alpha);
        if let Some(list) = &self.checks {
            c.checks = list
                .iter()
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
        }
        let out = resolve_out(self.common.out.as_deref(), c.out.as_deref());
        Ok((c, out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn configs_round_trip() {
        let s = SimulateConfig {
            r_max: Some(7.5),
            snapshots: Some(vec![0.0, 0.5]),
            ..Default::default()
        };
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<SimulateConfig>(&text).unwrap(), s);
        let v = VerifyConfig::default();
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<VerifyConfig>(&text).unwrap(), v);
    }

    #[test]
    fn partial_file_takes_defaults() {
        let c: AlphaStarConfig = serde_json::from_str(r#"{"m": 3, "N": 2}"#).unwrap();
        assert_eq!((c.m, c.p, c.n, c.tol), (3.0, 1.5, 2, 1e-8));
        assert!(serde_json::from_str::<AlphaStarConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn pair_parser() {
        assert_eq!(parse_pair("0.5, -1").unwrap(), [0.5, -1.0]);
        assert!(parse_pair("0.5").is_err());
    }
}
