//! Sweep configuration, read from a single JSON file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use netobliv::metrics::{levels, DbspParams, MetricsError, Q};
use netobliv::protocol::PrefixStrategy;
use num::{BigInt, BigRational, Zero};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Algorithms a sweep can name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgoId {
    Matmul,
    MatmulSpaceEfficient,
    Fft,
    Columnsort,
    #[serde(rename = "stencil_1d")]
    Stencil1d,
    #[serde(rename = "stencil_2d")]
    Stencil2d,
    BroadcastAware,
    BroadcastOblivious,
}

impl AlgoId {
    pub fn name(self) -> &'static str {
        match self {
            AlgoId::Matmul => "matmul",
            AlgoId::MatmulSpaceEfficient => "matmul_space_efficient",
            AlgoId::Fft => "fft",
            AlgoId::Columnsort => "columnsort",
            AlgoId::Stencil1d => "stencil_1d",
            AlgoId::Stencil2d => "stencil_2d",
            AlgoId::BroadcastAware => "broadcast_aware",
            AlgoId::BroadcastOblivious => "broadcast_oblivious",
        }
    }

    /// Number of VPs used on inputs of size `n`.
    pub fn vps(self, n: usize) -> usize {
        match self {
            AlgoId::Stencil2d => n * n,
            _ => n,
        }
    }
}

impl fmt::Display for AlgoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    #[default]
    Standard,
    Novel,
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolKind::Standard => "standard",
            ProtocolKind::Novel => "novel",
        })
    }
}

/// A rational written as a JSON number or a string such as `"3/2"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Rat(pub Q);

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Float(f64),
            Str(String),
        }
        let q = match Raw::deserialize(d)? {
            Raw::Int(i) => Q::from_integer(BigInt::from(i)),
            Raw::Float(x) => BigRational::from_float(x).ok_or_else(|| serde::de::Error::custom("non-finite number"))?,
            Raw::Str(s) => Q::from_str(s.trim()).map_err(|_| serde::de::Error::custom(format!("bad rational {s:?}")))?,
        };
        Ok(Rat(q))
    }
}

/// Named D-BSP parameter families.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Preset {
    /// `g_i = 1`, `l_i = sigma`.
    Flat,
    /// `g_i = r^(log p - 1 - i)`, `l_i = sigma g_i`.
    Geometric(Q),
    /// Explicit vectors; only valid for `p` with `log p` entries.
    Custom { name: String, g: Vec<Q>, l: Vec<Q> },
}

impl Preset {
    pub fn name(&self) -> String {
        match self {
            Preset::Flat => "flat".into(),
            Preset::Geometric(r) => format!("geometric({r})"),
            Preset::Custom { name, .. } => name.clone(),
        }
    }

    pub fn params(&self, p: usize, sigma: &Q) -> Result<DbspParams, MetricsError> {
        match self {
            Preset::Flat => DbspParams::flat(p, sigma.clone()),
            Preset::Geometric(r) => DbspParams::geometric(p, r.clone(), sigma.clone()),
            Preset::Custom { g, l, .. } => DbspParams::new(p, g.clone(), l.clone()),
        }
    }
}

impl<'de> Deserialize<'de> for Preset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Custom {
            name: Option<String>,
            g: Vec<Rat>,
            l: Vec<Rat>,
        }
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            Custom(Custom),
        }
        match Raw::deserialize(d)? {
            Raw::Name(s) => parse_preset(&s).map_err(serde::de::Error::custom),
            Raw::Custom(c) => Ok(Preset::Custom {
                name: c.name.unwrap_or_else(|| "custom".into()),
                g: c.g.into_iter().map(|r| r.0).collect(),
                l: c.l.into_iter().map(|r| r.0).collect(),
            }),
        }
    }
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    let s = s.trim();
    if s == "flat" {
        return Ok(Preset::Flat);
    }
    if let Some(r) = s.strip_prefix("geometric(").and_then(|r| r.strip_suffix(')')) {
        let r = Q::from_str(r.trim()).map_err(|_| format!("bad ratio in {s:?}"))?;
        return Ok(Preset::Geometric(r));
    }
    Err(format!("unknown preset {s:?}"))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapConfig {
    pub p: usize,
    pub sigma1: u64,
    pub sigma2: u64,
    /// Explicit grid; powers of two between the ends when absent.
    pub grid: Option<Vec<Rat>>,
}

/// A stored trace to check instead of, or besides, the algorithm runs.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceFile {
    pub path: PathBuf,
    pub v: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub algorithm: Option<AlgoId>,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub p: Vec<usize>,
    #[serde(default = "zero_grid")]
    pub sigma: Vec<Rat>,
    #[serde(default = "flat_only")]
    pub presets: Vec<Preset>,
    #[serde(default = "yes")]
    pub dummies: bool,
    #[serde(default)]
    pub protocol: ProtocolKind,
    #[serde(default)]
    pub prefix: PrefixStrategy,
    #[serde(default = "three")]
    pub instances: usize,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub gap: Option<GapConfig>,
    pub trace: Option<TraceFile>,
}

fn zero_grid() -> Vec<Rat> {
    vec![Rat(Q::zero())]
}

fn flat_only() -> Vec<Preset> {
    vec![Preset::Flat]
}

fn yes() -> bool {
    true
}

fn three() -> usize {
    3
}

pub const DEFAULT_SEED: u64 = 1;

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let mut cfg: SweepConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        // Relative paths inside the file are taken from its directory.
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(t) = &mut cfg.trace {
            if t.path.is_relative() {
                t.path = base.join(&t.path);
            }
        }
        Ok(cfg)
    }

    /// `NETOBLIV_SEED` wins over the file.
    pub fn seed(&self) -> Result<u64, CliError> {
        match std::env::var("NETOBLIV_SEED") {
            Ok(s) => s.trim().parse().map_err(|_| CliError::Usage(format!("NETOBLIV_SEED={s:?} is not an integer"))),
            Err(_) => Ok(self.seed.unwrap_or(DEFAULT_SEED)),
        }
    }

    /// Checks a config for `run` and `verify`.
    pub fn validate_sweep(&self) -> Result<AlgoId, CliError> {
        let algo = self.algorithm.ok_or_else(|| CliError::Usage("no algorithm given".into()))?;
        if self.n.is_empty() {
            return Err(CliError::Usage("empty n list".into()));
        }
        if self.p.is_empty() {
            return Err(CliError::Usage("empty p list".into()));
        }
        if self.sigma.is_empty() {
            return Err(CliError::Usage("empty sigma grid".into()));
        }
        if self.presets.is_empty() {
            return Err(CliError::Usage("empty preset list".into()));
        }
        if self.instances == 0 {
            return Err(CliError::Usage("instances must be positive".into()));
        }
        if let Some(s) = self.sigma.iter().find(|s| s.0 < Q::zero()) {
            return Err(CliError::Usage(format!("negative sigma {}", s.0)));
        }
        for &p in &self.p {
            if p < 2 || !p.is_power_of_two() {
                return Err(CliError::Usage(format!("p = {p} is not a power of two >= 2")));
            }
            for &n in &self.n {
                let v = algo.vps(n);
                if p > v {
                    return Err(CliError::Usage(format!("p = {p} exceeds v = {v} for n = {n}")));
                }
            }
            for preset in &self.presets {
                if let Preset::Custom { name, g, l } = preset {
                    let len = levels(p);
                    if g.len() != len || l.len() != len {
                        return Err(CliError::Usage(format!("preset {name} needs {len} entries for p = {p}")));
                    }
                }
            }
        }
        Ok(algo)
    }
}
