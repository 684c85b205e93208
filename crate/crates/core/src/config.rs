//! TOML run configuration.
//!
//! ```toml
//! master_seed = 12648430            # integer, or a "0x.."/decimal string for seeds above 2^63 - 1
//! detectors = ["mrc", "stat", "elrt", "m-wcnde", "p-wcnde", "d-wcnde", "c-wcnde"]
//! power_grid_dbm = [-20, -10, 0]
//! np_grid = [6, 20, 100]            # optional; overrides frame.np
//! min_errors = 100                  # optional
//! max_data_symbols = 10000000       # optional
//! kernel_c = 2.5e12                 # optional; default 1 / (N0 B)
//!
//! [frame]                           # optional
//! np = 40
//! nd = 1000
//!
//! [noise]                           # optional
//! n0_dbm_per_hz = -174
//! bandwidth_hz = 1e8
//!
//! [[nodes]]                         # one table per receiving node
//! model = "d7"                      # a tabulated body-channel model...
//! [[nodes]]
//! family = "weibull"                # ...or explicit parameters
//! params = [1.76e-6, 3.88]
//!
//! [scatter]                         # `scatter` subcommand
//! power_dbm = 40
//! n_symbols = 10000
//!
//! [lemma1]                          # `lemma1` subcommand; uses the single node
//! power_dbm = 0
//! np_grid = [100, 1000, 10000]
//! kernel_c_scale = [0.01, 1, 10]    # multiples of 1 / (N0 B)
//! seeds = 20
//! y = [3.6e-5, 0.0]                 # optional; default sqrt(P E[|h|^2]) + 0j
//! ```
//!
//! Constraint violations are reported with the line of the offending value.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::channel::{body_channel_model, dbm_to_watts, ComplexSample, Family, GainDistribution, GainModelSpec, NoiseSpec};
use crate::detectors::DetectorId;
use crate::error::{Error, Result};
use crate::frames::FrameConfig;
use crate::harness::{
    SweepConfig, DEFAULT_MASTER_SEED, DEFAULT_MAX_DATA_SYMBOLS, DEFAULT_MIN_ERRORS, DEFAULT_ND, DEFAULT_NP,
};
use crate::oracle::StatCsiDetector;

/// Fully resolved configuration, echoed into run manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(serialize_with = "ser_seed")]
    pub master_seed: u64,
    pub detectors: Vec<DetectorId>,
    pub power_grid_dbm: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub np_grid: Option<Vec<usize>>,
    pub min_errors: u64,
    pub max_data_symbols: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_c: Option<f64>,
    pub frame: FrameSection,
    pub noise: NoiseSpec,
    pub nodes: Vec<GainDistribution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scatter: Option<ScatterSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma1: Option<Lemma1Section>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSection {
    pub np: usize,
    pub nd: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterSection {
    pub power_dbm: f64,
    pub n_symbols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Section {
    pub power_dbm: f64,
    pub np_grid: Vec<usize>,
    pub kernel_c_scale: Vec<f64>,
    pub seeds: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<[f64; 2]>,
}

fn ser_seed<S: serde::Serializer>(seed: &u64, s: S) -> std::result::Result<S::Ok, S::Error> {
    match i64::try_from(*seed) {
        Ok(v) => s.serialize_i64(v),
        Err(_) => s.serialize_str(&format!("{seed:#x}")),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SeedValue {
    Int(i64),
    Text(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    master_seed: Option<Spanned<SeedValue>>,
    #[serde(default)]
    detectors: Vec<DetectorId>,
    power_grid_dbm: Option<Spanned<Vec<f64>>>,
    np_grid: Option<Spanned<Vec<Spanned<i64>>>>,
    min_errors: Option<Spanned<i64>>,
    max_data_symbols: Option<Spanned<i64>>,
    kernel_c: Option<Spanned<f64>>,
    frame: Option<RawFrame>,
    noise: Option<NoiseSpec>,
    nodes: Option<Spanned<Vec<Spanned<RawNode>>>>,
    scatter: Option<Spanned<RawScatter>>,
    lemma1: Option<Spanned<RawLemma1>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    np: Option<Spanned<i64>>,
    nd: Option<Spanned<i64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    model: Option<String>,
    family: Option<Family>,
    params: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScatter {
    power_dbm: f64,
    n_symbols: Spanned<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLemma1 {
    power_dbm: Option<f64>,
    np_grid: Spanned<Vec<Spanned<i64>>>,
    kernel_c_scale: Spanned<Vec<f64>>,
    seeds: Option<Spanned<i64>>,
    y: Option<[f64; 2]>,
}

/// Builds line-anchored messages against the source text.
struct Anchor<'a> {
    src: &'a str,
}

impl Anchor<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        self.src[..span.start.min(self.src.len())].matches('\n').count() + 1
    }

    fn err(&self, span: Range<usize>, msg: impl std::fmt::Display) -> Error {
        Error::Config(format!("line {}: {msg}", self.line(span)))
    }

    fn pilot_length(&self, v: &Spanned<i64>, key: &str) -> Result<usize> {
        let np = *v.get_ref();
        if np < 2 || np % 2 != 0 {
            return Err(self.err(
                v.span(),
                format!("{key} = {np}: the pilot length must be even (np/2 ones followed by np/2 zeros) and >= 2"),
            ));
        }
        Ok(np as usize)
    }

    fn positive(&self, v: &Spanned<i64>, key: &str) -> Result<u64> {
        if *v.get_ref() < 1 {
            return Err(self.err(v.span(), format!("{key} must be >= 1, got {}", *v.get_ref())));
        }
        Ok(*v.get_ref() as u64)
    }
}

fn parse_seed(v: &Spanned<SeedValue>, a: &Anchor) -> Result<u64> {
    match v.get_ref() {
        SeedValue::Int(i) => u64::try_from(*i).map_err(|_| a.err(v.span(), format!("master_seed must be >= 0, got {i}"))),
        SeedValue::Text(s) => {
            let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
                Some(hex) => u64::from_str_radix(hex, 16),
                None => s.parse(),
            };
            parsed.map_err(|_| a.err(v.span(), format!("master_seed {s:?} is not a u64")))
        }
    }
}

impl RunConfig {
    /// Parses and validates a configuration file's contents.
    pub fn from_toml(src: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(src).map_err(|e| Error::Config(e.to_string().trim_end().to_owned()))?;
        let a = Anchor { src };

        let master_seed = raw.master_seed.as_ref().map(|s| parse_seed(s, &a)).transpose()?.unwrap_or(DEFAULT_MASTER_SEED);

        let (np, nd) = match &raw.frame {
            Some(f) => (
                f.np.as_ref().map(|v| a.pilot_length(v, "frame.np")).transpose()?.unwrap_or(DEFAULT_NP),
                f.nd.as_ref().map(|v| a.positive(v, "frame.nd")).transpose()?.map_or(DEFAULT_ND, |v| v as usize),
            ),
            None => (DEFAULT_NP, DEFAULT_ND),
        };

        let power_grid_dbm = match &raw.power_grid_dbm {
            Some(g) if g.get_ref().is_empty() => return Err(a.err(g.span(), "power_grid_dbm must not be empty")),
            Some(g) => {
                if let Some(p) = g.get_ref().iter().find(|p| !p.is_finite()) {
                    return Err(a.err(g.span(), format!("power_grid_dbm entries must be finite, got {p}")));
                }
                g.get_ref().clone()
            }
            None => Vec::new(),
        };

        let np_grid = match &raw.np_grid {
            Some(g) if g.get_ref().is_empty() => return Err(a.err(g.span(), "np_grid must not be empty when given")),
            Some(g) => Some(
                g.get_ref()
                    .iter()
                    .map(|v| a.pilot_length(v, "np_grid entry"))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };

        let min_errors = raw.min_errors.as_ref().map(|v| a.positive(v, "min_errors")).transpose()?.unwrap_or(DEFAULT_MIN_ERRORS);
        let max_data_symbols = match &raw.max_data_symbols {
            Some(v) => {
                let m = a.positive(v, "max_data_symbols")?;
                if m < nd as u64 {
                    return Err(a.err(v.span(), format!("max_data_symbols = {m} is less than one frame (nd = {nd})")));
                }
                m
            }
            None => DEFAULT_MAX_DATA_SYMBOLS.max(nd as u64),
        };
        let kernel_c = match &raw.kernel_c {
            Some(v) if !(v.get_ref().is_finite() && *v.get_ref() > 0.0) => {
                return Err(a.err(v.span(), format!("kernel_c must be finite and > 0, got {}", v.get_ref())))
            }
            Some(v) => Some(*v.get_ref()),
            None => None,
        };

        if raw.detectors.iter().any(|d| d.is_wcnde()) {
            let short = np_grid.as_deref().unwrap_or(&[np]).iter().any(|&n| n < 4);
            if short {
                let span = raw
                    .np_grid
                    .as_ref()
                    .map(|g| g.span())
                    .or_else(|| raw.frame.as_ref().and_then(|f| f.np.as_ref()).map(|v| v.span()))
                    .unwrap_or(0..0);
                return Err(a.err(span, "reference-value detectors need np >= 4 so the probability clamp [2/np, 1 - 2/np] is non-empty"));
            }
        }

        let nodes = match &raw.nodes {
            Some(list) if list.get_ref().is_empty() => return Err(a.err(list.span(), "nodes must list at least one receiving node")),
            Some(list) => list.get_ref().iter().map(|n| resolve_node(n, &a)).collect::<Result<Vec<_>>>()?,
            None => return Err(Error::Config("missing [[nodes]]: at least one receiving node is required".into())),
        };

        let scatter = match &raw.scatter {
            Some(s) => {
                let n = a.positive(&s.get_ref().n_symbols, "scatter.n_symbols")? as usize;
                if !s.get_ref().power_dbm.is_finite() {
                    return Err(a.err(s.span(), "scatter.power_dbm must be finite"));
                }
                Some(ScatterSection { power_dbm: s.get_ref().power_dbm, n_symbols: n })
            }
            None => None,
        };

        let lemma1 = match &raw.lemma1 {
            Some(l) => Some(resolve_lemma1(l, &a, nodes.len())?),
            None => None,
        };

        let cfg = RunConfig {
            master_seed,
            detectors: raw.detectors,
            power_grid_dbm,
            np_grid,
            min_errors,
            max_data_symbols,
            kernel_c,
            frame: FrameSection { np, nd },
            noise: raw.noise.unwrap_or_default(),
            nodes,
            scatter,
            lemma1,
        };
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&src).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The resolved configuration as TOML. Parsing it back yields `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved config is representable in TOML")
    }

    pub fn frame_config(&self) -> Result<FrameConfig> {
        // power is replaced per grid cell
        FrameConfig::new(self.frame.np, self.frame.nd, 1.0, self.nodes.clone(), self.noise)
    }

    /// Sweep settings; needs `detectors` and `power_grid_dbm`.
    pub fn sweep_config(&self) -> Result<SweepConfig> {
        if self.detectors.is_empty() {
            return Err(Error::Config("missing key `detectors`: list at least one detector id".into()));
        }
        if self.power_grid_dbm.is_empty() {
            return Err(Error::Config("missing key `power_grid_dbm`".into()));
        }
        let cfg = SweepConfig {
            frame: self.frame_config()?,
            power_grid_dbm: self.power_grid_dbm.clone(),
            np_grid: self.np_grid.clone(),
            detectors: self.detectors.clone(),
            min_errors: self.min_errors,
            max_data_symbols: self.max_data_symbols,
            master_seed: self.master_seed,
            kernel_c: self.kernel_c,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Scatter settings; needs a `[scatter]` table and weight-comparing detectors.
    pub fn scatter_config(&self) -> Result<(SweepConfig, ScatterSection)> {
        let s = self
            .scatter
            .ok_or_else(|| Error::Config("missing [scatter] table (power_dbm, n_symbols)".into()))?;
        if self.detectors.is_empty() {
            return Err(Error::Config("missing key `detectors`: list the weight-comparing detectors to export".into()));
        }
        if let Some(d) = self.detectors.iter().find(|d| !d.is_wcnde()) {
            return Err(Error::Config(format!(
                "scatter export needs weight-comparing detectors (m-wcnde, p-wcnde, d-wcnde, c-wcnde), got {d}"
            )));
        }
        let cfg = SweepConfig {
            frame: self.frame_config()?,
            power_grid_dbm: vec![s.power_dbm],
            np_grid: None,
            detectors: self.detectors.clone(),
            min_errors: self.min_errors,
            max_data_symbols: self.max_data_symbols,
            master_seed: self.master_seed,
            kernel_c: self.kernel_c,
        };
        cfg.validate()?;
        Ok((cfg, s))
    }

    /// Kernel-density convergence settings; needs a `[lemma1]` table.
    pub fn lemma1_config(&self) -> Result<crate::harness::Lemma1Config> {
        let l = self
            .lemma1
            .as_ref()
            .ok_or_else(|| Error::Config("missing [lemma1] table".into()))?;
        let p = dbm_to_watts(l.power_dbm);
        let dist = self.nodes[0];
        let detector = StatCsiDetector::new(dist, self.noise, p)?;
        let y = match l.y {
            Some([re, im]) => ComplexSample::new(re, im),
            None => ComplexSample::new((p * dist.mean()?).sqrt(), 0.0),
        };
        let n0b = self.noise.noise_power_watts();
        Ok(crate::harness::Lemma1Config {
            detector,
            y,
            np_grid: l.np_grid.clone(),
            kernel_c_grid: l.kernel_c_scale.iter().map(|s| s / n0b).collect(),
            seeds: l.seeds,
            master_seed: self.master_seed,
        })
    }
}

fn resolve_node(n: &Spanned<RawNode>, a: &Anchor) -> Result<GainDistribution> {
    let raw = n.get_ref();
    match (&raw.model, raw.family, &raw.params) {
        (Some(name), None, None) => body_channel_model(name).ok_or_else(|| {
            a.err(n.span(), format!("unknown channel model {name:?}; tabulated models are d1 to d9"))
        }),
        (None, Some(family), Some(params)) => GainDistribution::try_from(GainModelSpec {
            family,
            params: params.clone(),
        })
        .map_err(|e| a.err(n.span(), e)),
        _ => Err(a.err(
            n.span(),
            "a node needs either `model = \"dN\"` or both `family` and `params`",
        )),
    }
}

fn resolve_lemma1(l: &Spanned<RawLemma1>, a: &Anchor, k_nodes: usize) -> Result<Lemma1Section> {
    let raw = l.get_ref();
    if k_nodes != 1 {
        return Err(a.err(l.span(), format!("[lemma1] uses exactly one node, {k_nodes} configured")));
    }
    let power_dbm = raw.power_dbm.unwrap_or(0.0);
    if !power_dbm.is_finite() {
        return Err(a.err(l.span(), "lemma1.power_dbm must be finite"));
    }
    if raw.np_grid.get_ref().is_empty() {
        return Err(a.err(raw.np_grid.span(), "lemma1.np_grid must not be empty"));
    }
    let np_grid = raw
        .np_grid
        .get_ref()
        .iter()
        .map(|v| a.pilot_length(v, "lemma1.np_grid entry"))
        .collect::<Result<Vec<_>>>()?;
    let scales = raw.kernel_c_scale.get_ref();
    if scales.is_empty() || scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(a.err(raw.kernel_c_scale.span(), "lemma1.kernel_c_scale must be a non-empty list of finite values > 0"));
    }
    let seeds = match &raw.seeds {
        Some(s) if *s.get_ref() < 2 => return Err(a.err(s.span(), format!("lemma1.seeds must be >= 2, got {}", *s.get_ref()))),
        Some(s) => *s.get_ref() as u64,
        None => 20,
    };
    if let Some(y) = raw.y {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(a.err(l.span(), "lemma1.y components must be finite"));
        }
    }
    Ok(Lemma1Section {
        power_dbm,
        np_grid,
        kernel_c_scale: scales.clone(),
        seeds,
        y: raw.y,
    })
}
