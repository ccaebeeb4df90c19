//! Experiment configuration, loaded from JSON and overridden by CLI flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use symtest_core::condsym::ResponseAction;
use symtest_core::{Generator, GroupSpec, KernelDescriptor};

use crate::error::{CliError, Result};

/// Test procedures the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Conditional Monte Carlo test with the unbiased MMD statistic.
    Mmd,
    /// Conditional Monte Carlo test with the Nyström MMD statistic.
    Nmmd,
    /// Cramér–Wold projection test.
    Cw,
    /// Inversion-kernel test comparing representative inversions to Haar draws.
    Inversion,
    /// Bootstrap two-sample MMD between the data and one transformed copy.
    TwoSample,
    Kci,
    Cp,
}

impl Method {
    pub fn is_conditional(self) -> bool {
        matches!(self, Method::Kci | Method::Cp)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Mmd => "mmd",
            Method::Nmmd => "nmmd",
            Method::Cw => "cw",
            Method::Inversion => "inversion",
            Method::TwoSample => "two-sample",
            Method::Kci => "kci",
            Method::Cp => "cp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| CliError::config(format!("unknown method '{s}'")))
    }
}

/// Preprocessing applied to raw dataset rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preprocess {
    /// Columns are used as given.
    #[default]
    None,
    /// Satellite records `lat, lon, radius, field`: Cartesian positions scaled
    /// to unit maximum norm, standardized field, rotated so that `axis` becomes
    /// the third coordinate axis.
    Swarm {
        #[serde(default = "default_axis")]
        axis: [f64; 3],
    },
    /// Jets `pt1, phi1, pt2, phi2` to Cartesian transverse momenta.
    Dijet,
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

/// Where observations come from when no generator is configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    /// Feature columns. With preprocessing these are the raw input columns
    /// in the order the preprocessor expects.
    pub features: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub responses: Vec<String>,
    #[serde(default)]
    pub preprocess: Preprocess,
}

/// Bandwidth grids and training generators for the tuner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    pub h0: String,
    pub h1: String,
    #[serde(default = "default_sims")]
    pub sims: usize,
    /// Largest acceptable rejection rate under the null.
    #[serde(default = "default_cap")]
    pub cap: f64,
    /// Grid for `kernel` (the `X` kernel).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kernel: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kernel_y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kernel_m: Vec<f64>,
}

fn default_sims() -> usize {
    100
}
fn default_cap() -> f64 {
    0.1
}

/// Output encodings of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    /// `csv` for `.csv` paths, JSON otherwise.
    pub fn from_path(p: &Path) -> Self {
        match p.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Json,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub group: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetConfig>,
    pub n: usize,
    /// Replications.
    #[serde(rename = "N", default = "one")]
    pub replications: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(rename = "B", default = "default_b")]
    pub b: usize,
    /// Bootstrap replicates of the power estimator.
    #[serde(rename = "C", default = "default_c")]
    pub c: usize,
    /// Projections for `cw`, landmarks for `nmmd`. Defaults to `⌈√n⌉`.
    #[serde(rename = "J", default)]
    pub j: Option<usize>,
    /// Haar transformations for `cw`.
    #[serde(rename = "L", default = "default_l")]
    pub l: usize,
    /// Sweeps per chain for `cp`.
    #[serde(rename = "S", default = "default_s")]
    pub s: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_kernel")]
    pub kernel: String,
    #[serde(default = "default_kernel")]
    pub kernel_y: String,
    #[serde(default = "default_kernel")]
    pub kernel_m: String,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_response")]
    pub response: ResponseAction,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Share of drawn rows used only for bandwidth selection.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Record per-replication wall time. Reports are then no longer
    /// byte-identical across runs.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune: Option<TuneConfig>,
}

fn one() -> usize {
    1
}
fn default_m() -> usize {
    2
}
fn default_b() -> usize {
    200
}
fn default_c() -> usize {
    100
}
fn default_l() -> usize {
    symtest_core::invariance::CW_DEFAULT_TRANSFORMS
}
fn default_s() -> usize {
    50
}
fn default_alpha() -> f64 {
    0.05
}
fn default_kernel() -> String {
    "rbf(median)".into()
}
fn default_epsilon() -> f64 {
    symtest_core::condsym::KciConfig::DEFAULT_EPSILON
}
fn default_response() -> ResponseAction {
    ResponseAction::Same
}
fn default_train_fraction() -> f64 {
    0.5
}

/// Values given on the command line, applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub n: Option<usize>,
    pub replications: Option<usize>,
    pub b: Option<usize>,
    pub m: Option<usize>,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub group: Option<String>,
    pub kernel: Option<String>,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// A configuration with defaults for everything except the essentials.
    pub fn new(method: Method, group: &str, n: usize, seed: u64) -> Self {
        serde_json::from_value(serde_json::json!({
            "method": method,
            "group": group,
            "n": n,
            "seed": seed,
        }))
        .expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::config(format!("config file {} not found", path.display())),
            _ => CliError::io(path, e),
        })?;
        let mut cfg = Self::from_json(&text)?;
        // Relative dataset paths are relative to the config file.
        if let (Some(d), Some(dir)) = (cfg.dataset.as_mut(), path.parent()) {
            if d.path.is_relative() {
                d.path = dir.join(&d.path);
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        macro_rules! set {
            ($field:ident, $src:ident) => {
                if let Some(v) = o.$src.clone() {
                    self.$field = v;
                }
            };
        }
        set!(n, n);
        set!(replications, replications);
        set!(b, b);
        set!(m, m);
        set!(alpha, alpha);
        set!(seed, seed);
        set!(group, group);
        set!(kernel, kernel);
        if o.threads.is_some() {
            self.threads = o.threads;
        }
        if o.output.is_some() {
            self.output = o.output.clone();
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CliError::config(m));
        if self.replications < 1 {
            return bad("N must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if !(0.0..1.0).contains(&self.train_fraction) {
            return bad("train_fraction must lie in [0, 1)");
        }
        if self.j == Some(0) {
            return bad("J must be positive");
        }
        if self.threads == Some(0) {
            return bad("threads must be positive");
        }
        match (&self.generator, &self.dataset) {
            (None, None) => return bad("either generator or dataset is required"),
            (Some(_), Some(_)) => return bad("generator and dataset are mutually exclusive"),
            _ => {}
        }
        if let Some(g) = &self.generator {
            let gen = self.parse_generator(g)?;
            if self.method.is_conditional() && !gen.is_conditional() {
                return bad("conditional tests need a generator with responses");
            }
        }
        if let Some(t) = &self.tune {
            self.parse_generator(&t.h0)?;
            self.parse_generator(&t.h1)?;
            if t.sims < 1 {
                return bad("tune.sims must be at least 1");
            }
        }
        for k in [&self.kernel, &self.kernel_y, &self.kernel_m] {
            self.parse_kernel(k)?;
        }
        Ok(())
    }

    pub fn parse_generator(&self, s: &str) -> Result<Generator> {
        s.parse().map_err(|e: symtest_core::Error| CliError::config(e.to_string()))
    }

    pub fn parse_kernel(&self, s: &str) -> Result<KernelDescriptor> {
        s.parse().map_err(|e: symtest_core::Error| CliError::config(e.to_string()))
    }

    /// The group acting on feature vectors of dimension `dim`.
    pub fn group_spec(&self, dim: usize) -> Result<GroupSpec> {
        GroupSpec::parse(&self.group, Some(dim)).map_err(|e| CliError::config(e.to_string()))
    }

    /// Rows reserved for bandwidth selection alongside `n` test rows.
    pub fn training_rows(&self) -> usize {
        let f = self.train_fraction;
        ((self.n as f64) * f / (1.0 - f)).round() as usize
    }

    /// Projection or landmark count, `⌈√n⌉` unless set.
    pub fn projections(&self) -> usize {
        self.j.unwrap_or_else(|| (self.n as f64).sqrt().ceil() as usize)
    }

    pub fn output_format(&self) -> Format {
        self.format
            .or_else(|| self.output.as_deref().map(Format::from_path))
            .unwrap_or(Format::Json)
    }
}
