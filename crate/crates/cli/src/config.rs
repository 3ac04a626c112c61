use std::fmt;
use std::path::PathBuf;

use bergman_core::constants::TentGrid;
use bergman_core::geometry::MAX_GENERATION;
use bergman_core::{QuadratureSpec, Weight};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    HartogsWindow,
    PowerWeights,
    Generalized,
    SharpExample,
    Constants,
    NormBounds,
    TreeVerify,
    Verify,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::HartogsWindow => "hartogs-window",
            Experiment::PowerWeights => "power-weights",
            Experiment::Generalized => "generalized",
            Experiment::SharpExample => "sharp-example",
            Experiment::Constants => "constants",
            Experiment::NormBounds => "norm-bounds",
            Experiment::TreeVerify => "tree-verify",
            Experiment::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    #[default]
    Quick,
    Full,
}

/// Everything a run depends on. Two equal configs give byte-identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub weight: Option<String>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub p_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub s_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub m: Option<u32>,
    #[serde(default)]
    pub n: Option<u32>,
    #[serde(default, rename = "A")]
    pub a: Option<f64>,
    #[serde(default)]
    pub grid: TentGrid,
    #[serde(default)]
    pub quad: QuadratureSpec,
    #[serde(default = "default_shifts")]
    pub shifts: Vec<f64>,
    #[serde(default = "default_kmax")]
    pub kmax: u32,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    /// Tree dump checked by `tree-verify`.
    #[serde(default)]
    pub dump: Option<PathBuf>,
    #[serde(default)]
    pub level: Level,
    /// Record wall time in the report. Off by default so that reports are
    /// reproducible byte for byte.
    #[serde(default)]
    pub timing: bool,
}

pub fn default_shifts() -> Vec<f64> {
    vec![0.0, 1.0 / 3.0, 2.0 / 3.0]
}

pub fn default_kmax() -> u32 {
    14
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(bergman_core::Error),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<bergman_core::Error> for CliError {
    fn from(e: bergman_core::Error) -> Self {
        match e {
            bergman_core::Error::Config(m) | bergman_core::Error::Parse(m) => CliError::Config(m),
            e => CliError::Core(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    /// 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Number with an optional `a/b` fraction and `+` separated terms, as in `4/3+0.05`.
pub fn parse_number(s: &str) -> Result<f64, CliError> {
    let bad = || CliError::Config(format!("cannot parse number `{s}`"));
    let s = s.trim();
    if s.is_empty() {
        return Err(bad());
    }
    let mut terms = Vec::new();
    let mut start = 0;
    let bytes = s.as_bytes();
    for i in 1..bytes.len() {
        if bytes[i] == b'+' && !matches!(bytes[i - 1], b'e' | b'E') {
            terms.push(&s[start..i]);
            start = i + 1;
        }
    }
    terms.push(&s[start..]);
    let mut total = 0.0;
    for t in terms {
        let t = t.trim();
        let v = match t.split_once('/') {
            Some((a, b)) => {
                let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if b == 0.0 {
                    return Err(bad());
                }
                a / b
            }
            None => t.parse().map_err(|_| bad())?,
        };
        total += v;
    }
    if total.is_finite() {
        Ok(total)
    } else {
        Err(bad())
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',').map(parse_number).collect()
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            weight: None,
            p: None,
            p_grid: None,
            s_grid: None,
            m: None,
            n: None,
            a: None,
            grid: TentGrid::default(),
            quad: QuadratureSpec::default(),
            shifts: default_shifts(),
            kmax: default_kmax(),
            out: None,
            format: Format::Json,
            dump: None,
            level: Level::Quick,
            timing: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn parsed_weight(&self) -> Result<Option<Weight>, CliError> {
        self.weight.as_deref().map(|w| w.parse::<Weight>().map_err(CliError::from)).transpose()
    }

    /// Schema checks that do not need any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |m: String| Err(CliError::Config(m));
        if self.p.is_some() && self.p_grid.is_some() {
            return cfg("give either p or p_grid, not both".into());
        }
        for &p in self.p.iter().chain(self.p_grid.iter().flatten()) {
            if !(p > 1.0 && p.is_finite()) {
                return cfg(format!("exponent p = {p} must exceed 1"));
            }
        }
        if matches!(&self.p_grid, Some(g) if g.is_empty()) {
            return cfg("p_grid is empty".into());
        }
        if let Some(g) = &self.s_grid {
            if g.is_empty() || g.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
                return cfg("s_grid needs values in (0, 1)".into());
            }
        }
        self.quad.validate()?;
        TentGrid::new(self.grid.i_max, self.grid.angles)?;
        if self.kmax == 0 || self.kmax > MAX_GENERATION {
            return cfg(format!("kmax = {} must lie in 1..={MAX_GENERATION}", self.kmax));
        }
        if self.shifts.is_empty() || self.shifts.iter().any(|&l| !(0.0..1.0).contains(&l)) {
            return cfg("shifts must be nonempty and lie in [0, 1)".into());
        }
        if let (Some(m), Some(n)) = (self.m, self.n) {
            if m == 0 || n == 0 || gcd(m, n) != 1 {
                return cfg(format!("(m, n) = ({m}, {n}) must be coprime positive integers"));
            }
        } else if self.m.is_some() != self.n.is_some() {
            return cfg("give m and n together".into());
        }
        let weight = self.parsed_weight()?;
        match self.experiment {
            Experiment::PowerWeights => {
                if !matches!(weight, None | Some(Weight::PowerAB { .. })) {
                    return cfg("power-weights needs a power:a=..,b=.. weight".into());
                }
            }
            Experiment::SharpExample => {
                if let Some(p) = self.p.iter().chain(self.p_grid.iter().flatten()).find(|&&p| p > 2.0) {
                    return cfg(format!("sharp-example needs 1 < p ≤ 2, got {p}"));
                }
                if self.p_grid.as_ref().is_some_and(|g| g.len() > 1) {
                    return cfg("sharp-example takes a single p".into());
                }
            }
            _ => {}
        }
        if let Some(Weight::SharpExample { p, .. }) = weight {
            if self.p_grid.iter().flatten().chain(self.p.iter()).any(|&q| (q - p).abs() > 1e-12) {
                return cfg(format!("the sharp weight is tied to p = {p}"));
            }
        }
        Ok(())
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
