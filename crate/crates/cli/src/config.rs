//! JSON run configuration shared by `simulate` and `bounds`.
//!
//! Errors carry the dotted field path and, when the source text is known, the
//! line and column of the offending field.

use std::fmt;
use std::path::{Path, PathBuf};

use gt_core::{
    BoundsInput, IterationWindow, Prior, StoppingConfig, Strategy, TestParams, MAX_POPULATION,
};
use gt_sim::{standard_grid, EpisodeConfig, GroundTruth, ParamPair, SweepSpec, TieRule};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorSpec {
    /// Same infection probability for everyone.
    Uniform(f64),
    PerIndividual(Vec<f64>),
}

impl PriorSpec {
    pub fn build(&self, n: usize) -> Result<Prior, String> {
        if n == 0 || n > MAX_POPULATION {
            return Err(format!(
                "population must be in 1..={MAX_POPULATION}, got {n}"
            ));
        }
        match self {
            PriorSpec::Uniform(q) => Prior::uniform(n, *q).map_err(|e| e.to_string()),
            PriorSpec::PerIndividual(q) => {
                if q.len() != n {
                    return Err(format!("expected {n} probabilities, got {}", q.len()));
                }
                Prior::new(q.clone()).map_err(|e| e.to_string())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthSpec {
    #[default]
    SampleFromPrior,
    /// Exactly `k` infected, placed uniformly.
    FixedInfected(usize),
}

impl From<TruthSpec> for GroundTruth {
    fn from(t: TruthSpec) -> Self {
        match t {
            TruthSpec::SampleFromPrior => GroundTruth::SampleFromPrior,
            TruthSpec::FixedInfected(k) => GroundTruth::FixedInfected { k },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPreset {
    /// 5 x 5 over {0.6, 0.7, 0.8, 0.9, 0.99}.
    Standard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Preset(GridPreset),
    Cells(Vec<ParamPair>),
}

fn default_runs() -> usize {
    1000
}

fn default_a() -> f64 {
    gt_core::DEFAULT_A
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub prior: PriorSpec,
    pub true_params: TestParams,
    /// Design parameters; the true ones when absent.
    #[serde(default)]
    pub assumed_params: Option<TestParams>,
    /// Sweep over assumed parameters; a single cell at `assumed_params` when
    /// absent.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    pub delta: f64,
    /// Thresholds for stop-time summaries; `[0.8, 0.7, 0.6]` plus `delta`
    /// when absent.
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
    pub max_tests: usize,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default)]
    pub truth: TruthSpec,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub checkpoints: Option<Vec<usize>>,
    #[serde(default)]
    pub ties: TieRule,
    /// Worker threads for simulation; 0 picks the machine default.
    #[serde(default)]
    pub threads: usize,
    /// Spread of achieved `f` for the bound report.
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default)]
    pub nu_prime: Option<f64>,
    /// A `summary.json` from `simulate` to read `nu` (matched cell) and
    /// `nu_prime` (cell at `assumed_params`) from.
    #[serde(default)]
    pub nu_from_summary: Option<PathBuf>,
    #[serde(default = "default_a")]
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source: Option<String>,
    pub path: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(src) = &self.source {
            write!(f, "{src}:")?;
        }
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{l}:{c}: ")?,
            (Some(l), None) => write!(f, "{l}: ")?,
            _ if self.source.is_some() => write!(f, " ")?,
            _ => {}
        }
        if !self.path.is_empty() && self.path != "." {
            write!(f, "{}: ", self.path)?;
        }
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Object keys of a JSON text with their nesting depth and byte offset.
fn keys(text: &str) -> Vec<(usize, usize, &str)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let (mut depth, mut i) = (0usize, 0usize);
    while i < bytes.len() {
        match bytes[i] {
            b'{' | b'[' => depth += 1,
            b'}' | b']' => depth = depth.saturating_sub(1),
            b'"' => {
                let start = i;
                i += 1;
                while i < bytes.len() && bytes[i] != b'"' {
                    i += if bytes[i] == b'\\' { 2 } else { 1 };
                }
                if text
                    .get(i + 1..)
                    .is_some_and(|r| r.trim_start().starts_with(':'))
                {
                    out.push((depth, start, &text[start + 1..i]));
                }
            }
            _ => {}
        }
        i += 1;
    }
    out
}

/// 1-based line and column of the key at a dotted `path` such as
/// `true_params.s` or `grid[2].sigma` (array elements are not located
/// individually, only their enclosing key).
pub fn locate(text: &str, path: &str) -> Option<(usize, usize)> {
    let all = keys(text);
    let (mut depth, mut from, mut found) = (1usize, 0usize, None);
    for seg in path.split('.').filter(|s| !s.is_empty()) {
        let key = seg.split('[').next().unwrap_or(seg);
        let &(_, pos, _) = all
            .iter()
            .find(|&&(d, p, k)| d == depth && p >= from && k == key)?;
        found = Some(pos);
        from = pos;
        depth += 1 + seg.matches('[').count();
    }
    let pos = found?;
    let line = text[..pos].matches('\n').count() + 1;
    let column = pos - text[..pos].rfind('\n').map_or(0, |p| p + 1) + 1;
    Some((line, column))
}

fn strip_position(msg: String) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg,
    }
}

impl RunConfig {
    /// Parses without semantic validation, so command-line overrides can be
    /// applied before [`RunConfig::validate`].
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ConfigError {
                source: None,
                path,
                line: Some(inner.line()).filter(|&l| l > 0),
                column: Some(inner.column()).filter(|&c| c > 0),
                message: strip_position(inner.to_string()),
            }
        })
    }

    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source: Some(path.display().to_string()),
            path: String::new(),
            line: None,
            column: None,
            message: e.to_string(),
        })?;
        let cfg = Self::parse(&text).map_err(|mut e| {
            e.source = Some(path.display().to_string());
            e
        })?;
        Ok((cfg, text))
    }

    fn check(&self) -> Result<(), (String, String)> {
        let err = |p: &str, m: String| Err((p.to_string(), m));
        if self.n == 0 || self.n > MAX_POPULATION {
            return err(
                "n",
                format!("must be in 1..={MAX_POPULATION}, got {}", self.n),
            );
        }
        self.prior
            .build(self.n)
            .map_err(|m| ("prior".to_string(), m))?;
        if !(0.0..=1.0).contains(&self.delta) {
            return err("delta", format!("must be in [0, 1], got {}", self.delta));
        }
        if self.max_tests == 0 {
            return err("max_tests", "must be at least 1".into());
        }
        if self.runs == 0 {
            return err("runs", "must be at least 1".into());
        }
        if let TruthSpec::FixedInfected(k) = self.truth {
            if k > self.n {
                return err(
                    "truth.fixed_infected",
                    format!("{k} infected exceeds population {}", self.n),
                );
            }
        }
        if let Some(GridSpec::Cells(cells)) = &self.grid {
            if cells.is_empty() {
                return err("grid", "must not be empty".into());
            }
            for (i, c) in cells.iter().enumerate() {
                c.params()
                    .map_err(|e| (format!("grid[{i}]"), e.to_string()))?;
            }
        }
        if let Some(ds) = &self.deltas {
            if let Some(d) = ds.iter().find(|d| !(0.0..=1.0).contains(*d)) {
                return err("deltas", format!("{d} outside [0, 1]"));
            }
        }
        if let Some(cs) = &self.checkpoints {
            if let Some(c) = cs.iter().find(|&&c| c == 0 || c > self.max_tests) {
                return err("checkpoints", format!("{c} outside 1..={}", self.max_tests));
            }
        }
        for (name, v) in [("nu", self.nu), ("nu_prime", self.nu_prime)] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return err(name, format!("must be a non-negative number, got {v}"));
                }
            }
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return err("a", format!("must be positive, got {}", self.a));
        }
        Ok(())
    }

    /// Semantic checks; `text` is the source the config was parsed from and
    /// is used to attach line numbers.
    pub fn validate(&self, text: Option<&str>) -> Result<(), ConfigError> {
        self.check().map_err(|(path, message)| {
            let pos = text.and_then(|t| locate(t, &path));
            ConfigError {
                source: None,
                path,
                line: pos.map(|p| p.0),
                column: pos.map(|p| p.1),
                message,
            }
        })
    }

    pub fn prior_model(&self) -> Prior {
        self.prior.build(self.n).expect("validated config")
    }

    pub fn design_params(&self) -> TestParams {
        self.assumed_params.unwrap_or(self.true_params)
    }

    pub fn grid_cells(&self) -> Vec<ParamPair> {
        match &self.grid {
            Some(GridSpec::Preset(GridPreset::Standard)) => standard_grid(),
            Some(GridSpec::Cells(c)) => c.clone(),
            None => {
                let p = self.design_params();
                vec![ParamPair {
                    sigma: p.specificity(),
                    s: p.sensitivity(),
                }]
            }
        }
    }

    pub fn summary_deltas(&self) -> Vec<f64> {
        let mut ds = self.deltas.clone().unwrap_or_else(|| vec![0.8, 0.7, 0.6]);
        if !ds.contains(&self.delta) {
            ds.push(self.delta);
        }
        ds
    }

    pub fn sweep_spec(&self) -> anyhow::Result<SweepSpec> {
        let prior = self.prior_model();
        let base = EpisodeConfig {
            stopping: StoppingConfig::new(self.delta, prior.entropy(), self.max_tests)?,
            prior,
            true_params: self.true_params,
            assumed_params: self.design_params(),
            strategy: self.strategy,
            truth: self.truth.into(),
            ties: self.ties,
            seed: self.seed,
        };
        let mut spec = SweepSpec::new(base, self.grid_cells(), self.runs);
        spec.deltas = self.summary_deltas();
        if let Some(cs) = &self.checkpoints {
            spec.checkpoints = cs.clone();
        } else {
            spec.checkpoints.retain(|&c| c <= self.max_tests);
        }
        spec.a = self.a;
        spec.threads = self.threads;
        spec.matched_window = clamp_window(IterationWindow::MATCHED, self.max_tests);
        spec.mismatched_window = clamp_window(IterationWindow::MISMATCHED, self.max_tests);
        Ok(spec)
    }

    pub fn bounds_input(&self, nu: f64, nu_prime: Option<f64>) -> BoundsInput<f64> {
        BoundsInput {
            prior_entropy: self.prior_model().entropy(),
            delta: self.delta,
            true_params: self.true_params,
            assumed_params: self.assumed_params,
            nu,
            nu_prime,
            a: self.a,
            horizon: self.max_tests,
        }
    }
}

fn clamp_window(w: IterationWindow, horizon: usize) -> IterationWindow {
    let last = w.last.min(horizon);
    IterationWindow::new(w.first.min(last), last).unwrap_or(w)
}
