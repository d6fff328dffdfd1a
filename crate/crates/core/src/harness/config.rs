//! Experiment configuration.
//!
//! Configuration files hold one `key = value` per line; `#` starts a comment.
//! Lists are comma separated and `ebn0_db` also accepts `start:step:stop`.
//! Settings are applied in order (preset, then file, then command line), so
//! later values override earlier ones.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::analysis::PepMode;
use crate::channel::Spreading;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    StaticTrained,
    StaticBlind,
    DynamicTrained,
    DynamicBlind,
}

impl Scenario {
    pub fn is_dynamic(self) -> bool {
        matches!(self, Scenario::DynamicTrained | Scenario::DynamicBlind)
    }

    pub fn is_trained(self) -> bool {
        matches!(self, Scenario::StaticTrained | Scenario::DynamicTrained)
    }

    /// Data symbols per user per slot carried by the state space.
    pub fn symbols(self) -> usize {
        usize::from(!self.is_trained())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static_trained" => Ok(Scenario::StaticTrained),
            "static_blind" => Ok(Scenario::StaticBlind),
            "dynamic_trained" => Ok(Scenario::DynamicTrained),
            "dynamic_blind" => Ok(Scenario::DynamicBlind),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    ClassicMl,
    JointMl,
    MapStatic,
    BayesCausal,
    Viterbi,
    ViterbiWindow,
}

impl DetectorKind {
    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::ClassicMl => "classic_ml",
            DetectorKind::JointMl => "joint_ml",
            DetectorKind::MapStatic => "map_static",
            DetectorKind::BayesCausal => "bayes_causal",
            DetectorKind::Viterbi => "viterbi",
            DetectorKind::ViterbiWindow => "viterbi_window",
        }
    }

    pub fn needs_dynamics(self) -> bool {
        matches!(
            self,
            DetectorKind::BayesCausal | DetectorKind::Viterbi | DetectorKind::ViterbiWindow
        )
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "classic_ml" => DetectorKind::ClassicMl,
            "joint_ml" => DetectorKind::JointMl,
            "map_static" => DetectorKind::MapStatic,
            "bayes_causal" => DetectorKind::BayesCausal,
            "viterbi" => DetectorKind::Viterbi,
            "viterbi_window" => DetectorKind::ViterbiWindow,
            other => return Err(Error::Config(format!("unknown detector `{other}`"))),
        })
    }
}

/// Error metrics; slot-indexed ones are reported at every `report_slots` entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Ber,
    Sep,
    Ssep,
    Bsep,
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ber" => Ok(MetricKind::Ber),
            "sep" => Ok(MetricKind::Sep),
            "ssep" => Ok(MetricKind::Ssep),
            "bsep" => Ok(MetricKind::Bsep),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Full union bound on the set-error probability (static).
    Union,
    /// Union bound restricted to pairs within distance `restrict_n` (static).
    Restricted,
    /// Sampled restricted bound on the set-sequence error probability (dynamic).
    Semianalytic,
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "union" => Ok(BoundKind::Union),
            "restricted" => Ok(BoundKind::Restricted),
            "semianalytic" => Ok(BoundKind::Semianalytic),
            other => Err(Error::Config(format!("unknown bound `{other}`"))),
        }
    }
}

fn pep_mode_name(mode: &PepMode) -> &'static str {
    match mode {
        PepMode::Ml => "ml",
        PepMode::MapIdentities => "map_identities",
        PepMode::MapWithData => "map_with_data",
    }
}

fn serialize_mode<S: serde::Serializer>(mode: &PepMode, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(pep_mode_name(mode))
}

/// Fully resolved experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    /// Prefix of every metric label (may be empty).
    pub label: String,
    pub scenario: Scenario,
    pub users: usize,
    pub alpha: f64,
    /// Persistence probability; static scenarios ignore it.
    pub mu: f64,
    pub spreading: Spreading,
    pub length: usize,
    /// Family members used, reference user first; defaults to `0..K′`.
    pub signature_indices: Option<Vec<usize>>,
    pub reference_user: bool,
    pub detectors: Vec<DetectorKind>,
    pub window_delta: usize,
    pub frame_length: usize,
    pub trials: usize,
    pub batch: usize,
    pub ebn0_db: Vec<f64>,
    pub seed: u64,
    pub metrics: Vec<MetricKind>,
    /// 1-based slots at which SEP and BSEP are reported.
    pub report_slots: Vec<usize>,
    pub min_errors: Option<u64>,
    pub bounds: Vec<BoundKind>,
    #[serde(serialize_with = "serialize_mode")]
    pub bound_mode: PepMode,
    pub bound_samples: usize,
    pub restrict_n: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            label: String::new(),
            scenario: Scenario::StaticBlind,
            users: 2,
            alpha: 0.5,
            mu: 0.5,
            spreading: Spreading::MSequence,
            length: 7,
            signature_indices: None,
            reference_user: false,
            detectors: vec![DetectorKind::JointMl],
            window_delta: 2,
            frame_length: 1,
            trials: 100_000,
            batch: 10_000,
            ebn0_db: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
            seed: 1,
            metrics: vec![MetricKind::Sep],
            report_slots: Vec::new(),
            min_errors: None,
            bounds: Vec::new(),
            bound_mode: PepMode::MapWithData,
            bound_samples: 1000,
            restrict_n: 1,
        }
    }
}

fn list<T: FromStr<Err = Error>>(value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(T::from_str)
        .collect()
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn numbers<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|v| number(key, v))
        .collect()
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected a boolean, got `{value}`"))),
    }
}

/// Parses a sweep given as a list or as `start:step:stop` (inclusive).
pub fn parse_sweep(value: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [start, step, stop] => {
            let (a, h, b): (f64, f64, f64) = (
                number("ebn0_db", start)?,
                number("ebn0_db", step)?,
                number("ebn0_db", stop)?,
            );
            if h <= 0.0 || b < a {
                return Err(Error::Config(format!("bad sweep `{value}`")));
            }
            let n = ((b - a) / h + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| a + i as f64 * h).collect())
        }
        [_] => numbers("ebn0_db", value),
        _ => Err(Error::Config(format!("bad sweep `{value}`"))),
    }
}

/// Splits a configuration text into `(key, value)` pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Sets one key.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "label" => self.label = value.to_string(),
            "scenario" => self.scenario = value.parse()?,
            "users" => self.users = number(key, value)?,
            "alpha" => self.alpha = number(key, value)?,
            "mu" => self.mu = number(key, value)?,
            "symbols_per_slot" => {
                let n: usize = number(key, value)?;
                if n != self.scenario.symbols() {
                    return Err(Error::Config(format!(
                        "symbols_per_slot = {n} does not match the scenario (expected {})",
                        self.scenario.symbols()
                    )));
                }
            }
            "spreading" => self.spreading = value.parse()?,
            "length" => self.length = number(key, value)?,
            "signature_indices" => self.signature_indices = Some(numbers(key, value)?),
            "reference_user" => self.reference_user = flag(key, value)?,
            "detector" | "detectors" => self.detectors = list(value)?,
            "window_delta" => self.window_delta = number(key, value)?,
            "frame_length" => self.frame_length = number(key, value)?,
            "trials" => self.trials = number(key, value)?,
            "batch" => self.batch = number(key, value)?,
            "ebn0_db" => self.ebn0_db = parse_sweep(value)?,
            "seed" => self.seed = number(key, value)?,
            "metrics" => self.metrics = list(value)?,
            "report_slots" => self.report_slots = numbers(key, value)?,
            "min_errors" => {
                self.min_errors = match value {
                    "" | "none" | "off" => None,
                    v => Some(number(key, v)?),
                }
            }
            "bounds" => self.bounds = list(value)?,
            "bound_mode" => self.bound_mode = value.parse()?,
            "bound_samples" => self.bound_samples = number(key, value)?,
            "restrict_n" => self.restrict_n = number(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn apply_pairs(&mut self, pairs: &[(String, String)]) -> Result<()> {
        pairs.iter().try_for_each(|(k, v)| self.apply(k, v))
    }

    /// Number of signatures, reference user included.
    pub fn dimension(&self) -> usize {
        self.users + usize::from(self.reference_user)
    }

    /// Slots at which per-slot metrics are reported (default: first and last).
    pub fn slots(&self) -> Vec<usize> {
        if self.report_slots.is_empty() {
            let mut s = vec![1, self.frame_length];
            s.dedup();
            s
        } else {
            self.report_slots.clone()
        }
    }

    /// Rejects inconsistent settings before any simulation.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 || self.batch == 0 {
            return bad("trials and batch must be at least 1".into());
        }
        if self.ebn0_db.is_empty() {
            return bad("the Eb/N0 sweep is empty".into());
        }
        if self.frame_length == 0 {
            return bad("frame_length must be at least 1".into());
        }
        if self.dimension() == 0 {
            return bad("no users at all".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.mu) {
            return bad("alpha and mu must lie in [0, 1]".into());
        }
        if self.detectors.is_empty() && self.bounds.is_empty() {
            return bad("nothing to compute: no detector and no bound".into());
        }
        for d in &self.detectors {
            if d.needs_dynamics() && !self.scenario.is_dynamic() {
                return bad(format!("detector {d} needs a dynamic scenario"));
            }
        }
        if self.metrics.contains(&MetricKind::Ber) && !self.reference_user {
            return bad("BER is measured on the reference user; set reference_user = true".into());
        }
        if let Some(s) = self.report_slots.iter().find(|&&s| s == 0 || s > self.frame_length) {
            return bad(format!("report slot {s} outside 1..={}", self.frame_length));
        }
        for b in &self.bounds {
            match b {
                BoundKind::Union | BoundKind::Restricted if self.scenario.is_dynamic() => {
                    return bad("union bounds are for static scenarios".into())
                }
                BoundKind::Semianalytic if !self.scenario.is_dynamic() => {
                    return bad("the semi-analytic bound is for dynamic scenarios".into())
                }
                _ => {}
            }
        }
        if let Some(idx) = &self.signature_indices {
            if idx.len() != self.dimension() {
                return bad(format!(
                    "{} signature indices for {} users",
                    idx.len(),
                    self.dimension()
                ));
            }
        }
        Ok(())
    }
}
