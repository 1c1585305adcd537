//! Simulation parameters and their `key = value` file format.
//!
//! ```text
//! # comments start with '#'
//! n = 4
//! f = 1                      # optional, defaults to (n-1)/3
//! seed = 7
//! delay = uniform:1,3        # constant:d | uniform:lo,hi | exponential:mean
//! crashes = 3@120.5,2@400    # node@time, comma separated; empty for none
//! load = 200                 # transactions per time unit, whole system
//! batch_interval = 1
//! conflict_fraction = 0.05
//! max_rounds = 200
//! max_time = 100000
//! mode = off                 # off | blocking | nonblocking | hybrid:<threshold>
//! fast_quorum = beyond-quorum   # at-least-quorum | beyond-quorum
//! max_vector = 16
//! coin_reveal = wave         # wave | immediate
//! genesis_utxos = 100000
//! ```

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::board::FastQuorum;
use crate::clerk::CoinReveal;
use crate::dag::{NodeId, Round};
use crate::hash::Digest;
use crate::hyperblock::Mode;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum DelayModel {
    Constant(f64),
    Uniform { lo: f64, hi: f64 },
    Exponential { mean: f64 },
}

impl fmt::Display for DelayModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DelayModel::Constant(d) => write!(f, "constant:{d}"),
            DelayModel::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            DelayModel::Exponential { mean } => write!(f, "exponential:{mean}"),
        }
    }
}

impl DelayModel {
    fn parse(s: &str) -> Option<Self> {
        let (kind, args) = s.split_once(':')?;
        let nums: Vec<f64> = args.split(',').map(|x| x.trim().parse().ok()).collect::<Option<_>>()?;
        match (kind.trim(), nums.as_slice()) {
            ("constant", [d]) => Some(DelayModel::Constant(*d)),
            ("uniform", [lo, hi]) => Some(DelayModel::Uniform { lo: *lo, hi: *hi }),
            ("exponential", [m]) => Some(DelayModel::Exponential { mean: *m }),
            _ => None,
        }
    }

    fn valid(&self) -> bool {
        match *self {
            DelayModel::Constant(d) => d > 0.0 && d.is_finite(),
            DelayModel::Uniform { lo, hi } => lo > 0.0 && hi >= lo && hi.is_finite(),
            DelayModel::Exponential { mean } => mean > 0.0 && mean.is_finite(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    pub n: u32,
    pub f: u32,
    pub seed: u64,
    pub delay: DelayModel,
    pub crashes: Vec<(NodeId, f64)>,
    pub load: f64,
    pub batch_interval: f64,
    pub conflict_fraction: f64,
    pub max_rounds: Round,
    pub max_time: f64,
    pub mode: Mode,
    pub fast_quorum: FastQuorum,
    pub max_vector: usize,
    pub coin_reveal: CoinReveal,
    pub genesis_utxos: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 4,
            f: 1,
            seed: 0,
            delay: DelayModel::Uniform { lo: 1.0, hi: 3.0 },
            crashes: Vec::new(),
            load: 40.0,
            batch_interval: 1.0,
            conflict_fraction: 0.0,
            max_rounds: 200,
            max_time: 1.0e6,
            mode: Mode::Off,
            fast_quorum: FastQuorum::BeyondQuorum,
            max_vector: 16,
            coin_reveal: CoinReveal::Wave,
            genesis_utxos: 1_000_000,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`")]
    BadValue { line: usize, key: String },
    #[error("n = {n} cannot tolerate f = {f}: need n >= 3f+1")]
    TooFewNodes { n: u32, f: u32 },
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

impl SimConfig {
    /// Committee of `n` with the default `f = (n-1)/3`.
    pub fn with_n(n: u32) -> Self {
        Self { n, f: (n.max(1) - 1) / 3, ..Self::default() }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = SimConfig::default();
        let mut f_given = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || ConfigError::BadValue { line, key: key.to_string() };
            match key {
                "n" => cfg.n = value.parse().map_err(|_| bad())?,
                "f" => {
                    cfg.f = value.parse().map_err(|_| bad())?;
                    f_given = true;
                }
                "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
                "delay" => cfg.delay = DelayModel::parse(value).ok_or_else(bad)?,
                "crashes" => cfg.crashes = parse_crashes(value).ok_or_else(bad)?,
                "load" => cfg.load = value.parse().map_err(|_| bad())?,
                "batch_interval" => cfg.batch_interval = value.parse().map_err(|_| bad())?,
                "conflict_fraction" => cfg.conflict_fraction = value.parse().map_err(|_| bad())?,
                "max_rounds" => cfg.max_rounds = value.parse().map_err(|_| bad())?,
                "max_time" => cfg.max_time = value.parse().map_err(|_| bad())?,
                "mode" => cfg.mode = Mode::parse(value).ok_or_else(bad)?,
                "fast_quorum" => cfg.fast_quorum = FastQuorum::parse(value).ok_or_else(bad)?,
                "max_vector" => cfg.max_vector = value.parse().map_err(|_| bad())?,
                "coin_reveal" => cfg.coin_reveal = CoinReveal::parse(value).ok_or_else(bad)?,
                "genesis_utxos" => cfg.genesis_utxos = value.parse().map_err(|_| bad())?,
                _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
            }
        }
        if !f_given {
            cfg.f = (cfg.n.max(1) - 1) / 3;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 3 * self.f + 1 {
            return Err(ConfigError::TooFewNodes { n: self.n, f: self.f });
        }
        if !(0.0..=1.0).contains(&self.conflict_fraction) {
            return Err(ConfigError::Invalid("conflict_fraction must be in [0, 1]".into()));
        }
        if !self.delay.valid() {
            return Err(ConfigError::Invalid("delay parameters must be positive".into()));
        }
        if !(self.load >= 0.0 && self.load.is_finite()) || !(self.batch_interval > 0.0) {
            return Err(ConfigError::Invalid("load must be >= 0 and batch_interval > 0".into()));
        }
        if !(self.max_time > 0.0) || self.max_vector == 0 {
            return Err(ConfigError::Invalid("max_time and max_vector must be positive".into()));
        }
        if let Some((node, _)) = self.crashes.iter().find(|(node, t)| *node >= self.n || !(*t >= 0.0)) {
            return Err(ConfigError::Invalid(format!("bad crash entry for node {node}")));
        }
        Ok(())
    }

    /// Canonical `key = value` rendering; parsing it yields `self`.
    pub fn render(&self) -> String {
        let crashes: Vec<String> = self.crashes.iter().map(|(n, t)| format!("{n}@{t}")).collect();
        format!(
            "n = {}\nf = {}\nseed = {}\ndelay = {}\ncrashes = {}\nload = {}\nbatch_interval = {}\nconflict_fraction = {}\n\
             max_rounds = {}\nmax_time = {}\nmode = {}\nfast_quorum = {}\nmax_vector = {}\ncoin_reveal = {}\ngenesis_utxos = {}\n",
            self.n,
            self.f,
            self.seed,
            self.delay,
            crashes.join(","),
            self.load,
            self.batch_interval,
            self.conflict_fraction,
            self.max_rounds,
            self.max_time,
            self.mode.name(),
            self.fast_quorum.name(),
            self.max_vector,
            self.coin_reveal.name(),
            self.genesis_utxos,
        )
    }

    /// Digest of the canonical rendering without the seed.
    pub fn hash(&self) -> Digest {
        let unseeded = SimConfig { seed: 0, ..self.clone() };
        Digest::of(unseeded.render().as_bytes())
    }
}

fn parse_crashes(s: &str) -> Option<Vec<(NodeId, f64)>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    s.split(',')
        .map(|item| {
            let (n, t) = item.trim().split_once('@')?;
            Some((n.trim().parse().ok()?, t.trim().parse().ok()?))
        })
        .collect()
}
