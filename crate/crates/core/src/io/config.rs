use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::bank::BankMode;
use crate::error::{Error, Result};
use crate::gp::{GpConfig, DEFAULT_REFRESH_PERIOD};
use crate::kernel::KernelParams;
use crate::refine::{AggregateSource, RefinementPolicy, DEFAULT_TAU};
use crate::scalar::Scalar;

use super::write_text;

/// How `refine` turns predictions into pseudo-labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyKind {
    /// Softmax of the linear model.
    Identity,
    /// One-hot argmax of the linear model.
    Hard,
    /// Temperature-sharpened linear model.
    Sharpen,
    /// Linear model smoothed with the normalized similarity mass.
    SmoothSimilarity,
    /// Linear model smoothed with the normalized GP posterior mean.
    SmoothGp,
    /// Softmax of the GP logits.
    Gp,
    /// Normalized similarity mass.
    Similarity,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::Identity,
        PolicyKind::Hard,
        PolicyKind::Sharpen,
        PolicyKind::SmoothSimilarity,
        PolicyKind::SmoothGp,
        PolicyKind::Gp,
        PolicyKind::Similarity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Identity => "identity",
            PolicyKind::Hard => "hard",
            PolicyKind::Sharpen => "sharpen",
            PolicyKind::SmoothSimilarity => "smooth-similarity",
            PolicyKind::SmoothGp => "smooth-gp",
            PolicyKind::Gp => "gp",
            PolicyKind::Similarity => "similarity",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|p| p.name()).collect();
                format!("unknown policy `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentConfig<T> {
    pub gp: GpConfig<T>,
    /// `None` sizes the bank to the labeled set.
    pub bank_capacity: Option<usize>,
    pub bank_mode: BankMode,
    pub policy: PolicyKind,
    pub alpha: T,
    pub tau: T,
    pub temperature: T,
    pub seed: u64,
}

impl<T: Scalar> Default for ExperimentConfig<T> {
    fn default() -> Self {
        Self {
            gp: GpConfig::default(),
            bank_capacity: None,
            bank_mode: BankMode::Fifo,
            policy: PolicyKind::Gp,
            alpha: T::lit(0.9),
            tau: T::lit(DEFAULT_TAU),
            temperature: T::one(),
            seed: 0,
        }
    }
}

impl<T: Scalar> ExperimentConfig<T> {
    pub fn kernel(&self) -> &KernelParams<T> {
        self.gp.kernel()
    }

    /// The refinement applied on top of the linear model, if any.
    pub fn refinement(&self) -> Result<RefinementPolicy<T>> {
        Ok(match self.policy {
            PolicyKind::Identity | PolicyKind::Gp | PolicyKind::Similarity => RefinementPolicy::Identity,
            PolicyKind::Hard => RefinementPolicy::HardOneHot,
            PolicyKind::Sharpen => RefinementPolicy::sharpen(self.temperature)?,
            PolicyKind::SmoothSimilarity => RefinementPolicy::smooth(self.alpha, AggregateSource::Similarity)?,
            PolicyKind::SmoothGp => RefinementPolicy::smooth(self.alpha, AggregateSource::Gp)?,
        })
    }

    /// `key=value` lines for every key, in a fixed order.
    pub fn to_text(&self) -> String {
        let k = self.gp.kernel();
        let clip = k.clip_threshold().map_or("none".to_string(), |c| c.to_string());
        let cap = self.bank_capacity.map_or("auto".to_string(), |c| c.to_string());
        let mode = match self.bank_mode {
            BankMode::Fifo => "fifo",
            BankMode::ClassBalanced => "class-balanced",
        };
        format!(
            "kernel.eta={}\nkernel.length_scale={}\nkernel.clip={clip}\ngp.sigma={}\ngp.lambda={}\n\
             gp.refresh_period={}\nbank.capacity={cap}\nbank.mode={mode}\nrefine.policy={}\n\
             refine.alpha={}\nrefine.tau={}\nrefine.temperature={}\nseed={}\n",
            k.eta(),
            k.length_scale(),
            self.gp.sigma(),
            self.gp.lambda(),
            self.gp.refresh_period(),
            self.policy,
            self.alpha,
            self.tau,
            self.temperature,
            self.seed
        )
    }
}

const KEYS: [&str; 13] = [
    "kernel.eta",
    "kernel.length_scale",
    "kernel.clip",
    "gp.sigma",
    "gp.lambda",
    "gp.refresh_period",
    "bank.capacity",
    "bank.mode",
    "refine.policy",
    "refine.alpha",
    "refine.tau",
    "refine.temperature",
    "seed",
];

pub fn read_config<T: Scalar>(path: &Path) -> Result<ExperimentConfig<T>> {
    parse_config(&std::fs::read_to_string(path)?, path)
}

pub fn write_config<T: Scalar>(path: &Path, cfg: &ExperimentConfig<T>) -> Result<()> {
    write_text(path, &cfg.to_text())
}

fn invalid(key: &str, reason: impl Into<String>) -> Error {
    Error::InvalidValue {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn real<T: Scalar>(key: &str, v: &str) -> Result<T> {
    let x: f64 = v.parse().map_err(|_| invalid(key, format!("`{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(invalid(key, "must be finite"));
    }
    Ok(T::lit(x))
}

fn count(key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| invalid(key, format!("`{v}` is not a non-negative integer")))
}

/// Parses `key=value` lines; `#` starts a comment. Absent keys take defaults.
pub fn parse_config<T: Scalar>(text: &str, source: &Path) -> Result<ExperimentConfig<T>> {
    let defaults = ExperimentConfig::<T>::default();
    let dk = defaults.gp.kernel();
    let (mut eta, mut length, mut clip) = (dk.eta(), dk.length_scale(), None);
    let (mut sigma, mut lambda, mut refresh) = (defaults.gp.sigma(), defaults.gp.lambda(), DEFAULT_REFRESH_PERIOD);
    let mut cfg = defaults;
    let mut seen = HashSet::new();

    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or_default().trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            path: source.to_path_buf(),
            line: i + 1,
            message: format!("expected key=value, got `{content}`"),
        })?;
        let (key, v) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(Error::UnknownKey(key.to_string()));
        }
        if !seen.insert(key.to_string()) {
            return Err(invalid(key, "given more than once"));
        }
        match key {
            "kernel.eta" => eta = real(key, v)?,
            "kernel.length_scale" => length = real(key, v)?,
            "kernel.clip" => clip = if v == "none" { None } else { Some(real(key, v)?) },
            "gp.sigma" => sigma = real(key, v)?,
            "gp.lambda" => lambda = real(key, v)?,
            "gp.refresh_period" => refresh = count(key, v)?,
            "bank.capacity" => {
                cfg.bank_capacity = if v == "auto" {
                    None
                } else {
                    match count(key, v)? {
                        0 => return Err(invalid(key, "must be at least 1")),
                        c => Some(c),
                    }
                }
            }
            "bank.mode" => {
                cfg.bank_mode = match v {
                    "fifo" => BankMode::Fifo,
                    "class-balanced" => BankMode::ClassBalanced,
                    _ => return Err(invalid(key, format!("`{v}` is not fifo or class-balanced"))),
                }
            }
            "refine.policy" => cfg.policy = v.parse().map_err(|e: String| invalid(key, e))?,
            "refine.alpha" => cfg.alpha = real(key, v)?,
            "refine.tau" => cfg.tau = real(key, v)?,
            "refine.temperature" => cfg.temperature = real(key, v)?,
            "seed" => cfg.seed = v.parse().map_err(|_| invalid(key, format!("`{v}` is not a u64")))?,
            _ => unreachable!("key list checked above"),
        }
    }

    let rename = |e: Error| match e {
        Error::InvalidParameter { name, reason } => invalid(name, reason),
        other => other,
    };
    let kernel = KernelParams::new(eta, length, clip).map_err(rename)?;
    cfg.gp = GpConfig::new(kernel, sigma, lambda, refresh).map_err(rename)?;
    if !(cfg.alpha >= T::zero() && cfg.alpha <= T::one()) {
        return Err(invalid("refine.alpha", "must lie in [0, 1]"));
    }
    if !(cfg.tau > T::zero() && cfg.tau <= T::one()) {
        return Err(invalid("refine.tau", "must lie in (0, 1]"));
    }
    if !(cfg.temperature > T::zero()) {
        return Err(invalid("refine.temperature", "must be positive"));
    }
    Ok(cfg)
}
