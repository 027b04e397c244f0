use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::constraints::{Constraints, DecorrelationMode};
use crate::error::{Error, Result};
use crate::init::InitMode;
use crate::sae::validate_dims;
use crate::scalar::Scalar;

/// Convergence tolerance on an objective delta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance<T> {
    Absolute(T),
    /// Fraction of the stage objective recorded at the first outer iteration.
    RelativeToFirst(T),
}

impl<T: Scalar> Tolerance<T> {
    pub const AUTO_FRACTION: f64 = 1e-3;

    pub fn auto() -> Self {
        Tolerance::RelativeToFirst(T::of(Self::AUTO_FRACTION))
    }

    pub fn resolve(&self, first: T) -> T {
        match *self {
            Tolerance::Absolute(x) => x,
            Tolerance::RelativeToFirst(f) => f * first.abs(),
        }
    }

    fn is_valid(&self) -> bool {
        match *self {
            Tolerance::Absolute(x) | Tolerance::RelativeToFirst(x) => x >= T::zero(),
        }
    }
}

impl<T: Scalar> fmt::Display for Tolerance<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Tolerance::RelativeToFirst(x) if x.as_f64() == Self::AUTO_FRACTION => f.write_str("auto"),
            Tolerance::RelativeToFirst(x) => write!(f, "rel:{}", fmt_real(x)),
            Tolerance::Absolute(x) => f.write_str(&fmt_real(x)),
        }
    }
}

impl<T: Scalar> FromStr for Tolerance<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Self::auto());
        }
        if let Some(rest) = s.strip_prefix("rel:") {
            return Ok(Tolerance::RelativeToFirst(T::of(parse_real("tolerance", rest)?)));
        }
        Ok(Tolerance::Absolute(T::of(parse_real("tolerance", s)?)))
    }
}

/// Exact decimal form: 17 significant digits round-trip any `f64`.
pub(crate) fn fmt_real<T: Scalar>(x: T) -> String {
    let x = x.as_f64();
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.16e}")
}

fn parse_real(key: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: `{s}` is not a number")))
}

/// Every hyperparameter of the training loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig<T> {
    /// bit-balance weight
    pub lambda: T,
    /// bit-decorrelation weight
    pub mu: T,
    /// sign-surrogate sharpness
    pub beta: T,
    /// learning rate shared by all stages
    pub alpha: T,
    /// `[d, q_1, ..., q_L]`
    pub layer_dims: Vec<usize>,
    pub code_bits: usize,
    pub outer_iters: usize,
    pub eps_sae: Tolerance<T>,
    pub eps_rbm: Tolerance<T>,
    pub epochs: usize,
    pub batch_size: usize,
    pub cd_steps: usize,
    pub seed: u64,
    pub decorrelation_mode: DecorrelationMode,
    pub init_mode: InitMode,
    pub max_repeats_per_iter: usize,
}

impl<T: Scalar> TrainingConfig<T> {
    /// Defaults for everything except the architecture.
    pub fn new(layer_dims: Vec<usize>, code_bits: usize) -> Self {
        TrainingConfig {
            lambda: T::of(0.1),
            mu: T::of(0.1),
            beta: T::of(10.0),
            alpha: T::of(0.01),
            layer_dims,
            code_bits,
            outer_iters: 10,
            eps_sae: Tolerance::auto(),
            eps_rbm: Tolerance::auto(),
            epochs: 10,
            batch_size: 20,
            cd_steps: 1,
            seed: 0,
            decorrelation_mode: DecorrelationMode::Batch,
            init_mode: InitMode::Unit,
            max_repeats_per_iter: 3,
        }
    }

    pub const KEYS: [&'static str; 16] = [
        "lambda",
        "mu",
        "beta",
        "alpha",
        "layer_dims",
        "code_bits",
        "outer_iters",
        "eps_sae",
        "eps_rbm",
        "epochs",
        "batch_size",
        "cd_steps",
        "seed",
        "decorrelation_mode",
        "init_mode",
        "max_repeats_per_iter",
    ];

    pub fn validate(&self) -> Result<()> {
        validate_dims(&self.layer_dims)?;
        self.constraints()?;
        if !(self.alpha > T::zero()) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("alpha must be positive and finite, got {}", self.alpha)));
        }
        if !(self.beta >= T::one()) {
            return Err(Error::Config(format!("beta must be >= 1, got {}", self.beta)));
        }
        if self.code_bits == 0 {
            return Err(Error::Config("code_bits must be >= 1".into()));
        }
        if self.outer_iters == 0 {
            return Err(Error::Config("outer_iters must be >= 1".into()));
        }
        if self.cd_steps == 0 {
            return Err(Error::Config("cd_steps must be >= 1".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be >= 1".into()));
        }
        if !self.eps_sae.is_valid() || !self.eps_rbm.is_valid() {
            return Err(Error::Config("tolerances must be non-negative".into()));
        }
        Ok(())
    }

    pub fn constraints(&self) -> Result<Constraints<T>> {
        Constraints::new(self.lambda, self.mu, self.decorrelation_mode)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    /// `key=value` lines in [`TrainingConfig::KEYS`] order.
    pub fn to_kv_text(&self) -> String {
        let mut s = String::new();
        let dims: Vec<String> = self.layer_dims.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "lambda={}", fmt_real(self.lambda));
        let _ = writeln!(s, "mu={}", fmt_real(self.mu));
        let _ = writeln!(s, "beta={}", fmt_real(self.beta));
        let _ = writeln!(s, "alpha={}", fmt_real(self.alpha));
        let _ = writeln!(s, "layer_dims={}", dims.join(","));
        let _ = writeln!(s, "code_bits={}", self.code_bits);
        let _ = writeln!(s, "outer_iters={}", self.outer_iters);
        let _ = writeln!(s, "eps_sae={}", self.eps_sae);
        let _ = writeln!(s, "eps_rbm={}", self.eps_rbm);
        let _ = writeln!(s, "epochs={}", self.epochs);
        let _ = writeln!(s, "batch_size={}", self.batch_size);
        let _ = writeln!(s, "cd_steps={}", self.cd_steps);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "decorrelation_mode={}", self.decorrelation_mode.as_str());
        let _ = writeln!(s, "init_mode={}", self.init_mode.as_str());
        let _ = writeln!(s, "max_repeats_per_iter={}", self.max_repeats_per_iter);
        s
    }

    /// Parses flat `key=value` text. Every key in [`TrainingConfig::KEYS`]
    /// must appear exactly once; blank lines and `#` comments are skipped.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            let k = k.trim();
            if !Self::KEYS.contains(&k) {
                return Err(Error::Config(format!("unknown key `{k}`")));
            }
            if map.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("duplicate key `{k}`")));
            }
        }
        let get = |k: &str| {
            map.get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::Config(format!("missing key `{k}`")))
        };
        fn int<U: FromStr>(key: &str, s: &str) -> Result<U> {
            s.parse()
                .map_err(|_| Error::Config(format!("`{key}`: `{s}` is not a non-negative integer")))
        }
        let real = |k: &str| -> Result<T> { Ok(T::of(parse_real(k, get(k)?)?)) };

        let layer_dims = get("layer_dims")?
            .split(',')
            .map(|d| int::<usize>("layer_dims", d.trim()))
            .collect::<Result<Vec<_>>>()?;
        let cfg = TrainingConfig {
            lambda: real("lambda")?,
            mu: real("mu")?,
            beta: real("beta")?,
            alpha: real("alpha")?,
            layer_dims,
            code_bits: int("code_bits", get("code_bits")?)?,
            outer_iters: int("outer_iters", get("outer_iters")?)?,
            eps_sae: get("eps_sae")?.parse()?,
            eps_rbm: get("eps_rbm")?.parse()?,
            epochs: int("epochs", get("epochs")?)?,
            batch_size: int("batch_size", get("batch_size")?)?,
            cd_steps: int("cd_steps", get("cd_steps")?)?,
            seed: int("seed", get("seed")?)?,
            decorrelation_mode: get("decorrelation_mode")?.parse()?,
            init_mode: get("init_mode")?.parse()?,
            max_repeats_per_iter: int("max_repeats_per_iter", get("max_repeats_per_iter")?)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
