//! Balance and decorrelation penalties on a batch of codes `H` (`N x q`):
//!
//! `(lambda/2) |sum_n h_n|^2 + (mu/2) D(H)`
//!
//! where `D` is either `|H^T H / N - I|_F^2` (batch covariance) or
//! `sum_n |h_n h_n^T / N - I|_F^2` (one outer product per sample).

use std::str::FromStr;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecorrelationMode {
    #[default]
    Batch,
    PerSample,
}

impl DecorrelationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DecorrelationMode::Batch => "batch",
            DecorrelationMode::PerSample => "per_sample",
        }
    }
}

impl FromStr for DecorrelationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "batch" => Ok(DecorrelationMode::Batch),
            "per_sample" => Ok(DecorrelationMode::PerSample),
            other => Err(Error::Config(format!("unknown decorrelation_mode `{other}`"))),
        }
    }
}

/// Penalty weights. `lambda` weighs bit balance, `mu` bit decorrelation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraints<T> {
    pub lambda: T,
    pub mu: T,
    pub mode: DecorrelationMode,
}

impl<T: Scalar> Constraints<T> {
    pub fn new(lambda: T, mu: T, mode: DecorrelationMode) -> Result<Self> {
        let c = Constraints { lambda, mu, mode };
        c.validate()?;
        Ok(c)
    }

    pub fn none() -> Self {
        Constraints {
            lambda: T::zero(),
            mu: T::zero(),
            mode: DecorrelationMode::Batch,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= T::zero()) || !(self.mu >= T::zero()) {
            return Err(Error::Config(format!(
                "lambda and mu must be non-negative, got {} and {}",
                self.lambda, self.mu
            )));
        }
        Ok(())
    }

    pub fn is_active(&self) -> bool {
        self.lambda > T::zero() || self.mu > T::zero()
    }

    pub fn value(&self, codes: &Array2<T>) -> T {
        let half = T::of(0.5);
        let mut total = T::zero();
        if self.lambda > T::zero() {
            let s = codes.sum_axis(Axis(0));
            total += half * self.lambda * s.dot(&s);
        }
        if self.mu > T::zero() {
            total += half * self.mu * self.decorrelation(codes);
        }
        total
    }

    fn decorrelation(&self, codes: &Array2<T>) -> T {
        let n = T::of(codes.nrows() as f64);
        let q = codes.ncols();
        match self.mode {
            DecorrelationMode::Batch => {
                let mut c = codes.t().dot(codes) / n;
                for i in 0..q {
                    c[[i, i]] -= T::one();
                }
                c.iter().map(|&x| x * x).sum()
            }
            DecorrelationMode::PerSample => {
                // |h h^T/N - I|_F^2 = |h|^4/N^2 - 2|h|^2/N + q
                let two = T::of(2.0);
                let qf = T::of(q as f64);
                codes
                    .axis_iter(Axis(0))
                    .map(|h| {
                        let s = h.dot(&h) / n;
                        s * s - two * s + qf
                    })
                    .sum()
            }
        }
    }

    /// Gradient of [`Constraints::value`] with respect to each code row.
    pub fn grad_codes(&self, codes: &Array2<T>) -> Array2<T> {
        let n = T::of(codes.nrows() as f64);
        let q = codes.ncols();
        let mut g = Array2::zeros(codes.raw_dim());
        if self.lambda > T::zero() {
            let s = codes.sum_axis(Axis(0)) * self.lambda;
            g += &s;
        }
        if self.mu > T::zero() {
            let k = T::of(2.0) * self.mu / n;
            match self.mode {
                DecorrelationMode::Batch => {
                    let mut c = codes.t().dot(codes) / n;
                    for i in 0..q {
                        c[[i, i]] -= T::one();
                    }
                    g.scaled_add(k, &codes.dot(&c));
                }
                DecorrelationMode::PerSample => {
                    for (mut gr, h) in g.axis_iter_mut(Axis(0)).zip(codes.axis_iter(Axis(0))) {
                        let f = k * (h.dot(&h) / n - T::one());
                        gr.scaled_add(f, &h);
                    }
                }
            }
        }
        g
    }
}
