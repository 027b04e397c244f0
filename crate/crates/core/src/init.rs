use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How parameters are drawn before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMode {
    /// Every weight and bias uniform in `[0, 1)`.
    #[default]
    Unit,
    /// Uniform in `[-s, s]` with `s = sqrt(6 / (fan_in + fan_out))`; biases zero.
    Symmetric,
}

impl InitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InitMode::Unit => "unit",
            InitMode::Symmetric => "symmetric",
        }
    }

    fn draw<T: Scalar, R: Rng + ?Sized>(self, fan_in: usize, fan_out: usize, rng: &mut R) -> T {
        match self {
            InitMode::Unit => T::of(rng.random::<f64>()),
            InitMode::Symmetric => {
                let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
                T::of(rng.random_range(-s..=s))
            }
        }
    }

    pub fn matrix<T: Scalar, R: Rng + ?Sized>(
        self,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Array2<T> {
        // fan_in = cols, fan_out = rows for a rows x cols weight acting on a column vector
        Array2::from_shape_simple_fn((rows, cols), || self.draw(cols, rows, rng))
    }

    pub fn bias<T: Scalar, R: Rng + ?Sized>(self, len: usize, rng: &mut R) -> Array1<T> {
        match self {
            InitMode::Unit => Array1::from_shape_simple_fn(len, || self.draw(1, 1, rng)),
            InitMode::Symmetric => Array1::zeros(len),
        }
    }
}

impl FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(InitMode::Unit),
            "symmetric" => Ok(InitMode::Symmetric),
            other => Err(Error::Config(format!("unknown init_mode `{other}`"))),
        }
    }
}
