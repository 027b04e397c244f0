//! Constrained tanh autoencoder layers and the stacked encoder.
//!
//! A layer maps `v_prev` (length `p`) to `v = tanh(W v_prev + b)` (length `q`)
//! and reconstructs `v_prev ~ tanh(W~ v + b~)`. Training minimizes
//!
//! `R = 1/2 sum_n |v~_n - v_prev_n|^2 + constraint penalty on {v_n}`
//!
//! with plain gradient descent on all four parameter blocks.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;

use crate::constraints::Constraints;
use crate::error::{check_len, Error, Result};
use crate::init::InitMode;
use crate::scalar::{tanh_prime_from_output, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct SaeLayer<T> {
    /// `out_dim x in_dim`
    pub enc_w: Array2<T>,
    pub enc_b: Array1<T>,
    /// `in_dim x out_dim`, untied from `enc_w`
    pub dec_w: Array2<T>,
    pub dec_b: Array1<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaeGradients<T> {
    pub d_enc_w: Array2<T>,
    pub d_enc_b: Array1<T>,
    pub d_dec_w: Array2<T>,
    pub d_dec_b: Array1<T>,
}

impl<T: Scalar> SaeGradients<T> {
    pub fn zeros_like(layer: &SaeLayer<T>) -> Self {
        SaeGradients {
            d_enc_w: Array2::zeros(layer.enc_w.raw_dim()),
            d_enc_b: Array1::zeros(layer.enc_b.raw_dim()),
            d_dec_w: Array2::zeros(layer.dec_w.raw_dim()),
            d_dec_b: Array1::zeros(layer.dec_b.raw_dim()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_enc_w.iter().chain(&self.d_enc_b).chain(&self.d_dec_w).chain(&self.d_dec_b).all(|x| x.is_finite())
    }
}

impl<T: Scalar> SaeLayer<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        SaeLayer {
            enc_w: Array2::zeros((out_dim, in_dim)),
            enc_b: Array1::zeros(out_dim),
            dec_w: Array2::zeros((in_dim, out_dim)),
            dec_b: Array1::zeros(in_dim),
        }
    }

    pub fn random<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, mode: InitMode, rng: &mut R) -> Self {
        SaeLayer {
            enc_w: mode.matrix(out_dim, in_dim, rng),
            enc_b: mode.bias(out_dim, rng),
            dec_w: mode.matrix(in_dim, out_dim, rng),
            dec_b: mode.bias(in_dim, rng),
        }
    }

    /// Builds a layer from explicit blocks, checking that the shapes chain.
    pub fn from_parts(enc_w: Array2<T>, enc_b: Array1<T>, dec_w: Array2<T>, dec_b: Array1<T>) -> Result<Self> {
        let (q, p) = enc_w.dim();
        check_len("encoder bias", q, enc_b.len())?;
        check_len("decoder weight rows", p, dec_w.nrows())?;
        check_len("decoder weight cols", q, dec_w.ncols())?;
        check_len("decoder bias", p, dec_b.len())?;
        Ok(SaeLayer {
            enc_w,
            enc_b,
            dec_w,
            dec_b,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.enc_w.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.enc_w.nrows()
    }

    pub fn is_finite(&self) -> bool {
        self.enc_w.iter().chain(&self.enc_b).chain(&self.dec_w).chain(&self.dec_b).all(|x| x.is_finite())
    }

    /// Largest parameter magnitude (NaN propagates as NaN).
    pub fn max_abs(&self) -> T {
        self.enc_w
            .iter()
            .chain(&self.enc_b)
            .chain(&self.dec_w)
            .chain(&self.dec_b)
            .fold(T::zero(), |m, &x| if x.is_nan() || m.is_nan() { T::nan() } else { m.max(x.abs()) })
    }

    pub fn forward(&self, v_prev: ArrayView1<'_, T>) -> Result<Array1<T>> {
        check_len("layer input", self.in_dim(), v_prev.len())?;
        Ok((self.enc_w.dot(&v_prev) + &self.enc_b).mapv(T::tanh))
    }

    pub fn reconstruct(&self, v: ArrayView1<'_, T>) -> Result<Array1<T>> {
        check_len("layer code", self.out_dim(), v.len())?;
        Ok((self.dec_w.dot(&v) + &self.dec_b).mapv(T::tanh))
    }

    /// Row-wise [`SaeLayer::forward`] over an `N x in_dim` batch.
    pub fn forward_batch(&self, batch: &Array2<T>) -> Result<Array2<T>> {
        check_len("batch width", self.in_dim(), batch.ncols())?;
        Ok((batch.dot(&self.enc_w.t()) + &self.enc_b).mapv(T::tanh))
    }

    fn reconstruct_batch(&self, codes: &Array2<T>) -> Array2<T> {
        (codes.dot(&self.dec_w.t()) + &self.dec_b).mapv(T::tanh)
    }

    pub fn objective(&self, batch: &Array2<T>, constraints: &Constraints<T>) -> Result<T> {
        constraints.validate()?;
        let codes = self.forward_batch(batch)?;
        let recon = self.reconstruct_batch(&codes);
        Ok(reconstruction_error(&recon, batch) + constraints.value(&codes))
    }

    /// Reconstruction part of the objective alone.
    pub fn reconstruction_error(&self, batch: &Array2<T>) -> Result<T> {
        let codes = self.forward_batch(batch)?;
        Ok(reconstruction_error(&self.reconstruct_batch(&codes), batch))
    }

    pub fn gradients(&self, batch: &Array2<T>, constraints: &Constraints<T>) -> Result<SaeGradients<T>> {
        self.objective_and_gradients(batch, constraints).map(|(_, g)| g)
    }

    /// Objective and its exact gradient from one forward pass.
    pub fn objective_and_gradients(
        &self,
        batch: &Array2<T>,
        constraints: &Constraints<T>,
    ) -> Result<(T, SaeGradients<T>)> {
        constraints.validate()?;
        let codes = self.forward_batch(batch)?;
        let recon = self.reconstruct_batch(&codes);
        let value = reconstruction_error(&recon, batch) + constraints.value(&codes);

        // decoder local gradient: (v~ - v) * (1 - v~^2)
        let mut dec_delta = &recon - batch;
        dec_delta.zip_mut_with(&recon, |d, &r| *d *= tanh_prime_from_output(r));
        let d_dec_w = dec_delta.t().dot(&codes);
        let d_dec_b = dec_delta.sum_axis(Axis(0));

        // dR/dv through the decoder plus the penalties, then through tanh
        let mut enc_delta = dec_delta.dot(&self.dec_w);
        if constraints.is_active() {
            enc_delta += &constraints.grad_codes(&codes);
        }
        enc_delta.zip_mut_with(&codes, |d, &v| *d *= tanh_prime_from_output(v));
        let d_enc_w = enc_delta.t().dot(batch);
        let d_enc_b = enc_delta.sum_axis(Axis(0));

        Ok((
            value,
            SaeGradients {
                d_enc_w,
                d_enc_b,
                d_dec_w,
                d_dec_b,
            },
        ))
    }

    /// `p := p - alpha * grad` on all four blocks.
    pub fn sgd_step(&mut self, grads: &SaeGradients<T>, alpha: T) -> Result<()> {
        if !(alpha > T::zero()) {
            return Err(Error::Config(format!("learning rate must be positive, got {alpha}")));
        }
        if grads.d_enc_w.dim() != self.enc_w.dim() || grads.d_dec_w.dim() != self.dec_w.dim() {
            return Err(Error::shape("gradient blocks", self.enc_w.len(), grads.d_enc_w.len()));
        }
        check_len("encoder bias gradient", self.enc_b.len(), grads.d_enc_b.len())?;
        check_len("decoder bias gradient", self.dec_b.len(), grads.d_dec_b.len())?;
        self.enc_w.scaled_add(-alpha, &grads.d_enc_w);
        self.enc_b.scaled_add(-alpha, &grads.d_enc_b);
        self.dec_w.scaled_add(-alpha, &grads.d_dec_w);
        self.dec_b.scaled_add(-alpha, &grads.d_dec_b);
        Ok(())
    }

    /// One gradient step per batch, in order. Returns the objective of each
    /// batch as evaluated at the parameters the step was taken from.
    pub fn train_layer(&mut self, batches: &[Array2<T>], constraints: &Constraints<T>, alpha: T) -> Result<Vec<T>> {
        let mut trace = Vec::with_capacity(batches.len());
        for batch in batches {
            let (r, g) = self.objective_and_gradients(batch, constraints)?;
            self.sgd_step(&g, alpha)?;
            trace.push(r);
        }
        Ok(trace)
    }
}

fn reconstruction_error<T: Scalar>(recon: &Array2<T>, target: &Array2<T>) -> T {
    let sq: T = recon.iter().zip(target).map(|(&a, &b)| (a - b) * (a - b)).sum();
    T::of(0.5) * sq
}

/// Greedily trained stack of layers; `dims = [d, q_1, ..., q_L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaeStack<T> {
    pub layers: Vec<SaeLayer<T>>,
}

impl<T: Scalar> SaeStack<T> {
    pub fn new(layers: Vec<SaeLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("autoencoder stack needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            check_len("stacked layer input", pair[0].out_dim(), pair[1].in_dim())?;
        }
        Ok(SaeStack { layers })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        validate_dims(dims)?;
        Self::new(dims.windows(2).map(|w| SaeLayer::zeros(w[0], w[1])).collect())
    }

    pub fn random<R: Rng + ?Sized>(dims: &[usize], mode: InitMode, rng: &mut R) -> Result<Self> {
        validate_dims(dims)?;
        Self::new(dims.windows(2).map(|w| SaeLayer::random(w[0], w[1], mode, rng)).collect())
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].in_dim())
            .chain(self.layers.iter().map(SaeLayer::out_dim))
            .collect()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn encode(&self, x: ArrayView1<'_, T>) -> Result<Array1<T>> {
        let mut v = self.layers[0].forward(x)?;
        for layer in &self.layers[1..] {
            v = layer.forward(v.view())?;
        }
        Ok(v)
    }

    pub fn encode_batch(&self, batch: &Array2<T>) -> Result<Array2<T>> {
        let mut v = self.layers[0].forward_batch(batch)?;
        for layer in &self.layers[1..] {
            v = layer.forward_batch(&v)?;
        }
        Ok(v)
    }
}

pub(crate) fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::Config(format!(
            "layer_dims needs an input and at least one hidden size, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(Error::Config(format!("layer_dims must be positive, got {dims:?}")));
    }
    Ok(())
}

/// Sign threshold into `{0, 1}`; zero maps to 1.
pub fn binarize_pm<T: Scalar>(v: ArrayView1<'_, T>) -> Array1<T> {
    v.mapv(|x| if x >= T::zero() { T::one() } else { T::zero() })
}

pub fn binarize_batch<T: Scalar>(v: &Array2<T>) -> Array2<T> {
    v.mapv(|x| if x >= T::zero() { T::one() } else { T::zero() })
}
