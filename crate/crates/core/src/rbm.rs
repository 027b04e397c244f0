//! Binary RBM head with balance/decorrelation penalties on its hidden codes.
//!
//! Energy: `E(v, h) = -a.v - b.h - h.W v`, so `P(h=1|v) = sigmoid(W v + b)`
//! and `P(v=1|h) = sigmoid(W^T h + a)`. Training minimizes
//! `J = -ln L + penalty(f(W v + b))` where `f(x) = (tanh(beta x) + 1) / 2`
//! stands in for the hard threshold used at hashing time. The likelihood
//! gradient is estimated with CD-r; the penalty gradient is exact.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::code::HashCode;
use crate::constraints::Constraints;
use crate::error::{check_len, Error, Result};
use crate::init::InitMode;
use crate::scalar::{sigmoid, softplus, Scalar};

pub const DEFAULT_BETA: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Rbm<T> {
    /// `h_dim x v_dim`
    pub w: Array2<T>,
    pub vis_bias: Array1<T>,
    pub hid_bias: Array1<T>,
    /// sharpness of the sign surrogate
    pub beta: T,
    /// Gibbs steps per CD estimate
    pub cd_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbmGradients<T> {
    pub d_w: Array2<T>,
    pub d_vis_bias: Array1<T>,
    pub d_hid_bias: Array1<T>,
}

impl<T: Scalar> RbmGradients<T> {
    pub fn zeros(v_dim: usize, h_dim: usize) -> Self {
        RbmGradients {
            d_w: Array2::zeros((h_dim, v_dim)),
            d_vis_bias: Array1::zeros(v_dim),
            d_hid_bias: Array1::zeros(h_dim),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_w.iter().chain(&self.d_vis_bias).chain(&self.d_hid_bias).all(|x| x.is_finite())
    }

    fn add_assign(&mut self, other: &Self) {
        self.d_w += &other.d_w;
        self.d_vis_bias += &other.d_vis_bias;
        self.d_hid_bias += &other.d_hid_bias;
    }

    /// Flattened `[d_w row-major, d_vis_bias, d_hid_bias]`.
    pub fn flatten(&self) -> Vec<T> {
        self.d_w.iter().chain(&self.d_vis_bias).chain(&self.d_hid_bias).copied().collect()
    }
}

/// Bookkeeping of one Gibbs chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStats<T> {
    pub h_samples: usize,
    pub v_samples: usize,
    /// `P(h=1 | v0)`
    pub p_h_start: Array1<T>,
    /// `P(h=1 | v_r)`
    pub p_h_end: Array1<T>,
}

/// Which parts of the CD gradient estimate to include.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradientParts {
    pub likelihood: bool,
    pub penalty: bool,
}

impl GradientParts {
    pub const ALL: GradientParts = GradientParts {
        likelihood: true,
        penalty: true,
    };
    pub const PENALTY_ONLY: GradientParts = GradientParts {
        likelihood: false,
        penalty: true,
    };
    pub const LIKELIHOOD_ONLY: GradientParts = GradientParts {
        likelihood: true,
        penalty: false,
    };
}

fn check_binary<T: Scalar>(what: &str, v: ArrayView1<'_, T>) -> Result<()> {
    match v.iter().position(|&x| x != T::zero() && x != T::one()) {
        None => Ok(()),
        Some(i) => Err(Error::Domain(format!("{what}[{i}] = {} is not 0 or 1", v[i]))),
    }
}

fn check_binary_batch<T: Scalar>(batch: &Array2<T>) -> Result<()> {
    for (n, row) in batch.axis_iter(Axis(0)).enumerate() {
        check_binary(&format!("batch row {n}"), row)?;
    }
    Ok(())
}

fn bernoulli<T: Scalar, R: Rng + ?Sized>(p: &Array1<T>, rng: &mut R) -> Array1<T> {
    p.mapv(|pi| {
        if rng.random::<f64>() < pi.as_f64() {
            T::one()
        } else {
            T::zero()
        }
    })
}

/// Per-sample chain stream, independent of how samples are scheduled.
fn sample_rng(master: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(master ^ index as u64)
}

impl<T: Scalar> Rbm<T> {
    pub fn zeros(v_dim: usize, h_dim: usize) -> Self {
        Rbm {
            w: Array2::zeros((h_dim, v_dim)),
            vis_bias: Array1::zeros(v_dim),
            hid_bias: Array1::zeros(h_dim),
            beta: T::of(DEFAULT_BETA),
            cd_steps: 1,
        }
    }

    pub fn random<R: Rng + ?Sized>(v_dim: usize, h_dim: usize, mode: InitMode, rng: &mut R) -> Self {
        let w = mode.matrix(h_dim, v_dim, rng);
        let hid_bias = mode.bias(h_dim, rng);
        let vis_bias = mode.bias(v_dim, rng);
        Rbm {
            w,
            vis_bias,
            hid_bias,
            beta: T::of(DEFAULT_BETA),
            cd_steps: 1,
        }
    }

    pub fn with_beta(mut self, beta: T) -> Result<Self> {
        if !(beta >= T::one()) {
            return Err(Error::Config(format!("beta must be >= 1, got {beta}")));
        }
        self.beta = beta;
        Ok(self)
    }

    pub fn with_cd_steps(mut self, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("cd_steps must be >= 1".into()));
        }
        self.cd_steps = steps;
        Ok(self)
    }

    pub fn v_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn h_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.vis_bias).chain(&self.hid_bias).all(|x| x.is_finite())
    }

    /// Largest parameter magnitude (NaN propagates as NaN).
    pub fn max_abs(&self) -> T {
        self.w
            .iter()
            .chain(&self.vis_bias)
            .chain(&self.hid_bias)
            .fold(T::zero(), |m, &x| if x.is_nan() || m.is_nan() { T::nan() } else { m.max(x.abs()) })
    }

    pub fn energy(&self, v: ArrayView1<'_, T>, h: ArrayView1<'_, T>) -> Result<T> {
        check_len("visible vector", self.v_dim(), v.len())?;
        check_len("hidden vector", self.h_dim(), h.len())?;
        check_binary("v", v)?;
        check_binary("h", h)?;
        Ok(-self.vis_bias.dot(&v) - self.hid_bias.dot(&h) - h.dot(&self.w.dot(&v)))
    }

    /// `F(v) = -a.v - sum_j ln(1 + exp((W v + b)_j))`, so `P(v) = exp(-F(v)) / Z`.
    pub fn free_energy(&self, v: ArrayView1<'_, T>) -> Result<T> {
        check_len("visible vector", self.v_dim(), v.len())?;
        let pre = self.w.dot(&v) + &self.hid_bias;
        Ok(-self.vis_bias.dot(&v) - pre.iter().map(|&x| softplus(x)).sum::<T>())
    }

    fn hidden_pre(&self, v: ArrayView1<'_, T>) -> Array1<T> {
        self.w.dot(&v) + &self.hid_bias
    }

    pub fn prob_h_given_v(&self, v: ArrayView1<'_, T>) -> Result<Array1<T>> {
        check_len("visible vector", self.v_dim(), v.len())?;
        check_binary("v", v)?;
        Ok(self.hidden_pre(v).mapv(sigmoid))
    }

    pub fn prob_v_given_h(&self, h: ArrayView1<'_, T>) -> Result<Array1<T>> {
        check_len("hidden vector", self.h_dim(), h.len())?;
        check_binary("h", h)?;
        Ok((self.w.t().dot(&h) + &self.vis_bias).mapv(sigmoid))
    }

    /// Runs `cd_steps` rounds of `h ~ P(h|v)`, `v ~ P(v|h)` from `v0`.
    pub fn gibbs_chain<R: Rng + ?Sized>(
        &self,
        v0: ArrayView1<'_, T>,
        rng: &mut R,
    ) -> Result<(Array1<T>, ChainStats<T>)> {
        let p_h_start = self.prob_h_given_v(v0)?;
        let mut v = v0.to_owned();
        let mut p_h = p_h_start.clone();
        let (mut h_samples, mut v_samples) = (0, 0);
        for _ in 0..self.cd_steps {
            let h = bernoulli(&p_h, rng);
            h_samples += 1;
            let p_v = (self.w.t().dot(&h) + &self.vis_bias).mapv(sigmoid);
            v = bernoulli(&p_v, rng);
            v_samples += 1;
            p_h = self.hidden_pre(v.view()).mapv(sigmoid);
        }
        Ok((
            v,
            ChainStats {
                h_samples,
                v_samples,
                p_h_start,
                p_h_end: p_h,
            },
        ))
    }

    /// Runs one chain per batch row. Row `n` draws from its own stream seeded
    /// by `master ^ n`, where `master` is the next `u64` of `rng`.
    pub fn negative_samples<R: RngCore + ?Sized>(&self, batch: &Array2<T>, rng: &mut R) -> Result<Array2<T>> {
        check_len("batch width", self.v_dim(), batch.ncols())?;
        let master = rng.next_u64();
        let mut out = Array2::zeros(batch.raw_dim());
        for (n, (row, mut dst)) in batch.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))).enumerate() {
            let (v_r, _) = self.gibbs_chain(row, &mut sample_rng(master, n))?;
            dst.assign(&v_r);
        }
        Ok(out)
    }

    /// `f(x) = (tanh(beta x) + 1) / 2`.
    pub fn surrogate(&self, x: T) -> T {
        T::of(0.5) * ((self.beta * x).tanh() + T::one())
    }

    /// `f'(x) = (beta / 2) (1 - tanh^2(beta x))`.
    pub fn surrogate_prime(&self, x: T) -> T {
        let t = (self.beta * x).tanh();
        T::of(0.5) * self.beta * (T::one() - t * t)
    }

    pub fn surrogate_hidden(&self, v: ArrayView1<'_, T>) -> Result<Array1<T>> {
        check_len("visible vector", self.v_dim(), v.len())?;
        check_binary("v", v)?;
        Ok(self.hidden_pre(v).mapv(|x| self.surrogate(x)))
    }

    fn hidden_pre_batch(&self, batch: &Array2<T>) -> Array2<T> {
        batch.dot(&self.w.t()) + &self.hid_bias
    }

    /// Deterministic penalty part of the objective, evaluated on the surrogate codes.
    pub fn reg_objective_terms(&self, batch: &Array2<T>, constraints: &Constraints<T>) -> Result<T> {
        constraints.validate()?;
        check_len("batch width", self.v_dim(), batch.ncols())?;
        check_binary_batch(batch)?;
        let codes = self.hidden_pre_batch(batch).mapv(|x| self.surrogate(x));
        Ok(constraints.value(&codes))
    }

    /// Exact gradient of [`Rbm::reg_objective_terms`].
    pub fn penalty_gradients(&self, batch: &Array2<T>, constraints: &Constraints<T>) -> Result<RbmGradients<T>> {
        constraints.validate()?;
        check_len("batch width", self.v_dim(), batch.ncols())?;
        check_binary_batch(batch)?;
        let mut g = RbmGradients::zeros(self.v_dim(), self.h_dim());
        if !constraints.is_active() {
            return Ok(g);
        }
        let pre = self.hidden_pre_batch(batch);
        let codes = pre.mapv(|x| self.surrogate(x));
        let mut delta = constraints.grad_codes(&codes);
        delta.zip_mut_with(&pre, |d, &x| *d *= self.surrogate_prime(x));
        g.d_w = delta.t().dot(batch);
        g.d_hid_bias = delta.sum_axis(Axis(0));
        Ok(g)
    }

    /// CD likelihood part given chain end points: positive gradient of
    /// `-ln L`, so that `p -= alpha * grad` raises the data likelihood.
    pub fn likelihood_gradients(&self, data: &Array2<T>, negatives: &Array2<T>) -> Result<RbmGradients<T>> {
        check_len("batch width", self.v_dim(), data.ncols())?;
        if negatives.dim() != data.dim() {
            return Err(Error::shape("negative samples", data.len(), negatives.len()));
        }
        check_binary_batch(data)?;
        check_binary_batch(negatives)?;
        let p_data = self.hidden_pre_batch(data).mapv(sigmoid);
        let p_model = self.hidden_pre_batch(negatives).mapv(sigmoid);
        Ok(RbmGradients {
            d_w: p_model.t().dot(negatives) - p_data.t().dot(data),
            d_vis_bias: negatives.sum_axis(Axis(0)) - data.sum_axis(Axis(0)),
            d_hid_bias: p_model.sum_axis(Axis(0)) - p_data.sum_axis(Axis(0)),
        })
    }

    /// Combines the CD likelihood estimate (from the given chain end points)
    /// with the exact penalty gradient.
    pub fn gradients_from_chains(
        &self,
        data: &Array2<T>,
        negatives: &Array2<T>,
        constraints: &Constraints<T>,
        parts: GradientParts,
    ) -> Result<RbmGradients<T>> {
        let mut g = RbmGradients::zeros(self.v_dim(), self.h_dim());
        if parts.likelihood {
            g.add_assign(&self.likelihood_gradients(data, negatives)?);
        }
        if parts.penalty {
            g.add_assign(&self.penalty_gradients(data, constraints)?);
        }
        Ok(g)
    }

    pub fn cd_gradients<R: RngCore + ?Sized>(
        &self,
        batch: &Array2<T>,
        constraints: &Constraints<T>,
        rng: &mut R,
    ) -> Result<RbmGradients<T>> {
        constraints.validate()?;
        check_len("batch width", self.v_dim(), batch.ncols())?;
        check_binary_batch(batch)?;
        let negatives = self.negative_samples(batch, rng)?;
        self.gradients_from_chains(batch, &negatives, constraints, GradientParts::ALL)
    }

    /// `p := p - alpha * grad` on `W`, `a` and `b`.
    pub fn update(&mut self, grads: &RbmGradients<T>, alpha: T) -> Result<()> {
        if !(alpha > T::zero()) {
            return Err(Error::Config(format!("learning rate must be positive, got {alpha}")));
        }
        if grads.d_w.dim() != self.w.dim() {
            return Err(Error::shape("weight gradient", self.w.len(), grads.d_w.len()));
        }
        check_len("visible bias gradient", self.vis_bias.len(), grads.d_vis_bias.len())?;
        check_len("hidden bias gradient", self.hid_bias.len(), grads.d_hid_bias.len())?;
        self.w.scaled_add(-alpha, &grads.d_w);
        self.vis_bias.scaled_add(-alpha, &grads.d_vis_bias);
        self.hid_bias.scaled_add(-alpha, &grads.d_hid_bias);
        Ok(())
    }

    /// One CD update on `batch`. Returns the tracked objective at the
    /// pre-update parameters: the penalty terms plus the summed free-energy
    /// gap `F(v0) - F(v_r)`, which stands in for `-ln L` up to `ln Z`.
    pub fn train_batch<R: RngCore + ?Sized>(
        &mut self,
        batch: &Array2<T>,
        constraints: &Constraints<T>,
        alpha: T,
        rng: &mut R,
    ) -> Result<T> {
        constraints.validate()?;
        check_len("batch width", self.v_dim(), batch.ncols())?;
        check_binary_batch(batch)?;
        let negatives = self.negative_samples(batch, rng)?;
        let mut gap = T::zero();
        for (v0, vr) in batch.axis_iter(Axis(0)).zip(negatives.axis_iter(Axis(0))) {
            gap += self.free_energy(v0)? - self.free_energy(vr)?;
        }
        let j = gap + self.reg_objective_terms(batch, constraints)?;
        let g = self.gradients_from_chains(batch, &negatives, constraints, GradientParts::ALL)?;
        self.update(&g, alpha)?;
        Ok(j)
    }

    /// Deterministic code: bit `i` is set iff `(W v + b)_i >= 0`.
    pub fn hash(&self, v: ArrayView1<'_, T>) -> Result<HashCode> {
        check_len("visible vector", self.v_dim(), v.len())?;
        check_binary("v", v)?;
        Ok(HashCode::from_bits(self.hidden_pre(v).iter().map(|&x| x >= T::zero())))
    }
}

/// Exact quantities by enumerating every joint state. Only feasible for tiny
/// models; used as a reference for the sampled estimates.
pub mod exact {
    use super::*;

    /// Upper bound on `v_dim + h_dim` for enumeration.
    pub const MAX_UNITS: usize = 20;

    fn check_capacity<T: Scalar>(rbm: &Rbm<T>) -> Result<()> {
        let units = rbm.v_dim() + rbm.h_dim();
        if units > MAX_UNITS {
            return Err(Error::Capacity(format!(
                "exact enumeration needs v_dim + h_dim <= {MAX_UNITS}, got {units}"
            )));
        }
        Ok(())
    }

    /// All binary vectors of length `n` as f64 0/1 vectors, state `s` having bit `i` = `(s >> i) & 1`.
    pub fn states(n: usize) -> impl Iterator<Item = Array1<f64>> {
        (0..1usize << n).map(move |s| Array1::from_shape_fn(n, |i| ((s >> i) & 1) as f64))
    }

    fn to_f64<T: Scalar>(rbm: &Rbm<T>) -> Rbm<f64> {
        Rbm {
            w: rbm.w.mapv(Scalar::as_f64),
            vis_bias: rbm.vis_bias.mapv(Scalar::as_f64),
            hid_bias: rbm.hid_bias.mapv(Scalar::as_f64),
            beta: rbm.beta.as_f64(),
            cd_steps: rbm.cd_steps,
        }
    }

    fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
        let xs: Vec<f64> = xs.collect();
        let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
    }

    /// `ln Z` by summing `exp(-E(v, h))` over all `2^(v_dim + h_dim)` states.
    pub fn log_partition<T: Scalar>(rbm: &Rbm<T>) -> Result<f64> {
        check_capacity(rbm)?;
        let r = to_f64(rbm);
        let hs: Vec<_> = states(r.h_dim()).collect();
        let mut terms = Vec::with_capacity(hs.len() << r.v_dim());
        for v in states(r.v_dim()) {
            for h in &hs {
                terms.push(-r.energy(v.view(), h.view())?);
            }
        }
        Ok(log_sum_exp(terms.into_iter()))
    }

    /// `ln P(v)` for every visible state, indexed like [`states`].
    fn visible_log_marginals(r: &Rbm<f64>, log_z: f64) -> Result<Vec<f64>> {
        let hs: Vec<_> = states(r.h_dim()).collect();
        states(r.v_dim())
            .map(|v| {
                let terms: Result<Vec<f64>> = hs.iter().map(|h| r.energy(v.view(), h.view()).map(|e| -e)).collect();
                Ok(log_sum_exp(terms?.into_iter()) - log_z)
            })
            .collect()
    }

    /// `sum_n ln P(v_n)`.
    pub fn log_likelihood<T: Scalar>(rbm: &Rbm<T>, batch: &Array2<T>) -> Result<f64> {
        check_capacity(rbm)?;
        check_binary_batch(batch)?;
        let r = to_f64(rbm);
        let log_z = log_partition(&r)?;
        let hs: Vec<_> = states(r.h_dim()).collect();
        let mut total = 0.0;
        for row in batch.axis_iter(Axis(0)) {
            let v = row.mapv(Scalar::as_f64);
            let terms: Result<Vec<f64>> = hs.iter().map(|h| r.energy(v.view(), h.view()).map(|e| -e)).collect();
            total += log_sum_exp(terms?.into_iter()) - log_z;
        }
        Ok(total)
    }

    /// Joint probability table `P(v, h)`, indexed `[v_state][h_state]`.
    pub fn joint_table<T: Scalar>(rbm: &Rbm<T>) -> Result<Vec<Vec<f64>>> {
        check_capacity(rbm)?;
        let r = to_f64(rbm);
        let log_z = log_partition(&r)?;
        let hs: Vec<_> = states(r.h_dim()).collect();
        states(r.v_dim())
            .map(|v| {
                hs.iter()
                    .map(|h| r.energy(v.view(), h.view()).map(|e| (-e - log_z).exp()))
                    .collect()
            })
            .collect()
    }

    /// `P(h_j = 1 | v)` from the joint table by summing over hidden states.
    pub fn conditional_h<T: Scalar>(rbm: &Rbm<T>, v: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let table = joint_table(rbm)?;
        let v_idx = state_index(v);
        let row = &table[v_idx];
        let total: f64 = row.iter().sum();
        Ok(Array1::from_shape_fn(rbm.h_dim(), |j| {
            row.iter().enumerate().filter(|(s, _)| (s >> j) & 1 == 1).map(|(_, p)| p).sum::<f64>() / total
        }))
    }

    /// `P(v_i = 1 | h)` from the joint table by summing over visible states.
    pub fn conditional_v<T: Scalar>(rbm: &Rbm<T>, h: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let table = joint_table(rbm)?;
        let h_idx = state_index(h);
        let col: Vec<f64> = table.iter().map(|row| row[h_idx]).collect();
        let total: f64 = col.iter().sum();
        Ok(Array1::from_shape_fn(rbm.v_dim(), |i| {
            col.iter().enumerate().filter(|(s, _)| (s >> i) & 1 == 1).map(|(_, p)| p).sum::<f64>() / total
        }))
    }

    fn state_index(x: ArrayView1<'_, f64>) -> usize {
        x.iter().enumerate().map(|(i, &b)| usize::from(b != 0.0) << i).sum()
    }

    /// Exact `d ln L / d{W, a, b}`: ascent direction of the likelihood,
    /// i.e. the negative of what [`Rbm::likelihood_gradients`] estimates.
    pub fn loglik_grad<T: Scalar>(rbm: &Rbm<T>, batch: &Array2<T>) -> Result<RbmGradients<f64>> {
        check_capacity(rbm)?;
        check_binary_batch(batch)?;
        let r = to_f64(rbm);
        let (vd, hd) = (r.v_dim(), r.h_dim());
        let table = joint_table(&r)?;
        let vs: Vec<_> = states(vd).collect();
        let hs: Vec<_> = states(hd).collect();

        // model expectations of v, h and h v^T
        let mut e_v = Array1::<f64>::zeros(vd);
        let mut e_h = Array1::<f64>::zeros(hd);
        let mut e_hv = Array2::<f64>::zeros((hd, vd));
        for (vi, v) in vs.iter().enumerate() {
            for (hi, h) in hs.iter().enumerate() {
                let p = table[vi][hi];
                e_v.scaled_add(p, v);
                e_h.scaled_add(p, h);
                for j in 0..hd {
                    if h[j] != 0.0 {
                        e_hv.row_mut(j).scaled_add(p, v);
                    }
                }
            }
        }

        let n = batch.nrows() as f64;
        let mut g = RbmGradients {
            d_w: e_hv * -n,
            d_vis_bias: e_v * -n,
            d_hid_bias: e_h * -n,
        };
        for row in batch.axis_iter(Axis(0)) {
            let v = row.mapv(Scalar::as_f64);
            let cond = &table[state_index(v.view())];
            let total: f64 = cond.iter().sum();
            let e_h_given_v = Array1::from_shape_fn(hd, |j| {
                cond.iter().enumerate().filter(|(s, _)| (s >> j) & 1 == 1).map(|(_, p)| p).sum::<f64>() / total
            });
            g.d_vis_bias += &v;
            g.d_hid_bias += &e_h_given_v;
            for j in 0..hd {
                g.d_w.row_mut(j).scaled_add(e_h_given_v[j], &v);
            }
        }
        Ok(g)
    }

    /// Mean log-likelihood over the batch via visible marginals.
    pub fn mean_log_likelihood<T: Scalar>(rbm: &Rbm<T>, batch: &Array2<T>) -> Result<f64> {
        check_capacity(rbm)?;
        check_binary_batch(batch)?;
        let r = to_f64(rbm);
        let log_z = log_partition(&r)?;
        let marg = visible_log_marginals(&r, log_z)?;
        let total: f64 = batch
            .axis_iter(Axis(0))
            .map(|row| marg[state_index(row.mapv(Scalar::as_f64).view())])
            .sum();
        Ok(total / batch.nrows() as f64)
    }
}
