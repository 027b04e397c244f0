use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainingConfig;
use super::model::{derive_seed, Model};
use crate::constraints::Constraints;
use crate::error::{check_len, Error, Result};
use crate::features::{normalize, plan_epochs, EpochPlan, FeatureMatrix, NormMode};
use crate::sae::binarize_batch;
use crate::scalar::Scalar;

const STREAM_PLAN: u64 = 2;
const STREAM_CD: u64 = 3;

/// Parameter magnitude treated as divergence. Inputs live in `[-1, 1]` and
/// every unit saturates long before this, so a weight this large means the
/// step size has thrown the model out of any useful regime even when the
/// arithmetic itself is still finite.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

fn bounded<T: Scalar>(max_abs: T) -> bool {
    max_abs.as_f64() <= DIVERGENCE_LIMIT
}

/// Objectives tracked for one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T> {
    /// 1-based
    pub iteration: usize,
    /// Autoencoder objective summed over every layer and batch of the last pass.
    pub sae_objective: T,
    /// RBM penalty terms plus summed free-energy gap `F(v0) - F(v_r)` of the last pass.
    pub rbm_objective: T,
    pub sae_repeats: usize,
    pub rbm_repeats: usize,
}

pub type History<T> = Vec<IterationRecord<T>>;

fn diverged<T: Scalar>(value: T, healthy_params: bool, stage: &'static str, iteration: usize) -> Result<()> {
    if value.is_finite() && healthy_params {
        Ok(())
    } else {
        Err(Error::Divergence { stage, iteration })
    }
}

struct Trainer<'a, T: Scalar> {
    model: Model<T>,
    data: &'a Array2<T>,
    constraints: Constraints<T>,
    alpha: T,
    cd_rng: ChaCha8Rng,
}

impl<T: Scalar> Trainer<'_, T> {
    /// Stage (a) on one batch: each layer takes one step on the outputs of
    /// the layers before it, computed with their freshly updated parameters.
    /// Returns the summed objective and the final layer's outputs.
    fn sae_batch(&mut self, rows: &[usize]) -> Result<(T, Array2<T>)> {
        let mut input = self.data.select(ndarray::Axis(0), rows);
        let mut total = T::zero();
        for layer in &mut self.model.sae.layers {
            let trace = layer.train_layer(std::slice::from_ref(&input), &self.constraints, self.alpha)?;
            total += trace[0];
            input = layer.forward_batch(&input)?;
        }
        Ok((total, input))
    }

    fn rbm_batch(&mut self, sae_out: &Array2<T>) -> Result<T> {
        let bits = binarize_batch(sae_out);
        self.model.rbm.train_batch(&bits, &self.constraints, self.alpha, &mut self.cd_rng)
    }

    fn sae_healthy(&self) -> bool {
        self.model.sae.layers.iter().all(|l| bounded(l.max_abs()))
    }

    fn rbm_healthy(&self) -> bool {
        bounded(self.model.rbm.max_abs())
    }

    fn sae_pass(&mut self, plan: &EpochPlan, iteration: usize) -> Result<T> {
        let mut r = T::zero();
        for batch in plan.batches() {
            r += self.sae_batch(batch)?.0;
        }
        diverged(r, self.sae_healthy(), "sae", iteration)?;
        Ok(r)
    }

    fn rbm_pass(&mut self, plan: &EpochPlan, iteration: usize) -> Result<T> {
        let mut j = T::zero();
        for batch in plan.batches() {
            let x = self.data.select(ndarray::Axis(0), batch);
            let out = self.model.sae.encode_batch(&x)?;
            j += self.rbm_batch(&out)?;
        }
        diverged(j, self.rbm_healthy(), "rbm", iteration)?;
        Ok(j)
    }

    /// Interleaved pass: per batch, all autoencoder layers then the RBM.
    fn joint_pass(&mut self, plan: &EpochPlan, iteration: usize) -> Result<(T, T)> {
        let (mut r, mut j) = (T::zero(), T::zero());
        for batch in plan.batches() {
            let (rb, out) = self.sae_batch(batch)?;
            diverged(rb, self.sae_healthy(), "sae", iteration)?;
            r += rb;
            let jb = self.rbm_batch(&out)?;
            diverged(jb, self.rbm_healthy(), "rbm", iteration)?;
            j += jb;
        }
        Ok((r, j))
    }
}

/// Trains a model on `data`.
///
/// Each outer iteration draws a fresh epoch plan, then for every batch trains
/// the autoencoder layers in order followed by the RBM. For iterations
/// strictly between the first and the last, a stage whose tracked objective
/// moved by more than its tolerance since the previous iteration is re-run
/// over the same plan, at most `max_repeats_per_iter` times.
///
/// `data` is normalized with [`NormMode::MinMaxSymmetric`] unless it already
/// carries statistics; the statistics are stored in the model.
///
/// Fails with [`Error::Divergence`] as soon as a batch yields a non-finite
/// objective or any parameter exceeds [`DIVERGENCE_LIMIT`] in magnitude.
pub fn train<T: Scalar>(config: &TrainingConfig<T>, data: &FeatureMatrix<T>) -> Result<(Model<T>, History<T>)> {
    config.validate()?;
    check_len("feature dimension", config.input_dim(), data.dim())?;
    let data = normalize(data, NormMode::MinMaxSymmetric)?;
    let needed = config.epochs * config.batch_size;
    if needed > data.rows() {
        return Err(Error::Capacity(format!(
            "{} epochs x {} rows = {needed} exceeds {} training rows",
            config.epochs,
            config.batch_size,
            data.rows()
        )));
    }

    let mut model = Model::init(config)?;
    model.norm_stats = data.norm_stats().expect("normalized above").clone();
    let mut trainer = Trainer {
        model,
        data: data.values(),
        constraints: config.constraints()?,
        alpha: config.alpha,
        cd_rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_CD)),
    };

    let t_max = config.outer_iters;
    let mut history: History<T> = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        let plan = plan_epochs(
            data.rows(),
            config.epochs,
            config.batch_size,
            derive_seed(derive_seed(config.seed, STREAM_PLAN), t as u64),
        )?;
        let (mut r, mut j) = trainer.joint_pass(&plan, t)?;
        let (mut sae_repeats, mut rbm_repeats) = (0, 0);

        if t > 1 && t < t_max {
            let prev = history.last().expect("t > 1");
            let first = &history[0];
            let eps_r = config.eps_sae.resolve(first.sae_objective);
            let eps_j = config.eps_rbm.resolve(first.rbm_objective);
            while sae_repeats < config.max_repeats_per_iter && (r - prev.sae_objective).abs() > eps_r {
                r = trainer.sae_pass(&plan, t)?;
                sae_repeats += 1;
            }
            while rbm_repeats < config.max_repeats_per_iter && (j - prev.rbm_objective).abs() > eps_j {
                j = trainer.rbm_pass(&plan, t)?;
                rbm_repeats += 1;
            }
        }

        history.push(IterationRecord {
            iteration: t,
            sae_objective: r,
            rbm_objective: j,
            sae_repeats,
            rbm_repeats,
        });
    }
    Ok((trainer.model, history))
}
