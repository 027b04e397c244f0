use ndarray::{Array2, ArrayView1, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainingConfig;
use crate::code::HashCode;
use crate::error::{check_len, Error, Result};
use crate::features::{FeatureMatrix, NormMode, NormStats};
use crate::rbm::Rbm;
use crate::sae::{binarize_batch, binarize_pm, SaeStack};
use crate::scalar::Scalar;

pub const FORMAT_VERSION: u32 = 1;

/// Trained encoder: normalization, autoencoder stack and RBM head.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub sae: SaeStack<T>,
    pub rbm: Rbm<T>,
    pub norm_stats: NormStats<T>,
    pub config: TrainingConfig<T>,
    pub format_version: u32,
}

/// Expands a seed into independent stream seeds (splitmix64 finalizer).
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) const STREAM_INIT: u64 = 1;

/// Identity normalization of width `d` (shift 0, scale 1).
pub fn identity_stats<T: Scalar>(d: usize) -> NormStats<T> {
    NormStats {
        mode: NormMode::MinMaxSymmetric,
        shift: vec![T::zero(); d],
        scale: vec![T::one(); d],
    }
}

impl<T: Scalar> Model<T> {
    /// Random parameters drawn from the stream derived from `config.seed`.
    /// Normalization starts as the identity; [`super::train`] replaces it.
    pub fn init(config: &TrainingConfig<T>) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_INIT));
        let sae = SaeStack::random(&config.layer_dims, config.init_mode, &mut rng)?;
        let rbm = Rbm::random(sae.out_dim(), config.code_bits, config.init_mode, &mut rng)
            .with_beta(config.beta)?
            .with_cd_steps(config.cd_steps)?;
        Ok(Model {
            sae,
            rbm,
            norm_stats: identity_stats(config.input_dim()),
            config: config.clone(),
            format_version: FORMAT_VERSION,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.sae.in_dim()
    }

    pub fn code_bits(&self) -> usize {
        self.rbm.h_dim()
    }

    pub fn check_invariants(&self) -> Result<()> {
        check_len("rbm visible units vs autoencoder output", self.sae.out_dim(), self.rbm.v_dim())?;
        check_len("rbm hidden units vs code_bits", self.config.code_bits, self.rbm.h_dim())?;
        check_len("normalization width", self.sae.in_dim(), self.norm_stats.dim())?;
        if self.sae.dims() != self.config.layer_dims {
            return Err(Error::Format(format!(
                "stack dims {:?} disagree with config {:?}",
                self.sae.dims(),
                self.config.layer_dims
            )));
        }
        Ok(())
    }

    /// Raw feature row to hash code: normalize, encode, threshold, hash.
    pub fn encode(&self, x: ArrayView1<'_, T>) -> Result<HashCode> {
        let x = self.norm_stats.apply(x)?;
        let v = self.sae.encode(x.view())?;
        self.rbm.hash(binarize_pm(v.view()).view())
    }

    /// Encodes every row of a raw (unnormalized) feature matrix.
    pub fn encode_all(&self, data: &FeatureMatrix<T>) -> Result<Vec<HashCode>> {
        check_len("feature dimension", self.input_dim(), data.dim())?;
        let x = self.norm_stats.apply_matrix(data.values())?;
        self.encode_normalized(&x)
    }

    /// Same as [`Model::encode_all`] for rows that are already normalized.
    pub fn encode_normalized(&self, x: &Array2<T>) -> Result<Vec<HashCode>> {
        let bits = binarize_batch(&self.sae.encode_batch(x)?);
        bits.axis_iter(Axis(0)).map(|v| self.rbm.hash(v)).collect()
    }

    /// Final autoencoder layer outputs for already-normalized rows.
    pub fn sae_outputs(&self, x: &Array2<T>) -> Result<Array2<T>> {
        self.sae.encode_batch(x)
    }
}
