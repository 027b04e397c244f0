//! Test-only data generators and reference evaluators. The evaluators use
//! plain nested loops over `f64` and never call into the library's math.

#![allow(dead_code)]
// The oracles index explicitly so they read like the formulas they check.
#![allow(clippy::needless_range_loop)]

use deephash::features::FeatureMatrix;
use deephash::rbm::Rbm;
use deephash::sae::SaeLayer;
use deephash::DecorrelationMode;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two unit-variance Gaussian clusters in `dim` dimensions with means
/// `+2 * 1` (label 1) and `-2 * 1` (label 0), alternating rows.
pub fn two_clusters(rows: usize, dim: usize, seed: u64) -> FeatureMatrix<f64> {
    let mut r = rng(seed);
    let mut values = Array2::zeros((rows, dim));
    let mut labels = Vec::with_capacity(rows);
    for i in 0..rows {
        let label = (i % 2) as i32;
        let mean = if label == 1 { 2.0 } else { -2.0 };
        for j in 0..dim {
            let z: f64 = r.sample(StandardNormal);
            values[[i, j]] = mean + z;
        }
        labels.push(label);
    }
    FeatureMatrix::new(values, Some(labels)).unwrap()
}

/// 200 training rows and 50 query rows of the two-cluster data.
pub fn cluster_split(seed: u64) -> (FeatureMatrix<f64>, FeatureMatrix<f64>) {
    two_clusters(250, 32, seed).split_at(200).unwrap()
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || r.random_range(-scale..scale))
}

pub fn random_layer(r: &mut ChaCha8Rng, p: usize, q: usize) -> SaeLayer<f64> {
    SaeLayer::from_parts(
        random_matrix(r, q, p, 0.8),
        random_matrix(r, q, 1, 0.5).column(0).to_owned(),
        random_matrix(r, p, q, 0.8),
        random_matrix(r, p, 1, 0.5).column(0).to_owned(),
    )
    .unwrap()
}

pub fn random_binary(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || if r.random::<bool>() { 1.0 } else { 0.0 })
}

pub fn random_rbm(r: &mut ChaCha8Rng, v: usize, h: usize, beta: f64) -> Rbm<f64> {
    let mut rbm = Rbm::zeros(v, h).with_beta(beta).unwrap();
    rbm.w = random_matrix(r, h, v, 0.6);
    rbm.vis_bias = random_matrix(r, v, 1, 0.4).column(0).to_owned();
    rbm.hid_bias = random_matrix(r, h, 1, 0.4).column(0).to_owned();
    rbm
}

/// Balance plus decorrelation penalty, term by term.
pub fn direct_penalty(codes: &[Vec<f64>], lambda: f64, mu: f64, mode: DecorrelationMode) -> f64 {
    let n = codes.len();
    let q = codes[0].len();
    let mut balance = 0.0;
    for i in 0..q {
        let s: f64 = (0..n).map(|k| codes[k][i]).sum();
        balance += s * s;
    }
    let mut decor = 0.0;
    match mode {
        DecorrelationMode::Batch => {
            for i in 0..q {
                for j in 0..q {
                    let mut c = 0.0;
                    for row in codes {
                        c += row[i] * row[j];
                    }
                    c /= n as f64;
                    if i == j {
                        c -= 1.0;
                    }
                    decor += c * c;
                }
            }
        }
        DecorrelationMode::PerSample => {
            for row in codes {
                for i in 0..q {
                    for j in 0..q {
                        let mut c = row[i] * row[j] / n as f64;
                        if i == j {
                            c -= 1.0;
                        }
                        decor += c * c;
                    }
                }
            }
        }
    }
    0.5 * lambda * balance + 0.5 * mu * decor
}

/// Regularized autoencoder objective, term by term.
pub fn direct_sae_objective(layer: &SaeLayer<f64>, batch: &Array2<f64>, lambda: f64, mu: f64, mode: DecorrelationMode) -> f64 {
    let (q, p) = layer.enc_w.dim();
    let mut codes = Vec::new();
    let mut recon = 0.0;
    for x in batch.rows() {
        let v: Vec<f64> = (0..q)
            .map(|i| {
                let mut u = layer.enc_b[i];
                for j in 0..p {
                    u += layer.enc_w[[i, j]] * x[j];
                }
                u.tanh()
            })
            .collect();
        for j in 0..p {
            let mut u = layer.dec_b[j];
            for i in 0..q {
                u += layer.dec_w[[j, i]] * v[i];
            }
            let e = u.tanh() - x[j];
            recon += e * e;
        }
        codes.push(v);
    }
    0.5 * recon + direct_penalty(&codes, lambda, mu, mode)
}

/// Penalty on the RBM's surrogate codes `(tanh(beta (W v + b)) + 1) / 2`, term by term.
pub fn direct_rbm_penalty(rbm: &Rbm<f64>, batch: &Array2<f64>, lambda: f64, mu: f64, mode: DecorrelationMode) -> f64 {
    let (h, v) = rbm.w.dim();
    let codes: Vec<Vec<f64>> = batch
        .rows()
        .into_iter()
        .map(|x| {
            (0..h)
                .map(|j| {
                    let mut u = rbm.hid_bias[j];
                    for i in 0..v {
                        u += rbm.w[[j, i]] * x[i];
                    }
                    ((rbm.beta * u).tanh() + 1.0) / 2.0
                })
                .collect()
        })
        .collect();
    direct_penalty(&codes, lambda, mu, mode)
}

/// Central differences of `f` with respect to every entry of `params`.
pub fn central_differences(params: &mut [f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + step;
        let up = f(params);
        params[i] = orig - step;
        let down = f(params);
        params[i] = orig;
        out.push((up - down) / (2.0 * step));
    }
    out
}

/// Relative error when `|expected| > 1e-8`, otherwise absolute at `1e-8`.
pub fn gradient_matches(analytic: f64, numeric: f64, rel_tol: f64) -> bool {
    if analytic.abs() <= 1e-8 && numeric.abs() <= 1e-8 {
        return (analytic - numeric).abs() <= 1e-8;
    }
    let denom = analytic.abs().max(numeric.abs());
    (analytic - numeric).abs() / denom <= rel_tol
}

pub fn sae_params(layer: &SaeLayer<f64>) -> Vec<f64> {
    layer.enc_w.iter().chain(&layer.enc_b).chain(&layer.dec_w).chain(&layer.dec_b).copied().collect()
}

pub fn sae_from_params(template: &SaeLayer<f64>, p: &[f64]) -> SaeLayer<f64> {
    let mut l = template.clone();
    let mut it = p.iter().copied();
    for x in l.enc_w.iter_mut().chain(l.enc_b.iter_mut()).chain(l.dec_w.iter_mut()).chain(l.dec_b.iter_mut()) {
        *x = it.next().unwrap();
    }
    l
}

pub fn rbm_params(rbm: &Rbm<f64>) -> Vec<f64> {
    rbm.w.iter().chain(&rbm.vis_bias).chain(&rbm.hid_bias).copied().collect()
}

pub fn rbm_from_params(template: &Rbm<f64>, p: &[f64]) -> Rbm<f64> {
    let mut r = template.clone();
    let mut it = p.iter().copied();
    for x in r.w.iter_mut().chain(r.vis_bias.iter_mut()).chain(r.hid_bias.iter_mut()) {
        *x = it.next().unwrap();
    }
    r
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// All binary vectors of length `n`; bit `i` of the index is entry `i`.
pub fn binary_states(n: usize) -> Vec<Vec<f64>> {
    (0..1usize << n).map(|s| (0..n).map(|i| ((s >> i) & 1) as f64).collect()).collect()
}

pub fn direct_energy(rbm: &Rbm<f64>, v: &[f64], h: &[f64]) -> f64 {
    let mut e = 0.0;
    for (i, &vi) in v.iter().enumerate() {
        e -= rbm.vis_bias[i] * vi;
    }
    for (j, &hj) in h.iter().enumerate() {
        e -= rbm.hid_bias[j] * hj;
        for (i, &vi) in v.iter().enumerate() {
            e -= hj * rbm.w[[j, i]] * vi;
        }
    }
    e
}

/// Unnormalized joint weights `exp(-E(v, h))` for every `(v, h)` pair.
pub struct Enumeration {
    pub vs: Vec<Vec<f64>>,
    pub hs: Vec<Vec<f64>>,
    pub weight: Vec<Vec<f64>>,
    pub z: f64,
}

impl Enumeration {
    pub fn new(rbm: &Rbm<f64>) -> Self {
        let (h, v) = rbm.w.dim();
        let vs = binary_states(v);
        let hs = binary_states(h);
        let weight: Vec<Vec<f64>> = vs
            .iter()
            .map(|vv| hs.iter().map(|hh| (-direct_energy(rbm, vv, hh)).exp()).collect())
            .collect();
        let z = weight.iter().flatten().sum();
        Enumeration { vs, hs, weight, z }
    }

    fn index(states: &[Vec<f64>], x: &[f64]) -> usize {
        states.iter().position(|s| s.as_slice() == x).expect("binary state")
    }

    pub fn p_h_given_v(&self, v: &[f64]) -> Vec<f64> {
        let row = &self.weight[Self::index(&self.vs, v)];
        let total: f64 = row.iter().sum();
        (0..self.hs[0].len())
            .map(|j| self.hs.iter().zip(row).filter(|(h, _)| h[j] == 1.0).map(|(_, w)| w).sum::<f64>() / total)
            .collect()
    }

    pub fn p_v_given_h(&self, h: &[f64]) -> Vec<f64> {
        let hi = Self::index(&self.hs, h);
        let total: f64 = self.weight.iter().map(|row| row[hi]).sum();
        (0..self.vs[0].len())
            .map(|i| self.vs.iter().zip(&self.weight).filter(|(v, _)| v[i] == 1.0).map(|(_, row)| row[hi]).sum::<f64>() / total)
            .collect()
    }

    pub fn mean_log_likelihood(&self, batch: &Array2<f64>) -> f64 {
        let mut total = 0.0;
        for row in batch.rows() {
            let v: Vec<f64> = row.to_vec();
            let marginal: f64 = self.weight[Self::index(&self.vs, &v)].iter().sum();
            total += (marginal / self.z).ln();
        }
        total / batch.nrows() as f64
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Settings shared by the end-to-end checks on the two-cluster data.
pub fn cluster_config(seed: u64) -> deephash::TrainingConfig<f64> {
    let mut c = deephash::TrainingConfig::new(vec![32, 16, 8], 8);
    c.outer_iters = 5;
    c.seed = seed;
    c.init_mode = deephash::InitMode::Symmetric;
    c.epochs = 40;
    c.batch_size = 5;
    c
}

/// Components where the analytic layer gradient disagrees with central
/// differences of the direct objective evaluator.
pub fn sae_gradient_mismatches(
    layer: &SaeLayer<f64>,
    batch: &Array2<f64>,
    lambda: f64,
    mu: f64,
    mode: DecorrelationMode,
) -> Vec<(usize, f64, f64)> {
    let c = deephash::Constraints::new(lambda, mu, mode).unwrap();
    let g = layer.gradients(batch, &c).unwrap();
    let analytic: Vec<f64> = g.d_enc_w.iter().chain(&g.d_enc_b).chain(&g.d_dec_w).chain(&g.d_dec_b).copied().collect();
    let mut p = sae_params(layer);
    let numeric = central_differences(&mut p, 1e-5, |q| {
        direct_sae_objective(&sae_from_params(layer, q), batch, lambda, mu, mode)
    });
    mismatches(&analytic, &numeric)
}

pub fn rbm_penalty_mismatches(
    rbm: &Rbm<f64>,
    batch: &Array2<f64>,
    lambda: f64,
    mu: f64,
    mode: DecorrelationMode,
) -> Vec<(usize, f64, f64)> {
    let c = deephash::Constraints::new(lambda, mu, mode).unwrap();
    let analytic = rbm.penalty_gradients(batch, &c).unwrap().flatten();
    let mut p = rbm_params(rbm);
    let numeric = central_differences(&mut p, 1e-5, |q| {
        direct_rbm_penalty(&rbm_from_params(rbm, q), batch, lambda, mu, mode)
    });
    mismatches(&analytic, &numeric)
}

fn mismatches(analytic: &[f64], numeric: &[f64]) -> Vec<(usize, f64, f64)> {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .enumerate()
        .filter(|(_, (&a, &n))| !gradient_matches(a, n, 1e-4))
        .map(|(i, (&a, &n))| (i, a, n))
        .collect()
}

pub fn random_code(r: &mut ChaCha8Rng, k: usize) -> deephash::HashCode {
    deephash::HashCode::from_bits((0..k).map(|_| r.random::<bool>()))
}

/// Bit-by-bit Hamming distance.
pub fn naive_hamming(a: &deephash::HashCode, b: &deephash::HashCode) -> u32 {
    a.bits().zip(b.bits()).filter(|(x, y)| x != y).count() as u32
}

/// Full sort of `(distance, id)` over every code.
pub fn naive_ranking(codes: &[deephash::HashCode], ids: &[u64], q: &deephash::HashCode) -> Vec<(u32, u64)> {
    let mut all: Vec<(u32, u64)> = codes.iter().zip(ids).map(|(c, &id)| (naive_hamming(c, q), id)).collect();
    all.sort();
    all
}

/// Checks `topk` and `radius_search` against the full-sort oracle on one
/// random instance; returns a description of the first disagreement.
pub fn search_instance_disagreement(r: &mut ChaCha8Rng, k: usize) -> Option<String> {
    use deephash::search::HammingIndex;
    let n = r.random_range(1..=256);
    let codes: Vec<_> = (0..n).map(|_| random_code(r, k)).collect();
    // shuffled, non-contiguous ids so ordering by id is exercised
    let ids: Vec<u64> = (0..n as u64).map(|i| (i * 7919) % 100_003).collect();
    let index = HammingIndex::new(codes.clone(), ids.clone(), None).unwrap();
    let q = random_code(r, k);
    let oracle = naive_ranking(&codes, &ids, &q);
    let m = r.random_range(1..=n + 3);
    let top: Vec<(u32, u64)> = index.topk(&q, m).unwrap().iter().map(|x| (x.distance, x.id)).collect();
    let want: Vec<(u32, u64)> = oracle.iter().take(m).copied().collect();
    if top != want {
        return Some(format!("topk n={n} k={k} m={m}"));
    }
    let radius = r.random_range(0..=k as u32);
    let hits: Vec<(u32, u64)> = index.radius_search(&q, radius).unwrap().iter().map(|x| (x.distance, x.id)).collect();
    let want: Vec<(u32, u64)> = oracle.iter().filter(|x| x.0 <= radius).copied().collect();
    if hits != want {
        return Some(format!("radius n={n} k={k} radius={radius}"));
    }
    None
}

/// Checks symmetry, identity of indiscernibles and the triangle inequality
/// on one random triple.
pub fn metric_triple_holds(r: &mut ChaCha8Rng) -> bool {
    let k = r.random_range(1..=130);
    let (a, b, c) = (random_code(r, k), random_code(r, k), random_code(r, k));
    let d = |x: &deephash::HashCode, y: &deephash::HashCode| x.hamming(y).unwrap();
    d(&a, &b) == d(&b, &a)
        && d(&a, &a) == 0
        && ((d(&a, &b) == 0) == (a == b))
        && d(&a, &c) <= d(&a, &b) + d(&b, &c)
        && d(&a, &b) == naive_hamming(&a, &b)
}
