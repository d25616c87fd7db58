//! The prediction network: a symmetric denoising autoencoder whose latent
//! code feeds both a decoder and a linear Cox risk head.
//!
//! Architecture (one hidden layer each side of the code layer, equal width):
//!
//! ```text
//! x (d_p) --mask--> hidden (ReLU) --> latent (ReLU, d_h) --> hidden (ReLU) --> reconstruction (linear, d_p)
//!                                        |
//!                                        +--> risk = w' * latent   (linear, no bias)
//! ```
//!
//! Input corruption zeroes a random fraction `m` of the inputs (no inverse
//! scaling of survivors); a fresh mask is drawn at every backpropagation
//! pass and inference applies no corruption. The training loss is
//!
//! `alpha * mean_i ||x_i - recon_i||^2 + (1 - alpha) * L_cox(batch) + l1 * sum |weights|`
//!
//! where `L_cox` is the negative log Cox partial likelihood with risk sets
//! formed within the batch, and the L1 term covers weight matrices and the
//! risk head but not biases. Gradients are exact analytic backpropagation;
//! optimization is Adam with the canonical constants.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream;
use crate::survival::{cox_gradient_wrt_risks, cox_neg_log_partial_likelihood, SurvivalRecord};

/// Layer sizes and loss hyperparameters of the network.
///
/// `gamma` (the survival-loss weight) is always `1 - alpha` and is exposed
/// as a method rather than stored, so the identity holds exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden_units: usize,
    pub latent_dim: usize,
    pub dropout_rate: f64,
    pub alpha: f64,
    pub l1_penalty: f64,
    pub learning_rate: f64,
}

impl NetworkSpec {
    pub fn gamma(&self) -> f64 {
        1.0 - self.alpha
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.hidden_units == 0 || self.input_dim == 0 {
            return Err(Error::InvalidConfig("layer dimensions must be positive".into()));
        }
        if self.latent_dim >= self.input_dim {
            return Err(Error::InvalidConfig(format!(
                "latent_dim ({}) must be smaller than input_dim ({}) for an undercomplete code",
                self.latent_dim, self.input_dim
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !self.l1_penalty.is_finite() || self.l1_penalty < 0.0 {
            return Err(Error::InvalidConfig("l1_penalty must be finite and >= 0".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// All trainable tensors. Also reused for gradients and Adam moments, which
/// share the shapes. Weight matrices are stored input-major (rows = inputs),
/// so a batch forward is a plain `x.dot(w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub enc_w1: Array2<f64>, // d_p x h
    pub enc_b1: Array1<f64>, // h
    pub enc_w2: Array2<f64>, // h x d_h
    pub enc_b2: Array1<f64>, // d_h
    pub dec_w1: Array2<f64>, // d_h x h
    pub dec_b1: Array1<f64>, // h
    pub dec_w2: Array2<f64>, // h x d_p
    pub dec_b2: Array1<f64>, // d_p
    pub risk_w: Array1<f64>, // d_h (no bias: unidentifiable under the partial likelihood)
}

impl Params {
    fn zeros(spec: &NetworkSpec) -> Self {
        let (d, h, k) = (spec.input_dim, spec.hidden_units, spec.latent_dim);
        Self {
            enc_w1: Array2::zeros((d, h)),
            enc_b1: Array1::zeros(h),
            enc_w2: Array2::zeros((h, k)),
            enc_b2: Array1::zeros(k),
            dec_w1: Array2::zeros((k, h)),
            dec_b1: Array1::zeros(h),
            dec_w2: Array2::zeros((h, d)),
            dec_b2: Array1::zeros(d),
            risk_w: Array1::zeros(k),
        }
    }

    /// He-style uniform initialization scaled by fan-in; hidden-layer biases
    /// start slightly positive so ReLU units begin in their active region.
    fn init(spec: &NetworkSpec, rng: &mut ChaCha8Rng) -> Self {
        let mut params = Self::zeros(spec);
        let decoder_scale: f64 = std::env::var("DECODER_INIT_SCALE")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(1.0);
        for (w, fan_in, scale) in [
            (&mut params.enc_w1, spec.input_dim, 1.0),
            (&mut params.enc_w2, spec.hidden_units, 1.0),
            (&mut params.dec_w1, spec.latent_dim, decoder_scale),
            (&mut params.dec_w2, spec.hidden_units, decoder_scale),
        ] {
            let limit = scale * (6.0 / fan_in as f64).sqrt();
            for x in w.iter_mut() {
                *x = rng.gen_range(-limit..limit);
            }
        }
        let limit = (6.0 / spec.latent_dim as f64).sqrt();
        for x in params.risk_w.iter_mut() {
            *x = rng.gen_range(-limit..limit);
        }
        params.enc_b1.fill(RELU_BIAS_INIT);
        params.enc_b2.fill(RELU_BIAS_INIT);
        params.dec_b1.fill(RELU_BIAS_INIT);
        params
    }

    pub fn slices(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("enc_w1", self.enc_w1.as_slice().unwrap()),
            ("enc_b1", self.enc_b1.as_slice().unwrap()),
            ("enc_w2", self.enc_w2.as_slice().unwrap()),
            ("enc_b2", self.enc_b2.as_slice().unwrap()),
            ("dec_w1", self.dec_w1.as_slice().unwrap()),
            ("dec_b1", self.dec_b1.as_slice().unwrap()),
            ("dec_w2", self.dec_w2.as_slice().unwrap()),
            ("dec_b2", self.dec_b2.as_slice().unwrap()),
            ("risk_w", self.risk_w.as_slice().unwrap()),
        ]
    }

    pub fn slices_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("enc_w1", self.enc_w1.as_slice_mut().unwrap()),
            ("enc_b1", self.enc_b1.as_slice_mut().unwrap()),
            ("enc_w2", self.enc_w2.as_slice_mut().unwrap()),
            ("enc_b2", self.enc_b2.as_slice_mut().unwrap()),
            ("dec_w1", self.dec_w1.as_slice_mut().unwrap()),
            ("dec_b1", self.dec_b1.as_slice_mut().unwrap()),
            ("dec_w2", self.dec_w2.as_slice_mut().unwrap()),
            ("dec_b2", self.dec_b2.as_slice_mut().unwrap()),
            ("risk_w", self.risk_w.as_slice_mut().unwrap()),
        ]
    }

    fn shape_of(&self, name: &str) -> Option<Vec<usize>> {
        let shape = match name {
            "enc_w1" => self.enc_w1.shape().to_vec(),
            "enc_b1" => self.enc_b1.shape().to_vec(),
            "enc_w2" => self.enc_w2.shape().to_vec(),
            "enc_b2" => self.enc_b2.shape().to_vec(),
            "dec_w1" => self.dec_w1.shape().to_vec(),
            "dec_b1" => self.dec_b1.shape().to_vec(),
            "dec_w2" => self.dec_w2.shape().to_vec(),
            "dec_b2" => self.dec_b2.shape().to_vec(),
            "risk_w" => self.risk_w.shape().to_vec(),
            _ => return None,
        };
        Some(shape)
    }

    /// Sum of absolute weights (weight matrices and risk head; biases excluded).
    fn l1_weight_mass(&self) -> f64 {
        self.enc_w1.iter().map(|w| w.abs()).sum::<f64>()
            + self.enc_w2.iter().map(|w| w.abs()).sum::<f64>()
            + self.dec_w1.iter().map(|w| w.abs()).sum::<f64>()
            + self.dec_w2.iter().map(|w| w.abs()).sum::<f64>()
            + self.risk_w.iter().map(|w| w.abs()).sum::<f64>()
    }
}

/// Adam accumulator state (first/second moments and timestep).
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Params,
    pub second_moment: Params,
    pub timestep: u64,
}

const RELU_BIAS_INIT: f64 = 0.05;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// The network with its spec, parameters and optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub spec: NetworkSpec,
    pub params: Params,
    pub adam: AdamState,
}

/// Output of a single-sample forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub reconstruction: Vec<f64>,
    pub risk: f64,
    pub latent: Vec<f64>,
}

/// Intermediate batch activations kept for backpropagation.
struct BatchCache {
    corrupted: Array2<f64>,
    pre_h1: Array2<f64>,
    h1: Array2<f64>,
    pre_latent: Array2<f64>,
    latent: Array2<f64>,
    risks: Vec<f64>,
    pre_h3: Array2<f64>,
    h3: Array2<f64>,
    reconstruction: Array2<f64>,
}

fn relu_inplace(a: &mut Array2<f64>) {
    a.mapv_inplace(|x| if x > 0.0 { x } else { 0.0 });
}

impl NetworkModel {
    /// Fresh model with seeded He-uniform weights and zeroed Adam state.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = stream(seed, "net-init", &[]);
        let params = Params::init(&spec, &mut rng);
        let adam = AdamState {
            first_moment: Params::zeros(&spec),
            second_moment: Params::zeros(&spec),
            timestep: 0,
        };
        Ok(Self { spec, params, adam })
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.input_dim {
            return Err(Error::InvalidInput(format!(
                "input has length {}, expected {}",
                x.len(),
                self.spec.input_dim
            )));
        }
        Ok(())
    }

    /// Single-sample forward pass.
    ///
    /// In training mode a fraction `dropout_rate` of inputs is zeroed, using
    /// `mask` when supplied (true = keep) or drawing a fresh mask from `rng`.
    /// Inference mode applies no corruption regardless of `mask`.
    pub fn forward(
        &self,
        x: &[f64],
        mask: Option<&[bool]>,
        training: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<ForwardOutput> {
        self.check_input(x)?;
        if let Some(m) = mask {
            if m.len() != x.len() {
                return Err(Error::InvalidInput(format!(
                    "mask has length {}, expected {}",
                    m.len(),
                    x.len()
                )));
            }
        }
        let row = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("shape");
        let masks = if training {
            let mut m = Array2::<f64>::ones((1, x.len()));
            match mask {
                Some(bits) => {
                    for (slot, &keep) in m.iter_mut().zip(bits) {
                        *slot = if keep { 1.0 } else { 0.0 };
                    }
                }
                None => {
                    for slot in m.iter_mut() {
                        if rng.gen_range(0.0..1.0) < self.spec.dropout_rate {
                            *slot = 0.0;
                        }
                    }
                }
            }
            Some(m)
        } else {
            None
        };
        let cache = self.forward_batch(&row, masks.as_ref());
        Ok(ForwardOutput {
            reconstruction: cache.reconstruction.row(0).to_vec(),
            risk: cache.risks[0],
            latent: cache.latent.row(0).to_vec(),
        })
    }

    /// Inference-mode risk score `w' * phi(x)` (no corruption, RNG-free).
    pub fn predict_risk(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let row = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("shape");
        Ok(self.forward_batch(&row, None).risks[0])
    }

    /// Inference-mode latent code `phi(x)`.
    pub fn latent_code(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let row = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("shape");
        Ok(self.forward_batch(&row, None).latent.row(0).to_vec())
    }

    /// Inference-mode risks for every row of a feature matrix.
    pub fn predict_risks(&self, features: &Array2<f64>) -> Result<Vec<f64>> {
        self.check_batch(features)?;
        Ok(self.forward_batch(features, None).risks)
    }

    /// Inference-mode latent codes, one row per subject.
    pub fn latent_codes(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_batch(features)?;
        Ok(self.forward_batch(features, None).latent)
    }

    fn check_batch(&self, features: &Array2<f64>) -> Result<()> {
        if features.ncols() != self.spec.input_dim {
            return Err(Error::InvalidInput(format!(
                "feature matrix has {} columns, expected {}",
                features.ncols(),
                self.spec.input_dim
            )));
        }
        Ok(())
    }

    fn forward_batch(&self, x: &Array2<f64>, masks: Option<&Array2<f64>>) -> BatchCache {
        let corrupted = match masks {
            Some(m) => x * m,
            None => x.clone(),
        };
        let pre_h1 = &corrupted.dot(&self.params.enc_w1) + &self.params.enc_b1;
        let mut h1 = pre_h1.clone();
        relu_inplace(&mut h1);
        let pre_latent = &h1.dot(&self.params.enc_w2) + &self.params.enc_b2;
        let mut latent = pre_latent.clone();
        relu_inplace(&mut latent);
        let risks = latent.dot(&self.params.risk_w).to_vec();
        let pre_h3 = &latent.dot(&self.params.dec_w1) + &self.params.dec_b1;
        let mut h3 = pre_h3.clone();
        relu_inplace(&mut h3);
        let reconstruction = &h3.dot(&self.params.dec_w2) + &self.params.dec_b2;
        BatchCache {
            corrupted,
            pre_h1,
            h1,
            pre_latent,
            latent,
            risks,
            pre_h3,
            h3,
            reconstruction,
        }
    }

    /// Hybrid training loss of a batch under the given corruption masks
    /// (`None` = no corruption). Reconstruction is judged against the
    /// uncorrupted inputs; the survival term forms risk sets within the
    /// batch and is zero (with a warning) for an event-free batch.
    pub fn hybrid_loss(
        &self,
        x: &Array2<f64>,
        outcomes: &[SurvivalRecord],
        masks: Option<&Array2<f64>>,
    ) -> Result<f64> {
        let cache = self.prepare_batch(x, outcomes, masks)?;
        Ok(self.loss_from_cache(x, outcomes, &cache)?)
    }

    fn prepare_batch(
        &self,
        x: &Array2<f64>,
        outcomes: &[SurvivalRecord],
        masks: Option<&Array2<f64>>,
    ) -> Result<BatchCache> {
        self.check_batch(x)?;
        if x.nrows() != outcomes.len() {
            return Err(Error::InvalidInput(format!(
                "batch has {} rows but {} outcomes",
                x.nrows(),
                outcomes.len()
            )));
        }
        if let Some(m) = masks {
            if m.shape() != x.shape() {
                return Err(Error::InvalidInput("mask shape must match the batch".into()));
            }
        }
        Ok(self.forward_batch(x, masks))
    }

    fn loss_from_cache(
        &self,
        x: &Array2<f64>,
        outcomes: &[SurvivalRecord],
        cache: &BatchCache,
    ) -> Result<f64> {
        let n = x.nrows() as f64;
        let diff = &cache.reconstruction - x;
        let recon = diff.iter().map(|d| d * d).sum::<f64>() / n;
        let survival = if outcomes.iter().any(|o| o.event) {
            cox_neg_log_partial_likelihood(&cache.risks, outcomes)?
        } else {
            log::warn!("batch has no events; survival loss term is zero");
            0.0
        };
        Ok(self.spec.alpha * recon
            + self.spec.gamma() * survival
            + self.spec.l1_penalty * self.params.l1_weight_mass())
    }

    /// Loss and exact analytic gradients of [`Self::hybrid_loss`] for every
    /// parameter (the L1 subgradient is 0 at 0).
    pub fn backward(
        &self,
        x: &Array2<f64>,
        outcomes: &[SurvivalRecord],
        masks: Option<&Array2<f64>>,
    ) -> Result<(f64, Params)> {
        let cache = self.prepare_batch(x, outcomes, masks)?;
        let loss = self.loss_from_cache(x, outcomes, &cache)?;
        let n = x.nrows() as f64;
        let alpha = self.spec.alpha;
        let gamma = self.spec.gamma();
        let l1 = self.spec.l1_penalty;

        // d loss / d reconstruction
        let g_recon = (&cache.reconstruction - x) * (2.0 * alpha / n);
        // d loss / d risks
        let g_risk: Array1<f64> = if outcomes.iter().any(|o| o.event) {
            let g = cox_gradient_wrt_risks(&cache.risks, outcomes)?;
            Array1::from_vec(g) * gamma
        } else {
            Array1::zeros(x.nrows())
        };

        let mut grads = Params::zeros(&self.spec);

        // decoder output layer
        grads.dec_w2 = cache.h3.t().dot(&g_recon);
        grads.dec_b2 = g_recon.sum_axis(Axis(0));
        // decoder hidden layer
        let mut g_a3 = g_recon.dot(&self.params.dec_w2.t());
        g_a3.zip_mut_with(&cache.pre_h3, |g, &a| {
            if a <= 0.0 {
                *g = 0.0;
            }
        });
        grads.dec_w1 = cache.latent.t().dot(&g_a3);
        grads.dec_b1 = g_a3.sum_axis(Axis(0));
        // latent: decoder path plus risk head path
        let mut g_latent = g_a3.dot(&self.params.dec_w1.t());
        for (mut row, &g) in g_latent.rows_mut().into_iter().zip(g_risk.iter()) {
            row.scaled_add(g, &self.params.risk_w);
        }
        grads.risk_w = cache.latent.t().dot(&g_risk);
        // encoder code layer
        let mut g_a2 = g_latent;
        g_a2.zip_mut_with(&cache.pre_latent, |g, &a| {
            if a <= 0.0 {
                *g = 0.0;
            }
        });
        grads.enc_w2 = cache.h1.t().dot(&g_a2);
        grads.enc_b2 = g_a2.sum_axis(Axis(0));
        // encoder hidden layer
        let mut g_a1 = g_a2.dot(&self.params.enc_w2.t());
        g_a1.zip_mut_with(&cache.pre_h1, |g, &a| {
            if a <= 0.0 {
                *g = 0.0;
            }
        });
        grads.enc_w1 = cache.corrupted.t().dot(&g_a1);
        grads.enc_b1 = g_a1.sum_axis(Axis(0));

        // L1 subgradients on weights (not biases)
        for (w, g) in [
            (&self.params.enc_w1, &mut grads.enc_w1),
            (&self.params.enc_w2, &mut grads.enc_w2),
            (&self.params.dec_w1, &mut grads.dec_w1),
            (&self.params.dec_w2, &mut grads.dec_w2),
        ] {
            g.zip_mut_with(w, |g, &w| *g += l1 * sign(w));
        }
        grads
            .risk_w
            .zip_mut_with(&self.params.risk_w, |g, &w| *g += l1 * sign(w));

        Ok((loss, grads))
    }

    /// One Adam step with the given gradients.
    pub fn adam_step(&mut self, grads: &Params) {
        self.adam.timestep += 1;
        let t = self.adam.timestep;
        let lr = self.spec.learning_rate;
        let params = self.params.slices_mut();
        let m_state = self.adam.first_moment.slices_mut();
        let v_state = self.adam.second_moment.slices_mut();
        let grad_slices = grads.slices();
        for ((((_, p), (_, m)), (_, v)), (_, g)) in params
            .into_iter()
            .zip(m_state)
            .zip(v_state)
            .zip(grad_slices)
        {
            adam_update(p, g, m, v, lr, t);
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn adam_update(param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, t: u64) {
    let bias1 = 1.0 - ADAM_BETA1.powi(t as i32);
    let bias2 = 1.0 - ADAM_BETA2.powi(t as i32);
    for i in 0..param.len() {
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * grad[i];
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        param[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// Training-run constants: epoch and batch counts plus the RNG seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 100, batch_size: 16, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig("batch_size must be >= 2".into()));
        }
        Ok(())
    }
}

/// A trained model together with its per-epoch mean training loss.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: NetworkModel,
    pub loss_trace: Vec<f64>,
}

/// Train a fresh network on a cohort.
///
/// Runs `epochs x ceil(n / batch_size)` Adam steps; subjects are reshuffled
/// each epoch and a fresh corruption mask is drawn for every pass, all from
/// streams derived from the config seed, so the run is bit-reproducible.
pub fn train(
    spec: &NetworkSpec,
    features: &Array2<f64>,
    outcomes: &[SurvivalRecord],
    config: &TrainConfig,
) -> Result<TrainedModel> {
    spec.validate()?;
    config.validate()?;
    let n = features.nrows();
    if n != outcomes.len() {
        return Err(Error::InvalidInput(format!(
            "feature rows ({n}) and outcomes ({}) differ",
            outcomes.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput("training needs at least 2 subjects".into()));
    }
    if n < config.batch_size {
        return Err(Error::InvalidInput(format!(
            "cohort size {n} is smaller than batch_size {}",
            config.batch_size
        )));
    }

    let mut model = NetworkModel::new(spec.clone(), config.seed)?;
    let mut loss_trace = Vec::with_capacity(config.epochs);
    let mut indices: Vec<usize> = (0..n).collect();

    for epoch in 0..config.epochs {
        let mut shuffle_rng = stream(config.seed, "net-shuffle", &[epoch as u64]);
        shuffle(&mut indices, &mut shuffle_rng);

        let mut epoch_loss = 0.0;
        let mut batches = 0.0;
        for (batch_index, chunk) in indices.chunks(config.batch_size).enumerate() {
            let x = features.select(Axis(0), chunk);
            let batch_outcomes: Vec<SurvivalRecord> =
                chunk.iter().map(|&i| outcomes[i].clone()).collect();
            let mut mask_rng =
                stream(config.seed, "net-mask", &[epoch as u64, batch_index as u64]);
            let masks = draw_masks(x.nrows(), spec.input_dim, spec.dropout_rate, &mut mask_rng);
            let (loss, grads) = model.backward(&x, &batch_outcomes, Some(&masks))?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "training loss became non-finite at epoch {epoch}"
                )));
            }
            model.adam_step(&grads);
            epoch_loss += loss;
            batches += 1.0;
        }
        loss_trace.push(epoch_loss / batches);
    }
    Ok(TrainedModel { model, loss_trace })
}

fn draw_masks(rows: usize, cols: usize, dropout: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut masks = Array2::<f64>::ones((rows, cols));
    if dropout > 0.0 {
        for slot in masks.iter_mut() {
            if rng.gen_range(0.0..1.0) < dropout {
                *slot = 0.0;
            }
        }
    }
    masks
}

/// Fisher-Yates with the seeded stream.
fn shuffle(indices: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..indices.len()).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
}

// ---------------------------------------------------------------------------
// Serialization: versioned JSON document plus a binary sidecar sharing the
// same schema. Round trips are bit-exact for finite tensors.
// ---------------------------------------------------------------------------

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MODEL_BINARY_MAGIC: &[u8; 16] = b"MOTIONSURV-MDL1\0";

#[derive(Debug, Serialize, Deserialize)]
struct TensorDoc {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    spec: NetworkSpec,
    adam_timestep: u64,
    tensors: Vec<TensorDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BinaryHeader {
    format_version: u32,
    spec: NetworkSpec,
    adam_timestep: u64,
    tensors: Vec<TensorHeader>,
}

impl NetworkModel {
    fn tensor_docs(&self) -> Vec<TensorDoc> {
        let mut docs = Vec::new();
        for (group, suffix) in [
            (&self.params, ""),
            (&self.adam.first_moment, ".adam_m"),
            (&self.adam.second_moment, ".adam_v"),
        ] {
            for (name, data) in group.slices() {
                docs.push(TensorDoc {
                    name: format!("{name}{suffix}"),
                    shape: group.shape_of(name).expect("known tensor"),
                    data: data.to_vec(),
                });
            }
        }
        docs
    }

    fn check_finite(&self) -> Result<()> {
        for (name, data) in self.params.slices() {
            if data.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical(format!("tensor {name} contains non-finite values")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        self.check_finite()?;
        let doc = ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            spec: self.spec.clone(),
            adam_timestep: self.adam.timestep,
            tensors: self.tensor_docs(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        doc.spec.validate()?;
        let mut model = NetworkModel {
            spec: doc.spec.clone(),
            params: Params::zeros(&doc.spec),
            adam: AdamState {
                first_moment: Params::zeros(&doc.spec),
                second_moment: Params::zeros(&doc.spec),
                timestep: doc.adam_timestep,
            },
        };
        for tensor in &doc.tensors {
            model.load_tensor(&tensor.name, &tensor.shape, &tensor.data)?;
        }
        Ok(model)
    }

    fn load_tensor(&mut self, name: &str, shape: &[usize], data: &[f64]) -> Result<()> {
        let (base, group) = if let Some(b) = name.strip_suffix(".adam_m") {
            (b, &mut self.adam.first_moment)
        } else if let Some(b) = name.strip_suffix(".adam_v") {
            (b, &mut self.adam.second_moment)
        } else {
            (name, &mut self.params)
        };
        let expected = group
            .shape_of(base)
            .ok_or_else(|| Error::InvalidInput(format!("unknown tensor {name}")))?;
        if expected != shape {
            return Err(Error::InvalidInput(format!(
                "tensor {name} has shape {shape:?}, expected {expected:?}"
            )));
        }
        let target = group
            .slices_mut()
            .into_iter()
            .find(|(n, _)| *n == base)
            .map(|(_, s)| s)
            .expect("shape_of succeeded");
        if target.len() != data.len() {
            return Err(Error::InvalidInput(format!(
                "tensor {name} has {} values, expected {}",
                data.len(),
                target.len()
            )));
        }
        target.copy_from_slice(data);
        Ok(())
    }

    /// Binary sidecar: magic, little-endian header length, JSON header
    /// (spec + tensor shapes), then contiguous little-endian f64 blocks in
    /// header order.
    pub fn to_binary(&self) -> Result<Vec<u8>> {
        self.check_finite()?;
        let docs = self.tensor_docs();
        let header = BinaryHeader {
            format_version: MODEL_FORMAT_VERSION,
            spec: self.spec.clone(),
            adam_timestep: self.adam.timestep,
            tensors: docs
                .iter()
                .map(|t| TensorHeader { name: t.name.clone(), shape: t.shape.clone() })
                .collect(),
        };
        let header_bytes = serde_json::to_vec(&header)?;
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_BINARY_MAGIC);
        out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
        out.extend_from_slice(&header_bytes);
        for tensor in &docs {
            for value in &tensor.data {
                out.extend_from_slice(&value.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 24 || &bytes[..16] != MODEL_BINARY_MAGIC {
            return Err(Error::InvalidInput("not a binary model file".into()));
        }
        let header_len = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
        let header_end = 24usize.checked_add(header_len)
            .ok_or_else(|| Error::InvalidInput("corrupt binary model header".into()))?;
        if bytes.len() < header_end {
            return Err(Error::InvalidInput("truncated binary model header".into()));
        }
        let header: BinaryHeader = serde_json::from_slice(&bytes[24..header_end])?;
        if header.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model format version {}",
                header.format_version
            )));
        }
        header.spec.validate()?;
        let mut model = NetworkModel {
            spec: header.spec.clone(),
            params: Params::zeros(&header.spec),
            adam: AdamState {
                first_moment: Params::zeros(&header.spec),
                second_moment: Params::zeros(&header.spec),
                timestep: header.adam_timestep,
            },
        };
        let mut offset = header_end;
        for tensor in &header.tensors {
            let count: usize = tensor.shape.iter().product();
            let end = offset + 8 * count;
            if bytes.len() < end {
                return Err(Error::InvalidInput(format!("truncated tensor {}", tensor.name)));
            }
            let data: Vec<f64> = bytes[offset..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            model.load_tensor(&tensor.name, &tensor.shape, &data)?;
            offset = end;
        }
        if offset != bytes.len() {
            return Err(Error::InvalidInput("trailing bytes after tensor data".into()));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> NetworkSpec {
        NetworkSpec {
            input_dim: 12,
            hidden_units: 8,
            latent_dim: 3,
            dropout_rate: 0.0,
            alpha: 0.5,
            l1_penalty: 1e-3,
            learning_rate: 1e-2,
        }
    }

    fn toy_batch(n: usize, d: usize, seed: u64) -> (Array2<f64>, Vec<SurvivalRecord>) {
        let mut rng = stream(seed, "toy-batch", &[]);
        let x = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
        let outcomes = (0..n)
            .map(|i| {
                SurvivalRecord::new(
                    format!("s{i}"),
                    rng.gen_range(1.0..50.0),
                    rng.gen_range(0.0..1.0) < 0.7,
                )
                .unwrap()
            })
            .collect();
        (x, outcomes)
    }

    #[test]
    fn spec_rejects_overcomplete_code() {
        let spec = NetworkSpec { latent_dim: 12, ..small_spec() };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn zero_weight_model_outputs_zeros() {
        let spec = small_spec();
        let mut model = NetworkModel::new(spec.clone(), 0).unwrap();
        model.params = Params::zeros(&spec);
        let x = vec![0.4; spec.input_dim];
        let mut rng = stream(0, "t", &[]);
        let out = model.forward(&x, None, false, &mut rng).unwrap();
        assert!(out.reconstruction.iter().all(|&v| v == 0.0));
        assert_eq!(out.risk, 0.0);
        assert!(out.latent.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn all_ones_mask_matches_inference() {
        let spec = NetworkSpec { dropout_rate: 0.4, ..small_spec() };
        let model = NetworkModel::new(spec.clone(), 3).unwrap();
        let x: Vec<f64> = (0..spec.input_dim).map(|i| 0.1 * i as f64 - 0.5).collect();
        let mask = vec![true; spec.input_dim];
        let mut rng = stream(1, "t", &[]);
        let trained = model.forward(&x, Some(&mask), true, &mut rng).unwrap();
        let inferred = model.forward(&x, None, false, &mut rng).unwrap();
        assert_eq!(trained.reconstruction, inferred.reconstruction);
        assert_eq!(trained.risk, inferred.risk);
    }

    #[test]
    fn forward_is_deterministic_for_fixed_mask() {
        let model = NetworkModel::new(small_spec(), 5).unwrap();
        let x: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let mask: Vec<bool> = (0..12).map(|i| i % 3 != 0).collect();
        let mut rng_a = stream(9, "t", &[]);
        let mut rng_b = stream(9, "t", &[]);
        let a = model.forward(&x, Some(&mask), true, &mut rng_a).unwrap();
        let b = model.forward(&x, Some(&mask), true, &mut rng_b).unwrap();
        assert_eq!(a.reconstruction, b.reconstruction);
        assert_eq!(a.risk, b.risk);
        assert_eq!(a.latent, b.latent);
    }

    #[test]
    fn predict_risk_ignores_dropout_rate() {
        let base = NetworkModel::new(small_spec(), 7).unwrap();
        let mut dropped = base.clone();
        dropped.spec.dropout_rate = 0.9;
        let x: Vec<f64> = (0..12).map(|i| 0.05 * i as f64).collect();
        assert_eq!(base.predict_risk(&x).unwrap(), dropped.predict_risk(&x).unwrap());
    }

    #[test]
    fn hybrid_loss_alpha_one_is_reconstruction_plus_l1() {
        let spec = NetworkSpec { alpha: 1.0, ..small_spec() };
        let model = NetworkModel::new(spec.clone(), 2).unwrap();
        let (x, outcomes) = toy_batch(6, spec.input_dim, 4);
        let loss = model.hybrid_loss(&x, &outcomes, None).unwrap();
        let mut recon_total = 0.0;
        for i in 0..x.nrows() {
            let mut rng = stream(0, "unused", &[]);
            let out = model
                .forward(x.row(i).as_slice().unwrap(), None, false, &mut rng)
                .unwrap();
            for (j, v) in out.reconstruction.iter().enumerate() {
                let d = v - x[[i, j]];
                recon_total += d * d;
            }
        }
        let recon = recon_total / x.nrows() as f64;
        let l1_term = spec.l1_penalty * model.params.l1_weight_mass();
        assert!((loss - (recon + l1_term)).abs() < 1e-10);
    }

    #[test]
    fn hybrid_loss_alpha_zero_is_cox_plus_l1() {
        let spec = NetworkSpec { alpha: 0.0, ..small_spec() };
        let model = NetworkModel::new(spec.clone(), 6).unwrap();
        let (x, outcomes) = toy_batch(6, spec.input_dim, 8);
        let loss = model.hybrid_loss(&x, &outcomes, None).unwrap();
        let risks = model.predict_risks(&x).unwrap();
        let cox = cox_neg_log_partial_likelihood(&risks, &outcomes).unwrap();
        let l1_term = spec.l1_penalty * model.params.l1_weight_mass();
        assert!((loss - (cox + l1_term)).abs() < 1e-10);
    }

    #[test]
    fn full_batch_survival_term_matches_standalone_cox() {
        // m = 0: the training path and the inference path see the same inputs
        let spec = NetworkSpec { alpha: 0.0, l1_penalty: 0.0, ..small_spec() };
        let model = NetworkModel::new(spec.clone(), 11).unwrap();
        let (x, outcomes) = toy_batch(10, spec.input_dim, 12);
        let loss = model.hybrid_loss(&x, &outcomes, None).unwrap();
        let standalone =
            cox_neg_log_partial_likelihood(&model.predict_risks(&x).unwrap(), &outcomes).unwrap();
        assert!((loss - standalone).abs() < 1e-12);
    }

    #[test]
    fn backward_alpha_one_risk_head_gradient_is_l1_only() {
        let spec = NetworkSpec { alpha: 1.0, ..small_spec() };
        let model = NetworkModel::new(spec.clone(), 13).unwrap();
        let (x, outcomes) = toy_batch(5, spec.input_dim, 14);
        let (_, grads) = model.backward(&x, &outcomes, None).unwrap();
        for (g, w) in grads.risk_w.iter().zip(model.params.risk_w.iter()) {
            assert_eq!(*g, spec.l1_penalty * sign(*w));
        }
    }

    /// Gradient check against central finite differences on the full hybrid
    /// loss. Instances are resampled until every ReLU pre-activation and
    /// weight is bounded away from zero, so the loss is smooth in the probed
    /// neighborhood.
    #[test]
    fn backward_matches_finite_differences() {
        let mut checked = 0;
        let mut attempt = 0;
        while checked < 5 {
            attempt += 1;
            assert!(attempt < 500, "could not find smooth instances");
            let spec = NetworkSpec {
                input_dim: 10,
                hidden_units: 6,
                latent_dim: 3,
                dropout_rate: 0.3,
                alpha: 0.6,
                l1_penalty: 1e-3,
                learning_rate: 1e-2,
            };
            let mut model = NetworkModel::new(spec.clone(), 100 + attempt).unwrap();
            let (x, outcomes) = toy_batch(5, spec.input_dim, 200 + attempt);
            let mut mask_rng = stream(300 + attempt, "mask", &[]);
            let masks = draw_masks(5, spec.input_dim, spec.dropout_rate, &mut mask_rng);
            if !instance_is_smooth(&model, &x, &masks) {
                continue;
            }
            let (_, grads) = model.backward(&x, &outcomes, Some(&masks)).unwrap();
            let grad_values: Vec<Vec<f64>> =
                grads.slices().iter().map(|(_, s)| s.to_vec()).collect();
            let h = 1e-5;
            let mut max_rel: f64 = 0.0;
            for tensor_ix in 0..grad_values.len() {
                for i in 0..grad_values[tensor_ix].len() {
                    let mut probe = |delta: f64| {
                        model.params.slices_mut()[tensor_ix].1[i] += delta;
                        let loss = model.hybrid_loss(&x, &outcomes, Some(&masks)).unwrap();
                        model.params.slices_mut()[tensor_ix].1[i] -= delta;
                        loss
                    };
                    let fd = (probe(h) - probe(-h)) / (2.0 * h);
                    let g = grad_values[tensor_ix][i];
                    let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
                    max_rel = max_rel.max(rel);
                }
            }
            assert!(max_rel < 1e-4, "max relative error {max_rel}");
            checked += 1;
        }
    }

    fn instance_is_smooth(model: &NetworkModel, x: &Array2<f64>, masks: &Array2<f64>) -> bool {
        let cache = model.forward_batch(x, Some(masks));
        let margin = 1e-3;
        let pre_ok = cache.pre_h1.iter().all(|a| a.abs() > margin)
            && cache.pre_latent.iter().all(|a| a.abs() > margin)
            && cache.pre_h3.iter().all(|a| a.abs() > margin);
        let weights_ok = model
            .params
            .slices()
            .iter()
            .filter(|(name, _)| !name.contains("_b"))
            .all(|(_, s)| s.iter().all(|w| w.abs() > margin));
        pre_ok && weights_ok
    }

    #[test]
    fn adam_step_with_zero_gradients_is_identity() {
        let spec = small_spec();
        let mut model = NetworkModel::new(spec.clone(), 21).unwrap();
        let before = model.params.clone();
        let zero_grads = Params::zeros(&spec);
        model.adam_step(&zero_grads);
        assert_eq!(model.params, before);
    }

    #[test]
    fn training_is_bit_reproducible() {
        let spec = small_spec();
        let (x, outcomes) = toy_batch(20, spec.input_dim, 30);
        let config = TrainConfig { epochs: 3, batch_size: 4, seed: 77 };
        let a = train(&spec, &x, &outcomes, &config).unwrap();
        let b = train(&spec, &x, &outcomes, &config).unwrap();
        assert_eq!(a.loss_trace, b.loss_trace);
        assert_eq!(a.model.params, b.model.params);
    }

    #[test]
    fn training_rejects_undersized_cohort() {
        let spec = small_spec();
        let (x, outcomes) = toy_batch(3, spec.input_dim, 31);
        let config = TrainConfig { epochs: 1, batch_size: 16, seed: 0 };
        assert!(train(&spec, &x, &outcomes, &config).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let spec = small_spec();
        let (x, outcomes) = toy_batch(8, spec.input_dim, 40);
        let trained =
            train(&spec, &x, &outcomes, &TrainConfig { epochs: 2, batch_size: 4, seed: 5 }).unwrap();
        let text = trained.model.to_json().unwrap();
        let restored = NetworkModel::from_json(&text).unwrap();
        assert_eq!(trained.model, restored);
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let spec = small_spec();
        let (x, outcomes) = toy_batch(8, spec.input_dim, 41);
        let trained =
            train(&spec, &x, &outcomes, &TrainConfig { epochs: 2, batch_size: 4, seed: 6 }).unwrap();
        let bytes = trained.model.to_binary().unwrap();
        let restored = NetworkModel::from_binary(&bytes).unwrap();
        assert_eq!(trained.model, restored);
    }
}
