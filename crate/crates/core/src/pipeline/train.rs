use rand::seq::SliceRandom;

use super::{SplitAssignment, TrainConfig};
use crate::datasets::{ImageSet, ImageShape};
use crate::losses::{LossWeights, PairLayout};
use crate::nn::{self, init_params, AdamState, AutoencoderParams, LossSpec};
use crate::rng::{self, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Reconstruction,
    Joint,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Reconstruction => "stage1",
            Stage::Joint => "stage3",
        }
    }
}

/// Epoch means of every loss term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub stage: Stage,
    pub epoch: usize,
    pub steps: usize,
    pub rec: f64,
    pub cls: f64,
    pub disp1: f64,
    pub disp2: f64,
    pub total: f64,
}

/// Training state that persists across stages: weights, Adam moments and
/// the random streams for batch order, latent partners and atypical draws.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainConfig,
    params: AutoencoderParams,
    adam: AdamState,
    order_rng: Rng,
    partner_rng: Rng,
    atypical_rng: Rng,
    history: Vec<EpochLog>,
}

/// Consecutive batches of `size`; a trailing batch of one sample is merged
/// into the previous batch so every batch has at least two rows.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() < 2) {
        out.pop();
        let start = (out.len() - 1) * size;
        *out.last_mut().expect("nonempty") = &order[start..];
    }
    out
}

/// Endless stream over the atypical indices, reshuffled whenever exhausted.
struct AtypicalStream<'a> {
    pool: &'a [usize],
    order: Vec<usize>,
    pos: usize,
}

impl<'a> AtypicalStream<'a> {
    fn new(pool: &'a [usize], rng: &mut Rng) -> Self {
        let mut order = pool.to_vec();
        order.shuffle(rng);
        Self { pool, order, pos: 0 }
    }

    fn draw(&mut self, n: usize, rng: &mut Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            if self.pos == self.order.len() {
                self.order = self.pool.to_vec();
                self.order.shuffle(rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

impl Trainer {
    /// Fresh He-initialized network for images of `shape`.
    pub fn new(shape: ImageShape, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let params = init_params(&cfg.architecture(shape)?, cfg.seed)?;
        Ok(Self::from_params(params, cfg))
    }

    /// Start from existing weights with a fresh optimizer state.
    pub fn from_params(params: AutoencoderParams, cfg: &TrainConfig) -> Self {
        Self {
            adam: AdamState::new(&params),
            order_rng: rng::stream(cfg.seed, "batch-order"),
            partner_rng: rng::stream(cfg.seed, "latent-partners"),
            atypical_rng: rng::stream(cfg.seed, "atypical-draws"),
            cfg: cfg.clone(),
            params,
            history: Vec::new(),
        }
    }

    /// Replace the settings that only stage 3 reads: the split ratio and
    /// the loss weights.
    pub fn with_stage3(mut self, rho: f64, weights: LossWeights) -> Result<Self> {
        let mut cfg = self.cfg.clone();
        cfg.rho = rho;
        cfg.weights = weights;
        cfg.validate()?;
        self.cfg = cfg;
        Ok(self)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn params(&self) -> &AutoencoderParams {
        &self.params
    }

    pub fn into_params(self) -> AutoencoderParams {
        self.params
    }

    pub fn history(&self) -> &[EpochLog] {
        &self.history
    }

    /// `stage1_epochs` of reconstruction-only training on every sample.
    pub fn stage1(&mut self, train: &ImageSet) -> Result<()> {
        let all: Vec<usize> = (0..train.len()).collect();
        self.train_epochs(
            train,
            &all,
            &[],
            LossWeights::RECONSTRUCTION_ONLY,
            self.cfg.stage1_epochs,
            Stage::Reconstruction,
        )
    }

    /// `stage3_epochs` of joint training on a fixed split.
    pub fn stage3(&mut self, train: &ImageSet, assignment: &SplitAssignment) -> Result<()> {
        if assignment.len() != train.len() {
            return Err(Error::Shape(format!(
                "split covers {} samples, training set has {}",
                assignment.len(),
                train.len()
            )));
        }
        let (typical, atypical) = (assignment.typical(), assignment.atypical());
        self.train_epochs(
            train,
            &typical,
            &atypical,
            self.cfg.weights,
            self.cfg.stage3_epochs,
            Stage::Joint,
        )
    }

    /// Generic epoch loop shared by every stage and baseline.
    ///
    /// Each epoch shuffles `typical` and walks it in batches of `batch_size`.
    /// When `atypical` is nonempty every step appends `min(batch_size,
    /// |atypical|)` atypical samples drawn from a reshuffled cycling stream.
    /// Reconstruction covers every row of the step; the closeness term uses
    /// the typical rows and the dispersion terms the atypical rows. Latent
    /// partners are only drawn when some latent term is active.
    pub fn train_epochs(
        &mut self,
        train: &ImageSet,
        typical: &[usize],
        atypical: &[usize],
        weights: LossWeights,
        epochs: usize,
        stage: Stage,
    ) -> Result<()> {
        weights.validate()?;
        if train.shape() != self.params.arch.input {
            return Err(Error::Shape(format!(
                "training images are {}, network expects {}",
                train.shape(),
                self.params.arch.input
            )));
        }
        if typical.len() < 2 {
            return Err(Error::Empty(format!("{} typical samples, need at least 2", typical.len())));
        }
        if atypical.len() == 1 {
            return Err(Error::Empty("a single atypical sample cannot be dispersed".into()));
        }
        let latent_terms = !atypical.is_empty() || weights.alpha != 0.0;
        let n_pix = train.shape().pixels();
        let bs = self.cfg.batch_size;

        for epoch in 0..epochs {
            let mut order = typical.to_vec();
            order.shuffle(&mut self.order_rng);
            let mut stream = (!atypical.is_empty()).then(|| AtypicalStream::new(atypical, &mut self.atypical_rng));

            let mut sums = [0.0f64; 5];
            let steps = batches(&order, bs);
            for (step, typ) in steps.iter().enumerate() {
                let aty = match stream.as_mut() {
                    Some(s) => s.draw(bs.min(atypical.len()), &mut self.atypical_rng),
                    None => Vec::new(),
                };
                let mut pixels = Vec::with_capacity((typ.len() + aty.len()) * n_pix);
                for &i in typ.iter().chain(&aty) {
                    pixels.extend_from_slice(train.image(i));
                }
                let layout = if latent_terms {
                    Some(PairLayout::sample(typ.len(), aty.len(), &mut self.partner_rng)?)
                } else {
                    None
                };
                let spec = LossSpec {
                    weights,
                    pairs: layout.as_ref(),
                    l2: self.cfg.l2,
                };
                let diverged = |loss: f64| Error::Divergence {
                    stage: stage.name(),
                    epoch,
                    step,
                    loss,
                };
                let (loss, grads) = match nn::backward(&self.params, &pixels, &spec) {
                    Ok(v) => v,
                    Err(Error::NonFinite(_)) => return Err(diverged(f64::NAN)),
                    Err(e) => return Err(e),
                };
                if !grads.is_finite() {
                    return Err(diverged(loss.total));
                }
                nn::optimizer_step(&mut self.params, &grads, &mut self.adam, &self.cfg.adam)?;
                for (s, v) in sums.iter_mut().zip([loss.rec, loss.cls, loss.disp1, loss.disp2, loss.total]) {
                    *s += v;
                }
            }
            let n = steps.len() as f64;
            self.history.push(EpochLog {
                stage,
                epoch,
                steps: steps.len(),
                rec: sums[0] / n,
                cls: sums[1] / n,
                disp1: sums[2] / n,
                disp2: sums[3] / n,
                total: sums[4] / n,
            });
        }
        Ok(())
    }
}
