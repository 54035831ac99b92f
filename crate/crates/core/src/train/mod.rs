//! The combined objective and the minibatch SGD loop.
//!
//! For a minibatch with donor view `j`,
//!
//! ```text
//! loss = CE(Y, Ŷ) + Σ_i MSE(X_i, X̂_i) − β·H_α(A_C) + γ·TC_α(A_C, A_U1, …, A_Uv)
//! ```
//!
//! where `C` comes from view `j`'s common encoder and every `A` is the
//! unit-trace Gaussian Gram of a latent block over the minibatch. The CE term
//! is dropped when the batch carries no labels.

mod metrics;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use metrics::{
    classification_metrics, consensus_mse, evaluate, independence_curves, measure_epoch,
    metrics_header, write_metrics_csv, ClassMetrics, EpochMetrics, Independence,
};

use crate::error::{CumiError, Result};
use crate::info::{check_alpha, total_correlation_var, BandwidthMode, DEFAULT_ALPHA};
use crate::model::{BoundModel, CumiModel, MultiViewBatch};
use crate::tensor::{Matrix, Tape, Var};

/// How the donor view is picked for each minibatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DonorPolicy {
    #[default]
    UniformPerBatch,
}

/// Parameter update rule.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// `w ← w − lr·g`.
    #[default]
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub bandwidth: BandwidthMode,
    pub donor_policy: DonorPolicy,
    pub optimizer: Optimizer,
    /// Rows used for the Gram-based per-epoch diagnostics.
    pub diagnostics_cap: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            beta: 0.01,
            gamma: 0.01,
            lr: 0.01,
            epochs: 100,
            batch_size: 100,
            seed: 0,
            bandwidth: BandwidthMode::Median,
            donor_policy: DonorPolicy::UniformPerBatch,
            optimizer: Optimizer::Sgd,
            diagnostics_cap: 512,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        self.bandwidth.validate()?;
        let bad = |msg: String| Err(CumiError::Contract(msg));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!(
                "learning rate must be non-negative, got {}",
                self.lr
            ));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite())
            || !(self.gamma >= 0.0 && self.gamma.is_finite())
        {
            return bad(format!(
                "beta and gamma must be non-negative, got {} and {}",
                self.beta, self.gamma
            ));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size < 2 {
            return bad(format!(
                "batch size must be at least 2, got {}",
                self.batch_size
            ));
        }
        if self.diagnostics_cap < 2 {
            return bad("diagnostics cap must be at least 2".into());
        }
        Ok(())
    }
}

/// The scalar objective and its pieces, all nodes on the same tape.
#[derive(Debug, Clone)]
pub struct LossTerms {
    pub loss: Var,
    pub ce: Option<Var>,
    pub mse: Vec<Var>,
    /// `H_α(A_C)`; absent when β = γ = 0.
    pub h_c: Option<Var>,
    /// `TC_α(A_C, A_U1, …)`; absent when β = γ = 0.
    pub tc: Option<Var>,
}

/// Kernel widths for `[C, U_1, …, U_v]` on this batch, measured on plain values.
pub fn latent_bandwidths(
    model: &CumiModel,
    views: &[Matrix],
    donor: usize,
    mode: BandwidthMode,
) -> Result<Vec<f64>> {
    let (c, u, _) = model.infer(views, donor)?;
    std::iter::once(&c)
        .chain(&u)
        .map(|m| mode.sigma_for(m))
        .collect()
}

/// Builds the objective on `bound`'s tape.
///
/// `sigmas` pins the kernel widths of `[C, U_1, …]`; when `None` they are
/// chosen by `config.bandwidth` from the detached latent values. Either way
/// no gradient flows through the bandwidth.
pub fn compute_loss(
    bound: &BoundModel<'_>,
    inputs: &[Var],
    labels: Option<&[usize]>,
    donor: usize,
    config: &TrainConfig,
    sigmas: Option<&[f64]>,
) -> Result<LossTerms> {
    let tape = bound.tape();
    let n = inputs.first().map_or(0, |x| tape.value(*x).rows());
    if n < 2 {
        return Err(CumiError::Contract(format!(
            "minibatch needs at least 2 samples, got {n}"
        )));
    }
    let fwd = bound.forward(inputs, donor)?;

    let mut terms = Vec::new();
    let ce = match labels {
        Some(y) => {
            let logits = fwd.logits.ok_or_else(|| {
                CumiError::Contract("labels given but the model has no classifier".into())
            })?;
            let ce = tape.softmax_cross_entropy(logits, y)?;
            terms.push(ce);
            Some(ce)
        }
        None => None,
    };
    let mse = inputs
        .iter()
        .zip(&fwd.reconstructions)
        .map(|(x, r)| tape.mse(*x, *r))
        .collect::<Result<Vec<_>>>()?;
    terms.extend(&mse);

    let (mut h_c, mut tc) = (None, None);
    if config.beta != 0.0 || config.gamma != 0.0 {
        let latents: Vec<Var> = std::iter::once(fwd.latent.c)
            .chain(fwd.latent.u.iter().copied())
            .collect();
        if let Some(s) = sigmas {
            if s.len() != latents.len() {
                return Err(CumiError::Contract(format!(
                    "{} bandwidths for {} latent blocks",
                    s.len(),
                    latents.len()
                )));
            }
        }
        let mut grams = Vec::with_capacity(latents.len());
        for (k, z) in latents.iter().enumerate() {
            let sigma = match sigmas {
                Some(s) => s[k],
                None => config.bandwidth.sigma_for(&tape.value(*z))?,
            };
            grams.push(tape.gaussian_gram(*z, sigma)?);
        }
        let (t, marginals) = total_correlation_var(tape, &grams, config.alpha)?;
        terms.push(tape.scale(marginals[0], -config.beta));
        terms.push(tape.scale(t, config.gamma));
        h_c = Some(marginals[0]);
        tc = Some(t);
    }

    let mut loss = terms[0];
    for t in &terms[1..] {
        loss = tape.add(loss, *t)?;
    }
    Ok(LossTerms {
        loss,
        ce,
        mse,
        h_c,
        tc,
    })
}

/// Row index sets for one epoch. A trailing batch of fewer than 2 rows is
/// folded into the one before it, since a Gram over one sample is undefined.
pub fn epoch_batches(order: &[usize], batch_size: usize) -> Vec<Vec<usize>> {
    let mut batches: Vec<Vec<usize>> = order
        .chunks(batch_size.max(1))
        .map(<[usize]>::to_vec)
        .collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() < 2) {
        let tail = batches.pop().unwrap_or_default();
        if let Some(prev) = batches.last_mut() {
            prev.extend(tail);
        }
    }
    batches
}

pub fn subset(data: &MultiViewBatch, idx: &[usize]) -> MultiViewBatch {
    MultiViewBatch {
        views: data.views.iter().map(|x| x.select_rows(idx)).collect(),
        labels: data
            .labels
            .as_ref()
            .map(|y| idx.iter().map(|&i| y[i]).collect()),
    }
}

/// Per-epoch diagnostics from a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub train: Vec<EpochMetrics>,
    /// Same diagnostics on the held-out split, when one was given.
    pub held_out: Vec<EpochMetrics>,
}

/// One gradient step on `batch` with a fixed donor; returns the loss value.
pub fn sgd_step(
    model: &mut CumiModel,
    batch: &MultiViewBatch,
    donor: usize,
    config: &TrainConfig,
) -> Result<f64> {
    let tape = Tape::new();
    let bound = model.bind(&tape);
    let inputs: Vec<Var> = batch.views.iter().map(|x| tape.leaf(x.clone())).collect();
    let terms = compute_loss(
        &bound,
        &inputs,
        batch.labels.as_deref(),
        donor,
        config,
        None,
    )?;
    let value = tape.scalar(terms.loss);
    if !value.is_finite() {
        return Err(CumiError::Numeric(format!("loss is {value}")));
    }
    tape.backward(terms.loss)?;
    let grads: Vec<Matrix> = bound.vars().into_iter().map(|v| tape.grad(v)).collect();
    match config.optimizer {
        Optimizer::Sgd => {
            for (p, g) in model.params_mut().into_iter().zip(&grads) {
                p.axpy(-config.lr, g);
            }
        }
    }
    Ok(value)
}

pub fn train(
    model: &mut CumiModel,
    data: &MultiViewBatch,
    held_out: Option<&MultiViewBatch>,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    train_with(model, data, held_out, config, |_| {})
}

/// [`train`] with a callback after every epoch's training-split metrics.
pub fn train_with(
    model: &mut CumiModel,
    data: &MultiViewBatch,
    held_out: Option<&MultiViewBatch>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainHistory> {
    config.validate()?;
    model.check_batch(data)?;
    if let Some(h) = held_out {
        model.check_batch(h)?;
    }
    let n = data.len();
    if n < 2 {
        return Err(CumiError::Contract(format!(
            "training set needs at least 2 rows, got {n}"
        )));
    }
    let v = model.n_views();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = TrainHistory {
        train: Vec::with_capacity(config.epochs),
        held_out: Vec::new(),
    };
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let batches = epoch_batches(&order, config.batch_size);
        for (b, idx) in batches.iter().enumerate() {
            let donor = match config.donor_policy {
                DonorPolicy::UniformPerBatch => rng.random_range(0..v),
            };
            let batch = subset(data, idx);
            total += sgd_step(model, &batch, donor, config).map_err(|e| match e {
                CumiError::Numeric(msg) => CumiError::Numeric(format!(
                    "training diverged at epoch {epoch}, batch {}: {msg}",
                    b + 1
                )),
                other => other,
            })?;
        }
        let mut m = measure_epoch(model, data, config, epoch)?;
        m.loss = total / batches.len() as f64;
        on_epoch(&m);
        history.train.push(m);
        if let Some(h) = held_out {
            history
                .held_out
                .push(measure_epoch(model, h, config, epoch)?);
        }
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ViewSpec;

    fn toy(n: usize, labelled: bool) -> MultiViewBatch {
        let x0 = Matrix::from_fn(n, 5, |i, j| ((i * 7 + j * 3) as f64 * 0.37).sin());
        let x1 = Matrix::from_fn(n, 4, |i, j| ((i * 5 + j) as f64 * 0.53).cos());
        MultiViewBatch {
            views: vec![x0, x1],
            labels: labelled.then(|| (0..n).map(|i| i % 3).collect()),
        }
    }

    fn loss_value(
        model: &CumiModel,
        batch: &MultiViewBatch,
        donor: usize,
        cfg: &TrainConfig,
    ) -> (f64, f64, f64) {
        let t = Tape::new();
        let b = model.bind(&t);
        let xs: Vec<Var> = batch.views.iter().map(|x| t.leaf(x.clone())).collect();
        let terms = compute_loss(&b, &xs, batch.labels.as_deref(), donor, cfg, None).unwrap();
        let ce = terms.ce.map_or(0.0, |c| t.scalar(c));
        let mse: f64 = terms.mse.iter().map(|m| t.scalar(*m)).sum();
        (t.scalar(terms.loss), ce, mse)
    }

    #[test]
    fn zero_weights_leave_ce_plus_mse() {
        let m = CumiModel::init(&ViewSpec::list(&[5, 4]), 3, 2).unwrap();
        let cfg = TrainConfig {
            beta: 0.0,
            gamma: 0.0,
            ..Default::default()
        };
        let (loss, ce, mse) = loss_value(&m, &toy(8, true), 0, &cfg);
        assert_eq!(loss, ce + mse);
    }

    #[test]
    fn unlabelled_batch_drops_ce() {
        let m = CumiModel::init(&ViewSpec::list(&[5, 4]), 3, 2).unwrap();
        let cfg = TrainConfig {
            beta: 0.0,
            gamma: 0.0,
            ..Default::default()
        };
        let (loss, ce, mse) = loss_value(&m, &toy(8, false), 1, &cfg);
        assert_eq!(ce, 0.0);
        assert_eq!(loss, mse);
    }

    #[test]
    fn single_row_batch_rejected() {
        let m = CumiModel::init(&ViewSpec::list(&[5, 4]), 3, 2).unwrap();
        let t = Tape::new();
        let b = m.bind(&t);
        let d = toy(1, true);
        let xs: Vec<Var> = d.views.iter().map(|x| t.leaf(x.clone())).collect();
        assert!(matches!(
            compute_loss(
                &b,
                &xs,
                d.labels.as_deref(),
                0,
                &TrainConfig::default(),
                None
            ),
            Err(CumiError::Contract(_))
        ));
    }

    #[test]
    fn batches_fold_a_lonely_tail() {
        let order: Vec<usize> = (0..9).collect();
        let b = epoch_batches(&order, 4);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 5]);
        let b = epoch_batches(&order, 3);
        assert_eq!(b.len(), 3);
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let mut m = CumiModel::init(&ViewSpec::list(&[5, 4]), 3, 2).unwrap();
        let before = m.clone();
        let cfg = TrainConfig {
            lr: 0.0,
            epochs: 2,
            batch_size: 4,
            ..Default::default()
        };
        train(&mut m, &toy(10, true), None, &cfg).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 12,
            ..Default::default()
        };
        let run = || {
            let mut m = CumiModel::init(&ViewSpec::list(&[5, 4]), 3, 2).unwrap();
            let h = train(&mut m, &toy(12, true), None, &cfg).unwrap();
            (m, h)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn donor_isolation_after_one_step() {
        let mut m = CumiModel::init(&ViewSpec::list(&[5, 4]), 3, 2).unwrap();
        let before = m.clone();
        sgd_step(
            &mut m,
            &toy(8, true),
            1,
            &TrainConfig {
                lr: 0.1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(m.common[0], before.common[0]);
        assert_ne!(m.common[1], before.common[1]);
    }

    #[test]
    fn config_contract() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig {
            epochs: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            batch_size: 1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            beta: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            alpha: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
