use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{subset, TrainConfig};
use crate::error::{CumiError, Result};
use crate::info::{gaussian_gram, hsic, renyi_entropy, total_correlation};
use crate::model::{CumiModel, MultiViewBatch};
use crate::tensor::Matrix;

/// Macro-averaged classification scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Diagnostics after one epoch. The Gram-based fields (`h_c`, `tc`, `hsic`,
/// `consensus_mse`) use at most `diagnostics_cap` rows; the rest use all rows.
/// `C` is always taken from view 1's common encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// The objective on this split with donor view 1.
    pub loss: f64,
    pub ce: Option<f64>,
    pub mse: Vec<f64>,
    pub h_c: f64,
    pub tc: f64,
    pub hsic: Vec<f64>,
    pub consensus_mse: Vec<f64>,
    pub classification: Option<ClassMetrics>,
}

/// Predictions against truth, macro-averaged over every class that occurs
/// in either. A class whose precision or recall has a zero denominator
/// contributes 0 to that average.
pub fn classification_metrics(pred: &[usize], truth: &[usize]) -> Result<ClassMetrics> {
    if pred.len() != truth.len() {
        return Err(CumiError::dim(
            "classification_metrics",
            format!("{} predictions for {} labels", pred.len(), truth.len()),
        ));
    }
    if truth.is_empty() {
        return Err(CumiError::Contract("no samples to score".into()));
    }
    let k = pred.iter().chain(truth).max().map_or(0, |m| m + 1);
    let mut tp = vec![0usize; k];
    let mut n_pred = vec![0usize; k];
    let mut n_true = vec![0usize; k];
    for (&p, &t) in pred.iter().zip(truth) {
        n_pred[p] += 1;
        n_true[t] += 1;
        if p == t {
            tp[p] += 1;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (mut prec, mut rec, mut f1, mut classes) = (0.0, 0.0, 0.0, 0usize);
    for c in 0..k {
        if n_pred[c] == 0 && n_true[c] == 0 {
            continue;
        }
        classes += 1;
        let p = ratio(tp[c], n_pred[c]);
        let r = ratio(tp[c], n_true[c]);
        prec += p;
        rec += r;
        f1 += if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        };
    }
    let m = classes as f64;
    Ok(ClassMetrics {
        accuracy: ratio(tp.iter().sum(), truth.len()),
        precision: prec / m,
        recall: rec / m,
        f1: f1 / m,
    })
}

fn argmax_rows(logits: &Matrix) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| {
            logits
                .row(i)
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, &v)| {
                    if v > best.1 {
                        (j, v)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect()
}

/// Accuracy, precision, recall and F1 of argmax predictions with donor view 1.
pub fn evaluate(model: &CumiModel, data: &MultiViewBatch) -> Result<ClassMetrics> {
    model.check_batch(data)?;
    let labels = data
        .labels
        .as_ref()
        .ok_or_else(|| CumiError::Contract("evaluation needs labels".into()))?;
    let (_, _, logits) = model.infer(&data.views, 0)?;
    let logits = logits.ok_or_else(|| CumiError::Contract("model has no classifier".into()))?;
    classification_metrics(&argmax_rows(&logits), labels)
}

fn plain_mse(a: &Matrix, b: &Matrix) -> Result<f64> {
    let d = a.sub(b)?;
    Ok(d.as_slice().iter().map(|v| v * v).sum::<f64>() / d.as_slice().len().max(1) as f64)
}

fn plain_cross_entropy(logits: &Matrix, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - row[y];
    }
    total / labels.len() as f64
}

/// `MSE(C, C^(i))` for every view, with `C` from view 1.
pub fn consensus_mse(model: &CumiModel, data: &MultiViewBatch) -> Result<Vec<f64>> {
    let cs = model.encode_all_common(data)?;
    cs.iter().map(|c| plain_mse(&cs[0], c)).collect()
}

/// Entropy and dependence diagnostics of the learned latents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Independence {
    pub h_c: f64,
    pub tc: f64,
    pub hsic: Vec<f64>,
}

/// `H(A_C)`, `TC(A_C, A_U1, …)` and `HSIC(C, U_i)` on the first
/// `diagnostics_cap` rows, with `C` from view 1.
pub fn independence_curves(
    model: &CumiModel,
    data: &MultiViewBatch,
    config: &TrainConfig,
) -> Result<Independence> {
    model.check_batch(data)?;
    let data = capped(data, config.diagnostics_cap);
    let (c, u, _) = model.infer(&data.views, 0)?;
    latent_independence(&c, &u, config)
}

fn latent_independence(c: &Matrix, u: &[Matrix], config: &TrainConfig) -> Result<Independence> {
    let mode = config.bandwidth;
    let sc = mode.sigma_for(c)?;
    let su = u
        .iter()
        .map(|m| mode.sigma_for(m))
        .collect::<Result<Vec<_>>>()?;
    let ac = gaussian_gram(c, sc)?;
    let au = u
        .iter()
        .zip(&su)
        .map(|(m, &s)| gaussian_gram(m, s))
        .collect::<Result<Vec<_>>>()?;
    let mut grams = vec![&ac];
    grams.extend(au.iter());
    Ok(Independence {
        h_c: renyi_entropy(&ac, config.alpha)?,
        tc: total_correlation(&grams, config.alpha)?,
        hsic: u
            .iter()
            .zip(&su)
            .map(|(m, &s)| hsic(c, m, sc, s))
            .collect::<Result<Vec<_>>>()?,
    })
}

fn capped(data: &MultiViewBatch, cap: usize) -> MultiViewBatch {
    if data.len() <= cap {
        data.clone()
    } else {
        subset(data, &(0..cap).collect::<Vec<_>>())
    }
}

/// Every [`EpochMetrics`] field for `model` on `data`.
pub fn measure_epoch(
    model: &CumiModel,
    data: &MultiViewBatch,
    config: &TrainConfig,
    epoch: usize,
) -> Result<EpochMetrics> {
    model.check_batch(data)?;
    let (c, u, logits) = model.infer(&data.views, 0)?;
    let mut mse = Vec::with_capacity(model.n_views());
    for (i, x) in data.views.iter().enumerate() {
        let r = model.decoders[i].forward(&Matrix::hcat(&[&c, &u[i]])?)?;
        mse.push(plain_mse(x, &r)?);
    }
    let (ce, classification) = match (&data.labels, &logits) {
        (Some(y), Some(l)) => (
            Some(plain_cross_entropy(l, y)),
            Some(classification_metrics(&argmax_rows(l), y)?),
        ),
        _ => (None, None),
    };

    let small = capped(data, config.diagnostics_cap);
    let (c_small, u_small) = if small.len() == data.len() {
        (c, u)
    } else {
        let (c, u, _) = model.infer(&small.views, 0)?;
        (c, u)
    };
    let ind = latent_independence(&c_small, &u_small, config)?;
    let consensus_mse = consensus_mse(model, &small)?;

    let loss =
        ce.unwrap_or(0.0) + mse.iter().sum::<f64>() - config.beta * ind.h_c + config.gamma * ind.tc;
    let m = EpochMetrics {
        epoch,
        loss,
        ce,
        mse,
        h_c: ind.h_c,
        tc: ind.tc,
        hsic: ind.hsic,
        consensus_mse,
        classification,
    };
    if !m.loss.is_finite() {
        return Err(CumiError::Numeric(format!(
            "non-finite diagnostics at epoch {epoch}"
        )));
    }
    Ok(m)
}

/// `epoch,ce,mse_1..mse_v,h_c,tc,hsic_1..hsic_v,cmse_1..cmse_v,acc,prec,rec,f1`.
pub fn metrics_header(n_views: usize) -> Vec<String> {
    let mut h = vec!["epoch".to_string(), "ce".to_string()];
    h.extend((1..=n_views).map(|i| format!("mse_{i}")));
    h.push("h_c".into());
    h.push("tc".into());
    h.extend((1..=n_views).map(|i| format!("hsic_{i}")));
    h.extend((1..=n_views).map(|i| format!("cmse_{i}")));
    h.extend(["acc", "prec", "rec", "f1"].map(String::from));
    h
}

/// Writes one row per epoch. Cells for quantities a run does not have (CE and
/// classification scores of an unsupervised run) are left empty.
pub fn write_metrics_csv(path: &Path, rows: &[EpochMetrics], n_views: usize) -> Result<()> {
    let to_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => CumiError::io(path, io),
        other => CumiError::Invalid {
            path: path.to_path_buf(),
            msg: format!("{other:?}"),
        },
    };
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(metrics_header(n_views)).map_err(to_err)?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for m in rows {
        let mut rec = vec![m.epoch.to_string(), opt(m.ce)];
        rec.extend(m.mse.iter().map(f64::to_string));
        rec.push(m.h_c.to_string());
        rec.push(m.tc.to_string());
        rec.extend(m.hsic.iter().map(f64::to_string));
        rec.extend(m.consensus_mse.iter().map(f64::to_string));
        let cm = m.classification;
        rec.push(opt(cm.map(|c| c.accuracy)));
        rec.push(opt(cm.map(|c| c.precision)));
        rec.push(opt(cm.map(|c| c.recall)));
        rec.push(opt(cm.map(|c| c.f1)));
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush().map_err(|e| CumiError::io(path, e))
}
