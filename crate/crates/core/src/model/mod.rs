//! The multi-view network: for every view a common encoder, a unique encoder
//! and a decoder, plus an optional linear classifier over the concatenated
//! latent `Z = [C | U_1 | ... | U_v]`.
//!
//! Layer widths for a view of dimension `d` with `n` classes:
//!
//! ```text
//! common encoder   d -> 1.2d -> 0.5d -> 10n
//! unique encoder   d -> 1.2d -> 0.5d -> 5n
//! decoder          15n -> d -> 2.4d -> d
//! classifier       (5v + 10)n -> n
//! ```
//!
//! Fractional widths round half up. The latent sizes can be overridden (the
//! synthetic benchmark uses one-dimensional latents).

mod checkpoint;
mod mlp;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};
pub use mlp::{BoundMlp, Linear, Mlp};

use crate::error::{CumiError, Result};
use crate::tensor::{Matrix, Tape, Var};

/// One input view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub index: usize,
    pub dim: usize,
}

impl ViewSpec {
    /// Specs for views with the given widths, indexed in order.
    pub fn list(dims: &[usize]) -> Vec<ViewSpec> {
        dims.iter()
            .enumerate()
            .map(|(index, &dim)| ViewSpec { index, dim })
            .collect()
    }
}

/// Aligned minibatch: one `N x d_i` matrix per view, plus labels when supervised.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewBatch {
    pub views: Vec<Matrix>,
    pub labels: Option<Vec<usize>>,
}

impl MultiViewBatch {
    pub fn len(&self) -> usize {
        self.views.first().map_or(0, Matrix::rows)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `round(num/den · d)` with halves rounded up, never below 1.
pub fn scaled_width(d: usize, num: usize, den: usize) -> usize {
    ((2 * num * d + den) / (2 * den)).max(1)
}

/// Latent widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentDims {
    pub common: usize,
    pub unique: usize,
}

impl LatentDims {
    /// `10n` common and `5n` unique features for `n` classes.
    pub fn for_classes(n_classes: usize) -> Self {
        Self {
            common: 10 * n_classes,
            unique: 5 * n_classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumiModel {
    pub views: Vec<ViewSpec>,
    pub n_classes: Option<usize>,
    pub latent: LatentDims,
    pub seed: u64,
    pub common: Vec<Mlp>,
    pub unique: Vec<Mlp>,
    pub decoders: Vec<Mlp>,
    pub classifier: Option<Linear>,
}

// Independent RNG streams per module. Common encoders share one stream so
// views of equal width start from identical common weights.
const STREAM_COMMON: u64 = 1;
const STREAM_UNIQUE: u64 = 1 << 16;
const STREAM_DECODER: u64 = 2 << 16;
const STREAM_CLASSIFIER: u64 = 3 << 16;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl CumiModel {
    /// Supervised model with `10n` / `5n` latents and a classifier head.
    pub fn init(views: &[ViewSpec], n_classes: usize, seed: u64) -> Result<Self> {
        if n_classes < 2 {
            return Err(CumiError::Contract(format!(
                "need at least 2 classes, got {n_classes}"
            )));
        }
        Self::with_latents(
            views,
            LatentDims::for_classes(n_classes),
            Some(n_classes),
            seed,
        )
    }

    /// Model with explicit latent widths; `n_classes = None` builds no classifier.
    pub fn with_latents(
        views: &[ViewSpec],
        latent: LatentDims,
        n_classes: Option<usize>,
        seed: u64,
    ) -> Result<Self> {
        if views.is_empty() {
            return Err(CumiError::Contract("model needs at least one view".into()));
        }
        if let Some(v) = views.iter().find(|v| v.dim == 0) {
            return Err(CumiError::Contract(format!(
                "view {} has zero width",
                v.index
            )));
        }
        if latent.common == 0 || latent.unique == 0 {
            return Err(CumiError::Contract("latent widths must be positive".into()));
        }
        let encoder_widths =
            |d: usize, out: usize| vec![d, scaled_width(d, 6, 5), scaled_width(d, 1, 2), out];
        let mut common = Vec::new();
        let mut unique = Vec::new();
        let mut decoders = Vec::new();
        for (i, v) in views.iter().enumerate() {
            let i = i as u64;
            common.push(Mlp::init(
                &encoder_widths(v.dim, latent.common),
                &mut stream(seed, STREAM_COMMON),
            ));
            unique.push(Mlp::init(
                &encoder_widths(v.dim, latent.unique),
                &mut stream(seed, STREAM_UNIQUE + i),
            ));
            decoders.push(Mlp::init(
                &[
                    latent.common + latent.unique,
                    v.dim,
                    scaled_width(v.dim, 12, 5),
                    v.dim,
                ],
                &mut stream(seed, STREAM_DECODER + i),
            ));
        }
        let classifier = n_classes.map(|n| {
            Linear::init(
                latent.common + views.len() * latent.unique,
                n,
                &mut stream(seed, STREAM_CLASSIFIER),
            )
        });
        Ok(Self {
            views: views.to_vec(),
            n_classes,
            latent,
            seed,
            common,
            unique,
            decoders,
            classifier,
        })
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    /// Width of `Z = [C | U_1 | ... | U_v]`.
    pub fn z_width(&self) -> usize {
        self.latent.common + self.n_views() * self.latent.unique
    }

    fn check_view(&self, i: usize) -> Result<()> {
        if i >= self.n_views() {
            return Err(CumiError::Contract(format!(
                "view index {i} out of range for {} views",
                self.n_views()
            )));
        }
        Ok(())
    }

    /// `C^(i) = φ_C^(i)(X^(i))` without a tape.
    pub fn common_features(&self, i: usize, x: &Matrix) -> Result<Matrix> {
        self.check_view(i)?;
        self.common[i].forward(x)
    }

    pub fn unique_features(&self, i: usize, x: &Matrix) -> Result<Matrix> {
        self.check_view(i)?;
        self.unique[i].forward(x)
    }

    /// `C^(i)` for every view.
    pub fn encode_all_common(&self, batch: &MultiViewBatch) -> Result<Vec<Matrix>> {
        self.check_batch(batch)?;
        (0..self.n_views())
            .map(|i| self.common_features(i, &batch.views[i]))
            .collect()
    }

    /// Plain forward with a fixed donor: `(C, [U_i], logits)`.
    pub fn infer(
        &self,
        views: &[Matrix],
        donor: usize,
    ) -> Result<(Matrix, Vec<Matrix>, Option<Matrix>)> {
        self.check_view(donor)?;
        if views.len() != self.n_views() {
            return Err(CumiError::Contract(format!(
                "{} view matrices for a {}-view model",
                views.len(),
                self.n_views()
            )));
        }
        let c = self.common_features(donor, &views[donor])?;
        let u = (0..self.n_views())
            .map(|i| self.unique_features(i, &views[i]))
            .collect::<Result<Vec<_>>>()?;
        let logits = match &self.classifier {
            Some(head) => {
                let mut parts = vec![&c];
                parts.extend(u.iter());
                Some(head.forward(&Matrix::hcat(&parts)?)?)
            }
            None => None,
        };
        Ok((c, u, logits))
    }

    pub fn check_batch(&self, batch: &MultiViewBatch) -> Result<()> {
        if batch.views.len() != self.n_views() {
            return Err(CumiError::Contract(format!(
                "batch has {} views, model has {}",
                batch.views.len(),
                self.n_views()
            )));
        }
        let n = batch.len();
        for (i, (x, spec)) in batch.views.iter().zip(&self.views).enumerate() {
            if x.cols() != spec.dim {
                return Err(CumiError::dim(
                    "batch",
                    format!(
                        "view {i} has {} columns, model expects {}",
                        x.cols(),
                        spec.dim
                    ),
                ));
            }
            if x.rows() != n {
                return Err(CumiError::dim(
                    "batch",
                    format!("view {i} has {} rows, view 0 has {n}", x.rows()),
                ));
            }
        }
        if let Some(labels) = &batch.labels {
            if labels.len() != n {
                return Err(CumiError::dim(
                    "batch",
                    format!("{} labels for {n} rows", labels.len()),
                ));
            }
        }
        Ok(())
    }

    /// Places every parameter on `tape` as a leaf.
    pub fn bind<'t>(&self, tape: &'t Tape) -> BoundModel<'t> {
        BoundModel {
            tape,
            common: self.common.iter().map(|m| m.bind(tape)).collect(),
            unique: self.unique.iter().map(|m| m.bind(tape)).collect(),
            decoders: self.decoders.iter().map(|m| m.bind(tape)).collect(),
            classifier: self
                .classifier
                .as_ref()
                .map(|l| (tape.leaf(l.weight.clone()), tape.leaf(l.bias.clone()))),
            latent: self.latent,
            n_views: self.n_views(),
        }
    }

    /// Like [`CumiModel::bind`], but uses existing leaves (in
    /// [`CumiModel::params`] order) instead of creating new ones. Only the
    /// structure of `self` is used.
    pub fn bind_vars<'t>(&self, tape: &'t Tape, vars: &[Var]) -> Result<BoundModel<'t>> {
        let expected = self.params().len();
        if vars.len() != expected {
            return Err(CumiError::Contract(format!(
                "{} variables for {expected} parameters",
                vars.len()
            )));
        }
        let mut it = vars.chunks(2).map(|p| (p[0], p[1]));
        let mut take = |m: &Mlp| BoundMlp {
            layers: m
                .layers
                .iter()
                .map(|_| it.next().expect("counted above"))
                .collect(),
        };
        let common = self.common.iter().map(&mut take).collect();
        let unique = self.unique.iter().map(&mut take).collect();
        let decoders = self.decoders.iter().map(&mut take).collect();
        let classifier = self
            .classifier
            .as_ref()
            .map(|_| it.next().expect("counted above"));
        Ok(BoundModel {
            tape,
            common,
            unique,
            decoders,
            classifier,
            latent: self.latent,
            n_views: self.n_views(),
        })
    }

    /// Every parameter matrix, in the same order as [`BoundModel::vars`].
    pub fn params(&self) -> Vec<&Matrix> {
        let mut out = Vec::new();
        for m in self.common.iter().chain(&self.unique).chain(&self.decoders) {
            for l in &m.layers {
                out.push(&l.weight);
                out.push(&l.bias);
            }
        }
        if let Some(l) = &self.classifier {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::new();
        for m in self
            .common
            .iter_mut()
            .chain(self.unique.iter_mut())
            .chain(self.decoders.iter_mut())
        {
            for l in &mut m.layers {
                out.push(&mut l.weight);
                out.push(&mut l.bias);
            }
        }
        if let Some(l) = &mut self.classifier {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out
    }

    /// Overwrites every parameter, in [`CumiModel::params`] order.
    pub fn set_params(&mut self, values: &[Matrix]) -> Result<()> {
        let mut slots = self.params_mut();
        if slots.len() != values.len() {
            return Err(CumiError::Contract(format!(
                "{} parameter values for {} slots",
                values.len(),
                slots.len()
            )));
        }
        for (slot, v) in slots.iter_mut().zip(values) {
            if slot.shape() != v.shape() {
                return Err(CumiError::dim(
                    "set_params",
                    format!("{:?} into {:?}", v.shape(), slot.shape()),
                ));
            }
            **slot = v.clone();
        }
        Ok(())
    }

    /// Structural consistency, used after deserializing.
    pub fn validate(&self) -> Result<()> {
        let v = self.n_views();
        if v == 0 || self.common.len() != v || self.unique.len() != v || self.decoders.len() != v {
            return Err(CumiError::Contract(
                "module count does not match view count".into(),
            ));
        }
        for (i, spec) in self.views.iter().enumerate() {
            for m in [&self.common[i], &self.unique[i], &self.decoders[i]] {
                m.check()?;
            }
            if self.common[i].input_width() != spec.dim
                || self.unique[i].input_width() != spec.dim
                || self.decoders[i].output_width() != spec.dim
            {
                return Err(CumiError::Contract(format!(
                    "view {i} widths disagree with its spec"
                )));
            }
            if self.common[i].output_width() != self.latent.common
                || self.unique[i].output_width() != self.latent.unique
                || self.decoders[i].input_width() != self.latent.common + self.latent.unique
            {
                return Err(CumiError::Contract(format!(
                    "view {i} latent widths disagree"
                )));
            }
        }
        match (&self.classifier, self.n_classes) {
            (Some(head), Some(n)) => {
                head.check_shape(self.z_width(), n)?;
            }
            (None, None) => {}
            _ => {
                return Err(CumiError::Contract(
                    "classifier and class count disagree".into(),
                ))
            }
        }
        Ok(())
    }
}

impl Linear {
    fn check_shape(&self, fan_in: usize, fan_out: usize) -> Result<()> {
        if self.fan_in() != fan_in || self.fan_out() != fan_out || self.bias.shape() != (1, fan_out)
        {
            return Err(CumiError::Contract(format!(
                "classifier is {}x{}, expected {fan_in}x{fan_out}",
                self.fan_in(),
                self.fan_out()
            )));
        }
        Ok(())
    }
}

/// Latent features for one minibatch. `donor` is the view whose common
/// encoder produced `c`.
#[derive(Debug, Clone)]
pub struct LatentBatch {
    pub c: Var,
    pub u: Vec<Var>,
    pub donor: usize,
}

#[derive(Debug, Clone)]
pub struct Forward {
    pub latent: LatentBatch,
    pub reconstructions: Vec<Var>,
    pub z: Var,
    pub logits: Option<Var>,
}

/// A [`CumiModel`] whose parameters are leaves on a tape.
#[derive(Debug)]
pub struct BoundModel<'t> {
    tape: &'t Tape,
    common: Vec<BoundMlp>,
    unique: Vec<BoundMlp>,
    decoders: Vec<BoundMlp>,
    classifier: Option<(Var, Var)>,
    latent: LatentDims,
    n_views: usize,
}

impl<'t> BoundModel<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn encode_common(&self, i: usize, x: Var) -> Result<Var> {
        self.common
            .get(i)
            .ok_or_else(|| CumiError::Contract(format!("no view {i}")))?
            .forward(self.tape, x)
    }

    pub fn encode_unique(&self, i: usize, x: Var) -> Result<Var> {
        self.unique
            .get(i)
            .ok_or_else(|| CumiError::Contract(format!("no view {i}")))?
            .forward(self.tape, x)
    }

    /// Reconstructs view `i` from `[c | u_i]`, common part first.
    pub fn decode(&self, i: usize, c: Var, u: Var) -> Result<Var> {
        let (cw, uw) = (self.tape.value(c).cols(), self.tape.value(u).cols());
        if cw != self.latent.common || uw != self.latent.unique {
            return Err(CumiError::dim(
                "decode",
                format!(
                    "latents {cw} + {uw}, expected {} + {}",
                    self.latent.common, self.latent.unique
                ),
            ));
        }
        let joined = self.tape.hcat(&[c, u])?;
        self.decoders
            .get(i)
            .ok_or_else(|| CumiError::Contract(format!("no view {i}")))?
            .forward(self.tape, joined)
    }

    /// Full forward pass with `C` taken from the donor view.
    pub fn forward(&self, views: &[Var], donor: usize) -> Result<Forward> {
        if donor >= self.n_views {
            return Err(CumiError::Contract(format!(
                "donor {donor} out of range for {} views",
                self.n_views
            )));
        }
        if views.len() != self.n_views {
            return Err(CumiError::Contract(format!(
                "{} view inputs for a {}-view model",
                views.len(),
                self.n_views
            )));
        }
        let c = self.encode_common(donor, views[donor])?;
        let u = (0..self.n_views)
            .map(|i| self.encode_unique(i, views[i]))
            .collect::<Result<Vec<_>>>()?;
        let reconstructions = (0..self.n_views)
            .map(|i| self.decode(i, c, u[i]))
            .collect::<Result<Vec<_>>>()?;
        let mut parts = vec![c];
        parts.extend(&u);
        let z = self.tape.hcat(&parts)?;
        let logits = match self.classifier {
            Some((w, b)) => {
                let h = self.tape.matmul(z, w)?;
                Some(self.tape.add_row(h, b)?)
            }
            None => None,
        };
        Ok(Forward {
            latent: LatentBatch { c, u, donor },
            reconstructions,
            z,
            logits,
        })
    }

    /// Parameter leaves in the order of [`CumiModel::params`].
    pub fn vars(&self) -> Vec<Var> {
        let mut out: Vec<Var> = self
            .common
            .iter()
            .chain(&self.unique)
            .chain(&self.decoders)
            .flat_map(|m| m.vars().collect::<Vec<_>>())
            .collect();
        if let Some((w, b)) = self.classifier {
            out.push(w);
            out.push(b);
        }
        out
    }

    pub fn common_vars(&self, i: usize) -> Vec<Var> {
        self.common[i].vars().collect()
    }

    pub fn unique_vars(&self, i: usize) -> Vec<Var> {
        self.unique[i].vars().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_layer_widths() {
        let m = CumiModel::init(&ViewSpec::list(&[40]), 7, 0).unwrap();
        assert_eq!(m.common[0].widths(), vec![40, 48, 20, 70]);
        assert_eq!(m.unique[0].widths(), vec![40, 48, 20, 35]);
        assert_eq!(m.decoders[0].widths(), vec![105, 40, 96, 40]);

        let m = CumiModel::init(&ViewSpec::list(&[12, 9]), 10, 0).unwrap();
        assert_eq!(m.z_width(), 200);
        assert_eq!(m.classifier.as_ref().unwrap().fan_in(), 200);
    }

    #[test]
    fn half_widths_round_up() {
        assert_eq!(scaled_width(5, 1, 2), 3);
        assert_eq!(scaled_width(1, 1, 2), 1);
        assert_eq!(scaled_width(5, 6, 5), 6);
        assert_eq!(scaled_width(3, 12, 5), 7);
    }

    #[test]
    fn init_is_seeded() {
        let v = ViewSpec::list(&[6, 4]);
        assert_eq!(
            CumiModel::init(&v, 3, 9).unwrap(),
            CumiModel::init(&v, 3, 9).unwrap()
        );
        assert_ne!(
            CumiModel::init(&v, 3, 9).unwrap(),
            CumiModel::init(&v, 3, 10).unwrap()
        );
    }

    #[test]
    fn init_contract() {
        assert!(CumiModel::init(&ViewSpec::list(&[4]), 1, 0).is_err());
        assert!(CumiModel::init(&[], 3, 0).is_err());
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let m = CumiModel::init(&ViewSpec::list(&[5, 3]), 2, 1).unwrap();
        let c = m.common_features(0, &Matrix::zeros(4, 5)).unwrap();
        assert_eq!(c, Matrix::zeros(4, 20));
        let t = Tape::new();
        let b = m.bind(&t);
        let c = t.leaf(Matrix::zeros(4, 20));
        let u = t.leaf(Matrix::zeros(4, 10));
        let r = b.decode(1, c, u).unwrap();
        assert_eq!(*t.value(r), Matrix::zeros(4, 3));
    }

    #[test]
    fn width_mismatch_errors() {
        let m = CumiModel::init(&ViewSpec::list(&[5, 3]), 2, 1).unwrap();
        let t = Tape::new();
        let b = m.bind(&t);
        let x = t.leaf(Matrix::zeros(4, 4));
        assert!(matches!(
            b.encode_common(0, x),
            Err(CumiError::Dimension { .. })
        ));
        let c = t.leaf(Matrix::zeros(4, 20));
        assert!(matches!(
            b.decode(0, c, c),
            Err(CumiError::Dimension { .. })
        ));
    }

    #[test]
    fn taped_and_plain_forward_identical() {
        let m = CumiModel::init(&ViewSpec::list(&[5, 3]), 3, 4).unwrap();
        let x0 = Matrix::from_fn(6, 5, |i, j| ((i + 2 * j) as f64).sin());
        let x1 = Matrix::from_fn(6, 3, |i, j| ((3 * i + j) as f64).cos());
        let t = Tape::new();
        let b = m.bind(&t);
        let vs = [t.leaf(x0.clone()), t.leaf(x1.clone())];
        let f = b.forward(&vs, 1).unwrap();
        let (c, u, logits) = m.infer(&[x0, x1], 1).unwrap();
        assert_eq!(*t.value(f.latent.c), c);
        assert_eq!(*t.value(f.latent.u[0]), u[0]);
        assert_eq!(*t.value(f.logits.unwrap()), logits.unwrap());
        assert_eq!(t.value(f.z).cols(), m.z_width());
        assert_eq!(b.vars().len(), m.params().len());
    }

    #[test]
    fn equal_width_views_share_common_init() {
        let m = CumiModel::init(&ViewSpec::list(&[4, 4]), 2, 3).unwrap();
        assert_eq!(m.common[0], m.common[1]);
        assert_ne!(m.unique[0], m.unique[1]);
    }
}
