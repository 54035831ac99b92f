use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CumiError, Result};
use crate::tensor::{Matrix, Tape, Var};

/// Affine layer `y = x W + b` with `W: in x out` and `b: 1 x out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Linear {
    /// Weights uniform in `±sqrt(6 / fan_in)`, zero bias.
    pub fn init(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / fan_in as f64).sqrt();
        let weight = Matrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-bound..bound));
        Self {
            weight,
            bias: Matrix::zeros(1, fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut y = x.matmul(&self.weight)?;
        let k = y.cols();
        let b = self.bias.as_slice();
        for chunk in y.as_mut_slice().chunks_mut(k.max(1)) {
            for (o, bv) in chunk.iter_mut().zip(b) {
                *o += bv;
            }
        }
        Ok(y)
    }

    fn check(&self) -> Result<()> {
        if self.bias.shape() != (1, self.fan_out()) {
            return Err(CumiError::Contract(format!(
                "bias {:?} does not match a {}x{} weight",
                self.bias.shape(),
                self.fan_in(),
                self.fan_out()
            )));
        }
        if !self.weight.is_finite() || !self.bias.is_finite() {
            return Err(CumiError::Numeric("non-finite layer parameter".into()));
        }
        Ok(())
    }
}

/// Stack of affine layers with ReLU between them and a linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn init(widths: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let layers = widths
            .windows(2)
            .map(|w| Linear::init(w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    /// `[in, hidden..., out]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.layers.iter().map(Linear::fan_in).collect();
        if let Some(last) = self.layers.last() {
            w.push(last.fan_out());
        }
        w
    }

    pub fn input_width(&self) -> usize {
        self.layers.first().map_or(0, Linear::fan_in)
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, Linear::fan_out)
    }

    /// Plain evaluation, bit-identical to the taped forward.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h)?;
            if i + 1 < self.layers.len() {
                h = h.map(|v| v.max(0.0));
            }
        }
        Ok(h)
    }

    pub fn bind(&self, tape: &Tape) -> BoundMlp {
        BoundMlp {
            layers: self
                .layers
                .iter()
                .map(|l| (tape.leaf(l.weight.clone()), tape.leaf(l.bias.clone())))
                .collect(),
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(CumiError::Contract(format!(
                    "layer {i} outputs {} but layer {} takes {}",
                    pair[0].fan_out(),
                    i + 1,
                    pair[1].fan_in()
                )));
            }
        }
        self.layers.iter().try_for_each(Linear::check)
    }
}

/// An [`Mlp`] whose parameters live on a tape.
#[derive(Debug, Clone)]
pub struct BoundMlp {
    pub layers: Vec<(Var, Var)>,
}

impl BoundMlp {
    pub fn forward(&self, tape: &Tape, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, (w, b)) in self.layers.iter().enumerate() {
            h = tape.matmul(h, *w)?;
            h = tape.add_row(h, *b)?;
            if i + 1 < self.layers.len() {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.layers.iter().flat_map(|(w, b)| [*w, *b])
    }
}
