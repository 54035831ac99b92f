use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{save, MultiViewDataset};
use crate::error::Result;
use crate::tensor::Matrix;

pub const DEMO_SEED: u64 = 20;

const DEMO_ROWS: usize = 60;
const DEMO_CLASSES: usize = 3;
const DEMO_DIMS: [usize; 2] = [6, 4];
const CENTRE_SCALE: f64 = 3.0;
const NOISE_STD: f64 = 0.5;

/// The bundled miniature dataset: 60 rows, 3 balanced classes, two views of
/// widths 6 and 4. Each class sits around a random centre three units out,
/// with 0.5-sd Gaussian noise, so the classes are well separated in both views.
pub fn demo_dataset(seed: u64) -> MultiViewDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE_STD).expect("positive sd");
    let labels: Vec<usize> = (0..DEMO_ROWS).map(|i| i % DEMO_CLASSES).collect();
    let mut views = Vec::new();
    for &d in &DEMO_DIMS {
        let centres = Matrix::from_fn(DEMO_CLASSES, d, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            CENTRE_SCALE * z
        });
        views.push(Matrix::from_fn(DEMO_ROWS, d, |i, j| {
            centres.get(labels[i], j) + noise.sample(&mut rng)
        }));
    }
    MultiViewDataset {
        name: "miniature".into(),
        view_names: vec!["view1".into(), "view2".into()],
        views,
        labels,
        n_classes: DEMO_CLASSES,
    }
}

/// Writes [`demo_dataset`] into `dir`; returns the manifest path.
pub fn write_demo_dataset(dir: &Path, seed: u64) -> Result<PathBuf> {
    save(&demo_dataset(seed), dir)
}
