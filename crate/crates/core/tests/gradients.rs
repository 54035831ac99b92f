use cumi::info::{median_bandwidth, renyi_entropy_var, total_correlation_var, BandwidthMode};
use cumi::model::{CumiModel, ViewSpec};
use cumi::tensor::grad_check;
use cumi::train::{compute_loss, latent_bandwidths, TrainConfig};
use cumi::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

#[test]
fn entropy_gradient_matches_central_differences() {
    for (seed, alpha) in [(1u64, 1.01), (2, 2.0), (3, 0.5)] {
        let x = random_matrix(8, 5, seed);
        let sigma = median_bandwidth(&x).unwrap();
        let err = grad_check(
            |t, vs| {
                let g = t.gaussian_gram(vs[0], sigma)?;
                renyi_entropy_var(t, g, alpha)
            },
            &[x],
            EPS,
        )
        .unwrap();
        assert!(err <= TOL, "alpha={alpha}: relative error {err:e}");
    }
}

#[test]
fn total_correlation_gradient_matches_central_differences() {
    let reps = [
        random_matrix(8, 2, 11),
        random_matrix(8, 3, 12),
        random_matrix(8, 1, 13),
    ];
    let sigmas: Vec<f64> = reps.iter().map(|r| median_bandwidth(r).unwrap()).collect();
    for alpha in [1.01, 2.0] {
        let err = grad_check(
            |t, vs| {
                let grams = vs
                    .iter()
                    .zip(&sigmas)
                    .map(|(v, &s)| t.gaussian_gram(*v, s))
                    .collect::<cumi::Result<Vec<_>>>()?;
                Ok(total_correlation_var(t, &grams, alpha)?.0)
            },
            &reps,
            EPS,
        )
        .unwrap();
        assert!(err <= TOL, "alpha={alpha}: relative error {err:e}");
    }
}

fn toy_problem(labelled: bool) -> (CumiModel, Vec<Matrix>, Option<Vec<usize>>) {
    let specs = ViewSpec::list(&[5, 5]);
    let mut model = if labelled {
        CumiModel::init(&specs, 3, 7).unwrap()
    } else {
        CumiModel::with_latents(
            &specs,
            cumi::model::LatentDims {
                common: 2,
                unique: 2,
            },
            None,
            7,
        )
        .unwrap()
    };
    // Biases start at zero, so a row whose previous layer is fully inactive
    // puts the next pre-activation exactly on the ReLU kink. Jitter every
    // parameter so the check runs at a point where the objective is smooth.
    let jittered: Vec<Matrix> = model
        .params()
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            p.add(&random_matrix(p.rows(), p.cols(), 100 + k as u64).scale(0.1))
                .unwrap()
        })
        .collect();
    model.set_params(&jittered).unwrap();
    let views = vec![random_matrix(8, 5, 21), random_matrix(8, 5, 22)];
    let labels = labelled.then(|| (0..8).map(|i| i % 3).collect());
    (model, views, labels)
}

fn full_loss_error(labelled: bool, donor: usize) -> f64 {
    let (model, views, labels) = toy_problem(labelled);
    let config = TrainConfig {
        beta: 0.3,
        gamma: 0.5,
        ..TrainConfig::default()
    };
    let sigmas = latent_bandwidths(&model, &views, donor, BandwidthMode::Median).unwrap();
    let mut leaves: Vec<Matrix> = model.params().into_iter().cloned().collect();
    let n_params = leaves.len();
    leaves.extend(views.iter().cloned());
    grad_check(
        |t, vs| {
            let bound = model.bind_vars(t, &vs[..n_params])?;
            let terms = compute_loss(
                &bound,
                &vs[n_params..],
                labels.as_deref(),
                donor,
                &config,
                Some(&sigmas),
            )?;
            Ok(terms.loss)
        },
        &leaves,
        EPS,
    )
    .unwrap()
}

#[test]
fn full_objective_gradient_matches_central_differences() {
    for donor in [0, 1] {
        let err = full_loss_error(true, donor);
        assert!(err <= TOL, "donor {donor}: relative error {err:e}");
    }
}

#[test]
fn unsupervised_objective_gradient_matches_central_differences() {
    let err = full_loss_error(false, 1);
    assert!(err <= TOL, "relative error {err:e}");
}
