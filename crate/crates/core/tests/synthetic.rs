use cumi::synthetic::{
    alignment, common_signal, generate, linear_cca, noise, remix_views, run_synthetic,
    write_signals_csv, SyntheticConfig, SYNTH_WIDTH,
};
use cumi::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

/// Textbook Pearson correlation, written out independently of the library.
fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let saa: f64 = a.iter().map(|x| x * x).sum();
    let sbb: f64 = b.iter().map(|x| x * x).sum();
    (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt())
}

#[test]
fn generator_follows_the_latent_model() {
    let (views, truth) = generate(3, 100).unwrap();
    assert_eq!(views.len(), 2);
    assert!(views.iter().all(|x| x.shape() == (100, SYNTH_WIDTH)));
    assert!(truth.t.iter().all(|t| (-1.0..1.0).contains(t)));
    for (i, &t) in truth.t.iter().enumerate() {
        assert_eq!(truth.c[i], common_signal(t));
        for j in 0..SYNTH_WIDTH {
            let x1 = truth.c[i] * truth.f1.get(0, j) + truth.u1[i] * truth.f1.get(1, j) + noise(t);
            let x2 = truth.c[i] * truth.f2.get(0, j) + truth.u2[i] * truth.f2.get(1, j) + noise(t);
            assert!((views[0].get(i, j) - x1).abs() < 1e-12);
            assert!((views[1].get(i, j) - x2).abs() < 1e-12);
        }
    }
    assert_eq!(generate(3, 100).unwrap().0, views);
    assert_ne!(generate(4, 100).unwrap().0, views);
}

#[test]
fn alignment_matches_pearson_and_rejects_noise() {
    let (_, truth) = generate(0, 100).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let r: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = alignment(&r, &truth.c).unwrap();
        assert!((a - pearson(&r, &truth.c).abs()).abs() < 1e-12);
        assert!(a < 0.3, "noise aligned at {a}");
    }
    let flipped: Vec<f64> = truth.c.iter().map(|v| 3.0 - 2.0 * v).collect();
    assert!((alignment(&flipped, &truth.c).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(alignment(&vec![1.0; 100], &truth.c).unwrap(), 0.0);
}

#[test]
fn cca_beats_every_random_direction_pair() {
    let (views, _) = generate(1, 100).unwrap();
    let x = views[0]
        .add(&gaussian(100, SYNTH_WIDTH, 8).scale(0.3))
        .unwrap();
    let y = views[1]
        .add(&gaussian(100, SYNTH_WIDTH, 9).scale(0.3))
        .unwrap();
    let cca = linear_cca(&x, &y, 1).unwrap();
    let rho = cca.correlations[0];
    let mut best = 0.0f64;
    for k in 0..500u64 {
        let a = gaussian(SYNTH_WIDTH, 1, 1000 + 2 * k);
        let b = gaussian(SYNTH_WIDTH, 1, 1001 + 2 * k);
        let r = pearson(
            &x.matmul(&a).unwrap().column(0),
            &y.matmul(&b).unwrap().column(0),
        )
        .abs();
        best = best.max(r);
    }
    assert!(rho + 1e-9 >= best, "CCA {rho} below a random pair {best}");
    let scores = pearson(&cca.x_scores.column(0), &cca.y_scores.column(0));
    assert!((scores.abs() - rho).abs() < 1e-6);
}

#[test]
fn cca_on_pure_noise_does_not_find_the_signal() {
    let (_, truth) = generate(2, 100).unwrap();
    let cca = linear_cca(&gaussian(100, 4, 30), &gaussian(100, 4, 31), 1).unwrap();
    let a = alignment(&cca.x_scores.column(0), &truth.c).unwrap();
    assert!(a < 0.35, "pure-noise CCA aligned at {a}");
}

#[test]
fn remixing_keeps_the_canonical_correlation() {
    let (views, _) = generate(6, 100).unwrap();
    let views: Vec<Matrix> = views
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.add(&gaussian(100, SYNTH_WIDTH, 40 + i as u64).scale(0.1))
                .unwrap()
        })
        .collect();
    let mixed = remix_views(&views, 6).unwrap();
    assert_ne!(mixed, views);
    let before = linear_cca(&views[0], &views[1], 1).unwrap().correlations[0];
    let after = linear_cca(&mixed[0], &mixed[1], 1).unwrap().correlations[0];
    assert!((before - after).abs() < 1e-6, "{before} vs {after}");
}

#[test]
fn short_run_reports_every_signal() {
    let mut config = SyntheticConfig::with_seed(1);
    config.train.epochs = 2;
    let run = run_synthetic(&config).unwrap();
    assert_eq!(run.history.len(), 2);
    assert_eq!(run.signals.rows.len(), 100);
    assert!(run
        .signals
        .rows
        .iter()
        .all(|r| r.len() == run.signals.columns.len()));
    assert!(run.signals.rows.windows(2).all(|w| w[0][0] <= w[1][0]));
    let a = run.report.alignment;
    for v in [a.c_v1, a.c_v2, a.u1, a.u2, a.u1_vs_c, a.u2_vs_c] {
        assert!((0.0..=1.0).contains(&v));
    }
    assert_eq!(run.report.first_epoch.epoch, 1);
    assert_eq!(run.report.last_epoch.epoch, 2);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("signals.csv");
    write_signals_csv(&path, &run.signals).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 101);
    assert!(text.starts_with("t,c_true,"));
}
