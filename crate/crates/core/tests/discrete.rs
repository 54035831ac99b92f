use cumi::info::DiscretePmf;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_pmf(rng: &mut ChaCha8Rng, shape: Vec<usize>, labels: &[&str]) -> DiscretePmf {
    let cells: usize = shape.iter().product();
    // a few exact zeros keep the 0·log 0 convention exercised
    let raw: Vec<f64> = (0..cells)
        .map(|_| {
            if rng.random_bool(0.15) {
                0.0
            } else {
                rng.random_range(0.01..1.0)
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let raw = if total == 0.0 {
        vec![1.0 / cells as f64; cells]
    } else {
        raw.iter().map(|p| p / total).collect()
    };
    let labels = labels.iter().map(|s| s.to_string()).collect();
    DiscretePmf::new(shape, labels, raw).unwrap()
}

/// Plain-loop Shannon entropy of a marginal, independent of the library's
/// axis bookkeeping.
fn marginal_entropy(probs: &[f64], shape: [usize; 3], keep: [bool; 3]) -> f64 {
    let mut acc = std::collections::HashMap::<(usize, usize, usize), f64>::new();
    for a in 0..shape[0] {
        for b in 0..shape[1] {
            for c in 0..shape[2] {
                let p = probs[(a * shape[1] + b) * shape[2] + c];
                let key = (
                    if keep[0] { a } else { 0 },
                    if keep[1] { b } else { 0 },
                    if keep[2] { c } else { 0 },
                );
                *acc.entry(key).or_default() += p;
            }
        }
    }
    acc.values()
        .filter(|&&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

#[test]
fn shared_part_plus_unique_dependence() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let kc = rng.random_range(2..5);
        let k1 = rng.random_range(2..5);
        let k2 = rng.random_range(2..5);
        let c = random_pmf(&mut rng, vec![kc], &["c"]);
        let u = random_pmf(&mut rng, vec![k1, k2], &["u1", "u2"]);
        let p = DiscretePmf::product(&[&c, &u]).unwrap();
        let (ci, u1, u2) = (
            p.axis("c").unwrap(),
            p.axis("u1").unwrap(),
            p.axis("u2").unwrap(),
        );

        let lhs = p.mutual_information(&[ci, u1], &[ci, u2]).unwrap();
        let rhs = p.entropy(&[ci]).unwrap() + p.mutual_information(&[u1], &[u2]).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12, "{lhs} vs {rhs}");

        // the same identity from plain marginal sums over a table rebuilt
        // cell by cell from the factors
        let mut probs = Vec::with_capacity(kc * k1 * k2);
        for a in 0..kc {
            for b in 0..k1 {
                for d in 0..k2 {
                    probs.push(cell(&c, &[a]) * cell(&u, &[b, d]));
                }
            }
        }
        let shape = [kc, k1, k2];
        let h = |keep| marginal_entropy(&probs, shape, keep);
        let oracle = h([true, true, false]) + h([true, false, true]) - h([true, true, true]);
        let h_c = h([true, false, false]);
        let i_u = h([false, true, false]) + h([false, false, true]) - h([false, true, true]);
        assert!((oracle - (h_c + i_u)).abs() <= 1e-12);
        assert!((oracle - lhs).abs() <= 1e-12);
    }
}

fn cell(p: &DiscretePmf, idx: &[usize]) -> f64 {
    let shape = p.shape();
    let mut flat = 0;
    for (i, &k) in idx.iter().enumerate() {
        flat = flat * shape[i] + k;
    }
    p.probs()[flat]
}

fn fair(label: &str) -> DiscretePmf {
    DiscretePmf::new(vec![2], vec![label.into()], vec![0.5, 0.5]).unwrap()
}

#[test]
fn closed_forms_are_exact() {
    // independent fair bits: only the shared bit is mutual
    let p = DiscretePmf::product(&[&fair("c"), &fair("u1"), &fair("u2")]).unwrap();
    assert_eq!(p.mutual_information(&[0, 1], &[0, 2]).unwrap(), 1.0);

    // u1 = u2: the unique parts share a second bit
    let copy = DiscretePmf::new(
        vec![2, 2],
        vec!["u1".into(), "u2".into()],
        vec![0.5, 0.0, 0.0, 0.5],
    )
    .unwrap();
    let p = DiscretePmf::product(&[&fair("c"), &copy]).unwrap();
    assert_eq!(p.mutual_information(&[0, 1], &[0, 2]).unwrap(), 2.0);
}
