//! Principal components against a symmetric eigendecomposition oracle.

use mob_core::harness::pca;
use mob_core::ndmath::Rng;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn covariance(samples: &[Vec<f64>]) -> DMatrix<f64> {
    let n = samples.len();
    let d = samples[0].len();
    let x = DMatrix::from_fn(n, d, |i, j| samples[i][j]);
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    centered.transpose() * &centered / (n - 1) as f64
}

/// Correlated Gaussian samples with a well-separated spectrum.
fn correlated(rng: &mut Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mix = DMatrix::from_fn(d, d, |_, _| rng.normal());
    let scales: Vec<f64> = (0..d).map(|k| 3.0 / (k + 1) as f64).collect();
    (0..n)
        .map(|_| {
            let z = nalgebra::DVector::from_iterator(d, scales.iter().map(|s| s * rng.normal()));
            (&mix * z).iter().copied().collect()
        })
        .collect()
}

#[test]
fn four_to_one_spectrum_splits_eighty_twenty() {
    let samples = vec![vec![2.0, 0.0], vec![-2.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
    let r = pca(&samples, 2).unwrap();
    assert!((r.explained_variance[0] - 0.8).abs() < 1e-12);
    assert!((r.explained_variance[1] - 0.2).abs() < 1e-12);
    assert!((r.directions[0][0] - 1.0).abs() < 1e-8 && r.directions[0][1].abs() < 1e-8, "{:?}", r.directions);
}

#[test]
fn matches_symmetric_eigendecomposition() {
    let mut rng = Rng::new(21);
    for d in [3, 6, 10] {
        let samples = correlated(&mut rng, 400, d);
        let q = 3.min(d);
        let r = pca(&samples, q).unwrap();
        let eig = SymmetricEigen::new(covariance(&samples));
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let trace: f64 = eig.eigenvalues.iter().sum();
        for k in 0..q {
            let lambda = eig.eigenvalues[order[k]];
            assert!((r.eigenvalues[k] - lambda).abs() <= 1e-8 * lambda.max(1.0), "d={d} k={k}");
            assert!((r.explained_variance[k] - lambda / trace).abs() < 1e-9);
            let v = eig.eigenvectors.column(order[k]);
            let overlap: f64 = r.directions[k].iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            assert!((overlap.abs() - 1.0).abs() < 1e-8, "d={d} k={k} overlap {overlap}");
        }
        for a in 0..q {
            for b in 0..q {
                let dot: f64 = r.directions[a].iter().zip(&r.directions[b]).map(|(x, y)| x * y).sum();
                assert!((dot - f64::from(u8::from(a == b))).abs() < 1e-8);
            }
        }
        let projected = covariance(&r.coordinates);
        for a in 0..q {
            for b in 0..q {
                let expected = if a == b { r.eigenvalues[a] } else { 0.0 };
                assert!((projected[(a, b)] - expected).abs() < 1e-8 * r.eigenvalues[0], "d={d} ({a},{b})");
            }
        }
    }
}

#[test]
fn sample_order_does_not_matter() {
    let mut rng = Rng::new(4);
    let samples = correlated(&mut rng, 300, 5);
    let mut shuffled = samples.clone();
    rng.shuffle(&mut shuffled);
    let a = pca(&samples, 3).unwrap();
    let b = pca(&shuffled, 3).unwrap();
    for k in 0..3 {
        assert!((a.eigenvalues[k] - b.eigenvalues[k]).abs() < 1e-9 * a.eigenvalues[0]);
        for (x, y) in a.directions[k].iter().zip(&b.directions[k]) {
            assert!((x - y).abs() < 1e-8);
        }
    }
}

proptest! {
    #[test]
    fn explained_fractions_are_ordered_fractions(seed in any::<u64>(), n in 3usize..40, d in 1usize..6) {
        let mut rng = Rng::new(seed);
        let samples: Vec<Vec<f64>> = (0..n).map(|_| rng.normal_vec(d)).collect();
        let r = pca(&samples, d.min(2)).unwrap();
        for f in &r.explained_variance {
            prop_assert!((0.0..=1.0 + 1e-12).contains(f));
        }
        for w in r.explained_variance.windows(2) {
            prop_assert!(w[0] >= w[1] - 1e-12);
        }
        prop_assert!(r.explained_variance.iter().sum::<f64>() <= 1.0 + 1e-9);
    }
}
