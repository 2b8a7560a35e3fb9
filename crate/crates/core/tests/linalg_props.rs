use paneval::linalg::{self, cosine_similarity, covariance, mean_vector, sqrtm_psd, trace, Matrix, Vector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-3.0..3.0)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

fn naive_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows[0].len();
    (0..d)
        .map(|j| {
            let mut s = 0.0;
            for r in rows {
                s += r[j];
            }
            s / rows.len() as f64
        })
        .collect()
}

fn naive_cov(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mu = naive_mean(rows);
    let d = mu.len();
    let mut out = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                out[i][j] += (r[i] - mu[i]) * (r[j] - mu[j]);
            }
        }
    }
    for row in &mut out {
        for v in row.iter_mut() {
            *v /= (rows.len() - 1) as f64;
        }
    }
    out
}

fn frob_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn mean_matches_summation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = random_matrix(&mut rng, 100, 7);
    let got = mean_vector(&m).unwrap();
    let want = naive_mean(&m.to_rows());
    for (g, w) in got.as_slice().iter().zip(&want) {
        assert!((g - w).abs() <= 1e-12 * w.abs().max(1e-300), "{g} vs {w}");
    }
}

#[test]
fn covariance_matches_definition_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = random_matrix(&mut rng, 50, 4);
    let got = covariance(&m).unwrap();
    let want = Matrix::from_rows(&naive_cov(&m.to_rows())).unwrap();
    assert!(frob_diff(&got, &want) <= 1e-12 * want.frobenius_norm());
    assert_eq!(got.max_asymmetry(), 0.0);
    assert!(got.diagonal().iter().all(|v| *v >= 0.0));
}

#[test]
fn trace_matches_diagonal_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = random_matrix(&mut rng, 8, 8);
    let mut want = 0.0;
    for i in 0..8 {
        want += m.get(i, i);
    }
    assert_eq!(trace(&m).unwrap(), want);
}

#[test]
fn sqrtm_reconstructs_random_spd() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..30 {
        let d = rng.random_range(1..=32);
        let b = random_matrix(&mut rng, d, d);
        let a = b.matmul(&b.transpose()).unwrap();
        let s = sqrtm_psd(&a, linalg::DEFAULT_NEG_TOL).unwrap();
        assert_eq!(s.max_asymmetry(), 0.0);
        let ss = s.matmul(&s).unwrap();
        assert!(frob_diff(&ss, &a) <= 1e-8 * a.frobenius_norm());
    }
}

#[test]
fn sqrtm_handles_rank_deficient_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let b = random_matrix(&mut rng, 16, 3);
    let a = b.matmul(&b.transpose()).unwrap();
    let s = sqrtm_psd(&a, linalg::DEFAULT_NEG_TOL).unwrap();
    let ss = s.matmul(&s).unwrap();
    assert!(frob_diff(&ss, &a) <= 1e-8 * a.frobenius_norm().max(1.0));
}

fn vec_strategy(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, dim)
        .prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
}

proptest! {
    #[test]
    fn cosine_symmetric_and_scale_invariant(
        (u, v) in (1usize..16).prop_flat_map(|d| (vec_strategy(d), vec_strategy(d))),
        a in 1e-3f64..1e3,
        b in 1e-3f64..1e3,
    ) {
        let uu = Vector::new(u.clone()).unwrap();
        let vv = Vector::new(v.clone()).unwrap();
        let c = cosine_similarity(&uu, &vv).unwrap();
        prop_assert!((-1.0..=1.0).contains(&c));
        prop_assert!((c - cosine_similarity(&vv, &uu).unwrap()).abs() <= 1e-12);
        let us = Vector::new(u.iter().map(|x| x * a).collect()).unwrap();
        let vs = Vector::new(v.iter().map(|x| x * b).collect()).unwrap();
        prop_assert!((c - cosine_similarity(&us, &vs).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn stats_are_permutation_invariant(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 2..20),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = Matrix::from_rows(&rows).unwrap();
        let b = Matrix::from_rows(&shuffled).unwrap();
        let (ma, mb) = (mean_vector(&a).unwrap(), mean_vector(&b).unwrap());
        for (x, y) in ma.as_slice().iter().zip(mb.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
        let (ca, cb) = (covariance(&a).unwrap(), covariance(&b).unwrap());
        prop_assert!(frob_diff(&ca, &cb) <= 1e-12 * (1.0 + ca.frobenius_norm()));
        prop_assert!(ca.diagonal().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn sqrtm_reconstruction_bound(
        d in 1usize..10,
        seed in any::<u64>(),
        scale in 1e-3f64..1e3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_matrix(&mut rng, d, d);
        let mut a = b.matmul(&b.transpose()).unwrap();
        a = a.add_scaled(&a, scale - 1.0).unwrap();
        let s = sqrtm_psd(&a, linalg::DEFAULT_NEG_TOL).unwrap();
        let ss = s.matmul(&s).unwrap();
        prop_assert!(frob_diff(&ss, &a) <= 1e-8 * a.frobenius_norm().max(1.0));
    }
}
