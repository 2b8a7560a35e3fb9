use paneval::ssim::{batch_ssim, convolve_valid, gaussian_kernel, ssim, GrayImage, Pairing, SsimParams};
use paneval::Matrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> GrayImage {
    GrayImage::new(h, w, (0..h * w).map(|_| rng.random::<f64>()).collect()).unwrap()
}

/// Window weights straight from the Gaussian formula.
fn oracle_window(size: usize, sigma: f64) -> Vec<Vec<f64>> {
    let c = (size / 2) as f64;
    let mut w: Vec<Vec<f64>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| {
                    let (dy, dx) = (i as f64 - c, j as f64 - c);
                    (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
                })
                .collect()
        })
        .collect();
    let total: f64 = w.iter().flatten().sum();
    w.iter_mut().flatten().for_each(|v| *v /= total);
    w
}

/// Per-window centered statistics, one window at a time.
#[allow(clippy::needless_range_loop)]
fn oracle_ssim(x: &GrayImage, y: &GrayImage, p: &SsimParams) -> (f64, Vec<f64>) {
    let n = p.window_size;
    let w = oracle_window(n, p.sigma);
    let c1 = (p.k1 * p.dynamic_range).powi(2);
    let c2 = (p.k2 * p.dynamic_range).powi(2);
    let mut map = Vec::new();
    for r in 0..=x.height() - n {
        for c in 0..=x.width() - n {
            let (mut mx, mut my) = (0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    mx += w[i][j] * x.get(r + i, c + j);
                    my += w[i][j] * y.get(r + i, c + j);
                }
            }
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let dx = x.get(r + i, c + j) - mx;
                    let dy = y.get(r + i, c + j) - my;
                    vx += w[i][j] * dx * dx;
                    vy += w[i][j] * dy * dy;
                    cxy += w[i][j] * dx * dy;
                }
            }
            map.push(
                ((2.0 * mx * my + c1) * (2.0 * cxy + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2)),
            );
        }
    }
    (map.iter().sum::<f64>() / map.len() as f64, map)
}

#[test]
fn kernel_center_matches_closed_form() {
    let k = gaussian_kernel(11, 1.5).unwrap();
    let mut total = 0.0;
    for dy in -5i32..=5 {
        for dx in -5i32..=5 {
            total += (-((dx * dx + dy * dy) as f64) / (2.0 * 1.5 * 1.5)).exp();
        }
    }
    assert!((k.get(5, 5) - 1.0 / total).abs() < 1e-12);
    let sum: f64 = k.as_slice().iter().sum();
    assert!((sum - 1.0).abs() < 1e-12);
}

#[test]
fn kernel_rotation_and_transpose_invariant() {
    for (size, sigma) in [(3, 0.7), (7, 1.2), (11, 1.5)] {
        let k = gaussian_kernel(size, sigma).unwrap();
        for i in 0..size {
            for j in 0..size {
                assert_eq!(k.get(i, j), k.get(j, i));
                assert_eq!(k.get(i, j), k.get(j, size - 1 - i));
            }
        }
    }
}

#[test]
fn convolution_matches_nested_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let img = random_image(&mut rng, 16, 16);
    let kernel = Matrix::new(3, 3, (0..9).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let got = convolve_valid(&img, &kernel).unwrap();
    assert_eq!((got.rows(), got.cols()), (14, 14));
    for r in 0..14 {
        for c in 0..14 {
            let mut want = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    want += kernel.get(i, j) * img.get(r + i, c + j);
                }
            }
            assert!((got.get(r, c) - want).abs() < 1e-12);
        }
    }
}

#[test]
fn ssim_matches_window_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for params in [
        SsimParams::default(),
        SsimParams {
            window_size: 7,
            sigma: 1.0,
            ..SsimParams::default()
        },
    ] {
        let x = random_image(&mut rng, 24, 19);
        let y = random_image(&mut rng, 24, 19);
        let got = ssim(&x, &y, &params).unwrap();
        let (mean, map) = oracle_ssim(&x, &y, &params);
        assert!((got.mean_ssim - mean).abs() < 1e-9);
        for (g, w) in got.ssim_map.as_slice().iter().zip(&map) {
            assert!((g - w).abs() < 1e-9);
        }
        let avg = got.ssim_map.as_slice().iter().sum::<f64>() / map.len() as f64;
        assert_eq!(avg, got.mean_ssim);
    }
}

#[test]
fn cross_batch_is_mean_of_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cands: Vec<_> = (0..3).map(|_| random_image(&mut rng, 16, 16)).collect();
    let targs: Vec<_> = (0..2).map(|_| random_image(&mut rng, 16, 16)).collect();
    let p = SsimParams::default();
    let batch = batch_ssim(&cands, &targs, Pairing::Cross, &p).unwrap();
    assert_eq!(batch.pairs.len(), 6);
    let mut total = 0.0;
    for c in &cands {
        for t in &targs {
            total += ssim(c, t, &p).unwrap().mean_ssim;
        }
    }
    assert!((batch.mean_ssim - total / 6.0).abs() < 1e-12);

    let single = batch_ssim(&cands[..1], &targs[..1], Pairing::Indexed, &p).unwrap();
    assert_eq!(single.mean_ssim, ssim(&cands[0], &targs[0], &p).unwrap().mean_ssim);
}

#[test]
fn batch_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let cands: Vec<_> = (0..4).map(|_| random_image(&mut rng, 20, 20)).collect();
    let targs: Vec<_> = (0..4).map(|_| random_image(&mut rng, 20, 20)).collect();
    let p = SsimParams::default();
    let first = batch_ssim(&cands, &targs, Pairing::Cross, &p).unwrap();
    for _ in 0..5 {
        assert_eq!(batch_ssim(&cands, &targs, Pairing::Cross, &p).unwrap(), first);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetric_and_bounded(seed in any::<u64>(), h in 11usize..20, w in 11usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_image(&mut rng, h, w);
        let y = random_image(&mut rng, h, w);
        let p = SsimParams::default();
        let xy = ssim(&x, &y, &p).unwrap();
        let yx = ssim(&y, &x, &p).unwrap();
        prop_assert!((xy.mean_ssim - yx.mean_ssim).abs() <= 1e-12);
        prop_assert!(xy.ssim_map.as_slice().iter().all(|v| v.abs() <= 1.0 + 1e-9));
    }

    #[test]
    fn constant_pair_closed_form(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let p = SsimParams::default();
        let x = GrayImage::filled(13, 13, a).unwrap();
        let y = GrayImage::filled(13, 13, b).unwrap();
        let c1 = p.c1();
        let want = (2.0 * a * b + c1) / (a * a + b * b + c1);
        let got = ssim(&x, &y, &p).unwrap();
        prop_assert!(got.ssim_map.as_slice().iter().all(|v| (v - want).abs() <= 1e-9));
    }

    #[test]
    fn cross_pairing_permutation_invariant(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cands: Vec<_> = (0..3).map(|_| random_image(&mut rng, 12, 12)).collect();
        let targs: Vec<_> = (0..3).map(|_| random_image(&mut rng, 12, 12)).collect();
        let mut pc = cands.clone();
        let mut pt = targs.clone();
        pc.shuffle(&mut rng);
        pt.shuffle(&mut rng);
        let p = SsimParams::default();
        let a = batch_ssim(&cands, &targs, Pairing::Cross, &p).unwrap().mean_ssim;
        let b = batch_ssim(&pc, &pt, Pairing::Cross, &p).unwrap().mean_ssim;
        prop_assert!((a - b).abs() <= 1e-12);
    }
}
