use graphtv::graphs::{build_grid, incidence};
use graphtv::haar::{
    haar_denoise_2d, haar_transform_1d, haar_transform_2d, inverse_1d, inverse_2d, soft_threshold, HaarBasis2D,
};
use graphtv::signals::{gaussian_noise, island_signal, NoiseModel};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|t| t * t).sum::<f64>().sqrt()
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

#[test]
fn one_dimensional_transform() {
    let c = haar_transform_1d(&[2.5; 8]).unwrap();
    assert!((c[0] - 2.5 * 8f64.sqrt()).abs() < 1e-12);
    assert!(c[1..].iter().all(|v| v.abs() < 1e-12));

    let x = random_vec(16, 1);
    let c = haar_transform_1d(&x).unwrap();
    assert!((norm(&x) - norm(&c)).abs() < 1e-10);
    let back = inverse_1d(&c).unwrap();
    assert!(x.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-10));
    assert!(haar_transform_1d(&[1.0; 6]).is_err());
}

#[test]
fn basis_is_orthonormal_and_matches_fast_transform() {
    for side in [2usize, 4, 8, 16, 32] {
        let basis = HaarBasis2D::new(side).unwrap();
        let o = basis.matrix().unwrap();
        assert_eq!(o.ncols(), side * side);
        let gram = o.transpose() * &o;
        let dev = (gram - DMatrix::<f64>::identity(side * side, side * side)).abs().max();
        assert!(dev <= 1e-10, "side {side}: {dev}");

        let x = random_vec(side * side, side as u64);
        let fast = haar_transform_2d(&x, side).unwrap();
        let slow = o.transpose() * nalgebra::DVector::from_vec(x.clone());
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).abs() <= 1e-10, "side {side}: {a} vs {b}");
        }
    }
}

#[test]
fn two_dimensional_round_trip_and_parseval() {
    for side in [1usize, 2, 8, 64] {
        let x = random_vec(side * side, 40 + side as u64);
        let c = haar_transform_2d(&x, side).unwrap();
        assert!((norm(&x) - norm(&c)).abs() < 1e-10);
        let back = inverse_2d(&c, side).unwrap();
        assert!(x.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-10));
    }
}

#[test]
fn mean_slot_and_constant_images() {
    let x = random_vec(64, 9);
    let c = haar_transform_2d(&x, 8).unwrap();
    let mean = x.iter().sum::<f64>() / 64.0;
    assert!((c[0] - 8.0 * mean).abs() < 1e-12);

    let c = haar_transform_2d(&[3.0; 16], 4).unwrap();
    assert!((c[0] - 12.0).abs() < 1e-12);
    assert_eq!(c.iter().filter(|v| v.abs() > 1e-12).count(), 1);
}

fn weak_l1_ratio(theta: &[f64], side: usize) -> f64 {
    let d = incidence(&build_grid(2, side).unwrap());
    let tv = d.l1_of_diff(theta);
    let mut c: Vec<f64> = haar_transform_2d(theta, side).unwrap().iter().map(|v| v.abs()).collect();
    c.sort_by(|a, b| b.total_cmp(a));
    c.iter().enumerate().map(|(k, v)| (k + 1) as f64 * v).fold(0.0, f64::max) / tv
}

#[test]
fn halfplane_coefficients_decay_like_weak_l1() {
    let side = 8;
    let theta: Vec<f64> = (0..64).map(|i| if i % side < side / 2 { 1.0 } else { 0.0 }).collect();
    let d = incidence(&build_grid(2, side).unwrap());
    assert_eq!(d.l1_of_diff(&theta), side as f64);
    assert!(weak_l1_ratio(&theta, side) <= 10.0);
}

#[test]
fn random_piecewise_constant_images_satisfy_weak_l1() {
    let side = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let mut theta = vec![0.0; side * side];
        for _ in 0..rng.gen_range(1..6) {
            let (a1, b1) = (rng.gen_range(0..side), rng.gen_range(0..side));
            let (a2, b2) = (rng.gen_range(0..side), rng.gen_range(0..side));
            let h = rng.gen_range(-3.0..3.0);
            for i2 in a2.min(b2)..=a2.max(b2) {
                for i1 in a1.min(b1)..=a1.max(b1) {
                    theta[i1 + side * i2] += h;
                }
            }
        }
        let m = theta.iter().sum::<f64>() / theta.len() as f64;
        theta.iter_mut().for_each(|t| *t -= m);
        if theta.iter().all(|t| t.abs() < 1e-12) {
            continue;
        }
        worst = worst.max(weak_l1_ratio(&theta, side));
    }
    assert!(worst <= 10.0, "{worst}");
}

#[test]
fn soft_threshold_cases() {
    assert_eq!(soft_threshold(&[0.0, 1.5, -1.5, 3.0, -3.0], 1.5), vec![0.0, 0.0, 0.0, 1.5, -1.5]);
}

#[test]
fn denoiser_basics() {
    let y = random_vec(16, 3);
    let same = haar_denoise_2d(&y, 4, 0.0).unwrap();
    assert!(same.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-12));
    assert!(haar_denoise_2d(&[0.0; 9], 3, 0.5).is_err());

    // constant image: only the mean slot survives and it shrinks by tau
    let side = 8;
    let sigma = 0.01;
    let out = haar_denoise_2d(&[5.0; 64], side, sigma).unwrap();
    let tau = sigma * (2.0 * 64f64.ln()).sqrt();
    for v in &out {
        assert!((v - (5.0 - tau / side as f64)).abs() < 1e-12);
    }
}

#[test]
fn thresholding_beats_identity_on_island_images() {
    let side = 8;
    let n = side * side;
    // two islands covering column pairs, aligned with the dyadic blocks
    let truth = island_signal(n, 2, 16).unwrap();
    let mut wins = 0;
    for seed in 0..50u64 {
        let e = gaussian_noise(n, &NoiseModel { sigma: 0.5, seed, stream_id: 0 }).unwrap();
        let y: Vec<f64> = truth.iter().zip(&e).map(|(a, b)| a + b).collect();
        let fit = haar_denoise_2d(&y, side, 0.5).unwrap();
        if mse(&fit, &truth) <= mse(&y, &truth) {
            wins += 1;
        }
    }
    assert!(wins >= 40, "{wins} of 50");
}
