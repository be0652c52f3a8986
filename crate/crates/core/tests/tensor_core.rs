use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tnlab::haar::{
    haar_unitary, random_hermitian, second_moment_channel, HermitianMatrix, SecondMomentWeights, UNITARY_TOL,
};
use tnlab::stats::{mean, standard_error_of_mean};
use tnlab::tensor::{adjoint, contract, contract_with_order, matmul, ContractionOrder, DenseTensor, C64, ONE, ZERO};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_tensor(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> DenseTensor {
    use rand::Rng;
    DenseTensor::from_fn(shape, |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

#[test]
fn haar_entry_second_moment_is_one_over_dim() {
    let mut r = rng(11);
    let n = 8;
    let samples: Vec<f64> = (0..10_000).map(|_| haar_unitary(n, &mut r).unwrap().get(2, 5).norm_sqr()).collect();
    let (m, se) = (mean(&samples), standard_error_of_mean(&samples).unwrap());
    assert!((m - 1.0 / n as f64).abs() <= 3.0 * se, "{m} ± {se}");
}

#[test]
fn haar_first_moment_vanishes() {
    let mut r = rng(12);
    let (n, samples) = (4, 20_000);
    let mut acc = vec![ZERO; n * n];
    for _ in 0..samples {
        let u = haar_unitary(n, &mut r).unwrap();
        for (a, z) in acc.iter_mut().zip(u.as_slice()) {
            *a += z;
        }
    }
    let limit = 5.0 / (samples as f64).sqrt() / (n as f64).sqrt();
    for a in acc {
        assert!((a / samples as f64).norm() < limit);
    }
}

#[test]
fn random_hermitian_spectrum_is_real() {
    let mut r = rng(13);
    for _ in 0..100 {
        let h = random_hermitian(8, &mut r).unwrap();
        assert!(h.hermiticity_defect() <= 1e-14);
        let (vals, vecs) = h.eigh();
        // V diag(λ) V† reproduces H
        let scaled: Vec<C64> = (0..64).map(|k| vecs[k] * vals[k % 8]).collect();
        let back = matmul(&scaled, &adjoint(&vecs, 8, 8), 8, 8, 8);
        let err = back.iter().zip(h.as_slice()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }
    let scalar = random_hermitian(1, &mut r).unwrap();
    assert_eq!(scalar.get(0, 0).im, 0.0);
}

#[test]
fn trace_of_identity() {
    let id = DenseTensor::identity(8);
    let t = contract(&[&id], &[&['a', 'a']], &[]).unwrap();
    assert!((t.into_scalar().unwrap() - C64::new(8.0, 0.0)).norm() < 1e-14);
}

#[test]
fn unitary_times_adjoint_contracts_to_identity() {
    let mut r = rng(14);
    let u = haar_unitary(6, &mut r).unwrap();
    let (t, td) = (u.to_tensor(), u.adjoint().to_tensor());
    let out = contract(&[&t, &td], &[&["i", "k"], &["k", "j"]], &["i", "j"]).unwrap();
    assert!(out.max_abs_diff(&DenseTensor::identity(6)) < UNITARY_TOL);
}

#[test]
fn three_tensor_network_is_order_independent() {
    let mut r = rng(15);
    let a = random_tensor(vec![3, 4, 5], &mut r);
    let b = random_tensor(vec![5, 2, 3], &mut r);
    let c = random_tensor(vec![2, 4, 6], &mut r);
    let labels: [&[char]; 3] = [&['i', 'j', 'k'], &['k', 'l', 'i'], &['l', 'j', 'm']];
    let greedy = contract_with_order(&[&a, &b, &c], &labels, &['m'], ContractionOrder::Greedy).unwrap();
    let linear = contract_with_order(&[&a, &b, &c], &labels, &['m'], ContractionOrder::LeftToRight).unwrap();
    let scale = greedy.max_abs().max(1.0);
    assert!(greedy.max_abs_diff(&linear) <= 1e-10 * scale);
    // direct sum oracle
    for m in 0..6 {
        let mut s = ZERO;
        for i in 0..3 {
            for j in 0..4 {
                for k in 0..5 {
                    for l in 0..2 {
                        s += a.get(&[i, j, k]) * b.get(&[k, l, i]) * c.get(&[l, j, m]);
                    }
                }
            }
        }
        assert!((greedy.get(&[m]) - s).norm() <= 1e-10 * scale);
    }
}

fn pure_pair(psi: &[C64]) -> DenseTensor {
    let n = psi.len();
    DenseTensor::from_fn(vec![n, n, n, n], |i| psi[i[0]] * psi[i[1]] * (psi[i[2]] * psi[i[3]]).conj())
}

#[test]
fn channel_preserves_trace() {
    let mut r = rng(16);
    let n = 5;
    let u = haar_unitary(n, &mut r).unwrap();
    let psi: Vec<C64> = (0..n).map(|i| u.get(i, 0)).collect();
    let w = SecondMomentWeights::new(n).unwrap();
    let out = second_moment_channel(&w, &pure_pair(&psi)).unwrap();
    let tr: C64 = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| out.get(&[a, b, a, b])).sum();
    assert!((tr - ONE).norm() < 1e-12);
}

#[test]
fn channel_commutes_with_copy_swap() {
    let mut r = rng(17);
    let n = 4;
    let x = random_tensor(vec![n, n, n, n], &mut r);
    let w = SecondMomentWeights::new(n).unwrap();
    let swap = [1, 0, 3, 2];
    let a = second_moment_channel(&w, &x.permute(&swap)).unwrap();
    let b = second_moment_channel(&w, &x).unwrap().permute(&swap);
    assert!(a.max_abs_diff(&b) < 1e-14);
}

#[test]
fn weingarten_weight_signs() {
    for n in 2..12 {
        let w = SecondMomentWeights::new(n).unwrap();
        assert!(w.w_same > 0.0 && w.w_cross < 0.0 && w.w_cross.abs() < w.w_same);
    }
    assert!(SecondMomentWeights::new(1).is_err());
}

#[test]
fn malformed_tensors_are_rejected() {
    assert!(DenseTensor::new(vec![2, 3], vec![ZERO; 5]).is_err());
    assert!(DenseTensor::new(vec![2], vec![C64::new(f64::NAN, 0.0), ZERO]).is_err());
    assert!(HermitianMatrix::new(2, vec![ZERO, ONE, ZERO, ZERO]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn haar_samples_are_unitary(seed in any::<u64>(), dim in 1usize..12) {
        let u = haar_unitary(dim, &mut rng(seed)).unwrap();
        prop_assert!(u.unitarity_defect() <= UNITARY_TOL);
    }

    #[test]
    fn contraction_is_multilinear(seed in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let mut r = rng(seed);
        let a = random_tensor(vec![3, 4], &mut r);
        let b = random_tensor(vec![4, 2], &mut r);
        let c = C64::new(re, im);
        let plain = contract(&[&a, &b], &[&[0, 1], &[1, 2]], &[0, 2]).unwrap();
        let scaled = contract(&[&a.scale(c), &b], &[&[0, 1], &[1, 2]], &[0, 2]).unwrap();
        prop_assert!(scaled.max_abs_diff(&plain.scale(c)) <= 1e-12 * (1.0 + plain.max_abs() * c.norm()));
    }

    #[test]
    fn permute_then_inverse_is_identity(seed in any::<u64>(), perm in Just([2usize, 0, 3, 1]).prop_shuffle()) {
        let t = random_tensor(vec![2, 3, 4, 5], &mut rng(seed));
        let mut inv = [0; 4];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        prop_assert_eq!(t.permute(&perm).permute(&inv), t);
    }
}
