use loopfiber::fourier::TruncatedLoop;
use loopfiber::linalg::{self, CVector, C64};
use loopfiber::transport::{parallel_transport, BaseLoop, ConnectionSpec, TransportFrame};
use loopfiber::twist::{
    fourier_decompose_twisted, j_apply, j_embed, j_extend, module_scale, periodic_loop, phi_inverse, rotate,
    transported_inner_product, GaugeTwist, TwistedSection,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const N: usize = 128;

fn connection(which: u8) -> ConnectionSpec {
    match which % 3 {
        0 => ConnectionSpec::flat(2, 2),
        1 => ConnectionSpec::abelian2d(1.3),
        _ => ConnectionSpec::su2_sample(),
    }
}

fn frame(which: u8) -> TransportFrame {
    parallel_transport(&connection(which), &BaseLoop::ellipse([0.2, -0.1], 1.1, 0.6), N).unwrap()
}

fn random_section(frame: &TransportFrame, seed: u64) -> TwistedSection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = TruncatedLoop::random(&mut rng, frame.n(), -5, 5);
    j_apply(frame, &p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn j_and_phi_are_inverse(which in 0u8..3, seed in any::<u64>()) {
        let f = frame(which);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = TruncatedLoop::random(&mut rng, 1, -6, 6);
        let v = linalg::random_vector(&mut rng, f.n());
        let s = j_extend(&f, &g, &v).unwrap();
        prop_assert!(s.quasi_periodicity_residual() <= 1e-7);
        let p = phi_inverse(&f, &s).unwrap();
        prop_assert!(p.max_abs_diff(&TruncatedLoop::tensor(&g, &v).unwrap()) <= 1e-8);
        prop_assert!(j_apply(&f, &p).unwrap().max_distance(&s) <= 1e-7);
    }

    #[test]
    fn module_action_commutes_with_phi(which in 0u8..3, seed in any::<u64>()) {
        let f = frame(which);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = TruncatedLoop::random(&mut rng, 1, -3, 3);
        let s = random_section(&f, seed ^ 0x5a5a);
        let lhs = phi_inverse(&f, &module_scale(&g, &s).unwrap()).unwrap();
        let rhs = phi_inverse(&f, &s).unwrap().scalar_mul(&g).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-9);
    }

    #[test]
    fn rotation_is_a_group_action(which in 0u8..3, seed in any::<u64>(), a in -60i64..60, b in -60i64..60) {
        let s = random_section(&frame(which), seed);
        let lhs = rotate(&rotate(&s, a).unwrap(), b).unwrap();
        let rhs = rotate(&s, a + b).unwrap();
        prop_assert!(lhs.max_distance(&rhs) <= 1e-9);
        prop_assert!(lhs.base().same_loop(rhs.base()));
        prop_assert!(lhs.quasi_periodicity_residual() <= 1e-7);
    }

    #[test]
    fn fourier_parts_split_and_are_orthogonal(which in 0u8..3, seed in any::<u64>()) {
        let f = frame(which);
        let s = random_section(&f, seed);
        let (plus, minus) = fourier_decompose_twisted(&f, &s).unwrap();
        prop_assert!(plus.add(&minus).unwrap().max_distance(&s) <= 1e-8);
        prop_assert!(transported_inner_product(&f, &plus, &minus).unwrap().norm() <= 1e-10);
        // z·plus stays in the plus image
        let z = TruncatedLoop::scalar([(1, C64::new(1.0, 0.0))]);
        let (_, leak) = fourier_decompose_twisted(&f, &module_scale(&z, &plus).unwrap()).unwrap();
        prop_assert!(leak.samples().iter().all(|x| x.norm() <= 1e-9));
    }
}

/// Rotating `j(v)` by `k` grid steps equals `j'(T(k/N) v)` for the frame of
/// the rotated loop, transported from scratch.
#[test]
fn j_is_equivariant_under_rotation() {
    for which in 0..3u8 {
        let conn = connection(which);
        let base = BaseLoop::ellipse([0.2, -0.1], 1.1, 0.6);
        let f = parallel_transport(&conn, &base, N).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(which as u64);
        let v = linalg::random_vector(&mut rng, conn.n());
        for k in [1i64, 17, 64, 127, -40] {
            let rotated = rotate(&j_embed(&f, &v).unwrap(), k).unwrap();
            let independent = parallel_transport(&conn, rotated.base(), N).unwrap();
            let moved = f.lifted(k) * &v;
            let expect = j_embed(&independent, &moved).unwrap();
            let gap = rotated.max_distance(&expect);
            assert!(gap <= 1e-7, "{} k = {k}: {gap:e}", conn.name());
            for i in 0..N {
                let derived = rotated.twist().at(i);
                let direct = independent.rotated_twist_at(i);
                assert!(linalg::frobenius(&(derived - direct)) <= 1e-7);
            }
        }
    }
}

#[test]
fn identity_twist_is_the_untwisted_fiber() {
    let base = BaseLoop::circle([0.0, 0.0], 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p = TruncatedLoop::random(&mut rng, 2, -7, 7);
    let mut samples = p.sample_grid(N);
    samples.push(samples[0].clone());
    let s = TwistedSection::from_samples(base, &GaugeTwist::Identity(2), samples).unwrap();
    assert_eq!(s.quasi_periodicity_residual(), 0.0);
    assert!(periodic_loop(&s).unwrap().max_abs_diff(&p) <= 1e-12);
    let full = rotate(&rotate(&s, 64).unwrap(), 64).unwrap();
    assert_eq!(full.max_distance(&s), 0.0);
}

#[test]
fn non_quasi_periodic_samples_are_rejected() {
    let f = frame(1);
    let samples = vec![CVector::from_element(1, C64::new(1.0, 0.0)); N + 1];
    let twist = GaugeTwist::Holonomy(std::sync::Arc::new(f.clone()));
    assert!(TwistedSection::from_samples(f.base().clone(), &twist, samples).is_err());
}
