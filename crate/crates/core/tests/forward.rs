use proptest::prelude::*;

use pseudomode::bathmodel::PseudomodeBath;
use pseudomode::forward::{effective_kernel, effective_spectral_density, nd2_block, nd2_density};
use pseudomode::linalg::{c64, eigh, CMatrix};

fn random_bath(seed: &[f64], n: usize, sites: usize) -> PseudomodeBath {
    let mut it = seed.iter().cycle();
    let mut next = || *it.next().unwrap();
    let l = CMatrix::from_fn(n, n, |_, _| c64(next(), next()));
    let l = (&l + l.adjoint()) * c64(0.5, 0.0);
    let gamma = (0..n).map(|_| 0.1 + next().abs()).collect();
    let zeta = CMatrix::from_fn(n, sites, |_, _| c64(next(), next()));
    PseudomodeBath::new(l, gamma, zeta).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn physical_baths_have_positive_semidefinite_density(
        seed in prop::collection::vec(-1.0f64..1.0, 17),
        n in 1usize..5,
        sites in 1usize..3,
        w in -4.0f64..4.0,
    ) {
        let bath = random_bath(&seed, n, sites);
        let j = effective_spectral_density(&bath, w).unwrap();
        let jc = j.map(|x| c64(x, 0.0));
        let (vals, _) = eigh(&jc);
        prop_assert!(vals.iter().all(|&v| v > -1e-12 * (1.0 + j.norm())));
    }

    #[test]
    fn kernel_starts_at_coupling_gram_matrix(seed in prop::collection::vec(-1.0f64..1.0, 13), n in 1usize..5) {
        let bath = random_bath(&seed, n, 2);
        let chi0 = effective_kernel(&bath, 0.0);
        let gram = bath.zeta().adjoint() * bath.zeta();
        prop_assert!((chi0 - gram).norm() < 1e-12 * (1.0 + bath.zeta().norm_squared()));
    }

    #[test]
    fn defective_two_mode_density_is_nonnegative(delta in 0.1f64..2.0, eps in -1.0f64..1.0, w in -5.0f64..5.0) {
        let _ = nd2_block(eps, delta, 0.0, c64(1.0, 0.0), c64(0.0, 0.0)).unwrap();
        prop_assert!(nd2_density(eps, delta, 0.0, c64(1.0, 0.0), c64(0.0, 0.0), w) >= -1e-14);
    }
}
