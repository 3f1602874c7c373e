use num_complex::Complex64;
use proptest::prelude::*;

use pseudomode::bathmodel::{ExpFit, KernelSample};
use pseudomode::linalg::{c64, CMatrix};
use pseudomode::pronyfit::{prony_fit, takagi};

fn term() -> impl Strategy<Value = (Complex64, f64, f64)> {
    (0.2f64..1.0, -3.0f64..3.0, -2.5f64..2.5, 0.3f64..2.0)
        .prop_map(|(r, phase, eps, gamma)| (Complex64::from_polar(r, phase), eps, gamma))
}

fn separated(terms: &[(Complex64, f64, f64)]) -> bool {
    terms.iter().enumerate().all(|(i, a)| {
        terms[i + 1..].iter().all(|b| (a.1 - b.1).abs() + 0.5 * (a.2 - b.2).abs() > 0.4)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn recovers_exact_exponential_sums(terms in prop::collection::vec(term(), 1..4)) {
        prop_assume!(separated(&terms));
        let truth = ExpFit::scalar(&terms);
        let samples = KernelSample::from_fn(0.1, 25, |t| truth.kernel(t)).unwrap();
        let fit = prony_fit(&samples, terms.len()).unwrap();
        for t in [0.0, 0.7, 3.1] {
            let err = (fit.kernel(t)[(0, 0)] - truth.kernel(t)[(0, 0)]).norm();
            prop_assert!(err < 1e-8, "kernel error {err} at t = {t}");
        }
        for (k, e, g) in &terms {
            let best = fit.terms.iter()
                .map(|f| (f.kappa[(0, 0)] - k).norm() + (f.eps - e).abs() + (f.gamma - g).abs())
                .fold(f64::INFINITY, f64::min);
            prop_assert!(best < 1e-6);
        }
    }

    #[test]
    fn takagi_reconstructs_symmetric_matrices(
        entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 36)
    ) {
        let n = 6;
        let a = CMatrix::from_fn(n, n, |i, j| {
            let (p, q) = (i.min(j), i.max(j));
            let (re, im) = entries[p * n + q];
            c64(re, im)
        });
        let (u, s) = takagi(&a).unwrap();
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, s.iter().map(|&x| c64(x, 0.0))));
        let back = &u * d * u.transpose();
        prop_assert!((&back - &a).norm() < 1e-9 * a.norm().max(1.0));
        prop_assert!((u.adjoint() * &u - CMatrix::identity(n, n)).norm() < 1e-9);
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn too_many_modes_for_the_samples_is_an_error() {
    let truth = ExpFit::scalar(&[(c64(1.0, 0.0), 0.0, 1.0)]);
    let samples = KernelSample::from_fn(0.1, 3, |t| truth.kernel(t)).unwrap();
    assert!(prony_fit(&samples, 5).is_err());
}
