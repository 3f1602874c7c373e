use num_complex::Complex64;
use proptest::prelude::*;

use pseudomode::bathmodel::ExpFit;
use pseudomode::forward::effective_spectral_density;
use pseudomode::inversion::{invert, symmetric_two_mode_fit, two_mode_feasibility, two_mode_rates, InversionChoices};
use pseudomode::linalg::{c64, hermitian_defect, CVector};

fn fit_strategy() -> impl Strategy<Value = ExpFit> {
    (1usize..5)
        .prop_flat_map(|n| {
            (
                prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n),
                prop::collection::vec((-3.0f64..3.0, 0.2f64..3.0), n),
                0.2f64..2.0,
            )
        })
        .prop_filter_map("rates too close", |(kap, rates, lift)| {
            let n = kap.len();
            let close = (0..n).any(|i| (i + 1..n).any(|j| (rates[i].0 - rates[j].0).abs() + (rates[i].1 - rates[j].1).abs() < 0.1));
            if close {
                return None;
            }
            let mut kap: Vec<Complex64> = kap.into_iter().map(|(a, b)| c64(a, b)).collect();
            let im: f64 = kap.iter().map(|k| k.im).sum();
            let re: f64 = kap.iter().map(|k| k.re).sum();
            kap[0] += c64(lift - re, -im);
            let terms: Vec<_> = kap.iter().zip(&rates).map(|(k, r)| (*k, r.0, r.1)).collect();
            Some(ExpFit::scalar(&terms))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn round_trip_reproduces_the_fit(fit in fit_strategy()) {
        let r = invert(&fit, &InversionChoices::default()).unwrap();
        prop_assert!(r.diagnostics.kappa_error < 1e-9);
        prop_assert!(r.diagnostics.exponent_error < 1e-9);
        prop_assert!(hermitian_defect(r.bath.lambda()) < 1e-12 * r.bath.lambda().norm().max(1.0));
        for w in [-2.0, -0.3, 0.0, 1.1, 2.5] {
            let a = effective_spectral_density(&r.bath, w).unwrap()[(0, 0)];
            let b = fit.density(w)[(0, 0)];
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn gauge_choices_leave_the_density_unchanged(
        fit in fit_strategy(),
        u in prop::collection::vec((0.3f64..2.0, -1.0f64..1.0), 5),
    ) {
        let n = fit.terms.len();
        let u = CVector::from_iterator(n, u.iter().take(n).map(|&(m, p)| Complex64::from_polar(m, p)));
        let other = InversionChoices { u: Some(u), ..Default::default() };
        let a = invert(&fit, &InversionChoices::default()).unwrap();
        let b = invert(&fit, &other).unwrap();
        for w in [-1.7, 0.2, 0.9, 3.0] {
            let ja = effective_spectral_density(&a.bath, w).unwrap()[(0, 0)];
            let jb = effective_spectral_density(&b.bath, w).unwrap()[(0, 0)];
            prop_assert!((ja - jb).abs() < 1e-9 * (1.0 + ja.abs()));
        }
    }

    #[test]
    fn two_mode_rates_match_closed_form(
        alpha in 0.2f64..2.0, beta in -1.5f64..1.5, eps in 0.2f64..2.5, gamma in 0.2f64..2.0, ap in 0.0f64..3.0,
    ) {
        let Some((lo, hi)) = two_mode_rates(alpha, beta, eps, gamma, ap) else {
            return Ok(());
        };
        let fit = symmetric_two_mode_fit(alpha, beta, eps, gamma);
        let Ok(r) = invert(&fit, &InversionChoices { a_prime: Some(ap), ..Default::default() }) else {
            return Ok(());
        };
        let mut g = r.bath.gamma().to_vec();
        g.sort_by(f64::total_cmp);
        prop_assert!((g[0] - lo).abs() < 1e-10 * (1.0 + lo.abs()));
        prop_assert!((g[1] - hi).abs() < 1e-10 * (1.0 + hi.abs()));
    }

    #[test]
    fn feasibility_witness_is_physical(
        alpha in 0.1f64..2.0, beta in -1.5f64..1.5, eps in 0.2f64..2.5, gamma in 0.2f64..2.0,
    ) {
        let f = two_mode_feasibility(alpha, beta, eps, gamma);
        if f.feasible {
            let ap = f.witness.unwrap();
            let fit = symmetric_two_mode_fit(alpha, beta, eps, gamma);
            let r = invert(&fit, &InversionChoices { a_prime: Some(ap), ..Default::default() }).unwrap();
            prop_assert!(r.diagnostics.min_gamma >= -1e-10);
        }
    }
}
