use proptest::prelude::*;
use twostate::linalg::{c, eig_hermitian, random_hermitian, random_state, Operator};
use twostate::make_generic;
use twostate::measurement::{pointer_final, weak_readout, CouplingSpec, PointerState};
use twostate::multistate::{multi_inner, MultipleState};
use twostate::observables::{abl_prob, labels_close, weak_value};
use twostate::oracle::{enumerate_conditional, sample_conditional, MeasurementChain, Step};
use twostate::two_state::inner;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tensor_is_associative(s in any::<u64>()) {
        let (a, b, d) = (random_hermitian(2, s), random_hermitian(3, s ^ 1), random_hermitian(2, s ^ 2));
        let left = a.tensor(&b).unwrap().tensor(&d).unwrap();
        let right = a.tensor(&b.tensor(&d).unwrap()).unwrap();
        prop_assert!(left.distance(&right).unwrap() <= 1e-13);
    }

    #[test]
    fn eigendecomposition_reconstructs(s in any::<u64>(), dim in 2usize..6) {
        let a = random_hermitian(dim, s);
        let e = eig_hermitian(&a).unwrap();
        let back = e
            .vectors
            .iter()
            .zip(&e.values)
            .fold(Operator::zeros(dim), |acc, (v, &x)| acc.plus(&Operator::projector(v).scale(c(x, 0.0))).unwrap());
        prop_assert!(back.distance(&a).unwrap() <= 1e-10 * a.frobenius_norm().max(1.0));
    }

    #[test]
    fn random_states_are_not_collinear(s in 0u64..u64::MAX - 1, dim in 2usize..5) {
        let overlap = random_state(dim, s).inner(&random_state(dim, s + 1)).unwrap().norm();
        prop_assert!(overlap < 1.0 - 1e-9);
    }

    #[test]
    fn single_interval_multi_inner_is_inner(s in any::<u64>(), dim in 2usize..5) {
        let r1 = make_generic(&random_state(dim, s), &random_state(dim, s ^ 3)).unwrap();
        let r2 = make_generic(&random_state(dim, s ^ 5), &random_state(dim, s ^ 7)).unwrap();
        let m1 = MultipleState::product(vec![r1.clone()]).unwrap();
        let m2 = MultipleState::product(vec![r2.clone()]).unwrap();
        let direct = inner(&r1, &r2).unwrap();
        prop_assert!((multi_inner(&m1, &m2).unwrap() - direct).norm() <= 1e-12 * direct.norm().max(1.0));
    }

    #[test]
    fn weak_value_ignores_normalization(s in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        prop_assume!(re.hypot(im) > 1e-3);
        let r = make_generic(&random_state(2, s), &random_state(2, s ^ 9)).unwrap();
        let a = random_hermitian(2, s ^ 11);
        let w = weak_value(&r, &a).unwrap().value;
        let scaled = twostate::TwoState::new(r.operator().scale(c(re, im)));
        prop_assert!((weak_value(&scaled, &a).unwrap().value - w).norm() <= 1e-10 * w.norm().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn oracle_sampling_agrees_with_enumeration(s in any::<u64>(), dim in 2usize..4) {
        let chain = MeasurementChain::new(
            random_state(dim, s),
            random_state(dim, s ^ 1),
            vec![
                Step::Measure { op: random_hermitian(dim, s ^ 2), record: true },
                Step::Measure { op: random_hermitian(dim, s ^ 3), record: false },
                Step::Measure { op: random_hermitian(dim, s ^ 4), record: true },
            ],
        )
        .unwrap();
        let exact = enumerate_conditional(&chain).unwrap();
        let trials = 20_000;
        let sampled = sample_conditional(&chain, trials, s).unwrap();
        // five binomial standard deviations at worst-case p = 1/2
        let tol = 5.0 * (0.25 / trials as f64).sqrt();
        prop_assert!(exact.max_abs_diff_by(&sampled, |x, y| labels_close(x, y, 1e-9)) <= tol);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ultra_strong_pointer_resolves_abl(s in any::<u64>(), dim in 2usize..4) {
        let (psi1, psi2) = (random_state(dim, s), random_state(dim, s ^ 1));
        let a = random_hermitian(dim, s ^ 2);
        let g0 = 1e3;
        let p0 = PointerState::gaussian(0.0, 1e-2).unwrap();
        let fin = pointer_final(&psi1, &psi2, &CouplingSpec::new(g0, a.clone()).unwrap(), &p0).unwrap();
        let abl = abl_prob(&make_generic(&psi1, &psi2).unwrap(), &a).unwrap();
        let total = fin.norm_sqr();
        let labels = abl.labels();
        let mut mass = vec![0.0; labels.len()];
        for k in 0..fin.len() {
            let nearest = (0..labels.len())
                .min_by(|&i, &j| (fin.pi(k) - g0 * labels[i]).abs().total_cmp(&(fin.pi(k) - g0 * labels[j]).abs()))
                .unwrap();
            mass[nearest] += fin.amps()[k].norm_sqr() * fin.dpi();
        }
        for (m, &p) in mass.iter().zip(abl.probs()) {
            prop_assert!((m / total - p).abs() <= 1e-9, "{} vs {p}", m / total);
        }
    }
}

/// The calibrated readout is linear in the weak value over random instances.
#[test]
fn weak_readout_tracks_weak_value_linearly() {
    let p0 = PointerState::gaussian(0.0, 1.0).unwrap();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for k in 0..40u64 {
        let (psi1, psi2) = (random_state(2, 900 + k), random_state(2, 950 + k));
        let a = random_hermitian(2, 990 + k);
        let aw = weak_value(&make_generic(&psi1, &psi2).unwrap(), &a)
            .unwrap()
            .value;
        let ro = weak_readout(&psi1, &psi2, &CouplingSpec::new(1e-3, a).unwrap(), &p0).unwrap();
        xs.extend([aw.re, aw.im]);
        ys.extend([ro.re, ro.im]);
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = sxy * sxy / (sxx * syy);
    assert!(r2 > 0.999, "R^2 = {r2}");
    assert!((slope - 1.0).abs() < 1e-3, "slope = {slope}");
}
