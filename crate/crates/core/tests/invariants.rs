use brwld::decoration::sample_decoration_with;
use brwld::estimators::{c_theta_with, gw_survival, mean_count, spinal_tail_with, theta_sweep, CVariant};
use brwld::harness::{derive_stream, Moments};
use brwld::spine::{build_auxiliary, sample_size_biased, AuxOptions, AuxiliaryBuilder};
use brwld::tree_sim::{
    additive_martingale, big_ratio_f64, enumerate_tail, extremal_process, naive_tail, run_forward, DEFAULT_CAP,
};
use brwld::{Rational, ReproductionLaw};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn binary_gaussian() -> ReproductionLaw {
    ReproductionLaw::fixed_gaussian(2, 0.0, 1.0).unwrap()
}

fn mixed(p0: i64, p2: i64, den: i64) -> ReproductionLaw {
    ReproductionLaw::mixed_gaussian(vec![(0, r(p0, den)), (2, r(p2, den))], 0.0, 1.0).unwrap()
}

fn opts(delta: f64) -> AuxOptions {
    AuxOptions { prune_delta: delta, ..AuxOptions::estimator() }
}

/// Small tabulated laws with displacements in {-2..2}/2 and up to three
/// children, rows weighted by integers.
fn small_law() -> impl Strategy<Value = ReproductionLaw> {
    let row = (1i64..4, proptest::collection::vec(-2i64..=2, 0..4));
    proptest::collection::vec(row, 1..4).prop_filter_map("needs a child somewhere", |rows| {
        let total: i64 = rows.iter().map(|(w, _)| w).sum();
        let rows: Vec<_> = rows
            .into_iter()
            .map(|(w, ds)| (r(w, total), ds.into_iter().map(|d| r(d, 2)).collect::<Vec<_>>()))
            .collect();
        ReproductionLaw::tabulated(rows).ok()
    })
}

fn fixed(cases: u32, seed: u64) -> ProptestConfig {
    ProptestConfig { cases, rng_seed: RngSeed::Fixed(seed), failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(fixed(24, 11))]

    #[test]
    fn spinal_tail_is_unbiased(law in small_law(), theta in 0.3f64..2.0, n in 1usize..=3, a2 in -4i64..=6, seed in any::<u64>()) {
        let a = r(a2, 2);
        let exact = big_ratio_f64(&enumerate_tail(&law, n, a).unwrap());
        let level = a2 as f64 / 2.0;
        let est = spinal_tail_with(&law, theta, n, level, 20_000, seed, opts(0.0)).unwrap();
        if exact == 0.0 {
            prop_assert_eq!(est.mean, 0.0);
        } else {
            prop_assert!((est.mean - exact).abs() <= 3.0 * est.stderr + 1e-12, "{} vs {} ± {}", exact, est.mean, est.stderr);
        }
    }

    #[test]
    fn naive_tail_agrees_with_enumeration(law in small_law(), n in 1usize..=3, a2 in -4i64..=6, seed in any::<u64>()) {
        let exact = big_ratio_f64(&enumerate_tail(&law, n, r(a2, 2)).unwrap());
        let replicas = 4000;
        let est = naive_tail(&law, n, a2 as f64 / 2.0, replicas, DEFAULT_CAP, seed).unwrap();
        let binomial = (exact * (1.0 - exact) / replicas as f64).sqrt();
        prop_assert!((est.mean - exact).abs() <= 3.0 * binomial + 1e-12, "{} vs {}", exact, est.mean);
    }
}

proptest! {
    #![proptest_config(fixed(64, 12))]

    #[test]
    fn auxiliary_process_is_nested_in_n(seed in any::<u64>(), n in 0usize..25) {
        let law = mixed(3, 2, 5);
        let builder = AuxiliaryBuilder::new(&law, 1.0, n + 1, AuxOptions::full(f64::INFINITY)).unwrap();
        let a = builder.build(n, &mut derive_stream(seed, 0));
        let b = builder.build(n + 1, &mut derive_stream(seed, 0));
        prop_assert!(a.atoms.unwrap().is_contained_in(b.atoms.as_ref().unwrap()));
        prop_assert_eq!(a.prune_bias_bound, 0.0);
        prop_assert_eq!(b.prune_bias_bound, 0.0);
    }

    #[test]
    fn continuous_laws_have_no_ties_at_zero(seed in any::<u64>(), n in 1usize..30) {
        let r = build_auxiliary(&binary_gaussian(), 1.5, n, 4.0, 1e-8, DEFAULT_CAP, &mut derive_stream(seed, 0)).unwrap();
        prop_assert_eq!(r.count_at_zero, 1);
        prop_assert_eq!(r.bar_count, 0);
    }

    #[test]
    fn extremal_process_has_its_max_at_zero(seed in any::<u64>(), n in 0usize..8) {
        let gens = run_forward(&mixed(1, 3, 4), n, DEFAULT_CAP, &mut derive_stream(seed, 0));
        let last = gens.last().unwrap();
        match extremal_process(last) {
            Ok(e) => {
                prop_assert_eq!(e.max_location(), Some(0.0));
                prop_assert!(e.mass_at(0.0) >= 1);
                prop_assert_eq!(e.mass_above(0.0), 0);
            }
            Err(_) => prop_assert_eq!(last.population, 0),
        }
    }
}

#[test]
fn size_biased_brood_identity() {
    let law = ReproductionLaw::poisson_gaussian(1.5, 0.0, 1.0).unwrap();
    let theta = 1.0;
    let psi = law.log_laplace(theta).unwrap();
    let reps = 200_000u64;
    let fs: [fn(&[f64], f64) -> f64; 3] = [
        |d, _| d.len() as f64,
        |d, t| d.iter().map(|x| (t * x).exp()).sum(),
        |d, _| d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    ];
    for (k, f) in fs.iter().enumerate() {
        let mut biased = Moments::default();
        let mut plain = Moments::default();
        let mut brood = Vec::new();
        for i in 0..reps {
            let b = sample_size_biased(&law, theta, &mut derive_stream(1, i)).unwrap();
            biased.push(f(&b.displacements, theta));
            brood.clear();
            law.sample_brood(&mut derive_stream(2, i), &mut brood);
            if !brood.is_empty() {
                let w: f64 = brood.iter().map(|x| (theta * x - psi).exp()).sum();
                plain.push(w * f(&brood, theta));
            } else {
                plain.push(0.0);
            }
        }
        let se = (biased.stderr().powi(2) + plain.stderr().powi(2)).sqrt();
        assert!((biased.mean - plain.mean).abs() <= 3.0 * se, "f{k}: {} vs {} ± {se}", biased.mean, plain.mean);
    }
}

#[test]
fn additive_martingale_has_mean_one() {
    let law = mixed(1, 3, 4);
    for (n, theta) in [(1usize, 0.5), (3, 1.0), (6, 0.8)] {
        let psi = law.log_laplace(theta).unwrap();
        let mut m = Moments::default();
        for i in 0..20_000 {
            let gens = run_forward(&law, n, DEFAULT_CAP, &mut derive_stream(n as u64, i));
            m.push(additive_martingale(&gens[n], theta, psi).unwrap());
        }
        assert!((m.mean - 1.0).abs() <= 3.0 * m.stderr(), "n={n}: {} ± {}", m.mean, m.stderr());
    }
}

#[test]
fn forward_population_matches_galton_watson_survival() {
    let offspring = vec![(0, r(1, 4)), (1, r(1, 4)), (2, r(1, 2))];
    let law = ReproductionLaw::mixed_gaussian(offspring.clone(), 0.0, 1.0).unwrap();
    let reps = 20_000;
    for n in [1usize, 3, 6] {
        let exact = gw_survival(&offspring, n).unwrap().survival;
        let alive = (0..reps)
            .filter(|&i| run_forward(&law, n, DEFAULT_CAP, &mut derive_stream(7, i))[n].population > 0)
            .count() as f64
            / reps as f64;
        let se = (exact * (1.0 - exact) / reps as f64).sqrt();
        assert!((alive - exact).abs() <= 3.0 * se, "n={n}: {alive} vs {exact}");
    }
}

#[test]
fn mean_count_does_not_depend_on_the_tilt() {
    let law = ReproductionLaw::poisson_gaussian(1.3, 0.2, 0.8).unwrap();
    let a = mean_count(&law, 0.8, 8, 6.0, 50_000, 1).unwrap();
    let b = mean_count(&law, 1.6, 8, 6.0, 50_000, 2).unwrap();
    let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    assert!((a.mean - b.mean).abs() <= 3.0 * se, "{} vs {}", a.mean, b.mean);
}

#[test]
fn c_theta_variants_agree() {
    for (law, theta) in [(ReproductionLaw::poisson_gaussian(1.5, 0.0, 1.0).unwrap(), 1.2), (mixed(1, 3, 4), 1.0)] {
        let w = c_theta_with(&law, theta, Some(30), 20_000, CVariant::Weighted, 3, opts(1e-8)).unwrap();
        let i = c_theta_with(&law, theta, Some(30), 20_000, CVariant::Indicator, 4, opts(1e-8)).unwrap();
        let se = (w.estimate.stderr.powi(2) + i.estimate.stderr.powi(2)).sqrt();
        assert!((w.estimate.mean - i.estimate.mean).abs() <= 3.0 * se);
        assert!(w.estimate.mean > 0.0 && w.estimate.mean < 1.0);
    }
}

#[test]
fn decoration_acceptance_estimates_c_theta() {
    let law = binary_gaussian();
    let theta = 1.5;
    // acceptance only looks above 0, so a narrow window estimates the same thing
    let dec_opts = AuxOptions { window: 1.0, ..opts(1e-8) };
    let dec = sample_decoration_with(&law, theta, 30, 3000, 5, dec_opts).unwrap();
    let c = c_theta_with(&law, theta, Some(30), 20_000, CVariant::Indicator, 6, opts(1e-8)).unwrap();
    let se = (dec.acceptance_stderr.powi(2) + c.estimate.stderr.powi(2)).sqrt();
    assert!((dec.acceptance_rate - c.estimate.mean).abs() <= 3.0 * se, "{} vs {}", dec.acceptance_rate, c.estimate.mean);
    for s in &dec.samples {
        assert_eq!(s.atoms.mass_above(0.0), 0);
        assert_eq!(s.atoms.mass_at(0.0), 1);
    }
}

#[test]
fn c_theta_is_continuous_in_theta() {
    let rep = theta_sweep(&binary_gaussian(), &[1.48, 1.49, 1.5, 1.51, 1.52], 30, 5000, CVariant::Weighted, 8, opts(1e-8)).unwrap();
    assert!(rep.max_jump_sigmas <= 4.0, "{}", rep.max_jump_sigmas);
}

#[test]
fn stderr_scales_with_replicas() {
    let law = binary_gaussian();
    let small = spinal_tail_with(&law, 1.5, 30, 45.0, 1000, 9, opts(1e-8)).unwrap();
    let large = spinal_tail_with(&law, 1.5, 30, 45.0, 16_000, 10, opts(1e-8)).unwrap();
    let ratio = small.stderr / large.stderr;
    assert!((ratio / 4.0 - 1.0).abs() <= 0.2, "ratio {ratio}");
}
