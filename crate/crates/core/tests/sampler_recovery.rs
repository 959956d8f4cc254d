use bayes_lmm_core::sampler::run_chains;
use bayes_lmm_core::sampler::targets::{BetaBinomial, IsoGaussian, NormalMean};
use bayes_lmm_core::{math, SamplerConfig};

fn config(seed: u64) -> SamplerConfig {
    SamplerConfig {
        chains: 4,
        iter: 2000,
        warmup: 1000,
        base_seed: seed,
        ..SamplerConfig::default()
    }
}

/// Posterior mean estimate and its Monte Carlo standard error.
fn mean_and_mcse(draws: &bayes_lmm_core::PosteriorDraws, name: &str) -> (f64, f64) {
    let col = draws.column_by_name(name).unwrap();
    let ess = draws.diagnostics_for(name).unwrap().ess.unwrap();
    (math::mean(&col), (math::sample_variance(&col) / ess).sqrt())
}

#[test]
fn beta_binomial_mean_within_three_mcse() {
    for (k, n, a, b, seed) in [
        (4, 10, 1.0, 1.0, 1),
        (40, 100, 10.0, 10.0, 2),
        (0, 5, 2.0, 2.0, 3),
    ] {
        let target = BetaBinomial::new(k, n, a, b).unwrap();
        let draws = run_chains(&target, &config(seed)).unwrap();
        let (m, mcse) = mean_and_mcse(&draws, "p");
        let truth = target.posterior_mean();
        assert!(
            (m - truth).abs() < 3.0 * mcse,
            "k={k} n={n}: {m} vs {truth} (mcse {mcse})"
        );
        let var = math::sample_variance(&draws.column_by_name("p").unwrap());
        assert!(
            (var / target.posterior_variance() - 1.0).abs() < 0.15,
            "variance {var}"
        );
        assert_eq!(draws.divergence_count, 0);
    }
}

#[test]
fn normal_mean_within_three_mcse() {
    let y = vec![1.2, 0.4, 2.2, 1.9, 0.8, 1.5, 1.1];
    let target = NormalMean::new(y, 1.0, 0.0, 2.0).unwrap();
    let draws = run_chains(&target, &config(11)).unwrap();
    let (m, mcse) = mean_and_mcse(&draws, "mu");
    let (truth, sd) = target.posterior();
    assert!((m - truth).abs() < 3.0 * mcse, "{m} vs {truth}");
    let est_sd = math::sample_variance(&draws.column_by_name("mu").unwrap()).sqrt();
    assert!((est_sd / sd - 1.0).abs() < 0.08, "{est_sd} vs {sd}");
}

#[test]
fn isotropic_gaussian_moments() {
    let draws = run_chains(&IsoGaussian::new(5), &config(5)).unwrap();
    for j in 0..5 {
        let col = draws.column(j);
        assert!(math::mean(&col).abs() < 0.1);
        assert!((math::sample_variance(&col) - 1.0).abs() < 0.12);
        assert!(draws.diagnostics[j].rhat.unwrap() < 1.01);
    }
}

#[test]
fn reruns_are_identical() {
    let target = BetaBinomial::new(7, 20, 1.0, 1.0).unwrap();
    let cfg = SamplerConfig {
        iter: 400,
        warmup: 200,
        ..config(42)
    };
    let a = run_chains(&target, &cfg).unwrap();
    let b = run_chains(&target, &cfg).unwrap();
    let bits = |d: &bayes_lmm_core::PosteriorDraws| {
        d.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.chain_stats, b.chain_stats);

    let c = run_chains(
        &target,
        &SamplerConfig {
            base_seed: 43,
            ..cfg
        },
    )
    .unwrap();
    assert_ne!(bits(&a), bits(&c));
}
