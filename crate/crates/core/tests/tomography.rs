use pdextract::rng::Stream;
use pdextract::states::{sample_haar, PureState};
use pdextract::tomography::{required_shots, snapshot, Backend, TomographyConfig};
use rayon::prelude::*;

fn max_error(p_hat: &[f64], p: &[f64]) -> f64 {
    p_hat.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[test]
fn hoeffding_shots_on_uniform_superposition() {
    let d = 64;
    let delta = 1.0 / 1024.0;
    let shots = required_shots(d, delta, 0.01).unwrap();
    assert_eq!(shots, 4_958_297);
    let cfg = TomographyConfig::multinomial(delta, shots, 0.01);
    let state: PureState<f64> = PureState::uniform(d).unwrap();
    let p = state.probabilities();
    let root = Stream::root(201);
    let within = (0..1000u64)
        .into_par_iter()
        .filter(|&t| {
            let snap = snapshot(&state, &cfg, &mut root.child(t).rng()).unwrap();
            assert!(!snap.under_sampled);
            max_error(&snap.p, &p) <= delta
        })
        .count();
    assert!(within >= 990, "{within} / 1000 within delta");
}

#[test]
fn multinomial_error_median_shrinks_with_shots() {
    let d = 64;
    let root = Stream::root(202);
    let state: PureState<f64> = sample_haar(d, &mut root.child(0).rng()).unwrap();
    let p = state.probabilities();
    let medians: Vec<f64> = [10_000u64, 100_000, 1_000_000]
        .iter()
        .enumerate()
        .map(|(i, &shots)| {
            let cfg = TomographyConfig::multinomial(0.5, shots, 0.01);
            let mut errs: Vec<f64> = (0..100u64)
                .into_par_iter()
                .map(|t| max_error(&snapshot(&state, &cfg, &mut root.grandchild(i as u64 + 1, t).rng()).unwrap().p, &p))
                .collect();
            errs.sort_by(f64::total_cmp);
            (errs[49] + errs[50]) / 2.0
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[1] <= w[0]), "{medians:?}");
}

#[test]
fn simplex_property_all_backends() {
    let root = Stream::root(203);
    for (i, backend) in [Backend::Exact, Backend::BoundedNoise, Backend::MultinomialShots].into_iter().enumerate() {
        let cfg = match backend {
            Backend::Exact => TomographyConfig::exact(),
            Backend::BoundedNoise => TomographyConfig::bounded_noise(1e-3),
            Backend::MultinomialShots => TomographyConfig::multinomial(1e-2, 50_000, 0.01),
        };
        for t in 0..200u64 {
            let d = 2 + (t as usize % 100);
            let s: PureState<f64> = sample_haar(d, &mut root.grandchild(i as u64, t).rng()).unwrap();
            let snap = snapshot(&s, &cfg, &mut root.grandchild(10 + i as u64, t).rng()).unwrap();
            assert!((snap.p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(snap.p.iter().all(|&x| (0.0..=1.0).contains(&x)));
            if backend != Backend::MultinomialShots {
                assert!(max_error(&snap.p, &s.probabilities()) <= cfg.delta);
            }
        }
    }
}
