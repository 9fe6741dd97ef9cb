//! Property tests for invariants that must hold for every input.

mod common;

use common::{adaptive_simpson, direct_epsilon, direct_eta, interval_intensity, random_hawkes, rel_err, rng};
use hawkes_qla::config::KvConfig;
use hawkes_qla::diagnostics::time_rescaling_test;
use hawkes_qla::events::{parse_events, EventStream, ReadOptions, TimeWindow};
use hawkes_qla::likelihood::{log_likelihood, relative_lattice, IntensityModel};
use hawkes_qla::models::{hawkes_compensator, hawkes_evolve, HawkesModel, HawkesState, PoissonModel, PoissonParams};
use hawkes_qla::simulation::{simulate_hawkes, simulate_thinning, Sampler, SimConfig};
use hawkes_qla::stats::ks_one_sample;
use proptest::prelude::*;

/// Sorted, strictly increasing event times in `(0, horizon)` with marks.
fn schedule(d: usize) -> impl Strategy<Value = (Vec<f64>, Vec<usize>, f64)> {
    (1.0f64..40.0, prop::collection::vec((0.0f64..1.0, 0..d), 0..40)).prop_map(|(horizon, raw)| {
        let mut ev: Vec<(f64, usize)> = raw.into_iter().map(|(u, m)| (u * horizon, m)).filter(|e| e.0 > 0.0).collect();
        ev.sort_by(|a, b| a.0.total_cmp(&b.0));
        ev.dedup_by(|a, b| a.0 == b.0);
        let (t, m) = ev.into_iter().unzip();
        (t, m, horizon)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn recursion_equals_direct_sums(seed in any::<u64>(), d in 1usize..=3, sched in schedule(3)) {
        let (times, marks, horizon) = sched;
        let marks: Vec<usize> = marks.into_iter().map(|m| m % d).collect();
        let theta = random_hawkes(&mut rng(seed), d);
        let mut state = HawkesState::zero(d);
        let mut now = 0.0;
        for (&t, &m) in times.iter().zip(&marks) {
            state = hawkes_evolve(&state, &theta, t - now, Some(m)).unwrap();
            now = t;
        }
        let end = hawkes_evolve(&state, &theta, horizon - now, None).unwrap();
        let eps = direct_epsilon(&theta, &times, &marks, horizon);
        let eta = direct_eta(&theta, &times, &marks, horizon);
        for k in 0..d * d {
            prop_assert!((end.epsilon.as_slice()[k] - eps[k]).abs() <= 1e-10 * (1.0 + eps[k].abs()));
            prop_assert!((end.eta.as_slice()[k] - eta[k]).abs() <= 1e-10 * (1.0 + eta[k].abs()));
        }
        prop_assert!((end.t - horizon).abs() <= 1e-12 * horizon);
    }

    #[test]
    fn excitation_never_increases_without_jumps(seed in any::<u64>(), d in 1usize..=3, dt in 0.0f64..10.0) {
        let mut r = rng(seed);
        let theta = random_hawkes(&mut r, d);
        let mut state = HawkesState::zero(d);
        for m in 0..d {
            state = hawkes_evolve(&state, &theta, 0.3, Some(m)).unwrap();
        }
        let later = hawkes_evolve(&state, &theta, dt, None).unwrap();
        for (a, b) in later.epsilon.as_slice().iter().zip(state.epsilon.as_slice()) {
            prop_assert!(*a <= *b && *a >= 0.0);
        }
        prop_assert!(hawkes_evolve(&state, &theta, -1.0, None).is_err());
    }

    #[test]
    fn compensator_matches_quadrature_of_intensity(seed in any::<u64>(), d in 1usize..=2, sched in schedule(2)) {
        let (times, marks, horizon) = sched;
        let marks: Vec<usize> = marks.into_iter().map(|m| m % d).collect();
        let theta = random_hawkes(&mut rng(seed), d);
        let s = EventStream::new(times, marks, d, horizon).unwrap();
        let closed = hawkes_compensator(&s, &theta, horizon).unwrap();
        let mut knots = vec![0.0];
        knots.extend(s.times());
        knots.push(horizon);
        for alpha in 0..d {
            let quad: f64 = knots
                .windows(2)
                .map(|w| adaptive_simpson(|x| interval_intensity(&theta, &s, alpha, w[0], x), w[0], w[1], 1e-13))
                .sum();
            prop_assert!(rel_err(closed[alpha], quad, 1e-300) <= 1e-8, "{} vs {}", closed[alpha], quad);
        }
    }

    #[test]
    fn rescaling_residuals_are_positive_and_sum_to_compensator(seed in 0u64..1000) {
        let theta = random_hawkes(&mut rng(seed), 2);
        let s = simulate_hawkes(&theta, Sampler::Thinning, &SimConfig::new(30.0, seed)).unwrap().stream;
        let model = HawkesModel::new(2);
        let v = model.vector(&theta);
        let res = time_rescaling_test(&s, &model, &v).unwrap();
        for comp in &res {
            prop_assert!(comp.residuals.iter().all(|&r| r > 0.0));
            prop_assert_eq!(comp.residuals.len(), s.count(comp.component));
            if let Some(ks) = &comp.ks {
                prop_assert!((0.0..=1.0).contains(&ks.p_value));
            }
            if let Some(&last) = s.component_times(comp.component).last() {
                let total: f64 = comp.residuals.iter().sum();
                let lam = model.compensator_at(&s, &v, &[last]).unwrap()[0][comp.component];
                prop_assert!((total - lam).abs() <= 1e-9 * lam);
            }
        }
    }

    #[test]
    fn simulated_streams_are_valid_and_reproducible(seed in any::<u64>(), stream in 0u64..100, exact in any::<bool>()) {
        let theta = random_hawkes(&mut rng(seed), 2);
        let sampler = if exact { Sampler::Exact } else { Sampler::Thinning };
        let cfg = SimConfig::new(20.0, seed).with_stream(stream);
        let a = simulate_hawkes(&theta, sampler, &cfg).unwrap().stream;
        let b = simulate_hawkes(&theta, sampler, &cfg).unwrap().stream;
        prop_assert_eq!(&a, &b);
        prop_assert!(a.times().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(a.times().iter().all(|&t| t > 0.0 && t <= 20.0));
        prop_assert!(a.marks().iter().all(|&m| m < 2));
    }

    #[test]
    fn event_csv_round_trip_is_exact(sched in schedule(3)) {
        let (times, marks, horizon) = sched;
        let s = EventStream::new(times, marks, 3, horizon).unwrap();
        let opts = ReadOptions { dim: Some(3), ..ReadOptions::new(horizon) };
        prop_assert_eq!(parse_events(&s.to_csv(), opts).unwrap(), s);
    }

    #[test]
    fn restriction_keeps_exactly_the_window(sched in schedule(2), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (times, marks, horizon) = sched;
        let s = EventStream::new(times, marks, 2, horizon).unwrap();
        let (lo, hi) = (a.min(b) * horizon, a.max(b) * horizon);
        prop_assume!(hi > lo);
        let w = s.restrict(TimeWindow::new(lo, hi).unwrap()).unwrap();
        let expected = s.times().iter().filter(|&&t| t > lo && t <= hi).count();
        prop_assert_eq!(w.len(), expected);
        prop_assert!((w.horizon() - (hi - lo)).abs() <= 1e-12 * horizon);
    }

    #[test]
    fn config_values_round_trip_through_text(values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..8)) {
        let mut cfg = KvConfig::new();
        cfg.set_list("x", &values);
        cfg.set("y", values[0]);
        let back = KvConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(back.get_list::<f64>("x").unwrap().unwrap(), values.clone());
        prop_assert_eq!(back.get::<f64>("y").unwrap().unwrap().to_bits(), values[0].to_bits());
    }

    #[test]
    fn poisson_loglik_is_closed_form(rate in 0.1f64..10.0, seed in any::<u64>()) {
        let s = simulate_thinning(&PoissonParams::new(vec![rate]).unwrap(), (), &SimConfig::new(10.0, seed)).unwrap().stream;
        let n = s.len() as f64;
        let at = 0.7 * rate;
        let l = log_likelihood(&s, &PoissonModel::new(1), &[at]).unwrap();
        prop_assert!(rel_err(l, n * at.ln() - at * 10.0, 1.0) <= 1e-12);
    }

    #[test]
    fn ks_outputs_are_probabilities(x in prop::collection::vec(0.0f64..5.0, 1..60)) {
        let r = ks_one_sample(&x, |v| 1.0 - (-v).exp());
        prop_assert!((0.0..=1.0).contains(&r.statistic));
        prop_assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn relative_lattice_contains_reference(theta in prop::collection::vec(0.1f64..5.0, 1..4), levels in 1usize..3) {
        let g = relative_lattice(&theta, 0.2, levels);
        prop_assert_eq!(g.len(), (2 * levels + 1).pow(theta.len() as u32));
        prop_assert!(g.contains(&theta));
    }
}
