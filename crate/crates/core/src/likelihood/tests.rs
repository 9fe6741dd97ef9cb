use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::models::{
    hawkes_compensator, HawkesModel, LobLayout, LobLinearModel, LobState, PoissonModel,
};

fn random_stream(rng: &mut ChaCha8Rng, dim: usize, n: usize, horizon: f64) -> EventStream {
    let mut times: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..horizon)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let marks = times.iter().map(|_| rng.random_range(0..dim)).collect();
    EventStream::new(times, marks, dim, horizon).unwrap()
}

fn random_theta(rng: &mut ChaCha8Rng, model: &HawkesModel) -> Vec<f64> {
    let d = model.dim();
    let k = model.active_pairs().len();
    let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(0.3..2.0)).collect();
    v.extend((0..k).map(|_| rng.random_range(0.1..1.5)));
    v.extend((0..k).map(|_| rng.random_range(0.5..4.0)));
    v
}

fn rel_err(fd: &[f64], an: &[f64]) -> f64 {
    let num = fd.iter().zip(an).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let den = an.iter().map(|a| a.abs()).fold(1.0, f64::max);
    num / den
}

#[test]
fn poisson_closed_forms() {
    let m = PoissonModel::new(1);
    let s = EventStream::new(vec![0.5, 1.0, 1.5], vec![0; 3], 1, 2.0).unwrap();
    let l = log_likelihood(&s, &m, &[1.5]).unwrap();
    assert!((l - (3.0 * 1.5f64.ln() - 3.0)).abs() < 1e-14);
    assert!((l + 1.7836047).abs() < 1e-7);

    let times: Vec<f64> = (1..=50).map(|i| i as f64 * 0.2 - 0.1).collect();
    let s = EventStream::new(times, vec![0; 50], 1, 10.0).unwrap();
    assert_eq!(score(&s, &m, &[5.0]).unwrap(), vec![0.0]);
    assert!((observed_information(&s, &m, &[5.0]).unwrap()[(0, 0)] - 2.0).abs() < 1e-14);
    let g = empirical_fisher(&s, &m, &[4.0]).unwrap();
    assert!((g[(0, 0)] - 0.25).abs() < 1e-14);
}

#[test]
fn empty_hawkes_stream_is_linear_in_nu() {
    let m = HawkesModel::new(1);
    let s = EventStream::empty(1, 5.0).unwrap();
    let theta = [1.0, 0.7, 1.3];
    assert_eq!(log_likelihood(&s, &m, &theta).unwrap(), -5.0);
    assert_eq!(score(&s, &m, &theta).unwrap(), vec![-5.0, 0.0, 0.0]);
    let info = observed_information(&s, &m, &theta).unwrap();
    assert!(info.iter().all(|&x| x == 0.0));
}

#[test]
fn score_and_information_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for draw in 0..30 {
        let dim = 1 + draw % 2;
        let model = HawkesModel::new(dim);
        let s = random_stream(&mut rng, dim, 60, 30.0);
        let theta = random_theta(&mut rng, &model);
        let ev = model.evaluate(&s, &theta, Order::Hessian).unwrap();
        let grad: Vec<f64> = ev.gradient.unwrap().iter().copied().collect();
        let hess = ev.hessian.unwrap();
        let n = theta.len();
        let mut fd_g = vec![0.0; n];
        for i in 0..n {
            let h = 1e-5 * theta[i];
            let (mut up, mut dn) = (theta.clone(), theta.clone());
            up[i] += h;
            dn[i] -= h;
            fd_g[i] = (log_likelihood(&s, &model, &up).unwrap() - log_likelihood(&s, &model, &dn).unwrap())
                / (2.0 * h);
            let su = score(&s, &model, &up).unwrap();
            let sd = score(&s, &model, &dn).unwrap();
            let col: Vec<f64> = (0..n).map(|j| (su[j] - sd[j]) / (2.0 * h)).collect();
            let an: Vec<f64> = (0..n).map(|j| hess[(j, i)]).collect();
            assert!(rel_err(&col, &an) < 1e-5, "hessian column {i} draw {draw}");
        }
        assert!(rel_err(&fd_g, &grad) < 1e-6, "gradient draw {draw}: {fd_g:?} vs {grad:?}");
    }
}

#[test]
fn closed_form_compensator_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = HawkesModel::new(2);
    let s = random_stream(&mut rng, 2, 40, 20.0);
    let theta = random_theta(&mut rng, &model);
    let p = model.params(&theta).unwrap();
    let times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.5).collect();
    let comp = model.compensator_at(&s, &theta, &times).unwrap();
    for (q, c) in times.iter().zip(&comp) {
        let direct = hawkes_compensator(&s, &p, *q).unwrap();
        for (x, y) in c.iter().zip(&direct) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }
    let l = log_likelihood(&s, &model, &theta).unwrap();
    let lam = intensity_at(&s, &model, &theta, s.times()).unwrap();
    let sum: f64 = lam.iter().zip(s.marks()).map(|(v, &m)| v[m].ln()).sum();
    let total: f64 = comp.last().unwrap().iter().sum();
    assert!((l - (sum - total)).abs() < 1e-10 * l.abs());
}

#[test]
fn fisher_is_symmetric_psd_with_component_blocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let model = HawkesModel::new(2);
    let s = random_stream(&mut rng, 2, 80, 40.0);
    let theta = random_theta(&mut rng, &model);
    let g = empirical_fisher(&s, &model, &theta).unwrap();
    assert_eq!(g, g.transpose());
    let eig = g.clone().symmetric_eigen().eigenvalues;
    assert!(eig.iter().all(|&e| e > 0.0));
    let names = model.param_names();
    let row_of = |name: &str| -> usize { name[name.find('[').unwrap() + 1..].chars().next().unwrap().to_digit(10).unwrap() as usize };
    for i in 0..names.len() {
        for j in 0..names.len() {
            if row_of(&names[i]) != row_of(&names[j]) {
                assert_eq!(g[(i, j)], 0.0, "{} {}", names[i], names[j]);
            }
        }
    }
}

#[test]
fn fisher_quadrature_matches_interval_closed_form() {
    // One event, d=1: ∂λ/∂ν = 1 so the (ν,ν) entry is (1/T)∫ 1/λ.
    let model = HawkesModel::new(1);
    let s = EventStream::new(vec![1.0], vec![0], 1, 3.0).unwrap();
    let (nu, c, a) = (0.5, 2.0, 1.0);
    let g = empirical_fisher(&s, &model, &[nu, c, a]).unwrap();
    // ∫_0^2 ds / (ν + c e^{-as}) = [s - log(ν + c e^{-as})/(-a)·...] in closed form:
    // ∫ 1/(ν + c e^{-as}) ds = (1/ν)(s + log(ν + c e^{-as})/a).
    let prim = |s: f64| (s + (nu + c * (-a * s).exp()).ln() / a) / nu;
    let expected = (1.0 / nu + prim(2.0) - prim(0.0)) / 3.0;
    assert!((g[(0, 0)] - expected).abs() < 1e-12);
}

#[test]
fn likelihood_is_additive_across_a_split() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let model = HawkesModel::new(1);
    let s = random_stream(&mut rng, 1, 50, 25.0);
    let theta = [0.8, 0.9, 1.7];
    let full = log_likelihood(&s, &model, &theta).unwrap();
    let split = 11.3;
    let head = s.restrict(crate::events::TimeWindow::new(0.0, split).unwrap()).unwrap();
    let lam = intensity_at(&s, &model, &theta, s.times()).unwrap();
    let comp = model.compensator_at(&s, &theta, &[split, 25.0]).unwrap();
    let tail_sum: f64 = s
        .iter()
        .zip(&lam)
        .filter(|((t, _), _)| *t > split)
        .map(|((_, m), v)| v[m].ln())
        .sum();
    let tail = tail_sum - (comp[1][0] - comp[0][0]);
    let head_l = log_likelihood(&head, &model, &theta).unwrap();
    assert!((full - (head_l + tail)).abs() <= 1e-10 * full.abs());
}

#[test]
fn masked_model_drops_coordinates() {
    let mask = vec![true, false, true, true];
    let model = HawkesModel::with_mask(2, Some(mask)).unwrap();
    assert_eq!(model.n_params(), 2 + 2 * 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = random_stream(&mut rng, 2, 40, 20.0);
    let theta = random_theta(&mut rng, &model);
    let g = score(&s, &model, &theta).unwrap();
    assert_eq!(g.len(), 8);
}

#[test]
fn lob_likelihood_is_maximised_by_counts_over_exposure() {
    let layout = LobLayout::new(2).unwrap();
    let model = LobLinearModel::new(layout, LobState::empty(&layout)).unwrap();
    // L0, L1, L0, C0, M_bid, M_ask  (marks: L=0..2, C=2..4, M_bid=4, M_ask=5)
    let s = EventStream::new(vec![0.5, 1.0, 1.5, 2.0, 3.0, 3.5], vec![0, 1, 0, 2, 4, 5], 6, 4.0).unwrap();
    let (counts, exposure) = model.sufficient_statistics(&s).unwrap();
    assert_eq!(counts, vec![2.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
    // |X_0| is 1 on (0.5,1.5], 2 on (1.5,2], 1 on (2,3], 0 after the market order.
    assert!((exposure[2] - (1.0 + 1.0 + 1.0)).abs() < 1e-15);
    assert!((exposure[3] - 2.5).abs() < 1e-15);
    // The bid side is non-empty on (0.5, 3], the ask side on (1, 3.5].
    assert!((exposure[4] - 2.5).abs() < 1e-15);
    assert!((exposure[5] - 2.5).abs() < 1e-15);
    let theta: Vec<f64> = counts.iter().zip(&exposure).map(|(n, w)| (n / w).max(1e-3)).collect();
    let g = score(&s, &model, &theta).unwrap();
    for k in [0, 1, 2, 4, 5] {
        assert!(g[k].abs() < 1e-12);
    }
    let bad = EventStream::new(vec![0.5], vec![3], 6, 1.0).unwrap();
    assert_eq!(
        log_likelihood(&bad, &model, &theta),
        Err(LikelihoodError::ZeroIntensityAtEvent { index: 0 })
    );
}

#[test]
fn ratio_field_reference_is_zero() {
    let m = PoissonModel::new(1);
    let s = EventStream::new(vec![1.0, 2.0], vec![0, 0], 1, 3.0).unwrap();
    let r = ratio_field(&s, &m, &[1.0], &[vec![1.0]]).unwrap();
    assert_eq!(r.values, vec![0.0]);
    assert_eq!(r.chi0, None);
}
